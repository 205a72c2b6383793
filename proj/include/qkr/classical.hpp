#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "qkr/observables.hpp"
#include "qkr/rng.hpp"
#include "qkr/torus.hpp"

namespace qkr {

// Wraps an angle into (-pi, pi].
double wrap_angle(double v);

struct PhasePoint {
    double x = 0.0;
    double p = 0.0;
};

struct TangentVector {
    double dx = 0.0;
    double dp = 0.0;
};

struct ClassicalEnsemble {
    std::vector<PhasePoint> points;
};

struct LyapunovEstimate {
    double lambda = 0.0;  // per kick
    double std_error = 0.0;
    int n_steps = 0;
    int n_samples = 0;
    int n_rejected = 0;  // island candidates replaced by fresh draws
};

// Kick then drift: p' = p + K sin x, x' = x + p' (both wrapped).
PhasePoint standard_map_step(PhasePoint pt, double kick);

// Jacobian d(x',p')/d(x,p) at pt, row-major {{dx'/dx, dx'/dp}, {dp'/dx, dp'/dp}}.
std::array<double, 4> standard_map_jacobian(PhasePoint pt, double kick);

std::pair<PhasePoint, TangentVector> tangent_step(PhasePoint pt, TangentVector v, double kick);

// Mean log stretching per step over n_steps, renormalizing every step.
double finite_time_exponent(PhasePoint pt, double kick, int n_steps);

// The island-exclusion heuristic: a point is a chaotic-sea candidate when its
// 50-step finite-time exponent is at least 0.1.
inline constexpr int kIslandProbeSteps = 50;
inline constexpr double kIslandThreshold = 0.1;
bool in_chaotic_sea(PhasePoint pt, double kick);
// True for the mixed regime 1 < K < 7 where islands are expected.
inline bool has_islands(double kick) { return kick > 1.0 && kick < 7.0; }

// Uniform point on the torus passing the island heuristic.
// Throws NoChaoticSeaError for K < 1 or when no candidate is found.
PhasePoint sample_chaotic_point(double kick, Rng& rng, int max_attempts = 100000);

// A packet with position/momentum std (sx, sp) centred at c counts as chaotic
// when c and 16 probes on the 1- and 2-std ellipses all pass in_chaotic_sea.
// A chaotic centre alone can still leave a sizeable part of the packet in a
// small island (K = 12 has such islands).
bool packet_in_chaotic_sea(PhasePoint c, double sx, double sp, double kick);
PhasePoint sample_chaotic_packet(double kick, double sx, double sp, Rng& rng, int max_attempts = 100000);

// Benettin estimate over n_samples uniform initial points.
LyapunovEstimate lyapunov_exponent(double kick, int n_samples, int n_steps, std::uint64_t seed);
// Same quantity from the separation of a renormalized shadow trajectory.
LyapunovEstimate lyapunov_two_trajectory(double kick, int n_samples, int n_steps, std::uint64_t seed,
                                         double d0 = 1e-8);

// Gaussian matching |psi|^2 marginals of the wavepacket built from spec:
// std(x) = sigma / sqrt 2, std(p) = hbar / (sqrt 2 sigma).
ClassicalEnsemble sample_gaussian_ensemble(const GaussianSpec& spec, double hbar, std::size_t count,
                                           std::uint64_t seed);

ClassicalEnsemble evolve_ensemble(ClassicalEnsemble ens, double kick, int n_steps);

// Normalized histogram over the fundamental domain (kind classical).
PhaseSpaceDistribution histogram(const ClassicalEnsemble& ens, std::size_t bins_x, std::size_t bins_p);

// Liouville density smoothed by a periodic Gaussian kernel with the given
// widths, evaluated at the centres of a resolution x resolution grid.
PhaseSpaceDistribution smoothed_density(const ClassicalEnsemble& ens, std::size_t resolution,
                                        const KernelWidths& kernel);

}  // namespace qkr

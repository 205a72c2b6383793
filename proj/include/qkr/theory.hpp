#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "qkr/observables.hpp"

namespace qkr {

// Golden-rule constant Gamma / eps^2 for the sin(x1 - x2 - 0.33) coupling.
inline constexpr double kGammaPerEps2 = 0.43;
// Two-particle bandwidth of the coupled rotors.
inline constexpr double kBandwidth2 = 4.0 * 3.14159265358979323846;

inline double lyapunov_formula(double kick) { return kick > 2.0 ? std::log(kick / 2.0) : 0.0; }

struct SemiclassicalParams {
    double lambda1 = 0.0, lambda2 = 0.0;
    double gamma = 0.0;
    std::size_t n1 = 1, n2 = 1;
    double alpha1 = 1.0, alpha2 = 1.0;
    double tau1 = 0.0, tau2 = 0.0;
    double tau_e1 = std::numeric_limits<double>::infinity();
    double tau_e2 = std::numeric_limits<double>::infinity();

    // Fills the Ehrenfest times ln(N_i) / lambda_i.
    static SemiclassicalParams make(double lambda1, double lambda2, double gamma, std::size_t n1, std::size_t n2);
};

double ehrenfest_time(double lambda, std::size_t n);

// sum_i alpha_i Th(t > tau_i) e^{-lambda_i t} + e^{-2 Gamma t}
//   + Th(t > tauE1) / N1 + Th(t > tauE2) / N2, clipped to 1.
double predict_purity(const SemiclassicalParams& params, double t);
// min(lambda1, lambda2, 2 Gamma)
double predict_rate(const SemiclassicalParams& params);
// Environment limit: only particle 1's Lyapunov and saturation terms survive.
double predict_purity_env(const SemiclassicalParams& params, double t);

struct CorrelatorEstimate {
    double value = 0.0;               // one-sided sum C(0) + sum_{t>=1} C(t)
    std::vector<double> terms;        // C(0), C(1), ... up to truncation
    std::vector<std::string> warnings;
};

inline constexpr int kCorrelatorMaxLag = 20;
inline constexpr double kCorrelatorCutoff = 1e-3;

// Correlator of U = eps sin(x1 - x2 - offset) along independent classical
// trajectory pairs, summed up to max_lag or until |C| < 1e-3 C(0).
CorrelatorEstimate gamma_from_correlator(double k1, double k2, double eps, double offset, std::size_t n_traj,
                                         int max_lag, std::uint64_t seed);
// Same for the force dU/dx1 = eps cos(x1 - x2 - offset).
CorrelatorEstimate g_correlator(double k1, double k2, double eps, double offset, std::size_t n_traj, int max_lag,
                                std::uint64_t seed);

// lambda^-1 ln(lambda / (sigma^2 G)); 0 when the log is negative and +inf
// when G = 0 (no classical channel).
double onset_time(double lambda, double sigma, double g);

enum class Regime { BelowValidity, ValidGoldenRule, ValidLyapunovSaturated, AboveValidity };
std::string to_string(Regime r);

struct RegimeReport {
    double gamma = 0.0;
    double delta2 = 0.0;
    double bandwidth = kBandwidth2;
    Regime classification = Regime::BelowValidity;
};

// Gamma = 0.43 eps^2 against delta2 = 4 pi / (N1 N2) <= Gamma <= 4 pi.
RegimeReport classify_regime(double eps, std::size_t n1, std::size_t n2, double lambda1, double lambda2);

struct DecayFit {
    double rate = 0.0;
    double rate_error = 0.0;
    int t_start = 0;
    int t_end = 0;
    double saturation = 0.0;
    std::size_t n_points = 0;
};

// Least squares on ln(P - P_sat) over t in [ceil(tau1) + 1, last t with
// P > 3 P_sat]. P_sat defaults to 1/N1 + 1/N2.
DecayFit fit_decay(const PuritySeries& series, const SemiclassicalParams& params,
                   std::optional<double> saturation = std::nullopt);

}  // namespace qkr

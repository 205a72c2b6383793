#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "qkr/classical.hpp"
#include "qkr/config.hpp"
#include "qkr/io.hpp"
#include "qkr/theory.hpp"

namespace qkr {

inline constexpr const char* kCodeVersion = "qkr 1.0.0";

// Stream tags folded into derive_seed. A cell stream is
// derive_seed(root, {bits(K1), bits(K2), bits(eps), N1, N2}); replica r of
// that cell uses derive_seed(cell, {kReplicaStream, r}). Lyapunov estimates
// depend only on (root, K) so cells sharing a K share the same lambda.
enum Stream : std::uint64_t {
    kLyapunovStream = 1,
    kOnsetStream = 2,
    kReplicaStream = 3,
    kClassicalStream = 4,
    kEnvironmentStream = 5,
    kGammaStream = 6,
};

std::uint64_t cell_seed(std::uint64_t root, double k1, double k2, double eps, std::size_t n1, std::size_t n2);
std::uint64_t lyapunov_seed(std::uint64_t root, double kick);

double wavepacket_sigma(const TorusGrid& grid, const SigmaPolicy& policy);

struct RunContext {
    ExperimentConfig cfg;
    Emitter* emitter = nullptr;  // nullptr: compute only
    std::function<void(const std::string&)> log;

    void info(const std::string& msg) const {
        if (log) log(msg);
    }
};

struct CellResult {
    double k1 = 0.0, k2 = 0.0, eps = 0.0;
    std::uint64_t seed = 0;
    PuritySeries series;
    LyapunovEstimate lyap1, lyap2;
    double g_force = 0.0;
    double sigma1 = 0.0, sigma2 = 0.0;
    double tau1 = 0.0;
    RegimeReport regime;
    double predicted_rate = 0.0;
    std::optional<DecayFit> fit;
    std::string fit_error;
    std::string error;  // non-empty when the cell was aborted
    std::vector<std::array<double, 4>> centres;  // x1, p1, x2, p2 per replica
    std::string file;
};

// One (K1, K2, eps) cell of a purity sweep.
CellResult run_cell(const RunContext& ctx, double k1, double k2, double eps);

struct SweepResult {
    std::vector<CellResult> cells;
    nlohmann::ordered_json manifest;
};
SweepResult run_purity_sweep(const RunContext& ctx);

struct CollapseCurve {
    double kick = 0.0;
    double lambda = 0.0;
    double tau1 = 0.0;
    std::vector<double> s;  // lambda (t - tau1)
    std::vector<double> p;
    double saturation = 0.0;  // mean P over the last five kicks
};

struct CollapseResult {
    std::vector<CellResult> cells;
    std::vector<CollapseCurve> curves;
    double spread = 0.0;  // max over rescaled-time bins of the ln P spread
    double slope = 0.0;   // pooled master-curve slope of ln(P - P_sat) vs lambda (t - tau1)
    double slope_error = 0.0;
    std::size_t slope_points = 0;
    nlohmann::ordered_json manifest;
};
inline constexpr double kCollapseBin = 0.25;
// Throws RegimeRefusal unless every K cell is Lyapunov saturated.
CollapseResult run_lyapunov_collapse(const RunContext& ctx);
// Spread statistic over curves; zero for fewer than two curves.
double collapse_spread(const std::vector<CollapseCurve>& curves, double p_floor);

struct WignerCompareResult {
    std::vector<DistanceRow> distances;
    double husimi_sigma = 0.0;
    std::uintmax_t estimated_bytes = 0;
    nlohmann::ordered_json manifest;
};
// Peak memory estimate for the largest grid size of a wigner-compare run.
std::uintmax_t wigner_compare_bytes(const ExperimentConfig& cfg);
WignerCompareResult run_wigner_compare(const RunContext& ctx);

struct EnvResult {
    PuritySeries series;
    std::optional<DecayFit> fit;
    std::string fit_error;
    LyapunovEstimate lyap1, lyap2;
    double sigma1 = 0.0, sigma2 = 0.0;
    double tau1 = 0.0;
    double saturation_mean = 0.0;
    PhasePoint centre1;
    std::vector<PhasePoint> env_centres;
    std::vector<std::string> warnings;
    nlohmann::ordered_json manifest;
};
EnvResult run_env_decoherence(const RunContext& ctx);

struct GammaRow {
    double k1 = 0.0, k2 = 0.0, eps = 0.0;
    CorrelatorEstimate gamma, force;
};
struct GammaResult {
    std::vector<GammaRow> rows;
    nlohmann::ordered_json manifest;
};
GammaResult run_gamma_estimate(const RunContext& ctx);

struct LyapunovRow {
    double kick = 0.0;
    LyapunovEstimate benettin, two_trajectory;
    double formula = 0.0;
};
struct LyapunovResult {
    std::vector<LyapunovRow> rows;
    nlohmann::ordered_json manifest;
};
LyapunovResult run_lyapunov_estimate(const RunContext& ctx);

// Runs the experiment named by cfg.kind and returns its manifest.
nlohmann::ordered_json run_experiment(const RunContext& ctx);

// Calls fn(i) for i in [0, n) on up to `threads` workers (0: hardware).
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace qkr

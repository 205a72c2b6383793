#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace qkr {

enum class ExperimentKind { PuritySweep, LyapunovCollapse, WignerCompare, EnvDecoherence, GammaEstimate, LyapunovEstimate };
std::string to_string(ExperimentKind kind);
ExperimentKind parse_kind(const std::string& text);

// Wavepacket width: sqrt(hbar) of the grid in use, or a fixed value.
struct SigmaPolicy {
    bool symmetric = true;
    double value = 0.0;

    bool operator==(const SigmaPolicy&) const = default;
};

struct ExperimentConfig {
    // [experiment]
    ExperimentKind kind = ExperimentKind::PuritySweep;
    std::uint64_t seed = 0;
    int n_kicks = 25;
    int n_initial_states = 20;
    std::string output_dir = "out";
    int threads = 0;  // 0: hardware concurrency

    // [system]
    std::size_t n1 = 512;
    std::size_t n2 = 0;            // 0: same as n1
    std::vector<double> k1;
    std::vector<double> k2;        // empty: K2 = K1 per cell; one value: fixed; else paired with k1
    std::vector<double> eps;
    double coupling_offset = 0.33;
    double x_offset = 0.0;
    double p_offset = 0.5;
    SigmaPolicy sigma;

    // [lyapunov]
    int lyapunov_samples = 400;
    int lyapunov_steps = 200;

    // [correlator]
    std::size_t correlator_pairs = 100000;
    std::size_t onset_pairs = 20000;
    int correlator_max_lag = 20;

    // [wigner]
    std::vector<std::size_t> sizes{512, 1024};
    std::size_t resolution = 128;
    std::size_t classical_points = 1000000;
    double x0 = 1.0, p0 = 2.0;
    double partner_x0 = 1.0, partner_p0 = 2.0;

    // [env]
    std::size_t n_env_states = 8;

    // [resources]
    double memory_budget_mb = 2048.0;

    std::size_t size2() const { return n2 == 0 ? n1 : n2; }
    double kick2(std::size_t i) const;
    bool operator==(const ExperimentConfig&) const = default;
};

// key = value lines under [section] headers; '#' starts a comment; lists are
// comma separated. overrides are "section.key=value" strings applied on top.
// With `expected`, experiment.kind may be omitted but must match if present.
ExperimentConfig parse_config(const std::string& text, const std::vector<std::string>& overrides = {},
                              std::optional<ExperimentKind> expected = std::nullopt);
ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {},
                             std::optional<ExperimentKind> expected = std::nullopt);

// Canonical text form; parse_config(config_text(c)) == c.
std::string config_text(const ExperimentConfig& cfg);

// Shortest decimal that reads back to the same double.
std::string format_double(double v);

}  // namespace qkr

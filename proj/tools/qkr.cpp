#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "qkr/config.hpp"
#include "qkr/errors.hpp"
#include "qkr/experiments.hpp"

namespace fs = std::filesystem;

namespace {

struct Command {
    const char* name;
    const char* help;
    qkr::ExperimentKind kind;
};

constexpr Command kCommands[] = {
    {"purity-sweep", "purity decay over a (K, eps) grid", qkr::ExperimentKind::PuritySweep},
    {"collapse", "Lyapunov-rescaled collapse of saturated-coupling curves", qkr::ExperimentKind::LyapunovCollapse},
    {"wigner-compare", "classical vs quantum phase-space distributions", qkr::ExperimentKind::WignerCompare},
    {"env-decoherence", "purity with a mixed fast environment rotor", qkr::ExperimentKind::EnvDecoherence},
    {"gamma", "Gamma and G from classical correlators", qkr::ExperimentKind::GammaEstimate},
    {"lyapunov", "standard-map Lyapunov exponents", qkr::ExperimentKind::LyapunovEstimate},
};

int run(const Command& cmd, const std::string& config_path, const std::vector<std::string>& sets,
        const std::string& output) {
    auto cfg = config_path.empty() ? qkr::parse_config("", sets, cmd.kind) : qkr::load_config(config_path, sets, cmd.kind);
    if (!output.empty()) cfg.output_dir = output;

    fs::path dir = cfg.output_dir;
    if (const char* root = std::getenv("QKR_OUTPUT_ROOT"); root && *root && dir.is_relative()) dir = fs::path(root) / dir;

    qkr::Emitter emitter(dir);
    qkr::RunContext ctx{cfg, &emitter, [](const std::string& msg) { std::clog << "[qkr] " << msg << std::endl; }};
    ctx.info(std::string(cmd.name) + ": writing to " + dir.string());
    const auto start = std::chrono::steady_clock::now();
    qkr::run_experiment(ctx);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    // Kept apart from manifest.json so that identical runs stay byte-identical.
    std::ofstream timing(dir / "timing.json");
    timing << "{\n  \"wall_seconds\": " << seconds << "\n}\n";
    ctx.info("done in " + std::to_string(seconds) + " s");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Entanglement of coupled quantized kicked rotators"};
    app.require_subcommand(1);

    std::string config_path, output;
    std::vector<std::string> sets;
    const Command* chosen = nullptr;
    for (const auto& cmd : kCommands) {
        auto* sub = app.add_subcommand(cmd.name, cmd.help);
        sub->add_option("-c,--config", config_path, "configuration file");
        sub->add_option("--set", sets, "override a key: section.key=value")->take_all();
        sub->add_option("-o,--output", output, "output directory (overrides experiment.output_dir)");
        sub->callback([&chosen, &cmd] { chosen = &cmd; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        return run(*chosen, config_path, sets, output);
    } catch (const qkr::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const qkr::RegimeRefusal& e) {
        std::cerr << "regime refusal: " << e.what() << "\n";
        return 3;
    } catch (const qkr::ResourceRefusal& e) {
        std::cerr << "resource refusal: " << e.what() << " (required " << e.required_bytes() << " bytes)\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

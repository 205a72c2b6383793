#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "qkr/config.hpp"
#include "qkr/errors.hpp"
#include "qkr/experiments.hpp"
#include "qkr/io.hpp"
#include "qkr/rng.hpp"

using namespace qkr;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("qkr_test_" + name);
    fs::remove_all(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t count_lines(const std::string& text) {
    std::size_t n = 0;
    for (char c : text) n += c == '\n';
    return n;
}

ExperimentConfig small_sweep() {
    auto cfg = parse_config(R"(
[experiment]
kind = purity-sweep
seed = 42
n_kicks = 8
n_initial_states = 3
threads = 1
[system]
N1 = 32
K1 = 5.09, 10
eps = 0, 2
[lyapunov]
samples = 40
steps = 60
[correlator]
onset_pairs = 500
)");
    return cfg;
}

std::string config_error(const std::string& text, const std::vector<std::string>& sets = {}) {
    try {
        parse_config(text, sets);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("config round trip") {
    auto cfg = small_sweep();
    CHECK(cfg.k1 == std::vector<double>{5.09, 10.0});
    CHECK(cfg.size2() == 32);
    CHECK(cfg.kick2(1) == 10.0);
    CHECK(cfg.p_offset == 0.5);
    CHECK(parse_config(config_text(cfg)) == cfg);

    cfg.k2 = {3.0};
    cfg.n2 = 16;
    cfg.sigma = {false, 0.2};
    cfg.sizes = {64, 128};
    CHECK(parse_config(config_text(cfg)) == cfg);
    CHECK(cfg.kick2(0) == 3.0);

    const auto over = parse_config(config_text(small_sweep()), {"system.eps=0.1", "experiment.seed=7"});
    CHECK(over.eps == std::vector<double>{0.1});
    CHECK(over.seed == 7);
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(5.09) == "5.09");
}

TEST_CASE("config errors") {
    const std::string base = "[experiment]\nkind = purity-sweep\nseed = 1\n[system]\nN1 = 32\nK1 = 5\neps = 1\n";
    CHECK(config_error(base).empty());
    CHECK(config_error(base + "bogus = 3\n").find("line 8") != std::string::npos);
    CHECK(config_error(base + "bogus = 3\n").find("bogus") != std::string::npos);
    CHECK(config_error("[experiment]\nkind = purity-sweep\nseed = 1\n[system]\nN1 = 32\neps = 1\n").find("K1'") !=
          std::string::npos);
    const auto bad = config_error("[experiment]\nkind = purity-sweep\nseed = 1\n[system]\nN1 = 3x2\nK1 = 5\neps = 1\n");
    CHECK(bad.find("line 5") != std::string::npos);
    CHECK(bad.find("3x2") != std::string::npos);
    CHECK_FALSE(config_error(base + "K1 = 6\n").empty());
    CHECK_FALSE(config_error("seed = 1\n").empty());
    CHECK_FALSE(config_error(base, {"system.nothing=1"}).empty());
    CHECK_FALSE(config_error(base + "[wigner]\nsizes = 31\n").empty());
    CHECK_THROWS_AS(parse_config(base, {}, ExperimentKind::WignerCompare), ConfigError);
    CHECK(parse_config("[experiment]\nseed = 1\n[system]\nK1 = 10\n", {}, ExperimentKind::LyapunovEstimate).kind ==
          ExperimentKind::LyapunovEstimate);
    CHECK_THROWS_AS(load_config("/nonexistent/qkr.ini"), ConfigError);
}

TEST_CASE("seed derivation") {
    CHECK(cell_seed(1, 5.09, 5.09, 4.0, 512, 512) == cell_seed(1, 5.09, 5.09, 4.0, 512, 512));
    CHECK(cell_seed(1, 5.09, 5.09, 4.0, 512, 512) != cell_seed(1, 5.09, 5.09, 3.0, 512, 512));
    CHECK(cell_seed(1, 5.09, 5.09, 0.0, 512, 512) == cell_seed(1, 5.09, 5.09, -0.0, 512, 512));
    CHECK(cell_seed(1, 5.09, 5.09, 4.0, 512, 512) != cell_seed(2, 5.09, 5.09, 4.0, 512, 512));
    CHECK(lyapunov_seed(3, 10.0) != lyapunov_seed(3, 5.09));
}

TEST_CASE("purity csv has one row per kick") {
    PuritySeries s;
    for (int t = 0; t <= 25; ++t) {
        s.times.push_back(t);
        s.values.push_back(std::exp(-0.1 * t));
        s.stderr_.push_back(0.01);
    }
    const auto text = purity_csv(s);
    CHECK(text.rfind("t,P,P_stderr\n", 0) == 0);
    CHECK(count_lines(text) == 27);
    CHECK(distance_csv({{"husimi-vs-classical", 512, 4.0, 0.25}}) == "label,N,eps,distance\nhusimi-vs-classical,512,4,0.25\n");
}

TEST_CASE("binary grid format") {
    const auto dir = scratch("grid");
    fs::create_directories(dir);
    auto g = make_cell_grid(DistributionKind::Husimi, 16);
    for (std::size_t i = 0; i < g.values.size(); ++i) g.values[i] = 0.5 * double(i) - 3.0;
    g.rows = 8;
    g.cols = 32;
    write_grid(dir / "g.bin", g);
    CHECK(fs::file_size(dir / "g.bin") == kGridHeaderBytes + 8 * 8 * 32);
    const auto raw = slurp(dir / "g.bin");
    CHECK(raw.substr(0, 4) == "LEWG");
    const auto back = read_grid(dir / "g.bin");
    CHECK(back.kind == DistributionKind::Husimi);
    CHECK(back.rows == 8);
    CHECK(back.cols == 32);
    CHECK(back.values == g.values);

    std::ofstream(dir / "bad.bin", std::ios::binary) << "XXXX" << std::string(60, '\0');
    CHECK_THROWS(read_grid(dir / "bad.bin"));
    std::ofstream(dir / "short.bin", std::ios::binary) << raw.substr(0, 100);
    CHECK_THROWS(read_grid(dir / "short.bin"));
    fs::remove_all(dir);
}

TEST_CASE("emitter records what it writes") {
    const auto dir = scratch("emitter");
    Emitter em(dir);
    PuritySeries s;
    for (int t = 0; t <= 4; ++t) {
        s.times.push_back(t);
        s.values.push_back(1.0);
        s.stderr_.push_back(0.0);
    }
    em.write_purity("a.csv", s);
    em.write_csv("b.csv", "x,y", {"1,2", "3,4"});
    em.write_grid("c.bin", make_cell_grid(DistributionKind::Classical, 16));
    const auto out = em.outputs();
    REQUIRE(out.size() == 3);
    for (const auto& entry : out) {
        const auto path = dir / entry["path"].get<std::string>();
        CHECK(entry["bytes"].get<std::uintmax_t>() == fs::file_size(path));
        if (entry["format"].get<std::string>().rfind("csv", 0) == 0) CHECK(entry["rows"].get<std::size_t>() + 1 == count_lines(slurp(path)));
    }
    CHECK(out[0]["rows"] == 5);
    CHECK(out[2]["rows"] == 16);
    fs::remove_all(dir);
}

TEST_CASE("uncoupled cells stay pure and runs are reproducible") {
    const auto cfg = small_sweep();
    const auto a = scratch("det_a"), b = scratch("det_b");
    {
        Emitter ea(a), eb(b);
        const auto ra = run_purity_sweep({cfg, &ea, {}});
        run_purity_sweep({cfg, &eb, {}});
        REQUIRE(ra.cells.size() == 4);
        for (const auto& c : ra.cells) {
            CHECK(c.error.empty());
            CHECK(c.series.values.size() == 9);
            if (c.eps == 0.0)
                for (double v : c.series.values) CHECK(std::abs(v - 1.0) < 1e-12);
            else
                CHECK(c.series.values.back() < 0.9);
            CHECK(c.regime.classification ==
                  classify_regime(c.eps, 32, 32, c.lyap1.lambda, c.lyap2.lambda).classification);
        }
        CHECK(ra.manifest["cells"][1]["regime"]["classification"] ==
              to_string(classify_regime(2.0, 32, 32, ra.cells[1].lyap1.lambda, ra.cells[1].lyap2.lambda).classification));
    }
    CHECK(slurp(a / "manifest.json") == slurp(b / "manifest.json"));
    for (const auto& entry : fs::directory_iterator(a))
        CHECK(slurp(entry.path()) == slurp(b / entry.path().filename()));
    CHECK(fs::exists(a / "purity_K5.09_eps2.csv"));
    CHECK(count_lines(slurp(a / "purity_K5.09_eps2.csv")) == 10);
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("cells do not depend on their neighbours") {
    auto cfg = small_sweep();
    const RunContext full{cfg, nullptr, {}};
    const auto all = run_purity_sweep(full);
    cfg.k1 = {10.0};
    cfg.eps = {2.0};
    const auto one = run_purity_sweep({cfg, nullptr, {}});
    CHECK(one.cells.at(0).series.values == all.cells.at(3).series.values);
    CHECK(one.cells.at(0).centres == all.cells.at(3).centres);

    cfg.threads = 3;
    const auto threaded = run_purity_sweep({cfg, nullptr, {}});
    CHECK(threaded.cells.at(0).series.values == one.cells.at(0).series.values);
}

TEST_CASE("non-chaotic kick aborts the cell") {
    auto cfg = small_sweep();
    cfg.k1 = {0.5, 10.0};
    cfg.eps = {2.0};
    const auto r = run_purity_sweep({cfg, nullptr, {}});
    CHECK_FALSE(r.cells[0].error.empty());
    CHECK(r.cells[1].error.empty());
}

TEST_CASE("collapse statistics") {
    CollapseCurve c;
    c.s = {0, 1, 2, 3};
    c.p = {1.0, 0.3, 0.1, 0.03};
    CHECK(collapse_spread({c}, 0.01) == 0.0);
    CHECK(collapse_spread({c, c}, 0.01) == 0.0);
    auto d = c;
    for (auto& v : d.p) v *= 1.5;
    CHECK(collapse_spread({c, d}, 0.01) == doctest::Approx(std::log(1.5)));

    auto cfg = small_sweep();
    cfg.kind = ExperimentKind::LyapunovCollapse;
    cfg.k1 = {10.0};
    cfg.eps = {0.2};
    CHECK_THROWS_AS(run_lyapunov_collapse({cfg, nullptr, {}}), RegimeRefusal);
    cfg.eps = {4.0};
    const auto r = run_lyapunov_collapse({cfg, nullptr, {}});
    CHECK(r.spread == 0.0);
    CHECK(r.curves.size() == 1);
    cfg.eps = {3.0, 4.0};
    CHECK_THROWS_AS(run_lyapunov_collapse({cfg, nullptr, {}}), ConfigError);
}

TEST_CASE("wigner compare respects the memory budget") {
    auto cfg = parse_config(R"(
[experiment]
kind = wigner-compare
seed = 3
n_kicks = 2
[system]
N1 = 32
K1 = 3.09
K2 = 100
eps = 0, 4
[wigner]
sizes = 32, 16
resolution = 16
classical_points = 2000
)");
    cfg.memory_budget_mb = 0.01;
    try {
        run_wigner_compare({cfg, nullptr, {}});
        FAIL("expected a resource refusal");
    } catch (const ResourceRefusal& e) {
        CHECK(e.required_bytes() == wigner_compare_bytes(cfg));
    }
    cfg.memory_budget_mb = 64;
    const auto dir = scratch("wigner");
    Emitter em(dir);
    const auto r = run_wigner_compare({cfg, &em, {}});
    CHECK(r.distances.size() == 6);
    CHECK(r.distances[0].label == "classical-vs-classical");
    CHECK(r.distances[0].distance == 0.0);
    CHECK(r.distances[0].n == 16);
    for (const auto& d : r.distances) CHECK(d.distance >= 0.0);
    CHECK(fs::file_size(dir / "wigner_N32_eps4.bin") == kGridHeaderBytes + 8 * 64 * 64);
    CHECK(read_grid(dir / "husimi_N16_eps0.bin").kind == DistributionKind::Husimi);
    CHECK(count_lines(slurp(dir / "distances.csv")) == 7);
    fs::remove_all(dir);
}

TEST_CASE("single environment state reproduces the pure pipeline") {
    auto cfg = parse_config(R"(
[experiment]
kind = env-decoherence
seed = 9
n_kicks = 6
threads = 1
[system]
N1 = 32
N2 = 64
K1 = 5.09
K2 = 10
eps = 2
[lyapunov]
samples = 20
steps = 40
[correlator]
onset_pairs = 200
[env]
n_env_states = 1
)");
    const auto r = run_env_decoherence({cfg, nullptr, {}});
    REQUIRE(r.env_centres.size() == 1);
    CHECK_FALSE(r.warnings.empty());

    const TorusGrid g1(32), g2(64);
    auto state = product_state(make_gaussian(g1, {r.centre1.x, r.centre1.p, r.sigma1}),
                               make_gaussian(g2, {r.env_centres[0].x, r.env_centres[0].p, r.sigma2}));
    const TwoParticleFloquet f(g1, g2, {5.09}, {10.0}, {2.0});
    for (int t = 0; t <= 6; ++t) {
        CHECK(std::abs(purity(state) - r.series.values[std::size_t(t)]) < 1e-12);
        f.apply(state);
    }

    cfg.n_env_states = 4;
    const auto mixed = run_env_decoherence({cfg, nullptr, {}});
    CHECK(mixed.env_centres.size() == 4);
    CHECK(mixed.series.values[0] == doctest::Approx(1.0));
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < i; ++j) {
            const double dx = std::remainder(mixed.env_centres[i].x - mixed.env_centres[j].x, kTwoPi);
            const double dp = std::remainder(mixed.env_centres[i].p - mixed.env_centres[j].p, kTwoPi);
            CHECK(std::hypot(dx, dp) >= 6.0 * mixed.sigma2);
        }
}

TEST_CASE("gamma and lyapunov runs write their tables") {
    const auto dir = scratch("gamma");
    auto cfg = parse_config("[experiment]\nkind = gamma-estimate\nseed = 1\n[system]\nN1 = 32\nK1 = 10\neps = 0, 1\n"
                            "[correlator]\npairs = 2000\n");
    {
        Emitter em(dir);
        const auto r = run_gamma_estimate({cfg, &em, {}});
        CHECK(r.rows[0].gamma.value == 0.0);
        CHECK(r.rows[1].gamma.value > 0.0);
        CHECK(count_lines(slurp(dir / "gamma.csv")) == 3);
    }
    cfg = parse_config("[experiment]\nkind = lyapunov-estimate\nseed = 1\n[system]\nK1 = 0, 10\n"
                       "[lyapunov]\nsamples = 50\nsteps = 100\n");
    {
        Emitter em(dir);
        const auto r = run_lyapunov_estimate({cfg, &em, {}});
        CHECK(r.rows[0].benettin.lambda < 0.1);
        CHECK(r.rows[1].formula == doctest::Approx(std::log(5.0)));
        CHECK(count_lines(slurp(dir / "lyapunov.csv")) == 3);
    }
    const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
    CHECK(manifest["experiment"] == "lyapunov-estimate");
    CHECK(manifest["code_version"] == kCodeVersion);
    fs::remove_all(dir);
}

TEST_CASE("shipped configs parse") {
    std::size_t n = 0;
    for (const auto& entry : fs::directory_iterator(QKR_CONFIG_DIR)) {
        if (entry.path().extension() != ".ini") continue;
        const auto cfg = load_config(entry.path().string());
        CHECK(parse_config(config_text(cfg)) == cfg);
        ++n;
    }
    CHECK(n == 6);
}

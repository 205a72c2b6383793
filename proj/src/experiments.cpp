#include "qkr/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

#include "qkr/errors.hpp"
#include "qkr/rng.hpp"

namespace qkr {

using json = nlohmann::ordered_json;

namespace {

std::uint64_t bits(double v) { return v == 0.0 ? 0 : std::bit_cast<std::uint64_t>(v); }

json to_json(const LyapunovEstimate& e) {
    return {{"lambda", e.lambda},
            {"std_error", e.std_error},
            {"n_steps", e.n_steps},
            {"n_samples", e.n_samples},
            {"n_rejected", e.n_rejected}};
}

json to_json(const RegimeReport& r) {
    return {{"gamma", r.gamma},
            {"delta2", r.delta2},
            {"B2", r.bandwidth},
            {"classification", to_string(r.classification)}};
}

json to_json(const DecayFit& f) {
    return {{"rate", f.rate},
            {"rate_error", f.rate_error},
            {"t_start", f.t_start},
            {"t_end", f.t_end},
            {"saturation", f.saturation},
            {"n_points", f.n_points}};
}

json to_json(const CorrelatorEstimate& c) {
    return {{"value", c.value}, {"terms", c.terms}, {"warnings", c.warnings}};
}

json base_manifest(const ExperimentConfig& cfg) {
    return {{"code_version", kCodeVersion},
            {"experiment", to_string(cfg.kind)},
            {"seed", cfg.seed},
            {"seed_scheme",
             "cell = derive_seed(root, {bits(K1), bits(K2), bits(eps), N1, N2}); replica r = derive_seed(cell, {3, r}); "
             "lambda(K) = derive_seed(root, {1, bits(K)}); derive_seed folds ids with splitmix64"},
            {"initial_state_sampling",
             "centres uniform on the torus, rejected while the 50-step finite-time exponent is below 0.1 at the "
             "centre or at any of 16 probes on the 1- and 2-std ellipses of the packet; both particles sampled "
             "independently"},
            {"config_text", config_text(cfg)}};
}

void finish(const RunContext& ctx, json& manifest) {
    if (!ctx.emitter) return;
    manifest["outputs"] = ctx.emitter->outputs();
    const auto text = manifest.dump(2) + "\n";
    std::ofstream out(ctx.emitter->dir() / "manifest.json", std::ios::binary);
    out << text;
    if (!out) throw Error("cannot write manifest.json");
}

std::string cell_tag(double k1, double k2, double eps) {
    std::string tag = "K" + format_double(k1);
    if (k2 != k1) tag += "_K2" + format_double(k2);
    return tag + "_eps" + format_double(eps);
}

PuritySeries aggregate(const std::vector<std::vector<double>>& per, std::size_t n_kicks) {
    PuritySeries s;
    const double n = double(per.size());
    for (std::size_t t = 0; t <= n_kicks; ++t) {
        double mean = 0.0;
        for (const auto& r : per) mean += r[t];
        mean /= n;
        double var = 0.0;
        for (const auto& r : per) var += (r[t] - mean) * (r[t] - mean);
        s.times.push_back(int(t));
        s.values.push_back(mean);
        s.stderr_.push_back(per.size() > 1 ? std::sqrt(var / (n - 1.0) / n) : 0.0);
    }
    return s;
}

double mean_last(const std::vector<double>& v, std::size_t count) {
    count = std::min(count, v.size());
    double acc = 0.0;
    for (std::size_t i = v.size() - count; i < v.size(); ++i) acc += v[i];
    return acc / double(count);
}

constexpr std::size_t kMinFitSeries = 6;

// Centre whose whole Gaussian packet (width sigma on this grid) tests chaotic.
PhasePoint sample_packet(double kick, const TorusGrid& grid, double sigma, Rng& rng) {
    return sample_chaotic_packet(kick, sigma / std::sqrt(2.0), grid.hbar() / (std::sqrt(2.0) * sigma), rng);
}

double safe_onset(double lambda, double sigma, double g) {
    if (!(lambda > 0.0)) return std::numeric_limits<double>::infinity();
    return onset_time(lambda, sigma, g);
}

json cell_json(const CellResult& c) {
    json centres = json::array();
    for (const auto& ctr : c.centres) centres.push_back({ctr[0], ctr[1], ctr[2], ctr[3]});
    return {{"K1", c.k1},
            {"K2", c.k2},
            {"eps", c.eps},
            {"N1", c.series.n1},
            {"N2", c.series.n2},
            {"seed", c.seed},
            {"n_initial_states", c.series.n_initial_states},
            {"lambda1", to_json(c.lyap1)},
            {"lambda2", to_json(c.lyap2)},
            {"G", c.g_force},
            {"sigma1", c.sigma1},
            {"sigma2", c.sigma2},
            {"tau1", c.tau1},
            {"regime", to_json(c.regime)},
            {"predicted_rate", c.predicted_rate},
            {"fit", c.fit ? to_json(*c.fit) : json(nullptr)},
            {"fit_error", c.fit_error},
            {"error", c.error},
            {"initial_centres", centres},
            {"file", c.file}};
}

}  // namespace

std::uint64_t cell_seed(std::uint64_t root, double k1, double k2, double eps, std::size_t n1, std::size_t n2) {
    return derive_seed(root, {bits(k1), bits(k2), bits(eps), n1, n2});
}

std::uint64_t lyapunov_seed(std::uint64_t root, double kick) { return derive_seed(root, {kLyapunovStream, bits(kick)}); }

double wavepacket_sigma(const TorusGrid& grid, const SigmaPolicy& policy) {
    return policy.symmetric ? symmetric_sigma(grid) : policy.value;
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    std::size_t workers = threads > 0 ? std::size_t(threads) : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

CellResult run_cell(const RunContext& ctx, double k1, double k2, double eps) {
    const auto& cfg = ctx.cfg;
    const std::size_t n1 = cfg.n1, n2 = cfg.size2();
    const auto n_kicks = std::size_t(cfg.n_kicks);
    const auto n_states = std::size_t(cfg.n_initial_states);

    CellResult c;
    c.k1 = k1;
    c.k2 = k2;
    c.eps = eps;
    c.seed = cell_seed(cfg.seed, k1, k2, eps, n1, n2);
    const TorusGrid g1(n1, cfg.x_offset, cfg.p_offset), g2(n2, cfg.x_offset, cfg.p_offset);
    c.sigma1 = wavepacket_sigma(g1, cfg.sigma);
    c.sigma2 = wavepacket_sigma(g2, cfg.sigma);
    c.series.n1 = n1;
    c.series.n2 = n2;
    c.series.k1 = k1;
    c.series.k2 = k2;
    c.series.eps = eps;
    c.series.seed = c.seed;
    c.series.n_initial_states = n_states;

    c.lyap1 = lyapunov_exponent(k1, cfg.lyapunov_samples, cfg.lyapunov_steps, lyapunov_seed(cfg.seed, k1));
    c.lyap2 = k2 == k1 ? c.lyap1
                       : lyapunov_exponent(k2, cfg.lyapunov_samples, cfg.lyapunov_steps, lyapunov_seed(cfg.seed, k2));
    c.regime = classify_regime(eps, n1, n2, c.lyap1.lambda, c.lyap2.lambda);
    if (c.regime.classification == Regime::BelowValidity || c.regime.classification == Regime::AboveValidity)
        ctx.info("warning: cell " + cell_tag(k1, k2, eps) + " is " + to_string(c.regime.classification));

    if (eps > 0.0)
        c.g_force = g_correlator(k1, k2, eps, cfg.coupling_offset, cfg.onset_pairs, cfg.correlator_max_lag,
                                 derive_seed(c.seed, {kOnsetStream}))
                        .value;
    c.tau1 = safe_onset(c.lyap1.lambda, c.sigma1, c.g_force);

    std::vector<std::vector<double>> per(n_states, std::vector<double>(n_kicks + 1));
    c.centres.resize(n_states);
    try {
        const TwoParticleFloquet floquet(g1, g2, RotorParams{k1}, RotorParams{k2},
                                         CouplingParams{eps, cfg.coupling_offset});
        parallel_for(n_states, cfg.threads, [&](std::size_t r) {
            Rng rng(derive_seed(c.seed, {kReplicaStream, r}));
            const auto a = sample_packet(k1, g1, c.sigma1, rng);
            const auto b = sample_packet(k2, g2, c.sigma2, rng);
            c.centres[r] = {a.x, a.p, b.x, b.p};
            auto state = product_state(make_gaussian(g1, {a.x, a.p, c.sigma1}), make_gaussian(g2, {b.x, b.p, c.sigma2}));
            per[r][0] = purity(state);
            for (std::size_t t = 1; t <= n_kicks; ++t) {
                floquet.apply(state);
                per[r][t] = purity(state);
            }
            const double drift = std::abs(state.norm() - 1.0);
            if (drift > 1e-9) throw InvalidStateError("norm drift " + std::to_string(drift) + " in replica");
        });
    } catch (const NoChaoticSeaError& e) {
        c.error = e.what();
        ctx.info("cell " + cell_tag(k1, k2, eps) + " aborted: " + c.error);
        c.centres.clear();
        return c;
    }

    auto agg = aggregate(per, n_kicks);
    c.series.times = std::move(agg.times);
    c.series.values = std::move(agg.values);
    c.series.stderr_ = std::move(agg.stderr_);

    auto params = SemiclassicalParams::make(c.lyap1.lambda, c.lyap2.lambda, c.regime.gamma, n1, n2);
    params.tau1 = c.tau1;
    params.tau2 = safe_onset(c.lyap2.lambda, c.sigma2, c.g_force);
    c.predicted_rate = predict_rate(params);
    if (c.series.times.size() < kMinFitSeries)
        c.fit_error = "series too short to fit";
    else
        try {
            c.fit = fit_decay(c.series, params);
        } catch (const InsufficientDecayError& e) {
            c.fit_error = e.what();
        }
    return c;
}

namespace {

void emit_cell(const RunContext& ctx, CellResult& c) {
    if (!ctx.emitter || !c.error.empty()) return;
    c.file = ctx.emitter->write_purity("purity_" + cell_tag(c.k1, c.k2, c.eps) + ".csv", c.series);
}

void log_cell(const RunContext& ctx, const CellResult& c) {
    std::string msg = "cell " + cell_tag(c.k1, c.k2, c.eps) + ": lambda1=" + format_double(c.lyap1.lambda) +
                      " predicted=" + format_double(c.predicted_rate);
    if (c.fit)
        msg += " fitted=" + format_double(c.fit->rate);
    else if (!c.fit_error.empty())
        msg += " fit: " + c.fit_error;
    if (!c.series.values.empty()) msg += " P(end)=" + format_double(c.series.values.back());
    ctx.info(msg);
}

}  // namespace

SweepResult run_purity_sweep(const RunContext& ctx) {
    const auto& cfg = ctx.cfg;
    if (cfg.eps.empty()) throw ConfigError("missing mandatory key 'system.eps'");
    SweepResult out;
    out.manifest = base_manifest(cfg);
    json cells = json::array();
    for (std::size_t i = 0; i < cfg.k1.size(); ++i)
        for (double eps : cfg.eps) {
            auto c = run_cell(ctx, cfg.k1[i], cfg.kick2(i), eps);
            emit_cell(ctx, c);
            log_cell(ctx, c);
            cells.push_back(cell_json(c));
            out.cells.push_back(std::move(c));
        }
    out.manifest["cells"] = cells;
    finish(ctx, out.manifest);
    return out;
}

double collapse_spread(const std::vector<CollapseCurve>& curves, double p_floor) {
    if (curves.size() < 2) return 0.0;
    const double lo = std::log(p_floor), hi = std::log(10.0 * p_floor);
    double s_max = 0.0;
    for (const auto& c : curves)
        if (!c.s.empty()) s_max = std::max(s_max, c.s.back());

    double spread = 0.0;
    for (double s = 0.0; s <= s_max; s += kCollapseBin) {
        double vmin = std::numeric_limits<double>::infinity(), vmax = -vmin;
        int count = 0;
        for (const auto& c : curves) {
            for (std::size_t i = 0; i + 1 < c.s.size(); ++i) {
                if (s < c.s[i] || s > c.s[i + 1]) continue;
                const double w = (s - c.s[i]) / (c.s[i + 1] - c.s[i]);
                const double v = (1.0 - w) * std::log(c.p[i]) + w * std::log(c.p[i + 1]);
                if (v >= lo && v <= hi) {
                    vmin = std::min(vmin, v);
                    vmax = std::max(vmax, v);
                    ++count;
                }
                break;
            }
        }
        if (count >= 2) spread = std::max(spread, vmax - vmin);
    }
    return spread;
}

CollapseResult run_lyapunov_collapse(const RunContext& ctx) {
    const auto& cfg = ctx.cfg;
    if (cfg.eps.size() != 1) throw ConfigError("collapse needs exactly one value of system.eps");
    const double eps = cfg.eps[0];
    const std::size_t n1 = cfg.n1, n2 = cfg.size2();

    for (std::size_t i = 0; i < cfg.k1.size(); ++i) {
        const double k1 = cfg.k1[i], k2 = cfg.kick2(i);
        const auto l1 = lyapunov_exponent(k1, cfg.lyapunov_samples, cfg.lyapunov_steps, lyapunov_seed(cfg.seed, k1));
        const auto l2 = lyapunov_exponent(k2, cfg.lyapunov_samples, cfg.lyapunov_steps, lyapunov_seed(cfg.seed, k2));
        const auto report = classify_regime(eps, n1, n2, l1.lambda, l2.lambda);
        if (report.classification != Regime::ValidLyapunovSaturated)
            throw RegimeRefusal("collapse needs the Lyapunov-saturated regime; K=" + format_double(k1) +
                                " eps=" + format_double(eps) + " is " + to_string(report.classification) +
                                " (Gamma=" + format_double(report.gamma) + ", delta2=" + format_double(report.delta2) +
                                ", lambda=" + format_double(std::max(l1.lambda, l2.lambda)) + ")");
    }

    CollapseResult out;
    out.manifest = base_manifest(cfg);
    const double p_sat = 1.0 / double(n1) + 1.0 / double(n2);
    json cells = json::array(), curves = json::array();
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < cfg.k1.size(); ++i) {
        auto c = run_cell(ctx, cfg.k1[i], cfg.kick2(i), eps);
        emit_cell(ctx, c);
        log_cell(ctx, c);
        cells.push_back(cell_json(c));
        if (!c.error.empty()) {
            out.cells.push_back(std::move(c));
            continue;
        }

        CollapseCurve curve;
        curve.kick = c.k1;
        curve.lambda = c.lyap1.lambda;
        curve.tau1 = c.tau1;
        curve.saturation = mean_last(c.series.values, 5);
        const double shift = std::isfinite(c.tau1) ? c.tau1 : 0.0;
        std::vector<std::string> rows;
        for (std::size_t j = 0; j < c.series.times.size(); ++j) {
            const double s = curve.lambda * (double(c.series.times[j]) - shift);
            curve.s.push_back(s);
            curve.p.push_back(c.series.values[j]);
            rows.push_back(csv_number(s) + "," + csv_number(c.series.values[j]));
        }
        const int t_start = std::max(1, int(std::ceil(shift)) + 1);
        for (std::size_t j = 0; j < c.series.times.size(); ++j) {
            if (c.series.times[j] < t_start) continue;
            if (c.series.values[j] <= 3.0 * p_sat) break;
            xs.push_back(curve.s[j]);
            ys.push_back(std::log(c.series.values[j] - p_sat));
        }
        std::string file;
        if (ctx.emitter) file = ctx.emitter->write_csv("collapse_K" + format_double(c.k1) + ".csv", "lambda_t,P", rows);
        curves.push_back({{"K", curve.kick},
                          {"lambda", curve.lambda},
                          {"tau1", curve.tau1},
                          {"saturation_last5", curve.saturation},
                          {"file", file}});
        out.curves.push_back(std::move(curve));
        out.cells.push_back(std::move(c));
    }

    out.spread = collapse_spread(out.curves, 3.0 * p_sat);
    out.slope_points = xs.size();
    out.slope = std::numeric_limits<double>::quiet_NaN();
    if (xs.size() >= 3) {
        const double n = double(xs.size());
        double mx = 0.0, my = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            mx += xs[i];
            my += ys[i];
        }
        mx /= n;
        my /= n;
        double sxx = 0.0, sxy = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            sxx += (xs[i] - mx) * (xs[i] - mx);
            sxy += (xs[i] - mx) * (ys[i] - my);
        }
        out.slope = sxy / sxx;
        double ssr = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double r = ys[i] - my - out.slope * (xs[i] - mx);
            ssr += r * r;
        }
        out.slope_error = std::sqrt(ssr / (n - 2.0) / sxx);
    }
    ctx.info("collapse: spread=" + format_double(out.spread) + " slope=" + format_double(out.slope) + " +- " +
             format_double(out.slope_error));

    out.manifest["cells"] = cells;
    out.manifest["curves"] = curves;
    out.manifest["collapse"] = {{"spread_lnP", out.spread},
                                {"bin_width", kCollapseBin},
                                {"band", "3 P_sat <= P <= 30 P_sat"},
                                {"slope", out.slope},
                                {"slope_error", out.slope_error},
                                {"slope_points", out.slope_points},
                                {"saturation_reference", p_sat}};
    finish(ctx, out.manifest);
    return out;
}

std::uintmax_t wigner_compare_bytes(const ExperimentConfig& cfg) {
    const std::uintmax_t n = *std::max_element(cfg.sizes.begin(), cfg.sizes.end());
    const std::uintmax_t r = cfg.resolution;
    // state + reduced density + product temporary (16 N^2 each) + Wigner grid
    // (32 N^2), the classical ensemble and a few R x R grids.
    return 80 * n * n + 16 * std::uintmax_t(cfg.classical_points) + 4 * 8 * r * r;
}

WignerCompareResult run_wigner_compare(const RunContext& ctx) {
    const auto& cfg = ctx.cfg;
    if (cfg.eps.empty()) throw ConfigError("missing mandatory key 'system.eps'");
    WignerCompareResult out;
    out.estimated_bytes = wigner_compare_bytes(cfg);
    const auto budget = std::uintmax_t(cfg.memory_budget_mb * 1024.0 * 1024.0);
    if (out.estimated_bytes > budget)
        throw ResourceRefusal("wigner-compare needs about " + std::to_string(out.estimated_bytes) +
                                  " bytes, budget is " + std::to_string(budget),
                              out.estimated_bytes);

    const double k1 = cfg.k1[0], k2 = cfg.kick2(0);
    auto sizes = cfg.sizes;
    std::sort(sizes.begin(), sizes.end());
    const TorusGrid finest(sizes.back(), cfg.x_offset, cfg.p_offset);
    out.husimi_sigma = symmetric_sigma(finest);

    out.manifest = base_manifest(cfg);
    json notes = json::array();
    if (sizes.back() < 2048)
        notes.push_back("largest quantum size is N=" + std::to_string(sizes.back()) +
                        "; the N=2048 panel is replaced by it");
    notes.push_back("Husimi packets and classical kernel use sigma = sqrt(hbar) of N=" +
                    std::to_string(sizes.back()) + " for every N");
    notes.push_back("Wigner grids are raw: ghost images at N-shifted positions are kept");
    json panels = json::array();

    for (std::size_t n : sizes) {
        const TorusGrid grid(n, cfg.x_offset, cfg.p_offset);
        const double sigma = wavepacket_sigma(grid, cfg.sigma);
        const GaussianSpec spec1{cfg.x0, cfg.p0, sigma};
        const GaussianSpec spec2{cfg.partner_x0, cfg.partner_p0, sigma};

        auto ens = sample_gaussian_ensemble(spec1, grid.hbar(), cfg.classical_points,
                                            derive_seed(cfg.seed, {kClassicalStream, n}));
        ens = evolve_ensemble(std::move(ens), k1, cfg.n_kicks);
        const auto classical = smoothed_density(ens, cfg.resolution, coherent_kernel_widths(grid, out.husimi_sigma));
        out.distances.push_back({"classical-vs-classical", n, 0.0, correspondence_distance(classical, classical)});
        std::string classical_file;
        if (ctx.emitter) classical_file = ctx.emitter->write_grid("classical_N" + std::to_string(n) + ".bin", classical);

        for (double eps : cfg.eps) {
            const auto rho = [&] {
                if (eps == 0.0) {
                    auto psi = make_gaussian(grid, spec1);
                    const OneParticleFloquet floquet(grid, RotorParams{k1});
                    for (int t = 0; t < cfg.n_kicks; ++t) floquet.apply(psi.amplitudes());
                    return pure_density(psi);
                }
                auto state = product_state(make_gaussian(grid, spec1), make_gaussian(grid, spec2));
                const TwoParticleFloquet floquet(grid, grid, RotorParams{k1}, RotorParams{k2},
                                                 CouplingParams{eps, cfg.coupling_offset});
                for (int t = 0; t < cfg.n_kicks; ++t) floquet.apply(state);
                return reduce(state, Particle::First);
            }();
            const double p = purity(rho);
            const auto hus = husimi(rho, cfg.resolution, out.husimi_sigma);
            const double d = correspondence_distance(hus, classical);
            out.distances.push_back({"husimi-vs-classical", n, eps, d});
            ctx.info("wigner-compare N=" + std::to_string(n) + " eps=" + format_double(eps) +
                     ": distance=" + format_double(d) + " purity=" + format_double(p));

            json panel = {{"N", n}, {"eps", eps}, {"purity", p}, {"distance", d}, {"classical_file", classical_file}};
            if (ctx.emitter) {
                const auto tag = "N" + std::to_string(n) + "_eps" + format_double(eps);
                panel["husimi_file"] = ctx.emitter->write_grid("husimi_" + tag + ".bin", hus);
                const auto w = wigner(rho);
                panel["wigner_file"] = ctx.emitter->write_grid("wigner_" + tag + ".bin", w);
                panel["wigner_axes"] = {{"x_min", w.x_min}, {"dx", w.dx}, {"p_min", w.p_min}, {"dp", w.dp}};
            }
            panel["husimi_axes"] = {{"x_min", hus.x_min}, {"dx", hus.dx}, {"p_min", hus.p_min}, {"dp", hus.dp}};
            panels.push_back(panel);
        }
    }
    if (ctx.emitter) ctx.emitter->write_distances("distances.csv", out.distances);

    out.manifest["K1"] = k1;
    out.manifest["K2"] = k2;
    out.manifest["t"] = cfg.n_kicks;
    out.manifest["husimi_sigma"] = out.husimi_sigma;
    out.manifest["estimated_bytes"] = out.estimated_bytes;
    out.manifest["panels"] = panels;
    out.manifest["notes"] = notes;
    finish(ctx, out.manifest);
    return out;
}

namespace {

// Wrapped phase-space distance between two centres.
double torus_distance(PhasePoint a, PhasePoint b) {
    return std::hypot(wrap_angle(a.x - b.x), wrap_angle(a.p - b.p));
}

}  // namespace

EnvResult run_env_decoherence(const RunContext& ctx) {
    const auto& cfg = ctx.cfg;
    if (cfg.eps.empty()) throw ConfigError("missing mandatory key 'system.eps'");
    const double k1 = cfg.k1[0], k2 = cfg.kick2(0), eps = cfg.eps[0];
    const std::size_t n1 = cfg.n1, n2 = cfg.size2();
    const TorusGrid g1(n1, cfg.x_offset, cfg.p_offset), g2(n2, cfg.x_offset, cfg.p_offset);

    EnvResult out;
    out.sigma1 = wavepacket_sigma(g1, cfg.sigma);
    out.sigma2 = wavepacket_sigma(g2, cfg.sigma);
    const auto seed = cell_seed(cfg.seed, k1, k2, eps, n1, n2);
    if (cfg.n_env_states < 4) out.warnings.push_back("n_env_states below 4: the environment is barely mixed");

    Rng rng1(derive_seed(seed, {kEnvironmentStream, 0}));
    out.centre1 = sample_packet(k1, g1, out.sigma1, rng1);
    const auto psi1 = make_gaussian(g1, {out.centre1.x, out.centre1.p, out.sigma1});

    Rng rng2(derive_seed(seed, {kEnvironmentStream, 1}));
    std::vector<OneParticleState> env;
    constexpr int kMaxAttempts = 1000;
    while (env.size() < cfg.n_env_states) {
        bool placed = false;
        for (int attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) {
            const auto c = sample_packet(k2, g2, out.sigma2, rng2);
            bool ok = true;
            for (const auto& prev : out.env_centres)
                if (torus_distance(c, prev) < 6.0 * out.sigma2) ok = false;
            if (!ok) continue;
            auto phi = make_gaussian(g2, {c.x, c.p, out.sigma2});
            for (const auto& other : env) {
                cplx ov{};
                for (std::size_t j = 0; j < n2; ++j) ov += std::conj(other.amplitudes()[j]) * phi.amplitudes()[j];
                if (std::abs(ov) >= 1e-6) ok = false;
            }
            if (!ok) continue;
            out.env_centres.push_back(c);
            env.push_back(std::move(phi));
            placed = true;
        }
        if (!placed) {
            out.warnings.push_back("placed only " + std::to_string(env.size()) + " nonoverlapping environment states");
            break;
        }
    }
    for (const auto& w : out.warnings) ctx.info("warning: " + w);

    out.lyap1 = lyapunov_exponent(k1, cfg.lyapunov_samples, cfg.lyapunov_steps, lyapunov_seed(cfg.seed, k1));
    out.lyap2 = lyapunov_exponent(k2, cfg.lyapunov_samples, cfg.lyapunov_steps, lyapunov_seed(cfg.seed, k2));
    const auto regime = classify_regime(eps, n1, n2, out.lyap1.lambda, out.lyap2.lambda);
    double g = 0.0;
    if (eps > 0.0)
        g = g_correlator(k1, k2, eps, cfg.coupling_offset, cfg.onset_pairs, cfg.correlator_max_lag,
                         derive_seed(seed, {kOnsetStream}))
                .value;
    out.tau1 = safe_onset(out.lyap1.lambda, out.sigma1, g);

    const TwoParticleFloquet floquet(g1, g2, RotorParams{k1}, RotorParams{k2}, CouplingParams{eps, cfg.coupling_offset});
    std::vector<TwoParticleState> states;
    for (const auto& phi : env) states.push_back(product_state(psi1, phi));
    const double weight = 1.0 / double(states.size());

    auto averaged_purity = [&] {
        Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(Eigen::Index(n1), Eigen::Index(n1));
        for (const auto& s : states) accumulate_reduced_lower(acc, s, weight);
        return purity_from_lower(acc);
    };
    auto& series = out.series;
    series.n1 = n1;
    series.n2 = n2;
    series.k1 = k1;
    series.k2 = k2;
    series.eps = eps;
    series.seed = seed;
    series.n_initial_states = 1;
    series.times.push_back(0);
    series.values.push_back(averaged_purity());
    for (int t = 1; t <= cfg.n_kicks; ++t) {
        parallel_for(states.size(), cfg.threads, [&](std::size_t i) { floquet.apply(states[i]); });
        series.times.push_back(t);
        series.values.push_back(averaged_purity());
    }
    series.stderr_.assign(series.values.size(), 0.0);
    out.saturation_mean = mean_last(series.values, 5);

    auto params = SemiclassicalParams::make(out.lyap1.lambda, out.lyap2.lambda, regime.gamma, n1, n2);
    params.tau1 = out.tau1;
    if (series.times.size() < kMinFitSeries)
        out.fit_error = "series too short to fit";
    else
        try {
            out.fit = fit_decay(series, params, 1.0 / double(n1));
        } catch (const InsufficientDecayError& e) {
            out.fit_error = e.what();
        }
    ctx.info("env-decoherence: lambda1=" + format_double(out.lyap1.lambda) +
             (out.fit ? " fitted=" + format_double(out.fit->rate) : " fit: " + out.fit_error) +
             " saturation=" + format_double(out.saturation_mean));

    out.manifest = base_manifest(cfg);
    std::string file;
    if (ctx.emitter) file = ctx.emitter->write_purity("purity_env_" + cell_tag(k1, k2, eps) + ".csv", series);
    json centres = json::array();
    for (const auto& c : out.env_centres) centres.push_back({c.x, c.p});
    out.manifest["cell"] = {{"K1", k1},
                            {"K2", k2},
                            {"eps", eps},
                            {"N1", n1},
                            {"N2", n2},
                            {"seed", seed},
                            {"lambda1", to_json(out.lyap1)},
                            {"lambda2", to_json(out.lyap2)},
                            {"G", g},
                            {"sigma1", out.sigma1},
                            {"sigma2", out.sigma2},
                            {"tau1", out.tau1},
                            {"regime", to_json(regime)},
                            {"saturation_reference", 1.0 / double(n1)},
                            {"saturation_last5", out.saturation_mean},
                            {"fit", out.fit ? to_json(*out.fit) : json(nullptr)},
                            {"fit_error", out.fit_error},
                            {"centre1", {out.centre1.x, out.centre1.p}},
                            {"environment_centres", centres},
                            {"n_env_states", env.size()},
                            {"file", file}};
    out.manifest["warnings"] = out.warnings;
    finish(ctx, out.manifest);
    return out;
}

GammaResult run_gamma_estimate(const RunContext& ctx) {
    const auto& cfg = ctx.cfg;
    if (cfg.eps.empty()) throw ConfigError("missing mandatory key 'system.eps'");
    GammaResult out;
    out.manifest = base_manifest(cfg);
    json rows = json::array();
    std::vector<std::string> csv;
    for (std::size_t i = 0; i < cfg.k1.size(); ++i)
        for (double eps : cfg.eps) {
            GammaRow row;
            row.k1 = cfg.k1[i];
            row.k2 = cfg.kick2(i);
            row.eps = eps;
            const auto s = derive_seed(cfg.seed, {kGammaStream, bits(row.k1), bits(row.k2), bits(eps)});
            row.gamma = gamma_from_correlator(row.k1, row.k2, eps, cfg.coupling_offset, cfg.correlator_pairs,
                                              cfg.correlator_max_lag, s);
            row.force = g_correlator(row.k1, row.k2, eps, cfg.coupling_offset, cfg.correlator_pairs,
                                     cfg.correlator_max_lag, derive_seed(s, {kOnsetStream}));
            const double per_eps2 = eps > 0.0 ? row.gamma.value / (eps * eps) : 0.0;
            ctx.info("gamma K1=" + format_double(row.k1) + " eps=" + format_double(eps) +
                     ": Gamma=" + format_double(row.gamma.value) + " Gamma/eps^2=" + format_double(per_eps2));
            for (const auto& w : row.gamma.warnings) ctx.info("warning: " + w);
            csv.push_back(csv_number(row.k1) + "," + csv_number(row.k2) + "," + csv_number(eps) + "," +
                          csv_number(row.gamma.value) + "," + csv_number(per_eps2) + "," +
                          csv_number(row.force.value) + "," + std::to_string(row.gamma.terms.size()));
            rows.push_back({{"K1", row.k1},
                            {"K2", row.k2},
                            {"eps", eps},
                            {"seed", s},
                            {"gamma", to_json(row.gamma)},
                            {"gamma_per_eps2", per_eps2},
                            {"G", to_json(row.force)}});
            out.rows.push_back(std::move(row));
        }
    if (ctx.emitter) ctx.emitter->write_csv("gamma.csv", "K1,K2,eps,gamma,gamma_per_eps2,G,terms", csv);
    out.manifest["rows"] = rows;
    out.manifest["reference_gamma_per_eps2"] = kGammaPerEps2;
    finish(ctx, out.manifest);
    return out;
}

LyapunovResult run_lyapunov_estimate(const RunContext& ctx) {
    const auto& cfg = ctx.cfg;
    LyapunovResult out;
    out.manifest = base_manifest(cfg);
    json rows = json::array();
    std::vector<std::string> csv;
    for (double k : cfg.k1) {
        LyapunovRow row;
        row.kick = k;
        const auto s = lyapunov_seed(cfg.seed, k);
        row.benettin = lyapunov_exponent(k, cfg.lyapunov_samples, cfg.lyapunov_steps, s);
        row.two_trajectory = lyapunov_two_trajectory(k, cfg.lyapunov_samples, cfg.lyapunov_steps, derive_seed(s, {2}));
        row.formula = lyapunov_formula(k);
        ctx.info("lyapunov K=" + format_double(k) + ": " + format_double(row.benettin.lambda) + " (two-trajectory " +
                 format_double(row.two_trajectory.lambda) + ", ln(K/2) " + format_double(row.formula) + ")");
        csv.push_back(csv_number(k) + "," + csv_number(row.benettin.lambda) + "," +
                      csv_number(row.benettin.std_error) + "," + csv_number(row.two_trajectory.lambda) + "," +
                      csv_number(row.two_trajectory.std_error) + "," + csv_number(row.formula));
        rows.push_back({{"K", k},
                        {"benettin", to_json(row.benettin)},
                        {"two_trajectory", to_json(row.two_trajectory)},
                        {"ln_K_over_2", row.formula}});
        out.rows.push_back(std::move(row));
    }
    if (ctx.emitter)
        ctx.emitter->write_csv("lyapunov.csv", "K,lambda,std_error,lambda_two_trajectory,std_error_two_trajectory,ln_K_over_2",
                               csv);
    out.manifest["rows"] = rows;
    finish(ctx, out.manifest);
    return out;
}

json run_experiment(const RunContext& ctx) {
    switch (ctx.cfg.kind) {
        case ExperimentKind::PuritySweep: return run_purity_sweep(ctx).manifest;
        case ExperimentKind::LyapunovCollapse: return run_lyapunov_collapse(ctx).manifest;
        case ExperimentKind::WignerCompare: return run_wigner_compare(ctx).manifest;
        case ExperimentKind::EnvDecoherence: return run_env_decoherence(ctx).manifest;
        case ExperimentKind::GammaEstimate: return run_gamma_estimate(ctx).manifest;
        case ExperimentKind::LyapunovEstimate: return run_lyapunov_estimate(ctx).manifest;
    }
    throw ConfigError("unknown experiment kind");
}

}  // namespace qkr

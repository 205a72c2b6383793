#include "qkr/theory.hpp"

#include <algorithm>
#include <cmath>

#include "qkr/classical.hpp"
#include "qkr/errors.hpp"

namespace qkr {

double ehrenfest_time(double lambda, std::size_t n) {
    if (!(lambda > 0.0)) return std::numeric_limits<double>::infinity();
    return std::log(double(n)) / lambda;
}

SemiclassicalParams SemiclassicalParams::make(double lambda1, double lambda2, double gamma, std::size_t n1,
                                              std::size_t n2) {
    SemiclassicalParams p;
    p.lambda1 = lambda1;
    p.lambda2 = lambda2;
    p.gamma = gamma;
    p.n1 = n1;
    p.n2 = n2;
    p.tau_e1 = ehrenfest_time(lambda1, n1);
    p.tau_e2 = ehrenfest_time(lambda2, n2);
    return p;
}

namespace {
double step(double t, double tau) { return t > tau ? 1.0 : 0.0; }
}  // namespace

double predict_purity(const SemiclassicalParams& p, double t) {
    const double v = p.alpha1 * step(t, p.tau1) * std::exp(-p.lambda1 * t) +
                     p.alpha2 * step(t, p.tau2) * std::exp(-p.lambda2 * t) + std::exp(-2.0 * p.gamma * t) +
                     step(t, p.tau_e1) / double(p.n1) + step(t, p.tau_e2) / double(p.n2);
    return std::min(1.0, v);
}

double predict_rate(const SemiclassicalParams& p) { return std::min({p.lambda1, p.lambda2, 2.0 * p.gamma}); }

double predict_purity_env(const SemiclassicalParams& p, double t) {
    const double v = p.alpha1 * step(t, p.tau1) * std::exp(-p.lambda1 * t) + std::exp(-2.0 * p.gamma * t) +
                     step(t, p.tau_e1) / double(p.n1);
    return std::min(1.0, v);
}

namespace {

PhasePoint initial_point(double kick, Rng& rng) {
    if (has_islands(kick)) return sample_chaotic_point(kick, rng);
    std::uniform_real_distribution<double> u(-kPi, kPi);
    return {u(rng), u(rng)};
}

template <class Observable>
CorrelatorEstimate correlator_sum(double k1, double k2, double offset, std::size_t n_traj, int max_lag,
                                  std::uint64_t seed, Observable&& obs) {
    if (n_traj < 1) throw ContractViolation("correlator needs at least one trajectory pair");
    CorrelatorEstimate est;
    for (double k : {k1, k2})
        if (k < 1.0) est.warnings.push_back("K = " + std::to_string(k) + " is not chaotic; correlator may not decay");

    Rng rng(seed);
    std::vector<PhasePoint> a(n_traj), b(n_traj);
    std::vector<double> first(n_traj);
    for (std::size_t i = 0; i < n_traj; ++i) {
        a[i] = initial_point(k1, rng);
        b[i] = initial_point(k2, rng);
        first[i] = obs(a[i].x - b[i].x - offset);
    }
    double c0 = 0.0;
    for (double f : first) c0 += f * f;
    c0 /= double(n_traj);
    est.terms.push_back(c0);
    est.value = c0;
    if (c0 == 0.0) return est;

    for (int lag = 1; lag <= max_lag; ++lag) {
        double c = 0.0;
        for (std::size_t i = 0; i < n_traj; ++i) {
            a[i] = standard_map_step(a[i], k1);
            b[i] = standard_map_step(b[i], k2);
            c += first[i] * obs(a[i].x - b[i].x - offset);
        }
        c /= double(n_traj);
        if (std::abs(c) < kCorrelatorCutoff * c0) break;
        est.terms.push_back(c);
        est.value += c;
    }
    return est;
}

}  // namespace

CorrelatorEstimate gamma_from_correlator(double k1, double k2, double eps, double offset, std::size_t n_traj,
                                         int max_lag, std::uint64_t seed) {
    return correlator_sum(k1, k2, offset, n_traj, max_lag, seed, [eps](double d) { return eps * std::sin(d); });
}

CorrelatorEstimate g_correlator(double k1, double k2, double eps, double offset, std::size_t n_traj, int max_lag,
                                std::uint64_t seed) {
    return correlator_sum(k1, k2, offset, n_traj, max_lag, seed, [eps](double d) { return eps * std::cos(d); });
}

double onset_time(double lambda, double sigma, double g) {
    if (!(lambda > 0.0)) throw ContractViolation("onset time needs a positive Lyapunov exponent");
    if (!(g > 0.0)) return std::numeric_limits<double>::infinity();
    const double arg = lambda / (sigma * sigma * g);
    if (arg <= 1.0) return 0.0;
    return std::log(arg) / lambda;
}

std::string to_string(Regime r) {
    switch (r) {
        case Regime::BelowValidity: return "below-validity";
        case Regime::ValidGoldenRule: return "valid-golden-rule";
        case Regime::ValidLyapunovSaturated: return "valid-lyapunov-saturated";
        case Regime::AboveValidity: return "above-validity";
    }
    return "unknown";
}

RegimeReport classify_regime(double eps, std::size_t n1, std::size_t n2, double lambda1, double lambda2) {
    RegimeReport r;
    r.gamma = kGammaPerEps2 * eps * eps;
    r.delta2 = kBandwidth2 / (double(n1) * double(n2));
    if (r.gamma < r.delta2)
        r.classification = Regime::BelowValidity;
    else if (r.gamma > r.bandwidth)
        r.classification = Regime::AboveValidity;
    else if (2.0 * r.gamma > std::max(lambda1, lambda2))
        r.classification = Regime::ValidLyapunovSaturated;
    else
        r.classification = Regime::ValidGoldenRule;
    return r;
}

DecayFit fit_decay(const PuritySeries& series, const SemiclassicalParams& params, std::optional<double> saturation) {
    if (series.times.size() < 6 || series.values.size() != series.times.size())
        throw ContractViolation("decay fit needs a series of at least 6 points");
    DecayFit fit;
    fit.saturation = saturation.value_or(1.0 / double(params.n1) + 1.0 / double(params.n2));
    if (!std::isfinite(params.tau1))
        throw InsufficientDecayError("no classical decay channel (infinite onset time)");
    fit.t_start = std::max(1, int(std::ceil(params.tau1)) + 1);

    fit.t_end = -1;
    for (std::size_t i = 0; i < series.times.size(); ++i)
        if (series.values[i] > 3.0 * fit.saturation) fit.t_end = std::max(fit.t_end, series.times[i]);

    std::vector<double> ts, ys;
    for (std::size_t i = 0; i < series.times.size(); ++i) {
        const int t = series.times[i];
        if (t < fit.t_start || t > fit.t_end) continue;
        ts.push_back(double(t));
        ys.push_back(std::log(series.values[i] - fit.saturation));
    }
    fit.n_points = ts.size();
    if (ts.size() < 4)
        throw InsufficientDecayError("decay window [" + std::to_string(fit.t_start) + ", " +
                                     std::to_string(fit.t_end) + "] holds " + std::to_string(ts.size()) +
                                     " points, need 4");

    const double n = double(ts.size());
    double mt = 0.0, my = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        mt += ts[i];
        my += ys[i];
    }
    mt /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        sxx += (ts[i] - mt) * (ts[i] - mt);
        sxy += (ts[i] - mt) * (ys[i] - my);
    }
    const double slope = sxy / sxx;
    double ssr = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const double r = ys[i] - (my + slope * (ts[i] - mt));
        ssr += r * r;
    }
    fit.rate = std::max(0.0, -slope);
    fit.rate_error = std::sqrt(ssr / (n - 2.0) / sxx);
    return fit;
}

}  // namespace qkr

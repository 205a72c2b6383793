#include "qkr/classical.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qkr/errors.hpp"

namespace qkr {

double wrap_angle(double v) {
    double r = std::fmod(v + kPi, kTwoPi);
    if (r <= 0.0) r += kTwoPi;
    return r - kPi;
}

PhasePoint standard_map_step(PhasePoint pt, double kick) {
    const double p = wrap_angle(pt.p + kick * std::sin(pt.x));
    return {wrap_angle(pt.x + p), p};
}

std::array<double, 4> standard_map_jacobian(PhasePoint pt, double kick) {
    const double c = kick * std::cos(pt.x);
    return {1.0 + c, 1.0, c, 1.0};
}

std::pair<PhasePoint, TangentVector> tangent_step(PhasePoint pt, TangentVector v, double kick) {
    const double c = kick * std::cos(pt.x);
    const double dp = c * v.dx + v.dp;
    return {standard_map_step(pt, kick), {v.dx + dp, dp}};
}

double finite_time_exponent(PhasePoint pt, double kick, int n_steps) {
    TangentVector v{1.0, 0.0};
    double acc = 0.0;
    for (int t = 0; t < n_steps; ++t) {
        std::tie(pt, v) = tangent_step(pt, v, kick);
        const double len = std::hypot(v.dx, v.dp);
        acc += std::log(len);
        v.dx /= len;
        v.dp /= len;
    }
    return acc / n_steps;
}

bool in_chaotic_sea(PhasePoint pt, double kick) {
    return finite_time_exponent(pt, kick, kIslandProbeSteps) >= kIslandThreshold;
}

PhasePoint sample_chaotic_point(double kick, Rng& rng, int max_attempts) {
    if (kick < 1.0)
        throw NoChaoticSeaError("no chaotic sea for K = " + std::to_string(kick) + " < 1");
    std::uniform_real_distribution<double> u(-kPi, kPi);
    for (int i = 0; i < max_attempts; ++i) {
        const PhasePoint pt{u(rng), u(rng)};
        if (in_chaotic_sea(pt, kick)) return pt;
    }
    throw NoChaoticSeaError("no chaotic-sea point found for K = " + std::to_string(kick));
}

bool packet_in_chaotic_sea(PhasePoint c, double sx, double sp, double kick) {
    if (!in_chaotic_sea(c, kick)) return false;
    for (int r = 1; r <= 2; ++r)
        for (int k = 0; k < 8; ++k) {
            const double a = k * kPi / 4.0;
            const PhasePoint probe{wrap_angle(c.x + r * sx * std::cos(a)), wrap_angle(c.p + r * sp * std::sin(a))};
            if (!in_chaotic_sea(probe, kick)) return false;
        }
    return true;
}

PhasePoint sample_chaotic_packet(double kick, double sx, double sp, Rng& rng, int max_attempts) {
    if (kick < 1.0)
        throw NoChaoticSeaError("no chaotic sea for K = " + std::to_string(kick) + " < 1");
    std::uniform_real_distribution<double> u(-kPi, kPi);
    for (int i = 0; i < max_attempts; ++i) {
        const PhasePoint pt{u(rng), u(rng)};
        if (packet_in_chaotic_sea(pt, sx, sp, kick)) return pt;
    }
    throw NoChaoticSeaError("no chaotic-sea packet found for K = " + std::to_string(kick));
}

namespace {

template <class PerSample>
LyapunovEstimate average_exponent(double kick, int n_samples, int n_steps, std::uint64_t seed, PerSample&& one) {
    if (n_samples < 1 || n_steps < 1) throw ContractViolation("Lyapunov estimate needs samples and steps");
    Rng rng(seed);
    std::uniform_real_distribution<double> u(-kPi, kPi);
    const bool exclude = has_islands(kick);
    const long max_draws = 20L * n_samples;

    LyapunovEstimate est;
    est.n_steps = n_steps;
    std::vector<double> values;
    values.reserve(std::size_t(n_samples));
    long draws = 0;
    while (int(values.size()) < n_samples && draws < max_draws) {
        ++draws;
        const PhasePoint pt{u(rng), u(rng)};
        const double angle = u(rng);
        if (exclude && !in_chaotic_sea(pt, kick)) {
            ++est.n_rejected;
            continue;
        }
        values.push_back(one(pt, angle));
    }
    if (values.empty()) throw NoChaoticSeaError("every sample was island-trapped for K = " + std::to_string(kick));

    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= double(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var = values.size() > 1 ? var / double(values.size() - 1) : 0.0;

    est.lambda = std::max(0.0, mean);
    est.std_error = std::sqrt(var / double(values.size()));
    est.n_samples = int(values.size());
    return est;
}

}  // namespace

LyapunovEstimate lyapunov_exponent(double kick, int n_samples, int n_steps, std::uint64_t seed) {
    return average_exponent(kick, n_samples, n_steps, seed, [&](PhasePoint pt, double angle) {
        TangentVector v{std::cos(angle), std::sin(angle)};
        double acc = 0.0;
        for (int t = 0; t < n_steps; ++t) {
            std::tie(pt, v) = tangent_step(pt, v, kick);
            const double len = std::hypot(v.dx, v.dp);
            acc += std::log(len);
            v.dx /= len;
            v.dp /= len;
        }
        return acc / n_steps;
    });
}

LyapunovEstimate lyapunov_two_trajectory(double kick, int n_samples, int n_steps, std::uint64_t seed, double d0) {
    return average_exponent(kick, n_samples, n_steps, seed, [&](PhasePoint pt, double angle) {
        PhasePoint shadow{wrap_angle(pt.x + d0 * std::cos(angle)), wrap_angle(pt.p + d0 * std::sin(angle))};
        double acc = 0.0;
        for (int t = 0; t < n_steps; ++t) {
            pt = standard_map_step(pt, kick);
            shadow = standard_map_step(shadow, kick);
            const double ddx = wrap_angle(shadow.x - pt.x);
            const double ddp = wrap_angle(shadow.p - pt.p);
            const double d = std::hypot(ddx, ddp);
            acc += std::log(d / d0);
            shadow = {wrap_angle(pt.x + ddx * d0 / d), wrap_angle(pt.p + ddp * d0 / d)};
        }
        return acc / n_steps;
    });
}

ClassicalEnsemble sample_gaussian_ensemble(const GaussianSpec& spec, double hbar, std::size_t count,
                                           std::uint64_t seed) {
    if (count < 1) throw ContractViolation("ensemble needs at least one point");
    if (!(spec.sigma > 0.0)) throw ContractViolation("ensemble width must be positive");
    Rng rng(seed);
    std::normal_distribution<double> gx(spec.x0, spec.sigma / std::sqrt(2.0));
    std::normal_distribution<double> gp(spec.p0, hbar / (std::sqrt(2.0) * spec.sigma));
    ClassicalEnsemble ens;
    ens.points.resize(count);
    for (auto& pt : ens.points) {
        const double x = gx(rng);
        const double p = gp(rng);
        pt = {wrap_angle(x), wrap_angle(p)};
    }
    return ens;
}

ClassicalEnsemble evolve_ensemble(ClassicalEnsemble ens, double kick, int n_steps) {
    for (auto& pt : ens.points)
        for (int t = 0; t < n_steps; ++t) pt = standard_map_step(pt, kick);
    return ens;
}

PhaseSpaceDistribution histogram(const ClassicalEnsemble& ens, std::size_t bins_x, std::size_t bins_p) {
    if (bins_x < 2 || bins_p < 2) throw ContractViolation("histogram needs at least 2 bins per axis");
    if (ens.points.empty()) throw ContractViolation("histogram of an empty ensemble");
    PhaseSpaceDistribution h;
    h.kind = DistributionKind::Classical;
    h.rows = bins_x;
    h.cols = bins_p;
    h.dx = kTwoPi / double(bins_x);
    h.dp = kTwoPi / double(bins_p);
    h.x_min = -kPi + 0.5 * h.dx;
    h.p_min = -kPi + 0.5 * h.dp;
    h.values.assign(bins_x * bins_p, 0.0);
    std::vector<std::size_t> counts(bins_x * bins_p, 0);
    for (const auto& pt : ens.points) {
        auto ix = std::size_t((pt.x + kPi) / h.dx);
        auto ip = std::size_t((pt.p + kPi) / h.dp);
        ix = std::min(ix, bins_x - 1);
        ip = std::min(ip, bins_p - 1);
        ++counts[ix * bins_p + ip];
    }
    const double inv = 1.0 / double(ens.points.size());
    for (std::size_t i = 0; i < counts.size(); ++i) h.values[i] = double(counts[i]) * inv;
    return h;
}

namespace {

// Periodic Gaussian weights of one coordinate over the cells it reaches.
struct AxisWeights {
    std::vector<std::size_t> cells;
    std::vector<double> weights;
};

void axis_weights(double v, double first_centre, double step, std::size_t n, double s, long half, AxisWeights& out) {
    out.cells.clear();
    out.weights.clear();
    const bool all = 2 * half + 1 >= long(n);
    const long centre = long(std::floor((v - first_centre) / step + 0.5));
    const long lo = all ? 0 : centre - half;
    const long hi = all ? long(n) - 1 : centre + half;
    const double inv = 1.0 / (2.0 * s * s);
    for (long c = lo; c <= hi; ++c) {
        const auto cell = std::size_t(((c % long(n)) + long(n)) % long(n));
        const double d = wrap_angle(first_centre + double(cell) * step - v);
        double w = 0.0;
        for (int img = -1; img <= 1; ++img) {
            const double e = d + kTwoPi * img;
            w += std::exp(-e * e * inv);
        }
        out.cells.push_back(cell);
        out.weights.push_back(w);
    }
}

}  // namespace

PhaseSpaceDistribution smoothed_density(const ClassicalEnsemble& ens, std::size_t resolution,
                                        const KernelWidths& kernel) {
    if (ens.points.empty()) throw ContractViolation("smoothing an empty ensemble");
    if (!(kernel.sx > 0.0 && kernel.sp > 0.0)) throw ContractViolation("kernel widths must be positive");
    auto out = make_cell_grid(DistributionKind::Classical, resolution);
    const long hx = long(std::ceil(7.0 * kernel.sx / out.dx)) + 1;
    const long hp = long(std::ceil(7.0 * kernel.sp / out.dp)) + 1;
    AxisWeights wx, wp;
    for (const auto& pt : ens.points) {
        axis_weights(pt.x, out.x_min, out.dx, resolution, kernel.sx, hx, wx);
        axis_weights(pt.p, out.p_min, out.dp, resolution, kernel.sp, hp, wp);
        for (std::size_t a = 0; a < wx.cells.size(); ++a) {
            double* row = out.values.data() + wx.cells[a] * resolution;
            const double w = wx.weights[a];
            for (std::size_t b = 0; b < wp.cells.size(); ++b) row[wp.cells[b]] += w * wp.weights[b];
        }
    }
    out.normalize();
    return out;
}

}  // namespace qkr

#include "qkr/observables.hpp"

#include <algorithm>
#include <cmath>

#include "qkr/errors.hpp"

namespace qkr {

ReducedDensity reduce(const TwoParticleState& state, Particle which) {
    const auto a = state.matrix();
    if (which == Particle::First) return {state.grid1(), a * a.adjoint()};
    return {state.grid2(), a.transpose() * a.conjugate()};
}

ReducedDensity pure_density(const OneParticleState& state) {
    const auto psi = state.amplitudes();
    Eigen::Map<const Eigen::VectorXcd> v(psi.data(), Eigen::Index(psi.size()));
    return {state.grid(), v * v.adjoint()};
}

double purity(const ReducedDensity& rho) { return rho.matrix.squaredNorm(); }

double purity_from_lower(const Eigen::MatrixXcd& lower) {
    const auto n = lower.rows();
    double diag = 0.0, off = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        diag += std::norm(lower(j, j));
        for (Eigen::Index i = j + 1; i < n; ++i) off += std::norm(lower(i, j));
    }
    return diag + 2.0 * off;
}

double purity(const TwoParticleState& state) {
    const auto a = state.matrix();
    if (state.rows() <= state.cols()) {
        Eigen::MatrixXcd g = Eigen::MatrixXcd::Zero(a.rows(), a.rows());
        g.selfadjointView<Eigen::Lower>().rankUpdate(a);
        return purity_from_lower(g);
    }
    Eigen::MatrixXcd g = Eigen::MatrixXcd::Zero(a.cols(), a.cols());
    g.selfadjointView<Eigen::Lower>().rankUpdate(a.adjoint());
    return purity_from_lower(g);
}

void accumulate_reduced_lower(Eigen::MatrixXcd& acc, const TwoParticleState& state, double weight) {
    const auto n = Eigen::Index(state.rows());
    if (acc.rows() != n || acc.cols() != n) throw ContractViolation("accumulator does not match N1");
    acc.selfadjointView<Eigen::Lower>().rankUpdate(state.matrix(), weight);
}

std::string to_string(DistributionKind kind) {
    switch (kind) {
        case DistributionKind::Wigner: return "wigner";
        case DistributionKind::Husimi: return "husimi";
        case DistributionKind::Classical: return "classical";
    }
    return "unknown";
}

double PhaseSpaceDistribution::sum() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
}

void PhaseSpaceDistribution::normalize() {
    const double s = sum();
    if (s == 0.0) throw InvalidStateError("cannot normalize an empty distribution");
    for (double& v : values) v /= s;
}

PhaseSpaceDistribution make_cell_grid(DistributionKind kind, std::size_t resolution) {
    PhaseSpaceDistribution d;
    d.kind = kind;
    d.rows = d.cols = resolution;
    d.dx = d.dp = kTwoPi / double(resolution);
    d.x_min = d.p_min = -kPi + 0.5 * d.dx;
    d.values.assign(resolution * resolution, 0.0);
    return d;
}

// ---------------------------------------------------------------------------
// Wigner

PhaseSpaceDistribution wigner(const ReducedDensity& rho) {
    const auto n = rho.dim();
    if (n % 2 != 0) throw ContractViolation("discrete Wigner function requires even N");
    const std::size_t m = 2 * n;
    const long ln = long(n);

    PhaseSpaceDistribution w;
    w.kind = DistributionKind::Wigner;
    w.rows = w.cols = m;
    w.dx = w.dp = kPi / double(n);
    w.x_min = rho.grid.x(0);
    w.p_min = -kPi;
    w.values.assign(m * m, 0.0);

    auto plan = fft::plan(m);
    CVector f(m);
    const double c = 1.0 / double(m);
    for (std::size_t a = 0; a < m; ++a) {
        std::fill(f.begin(), f.end(), cplx{});
        for (std::size_t ap = a % 2; ap < m; ap += 2) {
            const long s = (long(a) + long(ap)) / 2;
            const long d = (long(a) - long(ap)) / 2;
            f[ap] = rho.matrix(((s % ln) + ln) % ln, ((d % ln) + ln) % ln);
        }
        plan->forward(f.data());  // sum_a' f exp(-i pi b a' / N)
        for (std::size_t col = 0; col < m; ++col) {
            const std::size_t b = (col + n) % m;  // p = (pi/N) (col - N)
            w.values[a * m + col] = c * f[b].real();
        }
    }
    return w;
}

Eigen::MatrixXcd wigner_inverse(const PhaseSpaceDistribution& w, const TorusGrid& grid) {
    const auto n = grid.size();
    const std::size_t m = 2 * n;
    if (w.kind != DistributionKind::Wigner || w.rows != m || w.cols != m)
        throw ContractViolation("wigner_inverse needs a 2N x 2N Wigner grid");

    // Recover f_a(a') for every a, then read rho_{(a+a')/2, (a-a')/2}.
    auto plan = fft::plan(m);
    std::vector<CVector> f(m, CVector(m));
    for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t col = 0; col < m; ++col) f[a][(col + n) % m] = w.values[a * m + col] * double(m);
        plan->backward(f[a].data());
        for (auto& v : f[a]) v /= double(m);
    }
    Eigen::MatrixXcd rho(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) rho(Eigen::Index(i), Eigen::Index(j)) = f[(i + j) % m][(i + m - j) % m];
    return rho;
}

// ---------------------------------------------------------------------------
// Husimi

KernelWidths coherent_kernel_widths(const TorusGrid& grid, double sigma) {
    return {sigma / std::sqrt(2.0), grid.hbar() / (std::sqrt(2.0) * sigma)};
}

PhaseSpaceDistribution husimi(const ReducedDensity& rho, std::size_t resolution, double sigma) {
    if (resolution < 16) throw ContractViolation("Husimi resolution must be at least 16");
    if (!(sigma > 0.0)) throw ContractViolation("Husimi packet width must be positive");
    const auto& grid = rho.grid;
    const long n = long(grid.size());
    auto out = make_cell_grid(DistributionKind::Husimi, resolution);

    // Packets are negligible (< e^-40) beyond 9 sigma; restrict to that window.
    const double site = kTwoPi / double(n);
    const long half = std::min<long>(n / 2, long(std::ceil(9.0 * sigma / site)) + 1);
    const long width = std::min<long>(n, 2 * half + 1);
    const auto r = Eigen::Index(resolution);

    std::vector<long> idx(std::size_t(width), 0);
    Eigen::MatrixXcd block(width, width);
    Eigen::MatrixXcd packets(width, r);
    for (std::size_t ix = 0; ix < resolution; ++ix) {
        const double x0 = out.x(ix);
        const long centre = long(std::floor((x0 - grid.x(0)) / site + 0.5));
        const long first = width == n ? 0 : centre - half;
        for (long w = 0; w < width; ++w) idx[std::size_t(w)] = (((first + w) % n) + n) % n;
        for (long a = 0; a < width; ++a)
            for (long b = 0; b < width; ++b) block(a, b) = rho.matrix(idx[std::size_t(a)], idx[std::size_t(b)]);

        for (Eigen::Index ip = 0; ip < r; ++ip) {
            const GaussianSpec spec{x0, out.p(std::size_t(ip)), sigma};
            for (long w = 0; w < width; ++w)
                packets(w, ip) = gaussian_amplitude(grid.x(std::size_t(idx[std::size_t(w)])), spec, grid.hbar());
        }
        const Eigen::MatrixXcd applied = block * packets;
        for (Eigen::Index ip = 0; ip < r; ++ip)
            out.at(ix, std::size_t(ip)) = packets.col(ip).dot(applied.col(ip)).real() / packets.col(ip).squaredNorm();
    }
    out.normalize();
    return out;
}

double correspondence_distance(const PhaseSpaceDistribution& q, const PhaseSpaceDistribution& cl) {
    if (q.rows != cl.rows || q.cols != cl.cols || std::abs(q.x_min - cl.x_min) > 1e-12 ||
        std::abs(q.dx - cl.dx) > 1e-12 || std::abs(q.p_min - cl.p_min) > 1e-12 || std::abs(q.dp - cl.dp) > 1e-12)
        throw ContractViolation("correspondence distance needs identical grids");
    if (q.kind == DistributionKind::Wigner || cl.kind == DistributionKind::Wigner)
        throw ContractViolation("correspondence distance is defined for positive densities only");
    const double sq = q.sum();
    const double sc = cl.sum();
    double tv = 0.0;
    for (std::size_t i = 0; i < q.values.size(); ++i) tv += std::abs(q.values[i] / sq - cl.values[i] / sc);
    return 0.5 * tv;
}

}  // namespace qkr

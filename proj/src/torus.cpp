#include "qkr/torus.hpp"

#include <string>

#include "qkr/errors.hpp"

namespace qkr {
namespace {

constexpr cplx kI{0.0, 1.0};

double squared_norm(std::span<const cplx> v) {
    double s = 0.0;
    for (const auto& a : v) s += std::norm(a);
    return s;
}

// exp(-2 pi i (p_offset - N/2) j / N): folds the shifted momentum ladder into
// a plain DFT. The matching post-factor exp(-i m_k x_0) cancels between the
// forward and backward transforms of a step.
CVector dft_twist(const TorusGrid& g) {
    const double n = double(g.size());
    const double shift = g.p_offset() - 0.5 * n;
    CVector t(g.size());
    for (std::size_t j = 0; j < g.size(); ++j) t[j] = std::polar(1.0, -kTwoPi * shift * double(j) / n);
    return t;
}

CVector free_phases(const TorusGrid& g, double period) {
    CVector f(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) {
        const double m = g.wavenumber(k);
        f[k] = std::polar(1.0, -0.5 * g.hbar() * m * m * period);
    }
    return f;
}

CVector kick_phases(const TorusGrid& g, double kick) {
    CVector f(g.size());
    for (std::size_t j = 0; j < g.size(); ++j) f[j] = std::polar(1.0, -kick * std::cos(g.x(j)) / g.hbar());
    return f;
}

void check_offset(double v, const char* name) {
    if (!(v >= 0.0 && v < 1.0)) throw ContractViolation(std::string(name) + " must lie in [0, 1)");
}

}  // namespace

TorusGrid::TorusGrid(std::size_t n_sites, double x_offset, double p_offset)
    : n_(n_sites), hbar_(kTwoPi / double(n_sites)), x_offset_(x_offset), p_offset_(p_offset) {
    if (n_sites < 2 || n_sites % 2 != 0) throw ContractViolation("torus grid needs a positive even number of sites");
    check_offset(x_offset, "x_offset");
    check_offset(p_offset, "p_offset");
}

OneParticleState::OneParticleState(TorusGrid grid, CVector amplitudes)
    : grid_(grid), amps_(std::move(amplitudes)) {
    if (amps_.size() != grid_.size()) throw ContractViolation("amplitude count does not match grid");
}

double OneParticleState::norm() const { return std::sqrt(squared_norm(amps_)); }

TwoParticleState::TwoParticleState(TorusGrid grid1, TorusGrid grid2, CVector amplitudes)
    : grid1_(grid1), grid2_(grid2), amps_(std::move(amplitudes)) {
    if (amps_.size() != grid1_.size() * grid2_.size())
        throw ContractViolation("amplitude count does not match N1 * N2");
}

double TwoParticleState::norm() const { return std::sqrt(squared_norm(amps_)); }

cplx gaussian_amplitude(double x, const GaussianSpec& spec, double hbar) {
    const double inv_2s2 = 1.0 / (2.0 * spec.sigma * spec.sigma);
    cplx sum = 0.0;
    for (int w = -3; w <= 3; ++w) {
        const double d = x - spec.x0 + kTwoPi * w;
        const double e = -d * d * inv_2s2;
        if (e > -745.0) sum += std::polar(std::exp(e), spec.p0 * d / hbar);
    }
    return sum;
}

OneParticleState make_gaussian(const TorusGrid& grid, const GaussianSpec& spec) {
    if (!(spec.sigma > 0.0)) throw ContractViolation("wavepacket width must be positive");
    if (!(std::abs(spec.x0) <= kPi && std::abs(spec.p0) <= kPi))
        throw ContractViolation("wavepacket center must lie inside the torus");

    CVector psi(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) psi[j] = gaussian_amplitude(grid.x(j), spec, grid.hbar());
    const double nrm2 = squared_norm(psi);
    if (!(nrm2 > 1e-280) || !std::isfinite(nrm2))
        throw InvalidStateError("Gaussian wavepacket has zero norm on this grid (sigma too small?)");
    const double inv = 1.0 / std::sqrt(nrm2);
    for (auto& a : psi) a *= inv;
    return OneParticleState(grid, std::move(psi));
}

TwoParticleState product_state(const OneParticleState& a, const OneParticleState& b) {
    const auto n1 = a.grid().size();
    const auto n2 = b.grid().size();
    CVector amps(n1 * n2);
    const auto pa = a.amplitudes();
    const auto pb = b.amplitudes();
    for (std::size_t i = 0; i < n1; ++i)
        for (std::size_t j = 0; j < n2; ++j) amps[i * n2 + j] = pa[i] * pb[j];
    return TwoParticleState(a.grid(), b.grid(), std::move(amps));
}

CVector momentum_amplitudes(const OneParticleState& state) {
    const auto& g = state.grid();
    const auto n = g.size();
    const auto twist = dft_twist(g);
    CVector out(state.amplitudes().begin(), state.amplitudes().end());
    for (std::size_t j = 0; j < n; ++j) out[j] *= twist[j];
    fft::plan(n)->forward(out.data());
    const double x0 = g.x(0);
    const double scale = 1.0 / std::sqrt(double(n));
    for (std::size_t k = 0; k < n; ++k) out[k] *= std::polar(scale, -g.wavenumber(k) * x0);
    return out;
}

Moments moments(const OneParticleState& state) {
    const auto& g = state.grid();
    Moments m{0, 0, 0, 0};
    const auto psi = state.amplitudes();
    for (std::size_t j = 0; j < g.size(); ++j) {
        const double w = std::norm(psi[j]);
        m.mean_x += w * g.x(j);
        m.var_x += w * g.x(j) * g.x(j);
    }
    const auto phi = momentum_amplitudes(state);
    for (std::size_t k = 0; k < g.size(); ++k) {
        const double w = std::norm(phi[k]);
        m.mean_p += w * g.p(k);
        m.var_p += w * g.p(k) * g.p(k);
    }
    m.var_x -= m.mean_x * m.mean_x;
    m.var_p -= m.mean_p * m.mean_p;
    return m;
}

// ---------------------------------------------------------------------------
// one particle

OneParticleFloquet::OneParticleFloquet(const TorusGrid& grid, const RotorParams& params)
    : grid_(grid),
      plan_(fft::plan(grid.size())),
      free_(free_phases(grid, params.period)),
      kick_(kick_phases(grid, params.kick)),
      twist_(dft_twist(grid)) {
    const auto n = grid.size();
    pre_.resize(n);
    post_.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        pre_[j] = kick_[j] * twist_[j];
        post_[j] = std::conj(twist_[j]) / double(n);
    }
}

void OneParticleFloquet::apply(std::span<cplx> psi) const {
    if (psi.size() != grid_.size()) throw ContractViolation("state does not match Floquet grid");
    const auto n = psi.size();
    for (std::size_t j = 0; j < n; ++j) psi[j] *= pre_[j];
    plan_->forward(psi.data());
    for (std::size_t k = 0; k < n; ++k) psi[k] *= free_[k];
    plan_->backward(psi.data());
    for (std::size_t j = 0; j < n; ++j) psi[j] *= post_[j];
}

void OneParticleFloquet::apply_inverse(std::span<cplx> psi) const {
    if (psi.size() != grid_.size()) throw ContractViolation("state does not match Floquet grid");
    const auto n = psi.size();
    for (std::size_t j = 0; j < n; ++j) psi[j] *= twist_[j];
    plan_->forward(psi.data());
    for (std::size_t k = 0; k < n; ++k) psi[k] *= std::conj(free_[k]);
    plan_->backward(psi.data());
    for (std::size_t j = 0; j < n; ++j) psi[j] *= post_[j] * std::conj(kick_[j]);
}

OneParticleState floquet_step_one(const OneParticleState& state, const RotorParams& params) {
    OneParticleState out = state;
    OneParticleFloquet(state.grid(), params).apply(out.amplitudes());
    if (std::abs(out.norm() - state.norm()) > 1e-9)
        throw InvalidStateError("norm drift above 1e-9 in one-particle step");
    return out;
}

// ---------------------------------------------------------------------------
// two particles

cplx interaction_phase(double x1, double x2, const CouplingParams& c) {
    return std::polar(1.0, -c.strength * std::sin(x1 - x2 - c.phase_offset));
}

TwoParticleFloquet::TwoParticleFloquet(const TorusGrid& grid1, const TorusGrid& grid2,
                                       const RotorParams& p1, const RotorParams& p2,
                                       const CouplingParams& coupling)
    : grid1_(grid1),
      grid2_(grid2),
      coupling_(coupling),
      plan_(fft::plan(grid1.size(), grid2.size())),
      row_twist_(dft_twist(grid1)),
      col_twist_(dft_twist(grid2)),
      row_free_(free_phases(grid1, p1.period)),
      col_free_(free_phases(grid2, p2.period)) {
    const auto k1 = kick_phases(grid1, p1.kick);
    const auto k2 = kick_phases(grid2, p2.kick);
    row_phase_.resize(grid1.size());
    col_phase_.resize(grid2.size());
    for (std::size_t i = 0; i < grid1.size(); ++i) row_phase_[i] = k1[i] * row_twist_[i];
    for (std::size_t j = 0; j < grid2.size(); ++j) col_phase_[j] = k2[j] * col_twist_[j];

    // Equal sizes: x1_i - x2_j depends on (i - j) mod N only.
    circulant_ = grid1.size() == grid2.size();
    if (circulant_) {
        const auto n = grid1.size();
        coupling_table_.resize(n);
        const double shift = (grid1.x_offset() - grid2.x_offset()) * kTwoPi / double(n);
        for (std::size_t d = 0; d < n; ++d)
            coupling_table_[d] = interaction_phase(kTwoPi * double(d) / double(n) + shift, 0.0, coupling_);
    }
}

cplx TwoParticleFloquet::coupling_phase(std::size_t i, std::size_t j) const {
    if (circulant_) {
        const auto n = grid1_.size();
        return coupling_table_[(i + n - j) % n];
    }
    return interaction_phase(grid1_.x(i), grid2_.x(j), coupling_);
}

void TwoParticleFloquet::multiply_position_phases(std::span<cplx> amps, bool conjugate) const {
    const auto n1 = grid1_.size();
    const auto n2 = grid2_.size();
    for (std::size_t i = 0; i < n1; ++i) {
        cplx* row = amps.data() + i * n2;
        const cplx r = row_phase_[i];
        if (circulant_) {
            // coupling_table_[(i - j) mod n]: split the j loop at the wrap point
            for (std::size_t j = 0; j <= i; ++j) {
                const cplx f = r * col_phase_[j] * coupling_table_[i - j];
                row[j] *= conjugate ? std::conj(f) : f;
            }
            for (std::size_t j = i + 1; j < n2; ++j) {
                const cplx f = r * col_phase_[j] * coupling_table_[i + n1 - j];
                row[j] *= conjugate ? std::conj(f) : f;
            }
        } else {
            for (std::size_t j = 0; j < n2; ++j) {
                const cplx f = r * col_phase_[j] * coupling_phase(i, j);
                row[j] *= conjugate ? std::conj(f) : f;
            }
        }
    }
}

void TwoParticleFloquet::apply(std::span<cplx> amps) const {
    const auto n1 = grid1_.size();
    const auto n2 = grid2_.size();
    if (amps.size() != n1 * n2) throw ContractViolation("state does not match two-particle Floquet grids");
    multiply_position_phases(amps, false);
    plan_->forward(amps.data());
    for (std::size_t k = 0; k < n1; ++k) {
        cplx* row = amps.data() + k * n2;
        const cplx a = row_free_[k];
        for (std::size_t l = 0; l < n2; ++l) row[l] *= a * col_free_[l];
    }
    plan_->backward(amps.data());
    const double inv = 1.0 / double(n1 * n2);
    for (std::size_t i = 0; i < n1; ++i) {
        cplx* row = amps.data() + i * n2;
        const cplx a = std::conj(row_twist_[i]) * inv;
        for (std::size_t j = 0; j < n2; ++j) row[j] *= a * std::conj(col_twist_[j]);
    }
}

void TwoParticleFloquet::apply_inverse(std::span<cplx> amps) const {
    const auto n1 = grid1_.size();
    const auto n2 = grid2_.size();
    if (amps.size() != n1 * n2) throw ContractViolation("state does not match two-particle Floquet grids");
    for (std::size_t i = 0; i < n1; ++i) {
        cplx* row = amps.data() + i * n2;
        for (std::size_t j = 0; j < n2; ++j) row[j] *= row_twist_[i] * col_twist_[j];
    }
    plan_->forward(amps.data());
    for (std::size_t k = 0; k < n1; ++k) {
        cplx* row = amps.data() + k * n2;
        const cplx a = std::conj(row_free_[k]);
        for (std::size_t l = 0; l < n2; ++l) row[l] *= a * std::conj(col_free_[l]);
    }
    plan_->backward(amps.data());
    const double inv = 1.0 / double(n1 * n2);
    for (auto& a : amps) a *= inv;
    // conj(kick * coupling * twist) also removes the twist
    multiply_position_phases(amps, true);
}

void TwoParticleFloquet::apply(TwoParticleState& state) const {
    if (!(state.grid1() == grid1_ && state.grid2() == grid2_))
        throw ContractViolation("state grids do not match the Floquet operator");
    apply(state.amplitudes());
}

TwoParticleState floquet_step_two(const TwoParticleState& state, const RotorParams& p1,
                                  const RotorParams& p2, const CouplingParams& c) {
    TwoParticleState out = state;
    TwoParticleFloquet(state.grid1(), state.grid2(), p1, p2, c).apply(out);
    if (std::abs(out.norm() - state.norm()) > 1e-9)
        throw InvalidStateError("norm drift above 1e-9 in two-particle step");
    return out;
}

// ---------------------------------------------------------------------------
// dense oracles

Eigen::MatrixXcd momentum_transform_matrix(const TorusGrid& grid) {
    const auto n = Eigen::Index(grid.size());
    Eigen::MatrixXcd phi(n, n);
    const double scale = 1.0 / std::sqrt(double(n));
    for (Eigen::Index k = 0; k < n; ++k)
        for (Eigen::Index j = 0; j < n; ++j)
            phi(k, j) = std::polar(scale, -grid.wavenumber(std::size_t(k)) * grid.x(std::size_t(j)));
    return phi;
}

Eigen::MatrixXcd dense_floquet_oracle(const TorusGrid& grid, const RotorParams& params) {
    if (grid.size() > kMaxOracleOne) throw ContractViolation("dense oracle limited to N <= 64");
    const auto n = Eigen::Index(grid.size());
    const Eigen::MatrixXcd phi = momentum_transform_matrix(grid);
    Eigen::VectorXcd kick(n), free(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        kick(j) = std::exp(-kI * params.kick * std::cos(grid.x(std::size_t(j))) / grid.hbar());
        const double m = grid.wavenumber(std::size_t(j));
        free(j) = std::exp(-kI * 0.5 * grid.hbar() * m * m * params.period);
    }
    return phi.adjoint() * free.asDiagonal() * phi * kick.asDiagonal();
}

Eigen::MatrixXcd dense_floquet_oracle(const TorusGrid& grid1, const TorusGrid& grid2,
                                      const RotorParams& p1, const RotorParams& p2,
                                      const CouplingParams& c) {
    const auto n1 = Eigen::Index(grid1.size());
    const auto n2 = Eigen::Index(grid2.size());
    if (std::size_t(n1 * n2) > kMaxOracleTwo) throw ContractViolation("dense oracle limited to N1*N2 <= 1024");
    const Eigen::MatrixXcd phi1 = momentum_transform_matrix(grid1);
    const Eigen::MatrixXcd phi2 = momentum_transform_matrix(grid2);

    // Kronecker product, joint index i * n2 + j
    const Eigen::Index dim = n1 * n2;
    Eigen::MatrixXcd phi(dim, dim);
    for (Eigen::Index k = 0; k < n1; ++k)
        for (Eigen::Index l = 0; l < n2; ++l)
            for (Eigen::Index i = 0; i < n1; ++i)
                for (Eigen::Index j = 0; j < n2; ++j) phi(k * n2 + l, i * n2 + j) = phi1(k, i) * phi2(l, j);

    Eigen::VectorXcd kick(dim), free(dim);
    for (Eigen::Index i = 0; i < n1; ++i) {
        for (Eigen::Index j = 0; j < n2; ++j) {
            const double x1 = grid1.x(std::size_t(i));
            const double x2 = grid2.x(std::size_t(j));
            const double v = (p1.kick * std::cos(x1)) / grid1.hbar() + (p2.kick * std::cos(x2)) / grid2.hbar() +
                             c.strength * std::sin(x1 - x2 - c.phase_offset);
            kick(i * n2 + j) = std::exp(-kI * v);
            const double m1 = grid1.wavenumber(std::size_t(i));
            const double m2 = grid2.wavenumber(std::size_t(j));
            free(i * n2 + j) = std::exp(-kI * 0.5 * (grid1.hbar() * m1 * m1 * p1.period +
                                                    grid2.hbar() * m2 * m2 * p2.period));
        }
    }
    return phi.adjoint() * free.asDiagonal() * phi * kick.asDiagonal();
}

}  // namespace qkr

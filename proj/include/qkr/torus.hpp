#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <span>

#include <Eigen/Dense>

#include "qkr/fft.hpp"

namespace qkr {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

// Discretization of the torus x, p in (-pi, pi] with n sites and
// hbar_eff = 2 pi / n. Offsets are in units of one site: x_offset shifts the
// position lattice, p_offset is the Bloch phase that shifts the momentum
// ladder (0.5 gives half-integer wavenumbers).
class TorusGrid {
public:
    TorusGrid(std::size_t n_sites, double x_offset = 0.0, double p_offset = 0.5);

    std::size_t size() const noexcept { return n_; }
    double hbar() const noexcept { return hbar_; }
    double x_offset() const noexcept { return x_offset_; }
    double p_offset() const noexcept { return p_offset_; }

    double x(std::size_t j) const noexcept { return -kPi + kTwoPi * (double(j) + x_offset_) / double(n_); }
    double p(std::size_t k) const noexcept { return -kPi + kTwoPi * (double(k) + p_offset_) / double(n_); }
    // p_k / hbar_eff, the (possibly half-integer) wavenumber of momentum state k.
    double wavenumber(std::size_t k) const noexcept { return double(k) + p_offset_ - 0.5 * double(n_); }

    bool operator==(const TorusGrid&) const = default;

private:
    std::size_t n_;
    double hbar_;
    double x_offset_;
    double p_offset_;
};

struct RotorParams {
    double kick = 0.0;    // K
    double period = 1.0;  // T
};

struct CouplingParams {
    double strength = 0.0;  // epsilon
    double phase_offset = 0.33;
};

struct GaussianSpec {
    double x0 = 0.0;
    double p0 = 0.0;
    double sigma = 0.0;
};

// Coherent-state width that makes position and momentum spreads equal.
inline double symmetric_sigma(const TorusGrid& grid) { return std::sqrt(grid.hbar()); }

class OneParticleState {
public:
    OneParticleState(TorusGrid grid, CVector amplitudes);

    const TorusGrid& grid() const noexcept { return grid_; }
    std::span<const cplx> amplitudes() const noexcept { return amps_; }
    std::span<cplx> amplitudes() noexcept { return amps_; }
    double norm() const;

private:
    TorusGrid grid_;
    CVector amps_;
};

// Joint position amplitudes, row-major: index i * N2 + j for x1_i, x2_j.
class TwoParticleState {
public:
    TwoParticleState(TorusGrid grid1, TorusGrid grid2, CVector amplitudes);

    const TorusGrid& grid1() const noexcept { return grid1_; }
    const TorusGrid& grid2() const noexcept { return grid2_; }
    std::size_t rows() const noexcept { return grid1_.size(); }
    std::size_t cols() const noexcept { return grid2_.size(); }
    std::span<const cplx> amplitudes() const noexcept { return amps_; }
    std::span<cplx> amplitudes() noexcept { return amps_; }
    double norm() const;

    using MatrixMap = Eigen::Map<const Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
    MatrixMap matrix() const { return MatrixMap(amps_.data(), Eigen::Index(rows()), Eigen::Index(cols())); }

private:
    TorusGrid grid1_;
    TorusGrid grid2_;
    CVector amps_;
};

// Unnormalized periodized Gaussian exp[i p0 d / hbar - d^2 / 2 sigma^2] at
// position x, summed over d = x - x0 + 2 pi w for w = -3..3.
cplx gaussian_amplitude(double x, const GaussianSpec& spec, double hbar);

// Periodized Gaussian wavepacket (winding numbers -3..3), unit norm.
OneParticleState make_gaussian(const TorusGrid& grid, const GaussianSpec& spec);
TwoParticleState product_state(const OneParticleState& a, const OneParticleState& b);

// Amplitudes <p_k|psi> with <x_j|p_k> = exp(i p_k x_j / hbar) / sqrt(N).
CVector momentum_amplitudes(const OneParticleState& state);

struct Moments {
    double mean_x, mean_p, var_x, var_p;
};
Moments moments(const OneParticleState& state);

// One kick period for a single rotor: kick, then free propagation.
class OneParticleFloquet {
public:
    OneParticleFloquet(const TorusGrid& grid, const RotorParams& params);
    void apply(std::span<cplx> psi) const;
    void apply_inverse(std::span<cplx> psi) const;
    const TorusGrid& grid() const noexcept { return grid_; }

private:
    TorusGrid grid_;
    std::shared_ptr<const fft::Plan> plan_;
    CVector pre_;       // kick phase times DFT twist
    CVector post_;      // inverse twist / N
    CVector free_;      // exp(-i hbar m^2 T / 2)
    CVector kick_;
    CVector twist_;
};

// One kick period for the coupled pair: both kicks and the coupling phase
// exp[-i eps sin(x1 - x2 - offset)] in the joint position basis, then free
// propagation of both rotors through a 2D transform.
class TwoParticleFloquet {
public:
    TwoParticleFloquet(const TorusGrid& grid1, const TorusGrid& grid2, const RotorParams& p1,
                       const RotorParams& p2, const CouplingParams& coupling);
    void apply(std::span<cplx> amps) const;
    void apply_inverse(std::span<cplx> amps) const;
    void apply(TwoParticleState& state) const;

    const TorusGrid& grid1() const noexcept { return grid1_; }
    const TorusGrid& grid2() const noexcept { return grid2_; }

private:
    // exp[-i eps sin(x1_i - x2_j - offset)]
    cplx coupling_phase(std::size_t i, std::size_t j) const;
    void multiply_position_phases(std::span<cplx> amps, bool conjugate) const;

    TorusGrid grid1_, grid2_;
    CouplingParams coupling_;
    std::shared_ptr<const fft::Plan> plan_;
    CVector row_phase_, col_phase_;    // kick * twist
    CVector row_twist_, col_twist_;
    CVector row_free_, col_free_;
    CVector coupling_table_;  // indexed by (i - j) mod N when both grids coincide
    bool circulant_ = false;
};

OneParticleState floquet_step_one(const OneParticleState& state, const RotorParams& params);
TwoParticleState floquet_step_two(const TwoParticleState& state, const RotorParams& p1,
                                  const RotorParams& p2, const CouplingParams& c);

// Exp[-i eps sin(x1 - x2 - offset)] on the joint lattice; exposed so the
// hbar-independence of the interaction phase can be checked directly.
cplx interaction_phase(double x1, double x2, const CouplingParams& c);

// Explicit unitary <p_k|x_j> (N x N).
Eigen::MatrixXcd momentum_transform_matrix(const TorusGrid& grid);

// Dense Floquet matrices built from explicit DFT matrices; small sizes only.
Eigen::MatrixXcd dense_floquet_oracle(const TorusGrid& grid, const RotorParams& params);
Eigen::MatrixXcd dense_floquet_oracle(const TorusGrid& grid1, const TorusGrid& grid2,
                                      const RotorParams& p1, const RotorParams& p2,
                                      const CouplingParams& c);

inline constexpr std::size_t kMaxOracleOne = 64;
inline constexpr std::size_t kMaxOracleTwo = 1024;

}  // namespace qkr

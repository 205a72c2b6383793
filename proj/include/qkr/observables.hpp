#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qkr/torus.hpp"

namespace qkr {

enum class Particle { First, Second };

struct ReducedDensity {
    TorusGrid grid;
    Eigen::MatrixXcd matrix;

    std::size_t dim() const noexcept { return grid.size(); }
};

// rho_1 = A A^dagger, rho_2 = A^T conj(A) for the amplitude matrix A.
ReducedDensity reduce(const TwoParticleState& state, Particle which);
ReducedDensity pure_density(const OneParticleState& state);

double purity(const ReducedDensity& rho);
// Purity of either reduced density, from the Gram matrix of the smaller
// dimension (cost min(N1,N2)^2 max(N1,N2)).
double purity(const TwoParticleState& state);

// Adds weight * rho_1(state) into the lower triangle of acc. Used to build
// ensemble-averaged reduced densities without forming N1 x N1 temporaries.
void accumulate_reduced_lower(Eigen::MatrixXcd& acc, const TwoParticleState& state, double weight);
// Tr[rho^2] from a Hermitian matrix whose lower triangle is filled.
double purity_from_lower(const Eigen::MatrixXcd& lower);

enum class DistributionKind { Wigner, Husimi, Classical };
std::string to_string(DistributionKind kind);

// Real grid over phase space, row-major values(ix, ip). Cell ix sits at
// x = x_min + ix * dx, cell ip at p = p_min + ip * dp.
struct PhaseSpaceDistribution {
    DistributionKind kind = DistributionKind::Classical;
    std::size_t rows = 0;  // x cells
    std::size_t cols = 0;  // p cells
    double x_min = 0.0, dx = 0.0, p_min = 0.0, dp = 0.0;
    std::vector<double> values;

    double& at(std::size_t ix, std::size_t ip) { return values[ix * cols + ip]; }
    double at(std::size_t ix, std::size_t ip) const { return values[ix * cols + ip]; }
    double x(std::size_t ix) const { return x_min + double(ix) * dx; }
    double p(std::size_t ip) const { return p_min + double(ip) * dp; }
    double sum() const;
    void normalize();
};

// Cell-centred R x R layout over the fundamental domain.
PhaseSpaceDistribution make_cell_grid(DistributionKind kind, std::size_t resolution);

// Discrete Wigner function on the 2N x 2N half-integer lattice. Row a sits at
// x = x_0 + a pi/N, column c at p = -pi + c pi/N. Normalized to sum 1; the
// even rows carry the position marginal, and every structure has a ghost
// copy shifted by pi in x (and/or p) with alternating sign.
PhaseSpaceDistribution wigner(const ReducedDensity& rho);
// Exact inverse of wigner().
Eigen::MatrixXcd wigner_inverse(const PhaseSpaceDistribution& w, const TorusGrid& grid);

// Husimi distribution <g(x0,p0)| rho |g(x0,p0)> on a cell-centred
// resolution x resolution grid, normalized to sum 1.
PhaseSpaceDistribution husimi(const ReducedDensity& rho, std::size_t resolution, double sigma);

// Std devs of the coherent-state Wigner kernel, i.e. the Gaussian that turns
// a Wigner (or Liouville) density into a Husimi-comparable one.
struct KernelWidths {
    double sx, sp;
};
KernelWidths coherent_kernel_widths(const TorusGrid& grid, double sigma);

// Total-variation distance 1/2 sum |q - cl| between two positive densities.
double correspondence_distance(const PhaseSpaceDistribution& q, const PhaseSpaceDistribution& cl);

struct PuritySeries {
    std::vector<int> times;
    std::vector<double> values;
    std::vector<double> stderr_;  // across initial states; zero for a single state
    std::size_t n1 = 0, n2 = 0;
    double k1 = 0.0, k2 = 0.0, eps = 0.0;
    std::uint64_t seed = 0;
    std::size_t n_initial_states = 1;
};

}  // namespace qkr

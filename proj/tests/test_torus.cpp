#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "qkr/errors.hpp"
#include "qkr/observables.hpp"
#include "qkr/torus.hpp"

using namespace qkr;

namespace {

CVector random_vector(std::size_t n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    CVector v(n);
    double norm = 0.0;
    for (auto& z : v) {
        z = {g(rng), g(rng)};
        norm += std::norm(z);
    }
    for (auto& z : v) z /= std::sqrt(norm);
    return v;
}

Eigen::VectorXcd as_eigen(const CVector& v) {
    Eigen::VectorXcd out(Eigen::Index(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out(Eigen::Index(i)) = v[i];
    return out;
}

double max_diff(const CVector& a, const Eigen::VectorXcd& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b(Eigen::Index(i))));
    return d;
}

std::vector<double> sorted_eigenphases(const Eigen::MatrixXcd& u) {
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(u);
    std::vector<double> ph;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) ph.push_back(std::arg(es.eigenvalues()(i)));
    std::sort(ph.begin(), ph.end());
    return ph;
}

}  // namespace

TEST_CASE("grid spacing and nodes") {
    const TorusGrid g(512);
    CHECK(g.hbar() * 512 == doctest::Approx(kTwoPi).epsilon(1e-15));
    CHECK(g.x(0) == doctest::Approx(-kPi));
    CHECK(g.p(0) == doctest::Approx(-kPi + kPi / 512.0));
    CHECK(g.wavenumber(0) == doctest::Approx(0.5 - 256.0));
    for (std::size_t j = 0; j < g.size(); ++j) {
        CHECK(g.x(j) > -kPi - 1e-12);
        CHECK(g.x(j) <= kPi);
    }
    CHECK_THROWS_AS(TorusGrid(15), ContractViolation);
    CHECK_THROWS_AS(TorusGrid(0), ContractViolation);
    CHECK_THROWS_AS(TorusGrid(16, 1.0), ContractViolation);
    CHECK_THROWS_AS(TorusGrid(16, 0.0, -0.1), ContractViolation);
}

TEST_CASE("gaussian wavepacket moments") {
    const TorusGrid g(512);
    const double sigma = symmetric_sigma(g);
    const auto psi = make_gaussian(g, {1.0, 2.0, sigma});
    CHECK(psi.norm() == doctest::Approx(1.0).epsilon(1e-12));
    const auto m = moments(psi);
    CHECK(m.mean_x == doctest::Approx(1.0).epsilon(0.01));
    CHECK(m.mean_p == doctest::Approx(2.0).epsilon(0.01));
    CHECK(m.var_x == doctest::Approx(sigma * sigma / 2.0).epsilon(0.01));
    CHECK(m.var_p == doctest::Approx(g.hbar() * g.hbar() / (2.0 * sigma * sigma)).epsilon(0.01));
}

TEST_CASE("centred gaussian is reflection symmetric") {
    const TorusGrid g(64, 0.0, 0.0);
    const auto psi = make_gaussian(g, {0.0, 0.0, 0.4});
    const auto a = psi.amplitudes();
    for (std::size_t j = 1; j < 64; ++j) CHECK(std::abs(a[j] - a[64 - j]) < 1e-12);
    CHECK(std::abs(moments(psi).mean_p) < 1e-12);
}

TEST_CASE("gaussian preconditions") {
    const TorusGrid g(64);
    CHECK_THROWS_AS(make_gaussian(g, {0.0, 0.0, 0.0}), ContractViolation);
    CHECK_THROWS_AS(make_gaussian(g, {4.0, 0.0, 0.3}), ContractViolation);
    CHECK_THROWS_AS(make_gaussian(g, {0.05, 0.0, 1e-4}), InvalidStateError);
    for (double s : {0.05, 0.3, 1.0, 3.0}) CHECK(make_gaussian(g, {0.3, -1.0, s}).norm() == doctest::Approx(1.0));
}

TEST_CASE("one-particle step matches the dense oracle") {
    const TorusGrid g(32);
    const RotorParams params{5.09};
    const auto u = dense_floquet_oracle(g, params);
    CHECK((u.adjoint() * u - Eigen::MatrixXcd::Identity(32, 32)).cwiseAbs().maxCoeff() < 1e-10);

    auto psi = random_vector(32, 1);
    Eigen::VectorXcd ref = as_eigen(psi);
    const OneParticleFloquet floquet(g, params);
    for (int t = 0; t < 10; ++t) {
        floquet.apply(psi);
        ref = u * ref;
        CHECK(max_diff(psi, ref) < 1e-10);
    }
}

TEST_CASE("oracle unitarity at K=10 and offset spectra") {
    const TorusGrid g(32);
    const auto u = dense_floquet_oracle(g, {10.0});
    CHECK((u.adjoint() * u - Eigen::MatrixXcd::Identity(32, 32)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK_THROWS_AS(dense_floquet_oracle(TorusGrid(66), {1.0}), ContractViolation);

    // Free rotor: diagonal in the momentum basis.
    const TorusGrid g16(16);
    const auto phi = momentum_transform_matrix(g16);
    const Eigen::MatrixXcd free = phi * dense_floquet_oracle(g16, {0.0}) * phi.adjoint();
    double off = 0.0;
    for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 16; ++j)
            if (i != j) off = std::max(off, std::abs(free(i, j)));
    CHECK(off < 1e-12);

    // Shifting the position lattice by half a site only relabels the free
    // rotor's momentum eigenbasis.
    const auto a = sorted_eigenphases(dense_floquet_oracle(TorusGrid(16, 0.0), {0.0}));
    const auto b = sorted_eigenphases(dense_floquet_oracle(TorusGrid(16, 0.5), {0.0}));
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-8);
}

TEST_CASE("free rotor conserves momentum distribution") {
    const TorusGrid g(64);
    CVector v(64);
    for (std::size_t j = 0; j < 64; ++j) v[j] = std::polar(1.0 / 8.0, g.wavenumber(5) * g.x(j));
    OneParticleState psi(g, v);
    const auto before = momentum_amplitudes(psi);
    const OneParticleFloquet floquet(g, {0.0});
    for (int t = 0; t < 7; ++t) floquet.apply(psi.amplitudes());
    const auto after = momentum_amplitudes(psi);
    for (std::size_t k = 0; k < 64; ++k) CHECK(std::abs(std::abs(after[k]) - std::abs(before[k])) < 1e-12);
    CHECK(std::abs(before[5]) == doctest::Approx(1.0));
}

TEST_CASE("step then inverse recovers the state") {
    const TorusGrid g(128);
    auto psi = random_vector(128, 3);
    const auto orig = psi;
    const OneParticleFloquet f(g, {7.3});
    f.apply(psi);
    f.apply_inverse(psi);
    for (std::size_t i = 0; i < psi.size(); ++i) CHECK(std::abs(psi[i] - orig[i]) < 1e-10);

    const TorusGrid g2(64);
    auto amps = random_vector(128 * 64, 4);
    const auto orig2 = amps;
    const TwoParticleFloquet f2(g, g2, {5.09}, {3.0}, {4.0});
    for (int t = 0; t < 3; ++t) f2.apply(amps);
    for (int t = 0; t < 3; ++t) f2.apply_inverse(amps);
    for (std::size_t i = 0; i < amps.size(); ++i) CHECK(std::abs(amps[i] - orig2[i]) < 1e-10);
}

TEST_CASE("two-particle step matches the dense oracle") {
    const TorusGrid g(16);
    const RotorParams p{5.09};
    const CouplingParams c{4.0};
    const auto u = dense_floquet_oracle(g, g, p, p, c);
    auto amps = random_vector(256, 5);
    Eigen::VectorXcd ref = as_eigen(amps);
    const TwoParticleFloquet floquet(g, g, p, p, c);
    for (int t = 0; t < 10; ++t) {
        floquet.apply(amps);
        ref = u * ref;
        CHECK(max_diff(amps, ref) < 1e-10);
    }
}

TEST_CASE("two-particle oracle with unequal grids and offsets") {
    const TorusGrid g1(16, 0.25, 0.5), g2(8, 0.0, 0.0);
    const RotorParams p1{3.0}, p2{6.0};
    const CouplingParams c{2.0, 0.1};
    const auto u = dense_floquet_oracle(g1, g2, p1, p2, c);
    auto amps = random_vector(128, 6);
    Eigen::VectorXcd ref = as_eigen(amps);
    const TwoParticleFloquet floquet(g1, g2, p1, p2, c);
    for (int t = 0; t < 5; ++t) {
        floquet.apply(amps);
        ref = u * ref;
    }
    CHECK(max_diff(amps, ref) < 1e-10);
    CHECK_THROWS_AS(dense_floquet_oracle(TorusGrid(64), TorusGrid(32), p1, p2, c), ContractViolation);
}

TEST_CASE("uncoupled step factorizes") {
    const TorusGrid g1(64), g2(32);
    const RotorParams p1{5.09}, p2{10.0};
    auto a = make_gaussian(g1, {1.0, 2.0, symmetric_sigma(g1)});
    auto b = make_gaussian(g2, {-0.5, 0.7, symmetric_sigma(g2)});
    auto joint = product_state(a, b);
    const OneParticleFloquet fa(g1, p1), fb(g2, p2);
    const TwoParticleFloquet f(g1, g2, p1, p2, {0.0});
    for (int t = 0; t < 20; ++t) {
        fa.apply(a.amplitudes());
        fb.apply(b.amplitudes());
        f.apply(joint);
        CHECK(std::abs(purity(joint) - 1.0) < 1e-12);
    }
    const auto ref = product_state(a, b);
    double d = 0.0;
    for (std::size_t i = 0; i < 64 * 32; ++i) d = std::max(d, std::abs(joint.amplitudes()[i] - ref.amplitudes()[i]));
    CHECK(d < 1e-12);
}

TEST_CASE("norm is preserved over 50 coupled steps") {
    const TorusGrid g(128);
    auto s = product_state(make_gaussian(g, {0.3, 1.1, symmetric_sigma(g)}), make_gaussian(g, {-2.0, 0.4, 0.2}));
    for (int t = 0; t < 50; ++t) {
        s = floquet_step_two(s, {10.0}, {6.0}, {4.0});
        CHECK(std::abs(s.norm() - 1.0) < 1e-12);
    }
}

TEST_CASE("state and step grid mismatch is a contract violation") {
    const TorusGrid g(16), h(32);
    auto s = product_state(make_gaussian(g, {0.0, 0.0, 0.5}), make_gaussian(g, {0.0, 0.0, 0.5}));
    const TwoParticleFloquet f(h, h, {1.0}, {1.0}, {1.0});
    CHECK_THROWS_AS(f.apply(s), ContractViolation);
}

TEST_CASE("coupling phase does not depend on hbar") {
    const CouplingParams c{4.0};
    const TorusGrid coarse(64), fine(128);
    for (std::size_t i = 0; i < 64; i += 7)
        for (std::size_t j = 0; j < 64; j += 5) {
            const auto a = interaction_phase(coarse.x(i), coarse.x(j), c);
            const auto b = interaction_phase(fine.x(2 * i), fine.x(2 * j), c);
            CHECK(std::abs(a - b) < 1e-15);
            CHECK(std::abs(a - std::polar(1.0, -4.0 * std::sin(coarse.x(i) - coarse.x(j) - 0.33))) < 1e-15);
        }
}

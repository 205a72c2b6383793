#include <cmath>

#include "doctest.h"
#include "qkr/classical.hpp"
#include "qkr/errors.hpp"

using namespace qkr;

TEST_CASE("standard map step") {
    auto a = standard_map_step({0.0, 0.5}, 7.0);
    CHECK(a.x == doctest::Approx(0.5));
    CHECK(a.p == doctest::Approx(0.5));
    auto b = standard_map_step({kPi / 2, 0.0}, 2.0);
    CHECK(b.p == doctest::Approx(2.0));
    CHECK(b.x == doctest::Approx(kPi / 2 + 2.0 - kTwoPi));
    CHECK(b.x == doctest::Approx(-2.7124).epsilon(1e-4));

    PhasePoint pt{0.3, 1.2};
    for (int t = 0; t < 100; ++t) {
        pt = standard_map_step(pt, 0.0);
        CHECK(pt.p == doctest::Approx(1.2));
    }
    CHECK(wrap_angle(kPi) == doctest::Approx(kPi));
    CHECK(wrap_angle(-kPi) == doctest::Approx(kPi));
    CHECK(wrap_angle(7.0) == doctest::Approx(7.0 - kTwoPi));
}

TEST_CASE("jacobian is area preserving") {
    Rng rng(3);
    std::uniform_real_distribution<double> u(-kPi, kPi);
    for (int i = 0; i < 200; ++i) {
        const auto j = standard_map_jacobian({u(rng), u(rng)}, 0.1 * i);
        CHECK(j[0] * j[3] - j[1] * j[2] == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("tangent growth") {
    TangentVector v{0.0, 1.0};
    PhasePoint pt{0.1, 0.2};
    for (int t = 1; t <= 100; ++t) {
        std::tie(pt, v) = tangent_step(pt, v, 0.0);
        CHECK(std::hypot(v.dx, v.dp) <= 1.0 + t + 1e-12);
    }

    Rng rng(11);
    std::uniform_real_distribution<double> u(-kPi, kPi);
    double acc = 0.0;
    for (int i = 0; i < 40; ++i) acc += finite_time_exponent({u(rng), u(rng)}, 10.0, 50);
    CHECK(acc / 40 == doctest::Approx(std::log(5.0)).epsilon(0.1));
}

TEST_CASE("lyapunov exponents") {
    const auto k10 = lyapunov_exponent(10.0, 400, 200, 1);
    CHECK(std::abs(k10.lambda - 1.61) < 0.1);
    CHECK(k10.n_samples == 400);
    CHECK(k10.std_error > 0.0);
    const auto two = lyapunov_two_trajectory(10.0, 400, 200, 1);
    CHECK(std::abs(two.lambda - k10.lambda) < 0.05);

    const auto k5 = lyapunov_exponent(5.09, 400, 200, 2);
    CHECK(std::abs(k5.lambda - 0.93) < 0.15);
    CHECK(k5.n_rejected > 0);

    CHECK(lyapunov_exponent(0.0, 100, 200, 3).lambda < 0.05);
    // Same seed, same estimate.
    CHECK(lyapunov_exponent(10.0, 50, 100, 9).lambda == lyapunov_exponent(10.0, 50, 100, 9).lambda);
}

TEST_CASE("chaotic sea sampling") {
    Rng rng(5);
    CHECK_THROWS_AS(sample_chaotic_point(0.5, rng), NoChaoticSeaError);
    for (int i = 0; i < 20; ++i) CHECK(in_chaotic_sea(sample_chaotic_point(5.09, rng), 5.09));
    CHECK(has_islands(3.09));
    CHECK_FALSE(has_islands(10.0));
    CHECK_FALSE(has_islands(0.5));
    // The elliptic fixed point (pi, 0) is regular for K = 3; (0, 0) is hyperbolic.
    CHECK_FALSE(in_chaotic_sea({kPi, 0.0}, 3.0));
    CHECK(in_chaotic_sea({0.0, 0.0}, 3.0));
}

TEST_CASE("gaussian ensemble statistics") {
    const TorusGrid g(512);
    const double sigma = symmetric_sigma(g);
    const std::size_t m = 200000;
    const auto ens = sample_gaussian_ensemble({1.0, 2.0, sigma}, g.hbar(), m, 17);
    double mx = 0.0, mp = 0.0;
    for (const auto& pt : ens.points) {
        mx += pt.x;
        mp += pt.p;
    }
    mx /= double(m);
    mp /= double(m);
    CHECK(std::abs(mx - 1.0) < 5.0 / std::sqrt(double(m)));
    CHECK(std::abs(mp - 2.0) < 5.0 / std::sqrt(double(m)));
    double vx = 0.0, vp = 0.0;
    for (const auto& pt : ens.points) {
        vx += (pt.x - mx) * (pt.x - mx);
        vp += (pt.p - mp) * (pt.p - mp);
    }
    const double expected = std::sqrt(g.hbar() / 2.0);
    CHECK(std::sqrt(vx / double(m)) == doctest::Approx(expected).epsilon(0.01));
    CHECK(std::sqrt(vp / double(m)) == doctest::Approx(expected).epsilon(0.01));
}

TEST_CASE("initial ensemble matches the initial Husimi distribution") {
    const TorusGrid g(512);
    const double sigma = symmetric_sigma(g);
    const GaussianSpec spec{1.0, 2.0, sigma};
    const auto ens = sample_gaussian_ensemble(spec, g.hbar(), 1000000, 23);
    const auto cl = smoothed_density(ens, 128, coherent_kernel_widths(g, sigma));
    const auto q = husimi(pure_density(make_gaussian(g, spec)), 128, sigma);
    CHECK(correspondence_distance(q, cl) < 0.05);
}

TEST_CASE("ensemble evolution") {
    const auto ens = sample_gaussian_ensemble({0.0, 0.5, 0.3}, 0.05, 1000, 2);
    const auto same = evolve_ensemble(ens, 5.0, 0);
    for (std::size_t i = 0; i < ens.points.size(); ++i) {
        CHECK(same.points[i].x == ens.points[i].x);
        CHECK(same.points[i].p == ens.points[i].p);
    }
    const auto sheared = evolve_ensemble(ens, 0.0, 3);
    for (std::size_t i = 0; i < ens.points.size(); ++i) {
        CHECK(sheared.points[i].p == doctest::Approx(ens.points[i].p));
        CHECK(std::abs(wrap_angle(sheared.points[i].x - ens.points[i].x - 3.0 * ens.points[i].p)) < 1e-12);
    }
}

TEST_CASE("histogram") {
    ClassicalEnsemble one{{{0.1, -0.2}}};
    const auto h1 = histogram(one, 10, 12);
    double mx = 0.0;
    for (double v : h1.values) mx = std::max(mx, v);
    CHECK(mx == 1.0);
    CHECK(h1.sum() == 1.0);

    Rng rng(8);
    std::uniform_real_distribution<double> u(-kPi, kPi);
    ClassicalEnsemble flat;
    const std::size_t m = 400000;
    for (std::size_t i = 0; i < m; ++i) flat.points.push_back({u(rng), u(rng)});
    const auto h = histogram(flat, 20, 20);
    const double p = 1.0 / 400.0;
    const double tol = 3.0 * std::sqrt(p * (1 - p) / double(m)) * 1.5;
    for (double v : h.values) CHECK(std::abs(v - p) < tol);
    CHECK(h.sum() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK_THROWS_AS(histogram(ClassicalEnsemble{}, 10, 10), ContractViolation);
}

TEST_CASE("smoothed density is normalized and centred") {
    const auto ens = sample_gaussian_ensemble({1.0, 2.0, 0.2}, 0.04, 20000, 4);
    const auto d = smoothed_density(ens, 64, {0.1, 0.1});
    CHECK(d.sum() == doctest::Approx(1.0).epsilon(1e-12));
    double mx = 0.0, mp = 0.0;
    for (std::size_t i = 0; i < d.rows; ++i)
        for (std::size_t j = 0; j < d.cols; ++j) {
            mx += d.at(i, j) * d.x(i);
            mp += d.at(i, j) * d.p(j);
        }
    CHECK(mx == doctest::Approx(1.0).epsilon(0.02));
    CHECK(mp == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("packet test sees islands the centre misses") {
    const TorusGrid g(512);
    const double w = std::sqrt(g.hbar() / 2.0);
    // About a fifth of this packet sits in a small K = 12 island.
    const PhasePoint c{1.642, -2.727};
    CHECK(in_chaotic_sea(c, 12.0));
    CHECK_FALSE(packet_in_chaotic_sea(c, w, w, 12.0));
    CHECK(packet_in_chaotic_sea({0.067, -0.990}, w, w, 12.0));
    Rng rng(2);
    for (int i = 0; i < 10; ++i) CHECK(packet_in_chaotic_sea(sample_chaotic_packet(12.0, w, w, rng), w, w, 12.0));
    CHECK_THROWS_AS(sample_chaotic_packet(0.5, w, w, rng), NoChaoticSeaError);
}

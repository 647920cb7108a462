#include "doctest.h"
#include "fixtures.hpp"

#include "lccnet/coupling.hpp"
#include "lccnet/samplers.hpp"
#include "lccnet/stats.hpp"

#include <cmath>
#include <numbers>

using namespace lccnet;

namespace {

struct Setup {
    NetworkConfig cfg;
    Dataset data;
};

Setup small_setup(int K, int d, Eigen::Index N, std::uint64_t seed) {
    Rng rng(seed);
    Setup s{NetworkConfig::make(K, d, 1.0, Activation::tanh_scaled()), {}};
    s.data = fixtures::teacher_data(s.cfg, fixtures::random_ball_point(K, d, rng), N, 0.2, rng);
    return s;
}

}  // namespace

TEST_CASE("delta and rho formulas") {
    CHECK(compute_delta(1, 1.0, 1.0, 2.0, 1.0) == doctest::Approx(1.0 / 300.0));
    CHECK(compute_delta(1, 1.0, 100.0, 10.0, 10.0) == doctest::Approx(std::sqrt(2 * std::numbers::pi / 11) / 1e4));
    CHECK(std::sqrt(2 * std::numbers::pi / 11) == doctest::Approx(0.7557768).epsilon(1e-7));
    CHECK_THROWS(compute_delta(0, 1, 1, 1, 1));

    auto s = small_setup(2, 3, 8, 1);
    CHECK_THROWS(compute_C_n(s.data, 0, 1.0, 1.0));
    const double C = s.data.y.head(5).cwiseAbs().maxCoeff() + 1.0;
    CHECK(compute_C_n(s.data, 5, 1.0, 1.0) == doctest::Approx(C));
    const auto p = make_coupling_params(s.cfg, s.data, 5, 2.0);
    CHECK(p.rho == doctest::Approx(std::sqrt(1.5) * 2.0 * C / 2.0));
    CHECK(coupling_rho_tight(s.cfg, 2.0, C) == doctest::Approx(C));
    CHECK(p.delta == doctest::Approx(1.0 / 300.0));
    CHECK(p.b_threshold == doctest::Approx(5.0 + std::sqrt(2 * std::log(12.0 * 300.0)) * std::sqrt(5.0 / p.rho)));
}

TEST_CASE("forward draws land in B and center on Xw") {
    auto s = small_setup(2, 3, 6, 2);
    const auto p = make_coupling_params(s.cfg, s.data, 6, 1.0);
    Rng rng(3);
    const WeightMatrix w = fixtures::random_ball_point(2, 3, rng);
    Xi mean = Xi::Zero(6, 2);
    const int n = 4000;
    for (int t = 0; t < n; ++t) {
        const auto draw = sample_xi_given_w(w, s.data.X, p, rng);
        REQUIRE(in_B(draw.xi, s.data.X, p));
        mean += draw.xi;
    }
    mean /= n;
    CHECK((mean - coupling_mean(w, s.data.X, 6)).cwiseAbs().maxCoeff() < 4.0 / std::sqrt(p.rho * n));

    CouplingParams tight = p;
    tight.b_threshold = 1e-9;
    CHECK_THROWS_AS(sample_xi_given_w(w, s.data.X, tight, rng, 10), std::runtime_error);
}

TEST_CASE("reverse score and Hessian agree with finite differences") {
    auto s = small_setup(2, 3, 7, 4);
    const auto p = make_coupling_params(s.cfg, s.data, 7, 1.5);
    Rng rng(5);
    const WeightMatrix w0 = fixtures::random_ball_point(2, 3, rng);
    const Xi xi = sample_xi_given_w(w0, s.data.X, p, rng).xi;
    const WeightMatrix w = fixtures::random_ball_point(2, 3, rng, 0.7);
    const Eigen::VectorXd g = reverse_score(s.cfg, w, xi, s.data, p);
    const double h = 1e-6;
    for (Eigen::Index j = 0; j < g.size(); ++j) {
        Eigen::VectorXd v = flatten(w);
        v[j] += h;
        const double up = reverse_logdensity_unnorm(s.cfg, unflatten(v, 2, 3), xi, s.data, p);
        v[j] -= 2 * h;
        const double dn = reverse_logdensity_unnorm(s.cfg, unflatten(v, 2, 3), xi, s.data, p);
        CHECK(g[j] == doctest::Approx((up - dn) / (2 * h)).epsilon(1e-6).scale(1.0));
    }
    Eigen::VectorXd u(6);
    for (auto& e : u) e = rng.normal();
    u.normalize();
    const double fd = (reverse_score(s.cfg, unflatten(flatten(w) + h * u, 2, 3), xi, s.data, p) -
                       reverse_score(s.cfg, unflatten(flatten(w) - h * u, 2, 3), xi, s.data, p))
                          .dot(u) / (2 * h);
    CHECK(reverse_hessian_quadform(s.cfg, w, xi, s.data, p, u) == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
}

TEST_CASE("reverse conditional is log-concave at the default rho") {
    auto s = small_setup(3, 4, 10, 6);
    const auto p = make_coupling_params(s.cfg, s.data, 10, 3.0);
    CHECK(reverse_bracket_bound(s.cfg, p, p.rho) < 0.0);
    CHECK(reverse_bracket_bound(s.cfg, p, coupling_rho_tight(s.cfg, p.beta, p.C_n)) == doctest::Approx(0.0));
    Rng rng(7);
    int violations = 0;
    for (int t = 0; t < 300; ++t) {
        const WeightMatrix w = fixtures::random_ball_point(3, 4, rng);
        const Xi xi = sample_xi_given_w(fixtures::random_ball_point(3, 4, rng), s.data.X, p, rng).xi;
        Eigen::VectorXd u(12);
        for (auto& e : u) e = rng.normal();
        u.normalize();
        if (reverse_hessian_quadform(s.cfg, w, xi, s.data, p, u) > 1e-10) ++violations;
    }
    CHECK(violations == 0);
}

TEST_CASE("condition report constants") {
    auto s = small_setup(2, 4, 10, 8);
    const auto r = check_logconcavity_conditions(s.cfg, s.data, 0.5, 10);
    CHECK(r.A1 == doctest::Approx(2.0 + 4.0 * std::sqrt(1.5)));
    CHECK(r.A2 == doctest::Approx((2.0 + 1.0 / std::sqrt(std::numbers::pi)) * std::sqrt(2.0 * std::sqrt(1.5))));
    CHECK(r.A2_alt < r.A2);
    const double cv = r.C_N;
    CHECK(r.A3 == doctest::Approx(4 * std::sqrt(3 / (2 * std::exp(1.0))) * std::pow(cv, 1.5) * (r.A1 + r.A2 * std::sqrt(cv))));
    CHECK(r.H1 == doctest::Approx(condition_H1(r.delta_used)));
    CHECK(r.beta_N_ok);
    CHECK_FALSE(check_logconcavity_conditions(s.cfg, s.data, 0.1, 10).beta_N_ok);
    CHECK(r.true_bounds.a0 < r.bounds.a0);
    // H1 at the default delta = 1/300
    CHECK(condition_H1(1.0 / 300.0) == doctest::Approx(2 / std::sqrt(2 * std::numbers::pi) * (1.0 / 299.0) * std::sqrt(2 * std::log(600.0))));
    CHECK(condition_H1(1.0 / 300.0) < 0.01);
}

TEST_CASE("coupling probability and Z derivative stay within their bounds") {
    auto s = small_setup(2, 3, 8, 9);
    const auto p = make_coupling_params(s.cfg, s.data, 8, 1.0);
    Rng rng(10);
    for (int t = 0; t < 3; ++t) {
        const WeightMatrix w = fixtures::random_ball_point(2, 3, rng);
        Eigen::VectorXd u(6);
        for (auto& e : u) e = rng.normal();
        u.normalize();
        const auto z = estimate_Z_and_check(w, u, p, s.data.X, 20000, rng);
        CHECK(z.prob_ok);
        CHECK(z.prob_B > 0.99);
        CHECK(z.grad_ok);
        CHECK(z.Z <= 0.0);
        CHECK(std::abs(z.grad_fd - z.grad_lr) < 4 * (z.grad_fd_se + z.grad_lr_se) + 1e-12);
        CHECK(z.grad_bound == doctest::Approx(z_gradient_bound(p.rho, z.sigma_tilde, p.delta)));
    }
    CHECK_THROWS(estimate_Z_and_check(WeightMatrix::Zero(2, 3), Eigen::VectorXd::Zero(6), p, s.data.X, 10, rng));
}

TEST_CASE("Holder bound is minimized near ell star") {
    auto s = small_setup(2, 8, 10, 11);
    const auto p = make_coupling_params(s.cfg, s.data, 10, 0.05);
    const auto h1 = holder_variance_bound(1, s.cfg, p);
    const double top = h1.gap;  // gap at ell = 1 is the numerator itself
    CHECK(h1.ell_star == doctest::Approx(top));
    const auto hs = holder_variance_bound(h1.ell_star_int, s.cfg, p);
    CHECK(hs.bound == doctest::Approx(h1.bound_at_ell_star));
    CHECK(std::min(hs.bound_floor, hs.bound_ceil) <= holder_variance_bound(1, s.cfg, p).bound);
    // continuous optimum value is 4 sqrt(e) ell* n / d
    const double cont = 4.0 * std::sqrt(std::exp(1.0)) * top * 10.0 / 8.0;
    CHECK(std::min(hs.bound_floor, hs.bound_ceil) >= cont * (1 - 1e-12));
    CHECK(std::min(hs.bound_floor, hs.bound_ceil) <= cont * 1.01);
    CHECK_THROWS(holder_variance_bound(0, s.cfg, p));
}

TEST_CASE("marginal score identity on the d = 1 quadrature oracle") {
    auto cfg = NetworkConfig::make(1, 1, 1.0, Activation::tanh_scaled());
    Dataset data;
    data.X = Eigen::MatrixXd::Ones(2, 1);
    data.y = Eigen::Vector2d(0.4, 0.1);
    const auto p = make_coupling_params(cfg, data, 2, 1.0);
    CouplingQuadrature q(cfg, data, p, 4000);
    Rng rng(12);
    for (int t = 0; t < 5; ++t) {
        WeightMatrix w(1, 1);
        w(0, 0) = rng.uniform(-1, 1);
        const Xi xi = sample_xi_given_w(w, data.X, p, rng).xi;
        WeightMatrix m(1, 1);
        m(0, 0) = q.conditional_mean(xi);
        const Eigen::VectorXd exact = marginal_score_exact(xi, m, p, data.X);
        const double h = 1e-5;
        for (int i = 0; i < 2; ++i) {
            Xi up = xi, dn = xi;
            up(i, 0) += h;
            dn(i, 0) -= h;
            const double fd = (q.log_marginal(up) - q.log_marginal(dn)) / (2 * h);
            CHECK(exact[i] == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
        }
    }
}

#include "doctest.h"
#include "fixtures.hpp"

#include "lccnet/priors.hpp"
#include "lccnet/stats.hpp"

#include <cmath>
#include <map>
#include <set>

using namespace lccnet;

TEST_CASE("continuous prior stays in the ball and matches coordinate moments") {
    Rng rng(21);
    const ContinuousL1Prior prior{3, 2};
    const int n = 100000;
    std::vector<double> sq(n), first(n), norm(n);
    for (int s = 0; s < n; ++s) {
        const WeightMatrix w = sample_continuous(prior, rng);
        REQUIRE(in_l1_balls(w, 1e-12));
        sq[s] = w(1, 2) * w(1, 2);
        first[s] = w(0, 0);
        norm[s] = w.row(0).lpNorm<1>();
    }
    const auto m = coordinate_second_moment(3);
    CHECK(m.signed_value == doctest::Approx(0.1));
    CHECK(m.unsigned_value == doctest::Approx(3.0 / 80.0));
    const auto ms = mean_se(sq);
    CHECK(std::abs(ms.mean - m.signed_value) < 4 * ms.se);
    const auto mf = mean_se(first);
    CHECK(std::abs(mf.mean) < 4 * mf.se);
    // the l1 norm of a uniform point in the d-ball has cdf r^d
    CHECK(ks_test(norm, [](double r) { return std::pow(std::clamp(r, 0.0, 1.0), 3.0); }).p_value > 1e-3);
}

TEST_CASE("grid counts agree across methods") {
    CHECK(count_grid(2, 1) == 5);
    CHECK(count_grid(2, 2) == 13);
    CHECK(count_grid(3, 2) == 25);
    for (int d = 1; d <= 5; ++d)
        for (int M = 1; M <= 4; ++M) {
            CHECK(count_grid(d, M) == count_grid_closed_form(d, M));
            const auto pts = enumerate_grid(d, M);
            CHECK(pts.size() == count_grid(d, M));
            std::set<std::vector<double>> uniq;
            for (const auto& p : pts) {
                CHECK(p.lpNorm<1>() <= 1.0 + 1e-12);
                uniq.insert(std::vector<double>(p.data(), p.data() + p.size()));
            }
            CHECK(uniq.size() == pts.size());
            CHECK(pts.size() <= static_cast<std::size_t>(std::pow(2 * d + 1, M)));
        }
}

TEST_CASE("enumeration limit is enforced") {
    CHECK_THROWS_AS(enumerate_grid(10, 8, 1000), EnumerationLimitError);
    CHECK_THROWS_AS(ProductGrid(2, 5, 2, 100), EnumerationLimitError);
    ProductGrid g(2, 2, 1);
    CHECK(g.size() == 25);
    std::vector<int> dig;
    g.digits(7, dig);
    CHECK(dig == std::vector<int>{2, 1});
    const WeightMatrix w = g.decode(7);
    CHECK(w.row(0).transpose() == g.row_points()[2]);
    CHECK(w.row(1).transpose() == g.row_points()[1]);
    CHECK_THROWS(g.decode(25));
    CHECK(on_grid(w, 1));
}

TEST_CASE("grid prior validation") {
    CHECK_THROWS(DiscreteGridPrior{2, 1, 3}.validate());
    CHECK_NOTHROW(DiscreteGridPrior{3, 1, 3}.validate());
}

TEST_CASE("dirichlet moments against closed forms and quadrature") {
    // Beta(1, d) marginal: E[w^2] = 2 / ((d+1)(d+2))
    CHECK(dirichlet_moment(2, {2}).dirichlet == doctest::Approx(1.0 / 6.0));
    CHECK(dirichlet_moment(1, {2}).signed_prior == doctest::Approx(1.0 / 3.0));
    CHECK(dirichlet_moment(2, {1, 1}).signed_prior == 0.0);
    CHECK(dirichlet_moment(2, {1, 1}).dirichlet == doctest::Approx(1.0 / 12.0));
    CHECK_THROWS(dirichlet_moment(1, {1, 1, 1}));

    // midpoint rule over the square [-1,1]^2 masked to the diamond
    const int res = 2000;
    for (auto [a, b] : std::vector<std::pair<int, int>>{{2, 0}, {2, 2}, {4, 0}, {4, 2}}) {
        double num = 0, vol = 0;
        for (int i = 0; i < res; ++i)
            for (int j = 0; j < res; ++j) {
                // rotated grid has cells aligned with the diamond edges
                const double s = -1 + (2 * i + 1.0) / res, t = -1 + (2 * j + 1.0) / res;
                const double w1 = 0.5 * (s + t), w2 = 0.5 * (s - t);
                num += std::pow(w1, a) * std::pow(w2, b);
                vol += 1;
            }
        CHECK(dirichlet_moment(2, {a, b}).signed_prior == doctest::Approx(num / vol).epsilon(1e-5));
    }
}

TEST_CASE("prior moment bound dominates Monte Carlo moments") {
    Rng rng(8);
    for (int trial = 0; trial < 4; ++trial) {
        const int n = 3 + static_cast<int>(rng.below(8));
        const int d = 2 + static_cast<int>(rng.below(6));
        const int K = 2;
        const Eigen::MatrixXd X = fixtures::design(n, d, rng);
        Eigen::MatrixXd u(n, K);
        for (Eigen::Index i = 0; i < u.size(); ++i) u.data()[i] = rng.normal();
        u /= u.norm();
        for (int ell = 1; ell <= 3; ++ell) {
            std::vector<double> v(20000);
            for (auto& s : v) {
                const WeightMatrix w = sample_continuous({d, K}, rng);
                const double proj = (u.array() * (X * w.transpose()).array()).sum();
                s = std::pow(proj, 2 * ell);
            }
            const auto ms = mean_se(v);
            CHECK(std::pow(ms.mean + 3 * ms.se, 1.0 / ell) <= prior_moment_bound(ell, n, d));
        }
    }
}

TEST_CASE("discretization is unbiased with variance at most 1/M") {
    Rng rng(4);
    WeightMatrix w(1, 4);
    w << 0.3, -0.25, 0.1, 0.0;
    Eigen::VectorXd x(4);
    x << 1.0, 0.7, -0.9, 0.4;
    for (int M : {1, 3, 10}) {
        const int n = 40000;
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(4);
        std::vector<double> proj(n);
        for (int s = 0; s < n; ++s) {
            const WeightMatrix q = discretize_weights(w, M, rng);
            REQUIRE(on_grid(q, M));
            mean += q.row(0).transpose();
            proj[s] = q.row(0).dot(x);
        }
        mean /= n;
        CHECK((mean - w.row(0).transpose()).cwiseAbs().maxCoeff() < 0.01);
        const auto ms = mean_se(proj);
        CHECK(std::abs(ms.mean - w.row(0).dot(x)) < 4 * ms.se);
        CHECK(sample_variance(proj) <= 1.0 / M + 0.02);
    }
    // vertices and the origin are fixed points
    WeightMatrix vertex(2, 2);
    vertex << 0.0, -1.0, 0.0, 0.0;
    CHECK(discretize_weights(vertex, 2, rng) == vertex);
}

TEST_CASE("grid sampler is uniform over a non-enumerated grid") {
    Rng rng(6);
    const DiscreteGridPrior prior{2, 1, 2};
    CHECK_THROWS(sample_grid_uniform(prior, rng));
    std::map<std::pair<int, int>, double> counts;
    const int n = 26000;
    for (int s = 0; s < n; ++s) {
        const WeightMatrix w = sample_grid_uniform(prior, rng, 10);
        counts[{static_cast<int>(std::lround(2 * w(0, 0))), static_cast<int>(std::lround(2 * w(0, 1)))}] += 1;
    }
    CHECK(counts.size() == 13);
    double stat = 0;
    for (auto& [k, c] : counts) stat += (c - n / 13.0) * (c - n / 13.0) / (n / 13.0);
    CHECK(chi_square_sf(stat, 12) > 1e-3);
}

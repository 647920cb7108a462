#include "doctest.h"
#include "fixtures.hpp"

#include "lccnet/estimators.hpp"
#include "lccnet/stats.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

using namespace lccnet;

namespace {

struct Problem {
    NetworkConfig cfg;
    std::shared_ptr<const ProductGrid> grid;
    Dataset data;
};

Problem problem(int K, int d, int M, Eigen::Index N, std::uint64_t seed) {
    Rng rng(seed);
    Problem p{NetworkConfig::make(K, d, 1.0, Activation::tanh_scaled()), std::make_shared<ProductGrid>(d, K, M), {}};
    p.data = fixtures::teacher_data(p.cfg, fixtures::random_ball_point(K, d, rng), N, 0.3, rng);
    return p;
}

// direct evaluation by decoding every index
Eigen::VectorXd brute_log_weights(const Problem& p, Eigen::Index n, double beta) {
    Eigen::VectorXd lw(static_cast<Eigen::Index>(p.grid->size()));
    for (Eigen::Index g = 0; g < lw.size(); ++g) lw[g] = -beta * loss(p.cfg, p.grid->decode(g), p.data, n);
    lw.array() -= log_sum_exp(lw);
    return lw;
}

}  // namespace

TEST_CASE("n = 0 and beta = 0 give the uniform table") {
    const auto p = problem(2, 2, 2, 6, 1);
    const double logG = std::log(static_cast<double>(p.grid->size()));
    for (const auto& snap : {exact_discrete_posterior(p.cfg, p.grid, p.data, 0, 3.0),
                             exact_discrete_posterior(p.cfg, p.grid, p.data, 6, 0.0)}) {
        CHECK((snap.log_weights.array() + logG).abs().maxCoeff() < 1e-12);
        CHECK(snap.log_evidence == doctest::Approx(0.0));
    }
}

TEST_CASE("tables match brute force and sequential updates") {
    const auto p = problem(2, 3, 2, 8, 2);
    const auto seq = sequential_discrete_posteriors(p.cfg, p.grid, p.data, 8, 1.5, 3);
    REQUIRE(seq.size() == 9);
    for (Eigen::Index n = 0; n <= 8; ++n) {
        const auto& s = seq[static_cast<std::size_t>(n)];
        CHECK(s.n == n);
        CHECK((s.log_weights - brute_log_weights(p, n, 1.5)).cwiseAbs().maxCoeff() < 1e-10);
        const auto direct = exact_discrete_posterior(p.cfg, p.grid, p.data, n, 1.5);
        CHECK((s.log_weights - direct.log_weights).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(s.log_evidence == doctest::Approx(direct.log_evidence).epsilon(1e-12));
        // one reweighting step from n-1
        if (n > 0) {
            const auto& prev = seq[static_cast<std::size_t>(n - 1)];
            Eigen::VectorXd lw = prev.log_weights;
            for (Eigen::Index g = 0; g < lw.size(); ++g) {
                const double r = residual(p.cfg, p.grid->decode(g), p.data, n - 1);
                lw[g] -= 0.75 * r * r;
            }
            lw.array() -= log_sum_exp(lw);
            CHECK((lw - s.log_weights).cwiseAbs().maxCoeff() < 1e-10);
            // evidence cannot increase since the loss is nonnegative
            CHECK(s.log_evidence <= prev.log_evidence + 1e-15);
        }
    }
    const auto single = sequential_discrete_posteriors(p.cfg, p.grid, p.data, 8, 1.5, 1);
    CHECK((single.back().log_weights - seq.back().log_weights).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("large beta concentrates on the empirical risk minimizer") {
    const auto p = problem(1, 2, 3, 12, 3);
    const auto snap = exact_discrete_posterior(p.cfg, p.grid, p.data, 12, 1e4);
    Eigen::Index best_loss_idx = 0;
    double best = 1e300;
    for (Eigen::Index g = 0; g < static_cast<Eigen::Index>(p.grid->size()); ++g) {
        const double l = loss(p.cfg, p.grid->decode(g), p.data, 12);
        if (l < best) best = l, best_loss_idx = g;
    }
    Eigen::Index argmax;
    snap.log_weights.maxCoeff(&argmax);
    CHECK(argmax == best_loss_idx);
    CHECK(std::exp(snap.log_weights[argmax]) > 0.99);
}

TEST_CASE("predictive density") {
    const auto cfg = NetworkConfig::make(2, 2, 1.5, Activation::tanh_scaled());
    PosteriorSnapshot atom;
    WeightMatrix w(2, 2);
    w << 0.2, -0.5, 0.6, 0.1;
    atom.samples = {w};
    const Eigen::Vector2d x(1.0, 0.3);
    const double f = eval_network(cfg, w, x);
    for (double y : {-1.0, 0.0, f, 2.5})
        CHECK(predictive_density(atom, cfg, x, y, 2.0) ==
              doctest::Approx(std::exp(normal_logpdf(y, f, 0.5))).epsilon(1e-14));
    CHECK(posterior_mean(atom, cfg, x) == doctest::Approx(f));

    const auto p = problem(2, 2, 2, 5, 4);
    const auto snap = exact_discrete_posterior(p.cfg, p.grid, p.data, 5, 2.0);
    // trapezoid over a wide interval
    const int steps = 20000;
    const double lo = -10, hi = 10, h = (hi - lo) / steps;
    double total = 0;
    for (int i = 0; i <= steps; ++i) total += (i == 0 || i == steps ? 0.5 : 1.0) * predictive_density(snap, p.cfg, x, lo + i * h, 2.0);
    CHECK(total * h == doctest::Approx(1.0).epsilon(1e-9));
    CHECK_THROWS(predictive_density(snap, p.cfg, x, 0.0, 0.0));
}

TEST_CASE("exact table agrees with self-normalized Monte Carlo over the prior") {
    const auto p = problem(2, 2, 3, 10, 5);
    const auto snap = exact_discrete_posterior(p.cfg, p.grid, p.data, 10, 1.0);
    const Eigen::Vector2d x(1.0, -0.4);
    const double exact = posterior_mean(snap, p.cfg, x);
    Rng rng(55);
    const int draws = 100000;
    std::vector<double> lw(draws), fv(draws);
    for (int s = 0; s < draws; ++s) {
        const WeightMatrix w = p.grid->decode(rng.below(p.grid->size()));
        lw[s] = -loss(p.cfg, w, p.data, 10);
        fv[s] = eval_network(p.cfg, w, x);
    }
    const double lse = log_sum_exp(lw);
    double est = 0, var = 0;
    for (int s = 0; s < draws; ++s) est += std::exp(lw[s] - lse) * fv[s];
    for (int s = 0; s < draws; ++s) var += std::pow(std::exp(lw[s] - lse) * (fv[s] - est), 2);
    CHECK(std::abs(est - exact) < 4 * std::sqrt(var) + 1e-12);
    CHECK(log_mean_exp(lw) == doctest::Approx(snap.log_evidence).epsilon(0.01));
}

TEST_CASE("Cesaro averages") {
    const auto p = problem(1, 2, 2, 4, 6);
    const auto seq = sequential_discrete_posteriors(p.cfg, p.grid, p.data, 4, 1.0);
    const Eigen::Vector2d x(1.0, 0.5);
    double m = 0, pd = 0;
    for (const auto& s : seq) m += posterior_mean(s, p.cfg, x), pd += predictive_density(s, p.cfg, x, 0.2, 1.0);
    CHECK(cesaro_mean(seq, 4, p.cfg, x) == doctest::Approx(m / 5));
    CHECK(cesaro_predictive(seq, 4, p.cfg, x, 0.2, 1.0) == doctest::Approx(pd / 5));
    CHECK_THROWS(cesaro_mean(std::span(seq).first(4), 4, p.cfg, x));
    // N = 0 reduces to the prior
    CHECK(cesaro_mean(std::span(seq).first(1), 0, p.cfg, x) == doctest::Approx(posterior_mean(seq[0], p.cfg, x)));
}

TEST_CASE("snapshot table export and validation") {
    const auto p = problem(1, 1, 2, 2, 7);
    const auto snap = exact_discrete_posterior(p.cfg, p.grid, p.data, 2, 1.0);
    std::ostringstream os;
    write_snapshot_table(os, snap);
    std::istringstream is(os.str());
    std::string header;
    std::getline(is, header);
    CHECK(header == "index log_weight");
    Eigen::Index idx;
    double v;
    Eigen::Index rows = 0;
    while (is >> idx >> v) {
        CHECK(v == snap.log_weights[idx]);  // round trip at full precision
        ++rows;
    }
    CHECK(rows == 5);

    PosteriorSnapshot broken = snap;
    broken.log_weights[0] += 0.1;
    CHECK_THROWS(broken.validate());
    CHECK_THROWS(PosteriorSnapshot{}.validate());
    CHECK_THROWS(write_snapshot_table(os, PosteriorSnapshot{}));
    CHECK_THROWS(sequential_discrete_posteriors(p.cfg, p.grid, p.data, 3, 1.0));
    CHECK_THROWS(sequential_discrete_posteriors(NetworkConfig::make(2, 1, 1.0, Activation::tanh_scaled()), p.grid,
                                                p.data, 1, 1.0));
}

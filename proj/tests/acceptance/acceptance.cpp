// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include "lccnet/cli.hpp"
#include "lccnet/coupling.hpp"
#include "lccnet/estimators.hpp"
#include "lccnet/priors.hpp"
#include "lccnet/risk.hpp"
#include "lccnet/samplers.hpp"
#include "lccnet/stats.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <thread>

using namespace lccnet;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

Eigen::MatrixXd design(Eigen::Index n, int d, Rng& rng) {
    Eigen::MatrixXd X(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        X(i, 0) = 1.0;
        for (int j = 1; j < d; ++j) X(i, j) = rng.uniform(-1.0, 1.0);
    }
    return X;
}

Dataset teacher_data(const NetworkConfig& cfg, Eigen::Index n, double noise, Rng& rng) {
    Dataset data;
    data.X = design(n, cfg.d, rng);
    data.y = network_outputs(cfg, sample_continuous({cfg.d, cfg.K}, rng), data.X, n);
    for (auto& v : data.y) v += noise * rng.normal();
    return data;
}

Eigen::VectorXd unit_vector(Eigen::Index n, Rng& rng) {
    Eigen::VectorXd u(n);
    for (auto& e : u) e = rng.normal();
    return u.normalized();
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

int hardware_threads() { return std::max(1u, std::min(8u, std::thread::hardware_concurrency())); }

// 1. Bayes factors telescope
Outcome telescope() {
    Rng rng(1, 1);
    const auto cfg = NetworkConfig::make(1, 2, 1.0, Activation::tanh_scaled());
    const Dataset data = teacher_data(cfg, 5, 0.3, rng);
    const auto t = bayes_factor_telescope(cfg, std::make_shared<const ProductGrid>(2, 1, 1), data, 5, 1.0);
    return {t.residual <= 1e-12, "residual=" + num(t.residual)};
}

// 2. r_square <= r_rand and r_log <= r_rand at every step
Outcome orderings() {
    Rng rng(2, 1);
    long violations = 0, steps = 0;
    for (int inst = 0; inst < 20; ++inst) {
        const int K = 1 + static_cast<int>(rng.below(2)), d = 2 + static_cast<int>(rng.below(2));
        const int M = 1 + static_cast<int>(rng.below(2));
        const Eigen::Index N = 10 + static_cast<Eigen::Index>(rng.below(21));
        const double beta = rng.uniform(0.05, 2.0);
        const auto cfg = NetworkConfig::make(K, d, rng.uniform(0.5, 2.0), Activation::tanh_scaled());
        const Dataset data = teacher_data(cfg, N, rng.uniform(0.0, 0.5), rng);
        const auto grid = std::make_shared<const ProductGrid>(d, K, M);
        const auto seq = sequential_discrete_posteriors(cfg, grid, data, N, beta);
        Eigen::VectorXd g(N);
        const double gb = rng.uniform(0.1, 1.0);
        for (auto& v : g) v = rng.uniform(-gb, gb);
        const auto led = regret_ledger(seq, cfg, data, g, beta, gb);
        for (const auto& r : led.records) {
            ++steps;
            if (!(r.r_square <= r.r_rand) || !(r.r_log <= r.r_rand)) ++violations;
        }
    }
    return {violations == 0, "violations=" + std::to_string(violations) + "/" + std::to_string(steps) + " steps"};
}

// 3. realized square regret against the bound with exact posteriors
Outcome realized_vs_bound() {
    int instances = 0, exceeded = 0;
    double worst_ratio = 0.0;
    std::uint64_t seed = 30;
    for (int d : {2, 3})
        for (int K : {1, 2})
            for (const char* schedule : {"fixed", "fourth-root"})
                for (const char* noise : {"gaussian", "bounded"}) {
                    cli::ExperimentConfig c;
                    c.network.K = K;
                    c.network.d = d;
                    c.prior = {"discrete", 1};
                    c.beta = {schedule, 0.5};
                    c.data.synthetic = {200, "network", noise, 0.3};
                    c.seed = seed++;
                    const auto rows = cli::regret_sweep(c, cli::load_data(c), hardware_threads());
                    for (const auto& r : rows) {
                        ++instances;
                        worst_ratio = std::max(worst_ratio, r.ledger.R_square / r.bound);
                        if (!(r.ledger.R_square <= r.bound)) ++exceeded;
                    }
                }
    return {exceeded == 0, "exceeded=" + std::to_string(exceeded) + "/" + std::to_string(instances) +
                               " max_realized_over_bound=" + num(worst_ratio)};
}

// 4. bound at the formulaic hyperparameters equals the closed forms
Outcome closed_forms() {
    double worst = 0.0;
    int points = 0;
    for (double N : {1e3, 1e4, 1e5, 1e6, 1e8})
        for (double V : {0.5, 2.0})
            for (double sigma_b : {0.25, 1.0})
                for (int d : {2, 16})
                    for (double C_N : {1.5, 4.0}) {
                        if (points == 50) break;
                        BoundInputs in;
                        in.N = N;
                        in.V = V;
                        in.sigma = sigma_b;
                        in.b = sigma_b * 2;
                        in.d = d;
                        in.C_N = C_N;
                        in.beta = 1.0 / (sigma_b * sigma_b);
                        worst = std::max(worst, cli::compute_bounds(in, false).worst_closed_form_rel);
                        ++points;
                    }
    return {worst <= 1e-9 && points == 50, std::to_string(points) + " points, max_rel=" + num(worst)};
}

// 5. reverse conditional Hessian quadratic form
Outcome reverse_hessian() {
    Rng rng(5, 1);
    const auto cfg = NetworkConfig::make(2, 3, 1.0, Activation::tanh_scaled());
    const Dataset data = teacher_data(cfg, 10, 0.2, rng);
    const auto report = check_logconcavity_conditions(cfg, data, 1.0, 10);
    const auto p = make_coupling_params(cfg, data, 10, 1.0);
    int violations = 0;
    double worst = -std::numeric_limits<double>::infinity();
    for (int t = 0; t < 1000; ++t) {
        const Xi xi = sample_xi_given_w(sample_continuous({3, 2}, rng), data.X, p, rng).xi;
        const double q = reverse_hessian_quadform(cfg, sample_continuous({3, 2}, rng), xi, data, p, unit_vector(6, rng));
        worst = std::max(worst, q);
        if (!(q <= 1e-10)) ++violations;
    }
    return {report.H1 <= 0.01 && report.H2 <= 0.1 && violations == 0,
            "H1=" + num(report.H1) + " H2=" + num(report.H2) + " violations=" + std::to_string(violations) +
                "/1000 max_quadform=" + num(worst)};
}

// 6. marginal concavity probe in the wide regime
Outcome marginal_concavity() {
    Rng rng(6, 1);
    const int K = 2, d = 128;
    const Eigen::Index N = 10;
    const double beta = 0.05;
    const auto cfg = NetworkConfig::make(K, d, 1.0, Activation::tanh_scaled());
    const Dataset data = teacher_data(cfg, N, 0.2, rng);
    const auto report = check_logconcavity_conditions(cfg, data, beta, N);
    const auto p = make_coupling_params(cfg, data, N, beta);
    const auto h1 = holder_variance_bound(1, cfg, p);
    const auto hs = holder_variance_bound(h1.ell_star_int, cfg, p);
    const double holder = p.rho * hs.bound;

    ChainConfig cc;
    cc.step_size = 0.05;
    cc.iterations = 3000;
    cc.burn_in = 1000;
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
        const WeightMatrix w = sample_continuous({d, K}, rng);
        const Xi xi = sample_xi_given_w(w, data.X, p, rng).xi;
        cc.seed = 600 + static_cast<std::uint64_t>(t);
        const auto chain = sample_reverse_conditional(cfg, data, p, xi, cc, w);
        const auto est = marginal_concavity_estimate(xi, chain.samples, p, data.X);
        worst = std::max(worst, est.value + 2.0 * est.se);
    }
    return {report.cond_Kd && worst < 1.0 && holder < 1.0,
            "Kd>=A3(beta N)^2=" + std::string(report.cond_Kd ? "yes" : "no") + " max(est+2SE)=" + num(worst) +
                " rho*holder(ell*=" + std::to_string(h1.ell_star_int) + ")=" + num(holder)};
}

// d = 1, K = 1, n = 2 fixture shared by 7 and 8
struct Tiny {
    NetworkConfig cfg = NetworkConfig::make(1, 1, 1.0, Activation::tanh_scaled());
    Dataset data;
    CouplingParams p;
    Tiny(double y1, double y2) {
        data.X = Eigen::MatrixXd::Ones(2, 1);
        data.y = Eigen::Vector2d(y1, y2);
        p = make_coupling_params(cfg, data, 2, 1.0);
    }
};

// 7. mixture over xi reproduces the posterior
Outcome mixture() {
    const Tiny t(0.7, 0.3);
    const CouplingQuadrature q(t.cfg, t.data, t.p, 1000);
    const Eigen::VectorXd w = Eigen::VectorXd::LinSpaced(200, -0.995, 0.995);
    const Eigen::VectorXd mix = q.mixture_density(w, 300);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < w.size(); ++i) worst = std::max(worst, std::abs(mix[i] - q.posterior_density_at(w[i])));
    return {worst < 1e-3, "sup_error=" + num(worst)};
}

// 8. marginal score identity
Outcome score_identity() {
    const Tiny t(0.4, 0.1);
    const CouplingQuadrature q(t.cfg, t.data, t.p, 4000);
    Rng rng(8, 1);
    double worst = 0.0;
    for (int k = 0; k < 10; ++k) {
        WeightMatrix w(1, 1);
        w(0, 0) = rng.uniform(-1.0, 1.0);
        const Xi xi = sample_xi_given_w(w, t.data.X, t.p, rng).xi;
        WeightMatrix m(1, 1);
        m(0, 0) = q.conditional_mean(xi);
        const Eigen::VectorXd exact = marginal_score_exact(xi, m, t.p, t.data.X);
        for (int i = 0; i < 2; ++i) {
            Xi up = xi, dn = xi;
            up(i, 0) += 1e-5;
            dn(i, 0) -= 1e-5;
            worst = std::max(worst, std::abs(exact[i] - (q.log_marginal(up) - q.log_marginal(dn)) / 2e-5));
        }
    }
    return {worst <= 1e-3, "max_error=" + num(worst)};
}

// 9. two-stage sampler against grid quadrature
Outcome sampler_vs_oracle() {
    const auto cfg = NetworkConfig::make(1, 2, 1.0, Activation::tanh_scaled());
    Dataset data;
    data.X.resize(5, 2);
    data.X << 1, 0.9, 1, 0.4, 1, -0.2, 1, 0.7, 1, -0.6;
    data.y.resize(5);
    for (Eigen::Index i = 0; i < 5; ++i) data.y[i] = 0.6 * std::tanh(0.5 * data.X(i, 0) + 0.3 * data.X(i, 1)) + 0.15;
    const double beta = 4.0;
    const auto p = make_coupling_params(cfg, data, 5, beta);
    const auto oracle = reference_posterior_quadrature(cfg, data, 5, beta, 800);
    const std::vector<Eigen::Vector2d> probes{{1, 1}, {1, 0.5}, {1, 0}};
    double worst = 0.0;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        TwoStageBudgets b;
        b.nested.outer.iterations = 40000;
        b.nested.outer.burn_in = 2000;
        b.nested.outer.step_size = 0.3;
        b.nested.outer.seed = seed;
        b.nested.inner.iterations = 220;
        b.nested.inner.burn_in = 20;
        b.nested.inner.thinning = 5;
        b.nested.inner.seed = seed + 100;
        b.nested.initial_inner_burn_in = 500;
        b.final_chain.iterations = 60;
        b.final_chain.burn_in = 50;
        b.final_chain.seed = seed + 200;
        b.draws_per_xi = 1;
        b.threads = hardware_threads();
        const auto res = two_stage_sample(cfg, data, p, b);
        for (const auto& x : probes) {
            double acc = 0.0;
            for (const auto& w : res.draws) acc += eval_network(cfg, w, x);
            const double truth = oracle.mean_output(cfg, x);
            worst = std::max(worst, std::abs(acc / static_cast<double>(res.draws.size()) - truth) / std::abs(truth));
        }
    }
    return {worst <= 0.02 && oracle.mean_change_on_refinement < 1e-3,
            "max_relative_error=" + num(worst) + " quadrature_refinement=" + num(oracle.mean_change_on_refinement)};
}

// 10. moments of the l1-ball prior and the prior moment bound
Outcome moments() {
    // exact rule on the diamond |w1| + |w2| <= 1 via s = w1 + w2, t = w1 - w2
    using GL = boost::math::quadrature::gauss<double, 10>;
    auto diamond = [](int a, int b) {
        return GL::integrate([&](double s) {
                   return GL::integrate([&](double t) { return std::pow(0.5 * (s + t), a) * std::pow(0.5 * (s - t), b); },
                                        -1.0, 1.0);
               }, -1.0, 1.0) / 4.0;
    };
    double worst_quad = 0.0;
    for (int r : {1, 2, 3, 4, 6}) {
        const double segment = r % 2 ? 0.0 : 1.0 / (r + 1);  // uniform on [-1, 1]
        worst_quad = std::max(worst_quad, std::abs(dirichlet_moment(1, {r}).signed_prior - segment));
    }
    for (auto [a, b] : std::vector<std::pair<int, int>>{{2, 0}, {2, 2}, {4, 0}, {4, 2}, {1, 1}, {3, 1}, {6, 0}})
        worst_quad = std::max(worst_quad, std::abs(dirichlet_moment(2, {a, b}).signed_prior - diamond(a, b)));

    Rng rng(10, 1);
    double worst_z = 0.0;
    for (int d : {1, 2, 3, 5})
        for (const std::vector<int>& r : {std::vector<int>{2}, std::vector<int>{4}, std::vector<int>{2, 2},
                                          std::vector<int>{1, 1}, std::vector<int>{2, 2, 2}}) {
            if (static_cast<int>(r.size()) > d) continue;
            std::vector<double> v(100000);
            for (auto& x : v) {
                const WeightMatrix w = sample_continuous({d, 1}, rng);
                double prod = 1.0;
                for (std::size_t j = 0; j < r.size(); ++j) prod *= std::pow(w(0, static_cast<Eigen::Index>(j)), r[j]);
                x = prod;
            }
            const auto ms = mean_se(v);
            worst_z = std::max(worst_z, std::abs(ms.mean - dirichlet_moment(d, r).signed_prior) / ms.se);
        }

    double worst_ratio = 0.0;
    for (int t = 0; t < 10; ++t) {
        const int n = 2 + static_cast<int>(rng.below(9)), d = 2 + static_cast<int>(rng.below(9)), K = 2;
        const Eigen::MatrixXd X = design(n, d, rng);
        const Eigen::VectorXd u = unit_vector(n * K, rng);
        for (int ell = 1; ell <= 3; ++ell) {
            double acc = 0.0;
            const int draws = 40000;
            for (int s = 0; s < draws; ++s) {
                const WeightMatrix w = sample_continuous({d, K}, rng);
                double z = 0.0;
                for (int k = 0; k < K; ++k) z += u.segment(k * n, n).dot(X * w.row(k).transpose());
                acc += std::pow(z, 2 * ell);
            }
            worst_ratio = std::max(worst_ratio, std::pow(acc / draws, 1.0 / ell) / prior_moment_bound(ell, n, d));
        }
    }
    return {worst_quad <= 1e-6 && worst_z <= 3.0 && worst_ratio < 1.0,
            "quadrature_error=" + num(worst_quad) + " mc_max_z=" + num(worst_z) + " moment_over_bound=" + num(worst_ratio)};
}

// 11. probability of B under the forward coupling
Outcome coupling_probability() {
    Rng rng(11, 1);
    const auto cfg = NetworkConfig::make(2, 3, 1.0, Activation::tanh_scaled());
    const Dataset data = teacher_data(cfg, 10, 0.2, rng);
    const auto p = make_coupling_params(cfg, data, 10, 1.0);
    double margin = std::numeric_limits<double>::infinity(), bound = 0.0;
    for (int t = 0; t < 5; ++t) {
        const auto z = estimate_Z_and_check(sample_continuous({3, 2}, rng), unit_vector(6, rng), p, data.X, 100000, rng);
        margin = std::min(margin, z.prob_B - z.prob_B_floor);
        bound = z.prob_B_floor;
    }
    return {margin >= 0.0, "bound=" + num(bound) + " min(P(B|w)-bound)=" + num(margin)};
}

// 12. discretization: unbiased, conditional variance, averaged construction
Outcome discretization() {
    Rng rng(12, 1);
    double worst_z = 0.0, worst_excess = -1.0;
    for (int M : {1, 2, 3, 5, 10})
        for (int d : {2, 4, 8}) {
            const WeightMatrix w = sample_continuous({d, 1}, rng);
            const Eigen::VectorXd x = design(1, d, rng).row(0).transpose();
            const double target = w.row(0).dot(x);
            std::vector<double> z(40000), sq(40000);
            for (std::size_t i = 0; i < z.size(); ++i) {
                z[i] = discretize_weights(w, M, rng).row(0).dot(x);
                sq[i] = (z[i] - target) * (z[i] - target);
            }
            const auto ms = mean_se(z);
            worst_z = std::max(worst_z, std::abs(ms.mean - target) / ms.se);
            const auto vs = mean_se(sq);
            worst_excess = std::max(worst_excess, vs.mean - 1.0 / M - 3.0 * vs.se);
        }

    const auto cfg = NetworkConfig::make(4, 3, 1.0, Activation::tanh_scaled());
    Dataset data;
    data.X = design(30, 3, rng);
    data.y = Eigen::VectorXd::Zero(30);
    HullFunction h;
    h.neurons.resize(5, 3);
    for (int l = 0; l < 5; ++l) h.neurons.row(l) = 0.9 * sample_continuous({3, 1}, rng);
    h.coef.resize(5);
    h.coef << 0.3, -0.25, 0.2, -0.15, 0.1;
    h.V = 1.0;
    double worst_distance_ratio = 0.0;
    for (int M : {1, 2, 4, 8}) {
        const auto wit = approximation_witness(h, cfg, data, M, 4000, rng);
        worst_distance_ratio = std::max(worst_distance_ratio, wit.mean_distance / wit.discretization_distance_bound);
    }
    return {worst_z <= 3.0 && worst_excess <= 0.0 && worst_distance_ratio <= 1.0,
            "mean_max_z=" + num(worst_z) + " variance_excess=" + num(worst_excess) +
                " averaged_distance_over_bound=" + num(worst_distance_ratio)};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"telescope", telescope},
        {"regret-ordering", orderings},
        {"realized-vs-bound", realized_vs_bound},
        {"closed-forms", closed_forms},
        {"reverse-log-concavity", reverse_hessian},
        {"marginal-concavity", marginal_concavity},
        {"mixture-consistency", mixture},
        {"score-identity", score_identity},
        {"sampler-vs-oracle", sampler_vs_oracle},
        {"moments", moments},
        {"coupling-probability", coupling_probability},
        {"discretization", discretization}};
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (!o.pass) ++failures;
        std::printf("%s %zu %s %s time=%.2fs\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}

#include "lccnet/cli.hpp"

#include "lccnet/coupling.hpp"
#include "lccnet/estimators.hpp"
#include "lccnet/priors.hpp"
#include "lccnet/risk.hpp"
#include "lccnet/samplers.hpp"
#include "lccnet/stats.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

namespace lccnet::cli {

namespace {

Dataset synthetic(const NetworkConfig& cfg, Eigen::Index N, double noise, Rng& rng) {
    Dataset data;
    data.X.resize(N, cfg.d);
    for (Eigen::Index i = 0; i < N; ++i) {
        data.X(i, 0) = 1.0;
        for (int j = 1; j < cfg.d; ++j) data.X(i, j) = rng.uniform(-1.0, 1.0);
    }
    const WeightMatrix teacher = sample_continuous({cfg.d, cfg.K}, rng);
    data.y = network_outputs(cfg, teacher, data.X, N);
    for (auto& v : data.y) v += noise * rng.normal();
    return data;
}

Eigen::VectorXd unit_vector(Eigen::Index n, Rng& rng) {
    Eigen::VectorXd u(n);
    for (auto& e : u) e = rng.normal();
    return u.normalized();
}

std::string fmt(double v) { return format_double(v); }

SuiteResult telescope(std::uint64_t seed) {
    Rng rng(seed, 201);
    const auto cfg = NetworkConfig::make(1, 2, 1.0, Activation::tanh_scaled());
    const Dataset data = synthetic(cfg, 5, 0.3, rng);
    const auto t = bayes_factor_telescope(cfg, std::make_shared<const ProductGrid>(2, 1, 1), data, 5, 1.0);
    return {"telescope", t.residual <= 1e-12, 1e-12 - t.residual, "residual=" + fmt(t.residual)};
}

SuiteResult hessian(std::uint64_t seed) {
    Rng rng(seed, 202);
    const auto cfg = NetworkConfig::make(2, 3, 1.0, Activation::tanh_scaled());
    const Dataset data = synthetic(cfg, 10, 0.2, rng);
    const auto report = check_logconcavity_conditions(cfg, data, 1.0, 10);
    const auto p = make_coupling_params(cfg, data, 10, 1.0);
    int violations = 0;
    double worst = -std::numeric_limits<double>::infinity();
    for (int t = 0; t < 1000; ++t) {
        const WeightMatrix w = sample_continuous({3, 2}, rng);
        const Xi xi = sample_xi_given_w(sample_continuous({3, 2}, rng), data.X, p, rng).xi;
        const double q = reverse_hessian_quadform(cfg, w, xi, data, p, unit_vector(6, rng));
        worst = std::max(worst, q);
        if (q > 1e-10) ++violations;
    }
    return {"hessian", report.cond_H && violations == 0, -worst,
            "violations=" + std::to_string(violations) + "/1000 H1=" + fmt(report.H1) + " H2=" + fmt(report.H2)};
}

SuiteResult marginal(std::uint64_t seed) {
    Rng rng(seed, 203);
    const auto cfg = NetworkConfig::make(1, 1, 1.0, Activation::tanh_scaled());
    Dataset data;
    data.X = Eigen::MatrixXd::Ones(2, 1);
    data.y = Eigen::Vector2d(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
    const auto p = make_coupling_params(cfg, data, 2, 1.0);
    const CouplingQuadrature q(cfg, data, p, 4000);
    double worst = 0.0;
    for (int t = 0; t < 10; ++t) {
        WeightMatrix w(1, 1);
        w(0, 0) = rng.uniform(-1.0, 1.0);
        const Xi xi = sample_xi_given_w(w, data.X, p, rng).xi;
        WeightMatrix m(1, 1);
        m(0, 0) = q.conditional_mean(xi);
        const Eigen::VectorXd exact = marginal_score_exact(xi, m, p, data.X);
        for (int i = 0; i < 2; ++i) {
            Xi up = xi, dn = xi;
            up(i, 0) += 1e-5;
            dn(i, 0) -= 1e-5;
            worst = std::max(worst, std::abs(exact[i] - (q.log_marginal(up) - q.log_marginal(dn)) / 2e-5));
        }
    }
    return {"marginal", worst <= 1e-3, 1e-3 - worst, "max_score_error=" + fmt(worst)};
}

SuiteResult moments(std::uint64_t seed) {
    Rng rng(seed, 204);
    const int d = 3, draws = 50000;
    double worst_z = 0.0;
    for (const std::vector<int>& r : {std::vector<int>{2}, std::vector<int>{2, 2}, std::vector<int>{4}, std::vector<int>{1, 1}}) {
        std::vector<double> v(draws);
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
    for (int t = 0; t < 4; ++t) {
        const int n = 2 + static_cast<int>(rng.below(6)), dd = 2 + static_cast<int>(rng.below(6)), K = 2;
        Eigen::MatrixXd X(n, dd);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < dd; ++j) X(i, j) = j == 0 ? 1.0 : rng.uniform(-1.0, 1.0);
        const Eigen::VectorXd u = unit_vector(n * K, rng);
        for (int ell = 1; ell <= 3; ++ell) {
            double acc = 0.0;
            for (int s = 0; s < 20000; ++s) {
                const WeightMatrix w = sample_continuous({dd, K}, rng);
                double z = 0.0;
                for (int k = 0; k < K; ++k) z += u.segment(k * n, n).dot(X * w.row(k).transpose());
                acc += std::pow(z, 2 * ell);
            }
            worst_ratio = std::max(worst_ratio, std::pow(acc / 20000, 1.0 / ell) / prior_moment_bound(ell, n, dd));
        }
    }
    return {"moments", worst_z <= 3.0 && worst_ratio < 1.0, std::min(3.0 - worst_z, 1.0 - worst_ratio),
            "dirichlet_max_z=" + fmt(worst_z) + " moment_to_bound=" + fmt(worst_ratio)};
}

SuiteResult discretize(std::uint64_t seed) {
    Rng rng(seed, 205);
    double worst_z = 0.0, worst_excess = -1.0;
    for (int M : {1, 2, 5}) {
        const WeightMatrix w = sample_continuous({4, 1}, rng);
        Eigen::VectorXd x(4);
        x << 1.0, rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1);
        const double target = w.row(0).dot(x);
        std::vector<double> z(40000);
        for (auto& v : z) v = discretize_weights(w, M, rng).row(0).dot(x);
        const auto ms = mean_se(z);
        worst_z = std::max(worst_z, std::abs(ms.mean - target) / ms.se);
        std::vector<double> sq(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) sq[i] = (z[i] - target) * (z[i] - target);
        const auto vs = mean_se(sq);
        worst_excess = std::max(worst_excess, vs.mean - 1.0 / M - 3.0 * vs.se);
    }
    return {"discretize", worst_z <= 3.0 && worst_excess <= 0.0, std::min(3.0 - worst_z, -worst_excess),
            "mean_max_z=" + fmt(worst_z) + " variance_excess=" + fmt(worst_excess)};
}

SuiteResult zfun(std::uint64_t seed) {
    Rng rng(seed, 206);
    const auto cfg = NetworkConfig::make(2, 3, 1.0, Activation::tanh_scaled());
    const Dataset data = synthetic(cfg, 10, 0.2, rng);
    const auto p = make_coupling_params(cfg, data, 10, 1.0);
    bool ok = true;
    double margin = std::numeric_limits<double>::infinity();
    for (int t = 0; t < 3; ++t) {
        const WeightMatrix w = sample_continuous({3, 2}, rng);
        const auto z = estimate_Z_and_check(w, unit_vector(6, rng), p, data.X, 20000, rng);
        ok = ok && z.prob_ok && z.grad_ok;
        margin = std::min(margin, z.grad_bound + 3.0 * z.grad_fd_se - std::abs(z.grad_fd));
    }
    return {"zfun", ok, margin, "gradient within its bound at 3 points"};
}

SuiteResult coupling_prob(std::uint64_t seed) {
    Rng rng(seed, 207);
    const auto cfg = NetworkConfig::make(2, 3, 1.0, Activation::tanh_scaled());
    const Dataset data = synthetic(cfg, 10, 0.2, rng);
    const auto p = make_coupling_params(cfg, data, 10, 1.0);
    double margin = std::numeric_limits<double>::infinity();
    for (int t = 0; t < 5; ++t) {
        const auto z = estimate_Z_and_check(sample_continuous({3, 2}, rng), unit_vector(6, rng), p, data.X, 20000, rng);
        margin = std::min(margin, z.prob_B - z.prob_B_floor);
    }
    return {"coupling-prob", margin >= 0.0, margin, "min P(B|w) - bound over 5 points"};
}

const std::map<std::string, std::function<SuiteResult(std::uint64_t)>>& registry() {
    static const std::map<std::string, std::function<SuiteResult(std::uint64_t)>> r{
        {"hessian", hessian},       {"marginal", marginal}, {"moments", moments},          {"telescope", telescope},
        {"discretize", discretize}, {"zfun", zfun},         {"coupling-prob", coupling_prob}};
    return r;
}

}  // namespace

std::vector<std::string> verify_suite_names() {
    return {"hessian", "marginal", "moments", "telescope", "discretize", "zfun", "coupling-prob"};
}

std::vector<SuiteResult> run_verify(const std::vector<std::string>& selectors, std::uint64_t seed) {
    const auto names = selectors.empty() ? verify_suite_names() : selectors;
    for (const auto& n : names)
        if (!registry().contains(n)) throw ConfigError("unknown verify suite '" + n + "'");
    std::vector<SuiteResult> out;
    for (const auto& n : names) out.push_back(registry().at(n)(seed));
    return out;
}

}  // namespace lccnet::cli

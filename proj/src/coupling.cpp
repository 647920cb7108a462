#include "lccnet/coupling.hpp"

#include "lccnet/priors.hpp"
#include "lccnet/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace lccnet {

namespace {

const double kSqrt15 = std::sqrt(1.5);

Eigen::VectorXd stacked(const Xi& m) { return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size()); }

void check_xi(const Xi& xi, const CouplingParams& params, Eigen::Index K) {
    if (xi.rows() != params.n || xi.cols() != K) throw std::invalid_argument("xi must be n x K");
}

}  // namespace

double compute_C_n(const Dataset& data, Eigen::Index n, double a0, double V) {
    if (n < 1) throw std::invalid_argument("compute_C_n: n must be >= 1");
    if (n > data.N()) throw std::out_of_range("compute_C_n: n exceeds N");
    return data.y.head(n).cwiseAbs().maxCoeff() + a0 * V;
}

double compute_delta(int K, double a2, double beta, double C_N, double V) {
    if (K < 1 || !(a2 > 0) || !(beta > 0) || !(C_N > 0) || !(V > 0))
        throw std::invalid_argument("compute_delta: inputs must be positive");
    return std::min(1.0 / 300.0, std::sqrt(2.0 * std::numbers::pi / 11.0) * K / (a2 * beta * C_N * V));
}

double coupling_rho(const NetworkConfig& cfg, double beta, double C_n) {
    return kSqrt15 * coupling_rho_tight(cfg, beta, C_n);
}

double coupling_rho_tight(const NetworkConfig& cfg, double beta, double C_n) {
    return cfg.activation.bounds().a2 * beta * C_n * cfg.V / cfg.K;
}

CouplingParams make_coupling_params(const NetworkConfig& cfg, const Dataset& data, Eigen::Index n, double beta,
                                    double delta) {
    cfg.validate();
    if (!(beta > 0)) throw std::invalid_argument("coupling: beta must be positive");
    const DerivativeBounds b = cfg.activation.bounds();
    CouplingParams p;
    p.n = n;
    p.beta = beta;
    p.C_n = compute_C_n(data, n, b.a0, cfg.V);
    p.rho = coupling_rho(cfg, beta, p.C_n);
    p.delta = delta > 0 ? delta : compute_delta(cfg.K, b.a2, beta, p.C_n, cfg.V);
    const double dn = static_cast<double>(n);
    p.b_threshold = dn + std::sqrt(2.0 * std::log(2.0 * cfg.K * cfg.d / p.delta)) * std::sqrt(dn / p.rho);
    return p;
}

double b_statistic(const Xi& xi, const Eigen::MatrixXd& X, const CouplingParams& params) {
    if (xi.rows() != params.n || X.rows() < params.n) throw std::invalid_argument("in_B: shape mismatch");
    if (xi.size() == 0) return 0.0;
    return (X.topRows(params.n).transpose() * xi).cwiseAbs().maxCoeff();
}

bool in_B(const Xi& xi, const Eigen::MatrixXd& X, const CouplingParams& params) {
    return b_statistic(xi, X, params) <= params.b_threshold;
}

Xi coupling_mean(const WeightMatrix& w, const Eigen::MatrixXd& X, Eigen::Index n) {
    return X.topRows(n) * w.transpose();
}

XiDraw sample_xi_given_w(const WeightMatrix& w, const Eigen::MatrixXd& X, const CouplingParams& params, Rng& rng,
                         int max_attempts) {
    const Xi mean = coupling_mean(w, X, params.n);
    const double sd = 1.0 / std::sqrt(params.rho);
    XiDraw out;
    out.xi.resize(mean.rows(), mean.cols());
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        for (Eigen::Index i = 0; i < out.xi.size(); ++i) out.xi.data()[i] = mean.data()[i] + sd * rng.normal();
        if (in_B(out.xi, X, params)) return out;
        ++out.rejections;
    }
    throw std::runtime_error("sample_xi_given_w: rejection budget exhausted; parameters violate the coverage guarantee");
}

double reverse_logdensity_unnorm(const NetworkConfig& cfg, const WeightMatrix& w, const Xi& xi, const Dataset& data,
                                 const CouplingParams& params, const SupportTest& support) {
    check_xi(xi, params, cfg.K);
    const double base = log_posterior_unnorm(cfg, w, data, params.n, params.beta, support);
    return base - 0.5 * params.rho * (xi - coupling_mean(w, data.X, params.n)).squaredNorm();
}

Eigen::VectorXd reverse_score(const NetworkConfig& cfg, const WeightMatrix& w, const Xi& xi, const Dataset& data,
                              const CouplingParams& params) {
    check_xi(xi, params, cfg.K);
    Eigen::VectorXd g = posterior_score(cfg, w, data, params.n, params.beta);
    const Xi diff = xi - coupling_mean(w, data.X, params.n);
    const WeightMatrix pull = params.rho * (diff.transpose() * data.X.topRows(params.n));
    return g + flatten(pull);
}

double reverse_hessian_quadform(const NetworkConfig& cfg, const WeightMatrix& w, const Xi& xi, const Dataset& data,
                                const CouplingParams& params, const Eigen::VectorXd& u) {
    check_xi(xi, params, cfg.K);
    const WeightMatrix U = unflatten(u, cfg.K, cfg.d);
    const double ux2 = (data.X.topRows(params.n) * U.transpose()).squaredNorm();
    return posterior_hessian_quadform(cfg, w, data, params.n, params.beta, u) - params.rho * ux2;
}

double reverse_bracket_bound(const NetworkConfig& cfg, const CouplingParams& params, double rho) {
    return params.beta * params.C_n * (cfg.V / cfg.K) * cfg.activation.bounds().a2 - rho;
}

ScoreEstimate marginal_score(const Xi& xi, const std::vector<WeightMatrix>& inner_samples,
                             const CouplingParams& params, const Eigen::MatrixXd& X) {
    if (inner_samples.empty()) throw std::invalid_argument("marginal_score: no inner samples");
    const Eigen::Index S = static_cast<Eigen::Index>(inner_samples.size());
    Eigen::MatrixXd rows(S, xi.size());
    for (Eigen::Index s = 0; s < S; ++s) rows.row(s) = stacked(coupling_mean(inner_samples[static_cast<std::size_t>(s)], X, params.n)).transpose();
    const Eigen::VectorXd mean = rows.colwise().mean().transpose();
    ScoreEstimate out;
    out.score = params.rho * (mean - stacked(xi));
    out.se = Eigen::VectorXd::Zero(xi.size());
    if (S > 1) {
        const Eigen::MatrixXd centered = rows.rowwise() - mean.transpose();
        const Eigen::VectorXd var = centered.colwise().squaredNorm().transpose() / static_cast<double>(S - 1);
        out.se = params.rho * (var / static_cast<double>(S)).cwiseSqrt();
    }
    return out;
}

Eigen::VectorXd marginal_score_exact(const Xi& xi, const WeightMatrix& conditional_mean, const CouplingParams& params,
                                     const Eigen::MatrixXd& X) {
    return params.rho * (stacked(coupling_mean(conditional_mean, X, params.n)) - stacked(xi));
}

ConcavityEstimate marginal_concavity_estimate(const Xi& xi, const std::vector<WeightMatrix>& inner_samples,
                                              const CouplingParams& params, const Eigen::MatrixXd& X, int batches) {
    const Eigen::Index S = static_cast<Eigen::Index>(inner_samples.size());
    if (S < 10) throw std::invalid_argument("marginal_concavity_estimate: need at least 10 samples");
    Eigen::MatrixXd rows(S, xi.size());
    for (Eigen::Index s = 0; s < S; ++s) rows.row(s) = stacked(coupling_mean(inner_samples[static_cast<std::size_t>(s)], X, params.n)).transpose();
    ConcavityEstimate out;
    out.samples = static_cast<int>(S);
    out.value = params.rho * covariance_lambda_max(rows).value;
    batches = static_cast<int>(std::min<Eigen::Index>(batches, S / 5));
    if (batches >= 2) {
        const Eigen::Index len = S / batches;
        std::vector<double> vals;
        for (int b = 0; b < batches; ++b)
            vals.push_back(params.rho * covariance_lambda_max(rows.middleRows(b * len, len)).value);
        out.se = std::sqrt(sample_variance(vals) / static_cast<double>(batches));
    }
    return out;
}

double condition_H1(double delta) {
    return 2.0 / std::sqrt(2.0 * std::numbers::pi) * delta / (1.0 - delta) * std::sqrt(2.0 * std::log(2.0 / delta));
}

double condition_H2(const NetworkConfig& cfg, double beta, double C_n, double delta) {
    const double s = coupling_rho_tight(cfg, beta, C_n);
    return s * s / (2.0 * std::numbers::pi) * delta * delta / ((1.0 - delta) * (1.0 - delta));
}

ConditionReport check_logconcavity_conditions(const NetworkConfig& cfg, const Dataset& data, double beta,
                                              Eigen::Index N) {
    cfg.validate();
    ConditionReport r;
    r.bounds = cfg.activation.bounds();
    r.true_bounds = cfg.activation.true_bounds();
    const double a1 = r.bounds.a1;
    const double a2 = r.bounds.a2;
    r.C_N = compute_C_n(data, N, r.bounds.a0, cfg.V);
    r.delta_used = compute_delta(cfg.K, a2, beta, r.C_N, cfg.V);
    r.rho = coupling_rho(cfg, beta, r.C_N);
    const double root = std::sqrt(2.0 * a2 * kSqrt15);
    const double inv_sqrt_pi = 1.0 / std::sqrt(std::numbers::pi);
    r.A1 = 2.0 * a1 + 4.0 * kSqrt15 * a2;
    r.A2 = (2.0 + inv_sqrt_pi) * root;
    r.A2_alt = (1.0 + inv_sqrt_pi) * root;
    const double cv = r.C_N * cfg.V;
    r.A3 = 4.0 * std::sqrt(3.0 / (2.0 * std::exp(1.0))) * a2 * std::pow(cv, 1.5) * (r.A1 + r.A2 * std::sqrt(cv));
    r.H1 = condition_H1(r.delta_used);
    r.H2 = condition_H2(cfg, beta, r.C_N, r.delta_used);
    const double bn = beta * static_cast<double>(N);
    r.cond_K = cfg.K * std::log(2.0 * cfg.K * cfg.d / r.delta_used) <= bn;
    r.cond_Kd = static_cast<double>(cfg.K) * cfg.d >= r.A3 * bn * bn;
    r.cond_H = r.H1 <= 0.01 && r.H2 <= 0.1;
    r.beta_N_ok = bn >= 2.0;
    return r;
}

double z_gradient_bound(double rho, double sigma_tilde, double delta) {
    return rho * sigma_tilde / (1.0 - delta) * delta / std::sqrt(2.0 * std::numbers::pi);
}

double z_hessian_bound(double rho, double sigma_tilde, double delta) {
    const double t = rho * rho * sigma_tilde * sigma_tilde / std::sqrt(2.0 * std::numbers::pi) * delta / (1.0 - delta);
    return t * (2.0 * std::sqrt(2.0 * std::log(1.0 / delta)) + t);
}

ZCheck estimate_Z_and_check(const WeightMatrix& w, const Eigen::VectorXd& u, const CouplingParams& params,
                            const Eigen::MatrixXd& X, int mc_budget, Rng& rng, double fd_step) {
    if (mc_budget < 1000) throw std::invalid_argument("estimate_Z_and_check: MC budget below 1000 draws");
    const int K = static_cast<int>(w.rows());
    const int d = static_cast<int>(w.cols());
    if (u.size() != static_cast<Eigen::Index>(K) * d) throw std::invalid_argument("estimate_Z_and_check: bad direction");
    const WeightMatrix U = unflatten(u, K, d);
    const Eigen::Index n = params.n;
    const Xi mean0 = coupling_mean(w, X, n);
    const Xi meanp = coupling_mean(w + fd_step * U, X, n);
    const Xi meanm = coupling_mean(w - fd_step * U, X, n);
    const Xi xu = coupling_mean(U, X, n);
    const double sd = 1.0 / std::sqrt(params.rho);

    ZCheck r;
    r.sigma_tilde = std::sqrt(xu.squaredNorm() / params.rho);
    std::vector<double> hit(static_cast<std::size_t>(mc_budget));
    std::vector<double> diff(static_cast<std::size_t>(mc_budget));
    std::vector<double> lr(static_cast<std::size_t>(mc_budget));
    double hits_p = 0.0, hits_m = 0.0;
    Xi z(n, K);
    for (int s = 0; s < mc_budget; ++s) {
        for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = rng.normal();
        const double h0 = in_B(mean0 + sd * z, X, params) ? 1.0 : 0.0;
        const double hp = in_B(meanp + sd * z, X, params) ? 1.0 : 0.0;
        const double hm = in_B(meanm + sd * z, X, params) ? 1.0 : 0.0;
        hit[static_cast<std::size_t>(s)] = h0;
        diff[static_cast<std::size_t>(s)] = hp - hm;
        hits_p += hp;
        hits_m += hm;
        // d/dw of the Gaussian log density along u is sqrt(rho) <z, Xu>
        lr[static_cast<std::size_t>(s)] = h0 * std::sqrt(params.rho) * z.cwiseProduct(xu).sum();
    }
    const MeanSe p = mean_se(hit);
    r.prob_B = p.mean;
    r.prob_B_se = p.se;
    r.Z = std::log(p.mean);
    const double delta = params.delta;
    r.prob_B_floor = 1.0 - delta / std::sqrt(2.0 * std::log(2.0 * K * d / delta));
    r.prob_ok = r.prob_B >= r.prob_B_floor;

    const double pp = hits_p / mc_budget, pm = hits_m / mc_budget;
    r.grad_fd = (std::log(pp) - std::log(pm)) / (2.0 * fd_step);
    r.grad_fd_se = mean_se(diff).se / (2.0 * fd_step * p.mean);
    const MeanSe l = mean_se(lr);
    r.grad_lr = l.mean / p.mean;
    r.grad_lr_se = l.se / p.mean;

    r.grad_bound = z_gradient_bound(params.rho, r.sigma_tilde, delta);
    r.hess_bound = z_hessian_bound(params.rho, r.sigma_tilde, delta);
    r.grad_ok = std::abs(r.grad_fd) <= r.grad_bound + 3.0 * r.grad_fd_se &&
                std::abs(r.grad_lr) <= r.grad_bound + 3.0 * r.grad_lr_se;
    return r;
}

HolderBound holder_variance_bound(int ell, const NetworkConfig& cfg, const CouplingParams& params) {
    if (ell < 1) throw std::invalid_argument("holder_variance_bound: ell must be >= 1");
    const DerivativeBounds b = cfg.activation.bounds();
    const double n = static_cast<double>(params.n);
    const double A1 = 2.0 * b.a1 + 4.0 * kSqrt15 * b.a2;
    const double A2 = (2.0 + 1.0 / std::sqrt(std::numbers::pi)) * std::sqrt(2.0 * b.a2 * kSqrt15);
    const double cvbn = params.C_n * cfg.V * params.beta * n;
    const double log_term = std::log(2.0 * cfg.K * cfg.d / params.delta);
    // numerator of the gap; the gap at ell is this over ell
    const double top = A1 * cvbn + A2 * std::sqrt(cvbn) * std::sqrt(cfg.K * log_term);
    auto at = [&](double l) { return 4.0 * l * n / (std::sqrt(std::exp(1.0)) * cfg.d) * std::exp(top / l); };

    HolderBound h;
    h.ell = ell;
    h.gap = top / ell;
    h.bound = at(ell);
    h.ell_star = top;
    h.ell_star_int = std::max(1, static_cast<int>(std::lround(top)));
    h.bound_at_ell_star = at(h.ell_star_int);
    h.bound_floor = at(std::max(1.0, std::floor(top)));
    h.bound_ceil = at(std::max(1.0, std::ceil(top)));
    return h;
}

}  // namespace lccnet

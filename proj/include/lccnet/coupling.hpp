#pragma once

#include "lccnet/network.hpp"
#include "lccnet/rng.hpp"

#include <Eigen/Dense>

#include <vector>

namespace lccnet {

/// Auxiliary matrix xi, n x K (column k pairs with neuron k). Column-major, so
/// the flattened vector stacks X w_1, ..., X w_K.
using Xi = Eigen::MatrixXd;

struct CouplingParams {
    Eigen::Index n = 0;
    double beta = 1.0;
    double C_n = 1.0;
    double rho = 1.0;
    double delta = 1.0 / 300.0;
    double b_threshold = 0.0;
};

double compute_C_n(const Dataset& data, Eigen::Index n, double a0, double V);
double compute_delta(int K, double a2, double beta, double C_N, double V);

/// sqrt(3/2) a2 beta C_n V / K
double coupling_rho(const NetworkConfig& cfg, double beta, double C_n);
/// a2 beta C_n V / K, the smaller choice under which the curvature bracket can reach 0
double coupling_rho_tight(const NetworkConfig& cfg, double beta, double C_n);

/// Builds the parameters for the first n points. delta <= 0 selects compute_delta with C_n.
CouplingParams make_coupling_params(const NetworkConfig& cfg, const Dataset& data, Eigen::Index n, double beta,
                                    double delta = 0.0);

/// max_{j,k} |sum_i x_ij xi_ik| over the first n rows of X.
double b_statistic(const Xi& xi, const Eigen::MatrixXd& X, const CouplingParams& params);
bool in_B(const Xi& xi, const Eigen::MatrixXd& X, const CouplingParams& params);

/// Stacked means X w_k as an n x K matrix.
Xi coupling_mean(const WeightMatrix& w, const Eigen::MatrixXd& X, Eigen::Index n);

struct XiDraw {
    Xi xi;
    int rejections = 0;
};
/// Exact draw from the forward coupling restricted to B, by rejection.
XiDraw sample_xi_given_w(const WeightMatrix& w, const Eigen::MatrixXd& X, const CouplingParams& params, Rng& rng,
                         int max_attempts = 1000);

/// -beta l_n(w) - (rho/2) |xi - Xw|^2, with Z(w) dropped.
double reverse_logdensity_unnorm(const NetworkConfig& cfg, const WeightMatrix& w, const Xi& xi, const Dataset& data,
                                 const CouplingParams& params, const SupportTest& support = {});
Eigen::VectorXd reverse_score(const NetworkConfig& cfg, const WeightMatrix& w, const Xi& xi, const Dataset& data,
                              const CouplingParams& params);
double reverse_hessian_quadform(const NetworkConfig& cfg, const WeightMatrix& w, const Xi& xi, const Dataset& data,
                                const CouplingParams& params, const Eigen::VectorXd& u);
/// Largest possible curvature bracket beta |res| |c_k| a2 - rho, at |res| = C_n.
double reverse_bracket_bound(const NetworkConfig& cfg, const CouplingParams& params, double rho);

struct ScoreEstimate {
    Eigen::VectorXd score;  ///< length nK, stacked by neuron
    Eigen::VectorXd se;
};
/// rho (-xi + X E[w | xi]) with the sample mean standing in for the expectation.
ScoreEstimate marginal_score(const Xi& xi, const std::vector<WeightMatrix>& inner_samples,
                             const CouplingParams& params, const Eigen::MatrixXd& X);
/// Same with an exact conditional mean.
Eigen::VectorXd marginal_score_exact(const Xi& xi, const WeightMatrix& conditional_mean, const CouplingParams& params,
                                     const Eigen::MatrixXd& X);

struct ConcavityEstimate {
    double value = 0.0;  ///< rho * lambda_max(Cov[stacked Xw])
    double se = 0.0;     ///< batch spread of the same statistic
    int samples = 0;
};
ConcavityEstimate marginal_concavity_estimate(const Xi& xi, const std::vector<WeightMatrix>& inner_samples,
                                              const CouplingParams& params, const Eigen::MatrixXd& X, int batches = 10);

struct ConditionReport {
    DerivativeBounds bounds;       ///< clamped values used in every formula
    DerivativeBounds true_bounds;  ///< analytic values of the activation
    double C_N = 0.0;
    double delta_used = 0.0;
    double rho = 0.0;
    double A1 = 0.0;
    double A2 = 0.0;           ///< (2 + 1/sqrt(pi)) sqrt(2 a2 sqrt(3/2))
    double A2_alt = 0.0;       ///< (1 + 1/sqrt(pi)) sqrt(2 a2 sqrt(3/2)), alternative constant
    double A3 = 0.0;
    double H1 = 0.0;
    double H2 = 0.0;
    bool cond_K = false;       ///< K ln(2Kd/delta) <= beta N
    bool cond_Kd = false;      ///< K d >= A3 (beta N)^2
    bool cond_H = false;       ///< H1 <= 1/100 and H2 <= 1/10
    bool beta_N_ok = false;    ///< beta N >= 2
};
ConditionReport check_logconcavity_conditions(const NetworkConfig& cfg, const Dataset& data, double beta,
                                              Eigen::Index N);
double condition_H1(double delta);
double condition_H2(const NetworkConfig& cfg, double beta, double C_n, double delta);

struct ZCheck {
    double prob_B = 0.0;
    double prob_B_se = 0.0;
    double Z = 0.0;             ///< ln P(xi in B | w)
    double prob_B_floor = 0.0;  ///< 1 - delta / sqrt(2 ln(2Kd/delta))
    double sigma_tilde = 0.0;
    double grad_fd = 0.0;       ///< central difference of Z along u, common random numbers
    double grad_fd_se = 0.0;
    double grad_lr = 0.0;       ///< likelihood-ratio estimate of the same derivative
    double grad_lr_se = 0.0;
    double grad_bound = 0.0;
    double hess_bound = 0.0;
    bool prob_ok = false;
    bool grad_ok = false;
};
ZCheck estimate_Z_and_check(const WeightMatrix& w, const Eigen::VectorXd& u, const CouplingParams& params,
                            const Eigen::MatrixXd& X, int mc_budget, Rng& rng, double fd_step = 1e-3);
/// rho sigma delta / ((1 - delta) sqrt(2 pi))
double z_gradient_bound(double rho, double sigma_tilde, double delta);
double z_hessian_bound(double rho, double sigma_tilde, double delta);

struct HolderBound {
    int ell = 0;
    double gap = 0.0;           ///< exponent of the moment-generating correction at ell
    double bound = 0.0;         ///< prior_moment_bound(ell) * exp(gap)
    double ell_star = 0.0;      ///< continuous minimizer
    int ell_star_int = 0;       ///< nearest admissible integer
    double bound_at_ell_star = 0.0;
    double bound_floor = 0.0;
    double bound_ceil = 0.0;
};
HolderBound holder_variance_bound(int ell, const NetworkConfig& cfg, const CouplingParams& params);

}  // namespace lccnet

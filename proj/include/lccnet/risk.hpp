#pragma once

#include "lccnet/estimators.hpp"
#include "lccnet/network.hpp"
#include "lccnet/priors.hpp"
#include "lccnet/rng.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lccnet {

struct RegretRecord {
    Eigen::Index n = 0;  ///< 1-based observation index
    double r_square = 0.0;
    double r_rand = 0.0;
    double r_log = 0.0;
    double lambda = 0.0;  ///< b |eps_n| + b^2, b = (b_f + b_g) / 2
};

struct RegretLedger {
    std::vector<RegretRecord> records;
    double R_square = 0.0;
    double R_rand = 0.0;
    double R_log = 0.0;
    double Lambda2 = 0.0;  ///< mean of lambda^2
};

/// Snapshot n-1 predicts (x_n, y_n). `g` holds the competitor at each x_n and
/// `g_bound` bounds |g|.
RegretLedger regret_ledger(std::span<const PosteriorSnapshot> snaps, const NetworkConfig& cfg, const Dataset& data,
                           const Eigen::VectorXd& g, double beta, double g_bound);
/// Columns n, r_square, r_rand, r_log, lambda and running averages of each.
void write_ledger_csv(std::ostream& os, const RegretLedger& ledger, const std::string& config_hash = "");

/// -(1/(beta N)) log E_P0[exp(-beta l_N)] - (1/(2N)) sum (y - g)^2, from an exact table at n = N.
double log_regret_closed_form(const PosteriorSnapshot& final_snapshot, const Dataset& data, const Eigen::VectorXd& g);

struct TelescopeResult {
    std::vector<double> log_Z;     ///< n = 0..N, Gaussian-normalized Bayes factors
    std::vector<double> log_pred;  ///< n = 1..N, log p_{n-1}(y_n | x_n)
    double residual = 0.0;         ///< |sum log_pred - (log Z_N - log Z_0)|
};
TelescopeResult bayes_factor_telescope(const NetworkConfig& cfg, std::shared_ptr<const ProductGrid> grid,
                                       const Dataset& data, Eigen::Index N, double beta);

/// -log P0(A) / (beta N) + max_{w in A} l_N(w) / N
double resolvability_bound(double prior_log_mass, double max_loss, double beta, Eigen::Index N);

enum class BoundKind { LogRegret, SquareRegret, Msr, Kl, M2Msr };
std::string bound_kind_name(BoundKind kind);
BoundKind parse_bound_kind(const std::string& name);
std::vector<BoundKind> all_bound_kinds();

struct BoundInputs {
    double a0 = 1.0, a1 = 1.0, a2 = 1.0;
    double V = 1.0;
    double b = 1.0;      ///< sup |g|
    double sigma = 1.0;  ///< conditional SD bound
    double C_N = 2.0;
    int d = 2;
    double N = 100.0;
    double M = 1.0;  ///< continuous relaxations allowed
    double K = 1.0;
    double beta = 1.0;

    void validate() const;
};

struct ResidualTerms {
    /// per-step y_n - h(x_n); when absent |eps_tilde| is replaced by C_N
    std::optional<std::vector<double>> eps_tilde;
    double half_mean_excess = 0.0;  ///< (1/(2N)) sum (eps_tilde^2 - eps^2)
    double projection_gap = 0.0;    ///< ||g - g_tilde||^2
};

struct BoundBreakdown {
    BoundKind kind = BoundKind::SquareRegret;
    double prior_mass = 0.0;
    double width = 0.0;
    double grid = 0.0;
    double beta_term = 0.0;
    double residual = 0.0;
    double total = 0.0;
    bool non_odd = false;
    std::vector<std::string> warnings;
};

/// With non_odd the inputs are rewritten to K -> 2K, V -> 2V before evaluation.
BoundBreakdown bound_calculator(BoundKind kind, const BoundInputs& inputs, const ResidualTerms& residual = {},
                                bool non_odd = false);

struct OptimalHyperparams {
    double beta = 0.0;  ///< fixed input for log_regret and kl
    double K = 0.0;
    double M = 0.0;
    int K_int = 1;
    int M_int = 1;
    double bound_continuous = 0.0;
    double bound_integer = 0.0;
    double closed_form = 0.0;  ///< simplified closed-form total, residual terms excluded
};
OptimalHyperparams optimal_hyperparams(BoundKind kind, const BoundInputs& inputs);

/// Largest |theta df/dtheta| / f over the free parameters at the continuous optimum.
double stationarity_residual(BoundKind kind, const BoundInputs& inputs, const OptimalHyperparams& opt);

/// Target in the hull: V sum_l coef_l psi(x . w_l), sum |coef_l| = 1.
struct HullFunction {
    WeightMatrix neurons;
    Eigen::VectorXd coef;
    double V = 1.0;

    Eigen::VectorXd values(const Activation& act, const Eigen::MatrixXd& X) const;
};

struct WitnessResult {
    WeightMatrix weights;      ///< best discrete inner weights
    std::vector<int> signs;    ///< outer signs paired with `weights`
    double best_regret = 0.0;  ///< sum (y - f)^2 - (y - h)^2
    double mean_regret = 0.0;
    double mean_regret_se = 0.0;
    double mean_distance = 0.0;  ///< sum (h - f)^2
    double mean_distance_se = 0.0;
    double discretization_regret_bound = 0.0;
    double discretization_distance_bound = 0.0;
    int trials = 0;
};
/// Repeats the randomized construction: K neuron draws by |coef|, then discretize_weights.
WitnessResult approximation_witness(const HullFunction& h, const NetworkConfig& cfg, const Dataset& data, int M,
                                    int trials, Rng& rng);
double discretization_regret_bound(const DerivativeBounds& bd, double V, double C_N, Eigen::Index N, double K, double M);
double discretization_distance_bound(const DerivativeBounds& bd, double V, Eigen::Index N, double K, double M);

class ProjectionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct HullProjection {
    Eigen::VectorXd values;  ///< projection at the quadrature points
    Eigen::VectorXd coef;    ///< signed weights on the dictionary columns, sum |coef| <= 1
    double gap = 0.0;        ///< final Frank-Wolfe gap of ||target - v||^2
    int iterations = 0;
};
/// Least squares over the convex hull of +-dictionary columns under the weighted
/// norm sum_i q_i v_i^2 (fully corrective Frank-Wolfe, Wolfe min-norm point form).
HullProjection hull_projection(const Eigen::MatrixXd& dictionary, const Eigen::VectorXd& target,
                               const Eigen::VectorXd& quad_weights, int max_iter = 10000, double gap_tol = 1e-8);

/// Columns V psi(X w_l) for each neuron row.
Eigen::MatrixXd neuron_dictionary(const Activation& act, double V, const std::vector<Eigen::VectorXd>& neurons,
                                  const Eigen::MatrixXd& X);

struct PythagoreanCheck {
    double lhs = 0.0;  ///< ||g - g_tilde||^2 + ||g_tilde - g_hat||^2
    double rhs = 0.0;  ///< ||g - g_hat||^2
    bool holds = false;              ///< lhs <= rhs + gap + 1e-12
    bool holds_uncertified = false;  ///< lhs <= rhs + 1e-12
};
PythagoreanCheck pythagorean_check(const Eigen::VectorXd& g, const Eigen::VectorXd& g_tilde,
                                   const Eigen::VectorXd& g_hat, const Eigen::VectorXd& quad_weights,
                                   double projection_gap = 0.0);

}  // namespace lccnet

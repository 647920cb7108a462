#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace lccnet {

/// Inner weights, one row per neuron (K x d). Row-major so that the flattened
/// Kd-vector is the concatenation of the neuron blocks.
using WeightMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct DerivativeBounds {
    double a0 = 1.0;  ///< sup |psi| on [-1,1]
    double a1 = 1.0;  ///< sup |psi'|
    double a2 = 1.0;  ///< sup |psi''|
};

enum class ActivationKind { TanhScaled, SquaredRelu };

/// psi(z) = a tanh(c z)  or  psi(z) = a max(z,0)^2.
class Activation {
public:
    static Activation tanh_scaled(double a = 1.0, double c = 1.0);
    static Activation squared_relu(double a = 1.0);

    ActivationKind kind() const { return kind_; }
    double a() const { return a_; }
    double c() const { return c_; }
    bool odd_symmetric() const { return kind_ == ActivationKind::TanhScaled; }
    std::string name() const;

    double value(double z) const;
    double d1(double z) const;
    double d2(double z) const;

    /// Analytic sup-norms of psi, psi', psi'' over |z| <= 1.
    DerivativeBounds true_bounds() const { return true_; }
    /// The same values clamped up to 1; these feed every bound formula.
    DerivativeBounds bounds() const;

private:
    Activation(ActivationKind kind, double a, double c);

    ActivationKind kind_;
    double a_;
    double c_;
    DerivativeBounds true_;
};

struct NetworkConfig {
    int K = 1;
    int d = 2;
    double V = 1.0;
    std::vector<int> signs;  ///< length K, entries +1/-1
    Activation activation = Activation::tanh_scaled();

    /// All-positive signs for odd activations, first half +1 / second half -1 otherwise.
    static NetworkConfig make(int K, int d, double V, Activation act);

    double outer_weight(int k) const { return signs[static_cast<std::size_t>(k)] * V / K; }
    void validate() const;
};

struct Dataset {
    Eigen::MatrixXd X;  ///< N x d, entries in [-1,1], first column 1
    Eigen::VectorXd y;

    Eigen::Index N() const { return X.rows(); }
    Eigen::Index d() const { return X.cols(); }
    /// First n rows as a new dataset.
    Dataset prefix(Eigen::Index n) const;
    void validate() const;
};

/// True when every row has l1 norm at most 1 (+ tol).
bool in_l1_balls(const WeightMatrix& w, double tol = 0.0);

using SupportTest = std::function<bool(const WeightMatrix&)>;

double eval_network(const NetworkConfig& cfg, const WeightMatrix& w, const Eigen::Ref<const Eigen::VectorXd>& x);
/// f_w at the first n rows of X.
Eigen::VectorXd network_outputs(const NetworkConfig& cfg, const WeightMatrix& w, const Eigen::MatrixXd& X,
                                Eigen::Index n);
/// y_i - f_w(x_i), zero-based i.
double residual(const NetworkConfig& cfg, const WeightMatrix& w, const Dataset& data, Eigen::Index i);
/// Half the sum of squared residuals over the first n points.
double loss(const NetworkConfig& cfg, const WeightMatrix& w, const Dataset& data, Eigen::Index n);
/// -beta * loss; throws std::domain_error outside the support.
double log_posterior_unnorm(const NetworkConfig& cfg, const WeightMatrix& w, const Dataset& data, Eigen::Index n,
                            double beta, const SupportTest& support = {});
/// Gradient of -beta * loss, flattened neuron by neuron.
Eigen::VectorXd posterior_score(const NetworkConfig& cfg, const WeightMatrix& w, const Dataset& data, Eigen::Index n,
                                double beta);
/// u^T H u for the Hessian of -beta * loss.
double posterior_hessian_quadform(const NetworkConfig& cfg, const WeightMatrix& w, const Dataset& data,
                                  Eigen::Index n, double beta, const Eigen::VectorXd& u);

void check_shapes(const NetworkConfig& cfg, const WeightMatrix& w);
WeightMatrix unflatten(const Eigen::VectorXd& v, int K, int d);
Eigen::VectorXd flatten(const WeightMatrix& w);

}  // namespace lccnet

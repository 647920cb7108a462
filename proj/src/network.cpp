#include "lccnet/network.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lccnet {

namespace {

// max over t in [0, tanh(c)] of 2t(1 - t^2); the unconstrained max is at t = 1/sqrt(3)
double tanh_curvature_sup(double c) {
    const double tmax = std::tanh(c);
    const double t = std::min(tmax, 1.0 / std::sqrt(3.0));
    return 2.0 * t * (1.0 - t * t);
}

}  // namespace

Activation::Activation(ActivationKind kind, double a, double c) : kind_(kind), a_(a), c_(c) {
    if (!(a > 0.0) || !(c > 0.0)) throw std::invalid_argument("activation parameters must be positive");
    if (kind == ActivationKind::TanhScaled) {
        true_ = {a * std::tanh(c), a * c, a * c * c * tanh_curvature_sup(c)};
    } else {
        true_ = {a, 2.0 * a, 2.0 * a};
    }
}

Activation Activation::tanh_scaled(double a, double c) { return Activation(ActivationKind::TanhScaled, a, c); }

Activation Activation::squared_relu(double a) { return Activation(ActivationKind::SquaredRelu, a, 1.0); }

std::string Activation::name() const { return kind_ == ActivationKind::TanhScaled ? "tanh" : "squared_relu"; }

double Activation::value(double z) const {
    if (kind_ == ActivationKind::TanhScaled) return a_ * std::tanh(c_ * z);
    return z > 0.0 ? a_ * z * z : 0.0;
}

double Activation::d1(double z) const {
    if (kind_ == ActivationKind::TanhScaled) {
        const double t = std::tanh(c_ * z);
        return a_ * c_ * (1.0 - t * t);
    }
    return z > 0.0 ? 2.0 * a_ * z : 0.0;
}

double Activation::d2(double z) const {
    if (kind_ == ActivationKind::TanhScaled) {
        const double t = std::tanh(c_ * z);
        return -2.0 * a_ * c_ * c_ * t * (1.0 - t * t);
    }
    return z > 0.0 ? 2.0 * a_ : 0.0;
}

DerivativeBounds Activation::bounds() const {
    return {std::max(true_.a0, 1.0), std::max(true_.a1, 1.0), std::max(true_.a2, 1.0)};
}

NetworkConfig NetworkConfig::make(int K, int d, double V, Activation act) {
    NetworkConfig cfg;
    cfg.K = K;
    cfg.d = d;
    cfg.V = V;
    cfg.activation = act;
    cfg.signs.assign(static_cast<std::size_t>(std::max(K, 0)), 1);
    if (!act.odd_symmetric())
        for (int k = K / 2; k < K; ++k) cfg.signs[static_cast<std::size_t>(k)] = -1;
    return cfg;
}

void NetworkConfig::validate() const {
    if (K < 1) throw std::invalid_argument("network: K must be >= 1");
    if (d < 1) throw std::invalid_argument("network: d must be >= 1");
    if (!(V > 0.0)) throw std::invalid_argument("network: V must be positive");
    if (signs.size() != static_cast<std::size_t>(K)) throw std::invalid_argument("network: need K signs");
    for (int s : signs)
        if (s != 1 && s != -1) throw std::invalid_argument("network: signs must be +1 or -1");
    if (activation.odd_symmetric())
        for (int s : signs)
            if (s != 1) throw std::invalid_argument("network: odd activation requires all signs +1");
}

Dataset Dataset::prefix(Eigen::Index n) const {
    if (n < 0 || n > N()) throw std::out_of_range("dataset prefix out of range");
    return {X.topRows(n), y.head(n)};
}

void Dataset::validate() const {
    if (y.size() != X.rows()) throw std::invalid_argument("dataset: X and y lengths differ");
    if (X.rows() > 0 && X.cols() < 1) throw std::invalid_argument("dataset: no columns");
    if (X.size() > 0 && X.cwiseAbs().maxCoeff() > 1.0) throw std::invalid_argument("dataset: |x_ij| > 1");
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        if (X(i, 0) != 1.0) throw std::invalid_argument("dataset: first column must be identically 1");
    if (!y.allFinite()) throw std::invalid_argument("dataset: non-finite response");
}

bool in_l1_balls(const WeightMatrix& w, double tol) {
    for (Eigen::Index k = 0; k < w.rows(); ++k)
        if (!(w.row(k).lpNorm<1>() <= 1.0 + tol)) return false;
    return true;
}

void check_shapes(const NetworkConfig& cfg, const WeightMatrix& w) {
    if (w.rows() != cfg.K || w.cols() != cfg.d) throw std::invalid_argument("weight matrix shape does not match K x d");
}

WeightMatrix unflatten(const Eigen::VectorXd& v, int K, int d) {
    if (v.size() != static_cast<Eigen::Index>(K) * d) throw std::invalid_argument("unflatten: wrong length");
    return Eigen::Map<const WeightMatrix>(v.data(), K, d);
}

Eigen::VectorXd flatten(const WeightMatrix& w) { return Eigen::Map<const Eigen::VectorXd>(w.data(), w.size()); }

double eval_network(const NetworkConfig& cfg, const WeightMatrix& w, const Eigen::Ref<const Eigen::VectorXd>& x) {
    check_shapes(cfg, w);
    if (x.size() != cfg.d) throw std::invalid_argument("eval_network: x has wrong dimension");
    if (x.size() > 0 && x.cwiseAbs().maxCoeff() > 1.0) throw std::invalid_argument("eval_network: x outside the cube");
    double f = 0.0;
    for (int k = 0; k < cfg.K; ++k) f += cfg.outer_weight(k) * cfg.activation.value(w.row(k).dot(x));
    return f;
}

Eigen::VectorXd network_outputs(const NetworkConfig& cfg, const WeightMatrix& w, const Eigen::MatrixXd& X,
                                Eigen::Index n) {
    check_shapes(cfg, w);
    if (X.cols() != cfg.d) throw std::invalid_argument("data dimension does not match d");
    if (n < 0 || n > X.rows()) throw std::out_of_range("prefix length out of range");
    const Eigen::MatrixXd z = X.topRows(n) * w.transpose();
    Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
    for (int k = 0; k < cfg.K; ++k) {
        const double c = cfg.outer_weight(k);
        for (Eigen::Index i = 0; i < n; ++i) f[i] += c * cfg.activation.value(z(i, k));
    }
    return f;
}

double residual(const NetworkConfig& cfg, const WeightMatrix& w, const Dataset& data, Eigen::Index i) {
    if (i < 0 || i >= data.N()) throw std::out_of_range("residual: index out of range");
    return data.y[i] - eval_network(cfg, w, data.X.row(i).transpose());
}

double loss(const NetworkConfig& cfg, const WeightMatrix& w, const Dataset& data, Eigen::Index n) {
    const Eigen::VectorXd f = network_outputs(cfg, w, data.X, n);
    return 0.5 * (data.y.head(n) - f).squaredNorm();
}

double log_posterior_unnorm(const NetworkConfig& cfg, const WeightMatrix& w, const Dataset& data, Eigen::Index n,
                            double beta, const SupportTest& support) {
    const bool inside = support ? support(w) : in_l1_balls(w);
    if (!inside) throw std::domain_error("weights outside the prior support");
    return -beta * loss(cfg, w, data, n);
}

Eigen::VectorXd posterior_score(const NetworkConfig& cfg, const WeightMatrix& w, const Dataset& data, Eigen::Index n,
                                double beta) {
    check_shapes(cfg, w);
    const auto Xn = data.X.topRows(n);
    const Eigen::MatrixXd z = Xn * w.transpose();
    const Eigen::VectorXd res = data.y.head(n) - network_outputs(cfg, w, data.X, n);
    WeightMatrix g(cfg.K, cfg.d);
    for (int k = 0; k < cfg.K; ++k) {
        Eigen::VectorXd coef(n);
        for (Eigen::Index i = 0; i < n; ++i) coef[i] = res[i] * cfg.activation.d1(z(i, k));
        g.row(k) = beta * cfg.outer_weight(k) * (Xn.transpose() * coef).transpose();
    }
    return flatten(g);
}

double posterior_hessian_quadform(const NetworkConfig& cfg, const WeightMatrix& w, const Dataset& data,
                                  Eigen::Index n, double beta, const Eigen::VectorXd& u) {
    check_shapes(cfg, w);
    const WeightMatrix U = unflatten(u, cfg.K, cfg.d);
    const auto Xn = data.X.topRows(n);
    const Eigen::MatrixXd z = Xn * w.transpose();
    const Eigen::MatrixXd ux = Xn * U.transpose();
    const Eigen::VectorXd res = data.y.head(n) - network_outputs(cfg, w, data.X, n);
    double first = 0.0;
    double second = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        double lin = 0.0;
        double curv = 0.0;
        for (int k = 0; k < cfg.K; ++k) {
            const double c = cfg.outer_weight(k);
            lin += c * cfg.activation.d1(z(i, k)) * ux(i, k);
            curv += c * cfg.activation.d2(z(i, k)) * ux(i, k) * ux(i, k);
        }
        first += lin * lin;
        second += res[i] * curv;
    }
    return -beta * first + beta * second;
}

}  // namespace lccnet

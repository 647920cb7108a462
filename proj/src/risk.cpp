#include "lccnet/risk.hpp"

#include "lccnet/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace lccnet {

// ---------------------------------------------------------------- regrets

RegretLedger regret_ledger(std::span<const PosteriorSnapshot> snaps, const NetworkConfig& cfg, const Dataset& data,
                           const Eigen::VectorXd& g, double beta, double g_bound) {
    const Eigen::Index N = g.size();
    if (!(beta > 0.0)) throw std::invalid_argument("regret_ledger: beta must be positive");
    if (snaps.size() != static_cast<std::size_t>(N) && snaps.size() != static_cast<std::size_t>(N + 1))
        throw std::invalid_argument("regret_ledger: need snapshots for n = 0..N-1");
    if (data.N() < N) throw std::invalid_argument("regret_ledger: fewer observations than competitor values");
    for (Eigen::Index n = 0; n < N; ++n)
        if (snaps[static_cast<std::size_t>(n)].n != n)
            throw std::invalid_argument("regret_ledger: snapshot order does not match n");

    const double b = 0.5 * (cfg.activation.bounds().a0 * cfg.V + g_bound);
    const double log_q_const = 0.5 * std::log(beta / (2.0 * std::numbers::pi));
    RegretLedger out;
    out.records.reserve(static_cast<std::size_t>(N));
    for (Eigen::Index n = 0; n < N; ++n) {
        const auto& snap = snaps[static_cast<std::size_t>(n)];
        const Eigen::VectorXd x = data.X.row(n).transpose();
        const double y = data.y[n];
        const double eg = y - g[n];
        const double mu = posterior_mean(snap, cfg, x);
        const double mse = snapshot_expect_output(snap, cfg, x, [y](double f) { return (y - f) * (y - f); });
        const double lp = log_predictive(snap, cfg, x, y, beta);
        RegretRecord r;
        r.n = n + 1;
        r.r_square = 0.5 * ((y - mu) * (y - mu) - eg * eg);
        r.r_rand = 0.5 * (mse - eg * eg);
        r.r_log = (-lp + log_q_const) / beta - 0.5 * eg * eg;
        r.lambda = b * std::abs(eg) + b * b;
        out.R_square += r.r_square;
        out.R_rand += r.r_rand;
        out.R_log += r.r_log;
        out.Lambda2 += r.lambda * r.lambda;
        out.records.push_back(r);
    }
    if (N > 0) {
        const double inv = 1.0 / static_cast<double>(N);
        out.R_square *= inv;
        out.R_rand *= inv;
        out.R_log *= inv;
        out.Lambda2 *= inv;
    }
    return out;
}

void write_ledger_csv(std::ostream& os, const RegretLedger& ledger, const std::string& config_hash) {
    const auto old_prec = os.precision(std::numeric_limits<double>::max_digits10);
    if (!config_hash.empty()) os << "# config_hash=" << config_hash << '\n';
    os << "n,r_square,r_rand,r_log,lambda,avg_r_square,avg_r_rand,avg_r_log,avg_lambda2\n";
    double s = 0, ra = 0, l = 0, lam = 0;
    for (std::size_t i = 0; i < ledger.records.size(); ++i) {
        const auto& r = ledger.records[i];
        s += r.r_square;
        ra += r.r_rand;
        l += r.r_log;
        lam += r.lambda * r.lambda;
        const double c = static_cast<double>(i + 1);
        os << r.n << ',' << r.r_square << ',' << r.r_rand << ',' << r.r_log << ',' << r.lambda << ',' << s / c << ','
           << ra / c << ',' << l / c << ',' << lam / c << '\n';
    }
    os.precision(old_prec);
}

double log_regret_closed_form(const PosteriorSnapshot& final_snapshot, const Dataset& data, const Eigen::VectorXd& g) {
    if (!final_snapshot.exact()) throw std::invalid_argument("log_regret_closed_form: needs an exact table");
    const Eigen::Index N = final_snapshot.n;
    if (N < 1 || g.size() < N || data.N() < N) throw std::invalid_argument("log_regret_closed_form: N out of range");
    const double beta = final_snapshot.beta;
    const double comp = (data.y.head(N) - g.head(N)).squaredNorm();
    return -final_snapshot.log_evidence / (beta * static_cast<double>(N)) - comp / (2.0 * static_cast<double>(N));
}

TelescopeResult bayes_factor_telescope(const NetworkConfig& cfg, std::shared_ptr<const ProductGrid> grid,
                                       const Dataset& data, Eigen::Index N, double beta) {
    if (!(beta > 0.0)) throw std::invalid_argument("bayes_factor_telescope: beta must be positive");
    const auto snaps = sequential_discrete_posteriors(cfg, std::move(grid), data, N, beta);
    TelescopeResult out;
    const double half_log = 0.5 * std::log(2.0 * std::numbers::pi / beta);
    for (Eigen::Index n = 0; n <= N; ++n)
        out.log_Z.push_back(snaps[static_cast<std::size_t>(n)].log_evidence - static_cast<double>(n) * half_log);
    double sum = 0.0;
    for (Eigen::Index n = 1; n <= N; ++n) {
        const double lp = log_predictive(snaps[static_cast<std::size_t>(n - 1)], cfg, data.X.row(n - 1).transpose(),
                                         data.y[n - 1], beta);
        out.log_pred.push_back(lp);
        sum += lp;
    }
    out.residual = std::abs(sum - (out.log_Z.back() - out.log_Z.front()));
    return out;
}

double resolvability_bound(double prior_log_mass, double max_loss, double beta, Eigen::Index N) {
    if (prior_log_mass > 0.0) throw std::invalid_argument("resolvability_bound: log prior mass must be <= 0");
    if (!(beta > 0.0) || N < 1) throw std::invalid_argument("resolvability_bound: need beta > 0 and N >= 1");
    const double n = static_cast<double>(N);
    return -prior_log_mass / (beta * n) + max_loss / n;
}

// ---------------------------------------------------------------- bound calculators

std::string bound_kind_name(BoundKind kind) {
    switch (kind) {
        case BoundKind::LogRegret: return "log_regret";
        case BoundKind::SquareRegret: return "square_regret";
        case BoundKind::Msr: return "msr";
        case BoundKind::Kl: return "kl";
        case BoundKind::M2Msr: return "m2_msr";
    }
    return "unknown";
}

BoundKind parse_bound_kind(const std::string& name) {
    for (auto k : all_bound_kinds())
        if (bound_kind_name(k) == name) return k;
    throw std::invalid_argument("unknown bound kind: " + name);
}

std::vector<BoundKind> all_bound_kinds() {
    return {BoundKind::LogRegret, BoundKind::SquareRegret, BoundKind::Msr, BoundKind::Kl, BoundKind::M2Msr};
}

void BoundInputs::validate() const {
    for (double v : {a0, a1, a2, V, b, sigma, C_N, N, M, K, beta})
        if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("bound inputs must be positive and finite");
    if (d < 2) throw std::invalid_argument("bound inputs: d must be >= 2");
}

namespace {

double log_grid_size(int d) { return std::log(2.0 * d + 1.0); }

// log(2d+1)/N for the regret kinds, log(2d+1)/(N+1) for the risk kinds
double rate(BoundKind kind, const BoundInputs& in) {
    const double denom = (kind == BoundKind::LogRegret || kind == BoundKind::SquareRegret) ? in.N : in.N + 1.0;
    return log_grid_size(in.d) / denom;
}

struct SquareShape {
    double h, B1, S;  // B1 plays the role of (C_N + h)^2 or (sigma + h)^2
};

SquareShape square_shape(BoundKind kind, const BoundInputs& in) {
    const double a0V = in.a0 * in.V;
    const double h = 0.5 * (a0V + in.b);
    if (kind == BoundKind::SquareRegret)
        return {h, (in.C_N + h) * (in.C_N + h), 0.5 * (in.a2 * in.V * in.C_N + in.a1 * in.a1 * in.V * in.V)};
    return {h, (in.sigma + h) * (in.sigma + h), 0.5 * (in.V * (a0V + in.b) * in.a2 + in.a1 * in.a1 * in.V * in.V)};
}

double kl_H(const BoundInputs& in) { return in.V * (in.a0 * in.V + in.b) * in.a2 + in.a1 * in.a1 * in.V * in.V; }

BoundInputs rewrite_non_odd(BoundInputs in) {
    in.K *= 2.0;
    in.V *= 2.0;
    return in;
}

}  // namespace

BoundBreakdown bound_calculator(BoundKind kind, const BoundInputs& raw, const ResidualTerms& residual, bool non_odd) {
    raw.validate();
    const BoundInputs in = non_odd ? rewrite_non_odd(raw) : raw;
    BoundBreakdown out;
    out.kind = kind;
    out.non_odd = non_odd;
    const double c = rate(kind, in);
    const double a0V = in.a0 * in.V;
    switch (kind) {
        case BoundKind::LogRegret:
        case BoundKind::SquareRegret: {
            out.prior_mass = in.M * in.K * c / in.beta;
            out.width = a0V * a0V / (2.0 * in.K);
            out.grid = (in.V * in.C_N * in.a2 + in.V * in.V * in.a1 * in.a1) / (2.0 * in.M);
            out.residual = residual.half_mean_excess;
            if (kind == BoundKind::SquareRegret) {
                const double h = 0.5 * (a0V + in.b);
                if (residual.eps_tilde) {
                    const auto& e = *residual.eps_tilde;
                    if (e.empty()) throw std::invalid_argument("bound_calculator: empty residual sequence");
                    double acc = 0.0;
                    for (double v : e) {
                        const double t = h * std::abs(v) + h * h;
                        acc += t * t;
                    }
                    out.beta_term = 2.0 * in.beta * acc / static_cast<double>(e.size());
                } else {
                    const double t = h * in.C_N + h * h;
                    out.beta_term = 2.0 * in.beta * t * t;
                }
            }
            break;
        }
        case BoundKind::Msr: {
            const double h = 0.5 * (a0V + in.b);
            out.prior_mass = in.M * in.K * c / in.beta;
            out.width = a0V * a0V / (2.0 * in.K);
            out.grid = (in.V * (a0V + in.b) * in.a2 + in.V * in.V * in.a1 * in.a1) / (2.0 * in.M);
            out.beta_term = 2.0 * in.beta * h * h * (in.sigma + h) * (in.sigma + h);
            out.residual = residual.projection_gap;
            break;
        }
        case BoundKind::Kl: {
            out.prior_mass = in.M * in.K * c;
            out.width = in.beta * a0V * a0V / (2.0 * in.K);
            out.grid = in.beta * kl_H(in) / (2.0 * in.M);
            out.residual = in.beta * residual.projection_gap;
            if (std::abs(in.beta * in.sigma * in.sigma - 1.0) > 1e-9)
                out.warnings.push_back("kl: beta differs from 1/sigma^2");
            break;
        }
        case BoundKind::M2Msr: {
            if (in.b > a0V * (1.0 + 1e-12))
                throw std::invalid_argument("m2_msr: the target must lie in the hull, so b <= a0 V");
            out.prior_mass = in.M * in.K * c / in.beta;
            out.width = a0V * a0V / (2.0 * in.K);
            out.grid = in.a2 * in.a2 * in.V * in.V / (8.0 * in.M * in.M);
            out.beta_term = 2.0 * in.beta * a0V * a0V * (in.sigma + a0V) * (in.sigma + a0V);
            break;
        }
    }
    out.total = out.prior_mass + out.width + out.grid + out.beta_term + out.residual;
    return out;
}

OptimalHyperparams optimal_hyperparams(BoundKind kind, const BoundInputs& in) {
    in.validate();
    OptimalHyperparams out;
    const double c = rate(kind, in);
    const double a0V = in.a0 * in.V;
    switch (kind) {
        case BoundKind::SquareRegret:
        case BoundKind::Msr: {
            const auto [h, B1, S] = square_shape(kind, in);
            const double g1 = std::sqrt(a0V) * std::pow(S, 0.25) / (2.0 * std::pow(h, 1.5) * std::pow(B1, 0.75));
            const double g2 = std::pow(a0V, 1.5) / (2.0 * std::sqrt(h) * std::pow(B1, 0.25) * std::pow(S, 0.25));
            const double g3 = std::pow(S, 0.75) / (std::sqrt(a0V) * std::sqrt(h) * std::pow(B1, 0.25));
            out.beta = g1 * std::pow(c, 0.25);
            out.K = g2 * std::pow(c, -0.25);
            out.M = g3 * std::pow(c, -0.25);
            out.closed_form = 4.0 * std::sqrt(a0V * h) * std::pow(B1 * S, 0.25) * std::pow(c, 0.25);
            break;
        }
        case BoundKind::LogRegret:
        case BoundKind::Kl: {
            // alpha M K + A / K + B / M with the gain held fixed
            double alpha, A, B;
            if (kind == BoundKind::LogRegret) {
                alpha = c / in.beta;
                A = 0.5 * a0V * a0V;
                B = 0.5 * (in.V * in.C_N * in.a2 + in.V * in.V * in.a1 * in.a1);
            } else {
                alpha = c;
                A = 0.5 * in.beta * a0V * a0V;
                B = 0.5 * in.beta * kl_H(in);
            }
            out.beta = in.beta;
            out.K = std::cbrt(A * A / (alpha * B));
            out.M = std::cbrt(B * B / (alpha * A));
            out.closed_form = 3.0 * std::cbrt(alpha * A * B);
            break;
        }
        case BoundKind::M2Msr: {
            out.M = std::pow(c, -1.0 / 7.0);
            out.K = std::pow(c, -2.0 / 7.0);
            out.beta = std::pow(c, 2.0 / 7.0);
            const double s = in.sigma + a0V;
            out.closed_form = std::pow(c, 2.0 / 7.0) * (1.0 + 0.5 * a0V * a0V + in.a2 * in.a2 * in.V * in.V / 8.0 +
                                                        2.0 * a0V * a0V * s * s);
            break;
        }
    }
    BoundInputs at = in;
    if (kind == BoundKind::M2Msr) at.b = std::min(at.b, a0V);
    at.beta = out.beta;
    at.K = out.K;
    at.M = out.M;
    out.bound_continuous = bound_calculator(kind, at).total;
    out.K_int = std::max(1, static_cast<int>(std::lround(out.K)));
    out.M_int = std::max(1, static_cast<int>(std::lround(out.M)));
    at.K = out.K_int;
    at.M = out.M_int;
    out.bound_integer = bound_calculator(kind, at).total;
    return out;
}

double stationarity_residual(BoundKind kind, const BoundInputs& in, const OptimalHyperparams& opt) {
    if (kind == BoundKind::M2Msr) throw std::invalid_argument("stationarity_residual: the m2 choice is not a stationary point");
    BoundInputs at = in;
    at.beta = opt.beta;
    at.K = opt.K;
    at.M = opt.M;
    const double f0 = bound_calculator(kind, at).total;
    constexpr double h = 1e-5;
    auto probe = [&](double BoundInputs::*field) {
        BoundInputs up = at, dn = at;
        up.*field *= std::exp(h);
        dn.*field *= std::exp(-h);
        return std::abs(bound_calculator(kind, up).total - bound_calculator(kind, dn).total) / (2.0 * h * f0);
    };
    double worst = std::max(probe(&BoundInputs::K), probe(&BoundInputs::M));
    if (kind == BoundKind::SquareRegret || kind == BoundKind::Msr) worst = std::max(worst, probe(&BoundInputs::beta));
    return worst;
}

// ---------------------------------------------------------------- approximation witness

Eigen::VectorXd HullFunction::values(const Activation& act, const Eigen::MatrixXd& X) const {
    if (neurons.rows() != coef.size()) throw std::invalid_argument("HullFunction: coefficient count mismatch");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        for (Eigen::Index l = 0; l < neurons.rows(); ++l) out[i] += V * coef[l] * act.value(neurons.row(l).dot(X.row(i)));
    return out;
}

double discretization_regret_bound(const DerivativeBounds& bd, double V, double C_N, Eigen::Index N, double K, double M) {
    const double n = static_cast<double>(N);
    return n * bd.a0 * bd.a0 * V * V / K + n * (V * C_N * bd.a2 + V * V * bd.a1 * bd.a1) / M;
}

double discretization_distance_bound(const DerivativeBounds& bd, double V, Eigen::Index N, double K, double M) {
    const double n = static_cast<double>(N);
    return n * bd.a0 * bd.a0 * V * V / K + n * bd.a2 * bd.a2 * V * V / (4.0 * M * M);
}

WitnessResult approximation_witness(const HullFunction& h, const NetworkConfig& cfg, const Dataset& data, int M,
                                    int trials, Rng& rng) {
    if (trials < 1) throw std::invalid_argument("approximation_witness: need at least one trial");
    if (M < 1) throw std::invalid_argument("approximation_witness: M must be positive");
    const Eigen::Index L = h.coef.size();
    if (L < 1 || h.neurons.rows() != L || h.neurons.cols() != cfg.d)
        throw std::invalid_argument("approximation_witness: malformed hull function");
    if (std::abs(h.coef.cwiseAbs().sum() - 1.0) > 1e-9)
        throw std::invalid_argument("approximation_witness: |coef| must sum to 1");
    if (std::abs(h.V - cfg.V) > 1e-12 * std::max(1.0, cfg.V))
        throw std::invalid_argument("approximation_witness: hull scale differs from the network V");

    const Eigen::Index N = data.N();
    const Eigen::VectorXd hv = h.values(cfg.activation, data.X);
    const double base = (data.y - hv).squaredNorm();
    std::vector<double> cdf(static_cast<std::size_t>(L));
    double acc = 0.0;
    for (Eigen::Index l = 0; l < L; ++l) cdf[static_cast<std::size_t>(l)] = acc += std::abs(h.coef[l]);

    WitnessResult out;
    out.trials = trials;
    out.best_regret = std::numeric_limits<double>::infinity();
    std::vector<double> regrets, dists;
    regrets.reserve(static_cast<std::size_t>(trials));
    dists.reserve(static_cast<std::size_t>(trials));
    WeightMatrix cont(cfg.K, cfg.d);
    std::vector<int> signs(static_cast<std::size_t>(cfg.K));
    for (int t = 0; t < trials; ++t) {
        for (int k = 0; k < cfg.K; ++k) {
            const double u = rng.uniform() * acc;
            const auto l = std::min<Eigen::Index>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin(), L - 1);
            cont.row(k) = h.neurons.row(l);
            signs[static_cast<std::size_t>(k)] = h.coef[l] < 0.0 ? -1 : 1;
        }
        const WeightMatrix disc = discretize_weights(cont, M, rng);
        Eigen::VectorXd f = Eigen::VectorXd::Zero(N);
        for (Eigen::Index i = 0; i < N; ++i)
            for (int k = 0; k < cfg.K; ++k)
                f[i] += signs[static_cast<std::size_t>(k)] * cfg.V / cfg.K * cfg.activation.value(disc.row(k).dot(data.X.row(i)));
        const double regret = (data.y - f).squaredNorm() - base;
        regrets.push_back(regret);
        dists.push_back((hv - f).squaredNorm());
        if (regret < out.best_regret) {
            out.best_regret = regret;
            out.weights = disc;
            out.signs = signs;
        }
    }
    const auto rs = mean_se(regrets);
    const auto ds = mean_se(dists);
    out.mean_regret = rs.mean;
    out.mean_regret_se = rs.se;
    out.mean_distance = ds.mean;
    out.mean_distance_se = ds.se;
    const auto bd = cfg.activation.bounds();
    const double C_N = data.y.cwiseAbs().maxCoeff() + bd.a0 * cfg.V;
    out.discretization_regret_bound = discretization_regret_bound(bd, cfg.V, C_N, N, cfg.K, M);
    out.discretization_distance_bound = discretization_distance_bound(bd, cfg.V, N, cfg.K, M);
    return out;
}

// ---------------------------------------------------------------- hull projection

Eigen::MatrixXd neuron_dictionary(const Activation& act, double V, const std::vector<Eigen::VectorXd>& neurons,
                                  const Eigen::MatrixXd& X) {
    Eigen::MatrixXd D(X.rows(), static_cast<Eigen::Index>(neurons.size()));
    for (std::size_t l = 0; l < neurons.size(); ++l) {
        if (neurons[l].size() != X.cols()) throw std::invalid_argument("neuron_dictionary: dimension mismatch");
        for (Eigen::Index i = 0; i < X.rows(); ++i) D(i, static_cast<Eigen::Index>(l)) = V * act.value(X.row(i).dot(neurons[l]));
    }
    return D;
}

HullProjection hull_projection(const Eigen::MatrixXd& D, const Eigen::VectorXd& target, const Eigen::VectorXd& q,
                               int max_iter, double gap_tol) {
    const Eigen::Index n = D.rows(), L = D.cols();
    if (L < 1 || target.size() != n || q.size() != n) throw std::invalid_argument("hull_projection: shape mismatch");
    if ((q.array() < 0.0).any()) throw std::invalid_argument("hull_projection: negative quadrature weight");

    // Min-norm point of conv{P_a}, P_a = sqrt(q) (atom_a - target); atoms 0..L-1 are +D, L..2L-1 are -D.
    // Fully corrective Frank-Wolfe in the form of Wolfe's algorithm.
    const Eigen::ArrayXd sq = q.array().sqrt();
    Eigen::MatrixXd P(n, 2 * L);
    for (Eigen::Index a = 0; a < L; ++a) {
        P.col(a) = (sq * (D.col(a) - target).array()).matrix();
        P.col(a + L) = (sq * (-D.col(a) - target).array()).matrix();
    }

    Eigen::Index start = 0;
    P.colwise().squaredNorm().minCoeff(&start);
    std::vector<Eigen::Index> active{start};
    std::vector<double> lambda{1.0};
    Eigen::VectorXd z = P.col(start);

    auto affine_min = [&](const std::vector<Eigen::Index>& S) {
        const auto m = static_cast<Eigen::Index>(S.size());
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m + 1, m + 1);
        for (Eigen::Index i = 0; i < m; ++i) {
            for (Eigen::Index j = 0; j < m; ++j) A(i, j) = P.col(S[i]).dot(P.col(S[j]));
            A(i, m) = A(m, i) = 1.0;
        }
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + 1);
        rhs[m] = 1.0;
        return Eigen::VectorXd(A.completeOrthogonalDecomposition().solve(rhs).head(m));
    };

    HullProjection out;
    out.gap = std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iter; ++it) {
        const Eigen::VectorXd pz = P.transpose() * z;
        Eigen::Index s = 0;
        const double s_val = pz.minCoeff(&s);
        // FW gap of ||target - v||_q^2, gradient 2 q (v - target)
        out.gap = std::max(0.0, 2.0 * (z.squaredNorm() - s_val));
        out.iterations = it;
        if (out.gap <= gap_tol) break;
        if (std::find(active.begin(), active.end(), s) != active.end()) break;  // stalled at rounding level
        active.push_back(s);
        lambda.push_back(0.0);
        // minor cycles: move toward the affine minimizer, dropping atoms that hit zero weight
        for (;;) {
            const Eigen::VectorXd alpha = affine_min(active);
            if ((alpha.array() > 1e-14).all()) {
                lambda.assign(alpha.data(), alpha.data() + alpha.size());
                break;
            }
            double theta = 1.0;
            for (std::size_t i = 0; i < active.size(); ++i)
                if (alpha[static_cast<Eigen::Index>(i)] <= 1e-14)
                    theta = std::min(theta, lambda[i] / (lambda[i] - alpha[static_cast<Eigen::Index>(i)]));
            std::vector<Eigen::Index> keep_idx;
            std::vector<double> keep_w;
            for (std::size_t i = 0; i < active.size(); ++i) {
                const double w = theta * alpha[static_cast<Eigen::Index>(i)] + (1.0 - theta) * lambda[i];
                if (w > 1e-15) keep_idx.push_back(active[i]), keep_w.push_back(w);
            }
            if (keep_idx.empty()) throw ProjectionError("hull_projection: corral collapsed");
            const double total = std::accumulate(keep_w.begin(), keep_w.end(), 0.0);
            for (auto& w : keep_w) w /= total;
            active = std::move(keep_idx);
            lambda = std::move(keep_w);
            if (active.size() == 1) break;
        }
        z.setZero();
        for (std::size_t i = 0; i < active.size(); ++i) z += lambda[i] * P.col(active[i]);
    }
    if (!(out.gap <= gap_tol))
        throw ProjectionError("hull_projection: duality gap " + std::to_string(out.gap) + " above tolerance");

    Eigen::VectorXd lam = Eigen::VectorXd::Zero(2 * L);
    for (std::size_t i = 0; i < active.size(); ++i) lam[active[i]] += lambda[i];
    out.coef = lam.head(L) - lam.tail(L);
    out.values = D * out.coef;
    return out;
}

PythagoreanCheck pythagorean_check(const Eigen::VectorXd& g, const Eigen::VectorXd& g_tilde, const Eigen::VectorXd& g_hat,
                                   const Eigen::VectorXd& q, double projection_gap) {
    if (g.size() != g_tilde.size() || g.size() != g_hat.size() || g.size() != q.size())
        throw std::invalid_argument("pythagorean_check: size mismatch");
    auto sq = [&](const Eigen::VectorXd& u) { return (q.array() * u.array().square()).sum(); };
    PythagoreanCheck out;
    out.lhs = sq(g - g_tilde) + sq(g_tilde - g_hat);
    out.rhs = sq(g - g_hat);
    out.holds = out.lhs <= out.rhs + projection_gap + 1e-12;
    out.holds_uncertified = out.lhs <= out.rhs + 1e-12;
    return out;
}

}  // namespace lccnet

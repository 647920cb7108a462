#include "lccnet/samplers.hpp"

#include "lccnet/priors.hpp"
#include "lccnet/rng.hpp"
#include "lccnet/stats.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numbers>
#include <ostream>
#include <thread>

namespace lccnet {

namespace {

double log_proposal(const Eigen::VectorXd& to, const Eigen::VectorXd& from, const Eigen::VectorXd& score_from,
                    double eps) {
    const Eigen::VectorXd r = to - from - 0.5 * eps * eps * score_from;
    return -r.squaredNorm() / (2.0 * eps * eps);
}

/// Dual averaging on log step size (Hoffman and Gelman, 2014).
class DualAveraging {
public:
    DualAveraging(double eps0, double target) : mu_(std::log(10.0 * eps0)), target_(target), log_eps_bar_(std::log(eps0)) {}

    double update(double accept_prob) {
        ++m_;
        const double m = static_cast<double>(m_);
        hbar_ = (1.0 - 1.0 / (m + kT0)) * hbar_ + (target_ - accept_prob) / (m + kT0);
        const double log_eps = mu_ - std::sqrt(m) / kGamma * hbar_;
        const double w = std::pow(m, -kKappa);
        log_eps_bar_ = w * log_eps + (1.0 - w) * log_eps_bar_;
        return std::exp(log_eps);
    }
    double final_step() const { return std::exp(log_eps_bar_); }

private:
    static constexpr double kGamma = 0.05;
    static constexpr double kT0 = 10.0;
    static constexpr double kKappa = 0.75;
    double mu_;
    double target_;
    double hbar_ = 0.0;
    double log_eps_bar_;
    long m_ = 0;
};

void check_finite(const Eigen::VectorXd& v, const char* what) {
    if (!v.allFinite()) throw SamplerError(std::string("non-finite ") + what);
}

double min_ess(const std::vector<ChainSample>& samples) {
    if (samples.empty()) return 0.0;
    const Eigen::Index dim = samples.front().state.size();
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> trace(samples.size());
    for (Eigen::Index j = 0; j < dim; ++j) {
        for (std::size_t s = 0; s < samples.size(); ++s) trace[s] = samples[s].state[j];
        best = std::min(best, effective_sample_size(trace));
    }
    return std::isfinite(best) ? best : static_cast<double>(samples.size());
}

Eigen::VectorXd stacked(const Xi& m) { return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size()); }

}  // namespace

void ChainConfig::validate() const {
    if (!(step_size > 0.0)) throw std::invalid_argument("chain: step_size must be positive");
    if (iterations < 1) throw std::invalid_argument("chain: iterations must be positive");
    if (burn_in < 0 || burn_in >= iterations) throw std::invalid_argument("chain: need 0 <= burn_in < iterations");
    if (thinning < 1) throw std::invalid_argument("chain: thinning must be positive");
    if (!(target_accept > 0.0 && target_accept < 1.0)) throw std::invalid_argument("chain: target_accept in (0,1)");
}

ChainResult mala_chain(const TargetDensity& target, const ChainConfig& cfg, const Eigen::VectorXd& initial) {
    cfg.validate();
    if (initial.size() != target.dimension) throw std::invalid_argument("mala_chain: initial state has wrong dimension");
    if (target.support_test && !target.support_test(initial))
        throw std::invalid_argument("mala_chain: initial state outside the support");

    Eigen::VectorXd x = initial;
    double logp = target.log_density(x);
    Eigen::VectorXd grad = target.score(x);
    check_finite(grad, "score at the initial state");
    if (!std::isfinite(logp)) throw SamplerError("non-finite log density at the initial state");

    double eps = cfg.step_size;
    DualAveraging adapt(eps, cfg.target_accept);
    ChainResult out;
    ChainDiagnostics& diag = out.diagnostics;
    Rng rng(cfg.seed, cfg.chain_id);

    for (int t = 0; t < cfg.iterations; ++t) {
        rng.set_step(cfg.step_offset + static_cast<std::uint64_t>(t));
        const bool warm = t < cfg.burn_in;
        Eigen::VectorXd prop(x.size());
        for (Eigen::Index j = 0; j < x.size(); ++j) prop[j] = x[j] + 0.5 * eps * eps * grad[j] + eps * rng.normal();
        const double u = rng.uniform();

        double accept_prob = 0.0;
        bool accepted = false;
        if (target.support_test && !target.support_test(prop)) {
            ++diag.support_rejections;
        } else {
            const double logp_prop = target.log_density(prop);
            const Eigen::VectorXd grad_prop = target.score(prop);
            check_finite(grad_prop, "score");
            if (std::isnan(logp_prop)) throw SamplerError("NaN log density");
            const double log_ratio = logp_prop - logp + log_proposal(x, prop, grad_prop, eps) -
                                     log_proposal(prop, x, grad, eps);
            accept_prob = std::isnan(log_ratio) ? 0.0 : std::min(1.0, std::exp(log_ratio));
            if (u < accept_prob) {
                x = prop;
                logp = logp_prop;
                grad = grad_prop;
                accepted = true;
            }
        }

        if (warm) {
            if (cfg.adapt_step) {
                eps = adapt.update(accept_prob);
                if (t + 1 == cfg.burn_in) eps = adapt.final_step();
            }
            continue;
        }
        ++diag.proposals;
        if (accepted) ++diag.accepted;
        if ((t - cfg.burn_in) % cfg.thinning == 0) {
            out.samples.push_back({x, logp, t, static_cast<double>(diag.accepted) / static_cast<double>(diag.proposals)});
        }
    }
    diag.acceptance_rate = diag.proposals ? static_cast<double>(diag.accepted) / static_cast<double>(diag.proposals) : 0.0;
    diag.final_step_size = eps;
    diag.ess_estimate = min_ess(out.samples);
    out.final_state = x;
    return out;
}

void write_chain_jsonl(std::ostream& os, const ChainResult& chain, const std::string& config_hash) {
    for (const ChainSample& s : chain.samples) {
        nlohmann::json rec;
        rec["step"] = s.step;
        rec["log_density"] = s.log_density;
        rec["sample"] = std::vector<double>(s.state.data(), s.state.data() + s.state.size());
        rec["acceptance_rate"] = s.running_acceptance;
        rec["step_size"] = chain.diagnostics.final_step_size;
        if (!config_hash.empty()) rec["config_hash"] = config_hash;
        os << rec.dump() << '\n';
    }
}

TargetDensity reverse_conditional_target(const NetworkConfig& cfg, const Dataset& data, const CouplingParams& params,
                                         const Xi& xi) {
    const int K = cfg.K;
    const int d = cfg.d;
    TargetDensity t;
    t.dimension = static_cast<Eigen::Index>(K) * d;
    t.support_test = [K, d](const Eigen::VectorXd& v) { return in_l1_balls(unflatten(v, K, d)); };
    t.log_density = [&cfg, &data, &params, xi, K, d](const Eigen::VectorXd& v) {
        return reverse_logdensity_unnorm(cfg, unflatten(v, K, d), xi, data, params);
    };
    t.score = [&cfg, &data, &params, xi, K, d](const Eigen::VectorXd& v) {
        return reverse_score(cfg, unflatten(v, K, d), xi, data, params);
    };
    return t;
}

WeightChain sample_reverse_conditional(const NetworkConfig& cfg, const Dataset& data, const CouplingParams& params,
                                       const Xi& xi, const ChainConfig& chain_cfg,
                                       const std::optional<WeightMatrix>& initial) {
    if (!in_B(xi, data.X, params)) throw std::invalid_argument("sample_reverse_conditional: xi outside B");
    const WeightMatrix w0 = initial ? *initial : WeightMatrix::Zero(cfg.K, cfg.d);
    WeightChain out;
    out.chain = mala_chain(reverse_conditional_target(cfg, data, params, xi), chain_cfg, flatten(w0));
    out.samples.reserve(out.chain.samples.size());
    for (const ChainSample& s : out.chain.samples) out.samples.push_back(unflatten(s.state, cfg.K, cfg.d));
    return out;
}

namespace {

struct InnerBatch {
    std::vector<WeightMatrix> samples;
    WeightMatrix last;
    double step = 0.0;
    double acceptance = 0.0;
};

/// exponent of the importance weight p*(xi')/p*(xi) for a single inner draw w ~ p*(.|xi)
double tilt(const Eigen::VectorXd& xw, const Eigen::VectorXd& from, const Eigen::VectorXd& to, double rho) {
    return rho * (to - from).dot(xw) - 0.5 * rho * (to.squaredNorm() - from.squaredNorm());
}

}  // namespace

MarginalXiResult sample_marginal_xi(const NetworkConfig& cfg, const Dataset& data, const CouplingParams& params,
                                    const NestedConfig& nested) {
    const ChainConfig& oc = nested.outer;
    oc.validate();
    nested.inner.validate();
    const Eigen::Index n = params.n;
    const int K = cfg.K;

    auto run_inner = [&](const Xi& xi, const WeightMatrix& start, double step, int burn, std::uint64_t offset) {
        ChainConfig ic = nested.inner;
        ic.step_size = step;
        ic.burn_in = burn;
        ic.iterations = burn + (nested.inner.iterations - nested.inner.burn_in);
        ic.step_offset = offset;
        // adapting inside a short warm-started chain biases it; only the first chain tunes the step
        ic.adapt_step = ic.adapt_step && offset == 0;
        WeightChain wc;
        try {
            wc = sample_reverse_conditional(cfg, data, params, xi, ic, start);
        } catch (const SamplerError& e) {
            throw RetriableSamplerError(std::string("inner chain failed: ") + e.what());
        }
        InnerBatch b;
        b.samples = std::move(wc.samples);
        b.last = unflatten(wc.chain.final_state, cfg.K, cfg.d);
        b.step = wc.chain.diagnostics.final_step_size;
        b.acceptance = wc.chain.diagnostics.acceptance_rate;
        return b;
    };
    auto stacked_means = [&](const InnerBatch& b) {
        std::vector<Eigen::VectorXd> out;
        out.reserve(b.samples.size());
        for (const WeightMatrix& w : b.samples) out.push_back(stacked(coupling_mean(w, data.X, n)));
        return out;
    };
    const std::uint64_t inner_span = static_cast<std::uint64_t>(
        std::max(nested.initial_inner_burn_in, nested.inner.burn_in) + nested.inner.iterations);

    MarginalXiResult res;
    Xi xi = Xi::Zero(n, K);
    InnerBatch cur = run_inner(xi, WeightMatrix::Zero(cfg.K, cfg.d), nested.inner.step_size,
                               nested.initial_inner_burn_in, 0);
    ++res.inner_chains;
    double inner_acc_total = cur.acceptance;
    double inner_step = cur.step;
    ScoreEstimate cur_score = marginal_score(xi, cur.samples, params, data.X);
    std::vector<Eigen::VectorXd> cur_xw = stacked_means(cur);

    double eps = oc.step_size;
    DualAveraging adapt(eps, oc.target_accept);
    ChainDiagnostics& diag = res.diagnostics;
    Rng rng(oc.seed, oc.chain_id);
    const double rho = params.rho;

    for (int t = 0; t < oc.iterations; ++t) {
        rng.set_step(oc.step_offset + static_cast<std::uint64_t>(t));
        const bool warm = t < oc.burn_in;
        const Eigen::VectorXd x = stacked(xi);
        Eigen::VectorXd prop(x.size());
        for (Eigen::Index j = 0; j < x.size(); ++j)
            prop[j] = x[j] + 0.5 * eps * eps * cur_score.score[j] + eps * rng.normal();
        const double u = rng.uniform();
        const Xi xi_prop = Eigen::Map<const Xi>(prop.data(), n, K);

        double accept_prob = 0.0;
        bool accepted = false;
        if (!in_B(xi_prop, data.X, params)) {
            ++diag.support_rejections;
        } else {
            InnerBatch next;
            bool ok = false;
            for (int attempt = 0; attempt <= nested.max_retries && !ok; ++attempt) {
                try {
                    const std::uint64_t offset =
                        (static_cast<std::uint64_t>(t + 1) * (nested.max_retries + 1) + attempt) * inner_span;
                    next = run_inner(xi_prop, cur.last, inner_step, nested.inner.burn_in, offset);
                    ok = true;
                } catch (const RetriableSamplerError&) {
                    ++res.retries;
                    if (attempt == nested.max_retries) throw;
                }
            }
            ++res.inner_chains;
            inner_acc_total += next.acceptance;
            const ScoreEstimate next_score = marginal_score(xi_prop, next.samples, params, data.X);
            check_finite(next_score.score, "estimated marginal score");
            const std::vector<Eigen::VectorXd> next_xw = stacked_means(next);

            // coupled bridge estimate of log p*(xi') - log p*(xi) from both inner batches
            std::vector<double> fwd(cur_xw.size()), bwd(next_xw.size());
            for (std::size_t s = 0; s < cur_xw.size(); ++s) fwd[s] = tilt(cur_xw[s], x, prop, rho);
            for (std::size_t s = 0; s < next_xw.size(); ++s) bwd[s] = -tilt(next_xw[s], x, prop, rho);
            const double log_target_ratio = 0.5 * (log_mean_exp(fwd) - log_mean_exp(bwd));

            const double log_ratio = log_target_ratio + log_proposal(x, prop, next_score.score, eps) -
                                     log_proposal(prop, x, cur_score.score, eps);
            accept_prob = std::isnan(log_ratio) ? 0.0 : std::min(1.0, std::exp(log_ratio));
            if (u < accept_prob) {
                xi = xi_prop;
                cur = std::move(next);
                cur_score = next_score;
                cur_xw = next_xw;
                accepted = true;
            }
        }

        if (warm) {
            if (oc.adapt_step) {
                eps = adapt.update(accept_prob);
                if (t + 1 == oc.burn_in) eps = adapt.final_step();
            }
            continue;
        }
        ++diag.proposals;
        if (accepted) ++diag.accepted;
        if ((t - oc.burn_in) % oc.thinning == 0) {
            res.samples.push_back(xi);
            res.steps.push_back(t);
            res.inner_states.push_back(cur.last);
            res.score_se.push_back(cur_score.se.size() ? cur_score.se.maxCoeff() : 0.0);
        }
    }
    diag.acceptance_rate = diag.proposals ? static_cast<double>(diag.accepted) / static_cast<double>(diag.proposals) : 0.0;
    diag.final_step_size = eps;
    {
        std::vector<ChainSample> trace;
        trace.reserve(res.samples.size());
        for (const Xi& s : res.samples) trace.push_back({stacked(s), 0.0, 0, 0.0});
        diag.ess_estimate = min_ess(trace);
    }
    res.inner_acceptance = inner_acc_total / static_cast<double>(res.inner_chains);
    res.inner_step_size = inner_step;
    return res;
}

TwoStageResult two_stage_sample(const NetworkConfig& cfg, const Dataset& data, const CouplingParams& params,
                                const TwoStageBudgets& budgets) {
    if (budgets.draws_per_xi < 1) throw std::invalid_argument("two_stage_sample: draws_per_xi must be positive");
    budgets.final_chain.validate();
    const int retained = budgets.final_chain.iterations - budgets.final_chain.burn_in;
    const int available = (retained + budgets.final_chain.thinning - 1) / budgets.final_chain.thinning;
    if (available < budgets.draws_per_xi)
        throw std::invalid_argument("two_stage_sample: final chain retains fewer draws than draws_per_xi");

    TwoStageResult out;
    out.marginal = sample_marginal_xi(cfg, data, params, budgets.nested);
    const std::size_t R = out.marginal.samples.size();
    std::vector<std::vector<WeightMatrix>> per_xi(R);
    std::vector<double> acc(R, 0.0);
    std::vector<long> rej(R, 0);

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&]() {
        for (std::size_t r = next++; r < R; r = next++) {
            try {
                ChainConfig fc = budgets.final_chain;
                fc.chain_id = static_cast<std::uint32_t>(r);
                if (fc.adapt_step) {
                    fc.step_size = out.marginal.inner_step_size;
                    fc.adapt_step = false;
                }
                WeightChain wc = sample_reverse_conditional(cfg, data, params, out.marginal.samples[r], fc,
                                                            out.marginal.inner_states[r]);
                const std::size_t keep = static_cast<std::size_t>(budgets.draws_per_xi);
                per_xi[r].assign(wc.samples.end() - static_cast<std::ptrdiff_t>(keep), wc.samples.end());
                acc[r] = wc.chain.diagnostics.acceptance_rate;
                rej[r] = wc.chain.diagnostics.support_rejections;
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const int threads = std::max(1, budgets.threads);
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);

    for (std::size_t r = 0; r < R; ++r) {
        for (const WeightMatrix& w : per_xi[r]) {
            out.draws.push_back(w);
            out.xi_index.push_back(static_cast<int>(r));
        }
        out.final_acceptance += acc[r];
        out.final_support_rejections += rej[r];
    }
    if (R) out.final_acceptance /= static_cast<double>(R);
    return out;
}

// ---------------------------------------------------------------------------
// quadrature oracles

namespace {

/// Midpoints of `res` equal cells on [-1, 1].
Eigen::VectorXd midpoints(int res) {
    Eigen::VectorXd m(res);
    for (int i = 0; i < res; ++i) m[i] = -1.0 + (2.0 * i + 1.0) / res;
    return m;
}

/// Grid over one l1 ball: the interval for d = 1, the square rotated onto the
/// diamond for d = 2 (boundary-aligned cells), a masked cube for d = 3.
std::pair<std::vector<Eigen::VectorXd>, double> ball_grid(int d, int res) {
    const Eigen::VectorXd m = midpoints(res);
    const double h = 2.0 / res;
    std::vector<Eigen::VectorXd> pts;
    if (d == 1) {
        for (int i = 0; i < res; ++i) pts.push_back(Eigen::VectorXd::Constant(1, m[i]));
        return {pts, h};
    }
    if (d == 2) {
        for (int i = 0; i < res; ++i)
            for (int j = 0; j < res; ++j) {
                Eigen::VectorXd p(2);
                p << 0.5 * (m[i] + m[j]), 0.5 * (m[i] - m[j]);
                pts.push_back(p);
            }
        return {pts, 0.5 * h * h};  // |det| of the linear map is 1/2
    }
    for (int i = 0; i < res; ++i)
        for (int j = 0; j < res; ++j)
            for (int k = 0; k < res; ++k)
                if (std::abs(m[i]) + std::abs(m[j]) + std::abs(m[k]) <= 1.0) {
                    Eigen::VectorXd p(3);
                    p << m[i], m[j], m[k];
                    pts.push_back(p);
                }
    return {pts, h * h * h};
}

PosteriorQuadrature quadrature_at(const NetworkConfig& cfg, const Dataset& data, Eigen::Index n, double beta,
                                  int res) {
    const auto [row_pts, row_vol] = ball_grid(cfg.d, res);
    const std::size_t G = row_pts.size();
    std::size_t total = 1;
    for (int k = 0; k < cfg.K; ++k) total *= G;
    PosteriorQuadrature q;
    q.K = cfg.K;
    q.d = cfg.d;
    q.resolution = res;
    q.cell_volume = std::pow(row_vol, cfg.K);
    q.points.resize(static_cast<Eigen::Index>(total), cfg.K * cfg.d);
    Eigen::VectorXd logw(static_cast<Eigen::Index>(total));
    WeightMatrix w(cfg.K, cfg.d);
    for (std::size_t idx = 0; idx < total; ++idx) {
        std::size_t rest = idx;
        for (int k = 0; k < cfg.K; ++k) {
            w.row(k) = row_pts[rest % G].transpose();
            rest /= G;
        }
        q.points.row(static_cast<Eigen::Index>(idx)) = flatten(w).transpose();
        logw[static_cast<Eigen::Index>(idx)] = beta == 0.0 ? 0.0 : -beta * loss(cfg, w, data, n);
    }
    const double lse = log_sum_exp(logw);
    q.weights = (logw.array() - lse).exp();
    q.mean = q.points.transpose() * q.weights;
    return q;
}

}  // namespace

double PosteriorQuadrature::expect(const std::function<double(const WeightMatrix&)>& fn) const {
    double s = 0.0;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        const Eigen::VectorXd row = points.row(i).transpose();
        s += weights[i] * fn(unflatten(row, K, d));
    }
    return s;
}

double PosteriorQuadrature::mean_output(const NetworkConfig& cfg, const Eigen::VectorXd& x) const {
    return expect([&](const WeightMatrix& w) { return eval_network(cfg, w, x); });
}

double PosteriorQuadrature::cdf(double value) const {
    if (K * d != 1) throw std::invalid_argument("PosteriorQuadrature::cdf: only for a single coordinate");
    // piecewise-linear within each cell
    const double h = 2.0 / resolution;
    double c = 0.0;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        const double lo = points(i, 0) - 0.5 * h;
        if (value >= lo + h) {
            c += weights[i];
        } else if (value > lo) {
            c += weights[i] * (value - lo) / h;
        }
    }
    return std::clamp(c, 0.0, 1.0);
}

PosteriorQuadrature reference_posterior_quadrature(const NetworkConfig& cfg, const Dataset& data, Eigen::Index n,
                                                   double beta, int resolution, bool report_convergence) {
    cfg.validate();
    if (cfg.K * cfg.d > 3) throw std::invalid_argument("reference_posterior_quadrature: K*d must be at most 3");
    if (resolution < 2) throw std::invalid_argument("reference_posterior_quadrature: resolution too small");
    if (beta < 0.0) throw std::invalid_argument("reference_posterior_quadrature: beta must be nonnegative");
    PosteriorQuadrature q = quadrature_at(cfg, data, n, beta, resolution);
    if (report_convergence) {
        const PosteriorQuadrature coarse = quadrature_at(cfg, data, n, beta, std::max(2, resolution / 2));
        q.mean_change_on_refinement = (q.mean - coarse.mean).cwiseAbs().maxCoeff();
    }
    return q;
}

CouplingQuadrature::CouplingQuadrature(const NetworkConfig& cfg, const Dataset& data, const CouplingParams& params,
                                       int w_resolution)
    : cfg_(cfg), params_(params), n_(params.n) {
    if (cfg.K != 1 || cfg.d != 1) throw std::invalid_argument("CouplingQuadrature: requires K = 1 and d = 1");
    w_ = midpoints(w_resolution);
    h_ = 2.0 / w_resolution;
    log_post_.resize(w_resolution);
    log_pb_.resize(w_resolution);
    WeightMatrix w(1, 1);
    for (int i = 0; i < w_resolution; ++i) {
        w(0, 0) = w_[i];
        log_post_[i] = log_posterior_unnorm(cfg, w, data, n_, params.beta);
        log_pb_[i] = log_prob_B(w_[i]);
    }
    const double norm = log_sum_exp(log_post_) + std::log(h_);
    log_post_.array() -= norm;
    post_ = log_post_.array().exp();
    data_loss_ = [cfg, data, n = n_](double wv) {
        WeightMatrix ww(1, 1);
        ww(0, 0) = wv;
        return loss(cfg, ww, data, n);
    };
    log_norm_ = norm;
}

double CouplingQuadrature::posterior_density_at(double w) const {
    if (std::abs(w) > 1.0) return 0.0;
    return std::exp(-params_.beta * data_loss_(w) - log_norm_);
}

double CouplingQuadrature::log_prob_B(double w) const {
    const double n = static_cast<double>(n_);
    const double sd = std::sqrt(n / params_.rho);
    const double t = params_.b_threshold;
    const double hi = normal_cdf((t - n * w) / sd);
    const double lo = normal_cdf((-t - n * w) / sd);
    return std::log(hi - lo);
}

namespace {

/// log N(xi; w 1, I / rho)
double log_forward(const Xi& xi, double w, double rho) {
    const double n = static_cast<double>(xi.size());
    return 0.5 * n * std::log(rho / (2.0 * std::numbers::pi)) - 0.5 * rho * (xi.array() - w).square().sum();
}

}  // namespace

double CouplingQuadrature::log_marginal(const Xi& xi) const {
    if (!in_B(xi, Eigen::MatrixXd::Ones(n_, 1), params_)) return -std::numeric_limits<double>::infinity();
    Eigen::VectorXd a(w_.size());
    for (Eigen::Index i = 0; i < w_.size(); ++i) a[i] = log_post_[i] + log_forward(xi, w_[i], params_.rho) - log_pb_[i];
    return log_sum_exp(a) + std::log(h_);
}

double CouplingQuadrature::conditional_mean(const Xi& xi) const {
    Eigen::VectorXd a(w_.size());
    for (Eigen::Index i = 0; i < w_.size(); ++i) a[i] = log_post_[i] + log_forward(xi, w_[i], params_.rho) - log_pb_[i];
    const Eigen::VectorXd p = (a.array() - log_sum_exp(a)).exp();
    return p.dot(w_);
}

void CouplingQuadrature::precompute(const Eigen::VectorXd& w, Eigen::VectorXd& log_lik,
                                    Eigen::VectorXd& log_pb) const {
    log_lik.resize(w.size());
    log_pb.resize(w.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        const bool inside = std::abs(w[i]) <= 1.0;
        log_lik[i] = inside ? -params_.beta * data_loss_(w[i]) : -std::numeric_limits<double>::infinity();
        log_pb[i] = log_prob_B(w[i]);
    }
}

Eigen::VectorXd CouplingQuadrature::reverse_density_pre(const Xi& xi, const Eigen::VectorXd& w,
                                                        const Eigen::VectorXd& log_lik,
                                                        const Eigen::VectorXd& log_pb) const {
    // reverse log density with Z restored, normalized over the internal grid
    Eigen::VectorXd a(w_.size());
    for (Eigen::Index i = 0; i < w_.size(); ++i)
        a[i] = log_post_[i] + log_norm_ - 0.5 * params_.rho * (xi.array() - w_[i]).square().sum() - log_pb_[i];
    const double norm = log_sum_exp(a) + std::log(h_);
    Eigen::VectorXd out(w.size());
    for (Eigen::Index i = 0; i < w.size(); ++i)
        out[i] = std::exp(log_lik[i] - 0.5 * params_.rho * (xi.array() - w[i]).square().sum() - log_pb[i] - norm);
    return out;
}

Eigen::VectorXd CouplingQuadrature::reverse_density(const Xi& xi, const Eigen::VectorXd& w) const {
    Eigen::VectorXd log_lik, log_pb;
    precompute(w, log_lik, log_pb);
    return reverse_density_pre(xi, w, log_lik, log_pb);
}

template <typename Fn>
void CouplingQuadrature::for_xi_grid(int res, Fn&& fn) const {
    // orthonormal basis: e_0 along (1,...,1), the rest orthogonal (Helmert)
    const Eigen::Index n = n_;
    Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(n, n);
    basis.col(0).setConstant(1.0 / std::sqrt(static_cast<double>(n)));
    for (Eigen::Index j = 1; j < n; ++j) {
        const double s = std::sqrt(static_cast<double>(j * (j + 1)));
        for (Eigen::Index i = 0; i < j; ++i) basis(i, j) = 1.0 / s;
        basis(j, j) = -static_cast<double>(j) / s;
    }
    const double sd = 1.0 / std::sqrt(params_.rho);
    const double sn = std::sqrt(static_cast<double>(n));
    // along e_0 the set B is |u| <= t / sqrt(n); the mean sqrt(n) w lies within sqrt(n)
    const double u_hi = std::min(params_.b_threshold / sn, sn + 10.0 * sd);
    const double v_hi = 10.0 * sd;
    const double hu = 2.0 * u_hi / res;
    const double hv = 2.0 * v_hi / res;
    double cell = hu;
    for (Eigen::Index j = 1; j < n; ++j) cell *= hv;

    std::vector<int> idx(static_cast<std::size_t>(n), 0);
    Eigen::VectorXd coord(n);
    while (true) {
        coord[0] = -u_hi + (idx[0] + 0.5) * hu;
        for (Eigen::Index j = 1; j < n; ++j) coord[j] = -v_hi + (idx[static_cast<std::size_t>(j)] + 0.5) * hv;
        const Xi xi = basis * coord;
        fn(xi, cell);
        std::size_t j = 0;
        while (j < idx.size() && ++idx[j] == res) idx[j++] = 0;
        if (j == idx.size()) break;
    }
}

Eigen::VectorXd CouplingQuadrature::mixture_density(const Eigen::VectorXd& w, int xi_resolution) const {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(w.size());
    Eigen::VectorXd log_lik, log_pb;
    precompute(w, log_lik, log_pb);
    for_xi_grid(xi_resolution, [&](const Xi& xi, double cell) {
        const double lm = log_marginal(xi);
        if (!std::isfinite(lm)) return;
        acc += reverse_density_pre(xi, w, log_lik, log_pb) * (std::exp(lm) * cell);
    });
    return acc;
}

Xi CouplingQuadrature::xi_mean(int xi_resolution) const {
    Xi acc = Xi::Zero(n_, 1);
    for_xi_grid(xi_resolution, [&](const Xi& xi, double cell) {
        const double lm = log_marginal(xi);
        if (std::isfinite(lm)) acc += xi * (std::exp(lm) * cell);
    });
    return acc;
}

}  // namespace lccnet

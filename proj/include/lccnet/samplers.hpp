#pragma once

#include "lccnet/coupling.hpp"
#include "lccnet/network.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <vector>

namespace lccnet {

class SamplerError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An inner chain failed; the enclosing outer step may be retried.
class RetriableSamplerError : public SamplerError {
public:
    using SamplerError::SamplerError;
};

struct TargetDensity {
    std::function<double(const Eigen::VectorXd&)> log_density;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> score;
    std::function<bool(const Eigen::VectorXd&)> support_test;
    Eigen::Index dimension = 0;
};

struct ChainConfig {
    double step_size = 0.1;
    int iterations = 2000;  ///< total, burn-in included
    int burn_in = 500;
    int thinning = 1;
    std::uint64_t seed = 0;
    bool adapt_step = true;
    std::uint32_t chain_id = 0;
    std::uint64_t step_offset = 0;  ///< added to the step counter fed to the generator
    double target_accept = 0.574;

    void validate() const;
};

struct ChainDiagnostics {
    double acceptance_rate = 0.0;  ///< post burn-in
    double final_step_size = 0.0;
    double ess_estimate = 0.0;     ///< smallest per-coordinate ESS of the retained draws
    long support_rejections = 0;
    long accepted = 0;             ///< post burn-in
    long proposals = 0;            ///< post burn-in
};

struct ChainSample {
    Eigen::VectorXd state;
    double log_density = 0.0;
    int step = 0;
    double running_acceptance = 0.0;
};

struct ChainResult {
    std::vector<ChainSample> samples;
    ChainDiagnostics diagnostics;
    Eigen::VectorXd final_state;
};

/// Metropolis-adjusted Langevin chain with reject-on-violation support handling.
ChainResult mala_chain(const TargetDensity& target, const ChainConfig& cfg, const Eigen::VectorXd& initial);

/// One JSON object per retained sample.
void write_chain_jsonl(std::ostream& os, const ChainResult& chain, const std::string& config_hash = "");

TargetDensity reverse_conditional_target(const NetworkConfig& cfg, const Dataset& data, const CouplingParams& params,
                                         const Xi& xi);

struct WeightChain {
    std::vector<WeightMatrix> samples;
    ChainResult chain;
};
WeightChain sample_reverse_conditional(const NetworkConfig& cfg, const Dataset& data, const CouplingParams& params,
                                       const Xi& xi, const ChainConfig& chain_cfg,
                                       const std::optional<WeightMatrix>& initial = std::nullopt);

struct NestedConfig {
    ChainConfig outer;
    ChainConfig inner;             ///< per outer step; the retained draws feed the score. Thin them: autocorrelated batches bias the xi chain
    int initial_inner_burn_in = 1000;
    int max_retries = 3;
};

struct MarginalXiResult {
    std::vector<Xi> samples;
    std::vector<int> steps;
    std::vector<WeightMatrix> inner_states;  ///< last inner state at each retained xi
    std::vector<double> score_se;            ///< largest coordinate SE at each retained xi
    ChainDiagnostics diagnostics;
    double inner_acceptance = 0.0;
    double inner_step_size = 0.0;  ///< tuned by the first inner chain, frozen for the rest
    long inner_chains = 0;
    long retries = 0;
};
MarginalXiResult sample_marginal_xi(const NetworkConfig& cfg, const Dataset& data, const CouplingParams& params,
                                    const NestedConfig& nested);

struct TwoStageBudgets {
    NestedConfig nested;
    ChainConfig final_chain;  ///< per retained xi; with adapt_step it reuses the frozen inner step instead
    int draws_per_xi = 1;
    int threads = 1;
};

struct TwoStageResult {
    std::vector<WeightMatrix> draws;
    std::vector<int> xi_index;
    MarginalXiResult marginal;
    double final_acceptance = 0.0;
    long final_support_rejections = 0;
};
TwoStageResult two_stage_sample(const NetworkConfig& cfg, const Dataset& data, const CouplingParams& params,
                                const TwoStageBudgets& budgets);

/// Tabulated posterior on a regular grid over the product of l1 balls.
struct PosteriorQuadrature {
    Eigen::MatrixXd points;   ///< one flattened weight matrix per row
    Eigen::VectorXd weights;  ///< normalized probabilities
    double cell_volume = 0.0;
    int resolution = 0;
    int K = 1;
    int d = 1;
    Eigen::VectorXd mean;     ///< flattened posterior mean of w
    double mean_change_on_refinement = 0.0;  ///< |mean(res) - mean(res/2)|_inf

    double expect(const std::function<double(const WeightMatrix&)>& fn) const;
    /// Posterior mean of f(x, w).
    double mean_output(const NetworkConfig& cfg, const Eigen::VectorXd& x) const;
    /// CDF of the single coordinate when K d = 1.
    double cdf(double value) const;
};

PosteriorQuadrature reference_posterior_quadrature(const NetworkConfig& cfg, const Dataset& data, Eigen::Index n,
                                                   double beta, int resolution, bool report_convergence = true);

/**
 * Quadrature oracle for the coupling at d = 1, K = 1 (every x_i = 1). Z(w) is
 * exact here since sum_i xi_i given w is Normal(n w, n / rho).
 */
class CouplingQuadrature {
public:
    CouplingQuadrature(const NetworkConfig& cfg, const Dataset& data, const CouplingParams& params,
                       int w_resolution = 2000);

    const Eigen::VectorXd& w_grid() const { return w_; }
    /// Normalized posterior density p_n on the w grid.
    const Eigen::VectorXd& posterior_density() const { return post_; }
    double posterior_density_at(double w) const;
    double log_prob_B(double w) const;

    /// log of the marginal density of xi (exact normalization, -inf outside B).
    double log_marginal(const Xi& xi) const;
    double conditional_mean(const Xi& xi) const;
    /// p*(w | xi) at the points `w`, normalized over the internal grid.
    Eigen::VectorXd reverse_density(const Xi& xi, const Eigen::VectorXd& w) const;

    /// int p*(w|xi) p*(xi) dxi at the points `w`, by a grid over B in rotated coordinates.
    Eigen::VectorXd mixture_density(const Eigen::VectorXd& w, int xi_resolution = 400) const;
    /// E[xi] under the marginal.
    Xi xi_mean(int xi_resolution = 400) const;

private:
    template <typename Fn>
    void for_xi_grid(int res, Fn&& fn) const;
    /// reverse density at points with precomputed -beta*loss and log P(B|w)
    Eigen::VectorXd reverse_density_pre(const Xi& xi, const Eigen::VectorXd& w, const Eigen::VectorXd& log_lik,
                                        const Eigen::VectorXd& log_pb) const;
    void precompute(const Eigen::VectorXd& w, Eigen::VectorXd& log_lik, Eigen::VectorXd& log_pb) const;

    NetworkConfig cfg_;
    CouplingParams params_;
    Eigen::Index n_;
    Eigen::VectorXd w_;       ///< midpoints on [-1, 1]
    double h_;
    Eigen::VectorXd log_post_;  ///< normalized log density
    Eigen::VectorXd post_;
    Eigen::VectorXd log_pb_;
    double log_norm_ = 0.0;
    std::function<double(double)> data_loss_;
};

}  // namespace lccnet

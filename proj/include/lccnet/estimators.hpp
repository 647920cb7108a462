#pragma once

#include "lccnet/network.hpp"
#include "lccnet/priors.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

namespace lccnet {

/// The posterior after the first n observations, either as draws or as an
/// exact table over a product grid.
struct PosteriorSnapshot {
    Eigen::Index n = 0;
    double beta = 1.0;
    std::vector<WeightMatrix> samples;
    std::shared_ptr<const ProductGrid> grid;
    Eigen::VectorXd log_weights;  ///< normalized, one entry per grid index
    double log_evidence = 0.0;    ///< log E_P0[exp(-beta l_n)], exact tables only

    bool exact() const { return grid != nullptr; }
    std::size_t size() const;
    void validate() const;
};

/// Network outputs f(x, w) at every point of the grid, in index order.
Eigen::VectorXd grid_outputs(const NetworkConfig& cfg, const ProductGrid& grid, const Eigen::VectorXd& x);

/// E over the snapshot of fn(f(x, w)).
double snapshot_expect_output(const PosteriorSnapshot& snap, const NetworkConfig& cfg, const Eigen::VectorXd& x,
                              const std::function<double(double)>& fn);

double posterior_mean(const PosteriorSnapshot& snap, const NetworkConfig& cfg, const Eigen::VectorXd& x);
double predictive_density(const PosteriorSnapshot& snap, const NetworkConfig& cfg, const Eigen::VectorXd& x, double y,
                          double beta);
/// log of predictive_density, accumulated in the log domain.
double log_predictive(const PosteriorSnapshot& snap, const NetworkConfig& cfg, const Eigen::VectorXd& x, double y,
                      double beta);

/// Snapshots for n = 0..N; throws unless exactly N+1 are given.
double cesaro_mean(std::span<const PosteriorSnapshot> snaps, Eigen::Index N, const NetworkConfig& cfg,
                   const Eigen::VectorXd& x);
double cesaro_predictive(std::span<const PosteriorSnapshot> snaps, Eigen::Index N, const NetworkConfig& cfg,
                        const Eigen::VectorXd& x, double y, double beta);

/// Probability table proportional to exp(-beta l_n(w)) over the grid (uniform prior).
PosteriorSnapshot exact_discrete_posterior(const NetworkConfig& cfg, std::shared_ptr<const ProductGrid> grid,
                                           const Dataset& data, Eigen::Index n, double beta, int threads = 1);

/// Tables for n = 0..N, each obtained from the previous by one reweighting step.
std::vector<PosteriorSnapshot> sequential_discrete_posteriors(const NetworkConfig& cfg,
                                                              std::shared_ptr<const ProductGrid> grid,
                                                              const Dataset& data, Eigen::Index N, double beta,
                                                              int threads = 1);

/// Text table: header line, then "index log_weight" rows.
void write_snapshot_table(std::ostream& os, const PosteriorSnapshot& snap);

/// Runs fn(begin, end) over [0, count) split into contiguous shards.
void parallel_for(std::uint64_t count, int threads, const std::function<void(std::uint64_t, std::uint64_t)>& fn);

}  // namespace lccnet

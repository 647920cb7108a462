#pragma once

#include "lccnet/network.hpp"
#include "lccnet/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace lccnet {

inline constexpr std::uint64_t kDefaultEnumerationLimit = 1'000'000;

/// Uniform prior on the product of K unit l1 balls in R^d.
struct ContinuousL1Prior {
    int d = 2;
    int K = 1;
};

/// Uniform prior on the product of K grids S_{1,M}: l1 ball points with
/// coordinates in (1/M) Z.
struct DiscreteGridPrior {
    int d = 2;
    int K = 1;
    int M = 1;
    void validate() const;
};

class EnumerationLimitError : public std::runtime_error {
public:
    EnumerationLimitError(std::uint64_t projected, std::uint64_t limit);
    std::uint64_t projected() const { return projected_; }

private:
    std::uint64_t projected_;
};

WeightMatrix sample_continuous(const ContinuousL1Prior& prior, Rng& rng);

struct SecondMoment {
    double signed_value;   ///< E[w_j^2] for the signed uniform l1 ball, 2/((d+1)(d+2))
    double unsigned_value;  ///< d/((d+1)^2 (d+2)), the unsigned Dirichlet coordinate variance
};
SecondMoment coordinate_second_moment(int d);

/// Number of points of S_{1,M} in dimension d, by recursion on (dimension, remaining budget).
std::uint64_t count_grid(int d, int M);
/// Closed form sum_k 2^k C(d,k) C(M,k).
std::uint64_t count_grid_closed_form(int d, int M);

/// All points of S_{1,M}; refuses when (2d+1)^M exceeds `limit`.
std::vector<Eigen::VectorXd> enumerate_grid(int d, int M, std::uint64_t limit = kDefaultEnumerationLimit);

/// True when every coordinate is a multiple of 1/M and every row is in the l1 ball.
bool on_grid(const WeightMatrix& w, int M, double tol = 1e-12);

/**
 * Lazy K-fold product of a per-row grid, indexed in mixed radix: digit k of an
 * index selects the grid point used for row k.
 */
class ProductGrid {
public:
    ProductGrid(int d, int K, int M, std::uint64_t limit = kDefaultEnumerationLimit);

    int d() const { return d_; }
    int K() const { return K_; }
    int M() const { return M_; }
    std::uint64_t size() const { return size_; }
    const std::vector<Eigen::VectorXd>& row_points() const { return rows_; }

    void digits(std::uint64_t index, std::vector<int>& out) const;
    WeightMatrix decode(std::uint64_t index) const;

private:
    int d_, K_, M_;
    std::vector<Eigen::VectorXd> rows_;
    std::uint64_t size_;
};

struct DirichletMoment {
    double dirichlet;    ///< E[prod w_j^r_j] under Dirichlet(1,...,1) in d+1 coordinates
    double signed_prior; ///< same moment under the signed uniform l1 ball (0 if any r_j is odd)
};
/// r has at most d+1 entries; missing entries are 0.
DirichletMoment dirichlet_moment(int d, const std::vector<int>& r);

/// 4 l n / (sqrt(e) d)
double prior_moment_bound(int ell, double n, int d);

/// Randomized rounding of each row onto S_{1,M}; unbiased given w.
WeightMatrix discretize_weights(const WeightMatrix& w, int M, Rng& rng);

/// Exact uniform draw from (S_{1,M})^K by rejection from uniform compositions
/// of M into 2d+1 parts. Only offered when the grid is too large to enumerate.
WeightMatrix sample_grid_uniform(const DiscreteGridPrior& prior, Rng& rng,
                                 std::uint64_t limit = kDefaultEnumerationLimit, int max_attempts = 1'000'000);

}  // namespace lccnet

#include "lccnet/estimators.hpp"

#include "lccnet/stats.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace lccnet {

namespace {

// Mixed-radix walk over grid indices; digit k selects the row of neuron k.
class GridCursor {
public:
    GridCursor(const ProductGrid& grid, std::uint64_t start) : radix_(grid.row_points().size()) {
        grid.digits(start, digits_);
    }
    const std::vector<int>& digits() const { return digits_; }
    void next() {
        for (auto& dg : digits_) {
            if (static_cast<std::size_t>(++dg) < radix_) return;
            dg = 0;
        }
    }

private:
    std::size_t radix_;
    std::vector<int> digits_;
};

// psi(row_r . x_i) as an R x n table
Eigen::MatrixXd row_activation_table(const NetworkConfig& cfg, const ProductGrid& grid, const Eigen::MatrixXd& X,
                                     Eigen::Index n) {
    const auto& rows = grid.row_points();
    Eigen::MatrixXd T(static_cast<Eigen::Index>(rows.size()), n);
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (Eigen::Index i = 0; i < n; ++i)
            T(static_cast<Eigen::Index>(r), i) = cfg.activation.value(X.row(i).dot(rows[r]));
    return T;
}

void check_grid(const NetworkConfig& cfg, const ProductGrid& grid) {
    if (grid.K() != cfg.K || grid.d() != cfg.d) throw std::invalid_argument("grid shape does not match the network");
}

double normal_log_density(double y, double mean, double beta) {
    const double r = y - mean;
    return 0.5 * std::log(beta / (2.0 * std::numbers::pi)) - 0.5 * beta * r * r;
}

}  // namespace

std::size_t PosteriorSnapshot::size() const { return exact() ? static_cast<std::size_t>(grid->size()) : samples.size(); }

void PosteriorSnapshot::validate() const {
    if (exact()) {
        if (static_cast<std::uint64_t>(log_weights.size()) != grid->size())
            throw std::invalid_argument("snapshot: weight table does not match the grid");
        const double total = log_weights.array().exp().sum();
        if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("snapshot: weights do not sum to 1");
    } else if (samples.empty()) {
        throw std::invalid_argument("snapshot: empty sample set");
    }
}

void parallel_for(std::uint64_t count, int threads, const std::function<void(std::uint64_t, std::uint64_t)>& fn) {
    const std::uint64_t shards = std::clamp<std::uint64_t>(threads < 1 ? 1 : threads, 1, std::max<std::uint64_t>(count, 1));
    if (shards <= 1) {
        fn(0, count);
        return;
    }
    std::vector<std::jthread> pool;
    const std::uint64_t chunk = (count + shards - 1) / shards;
    for (std::uint64_t s = 0; s < shards; ++s) {
        const std::uint64_t lo = s * chunk, hi = std::min(count, lo + chunk);
        if (lo < hi) pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
    }
}

Eigen::VectorXd grid_outputs(const NetworkConfig& cfg, const ProductGrid& grid, const Eigen::VectorXd& x) {
    check_grid(cfg, grid);
    if (x.size() != cfg.d) throw std::invalid_argument("grid_outputs: x has the wrong dimension");
    const Eigen::MatrixXd T = row_activation_table(cfg, grid, x.transpose(), 1);
    Eigen::VectorXd out(static_cast<Eigen::Index>(grid.size()));
    GridCursor cur(grid, 0);
    for (Eigen::Index g = 0; g < out.size(); ++g, cur.next()) {
        double f = 0.0;
        for (int k = 0; k < cfg.K; ++k) f += cfg.outer_weight(k) * T(cur.digits()[static_cast<std::size_t>(k)], 0);
        out[g] = f;
    }
    return out;
}

double snapshot_expect_output(const PosteriorSnapshot& snap, const NetworkConfig& cfg, const Eigen::VectorXd& x,
                              const std::function<double(double)>& fn) {
    snap.validate();
    if (snap.exact()) {
        const Eigen::VectorXd f = grid_outputs(cfg, *snap.grid, x);
        double acc = 0.0;
        for (Eigen::Index g = 0; g < f.size(); ++g) acc += std::exp(snap.log_weights[g]) * fn(f[g]);
        return acc;
    }
    double acc = 0.0;
    for (const auto& w : snap.samples) acc += fn(eval_network(cfg, w, x));
    return acc / static_cast<double>(snap.samples.size());
}

double posterior_mean(const PosteriorSnapshot& snap, const NetworkConfig& cfg, const Eigen::VectorXd& x) {
    return snapshot_expect_output(snap, cfg, x, [](double f) { return f; });
}

double log_predictive(const PosteriorSnapshot& snap, const NetworkConfig& cfg, const Eigen::VectorXd& x, double y,
                      double beta) {
    if (!(beta > 0.0)) throw std::invalid_argument("predictive: beta must be positive");
    snap.validate();
    if (snap.exact()) {
        const Eigen::VectorXd f = grid_outputs(cfg, *snap.grid, x);
        Eigen::VectorXd terms(f.size());
        for (Eigen::Index g = 0; g < f.size(); ++g) terms[g] = snap.log_weights[g] + normal_log_density(y, f[g], beta);
        return log_sum_exp(terms);
    }
    std::vector<double> terms;
    terms.reserve(snap.samples.size());
    for (const auto& w : snap.samples) terms.push_back(normal_log_density(y, eval_network(cfg, w, x), beta));
    return log_mean_exp(terms);
}

double predictive_density(const PosteriorSnapshot& snap, const NetworkConfig& cfg, const Eigen::VectorXd& x, double y,
                          double beta) {
    return std::exp(log_predictive(snap, cfg, x, y, beta));
}

namespace {
void check_cesaro(std::span<const PosteriorSnapshot> snaps, Eigen::Index N) {
    if (N < 0 || snaps.size() != static_cast<std::size_t>(N + 1))
        throw std::invalid_argument("cesaro: need one snapshot for each n = 0..N");
}
}  // namespace

double cesaro_mean(std::span<const PosteriorSnapshot> snaps, Eigen::Index N, const NetworkConfig& cfg,
                   const Eigen::VectorXd& x) {
    check_cesaro(snaps, N);
    double acc = 0.0;
    for (const auto& s : snaps) acc += posterior_mean(s, cfg, x);
    return acc / static_cast<double>(snaps.size());
}

double cesaro_predictive(std::span<const PosteriorSnapshot> snaps, Eigen::Index N, const NetworkConfig& cfg,
                        const Eigen::VectorXd& x, double y, double beta) {
    check_cesaro(snaps, N);
    std::vector<double> logs;
    logs.reserve(snaps.size());
    for (const auto& s : snaps) logs.push_back(log_predictive(s, cfg, x, y, beta));
    return std::exp(log_mean_exp(logs));
}

std::vector<PosteriorSnapshot> sequential_discrete_posteriors(const NetworkConfig& cfg,
                                                              std::shared_ptr<const ProductGrid> grid,
                                                              const Dataset& data, Eigen::Index N, double beta,
                                                              int threads) {
    if (!grid) throw std::invalid_argument("sequential posteriors: null grid");
    check_grid(cfg, *grid);
    if (N < 0 || N > data.N()) throw std::invalid_argument("sequential posteriors: N out of range");
    if (beta < 0.0) throw std::invalid_argument("sequential posteriors: beta must be nonnegative");
    if (data.d() != cfg.d) throw std::invalid_argument("sequential posteriors: data dimension mismatch");

    const Eigen::MatrixXd T = row_activation_table(cfg, *grid, data.X, N);
    const auto G = static_cast<Eigen::Index>(grid->size());
    // cumulative losses, one column per grid point
    Eigen::MatrixXd cum(N + 1, G);
    parallel_for(grid->size(), threads, [&](std::uint64_t lo, std::uint64_t hi) {
        GridCursor cur(*grid, lo);
        for (std::uint64_t g = lo; g < hi; ++g, cur.next()) {
            double acc = 0.0;
            const auto col = static_cast<Eigen::Index>(g);
            cum(0, col) = 0.0;
            for (Eigen::Index i = 0; i < N; ++i) {
                double f = 0.0;
                for (int k = 0; k < cfg.K; ++k) f += cfg.outer_weight(k) * T(cur.digits()[static_cast<std::size_t>(k)], i);
                const double r = data.y[i] - f;
                acc += 0.5 * r * r;
                cum(i + 1, col) = acc;
            }
        }
    });

    const double log_G = std::log(static_cast<double>(G));
    std::vector<PosteriorSnapshot> out(static_cast<std::size_t>(N + 1));
    for (Eigen::Index n = 0; n <= N; ++n) {
        auto& s = out[static_cast<std::size_t>(n)];
        s.n = n;
        s.beta = beta;
        s.grid = grid;
        s.log_weights = -beta * cum.row(n).transpose();
        const double lse = log_sum_exp(s.log_weights);
        s.log_weights.array() -= lse;
        s.log_evidence = lse - log_G;
    }
    return out;
}

PosteriorSnapshot exact_discrete_posterior(const NetworkConfig& cfg, std::shared_ptr<const ProductGrid> grid,
                                           const Dataset& data, Eigen::Index n, double beta, int threads) {
    auto seq = sequential_discrete_posteriors(cfg, std::move(grid), data, n, beta, threads);
    return std::move(seq.back());
}

void write_snapshot_table(std::ostream& os, const PosteriorSnapshot& snap) {
    if (!snap.exact()) throw std::invalid_argument("write_snapshot_table: snapshot is not an exact table");
    const auto old_prec = os.precision(std::numeric_limits<double>::max_digits10);
    os << "index log_weight\n";
    for (Eigen::Index g = 0; g < snap.log_weights.size(); ++g) os << g << ' ' << snap.log_weights[g] << '\n';
    os.precision(old_prec);
}

}  // namespace lccnet

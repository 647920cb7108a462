#include "lccnet/priors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

namespace lccnet {

namespace {

constexpr std::uint64_t kSaturated = std::numeric_limits<std::uint64_t>::max();

std::uint64_t sat_mul(std::uint64_t a, std::uint64_t b) {
    if (a == 0 || b == 0) return 0;
    if (a > kSaturated / b) return kSaturated;
    return a * b;
}

std::uint64_t sat_add(std::uint64_t a, std::uint64_t b) { return a > kSaturated - b ? kSaturated : a + b; }

std::uint64_t sat_pow(std::uint64_t base, int e) {
    std::uint64_t r = 1;
    for (int i = 0; i < e; ++i) r = sat_mul(r, base);
    return r;
}

std::uint64_t binom(int n, int k) {
    if (k < 0 || k > n) return 0;
    std::uint64_t r = 1;
    for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
    return r;
}

std::uint64_t count_rec(int d, int budget, std::map<std::pair<int, int>, std::uint64_t>& memo) {
    if (d == 0) return 1;
    const auto key = std::make_pair(d, budget);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    std::uint64_t total = count_rec(d - 1, budget, memo);
    for (int m = 1; m <= budget; ++m) total = sat_add(total, sat_mul(2, count_rec(d - 1, budget - m, memo)));
    memo[key] = total;
    return total;
}

void enumerate_rec(int j, int budget, Eigen::VectorXi& cur, int M, std::vector<Eigen::VectorXd>& out) {
    if (j == cur.size()) {
        out.push_back(cur.cast<double>() / static_cast<double>(M));
        return;
    }
    for (int m = -budget; m <= budget; ++m) {
        cur[j] = m;
        enumerate_rec(j + 1, budget - std::abs(m), cur, M, out);
    }
    cur[j] = 0;
}

void check_limit(int d, int M, std::uint64_t limit) {
    const std::uint64_t cap = sat_pow(static_cast<std::uint64_t>(2 * d + 1), M);
    if (cap > limit) throw EnumerationLimitError(count_grid(d, M), limit);
}

}  // namespace

EnumerationLimitError::EnumerationLimitError(std::uint64_t projected, std::uint64_t limit)
    : std::runtime_error("grid enumeration refused: projected " + std::to_string(projected) +
                         " points, limit " + std::to_string(limit)),
      projected_(projected) {}

void DiscreteGridPrior::validate() const {
    if (d < 1 || K < 1 || M < 1) throw std::invalid_argument("grid prior: d, K, M must be positive");
    if (M > d) throw std::invalid_argument("grid prior: M must not exceed d");
}

WeightMatrix sample_continuous(const ContinuousL1Prior& prior, Rng& rng) {
    WeightMatrix w(prior.K, prior.d);
    for (int k = 0; k < prior.K; ++k) {
        // Dirichlet(1,...,1) in d+1 coordinates from normalized exponentials
        double total = 0.0;
        for (int j = 0; j < prior.d; ++j) {
            w(k, j) = rng.exponential();
            total += w(k, j);
        }
        total += rng.exponential();
        for (int j = 0; j < prior.d; ++j) w(k, j) = rng.sign() * w(k, j) / total;
    }
    return w;
}

SecondMoment coordinate_second_moment(int d) {
    if (d < 1) throw std::invalid_argument("coordinate_second_moment: d must be >= 1");
    const double dd = d;
    return {2.0 / ((dd + 1.0) * (dd + 2.0)), dd / ((dd + 1.0) * (dd + 1.0) * (dd + 2.0))};
}

std::uint64_t count_grid(int d, int M) {
    std::map<std::pair<int, int>, std::uint64_t> memo;
    return count_rec(d, M, memo);
}

std::uint64_t count_grid_closed_form(int d, int M) {
    std::uint64_t total = 0;
    for (int k = 0; k <= std::min(d, M); ++k)
        total = sat_add(total, sat_mul(sat_mul(std::uint64_t{1} << k, binom(d, k)), binom(M, k)));
    return total;
}

std::vector<Eigen::VectorXd> enumerate_grid(int d, int M, std::uint64_t limit) {
    if (d < 1 || M < 1) throw std::invalid_argument("enumerate_grid: d and M must be positive");
    check_limit(d, M, limit);
    std::vector<Eigen::VectorXd> out;
    out.reserve(count_grid(d, M));
    Eigen::VectorXi cur = Eigen::VectorXi::Zero(d);
    enumerate_rec(0, M, cur, M, out);
    return out;
}

bool on_grid(const WeightMatrix& w, int M, double tol) {
    if (!in_l1_balls(w, tol)) return false;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        const double s = w.data()[i] * M;
        if (std::abs(s - std::round(s)) > tol * M) return false;
    }
    return true;
}

ProductGrid::ProductGrid(int d, int K, int M, std::uint64_t limit) : d_(d), K_(K), M_(M) {
    if (K < 1) throw std::invalid_argument("ProductGrid: K must be positive");
    rows_ = enumerate_grid(d, M, limit);
    size_ = sat_pow(rows_.size(), K);
    if (size_ > limit) throw EnumerationLimitError(size_, limit);
}

void ProductGrid::digits(std::uint64_t index, std::vector<int>& out) const {
    out.resize(static_cast<std::size_t>(K_));
    const std::uint64_t radix = rows_.size();
    for (int k = 0; k < K_; ++k) {
        out[static_cast<std::size_t>(k)] = static_cast<int>(index % radix);
        index /= radix;
    }
}

WeightMatrix ProductGrid::decode(std::uint64_t index) const {
    if (index >= size_) throw std::out_of_range("ProductGrid: index out of range");
    std::vector<int> dig;
    digits(index, dig);
    WeightMatrix w(K_, d_);
    for (int k = 0; k < K_; ++k) w.row(k) = rows_[static_cast<std::size_t>(dig[static_cast<std::size_t>(k)])].transpose();
    return w;
}

DirichletMoment dirichlet_moment(int d, const std::vector<int>& r) {
    if (d < 1) throw std::invalid_argument("dirichlet_moment: d must be >= 1");
    if (r.size() > static_cast<std::size_t>(d + 1)) throw std::invalid_argument("dirichlet_moment: too many exponents");
    int total = 0;
    bool any_odd = false;
    double log_num = std::lgamma(d + 1.0);
    for (int e : r) {
        if (e < 0) throw std::invalid_argument("dirichlet_moment: negative exponent");
        total += e;
        any_odd = any_odd || (e % 2 != 0);
        log_num += std::lgamma(e + 1.0);
    }
    const double value = std::exp(log_num - std::lgamma(d + total + 1.0));
    return {value, any_odd ? 0.0 : value};
}

double prior_moment_bound(int ell, double n, int d) {
    if (ell < 1) throw std::invalid_argument("prior_moment_bound: ell must be >= 1");
    return 4.0 * ell * n / (std::sqrt(std::exp(1.0)) * d);
}

WeightMatrix discretize_weights(const WeightMatrix& w, int M, Rng& rng) {
    if (M < 1) throw std::invalid_argument("discretize_weights: M must be positive");
    if (!in_l1_balls(w, 1e-12)) throw std::invalid_argument("discretize_weights: row outside the l1 ball");
    const Eigen::Index d = w.cols();
    WeightMatrix out = WeightMatrix::Zero(w.rows(), d);
    std::vector<double> cdf(static_cast<std::size_t>(d + 1));
    std::vector<int> counts(static_cast<std::size_t>(d + 1));
    for (Eigen::Index k = 0; k < w.rows(); ++k) {
        double acc = 0.0;
        for (Eigen::Index j = 0; j < d; ++j) {
            acc += std::abs(w(k, j));
            cdf[static_cast<std::size_t>(j)] = acc;
        }
        cdf[static_cast<std::size_t>(d)] = std::max(acc, 1.0);  // slack coordinate 1 - |w|_1
        std::fill(counts.begin(), counts.end(), 0);
        for (int m = 0; m < M; ++m) {
            const double u = rng.uniform() * cdf[static_cast<std::size_t>(d)];
            const auto idx = std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
            ++counts[static_cast<std::size_t>(std::min<std::ptrdiff_t>(idx, d))];
        }
        for (Eigen::Index j = 0; j < d; ++j) {
            const double s = w(k, j) < 0.0 ? -1.0 : 1.0;
            out(k, j) = s * counts[static_cast<std::size_t>(j)] / static_cast<double>(M);
        }
    }
    return out;
}

WeightMatrix sample_grid_uniform(const DiscreteGridPrior& prior, Rng& rng, std::uint64_t limit, int max_attempts) {
    prior.validate();
    if (sat_pow(static_cast<std::uint64_t>(2 * prior.d + 1), prior.M) <= limit)
        throw std::invalid_argument("sample_grid_uniform: grid is enumerable; use exact enumeration");
    const int parts = 2 * prior.d + 1;
    const int slots = prior.M + parts - 1;
    WeightMatrix w(prior.K, prior.d);
    std::vector<int> bars(static_cast<std::size_t>(parts - 1));
    std::vector<int> pool(static_cast<std::size_t>(slots));
    std::vector<int> sizes(static_cast<std::size_t>(parts));
    for (int k = 0; k < prior.K; ++k) {
        bool accepted = false;
        for (int attempt = 0; attempt < max_attempts && !accepted; ++attempt) {
            // stars and bars: a uniform (parts-1)-subset of the slots fixes a uniform composition
            std::iota(pool.begin(), pool.end(), 0);
            for (int b = 0; b < parts - 1; ++b) {
                const auto pick = b + static_cast<int>(rng.below(static_cast<std::uint64_t>(slots - b)));
                std::swap(pool[static_cast<std::size_t>(b)], pool[static_cast<std::size_t>(pick)]);
            }
            std::copy(pool.begin(), pool.begin() + (parts - 1), bars.begin());
            std::sort(bars.begin(), bars.end());
            int prev = -1;
            for (int p = 0; p < parts - 1; ++p) {
                sizes[static_cast<std::size_t>(p)] = bars[static_cast<std::size_t>(p)] - prev - 1;
                prev = bars[static_cast<std::size_t>(p)];
            }
            sizes[static_cast<std::size_t>(parts - 1)] = slots - prev - 1;
            // parts 2j, 2j+1 are the positive and negative mass of coordinate j; the
            // canonical composition never uses both
            accepted = true;
            for (int j = 0; j < prior.d && accepted; ++j)
                accepted = !(sizes[static_cast<std::size_t>(2 * j)] > 0 && sizes[static_cast<std::size_t>(2 * j + 1)] > 0);
            if (accepted)
                for (int j = 0; j < prior.d; ++j)
                    w(k, j) = (sizes[static_cast<std::size_t>(2 * j)] - sizes[static_cast<std::size_t>(2 * j + 1)]) /
                              static_cast<double>(prior.M);
        }
        if (!accepted) throw std::runtime_error("sample_grid_uniform: rejection budget exhausted");
    }
    return w;
}

}  // namespace lccnet

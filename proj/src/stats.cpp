#include "lccnet/stats.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace lccnet {

double log_sum_exp(std::span<const double> v) {
    if (v.empty()) return -std::numeric_limits<double>::infinity();
    const double m = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

double log_sum_exp(const Eigen::VectorXd& v) {
    return log_sum_exp(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

double log_mean_exp(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("log_mean_exp: empty input");
    return log_sum_exp(v) - std::log(static_cast<double>(v.size()));
}

double sample_variance(std::span<const double> v) {
    const std::size_t n = v.size();
    if (n < 2) return 0.0;
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return ss / static_cast<double>(n - 1);
}

MeanSe mean_se(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("mean_se: empty input");
    MeanSe r;
    r.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    r.se = std::sqrt(sample_variance(v) / static_cast<double>(v.size()));
    return r;
}

double batch_means_se(std::span<const double> v, int batches) {
    const std::size_t n = v.size();
    if (batches < 2 || n < static_cast<std::size_t>(2 * batches)) return mean_se(v).se;
    const std::size_t len = n / static_cast<std::size_t>(batches);
    std::vector<double> means(static_cast<std::size_t>(batches));
    for (int b = 0; b < batches; ++b) {
        auto first = v.begin() + static_cast<std::ptrdiff_t>(b * len);
        means[static_cast<std::size_t>(b)] =
            std::accumulate(first, first + static_cast<std::ptrdiff_t>(len), 0.0) / static_cast<double>(len);
    }
    return mean_se(means).se;
}

double effective_sample_size(std::span<const double> v) {
    const std::size_t n = v.size();
    if (n < 4) return static_cast<double>(n);
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
    double c0 = 0.0;
    for (double x : v) c0 += (x - m) * (x - m);
    c0 /= static_cast<double>(n);
    if (c0 <= 0.0) return static_cast<double>(n);
    auto autocov = [&](std::size_t lag) {
        double s = 0.0;
        for (std::size_t i = 0; i + lag < n; ++i) s += (v[i] - m) * (v[i + lag] - m);
        return s / static_cast<double>(n);
    };
    // Geyer: sum consecutive pairs while they stay positive
    double tau = -1.0;
    for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
        const double pair = (autocov(2 * k) + autocov(2 * k + 1)) / c0;
        if (pair <= 0.0) break;
        tau += 2.0 * pair;
    }
    tau = std::max(tau, 1.0 / static_cast<double>(n));
    return static_cast<double>(n) / tau;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_logpdf(double x, double mean, double var) {
    const double r = x - mean;
    return -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * r * r / var;
}

double chi_square_sf(double stat, double dof) {
    if (stat <= 0.0) return 1.0;
    return boost::math::gamma_q(0.5 * dof, 0.5 * stat);
}

KsResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf) {
    if (samples.empty()) throw std::invalid_argument("ks_test: empty sample");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = cdf(samples[i]);
        d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
    }
    // Stephens' small-sample correction with the Kolmogorov series
    const double sn = std::sqrt(n);
    const double lambda = (sn + 0.12 + 0.11 / sn) * d;
    double q = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        q += (k % 2 ? 2.0 : -2.0) * term;
        if (term < 1e-16) break;
    }
    return {d, std::clamp(q, 0.0, 1.0)};
}

PowerIterationResult power_iteration(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& apply,
                                     Eigen::Index dim, double tol, int max_iter) {
    PowerIterationResult r;
    if (dim == 0) {
        r.converged = true;
        return r;
    }
    // deterministic, non-degenerate start
    Eigen::VectorXd v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) v[i] = 1.0 + 0.01 * static_cast<double>(i % 7);
    v.normalize();
    double lambda = 0.0;
    for (int it = 1; it <= max_iter; ++it) {
        Eigen::VectorXd w = apply(v);
        const double norm = w.norm();
        r.iterations = it;
        if (norm == 0.0) {
            r.value = 0.0;
            r.converged = true;
            return r;
        }
        const double next = v.dot(w);
        v = w / norm;
        if (std::abs(next - lambda) <= tol * std::max(1.0, std::abs(next))) {
            r.value = next;
            r.converged = true;
            return r;
        }
        lambda = next;
    }
    r.value = lambda;
    return r;
}

PowerIterationResult covariance_lambda_max(const Eigen::MatrixXd& samples, double tol) {
    const Eigen::Index s = samples.rows();
    if (s < 2) throw std::invalid_argument("covariance_lambda_max: need at least two samples");
    const Eigen::RowVectorXd mean = samples.colwise().mean();
    const Eigen::MatrixXd centered = samples.rowwise() - mean;
    const double scale = 1.0 / static_cast<double>(s - 1);
    return power_iteration(
        [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
            return scale * (centered.transpose() * (centered * v));
        },
        samples.cols(), tol);
}

}  // namespace lccnet

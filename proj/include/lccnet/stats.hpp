#pragma once

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <vector>

namespace lccnet {

/// log(sum(exp(v))) with max subtraction. Returns -inf for an empty input.
double log_sum_exp(std::span<const double> v);
double log_sum_exp(const Eigen::VectorXd& v);

/// log(mean(exp(v)))
double log_mean_exp(std::span<const double> v);

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

/// Sample mean and i.i.d. standard error (sd / sqrt(n)).
MeanSe mean_se(std::span<const double> v);
double sample_variance(std::span<const double> v);

/// Batch-means standard error; robust to moderate autocorrelation.
double batch_means_se(std::span<const double> v, int batches = 20);

/// Effective sample size from Geyer's initial positive sequence.
double effective_sample_size(std::span<const double> v);

double normal_cdf(double z);
double normal_logpdf(double x, double mean, double var);

/// Upper tail of the chi-square distribution.
double chi_square_sf(double stat, double dof);

/// Two-sided one-sample Kolmogorov-Smirnov test against a continuous cdf.
struct KsResult {
    double statistic = 0.0;
    double p_value = 0.0;
};
KsResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf);

/// Largest eigenvalue of a symmetric PSD operator by power iteration.
struct PowerIterationResult {
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
};
PowerIterationResult power_iteration(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& apply,
                                     Eigen::Index dim, double tol = 1e-8, int max_iter = 10000);

/// Largest eigenvalue of the sample covariance of the rows of `samples`,
/// computed matrix-free against the centered rows.
PowerIterationResult covariance_lambda_max(const Eigen::MatrixXd& samples, double tol = 1e-8);

}  // namespace lccnet

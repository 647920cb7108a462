#pragma once

#include "lccnet/network.hpp"
#include "lccnet/risk.hpp"
#include "lccnet/samplers.hpp"

#include "json.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace lccnet::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfigError = 2, kSamplerError = 3, kOracleError = 4 };

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class OracleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ActivationSpec {
    std::string kind = "tanh";  ///< tanh | squared_relu
    double a = 1.0;
    double c = 1.0;
    Activation make() const;
};

struct NetworkSpec {
    int K = 1;
    int d = 2;
    double V = 1.0;
    ActivationSpec activation;
    std::vector<int> signs;  ///< empty: the default pattern for the activation
    NetworkConfig make() const;
};

struct PriorSpec {
    std::string kind = "continuous";  ///< continuous | discrete
    int M = 1;
};

struct SyntheticSpec {
    Eigen::Index N = 50;
    std::string teacher = "network";  ///< network | function
    std::string noise = "gaussian";   ///< gaussian | bounded | none
    double sigma = 0.3;
};

struct DataSpec {
    std::string path;          ///< CSV dataset; empty means synthetic
    std::string teacher_path;  ///< optional teacher JSON written by synth
    SyntheticSpec synthetic;
};

struct BetaSpec {
    std::string schedule = "fixed";  ///< fixed | fourth-root
    double value = 1.0;
};

struct SamplerSpec {
    int outer_iterations = 2000;
    int outer_burn_in = 500;
    double outer_step = 0.1;
    int inner_iterations = 300;
    int inner_burn_in = 50;
    int inner_thinning = 5;  ///< correlated inner batches bias the outer accept step
    int initial_inner_burn_in = 500;
    int final_iterations = 200;
    int final_burn_in = 150;
    int draws_per_xi = 1;
    int threads = 1;
    int max_retries = 3;
    TwoStageBudgets budgets(std::uint64_t seed) const;
};

struct ExperimentConfig {
    NetworkSpec network;
    PriorSpec prior;
    DataSpec data;
    BetaSpec beta;
    SamplerSpec sampler;
    std::uint64_t seed = 0;
    std::string output_dir;

    nlohmann::json to_json() const;
    /// Rejects unknown keys and wrong types with ConfigError.
    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig load(const std::filesystem::path& path);
    void validate() const;
    /// FNV-1a of the canonical JSON, output_dir and sampler.threads excluded.
    std::string hash() const;
};

/// Shortest round-trip decimal, independent of the global locale.
std::string format_double(double v);

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data);
Dataset read_dataset_csv(const std::filesystem::path& path);

struct Teacher {
    std::string kind = "network";  ///< network | function
    NetworkSpec network;
    WeightMatrix weights;
    double bound = 0.0;  ///< sup |g|

    Eigen::VectorXd values(const Eigen::MatrixXd& X) const;
    nlohmann::json to_json() const;
    static Teacher from_json(const nlohmann::json& j);
};

struct SyntheticData {
    Dataset data;
    Teacher teacher;
};
SyntheticData generate_synthetic(const ExperimentConfig& cfg);

/// Dataset and teacher from the config (file or synthetic); the teacher is absent for plain files.
struct LoadedData {
    Dataset data;
    std::optional<Teacher> teacher;
};
LoadedData load_data(const ExperimentConfig& cfg);

/// Fixed beta, or the square-regret optimal gain at sample size N for "fourth-root".
double resolve_beta(const ExperimentConfig& cfg, const Dataset& data, Eigen::Index N, double g_bound);

struct SuiteResult {
    std::string name;
    bool passed = false;
    double margin = 0.0;  ///< distance to the threshold, positive when passing
    std::string detail;
};
std::vector<std::string> verify_suite_names();
/// Empty selector runs every suite.
std::vector<SuiteResult> run_verify(const std::vector<std::string>& selectors, std::uint64_t seed);

struct BoundsRow {
    BoundKind kind;
    std::string row;  ///< optimal | integer | N_x2 | K_x2 | M_x2
    BoundInputs at;
    BoundBreakdown breakdown;
    double closed_form = 0.0;
};
struct BoundsReport {
    std::vector<BoundsRow> rows;
    bool monotone = true;
    double worst_closed_form_rel = 0.0;  ///< over square and msr, log, kl, m2 optimal rows
};
BoundsReport compute_bounds(const BoundInputs& inputs, bool non_odd);
void write_bounds_csv(std::ostream& os, const BoundsReport& report, const std::string& config_hash);

struct RegretRow {
    Eigen::Index N = 0;
    double beta = 0.0;
    RegretLedger ledger;
    double bound = 0.0;
};
/// Exact ledgers at dyadic N up to the data size, plus the full size.
std::vector<RegretRow> regret_sweep(const ExperimentConfig& cfg, const LoadedData& loaded, int threads = 1);

/// Entry point shared by the tool and the tests. Returns an ExitCode.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lccnet::cli

#include "lccnet/cli.hpp"

#include "lccnet/coupling.hpp"
#include "lccnet/estimators.hpp"
#include "lccnet/priors.hpp"
#include "lccnet/rng.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <locale>
#include <sstream>

namespace lccnet::cli {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------- config

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* k) { return it.key() == k; });
        if (!known) throw ConfigError("unknown key '" + where + "." + it.key() + "'");
    }
}

void read(const json& j, const char* key, std::int64_t& out, const std::string& where) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_number_integer()) throw ConfigError(where + "." + key + ": expected an integer");
    out = v.get<std::int64_t>();
}

void read(const json& j, const char* key, int& out, const std::string& where) {
    std::int64_t v = out;
    read(j, key, v, where);
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
        throw ConfigError(where + "." + key + ": out of range");
    out = static_cast<int>(v);
}

void read(const json& j, const char* key, double& out, const std::string& where) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_number()) throw ConfigError(where + "." + key + ": expected a number");
    out = v.get<double>();
}

void read(const json& j, const char* key, std::string& out, const std::string& where) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_string()) throw ConfigError(where + "." + key + ": expected a string");
    out = v.get<std::string>();
}

void one_of(const std::string& value, std::initializer_list<const char*> options, const std::string& what) {
    if (std::none_of(options.begin(), options.end(), [&](const char* o) { return value == o; }))
        throw ConfigError(what + ": unsupported value '" + value + "'");
}

json network_json(const NetworkSpec& n) {
    return {{"K", n.K},
            {"d", n.d},
            {"V", n.V},
            {"activation", {{"kind", n.activation.kind}, {"a", n.activation.a}, {"c", n.activation.c}}},
            {"signs", n.signs}};
}

NetworkSpec network_from(const json& j, const std::string& where) {
    NetworkSpec n;
    check_keys(j, {"K", "d", "V", "activation", "signs"}, where);
    read(j, "K", n.K, where);
    read(j, "d", n.d, where);
    read(j, "V", n.V, where);
    if (j.contains("activation")) {
        const auto& a = j.at("activation");
        const std::string w = where + ".activation";
        check_keys(a, {"kind", "a", "c"}, w);
        read(a, "kind", n.activation.kind, w);
        read(a, "a", n.activation.a, w);
        read(a, "c", n.activation.c, w);
    }
    if (j.contains("signs")) {
        const auto& s = j.at("signs");
        if (!s.is_array()) throw ConfigError(where + ".signs: expected an array");
        for (const auto& e : s) {
            if (!e.is_number_integer()) throw ConfigError(where + ".signs: expected integers");
            n.signs.push_back(e.get<int>());
        }
    }
    return n;
}

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

}  // namespace

Activation ActivationSpec::make() const {
    if (kind == "tanh") return Activation::tanh_scaled(a, c);
    if (kind == "squared_relu") return Activation::squared_relu(a);
    throw ConfigError("activation: unsupported kind '" + kind + "'");
}

NetworkConfig NetworkSpec::make() const {
    NetworkConfig cfg = NetworkConfig::make(K, d, V, activation.make());
    if (!signs.empty()) cfg.signs = signs;
    cfg.validate();
    return cfg;
}

TwoStageBudgets SamplerSpec::budgets(std::uint64_t seed) const {
    TwoStageBudgets b;
    b.nested.outer.iterations = outer_iterations;
    b.nested.outer.burn_in = outer_burn_in;
    b.nested.outer.step_size = outer_step;
    b.nested.outer.seed = seed;
    b.nested.outer.chain_id = 1;
    b.nested.inner.iterations = inner_iterations;
    b.nested.inner.burn_in = inner_burn_in;
    b.nested.inner.thinning = inner_thinning;
    b.nested.inner.seed = seed;
    b.nested.inner.chain_id = 2;
    b.nested.initial_inner_burn_in = initial_inner_burn_in;
    b.nested.max_retries = max_retries;
    b.final_chain.iterations = final_iterations;
    b.final_chain.burn_in = final_burn_in;
    b.final_chain.seed = seed + 0x9E3779B97F4A7C15ull;
    b.draws_per_xi = draws_per_xi;
    b.threads = threads;
    return b;
}

json ExperimentConfig::to_json() const {
    return {{"network", network_json(network)},
            {"prior", {{"kind", prior.kind}, {"M", prior.M}}},
            {"data",
             {{"path", data.path},
              {"teacher_path", data.teacher_path},
              {"synthetic",
               {{"N", data.synthetic.N},
                {"teacher", data.synthetic.teacher},
                {"noise", data.synthetic.noise},
                {"sigma", data.synthetic.sigma}}}}},
            {"beta", {{"schedule", beta.schedule}, {"value", beta.value}}},
            {"sampler",
             {{"outer_iterations", sampler.outer_iterations},
              {"outer_burn_in", sampler.outer_burn_in},
              {"outer_step", sampler.outer_step},
              {"inner_iterations", sampler.inner_iterations},
              {"inner_burn_in", sampler.inner_burn_in},
              {"inner_thinning", sampler.inner_thinning},
              {"initial_inner_burn_in", sampler.initial_inner_burn_in},
              {"final_iterations", sampler.final_iterations},
              {"final_burn_in", sampler.final_burn_in},
              {"draws_per_xi", sampler.draws_per_xi},
              {"threads", sampler.threads},
              {"max_retries", sampler.max_retries}}},
            {"seed", seed},
            {"output_dir", output_dir}};
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    ExperimentConfig c;
    check_keys(j, {"network", "prior", "data", "beta", "sampler", "seed", "output_dir"}, "config");
    if (j.contains("network")) c.network = network_from(j.at("network"), "network");
    if (j.contains("prior")) {
        const auto& p = j.at("prior");
        check_keys(p, {"kind", "M"}, "prior");
        read(p, "kind", c.prior.kind, "prior");
        read(p, "M", c.prior.M, "prior");
    }
    if (j.contains("data")) {
        const auto& d = j.at("data");
        check_keys(d, {"path", "teacher_path", "synthetic"}, "data");
        read(d, "path", c.data.path, "data");
        read(d, "teacher_path", c.data.teacher_path, "data");
        if (d.contains("synthetic")) {
            const auto& s = d.at("synthetic");
            const std::string w = "data.synthetic";
            check_keys(s, {"N", "teacher", "noise", "sigma"}, w);
            std::int64_t N = c.data.synthetic.N;
            read(s, "N", N, w);
            c.data.synthetic.N = N;
            read(s, "teacher", c.data.synthetic.teacher, w);
            read(s, "noise", c.data.synthetic.noise, w);
            read(s, "sigma", c.data.synthetic.sigma, w);
        }
    }
    if (j.contains("beta")) {
        const auto& b = j.at("beta");
        check_keys(b, {"schedule", "value"}, "beta");
        read(b, "schedule", c.beta.schedule, "beta");
        read(b, "value", c.beta.value, "beta");
    }
    if (j.contains("sampler")) {
        const auto& s = j.at("sampler");
        auto& t = c.sampler;
        check_keys(s,
                   {"outer_iterations", "outer_burn_in", "outer_step", "inner_iterations", "inner_burn_in", "inner_thinning",
                    "initial_inner_burn_in", "final_iterations", "final_burn_in", "draws_per_xi", "threads",
                    "max_retries"},
                   "sampler");
        read(s, "outer_iterations", t.outer_iterations, "sampler");
        read(s, "outer_burn_in", t.outer_burn_in, "sampler");
        read(s, "outer_step", t.outer_step, "sampler");
        read(s, "inner_iterations", t.inner_iterations, "sampler");
        read(s, "inner_burn_in", t.inner_burn_in, "sampler");
        read(s, "inner_thinning", t.inner_thinning, "sampler");
        read(s, "initial_inner_burn_in", t.initial_inner_burn_in, "sampler");
        read(s, "final_iterations", t.final_iterations, "sampler");
        read(s, "final_burn_in", t.final_burn_in, "sampler");
        read(s, "draws_per_xi", t.draws_per_xi, "sampler");
        read(s, "threads", t.threads, "sampler");
        read(s, "max_retries", t.max_retries, "sampler");
    }
    if (j.contains("seed")) {
        const auto& s = j.at("seed");
        if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0))
            throw ConfigError("seed: expected a nonnegative integer");
        c.seed = s.get<std::uint64_t>();
    }
    read(j, "output_dir", c.output_dir, "config");
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    return from_json(j);
}

void ExperimentConfig::validate() const {
    if (network.K < 1 || network.d < 1) throw ConfigError("network: need K >= 1 and d >= 1");
    if (!(network.V > 0.0)) throw ConfigError("network: V must be positive");
    if (!network.signs.empty() && network.signs.size() != static_cast<std::size_t>(network.K))
        throw ConfigError("network.signs: need one sign per neuron");
    try {
        network.make();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("network: ") + e.what());
    }
    one_of(prior.kind, {"continuous", "discrete"}, "prior.kind");
    if (prior.M < 1) throw ConfigError("prior.M must be positive");
    const auto& s = data.synthetic;
    if (s.N < 0) throw ConfigError("data.synthetic.N must be nonnegative");
    one_of(s.teacher, {"network", "function"}, "data.synthetic.teacher");
    one_of(s.noise, {"gaussian", "bounded", "none"}, "data.synthetic.noise");
    if (!(s.sigma >= 0.0)) throw ConfigError("data.synthetic.sigma must be nonnegative");
    one_of(beta.schedule, {"fixed", "fourth-root"}, "beta.schedule");
    if (!(beta.value > 0.0)) throw ConfigError("beta.value must be positive");
    const auto& t = sampler;
    if (t.outer_iterations < 1 || t.outer_burn_in < 0 || t.outer_burn_in >= t.outer_iterations)
        throw ConfigError("sampler: need 0 <= outer_burn_in < outer_iterations");
    if (t.inner_iterations < 1 || t.inner_burn_in < 0 || t.inner_burn_in >= t.inner_iterations)
        throw ConfigError("sampler: need 0 <= inner_burn_in < inner_iterations");
    if (t.inner_thinning < 1) throw ConfigError("sampler: inner_thinning must be positive");
    if (t.final_iterations < 1 || t.final_burn_in < 0 || t.final_burn_in >= t.final_iterations)
        throw ConfigError("sampler: need 0 <= final_burn_in < final_iterations");
    if (!(t.outer_step > 0.0)) throw ConfigError("sampler.outer_step must be positive");
    if (t.initial_inner_burn_in < 0 || t.max_retries < 0) throw ConfigError("sampler: negative count");
    if (t.draws_per_xi < 1 || t.draws_per_xi > t.final_iterations - t.final_burn_in)
        throw ConfigError("sampler.draws_per_xi must be between 1 and the retained final draws");
    if (t.threads < 1) throw ConfigError("sampler.threads must be positive");
}

std::string ExperimentConfig::hash() const {
    json j = to_json();
    j.erase("output_dir");
    j["sampler"].erase("threads");  // results do not depend on it
    return fnv1a_hex(j.dump());
}

// ---------------------------------------------------------------- data files

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void write_dataset_csv(const fs::path& path, const Dataset& data) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot write " + path.string());
    os.imbue(std::locale::classic());
    for (Eigen::Index j = 0; j < data.d(); ++j) os << 'x' << j + 1 << ',';
    os << "y\n";
    for (Eigen::Index i = 0; i < data.N(); ++i) {
        for (Eigen::Index j = 0; j < data.d(); ++j) os << format_double(data.X(i, j)) << ',';
        os << format_double(data.y[i]) << '\n';
    }
}

Dataset read_dataset_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open dataset " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("dataset " + path.string() + ": missing header");
    const auto cols = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ',') + 1);
    if (cols < 2) throw ConfigError("dataset: need at least one x column and y");
    std::vector<double> cells;
    Eigen::Index rows = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::size_t start = 0;
        Eigen::Index count = 0;
        while (true) {
            const std::size_t end = std::min(line.find(',', start), line.size());
            std::string_view cell(line.data() + start, end - start);
            while (!cell.empty() && cell.front() == ' ') cell.remove_prefix(1);
            while (!cell.empty() && cell.back() == ' ') cell.remove_suffix(1);
            double v = 0.0;
            const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
                throw ConfigError("dataset line " + std::to_string(rows + 2) + ": bad number '" + std::string(cell) + "'");
            cells.push_back(v);
            ++count;
            if (end == line.size()) break;
            start = end + 1;
        }
        if (count != cols) throw ConfigError("dataset line " + std::to_string(rows + 2) + ": wrong column count");
        ++rows;
    }
    Dataset data;
    data.X.resize(rows, cols - 1);
    data.y.resize(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j + 1 < cols; ++j) data.X(i, j) = cells[static_cast<std::size_t>(i * cols + j)];
        data.y[i] = cells[static_cast<std::size_t>(i * cols + cols - 1)];
    }
    try {
        data.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("dataset ") + path.string() + ": " + e.what());
    }
    return data;
}

// ---------------------------------------------------------------- teacher and synthetic data

Eigen::VectorXd Teacher::values(const Eigen::MatrixXd& X) const {
    if (kind == "network") return network_outputs(network.make(), weights, X, X.rows());
    Eigen::VectorXd out(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) out[i] = 0.8 * std::sin(2.0 * X(i, X.cols() - 1));
    return out;
}

json Teacher::to_json() const {
    json w = json::array();
    for (Eigen::Index k = 0; k < weights.rows(); ++k) {
        std::vector<double> row(weights.row(k).data(), weights.row(k).data() + weights.cols());
        w.push_back(row);
    }
    return {{"kind", kind}, {"network", network_json(network)}, {"weights", w}, {"bound", bound}};
}

Teacher Teacher::from_json(const json& j) {
    Teacher t;
    check_keys(j, {"kind", "network", "weights", "bound"}, "teacher");
    read(j, "kind", t.kind, "teacher");
    one_of(t.kind, {"network", "function"}, "teacher.kind");
    if (j.contains("network")) t.network = network_from(j.at("network"), "teacher.network");
    read(j, "bound", t.bound, "teacher");
    if (t.kind == "network") {
        const auto& w = j.at("weights");
        t.weights.resize(t.network.K, t.network.d);
        if (!w.is_array() || w.size() != static_cast<std::size_t>(t.network.K))
            throw ConfigError("teacher.weights: expected K rows");
        for (int k = 0; k < t.network.K; ++k) {
            const auto row = w.at(static_cast<std::size_t>(k)).get<std::vector<double>>();
            if (row.size() != static_cast<std::size_t>(t.network.d)) throw ConfigError("teacher.weights: expected d columns");
            for (int c = 0; c < t.network.d; ++c) t.weights(k, c) = row[static_cast<std::size_t>(c)];
        }
    }
    return t;
}

SyntheticData generate_synthetic(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto& s = cfg.data.synthetic;
    const int d = cfg.network.d;
    Rng rng(cfg.seed, 101);
    SyntheticData out;
    Teacher& t = out.teacher;
    t.kind = s.teacher;
    t.network = cfg.network;
    if (t.kind == "network") {
        t.weights = sample_continuous(ContinuousL1Prior{d, cfg.network.K}, rng);
        t.bound = t.network.make().activation.true_bounds().a0 * cfg.network.V;
    } else {
        t.weights = WeightMatrix(0, d);
        t.bound = 0.8;
    }
    Dataset& data = out.data;
    data.X.resize(s.N, d);
    for (Eigen::Index i = 0; i < s.N; ++i) {
        data.X(i, 0) = 1.0;
        for (int j = 1; j < d; ++j) data.X(i, j) = std::clamp(rng.uniform(-1.0, 1.0), -1.0, 1.0);
    }
    data.y = t.values(data.X);
    for (Eigen::Index i = 0; i < s.N; ++i) {
        if (s.noise == "gaussian") data.y[i] += s.sigma * rng.normal();
        else if (s.noise == "bounded") data.y[i] += s.sigma * std::sqrt(3.0) * rng.uniform(-1.0, 1.0);
    }
    return out;
}

LoadedData load_data(const ExperimentConfig& cfg) {
    LoadedData out;
    if (cfg.data.path.empty()) {
        auto syn = generate_synthetic(cfg);
        out.data = std::move(syn.data);
        out.teacher = std::move(syn.teacher);
        return out;
    }
    out.data = read_dataset_csv(cfg.data.path);
    if (out.data.d() != cfg.network.d)
        throw ConfigError("dataset has " + std::to_string(out.data.d()) + " x columns but network.d = " +
                          std::to_string(cfg.network.d));
    if (!cfg.data.teacher_path.empty()) {
        std::ifstream in(cfg.data.teacher_path);
        if (!in) throw ConfigError("cannot open teacher " + cfg.data.teacher_path);
        try {
            out.teacher = Teacher::from_json(json::parse(in));
        } catch (const json::exception& e) {
            throw ConfigError(std::string("teacher: ") + e.what());
        }
    }
    return out;
}

namespace {

BoundInputs bound_inputs_for(const ExperimentConfig& cfg, const Dataset& data, Eigen::Index N, double g_bound,
                             double beta) {
    const auto bd = cfg.network.make().activation.bounds();
    if (cfg.network.d < 2) throw ConfigError("bounds need d >= 2");
    BoundInputs in;
    in.a0 = bd.a0;
    in.a1 = bd.a1;
    in.a2 = bd.a2;
    in.V = cfg.network.V;
    in.b = g_bound;
    in.sigma = cfg.data.synthetic.sigma > 0.0 ? cfg.data.synthetic.sigma : 1.0;
    in.C_N = N >= 1 ? compute_C_n(data, N, bd.a0, cfg.network.V) : bd.a0 * cfg.network.V + g_bound;
    in.d = cfg.network.d;
    in.N = static_cast<double>(std::max<Eigen::Index>(N, 1));
    in.M = cfg.prior.M;
    in.K = cfg.network.K;
    in.beta = beta;
    return in;
}

// competitor values and sup |g|; zero when no teacher is known
std::pair<Eigen::VectorXd, double> competitor(const ExperimentConfig& cfg, const LoadedData& loaded) {
    if (loaded.teacher) return {loaded.teacher->values(loaded.data.X), loaded.teacher->bound};
    return {Eigen::VectorXd::Zero(loaded.data.N()), cfg.network.make().activation.bounds().a0 * cfg.network.V};
}

}  // namespace

double resolve_beta(const ExperimentConfig& cfg, const Dataset& data, Eigen::Index N, double g_bound) {
    if (cfg.beta.schedule == "fixed") return cfg.beta.value;
    const BoundInputs in = bound_inputs_for(cfg, data, N, g_bound, 1.0);
    return optimal_hyperparams(BoundKind::SquareRegret, in).beta;
}

// ---------------------------------------------------------------- bounds

BoundsReport compute_bounds(const BoundInputs& raw, bool non_odd) {
    raw.validate();
    BoundInputs base = raw;
    if (non_odd) base.V *= 2.0;  // K is chosen below, so only V is rewritten up front
    BoundsReport rep;
    for (BoundKind kind : all_bound_kinds()) {
        const OptimalHyperparams opt = optimal_hyperparams(kind, base);
        BoundInputs at = base;
        if (kind == BoundKind::M2Msr) at.b = std::min(at.b, at.a0 * at.V);
        at.beta = opt.beta;
        at.K = opt.K;
        at.M = opt.M;
        auto add = [&](const std::string& row, const BoundInputs& in) {
            BoundsRow r{kind, row, in, bound_calculator(kind, in), opt.closed_form};
            r.breakdown.non_odd = non_odd;
            rep.rows.push_back(r);
            return rep.rows.back().breakdown;
        };
        const auto best = add("optimal", at);
        rep.worst_closed_form_rel =
            std::max(rep.worst_closed_form_rel, std::abs(best.total - opt.closed_form) / opt.closed_form);
        BoundInputs integer = at;
        integer.K = opt.K_int;
        integer.M = opt.M_int;
        add("integer", integer);
        BoundInputs n2 = at, k2 = at, m2 = at;
        n2.N *= 2.0;
        k2.K *= 2.0;
        m2.M *= 2.0;
        rep.monotone = rep.monotone && add("N_x2", n2).prior_mass < best.prior_mass;
        rep.monotone = rep.monotone && add("K_x2", k2).width < best.width;
        rep.monotone = rep.monotone && add("M_x2", m2).grid < best.grid;
    }
    return rep;
}

void write_bounds_csv(std::ostream& os, const BoundsReport& report, const std::string& config_hash) {
    if (!config_hash.empty()) os << "# config_hash=" << config_hash << '\n';
    os << "kind,row,non_odd,beta,K,M,N,prior_mass,width,grid,beta_term,residual,total,closed_form,warnings\n";
    for (const auto& r : report.rows) {
        const auto& b = r.breakdown;
        std::string warn;
        for (const auto& w : b.warnings) warn += (warn.empty() ? "" : ";") + w;
        os << bound_kind_name(r.kind) << ',' << r.row << ',' << (b.non_odd ? 1 : 0) << ',' << format_double(r.at.beta)
           << ',' << format_double(r.at.K) << ',' << format_double(r.at.M) << ',' << format_double(r.at.N) << ','
           << format_double(b.prior_mass) << ',' << format_double(b.width) << ',' << format_double(b.grid) << ','
           << format_double(b.beta_term) << ',' << format_double(b.residual) << ',' << format_double(b.total) << ','
           << format_double(r.closed_form) << ',' << warn << '\n';
    }
}

// ---------------------------------------------------------------- regret sweep

std::vector<RegretRow> regret_sweep(const ExperimentConfig& cfg, const LoadedData& loaded, int threads) {
    if (cfg.prior.kind != "discrete") throw ConfigError("regret needs prior.kind = discrete");
    const Eigen::Index total = loaded.data.N();
    std::vector<RegretRow> rows;
    if (total == 0) return rows;
    const NetworkConfig net = cfg.network.make();
    auto grid = std::make_shared<const ProductGrid>(cfg.network.d, cfg.network.K, cfg.prior.M);
    const auto [g, g_bound] = competitor(cfg, loaded);

    std::vector<Eigen::Index> sizes;
    for (Eigen::Index n = 1; n < total; n *= 2) sizes.push_back(n);
    sizes.push_back(total);

    std::vector<PosteriorSnapshot> fixed;
    if (cfg.beta.schedule == "fixed")
        fixed = sequential_discrete_posteriors(net, grid, loaded.data, total, cfg.beta.value, threads);
    for (Eigen::Index N : sizes) {
        RegretRow row;
        row.N = N;
        row.beta = resolve_beta(cfg, loaded.data, N, g_bound);
        std::vector<PosteriorSnapshot> own;
        if (fixed.empty()) own = sequential_discrete_posteriors(net, grid, loaded.data, N, row.beta, threads);
        const std::vector<PosteriorSnapshot>& snaps = fixed.empty() ? own : fixed;
        row.ledger = regret_ledger(std::span(snaps).first(static_cast<std::size_t>(N)), net, loaded.data, g.head(N),
                                   row.beta, g_bound);
        ResidualTerms res;
        const Eigen::VectorXd eps = loaded.data.y.head(N) - g.head(N);
        res.eps_tilde = std::vector<double>(eps.data(), eps.data() + eps.size());
        row.bound = bound_calculator(BoundKind::SquareRegret, bound_inputs_for(cfg, loaded.data, N, g_bound, row.beta), res)
                        .total;
        rows.push_back(std::move(row));
    }
    return rows;
}

// ---------------------------------------------------------------- commands

namespace {

fs::path output_dir(const std::string& flag, const std::string& from_config) {
    std::string dir = flag;
    if (dir.empty()) dir = from_config;
    if (dir.empty())
        if (const char* env = std::getenv("LCCNET_OUTPUT_DIR")) dir = env;
    if (dir.empty()) dir = "lccnet_output";
    fs::create_directories(dir);
    return dir;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot write " + path.string());
    os.imbue(std::locale::classic());
    return os;
}

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<Eigen::Index> N;
    std::optional<double> beta;
    std::optional<int> K, d, M, threads;
    std::optional<std::string> noise, teacher, data, teacher_file, prior;
    std::optional<double> sigma;

    void add(CLI::App* cmd) {
        cmd->add_option("--seed", seed, "master seed");
        cmd->add_option("--N", N, "synthetic sample size");
        cmd->add_option("--beta", beta, "fixed gain (sets the schedule to fixed)");
        cmd->add_option("--K", K, "neurons");
        cmd->add_option("--d", d, "input dimension including the constant");
        cmd->add_option("--M", M, "grid resolution of the discrete prior");
        cmd->add_option("--threads", threads, "worker threads");
        cmd->add_option("--noise", noise, "gaussian | bounded | none");
        cmd->add_option("--sigma", sigma, "noise scale");
        cmd->add_option("--teacher", teacher, "network | function");
        cmd->add_option("--data", data, "dataset CSV instead of synthetic data");
        cmd->add_option("--teacher-file", teacher_file, "teacher JSON written by synth");
        cmd->add_option("--prior", prior, "continuous | discrete");
    }

    void apply(ExperimentConfig& c) const {
        if (seed) c.seed = *seed;
        if (N) c.data.synthetic.N = *N;
        if (beta) c.beta = {"fixed", *beta};
        if (K) c.network.K = *K, c.network.signs.clear();
        if (d) c.network.d = *d;
        if (prior) c.prior.kind = *prior;
        if (M) c.prior = {"discrete", *M};
        if (threads) c.sampler.threads = *threads;
        if (noise) c.data.synthetic.noise = *noise;
        if (sigma) c.data.synthetic.sigma = *sigma;
        if (teacher) c.data.synthetic.teacher = *teacher;
        if (data) c.data.path = *data;
        if (teacher_file) c.data.teacher_path = *teacher_file;
        c.validate();
    }
};

ExperimentConfig build_config(const std::string& path, const Overrides& ov) {
    ExperimentConfig c = path.empty() ? ExperimentConfig{} : ExperimentConfig::load(path);
    ov.apply(c);
    return c;
}

json report_json(const ConditionReport& r, const CouplingParams& p) {
    return {{"C_N", r.C_N},
            {"delta", r.delta_used},
            {"rho", r.rho},
            {"b_threshold", p.b_threshold},
            {"beta", p.beta},
            {"n", p.n},
            {"a0", r.bounds.a0},
            {"a1", r.bounds.a1},
            {"a2", r.bounds.a2},
            {"A1", r.A1},
            {"A2", r.A2},
            {"A3", r.A3},
            {"H1", r.H1},
            {"H2", r.H2},
            {"cond_K", r.cond_K},
            {"cond_Kd", r.cond_Kd},
            {"cond_H", r.cond_H},
            {"beta_N_ok", r.beta_N_ok}};
}

int cmd_synth(const ExperimentConfig& c, const fs::path& dir, std::ostream& out) {
    const auto syn = generate_synthetic(c);
    write_dataset_csv(dir / "data.csv", syn.data);
    json t = syn.teacher.to_json();
    open_out(dir / "teacher.json") << t.dump(2) << '\n';
    open_out(dir / "config.json") << c.to_json().dump(2) << '\n';
    out << "wrote " << syn.data.N() << " rows to " << (dir / "data.csv").string() << " (config_hash=" << c.hash() << ")\n";
    return kOk;
}

int cmd_sample(const ExperimentConfig& c, const fs::path& dir, std::ostream& out) {
    if (c.prior.kind != "continuous") throw ConfigError("sample needs prior.kind = continuous");
    const LoadedData loaded = load_data(c);
    const Eigen::Index n = loaded.data.N();
    if (n < 1) throw ConfigError("sample needs at least one observation");
    const NetworkConfig net = c.network.make();
    const auto [g, g_bound] = competitor(c, loaded);
    const double beta = resolve_beta(c, loaded.data, n, g_bound);
    const CouplingParams params = make_coupling_params(net, loaded.data, n, beta);
    const ConditionReport report = check_logconcavity_conditions(net, loaded.data, beta, n);
    const std::string hash = c.hash();

    const TwoStageResult res = two_stage_sample(net, loaded.data, params, c.sampler.budgets(c.seed));

    auto chains = open_out(dir / "chains.jsonl");
    for (std::size_t i = 0; i < res.draws.size(); ++i) {
        const Eigen::VectorXd w = flatten(res.draws[i]);
        json rec{{"draw", i},
                 {"xi_index", res.xi_index[i]},
                 {"w", std::vector<double>(w.data(), w.data() + w.size())},
                 {"config_hash", hash}};
        chains << rec.dump() << '\n';
    }
    auto xis = open_out(dir / "xi_chain.jsonl");
    for (std::size_t i = 0; i < res.marginal.samples.size(); ++i) {
        const Xi& xi = res.marginal.samples[i];
        json rec{{"step", res.marginal.steps[i]},
                 {"xi", std::vector<double>(xi.data(), xi.data() + xi.size())},
                 {"score_se", res.marginal.score_se[i]},
                 {"config_hash", hash}};
        xis << rec.dump() << '\n';
    }
    json cert = report_json(report, params);
    cert["config_hash"] = hash;
    open_out(dir / "certificate.json") << cert.dump(2) << '\n';
    const auto& md = res.marginal.diagnostics;
    json diag{{"config_hash", hash},
              {"draws", res.draws.size()},
              {"xi_acceptance", md.acceptance_rate},
              {"xi_step_size", md.final_step_size},
              {"xi_ess", md.ess_estimate},
              {"xi_support_rejections", md.support_rejections},
              {"inner_acceptance", res.marginal.inner_acceptance},
              {"inner_chains", res.marginal.inner_chains},
              {"inner_retries", res.marginal.retries},
              {"final_acceptance", res.final_acceptance},
              {"final_support_rejections", res.final_support_rejections}};
    open_out(dir / "diagnostics.json") << diag.dump(2) << '\n';
    out << "sampled " << res.draws.size() << " draws, xi acceptance " << format_double(md.acceptance_rate)
        << ", conditions " << (report.cond_H && report.cond_K && report.cond_Kd ? "met" : "not met")
        << " (config_hash=" << hash << ")\n";
    return kOk;
}

int cmd_regret(const ExperimentConfig& c, const fs::path& dir, std::ostream& out) {
    const LoadedData loaded = load_data(c);
    const auto rows = regret_sweep(c, loaded, c.sampler.threads);
    const std::string hash = c.hash();
    auto ledger = open_out(dir / "ledger.csv");
    write_ledger_csv(ledger, rows.empty() ? RegretLedger{} : rows.back().ledger, hash);
    auto curve = open_out(dir / "realized_vs_bound.csv");
    const bool realizable = loaded.teacher && loaded.teacher->kind == "network";
    curve << "# config_hash=" << hash << '\n' << "N,beta,R_square,R_rand,R_log,bound,hull_realizable,holds\n";
    bool all_hold = true;
    for (const auto& r : rows) {
        const bool holds = r.ledger.R_square <= r.bound;
        all_hold = all_hold && holds;
        curve << r.N << ',' << format_double(r.beta) << ',' << format_double(r.ledger.R_square) << ','
              << format_double(r.ledger.R_rand) << ',' << format_double(r.ledger.R_log) << ',' << format_double(r.bound)
              << ',' << (realizable ? 1 : 0) << ',' << (holds ? 1 : 0) << '\n';
    }
    out << "regret ledger with " << (rows.empty() ? 0 : rows.back().N) << " rows";
    if (!rows.empty())
        out << ": R_square " << format_double(rows.back().ledger.R_square) << " vs bound "
            << format_double(rows.back().bound) << (all_hold ? "" : " (bound exceeded)");
    out << " (config_hash=" << hash << ")\n";
    return kOk;
}

int cmd_bounds(const BoundInputs& in, bool non_odd, const fs::path& dir, std::ostream& out) {
    const BoundsReport rep = compute_bounds(in, non_odd);
    json j{{"a0", in.a0}, {"a1", in.a1}, {"a2", in.a2}, {"V", in.V},     {"b", in.b},       {"sigma", in.sigma},
           {"C_N", in.C_N}, {"d", in.d}, {"N", in.N},   {"beta", in.beta}, {"non_odd", non_odd}};
    const std::string hash = fnv1a_hex(j.dump());
    auto csv = open_out(dir / "bounds.csv");
    write_bounds_csv(csv, rep, hash);
    for (const auto& r : rep.rows) {
        if (r.row != "optimal" && r.row != "integer") continue;
        out << std::left << std::setw(14) << bound_kind_name(r.kind) << std::setw(8) << r.row
            << " beta=" << format_double(r.at.beta) << " K=" << format_double(r.at.K) << " M=" << format_double(r.at.M)
            << " total=" << format_double(r.breakdown.total);
        if (r.row == "optimal") out << " closed_form=" << format_double(r.closed_form);
        for (const auto& w : r.breakdown.warnings) out << " [warning: " << w << ']';
        out << '\n';
    }
    out << "closed-form max relative difference " << format_double(rep.worst_closed_form_rel) << ", monotone "
        << (rep.monotone ? "yes" : "no") << " (config_hash=" << hash << ")\n";
    return rep.monotone ? kOk : kFailure;
}

int cmd_verify(const std::vector<std::string>& suites, std::uint64_t seed, std::ostream& out) {
    const auto results = run_verify(suites, seed);
    bool ok = true;
    for (const auto& r : results) {
        ok = ok && r.passed;
        out << (r.passed ? "PASS " : "FAIL ") << r.name << " margin=" << format_double(r.margin) << ' ' << r.detail
            << '\n';
    }
    return ok ? kOk : kFailure;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Sampling and bound verification for Bayesian single-hidden-layer networks"};
    app.require_subcommand(1);

    std::string config_path, out_flag;
    Overrides ov;
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset and its teacher");
    auto* sample = app.add_subcommand("sample", "two-stage posterior sampling");
    auto* regret = app.add_subcommand("regret", "exact regret ledgers and realized-vs-bound curves");
    for (auto* cmd : {synth, sample, regret}) {
        cmd->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
        cmd->add_option("--output-dir", out_flag, "output directory");
        ov.add(cmd);
    }

    std::vector<std::string> suites;
    std::uint64_t verify_seed = 1;
    auto* verify = app.add_subcommand("verify", "run property suites");
    verify->add_option("suites", suites, "suite names, default all");
    verify->add_option("--seed", verify_seed, "seed");

    BoundInputs bin;
    bin.beta = 0.0;  // 0: take 1 / sigma^2
    std::string inputs_path;
    bool non_odd = false;
    auto* bounds = app.add_subcommand("bounds", "bound table with optimal hyperparameters");
    bounds->add_option("--inputs", inputs_path, "JSON file with any of the flags below")->check(CLI::ExistingFile);
    std::optional<double> a0, a1, a2, V, b, sigma, C_N, N, beta;
    std::optional<int> d;
    bounds->add_option("--a0", a0);
    bounds->add_option("--a1", a1);
    bounds->add_option("--a2", a2);
    bounds->add_option("--V", V);
    bounds->add_option("--b", b, "sup |g|");
    bounds->add_option("--sigma", sigma);
    bounds->add_option("--C-N", C_N);
    bounds->add_option("--d", d);
    bounds->add_option("--N", N);
    bounds->add_option("--beta", beta, "gain for log_regret and kl, default 1/sigma^2");
    bounds->add_flag("--non-odd", non_odd, "activation without odd symmetry");
    bounds->add_option("--output-dir", out_flag, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (verify->parsed()) return cmd_verify(suites, verify_seed, out);
        if (bounds->parsed()) {
            if (!inputs_path.empty()) {
                std::ifstream in(inputs_path);
                json j;
                try {
                    j = json::parse(in);
                } catch (const json::parse_error& e) {
                    throw ConfigError(std::string("inputs: ") + e.what());
                }
                check_keys(j, {"a0", "a1", "a2", "V", "b", "sigma", "C_N", "d", "N", "beta", "non_odd"}, "inputs");
                read(j, "a0", bin.a0, "inputs");
                read(j, "a1", bin.a1, "inputs");
                read(j, "a2", bin.a2, "inputs");
                read(j, "V", bin.V, "inputs");
                read(j, "b", bin.b, "inputs");
                read(j, "sigma", bin.sigma, "inputs");
                read(j, "C_N", bin.C_N, "inputs");
                read(j, "d", bin.d, "inputs");
                read(j, "N", bin.N, "inputs");
                read(j, "beta", bin.beta, "inputs");
                if (j.contains("non_odd")) non_odd = non_odd || j.at("non_odd").get<bool>();
            }
            for (auto [opt, field] : {std::pair{&a0, &bin.a0}, {&a1, &bin.a1}, {&a2, &bin.a2}, {&V, &bin.V},
                                      {&b, &bin.b}, {&sigma, &bin.sigma}, {&C_N, &bin.C_N}, {&N, &bin.N},
                                      {&beta, &bin.beta}})
                if (*opt) *field = **opt;
            if (d) bin.d = *d;
            if (bin.beta == 0.0) bin.beta = 1.0 / (bin.sigma * bin.sigma);
            try {
                bin.validate();
            } catch (const std::invalid_argument& e) {
                throw ConfigError(e.what());
            }
            return cmd_bounds(bin, non_odd, output_dir(out_flag, ""), out);
        }
        const ExperimentConfig c = build_config(config_path, ov);
        const fs::path dir = output_dir(out_flag, c.output_dir);
        if (synth->parsed()) return cmd_synth(c, dir, out);
        if (sample->parsed()) return cmd_sample(c, dir, out);
        if (regret->parsed()) return cmd_regret(c, dir, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const EnumerationLimitError& e) {
        err << "oracle error: " << e.what() << '\n';
        return kOracleError;
    } catch (const OracleError& e) {
        err << "oracle error: " << e.what() << '\n';
        return kOracleError;
    } catch (const ProjectionError& e) {
        err << "oracle error: " << e.what() << '\n';
        return kOracleError;
    } catch (const SamplerError& e) {
        err << "sampler error: " << e.what() << '\n';
        return kSamplerError;
    } catch (const nlohmann::json::exception& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::invalid_argument& e) {
        err << "invalid input: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kFailure;
    }
    return kFailure;
}

}  // namespace lccnet::cli

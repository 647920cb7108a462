#include "lccnet/cli.hpp"
#include "lccnet/coupling.hpp"
#include "lccnet/estimators.hpp"
#include "lccnet/network.hpp"
#include "lccnet/priors.hpp"
#include "lccnet/risk.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <sstream>

namespace py = pybind11;
using namespace lccnet;

namespace {

Dataset make_dataset(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    Dataset data{X, y};
    data.validate();
    return data;
}

py::tuple run_command(const std::vector<std::string>& args) {
    std::vector<const char*> argv{"lccnet"};
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    int code;
    {
        py::gil_scoped_release release;
        code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    }
    return py::make_tuple(code, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Bayesian two-layer network posteriors: exact grid tables, bounds and checks";

    py::class_<DerivativeBounds>(m, "DerivativeBounds")
        .def_readonly("a0", &DerivativeBounds::a0)
        .def_readonly("a1", &DerivativeBounds::a1)
        .def_readonly("a2", &DerivativeBounds::a2);

    py::class_<Activation>(m, "Activation")
        .def_static("tanh_scaled", &Activation::tanh_scaled, py::arg("a") = 1.0, py::arg("c") = 1.0)
        .def_static("squared_relu", &Activation::squared_relu, py::arg("a") = 1.0)
        .def_property_readonly("name", &Activation::name)
        .def_property_readonly("odd_symmetric", &Activation::odd_symmetric)
        .def("value", &Activation::value)
        .def("d1", &Activation::d1)
        .def("d2", &Activation::d2)
        .def("bounds", &Activation::bounds);

    py::class_<NetworkConfig>(m, "NetworkConfig")
        .def(py::init([](int K, int d, double V, const Activation& act) { return NetworkConfig::make(K, d, V, act); }),
             py::arg("K"), py::arg("d"), py::arg("V") = 1.0, py::arg("activation") = Activation::tanh_scaled())
        .def_readonly("K", &NetworkConfig::K)
        .def_readonly("d", &NetworkConfig::d)
        .def_readonly("V", &NetworkConfig::V)
        .def_readwrite("signs", &NetworkConfig::signs)
        .def("validate", &NetworkConfig::validate);

    py::class_<Dataset>(m, "Dataset")
        .def(py::init(&make_dataset), py::arg("X"), py::arg("y"))
        .def_readonly("X", &Dataset::X)
        .def_readonly("y", &Dataset::y)
        .def_property_readonly("N", &Dataset::N)
        .def_property_readonly("d", &Dataset::d);

    m.def("eval_network", [](const NetworkConfig& cfg, const WeightMatrix& w, const Eigen::VectorXd& x) {
        check_shapes(cfg, w);
        return eval_network(cfg, w, x);
    }, py::arg("cfg"), py::arg("w"), py::arg("x"));
    m.def("loss", &loss, py::arg("cfg"), py::arg("w"), py::arg("data"), py::arg("n"));
    m.def("log_posterior_unnorm", [](const NetworkConfig& cfg, const WeightMatrix& w, const Dataset& data,
                                     Eigen::Index n, double beta) {
        return log_posterior_unnorm(cfg, w, data, n, beta, [](const WeightMatrix& v) { return in_l1_balls(v); });
    }, py::arg("cfg"), py::arg("w"), py::arg("data"), py::arg("n"), py::arg("beta"));
    m.def("posterior_score", &posterior_score, py::arg("cfg"), py::arg("w"), py::arg("data"), py::arg("n"),
          py::arg("beta"));

    m.def("count_grid", &count_grid, py::arg("d"), py::arg("M"));
    m.def("enumerate_grid", &enumerate_grid, py::arg("d"), py::arg("M"),
          py::arg("limit") = kDefaultEnumerationLimit);

    py::class_<ProductGrid, std::shared_ptr<ProductGrid>>(m, "ProductGrid")
        .def(py::init<int, int, int, std::uint64_t>(), py::arg("d"), py::arg("K"), py::arg("M"),
             py::arg("limit") = kDefaultEnumerationLimit)
        .def_property_readonly("size", &ProductGrid::size)
        .def("decode", &ProductGrid::decode);

    py::class_<PosteriorSnapshot>(m, "PosteriorSnapshot")
        .def_readonly("n", &PosteriorSnapshot::n)
        .def_readonly("beta", &PosteriorSnapshot::beta)
        .def_readonly("log_weights", &PosteriorSnapshot::log_weights)
        .def_readonly("log_evidence", &PosteriorSnapshot::log_evidence)
        .def("__len__", &PosteriorSnapshot::size);

    m.def("exact_discrete_posterior", [](const NetworkConfig& cfg, std::shared_ptr<ProductGrid> grid,
                                         const Dataset& data, Eigen::Index n, double beta) {
        return exact_discrete_posterior(cfg, grid, data, n, beta);
    }, py::arg("cfg"), py::arg("grid"), py::arg("data"), py::arg("n"), py::arg("beta"));
    m.def("posterior_mean", &posterior_mean, py::arg("snapshot"), py::arg("cfg"), py::arg("x"));
    m.def("predictive_density", &predictive_density, py::arg("snapshot"), py::arg("cfg"), py::arg("x"),
          py::arg("y"), py::arg("beta"));

    py::class_<TelescopeResult>(m, "TelescopeResult")
        .def_readonly("log_Z", &TelescopeResult::log_Z)
        .def_readonly("log_pred", &TelescopeResult::log_pred)
        .def_readonly("residual", &TelescopeResult::residual);
    m.def("bayes_factor_telescope", [](const NetworkConfig& cfg, std::shared_ptr<ProductGrid> grid,
                                       const Dataset& data, Eigen::Index N, double beta) {
        return bayes_factor_telescope(cfg, grid, data, N, beta);
    }, py::arg("cfg"), py::arg("grid"), py::arg("data"), py::arg("N"), py::arg("beta"));

    py::class_<ConditionReport>(m, "ConditionReport")
        .def_readonly("C_N", &ConditionReport::C_N)
        .def_readonly("rho", &ConditionReport::rho)
        .def_readonly("A3", &ConditionReport::A3)
        .def_readonly("H1", &ConditionReport::H1)
        .def_readonly("H2", &ConditionReport::H2)
        .def_readonly("cond_K", &ConditionReport::cond_K)
        .def_readonly("cond_Kd", &ConditionReport::cond_Kd)
        .def_readonly("cond_H", &ConditionReport::cond_H);
    m.def("check_logconcavity_conditions", &check_logconcavity_conditions, py::arg("cfg"), py::arg("data"),
          py::arg("beta"), py::arg("N"));

    py::class_<BoundInputs>(m, "BoundInputs")
        .def(py::init<>())
        .def_readwrite("a0", &BoundInputs::a0)
        .def_readwrite("a1", &BoundInputs::a1)
        .def_readwrite("a2", &BoundInputs::a2)
        .def_readwrite("V", &BoundInputs::V)
        .def_readwrite("b", &BoundInputs::b)
        .def_readwrite("sigma", &BoundInputs::sigma)
        .def_readwrite("C_N", &BoundInputs::C_N)
        .def_readwrite("d", &BoundInputs::d)
        .def_readwrite("N", &BoundInputs::N)
        .def_readwrite("M", &BoundInputs::M)
        .def_readwrite("K", &BoundInputs::K)
        .def_readwrite("beta", &BoundInputs::beta);
    py::class_<BoundBreakdown>(m, "BoundBreakdown")
        .def_readonly("prior_mass", &BoundBreakdown::prior_mass)
        .def_readonly("width", &BoundBreakdown::width)
        .def_readonly("grid", &BoundBreakdown::grid)
        .def_readonly("beta_term", &BoundBreakdown::beta_term)
        .def_readonly("total", &BoundBreakdown::total)
        .def_readonly("warnings", &BoundBreakdown::warnings);
    py::class_<OptimalHyperparams>(m, "OptimalHyperparams")
        .def_readonly("beta", &OptimalHyperparams::beta)
        .def_readonly("K", &OptimalHyperparams::K)
        .def_readonly("M", &OptimalHyperparams::M)
        .def_readonly("bound_continuous", &OptimalHyperparams::bound_continuous)
        .def_readonly("closed_form", &OptimalHyperparams::closed_form);
    m.def("bound", [](const std::string& kind, const BoundInputs& in) {
        return bound_calculator(parse_bound_kind(kind), in);
    }, py::arg("kind"), py::arg("inputs"));
    m.def("optimal_hyperparams", [](const std::string& kind, const BoundInputs& in) {
        return optimal_hyperparams(parse_bound_kind(kind), in);
    }, py::arg("kind"), py::arg("inputs"));

    m.def("cli", &run_command, py::arg("args"), "Run a command-line subcommand; returns (exit_code, stdout, stderr).");

    py::register_exception<cli::ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<EnumerationLimitError>(m, "EnumerationLimitError", PyExc_RuntimeError);
}

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <sstream>

#include "censelect/cox.hpp"
#include "censelect/errors.hpp"
#include "censelect/io.hpp"
#include "censelect/lasso.hpp"
#include "censelect/selection.hpp"
#include "censelect/simulation.hpp"
#include "censelect/survival.hpp"

namespace py = pybind11;

namespace {

using namespace censelect;

std::vector<double> to_vector(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

std::vector<double> diagonal_sqrt(const Eigen::MatrixXd& m) {
  std::vector<double> out(m.rows());
  for (int i = 0; i < m.rows(); ++i) out[i] = std::sqrt(m(i, i));
  return out;
}

py::dict test_dict(const TestResult& t) {
  py::dict d;
  d["method"] = to_string(t.method);
  d["statistic"] = t.statistic;
  d["score"] = t.score;
  d["variance"] = t.variance;
  d["p_value"] = t.p_value;
  d["adjustment_set"] = t.adjustment_set;
  return d;
}

py::dict fit_dict(const CoxFit& f) {
  py::dict d;
  d["terms"] = f.term_names();
  d["coefficients"] = to_vector(f.coefficients);
  d["robust_se"] = diagonal_sqrt(f.robust_variance);
  d["model_se"] = diagonal_sqrt(f.model_variance);
  d["loglik"] = f.loglik;
  d["iterations"] = f.iterations;
  return d;
}

py::dict report_dict(const SelectionReport& r) {
  py::dict d;
  d["lambda_rule"] = to_string(r.lambda_rule);
  d["lambda_survival"] = r.lambda_survival;
  if (r.lambda_censoring)
    d["lambda_censoring"] = *r.lambda_censoring;
  else
    d["lambda_censoring"] = py::none();
  d["survival_support"] = r.survival_support;
  d["censoring_support"] = r.censoring_support;
  d["final_adjustment_set"] = r.final_adjustment_set;
  d["test"] = test_dict(r.test);
  d["fit"] = fit_dict(r.fit);
  return d;
}

DgpConfig dgp_from_args(int n, int p, const std::string& setting, double b, double g,
                        double gamma1, std::optional<double> beta0, std::optional<double> gamma0,
                        double beta, double gamma2, std::uint64_t seed) {
  DgpConfig c;
  c.setting = setting_from_string(setting);
  c.n = n;
  c.p = p;
  c.b = b;
  c.g = g;
  c.gamma1 = gamma1;
  c.beta0 = beta0;
  c.gamma0 = gamma0;
  c.beta_single = beta;
  c.gamma2_single = gamma2;
  c.seed = seed;
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "covariate selection and standardization for censored time-to-event trials";
  m.attr("__version__") = "0.1.0";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_RuntimeError);

  py::class_<Dataset>(m, "Dataset")
      .def(py::init([](std::vector<double> times, std::vector<int> status,
                       std::vector<int> treatment, std::vector<std::vector<double>> covariates,
                       std::vector<std::string> names) {
             Dataset d;
             d.covariate_names = std::move(names);
             if (status.size() != times.size() || treatment.size() != times.size() ||
                 covariates.size() != times.size())
               throw DataError("time, status, treatment and covariates must have equal length");
             d.rows.resize(times.size());
             for (std::size_t i = 0; i < times.size(); ++i) {
               d.rows[i].time = times[i];
               d.rows[i].status = status[i];
               d.rows[i].treatment = treatment[i];
               d.rows[i].covariates = std::move(covariates[i]);
             }
             d.validate();
             return d;
           }),
           py::arg("times"), py::arg("status"), py::arg("treatment"), py::arg("covariates"),
           py::arg("names"))
      .def("__len__", [](const Dataset& d) { return d.size(); })
      .def_property_readonly("covariate_names",
                             [](const Dataset& d) { return d.covariate_names; })
      .def_property_readonly("n_events", [](const Dataset& d) { return d.n_events(); })
      .def_property_readonly("times",
                             [](const Dataset& d) {
                               std::vector<double> out;
                               for (const auto& r : d.rows) out.push_back(r.time);
                               return out;
                             })
      .def_property_readonly("status",
                             [](const Dataset& d) {
                               std::vector<int> out;
                               for (const auto& r : d.rows) out.push_back(r.status);
                               return out;
                             })
      .def_property_readonly("treatment",
                             [](const Dataset& d) {
                               std::vector<int> out;
                               for (const auto& r : d.rows) out.push_back(r.treatment);
                               return out;
                             })
      .def_property_readonly("covariates", [](const Dataset& d) {
        std::vector<std::vector<double>> out;
        for (const auto& r : d.rows) out.push_back(r.covariates);
        return out;
      });

  m.def("dataset_to_csv", &dataset_to_csv, py::arg("data"));
  m.def(
      "dataset_from_csv",
      [](const std::string& text) {
        std::istringstream in(text);
        return dataset_from_csv(in);
      },
      py::arg("text"));

  m.def("simulate",
        [](int n, int p, const std::string& setting, double b, double g, double gamma1,
           std::optional<double> beta0, std::optional<double> gamma0, double beta, double gamma2,
           std::uint64_t seed) {
          return simulate(dgp_from_args(n, p, setting, b, g, gamma1, beta0, gamma0, beta, gamma2,
                                        seed));
        },
        py::arg("n") = 400, py::arg("p") = 30, py::arg("setting") = "S1", py::arg("b") = 0.0,
        py::arg("g") = 0.0, py::arg("gamma1") = 0.0, py::arg("beta0") = py::none(),
        py::arg("gamma0") = py::none(), py::arg("beta") = 0.0, py::arg("gamma2") = 0.0,
        py::arg("seed") = 0);

  m.def(
      "kaplan_meier",
      [](const Dataset& data, std::optional<int> arm) {
        StepFunction s = kaplan_meier(data, arm);
        py::dict d;
        d["knots"] = s.knots;
        d["values"] = s.values;
        d["initial_value"] = s.initial_value;
        return d;
      },
      py::arg("data"), py::arg("arm") = py::none());

  m.def(
      "logrank_test", [](const Dataset& data) { return test_dict(logrank_test(data)); },
      py::arg("data"));

  m.def(
      "fit_cox",
      [](const Dataset& data, const std::vector<std::string>& adjustment_set,
         bool include_treatment) {
        return fit_dict(fit_cox(data, adjustment_set, include_treatment));
      },
      py::arg("data"), py::arg("adjustment_set") = std::vector<std::string>{},
      py::arg("include_treatment") = true);

  m.def(
      "standardized_curve",
      [](const Dataset& data, const std::vector<std::string>& adjustment_set, int arm,
         const std::vector<double>& times) {
        CoxFit fit = fit_cox(data, adjustment_set, true);
        return standardized_curves(fit, data, arm, times).probabilities;
      },
      py::arg("data"), py::arg("adjustment_set"), py::arg("arm"), py::arg("times"));

  m.def(
      "post_lasso",
      [](const Dataset& data, const std::string& rule, int folds, std::uint64_t seed,
         const std::vector<std::string>& forced_in) {
        return report_dict(post_lasso(data, lambda_rule_from_string(rule), folds, seed, forced_in));
      },
      py::arg("data"), py::arg("rule") = "1se", py::arg("folds") = 20, py::arg("seed") = 0,
      py::arg("forced_in") = std::vector<std::string>{});

  m.def(
      "double_selection",
      [](const Dataset& data, const std::string& rule, int folds, std::uint64_t seed,
         const std::vector<std::string>& forced_in) {
        return report_dict(
            double_selection(data, lambda_rule_from_string(rule), folds, seed, forced_in));
      },
      py::arg("data"), py::arg("rule") = "1se", py::arg("folds") = 20, py::arg("seed") = 0,
      py::arg("forced_in") = std::vector<std::string>{});

  m.def(
      "significance_selection_single",
      [](const Dataset& data, double alpha_select) {
        return test_dict(significance_selection_single(data, alpha_select));
      },
      py::arg("data"), py::arg("alpha_select") = 0.025);

  m.def(
      "decorrelated_score_test",
      [](const Dataset& data, const std::string& rule, int folds, std::uint64_t seed) {
        return test_dict(decorrelated_score_test(data, lambda_rule_from_string(rule), folds, seed));
      },
      py::arg("data"), py::arg("rule") = "min", py::arg("folds") = 20, py::arg("seed") = 0);

  m.def(
      "score_bias_oracle",
      [](double beta, double gamma1, double gamma2, double beta0, double gamma0, long mc_draws,
         double t_max, int t_steps, std::uint64_t seed) {
        BiasOracleConfig c;
        c.beta = beta;
        c.gamma1 = gamma1;
        c.gamma2 = gamma2;
        c.beta0 = beta0;
        c.gamma0 = gamma0;
        c.mc_draws = mc_draws;
        c.t_max = t_max;
        c.t_steps = t_steps;
        c.seed = seed;
        BiasEstimate e = score_bias_oracle(c);
        py::dict d;
        d["value"] = e.value;
        d["mc_se"] = e.mc_se;
        return d;
      },
      py::arg("beta"), py::arg("gamma1"), py::arg("gamma2"), py::arg("beta0") = 0.0,
      py::arg("gamma0") = 0.0, py::arg("mc_draws") = 100000, py::arg("t_max") = 0.0,
      py::arg("t_steps") = 2000, py::arg("seed") = 0);
}

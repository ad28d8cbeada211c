#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "didpanel/cli.hpp"
#include "didpanel/counterfactual.hpp"
#include "didpanel/error.hpp"
#include "didpanel/estimator.hpp"
#include "didpanel/study.hpp"
#include "didpanel/synth.hpp"

namespace py = pybind11;
using namespace didpanel;

namespace {

py::dict fit_to_dict(const FitResult& f) {
  py::dict d;
  d["names"] = f.names;
  d["coefficients"] = Eigen::VectorXd(f.coefficients);
  d["vcov"] = Eigen::MatrixXd(f.vcov_clustered);
  std::vector<double> se;
  for (const auto& n : f.names) se.push_back(f.se(n));
  d["se"] = se;
  d["n_obs"] = f.n_obs;
  d["n_params"] = f.n_params;
  d["n_clusters"] = f.n_clusters;
  d["adjusted_r2"] = f.adjusted_r2;
  d["dropped_columns"] = f.dropped_columns;
  d["d"] = f.horizon_d;
  return d;
}

py::dict point_to_dict(const EventStudyPoint& p) {
  py::dict d;
  d["d"] = p.d;
  d["beta3"] = p.beta3;
  d["se"] = p.se;
  d["ci_low"] = p.ci_low;
  d["ci_high"] = p.ci_high;
  d["pct"] = p.pct;
  d["pct_low"] = p.pct_low;
  d["pct_high"] = p.pct_high;
  return d;
}

Study load(const std::string& orders, const std::string& cases, const std::optional<std::string>& tests,
           bool tests_covariate, const std::string& weighting, const std::string& fixed_effects,
           const std::string& cutoff) {
  DatasetPaths paths{orders, cases, std::nullopt};
  if (tests) paths.tests = *tests;
  StudyOptions o;
  o.cutoff = parse_date(cutoff);
  o.control_weighting = parse_control_weighting(weighting);
  o.design.include_tests = tests_covariate;
  o.design.fixed_effects = parse_fixed_effects(fixed_effects);
  return Study(load_dataset(paths), o);
}

py::dict totals_dict(const PreventedTotals& t) {
  py::dict d;
  d["point"] = t.point;
  d["low"] = t.low;
  d["high"] = t.high;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Staggered-order difference-in-differences toolkit";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);
  py::register_exception<EstimationError>(m, "EstimationError", PyExc_RuntimeError);

  m.def("log_growth_from_sums", &log_growth_from_sums, py::arg("current"), py::arg("previous"));
  m.def(
      "percent_effect",
      [](double beta, double se, int df) {
        auto p = percent_effect(beta, se, df);
        return py::make_tuple(p.pct, p.pct_low, p.pct_high);
      },
      py::arg("beta"), py::arg("se"), py::arg("df"));
  m.def(
      "counterfactual_weekly",
      [](double beta3, double observed, const std::string& formula) {
        return counterfactual_weekly(beta3, observed, parse_counterfactual_formula(formula));
      },
      py::arg("beta3"), py::arg("observed"), py::arg("formula") = "scaled");
  m.def("did_2x2_oracle", &did_2x2_oracle, py::arg("treated_pre"), py::arg("treated_post"), py::arg("control_pre"),
        py::arg("control_post"));

  m.def(
      "fit_wls",
      [](const Eigen::VectorXd& y, const Eigen::MatrixXd& x, const Eigen::VectorXd& w,
         const std::vector<std::string>& clusters, std::optional<std::vector<std::string>> names) {
        std::vector<std::string> n;
        if (names) {
          n = *names;
        } else {
          for (Eigen::Index j = 0; j < x.cols(); ++j) n.push_back("x" + std::to_string(j));
        }
        auto design = DesignMatrix::from_candidates(y, x, n, w, clusters);
        auto fit = fit_wls(design);
        fit.vcov_clustered = cluster_vcov(fit, design);
        fit.adjusted_r2 = adjusted_r2(fit, design);
        return fit_to_dict(fit);
      },
      py::arg("y"), py::arg("x"), py::arg("weights"), py::arg("clusters"), py::arg("names") = py::none(),
      "Weighted least squares with collinear columns pruned and cluster-robust variance.");

  m.def(
      "simulate",
      [](const std::string& out_dir, const std::string& spec_text) {
        auto spec = parse_synth_spec_text(spec_text);
        spec.validate();
        auto data = generate_panel(spec);
        namespace fs = std::filesystem;
        fs::create_directories(out_dir);
        std::ofstream o(fs::path(out_dir) / "orders.csv"), c(fs::path(out_dir) / "cases.csv"),
            t(fs::path(out_dir) / "tests.csv");
        write_orders(o, data.orders);
        write_cases(c, data.cases);
        write_tests(t, data.tests);
      },
      py::arg("out_dir"), py::arg("spec") = "", "Writes orders.csv, cases.csv and tests.csv for a synthetic spec.");

  m.def(
      "true_effect", [](const std::string& spec_text, int d) { return parse_synth_spec_text(spec_text).true_effect(d); },
      py::arg("spec"), py::arg("d"));

  m.def(
      "estimate",
      [](const std::string& orders, const std::string& cases, std::optional<std::string> tests, int d,
         const std::string& outcome, bool tests_covariate, const std::string& control_weighting,
         const std::string& fixed_effects, const std::string& cutoff) {
        auto study = load(orders, cases, tests, tests_covariate, control_weighting, fixed_effects, cutoff);
        return fit_to_dict(study.fit(d, parse_outcome(outcome)));
      },
      py::arg("orders"), py::arg("cases"), py::arg("tests") = py::none(), py::arg("d") = 21,
      py::arg("outcome") = "cases", py::arg("tests_covariate") = true, py::arg("control_weighting") = "own",
      py::arg("fixed_effects") = "stratum", py::arg("cutoff") = "2020-04-07");

  m.def(
      "event_study",
      [](const std::string& orders, const std::string& cases, std::optional<std::string> tests,
         std::vector<int> horizons, const std::string& outcome, bool tests_covariate) {
        auto study = load(orders, cases, tests, tests_covariate, "own", "stratum", "2020-04-07");
        auto es = study.event_study(horizons, parse_outcome(outcome));
        py::list points, gaps;
        for (const auto& p : es.points) points.append(point_to_dict(p));
        for (const auto& g : es.gaps) gaps.append(py::make_tuple(g.d, g.reason));
        return py::make_tuple(points, gaps);
      },
      py::arg("orders"), py::arg("cases"), py::arg("tests") = py::none(), py::arg("horizons") = horizon_range(-14, 26),
      py::arg("outcome") = "cases", py::arg("tests_covariate") = true);

  m.def(
      "counterfactual",
      [](const std::string& orders, const std::string& cases, std::optional<std::string> tests,
         const std::string& outcome, bool tests_covariate) {
        auto study = load(orders, cases, tests, tests_covariate, "own", "stratum", "2020-04-07");
        auto r = study.counterfactual(parse_outcome(outcome));
        py::dict d;
        d["scaled"] = totals_dict(r.totals_scaled);
        d["inverse"] = totals_dict(r.totals_inverse);
        return d;
      },
      py::arg("orders"), py::arg("cases"), py::arg("tests") = py::none(), py::arg("outcome") = "cases",
      py::arg("tests_covariate") = true);

  m.def(
      "recovery_experiment",
      [](const std::string& spec_text, std::size_t n_seeds, std::vector<int> horizons, bool tests_covariate) {
        auto spec = parse_synth_spec_text(spec_text);
        StudyOptions o;
        o.design.include_tests = tests_covariate;
        auto s = recovery_experiment(spec, n_seeds, horizons, OutcomeKind::Cases, o);
        py::list out;
        for (const auto& h : s.horizons) {
          py::dict d;
          d["d"] = h.d;
          d["truth"] = h.truth;
          d["mean_estimate"] = h.mean_estimate;
          d["bias"] = h.bias;
          d["rmse"] = h.rmse;
          d["coverage"] = h.coverage;
          d["mean_se"] = h.mean_se;
          d["mc_se"] = h.mc_se;
          d["n"] = h.n;
          out.append(d);
        }
        return out;
      },
      py::arg("spec") = "", py::arg("n_seeds") = 20, py::arg("horizons") = std::vector<int>{-7, 7, 14, 21},
      py::arg("tests_covariate") = true);

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "didpanel");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs a command-line invocation in process; returns (exit code, stdout, stderr).");
}

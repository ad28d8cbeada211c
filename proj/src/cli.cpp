#include "didpanel/cli.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "didpanel/csv.hpp"
#include "didpanel/error.hpp"
#include "didpanel/report.hpp"
#include "didpanel/study.hpp"
#include "didpanel/synth.hpp"

#ifndef DIDPANEL_VERSION
#define DIDPANEL_VERSION "dev"
#endif

namespace didpanel::cli {

using nlohmann::ordered_json;

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
  return hex;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot read '{}'", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

namespace {

// Collects outputs so the manifest can list them with digests.
class Bundle {
 public:
  Bundle(std::filesystem::path dir, std::string command) : dir_(std::move(dir)), command_(std::move(command)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw DataError(fmt::format("cannot create output directory '{}': {}", dir_.string(), ec.message()));
  }

  void write(const std::string& name, const std::string& content) {
    const auto path = dir_ / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    out.close();
    if (!out) throw DataError(fmt::format("failed writing '{}'", path.string()));
    outputs_.push_back({{"file", name}, {"bytes", content.size()}, {"sha256", sha256_hex(content)}});
  }

  template <class Fn>
  void write_with(const std::string& name, Fn&& fn) {
    std::ostringstream s;
    fn(s);
    write(name, s.str());
  }

  void add_input(const std::string& role, const std::filesystem::path& p) {
    inputs_.push_back({{"role", role}, {"path", p.string()}, {"sha256", sha256_file(p)}});
  }

  ordered_json& extra() { return extra_; }

  void finish(const ordered_json& config) {
    ordered_json m;
    m["tool"] = "didpanel";
    m["version"] = DIDPANEL_VERSION;
    m["command"] = command_;
    m["config"] = config;
    m["inputs"] = inputs_;
    m["outputs"] = outputs_;
    for (auto& [k, v] : extra_.items()) m[k] = v;
    std::ofstream out(dir_ / "manifest.json", std::ios::trunc);
    out << m.dump(2) << '\n';
    if (!out) throw DataError("failed writing manifest.json");
  }

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::string command_;
  ordered_json inputs_ = ordered_json::array();
  ordered_json outputs_ = ordered_json::array();
  ordered_json extra_ = ordered_json::object();
};

ordered_json config_json(const RunConfig& c, const std::string& command) {
  ordered_json j;
  auto opt_path = [](const std::filesystem::path& p) { return p.empty() ? ordered_json() : ordered_json(p.string()); };
  if (command != "simulate") {
    j["orders"] = opt_path(c.orders);
    j["cases"] = opt_path(c.cases);
    j["tests"] = opt_path(c.tests);
    j["outcome"] = c.outcome ? ordered_json(std::string(to_string(*c.outcome))) : ordered_json();
    j["cutoff"] = c.cutoff;
    j["window_start"] = c.window_start;
    j["window_end"] = c.window_end;
    j["d"] = c.d;
    j["d_from"] = c.d_from;
    j["d_to"] = c.d_to;
    j["tests_covariate"] = c.include_tests;
    j["control_weighting"] = std::string(to_string(c.control_weighting));
    j["fixed_effects"] = std::string(to_string(c.fixed_effects));
    j["formula"] = std::string(to_string(c.formula));
    j["dump_panels"] = c.dump_panels;
  } else {
    j["spec"] = opt_path(c.spec);
    j["seed"] = c.seed ? ordered_json(*c.seed) : ordered_json();
    j["noise_sd"] = c.noise_sd ? ordered_json(*c.noise_sd) : ordered_json();
    j["n_seeds"] = c.n_seeds;
  }
  return j;
}

Date config_date(const std::string& text, const char* what) {
  auto d = try_parse_date(text);
  if (!d) throw ConfigError(fmt::format("bad {} date '{}'", what, text));
  return *d;
}

StudyWindow window_of(const RunConfig& c) {
  StudyWindow w{config_date(c.window_start, "window start"), config_date(c.window_end, "window end")};
  if (w.end < w.start) throw ConfigError("window end precedes window start");
  return w;
}

DatasetPaths paths_of(const RunConfig& c, bool need_tests) {
  if (c.orders.empty()) throw ConfigError("--orders is required");
  if (c.cases.empty()) throw ConfigError("--cases is required");
  DatasetPaths p{c.orders, c.cases, std::nullopt};
  if (!c.tests.empty()) {
    p.tests = c.tests;
  } else if (need_tests) {
    throw ConfigError("the tests covariate is on but --tests was not given (use --no-tests-covariate to drop it)");
  }
  return p;
}

void record_inputs(Bundle& b, const DatasetPaths& p) {
  b.add_input("orders", p.orders);
  b.add_input("cases", p.cases);
  if (p.tests) b.add_input("tests", *p.tests);
}

Study load_study(const RunConfig& c, Bundle& b) {
  const auto paths = paths_of(c, c.include_tests);
  auto data = load_dataset(paths, window_of(c));
  record_inputs(b, paths);
  StudyOptions o;
  o.cutoff = config_date(c.cutoff, "cutoff");
  o.control_weighting = c.control_weighting;
  o.design.include_tests = c.include_tests;
  o.design.fixed_effects = c.fixed_effects;
  return Study(std::move(data), o);
}

void group_summary(ordered_json& j, const Study& s) {
  const auto& g = s.groups();
  j["treated_groups"] = g.treated.size();
  std::size_t treated = 0;
  for (const auto& t : g.treated) treated += t.county_count();
  j["treated_counties"] = treated;
  j["control_counties"] = g.never.county_count();
}

// ---------------------------------------------------------------------------
// Commands

void write_drop_log(std::ostream& out, const char* name, const DropLog& log) {
  out << fmt::format("{}: {} input rows, {} retained, {} dropped\n", name, log.input_rows, log.retained_rows,
                     log.dropped());
  for (const auto& [reason, n] : log.by_reason) {
    const double pct = log.input_rows ? 100.0 * static_cast<double>(n) / static_cast<double>(log.input_rows) : 0.0;
    out << fmt::format("  dropped {:<16} {:>10} ({:.3f}%)\n", reason, n, pct);
  }
  for (const auto& [note, n] : log.notes) out << fmt::format("  note    {:<16} {:>10}\n", note, n);
}

void cmd_ingest(const RunConfig& c, Bundle& b, std::ostream& out) {
  const auto paths = paths_of(c, false);
  auto data = load_dataset(paths, window_of(c));
  record_inputs(b, paths);
  b.write_with("orders.csv", [&](std::ostream& s) { write_orders(s, data.orders); });
  b.write_with("cases.csv", [&](std::ostream& s) { write_cases(s, data.cases); });
  if (paths.tests) b.write_with("tests.csv", [&](std::ostream& s) { write_tests(s, data.tests); });
  b.write_with("ingest_summary.txt", [&](std::ostream& s) {
    write_drop_log(s, "orders", data.orders_log);
    write_drop_log(s, "cases", data.cases_log);
    if (paths.tests) write_drop_log(s, "tests", data.tests_log);
  });
  auto log_json = [](const DropLog& l) {
    ordered_json j;
    j["input_rows"] = l.input_rows;
    j["retained_rows"] = l.retained_rows;
    j["dropped"] = l.by_reason;
    j["notes"] = l.notes;
    return j;
  };
  b.extra()["drop_log"] = {{"orders", log_json(data.orders_log)}, {"cases", log_json(data.cases_log)},
                           {"tests", log_json(data.tests_log)}};
  out << fmt::format("ingested {} counties with orders, {} case rows, {} test rows\n", data.orders.size(),
                     data.cases.size(), data.tests.size());
}

std::vector<std::pair<OutcomeKind, int>> estimate_models(const RunConfig& c) {
  std::vector<std::pair<OutcomeKind, int>> models;
  if (!c.outcome && c.d.empty()) {
    for (int d : {7, 14, 21}) models.emplace_back(OutcomeKind::Cases, d);
    models.emplace_back(OutcomeKind::Fatalities, 21);
    return models;
  }
  const auto kind = c.outcome.value_or(OutcomeKind::Cases);
  const std::vector<int> ds = c.d.empty() ? std::vector<int>{7, 14, 21} : c.d;
  for (int d : ds) {
    if (d == 0) throw ConfigError("d = 0 is not a valid horizon");
    models.emplace_back(kind, d);
  }
  return models;
}

void cmd_estimate(const RunConfig& c, Bundle& b, std::ostream& out) {
  auto study = load_study(c, b);
  std::vector<FitResult> fits;
  std::vector<std::string> labels;
  for (auto [kind, d] : estimate_models(c)) {
    auto panel = study.panel(d, kind);
    if (c.dump_panels) {
      b.write_with(fmt::format("panel_{}_d{}.csv", to_string(kind), d), [&](std::ostream& s) { write_panel_csv(s, panel); });
    }
    fits.push_back(fit_panel(panel, study.options().design));
    labels.push_back(fmt::format("({})", fits.size()));
  }
  b.write_with("estimates.txt", [&](std::ostream& s) {
    write_model_table(s, fits, labels);
    for (std::size_t i = 0; i < fits.size(); ++i) {
      s << '\n';
      write_fit_report(s, fits[i], fmt::format("model {}: {} d = {}", labels[i], to_string(fits[i].outcome_kind),
                                               fits[i].horizon_d));
    }
  });
  b.write_with("estimates.csv", [&](std::ostream& s) {
    csv::write_row(s, {"model", "outcome", "d", "term", "estimate", "se"});
    for (std::size_t i = 0; i < fits.size(); ++i) {
      for (const auto& name : fits[i].names) {
        csv::write_row(s, {std::to_string(i + 1), std::string(to_string(fits[i].outcome_kind)),
                           std::to_string(fits[i].horizon_d), name, format_number(fits[i].coef(name)),
                           format_number(fits[i].se(name))});
      }
    }
  });
  group_summary(b.extra(), study);
  write_model_table(out, fits, labels);
}

void cmd_event_study(const RunConfig& c, Bundle& b, std::ostream& out) {
  auto study = load_study(c, b);
  const auto kind = c.outcome.value_or(OutcomeKind::Cases);
  std::vector<int> ds = c.d.empty() ? horizon_range(c.d_from, c.d_to) : c.d;
  for (int d : ds) {
    if (d == 0) throw ConfigError("d = 0 is not a valid horizon");
  }
  auto es = study.event_study(ds, kind);
  const std::string stem = fmt::format("event_study_{}", to_string(kind));
  b.write_with(stem + ".csv", [&](std::ostream& s) { write_event_study_csv(s, es); });
  b.write_with(stem + "_gaps.csv", [&](std::ostream& s) { write_event_study_gaps_csv(s, es); });
  group_summary(b.extra(), study);
  out << fmt::format("{} horizons estimated, {} gaps\n", es.points.size(), es.gaps.size());
}

void cmd_counterfactual(const RunConfig& c, Bundle& b, std::ostream& out) {
  auto study = load_study(c, b);
  std::vector<OutcomeKind> kinds =
      c.outcome ? std::vector<OutcomeKind>{*c.outcome} : std::vector<OutcomeKind>{OutcomeKind::Cases, OutcomeKind::Fatalities};
  std::ostringstream summary;
  for (auto kind : kinds) {
    auto report = study.counterfactual(kind, c.formula);
    b.write_with(fmt::format("counterfactual_{}.csv", to_string(kind)),
                 [&](std::ostream& s) { write_counterfactual_csv(s, report); });
    write_counterfactual_summary(summary, report);
    summary << '\n';
    auto t = [](const PreventedTotals& p) { return ordered_json{{"point", p.point}, {"low", p.low}, {"high", p.high}}; };
    b.extra()["totals"][std::string(to_string(kind))] = {{"scaled", t(report.totals_scaled)},
                                                        {"inverse", t(report.totals_inverse)}};
  }
  b.write("counterfactual_summary.txt", summary.str());
  group_summary(b.extra(), study);
  out << summary.str();
}

void cmd_table(const RunConfig& c, Bundle& b, std::ostream& out) {
  RunConfig cc = c;
  cc.include_tests = false;  // tables use outcomes only
  auto study = load_study(cc, b);
  const std::vector<int> ds = c.d.empty() ? std::vector<int>{21} : c.d;
  std::vector<OutcomeKind> kinds =
      c.outcome ? std::vector<OutcomeKind>{*c.outcome} : std::vector<OutcomeKind>{OutcomeKind::Cases, OutcomeKind::Fatalities};
  for (auto kind : kinds) {
    for (int d : ds) {
      auto table = study.did_table(d, kind);
      b.write_with(fmt::format("did_table_{}_d{}.csv", to_string(kind), d),
                   [&](std::ostream& s) { write_did_table_csv(s, table, 2); });
      out << fmt::format("{} d = {}: {} cohorts, {} skipped\n", to_string(kind), d, table.rows.size(),
                         table.skipped.size());
    }
    auto curve = event_time_mean_growth(study.store(), c.d_from, c.d_to, kind);
    b.write_with(fmt::format("event_curve_{}.csv", to_string(kind)),
                 [&](std::ostream& s) { write_event_curve_csv(s, curve); });
  }
  group_summary(b.extra(), study);
}

void cmd_simulate(const RunConfig& c, Bundle& b, std::ostream& out) {
  SynthSpec spec;
  if (!c.spec.empty()) {
    std::ifstream in(c.spec);
    if (!in) throw DataError(fmt::format("cannot open spec file '{}'", c.spec.string()));
    spec = parse_synth_spec(in);
    b.add_input("spec", c.spec);
  }
  if (c.seed) spec.seed = *c.seed;
  if (c.noise_sd) spec.noise_sd = *c.noise_sd;
  spec.validate();

  auto data = generate_panel(spec);
  b.write_with("orders.csv", [&](std::ostream& s) { write_orders(s, data.orders); });
  b.write_with("cases.csv", [&](std::ostream& s) { write_cases(s, data.cases); });
  b.write_with("tests.csv", [&](std::ostream& s) { write_tests(s, data.tests); });
  b.write("synth_spec.txt", synth_spec_to_text(spec));
  b.write_with("truth.csv", [&](std::ostream& s) {
    csv::write_row(s, {"d", "beta3"});
    for (int d : horizon_range(c.d_from, c.d_to)) csv::write_row(s, {std::to_string(d), format_number(spec.true_effect(d))});
  });
  b.extra()["rng"] = std::string(kSynthRngName);
  b.extra()["seed"] = spec.seed;

  if (c.n_seeds > 0) {
    const std::vector<int> ds = c.d.empty() ? std::vector<int>{-7, 7, 14, 21} : c.d;
    StudyOptions o;
    o.cutoff = config_date(c.cutoff, "cutoff");
    o.control_weighting = c.control_weighting;
    o.design.include_tests = c.include_tests;
    o.design.fixed_effects = c.fixed_effects;
    auto summary = recovery_experiment(spec, c.n_seeds, ds, c.outcome.value_or(OutcomeKind::Cases), o);
    b.write_with("recovery.csv", [&](std::ostream& s) { write_recovery_csv(s, summary); });
    write_recovery_csv(out, summary);
  }
  out << fmt::format("wrote synthetic bundle to {}\n", b.dir().string());
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig c;
  std::string outcome, control = "own", fe = "stratum", formula = "scaled";
  std::optional<std::uint64_t> seed;
  std::optional<double> noise;

  CLI::App app{"Panel difference-in-differences for county policy orders", "didpanel"};
  app.set_version_flag("--version", DIDPANEL_VERSION);
  app.set_config("--config", "", "Read options from a key = value config file");
  app.require_subcommand(1);
  app.fallthrough();

  app.add_option("--orders", c.orders, "Orders CSV (fips,state,county,order_effective)");
  app.add_option("--cases", c.cases, "County series CSV (date,county,state,fips,cases,deaths)");
  app.add_option("--tests", c.tests, "State tests CSV (date,state,totalTestResults)");
  app.add_option("--outcome", outcome, "cases or fatalities (default depends on command)")
      ->check(CLI::IsMember({"cases", "fatalities", "deaths"}));
  app.add_option("--cutoff", c.cutoff, "Orders after this date count as never ordered")->capture_default_str();
  app.add_option("--window-start", c.window_start, "First date kept from the inputs")->capture_default_str();
  app.add_option("--window-end", c.window_end, "Last date kept from the inputs")->capture_default_str();
  app.add_option("--d", c.d, "Horizons in days (comma separated)")->delimiter(',');
  app.add_option("--d-from", c.d_from, "First horizon of the event-study range")->capture_default_str();
  app.add_option("--d-to", c.d_to, "Last horizon of the event-study range")->capture_default_str();
  app.add_flag("--tests-covariate,!--no-tests-covariate", c.include_tests,
               "Include the change in log weekly tests (default: on)");
  app.add_option("--control-weighting", control, "Control row weights: own or paired")
      ->check(CLI::IsMember({"own", "paired"}))
      ->capture_default_str();
  app.add_option("--fixed-effects", fe, "stratum or group")->check(CLI::IsMember({"stratum", "group"}))->capture_default_str();
  app.add_option("--formula", formula, "Counterfactual formula: scaled or inverse")
      ->check(CLI::IsMember({"scaled", "inverse"}))
      ->capture_default_str();
  app.add_option("--out", c.out_dir, "Output directory")->capture_default_str();
  app.add_flag("--dump-panels", c.dump_panels, "Also write each estimation panel as CSV");
  app.add_option("--spec", c.spec, "Synthetic spec file (key = value)");
  app.add_option("--seed", seed, "Override the synthetic seed");
  app.add_option("--noise-sd", noise, "Override the synthetic noise level");
  app.add_option("--n-seeds", c.n_seeds, "Seeds in the recovery experiment (0 skips it)")->capture_default_str();

  std::string command;
  const std::map<std::string, std::string> commands = {
      {"ingest", "Validate and normalize the inputs; report dropped rows"},
      {"estimate", "Fit the models (default: cases d = 7, 14, 21 and fatalities d = 21)"},
      {"event-study", "Interaction estimates over a range of horizons"},
      {"counterfactual", "Prevented-count totals from the d = 7, 14, 21 fits"},
      {"simulate", "Write a synthetic bundle and run the recovery experiment"},
      {"table", "Raw difference-in-differences tables and the event-time growth curve"},
  };
  for (const auto& [name, help] : commands) {
    app.add_subcommand(name, help)->callback([&command, n = name] { command = n; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (!outcome.empty()) c.outcome = parse_outcome(outcome);
    c.control_weighting = parse_control_weighting(control);
    c.fixed_effects = parse_fixed_effects(fe);
    c.formula = parse_counterfactual_formula(formula);
    c.seed = seed;
    c.noise_sd = noise;
    if (c.d_from > c.d_to) throw ConfigError("--d-from exceeds --d-to");

    Bundle bundle(c.out_dir, command);
    if (command == "ingest") cmd_ingest(c, bundle, out);
    else if (command == "estimate") cmd_estimate(c, bundle, out);
    else if (command == "event-study") cmd_event_study(c, bundle, out);
    else if (command == "counterfactual") cmd_counterfactual(c, bundle, out);
    else if (command == "simulate") cmd_simulate(c, bundle, out);
    else if (command == "table") cmd_table(c, bundle, out);
    bundle.finish(config_json(c, command));
    return 0;
  } catch (const ConfigError& e) {
    err << "didpanel: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "didpanel " << command << ": " << e.what() << '\n';
    return 1;
  }
}

}  // namespace didpanel::cli

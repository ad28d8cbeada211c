#include "didpanel/study.hpp"

#include "didpanel/error.hpp"

namespace didpanel {

Study::Study(RawDataset data, StudyOptions options) : data_(std::move(data)), options_(options) {
  store_ = build_series(data_);
  groups_ = group_counties(data_.orders, store_.universe(), options_.cutoff);
  if (!data_.tests.empty()) tests_.emplace(data_.tests);
  if (options_.design.include_tests && !tests_) {
    throw ConfigError("the tests covariate is on but no test data was loaded");
  }
}

PanelDataset Study::panel(int d, OutcomeKind kind) const {
  const TestSeries* tests = options_.design.include_tests && tests_ ? &*tests_ : nullptr;
  return assemble_panel(groups_, store_, tests, d, kind, PanelOptions{options_.control_weighting});
}

FitResult Study::fit(int d, OutcomeKind kind) const { return fit_panel(panel(d, kind), options_.design); }

EventStudy Study::event_study(std::span<const int> horizons, OutcomeKind kind) const {
  return didpanel::event_study([&](int d) { return panel(d, kind); }, horizons, kind, options_.design);
}

DidTable Study::did_table(int d, OutcomeKind kind) const { return raw_did_table(groups_, store_, d, kind); }

CounterfactualReport Study::counterfactual(OutcomeKind kind, CounterfactualFormula formula) const {
  const int ds[] = {7, 14, 21};
  auto study = event_study(ds, kind);
  if (!study.gaps.empty()) {
    throw EstimationError("counterfactual needs fits at d = 7, 14 and 21; d = " + std::to_string(study.gaps[0].d) +
                          " failed: " + study.gaps[0].reason);
  }
  auto observed = observed_weekly_counts(groups_, store_, kind);
  return aggregate_prevented(week_effects(study.points), observed, kind, formula);
}

}  // namespace didpanel

#pragma once

#include <optional>
#include <span>
#include <vector>

#include "didpanel/counterfactual.hpp"
#include "didpanel/estimator.hpp"
#include "didpanel/ingest.hpp"
#include "didpanel/panel.hpp"

namespace didpanel {

struct StudyOptions {
  Date cutoff = make_date(2020, 4, 7);
  ControlWeighting control_weighting = ControlWeighting::Own;
  DesignOptions design;
};

/// Loaded data plus the derived series and groups, ready for any number of
/// panels and fits. Immutable after construction.
class Study {
 public:
  Study(RawDataset data, StudyOptions options = {});

  const RawDataset& data() const { return data_; }
  const SeriesStore& store() const { return store_; }
  const CountyGroups& groups() const { return groups_; }
  const StudyOptions& options() const { return options_; }
  bool has_tests() const { return tests_.has_value(); }

  PanelDataset panel(int d, OutcomeKind kind) const;
  FitResult fit(int d, OutcomeKind kind) const;
  EventStudy event_study(std::span<const int> horizons, OutcomeKind kind) const;
  DidTable did_table(int d, OutcomeKind kind) const;
  CounterfactualReport counterfactual(OutcomeKind kind,
                                      CounterfactualFormula formula = CounterfactualFormula::Scaled) const;

 private:
  RawDataset data_;
  StudyOptions options_;
  SeriesStore store_;
  CountyGroups groups_;
  std::optional<TestSeries> tests_;
};

}  // namespace didpanel

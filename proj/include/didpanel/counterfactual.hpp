#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "didpanel/estimator.hpp"
#include "didpanel/panel.hpp"

namespace didpanel {

enum class CounterfactualFormula {
  Scaled,   // (exp(b) - 1) * observed
  Inverse,  // observed * (1 - exp(-b)): observed count deflated to the no-order path
};

std::string_view to_string(CounterfactualFormula f);
CounterfactualFormula parse_counterfactual_formula(std::string_view text);

/// Signed change in the weekly count attributed to the order. Negative
/// values are counts prevented.
double counterfactual_weekly(double beta3, double observed_weekly,
                             CounterfactualFormula formula = CounterfactualFormula::Scaled);

/// Interaction estimate and interval used for one post-order week.
struct WeekEffect {
  int week = 0;  // 1, 2, 3
  double beta3 = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

/// Week k uses the model with d = 7k.
std::array<WeekEffect, 3> week_effects(std::span<const EventStudyPoint> points);

struct GroupWeekObserved {
  std::string group_id;
  std::array<std::optional<std::int64_t>, 3> weeks;
};

/// Week k sums each group's daily counts over days 7(k-1)+1 .. 7k after its
/// order date; negative sums are clamped to zero. Weeks beyond the series
/// coverage are left empty.
std::vector<GroupWeekObserved> observed_weekly_counts(const CountyGroups& groups, const SeriesStore& store,
                                                      OutcomeKind kind);

struct GroupWeekRecord {
  std::string group_id;
  int week_index = 0;
  std::int64_t observed_weekly = 0;
  double difference = 0.0;
  double difference_low = 0.0;   // from ci_low
  double difference_high = 0.0;  // from ci_high
};

/// Positive prevented counts: point, and the range spanned by the interval.
struct PreventedTotals {
  double point = 0.0;
  double low = 0.0;
  double high = 0.0;
};

struct CounterfactualReport {
  OutcomeKind outcome_kind = OutcomeKind::Cases;
  CounterfactualFormula formula = CounterfactualFormula::Scaled;
  std::array<WeekEffect, 3> effects{};
  std::vector<GroupWeekRecord> per_group_week;
  PreventedTotals totals;          // under `formula`
  PreventedTotals totals_scaled;   // both variants, for comparison
  PreventedTotals totals_inverse;
};

/// Applies the week-matched effect to every group and week and sums. Throws
/// DataError naming the first group with a missing week.
CounterfactualReport aggregate_prevented(const std::array<WeekEffect, 3>& effects,
                                         std::span<const GroupWeekObserved> observed, OutcomeKind kind,
                                         CounterfactualFormula formula = CounterfactualFormula::Scaled);

/// `group_id,week_index,observed_weekly,difference,difference_low,difference_high`
void write_counterfactual_csv(std::ostream& out, const CounterfactualReport& report);

/// Human-readable summary block with effects and both variants' totals.
void write_counterfactual_summary(std::ostream& out, const CounterfactualReport& report);

}  // namespace didpanel

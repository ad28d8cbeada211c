#include "didpanel/counterfactual.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "didpanel/csv.hpp"
#include "didpanel/error.hpp"
#include "didpanel/report.hpp"

namespace didpanel {

std::string_view to_string(CounterfactualFormula f) {
  return f == CounterfactualFormula::Scaled ? "scaled" : "inverse";
}

CounterfactualFormula parse_counterfactual_formula(std::string_view text) {
  if (text == "scaled" || text == "printed") return CounterfactualFormula::Scaled;
  if (text == "inverse") return CounterfactualFormula::Inverse;
  throw ConfigError(fmt::format("unknown counterfactual formula '{}' (expected scaled or inverse)", text));
}

double counterfactual_weekly(double beta3, double observed_weekly, CounterfactualFormula formula) {
  if (formula == CounterfactualFormula::Scaled) return std::expm1(beta3) * observed_weekly;
  return -std::expm1(-beta3) * observed_weekly;
}

std::array<WeekEffect, 3> week_effects(std::span<const EventStudyPoint> points) {
  std::array<WeekEffect, 3> out{};
  for (int k = 1; k <= 3; ++k) {
    auto it = std::find_if(points.begin(), points.end(), [k](const EventStudyPoint& p) { return p.d == 7 * k; });
    if (it == points.end()) throw EstimationError(fmt::format("no fitted model for d = {}", 7 * k));
    out[static_cast<std::size_t>(k - 1)] = {k, it->beta3, it->ci_low, it->ci_high};
  }
  return out;
}

std::vector<GroupWeekObserved> observed_weekly_counts(const CountyGroups& groups, const SeriesStore& store,
                                                      OutcomeKind kind) {
  std::vector<GroupWeekObserved> out;
  for (const auto& g : groups.treated) {
    GroupWeekObserved obs;
    obs.group_id = g.id();
    for (int k = 1; k <= 3; ++k) {
      const Date from = add_days(*g.order_date, 7 * (k - 1) + 1);
      const Date to = add_days(*g.order_date, 7 * k);
      if (!store.covers(from, to)) continue;
      obs.weeks[static_cast<std::size_t>(k - 1)] = std::max<std::int64_t>(0, store.sum(g.members, from, to, kind));
    }
    out.push_back(std::move(obs));
  }
  return out;
}

namespace {

PreventedTotals totals_for(const std::array<WeekEffect, 3>& effects, std::span<const GroupWeekObserved> observed,
                           CounterfactualFormula formula) {
  double point = 0, low = 0, high = 0;
  for (const auto& g : observed) {
    for (std::size_t k = 0; k < 3; ++k) {
      const auto n = static_cast<double>(*g.weeks[k]);
      point += counterfactual_weekly(effects[k].beta3, n, formula);
      low += counterfactual_weekly(effects[k].ci_low, n, formula);
      high += counterfactual_weekly(effects[k].ci_high, n, formula);
    }
  }
  // Differences are increasing in beta, so the most negative one bounds the
  // prevented count from above.
  return {0.0 - point, 0.0 - high, 0.0 - low};
}

}  // namespace

CounterfactualReport aggregate_prevented(const std::array<WeekEffect, 3>& effects,
                                         std::span<const GroupWeekObserved> observed, OutcomeKind kind,
                                         CounterfactualFormula formula) {
  for (const auto& g : observed) {
    for (std::size_t k = 0; k < 3; ++k) {
      if (!g.weeks[k]) {
        throw DataError(fmt::format("group {} has no observed count for week {}", g.group_id, k + 1));
      }
      if (*g.weeks[k] < 0) throw DataError(fmt::format("group {} has a negative week {} count", g.group_id, k + 1));
    }
  }
  CounterfactualReport r;
  r.outcome_kind = kind;
  r.formula = formula;
  r.effects = effects;
  for (const auto& g : observed) {
    for (std::size_t k = 0; k < 3; ++k) {
      const auto n = *g.weeks[k];
      const auto x = static_cast<double>(n);
      r.per_group_week.push_back({g.group_id, static_cast<int>(k + 1), n,
                                  counterfactual_weekly(effects[k].beta3, x, formula),
                                  counterfactual_weekly(effects[k].ci_low, x, formula),
                                  counterfactual_weekly(effects[k].ci_high, x, formula)});
    }
  }
  r.totals_scaled = totals_for(effects, observed, CounterfactualFormula::Scaled);
  r.totals_inverse = totals_for(effects, observed, CounterfactualFormula::Inverse);
  r.totals = formula == CounterfactualFormula::Scaled ? r.totals_scaled : r.totals_inverse;
  return r;
}

void write_counterfactual_csv(std::ostream& out, const CounterfactualReport& report) {
  csv::write_row(out, {"group_id", "week_index", "observed_weekly", "difference", "difference_low", "difference_high"});
  for (const auto& g : report.per_group_week) {
    csv::write_row(out, {g.group_id, std::to_string(g.week_index), std::to_string(g.observed_weekly),
                         format_number(g.difference), format_number(g.difference_low),
                         format_number(g.difference_high)});
  }
}

void write_counterfactual_summary(std::ostream& out, const CounterfactualReport& report) {
  out << fmt::format("outcome: {}\nformula: {}\n", to_string(report.outcome_kind), to_string(report.formula));
  for (const auto& e : report.effects) {
    out << fmt::format("week {} (d = {}): beta3 {} [{}, {}]\n", e.week, 7 * e.week, format_number(e.beta3),
                       format_number(e.ci_low), format_number(e.ci_high));
  }
  auto line = [&](const char* label, const PreventedTotals& t) {
    out << fmt::format("{}: {:.0f} ({:.0f} to {:.0f})\n", label, t.point, t.low, t.high);
  };
  line("prevented", report.totals);
  line("prevented_scaled", report.totals_scaled);
  line("prevented_inverse", report.totals_inverse);
}

}  // namespace didpanel

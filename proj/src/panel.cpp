#include "didpanel/panel.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include <fmt/format.h>

#include "didpanel/csv.hpp"
#include "didpanel/error.hpp"

namespace didpanel {

std::string_view to_string(OutcomeKind kind) {
  return kind == OutcomeKind::Cases ? "cases" : "fatalities";
}

OutcomeKind parse_outcome(std::string_view text) {
  if (text == "cases") return OutcomeKind::Cases;
  if (text == "fatalities" || text == "deaths") return OutcomeKind::Fatalities;
  throw ConfigError(fmt::format("unknown outcome '{}' (expected cases or fatalities)", text));
}

std::string_view to_string(ControlWeighting w) { return w == ControlWeighting::Own ? "own" : "paired"; }

ControlWeighting parse_control_weighting(std::string_view text) {
  if (text == "own") return ControlWeighting::Own;
  if (text == "paired") return ControlWeighting::Paired;
  throw ConfigError(fmt::format("unknown control weighting '{}' (expected own or paired)", text));
}

std::vector<DatedCount> daily_new_from_cumulative(std::span<const DatedCount> cumulative) {
  std::vector<DatedCount> out;
  out.reserve(cumulative.size());
  std::int64_t prev = 0;
  for (std::size_t i = 0; i < cumulative.size(); ++i) {
    if (i > 0 && cumulative[i].date <= cumulative[i - 1].date) {
      throw DataError(fmt::format("cumulative series not strictly increasing at {}",
                                  format_date(cumulative[i].date)));
    }
    out.push_back({cumulative[i].date, cumulative[i].count - prev});
    prev = cumulative[i].count;
  }
  return out;
}

// ---------------------------------------------------------------------------
// SeriesStore

std::int64_t SeriesStore::sum(std::span<const std::string> fips, Date from, Date to, OutcomeKind kind) const {
  if (!covers(from, to)) {
    throw CoverageError(fmt::format("dates {}..{} fall outside the series coverage {}..{}", format_date(from),
                                    format_date(to), format_date(coverage_start), format_date(coverage_end)));
  }
  const auto lo = static_cast<std::size_t>(days_between(coverage_start, from));
  const auto hi = static_cast<std::size_t>(days_between(coverage_start, to));
  std::int64_t total = 0;
  for (const auto& f : fips) {
    auto it = counties.find(f);
    if (it == counties.end()) throw DataError(fmt::format("unknown county {}", f));
    const auto& daily = it->second.daily(kind);
    for (std::size_t i = lo; i <= hi; ++i) total += daily[i];
  }
  return total;
}

std::map<std::string, std::string> SeriesStore::universe() const {
  std::map<std::string, std::string> out;
  for (const auto& [fips, s] : counties) out.emplace(fips, s.state);
  return out;
}

std::vector<OrderRecord> SeriesStore::orders() const {
  std::vector<OrderRecord> out;
  for (const auto& [fips, s] : counties) out.push_back({fips, s.state, "", s.order_effective});
  return out;
}

SeriesStore build_series(const RawDataset& data) {
  if (data.cases.empty()) throw DataError("no county case rows to build series from");

  SeriesStore store;
  store.coverage_start = data.cases.front().date;
  store.coverage_end = data.cases.front().date;
  for (const auto& r : data.cases) {
    store.coverage_start = std::min(store.coverage_start, r.date);
    store.coverage_end = std::max(store.coverage_end, r.date);
  }
  const std::size_t n_days = store.days();

  std::map<std::string, const OrderRecord*> orders;
  for (const auto& o : data.orders) orders.emplace(o.fips, &o);

  std::map<std::string, std::vector<const CaseRow*>> rows_by_fips;
  for (const auto& r : data.cases) rows_by_fips[r.fips].push_back(&r);

  auto is_code = [](const std::string& s) {
    return s.size() == 2 && std::isupper(static_cast<unsigned char>(s[0])) &&
           std::isupper(static_cast<unsigned char>(s[1]));
  };

  for (auto& [fips, rows] : rows_by_fips) {
    std::sort(rows.begin(), rows.end(), [](const CaseRow* a, const CaseRow* b) { return a->date < b->date; });
    CountySeries s;
    s.fips = fips;
    if (auto it = orders.find(fips); it != orders.end()) {
      s.state = it->second->state;
      s.order_effective = it->second->order_effective;
    } else if (is_code(rows.front()->state)) {
      s.state = rows.front()->state;
    } else {
      s.state = state_code_for_fips(fips);
      if (s.state.empty()) s.state = rows.front()->state;
    }

    std::vector<DatedCount> cases, deaths;
    cases.reserve(rows.size());
    deaths.reserve(rows.size());
    for (const auto* r : rows) {
      cases.push_back({r->date, r->cumulative_cases});
      deaths.push_back({r->date, r->cumulative_deaths});
    }
    s.daily_cases.assign(n_days, 0);
    s.daily_deaths.assign(n_days, 0);
    for (const auto& d : daily_new_from_cumulative(cases)) {
      s.daily_cases[static_cast<std::size_t>(days_between(store.coverage_start, d.date))] = d.count;
    }
    for (const auto& d : daily_new_from_cumulative(deaths)) {
      s.daily_deaths[static_cast<std::size_t>(days_between(store.coverage_start, d.date))] = d.count;
    }
    store.counties.emplace(fips, std::move(s));
  }

  for (const auto& o : data.orders) {
    if (store.counties.count(o.fips)) continue;
    CountySeries s;
    s.fips = o.fips;
    s.state = o.state;
    s.order_effective = o.order_effective;
    s.daily_cases.assign(n_days, 0);
    s.daily_deaths.assign(n_days, 0);
    store.counties.emplace(o.fips, std::move(s));
  }
  return store;
}

// ---------------------------------------------------------------------------
// TestSeries

TestSeries::TestSeries(std::span<const TestRow> rows) {
  for (const auto& r : rows) by_state_[r.state].push_back({r.date, r.cumulative_tests});
  for (auto& [state, series] : by_state_) {
    std::sort(series.begin(), series.end(), [](const DatedCount& a, const DatedCount& b) { return a.date < b.date; });
  }
}

std::int64_t TestSeries::cumulative_at(const std::string& state, Date d) const {
  auto it = by_state_.find(state);
  if (it == by_state_.end()) throw DataError(fmt::format("no test series for state '{}'", state));
  const auto& series = it->second;
  auto pos = std::upper_bound(series.begin(), series.end(), d,
                              [](Date value, const DatedCount& e) { return value < e.date; });
  if (pos == series.begin()) return 0;
  return std::prev(pos)->count;
}

std::int64_t TestSeries::weekly_new(const std::string& state, Date end) const {
  return cumulative_at(state, end) - cumulative_at(state, add_days(end, -7));
}

// ---------------------------------------------------------------------------
// Groups

std::string CountyGroup::id() const { return order_date ? format_date(*order_date) : std::string(kNeverGroupId); }

std::size_t CountyGroups::universe_size() const {
  std::size_t n = never.county_count();
  for (const auto& g : treated) n += g.county_count();
  return n;
}

const CountyGroup* CountyGroups::find(std::string_view id) const {
  if (id == kNeverGroupId) return &never;
  for (const auto& g : treated) {
    if (g.id() == id) return &g;
  }
  return nullptr;
}

CountyGroups group_counties(std::span<const OrderRecord> orders, const std::map<std::string, std::string>& universe,
                            Date cutoff) {
  std::map<std::string, std::string> all = universe;
  std::map<std::string, std::optional<Date>> order_of;
  for (const auto& o : orders) {
    if (!order_of.emplace(o.fips, o.order_effective).second) {
      throw DataError(fmt::format("county {} appears more than once in the orders", o.fips));
    }
    all.emplace(o.fips, o.state);
  }
  if (all.empty()) throw DataError("county universe is empty");

  std::map<Date, CountyGroup> by_date;
  CountyGroups out;
  for (const auto& [fips, state] : all) {
    auto it = order_of.find(fips);
    CountyGroup* g = &out.never;
    if (it != order_of.end() && it->second && *it->second <= cutoff) {
      g = &by_date[*it->second];
      g->order_date = it->second;
    }
    g->members.push_back(fips);
    ++g->state_county_counts[state];
  }
  for (auto& [date, g] : by_date) out.treated.push_back(std::move(g));
  return out;
}

// ---------------------------------------------------------------------------
// Outcome transforms

double log_growth_from_sums(std::int64_t current, std::int64_t previous) {
  const double cur = static_cast<double>(std::max<std::int64_t>(current, 0));
  const double prev = static_cast<double>(std::max<std::int64_t>(previous, 0));
  return std::log1p(cur) - std::log1p(prev);
}

std::int64_t weekly_sum(const CountyGroup& group, const SeriesStore& store, Date end, OutcomeKind kind) {
  return store.sum(group.members, add_days(end, -6), end, kind);
}

double log_weekly_growth(const CountyGroup& group, const SeriesStore& store, Date end, OutcomeKind kind) {
  const Date first = add_days(end, -13);
  if (!store.covers(first, end)) {
    throw CoverageError(fmt::format("weekly growth for {} ending {} needs dates {}..{}; series cover {}..{}",
                                    group.id(), format_date(end), format_date(first), format_date(end),
                                    format_date(store.coverage_start), format_date(store.coverage_end)));
  }
  return log_growth_from_sums(weekly_sum(group, store, end, kind),
                              store.sum(group.members, first, add_days(end, -7), kind));
}

double group_test_covariate(const CountyGroup& group, const TestSeries& tests, Date end) {
  double total = 0.0, cur = 0.0, prev = 0.0;
  for (const auto& [state, n] : group.state_county_counts) {
    if (!tests.has_state(state)) {
      throw DataError(fmt::format("no test series for state '{}' (group {})", state, group.id()));
    }
    total += n;
    cur += n * static_cast<double>(tests.weekly_new(state, end));
    prev += n * static_cast<double>(tests.weekly_new(state, add_days(end, -7)));
  }
  if (total == 0.0) return 0.0;
  cur = std::max(cur / total, 0.0);
  prev = std::max(prev / total, 0.0);
  return std::log1p(cur) - std::log1p(prev);
}

// ---------------------------------------------------------------------------
// Panel assembly

namespace {

PanelRow make_row(const std::string& group, const std::string& stratum, Date date, double dy, int x, int p,
                  double tests, double weight) {
  return PanelRow{group, group, stratum, date, dy, x, p, tests, weight};
}

}  // namespace

PanelDataset assemble_panel(const CountyGroups& groups, const SeriesStore& store, const TestSeries* tests, int d,
                            OutcomeKind kind, const PanelOptions& options) {
  if (d == 0) throw DataError("horizon d = 0 puts both periods on the same date");
  if (groups.treated.empty()) throw DataError("no treated county groups");
  if (groups.never_empty()) throw DataError("the never-ordered control pool is empty");

  PanelDataset panel;
  panel.horizon_d = d;
  panel.outcome_kind = kind;
  panel.has_tests = tests != nullptr;

  const auto& ctrl = groups.never;
  const std::string ctrl_id = ctrl.id();
  for (const auto& g : groups.treated) {
    const Date t0 = *g.order_date;
    const Date t1 = add_days(t0, d);
    const std::string id = g.id();
    bool covered = true;
    for (Date t : {t0, t1}) {
      if (!store.covers(add_days(t, -13), t)) {
        panel.skipped.push_back({id, fmt::format("needs series coverage {}..{}", format_date(add_days(t, -13)),
                                                 format_date(t))});
        covered = false;
        break;
      }
    }
    if (!covered) continue;

    const double w_treated = static_cast<double>(g.county_count());
    const double w_ctrl =
        options.control_weighting == ControlWeighting::Own ? static_cast<double>(ctrl.county_count()) : w_treated;
    auto tests_for = [&](const CountyGroup& grp, Date t) {
      return tests ? group_test_covariate(grp, *tests, t) : 0.0;
    };
    panel.rows.push_back(make_row(id, id, t0, log_weekly_growth(g, store, t0, kind), 1, 0, tests_for(g, t0), w_treated));
    panel.rows.push_back(make_row(id, id, t1, log_weekly_growth(g, store, t1, kind), 1, 1, tests_for(g, t1), w_treated));
    panel.rows.push_back(
        make_row(ctrl_id, id, t0, log_weekly_growth(ctrl, store, t0, kind), 0, 0, tests_for(ctrl, t0), w_ctrl));
    panel.rows.push_back(
        make_row(ctrl_id, id, t1, log_weekly_growth(ctrl, store, t1, kind), 0, 1, tests_for(ctrl, t1), w_ctrl));
  }
  return panel;
}

PanelDataset panel_from_cohort_levels(std::span<const CohortLevels> cohorts, int d, OutcomeKind kind,
                                      ControlWeighting weighting, double control_count) {
  if (d == 0) throw DataError("horizon d = 0 puts both periods on the same date");
  PanelDataset panel;
  panel.horizon_d = d;
  panel.outcome_kind = kind;
  const std::string ctrl_id(kNeverGroupId);
  for (const auto& c : cohorts) {
    const std::string id = format_date(c.order_date);
    const Date t1 = add_days(c.order_date, d);
    const double w_ctrl = weighting == ControlWeighting::Own ? control_count : c.county_count;
    panel.rows.push_back(make_row(id, id, c.order_date, c.dy_order_day, 1, 0, 0.0, c.county_count));
    panel.rows.push_back(make_row(id, id, t1, c.dy_after, 1, 1, 0.0, c.county_count));
    panel.rows.push_back(make_row(ctrl_id, id, c.order_date, c.dy_ctrl_order_day, 0, 0, 0.0, w_ctrl));
    panel.rows.push_back(make_row(ctrl_id, id, t1, c.dy_ctrl_after, 0, 1, 0.0, w_ctrl));
  }
  return panel;
}

void write_panel_csv(std::ostream& out, const PanelDataset& panel) {
  csv::write_row(out, {"group_id", "stratum_id", "cluster_id", "date", "dy", "x", "p", "dlog_tests", "weight"});
  for (const auto& r : panel.rows) {
    csv::write_row(out, {r.group_id, r.stratum_id, r.cluster_id, format_date(r.date), fmt::format("{:.12g}", r.outcome_dy),
                         std::to_string(r.treated_x), std::to_string(r.period_p), fmt::format("{:.12g}", r.dlog_tests),
                         fmt::format("{:.12g}", r.weight)});
  }
}

// ---------------------------------------------------------------------------
// Raw tabulation

DidTableRow make_did_row(Date date, std::size_t n_counties, double dy_order_day, double dy_after,
                         double dy_ctrl_order_day, double dy_ctrl_after) {
  DidTableRow row{date, n_counties, dy_order_day, dy_after, dy_ctrl_order_day, dy_ctrl_after, 0, 0, 0};
  row.diff_treated = dy_after - dy_order_day;
  row.diff_ctrl = dy_ctrl_after - dy_ctrl_order_day;
  row.diff_in_diff = row.diff_treated - row.diff_ctrl;
  return row;
}

DidTable raw_did_table(const CountyGroups& groups, const SeriesStore& store, int d, OutcomeKind kind) {
  auto panel = assemble_panel(groups, store, nullptr, d, kind);
  DidTable table;
  table.horizon_d = d;
  table.outcome_kind = kind;
  table.skipped = panel.skipped;
  for (std::size_t i = 0; i + 3 < panel.rows.size(); i += 4) {
    const auto& r = panel.rows;
    const CountyGroup* g = groups.find(r[i].group_id);
    table.rows.push_back(make_did_row(r[i].date, g ? g->county_count() : 0, r[i].outcome_dy, r[i + 1].outcome_dy,
                                      r[i + 2].outcome_dy, r[i + 3].outcome_dy));
  }
  return table;
}

DidTable did_table_from_levels(std::span<const CohortLevels> cohorts, int d, OutcomeKind kind) {
  DidTable table;
  table.horizon_d = d;
  table.outcome_kind = kind;
  for (const auto& c : cohorts) {
    table.rows.push_back(make_did_row(c.order_date, static_cast<std::size_t>(c.county_count), c.dy_order_day,
                                      c.dy_after, c.dy_ctrl_order_day, c.dy_ctrl_after));
  }
  return table;
}

void write_did_table_csv(std::ostream& out, const DidTable& table, int decimals) {
  auto num = [decimals](double v) {
    std::string s = fmt::format("{:.{}f}", v, decimals);
    if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);
    return s;
  };
  csv::write_row(out, {"date", "n_counties", "dy_order_day", "dy_after", "dy_ctrl_order_day", "dy_ctrl_after",
                       "diff_treated", "diff_ctrl", "diff_in_diff"});
  for (const auto& r : table.rows) {
    csv::write_row(out, {format_date(r.date), std::to_string(r.n_counties), num(r.dy_order_day), num(r.dy_after),
                         num(r.dy_ctrl_order_day), num(r.dy_ctrl_after), num(r.diff_treated), num(r.diff_ctrl),
                         num(r.diff_in_diff)});
  }
}

std::vector<EventCurvePoint> event_time_mean_growth(const SeriesStore& store, int from_offset, int to_offset,
                                                    OutcomeKind kind) {
  if (from_offset > to_offset) {
    throw DataError(fmt::format("empty event window [{}, {}]", from_offset, to_offset));
  }
  std::vector<EventCurvePoint> out;
  for (int e = from_offset; e <= to_offset; ++e) {
    double total = 0.0;
    std::size_t n = 0;
    for (const auto& [fips, s] : store.counties) {
      if (!s.order_effective) continue;
      const Date end = add_days(*s.order_effective, e);
      if (!store.covers(add_days(end, -13), end)) continue;
      const std::string one[] = {fips};
      total += log_growth_from_sums(store.sum(one, add_days(end, -6), end, kind),
                                    store.sum(one, add_days(end, -13), add_days(end, -7), kind));
      ++n;
    }
    if (n > 0) out.push_back({e, total / static_cast<double>(n), n});
  }
  return out;
}

}  // namespace didpanel

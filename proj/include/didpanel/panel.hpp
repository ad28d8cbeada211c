#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "didpanel/date.hpp"
#include "didpanel/ingest.hpp"

namespace didpanel {

enum class OutcomeKind { Cases, Fatalities };

std::string_view to_string(OutcomeKind kind);
/// Accepts "cases" or "fatalities" (also "deaths").
OutcomeKind parse_outcome(std::string_view text);

struct DatedCount {
  Date date;
  std::int64_t count = 0;

  friend bool operator==(const DatedCount&, const DatedCount&) = default;
};

/// First differences of a cumulative series, treating the value before the
/// first date as zero. Negative increments (downward revisions) are kept.
/// Throws DataError if dates are not strictly increasing.
std::vector<DatedCount> daily_new_from_cumulative(std::span<const DatedCount> cumulative);

/// Daily new counts for one county on the store's dense date grid.
struct CountySeries {
  std::string fips;
  std::string state;
  std::optional<Date> order_effective;
  std::vector<std::int64_t> daily_cases;
  std::vector<std::int64_t> daily_deaths;

  const std::vector<std::int64_t>& daily(OutcomeKind kind) const {
    return kind == OutcomeKind::Cases ? daily_cases : daily_deaths;
  }
};

/// All county series over a shared coverage range. Days a county did not
/// report carry zero new counts; counties known only from the orders file
/// are all zeros.
struct SeriesStore {
  Date coverage_start;
  Date coverage_end;
  std::map<std::string, CountySeries> counties;

  std::size_t days() const { return static_cast<std::size_t>(days_between(coverage_start, coverage_end) + 1); }
  bool covers(Date from, Date to) const { return from >= coverage_start && to <= coverage_end; }

  /// Sum of daily counts over [from, to] for the listed counties. Throws
  /// CoverageError if the range leaves the coverage.
  std::int64_t sum(std::span<const std::string> fips, Date from, Date to, OutcomeKind kind) const;

  /// fips -> state code for every county.
  std::map<std::string, std::string> universe() const;
  std::vector<OrderRecord> orders() const;
};

SeriesStore build_series(const RawDataset& data);

/// Cumulative state test totals as step functions of date.
class TestSeries {
 public:
  TestSeries() = default;
  explicit TestSeries(std::span<const TestRow> rows);

  bool has_state(const std::string& state) const { return by_state_.count(state) != 0; }
  bool empty() const { return by_state_.empty(); }
  /// Last cumulative total on or before `d`; zero before the first record.
  std::int64_t cumulative_at(const std::string& state, Date d) const;
  /// New tests over the seven days ending on `end`.
  std::int64_t weekly_new(const std::string& state, Date end) const;

 private:
  std::map<std::string, std::vector<DatedCount>> by_state_;
};

inline constexpr std::string_view kNeverGroupId = "NEVER";

/// Counties sharing one order date, or the never-ordered pool.
struct CountyGroup {
  std::optional<Date> order_date;  // nullopt for the never-ordered pool
  std::vector<std::string> members;  // sorted fips
  std::map<std::string, int> state_county_counts;

  bool is_never() const { return !order_date.has_value(); }
  std::size_t county_count() const { return members.size(); }
  /// ISO order date, or "NEVER".
  std::string id() const;
};

struct CountyGroups {
  std::vector<CountyGroup> treated;  // ascending order date
  CountyGroup never;                 // may be empty; check never_empty()

  bool never_empty() const { return never.members.empty(); }
  std::size_t universe_size() const;
  const CountyGroup* find(std::string_view id) const;
};

/// Partitions the county universe: one group per distinct order date on or
/// before `cutoff`, everything else in the never-ordered pool. Ordered
/// counties missing from `universe` are added to it.
CountyGroups group_counties(std::span<const OrderRecord> orders,
                            const std::map<std::string, std::string>& universe, Date cutoff);

/// ln(current + 1) - ln(previous + 1), with negative sums clamped to zero.
double log_growth_from_sums(std::int64_t current, std::int64_t previous);

/// Group count over the seven days ending on `end`.
std::int64_t weekly_sum(const CountyGroup& group, const SeriesStore& store, Date end, OutcomeKind kind);

/// Change in log weekly counts for the week ending on `end` against the week
/// before. Needs coverage of [end - 13, end]; throws CoverageError otherwise.
double log_weekly_growth(const CountyGroup& group, const SeriesStore& store, Date end, OutcomeKind kind);

/// Change in log weekly tests for a group, using the county-count-weighted
/// mean over member states of each state's weekly new tests. Throws DataError
/// naming a member state with no test series.
double group_test_covariate(const CountyGroup& group, const TestSeries& tests, Date end);

enum class ControlWeighting {
  Own,     // control rows carry the control pool's county count
  Paired,  // control rows carry the paired treated cohort's county count
};

std::string_view to_string(ControlWeighting w);
ControlWeighting parse_control_weighting(std::string_view text);

struct PanelRow {
  std::string group_id;
  std::string cluster_id;
  std::string stratum_id;
  Date date;
  double outcome_dy = 0.0;
  int treated_x = 0;
  int period_p = 0;
  double dlog_tests = 0.0;
  double weight = 0.0;
};

struct SkippedGroup {
  std::string group_id;
  std::string reason;
};

/// Stacked two-period panel for one horizon. Each included cohort
/// contributes four consecutive rows: treated at the order date, treated at
/// order date + d, control at the order date, control at order date + d.
struct PanelDataset {
  int horizon_d = 0;
  OutcomeKind outcome_kind = OutcomeKind::Cases;
  std::vector<PanelRow> rows;
  std::vector<SkippedGroup> skipped;
  bool has_tests = false;

  std::size_t strata() const { return rows.size() / 4; }
};

struct PanelOptions {
  ControlWeighting control_weighting = ControlWeighting::Own;
};

/// Builds the panel for horizon `d` (nonzero). Cohorts whose dates need
/// series coverage that is not available are skipped and listed. Pass
/// `tests = nullptr` to leave the tests covariate at zero.
PanelDataset assemble_panel(const CountyGroups& groups, const SeriesStore& store, const TestSeries* tests,
                            int d, OutcomeKind kind, const PanelOptions& options = {});

/// Outcome levels of one cohort and the control pool at the two panel dates.
struct CohortLevels {
  Date order_date;
  double county_count = 0.0;
  double dy_order_day = 0.0;
  double dy_after = 0.0;
  double dy_ctrl_order_day = 0.0;
  double dy_ctrl_after = 0.0;
};

/// Panel from precomputed cohort levels, e.g. a published tabulation.
/// `control_count` is the control pool's county count, used when weighting
/// is ControlWeighting::Own.
PanelDataset panel_from_cohort_levels(std::span<const CohortLevels> cohorts, int d, OutcomeKind kind,
                                      ControlWeighting weighting, double control_count);

void write_panel_csv(std::ostream& out, const PanelDataset& panel);

/// One cohort row of the raw difference-in-differences tabulation.
struct DidTableRow {
  Date date;
  std::size_t n_counties = 0;
  double dy_order_day = 0.0;
  double dy_after = 0.0;
  double dy_ctrl_order_day = 0.0;
  double dy_ctrl_after = 0.0;
  double diff_treated = 0.0;
  double diff_ctrl = 0.0;
  double diff_in_diff = 0.0;
};

DidTableRow make_did_row(Date date, std::size_t n_counties, double dy_order_day, double dy_after,
                         double dy_ctrl_order_day, double dy_ctrl_after);

struct DidTable {
  int horizon_d = 21;
  OutcomeKind outcome_kind = OutcomeKind::Cases;
  std::vector<DidTableRow> rows;
  std::vector<SkippedGroup> skipped;
};

DidTable raw_did_table(const CountyGroups& groups, const SeriesStore& store, int d, OutcomeKind kind);

/// Same tabulation from precomputed cohort levels.
DidTable did_table_from_levels(std::span<const CohortLevels> cohorts, int d, OutcomeKind kind);

/// Writes values rounded to `decimals` places.
void write_did_table_csv(std::ostream& out, const DidTable& table, int decimals = 2);

struct EventCurvePoint {
  int offset = 0;
  double mean_growth = 0.0;
  std::size_t n_counties = 0;
};

/// Mean per-county log weekly growth by days relative to each county's own
/// order date, over ordered counties with coverage at that offset. Offsets
/// without any covered county are omitted.
std::vector<EventCurvePoint> event_time_mean_growth(const SeriesStore& store, int from_offset, int to_offset,
                                                    OutcomeKind kind);

}  // namespace didpanel

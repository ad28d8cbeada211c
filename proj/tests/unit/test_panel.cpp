#include <doctest.h>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "../support.hpp"
#include "didpanel/error.hpp"
#include "didpanel/panel.hpp"

using namespace didpanel;
using testsupport::append_county;

namespace {

const Date kStart = make_date(2020, 3, 1);
constexpr int kDays = 68;  // through 2020-05-07

// One county per treated cohort (orders 3/17 + g days) plus `controls`
// never-ordered counties; daily counts are constant per county.
RawDataset cohort_dataset(int cohorts, int controls) {
  RawDataset ds;
  for (int g = 0; g < cohorts; ++g) {
    const std::string fips = fmt::format("01{:03d}", g + 1);
    ds.orders.push_back({fips, "AL", "T", add_days(make_date(2020, 3, 17), g)});
    append_county(ds, fips, "AL", kStart, std::vector<std::int64_t>(kDays, 3 + g));
  }
  for (int c = 0; c < controls; ++c) {
    const std::string fips = fmt::format("02{:03d}", c + 1);
    ds.orders.push_back({fips, "AK", "C", std::nullopt});
    append_county(ds, fips, "AK", kStart, std::vector<std::int64_t>(kDays, 2));
  }
  return ds;
}

}  // namespace

TEST_CASE("daily_new_from_cumulative takes first differences") {
  const Date d0 = make_date(2020, 3, 1);
  std::vector<DatedCount> c = {{d0, 10}, {add_days(d0, 1), 10}, {add_days(d0, 2), 12}};
  auto n = daily_new_from_cumulative(c);
  REQUIRE(n.size() == 3);
  CHECK(n[0].count == 10);
  CHECK(n[1].count == 0);
  CHECK(n[2].count == 2);
  std::vector<DatedCount> r = {{d0, 50}, {add_days(d0, 1), 48}};
  CHECK(daily_new_from_cumulative(r)[1].count == -2);
  CHECK(daily_new_from_cumulative({}).empty());
  std::vector<DatedCount> bad = {{add_days(d0, 1), 1}, {d0, 2}};
  CHECK_THROWS_AS(daily_new_from_cumulative(bad), DataError);
}

TEST_CASE("group_counties partitions the universe") {
  std::vector<OrderRecord> orders = {{"01001", "AL", "", make_date(2020, 3, 20)},
                                     {"01003", "AL", "", make_date(2020, 3, 20)},
                                     {"01005", "AL", "", make_date(2020, 3, 25)},
                                     {"01007", "AL", "", make_date(2020, 4, 20)}};
  std::map<std::string, std::string> universe = {{"01001", "AL"}, {"01003", "AL"}, {"01005", "AL"},
                                                 {"01007", "AL"}, {"02001", "AK"}, {"02003", "AK"}};
  auto g = group_counties(orders, universe, make_date(2020, 4, 7));
  REQUIRE(g.treated.size() == 2);
  CHECK(g.treated[0].county_count() == 2);
  CHECK(g.treated[1].county_count() == 1);
  CHECK(g.never.county_count() == 3);  // the post-cutoff county joins the pool
  CHECK(g.universe_size() == universe.size());
  std::set<std::string> seen;
  for (const auto* grp : {&g.treated[0], &g.treated[1], &g.never}) {
    for (const auto& f : grp->members) CHECK(seen.insert(f).second);
  }
  CHECK(g.never.id() == "NEVER");
  CHECK(g.find("2020-03-25") == &g.treated[1]);
  CHECK(g.treated[0].state_county_counts.at("AL") == 2);
}

TEST_CASE("group_counties flags an empty pool and rejects bad input") {
  std::vector<OrderRecord> orders = {{"01001", "AL", "", make_date(2020, 3, 20)},
                                     {"01003", "AL", "", make_date(2020, 3, 20)}};
  auto g = group_counties(orders, {}, make_date(2020, 4, 7));
  CHECK(g.treated.size() == 1);
  CHECK(g.never_empty());
  CHECK_THROWS_AS(group_counties({}, {}, make_date(2020, 4, 7)), DataError);
  orders.push_back({"01001", "AL", "", make_date(2020, 3, 21)});
  CHECK_THROWS_AS(group_counties(orders, {}, make_date(2020, 4, 7)), DataError);
}

TEST_CASE("log weekly growth follows the transform") {
  CHECK(log_growth_from_sums(26, 8) == doctest::Approx(std::log(3.0)).epsilon(1e-14));
  CHECK(std::fabs(log_growth_from_sums(26, 8) - (std::log(27.0) - std::log(9.0))) < 1e-12);
  CHECK(log_growth_from_sums(0, 0) == 0.0);
  CHECK(std::fabs(log_growth_from_sums(-3, 8) - (0.0 - std::log(9.0))) < 1e-12);
  CHECK(log_growth_from_sums(-3, 8) == doctest::Approx(-2.1972).epsilon(1e-4));
}

TEST_CASE("log_weekly_growth sums member counties over both weeks") {
  RawDataset ds;
  std::vector<std::int64_t> a(20, 0), b(20, 0);
  // days 0..6 previous week, 7..13 current week for end = day 13
  for (int i = 0; i < 7; ++i) a[static_cast<std::size_t>(i)] = 1;  // W_prev contributions 7
  b[3] = 1;                                                        // total W_prev = 8
  for (int i = 7; i < 14; ++i) a[static_cast<std::size_t>(i)] = 3;  // 21
  b[10] = 5;                                                       // total W_cur = 26
  append_county(ds, "01001", "AL", kStart, a);
  append_county(ds, "01003", "AL", kStart, b);
  ds.orders = {{"01001", "AL", "", make_date(2020, 3, 10)}, {"01003", "AL", "", make_date(2020, 3, 10)}};
  auto store = build_series(ds);
  auto groups = group_counties(store.orders(), store.universe(), make_date(2020, 4, 7));
  REQUIRE(groups.treated.size() == 1);
  const Date end = add_days(kStart, 13);
  CHECK(weekly_sum(groups.treated[0], store, end, OutcomeKind::Cases) == 26);
  CHECK(std::fabs(log_weekly_growth(groups.treated[0], store, end, OutcomeKind::Cases) - std::log(3.0)) < 1e-12);
  CHECK_THROWS_AS(log_weekly_growth(groups.treated[0], store, add_days(end, -1), OutcomeKind::Cases), CoverageError);
}

TEST_CASE("scaling counts matches direct evaluation of the transform") {
  for (std::int64_t m : {1, 2, 7, 1000}) {
    RawDataset ds;
    std::vector<std::int64_t> d(14);
    for (int i = 0; i < 14; ++i) d[static_cast<std::size_t>(i)] = m * (i % 5);
    append_county(ds, "01001", "AL", kStart, d);
    ds.orders = {{"01001", "AL", "", make_date(2020, 3, 10)}};
    auto store = build_series(ds);
    auto groups = group_counties(store.orders(), store.universe(), make_date(2020, 4, 7));
    std::int64_t prev = 0, cur = 0;
    for (int i = 0; i < 7; ++i) prev += i % 5;
    for (int i = 7; i < 14; ++i) cur += i % 5;
    const double direct = std::log(static_cast<double>(cur * m) + 1) - std::log(static_cast<double>(prev * m) + 1);
    CHECK(std::fabs(log_weekly_growth(groups.treated[0], store, add_days(kStart, 13), OutcomeKind::Cases) - direct) <
          1e-12);
  }
}

TEST_CASE("group_test_covariate weights states by member counties") {
  const Date end = make_date(2020, 3, 30);
  auto at = [&](int back) { return add_days(end, -back); };
  std::vector<TestRow> rows = {{at(14), "AA", 0}, {at(7), "AA", 10}, {at(0), "AA", 20},
                               {at(14), "BB", 0}, {at(7), "BB", 10}, {at(0), "BB", 40}};
  TestSeries tests(rows);
  CountyGroup two;
  two.state_county_counts = {{"AA", 3}, {"BB", 3}};
  CHECK(std::fabs(group_test_covariate(two, tests, end) - (std::log(21.0) - std::log(11.0))) < 1e-12);
  CHECK(group_test_covariate(two, tests, end) == doctest::Approx(0.6466).epsilon(1e-4));

  CountyGroup one;
  one.state_county_counts = {{"BB", 5}};
  CHECK(std::fabs(group_test_covariate(one, tests, end) - (std::log(31.0) - std::log(11.0))) < 1e-12);

  std::vector<TestRow> flat = {{at(20), "AA", 5}, {at(0), "AA", 5}};
  TestSeries none(flat);
  CountyGroup a;
  a.state_county_counts = {{"AA", 1}};
  CHECK(group_test_covariate(a, none, end) == 0.0);

  CountyGroup missing;
  missing.state_county_counts = {{"ZZ", 1}};
  try {
    group_test_covariate(missing, tests, end);
    FAIL("expected an error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("ZZ") != std::string::npos);
  }
}

TEST_CASE("assemble_panel builds four rows per cohort") {
  auto store = build_series(cohort_dataset(22, 3));
  auto groups = group_counties(store.orders(), store.universe(), make_date(2020, 4, 7));
  REQUIRE(groups.treated.size() == 22);
  auto panel = assemble_panel(groups, store, nullptr, 7, OutcomeKind::Cases);
  CHECK(panel.rows.size() == 88);
  CHECK(panel.strata() == 22);
  CHECK(panel.skipped.empty());
  for (std::size_t s = 0; s < panel.rows.size(); s += 4) {
    std::set<std::pair<int, int>> cells;
    const auto& first = panel.rows[s];
    for (std::size_t i = s; i < s + 4; ++i) {
      const auto& r = panel.rows[i];
      CHECK(r.stratum_id == first.stratum_id);
      CHECK(r.cluster_id == r.group_id);
      CHECK((r.treated_x == 1) == (r.group_id != "NEVER"));
      CHECK((r.period_p == 1) == (r.date == add_days(parse_date(r.stratum_id), 7)));
      CHECK(r.weight == (r.treated_x ? 1.0 : 3.0));
      cells.insert({r.treated_x, r.period_p});
    }
    CHECK(cells.size() == 4);
  }
  PanelOptions paired{ControlWeighting::Paired};
  auto pp = assemble_panel(groups, store, nullptr, 7, OutcomeKind::Cases, paired);
  for (const auto& r : pp.rows) CHECK(r.weight == 1.0);
}

TEST_CASE("assemble_panel edge cases") {
  auto store = build_series(cohort_dataset(1, 2));
  auto groups = group_counties(store.orders(), store.universe(), make_date(2020, 4, 7));
  CHECK(assemble_panel(groups, store, nullptr, 14, OutcomeKind::Cases).rows.size() == 4);
  CHECK_THROWS_AS(assemble_panel(groups, store, nullptr, 0, OutcomeKind::Cases), DataError);

  // 3/17 - 14 needs history back to 2/19: the only cohort is skipped
  auto early = assemble_panel(groups, store, nullptr, -14, OutcomeKind::Cases);
  CHECK(early.rows.empty());
  CHECK(early.skipped.size() == 1);

  auto late = build_series(cohort_dataset(22, 1));
  auto lg = group_counties(late.orders(), late.universe(), make_date(2020, 4, 7));
  auto p = assemble_panel(lg, late, nullptr, 26, OutcomeKind::Cases);
  CHECK(p.rows.size() % 4 == 0);
  CHECK(p.rows.size() + 4 * p.skipped.size() == 88);
}

TEST_CASE("write_panel_csv uses the documented header") {
  auto store = build_series(cohort_dataset(1, 1));
  auto groups = group_counties(store.orders(), store.universe(), make_date(2020, 4, 7));
  std::ostringstream out;
  write_panel_csv(out, assemble_panel(groups, store, nullptr, 7, OutcomeKind::Cases));
  CHECK(out.str().rfind("group_id,stratum_id,cluster_id,date,dy,x,p,dlog_tests,weight\n", 0) == 0);
}

TEST_CASE("raw_did_table arithmetic") {
  auto row = make_did_row(make_date(2020, 3, 17), 6, 1.02, 0.71, 1.39, 1.10);
  CHECK(row.diff_in_diff == row.diff_treated - row.diff_ctrl);

  // Treated and control with identical trajectories.
  RawDataset ds;
  std::vector<std::int64_t> path(kDays);
  for (int i = 0; i < kDays; ++i) path[static_cast<std::size_t>(i)] = 1 + i * i % 17;
  append_county(ds, "01001", "AL", kStart, path);
  append_county(ds, "02001", "AK", kStart, path);
  ds.orders = {{"01001", "AL", "", make_date(2020, 3, 20)}, {"02001", "AK", "", std::nullopt}};
  auto store = build_series(ds);
  auto groups = group_counties(store.orders(), store.universe(), make_date(2020, 4, 7));
  auto table = raw_did_table(groups, store, 21, OutcomeKind::Cases);
  REQUIRE(table.rows.size() == 1);
  CHECK(table.rows[0].diff_in_diff == 0.0);
  CHECK(table.rows[0].n_counties == 1);
  std::ostringstream out;
  write_did_table_csv(out, table);
  CHECK(out.str().find("-0.00") == std::string::npos);
}

TEST_CASE("event_time_mean_growth") {
  RawDataset ds;
  std::vector<std::int64_t> path(kDays);
  for (int i = 0; i < kDays; ++i) path[static_cast<std::size_t>(i)] = 1 + (i * 7) % 11;
  append_county(ds, "01001", "AL", kStart, path);
  const Date order = make_date(2020, 3, 25);
  ds.orders = {{"01001", "AL", "", order}};
  auto store = build_series(ds);
  auto curve = event_time_mean_growth(store, -5, 5, OutcomeKind::Cases);
  REQUIRE(curve.size() == 11);
  auto groups = group_counties(store.orders(), store.universe(), make_date(2020, 4, 7));
  for (const auto& p : curve) {
    CHECK(p.n_counties == 1);
    CHECK(p.mean_growth == log_weekly_growth(groups.treated[0], store, add_days(order, p.offset), OutcomeKind::Cases));
  }
  auto early = event_time_mean_growth(store, -20, -10, OutcomeKind::Cases);
  CHECK(early.size() < 11);  // offsets before 13 days of history are omitted

  RawDataset zeros;
  append_county(zeros, "01001", "AL", kStart, std::vector<std::int64_t>(kDays, 0));
  zeros.orders = {{"01001", "AL", "", order}};
  for (const auto& p : event_time_mean_growth(build_series(zeros), -3, 3, OutcomeKind::Cases)) {
    CHECK(p.mean_growth == 0.0);
  }
  CHECK_THROWS_AS(event_time_mean_growth(store, 3, -3, OutcomeKind::Cases), DataError);
}

TEST_CASE("series store fills order-only counties with zeros") {
  RawDataset ds = cohort_dataset(2, 1);
  ds.orders.push_back({"05001", "AR", "Z", make_date(2020, 3, 17)});
  auto store = build_series(ds);
  REQUIRE(store.counties.count("05001") == 1);
  const auto& z = store.counties.at("05001");
  CHECK(std::all_of(z.daily_cases.begin(), z.daily_cases.end(), [](auto v) { return v == 0; }));
  auto groups = group_counties(store.orders(), store.universe(), make_date(2020, 4, 7));
  CHECK(groups.treated[0].county_count() == 2);
}

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "../support.hpp"
#include "didpanel/counterfactual.hpp"
#include "didpanel/error.hpp"

using namespace didpanel;

namespace {

std::array<WeekEffect, 3> effects(double b1, double b2, double b3, double half = 0.1) {
  return {WeekEffect{1, b1, b1 - half, b1 + half}, WeekEffect{2, b2, b2 - half, b2 + half},
          WeekEffect{3, b3, b3 - half, b3 + half}};
}

}  // namespace

TEST_CASE("weekly counterfactual difference") {
  CHECK(std::fabs(counterfactual_weekly(-0.67, 100000) + 48830) < 1.0);
  CHECK(counterfactual_weekly(-0.67, 100000, CounterfactualFormula::Inverse) ==
        doctest::Approx(100000 * (1 - std::exp(0.67))));
  CHECK(counterfactual_weekly(0.0, 1234) == 0.0);
  CHECK(counterfactual_weekly(0.0, 1234, CounterfactualFormula::Inverse) == 0.0);
  CHECK(counterfactual_weekly(-0.3, 0) == 0.0);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> b(-1.5, 1.5), o(0, 1e5);
  for (int i = 0; i < 200; ++i) {
    const double beta = b(rng), x = o(rng), y = o(rng);
    for (auto f : {CounterfactualFormula::Scaled, CounterfactualFormula::Inverse}) {
      CHECK(counterfactual_weekly(beta, x + y, f) ==
            doctest::Approx(counterfactual_weekly(beta, x, f) + counterfactual_weekly(beta, y, f)));
      const double diff = counterfactual_weekly(beta, x, f);
      CHECK((beta < 0 ? diff <= 0 : diff >= 0));
      CHECK(counterfactual_weekly(beta - 0.1, x, f) <= diff);
    }
  }
}

TEST_CASE("formula names") {
  CHECK(parse_counterfactual_formula("scaled") == CounterfactualFormula::Scaled);
  CHECK(parse_counterfactual_formula("inverse") == CounterfactualFormula::Inverse);
  CHECK_THROWS_AS(parse_counterfactual_formula("other"), ConfigError);
  CHECK(to_string(CounterfactualFormula::Inverse) == "inverse");
}

TEST_CASE("week_effects picks the week-matched horizons") {
  std::vector<EventStudyPoint> pts;
  for (int d : {-3, 7, 14, 21, 25}) {
    EventStudyPoint p;
    p.d = d;
    p.beta3 = d / 100.0;
    p.ci_low = p.beta3 - 0.5;
    p.ci_high = p.beta3 + 0.5;
    pts.push_back(p);
  }
  auto e = week_effects(pts);
  CHECK(e[0].beta3 == 0.07);
  CHECK(e[1].beta3 == 0.14);
  CHECK(e[2].ci_high == 0.21 + 0.5);
  pts.erase(pts.begin() + 2);
  CHECK_THROWS_AS(week_effects(pts), EstimationError);
}

TEST_CASE("two-group aggregation by hand") {
  const auto eff = effects(-0.2, -0.4, -0.6);
  std::vector<GroupWeekObserved> obs = {{"2020-03-20", {100, 200, 300}}, {"2020-03-25", {10, 0, 5}}};
  auto rep = aggregate_prevented(eff, obs, OutcomeKind::Cases);
  REQUIRE(rep.per_group_week.size() == 6);
  double want = 0, want_low = 0, want_high = 0;
  const double counts[2][3] = {{100, 200, 300}, {10, 0, 5}};
  const double beta[3] = {-0.2, -0.4, -0.6};
  for (auto& row : counts) {
    for (int k = 0; k < 3; ++k) {
      want += -(std::exp(beta[k]) - 1) * row[k];
      want_low += -(std::exp(beta[k] + 0.1) - 1) * row[k];
      want_high += -(std::exp(beta[k] - 0.1) - 1) * row[k];
    }
  }
  CHECK(rep.totals.point == doctest::Approx(want).epsilon(1e-12));
  CHECK(rep.totals.low == doctest::Approx(want_low).epsilon(1e-12));
  CHECK(rep.totals.high == doctest::Approx(want_high).epsilon(1e-12));
  CHECK(rep.totals.low <= rep.totals.point);
  CHECK(rep.totals.point <= rep.totals.high);
  CHECK(rep.totals_scaled.point == rep.totals.point);
  CHECK(rep.totals_inverse.point > 0);
  CHECK(rep.totals_inverse.point > rep.totals_scaled.point);
  CHECK(rep.per_group_week[4].observed_weekly == 0);
  CHECK(rep.per_group_week[4].difference == 0.0);

  std::ostringstream csv;
  write_counterfactual_csv(csv, rep);
  CHECK(csv.str().rfind("group_id,week_index,observed_weekly,difference,difference_low,difference_high\n", 0) == 0);
  std::ostringstream summary;
  write_counterfactual_summary(summary, rep);
  CHECK(summary.str().find("prevented_inverse:") != std::string::npos);

  auto inv = aggregate_prevented(eff, obs, OutcomeKind::Cases, CounterfactualFormula::Inverse);
  CHECK(inv.totals.point == rep.totals_inverse.point);
}

TEST_CASE("zero effects prevent nothing") {
  std::vector<GroupWeekObserved> obs = {{"a", {5, 6, 7}}};
  auto rep = aggregate_prevented(effects(0, 0, 0, 0), obs, OutcomeKind::Fatalities);
  CHECK(rep.totals.point == 0.0);
  CHECK(!std::signbit(rep.totals.point));
}

TEST_CASE("missing or negative weeks are named") {
  std::vector<GroupWeekObserved> obs = {{"2020-03-20", {1, 2, 3}}, {"2020-04-01", {1, 2, std::nullopt}}};
  try {
    aggregate_prevented(effects(-0.1, -0.1, -0.1), obs, OutcomeKind::Cases);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("2020-04-01") != std::string::npos);
  }
  obs[1].weeks[2] = -4;
  CHECK_THROWS_AS(aggregate_prevented(effects(-0.1, -0.1, -0.1), obs, OutcomeKind::Cases), DataError);
}

TEST_CASE("observed weekly counts follow each order date") {
  RawDataset ds;
  const Date start = make_date(2020, 3, 1);
  std::vector<std::int64_t> daily(30);
  for (std::size_t i = 0; i < daily.size(); ++i) daily[i] = static_cast<std::int64_t>(i);
  testsupport::append_county(ds, "01001", "AL", start, daily, daily);
  testsupport::append_county(ds, "01003", "AL", start, daily, daily);
  testsupport::append_county(ds, "02001", "AK", start, daily, daily);
  ds.orders = {{"01001", "AL", "A", make_date(2020, 3, 5)}, {"01003", "AL", "B", make_date(2020, 3, 15)}};
  auto store = build_series(ds);
  auto groups = group_counties(store.orders(), store.universe(), make_date(2020, 4, 7));
  auto obs = observed_weekly_counts(groups, store, OutcomeKind::Cases);
  REQUIRE(obs.size() == 2);
  // Order on day index 4: week 1 covers indices 5..11.
  CHECK(obs[0].group_id == "2020-03-05");
  CHECK(*obs[0].weeks[0] == 5 + 6 + 7 + 8 + 9 + 10 + 11);
  CHECK(*obs[0].weeks[2] == 19 + 20 + 21 + 22 + 23 + 24 + 25);
  // Order on index 14: week 3 would need index 35.
  CHECK(*obs[1].weeks[0] == 15 + 16 + 17 + 18 + 19 + 20 + 21);
  CHECK(*obs[1].weeks[1] == 22 + 23 + 24 + 25 + 26 + 27 + 28);
  CHECK(!obs[1].weeks[2].has_value());
}

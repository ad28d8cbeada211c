#include "didpanel/synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "didpanel/csv.hpp"
#include "didpanel/error.hpp"
#include "didpanel/report.hpp"

namespace didpanel {

// ---------------------------------------------------------------------------
// Spec

int SynthSpec::counties_in_group(int g) const {
  return counties_per_group.size() == 1 ? counties_per_group.front()
                                        : counties_per_group.at(static_cast<std::size_t>(g));
}

double SynthSpec::path(int e) const {
  if (e >= 1) {
    auto it = effect_by_horizon.upper_bound(e);
    return it == effect_by_horizon.begin() ? 0.0 : std::prev(it)->second;
  }
  return e >= -6 ? anticipation : 0.0;
}

double SynthSpec::true_effect(int d) const { return path(d) - path(0); }

void SynthSpec::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("synthetic spec: " + msg); };
  if (n_treated_groups < 1) fail("n_treated_groups must be at least 1");
  if (counties_per_group.empty()) fail("counties_per_group is empty");
  if (counties_per_group.size() != 1 && counties_per_group.size() != static_cast<std::size_t>(n_treated_groups)) {
    fail(fmt::format("counties_per_group lists {} values for {} groups", counties_per_group.size(), n_treated_groups));
  }
  for (int c : counties_per_group) {
    if (c < 1) fail("counties_per_group values must be positive");
  }
  if (control_counties < 1) fail("control_counties must be positive");
  if (!(noise_sd >= 0.0)) fail("noise_sd must be non-negative");
  if (!(tests_noise_sd >= 0.0)) fail("tests_noise_sd must be non-negative");
  if (!(base_daily_count > 0.0)) fail("base_daily_count must be positive");
  if (!(death_ratio > 0.0)) fail("death_ratio must be positive");
  if (!std::isfinite(base_growth)) fail("base_growth must be finite");
  if (order_spacing_days < 1) fail("order_spacing_days must be at least 1");
  if (n_states < 1 || n_states > 26 * 26) fail("n_states must be in 1..676");
  if (window_end <= window_start) fail("window_end must follow window_start");
  for (const auto& [d, v] : effect_by_horizon) {
    if (d < 1) fail(fmt::format("effect_by_horizon key {} must be at least 1", d));
    if (!std::isfinite(v)) fail("effect values must be finite");
  }
  const Date last = add_days(first_order_date, (n_treated_groups - 1) * order_spacing_days);
  if (first_order_date < add_days(window_start, 13) || last > window_end) {
    fail("order dates must lie in the window with at least 13 days of history");
  }
  long total = control_counties;
  for (int g = 0; g < n_treated_groups; ++g) total += counties_in_group(g);
  if ((total + n_states - 1) / n_states > 999) fail("too many counties per state for 3-digit county codes");
}

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ConfigError(fmt::format("synthetic spec: bad value '{}' for {}", text, key));
  }
  return v;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) out.push_back(trim(item));
  return out;
}

Date parse_spec_date(const std::string& key, const std::string& text) {
  auto d = try_parse_date(text);
  if (!d) throw ConfigError(fmt::format("synthetic spec: bad date '{}' for {}", text, key));
  return *d;
}

void apply(SynthSpec& s, const std::string& key, const std::string& value) {
  if (key == "n_treated_groups") {
    s.n_treated_groups = parse_number<int>(key, value);
  } else if (key == "counties_per_group") {
    s.counties_per_group.clear();
    for (const auto& v : split_list(value)) s.counties_per_group.push_back(parse_number<int>(key, v));
  } else if (key == "control_counties") {
    s.control_counties = parse_number<int>(key, value);
  } else if (key == "base_growth") {
    s.base_growth = parse_number<double>(key, value);
  } else if (key == "effect") {
    s.effect_by_horizon = {{1, parse_number<double>(key, value)}};
  } else if (key == "effect_by_horizon") {
    s.effect_by_horizon.clear();
    for (const auto& item : split_list(value)) {
      auto colon = item.find(':');
      if (colon == std::string::npos) throw ConfigError(fmt::format("synthetic spec: expected d:value, got '{}'", item));
      s.effect_by_horizon[parse_number<int>(key, trim(item.substr(0, colon)))] =
          parse_number<double>(key, trim(item.substr(colon + 1)));
    }
  } else if (key == "anticipation") {
    s.anticipation = parse_number<double>(key, value);
  } else if (key == "noise_sd") {
    s.noise_sd = parse_number<double>(key, value);
  } else if (key == "seed") {
    s.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "first_order_date") {
    s.first_order_date = parse_spec_date(key, value);
  } else if (key == "order_spacing_days") {
    s.order_spacing_days = parse_number<int>(key, value);
  } else if (key == "window_start") {
    s.window_start = parse_spec_date(key, value);
  } else if (key == "window_end") {
    s.window_end = parse_spec_date(key, value);
  } else if (key == "n_states") {
    s.n_states = parse_number<int>(key, value);
  } else if (key == "base_daily_count") {
    s.base_daily_count = parse_number<double>(key, value);
  } else if (key == "death_ratio") {
    s.death_ratio = parse_number<double>(key, value);
  } else if (key == "tests_noise_sd") {
    s.tests_noise_sd = parse_number<double>(key, value);
  } else {
    throw ConfigError(fmt::format("synthetic spec: unknown key '{}'", key));
  }
}

}  // namespace

SynthSpec parse_synth_spec(std::istream& in, SynthSpec base) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto text = trim(line);
    if (text.empty()) continue;
    auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(fmt::format("synthetic spec line {}: expected key = value", line_no));
    }
    apply(base, trim(text.substr(0, eq)), trim(text.substr(eq + 1)));
  }
  base.validate();
  return base;
}

SynthSpec parse_synth_spec_text(std::string_view text, SynthSpec base) {
  std::istringstream in{std::string(text)};
  return parse_synth_spec(in, std::move(base));
}

std::string synth_spec_to_text(const SynthSpec& s) {
  std::vector<std::string> effects;
  for (const auto& [d, v] : s.effect_by_horizon) effects.push_back(fmt::format("{}:{}", d, format_number(v)));
  std::string out;
  auto kv = [&](std::string_view k, const std::string& v) { out += fmt::format("{} = {}\n", k, v); };
  kv("n_treated_groups", std::to_string(s.n_treated_groups));
  kv("counties_per_group", fmt::format("{}", fmt::join(s.counties_per_group, ",")));
  kv("control_counties", std::to_string(s.control_counties));
  kv("base_growth", format_number(s.base_growth));
  kv("effect_by_horizon", fmt::format("{}", fmt::join(effects, ",")));
  kv("anticipation", format_number(s.anticipation));
  kv("noise_sd", format_number(s.noise_sd));
  kv("seed", std::to_string(s.seed));
  kv("first_order_date", format_date(s.first_order_date));
  kv("order_spacing_days", std::to_string(s.order_spacing_days));
  kv("window_start", format_date(s.window_start));
  kv("window_end", format_date(s.window_end));
  kv("n_states", std::to_string(s.n_states));
  kv("base_daily_count", format_number(s.base_daily_count));
  kv("death_ratio", format_number(s.death_ratio));
  kv("tests_noise_sd", format_number(s.tests_noise_sd));
  return out;
}

// ---------------------------------------------------------------------------
// Generation

namespace {

// std::normal_distribution is implementation-defined; this is not.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double normal() {
    const double u1 = static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 gen_;
};

// Cumulative effect on log weekly counts e days after the order.
double cumulative_shift(const SynthSpec& s, int e) {
  double phi = 0.0;
  for (int x = e; x >= -6; x -= 7) phi += s.path(x);
  return phi;
}

// Daily counts whose trailing 7-day sums follow the baseline weekly sums
// times exp(cumulative_shift). Sharp drops in the target can make single days
// negative, the same way reporting revisions do.
std::vector<double> daily_path(const SynthSpec& s, double scale, std::optional<int> order_day, int n_days) {
  const double g = s.base_growth;
  auto base = [&](int i) { return scale * std::exp(g * i); };
  auto weekly = [&](int i) {
    double w = 0.0;
    for (int j = i - 6; j <= i; ++j) w += base(j);
    return order_day ? w * std::exp(cumulative_shift(s, i - *order_day)) : w;
  };
  std::vector<double> c(static_cast<std::size_t>(n_days));
  for (int i = 0; i < n_days; ++i) {
    const double lag = i >= 7 ? c[static_cast<std::size_t>(i - 7)] : base(i - 7);
    c[static_cast<std::size_t>(i)] = order_day ? weekly(i) - weekly(i - 1) + lag : base(i);
  }
  return c;
}

std::vector<std::int64_t> realize(const std::vector<double>& c, double sd, Rng& rng) {
  std::vector<std::int64_t> out(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double v = sd > 0.0 ? c[i] * std::exp(sd * rng.normal()) : c[i];
    out[i] = std::llround(v);
  }
  return out;
}

std::string state_code(int s) {
  return {static_cast<char>('A' + s / 26), static_cast<char>('A' + s % 26)};
}

}  // namespace

SynthData generate_panel(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const int n_days = days_between(spec.window_start, spec.window_end) + 1;

  struct County {
    std::string fips, state, name;
    std::optional<int> order_day;
  };
  std::vector<County> counties;
  std::vector<int> per_state(static_cast<std::size_t>(spec.n_states), 0);
  auto add = [&](std::optional<int> order_day) {
    const int k = static_cast<int>(counties.size());
    const int s = k % spec.n_states;
    const int seq = ++per_state[static_cast<std::size_t>(s)];
    counties.push_back({fmt::format("{:02d}{:03d}", s + 1, seq), state_code(s), fmt::format("County {}", k + 1),
                        order_day});
  };
  const int first = days_between(spec.window_start, spec.first_order_date);
  for (int g = 0; g < spec.n_treated_groups; ++g) {
    for (int i = 0; i < spec.counties_in_group(g); ++i) add(first + g * spec.order_spacing_days);
  }
  for (int i = 0; i < spec.control_counties; ++i) add(std::nullopt);

  SynthData out;
  for (const auto& c : counties) {
    out.orders.push_back({c.fips, c.state, c.name,
                          c.order_day ? std::optional<Date>(add_days(spec.window_start, *c.order_day)) : std::nullopt});
  }
  std::sort(out.orders.begin(), out.orders.end(), [](const auto& a, const auto& b) { return a.fips < b.fips; });

  std::vector<std::vector<std::int64_t>> cases(counties.size()), deaths(counties.size());
  for (std::size_t k = 0; k < counties.size(); ++k) {
    const double scale = spec.base_daily_count * std::exp(rng.uniform() - 0.5);
    cases[k] = realize(daily_path(spec, scale, counties[k].order_day, n_days), spec.noise_sd, rng);
    deaths[k] = realize(daily_path(spec, scale * spec.death_ratio, counties[k].order_day, n_days), spec.noise_sd, rng);
  }
  std::vector<std::int64_t> cum_c(counties.size(), 0), cum_d(counties.size(), 0);
  for (int i = 0; i < n_days; ++i) {
    const Date d = add_days(spec.window_start, i);
    for (std::size_t k = 0; k < counties.size(); ++k) {
      cum_c[k] += cases[k][static_cast<std::size_t>(i)];
      cum_d[k] += deaths[k][static_cast<std::size_t>(i)];
      out.cases.push_back({d, counties[k].fips, counties[k].name, counties[k].state, std::max<std::int64_t>(0, cum_c[k]),
                           std::max<std::int64_t>(0, cum_d[k])});
    }
  }
  std::sort(out.cases.begin(), out.cases.end(),
            [](const CaseRow& a, const CaseRow& b) { return std::tie(a.date, a.fips) < std::tie(b.date, b.fips); });

  for (int s = 0; s < spec.n_states; ++s) {
    const double level = 1e5 * std::exp(rng.uniform());
    const double growth = spec.base_growth * (0.5 + rng.uniform());
    std::int64_t cum = 0;
    for (int i = 0; i < n_days; ++i) {
      double v = level * std::exp(growth * i);
      if (spec.tests_noise_sd > 0.0) v *= std::exp(spec.tests_noise_sd * rng.normal());
      cum += std::llround(v);
      out.tests.push_back({add_days(spec.window_start, i), state_code(s), cum});
    }
  }
  return out;
}

RawDataset round_trip(const SynthData& data, const StudyWindow& window) {
  std::stringstream orders, cases, tests;
  write_orders(orders, data.orders);
  write_cases(cases, data.cases);
  write_tests(tests, data.tests);
  RawDataset ds;
  auto po = parse_orders(orders, {}, window);
  auto pc = parse_cases(cases, window);
  auto pt = parse_tests(tests);
  ds.orders = std::move(po.records);
  ds.orders_log = std::move(po.log);
  ds.cases = std::move(pc.rows);
  ds.cases_log = std::move(pc.log);
  ds.tests = std::move(pt.rows);
  ds.tests_log = std::move(pt.log);
  return ds;
}

double did_2x2_oracle(double treated_pre, double treated_post, double control_pre, double control_post) {
  return (treated_post - treated_pre) - (control_post - control_pre);
}

// ---------------------------------------------------------------------------
// Recovery

RecoverySummary recovery_experiment(const SynthSpec& spec, std::size_t n_seeds, std::span<const int> horizons,
                                    OutcomeKind kind, const StudyOptions& options) {
  if (n_seeds < 1) throw ConfigError("recovery experiment needs at least one seed");
  spec.validate();
  const StudyWindow window{spec.window_start, spec.window_end};
  std::vector<std::vector<EventStudyPoint>> by_d(horizons.size());
  for (std::size_t i = 0; i < n_seeds; ++i) {
    SynthSpec s = spec;
    s.seed = spec.seed + i;
    try {
      Study study(round_trip(generate_panel(s), window), options);
      for (std::size_t h = 0; h < horizons.size(); ++h) {
        by_d[h].push_back(interaction_point(study.fit(horizons[h], kind)));
      }
    } catch (const std::exception& e) {
      throw std::runtime_error(fmt::format("recovery experiment failed at seed {}: {}", s.seed, e.what()));
    }
  }

  RecoverySummary out;
  out.n_seeds = n_seeds;
  out.outcome_kind = kind;
  for (std::size_t h = 0; h < horizons.size(); ++h) {
    RecoveryHorizon r;
    r.d = horizons[h];
    r.truth = spec.true_effect(r.d);
    r.n = by_d[h].size();
    const double n = static_cast<double>(r.n);
    double sum = 0, sq = 0, cover = 0, se = 0;
    for (const auto& p : by_d[h]) {
      sum += p.beta3;
      sq += (p.beta3 - r.truth) * (p.beta3 - r.truth);
      cover += (p.ci_low <= r.truth && r.truth <= p.ci_high) ? 1.0 : 0.0;
      se += p.se;
    }
    r.mean_estimate = sum / n;
    r.bias = r.mean_estimate - r.truth;
    r.rmse = std::sqrt(sq / n);
    r.coverage = cover / n;
    r.mean_se = se / n;
    if (r.n > 1) {
      double var = 0;
      for (const auto& p : by_d[h]) var += (p.beta3 - r.mean_estimate) * (p.beta3 - r.mean_estimate);
      r.mc_se = std::sqrt(var / (n - 1.0) / n);
    }
    out.horizons.push_back(r);
  }
  return out;
}

void write_recovery_csv(std::ostream& out, const RecoverySummary& summary) {
  csv::write_row(out, {"d", "truth", "mean_estimate", "bias", "rmse", "coverage", "mean_se", "mc_se", "n"});
  for (const auto& r : summary.horizons) {
    csv::write_row(out, {std::to_string(r.d), format_number(r.truth), format_number(r.mean_estimate),
                         format_number(r.bias), format_number(r.rmse), format_number(r.coverage),
                         format_number(r.mean_se), format_number(r.mc_se), std::to_string(r.n)});
  }
}

}  // namespace didpanel

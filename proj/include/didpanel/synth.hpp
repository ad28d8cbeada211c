#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "didpanel/ingest.hpp"
#include "didpanel/study.hpp"

namespace didpanel {

/// Parameters of a synthetic county panel with a known effect path.
struct SynthSpec {
  int n_treated_groups = 22;
  /// One entry per treated group, or a single entry applied to all.
  std::vector<int> counties_per_group = {10};
  int control_counties = 60;
  double base_growth = 0.03;  // per day, on daily counts
  /// Interaction by days since the order; held constant until the next key.
  /// Days before the smallest key carry no effect.
  std::map<int, double> effect_by_horizon = {{1, -0.5}};
  /// Effect on log weekly growth over the six days before the order and the
  /// order day itself.
  double anticipation = 0.0;
  double noise_sd = 0.0;  // on log daily counts
  std::uint64_t seed = 1;

  Date first_order_date = make_date(2020, 3, 17);
  int order_spacing_days = 1;
  Date window_start = make_date(2020, 3, 1);
  Date window_end = make_date(2020, 5, 7);
  int n_states = 8;
  /// Large baseline keeps integer rounding and the +1 offset negligible.
  double base_daily_count = 1e9;
  double death_ratio = 0.1;
  double tests_noise_sd = 0.1;

  void validate() const;
  int counties_in_group(int g) const;
  /// Effect path on log weekly growth at `e` days since the order.
  double path(int e) const;
  /// Population interaction at horizon d: path(d) - path(0).
  double true_effect(int d) const;
};

/// `key = value` lines; `#` starts a comment. Unknown keys and bad values
/// raise ConfigError. `effect = v` is shorthand for `effect_by_horizon = 1:v`.
SynthSpec parse_synth_spec(std::istream& in, SynthSpec base = {});
SynthSpec parse_synth_spec_text(std::string_view text, SynthSpec base = {});
std::string synth_spec_to_text(const SynthSpec& spec);

inline constexpr std::string_view kSynthRngName = "mt19937_64 with Box-Muller normals";

/// Generated input files in the ingest schemas.
struct SynthData {
  std::vector<OrderRecord> orders;
  std::vector<CaseRow> cases;
  std::vector<TestRow> tests;
};

/// Deterministic for a given spec and seed.
SynthData generate_panel(const SynthSpec& spec);

/// Serializes and re-parses the generated files, so the full ingest path runs.
RawDataset round_trip(const SynthData& data, const StudyWindow& window);

/// (T_post - T_pre) - (C_post - C_pre)
double did_2x2_oracle(double treated_pre, double treated_post, double control_pre, double control_post);

struct RecoveryHorizon {
  int d = 0;
  double truth = 0.0;
  double mean_estimate = 0.0;
  double bias = 0.0;
  double rmse = 0.0;
  double coverage = 0.0;
  double mean_se = 0.0;
  /// Standard error of the Monte Carlo mean of the estimates.
  double mc_se = 0.0;
  std::size_t n = 0;
};

struct RecoverySummary {
  std::size_t n_seeds = 0;
  OutcomeKind outcome_kind = OutcomeKind::Cases;
  std::vector<RecoveryHorizon> horizons;
};

/// Runs generation, ingest, panel assembly and fitting for seeds
/// spec.seed, spec.seed + 1, ... and compares the interaction estimates
/// with the truth. Throws std::runtime_error naming the seed on failure.
RecoverySummary recovery_experiment(const SynthSpec& spec, std::size_t n_seeds, std::span<const int> horizons,
                                    OutcomeKind kind = OutcomeKind::Cases, const StudyOptions& options = {});

/// `d,truth,mean_estimate,bias,rmse,coverage,mean_se,mc_se,n`
void write_recovery_csv(std::ostream& out, const RecoverySummary& summary);

}  // namespace didpanel

#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "didpanel/counterfactual.hpp"
#include "didpanel/estimator.hpp"
#include "didpanel/ingest.hpp"
#include "didpanel/panel.hpp"

namespace didpanel::cli {

/// Everything a command needs; filled from flags and an optional config file.
struct RunConfig {
  std::filesystem::path orders;
  std::filesystem::path cases;
  std::filesystem::path tests;
  std::optional<OutcomeKind> outcome;  // unset: command default
  std::string cutoff = "2020-04-07";
  std::string window_start = "2020-03-01";
  std::string window_end = "2020-05-07";
  std::vector<int> d;  // unset: command default
  int d_from = -14;
  int d_to = 26;
  bool include_tests = true;
  ControlWeighting control_weighting = ControlWeighting::Own;
  FixedEffects fixed_effects = FixedEffects::Stratum;
  CounterfactualFormula formula = CounterfactualFormula::Scaled;
  std::filesystem::path out_dir = "didpanel_out";
  bool dump_panels = false;
  // simulate
  std::filesystem::path spec;
  std::optional<std::uint64_t> seed;
  std::optional<double> noise_sd;
  std::size_t n_seeds = 20;
};

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_hex(std::string_view bytes);

/// Parses arguments and runs one subcommand. Returns the process exit code:
/// 0 when every output was written, 1 on data or estimation errors, 2 on
/// usage or configuration errors.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace didpanel::cli

#include "didpanel/report.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "didpanel/csv.hpp"

namespace didpanel {

std::string format_number(double v) {
  if (v == 0.0) return "0";  // folds -0
  if (std::isnan(v)) return "nan";
  return fmt::format("{:.12g}", v);
}

namespace {

std::string fixed(double v, int decimals) {
  std::string s = fmt::format("{:.{}f}", v, decimals);
  if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

// Focal coefficients lead, the rest follow in model order.
std::vector<std::string> display_order(std::span<const FitResult> fits) {
  std::vector<std::string> order = {std::string(kTreatedName), std::string(kPeriodName),
                                    std::string(kInteractionName), std::string(kTestsName),
                                    std::string(kInterceptName)};
  auto present = [&](const std::string& n) {
    return std::any_of(fits.begin(), fits.end(), [&](const FitResult& f) { return f.index_of(n).has_value(); });
  };
  std::vector<std::string> out;
  for (const auto& n : order) {
    if (present(n)) out.push_back(n);
  }
  return out;
}

}  // namespace

void write_fit_report(std::ostream& out, const FitResult& fit, const std::string& title) {
  const std::string heading =
      title.empty() ? fmt::format("{} model, d = {}", to_string(fit.outcome_kind), fit.horizon_d) : title;
  out << heading << '\n' << std::string(heading.size(), '=') << '\n';
  std::size_t width = 12;
  for (const auto& n : fit.names) width = std::max(width, n.size());
  out << fmt::format("{:<{}}  {:>14}  {:>14}  {:>10}\n", "term", width, "estimate", "cluster_se", "t");
  const bool have_vcov = fit.vcov_clustered.rows() == fit.coefficients.size();
  for (std::size_t i = 0; i < fit.names.size(); ++i) {
    const double b = fit.coefficients(static_cast<Eigen::Index>(i));
    if (have_vcov) {
      const double se = fit.se(fit.names[i]);
      out << fmt::format("{:<{}}  {:>14.6f}  {:>14.6f}  {:>10.3f}\n", fit.names[i], width, b, se,
                         se > 0 ? b / se : 0.0);
    } else {
      out << fmt::format("{:<{}}  {:>14.6f}\n", fit.names[i], width, b);
    }
  }
  out << '\n';
  if (auto i = fit.index_of(kInteractionName); i && have_vcov && fit.df() >= 1) {
    const auto pe = percent_effect(fit.coef(kInteractionName), fit.se(kInteractionName), fit.df());
    out << fmt::format("percent effect    {:.1f}% [{:.1f}%, {:.1f}%] (t, df = {})\n", 100 * pe.pct,
                       100 * pe.pct_low, 100 * pe.pct_high, fit.df());
  }
  out << fmt::format("observations      {}\n", fit.n_obs);
  out << fmt::format("clusters          {}\n", fit.n_clusters);
  out << fmt::format("parameters        {}\n", fit.n_params);
  out << fmt::format("adjusted R2       {:.4f}\n", fit.adjusted_r2);
  out << fmt::format("dropped columns   {}\n",
                     fit.dropped_columns.empty() ? std::string("none") : fmt::format("{}", fmt::join(fit.dropped_columns, ", ")));
}

void write_model_table(std::ostream& out, std::span<const FitResult> fits, std::span<const std::string> labels) {
  constexpr int kCol = 14;
  const auto rows = display_order(fits);
  std::size_t width = 28;
  out << fmt::format("{:<{}}", "", width);
  for (std::size_t m = 0; m < fits.size(); ++m) {
    out << fmt::format("{:>{}}", m < labels.size() ? labels[m] : fmt::format("({})", m + 1), kCol);
  }
  out << '\n';
  out << fmt::format("{:<{}}", "outcome / d", width);
  for (const auto& f : fits) out << fmt::format("{:>{}}", fmt::format("{} {}", to_string(f.outcome_kind), f.horizon_d), kCol);
  out << '\n' << std::string(width + kCol * fits.size(), '-') << '\n';

  for (const auto& name : rows) {
    out << fmt::format("{:<{}}", name, width);
    for (const auto& f : fits) out << fmt::format("{:>{}}", f.index_of(name) ? fixed(f.coef(name), 2) : "", kCol);
    out << '\n' << fmt::format("{:<{}}", "", width);
    for (const auto& f : fits) {
      out << fmt::format("{:>{}}", f.index_of(name) ? fmt::format("({})", fixed(f.se(name), 2)) : "", kCol);
    }
    out << '\n';
  }
  out << std::string(width + kCol * fits.size(), '-') << '\n';
  auto line = [&](const char* label, auto&& cell) {
    out << fmt::format("{:<{}}", label, width);
    for (const auto& f : fits) out << fmt::format("{:>{}}", cell(f), kCol);
    out << '\n';
  };
  line("percent effect", [](const FitResult& f) {
    if (!f.index_of(kInteractionName)) return std::string();
    return fmt::format("{:.1f}%", 100 * std::expm1(f.coef(kInteractionName)));
  });
  line("95% interval", [](const FitResult& f) {
    if (!f.index_of(kInteractionName)) return std::string();
    const auto pe = percent_effect(f.coef(kInteractionName), f.se(kInteractionName), f.df());
    return fmt::format("{:.1f}..{:.1f}", 100 * pe.pct_low, 100 * pe.pct_high);
  });
  line("observations", [](const FitResult& f) { return std::to_string(f.n_obs); });
  line("clusters", [](const FitResult& f) { return std::to_string(f.n_clusters); });
  line("parameters", [](const FitResult& f) { return std::to_string(f.n_params); });
  line("adjusted R2", [](const FitResult& f) { return fixed(f.adjusted_r2, 2); });
}

void write_event_study_csv(std::ostream& out, const EventStudy& study) {
  csv::write_row(out, {"d", "beta3", "se", "ci_low", "ci_high", "pct", "pct_low", "pct_high"});
  for (const auto& p : study.points) {
    csv::write_row(out, {std::to_string(p.d), format_number(p.beta3), format_number(p.se), format_number(p.ci_low),
                         format_number(p.ci_high), format_number(p.pct), format_number(p.pct_low),
                         format_number(p.pct_high)});
  }
}

void write_event_study_gaps_csv(std::ostream& out, const EventStudy& study) {
  csv::write_row(out, {"d", "reason"});
  for (const auto& g : study.gaps) csv::write_row(out, {std::to_string(g.d), g.reason});
}

void write_event_curve_csv(std::ostream& out, std::span<const EventCurvePoint> curve) {
  csv::write_row(out, {"offset", "mean_growth", "n_counties"});
  for (const auto& p : curve) {
    csv::write_row(out, {std::to_string(p.offset), format_number(p.mean_growth), std::to_string(p.n_counties)});
  }
}

}  // namespace didpanel

#pragma once

#include <ostream>
#include <span>
#include <string>

#include "didpanel/estimator.hpp"

namespace didpanel {

/// Shortest round-trippable-enough text for a double, fixed across platforms.
std::string format_number(double v);

/// One fitted model as a plain-text coefficient table: estimates, clustered
/// standard errors, dropped columns, N, G, K and adjusted R2.
void write_fit_report(std::ostream& out, const FitResult& fit, const std::string& title = {});

/// Several fitted models side by side, one column per model, with the
/// focal coefficients first and the percent effect of the interaction.
void write_model_table(std::ostream& out, std::span<const FitResult> fits, std::span<const std::string> labels);

/// `d,beta3,se,ci_low,ci_high,pct,pct_low,pct_high`
void write_event_study_csv(std::ostream& out, const EventStudy& study);

/// `d,reason`
void write_event_study_gaps_csv(std::ostream& out, const EventStudy& study);

/// `offset,mean_growth,n_counties`
void write_event_curve_csv(std::ostream& out, std::span<const EventCurvePoint> curve);

}  // namespace didpanel

#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "didpanel/panel.hpp"

namespace didpanel {

enum class FixedEffects {
  Stratum,  // one effect per cohort pairing, shared by its control rows
  Group,    // one effect per county group; absorbs treated_x
};

std::string_view to_string(FixedEffects fe);
FixedEffects parse_fixed_effects(std::string_view text);

inline constexpr std::string_view kInterceptName = "(Intercept)";
inline constexpr std::string_view kTreatedName = "treated_x";
inline constexpr std::string_view kPeriodName = "period_p";
inline constexpr std::string_view kInteractionName = "treated_x:period_p";
inline constexpr std::string_view kTestsName = "dlog_tests";

struct DesignOptions {
  bool include_tests = true;
  FixedEffects fixed_effects = FixedEffects::Stratum;
  /// A column is dropped when its weighted residual after projection on the
  /// columns already kept is at most this fraction of its weighted norm.
  double collinearity_tol = 1e-10;
};

/// Weighted regression design with collinear columns already removed.
struct DesignMatrix {
  Eigen::VectorXd response;
  Eigen::MatrixXd columns;
  std::vector<std::string> names;  // one per retained column
  Eigen::VectorXd weights;
  std::vector<std::string> cluster_ids;
  std::vector<std::string> dropped_columns;

  Eigen::Index rows() const { return columns.rows(); }
  Eigen::Index cols() const { return columns.cols(); }

  /// Builds a design from candidate columns, scanning them left to right and
  /// dropping every column that is collinear with those kept before it.
  static DesignMatrix from_candidates(Eigen::VectorXd response, const Eigen::MatrixXd& candidates,
                                      std::vector<std::string> names, Eigen::VectorXd weights,
                                      std::vector<std::string> cluster_ids, double collinearity_tol = 1e-10);
};

/// Candidate column order: intercept, fixed-effect indicators (smallest id
/// is the reference), treated_x, period_p, the interaction, dlog_tests when
/// requested, then date indicators (earliest date is the reference).
DesignMatrix build_design(const PanelDataset& panel, const DesignOptions& options = {});

struct FitResult {
  std::vector<std::string> names;
  Eigen::VectorXd coefficients;
  Eigen::MatrixXd vcov_clustered;  // empty until cluster_vcov is applied
  Eigen::VectorXd residuals;
  Eigen::VectorXd fitted;
  std::size_t n_obs = 0;
  std::size_t n_params = 0;
  std::size_t n_clusters = 0;
  double adjusted_r2 = 0.0;
  int horizon_d = 0;
  OutcomeKind outcome_kind = OutcomeKind::Cases;
  std::vector<std::string> dropped_columns;

  std::optional<std::size_t> index_of(std::string_view name) const;
  double coef(std::string_view name) const;
  /// Clustered standard error. Throws if vcov has not been computed.
  double se(std::string_view name) const;
  /// Degrees of freedom for cluster-based intervals: clusters - 1.
  int df() const { return static_cast<int>(n_clusters) - 1; }
};

/// Weighted least squares via column-pivoted Householder QR of the
/// sqrt(weight)-scaled design. Residuals are on the original scale.
/// Throws EstimationError listing columns the factorization finds
/// numerically dependent.
FitResult fit_wls(const DesignMatrix& design);

/// CR1 sandwich: bread (X'WX)^-1, meat sum over clusters of s_g s_g' with
/// s_g = X_g' W_g u_g, scaled by G/(G-1) * (N-1)/(N-K).
Eigen::MatrixXd cluster_vcov(const FitResult& fit, const DesignMatrix& design);

/// 1 - (1 - R2_w) (N-1)/(N-K), with R2_w about the weighted mean.
double adjusted_r2(const FitResult& fit, const DesignMatrix& design);

/// fit_wls + cluster_vcov + adjusted_r2, tagged with the panel's horizon.
FitResult fit_panel(const PanelDataset& panel, const DesignOptions& options = {});

double t_quantile_975(int df);

struct PercentEffect {
  double pct = 0.0;
  double pct_low = 0.0;
  double pct_high = 0.0;
};

/// exp(beta) - 1 with a central-t 95% interval mapped the same way.
PercentEffect percent_effect(double beta, double se, int df);

struct EventStudyPoint {
  int d = 0;
  double beta3 = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double pct = 0.0;
  double pct_low = 0.0;
  double pct_high = 0.0;
  std::size_t n_obs = 0;
  std::size_t n_clusters = 0;
};

struct EventStudyGap {
  int d = 0;
  std::string reason;
};

struct EventStudy {
  OutcomeKind outcome_kind = OutcomeKind::Cases;
  std::vector<EventStudyPoint> points;
  std::vector<EventStudyGap> gaps;
};

/// Interaction estimate and interval from a fitted model.
EventStudyPoint interaction_point(const FitResult& fit);

/// Nonzero horizons in [from, to].
std::vector<int> horizon_range(int from, int to);

using PanelBuilder = std::function<PanelDataset(int d)>;

/// Fits one model per horizon and extracts the interaction. Horizons that
/// cannot be built or fit become gaps. Throws EstimationError when every
/// horizon is a gap.
EventStudy event_study(const PanelBuilder& build_panel, std::span<const int> horizons, OutcomeKind kind,
                       const DesignOptions& options = {});

}  // namespace didpanel

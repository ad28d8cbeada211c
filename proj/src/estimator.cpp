#include "didpanel/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include "didpanel/error.hpp"

namespace didpanel {

std::string_view to_string(FixedEffects fe) { return fe == FixedEffects::Stratum ? "stratum" : "group"; }

FixedEffects parse_fixed_effects(std::string_view text) {
  if (text == "stratum") return FixedEffects::Stratum;
  if (text == "group" || text == "per-group") return FixedEffects::Group;
  throw ConfigError(fmt::format("unknown fixed-effect mode '{}' (expected stratum or group)", text));
}

// ---------------------------------------------------------------------------
// Design

DesignMatrix DesignMatrix::from_candidates(Eigen::VectorXd response, const Eigen::MatrixXd& candidates,
                                           std::vector<std::string> names, Eigen::VectorXd weights,
                                           std::vector<std::string> cluster_ids, double collinearity_tol) {
  const Eigen::Index n = candidates.rows();
  if (response.size() != n || weights.size() != n || static_cast<Eigen::Index>(cluster_ids.size()) != n ||
      static_cast<Eigen::Index>(names.size()) != candidates.cols()) {
    throw EstimationError("design inputs have mismatched sizes");
  }
  if ((weights.array() <= 0.0).any()) throw EstimationError("weights must be positive");

  const Eigen::VectorXd sw = weights.array().sqrt();
  // Orthonormal basis of the kept columns under the weighted inner product.
  Eigen::MatrixXd basis(n, std::min<Eigen::Index>(n, candidates.cols()));
  Eigen::Index kept = 0;
  std::vector<Eigen::Index> keep;
  DesignMatrix out;
  for (Eigen::Index j = 0; j < candidates.cols(); ++j) {
    Eigen::VectorXd v = sw.cwiseProduct(candidates.col(j));
    const double norm = v.norm();
    if (norm > 0.0 && kept < basis.cols()) {
      for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index k = 0; k < kept; ++k) v -= basis.col(k).dot(v) * basis.col(k);
      }
      const double resid = v.norm();
      if (resid > collinearity_tol * norm) {
        basis.col(kept++) = v / resid;
        keep.push_back(j);
        continue;
      }
    }
    out.dropped_columns.push_back(names[static_cast<std::size_t>(j)]);
  }

  out.response = std::move(response);
  out.weights = std::move(weights);
  out.cluster_ids = std::move(cluster_ids);
  out.columns.resize(n, static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    out.columns.col(static_cast<Eigen::Index>(k)) = candidates.col(keep[k]);
    out.names.push_back(std::move(names[static_cast<std::size_t>(keep[k])]));
  }
  return out;
}

DesignMatrix build_design(const PanelDataset& panel, const DesignOptions& options) {
  const auto& rows = panel.rows;
  const auto n = static_cast<Eigen::Index>(rows.size());
  if (n == 0) throw EstimationError(fmt::format("panel for d = {} has no rows", panel.horizon_d));
  if (options.include_tests && !panel.has_tests) {
    throw EstimationError("tests covariate requested but the panel was built without test data");
  }

  std::set<std::string> fe_levels;
  std::set<Date> dates;
  for (const auto& r : rows) {
    fe_levels.insert(options.fixed_effects == FixedEffects::Stratum ? r.stratum_id : r.group_id);
    dates.insert(r.date);
  }
  const std::string fe_prefix = options.fixed_effects == FixedEffects::Stratum ? "stratum" : "group";

  std::vector<std::string> names;
  names.emplace_back(kInterceptName);
  std::map<std::string, Eigen::Index> fe_col;
  for (auto it = std::next(fe_levels.begin()); it != fe_levels.end(); ++it) {
    fe_col[*it] = static_cast<Eigen::Index>(names.size());
    names.push_back(fmt::format("{}[{}]", fe_prefix, *it));
  }
  const auto c_x = static_cast<Eigen::Index>(names.size());
  names.emplace_back(kTreatedName);
  names.emplace_back(kPeriodName);
  names.emplace_back(kInteractionName);
  Eigen::Index c_tests = -1;
  if (options.include_tests) {
    c_tests = static_cast<Eigen::Index>(names.size());
    names.emplace_back(kTestsName);
  }
  std::map<Date, Eigen::Index> date_col;
  for (auto it = std::next(dates.begin()); it != dates.end(); ++it) {
    date_col[*it] = static_cast<Eigen::Index>(names.size());
    names.push_back(fmt::format("date[{}]", format_date(*it)));
  }

  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(names.size()));
  Eigen::VectorXd y(n), w(n);
  std::vector<std::string> clusters;
  clusters.reserve(rows.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    x(i, 0) = 1.0;
    const auto& level = options.fixed_effects == FixedEffects::Stratum ? r.stratum_id : r.group_id;
    if (auto it = fe_col.find(level); it != fe_col.end()) x(i, it->second) = 1.0;
    x(i, c_x) = r.treated_x;
    x(i, c_x + 1) = r.period_p;
    x(i, c_x + 2) = r.treated_x * r.period_p;
    if (c_tests >= 0) x(i, c_tests) = r.dlog_tests;
    if (auto it = date_col.find(r.date); it != date_col.end()) x(i, it->second) = 1.0;
    y(i) = r.outcome_dy;
    w(i) = r.weight;
    clusters.push_back(r.cluster_id);
  }

  auto design = DesignMatrix::from_candidates(std::move(y), x, std::move(names), std::move(w), std::move(clusters),
                                              options.collinearity_tol);
  if (design.rows() < design.cols()) {
    throw EstimationError(fmt::format("{} rows cannot identify {} retained columns", design.rows(), design.cols()));
  }
  return design;
}

// ---------------------------------------------------------------------------
// Fit

std::optional<std::size_t> FitResult::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return i;
  }
  return std::nullopt;
}

double FitResult::coef(std::string_view name) const {
  auto i = index_of(name);
  if (!i) throw EstimationError(fmt::format("coefficient '{}' is not in the model", name));
  return coefficients(static_cast<Eigen::Index>(*i));
}

double FitResult::se(std::string_view name) const {
  auto i = index_of(name);
  if (!i) throw EstimationError(fmt::format("coefficient '{}' is not in the model", name));
  if (vcov_clustered.rows() != coefficients.size()) throw EstimationError("clustered variance not computed");
  const auto k = static_cast<Eigen::Index>(*i);
  return std::sqrt(std::max(vcov_clustered(k, k), 0.0));
}

namespace {

Eigen::ColPivHouseholderQR<Eigen::MatrixXd> weighted_qr(const DesignMatrix& design) {
  const Eigen::VectorXd sw = design.weights.array().sqrt();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sw.asDiagonal() * design.columns);
  qr.setThreshold(1e-12);
  return qr;
}

std::size_t count_clusters(const std::vector<std::string>& ids) {
  return std::set<std::string>(ids.begin(), ids.end()).size();
}

}  // namespace

FitResult fit_wls(const DesignMatrix& design) {
  const Eigen::Index n = design.rows(), k = design.cols();
  if (n == 0 || k == 0) throw EstimationError("empty design");
  auto qr = weighted_qr(design);
  if (qr.rank() < k) {
    std::vector<std::string> bad;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index i = qr.rank(); i < k; ++i) bad.push_back(design.names[static_cast<std::size_t>(perm(i))]);
    throw EstimationError(fmt::format("design is numerically rank deficient in: {}", fmt::join(bad, ", ")));
  }
  const Eigen::VectorXd sw = design.weights.array().sqrt();
  FitResult fit;
  fit.names = design.names;
  fit.dropped_columns = design.dropped_columns;
  fit.coefficients = qr.solve(Eigen::VectorXd(sw.cwiseProduct(design.response)));
  fit.fitted = design.columns * fit.coefficients;
  fit.residuals = design.response - fit.fitted;
  fit.n_obs = static_cast<std::size_t>(n);
  fit.n_params = static_cast<std::size_t>(k);
  fit.n_clusters = count_clusters(design.cluster_ids);
  fit.adjusted_r2 = std::numeric_limits<double>::quiet_NaN();
  return fit;
}

Eigen::MatrixXd cluster_vcov(const FitResult& fit, const DesignMatrix& design) {
  const Eigen::Index n = design.rows(), k = design.cols();
  std::map<std::string, Eigen::VectorXd> scores;
  for (Eigen::Index i = 0; i < n; ++i) {
    auto [it, inserted] = scores.try_emplace(design.cluster_ids[static_cast<std::size_t>(i)], Eigen::VectorXd::Zero(k));
    it->second += design.columns.row(i).transpose() * (design.weights(i) * fit.residuals(i));
  }
  const auto g = static_cast<double>(scores.size());
  if (scores.size() < 2) throw EstimationError("clustered variance needs at least two clusters");
  if (n <= k) throw EstimationError(fmt::format("clustered variance needs N > K (N = {}, K = {})", n, k));

  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
  for (const auto& [id, s] : scores) meat.noalias() += s * s.transpose();

  // (X'WX)^-1 = P R^-1 R^-T P' from the weighted QR.
  auto qr = weighted_qr(design);
  const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd r_inv =
      r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
  const Eigen::MatrixXd bread_perm = r_inv * r_inv.transpose();
  const auto& p = qr.colsPermutation();
  const Eigen::MatrixXd bread = p * bread_perm * p.transpose();

  const double nn = static_cast<double>(n), kk = static_cast<double>(k);
  const double scale = (g / (g - 1.0)) * ((nn - 1.0) / (nn - kk));
  Eigen::MatrixXd v = scale * (bread * meat * bread);
  return 0.5 * (v + v.transpose());
}

double adjusted_r2(const FitResult& fit, const DesignMatrix& design) {
  const auto n = static_cast<double>(design.rows());
  const auto k = static_cast<double>(design.cols());
  if (n <= k) throw EstimationError(fmt::format("adjusted R2 undefined for N = {} <= K = {}", n, k));
  const double wsum = design.weights.sum();
  const double ybar = design.weights.dot(design.response) / wsum;
  const double tss = (design.weights.array() * (design.response.array() - ybar).square()).sum();
  const double rss = (design.weights.array() * fit.residuals.array().square()).sum();
  const double r2 = tss > 0.0 ? 1.0 - rss / tss : 1.0;
  return 1.0 - (1.0 - r2) * (n - 1.0) / (n - k);
}

FitResult fit_panel(const PanelDataset& panel, const DesignOptions& options) {
  auto design = build_design(panel, options);
  auto fit = fit_wls(design);
  fit.vcov_clustered = cluster_vcov(fit, design);
  fit.adjusted_r2 = adjusted_r2(fit, design);
  fit.horizon_d = panel.horizon_d;
  fit.outcome_kind = panel.outcome_kind;
  return fit;
}

// ---------------------------------------------------------------------------
// Effects

double t_quantile_975(int df) {
  if (df < 1) throw EstimationError(fmt::format("t quantile needs df >= 1, got {}", df));
  boost::math::students_t dist(static_cast<double>(df));
  return boost::math::quantile(dist, 0.975);
}

PercentEffect percent_effect(double beta, double se, int df) {
  const double half = t_quantile_975(df) * se;
  return {std::expm1(beta), std::expm1(beta - half), std::expm1(beta + half)};
}

EventStudyPoint interaction_point(const FitResult& fit) {
  EventStudyPoint pt;
  pt.d = fit.horizon_d;
  pt.beta3 = fit.coef(kInteractionName);
  pt.se = fit.se(kInteractionName);
  const double half = t_quantile_975(fit.df()) * pt.se;
  pt.ci_low = pt.beta3 - half;
  pt.ci_high = pt.beta3 + half;
  const auto pe = percent_effect(pt.beta3, pt.se, fit.df());
  pt.pct = pe.pct;
  pt.pct_low = pe.pct_low;
  pt.pct_high = pe.pct_high;
  pt.n_obs = fit.n_obs;
  pt.n_clusters = fit.n_clusters;
  return pt;
}

std::vector<int> horizon_range(int from, int to) {
  std::vector<int> out;
  for (int d = from; d <= to; ++d) {
    if (d != 0) out.push_back(d);
  }
  return out;
}

EventStudy event_study(const PanelBuilder& build_panel, std::span<const int> horizons, OutcomeKind kind,
                       const DesignOptions& options) {
  EventStudy study;
  study.outcome_kind = kind;
  for (int d : horizons) {
    if (d == 0) {
      study.gaps.push_back({d, "d = 0 is degenerate"});
      continue;
    }
    try {
      auto panel = build_panel(d);
      if (panel.rows.empty()) {
        study.gaps.push_back({d, fmt::format("no cohort has coverage ({} skipped)", panel.skipped.size())});
        continue;
      }
      auto fit = fit_panel(panel, options);
      if (!fit.index_of(kInteractionName)) {
        study.gaps.push_back({d, "interaction dropped as collinear"});
        continue;
      }
      study.points.push_back(interaction_point(fit));
    } catch (const DataError& e) {
      study.gaps.push_back({d, e.what()});
    } catch (const EstimationError& e) {
      study.gaps.push_back({d, e.what()});
    }
  }
  if (study.points.empty()) throw EstimationError("no feasible horizon in the event-study range");
  return study;
}

}  // namespace didpanel

#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "didpanel/csv.hpp"
#include "didpanel/ingest.hpp"
#include "didpanel/panel.hpp"

#ifndef DIDPANEL_FIXTURE_DIR
#error "DIDPANEL_FIXTURE_DIR must be defined"
#endif

namespace testsupport {

using Matrix = std::vector<std::vector<double>>;  // row major
using Vector = std::vector<double>;

inline std::string fixture(const std::string& name) { return std::string(DIDPANEL_FIXTURE_DIR) + "/" + name; }

/// Rows of a fixture CSV keyed by header name.
inline std::vector<std::map<std::string, std::string>> read_csv_rows(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing fixture " + path);
  didpanel::csv::Reader r(in);
  std::vector<std::map<std::string, std::string>> rows;
  std::vector<std::string> f;
  while (r.next(f)) {
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < r.header().size(); ++i) row[r.header()[i]] = f[i];
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::vector<didpanel::CohortLevels> read_levels(const std::string& path) {
  std::vector<didpanel::CohortLevels> out;
  for (auto& row : read_csv_rows(path)) {
    out.push_back({didpanel::parse_date(row["date"]), std::stod(row["n_counties"]), std::stod(row["dy_order_day"]),
                   std::stod(row["dy_after"]), std::stod(row["dy_ctrl_order_day"]), std::stod(row["dy_ctrl_after"])});
  }
  return out;
}

// Gaussian elimination with partial pivoting in long double. Deliberately
// shares nothing with the library's factorization.
inline Vector solve_dense(Matrix a, Vector b) {
  const std::size_t n = a.size();
  std::vector<std::vector<long double>> m(n, std::vector<long double>(n + 1));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) m[i][j] = a[i][j];
    m[i][n] = b[i];
  }
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::fabs(m[r][c]) > std::fabs(m[p][c])) p = r;
    }
    std::swap(m[c], m[p]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const long double f = m[r][c] / m[c][c];
      for (std::size_t j = c; j <= n; ++j) m[r][j] -= f * m[c][j];
    }
  }
  Vector x(n);
  for (std::size_t i = n; i-- > 0;) {
    long double s = m[i][n];
    for (std::size_t j = i + 1; j < n; ++j) s -= m[i][j] * x[j];
    x[i] = static_cast<double>(s / m[i][i]);
  }
  return x;
}

inline Matrix invert_dense(const Matrix& a) {
  const std::size_t n = a.size();
  Matrix inv(n, Vector(n));
  for (std::size_t j = 0; j < n; ++j) {
    Vector e(n, 0.0);
    e[j] = 1.0;
    auto col = solve_dense(a, e);
    for (std::size_t i = 0; i < n; ++i) inv[i][j] = col[i];
  }
  return inv;
}

/// X'WX and X'Wy by explicit sums.
inline std::pair<Matrix, Vector> normal_equations(const Matrix& x, const Vector& y, const Vector& w) {
  const std::size_t n = x.size(), k = x.front().size();
  Matrix xtx(k, Vector(k, 0.0));
  Vector xty(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < k; ++a) {
      xty[a] += w[i] * x[i][a] * y[i];
      for (std::size_t b = 0; b < k; ++b) xtx[a][b] += w[i] * x[i][a] * x[i][b];
    }
  }
  return {xtx, xty};
}

inline Vector wls_oracle(const Matrix& x, const Vector& y, const Vector& w) {
  auto [xtx, xty] = normal_equations(x, y, w);
  return solve_dense(xtx, xty);
}

/// CR1 sandwich assembled from its definition with plain loops.
inline Matrix sandwich_oracle(const Matrix& x, const Vector& resid, const Vector& w,
                              const std::vector<std::string>& cluster) {
  const std::size_t n = x.size(), k = x.front().size();
  auto [xtx, unused] = normal_equations(x, Vector(n, 0.0), w);
  const Matrix bread = invert_dense(xtx);
  std::map<std::string, Vector> score;
  for (std::size_t i = 0; i < n; ++i) {
    auto& s = score.try_emplace(cluster[i], Vector(k, 0.0)).first->second;
    for (std::size_t a = 0; a < k; ++a) s[a] += x[i][a] * w[i] * resid[i];
  }
  Matrix meat(k, Vector(k, 0.0));
  for (auto& [id, s] : score) {
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t b = 0; b < k; ++b) meat[a][b] += s[a] * s[b];
    }
  }
  const double g = static_cast<double>(score.size()), nn = static_cast<double>(n), kk = static_cast<double>(k);
  const double c = g / (g - 1) * (nn - 1) / (nn - kk);
  Matrix v(k, Vector(k, 0.0));
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < k; ++b) {
      double s = 0;
      for (std::size_t p = 0; p < k; ++p) {
        for (std::size_t q = 0; q < k; ++q) s += bread[a][p] * meat[p][q] * bread[q][b];
      }
      v[a][b] = c * s;
    }
  }
  return v;
}

/// Cumulative series for one county built from daily new counts, starting
/// at `start`.
inline void append_county(didpanel::RawDataset& ds, const std::string& fips, const std::string& state,
                          didpanel::Date start, const std::vector<std::int64_t>& daily_cases,
                          const std::vector<std::int64_t>& daily_deaths = {}) {
  std::int64_t c = 0, d = 0;
  for (std::size_t i = 0; i < daily_cases.size(); ++i) {
    c += daily_cases[i];
    d += daily_deaths.empty() ? 0 : daily_deaths[i];
    ds.cases.push_back({didpanel::add_days(start, static_cast<int>(i)), fips, "County " + fips, state, c, d});
  }
}

}  // namespace testsupport

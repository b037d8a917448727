#pragma once

// Independent reference implementations used only by the tests. They share
// no code with the library: long double accumulation, explicit sorting, and
// normal equations solved by Gaussian elimination.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

namespace oracle {

inline long double neg_plogp(long double p) { return p > 0.0L ? -p * std::log(p) : 0.0L; }

inline double entropy(const std::vector<double>& probs, double log_base = 0.0) {
  long double h = 0.0L;
  for (double p : probs) h += neg_plogp(p);
  if (log_base > 0.0) h /= std::log(static_cast<long double>(log_base));
  return static_cast<double>(h);
}

/// Entropy over the k largest probabilities (ties do not change the value).
inline double top_k_entropy(std::vector<double> probs, std::size_t k) {
  std::sort(probs.begin(), probs.end(), std::greater<>());
  probs.resize(std::min(k, probs.size()));
  return entropy(probs);
}

/// Smallest number of largest probabilities needed to reach `t`.
inline std::int64_t nucleus(std::vector<double> probs, double t) {
  std::sort(probs.begin(), probs.end(), std::greater<>());
  long double acc = 0.0L;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (acc >= static_cast<long double>(t) - 1e-12L) return static_cast<std::int64_t>(i + 1);
  }
  return static_cast<std::int64_t>(probs.size());
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<long double>(x.size());
  long double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const long double mx = sx / n, my = sy / n;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const long double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

/// Solves A x = b by Gaussian elimination with partial pivoting.
inline std::vector<long double> solve(std::vector<std::vector<long double>> a, std::vector<long double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    }
    if (std::fabs(a[piv][col]) < 1e-300L) throw std::runtime_error("singular system");
    std::swap(a[piv], a[col]);
    std::swap(b[piv], b[col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const long double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  std::vector<long double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    long double s = b[i];
    for (std::size_t c = i + 1; c < n; ++c) s -= a[i][c] * x[c];
    x[i] = s / a[i][i];
  }
  return x;
}

struct LinearFit {
  std::vector<double> coefficients;
  double intercept = 0.0;
  double r = 0.0;
};

/// OLS with an intercept through the normal equations (X'X) beta = X'y.
/// rows[i] holds the features of observation i.
inline LinearFit ols(const std::vector<std::vector<double>>& rows, const std::vector<double>& y) {
  const std::size_t p = rows.at(0).size() + 1;
  std::vector<std::vector<long double>> xtx(p, std::vector<long double>(p, 0.0L));
  std::vector<long double> xty(p, 0.0L);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::vector<long double> x(p);
    x[0] = 1.0L;
    for (std::size_t j = 1; j < p; ++j) x[j] = rows[i][j - 1];
    for (std::size_t a = 0; a < p; ++a) {
      xty[a] += x[a] * y[i];
      for (std::size_t b = 0; b < p; ++b) xtx[a][b] += x[a] * x[b];
    }
  }
  const auto beta = solve(xtx, xty);
  LinearFit fit;
  fit.intercept = static_cast<double>(beta[0]);
  for (std::size_t j = 1; j < p; ++j) fit.coefficients.push_back(static_cast<double>(beta[j]));
  std::vector<double> pred;
  for (const auto& row : rows) {
    long double v = beta[0];
    for (std::size_t j = 1; j < p; ++j) v += beta[j] * row[j - 1];
    pred.push_back(static_cast<double>(v));
  }
  fit.r = pearson(pred, y);
  return fit;
}

}  // namespace oracle

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

namespace rmtlab::stats {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

struct Summary {
  double mean = 0.0;
  double variance = 0.0;  ///< unbiased
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
};

/// Shifting by the first value keeps the mean exact for constant data.
inline Summary summarize(std::span<const double> xs) {
  Summary s;
  if (xs.empty()) return s;
  const double shift = xs.front();
  const double count = static_cast<double>(xs.size());
  double acc = 0.0;
  for (double x : xs) acc += x - shift;
  s.mean = shift + acc / count;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double x : xs) {
    const double d = x - s.mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  if (xs.size() >= 2) s.variance = m2 / (count - 1.0);
  m2 /= count;
  m3 /= count;
  m4 /= count;
  if (m2 > 0.0) {
    s.skewness = m3 / std::pow(m2, 1.5);
    s.excess_kurtosis = m4 / (m2 * m2) - 3.0;
  }
  return s;
}

/// Delete-one jackknife standard error of the unbiased sample variance.
inline double jackknife_variance_se(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n < 3) return 0.0;
  const double count = static_cast<double>(n);
  const Summary s = summarize(xs);
  const double total = s.variance * (count - 1.0);
  std::vector<double> loo(n);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = xs[i] - s.mean;
    loo[i] = (total - count / (count - 1.0) * d * d) / (count - 2.0);
    mean += loo[i];
  }
  mean /= count;
  double acc = 0.0;
  for (double v : loo) acc += (v - mean) * (v - mean);
  return std::sqrt((count - 1.0) / count * acc);
}

/// sup_x |F_n(x) - F(x)| for a sample against a continuous-or-not cdf.
template <class Cdf>
double ks_statistic(std::vector<double> sample, const Cdf& cdf) {
  if (sample.empty()) return 0.0;
  std::sort(sample.begin(), sample.end());
  const double count = static_cast<double>(sample.size());
  double worst = 0.0;
  std::size_t i = 0;
  while (i < sample.size()) {
    std::size_t j = i;
    while (j < sample.size() && sample[j] == sample[i]) ++j;
    // compare left limits as well as values, so an atom of F at a sample point counts once
    const double f = cdf(sample[i]);
    const double f_left = cdf(std::nextafter(sample[i], -std::numeric_limits<double>::infinity()));
    const double below = static_cast<double>(i) / count;
    const double at = static_cast<double>(j) / count;
    worst = std::max({worst, std::abs(at - f), std::abs(f_left - below)});
    i = j;
  }
  return std::min(worst, 1.0);
}

/// P(D_n > d) from the Kolmogorov limit law with Stephens' small-sample correction.
inline double kolmogorov_pvalue(double d, std::size_t n) {
  if (d <= 0.0) return 1.0;
  const double root = std::sqrt(static_cast<double>(n));
  const double lambda = (root + 0.12 + 0.11 / root) * d;
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

}  // namespace rmtlab::stats

#pragma once

// Limiting variance functionals of linear eigenvalue statistics.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "rmtlab/ensemble.hpp"
#include "rmtlab/errors.hpp"
#include "rmtlab/mp_limit.hpp"
#include "rmtlab/test_function.hpp"

namespace rmtlab {

/// (int (1 + 2|k|)^{2s} |phi^(k)|^2 dk)^{1/2}, phi^(k) = int e^{ikx} phi(x) dx,
/// with the transform taken by FFT over phi's grid.
inline double sobolev_norm(const TestFunction& phi, double s) {
  require(s > 0.0, "sobolev_norm: s must be > 0");
  const FourierGrid& g = phi.grid();
  require(g.hi > g.lo && g.dx > 0.0, "sobolev_norm: invalid grid");
  const auto samples = static_cast<std::size_t>(std::floor((g.hi - g.lo) / g.dx)) + 1;
  require(samples >= 16, "sobolev_norm: grid has too few points");

  // Zero padding refines the k spacing; the transform modulus does not depend on the offset lo.
  std::size_t size = 1;
  while (size < 4 * samples) size <<= 1;
  std::vector<double> values(size, 0.0);
  double peak = 0.0;
  for (std::size_t j = 0; j < samples; ++j) {
    values[j] = phi(g.lo + g.dx * static_cast<double>(j));
    require(std::isfinite(values[j]), "sobolev_norm: phi not finite on grid");
    peak = std::max(peak, std::abs(values[j]));
  }
  if (peak == 0.0) return 0.0;
  if (std::max(std::abs(values.front()), std::abs(values[samples - 1])) > 1e-6 * peak) {
    throw UsageError("sobolev_norm: phi does not decay at the grid boundary");
  }

  Eigen::FFT<double> fft;
  std::vector<Complex> spectrum;
  fft.fwd(spectrum, values);

  const double dk = 2.0 * std::numbers::pi / (static_cast<double>(size) * g.dx);
  const std::size_t half = size / 2;
  std::vector<double> weighted(half + 1);
  for (std::size_t l = 0; l <= half; ++l) {
    const double k = dk * static_cast<double>(l);
    const double hat = g.dx * std::abs(spectrum[l]);
    weighted[l] = std::pow(1.0 + 2.0 * k, 2.0 * s) * hat * hat;
  }

  // Trapezoid over k >= 0 with the Euler-Maclaurin correction for the kink of |k| at 0.
  double half_line = 0.5 * (weighted[0] + weighted[half]);
  for (std::size_t l = 1; l < half; ++l) half_line += weighted[l];
  half_line *= dk;
  const double slope0 = (-3.0 * weighted[0] + 4.0 * weighted[1] - weighted[2]) / (2.0 * dk);
  half_line += dk * dk / 12.0 * slope0;

  double tail = 0.0;
  for (std::size_t l = (9 * half) / 10; l <= half; ++l) tail += weighted[l] * dk;
  if (tail > 1e-6 * half_line) {
    throw UsageError("sobolev_norm: grid too coarse for the requested weight");
  }
  return std::sqrt(2.0 * half_line);
}

/// f and f' at a point, reusable across many kernel evaluations.
struct KernelPoint {
  Complex z;
  Complex f;
  Complex df;
};

inline KernelPoint kernel_point(Complex z, const SigmaMeasure& sigma) {
  const auto t = f_taylor(z, sigma, 1);
  return {z, t[0], t[1]};
}

struct KernelOptions {
  double coincidence = 1e-3;  ///< relative to |Im z1|
  int series_order = 10;
};

namespace detail {

// D = (f(z1) - f(z2)) / (z1 - z2) with its partials in z1, z2.
inline bool ordered_before(Complex u, Complex v) {
  return u.real() < v.real() || (u.real() == v.real() && u.imag() < v.imag());
}

struct DividedDifference {
  Complex d, d1, d2, d12;
};

inline Complex kernel_from(const KernelPoint& p1, const KernelPoint& p2, const DividedDifference& dd,
                           double a_plus_b) {
  const Complex& d = dd.d;
  const Complex inv = 1.0 / d;
  // d1 d2 log D
  const Complex log_part = dd.d12 * inv - dd.d1 * dd.d2 * inv * inv;
  // d1 d2 (f1 f2 / D)
  const Complex n = p1.f * p2.f, n1 = p1.df * p2.f, n2 = p1.f * p2.df, n12 = p1.df * p2.df;
  const Complex ratio_part = n12 * inv - (n1 * dd.d2 + n2 * dd.d1 + n * dd.d12) * inv * inv +
                             2.0 * n * dd.d1 * dd.d2 * inv * inv * inv;
  return 2.0 * log_part - a_plus_b * ratio_part;
}

inline DividedDifference divided_difference_far(const KernelPoint& p1, const KernelPoint& p2) {
  const Complex g = p1.z - p2.z;
  DividedDifference dd;
  dd.d = (p1.f - p2.f) / g;
  dd.d1 = (p1.df - dd.d) / g;
  dd.d2 = (dd.d - p2.df) / g;
  dd.d12 = (p1.df + p2.df - 2.0 * dd.d) / (g * g);
  return dd;
}

// Series of D around the midpoint w: D = sum_{i,j} f_{i+j+1} t1^i t2^j, t = z - w.
inline Complex kernel_near(Complex z1, Complex z2, const SigmaMeasure& sigma, double a_plus_b,
                           int order) {
  const Complex w = 0.5 * (z1 + z2);
  const auto coeff = f_taylor(w, sigma, order);
  const Complex t1 = z1 - w, t2 = z2 - w;
  const auto k = static_cast<std::size_t>(order);

  std::vector<Complex> pow1(k + 1), pow2(k + 1);
  pow1[0] = pow2[0] = 1.0;
  for (std::size_t i = 1; i <= k; ++i) {
    pow1[i] = pow1[i - 1] * t1;
    pow2[i] = pow2[i - 1] * t2;
  }
  DividedDifference dd{0.0, 0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; i + j + 1 <= k; ++j) {
      const Complex c = coeff[i + j + 1];
      const double di = static_cast<double>(i), dj = static_cast<double>(j);
      dd.d += c * pow1[i] * pow2[j];
      if (i > 0) dd.d1 += di * c * pow1[i - 1] * pow2[j];
      if (j > 0) dd.d2 += dj * c * pow1[i] * pow2[j - 1];
      if (i > 0 && j > 0) dd.d12 += di * dj * c * pow1[i - 1] * pow2[j - 1];
    }
  }
  KernelPoint p1{z1, 0.0, 0.0}, p2{z2, 0.0, 0.0};
  for (std::size_t i = 0; i <= k; ++i) {
    p1.f += coeff[i] * pow1[i];
    p2.f += coeff[i] * pow2[i];
    if (i > 0) {
      p1.df += static_cast<double>(i) * coeff[i] * pow1[i - 1];
      p2.df += static_cast<double>(i) * coeff[i] * pow2[i - 1];
    }
  }
  return kernel_from(p1, p2, dd, a_plus_b);
}

}  // namespace detail

/// C(z1, z2) = d^2/dz1 dz2 [2 log(Df/Dz) - (a+b) f(z1) f(z2) Dz/Df].
inline Complex cov_kernel(const KernelPoint& q1, const KernelPoint& q2, const SigmaMeasure& sigma,
                          double a, double b, KernelOptions opts = {}) {
  // fixed argument order makes C(z1, z2) = C(z2, z1) hold bit for bit
  const bool swap = detail::ordered_before(q2.z, q1.z);
  const KernelPoint& p1 = swap ? q2 : q1;
  const KernelPoint& p2 = swap ? q1 : q2;
  if (std::abs(p1.z - p2.z) < opts.coincidence * std::abs(p1.z.imag())) {
    return detail::kernel_near(p1.z, p2.z, sigma, a + b, opts.series_order);
  }
  return detail::kernel_from(p1, p2, detail::divided_difference_far(p1, p2), a + b);
}

inline Complex cov_kernel(Complex z1, Complex z2, const SigmaMeasure& sigma, double a, double b,
                          KernelOptions opts = {}) {
  require_off_axis(z1, "cov_kernel");
  require_off_axis(z2, "cov_kernel");
  if (detail::ordered_before(z2, z1)) std::swap(z1, z2);
  if (std::abs(z1 - z2) < opts.coincidence * std::abs(z1.imag())) {
    return detail::kernel_near(z1, z2, sigma, a + b, opts.series_order);
  }
  return cov_kernel(kernel_point(z1, sigma), kernel_point(z2, sigma), sigma, a, b, opts);
}

struct VarianceGrid {
  std::size_t points = 400;      ///< initial points per axis
  double margin = 1.0;           ///< minimum margin around the support
  double refine_tolerance = 5e-3;
  std::size_t max_points = 6400;
};

struct VarianceEta {
  double eta = 0.0;
  double value = 0.0;
  std::size_t points = 0;       ///< per axis, final refinement
  double refinement_change = 0.0;
  double abs_integral = 0.0;  ///< same sum with |integrand|, sets the scale for V ~ 0
  double max_abs_kernel = 0.0;
  std::size_t coincident_pairs = 0;
  double lo = 0.0, hi = 0.0;
};

namespace detail {

inline VarianceEta variance_eta_on(const TestFunction& phi, double eta, const SigmaMeasure& sigma,
                                   double a, double b, double lo, double hi, std::size_t points) {
  VarianceEta out;
  out.eta = eta;
  out.points = points;
  out.lo = lo;
  out.hi = hi;
  const double h = (hi - lo) / static_cast<double>(points - 1);
  std::vector<KernelPoint> upper(points);
  std::vector<double> weight(points), values(points);
  for (std::size_t j = 0; j < points; ++j) {
    const double lambda = lo + h * static_cast<double>(j);
    upper[j] = kernel_point(Complex(lambda, eta), sigma);
    weight[j] = (j == 0 || j + 1 == points) ? 0.5 * h : h;
    values[j] = phi(lambda);
    require(std::isfinite(values[j]), "variance_eta: phi not finite on the grid");
  }
  double sum = 0.0, abs_sum = 0.0;
  for (std::size_t j = 0; j < points; ++j) {
    for (std::size_t k = j; k < points; ++k) {
      const KernelPoint lower{std::conj(upper[k].z), std::conj(upper[k].f), std::conj(upper[k].df)};
      const Complex across = cov_kernel(upper[j], lower, sigma, a, b);
      const Complex same = cov_kernel(upper[j], upper[k], sigma, a, b);
      if (j == k) ++out.coincident_pairs;
      out.max_abs_kernel = std::max({out.max_abs_kernel, std::abs(across), std::abs(same)});
      const double term = (across - same).real() * weight[j] * weight[k] * values[j] * values[k];
      const double mult = j == k ? 1.0 : 2.0;
      sum += mult * term;
      abs_sum += mult * std::abs(term);
    }
  }
  const double norm = 1.0 / (2.0 * std::numbers::pi * std::numbers::pi);
  out.value = norm * sum;
  out.abs_integral = norm * abs_sum;
  return out;
}

}  // namespace detail

/// V_eta[phi] = (2 pi^2)^{-1} int int Re[C(z1, conj z2) - C(z1, z2)] phi(l1) phi(l2),
/// z_j = l_j + i eta, by the trapezoid rule on a grid that is doubled until
/// the value changes by less than the refinement tolerance.
inline VarianceEta variance_eta(const TestFunction& phi, double eta, const SigmaMeasure& sigma,
                                double a, double b, VarianceGrid grid = {}) {
  require(eta > 0.0, "variance_eta: eta must be > 0");
  require(grid.points >= 3, "variance_eta: grid too small");
  const auto [support_lo, support_hi] = support_bounds(sigma);
  const double margin = std::max(grid.margin, 10.0 * eta);
  const double lo = support_lo - margin, hi = support_hi + margin;

  std::size_t points = grid.points;
  VarianceEta current = detail::variance_eta_on(phi, eta, sigma, a, b, lo, hi, points);
  while (true) {
    const std::size_t next_points = 2 * points - 1;
    if (next_points > grid.max_points) {
      throw ConvergenceError("variance_eta: grid refinement did not settle",
                             current.refinement_change);
    }
    VarianceEta next = detail::variance_eta_on(phi, eta, sigma, a, b, lo, hi, next_points);
    const double scale = std::max(std::abs(next.value), 1e-3 * next.abs_integral);
    const double change = std::abs(next.value - current.value);
    next.refinement_change = change;
    current = next;
    points = next_points;
    if (change <= grid.refine_tolerance * scale) return current;
  }
}

struct VarianceReport {
  double value = 0.0;  ///< extrapolated to eta = 0
  std::vector<VarianceEta> levels;
  double extrapolation_change = 0.0;  ///< |all levels - finest three|
  bool converged = true;
  std::vector<double> etas;
  VarianceGrid grid;
};

/// Richardson (polynomial) extrapolation of V_eta to eta = 0.
inline VarianceReport variance_limit(const TestFunction& phi, const SigmaMeasure& sigma, double a,
                                     double b, std::vector<double> etas = {0.16, 0.08, 0.04, 0.02},
                                     VarianceGrid grid = {}) {
  require(etas.size() >= 2, "variance_limit: need at least two eta levels");
  VarianceReport report;
  report.etas = etas;
  report.grid = grid;
  std::vector<double> ys;
  for (double eta : etas) {
    report.levels.push_back(variance_eta(phi, eta, sigma, a, b, grid));
    ys.push_back(report.levels.back().value);
  }
  report.value = detail::extrapolate_to_zero(etas, ys);
  if (etas.size() >= 3) {
    const double fine = detail::extrapolate_to_zero(std::vector<double>(etas.begin() + 1, etas.end()),
                                                    std::vector<double>(ys.begin() + 1, ys.end()));
    report.extrapolation_change = std::abs(report.value - fine);
    double scale = 0.0;
    for (const auto& l : report.levels) scale = std::max(scale, std::abs(l.value));
    report.converged = report.extrapolation_change <=
                       std::max(0.01 * std::max(std::abs(report.value), 1e-3 * scale), 1e-10);
  }
  return report;
}

/// Limiting variance for tau = 1 via the substitution l = a_m + 2 sqrt(c) cos(theta),
/// which turns the inverse square root edge weight into d theta; midpoint nodes in theta.
inline double variance_mp_closed(const TestFunction& phi, double c, double a, double b,
                                 std::size_t nodes = 256) {
  require(c > 0.0, "variance_mp_closed: c must be > 0");
  require(nodes >= 8, "variance_mp_closed: too few nodes");
  const double rc = std::sqrt(c);
  const double am = 1.0 + c;
  const double h = std::numbers::pi / static_cast<double>(nodes);
  std::vector<double> cosines(nodes), lambdas(nodes), values(nodes), slopes(nodes);
  for (std::size_t j = 0; j < nodes; ++j) {
    const double theta = (static_cast<double>(j) + 0.5) * h;
    cosines[j] = std::cos(theta);
    lambdas[j] = am + 2.0 * rc * cosines[j];
    values[j] = phi(lambdas[j]);
    slopes[j] = phi.derivative(lambdas[j]);
    require(std::isfinite(values[j]) && std::isfinite(slopes[j]),
            "variance_mp_closed: phi not finite on the support");
  }
  double first = 0.0;
  for (std::size_t j = 0; j < nodes; ++j) {
    for (std::size_t k = 0; k < nodes; ++k) {
      const double q = j == k ? slopes[j] : (values[j] - values[k]) / (lambdas[j] - lambdas[k]);
      first += q * q * 4.0 * c * (1.0 - cosines[j] * cosines[k]);
    }
  }
  first *= h * h / (2.0 * std::numbers::pi * std::numbers::pi);
  double moment = 0.0;
  for (std::size_t j = 0; j < nodes; ++j) moment += values[j] * 2.0 * rc * cosines[j];
  moment *= h;
  const double second = (a + b) / (4.0 * c * std::numbers::pi * std::numbers::pi) * moment * moment;
  return first + second;
}

/// measured / ||phi||_{2+delta}^2.
inline double variance_bound_ratio(const TestFunction& phi, double delta, double measured_variance) {
  const double norm = sobolev_norm(phi, 2.0 + delta);
  require(norm > 0.0, "variance_bound_ratio: phi has zero norm");
  return measured_variance / (norm * norm);
}

}  // namespace rmtlab

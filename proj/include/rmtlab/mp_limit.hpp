#pragma once

// Limiting spectral law: the Stieltjes transform f solving
//   z f = c - 1 - c sum_i w_i / (1 + tau_i f),
// its derivatives, closed forms for a point mass, and density recovery.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "rmtlab/ensemble.hpp"
#include "rmtlab/errors.hpp"

namespace rmtlab {

struct MpSolution {
  Complex f;
  double residual = 0.0;
  int iterations = 0;
};

namespace detail {

inline Complex mp_equation(Complex z, Complex f, const SigmaMeasure& sigma) {
  Complex sum = 0.0;
  for (const auto& a : sigma.atoms()) sum += a.weight / (1.0 + a.tau * f);
  return z * f - (sigma.c() - 1.0) + sigma.c() * sum;
}

inline Complex mp_equation_derivative(Complex z, Complex f, const SigmaMeasure& sigma) {
  Complex sum = 0.0;
  for (const auto& a : sigma.atoms()) {
    const Complex d = 1.0 + a.tau * f;
    sum += a.weight * a.tau / (d * d);
  }
  return z - sigma.c() * sum;
}

// f -> -1 / (z - c sum_i w_i tau_i / (1 + tau_i f)); maps the upper half plane into itself.
inline Complex mp_map(Complex z, Complex f, const SigmaMeasure& sigma) {
  Complex sum = 0.0;
  for (const auto& a : sigma.atoms()) sum += a.weight * a.tau / (1.0 + a.tau * f);
  return -1.0 / (z - sigma.c() * sum);
}

inline double mp_scale(Complex z, Complex f, const SigmaMeasure& sigma) {
  double s = 1.0 + std::abs(z * f);
  for (const auto& a : sigma.atoms()) s += sigma.c() * a.weight / std::abs(1.0 + a.tau * f);
  return s;
}

}  // namespace detail

struct SolveOptions {
  double tolerance = 1e-12;
  int max_iterations = 10000;
};

/// Herglotz solution of the functional equation at z (Im z != 0).
/// Damped fixed-point iteration from -1/z, polished by Newton steps once close.
inline MpSolution solve_f(Complex z, const SigmaMeasure& sigma, SolveOptions opts = {}) {
  require_off_axis(z, "solve_f");
  if (z.imag() < 0.0) {
    MpSolution s = solve_f(std::conj(z), sigma, opts);
    s.f = std::conj(s.f);
    return s;
  }

  Complex f = -1.0 / z;
  double residual = std::abs(detail::mp_equation(z, f, sigma));
  double theta = 1.0;
  constexpr double min_theta = 1.0 / 64.0;
  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    const double floor = 4.0 * std::numeric_limits<double>::epsilon() * detail::mp_scale(z, f, sigma);
    if (residual <= floor) break;

    if (residual < 1e-4) {
      const Complex step = detail::mp_equation(z, f, sigma) / detail::mp_equation_derivative(z, f, sigma);
      const Complex candidate = f - step;
      const double r = std::abs(detail::mp_equation(z, candidate, sigma));
      if (std::isfinite(r) && r < residual && candidate.imag() >= 0.0) {
        f = candidate;
        residual = r;
        continue;
      }
      if (residual <= opts.tolerance) break;
    }

    const Complex candidate = (1.0 - theta) * f + theta * detail::mp_map(z, f, sigma);
    const double r = std::abs(detail::mp_equation(z, candidate, sigma));
    if (r > residual && theta > min_theta) {
      theta *= 0.5;
      continue;
    }
    f = candidate;
    residual = r;
  }

  if (!(residual <= opts.tolerance)) {
    throw ConvergenceError("solve_f: no convergence", residual);
  }
  if (f.imag() < 0.0) {
    throw ConvergenceError("solve_f: converged to a non-Herglotz root", residual);
  }
  return {f, residual, it};
}

/// Taylor coefficients f_0..f_order of f around w, obtained order by order
/// from the functional equation. Throws near spectral edges where the
/// linearized equation degenerates.
inline std::vector<Complex> f_taylor(Complex w, const SigmaMeasure& sigma, int order) {
  require_off_axis(w, "f_taylor");
  require(order >= 0, "f_taylor: order must be >= 0");
  if (w.imag() < 0.0) {
    auto coeffs = f_taylor(std::conj(w), sigma, order);
    for (auto& c : coeffs) c = std::conj(c);
    return coeffs;
  }
  const auto& atoms = sigma.atoms();
  const double c = sigma.c();
  std::vector<Complex> f(static_cast<std::size_t>(order) + 1);
  f[0] = solve_f(w, sigma).f;

  // q[i][k]: coefficients of 1 / (1 + tau_i f(w + t)).
  std::vector<std::vector<Complex>> q(atoms.size(), std::vector<Complex>(f.size()));
  Complex linear = w;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    q[i][0] = 1.0 / (1.0 + atoms[i].tau * f[0]);
    linear -= c * atoms[i].weight * atoms[i].tau * q[i][0] * q[i][0];
  }
  if (std::abs(linear) < 1e-14) {
    throw ConvergenceError("f_taylor: degenerate linearization (edge proximity)", std::abs(linear));
  }

  std::vector<Complex> rest(atoms.size());
  for (std::size_t k = 1; k < f.size(); ++k) {
    Complex rhs = -f[k - 1];
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      Complex acc = 0.0;
      for (std::size_t j = 1; j < k; ++j) acc += f[j] * q[i][k - j];
      rest[i] = -q[i][0] * atoms[i].tau * acc;
      rhs -= c * atoms[i].weight * rest[i];
    }
    f[k] = rhs / linear;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      q[i][k] = -q[i][0] * q[i][0] * atoms[i].tau * f[k] + rest[i];
    }
  }
  return f;
}

/// f'(z) = f / (c sum_i w_i tau_i / (1 + tau_i f)^2 - z).
inline Complex f_prime(Complex z, const SigmaMeasure& sigma) { return f_taylor(z, sigma, 1)[1]; }

/// Herglotz root of z f^2 + (z - c + 1) f + 1 = 0 (sigma = delta_1).
inline Complex closed_form_f_mp(Complex z, double c) {
  require_off_axis(z, "closed_form_f_mp");
  require(c >= 0.0, "closed_form_f_mp: c must be >= 0");
  const Complex b = z - c + 1.0;
  const Complex s = std::sqrt(b * b - 4.0 * z);
  const std::array<Complex, 2> roots{(-b + s) / (2.0 * z), (-b - s) / (2.0 * z)};
  const double sign = z.imag() > 0.0 ? 1.0 : -1.0;
  const double bound = (1.0 + 1e-12) / std::abs(z.imag());
  const Complex* best = nullptr;
  for (const auto& r : roots) {
    if (r.imag() * sign < 0.0 || std::abs(r) > bound) continue;
    if (!best || r.imag() * sign > best->imag() * sign) best = &r;
  }
  if (best) return *best;
  return roots[0].imag() * sign >= roots[1].imag() * sign ? roots[0] : roots[1];
}

struct SupportEdges {
  double lower;   ///< a_- = (1 - sqrt c)^2
  double upper;   ///< a_+ = (1 + sqrt c)^2
  double center;  ///< a_m = 1 + c
};

inline SupportEdges support_edges_mp(double c) {
  require(c >= 0.0, "support_edges_mp: c must be >= 0");
  const double r = std::sqrt(c);
  return {(1.0 - r) * (1.0 - r), (1.0 + r) * (1.0 + r), 1.0 + c};
}

/// An interval containing the support of the limiting law.
inline std::pair<double, double> support_bounds(const SigmaMeasure& sigma) {
  const double r = std::sqrt(sigma.c());
  if (const auto tau = sigma.single_atom()) {
    const auto e = support_edges_mp(sigma.c());
    if (sigma.c() < 1.0) return {0.0, *tau * e.upper};
    return {*tau * e.lower, *tau * e.upper};
  }
  return {0.0, sigma.max_tau() * (1.0 + r) * (1.0 + r)};
}

/// Absolutely continuous density for sigma = delta_1, evaluated exactly:
/// sqrt((a_+ - l)(l - a_-)) / (2 pi l) inside the bulk.
inline double mp_density_closed(double lambda, double c) {
  const auto e = support_edges_mp(c);
  if (c == 0.0 || lambda <= e.lower || lambda >= e.upper || lambda <= 0.0) return 0.0;
  return std::sqrt((e.upper - lambda) * (lambda - e.lower)) / (2.0 * std::numbers::pi * lambda);
}

/// Mass of the limiting law at 0 forced by rank: 1 - c (1 - sigma({0})), clipped at 0.
inline double atom_at_zero(const SigmaMeasure& sigma) {
  return std::max(0.0, 1.0 - sigma.c() * (1.0 - sigma.mass_at_zero()));
}

struct DensityEstimate {
  double value = 0.0;  ///< extrapolated, clamped at 0
  double clamped = 0.0;  ///< magnitude removed by clamping
  double disagreement = 0.0;  ///< |full extrapolation - extrapolation without the coarsest level|
  std::vector<std::pair<double, double>> levels;  ///< (eta, Im f(lambda + i eta) / pi)
};

namespace detail {

/// Polynomial extrapolation of (x_i, y_i) to x = 0 (Neville).
inline double extrapolate_to_zero(const std::vector<double>& xs, const std::vector<double>& ys) {
  std::vector<double> p = ys;
  const std::size_t n = xs.size();
  for (std::size_t level = 1; level < n; ++level) {
    for (std::size_t i = 0; i + level < n; ++i) {
      p[i] = (xs[i + level] * p[i] - xs[i] * p[i + 1]) / (xs[i + level] - xs[i]);
    }
  }
  return p[0];
}

}  // namespace detail

/// pi^{-1} Im f(lambda + i eta) minus the atom at 0, Richardson-extrapolated in eta to 0.
inline DensityEstimate density(double lambda, const SigmaMeasure& sigma,
                               const std::vector<double>& eta_schedule = {0.08, 0.04, 0.02, 0.01}) {
  require(eta_schedule.size() >= 2, "density: need at least two eta levels");
  for (std::size_t i = 0; i < eta_schedule.size(); ++i) {
    require(eta_schedule[i] > 0.0 && (i == 0 || eta_schedule[i] < eta_schedule[i - 1]),
            "density: eta schedule must be positive and decreasing");
  }
  require(eta_schedule.back() >= 1e-6, "density: smallest eta must be >= 1e-6");

  DensityEstimate out;
  std::vector<double> xs, ys;
  // the atom at 0 left by the rank deficit is known exactly, so its Poisson kernel is removed
  const double atom = atom_at_zero(sigma);
  for (double eta : eta_schedule) {
    const double poisson = eta / (std::numbers::pi * (lambda * lambda + eta * eta));
    const double rho = solve_f(Complex(lambda, eta), sigma).f.imag() / std::numbers::pi - atom * poisson;
    out.levels.emplace_back(eta, rho);
    xs.push_back(eta);
    ys.push_back(rho);
  }
  const double full = detail::extrapolate_to_zero(xs, ys);
  const double fine = detail::extrapolate_to_zero(std::vector<double>(xs.begin() + 1, xs.end()),
                                                  std::vector<double>(ys.begin() + 1, ys.end()));
  out.disagreement = std::abs(full - fine);
  if (out.disagreement > 0.1 * std::max(std::abs(full), 1e-3)) {
    throw ConvergenceError("density: eta extrapolation unstable (edge or atom nearby)",
                           out.disagreement);
  }
  out.value = std::max(full, 0.0);
  out.clamped = out.value - full;
  return out;
}

/// Distribution function of the limiting spectral law. Exact (up to
/// quadrature) for a single atom sigma = delta_t; otherwise tabulated from
/// the recovered density with the deficit placed as an atom at 0.
class LimitCdf {
 public:
  explicit LimitCdf(const SigmaMeasure& sigma) : sigma_(sigma) {
    const auto tau = sigma.single_atom();
    if (tau && (*tau == 0.0 || sigma.c() == 0.0)) {
      atom_ = 1.0;
      mode_ = Mode::point_mass;
    } else if (tau) {
      scale_ = *tau;
      atom_ = std::max(0.0, 1.0 - sigma.c());
      mode_ = Mode::single_atom;
    } else {
      tabulate();
      mode_ = Mode::tabulated;
    }
  }

  double atom_at_zero() const noexcept { return atom_; }

  double operator()(double lambda) const {
    if (lambda < 0.0) return 0.0;
    switch (mode_) {
      case Mode::point_mass: return 1.0;
      case Mode::single_atom: return atom_ + bulk_mass_below(lambda / scale_);
      case Mode::tabulated: break;
    }
    if (lambda >= grid_.back()) return 1.0;
    const auto it = std::upper_bound(grid_.begin(), grid_.end(), lambda);
    if (it == grid_.begin()) return atom_;
    const auto i = static_cast<std::size_t>(it - grid_.begin()) - 1;
    const double t = (lambda - grid_[i]) / (grid_[i + 1] - grid_[i]);
    return atom_ + cumulative_[i] + t * (cumulative_[i + 1] - cumulative_[i]);
  }

 private:
  enum class Mode { point_mass, single_atom, tabulated };

  // Mass of the bulk below x for sigma = delta_1, with x = a_m + 2 sqrt(c) cos(theta).
  double bulk_mass_below(double x) const {
    const double c = sigma_.c();
    const auto e = support_edges_mp(c);
    if (x <= e.lower) return 0.0;
    if (x >= e.upper) return std::min(1.0, c);
    const double rc = std::sqrt(c);
    const double theta = std::acos(std::clamp((x - e.center) / (2.0 * rc), -1.0, 1.0));
    // a_m + 2 sqrt(c) cos(t) written as (1 - sqrt c)^2 + 4 sqrt(c) cos^2(t/2) to avoid cancellation at c = 1
    const double gap = (1.0 - rc) * (1.0 - rc);
    auto integrand = [&](double t) {
      const double sh = std::sin(0.5 * t), ch = std::cos(0.5 * t);
      const double s = 2.0 * sh * ch;
      return 2.0 * c * s * s / (std::numbers::pi * (gap + 4.0 * rc * ch * ch));
    };
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, theta,
                                                                         std::numbers::pi, 15, 1e-12);
  }

  void tabulate() {
    const auto [lo, hi] = support_bounds(sigma_);
    constexpr std::size_t points = 4001;
    const double width = hi - lo;
    const double eta = 1e-3 * std::max(1.0, width);
    // the atom is known exactly; the table only carries the bulk
    atom_ = rmtlab::atom_at_zero(sigma_);
    grid_.resize(points);
    cumulative_.assign(points, 0.0);
    std::vector<double> rho(points);
    for (std::size_t i = 0; i < points; ++i) {
      const double x = lo + width * static_cast<double>(i) / static_cast<double>(points - 1);
      grid_[i] = x;
      try {
        rho[i] = density(x, sigma_).value;
      } catch (const ConvergenceError&) {
        const double poisson = atom_ * eta / (std::numbers::pi * (x * x + eta * eta));
        rho[i] = std::max(0.0, solve_f(Complex(x, eta), sigma_).f.imag() / std::numbers::pi - poisson);
      }
    }
    for (std::size_t i = 1; i < points; ++i) {
      cumulative_[i] = cumulative_[i - 1] + 0.5 * (rho[i] + rho[i - 1]) * (grid_[i] - grid_[i - 1]);
    }
    const double bulk = cumulative_.back();
    if (bulk > 0.0) {
      for (auto& v : cumulative_) v *= (1.0 - atom_) / bulk;
    }
  }

  SigmaMeasure sigma_;
  Mode mode_ = Mode::tabulated;
  double scale_ = 1.0;
  double atom_ = 0.0;
  std::vector<double> grid_;
  std::vector<double> cumulative_;
};

}  // namespace rmtlab

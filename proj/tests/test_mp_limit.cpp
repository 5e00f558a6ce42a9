#include <gtest/gtest.h>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <numbers>
#include <random>

#include "rmtlab/mp_limit.hpp"

using namespace rmtlab;

namespace {

const Complex I(0.0, 1.0);

// Herglotz root of z f^2 + (z - c + 1) f + 1 = 0, chosen independently by the sign of Im f.
Complex quadratic_root(Complex z, double c) {
  const Complex b = z - c + 1.0;
  const Complex d = std::sqrt(b * b - 4.0 * z);
  const Complex r1 = (-b + d) / (2.0 * z), r2 = (-b - d) / (2.0 * z);
  const double s = z.imag() > 0 ? 1.0 : -1.0;
  // only one root maps into the same half plane as z and decays like -1/z
  const bool ok1 = r1.imag() * s > 0 && std::abs(r1) <= 1.0 / std::abs(z.imag()) + 1e-12;
  return ok1 ? r1 : r2;
}

// f(z) = int rho(l) / (l - z) dl for the c = 1 law, rho(l) = sqrt((4 - l)/l) / (2 pi)
Complex stieltjes_by_quadrature(Complex z) {
  boost::math::quadrature::tanh_sinh<double> q;
  auto part = [&](bool imag) {
    return q.integrate(
        [&](double l) {
          const Complex v = std::sqrt((4.0 - l) / l) / (2.0 * std::numbers::pi) / (l - z);
          return imag ? v.imag() : v.real();
        },
        0.0, 4.0);
  };
  return {part(false), part(true)};
}

}  // namespace

TEST(SolveF, PointMassAtOneMatchesQuadratureAtI) {
  const auto s = solve_f(I, SigmaMeasure::point(1.0, 1.0));
  const Complex oracle = stieltjes_by_quadrature(I);
  EXPECT_NEAR(oracle.real(), 0.300243, 5e-7);
  EXPECT_NEAR(oracle.imag(), 0.624811, 5e-7);
  EXPECT_LE(std::abs(s.f - oracle), 1e-10);
  EXPECT_LE(s.residual, 1e-12);
}

TEST(SolveF, TrivialCases) {
  for (const auto& sigma : {SigmaMeasure::point(1.0, 0.0), SigmaMeasure::parse("0.5:0.5,3:0.5", 0.0)}) {
    EXPECT_LE(std::abs(solve_f(2.0 * I, sigma).f - 0.5 * I), 1e-15);
  }
  EXPECT_LE(std::abs(solve_f(I, SigmaMeasure::point(0.0, 1.0)).f - I), 1e-15);
  EXPECT_THROW(solve_f(Complex(1.0, 0.0), SigmaMeasure::point(1.0, 1.0)), UsageError);
}

TEST(SolveF, ReportsNonConvergence) {
  SolveOptions opts;
  opts.max_iterations = 1;
  try {
    solve_f(Complex(2.0, 1e-3), SigmaMeasure::point(1.0, 1.0), opts);
    FAIL() << "expected ConvergenceError";
  } catch (const ConvergenceError& e) {
    EXPECT_GT(e.last_residual(), 1e-12);
  }
}

TEST(SolveF, AgreesWithClosedFormRoot) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> re(-2.0, 7.0), im(0.05, 5.0);
  for (double c : {0.25, 0.5, 1.0, 2.0}) {
    for (int k = 0; k < 20; ++k) {
      const Complex z(re(rng), (k % 2 ? -1.0 : 1.0) * im(rng));
      const auto s = solve_f(z, SigmaMeasure::point(1.0, c));
      EXPECT_LE(std::abs(s.f - quadratic_root(z, c)), 1e-10) << "c=" << c << " z=" << z;
      EXPECT_LE(std::abs(closed_form_f_mp(z, c) - quadratic_root(z, c)), 1e-12);
      EXPECT_LE(s.residual, 1e-12);
    }
  }
}

TEST(SolveF, HerglotzSymmetryAndResidualOnMixtures) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> re(-1.0, 12.0), im(0.01, 3.0);
  const std::vector<SigmaMeasure> sigmas{SigmaMeasure::parse("1:0.5,2:0.5", 0.5),
                                         SigmaMeasure::parse("0:0.3,1:0.3,4:0.4", 1.5),
                                         SigmaMeasure::parse("0.2:0.9,5:0.1", 3.0)};
  for (const auto& sigma : sigmas) {
    for (int k = 0; k < 30; ++k) {
      const Complex z(re(rng), im(rng));
      const auto up = solve_f(z, sigma);
      const auto down = solve_f(std::conj(z), sigma);
      EXPECT_GE(up.f.imag(), 0.0);
      EXPECT_LE(down.f.imag(), 0.0);
      EXPECT_EQ(down.f, std::conj(up.f));
      EXPECT_LE(up.residual, 1e-12);
      EXPECT_LE(std::abs(detail::mp_equation(z, up.f, sigma)), 1e-12);
    }
  }
}

TEST(SolveF, TotalMassIsOne) {
  for (const auto& sigma : {SigmaMeasure::point(1.0, 1.0), SigmaMeasure::parse("1:0.5,2:0.5", 0.5)}) {
    const double t = 1e3;
    // f(it) ~ -1/(it) = i/t
    EXPECT_NEAR(t * solve_f(Complex(0, t), sigma).f.imag(), 1.0, 1e-2);
  }
}

TEST(FPrime, ZeroRatio) {
  const Complex z(0.7, 1.3);
  EXPECT_LE(std::abs(f_prime(z, SigmaMeasure::point(1.0, 0.0)) - 1.0 / (z * z)), 1e-14);
}

TEST(FPrime, MatchesFiniteDifferences) {
  for (const auto& sigma : {SigmaMeasure::point(1.0, 1.0), SigmaMeasure::parse("0.5:0.5,2:0.5", 0.7)}) {
    for (Complex z : {I, Complex(2.0, 0.3), Complex(-0.5, -0.8)}) {
      const double h = 1e-5;
      const Complex fd = (solve_f(z + h, sigma).f - solve_f(z - h, sigma).f) / (2.0 * h);
      const Complex fp = f_prime(z, sigma);
      EXPECT_LE(std::abs(fp - fd), 1e-6 * std::abs(fp)) << z;
      // explicit formula
      Complex sum = 0.0;
      const Complex f = solve_f(z, sigma).f;
      for (const auto& a : sigma.atoms()) sum += a.weight * a.tau / ((1.0 + a.tau * f) * (1.0 + a.tau * f));
      EXPECT_LE(std::abs(fp - f / (sigma.c() * sum - z)), 1e-12 * std::abs(fp));
    }
  }
}

TEST(FTaylor, SeriesReproducesNearbyValues) {
  const auto sigma = SigmaMeasure::parse("1:0.6,3:0.4", 0.8);
  const Complex w(1.5, 0.5);
  const auto coeffs = f_taylor(w, sigma, 12);
  for (Complex t : {Complex(0.05, 0.0), Complex(0.0, 0.05), Complex(-0.04, -0.03)}) {
    Complex series = 0.0, power = 1.0;
    for (const auto& c : coeffs) series += c * power, power *= t;
    EXPECT_LE(std::abs(series - solve_f(w + t, sigma).f), 1e-11);
  }
}

TEST(ClosedForm, DensityAtCenterForUnitRatio) {
  const Complex f = closed_form_f_mp(Complex(2.0, 1e-10), 1.0);
  EXPECT_NEAR(f.imag() / std::numbers::pi, 1.0 / (2.0 * std::numbers::pi), 1e-8);
  EXPECT_NEAR(mp_density_closed(2.0, 1.0), 1.0 / (2.0 * std::numbers::pi), 1e-15);
}

TEST(SupportEdges, Values) {
  const auto one = support_edges_mp(1.0);
  EXPECT_EQ(one.lower, 0.0);
  EXPECT_EQ(one.upper, 4.0);
  EXPECT_EQ(one.center, 2.0);
  const auto q = support_edges_mp(0.25);
  EXPECT_EQ(q.lower, 0.25);
  EXPECT_EQ(q.upper, 2.25);
  EXPECT_EQ(q.center, 1.25);
  const auto z = support_edges_mp(0.0);
  EXPECT_EQ(z.lower, 1.0);
  EXPECT_EQ(z.upper, 1.0);
  EXPECT_EQ(z.center, 1.0);
}

TEST(Density, PointMassExamples) {
  const auto one = SigmaMeasure::point(1.0, 1.0);
  EXPECT_NEAR(density(2.0, one).value, 1.0 / (2.0 * std::numbers::pi), 1e-3);
  EXPECT_NEAR(density(-1.0, one).value, 0.0, 1e-3);
  const auto quarter = SigmaMeasure::point(1.0, 0.25);
  EXPECT_NEAR(density(1.0, quarter).value,
              closed_form_f_mp(Complex(1.0, 1e-12), 0.25).imag() / std::numbers::pi, 1e-3);
}

TEST(Density, ScheduleValidation) {
  const auto one = SigmaMeasure::point(1.0, 1.0);
  EXPECT_THROW(density(1.0, one, {0.01, 0.02}), UsageError);
  EXPECT_THROW(density(1.0, one, {0.01}), UsageError);
  EXPECT_THROW(density(1.0, one, {1e-5, 1e-7}), UsageError);
}

TEST(Density, AtomAtZeroIsNotPartOfTheDensity) {
  // c < 1 puts an atom of mass 1 - c at 0, well separated from the bulk
  EXPECT_NEAR(density(0.0, SigmaMeasure::point(1.0, 0.25)).value, 0.0, 1e-3);
  EXPECT_NEAR(density(0.05, SigmaMeasure::parse("1:0.5,2:0.5", 0.5)).value, 0.0, 1e-3);
}

TEST(Density, EdgeProximityShowsInDisagreement) {
  // the eta-ladder is not polynomial at the hard edge 0 (c = 1) or the soft edge 4
  const auto sigma = SigmaMeasure::point(1.0, 1.0);
  const double bulk = density(1.0, sigma).disagreement;
  EXPECT_GT(density(0.0, sigma).disagreement, 100.0 * bulk);
  EXPECT_GT(density(4.0, sigma).disagreement, 100.0 * bulk);
  EXPECT_LT(density(4.0, sigma).value, 0.01);
  // a schedule too coarse for the curvature near the hard edge
  EXPECT_THROW(density(0.01, sigma, {2.0, 1.0}), ConvergenceError);
}

TEST(Density, MassDeficitRevealsAtomAtZero) {
  const double c = 0.5;
  const auto sigma = SigmaMeasure::point(1.0, c);
  const auto e = support_edges_mp(c);
  // bulk mass by trapezoid on the extrapolated density
  const int k = 400;
  double mass = 0.0;
  for (int i = 1; i < k; ++i) {
    const double l = e.lower + (e.upper - e.lower) * i / k;
    mass += density(l, sigma).value * (e.upper - e.lower) / k;
  }
  EXPECT_NEAR(1.0 - mass, 1.0 - c, 0.02);
  EXPECT_NEAR(LimitCdf(sigma).atom_at_zero(), 1.0 - c, 1e-15);
}

TEST(LimitCdf, PointMassBulkMatchesDensityIntegral) {
  boost::math::quadrature::tanh_sinh<double> q;
  for (double c : {0.25, 1.0, 2.0}) {
    const LimitCdf cdf(SigmaMeasure::point(1.0, c));
    const auto e = support_edges_mp(c);
    for (double x : {0.3, 1.0, 2.0, 3.5}) {
      if (x <= e.lower || x >= e.upper) continue;
      const double bulk = q.integrate([&](double l) { return mp_density_closed(l, c); }, e.lower, x);
      EXPECT_NEAR(cdf(x), std::max(0.0, 1.0 - c) + bulk, 1e-9) << "c=" << c << " x=" << x;
    }
    EXPECT_EQ(cdf(-0.1), 0.0);
    EXPECT_NEAR(cdf(e.upper + 1.0), 1.0, 1e-12);
  }
}

TEST(LimitCdf, ScaledAtomAndDegenerateCases) {
  const LimitCdf scaled(SigmaMeasure::point(2.0, 1.0));
  const LimitCdf unit(SigmaMeasure::point(1.0, 1.0));
  EXPECT_NEAR(scaled(3.0), unit(1.5), 1e-14);
  EXPECT_EQ(LimitCdf(SigmaMeasure::point(0.0, 1.0))(0.0), 1.0);
  EXPECT_EQ(LimitCdf(SigmaMeasure::point(1.0, 0.0))(0.0), 1.0);
}

TEST(LimitCdf, MixtureIsMonotoneWithUnitMass) {
  const LimitCdf cdf(SigmaMeasure::parse("1:0.5,3:0.5", 0.5));
  double prev = 0.0;
  for (double x = 0.0; x <= 12.0; x += 0.05) {
    const double v = cdf(x);
    EXPECT_GE(v, prev - 1e-12);
    prev = v;
  }
  EXPECT_NEAR(cdf(100.0), 1.0, 1e-12);
  EXPECT_NEAR(cdf.atom_at_zero(), 0.5, 0.01);
}

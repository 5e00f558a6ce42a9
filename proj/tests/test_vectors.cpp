#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "rmtlab/stats.hpp"
#include "rmtlab/vectors.hpp"

using namespace rmtlab;

namespace {

std::vector<VectorLaw> all_laws() {
  return {VectorLaw::iid(BaseLaw::gaussian), VectorLaw::iid(BaseLaw::rademacher),
          VectorLaw::iid(BaseLaw::uniform),  VectorLaw::sphere(),
          VectorLaw::lp_ball(1.0),           VectorLaw::lp_ball(2.0),
          VectorLaw::lp_ball(4.0)};
}

// mean and standard error of a running sum
struct Acc {
  double s = 0, sq = 0;
  std::size_t k = 0;
  void add(double x) { s += x, sq += x * x, ++k; }
  double mean() const { return s / k; }
  double se() const { return std::sqrt(std::max(0.0, sq / k - mean() * mean()) / (k - 1)); }
};

}  // namespace

TEST(Vectors, SphereHasUnitNorm) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    EXPECT_NEAR(sample_vector(VectorLaw::sphere(), 3, rng).norm(), 1.0, 1e-15);
  }
}

TEST(Vectors, RademacherComponentsAreHalf) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 50; ++i) {
    const auto y = sample_vector(VectorLaw::iid(BaseLaw::rademacher), 4, rng);
    for (double v : y) EXPECT_EQ(std::abs(v), 0.5);
  }
}

TEST(Vectors, UniformComponentsStayInScaledInterval) {
  std::mt19937_64 rng(3);
  const double bound = std::sqrt(3.0) / std::sqrt(16.0);
  for (int i = 0; i < 100; ++i) {
    for (double v : sample_vector(VectorLaw::iid(BaseLaw::uniform), 16, rng)) {
      EXPECT_LE(std::abs(v), bound);
    }
  }
}

TEST(Vectors, LpBallPointsLieInScaledBall) {
  std::mt19937_64 rng(4);
  for (double p : {0.5, 1.0, 2.0, 4.0}) {
    const std::size_t n = 12;
    const double s = isotropy_scale_lp(n, p);
    for (int i = 0; i < 200; ++i) {
      const auto y = sample_vector(VectorLaw::lp_ball(p), n, rng);
      double norm_p = 0.0;
      for (double v : y) norm_p += std::pow(std::abs(v) / s, p);
      EXPECT_LT(norm_p, 1.0);
    }
  }
}

TEST(Vectors, LpBallTwoIsIsotropicInLargeDimension) {
  std::mt19937_64 rng(5);
  const std::size_t n = 200;
  Acc acc;
  for (int r = 0; r < 100000 / 40; ++r) {
    const auto y = sample_vector(VectorLaw::lp_ball(2.0), n, rng);
    for (std::size_t j = 0; j < 40; ++j) acc.add(n * y[j] * y[j]);
  }
  EXPECT_NEAR(acc.mean(), 1.0, 3.0 * acc.se());
}

TEST(Vectors, RejectsBadArguments) {
  EXPECT_THROW(VectorLaw::lp_ball(0.0), UsageError);
  EXPECT_THROW(VectorLaw::lp_ball(-1.0), UsageError);
  EXPECT_THROW(VectorLaw::lp_ball(INFINITY), UsageError);
  EXPECT_THROW(VectorLaw::parse("lpball:0"), UsageError);
  EXPECT_THROW(VectorLaw::parse("lpball:x"), UsageError);
  EXPECT_THROW(VectorLaw::parse("cauchy"), UsageError);
  EXPECT_THROW(isotropy_scale_lp(0, 2.0), UsageError);
  std::mt19937_64 rng(6);
  EXPECT_THROW(sample_vector(VectorLaw::sphere(), 0, rng), UsageError);
}

TEST(Vectors, ParseRoundTrip) {
  for (const auto& law : all_laws()) {
    EXPECT_EQ(VectorLaw::parse(law.to_string()).to_string(), law.to_string());
  }
  EXPECT_EQ(VectorLaw::parse("lpball:1.5").to_string(), "lpball:1.5");
}

TEST(IsotropyScale, OneDimensionalUniform) {
  // B_2^1 = [-1, 1]; uniform on [-s, s] has second moment s^2 / 3
  const double s = isotropy_scale_lp(1, 2.0);
  EXPECT_NEAR(s * s / 3.0, 1.0, 1e-14);
}

TEST(IsotropyScale, TwoDimensionalDiscMonteCarlo) {
  std::mt19937_64 rng(7);
  Acc acc;
  for (int r = 0; r < 100000; ++r) {
    const auto y = sample_vector(VectorLaw::lp_ball(2.0), 2, rng);
    acc.add(y[0] * y[0]);
  }
  EXPECT_NEAR(acc.mean(), 0.5, 4.0 * acc.se());
}

TEST(IsotropyScale, FiniteForLargeDimension) {
  const double s = isotropy_scale_lp(1u << 20, 0.5);
  EXPECT_TRUE(std::isfinite(s));
  EXPECT_GT(s, 0.0);
}

TEST(MomentProfile, ClosedFormConstants) {
  const auto g = moment_profile(VectorLaw::iid(BaseLaw::gaussian));
  EXPECT_EQ(g.a(), 0.0);
  EXPECT_EQ(g.b(), 0.0);
  const auto u = moment_profile(VectorLaw::iid(BaseLaw::uniform));
  EXPECT_NEAR(u.b(), -6.0 / 5.0, 1e-15);
  const auto rad = moment_profile(VectorLaw::iid(BaseLaw::rademacher));
  EXPECT_EQ(rad.b(), -2.0);
  const auto sph = moment_profile(VectorLaw::sphere());
  EXPECT_EQ(sph.a(), -2.0);
  EXPECT_EQ(sph.b(), 0.0);
}

TEST(MomentProfile, LpBallKurtosisTerm) {
  // Gamma(1/2) Gamma(5/2) / Gamma(3/2)^2 = (3/4) / (1/4) = 3
  EXPECT_NEAR(moment_profile(VectorLaw::lp_ball(2.0)).b(), 0.0, 1e-13);
  // p = 1: Gamma(1) Gamma(5) / Gamma(3)^2 = 24 / 4 = 6
  EXPECT_NEAR(moment_profile(VectorLaw::lp_ball(1.0)).b(), 3.0, 1e-12);
  // p -> infinity recovers the uniform base law
  EXPECT_NEAR(MomentProfile::lp_kurtosis_ratio(1e5), 9.0 / 5.0, 1e-4);
}

TEST(MomentProfile, LpBallTwoMatchesEuclideanBallExactly) {
  // uniform on B_2^n scaled to isotropy: a22 = (n + 2) / (n^2 (n + 4)), so n^3 (a22 - n^-2) = -2n/(n+4)
  const auto prof = moment_profile(VectorLaw::lp_ball(2.0));
  for (std::size_t n : {2u, 8u, 64u, 1024u}) {
    const double dn = static_cast<double>(n);
    EXPECT_NEAR(prof.a22(n), (dn + 2.0) / (dn * dn * (dn + 4.0)), 1e-12 / (dn * dn));
    EXPECT_NEAR(prof.a_at(n), -2.0 * dn / (dn + 4.0), 1e-9);
    EXPECT_NEAR(prof.kappa4(n), 0.0, 1e-12 / (dn * dn));
  }
  EXPECT_EQ(prof.a(), -2.0);
}

TEST(MomentProfile, SphereExactMoments) {
  const auto prof = moment_profile(VectorLaw::sphere());
  EXPECT_DOUBLE_EQ(prof.a22(10), 1.0 / 120.0);
  EXPECT_EQ(prof.kappa4(10), 0.0);
}

TEST(MomentProfile, SphereMomentsByIntegrationInTwoAndThreeDimensions) {
  // n = 2: y = (cos t, sin t); E cos^2 sin^2 = 1/8, E cos^4 = 3/8
  {
    const int k = 4096;
    double pair = 0.0, fourth = 0.0;
    for (int i = 0; i < k; ++i) {
      const double t = 2.0 * std::numbers::pi * (i + 0.5) / k;
      pair += std::pow(std::cos(t) * std::sin(t), 2) / k;
      fourth += std::pow(std::cos(t), 4) / k;
    }
    const auto prof = moment_profile(VectorLaw::sphere());
    EXPECT_NEAR(prof.a22(2), pair, 1e-12);
    EXPECT_NEAR(3.0 * prof.a22(2) + prof.kappa4(2), fourth, 1e-12);
  }
  // n = 3: surface measure via (z, phi), z uniform on [-1, 1]
  {
    const int k = 400;
    double pair = 0.0, fourth = 0.0;
    for (int i = 0; i < k; ++i) {
      const double z = -1.0 + 2.0 * (i + 0.5) / k;
      for (int j = 0; j < k; ++j) {
        const double ph = 2.0 * std::numbers::pi * (j + 0.5) / k;
        const double x = std::sqrt(1 - z * z) * std::cos(ph);
        pair += x * x * z * z / (k * k);
        fourth += z * z * z * z / (k * k);
      }
    }
    const auto prof = moment_profile(VectorLaw::sphere());
    EXPECT_NEAR(prof.a22(3), pair, 1e-5);
    EXPECT_NEAR(3.0 * prof.a22(3) + prof.kappa4(3), fourth, 1e-5);
  }
}

TEST(MomentProfile, LimitsOfExactProfiles) {
  for (const auto& law : all_laws()) {
    const auto prof = moment_profile(law);
    const std::size_t n = 1u << 22;
    const double dn = static_cast<double>(n);
    EXPECT_NEAR(dn * dn * prof.a22(n), 1.0, 1e-5) << law.to_string();
    EXPECT_NEAR(prof.a_at(n), prof.a(), 1e-4) << law.to_string();
    EXPECT_NEAR(prof.b_at(n), prof.b(), 1e-4) << law.to_string();
  }
}

TEST(MomentProfile, LpBallOneFiniteDimensionValues) {
  // n (R - 1) with R = Gamma(n+3)^2 / (Gamma(n+1) Gamma(n+5)) = (n+1)(n+2)/((n+3)(n+4))
  const auto prof = moment_profile(VectorLaw::lp_ball(1.0));
  for (std::size_t n : {16u, 64u, 256u}) {
    const double dn = static_cast<double>(n);
    const double ratio = (dn + 1) * (dn + 2) / ((dn + 3) * (dn + 4));
    EXPECT_NEAR(prof.a_at(n), dn * (ratio - 1.0), 1e-10);
  }
  EXPECT_NEAR(prof.a(), -4.0, 0.0);
}

TEST(EstimateMoments, SpherePairMoment) {
  std::mt19937_64 rng(11);
  const auto est = estimate_moments(VectorLaw::sphere(), 10, 200000, rng);
  EXPECT_NEAR(est.a22, 1.0 / 120.0, 3.0 * est.a22_se);
}

TEST(EstimateMoments, GaussianCumulantVanishes) {
  std::mt19937_64 rng(12);
  const auto est = estimate_moments(VectorLaw::iid(BaseLaw::gaussian), 10, 200000, rng);
  EXPECT_NEAR(est.kappa4, 0.0, 3.0 * est.kappa4_se);
}

TEST(EstimateMoments, LpBallOneAtFiftyMatchesExactProfile) {
  std::mt19937_64 rng(13);
  const std::size_t n = 50;
  const auto est = estimate_moments(VectorLaw::lp_ball(1.0), n, 400000, rng);
  const auto prof = moment_profile(VectorLaw::lp_ball(1.0));
  const double dn = n;
  const double a_hat = dn * dn * dn * (est.a22 - 1.0 / (dn * dn));
  EXPECT_NEAR(a_hat, prof.a_at(n), 4.0 * dn * dn * dn * est.a22_se);
  EXPECT_NEAR(est.kappa4, prof.kappa4(n), 4.0 * est.kappa4_se);
}

TEST(EstimateMoments, ConvergesToExactProfileForEveryLaw) {
  std::mt19937_64 rng(14);
  for (const auto& law : all_laws()) {
    const std::size_t n = 8;
    const auto est = estimate_moments(law, n, 100000, rng);
    const auto prof = moment_profile(law);
    EXPECT_NEAR(est.a22, prof.a22(n), 3.0 * est.a22_se + 1e-15) << law.to_string();
    EXPECT_NEAR(est.kappa4, prof.kappa4(n), 3.0 * est.kappa4_se + 1e-15) << law.to_string();
  }
}

TEST(EstimateMoments, RejectsTooFewReplicates) {
  std::mt19937_64 rng(15);
  EXPECT_THROW(estimate_moments(VectorLaw::sphere(), 8, 1, rng), UsageError);
}

TEST(Vectors, IsotropyByMonteCarlo) {
  std::mt19937_64 rng(16);
  for (const auto& law : all_laws()) {
    for (std::size_t n : {8u, 64u}) {
      Acc first, second, cross;
      for (int r = 0; r < 100000; ++r) {
        const auto y = sample_vector(law, n, rng);
        first.add(y[0]);
        second.add(n * y[1] * y[1]);
        cross.add(n * y[2] * y[3]);
      }
      EXPECT_NEAR(first.mean(), 0.0, 4.0 * first.se()) << law.to_string() << " n=" << n;
      EXPECT_NEAR(second.mean(), 1.0, 4.0 * second.se()) << law.to_string() << " n=" << n;
      EXPECT_NEAR(cross.mean(), 0.0, 4.0 * cross.se()) << law.to_string() << " n=" << n;
    }
  }
}

TEST(Vectors, SignFlipsLeaveStatisticsInvariant) {
  // unconditional: E{y_0^3 y_1} and E{y_0 y_1 y_2^2} vanish, and (y_0, y_1) vs (-y_0, y_1)
  // give the same fourth moment estimate up to MC error
  std::mt19937_64 rng(17);
  for (const auto& law : all_laws()) {
    Acc odd1, odd2;
    for (int r = 0; r < 50000; ++r) {
      const auto y = sample_vector(law, 6, rng);
      odd1.add(36.0 * y[0] * y[0] * y[0] * y[1]);
      odd2.add(36.0 * y[0] * y[1] * y[2] * y[2]);
    }
    EXPECT_NEAR(odd1.mean(), 0.0, 4.0 * odd1.se()) << law.to_string();
    EXPECT_NEAR(odd2.mean(), 0.0, 4.0 * odd2.se()) << law.to_string();
  }
}

TEST(Vectors, MixedFourthMomentsFollowExactProfile) {
  // E{y_j y_k y_p y_q} = a22 (d_jk d_pq + d_jp d_kq + d_jq d_kp) + kappa4 d_jkpq
  std::mt19937_64 rng(18);
  const std::size_t n = 8;
  for (const auto& law : all_laws()) {
    const auto prof = moment_profile(law);
    Acc all_equal, two_pairs, pair_plus, distinct;
    const double s = n * n;
    for (int r = 0; r < 100000; ++r) {
      const auto y = sample_vector(law, n, rng);
      all_equal.add(s * std::pow(y[0], 4));
      two_pairs.add(s * y[0] * y[0] * y[1] * y[1]);
      pair_plus.add(s * y[0] * y[0] * y[1] * y[2]);
      distinct.add(s * y[0] * y[1] * y[2] * y[3]);
    }
    EXPECT_NEAR(all_equal.mean(), s * (3.0 * prof.a22(n) + prof.kappa4(n)), 4.0 * all_equal.se())
        << law.to_string();
    EXPECT_NEAR(two_pairs.mean(), s * prof.a22(n), 4.0 * two_pairs.se()) << law.to_string();
    EXPECT_NEAR(pair_plus.mean(), 0.0, 4.0 * pair_plus.se()) << law.to_string();
    EXPECT_NEAR(distinct.mean(), 0.0, 4.0 * distinct.se()) << law.to_string();
  }
}

TEST(QuadraticFormVariance, IdentityCases) {
  const std::size_t n = 20;
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
  EXPECT_NEAR(quadratic_form_variance(id, moment_profile(VectorLaw::sphere()), n), 0.0, 1e-16);
  EXPECT_NEAR(quadratic_form_variance(id, moment_profile(VectorLaw::iid(BaseLaw::gaussian)), n),
              2.0 / n, 1e-15);
  EXPECT_EQ(quadratic_form_variance(Eigen::MatrixXd::Zero(n, n),
                                    moment_profile(VectorLaw::lp_ball(1.0)), n),
            0.0);
}

TEST(QuadraticFormVariance, ComplexSymmetricMatrix) {
  // n = 2, A = [[i, 0], [0, 0]]: Var(i y_0^2) taken as E|.|^2 - |E.|^2 = Var(y_0^2)
  const auto prof = moment_profile(VectorLaw::iid(BaseLaw::gaussian));
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(2, 2);
  a(0, 0) = Complex(0, 1);
  // Var(x^2 / 2) for standard normal x = 2 / 4
  EXPECT_NEAR(quadratic_form_variance(a, prof, 2), 0.5, 1e-15);
}

TEST(QuadraticFormVariance, RejectsNonSquareOrWrongSize) {
  const auto prof = moment_profile(VectorLaw::sphere());
  EXPECT_THROW(quadratic_form_variance(Eigen::MatrixXd::Zero(2, 3), prof, 2), UsageError);
  EXPECT_THROW(quadratic_form_variance(Eigen::MatrixXd::Zero(3, 3), prof, 2), UsageError);
}

TEST(QuadraticFormVariance, MatchesMonteCarloOnRandomContractions) {
  std::mt19937_64 rng(19);
  std::normal_distribution<double> normal;
  const std::size_t n = 32;
  for (const auto& law : {VectorLaw::iid(BaseLaw::gaussian), VectorLaw::sphere(), VectorLaw::lp_ball(1.0)}) {
    const auto prof = moment_profile(law);
    for (int t = 0; t < 5; ++t) {
      Eigen::MatrixXd g(n, n);
      for (auto& v : g.reshaped()) v = normal(rng);
      Eigen::MatrixXd a = 0.5 * (g + g.transpose()) / std::sqrt(double(n));
      a.diagonal().array() += 0.5 * t;  // larger traces as t grows
      a /= Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a).eigenvalues().cwiseAbs().maxCoeff();
      std::vector<double> q(40000);
      for (auto& v : q) {
        const auto y = sample_vector(law, n, rng);
        v = y.dot(a * y);
      }
      const double exact = quadratic_form_variance(a, prof, n);
      const double mc = stats::summarize(q).variance;
      EXPECT_NEAR(mc, exact, 4.0 * stats::jackknife_variance_se(q)) << law.to_string() << " t=" << t;
    }
  }
}

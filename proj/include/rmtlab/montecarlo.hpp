#pragma once

// Replicated experiments: spectral convergence, linear-statistic CLT,
// resolvent-trace covariance, fourth-moment ladders.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rmtlab/ensemble.hpp"
#include "rmtlab/errors.hpp"
#include "rmtlab/mp_limit.hpp"
#include "rmtlab/parallel.hpp"
#include "rmtlab/stats.hpp"
#include "rmtlab/test_function.hpp"
#include "rmtlab/variance.hpp"
#include "rmtlab/vectors.hpp"

namespace rmtlab {

using Rng = std::mt19937_64;

struct ExperimentConfig {
  VectorLaw law;
  SigmaMeasure sigma;
  std::size_t n = 0;
  std::size_t m = 0;
  std::size_t replicates = 0;
  std::uint64_t seed = 42;
  unsigned jobs = 1;

  /// m = round(c n), at least 1.
  static ExperimentConfig make(VectorLaw law, SigmaMeasure sigma, std::size_t n,
                               std::size_t replicates, std::uint64_t seed = 42, unsigned jobs = 1) {
    const auto m = static_cast<std::size_t>(
        std::max(1.0, std::round(sigma.c() * static_cast<double>(n))));
    ExperimentConfig cfg{law, std::move(sigma), n, m, replicates, seed, jobs};
    cfg.validate();
    return cfg;
  }

  void validate() const {
    require(n >= 1 && m >= 1, "experiment: n and m must be >= 1");
    require(replicates >= 2, "experiment: R must be >= 2");
    const double ratio = static_cast<double>(m) / static_cast<double>(n);
    const double c = sigma.c();
    require(std::abs(ratio - c) <= std::max(0.2 * c, 1.0 / static_cast<double>(n)),
            "experiment: m/n is not within 20% of sigma's c");
  }
};

/// M_n for replicate r; the stream depends only on (seed, r).
inline Eigen::MatrixXd replicate_matrix(const ExperimentConfig& cfg, std::size_t r) {
  Rng rng(replicate_seed(cfg.seed, r));
  Eigen::MatrixXd y(static_cast<Eigen::Index>(cfg.n), static_cast<Eigen::Index>(cfg.m));
  for (Eigen::Index a = 0; a < y.cols(); ++a) sample_vector_into(cfg.law, y.col(a), rng);
  return assemble(make_taus(cfg.sigma, cfg.m), y);
}

inline SpectralSample replicate_spectrum(const ExperimentConfig& cfg, std::size_t r) {
  return SpectralSample::from(eigenvalues(replicate_matrix(cfg, r)).values, cfg.m,
                              replicate_seed(cfg.seed, r), cfg.law.to_string(),
                              cfg.sigma.to_string());
}

struct EsdReport {
  double ks = 0.0;
  double atom = 0.0;         ///< limit mass at 0
  double empirical_zero = 0.0;  ///< pooled fraction of (numerically) zero eigenvalues
  std::size_t pooled = 0;
  Histogram histogram;
  std::vector<double> limit_density;  ///< at bin midpoints
};

/// Eigenvalues within 1e-9 of the largest in absolute value count as exact zeros.
inline void snap_zeros(std::vector<double>& values) {
  double top = 0.0;
  for (double v : values) top = std::max(top, std::abs(v));
  const double cut = 1e-9 * std::max(top, 1.0);
  for (double& v : values) {
    if (std::abs(v) <= cut) v = 0.0;
  }
}

inline EsdReport run_esd(const ExperimentConfig& cfg, std::size_t bins = 60) {
  cfg.validate();
  const auto spectra = parallel_map(cfg.replicates, cfg.jobs, [&](std::size_t r) {
    return replicate_spectrum(cfg, r).eigenvalues;
  });
  std::vector<double> pooled;
  pooled.reserve(cfg.replicates * cfg.n);
  for (const auto& s : spectra) pooled.insert(pooled.end(), s.begin(), s.end());
  snap_zeros(pooled);

  const LimitCdf cdf(cfg.sigma);
  EsdReport out;
  out.atom = cdf.atom_at_zero();
  out.pooled = pooled.size();
  out.empirical_zero =
      static_cast<double>(std::count(pooled.begin(), pooled.end(), 0.0)) / static_cast<double>(pooled.size());
  out.ks = stats::ks_statistic(pooled, cdf);

  auto [lo, hi] = support_bounds(cfg.sigma);
  const auto [pmin, pmax] = std::minmax_element(pooled.begin(), pooled.end());
  lo = std::min(lo, *pmin);
  hi = std::max(hi, *pmax);
  if (hi <= lo) hi = lo + 1.0;
  out.histogram = histogram(pooled, bins, lo, hi);
  out.limit_density.resize(bins);
  const auto single = cfg.sigma.single_atom();
  for (std::size_t i = 0; i < bins; ++i) {
    const double mid = 0.5 * (out.histogram.edges[i] + out.histogram.edges[i + 1]);
    if (single && *single > 0.0) {
      out.limit_density[i] = mp_density_closed(mid / *single, cfg.sigma.c()) / *single;
    } else if (single) {
      out.limit_density[i] = 0.0;
    } else {
      try {
        out.limit_density[i] = density(mid, cfg.sigma).value;
      } catch (const ConvergenceError&) {
        out.limit_density[i] = std::nan("");
      }
    }
  }
  return out;
}

struct CltReport {
  std::string phi;
  std::size_t replicates = 0;
  double sample_mean = 0.0;
  double sample_variance = 0.0;
  double variance_se = 0.0;  ///< jackknife
  std::optional<double> predicted_variance;
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  double ks_statistic = 0.0;  ///< standardized replicates vs N(0,1)
  double ks_pvalue = 1.0;
  std::vector<double> values;
};

inline CltReport summarize_clt(std::string label, std::vector<double> values) {
  CltReport out;
  out.phi = std::move(label);
  out.replicates = values.size();
  const auto s = stats::summarize(values);
  out.sample_mean = s.mean;
  out.sample_variance = s.variance;
  out.variance_se = stats::jackknife_variance_se(values);
  out.skewness = s.skewness;
  out.excess_kurtosis = s.excess_kurtosis;
  if (s.variance > 0.0) {
    const double sd = std::sqrt(s.variance);
    std::vector<double> z(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) z[i] = (values[i] - s.mean) / sd;
    out.ks_statistic = stats::ks_statistic(std::move(z), stats::normal_cdf);
    out.ks_pvalue = stats::kolmogorov_pvalue(out.ks_statistic, values.size());
  }
  out.values = std::move(values);
  return out;
}

/// R replicates of N_n[phi] for every phi, sharing the spectra. The
/// prediction uses the law's (a, b) and the config's sigma.
inline std::vector<CltReport> run_clt(const ExperimentConfig& cfg, std::span<const TestFunction> phis,
                                      bool predict = true) {
  cfg.validate();
  const auto rows = parallel_map(cfg.replicates, cfg.jobs, [&](std::size_t r) {
    const auto sample = replicate_spectrum(cfg, r);
    std::vector<double> row(phis.size());
    for (std::size_t k = 0; k < phis.size(); ++k) row[k] = linear_statistic(sample, phis[k]);
    return row;
  });
  const auto profile = moment_profile(cfg.law);
  std::vector<CltReport> out;
  for (std::size_t k = 0; k < phis.size(); ++k) {
    std::vector<double> values(cfg.replicates);
    for (std::size_t r = 0; r < cfg.replicates; ++r) values[r] = rows[r][k];
    auto report = summarize_clt(phis[k].label(), std::move(values));
    if (predict) {
      report.predicted_variance =
          variance_limit(phis[k], cfg.sigma, profile.a(), profile.b()).value;
    }
    out.push_back(std::move(report));
  }
  return out;
}

/// Var{Tr M_n} at finite n: sum_a tau_a^2 Var{|y|^2}.
inline double trace_variance_exact(const ExperimentConfig& cfg) {
  const auto taus = make_taus(cfg.sigma, cfg.m);
  double tau_sq = 0.0;
  for (double t : taus) tau_sq += t * t;
  const auto id = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(cfg.n),
                                            static_cast<Eigen::Index>(cfg.n));
  return tau_sq * quadratic_form_variance(id, moment_profile(cfg.law), cfg.n);
}

struct ZPair {
  Complex z1;
  Complex z2;
};

struct CovReport {
  Complex z1;
  Complex z2;
  Complex empirical;  ///< (R-1)^{-1} sum_r (g1_r - mean g1)(g2_r - mean g2)
  double se_re = 0.0;
  double se_im = 0.0;
  Complex predicted;
  bool psd_ok = true;  ///< 4x4 covariance of (Re, Im) parts is PSD

  double z_re() const { return se_re > 0.0 ? (empirical.real() - predicted.real()) / se_re : 0.0; }
  double z_im() const { return se_im > 0.0 ? (empirical.imag() - predicted.imag()) / se_im : 0.0; }
};

inline std::vector<CovReport> run_cov(const ExperimentConfig& cfg, std::span<const ZPair> pairs) {
  cfg.validate();
  for (const auto& p : pairs) {
    require_off_axis(p.z1, "run_cov");
    require_off_axis(p.z2, "run_cov");
  }
  const auto rows = parallel_map(cfg.replicates, cfg.jobs, [&](std::size_t r) {
    const auto sample = replicate_spectrum(cfg, r);
    std::vector<Complex> row(2 * pairs.size());
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      row[2 * k] = resolvent_trace(sample, pairs[k].z1);
      row[2 * k + 1] = resolvent_trace(sample, pairs[k].z2);
    }
    return row;
  });
  const auto profile = moment_profile(cfg.law);
  const double rr = static_cast<double>(cfg.replicates);
  std::vector<CovReport> out;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    CovReport rep;
    rep.z1 = pairs[k].z1;
    rep.z2 = pairs[k].z2;
    Eigen::MatrixXd parts(static_cast<Eigen::Index>(cfg.replicates), 4);
    for (std::size_t r = 0; r < cfg.replicates; ++r) {
      const auto i = static_cast<Eigen::Index>(r);
      parts.row(i) << rows[r][2 * k].real(), rows[r][2 * k].imag(), rows[r][2 * k + 1].real(),
          rows[r][2 * k + 1].imag();
    }
    // shifted means stay exact when a column is constant
    for (Eigen::Index j = 0; j < 4; ++j) {
      const double first = parts(0, j);
      const double mean = first + (parts.col(j).array() - first).sum() / rr;
      parts.col(j).array() -= mean;
    }
    std::vector<double> prod_re(cfg.replicates), prod_im(cfg.replicates);
    Complex sum = 0.0;
    for (std::size_t r = 0; r < cfg.replicates; ++r) {
      const auto i = static_cast<Eigen::Index>(r);
      const Complex d1(parts(i, 0), parts(i, 1)), d2(parts(i, 2), parts(i, 3));
      const Complex p = d1 * d2;
      prod_re[r] = p.real();
      prod_im[r] = p.imag();
      sum += p;
    }
    rep.empirical = sum / (rr - 1.0);
    rep.se_re = std::sqrt(stats::summarize(prod_re).variance / rr);
    rep.se_im = std::sqrt(stats::summarize(prod_im).variance / rr);

    const Eigen::Matrix4d cov = parts.transpose() * parts / (rr - 1.0);
    const double scale = std::max(cov.diagonal().maxCoeff(), 1e-300);
    rep.psd_ok = Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d>(cov).eigenvalues().minCoeff() >=
                 -1e-10 * scale;

    if (cfg.sigma.max_tau() == 0.0) {
      rep.predicted = 0.0;
    } else {
      rep.predicted = cov_kernel(rep.z1, rep.z2, cfg.sigma, profile.a(), profile.b());
    }
    out.push_back(rep);
  }
  return out;
}

struct MomentRow {
  std::size_t n = 0;
  MomentEstimate estimate;
  double a22_exact = 0.0;
  double kappa4_exact = 0.0;
  double a_hat = 0.0;  ///< n^3 (a22 - n^-2)
  double a_se = 0.0;
  double a_exact = 0.0;
  double b_hat = 0.0;  ///< n^2 kappa4
  double b_se = 0.0;
  double b_exact = 0.0;
};

struct MomentReport {
  std::string law;
  std::size_t replicates = 0;
  double a_limit = 0.0;
  double b_limit = 0.0;
  std::vector<MomentRow> rows;
};

/// estimate_moments across an n-ladder. Draws are split into `jobs`-independent
/// blocks so that results do not depend on the worker count.
inline MomentReport run_moment_check(const VectorLaw& law, std::span<const std::size_t> ladder,
                                     std::size_t replicates, std::uint64_t seed, unsigned jobs = 1) {
  require(replicates >= 2, "moments: R must be >= 2");
  constexpr std::size_t blocks = 16;
  const auto profile = moment_profile(law);
  MomentReport out{law.to_string(), replicates, profile.a(), profile.b(), {}};
  for (std::size_t n : ladder) {
    require(n >= 2, "moments: n must be >= 2");
    const std::size_t per = std::max<std::size_t>(2, replicates / blocks);
    const auto parts = parallel_map(blocks, jobs, [&](std::size_t b) {
      Rng rng(replicate_seed(seed ^ (0x5851f42d4c957f2dULL * n), b));
      return estimate_moments(law, n, per, rng);
    });
    // combine equal-size blocks: mean of means, SE from the within-block SEs
    MomentEstimate est;
    for (const auto& p : parts) {
      est.a22 += p.a22 / blocks;
      est.kappa4 += p.kappa4 / blocks;
      est.a22_se += p.a22_se * p.a22_se;
      est.kappa4_se += p.kappa4_se * p.kappa4_se;
    }
    est.a22_se = std::sqrt(est.a22_se) / blocks;
    est.kappa4_se = std::sqrt(est.kappa4_se) / blocks;

    const double dn = static_cast<double>(n);
    MomentRow row;
    row.n = n;
    row.estimate = est;
    row.a22_exact = profile.a22(n);
    row.kappa4_exact = profile.kappa4(n);
    row.a_hat = dn * dn * dn * (est.a22 - 1.0 / (dn * dn));
    row.a_se = dn * dn * dn * est.a22_se;
    row.a_exact = profile.a_at(n);
    row.b_hat = dn * dn * est.kappa4;
    row.b_se = dn * dn * est.kappa4_se;
    row.b_exact = profile.b_at(n);
    out.rows.push_back(row);
  }
  return out;
}

struct GdiagReport {
  Complex z1;
  Complex z2;
  Complex empirical;  ///< replicate mean of n^{-1} sum_j G_jj(z1) G_jj(z2)
  Complex limit;      ///< f(z1) f(z2)
  double distance = 0.0;
};

inline GdiagReport run_gdiag(const ExperimentConfig& cfg, Complex z1, Complex z2) {
  cfg.validate();
  const auto values = parallel_map(cfg.replicates, cfg.jobs, [&](std::size_t r) {
    return g_diag(replicate_matrix(cfg, r), z1, z2);
  });
  GdiagReport out{z1, z2, 0.0, 0.0, 0.0};
  for (const auto& v : values) out.empirical += v;
  out.empirical /= static_cast<double>(values.size());
  out.limit = solve_f(z1, cfg.sigma).f * solve_f(z2, cfg.sigma).f;
  out.distance = std::abs(out.empirical - out.limit);
  return out;
}

}  // namespace rmtlab

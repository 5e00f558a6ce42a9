#pragma once

// The matrix M_n = sum_a tau_a y_a y_a^T, its spectrum, and statistics built on it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "rmtlab/errors.hpp"
#include "rmtlab/test_function.hpp"

namespace rmtlab {

struct SigmaAtom {
  double tau;
  double weight;
};

/// Discrete limiting law of the tau weights plus the ratio c = lim m/n.
class SigmaMeasure {
 public:
  SigmaMeasure(std::vector<SigmaAtom> atoms, double c) : atoms_(std::move(atoms)), c_(c) {
    require(!atoms_.empty(), "sigma: empty measure");
    require(std::isfinite(c_) && c_ >= 0.0, "sigma: c must be >= 0");
    double total = 0.0;
    for (const auto& a : atoms_) {
      require(std::isfinite(a.tau) && a.tau >= 0.0, "sigma: atoms must have tau >= 0");
      require(std::isfinite(a.weight) && a.weight > 0.0, "sigma: weights must be > 0");
      total += a.weight;
    }
    require(std::abs(total - 1.0) <= 1e-9, "sigma: weights must sum to 1");
    for (auto& a : atoms_) a.weight /= total;
    std::stable_sort(atoms_.begin(), atoms_.end(),
                     [](const SigmaAtom& x, const SigmaAtom& y) { return x.tau < y.tau; });
  }

  static SigmaMeasure point(double tau, double c) { return SigmaMeasure({{tau, 1.0}}, c); }

  /// "tau:weight,tau:weight,..."
  static SigmaMeasure parse(std::string_view spec, double c) {
    std::vector<SigmaAtom> atoms;
    std::stringstream in{std::string(spec)};
    std::string item;
    while (std::getline(in, item, ',')) {
      const auto colon = item.find(':');
      require(colon != std::string::npos, "malformed sigma spec: " + std::string(spec));
      try {
        std::size_t used_tau = 0, used_w = 0;
        const std::string tau_s = item.substr(0, colon), w_s = item.substr(colon + 1);
        const double tau = std::stod(tau_s, &used_tau);
        const double w = std::stod(w_s, &used_w);
        require(used_tau == tau_s.size() && used_w == w_s.size(),
                "malformed sigma spec: " + std::string(spec));
        atoms.push_back({tau, w});
      } catch (const UsageError&) {
        throw;
      } catch (const std::exception&) {
        throw UsageError("malformed sigma spec: " + std::string(spec));
      }
    }
    require(!atoms.empty(), "malformed sigma spec: " + std::string(spec));
    return SigmaMeasure(std::move(atoms), c);
  }

  std::string to_string() const {
    std::ostringstream os;
    os.precision(17);
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
      os << (i ? "," : "") << atoms_[i].tau << ":" << atoms_[i].weight;
    }
    return os.str();
  }

  const std::vector<SigmaAtom>& atoms() const noexcept { return atoms_; }
  double c() const noexcept { return c_; }
  SigmaMeasure with_c(double c) const { return SigmaMeasure(atoms_, c); }

  /// tau if the measure is a single atom delta_tau.
  std::optional<double> single_atom() const {
    if (atoms_.size() == 1) return atoms_.front().tau;
    return std::nullopt;
  }

  double max_tau() const { return atoms_.back().tau; }

  /// sum_i w_i tau_i^k
  double moment(int k) const {
    double s = 0.0;
    for (const auto& a : atoms_) s += a.weight * std::pow(a.tau, k);
    return s;
  }

  double mass_at_zero() const {
    double s = 0.0;
    for (const auto& a : atoms_) {
      if (a.tau == 0.0) s += a.weight;
    }
    return s;
  }

 private:
  std::vector<SigmaAtom> atoms_;
  double c_;
};

/// tau_a = sigma-quantile at (a - 1/2)/m; an atom owns the quantile levels
/// up to and including its cumulative weight.
inline std::vector<double> make_taus(const SigmaMeasure& sigma, std::size_t m) {
  require(m >= 1, "make_taus: m must be >= 1");
  const auto& atoms = sigma.atoms();
  std::vector<double> taus(m);
  std::size_t atom = 0;
  double cumulative = atoms[0].weight;
  for (std::size_t a = 0; a < m; ++a) {
    const double q = (static_cast<double>(a) + 0.5) / static_cast<double>(m);
    while (q > cumulative + 1e-12 && atom + 1 < atoms.size()) {
      ++atom;
      cumulative += atoms[atom].weight;
    }
    taus[a] = atoms[atom].tau;
  }
  return taus;
}

/// M = sum_a tau_a y_a y_a^T with y_a the columns of `vectors`.
inline Eigen::MatrixXd assemble(std::span<const double> taus, const Eigen::MatrixXd& vectors) {
  require(static_cast<Eigen::Index>(taus.size()) == vectors.cols(),
          "assemble: number of taus and vectors differ");
  for (double t : taus) require(t >= 0.0 && std::isfinite(t), "assemble: tau must be >= 0");
  Eigen::MatrixXd scaled = vectors;
  for (Eigen::Index a = 0; a < scaled.cols(); ++a) scaled.col(a) *= taus[a];
  Eigen::MatrixXd m = scaled * vectors.transpose();
  m.triangularView<Eigen::StrictlyUpper>() = m.transpose();
  return m;
}

struct Spectrum {
  Eigen::VectorXd values;                ///< ascending
  std::optional<Eigen::MatrixXd> vectors;  ///< columns orthonormal, same order
};

/// Full symmetric eigendecomposition (Householder tridiagonalization + implicit QR).
inline Spectrum eigenvalues(const Eigen::MatrixXd& m, bool want_vectors = false) {
  require(m.rows() == m.cols(), "eigenvalues: matrix must be square");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  require((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale,
          "eigenvalues: matrix must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
      m, want_vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw ConvergenceError("eigenvalues: QR iteration did not converge", 0.0);
  }
  Spectrum out{solver.eigenvalues(), std::nullopt};
  if (want_vectors) out.vectors = solver.eigenvectors();
  return out;
}

/// Eigenvalues of one realization plus where they came from.
struct SpectralSample {
  std::vector<double> eigenvalues;  ///< nondecreasing
  std::size_t n = 0;
  std::size_t m = 0;
  std::uint64_t seed = 0;
  std::string law;
  std::string tau;

  static SpectralSample from(const Eigen::VectorXd& values, std::size_t m, std::uint64_t seed,
                             std::string law, std::string tau) {
    SpectralSample s;
    s.eigenvalues.assign(values.begin(), values.end());
    std::sort(s.eigenvalues.begin(), s.eigenvalues.end());
    s.n = s.eigenvalues.size();
    s.m = m;
    s.seed = seed;
    s.law = std::move(law);
    s.tau = std::move(tau);
    return s;
  }
};

/// N_n[phi] = sum_j phi(lambda_j), not normalized.
inline double linear_statistic(std::span<const double> eigs, const TestFunction& phi) {
  double sum = 0.0;
  for (double l : eigs) {
    const double v = phi(l);
    if (!std::isfinite(v)) throw UsageError("linear_statistic: phi is not finite at an eigenvalue");
    sum += v;
  }
  return sum;
}

inline double linear_statistic(const SpectralSample& sample, const TestFunction& phi) {
  return linear_statistic(sample.eigenvalues, phi);
}

/// Normalized counting measure of the closed interval [lo, hi].
inline double ncm(const SpectralSample& sample, double lo, double hi) {
  if (sample.eigenvalues.empty()) return 0.0;
  const auto first = std::lower_bound(sample.eigenvalues.begin(), sample.eigenvalues.end(), lo);
  const auto last = std::upper_bound(sample.eigenvalues.begin(), sample.eigenvalues.end(), hi);
  const auto count = last > first ? last - first : 0;
  return static_cast<double>(count) / static_cast<double>(sample.eigenvalues.size());
}

/// Right-continuous step function x -> #{lambda_j <= x} / n over a sorted sample.
class EmpiricalCdf {
 public:
  explicit EmpiricalCdf(std::vector<double> sorted) : sorted_(std::move(sorted)) {
    std::sort(sorted_.begin(), sorted_.end());
  }
  double operator()(double x) const {
    if (sorted_.empty()) return 0.0;
    const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
    return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
  }
  const std::vector<double>& points() const noexcept { return sorted_; }

 private:
  std::vector<double> sorted_;
};

inline EmpiricalCdf empirical_cdf(const SpectralSample& sample) {
  return EmpiricalCdf(sample.eigenvalues);
}

struct Histogram {
  std::vector<double> edges;  ///< bins + 1 edges
  std::vector<double> mass;   ///< counts / n per bin
};

inline Histogram histogram(std::span<const double> values, std::size_t bins, double lo, double hi) {
  require(bins >= 1, "histogram: bins must be >= 1");
  require(hi > lo, "histogram: empty range");
  Histogram h;
  h.edges.resize(bins + 1);
  h.mass.assign(bins, 0.0);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (std::size_t i = 0; i <= bins; ++i) h.edges[i] = lo + width * static_cast<double>(i);
  if (values.empty()) return h;
  const double unit = 1.0 / static_cast<double>(values.size());
  for (double v : values) {
    if (v < lo || v > hi) continue;
    auto bin = static_cast<std::size_t>((v - lo) / width);
    if (bin >= bins) bin = bins - 1;
    h.mass[bin] += unit;
  }
  return h;
}

inline Histogram histogram(const SpectralSample& sample, std::size_t bins) {
  require(bins >= 1, "histogram: bins must be >= 1");
  require(!sample.eigenvalues.empty(), "histogram: empty sample");
  double lo = sample.eigenvalues.front(), hi = sample.eigenvalues.back();
  if (hi <= lo) {
    lo -= 0.5;
    hi += 0.5;
  }
  return histogram(sample.eigenvalues, bins, lo, hi);
}

/// gamma_n(z) = Tr (M - z)^{-1} = sum_j 1/(lambda_j - z).
inline Complex resolvent_trace(std::span<const double> eigs, Complex z) {
  require_off_axis(z, "resolvent_trace");
  Complex sum = 0.0;
  for (double l : eigs) sum += 1.0 / (l - z);
  return sum;
}

inline Complex resolvent_trace(const SpectralSample& sample, Complex z) {
  return resolvent_trace(sample.eigenvalues, z);
}

struct RankOneCheck {
  Complex direct;   ///< gamma_n - gamma_n^alpha from the two spectra
  Complex formula;  ///< -B/A
  Complex a;        ///< 1 + tau (G^alpha y, y)
  Complex b;        ///< tau ((G^alpha)^2 y, y)
  bool ratio_bounded = true;  ///< |B/A| <= 1/|Im z|
};

/// Compares the trace change on removing tau y y^T from M computed from
/// spectra with the rank-one formula -B/A, where A and B come from a linear
/// solve against M - tau y y^T - z.
inline RankOneCheck rank_one_resolvent_check(const Eigen::MatrixXd& m, double tau,
                                             const Eigen::VectorXd& y, Complex z) {
  require_off_axis(z, "rank_one_resolvent_check");
  require(m.rows() == m.cols() && m.rows() == y.size(), "rank_one_resolvent_check: size mismatch");
  const Eigen::MatrixXd reduced = m - tau * y * y.transpose();
  const Eigen::VectorXd full_eigs = eigenvalues(m).values;
  const Eigen::VectorXd reduced_eigs = eigenvalues(reduced).values;

  RankOneCheck out;
  out.direct = resolvent_trace(std::span<const double>(full_eigs.data(), full_eigs.size()), z) -
               resolvent_trace(std::span<const double>(reduced_eigs.data(), reduced_eigs.size()), z);

  Eigen::MatrixXcd shifted = reduced.cast<Complex>();
  shifted.diagonal().array() -= z;
  const Eigen::VectorXcd yc = y.cast<Complex>();
  const Eigen::VectorXcd gy = shifted.partialPivLu().solve(yc);
  // G^alpha is complex symmetric, so ((G^alpha)^2 y, y) = (G^alpha y)^T (G^alpha y).
  out.a = 1.0 + tau * (yc.transpose() * gy).value();
  out.b = tau * (gy.transpose() * gy).value();
  out.formula = -out.b / out.a;
  out.ratio_bounded = std::abs(out.b / out.a) <= (1.0 + 1e-12) / std::abs(z.imag());
  return out;
}

/// n^{-1} sum_j G_jj(z1) G_jj(z2) with G_jj(z) = sum_k V_jk^2 / (lambda_k - z).
inline Complex g_diag(const Spectrum& spectrum, Complex z1, Complex z2) {
  require_off_axis(z1, "g_diag");
  require_off_axis(z2, "g_diag");
  require(spectrum.vectors.has_value(), "g_diag: eigenvectors required");
  const Eigen::MatrixXd& v = *spectrum.vectors;
  const Eigen::Index n = v.rows();
  Eigen::VectorXcd w1(n), w2(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    w1[k] = 1.0 / (spectrum.values[k] - z1);
    w2[k] = 1.0 / (spectrum.values[k] - z2);
  }
  const Eigen::MatrixXd sq = v.array().square().matrix();
  const Eigen::VectorXcd g1 = sq.cast<Complex>() * w1;
  const Eigen::VectorXcd g2 = sq.cast<Complex>() * w2;
  return (g1.array() * g2.array()).sum() / static_cast<double>(n);
}

inline Complex g_diag(const Eigen::MatrixXd& m, Complex z1, Complex z2) {
  return g_diag(eigenvalues(m, true), z1, z2);
}

/// Comment lines "# key: value" for n, m, seed, law and tau, then an
/// "eigenvalue" header and one value per row.
inline void write_csv(std::ostream& os, const SpectralSample& s) {
  os << "# n: " << s.n << "\n# m: " << s.m << "\n# seed: " << s.seed << "\n# law: " << s.law
     << "\n# tau: " << s.tau << "\neigenvalue\n";
  const auto old = os.precision(17);
  for (double l : s.eigenvalues) os << l << "\n";
  os.precision(old);
}

inline SpectralSample read_csv(std::istream& is) {
  SpectralSample s;
  std::string line;
  bool header_seen = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      const auto colon = line.find(": ");
      require(colon != std::string::npos, "spectral csv: malformed metadata line");
      const std::string key = line.substr(2, colon - 2), value = line.substr(colon + 2);
      if (key == "n") s.n = std::stoull(value);
      else if (key == "m") s.m = std::stoull(value);
      else if (key == "seed") s.seed = std::stoull(value);
      else if (key == "law") s.law = value;
      else if (key == "tau") s.tau = value;
      continue;
    }
    if (!header_seen) {
      require(line == "eigenvalue", "spectral csv: expected 'eigenvalue' header");
      header_seen = true;
      continue;
    }
    s.eigenvalues.push_back(std::stod(line));
  }
  require(s.eigenvalues.size() == s.n, "spectral csv: row count does not match n");
  return s;
}

}  // namespace rmtlab

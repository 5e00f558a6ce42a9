#pragma once

// Isotropic random vectors in R^n and their exact fourth-moment structure.

#include <cmath>
#include <cstddef>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>

#include <Eigen/Dense>
#include <boost/math/special_functions/gamma.hpp>

#include "rmtlab/errors.hpp"

namespace rmtlab {

enum class BaseLaw { gaussian, rademacher, uniform };

/// y = x / sqrt(n), x with i.i.d. symmetric unit-variance components.
struct IidScaled {
  BaseLaw base;
};

/// Uniform on the unit Euclidean sphere.
struct Sphere {};

/// Uniform on the unit l_p ball, rescaled to be isotropic.
struct LpBall {
  double p;
};

class VectorLaw {
 public:
  using Kind = std::variant<IidScaled, Sphere, LpBall>;

  static VectorLaw iid(BaseLaw base) { return VectorLaw(IidScaled{base}); }
  static VectorLaw sphere() { return VectorLaw(Sphere{}); }
  static VectorLaw lp_ball(double p) {
    require(std::isfinite(p) && p > 0.0, "lpball: p must be finite and > 0");
    return VectorLaw(LpBall{p});
  }

  /// Grammar: iid:gaussian | iid:rademacher | iid:uniform | sphere | lpball:<p>
  static VectorLaw parse(std::string_view spec) {
    if (spec == "iid:gaussian") return iid(BaseLaw::gaussian);
    if (spec == "iid:rademacher") return iid(BaseLaw::rademacher);
    if (spec == "iid:uniform") return iid(BaseLaw::uniform);
    if (spec == "sphere") return sphere();
    constexpr std::string_view lp = "lpball:";
    if (spec.substr(0, lp.size()) == lp) {
      const std::string tail(spec.substr(lp.size()));
      std::size_t used = 0;
      double p = 0.0;
      try {
        p = std::stod(tail, &used);
      } catch (const std::exception&) {
        throw UsageError("malformed law spec: " + std::string(spec));
      }
      require(used == tail.size(), "malformed law spec: " + std::string(spec));
      return lp_ball(p);
    }
    throw UsageError("unknown law spec: " + std::string(spec));
  }

  std::string to_string() const {
    struct Visitor {
      std::string operator()(const IidScaled& k) const {
        switch (k.base) {
          case BaseLaw::gaussian: return "iid:gaussian";
          case BaseLaw::rademacher: return "iid:rademacher";
          case BaseLaw::uniform: return "iid:uniform";
        }
        return "iid:?";
      }
      std::string operator()(const Sphere&) const { return "sphere"; }
      std::string operator()(const LpBall& k) const {
        std::ostringstream os;
        os.precision(17);
        os << "lpball:" << k.p;
        return os.str();
      }
    };
    return std::visit(Visitor{}, kind_);
  }

  const Kind& kind() const noexcept { return kind_; }

 private:
  explicit VectorLaw(Kind kind) : kind_(kind) {}
  Kind kind_;
};

/// Factor turning a uniform point of B_p^n into an isotropic vector:
/// (B(1/p, 2/p) / (n B(n/p + 1, 2/p)))^{1/2}, evaluated in log space.
inline double isotropy_scale_lp(std::size_t n, double p) {
  require(n >= 1, "isotropy_scale_lp: n must be >= 1");
  require(std::isfinite(p) && p > 0.0, "isotropy_scale_lp: p must be finite and > 0");
  const auto lbeta = [](double x, double y) {
    return std::lgamma(x) + std::lgamma(y) - std::lgamma(x + y);
  };
  const double dn = static_cast<double>(n);
  const double log_sq = lbeta(1.0 / p, 2.0 / p) - std::log(dn) - lbeta(dn / p + 1.0, 2.0 / p);
  const double scale = std::exp(0.5 * log_sq);
  if (!std::isfinite(scale) || scale <= 0.0) {
    throw UsageError("isotropy_scale_lp: non-finite scale");
  }
  return scale;
}

/// Writes one draw of y into `out` (length n).
template <class Urbg>
void sample_vector_into(const VectorLaw& law, Eigen::Ref<Eigen::VectorXd> out, Urbg& rng) {
  const auto n = static_cast<std::size_t>(out.size());
  require(n >= 1, "sample_vector: n must be >= 1");
  const double dn = static_cast<double>(n);

  if (const auto* iid = std::get_if<IidScaled>(&law.kind())) {
    const double inv_sqrt_n = 1.0 / std::sqrt(dn);
    switch (iid->base) {
      case BaseLaw::gaussian: {
        std::normal_distribution<double> normal;
        for (auto& v : out) v = normal(rng) * inv_sqrt_n;
        break;
      }
      case BaseLaw::rademacher: {
        std::bernoulli_distribution coin;
        for (auto& v : out) v = coin(rng) ? inv_sqrt_n : -inv_sqrt_n;
        break;
      }
      case BaseLaw::uniform: {
        const double edge = std::sqrt(3.0);
        std::uniform_real_distribution<double> unif(-edge, edge);
        for (auto& v : out) v = unif(rng) * inv_sqrt_n;
        break;
      }
    }
    return;
  }

  if (std::holds_alternative<Sphere>(law.kind())) {
    std::normal_distribution<double> normal;
    double norm = 0.0;
    do {
      for (auto& v : out) v = normal(rng);
      norm = out.norm();
    } while (norm == 0.0);
    out /= norm;
    return;
  }

  // l_p ball: |g_j|^p = W_j ~ Gamma(1/p), T = sum W_j + Exp(1),
  // x_j = sign_j (W_j / T)^{1/p} is uniform on B_p^n.
  const double p = std::get<LpBall>(law.kind()).p;
  std::gamma_distribution<double> gamma(1.0 / p, 1.0);
  std::exponential_distribution<double> expo(1.0);
  std::bernoulli_distribution coin;
  double total = 0.0;
  for (auto& v : out) {
    v = gamma(rng);
    total += v;
  }
  total += expo(rng);
  const double log_total = std::log(total);
  const double scale = isotropy_scale_lp(n, p);
  for (auto& v : out) {
    const double magnitude = v > 0.0 ? std::exp((std::log(v) - log_total) / p) : 0.0;
    v = (coin(rng) ? scale : -scale) * magnitude;
  }
}

template <class Urbg>
Eigen::VectorXd sample_vector(const VectorLaw& law, std::size_t n, Urbg& rng) {
  require(n >= 1, "sample_vector: n must be >= 1");
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  sample_vector_into(law, y, rng);
  return y;
}

/// Exact mixed fourth moments of a law at finite n together with the
/// n-independent coefficients a (of n^-3 in a22) and b (of n^-2 in kappa4).
class MomentProfile {
 public:
  explicit MomentProfile(VectorLaw law) : law_(law) {
    if (const auto* iid = std::get_if<IidScaled>(&law_.kind())) {
      a_ = 0.0;
      b_ = base_fourth_moment(iid->base) - 3.0;
    } else if (std::holds_alternative<Sphere>(law_.kind())) {
      a_ = -2.0;
      b_ = 0.0;
    } else {
      const double p = std::get<LpBall>(law_.kind()).p;
      a_ = -4.0 / p;
      b_ = lp_kurtosis_ratio(p) - 3.0;
    }
  }

  double a() const noexcept { return a_; }
  double b() const noexcept { return b_; }
  const VectorLaw& law() const noexcept { return law_; }

  /// E{y_j^2 y_k^2}, j != k.
  double a22(std::size_t n) const {
    const double dn = static_cast<double>(n);
    if (std::holds_alternative<IidScaled>(law_.kind())) return 1.0 / (dn * dn);
    if (std::holds_alternative<Sphere>(law_.kind())) return 1.0 / (dn * (dn + 2.0));
    return lp_ratio(n) / (dn * dn);
  }

  /// E{y_j^4} - 3 a22.
  double kappa4(std::size_t n) const {
    const double dn = static_cast<double>(n);
    if (const auto* iid = std::get_if<IidScaled>(&law_.kind())) {
      return (base_fourth_moment(iid->base) - 3.0) / (dn * dn);
    }
    if (std::holds_alternative<Sphere>(law_.kind())) return 0.0;
    return b_ * lp_ratio(n) / (dn * dn);
  }

  /// n^3 (a22(n) - n^-2), computed without cancellation.
  double a_at(std::size_t n) const {
    const double dn = static_cast<double>(n);
    if (std::holds_alternative<IidScaled>(law_.kind())) return 0.0;
    if (std::holds_alternative<Sphere>(law_.kind())) return -2.0 * dn / (dn + 2.0);
    return dn * std::expm1(lp_log_ratio(n));
  }

  /// n^2 kappa4(n).
  double b_at(std::size_t n) const {
    const double dn = static_cast<double>(n);
    return dn * dn * kappa4(n);
  }

  static double base_fourth_moment(BaseLaw base) {
    switch (base) {
      case BaseLaw::gaussian: return 3.0;
      case BaseLaw::rademacher: return 1.0;
      case BaseLaw::uniform: return 9.0 / 5.0;
    }
    return 3.0;
  }

  /// Gamma(1/p) Gamma(5/p) / Gamma(3/p)^2.
  static double lp_kurtosis_ratio(double p) {
    return std::exp(std::lgamma(1.0 / p) + std::lgamma(5.0 / p) - 2.0 * std::lgamma(3.0 / p));
  }

 private:
  // Dirichlet moments of (|x_j|^p / T): a22 = R(n)/n^2 with
  // R = Gamma(N+h)^2 / (Gamma(N) Gamma(N+2h)), N = n/p + 1, h = 2/p.
  double lp_log_ratio(std::size_t n) const {
    const double p = std::get<LpBall>(law_.kind()).p;
    const double big_n = static_cast<double>(n) / p + 1.0;
    const double h = 2.0 / p;
    // ratios of nearby Gammas, so no large lgamma values cancel
    using boost::math::tgamma_delta_ratio;
    return std::log(tgamma_delta_ratio(big_n + h, h)) - std::log(tgamma_delta_ratio(big_n, h));
  }
  double lp_ratio(std::size_t n) const { return std::exp(lp_log_ratio(n)); }

  VectorLaw law_;
  double a_ = 0.0;
  double b_ = 0.0;
};

inline MomentProfile moment_profile(const VectorLaw& law) { return MomentProfile(law); }

struct MomentEstimate {
  double a22 = 0.0;
  double a22_se = 0.0;
  double kappa4 = 0.0;
  double kappa4_se = 0.0;
};

/// Monte-Carlo estimate of a22 (pooled over all j != k pairs) and kappa4
/// from R independent draws, with standard errors across draws.
template <class Urbg>
MomentEstimate estimate_moments(const VectorLaw& law, std::size_t n, std::size_t replicates,
                                Urbg& rng) {
  require(replicates >= 2, "estimate_moments: R must be >= 2");
  require(n >= 2, "estimate_moments: n must be >= 2 to form pairs");
  const double dn = static_cast<double>(n);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));

  double sum_pair = 0.0, sum_pair_sq = 0.0, sum_kappa = 0.0, sum_kappa_sq = 0.0;
  for (std::size_t r = 0; r < replicates; ++r) {
    sample_vector_into(law, y, rng);
    const double s2 = y.squaredNorm();
    const double s4 = y.array().square().square().sum();
    const double pair = (s2 * s2 - s4) / (dn * (dn - 1.0));
    const double kappa = s4 / dn - 3.0 * pair;
    sum_pair += pair;
    sum_pair_sq += pair * pair;
    sum_kappa += kappa;
    sum_kappa_sq += kappa * kappa;
  }
  const double rr = static_cast<double>(replicates);
  const auto se = [rr](double s, double sq) {
    const double mean = s / rr;
    const double var = std::max(0.0, (sq - rr * mean * mean) / (rr - 1.0));
    return std::sqrt(var / rr);
  };
  return {sum_pair / rr, se(sum_pair, sum_pair_sq), sum_kappa / rr, se(sum_kappa, sum_kappa_sq)};
}

/// Var{(A y, y)} for symmetric A from the fourth-moment structure:
/// (a22 - n^-2)|Tr A|^2 + 2 a22 Tr(A A^*) + kappa4 sum_j |A_jj|^2.
template <class Derived>
double quadratic_form_variance(const Eigen::MatrixBase<Derived>& A, const MomentProfile& profile,
                               std::size_t n) {
  require(A.rows() == A.cols(), "quadratic_form_variance: matrix must be square");
  require(static_cast<std::size_t>(A.rows()) == n,
          "quadratic_form_variance: matrix size does not match n");
  const double dn = static_cast<double>(n);
  const double a22 = profile.a22(n);
  const double a22_excess = profile.a_at(n) / (dn * dn * dn);
  const double kappa4 = profile.kappa4(n);
  const double trace_abs_sq = std::norm(Complex(A.trace()));
  const double frob_sq = A.squaredNorm();
  const double diag_sq = A.diagonal().squaredNorm();
  return a22_excess * trace_abs_sq + 2.0 * a22 * frob_sq + kappa4 * diag_sq;
}

}  // namespace rmtlab

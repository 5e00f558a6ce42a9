// rmtlab: spectra, linear-statistic CLT and variance functionals from the command line.
//
//   rmtlab density  --sigma 1:0.5,2:0.5 --c 0.5 --format csv
//   rmtlab clt      --law iid:gaussian --sigma 1:1 --c 1 --n 512 --R 800 --phi poly:0,1
//   rmtlab cov      --z1 0,1 --z2 1,1
//   rmtlab moments  --law lpball:1 --R 100000
//   rmtlab variance --phi exp:1 [--eta 0.05]
//   rmtlab norm     --phi bump:1,0.5 --delta 0.5
//
// Exit status: 0 ok, 1 usage error, 2 numerical convergence failure.

#include <Eigen/Core>
#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include "rmtlab/rmtlab.hpp"

namespace {

using namespace rmtlab;
using nlohmann::json;

json meta(const RunConfig& cfg) {
  std::ostringstream eigen;
  eigen << EIGEN_WORLD_VERSION << "." << EIGEN_MAJOR_VERSION << "." << EIGEN_MINOR_VERSION;
  return {{"config", to_json(cfg)},
          {"versions", {{"rmtlab", std::string(version)}, {"eigen", eigen.str()}, {"json", "nlohmann 3"}}}};
}

ExperimentConfig experiment(const RunConfig& cfg) {
  ExperimentConfig e{cfg.vector_law(), cfg.sigma_measure(), cfg.n, cfg.count(), cfg.replicates, cfg.seed,
                     cfg.jobs};
  e.validate();
  return e;
}

// Writes either CSV text or a JSON report with the meta block attached.
struct Output {
  std::string csv;
  json report;
};

Output density_cmd(const RunConfig& cfg) {
  const auto sigma = cfg.sigma_measure();
  const auto [lo, hi] = support_bounds(sigma);
  constexpr std::size_t points = 401;
  std::vector<double> xs(points), rho(points);
  const auto single = sigma.single_atom();
  std::size_t fallback = 0;
  for (std::size_t i = 0; i < points; ++i) {
    xs[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    if (single && *single > 0.0) {
      rho[i] = mp_density_closed(xs[i] / *single, sigma.c()) / *single;
    } else if (single) {
      rho[i] = 0.0;
    } else {
      try {
        rho[i] = density(xs[i], sigma).value;
      } catch (const ConvergenceError&) {
        // near an edge the eta ladder does not extrapolate; fall back to one small eta
        const double eta = 1e-3 * std::max(1.0, hi - lo);
        const double atom = atom_at_zero(sigma);
        rho[i] = std::max(0.0, solve_f(Complex(xs[i], eta), sigma).f.imag() / std::numbers::pi -
                                   atom * eta / (std::numbers::pi * (xs[i] * xs[i] + eta * eta)));
        ++fallback;
      }
    }
  }
  Output out;
  if (cfg.format == "csv") {
    std::ostringstream os;
    io::write_curve_csv(os, "lambda", "rho", xs, rho);
    out.csv = os.str();
  } else {
    out.report = {{"lambda", xs}, {"rho", rho}, {"atom_at_zero", LimitCdf(sigma).atom_at_zero()},
                  {"fallback_points", fallback}};
  }
  return out;
}

Output spectrum_cmd(const RunConfig& cfg) {
  const auto report = run_esd(experiment(cfg));
  Output out;
  if (cfg.format == "csv") {
    std::ostringstream os;
    io::write_histogram_csv(os, report);
    out.csv = os.str();
  } else {
    out.report = io::to_json(report);
  }
  return out;
}

Output clt_cmd(const RunConfig& cfg) {
  const std::vector<TestFunction> phis{cfg.test_function()};
  const auto reports = run_clt(experiment(cfg), phis, cfg.format == "json");
  Output out;
  if (cfg.format == "csv") {
    std::ostringstream os;
    io::write_replicates_csv(os, reports);
    out.csv = os.str();
  } else {
    out.report = io::to_json(reports.front());
  }
  return out;
}

Output cov_cmd(const RunConfig& cfg) {
  const std::vector<ZPair> pairs{{parse_complex(cfg.z1), parse_complex(cfg.z2)}};
  return {{}, io::to_json(run_cov(experiment(cfg), pairs).front())};
}

Output moments_cmd(const RunConfig& cfg) {
  require(cfg.replicates >= 10000, "moments: R must be >= 10000");
  const std::vector<std::size_t> ladder{16, 64, 256};
  return {{}, io::to_json(run_moment_check(cfg.vector_law(), ladder, cfg.replicates, cfg.seed, cfg.jobs))};
}

Output variance_cmd(const RunConfig& cfg) {
  const auto sigma = cfg.sigma_measure();
  const auto phi = cfg.test_function();
  const auto profile = moment_profile(cfg.vector_law());
  json report;
  if (cfg.eta) {
    const auto v = variance_eta(phi, *cfg.eta, sigma, profile.a(), profile.b());
    report = {{"eta", v.eta},         {"V_eta", v.value},          {"points", v.points},
              {"refinement_change", v.refinement_change}, {"max_abs_kernel", v.max_abs_kernel}};
  } else {
    report = io::to_json(variance_limit(phi, sigma, profile.a(), profile.b()));
  }
  report["a"] = profile.a();
  report["b"] = profile.b();
  if (sigma.single_atom() == 1.0 && sigma.c() > 0.0) {
    report["closed_form"] = variance_mp_closed(phi, sigma.c(), profile.a(), profile.b());
  }
  return {{}, report};
}

Output norm_cmd(const RunConfig& cfg) {
  const double s = 2.0 + cfg.delta;
  return {{}, {{"phi", cfg.phi}, {"s", s}, {"norm", sobolev_norm(cfg.test_function(), s)}}};
}

Output dispatch(const RunConfig& cfg) {
  if (cfg.command == "density") return density_cmd(cfg);
  if (cfg.command == "spectrum") return spectrum_cmd(cfg);
  if (cfg.command == "clt") return clt_cmd(cfg);
  if (cfg.command == "cov") return cov_cmd(cfg);
  if (cfg.command == "moments") return moments_cmd(cfg);
  if (cfg.command == "variance") return variance_cmd(cfg);
  if (cfg.command == "norm") return norm_cmd(cfg);
  throw UsageError("unknown command: " + cfg.command);
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw UsageError("cannot write " + path);
  os << text;
}

}  // namespace

int main(int argc, char** argv) {
  const auto start = std::chrono::steady_clock::now();
  try {
    const auto cfg = parse_config(std::vector<std::string>(argv + 1, argv + argc));
    const Output out = dispatch(cfg);
    if (cfg.format == "csv" && !out.csv.empty()) {
      emit(cfg.out, out.csv);
      // CSV has no room for the meta block, so it goes next to the file
      if (!cfg.out.empty()) emit(cfg.out + ".meta.json", meta(cfg).dump(2) + "\n");
    } else {
      json doc = out.report;
      doc["meta"] = meta(cfg);
      emit(cfg.out, doc.dump(2) + "\n");
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cerr << "rmtlab " << cfg.command << ": wall time " << secs << " s\n";
    return 0;
  } catch (const CLI::CallForHelp&) {
    std::cout << "usage: rmtlab <density|spectrum|clt|cov|moments|variance|norm> [--law L] [--sigma S]\n"
                 "       [--c C] [--n N] [--m M] [--R R] [--seed S] [--phi F] [--eta E] [--z1 Z]\n"
                 "       [--z2 Z] [--delta D] [--out PATH] [--format json|csv] [--jobs J] [--config FILE]\n";
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "rmtlab: " << e.what() << "\n";
    return 1;
  } catch (const ConvergenceError& e) {
    std::cerr << "rmtlab: " << e.what() << " (last residual " << e.last_residual() << ")\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "rmtlab: " << e.what() << "\n";
    return 2;
  }
}

#pragma once

// Run configuration for the command-line tool: JSON file, flags on top.

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rmtlab/ensemble.hpp"
#include "rmtlab/errors.hpp"
#include "rmtlab/test_function.hpp"
#include "rmtlab/vectors.hpp"

namespace rmtlab {

inline constexpr std::string_view version = "0.1.0";

inline const std::vector<std::string>& known_commands() {
  static const std::vector<std::string> commands{"density", "spectrum", "clt", "cov",
                                                 "moments", "variance", "norm"};
  return commands;
}

/// "a+bi", "a-bi", "bi", "a" or "re,im".
inline Complex parse_complex(std::string_view text) {
  const std::string s(text);
  const auto fail = [&] { return UsageError("malformed complex number: " + s); };
  const auto to_double = [&](const std::string& part) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(part, &used);
    } catch (const std::exception&) {
      throw fail();
    }
    if (used != part.size()) throw fail();
    return v;
  };
  if (s.empty()) throw fail();
  if (const auto comma = s.find(','); comma != std::string::npos) {
    return {to_double(s.substr(0, comma)), to_double(s.substr(comma + 1))};
  }
  if (s.back() != 'i') return {to_double(s), 0.0};
  const std::string body = s.substr(0, s.size() - 1);
  // split at the last sign that is not an exponent sign or the leading sign
  std::size_t split = std::string::npos;
  for (std::size_t i = body.size(); i-- > 1;) {
    if ((body[i] == '+' || body[i] == '-') && body[i - 1] != 'e' && body[i - 1] != 'E') {
      split = i;
      break;
    }
  }
  const auto imag_part = [&](const std::string& t) {
    if (t.empty() || t == "+") return 1.0;
    if (t == "-") return -1.0;
    return to_double(t);
  };
  if (split == std::string::npos) return {0.0, imag_part(body)};
  return {to_double(body.substr(0, split)), imag_part(body.substr(split))};
}

inline std::string format_complex(Complex z) {
  std::ostringstream os;
  os.precision(17);
  os << z.real() << "," << z.imag();
  return os.str();
}

struct RunConfig {
  std::string command;
  std::string law = "iid:gaussian";
  std::string sigma = "1:1";
  std::optional<double> c;
  std::size_t n = 512;
  std::optional<std::size_t> m;
  std::size_t replicates = 800;
  std::uint64_t seed = 42;
  std::string phi = "poly:0,1";
  std::optional<double> eta;
  std::string z1 = "0,1";
  std::string z2 = "0,2";
  double delta = 0.5;
  std::string out;  ///< empty: stdout
  std::string format = "json";
  unsigned jobs = 1;

  double ratio() const {
    if (c) return *c;
    if (m) return static_cast<double>(*m) / static_cast<double>(n);
    return 1.0;
  }
  std::size_t count() const {
    if (m) return *m;
    return static_cast<std::size_t>(std::max(1.0, std::round(ratio() * static_cast<double>(n))));
  }

  VectorLaw vector_law() const { return VectorLaw::parse(law); }
  SigmaMeasure sigma_measure() const { return SigmaMeasure::parse(sigma, ratio()); }
  TestFunction test_function() const { return TestFunction::parse(phi); }

  /// Parses every field; throws UsageError on the first problem.
  void validate() const {
    bool known = false;
    for (const auto& k : known_commands()) known = known || k == command;
    require(known, "unknown command: " + command);
    (void)vector_law();
    (void)sigma_measure();
    (void)test_function();
    (void)parse_complex(z1);
    (void)parse_complex(z2);
    require(n >= 1, "n must be >= 1");
    require(!m || *m >= 1, "m must be >= 1");
    require(!c || (std::isfinite(*c) && *c >= 0.0), "c must be >= 0");
    require(replicates >= 2, "R must be >= 2");
    require(!eta || (std::isfinite(*eta) && *eta > 0.0), "eta must be > 0");
    require(std::isfinite(delta) && delta > 0.0, "delta must be > 0");
    require(format == "json" || format == "csv", "format must be json or csv");
    if (c && m) {
      const double dn = static_cast<double>(n);
      require(std::abs(static_cast<double>(*m) / dn - *c) <= std::max(0.2 * *c, 1.0 / dn),
              "conflicting n, m and c");
    }
  }
};

inline nlohmann::json to_json(const RunConfig& cfg) {
  nlohmann::json j{{"command", cfg.command}, {"law", cfg.law},     {"sigma", cfg.sigma},
                   {"n", cfg.n},             {"R", cfg.replicates}, {"seed", cfg.seed},
                   {"phi", cfg.phi},         {"z1", cfg.z1},       {"z2", cfg.z2},
                   {"delta", cfg.delta},     {"out", cfg.out},     {"format", cfg.format},
                   {"jobs", cfg.jobs}};
  j["c"] = cfg.c ? nlohmann::json(*cfg.c) : nlohmann::json(nullptr);
  j["m"] = cfg.m ? nlohmann::json(*cfg.m) : nlohmann::json(nullptr);
  j["eta"] = cfg.eta ? nlohmann::json(*cfg.eta) : nlohmann::json(nullptr);
  return j;
}

/// Fields present in `j` replace those in `base`; unknown keys are errors.
inline RunConfig merge_json(RunConfig base, const nlohmann::json& j) {
  require(j.is_object(), "config: expected a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "command") base.command = value.get<std::string>();
      else if (key == "law") base.law = value.get<std::string>();
      else if (key == "sigma") base.sigma = value.get<std::string>();
      else if (key == "c") base.c = value.is_null() ? std::nullopt : std::optional(value.get<double>());
      else if (key == "n") base.n = value.get<std::size_t>();
      else if (key == "m")
        base.m = value.is_null() ? std::nullopt : std::optional(value.get<std::size_t>());
      else if (key == "R") base.replicates = value.get<std::size_t>();
      else if (key == "seed") base.seed = value.get<std::uint64_t>();
      else if (key == "phi") base.phi = value.get<std::string>();
      else if (key == "eta")
        base.eta = value.is_null() ? std::nullopt : std::optional(value.get<double>());
      else if (key == "z1") base.z1 = value.get<std::string>();
      else if (key == "z2") base.z2 = value.get<std::string>();
      else if (key == "delta") base.delta = value.get<double>();
      else if (key == "out") base.out = value.get<std::string>();
      else if (key == "format") base.format = value.get<std::string>();
      else if (key == "jobs") base.jobs = value.get<unsigned>();
      else throw UsageError("config: unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  return base;
}

inline RunConfig from_json(const nlohmann::json& j) { return merge_json(RunConfig{}, j); }

/// Defaults, then RMTLAB_SEED, then the --config file, then flags.
inline RunConfig parse_config(std::vector<std::string> args) {
  RunConfig cfg;
  if (const char* env = std::getenv("RMTLAB_SEED")) {
    try {
      std::size_t used = 0;
      cfg.seed = std::stoull(env, &used);
      require(used == std::string(env).size(), "");
    } catch (const std::exception&) {
      throw UsageError("RMTLAB_SEED must be an unsigned integer");
    }
  }

  CLI::App app{"rmtlab"};
  std::string command, config_path;
  std::string law, sigma, phi, z1, z2, out, format;
  double c = 0, eta = 0, delta = 0;
  std::size_t n = 0, m = 0, replicates = 0;
  std::uint64_t seed = 0;
  unsigned jobs = 0;
  app.add_option("command", command, "density | spectrum | clt | cov | moments | variance | norm");
  app.add_option("--config", config_path, "JSON config file");
  auto* o_law = app.add_option("--law", law);
  auto* o_sigma = app.add_option("--sigma", sigma, "tau:weight,...");
  auto* o_c = app.add_option("--c", c);
  auto* o_n = app.add_option("--n", n);
  auto* o_m = app.add_option("--m", m);
  auto* o_r = app.add_option("--R", replicates);
  auto* o_seed = app.add_option("--seed", seed);
  auto* o_phi = app.add_option("--phi", phi, "poly:c0,c1,... | exp:t | bump:center,width");
  auto* o_eta = app.add_option("--eta", eta);
  auto* o_z1 = app.add_option("--z1", z1);
  auto* o_z2 = app.add_option("--z2", z2);
  auto* o_delta = app.add_option("--delta", delta);
  auto* o_out = app.add_option("--out", out);
  auto* o_format = app.add_option("--format", format);
  auto* o_jobs = app.add_option("--jobs", jobs);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    throw;
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  if (!config_path.empty()) {
    std::ifstream in(config_path);
    require(static_cast<bool>(in), "cannot read config file: " + config_path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw UsageError("config: " + std::string(e.what()));
    }
    cfg = merge_json(cfg, j);
  }

  if (!command.empty()) cfg.command = command;
  if (*o_law) cfg.law = law;
  if (*o_sigma) cfg.sigma = sigma;
  if (*o_c) cfg.c = c;
  if (*o_n) cfg.n = n;
  if (*o_m) cfg.m = m;
  if (*o_r) cfg.replicates = replicates;
  if (*o_seed) cfg.seed = seed;
  if (*o_phi) cfg.phi = phi;
  if (*o_eta) cfg.eta = eta;
  if (*o_z1) cfg.z1 = z1;
  if (*o_z2) cfg.z2 = z2;
  if (*o_delta) cfg.delta = delta;
  if (*o_out) cfg.out = out;
  if (*o_format) cfg.format = format;
  if (*o_jobs) cfg.jobs = jobs;
  cfg.validate();
  return cfg;
}

}  // namespace rmtlab

#pragma once

// JSON reports and CSV curves.

#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rmtlab/montecarlo.hpp"
#include "rmtlab/variance.hpp"

namespace rmtlab::io {

using nlohmann::json;

inline json to_json(Complex z) { return json{{"re", z.real()}, {"im", z.imag()}}; }

inline json to_json(const VarianceReport& r) {
  json levels = json::array();
  for (const auto& l : r.levels) {
    levels.push_back({{"eta", l.eta},
                      {"value", l.value},
                      {"points", l.points},
                      {"refinement_change", l.refinement_change},
                      {"max_abs_kernel", l.max_abs_kernel},
                      {"coincident_pairs", l.coincident_pairs},
                      {"lo", l.lo},
                      {"hi", l.hi}});
  }
  return {{"V", r.value},
          {"V_eta", levels},
          {"extrapolation_change", r.extrapolation_change},
          {"converged", r.converged},
          {"grid",
           {{"points", r.grid.points},
            {"margin", r.grid.margin},
            {"refine_tolerance", r.grid.refine_tolerance},
            {"max_points", r.grid.max_points}}}};
}

inline json to_json(const CltReport& r, bool with_values = false) {
  json j{{"phi", r.phi},
         {"replicates", r.replicates},
         {"sample_mean", r.sample_mean},
         {"sample_variance", r.sample_variance},
         {"sample_variance_se", r.variance_se},
         {"predicted_variance", r.predicted_variance ? json(*r.predicted_variance) : json(nullptr)},
         {"skewness", r.skewness},
         {"excess_kurtosis", r.excess_kurtosis},
         {"ks_statistic", r.ks_statistic},
         {"ks_pvalue", r.ks_pvalue}};
  if (with_values) j["values"] = r.values;
  return j;
}

inline json to_json(const CovReport& r) {
  return {{"z1", to_json(r.z1)},
          {"z2", to_json(r.z2)},
          {"empirical", to_json(r.empirical)},
          {"predicted", to_json(r.predicted)},
          {"difference", to_json(r.empirical - r.predicted)},
          {"se", {{"re", r.se_re}, {"im", r.se_im}}},
          {"psd_ok", r.psd_ok}};
}

inline json to_json(const MomentReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"n", row.n},
                    {"a22", row.estimate.a22},
                    {"a22_se", row.estimate.a22_se},
                    {"a22_exact", row.a22_exact},
                    {"kappa4", row.estimate.kappa4},
                    {"kappa4_se", row.estimate.kappa4_se},
                    {"kappa4_exact", row.kappa4_exact},
                    {"a_hat", row.a_hat},
                    {"a_se", row.a_se},
                    {"a_exact", row.a_exact},
                    {"b_hat", row.b_hat},
                    {"b_se", row.b_se},
                    {"b_exact", row.b_exact}});
  }
  return {{"law", r.law}, {"replicates", r.replicates}, {"a", r.a_limit}, {"b", r.b_limit},
          {"ladder", rows}};
}

inline json to_json(const EsdReport& r) {
  return {{"ks", r.ks},
          {"atom_at_zero", r.atom},
          {"empirical_zero_fraction", r.empirical_zero},
          {"pooled", r.pooled},
          {"histogram",
           {{"edges", r.histogram.edges}, {"mass", r.histogram.mass}, {"limit_density", r.limit_density}}}};
}

inline void write_curve_csv(std::ostream& os, const std::string& x_name, const std::string& y_name,
                            std::span<const double> xs, std::span<const double> ys) {
  const auto old = os.precision(17);
  os << x_name << "," << y_name << "\n";
  for (std::size_t i = 0; i < xs.size(); ++i) os << xs[i] << "," << ys[i] << "\n";
  os.precision(old);
}

/// One row per replicate, one column per phi.
inline void write_replicates_csv(std::ostream& os, std::span<const CltReport> reports) {
  const auto old = os.precision(17);
  os << "replicate";
  for (const auto& r : reports) os << "," << r.phi;
  os << "\n";
  const std::size_t rows = reports.empty() ? 0 : reports.front().values.size();
  for (std::size_t i = 0; i < rows; ++i) {
    os << i;
    for (const auto& r : reports) os << "," << r.values[i];
    os << "\n";
  }
  os.precision(old);
}

/// Bin edges, empirical mass per unit length and the limit density at the midpoint.
inline void write_histogram_csv(std::ostream& os, const EsdReport& r) {
  const auto old = os.precision(17);
  os << "lo,hi,empirical_density,limit_density\n";
  for (std::size_t i = 0; i < r.histogram.mass.size(); ++i) {
    const double lo = r.histogram.edges[i], hi = r.histogram.edges[i + 1];
    os << lo << "," << hi << "," << r.histogram.mass[i] / (hi - lo) << "," << r.limit_density[i] << "\n";
  }
  os.precision(old);
}

}  // namespace rmtlab::io

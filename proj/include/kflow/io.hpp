#pragma once

// CSV traces and JSON documents. Floating values are rounded to twelve
// significant digits so identical runs serialize identically.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "kflow/errors.hpp"
#include "kflow/experiments.hpp"
#include "kflow/spectral.hpp"
#include "kflow/trace.hpp"

namespace kflow {

using Json = nlohmann::ordered_json;

inline Json fixed(double v) {
  if (!std::isfinite(v)) return nullptr;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return std::strtod(buf, nullptr);
}

inline std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline void write_trace_csv(const FlowTrace& tr, std::ostream& os) {
  const auto& cols = csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << "\n";
  for (const auto& r : tr.records) {
    const auto v = csv_values(r);
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << csv_number(v[i]);
    os << "\n";
  }
}

inline Json to_json(const FlowConfig& c) {
  Json j;
  j["name"] = c.name;
  j["nodes"] = c.nodes;
  Json init;
  init["family"] = c.initial.family;
  if (c.initial.amplitude) init["amplitude"] = fixed(*c.initial.amplitude);
  if (c.initial.target_u_c0) init["target_u_c0"] = fixed(*c.initial.target_u_c0);
  init["seed"] = c.initial.seed;
  j["initial"] = init;
  j["end_time"] = fixed(c.end_time);
  j["dt_init"] = fixed(c.dt_init);
  j["dt_min"] = fixed(c.dt_min);
  j["dt_max"] = fixed(c.dt_max);
  j["tolerance"] = fixed(c.tolerance);
  j["monitor_cadence"] = fixed(c.monitor_cadence);
  j["heavy_cadence"] = fixed(c.heavy_cadence);
  j["kmax"] = c.kmax;
  j["basis_size"] = c.basis_size;
  j["rho_max"] = fixed(c.rho_max);
  Json cps = Json::array();
  for (double t : c.checkpoints) cps.push_back(fixed(t));
  j["checkpoints"] = cps;
  j["store_fields"] = c.store_fields;
  return j;
}

inline Json vector_json(const VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(fixed(v(i)));
  return a;
}

inline Json to_json(const Checkpoint& c, const FlowTrace& tr) {
  Json j;
  j["grid"] = {{"kind", "chebyshev_gauss_lobatto"}, {"node_count", c.nodes}};
  j["t"] = fixed(c.t);
  j["phi"] = vector_json(c.phi);
  j["phi_offset"] = fixed(c.offset);
  j["c"] = fixed(c.c);
  j["potential_constant"] = fixed(tr.potential_constant);
  j["run"] = tr.config.name;
  return j;
}

inline Json to_json(const Check& c) {
  Json j;
  j["name"] = c.name;
  j["module"] = c.module;
  j["monitor"] = c.monitor;
  j["passed"] = c.passed;
  j["value"] = fixed(c.value);
  j["threshold"] = fixed(c.threshold);
  if (!c.note.empty()) j["note"] = c.note;
  return j;
}

inline Json to_json(const ExperimentReport& r) {
  Json j;
  j["name"] = r.name;
  j["kind"] = r.kind;
  j["passed"] = r.passed;
  if (!r.failure.empty()) j["failure"] = r.failure;
  Json checks = Json::array();
  for (const auto& c : r.checks) checks.push_back(to_json(c));
  j["checks"] = checks;
  Json s = Json::object();
  for (const auto& [k, v] : r.summary) s[k] = fixed(v);
  j["summary"] = s;
  j["artifacts"] = r.artifacts;
  return j;
}

inline Json to_json(const DecayCertificate& c) {
  return Json{{"window", {fixed(c.t1), fixed(c.t2)}},
              {"R", fixed(c.R)},
              {"mu", fixed(c.mu)},
              {"max_relative_residual", fixed(c.max_relative_residual)},
              {"samples", c.samples},
              {"degenerate", c.degenerate},
              {"envelope_holds", c.envelope_holds},
              {"pass", c.pass}};
}

inline Json to_json(const DelayResult& d) {
  Json j;
  j["precheck_passed"] = d.precheck_passed;
  j["checked_samples"] = d.checked_samples;
  if (d.violation)
    j["violation"] = {{"t", fixed(d.violation->t)}, {"Y_dot", fixed(d.violation->lhs)}, {"rhs", fixed(d.violation->rhs)}};
  else
    j["violation"] = nullptr;
  j["admissible_mu_count"] = d.admissible_mu.size();
  j["certified"] = d.certified;
  j["certificate"] = d.certified ? to_json(d.certificate) : Json(nullptr);
  return j;
}

inline Json to_json(const SpectrumResult& s) {
  Json j;
  j["operator"] = to_string(s.op);
  j["kmax"] = s.kmax;
  j["kernel_dimension"] = s.kernel_dimension;
  j["kernel_threshold"] = fixed(s.kernel_threshold);
  j["lambda_min_positive"] = fixed(s.lambda_min_positive);
  j["max_asymmetry"] = fixed(s.max_asymmetry);
  j["mode_truncation_ok"] = s.mode_truncation_ok;
  if (s.op == SpectralOperator::poincare) j["lower_bound_holds"] = s.lower_bound_holds;
  Json modes = Json::object();
  for (const auto& m : s.modes) {
    Json ev = Json::array();
    for (double e : m.eigenvalues) ev.push_back(fixed(e));
    modes[std::to_string(m.k)] = ev;
  }
  j["modes"] = modes;
  return j;
}

inline Json to_json(const SmoothingReport& r) {
  Json j;
  Json cases = Json::array();
  for (const auto& c : r.cases)
    cases.push_back({{"epsilon", fixed(c.epsilon)},
                     {"amplitude", fixed(c.amplitude)},
                     {"K_meas", fixed(c.K_meas)},
                     {"hat_u_max", fixed(c.hat_u_max)},
                     {"grad_sq_max", fixed(c.grad_sq_max)},
                     {"H_max", fixed(c.H_max)},
                     {"K_max", fixed(c.K_max)},
                     {"lap_hat_end", fixed(c.lap_hat_end)},
                     {"barriers", {{"hat_u", c.hat_u_ok}, {"grad", c.grad_ok}, {"H", c.H_ok}, {"K", c.K_ok},
                                   {"laplacian", c.lap_ok}}}});
  j["cases"] = cases;
  j["K_spread"] = fixed(r.K_spread);
  j["K_stable"] = r.K_stable;
  j["passed"] = r.passed;
  return j;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p);
  if (!f) throw ConfigError("cli", "output", "cannot write " + p.string());
  f << text;
}

inline void write_json(const std::filesystem::path& p, const Json& j) { write_text(p, j.dump(2) + "\n"); }

}  // namespace kflow

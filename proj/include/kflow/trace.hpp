#pragma once

// Run configuration and the sampled time series of a flow run.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "kflow/errors.hpp"
#include "kflow/profiles.hpp"

namespace kflow {

struct InitialData {
  std::string family = "legendre2";
  std::optional<double> amplitude;    // phi0 = amplitude * P
  std::optional<double> target_u_c0;  // or: amplitude chosen so |u(0)|_C0 hits this
  std::uint64_t seed = 0;
};

struct FlowConfig {
  std::string name = "run";
  int nodes = 64;
  InitialData initial;
  double end_time = 30.0;
  double dt_init = 1e-4;
  double dt_min = 1e-12;
  double dt_max = 0.05;
  double tolerance = 1e-10;
  double monitor_cadence = 0.1;
  double heavy_cadence = 1.0;  // spectra and ball volumes
  int kmax = 8;
  int basis_size = 40;
  double rho_max = 1.0;
  std::vector<double> checkpoints;
  bool store_fields = false;

  /// Throws ConfigError naming every offending field.
  void validate() const {
    std::vector<std::string> bad;
    auto need = [&](bool ok, const std::string& msg) {
      if (!ok) bad.push_back(msg);
    };
    need(nodes >= kMinNodes, "nodes must be >= " + std::to_string(kMinNodes));
    need(end_time > 0.0, "end_time must be positive");
    need(dt_min > 0.0, "dt_min must be positive");
    need(dt_min <= dt_max, "dt_min > dt_max");
    need(dt_min <= dt_init && dt_init <= dt_max, "dt_init outside [dt_min, dt_max]");
    need(tolerance > 0.0, "tolerance must be positive");
    need(monitor_cadence > 0.0, "monitor_cadence must be positive");
    need(heavy_cadence >= monitor_cadence, "heavy_cadence must be >= monitor_cadence");
    need(kmax >= 3, "kmax must be >= 3");
    need(basis_size >= 8, "basis_size must be >= 8");
    need(rho_max > 0.0, "rho_max must be positive");
    need(is_profile_family(initial.family), "initial.family '" + initial.family + "' unknown");
    need(initial.amplitude.has_value() != initial.target_u_c0.has_value(),
         "exactly one of initial.amplitude and initial.target_u_c0 required");
    if (initial.target_u_c0) need(*initial.target_u_c0 >= 0.0, "initial.target_u_c0 must be >= 0");
    for (double c : checkpoints) need(c >= 0.0 && c <= end_time, "checkpoints must lie in [0, end_time]");
    if (!bad.empty()) {
      std::ostringstream os;
      for (std::size_t i = 0; i < bad.size(); ++i) os << (i ? "; " : "") << bad[i];
      throw ConfigError("flow", "config", os.str());
    }
  }
};

/// One sample. The first fourteen fields are the CSV columns, in order.
struct MonitorRecord {
  double t = 0.0;
  double Y = 0.0;
  double b = 0.0;
  double c = 0.0;
  double M = 0.0;
  double u_c0 = 0.0;
  double grad_u_c0 = 0.0;
  double grad_u_l2 = 0.0;
  double Rn_c0 = 0.0;
  double Rn_l2 = 0.0;
  double lambda = std::numeric_limits<double>::quiet_NaN();
  double mu = std::numeric_limits<double>::quiet_NaN();
  double noncollapse = std::numeric_limits<double>::quiet_NaN();
  double futaki = 0.0;

  double futaki_basis = 0.0;  // Fut(z d/dz) itself
  double y_identity_rhs = 0.0;
  double y_ibp_gap = 0.0;  // |Y - int u(-Delta u)|
  double lemma3_constant = std::numeric_limits<double>::quiet_NaN();
  bool lemma3_i = true;
  double u_minus_b_c0 = 0.0;
  double R_c0 = 0.0;
  double volume = 0.0;
  double curvature_mean = 0.0;  // (1/V) int R omega
  double normalization_defect = 0.0;  // |(1/V) int e^{-u} - 1|
  double time_constant = 0.0;         // phi_dot - u
  double time_constant_spread = 0.0;
  double u_route_gap = 0.0;
  double curvature_route_gap = 0.0;
  double min_density = 0.0;
  double poisson_residual = 0.0;
  double phi_offset = 0.0;
  bool heavy = false;  // spectral and ball monitors evaluated at this sample
  int lambda_kernel = -1;
  int mu_kernel = -1;
  bool mu_bound = true;
  bool mode_truncation_ok = true;
  bool ball_clamped = false;
};

inline const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols = {"t",         "Y",     "b",     "c",     "M",
                                                "u_c0",      "grad_u_c0", "grad_u_l2", "Rn_c0", "Rn_l2",
                                                "lambda",    "mu",    "noncollapse", "futaki"};
  return cols;
}

inline std::vector<double> csv_values(const MonitorRecord& r) {
  return {r.t,     r.Y,     r.b,      r.c,  r.M,  r.u_c0, r.grad_u_c0, r.grad_u_l2, r.Rn_c0, r.Rn_l2,
          r.lambda, r.mu, r.noncollapse, r.futaki};
}

struct Checkpoint {
  double t = 0.0;
  int nodes = 0;
  VectorXd phi;  // the full potential is phi + offset
  double offset = 0.0;
  double c = 0.0;
};

struct StoredFields {
  double t = 0.0;
  VectorXd density;
  VectorXd u;
  double c = 0.0;
};

struct FlowTrace {
  FlowConfig config;
  double amplitude = 0.0;           // resolved initial amplitude
  double potential_constant = 0.0;  // C in phi_dot = log rho + phi + C
  std::vector<MonitorRecord> records;
  std::vector<Checkpoint> checkpoints;
  std::vector<StoredFields> fields;
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;
  bool completed = false;
  std::string failure;  // module/monitor: message, when not completed

  std::vector<double> times() const {
    std::vector<double> v;
    for (const auto& r : records) v.push_back(r.t);
    return v;
  }
  template <class F>
  std::vector<double> series(F field) const {
    std::vector<double> v;
    for (const auto& r : records) v.push_back(field(r));
    return v;
  }
};

}  // namespace kflow

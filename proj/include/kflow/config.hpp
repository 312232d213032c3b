#pragma once

// JSON configuration files. Unknown keys and mistyped values are rejected
// with the offending field named.

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "kflow/errors.hpp"
#include "kflow/trace.hpp"

namespace kflow {

struct SmoothingSettings {
  std::vector<double> epsilons{0.01, 0.005, 0.0025};
  std::string family = "legendre2";
  double cadence = 0.02;
};

struct CertifySettings {
  std::optional<double> lambda;  // default: inf of the measured lambda
  std::vector<int> delays{2};
  std::vector<double> weights{1.0};
  double K0 = 2.0;
};

struct FileConfig {
  FlowConfig flow;
  SmoothingSettings smoothing;
  CertifySettings certify;
  std::vector<FlowConfig> sweep;
};

namespace detail {

using J = nlohmann::json;

inline void reject_unknown(const J& j, const std::set<std::string>& known, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw ConfigError("cli", "config", "unknown key '" + where + it.key() + "'");
}

template <class T>
void read(const J& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("cli", "config", "field '" + where + key + "' has the wrong type");
  }
}

inline FlowConfig parse_flow(const J& j, FlowConfig c, const std::string& where) {
  if (!j.is_object()) throw ConfigError("cli", "config", "'" + where + "' must be an object");
  reject_unknown(j,
                 {"name", "nodes", "initial", "end_time", "dt_init", "dt_min", "dt_max", "tolerance",
                  "monitor_cadence", "heavy_cadence", "kmax", "basis_size", "rho_max", "checkpoints",
                  "store_fields", "smoothing", "certify", "sweep"},
                 where);
  read(j, "name", c.name, where);
  read(j, "nodes", c.nodes, where);
  read(j, "end_time", c.end_time, where);
  read(j, "dt_init", c.dt_init, where);
  read(j, "dt_min", c.dt_min, where);
  read(j, "dt_max", c.dt_max, where);
  read(j, "tolerance", c.tolerance, where);
  read(j, "monitor_cadence", c.monitor_cadence, where);
  read(j, "heavy_cadence", c.heavy_cadence, where);
  read(j, "kmax", c.kmax, where);
  read(j, "basis_size", c.basis_size, where);
  read(j, "rho_max", c.rho_max, where);
  read(j, "checkpoints", c.checkpoints, where);
  read(j, "store_fields", c.store_fields, where);
  if (j.contains("initial")) {
    const J& in = j.at("initial");
    const std::string w = where + "initial.";
    if (!in.is_object()) throw ConfigError("cli", "config", "field '" + where + "initial' must be an object");
    reject_unknown(in, {"family", "amplitude", "target_u_c0", "seed"}, w);
    read(in, "family", c.initial.family, w);
    read(in, "seed", c.initial.seed, w);
    if (in.contains("amplitude") || in.contains("target_u_c0")) {
      c.initial.amplitude.reset();
      c.initial.target_u_c0.reset();
    }
    if (in.contains("amplitude")) {
      double a = 0;
      read(in, "amplitude", a, w);
      c.initial.amplitude = a;
    }
    if (in.contains("target_u_c0")) {
      double a = 0;
      read(in, "target_u_c0", a, w);
      c.initial.target_u_c0 = a;
    }
  }
  return c;
}

}  // namespace detail

inline FlowConfig default_flow_config() {
  FlowConfig c;
  c.name = "default";
  c.initial.target_u_c0 = 0.1;
  return c;
}

inline FileConfig parse_config(const std::string& text) {
  detail::J j;
  try {
    j = detail::J::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cli", "config", std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("cli", "config", "top level must be an object");
  FileConfig fc;
  fc.flow = detail::parse_flow(j, default_flow_config(), "");
  if (j.contains("smoothing")) {
    const auto& s = j.at("smoothing");
    detail::reject_unknown(s, {"epsilons", "family", "cadence"}, "smoothing.");
    detail::read(s, "epsilons", fc.smoothing.epsilons, "smoothing.");
    detail::read(s, "family", fc.smoothing.family, "smoothing.");
    detail::read(s, "cadence", fc.smoothing.cadence, "smoothing.");
  }
  if (j.contains("certify")) {
    const auto& s = j.at("certify");
    detail::reject_unknown(s, {"lambda", "delays", "weights", "K0"}, "certify.");
    if (s.contains("lambda") && !s.at("lambda").is_null()) {
      double l = 0;
      detail::read(s, "lambda", l, "certify.");
      fc.certify.lambda = l;
    }
    detail::read(s, "delays", fc.certify.delays, "certify.");
    detail::read(s, "weights", fc.certify.weights, "certify.");
    detail::read(s, "K0", fc.certify.K0, "certify.");
  }
  if (j.contains("sweep")) {
    const auto& arr = j.at("sweep");
    if (!arr.is_array()) throw ConfigError("cli", "config", "field 'sweep' must be an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      FlowConfig base = fc.flow;
      base.name = fc.flow.name + "-" + std::to_string(i);
      fc.sweep.push_back(detail::parse_flow(arr[i], base, "sweep[" + std::to_string(i) + "]."));
    }
  }
  fc.flow.validate();
  for (const auto& s : fc.sweep) s.validate();
  return fc;
}

inline FileConfig load_config(const std::filesystem::path& p) {
  std::ifstream f(p);
  if (!f) throw ConfigError("cli", "config", "cannot read config file '" + p.string() + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

}  // namespace kflow

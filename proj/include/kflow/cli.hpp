#pragma once

// Command-line dispatch. Exit status: 0 all checks pass, 1 a check failed,
// 2 configuration error, 3 numerical failure.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kflow/config.hpp"
#include "kflow/errors.hpp"
#include "kflow/experiments.hpp"
#include "kflow/io.hpp"
#include "kflow/svg.hpp"

namespace kflow {

enum ExitStatus : int { kExitPass = 0, kExitCheckFailed = 1, kExitConfig = 2, kExitNumerical = 3 };

inline const std::vector<std::string>& cli_commands() {
  static const std::vector<std::string> c = {"run", "spectrum", "smoothing", "certify", "report", "sweep"};
  return c;
}

inline std::string usage_text() {
  return "usage: kflow <command> [--config FILE] [--output DIR] [--seed N] [-v|-q]\n"
         "commands:\n"
         "  run        integrate the flow; write trace.csv and checkpoints\n"
         "  spectrum   Poincare and vector-field spectra of the initial metric\n"
         "  smoothing  smoothing barriers over the configured epsilon scan\n"
         "  certify    decay certificates for the measured Y trajectory\n"
         "  report     full convergence report with plots\n"
         "  sweep      convergence reports for every entry of 'sweep', run concurrently\n"
         "The output directory defaults to $KFLOW_OUTPUT_DIR, then ./kflow-out.\n";
}

struct RunConfig {
  std::string command;
  std::string config_path;
  std::string output_dir;
  int verbosity = 1;
  std::optional<std::uint64_t> seed;
};

namespace detail {

struct Context {
  RunConfig rc;
  FileConfig fc;
  std::filesystem::path out;
  std::ostream* log;
  void say(int level, const std::string& s) const {
    if (rc.verbosity >= level) *log << s << "\n";
  }
};

inline int status_of(bool passed) { return passed ? kExitPass : kExitCheckFailed; }

inline void print_report(const Context& cx, const ExperimentReport& r) {
  cx.say(1, r.name + ": " + (r.passed ? "PASS" : "FAIL " + r.failure));
  for (const auto& c : r.checks) {
    std::ostringstream os;
    os << "  [" << (c.passed ? "ok" : "FAIL") << "] " << c.module << "/" << c.monitor << ": " << c.name
       << " = " << c.value;
    cx.say(c.passed ? 2 : 1, os.str());
  }
}

inline void write_trace_files(const Context& cx, const FlowTrace& tr, ExperimentReport* rep,
                              const std::string& prefix = "") {
  std::ostringstream csv;
  write_trace_csv(tr, csv);
  const std::string name = prefix + "trace.csv";
  write_text(cx.out / name, csv.str());
  if (rep) rep->artifacts.push_back(name);
  for (const auto& c : tr.checkpoints) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%scheckpoint_t%.3f.json", prefix.c_str(), c.t);
    write_json(cx.out / buf, to_json(c, tr));
    if (rep) rep->artifacts.push_back(buf);
  }
}

inline void write_plots(const Context& cx, const FlowTrace& tr, ExperimentReport& rep) {
  const auto t = tr.times();
  write_text(cx.out / "Y.svg",
             svg_plot({"Y along the flow", "t", "Y", true},
                      {{"Y", t, tr.series([](const MonitorRecord& r) { return r.Y; })},
                       {"|R-1|_C0", t, tr.series([](const MonitorRecord& r) { return r.Rn_c0; })}}));
  std::vector<double> th, lam, mu;
  for (const auto& r : tr.records)
    if (r.heavy) {
      th.push_back(r.t);
      lam.push_back(r.lambda);
      mu.push_back(r.mu);
    }
  write_text(cx.out / "spectra.svg",
             svg_plot({"lowest positive eigenvalues", "t", "eigenvalue"}, {{"lambda", th, lam}, {"mu", th, mu}}));
  std::vector<Series> prof;
  const Grid g = build_grid(tr.config.nodes);
  std::vector<double> x(g->fine_nodes().data(), g->fine_nodes().data() + g->fine_nodes().size());
  for (const auto& c : tr.checkpoints) {
    const MetricState st = MetricState::from_potential(g, c.phi);
    const VectorXd rn = g->refinement() * (st.curvature().array() - 1.0).matrix();
    char lab[32];
    std::snprintf(lab, sizeof lab, "t=%.2f", c.t);
    prof.push_back({lab, x, std::vector<double>(rn.data(), rn.data() + rn.size())});
  }
  write_text(cx.out / "R_profiles.svg", svg_plot({"R - 1 snapshots", "x", "R - 1"}, prof));
  for (const char* n : {"Y.svg", "spectra.svg", "R_profiles.svg"}) rep.artifacts.push_back(n);
}

inline std::string summary_text(const ExperimentReport& r) {
  std::ostringstream os;
  os << r.name << " (" << r.kind << "): " << (r.passed ? "PASS" : "FAIL") << "\n";
  if (!r.failure.empty()) os << "first failure: " << r.failure << "\n";
  for (const auto& c : r.checks)
    os << (c.passed ? "  ok    " : "  FAIL  ") << c.module << "/" << c.monitor << "  " << c.name << "  value=" << c.value
       << "\n";
  for (const auto& [k, v] : r.summary) os << "  " << k << " = " << v << "\n";
  return os.str();
}

inline int cmd_run(const Context& cx) {
  FlowConfig cfg = cx.fc.flow;
  const FlowTrace tr = run_flow(cfg);
  ExperimentReport rep;
  rep.name = cfg.name;
  rep.kind = "run";
  rep.add({"run completed", "flow", "run_flow", tr.completed, double(tr.records.size()), 0.0, tr.failure});
  write_trace_files(cx, tr, &rep);
  rep.summary["amplitude"] = tr.amplitude;
  rep.summary["potential_constant"] = tr.potential_constant;
  rep.summary["accepted_steps"] = double(tr.accepted_steps);
  rep.summary["rejected_steps"] = double(tr.rejected_steps);
  rep.finalize();
  write_json(cx.out / "run.json", to_json(rep));
  print_report(cx, rep);
  if (!tr.completed) {
    *cx.log << "error: " << tr.failure << "\n";
    return kExitNumerical;
  }
  return kExitPass;
}

inline int cmd_spectrum(const Context& cx) {
  const FlowConfig& cfg = cx.fc.flow;
  const Grid g = build_grid(cfg.nodes);
  const double a = resolve_amplitude(cfg, g);
  const FlowState fs = initial_flow_state(g, a * profile_values(cfg.initial.family, g->nodes(), cfg.initial.seed));
  SpectralOptions so;
  so.kmax = cfg.kmax;
  so.basis_size = cfg.basis_size;
  const SpectrumResult vec = vector_laplacian_spectrum(fs.state, cfg.kmax, so);
  const SpectrumResult mu = poincare_mu(fs.state, fs.u, so);
  const double lam_ref = reference_lambda(cfg.nodes, cfg.kmax, cfg.basis_size);
  ExperimentReport rep;
  rep.name = cfg.name;
  rep.kind = "spectrum";
  rep.add({"holomorphic kernel dimension 3", "spectral", "vector_laplacian_spectrum", vec.kernel_dimension == 3,
           double(vec.kernel_dimension), 3.0, ""});
  rep.add({"lambda positive", "spectral", "vector_laplacian_spectrum", vec.lambda_min_positive > vec.kernel_threshold,
           vec.lambda_min_positive, vec.kernel_threshold, ""});
  rep.add({"Poincare kernel is the constants", "spectral", "poincare_mu", mu.kernel_dimension == 1,
           double(mu.kernel_dimension), 1.0, ""});
  rep.add({"mu >= 1 - 1e-3", "spectral", "poincare_mu", mu.lower_bound_holds, mu.lambda_min_positive, 1.0 - 1e-3, ""});
  rep.add({"mode truncation monotone", "spectral", "mode_truncation", vec.mode_truncation_ok && mu.mode_truncation_ok,
           0.0, 0.0, ""});
  rep.summary["lambda"] = vec.lambda_min_positive;
  rep.summary["lambda_reference"] = lam_ref;
  rep.summary["mu"] = mu.lambda_min_positive;
  rep.summary["amplitude"] = a;
  rep.finalize();
  Json j;
  j["report"] = to_json(rep);
  j["vector_laplacian"] = to_json(vec);
  j["poincare"] = to_json(mu);
  write_json(cx.out / "spectrum.json", j);
  print_report(cx, rep);
  return status_of(rep.passed);
}

inline int cmd_smoothing(const Context& cx) {
  SmoothingOptions opt;
  opt.family = cx.fc.smoothing.family;
  opt.cadence = cx.fc.smoothing.cadence;
  opt.nodes = cx.fc.flow.nodes;
  opt.seed = cx.fc.flow.initial.seed;
  opt.tolerance = cx.fc.flow.tolerance;
  const SmoothingReport r = smoothing_experiment(cx.fc.smoothing.epsilons, opt);
  write_json(cx.out / "smoothing.json", to_json(r));
  for (const auto& c : r.cases) {
    std::ostringstream os;
    os << "eps=" << c.epsilon << " K_meas=" << c.K_meas << " barriers " << (c.passed() ? "ok" : "FAIL");
    cx.say(1, os.str());
  }
  cx.say(1, std::string("K spread ") + std::to_string(r.K_spread) + (r.passed ? " PASS" : " FAIL"));
  return status_of(r.passed);
}

inline int cmd_certify(const Context& cx) {
  FlowConfig cfg = cx.fc.flow;
  const FlowTrace tr = run_flow(cfg);
  if (!tr.completed) {
    *cx.log << "error: " << tr.failure << "\n";
    return kExitNumerical;
  }
  const ReportThresholds th;
  DelayInequalityCase dc;
  for (const auto& r : tr.records) {
    if (!(r.Y > th.y_floor)) break;
    dc.t.push_back(r.t);
    dc.Y.push_back(r.Y);
  }
  double lam = std::numeric_limits<double>::infinity();
  for (const auto& r : tr.records)
    if (r.heavy && r.t >= cx.fc.certify.K0 - 1e-9) lam = std::min(lam, r.lambda);
  dc.lambda = cx.fc.certify.lambda.value_or(lam);
  dc.delays = cx.fc.certify.delays;
  dc.weights = cx.fc.certify.weights;
  dc.K0 = cx.fc.certify.K0;
  const DelayResult dr = delay_comparison(dc);
  const DecayCertificate fit = decay_fit(dc.t, dc.Y, dc.K0, dc.t.empty() ? 0.0 : dc.t.back(), th.y_floor);
  Json j;
  j["run"] = cfg.name;
  j["lambda"] = fixed(dc.lambda);
  j["delays"] = dc.delays;
  j["weights"] = dc.weights;
  j["K0"] = fixed(dc.K0);
  j["delay_comparison"] = to_json(dr);
  j["least_squares_fit"] = to_json(fit);
  write_json(cx.out / "certificate.json", j);
  std::ostringstream os;
  os << "delay certificate " << (dr.certified ? "PASS" : "FAIL") << " mu=" << dr.certificate.mu
     << "; fitted mu=" << fit.mu << (fit.pass ? " PASS" : " FAIL");
  cx.say(1, os.str());
  return status_of(dr.certified && fit.pass);
}

inline int cmd_report(const Context& cx) {
  FlowConfig cfg = cx.fc.flow;
  if (cfg.checkpoints.empty())
    for (double t : {0.0, 0.5, 1.0, 2.0})
      if (t <= cfg.end_time) cfg.checkpoints.push_back(t);
  FlowTrace tr;
  ExperimentReport rep = convergence_report(cfg, &tr);
  write_trace_files(cx, tr, &rep);
  write_plots(cx, tr, rep);
  rep.artifacts.push_back("summary.txt");
  write_text(cx.out / "summary.txt", summary_text(rep));
  Json j = to_json(rep);
  j["config"] = to_json(cfg);
  write_json(cx.out / "report.json", j);
  print_report(cx, rep);
  if (!tr.completed) return kExitNumerical;
  return status_of(rep.passed);
}

inline int cmd_sweep(const Context& cx) {
  std::vector<FlowConfig> cfgs = cx.fc.sweep;
  if (cfgs.empty()) cfgs.push_back(cx.fc.flow);
  std::vector<FlowTrace> traces;
  const auto reports = sweep(cfgs, &traces);
  Json arr = Json::array();
  bool all = true, numerical = false;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    ExperimentReport rep = reports[i];
    write_trace_files(cx, traces[i], &rep, rep.name + "_");
    Json j = to_json(rep);
    j["config"] = to_json(cfgs[i]);
    arr.push_back(j);
    print_report(cx, rep);
    all = all && rep.passed;
    numerical = numerical || !traces[i].completed;
  }
  write_json(cx.out / "sweep.json", Json{{"runs", arr}, {"passed", all}});
  if (numerical) return kExitNumerical;
  return status_of(all);
}

}  // namespace detail

/// Parses arguments and runs one command.
inline int dispatch(int argc, const char* const* argv, std::ostream& log = std::cerr) {
  RunConfig rc;
  CLI::App app{"kflow: normalized Kahler-Ricci flow laboratory on CP^1"};
  app.set_help_flag();
  bool verbose = false, quiet = false, help = false;
  std::uint64_t seed = 0;
  app.add_option("command", rc.command, "run | spectrum | smoothing | certify | report | sweep");
  app.add_option("-c,--config", rc.config_path, "JSON configuration file");
  app.add_option("-o,--output", rc.output_dir, "output directory");
  auto* seed_opt = app.add_option("--seed", seed, "seed for randomized profiles");
  app.add_flag("-v,--verbose", verbose, "print every check");
  app.add_flag("-q,--quiet", quiet, "print nothing on success");
  app.add_flag("-h,--help", help, "show usage");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    log << "error: " << e.what() << "\n" << usage_text();
    return kExitConfig;
  }
  if (help) {
    log << usage_text();
    return kExitPass;
  }
  if (seed_opt->count() > 0) rc.seed = seed;
  rc.verbosity = quiet ? 0 : (verbose ? 2 : 1);
  bool known = false;
  for (const auto& c : cli_commands()) known = known || c == rc.command;
  if (!known) {
    log << "error: cli/dispatch: unknown command '" << rc.command << "'\n" << usage_text();
    return kExitConfig;
  }
  try {
    detail::Context cx{rc, {}, {}, &log};
    if (rc.config_path.empty()) {
      cx.fc.flow = default_flow_config();
    } else {
      cx.fc = load_config(rc.config_path);
    }
    if (rc.seed) {
      cx.fc.flow.initial.seed = *rc.seed;
      for (auto& s : cx.fc.sweep) s.initial.seed = *rc.seed;
    }
    std::string out = rc.output_dir;
    if (out.empty()) {
      const char* env = std::getenv("KFLOW_OUTPUT_DIR");
      out = (env && *env) ? env : "kflow-out";
    }
    cx.out = out;
    std::error_code ec;
    std::filesystem::create_directories(cx.out, ec);
    if (ec || !std::filesystem::is_directory(cx.out))
      throw ConfigError("cli", "output", "output directory '" + out + "' is not writable");
    if (rc.command == "run") return detail::cmd_run(cx);
    if (rc.command == "spectrum") return detail::cmd_spectrum(cx);
    if (rc.command == "smoothing") return detail::cmd_smoothing(cx);
    if (rc.command == "certify") return detail::cmd_certify(cx);
    if (rc.command == "report") return detail::cmd_report(cx);
    return detail::cmd_sweep(cx);
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace kflow

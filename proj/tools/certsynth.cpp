// certsynth certify|synth|feedback|verify|simulate <scenario> [flags]
//
// Exit codes: 0 ok, 1 usage or configuration, 2 infeasible or failed
// guarantee, 3 numerical failure.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "certsynth/pipeline.hpp"

namespace fs = std::filesystem;
using namespace certsynth;

namespace {

int exit_code(Errc c) {
  switch (c) {
    case Errc::Infeasible:
    case Errc::CertificateCheckFailed:
      return 2;
    case Errc::NumericalFailure:
    case Errc::NoConvergence:
    case Errc::NotHurwitz:
    case Errc::Singular:
    case Errc::NonSymmetric:
    case Errc::DomainError:
      return 3;
    default:
      return 1;
  }
}

struct Common {
  std::string scenario;
  std::string out;
  std::optional<double> zeta;
  std::string method;
  bool quiet = false;
};

struct Ctx {
  Scenario sc;
  fs::path dir;
  bool quiet = false;

  void say(const std::string& s) const {
    if (!quiet) std::cout << s << "\n";
  }
  fs::path file(const std::string& n) const { return dir / n; }
};

Ctx open(const Common& c) {
  Ctx x;
  x.sc = load_scenario(c.scenario);
  if (c.zeta) x.sc.cert.zeta = *c.zeta;
  if (!c.method.empty()) {
    if (c.method != "full" && c.method != "diag") throw Error(Errc::Config, "--method must be full or diag");
    x.sc.cert.method = c.method;
  }
  if (!c.out.empty()) {
    x.dir = c.out;
  } else if (const char* root = std::getenv("CERTSYNTH_OUT"); root && *root) {
    x.dir = fs::path(root) / x.sc.name;
  } else {
    x.dir = x.sc.output;
  }
  fs::create_directories(x.dir);
  x.quiet = c.quiet;
  for (const auto& w : x.sc.warnings) x.say("note: " + w);
  return x;
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream o(p);
  if (!o) throw Error(Errc::Config, "cannot write " + p.string());
  o << j.dump(1) << "\n";
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error(Errc::Config, "cannot read " + p.string());
  return json::parse(in);
}

// Timestamps live only here so every other output is reproducible.
void stamp(const Ctx& x, const std::string& cmd) {
  json meta;
  const fs::path p = x.file("meta.json");
  if (fs::exists(p)) meta = read_json(p);
  meta[cmd] = {{"finished_unix", std::time(nullptr)}};
  write_json(p, meta);
}

std::string num(double v, const char* fmt = "%.6g") {
  char b[64];
  std::snprintf(b, sizeof b, fmt, v);
  return b;
}

// ---------------------------------------------------------------------------

BisimCertificate certificate_for(const Ctx& x, bool fresh) {
  const fs::path p = x.file("certificate.json");
  if (!fresh && fs::exists(p)) return certificate_from_json(read_json(p));
  x.say("computing certificate");
  BisimCertificate c = run_certify(x.sc);
  write_json(p, to_json(c));
  return c;
}

int cmd_certify(const Common& c, bool zeta_search) {
  Ctx x = open(c);
  BisimCertificate cert = certificate_for(x, true);
  if (zeta_search) {
    // Halve ζ until the synthesis first becomes infeasible; keep the last
    // feasible certificate.
    double z = x.sc.cert.zeta > 0 ? x.sc.cert.zeta : 1.0;
    for (int k = 0; k < 8; ++k) {
      Scenario trial = x.sc;
      trial.cert.zeta = z / 2;
      try {
        BisimCertificate ct = run_certify(trial);
        run_synth(trial, ct, x.sc.synth.use_pool);
        cert = ct;
        z /= 2;
        x.say("zeta " + num(z) + " feasible");
      } catch (const Error& e) {
        if (e.code() != Errc::Infeasible) throw;
        x.say("zeta " + num(z / 2) + " infeasible, keeping " + num(z));
        break;
      }
    }
    write_json(x.file("certificate.json"), to_json(cert));
  }
  const auto fails = check_certificate(cert, x.sc.sys, 1e-10);
  const auto cont = containment_chain_check(cert);
  json modes = json::array();
  for (std::size_t q = 0; q < cert.modes.size(); ++q)
    modes.push_back({{"mode", x.sc.sys.modes[q].name}, {"alpha", cert.modes[q].alpha}, {"mu", cert.modes[q].mu}});
  json offsets = json::array();
  std::cout << "gamma_hat " << num(cert.gamma_hat) << "  epsilon " << num(cert.epsilon) << "  r0 "
            << num(cert.segment_r.front()) << " (" << num(cert.segment_r.front() / cert.gamma_hat) << " x gamma_hat)\n";
  for (std::size_t q = 0; q < cert.modes.size(); ++q)
    std::cout << "alpha[" << x.sc.sys.modes[q].name << "] " << num(cert.modes[q].alpha) << "\n";
  std::cout << "offsets at t=0 (natural units):\n";
  for (const auto& r : offset_rows(cert, x.sc.full)) {
    offsets.push_back({{"predicate", r.label}, {"tau", r.tau}, {"delta", r.delta}, {"delta_natural", r.delta_natural}});
    std::cout << "  G[" << num(r.tau) << "] " << r.label << "  " << num(r.delta_natural) << "\n";
  }
  for (double m : cont.margins) std::cout << "containment margin " << num(m) << "\n";
  write_json(x.file("certify_report.json"), {{"gamma_hat", cert.gamma_hat},
                                              {"epsilon", cert.epsilon},
                                              {"r", cert.segment_r},
                                              {"modes", modes},
                                              {"offsets", offsets},
                                              {"containment_margins", cont.margins},
                                              {"containment_ok", cont.ok},
                                              {"check_failures", fails}});
  stamp(x, "certify");
  if (!fails.empty() || !cont.ok) {
    for (const auto& f : fails) std::cerr << "check failed: " << f << "\n";
    return 2;
  }
  return 0;
}

// Variable values for plot-ready CSVs.
double var_value(const VariableDecl& v, const Vector& x, const Vector& u) {
  if (!v.state_row.empty()) {
    double s = v.bias + dot(v.state_row, x);
    if (!v.input_row.empty()) s += dot(v.input_row, u);
    return v.scale * s;
  }
  return v.scale * (v.kind == VarKind::State ? x[v.index] : u[v.index]);
}

std::string column(const VariableDecl& v) {
  if (std::abs(v.scale - 1 / (2 * std::numbers::pi)) < 1e-12) return v.name + "_Hz";
  if (!v.state_row.empty()) return "P_line_" + v.name.substr(v.name[0] == 'P' ? 1 : 0);
  return v.name;
}

void write_vars_csv(const fs::path& p, const Scenario& sc, const SignalTrace& tr) {
  std::ofstream o(p);
  o << "t";
  for (const auto& n : sc.sys.input_names) o << "," << n;
  for (const auto& v : sc.vars) o << "," << column(v);
  o << "\n";
  o.precision(10);
  for (std::size_t j = 0; j < tr.size(); ++j) {
    o << tr.times[j];
    for (double v : tr.inputs[j]) o << "," << v;
    for (const auto& v : sc.vars) o << "," << var_value(v, tr.states[j], tr.inputs[j]);
    o << "\n";
  }
}

SynthesisResult synth_for(const Ctx& x, const BisimCertificate& cert, bool use_pool) {
  SynthesisResult r = run_synth(x.sc, cert, use_pool);
  json j = to_json(r);
  j["pool_used"] = use_pool && static_cast<bool>(x.sc.pool);
  write_json(x.file("inputs.json"), j);
  {
    std::ofstream o(x.file("nominal.csv"));
    write_trace_csv(o, r.nominal, x.sc.full, x.sc.sys.state_names, x.sc.sys.input_names);
  }
  write_vars_csv(x.file("nominal_vars.csv"), x.sc, r.nominal);
  return r;
}

int cmd_synth(const Common& c, std::optional<bool> pool) {
  Ctx x = open(c);
  const BisimCertificate cert = certificate_for(x, false);
  const bool use_pool = pool.value_or(x.sc.synth.use_pool);
  const SynthesisResult r = synth_for(x, cert, use_pool);
  std::cout << "objective " << num(r.objective) << "  robustness " << num(r.robustness) << "  rounds " << r.rounds
            << "  rows " << r.rows << "\n";
  std::cout << "plain specification robustness " << num(robustness(x.sc.full, r.nominal, 0.0)) << "\n";
  for (const auto& a : r.added) std::cout << "added " << a << "\n";
  stamp(x, "synth");
  return 0;
}

NominalLibrary library_for(const Ctx& x, const BisimCertificate& cert, std::size_t centers, double rho, bool fresh) {
  const fs::path p = x.file("library.json");
  if (!fresh && fs::exists(p)) return library_from_json(read_json(p));
  NominalLibrary lib = run_feedback(x.sc, cert, centers, rho);
  write_json(p, to_json(lib));
  return lib;
}

int cmd_feedback(const Common& c, std::size_t centers, double rho) {
  Ctx x = open(c);
  const BisimCertificate cert = certificate_for(x, false);
  const NominalLibrary lib = library_for(x, cert, centers, rho, true);
  for (const auto& w : lib.warnings) std::cout << "warning: " << w << "\n";
  std::cout << "library traces " << lib.size() << "  rho " << num(rho) << "\n";
  for (std::size_t l = 0; l < lib.size(); ++l)
    std::cout << "  trace " << l << "  robustness " << num(lib.traces[l].robustness) << "  objective "
              << num(lib.traces[l].objective) << "  extensions " << lib.traces[l].ext.size() << "\n";
  stamp(x, "feedback");
  return 0;
}

struct SimFlags {
  std::optional<std::size_t> paths;
  std::optional<std::uint64_t> seed;
  std::optional<int> substeps;
  std::vector<std::string> disturb;  // groups of four
  std::string controller;
  bool no_noise = false;
  bool dump = false;
};

SimConfig sim_config(const Scenario& sc, const SimFlags& f) {
  SimConfig cfg = sc.sim;
  if (f.paths) cfg.paths = *f.paths;
  if (f.seed) cfg.seed = *f.seed;
  if (f.substeps) cfg.substeps = *f.substeps;
  if (f.no_noise) cfg.noise = false;
  if (f.disturb.size() % 4 != 0) throw Error(Errc::Config, "--disturb takes t1 t2 channel magnitude");
  for (std::size_t i = 0; i < f.disturb.size(); i += 4) {
    try {
      cfg.disturbances.push_back(sc.disturbance(f.disturb[i + 2], std::stod(f.disturb[i]), std::stod(f.disturb[i + 1]),
                                                std::stod(f.disturb[i + 3])));
    } catch (const std::invalid_argument&) {
      throw Error(Errc::Config, "--disturb needs numeric t1, t2 and magnitude");
    }
  }
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw Error(Errc::Config, e.what());
  }
  return cfg;
}

struct Artifacts {
  BisimCertificate cert;
  std::vector<Vector> u;
  SignalTrace nominal;
  std::optional<NominalLibrary> lib;
};

Artifacts artifacts_for(const Ctx& x, const std::string& kind) {
  Artifacts a;
  a.cert = certificate_for(x, false);
  const fs::path in = x.file("inputs.json");
  if (fs::exists(in)) {
    a.u = inputs_from_json(read_json(in));
  } else {
    x.say("synthesizing feedforward input");
    a.u = synth_for(x, a.cert, x.sc.synth.use_pool).u;
  }
  a.nominal = integrate_nominal(x.sc.sys, x.sc.schedule.truncated(x.sc.synth.horizon), x.sc.x0, a.u, x.sc.synth.dt);
  if (kind == "feedback") {
    if (!fs::exists(x.file("library.json"))) x.say("building feedback library");
    a.lib = library_for(x, a.cert, x.sc.feedback.centers, x.sc.feedback.rho, false);
  }
  return a;
}

int cmd_verify(const Common& c, const SimFlags& f) {
  Ctx x = open(c);
  const std::string kind = f.controller.empty() ? x.sc.controller : f.controller;
  const SimConfig cfg = sim_config(x.sc, f);
  const Artifacts a = artifacts_for(x, kind);
  const auto ctrl = make_controller(kind, x.sc, &a.u, a.lib ? &*a.lib : nullptr);
  std::vector<SignalTrace> traces;
  const BatchReport rep = run_verify(x.sc, cfg, ctrl, &a.cert, &a.nominal, f.dump ? &traces : nullptr);

  std::cout << kind << ": " << rep.satisfied << "/" << rep.robustness.size() << " paths satisfy ("
            << num(100 * rep.rate(), "%.1f") << "%)  min robustness " << num(rep.min_robustness) << "  mean "
            << num(rep.mean_robustness) << "\n";
  double alpha = 0;
  for (const auto& m : a.cert.modes) alpha = std::max(alpha, m.alpha);
  Vector gammas;
  for (int k = 1; k <= 5; ++k) gammas.push_back(a.cert.gamma_hat * k / 5.0);
  const auto ex = excursion_stats(rep.sup_phi, alpha, a.cert.t_end, gammas);
  std::cout << "gamma        P{sup phi >= gamma}   bound alpha*T/gamma\n";
  json exj = json::array();
  for (const auto& r : ex) {
    std::cout << num(r.gamma, "%-12.5g") << " " << num(r.frequency, "%-8.4f") << " +- " << num(r.half_width, "%-8.4f")
              << "  " << num(r.bound, "%.4f") << "\n";
    exj.push_back({{"gamma", r.gamma}, {"frequency", r.frequency}, {"half_width", r.half_width}, {"bound", r.bound}});
  }
  json dist = json::array();
  for (const auto& d : cfg.disturbances)
    dist.push_back({{"channel", d.channel}, {"t1", d.t1}, {"t2", d.t2}, {"magnitude", d.magnitude}});
  json j = to_json(rep);
  j["controller"] = kind;
  j["seed"] = cfg.seed;
  j["substeps"] = cfg.substeps;
  j["disturbances"] = dist;
  j["excursions"] = exj;
  const std::string tag = "verify_" + kind;
  write_json(x.file(tag + ".json"), j);
  {
    std::ofstream o(x.file(tag + "_paths.csv"));
    o << "path,seed,robustness,sup_phi\n";
    o.precision(10);
    for (std::size_t p = 0; p < rep.robustness.size(); ++p)
      o << p << "," << rep.seeds[p] << "," << rep.robustness[p] << "," << rep.sup_phi[p] << "\n";
  }
  for (std::size_t p = 0; p < traces.size(); ++p)
    write_vars_csv(x.file(tag + "_path" + std::to_string(p) + ".csv"), x.sc, traces[p]);
  stamp(x, tag);
  const bool guaranteed = cfg.disturbances.empty() && kind != "none";
  if (guaranteed && rep.rate() < 1 - a.cert.epsilon) {
    std::cerr << "satisfaction rate below 1 - epsilon = " << num(1 - a.cert.epsilon) << "\n";
    return 2;
  }
  return 0;
}

int cmd_simulate(const Common& c, const SimFlags& f) {
  Ctx x = open(c);
  const std::string kind = f.controller.empty() ? x.sc.controller : f.controller;
  SimConfig cfg = sim_config(x.sc, f);
  const Artifacts a = artifacts_for(x, kind);
  const auto ctrl = make_controller(kind, x.sc, &a.u, a.lib ? &*a.lib : nullptr)();
  const SignalTrace tr = simulate_sde(x.sc.sys, x.sc.schedule, x.sc.x0, *ctrl, cfg, rng::path_seed(cfg.seed, 0));
  const double rob = robustness(x.sc.full, tr, 0.0);
  write_vars_csv(x.file("simulate_" + kind + ".csv"), x.sc, tr);
  std::cout << kind << " path 0: robustness " << num(rob) << (rob >= 0 ? " (satisfied)" : " (violated)") << "\n";
  stamp(x, "simulate_" + kind);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"certified controller synthesis for switched stochastic linear systems"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* s) {
    s->add_option("scenario", common.scenario, "scenario file")->required();
    s->add_option("--out", common.out, "output directory (default: $CERTSYNTH_OUT/<name> or the scenario's output)");
    s->add_option("--zeta", common.zeta, "certificate shape normalization");
    s->add_option("--method", common.method, "certificate optimizer: full or diag");
    s->add_flag("--quiet", common.quiet, "suppress progress notes");
  };
  SimFlags sim;
  auto add_sim = [&](CLI::App* s) {
    s->add_option("--paths", sim.paths, "number of Monte Carlo paths");
    s->add_option("--seed", sim.seed, "base seed");
    s->add_option("--substeps", sim.substeps, "Euler-Maruyama steps per sample");
    s->add_option("--disturb", sim.disturb, "t1 t2 channel magnitude (repeatable)")->expected(4)->take_all()->allow_extra_args(false);
    s->add_option("--controller", sim.controller, "none, feedforward or feedback");
    s->add_flag("--no-noise", sim.no_noise, "drop the diffusion term");
  };

  auto* certify = app.add_subcommand("certify", "optimize and check the bisimulation certificate");
  add_common(certify);
  bool zeta_search = false;
  certify->add_flag("--zeta-search", zeta_search, "halve zeta until synthesis becomes infeasible");

  auto* synth = app.add_subcommand("synth", "synthesize the feedforward input");
  add_common(synth);
  bool pool_on = false, pool_off = false;
  synth->add_flag("--pool", pool_on, "start from the reduced formula and add pool constraints on demand");
  synth->add_flag("--no-pool", pool_off, "solve with every constraint at once");

  auto* feedback = app.add_subcommand("feedback", "build the feedback library");
  add_common(feedback);
  std::optional<std::size_t> centers;
  std::optional<double> rho;
  feedback->add_option("--centers,-N", centers, "library centers");
  feedback->add_option("--rho", rho, "extension window");

  auto* verify = app.add_subcommand("verify", "Monte Carlo satisfaction statistics");
  add_common(verify);
  add_sim(verify);
  verify->add_flag("--dump-traces", sim.dump, "write one CSV per path");

  auto* simulate = app.add_subcommand("simulate", "one closed-loop path as CSV");
  add_common(simulate);
  add_sim(simulate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  try {
    if (*certify) return cmd_certify(common, zeta_search);
    if (*synth) {
      if (pool_on && pool_off) throw Error(Errc::Config, "--pool and --no-pool are exclusive");
      std::optional<bool> pool;
      if (pool_on) pool = true;
      if (pool_off) pool = false;
      return cmd_synth(common, pool);
    }
    if (*feedback) {
      const Scenario sc = load_scenario(common.scenario);
      return cmd_feedback(common, centers.value_or(sc.feedback.centers), rho.value_or(sc.feedback.rho));
    }
    if (*verify) return cmd_verify(common, sim);
    if (*simulate) return cmd_simulate(common, sim);
  } catch (const Error& e) {
    std::cerr << "certsynth: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const json::exception& e) {
    std::cerr << "certsynth: " << e.what() << "\n";
    return 1;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "certsynth: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

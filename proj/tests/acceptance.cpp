// Acceptance run: one PASS/FAIL line per criterion with its measured numbers
// and runtime. Exit status is the number of failed criteria.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <string>

#include "certsynth/pipeline.hpp"
#include "certsynth/powergrid.hpp"
#include "oracles.hpp"

using namespace certsynth;

namespace {

const std::string kDir = CERTSYNTH_SCENARIO_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

int failures = 0;

void run(int id, const char* name, double limit_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool ok = o.pass && secs < limit_s;
  if (!ok) ++failures;
  std::printf("%s %2d %-40s %s [%.1f s, limit %.0f s]\n", ok ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs,
              limit_s);
  std::fflush(stdout);
}

const Scenario& fourbus() {
  static const Scenario sc = load_scenario(kDir + "/fourbus.scenario");
  return sc;
}

Outcome certificate_validity() {
  const auto& sc = fourbus();
  const auto cert = run_certify(sc);
  const auto fails = check_certificate(cert, sc.sys, 1e-10);
  bool hurwitz = true;
  for (const auto& md : sc.sys.modes) hurwitz = hurwitz && is_hurwitz(md.A.select(cert.coords, cert.coords));
  std::string d = "invariants " + std::string(fails.empty() ? "ok" : fails.front()) + ", modes Hurwitz " +
                  (hurwitz ? "yes" : "no");
  // The authors' offsets come from a metric that is not published; ours are
  // printed beside them.
  for (const auto& r : offset_rows(cert, sc.formula))
    if (r.label == "df <= 0.5") d += fmt(", df offset %.3f Hz (paper 0.217)", r.delta_natural);
    else if (r.label == "dfr <= 10") d += fmt(", dfr offset %.2f Hz (paper 6.08)", r.delta_natural);
  return {fails.empty() && hurwitz, d};
}

Outcome z_closed_form() {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> nd;
  double worst = 0;
  for (int k = 0; k < 100; ++k) {
    const std::size_t n = 1 + static_cast<std::size_t>(k) % 12;
    const Matrix m = oracle::random_pd(rng, n);
    Vector a(n);
    for (double& v : a) v = nd(rng);
    const double na = norm2(a);
    for (double& v : a) v /= na;
    const double z = max_z(m, a);
    worst = std::max(worst, std::abs(z - oracle::z_bisection(m, a)) / std::max(1.0, z));
  }
  return {worst <= 1e-8, fmt("100 matrices up to 12x12, max error %.2e", worst)};
}

Outcome mtl_oracle() {
  std::mt19937_64 rng(77);
  int compared = 0, mismatched = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const auto tr = oracle::random_trace(rng, 50, 0.1);
    const auto f = oracle::random_formula(rng, 4, 0.1);
    try {
      time_domain(f, tr);
    } catch (const Error&) {
      continue;
    }
    const auto sig = robustness_signal(f, tr);
    for (std::size_t j = 0; j < sig.size(); ++j)
      if (sig[j] != oracle::mtl_recursive(*f, tr, j)) ++mismatched;
    ++compared;
  }
  return {compared == 500 && mismatched == 0,
          std::to_string(compared) + " formulas compared, " + std::to_string(mismatched) + " mismatching samples"};
}

Outcome excursion_bound() {
  const auto sys = oracle::toy_system(0.3);
  const double horizon = 2.0;
  const ModeSchedule sched{{{0, horizon}}};
  CertOptions o;
  o.mu = 0.1;
  o.t_end = horizon;
  const auto cert = optimize_certificate(sys, sched, o);
  const std::size_t steps = steps_in(horizon, 0.01);
  const auto nom = integrate_nominal(sys, sched, {0.5, 0.0}, std::vector<Vector>(steps, Vector{0.0}), 0.01);
  BatchInput in;
  in.sys = &sys;
  in.schedule = sched;
  in.x0 = {0.5, 0.0};
  in.controller = [] { return std::make_unique<ZeroController>(1); };
  in.cert = &cert;
  in.nominal = &nom;
  SimConfig cfg;
  cfg.dt = 0.01;
  cfg.horizon = horizon;
  cfg.substeps = 4;
  cfg.paths = 2000;
  cfg.seed = 99;
  const auto rep = run_batch(in, cfg);
  const double at = cert.modes[0].alpha * horizon;
  Vector gammas;
  for (int k = 0; k < 10; ++k) gammas.push_back(at * std::pow(10.0, -1.0 + 2.0 * k / 9.0));
  const auto rows = excursion_stats(rep.sup_phi, cert.modes[0].alpha, horizon, gammas);
  bool ok = true;
  double slack = kInf;
  for (const auto& r : rows) {
    ok = ok && r.frequency <= r.bound + r.half_width;
    slack = std::min(slack, r.bound + r.half_width - r.frequency);
  }
  return {ok, fmt("2000 paths, 10 levels, smallest slack %.3f", slack) +
                  fmt(", frequency %.3f", rows[5].frequency) + fmt(" vs bound %.3f at gamma ~ aT", rows[5].bound)};
}

Outcome feedforward_guarantee() {
  const auto& sc = fourbus();
  const auto cert = run_certify(sc);
  const auto res = run_synth(sc, cert, true);
  SimConfig cfg = sc.sim;
  cfg.paths = 100;
  const auto rep = run_verify(sc, cfg, make_controller("feedforward", sc, &res.u, nullptr), &cert, &res.nominal);
  const bool ok = res.robustness >= 0 && rep.rate() >= 0.95;
  return {ok, fmt("nominal robustness of the tightened spec %.2e", res.robustness) +
                  fmt(", satisfied %.0f%% of 100 paths", 100 * rep.rate()) +
                  fmt(", min robustness %.3f rad/s", rep.min_robustness)};
}

Outcome feedback_superiority() {
  const auto& sc = fourbus();
  const auto cert = run_certify(sc);
  const auto res = run_synth(sc, cert, true);
  const auto lib = run_feedback(sc, cert, sc.feedback.centers, sc.feedback.rho);
  SimConfig cfg = sc.sim;
  cfg.paths = 100;
  cfg.disturbances = {sc.disturbance("dPd", 0.0, 0.1, 0.38)};
  const auto ff = run_verify(sc, cfg, make_controller("feedforward", sc, &res.u, nullptr), nullptr, nullptr);
  const auto fb = run_verify(sc, cfg, make_controller("feedback", sc, nullptr, &lib), nullptr, nullptr);
  const bool ok = fb.rate() >= ff.rate() + 0.10 && fb.rate() >= 0.95;
  return {ok, fmt("feedback %.0f%%", 100 * fb.rate()) + fmt(" vs feedforward %.0f%%", 100 * ff.rate()) +
                  " (paper 100% vs 81%), library of " + std::to_string(lib.size()) + " traces"};
}

Outcome ninebus_iteration() {
  const auto sc = load_scenario(kDir + "/ninebus.scenario");
  const auto cert = run_certify(sc);
  const auto res = run_synth(sc, cert, true);
  std::set<std::string> iters;
  std::string lines;
  for (const auto& a : res.added) {
    const auto colon = a.find(':');
    iters.insert(a.substr(0, colon));
    const std::string label = a.substr(colon + 1);
    lines += (lines.empty() ? "" : " ") + label.substr(0, label.find(' '));
  }
  const std::size_t rounds = iters.size() + 1;
  const double rp = robustness(sc.pool, res.nominal, 0.0);
  const bool ok = rounds <= 9 && !res.added.empty() && rp >= 0;
  return {ok, std::to_string(rounds) + " rounds, added " + std::to_string(res.added.size()) + " [" + lines + "]" +
                  fmt(", line robustness %.4f pu (paper adds P29 only)", rp)};
}

Outcome kron_fidelity() {
  const WtgParams p;
  const auto pl = build_wtg(p);
  const double dt = 1e-4, step = 1e-3;
  const std::size_t n = 10000;
  const Vector dae = simulate_dae_pgen(p, pl.eq, [&](double) { return step; }, dt, n);
  const auto d = expm_with_input(pl.kron.A, pl.kron.B, dt);
  Vector x(kWtgStates, 0.0);
  double err = 0, peak = 0;
  for (std::size_t j = 0; j <= n; ++j) {
    const double y = (pl.kron.C * x)[0] + pl.kron.D(0, 0) * step;
    err = std::max(err, std::abs(y - dae[j]));
    peak = std::max(peak, std::abs(y));
    Vector xn = d.ad * x;
    for (std::size_t i = 0; i < kWtgStates; ++i) xn[i] += d.bd(i, 0) * step;
    x = std::move(xn);
  }
  return {err <= 1e-5, fmt("step %.0e on u_w, 1 s", step) + fmt(", max |dPgen error| %.2e", err) +
                           fmt(" (response peak %.2e)", peak)};
}

Outcome lp_oracle() {
  std::mt19937_64 rng(4242);
  double worst = 0;
  int bad = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial) % 5;
    const std::size_t m = 3 + static_cast<std::size_t>(trial) % 8;
    const std::size_t meq = trial % 3 == 0 ? 1 : 0;
    const auto lp = oracle::random_lp(rng, n, m, meq, trial % 2 == 0);
    const auto ref = oracle::lp_vertex_min(lp.prog.c, lp.g_all, lp.h_all, lp.prog.E, lp.prog.f);
    const auto r = solve_lp(lp.prog);
    if (!ref || r.status != LpStatus::Optimal) {
      ++bad;
      continue;
    }
    worst = std::max(worst, std::abs(r.objective - *ref) / (1 + std::abs(*ref)));
  }
  return {bad == 0 && worst <= 1e-6, fmt("200 LPs, max relative objective error %.2e", worst) +
                                         (bad ? ", " + std::to_string(bad) + " not optimal" : std::string())};
}

Outcome replay_identity() {
  const auto& sc = fourbus();
  const auto cert = run_certify(sc);
  const SynthesisProblem base = synthesis_problem(sc, cert, true);
  const auto lib = build_library(base, default_centers(cert, sc.x0, 3, sc.feedback.seed), sc.feedback.rho, cert);
  SimConfig cfg = sc.sim;
  cfg.noise = false;
  std::size_t mismatches = 0, switches = 0;
  for (const auto& tr : lib.traces) {
    FeedbackController fb(&lib);
    const auto path = simulate_sde(sc.sys, sc.schedule, tr.x0, fb, cfg, 0);
    for (std::size_t j = 0; j < tr.u.size(); ++j)
      if (path.inputs[j] != tr.u[j]) ++mismatches;
    switches += fb.state().switches;
  }
  return {mismatches == 0 && lib.size() >= 2,
          std::to_string(lib.size()) + " centers, " + std::to_string(mismatches) + " differing inputs, " +
              std::to_string(switches) + " trace switches" +
              (lib.warnings.empty() ? std::string() : ", " + std::to_string(lib.warnings.size()) + " warnings")};
}

}  // namespace

int main() {
  run(1, "certificate validity (four-bus)", 10, certificate_validity);
  run(2, "max_z closed form vs bisection", 5, z_closed_form);
  run(3, "MTL robustness vs recursion", 30, mtl_oracle);
  run(4, "excursion bound alpha*T/gamma", 60, excursion_bound);
  run(5, "feedforward guarantee (four-bus)", 120, feedforward_guarantee);
  run(6, "feedback vs feedforward, 0.38 pu", 300, feedback_superiority);
  run(7, "nine-bus iterative synthesis", 300, ninebus_iteration);
  run(8, "Kron reduction vs DAE", 10, kron_fidelity);
  run(9, "LP vs vertex enumeration", 30, lp_oracle);
  run(10, "feedback replay identity", 30, replay_identity);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures;
}

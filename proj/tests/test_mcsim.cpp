#include <gtest/gtest.h>

#include "certsynth/bisim.hpp"
#include "certsynth/mcsim.hpp"
#include "oracles.hpp"

using namespace certsynth;

namespace {

Formula parse(const std::string& text) {
  const std::vector<VariableDecl> vars{{"x1", VarKind::State, 0}, {"x2", VarKind::State, 1}};
  return parse_formula(text, vars, {2, 1, true}).formula;
}

BatchInput toy_batch(const SwitchedLinearSystem& sys) {
  BatchInput in;
  in.sys = &sys;
  in.schedule = ModeSchedule{{{0, 1.0}}};
  in.x0 = {0.2, 0.0};
  in.spec = parse("G[0,1] (x1 <= 0.3 & x1 >= -0.3)");
  in.controller = [] { return std::make_unique<ZeroController>(1); };
  return in;
}

}  // namespace

TEST(Rng, StandardNormalMoments) {
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = rng::normal(rng::path_seed(9, 0), static_cast<std::uint64_t>(i), 0);
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 4 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 1.0, 4 * std::sqrt(2.0 / n));
  EXPECT_NE(rng::normal(1, 0, 0), rng::normal(1, 0, 1));
  EXPECT_EQ(rng::normal(1, 5, 2), rng::normal(1, 5, 2));
}

TEST(Simulate, DeterministicAcrossThreads) {
  const auto sys = oracle::toy_system();
  const auto in = toy_batch(sys);
  SimConfig cfg;
  cfg.dt = 0.01;
  cfg.horizon = 1.0;
  cfg.paths = 40;
  cfg.seed = 17;
  cfg.threads = 1;
  const auto a = run_batch(in, cfg);
  cfg.threads = 3;
  const auto b = run_batch(in, cfg);
  EXPECT_EQ(a.robustness, b.robustness);
  EXPECT_EQ(a.seeds, b.seeds);
  cfg.seed = 18;
  EXPECT_NE(run_batch(in, cfg).robustness, a.robustness);
}

TEST(Simulate, NoiselessMatchesNominal) {
  const auto sys = oracle::toy_system();
  const ModeSchedule sched{{{0, 1.0}}};
  std::vector<Vector> u;
  for (int j = 0; j < 100; ++j) u.push_back({std::sin(0.1 * j)});
  const auto nom = integrate_nominal(sys, sched, {0.2, -0.1}, u, 0.01);
  SimConfig cfg;
  cfg.dt = 0.01;
  cfg.horizon = 1.0;
  cfg.substeps = 1000;
  cfg.noise = false;
  FeedforwardController ff(&u);
  const auto tr = simulate_sde(sys, sched, {0.2, -0.1}, ff, cfg, 0);
  ASSERT_EQ(tr.size(), nom.size());
  for (std::size_t j = 0; j < tr.size(); ++j)
    for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(tr.states[j][i], nom.states[j][i], 1e-4);
  // Zero diffusion gives the same path with noise switched on.
  const auto quiet = oracle::toy_system(0.0);
  cfg.noise = true;
  const auto a = simulate_sde(quiet, sched, {0.2, -0.1}, ff, cfg, 5);
  cfg.noise = false;
  const auto b = simulate_sde(quiet, sched, {0.2, -0.1}, ff, cfg, 5);
  EXPECT_EQ(a.states, b.states);
}

TEST(Simulate, BrownianVariance) {
  // dx = σ dW: Var x(T) = σ² T.
  SwitchedLinearSystem sys;
  sys.modes = {{"bm", Matrix(1, 1), Matrix(1, 1), Matrix{{0.5}}, {}}};
  const ModeSchedule sched{{{0, 2.0}}};
  SimConfig cfg;
  cfg.dt = 0.05;
  cfg.horizon = 2.0;
  cfg.substeps = 4;
  const int n = 4000;
  double s = 0, s2 = 0;
  for (int p = 0; p < n; ++p) {
    ZeroController z(1);
    const auto tr = simulate_sde(sys, sched, {0.0}, z, cfg, rng::path_seed(3, static_cast<std::uint64_t>(p)));
    const double x = tr.states.back()[0];
    s += x;
    s2 += x * x;
  }
  const double var = s2 / n - (s / n) * (s / n);
  EXPECT_NEAR(s / n, 0.0, 4 * std::sqrt(0.5 / n));
  EXPECT_NEAR(var, 0.5, 4 * 0.5 * std::sqrt(2.0 / n));
}

TEST(Simulate, DisturbanceWindow) {
  SwitchedLinearSystem sys;
  sys.modes = {{"int", Matrix(1, 1), Matrix(1, 1), Matrix(1, 1), {}}};
  SimConfig cfg;
  cfg.dt = 0.1;
  cfg.horizon = 1.0;
  cfg.noise = false;
  cfg.disturbances = {{0.2, 0.5, {1.0}, 2.0, "d"}};
  ZeroController z(1);
  const auto tr = simulate_sde(sys, ModeSchedule{{{0, 1.0}}}, {0.0}, z, cfg, 0);
  EXPECT_NEAR(tr.states[2][0], 0.0, 1e-12);
  EXPECT_NEAR(tr.states[5][0], 0.6, 1e-12);
  EXPECT_NEAR(tr.states.back()[0], 0.6, 1e-12);
}

TEST(Batch, ReportFields) {
  const auto sys = oracle::toy_system(0.0);
  auto in = toy_batch(sys);
  SimConfig cfg;
  cfg.dt = 0.01;
  cfg.horizon = 1.0;
  cfg.paths = 5;
  const auto r = run_batch(in, cfg);
  EXPECT_EQ(r.satisfied, 5u);
  EXPECT_EQ(r.rate(), 1.0);
  EXPECT_NEAR(r.min_robustness, 0.1, 1e-3);
  EXPECT_TRUE(r.sup_phi.empty());
  in.x0 = {0.5, 0.0};
  const auto bad = run_batch(in, cfg);
  EXPECT_EQ(bad.satisfied, 0u);
  EXPECT_NEAR(bad.min_robustness, -0.2, 1e-12);
}

TEST(Batch, SupPhiIsZeroOnNominal) {
  const auto sys = oracle::toy_system();
  const ModeSchedule sched{{{0, 1.0}}};
  CertOptions o;
  o.t_end = 1.0;
  const auto cert = optimize_certificate(sys, sched, o);
  const auto nom = integrate_nominal(sys, sched, {0.2, 0.0}, std::vector<Vector>(100, Vector{0.0}), 0.01);
  EXPECT_EQ(sup_phi(cert, nom, nom), 0.0);
  auto in = toy_batch(sys);
  in.cert = &cert;
  in.nominal = &nom;
  SimConfig cfg;
  cfg.paths = 10;
  cfg.horizon = 1.0;
  cfg.substeps = 5;
  const auto r = run_batch(in, cfg);
  ASSERT_EQ(r.sup_phi.size(), 10u);
  for (double v : r.sup_phi) EXPECT_GT(v, 0.0);
}

TEST(Excursion, CountsAndBounds) {
  const Vector sup{0.1, 0.5, 1.0, 2.0};
  const auto rows = excursion_stats(sup, 0.5, 2.0, {0.5, 1.5, 4.0});
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_DOUBLE_EQ(rows[0].frequency, 0.75);
  EXPECT_DOUBLE_EQ(rows[1].frequency, 0.25);
  EXPECT_DOUBLE_EQ(rows[2].frequency, 0.0);
  EXPECT_DOUBLE_EQ(rows[0].bound, 2.0);
  EXPECT_DOUBLE_EQ(rows[2].bound, 0.25);
  EXPECT_NEAR(rows[1].half_width, 3 * std::sqrt(0.25 * 0.75 / 4), 1e-15);
  EXPECT_THROW(excursion_stats({}, 1.0, 1.0, {1.0}), Error);
  EXPECT_THROW(excursion_stats(sup, 1.0, 1.0, {0.0}), Error);
}

TEST(SimConfig, Validation) {
  SimConfig cfg;
  cfg.substeps = 0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = SimConfig{};
  cfg.horizon = 0.333;
  EXPECT_THROW(cfg.validate(), Error);
}

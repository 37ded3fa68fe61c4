#include <gtest/gtest.h>

#include <random>

#include "certsynth/sysmodel.hpp"

using namespace certsynth;

namespace {

SwitchedLinearSystem two_mode() {
  SwitchedLinearSystem sys;
  Mode m0{"a", Matrix{{-1.0, 2.0}, {-2.0, -1.0}}, Matrix{{1.0}, {0.0}}, Matrix{{0.0}, {0.1}}, {}};
  Mode m1{"b", Matrix{{-0.5, 0.0}, {1.0, -3.0}}, Matrix{{0.0}, {1.0}}, Matrix{{0.0}, {0.1}}, {0.0, 0.4}};
  sys.modes = {m0, m1};
  sys.edges = {{0, 1}, {1, 0}};
  sys.min_dwell = 0.1;
  return sys;
}

// Fine-step RK4 on the piecewise-constant-input switched system.
Vector rk4_switched(const SwitchedLinearSystem& sys, const ModeSchedule& sched, Vector x, const std::vector<Vector>& u,
                    double dt, int sub) {
  const std::size_t steps = static_cast<std::size_t>(std::round(sched.total() / dt));
  for (std::size_t j = 0; j < steps; ++j) {
    const int q = sched.mode_at((static_cast<double>(j) + 0.5) * dt);
    const auto& md = sys.modes[static_cast<std::size_t>(q)];
    const Vector d = sys.drift(q);
    const Vector bu = md.B * u[j];
    auto f = [&](const Vector& s) {
      Vector r = md.A * s;
      for (std::size_t i = 0; i < r.size(); ++i) r[i] += bu[i] + d[i];
      return r;
    };
    const double h = dt / sub;
    for (int k = 0; k < sub; ++k) {
      const Vector k1 = f(x);
      const Vector k2 = f(axpy(h / 2, k1, x));
      const Vector k3 = f(axpy(h / 2, k2, x));
      const Vector k4 = f(axpy(h, k3, x));
      for (std::size_t i = 0; i < x.size(); ++i) x[i] += h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
    }
  }
  return x;
}

}  // namespace

TEST(IntegrateNominal, ConstantWhenNoDynamics) {
  SwitchedLinearSystem sys;
  sys.modes = {{"z", Matrix(2, 2), Matrix(2, 1), Matrix(2, 1), {}}};
  ModeSchedule sched{{{0, 1.0}}};
  const auto tr = integrate_nominal(sys, sched, {1.5, -2.0}, std::vector<Vector>(100, Vector{3.0}), 0.01);
  ASSERT_EQ(tr.size(), 101u);
  for (const auto& x : tr.states) {
    EXPECT_EQ(x[0], 1.5);
    EXPECT_EQ(x[1], -2.0);
  }
}

TEST(IntegrateNominal, ExponentialDecay) {
  SwitchedLinearSystem sys;
  sys.modes = {{"d", -Matrix::identity(3), Matrix(3, 1), Matrix(3, 1), {}}};
  ModeSchedule sched{{{0, 2.0}}};
  const Vector x0{1.0, 2.0, -1.0};
  const auto tr = integrate_nominal(sys, sched, x0, std::vector<Vector>(200, Vector{0.0}), 0.01);
  for (std::size_t j = 0; j < tr.size(); ++j)
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(tr.states[j][i], std::exp(-tr.times[j]) * x0[i], 1e-8);
}

TEST(IntegrateNominal, TwoModeMatchesRk4) {
  const auto sys = two_mode();
  ModeSchedule sched{{{0, 0.5}, {1, 0.7}, {0, 0.3}}};
  std::vector<Vector> u;
  for (int j = 0; j < 150; ++j) u.push_back({std::sin(0.1 * j)});
  const Vector x0{0.3, -0.2};
  const auto tr = integrate_nominal(sys, sched, x0, u, 0.01);
  const Vector ref = rk4_switched(sys, sched, x0, u, 0.01, 20);
  EXPECT_NEAR(tr.states.back()[0], ref[0], 1e-6);
  EXPECT_NEAR(tr.states.back()[1], ref[1], 1e-6);
  EXPECT_EQ(tr.modes[0], 0);
  EXPECT_EQ(tr.modes[60], 1);
  EXPECT_EQ(tr.modes.back(), 0);
  const auto disc = discretize(sys, sched, 0.01);
  EXPECT_EQ(disc.steps(), 150u);
  EXPECT_EQ(disc.per_segment.size(), 2u);
}

TEST(IntegrateNominal, Superposition) {
  auto sys = two_mode();
  sys.modes[1].drift.clear();
  ModeSchedule sched{{{0, 0.5}, {1, 0.5}}};
  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd;
  std::vector<Vector> u1, u2, u12;
  for (int j = 0; j < 100; ++j) {
    u1.push_back({nd(rng)});
    u2.push_back({nd(rng)});
    u12.push_back({u1.back()[0] + u2.back()[0]});
  }
  const Vector z{0.0, 0.0};
  const auto a = integrate_nominal(sys, sched, z, u1, 0.01);
  const auto b = integrate_nominal(sys, sched, z, u2, 0.01);
  const auto c = integrate_nominal(sys, sched, z, u12, 0.01);
  for (std::size_t j = 0; j < c.size(); ++j)
    for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(c.states[j][i], a.states[j][i] + b.states[j][i], 1e-9);
}

TEST(IntegrateNominal, Concatenation) {
  const auto sys = two_mode();
  std::vector<Vector> u(200, Vector{0.3});
  const Vector x0{1.0, 1.0};
  const auto whole = integrate_nominal(sys, ModeSchedule{{{1, 2.0}}}, x0, u, 0.01);
  const auto first = integrate_nominal(sys, ModeSchedule{{{1, 1.0}}}, x0, u, 0.01);
  const auto second = integrate_nominal(sys, ModeSchedule{{{1, 1.0}}}, first.states.back(), u, 0.01);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(whole.states.back()[i], second.states.back()[i], 1e-9);
}

TEST(IntegrateNominal, Misaligned) {
  const auto sys = two_mode();
  try {
    integrate_nominal(sys, ModeSchedule{{{0, 0.505}}}, {0.0, 0.0}, std::vector<Vector>(100, Vector{0.0}), 0.01);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ScheduleMisaligned);
  }
}

TEST(Schedule, Validation) {
  const auto sys = two_mode();
  EXPECT_NO_THROW((ModeSchedule{{{0, 0.5}, {1, 0.5}, {0, 0.05}}}.validate(sys)));
  EXPECT_THROW((ModeSchedule{{{0, 0.05}, {1, 0.5}}}.validate(sys)), Error);
  auto one_way = sys;
  one_way.edges = {{0, 1}};
  EXPECT_THROW((ModeSchedule{{{0, 0.5}, {1, 0.5}, {0, 0.5}}}.validate(one_way)), Error);
  const ModeSchedule s{{{0, 5.0}, {1, 3.75}, {0, 1.25}}};
  EXPECT_EQ(s.mode_at(4.99), 0);
  EXPECT_EQ(s.mode_at(5.0), 1);
  EXPECT_EQ(s.truncated(5.0).segments.size(), 1u);
  EXPECT_NEAR(s.truncated(6.0).total(), 6.0, 1e-12);
}

TEST(Ball, Containment) {
  InitialBall ball{{1.0, 2.0}, 1.0, Matrix::identity(2), {}};
  EXPECT_TRUE(ball_contains_point(ball, Vector{1.0, 2.0}));
  EXPECT_FALSE(ball_contains_point(ball, Vector{2.0000001, 2.0}));
  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 50; ++trial) {
    Matrix g(3, 3);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) g(i, j) = nd(rng);
    const Matrix m = symmetrize(g * g.transpose() + Matrix::identity(3));
    Vector dir{nd(rng), nd(rng), nd(rng)};
    const double r = 2.5;
    const double s = std::sqrt(r / quad_form(m, dir));
    const Vector c{0.1, 0.2, 0.3};
    Vector x(3);
    for (std::size_t i = 0; i < 3; ++i) x[i] = c[i] + s * dir[i] * (1 - 1e-12);
    InitialBall b{c, r, m, {}};
    EXPECT_TRUE(ball_contains_point(b, x));
    b.radius = 0.999999 * r;
    EXPECT_FALSE(ball_contains_point(b, x));
  }
}

TEST(Ball, PinnedCoordinates) {
  InitialBall ball{{0.0, 0.0, 5.0}, 1.0, Matrix::identity(2), {0, 1}};
  EXPECT_TRUE(ball_contains_point(ball, Vector{0.5, 0.5, 5.0}));
  EXPECT_FALSE(ball_contains_point(ball, Vector{0.5, 0.5, 5.1}));
}

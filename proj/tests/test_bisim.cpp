#include <gtest/gtest.h>

#include <random>

#include "certsynth/bisim.hpp"
#include "oracles.hpp"

using namespace certsynth;

namespace {

SwitchedLinearSystem two_mode() {
  SwitchedLinearSystem sys;
  Mode m0{"a", Matrix{{-1.0, 2.0}, {-2.0, -1.0}}, Matrix{{1.0}, {0.0}}, Matrix{{0.0}, {0.2}}, {}};
  Mode m1{"b", Matrix{{-0.5, 0.0}, {1.0, -3.0}}, Matrix{{0.0}, {1.0}}, Matrix{{0.0}, {0.2}}, {}};
  sys.modes = {m0, m1};
  sys.edges = {{0, 1}, {1, 0}};
  sys.min_dwell = 0.1;
  sys.state_names = {"x", "y"};
  sys.input_names = {"u"};
  return sys;
}

Formula parse(const std::string& text, std::size_t n = 2) {
  std::vector<VariableDecl> vars;
  for (std::size_t i = 0; i < n; ++i) vars.push_back({std::string(1, static_cast<char>('x' + i)), VarKind::State, i});
  return parse_formula(text, vars, {n, 1, true}).formula;
}

CertOptions toy_options(const Formula& f) {
  CertOptions o;
  o.mu = 0.2;
  o.t_end = 2.0;
  fragment_normals(f, o.normals, o.bands);
  return o;
}

}  // namespace

TEST(MaxZ, ClosedFormExamples) {
  EXPECT_DOUBLE_EQ(max_z(Matrix::identity(3), Vector{0.0, 1.0, 0.0}), 1.0);
  EXPECT_DOUBLE_EQ(max_z(Matrix{{4.0, 0.0}, {0.0, 1.0}}, Vector{1.0, 0.0}), 2.0);
  EXPECT_TRUE(std::isinf(max_z(Matrix::identity(2), Vector{0.0, 0.0})));
}

TEST(MaxZ, MatchesBisection) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd;
  for (int k = 0; k < 30; ++k) {
    const std::size_t n = 1 + k % 8;
    const Matrix m = oracle::random_pd(rng, n);
    Vector a(n);
    for (double& v : a) v = nd(rng);
    const double na = norm2(a);
    for (double& v : a) v /= na;
    const double z = max_z(m, a);
    EXPECT_NEAR(z, oracle::z_bisection(m, a), 1e-8 * std::max(1.0, z)) << "case " << k;
  }
}

TEST(MaxZ, ScalesWithSquareRoot) {
  std::mt19937_64 rng(3);
  const Matrix m = oracle::random_pd(rng, 4);
  const Vector a{0.5, 0.5, 0.5, 0.5};
  EXPECT_NEAR(max_z(m * 9.0, a), 3.0 * max_z(m, a), 1e-12);
}

TEST(MaxZ, SingularMetric) {
  EXPECT_THROW(max_z(Matrix{{1.0, 1.0}, {1.0, 1.0}}, Vector{1.0, 0.0}), Error);
}

TEST(CertifyMode, NegativeIdentity) {
  const auto c = certify_mode(Matrix::identity(2) * -1.0, Matrix(2, 1), 0.0, Matrix::identity(2));
  EXPECT_NEAR(c.M(0, 0), 0.5, 1e-14);
  EXPECT_NEAR(c.M(1, 1), 0.5, 1e-14);
  EXPECT_NEAR(c.M(0, 1), 0.0, 1e-14);
  EXPECT_EQ(c.alpha, 0.0);
}

TEST(CertifyMode, ShiftedSpectrumNotHurwitz) {
  // -0.1 + 0.3/2 > 0
  try {
    certify_mode(Matrix{{-0.1, 0.0}, {0.0, -1.0}}, Matrix(2, 1), 0.3, Matrix::identity(2));
    FAIL() << "expected NotHurwitz";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NotHurwitz);
  }
}

TEST(CertifyMode, AlphaIsNoiseTrace) {
  const Matrix a{{-1.0, 2.0}, {-2.0, -1.0}};
  const Matrix s{{0.3}, {0.1}};
  const auto c = certify_mode(a, s, 0.5, Matrix::identity(2));
  EXPECT_NEAR(c.alpha, quad_form(c.M, Vector{0.3, 0.1}), 1e-14);
  EXPECT_GT(min_eigenvalue(c.M), 0.0);
}

TEST(ProbBound, Examples) {
  ModeCertificate c;
  c.alpha = 0.0;
  EXPECT_EQ(prob_bound(c, 5.0, 1.0), 1.0);
  c.alpha = 2.0;
  EXPECT_EQ(prob_bound(c, 5.0, 10.0), 0.0);
  EXPECT_LT(prob_bound(c, 5.0, 20.0), prob_bound(c, 5.0, 40.0));
  EXPECT_GT(prob_bound(c, 1.0, 40.0), prob_bound(c, 5.0, 40.0));
  EXPECT_THROW(prob_bound(c, 5.0, 0.0), Error);
}

TEST(Containment, ShrinkingBallPasses) {
  BisimCertificate cert;
  cert.modes = {{Matrix::identity(2), 0.5, 0.0}, {Matrix::identity(2), 0.5, 0.0}};
  cert.segment_mode = {0, 1};
  cert.segment_start = {0.0, 1.0};
  cert.segment_dwell = {1.0, 1.0};
  cert.segment_r = {1.0, 1.0};
  const auto rep = containment_chain_check(cert);
  EXPECT_TRUE(rep.ok);
  ASSERT_EQ(rep.margins.size(), 1u);
  EXPECT_NEAR(rep.margins[0], std::exp(0.5) - 1.0, 1e-12);
}

TEST(Containment, DoubledMetricFails) {
  BisimCertificate cert;
  cert.modes = {{Matrix::identity(2), 0.0, 0.0}, {Matrix::identity(2) * 2.0, 0.0, 0.0}};
  cert.segment_mode = {0, 1};
  cert.segment_start = {0.0, 1.0};
  cert.segment_dwell = {1.0, 1.0};
  cert.segment_r = {1.0, 1.0};
  const auto rep = containment_chain_check(cert);
  EXPECT_FALSE(rep.ok);
  EXPECT_NEAR(rep.margins[0], -1.0, 1e-12);
}

TEST(Optimize, InvariantsHold) {
  const auto sys = two_mode();
  const ModeSchedule sched{{{0, 1.0}, {1, 1.0}}};
  const Formula f = parse("G[0,2] (x <= 1 & x >= -1 & y <= 2 & y >= -2)");
  for (const char* method : {"diag", "full"}) {
    CertOptions o = toy_options(f);
    o.method = method;
    const auto cert = optimize_certificate(sys, sched, o);
    const auto fails = check_certificate(cert, sys);
    EXPECT_TRUE(fails.empty()) << method << ": " << (fails.empty() ? "" : fails.front());
    EXPECT_NEAR(cert.gamma_hat, std::max(cert.modes[0].alpha, cert.modes[1].alpha) * 2.0 / 0.05, 1e-12);
    EXPECT_NEAR(cert.segment_r[0], 4 * cert.gamma_hat, 1e-12);
    EXPECT_EQ(cert.segment_mode, (std::vector<int>{0, 1}));
    EXPECT_TRUE(containment_chain_check(cert).ok);
  }
}

TEST(Optimize, FullNoWorseThanDiag) {
  const auto sys = two_mode();
  const ModeSchedule sched{{{0, 2.0}}};
  const Formula f = parse("G[0,2] (x <= 1 & x >= -1)");
  CertOptions o = toy_options(f);
  o.method = "diag";
  const auto d = optimize_certificate(sys, sched, o);
  o.method = "full";
  const auto c = optimize_certificate(sys, sched, o);
  const auto od = offset_table(d, f), oc = offset_table(c, f);
  EXPECT_LE(oc.delta[0][0][0], od.delta[0][0][0] * (1 + 1e-9));
}

TEST(Optimize, ZetaIsPureScale) {
  const auto sys = two_mode();
  const ModeSchedule sched{{{0, 1.0}, {1, 1.0}}};
  const Formula f = parse("G[0,2] (x <= 1 & x >= -1)");
  CertOptions o = toy_options(f);
  o.shape_index = 1;
  o.zeta = 1.0;
  const auto c1 = optimize_certificate(sys, sched, o);
  o.zeta = 0.25;
  const auto c2 = optimize_certificate(sys, sched, o);
  EXPECT_NEAR(c1.modes[0].M(1, 1), 1.0, 1e-12);
  EXPECT_NEAR(c2.modes[0].M(1, 1), 0.25, 1e-12);
  const auto t1 = offset_table(c1, f), t2 = offset_table(c2, f);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(t1.delta[0][0][i], t2.delta[0][0][i], 1e-9);
}

TEST(Optimize, FrozenCoordinateExcluded) {
  SwitchedLinearSystem sys;
  sys.modes = {{"m", Matrix{{-1.0, 0.0, 0.0}, {0.0, -2.0, 0.0}, {0.0, 0.0, 0.0}}, Matrix(3, 1),
                Matrix{{0.1}, {0.0}, {0.0}}, {0.0, 0.0, 1.0}}};
  EXPECT_EQ(certified_coords(sys), (std::vector<std::size_t>{0, 1}));
  CertOptions o;
  o.t_end = 1.0;
  const auto cert = optimize_certificate(sys, ModeSchedule{{{0, 1.0}}}, o);
  EXPECT_EQ(cert.coords.size(), 2u);
  // Errors along the frozen coordinate are invisible to the metric.
  EXPECT_EQ(cert.dist2(Vector{0.0, 0.0, 5.0}, 0.0), 0.0);
}

TEST(Offsets, ClosedForm) {
  BisimCertificate cert;
  cert.coords = {0, 1};
  cert.modes = {{Matrix::identity(2), 0.4, 0.0}};
  cert.gamma_hat = 1.0;
  cert.segment_mode = {0};
  cert.segment_start = {0.0};
  cert.segment_dwell = {3.0};
  cert.segment_r = {1.0};
  const Formula f = parse("G[0,3] (x <= 5)");
  const auto tab = offset_table(cert, f);
  EXPECT_DOUBLE_EQ(tab.z[0][0][0], 1.0);
  EXPECT_DOUBLE_EQ(tab.delta[0][0][0], 2.0);
  const Formula rf = robustify(f, delta_offsets(cert, f));
  const auto p = fragment_terms(rf)[0].preds[0];
  EXPECT_NEAR(p.bound_at(0.0), 3.0, 1e-12);
  EXPECT_NEAR(p.bound_at(2.0), 5.0 - 2.0 * std::exp(-0.4), 1e-12);
}

TEST(Offsets, RobustModificationIsSound) {
  // A nominal trace meeting the tightened bound keeps every state in the
  // r̂-ball and γ̂-inflation inside the original half-space.
  const auto sys = two_mode();
  const ModeSchedule sched{{{0, 2.0}}};
  const Formula f = parse("G[0,2] (x <= 1 & x >= -1)");
  const auto cert = optimize_certificate(sys, sched, toy_options(f));
  const auto tab = offset_table(cert, f);
  const Matrix& m = cert.modes[0].M;
  const Vector a{1.0, 0.0};
  const double rad = std::sqrt(cert.segment_r[0]) + std::sqrt(cert.gamma_hat);
  // max aᵀe over eᵀMe <= rad² is rad·√(aᵀM⁻¹a) = rad / z.
  EXPECT_NEAR(rad * std::sqrt(dot(a, solve(m, a))), tab.delta[0][0][0], 1e-12);
}

TEST(FragmentNormals, PairsTwoSidedBands) {
  const Formula f = parse("G[0,5] (x <= 0.5 & x >= -0.3 & y <= 2) & G[1,5] (x <= 0.2 & x >= -0.2)");
  std::vector<Vector> normals;
  Vector bands;
  fragment_normals(f, normals, bands);
  ASSERT_EQ(normals.size(), 2u);
  EXPECT_NEAR(bands[0], 0.2, 1e-12);
  EXPECT_NEAR(bands[1], 2.0, 1e-12);
}

TEST(FragmentNormals, DifferentLabelsDoNotPair) {
  // Same normal through two names: each side keeps its own |b|.
  std::vector<VariableDecl> vars{{"x", VarKind::State, 0}, {"w", VarKind::State, 0}};
  const Formula f = parse_formula("G[0,1] (x <= 0.5 & w >= -0.1)", vars, {2, 1, true}).formula;
  std::vector<Vector> normals;
  Vector bands;
  fragment_normals(f, normals, bands);
  ASSERT_EQ(normals.size(), 1u);
  EXPECT_NEAR(bands[0], 0.1, 1e-12);
}

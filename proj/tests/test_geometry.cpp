#include <gtest/gtest.h>

#include <random>

#include <msos/geometry.hpp>

using namespace msos;

namespace {

constexpr double pi = std::numbers::pi;

Sim2Point random_point(std::mt19937_64& r, double theta_max = pi, double tau_max = 1.0) {
  std::uniform_real_distribution<double> u(-1, 1);
  return {5 * u(r), 5 * u(r), tau_max * u(r), theta_max * u(r)};
}

double dist(const Sim2Point& a, const Sim2Point& b) {
  return std::max({std::abs(a.x - b.x), std::abs(a.y - b.y), std::abs(a.tau - b.tau),
                   std::abs(wrap_angle(a.theta - b.theta))});
}

// Classical RK4 on dx = e^tau R_theta (c2, c3), dtau = c4, dtheta = c1.
Sim2Point rk4_flow(const LieCoefficients& c, double t, int steps) {
  std::array<double, 4> s{0, 0, 0, 0};  // x, y, tau, theta
  auto f = [&](const std::array<double, 4>& q) {
    const double a = std::exp(q[2]), co = std::cos(q[3]), si = std::sin(q[3]);
    return std::array<double, 4>{a * (co * c.c2 - si * c.c3), a * (si * c.c2 + co * c.c3), c.c4, c.c1};
  };
  const double h = t / steps;
  for (int i = 0; i < steps; ++i) {
    auto k1 = f(s), s2 = s;
    for (int j = 0; j < 4; ++j) s2[j] += 0.5 * h * k1[j];
    auto k2 = f(s2), s3 = s;
    for (int j = 0; j < 4; ++j) s3[j] += 0.5 * h * k2[j];
    auto k3 = f(s3), s4 = s;
    for (int j = 0; j < 4; ++j) s4[j] += h * k3[j];
    auto k4 = f(s4);
    for (int j = 0; j < 4; ++j) s[j] += h / 6 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);
  }
  return {s[0], s[1], s[2], wrap_angle(s[3])};
}

}  // namespace

TEST(GroupMul, IdentityAndRotation) {
  const Sim2Point h{1.5, -2, 0.3, 0.7};
  EXPECT_LT(dist(group_mul({}, h), h), 1e-15);
  const auto r = group_mul({0, 0, 0, pi / 2}, {1, 0, 0, 0});
  EXPECT_LT(dist(r, {0, 1, 0, pi / 2}), 1e-15);
}

TEST(GroupMul, AssociativityAndInverse) {
  std::mt19937_64 r(11);
  for (int i = 0; i < 10000; ++i) {
    const auto g = random_point(r), h = random_point(r), f = random_point(r);
    ASSERT_LT(dist(group_mul(group_mul(g, h), f), group_mul(g, group_mul(h, f))), 1e-12);
    ASSERT_LT(dist(group_mul(g, group_inv(g)), {}), 1e-12);
    ASSERT_LT(dist(group_mul(group_inv(g), g), {}), 1e-12);
  }
}

TEST(GroupInv, Examples) {
  EXPECT_LT(dist(group_inv({}), {}), 1e-15);
  EXPECT_LT(dist(group_inv({1, 0, 0, 0}), {-1, 0, 0, 0}), 1e-15);
}

TEST(GroupMul, ThetaCanonical) {
  const auto g = group_mul({0, 0, 0, 3}, {0, 0, 0, 3});
  EXPECT_GT(g.theta, -pi);
  EXPECT_LE(g.theta, pi);
  EXPECT_NEAR(wrap_angle(pi), pi, 1e-15);
  EXPECT_NEAR(wrap_angle(-pi), pi, 1e-15);
}

TEST(ExpMap, PureSubgroups) {
  EXPECT_LT(dist(exp_map({1, 0, 0, 0}, 0.8), {0, 0, 0, 0.8}), 1e-15);
  EXPECT_LT(dist(exp_map({0, 1, 0, 0}, 2.5), {2.5, 0, 0, 0}), 1e-15);
  EXPECT_LT(dist(exp_map({0, 0, 0, 1}, 0.4), {0, 0, 0.4, 0}), 1e-15);
}

TEST(ExpMap, StraightLineLimitWithOffset) {
  const Sim2Point g0{1, 2, std::log(2.0), pi / 2};
  const auto g = exp_map({0, 1, 0.5, 0}, 3, g0);
  // x0 + t e^tau0 (cos th0 c2 - sin th0 c3), y0 + t e^tau0 (sin th0 c2 + cos th0 c3)
  EXPECT_NEAR(g.x, 1 + 3 * 2 * (-0.5), 1e-12);
  EXPECT_NEAR(g.y, 2 + 3 * 2 * 1.0, 1e-12);
}

TEST(ExpMap, MatchesRk4Oracle) {
  std::mt19937_64 r(5);
  std::uniform_real_distribution<double> u(0.1, 1.0), v(-1, 1), sgn(0, 1);
  for (int i = 0; i < 200; ++i) {
    const LieCoefficients c{(sgn(r) < 0.5 ? -1 : 1) * u(r), v(r), v(r), (sgn(r) < 0.5 ? -1 : 1) * u(r)};
    const double t = 0.5 * sgn(r);
    ASSERT_LT(dist(exp_map(c, t), rk4_flow(c, t, 1000)), 1e-6);
  }
}

TEST(ExpMap, LeftTranslationOfCurve) {
  std::mt19937_64 r(6);
  const LieCoefficients c{0.4, 1, -0.3, 0.2};
  const auto g0 = random_point(r);
  for (double t : {0.1, 0.5, 1.0}) EXPECT_LT(dist(exp_map(c, t, g0), group_mul(g0, exp_map(c, t))), 1e-12);
}

TEST(LogMap, Examples) {
  const auto e = log_map({});
  EXPECT_EQ(e.c1, 0);
  EXPECT_EQ(e.c2, 0);
  EXPECT_EQ(e.c3, 0);
  EXPECT_EQ(e.c4, 0);
  const auto t = log_map({3, -2, 0, 0});
  EXPECT_NEAR(t.c1, 0, 1e-15);
  EXPECT_NEAR(t.c2, 3, 1e-15);
  EXPECT_NEAR(t.c3, -2, 1e-15);
  EXPECT_NEAR(t.c4, 0, 1e-15);
}

TEST(LogMap, RoundTrip) {
  std::mt19937_64 r(7);
  for (int i = 0; i < 10000; ++i) {
    const auto g = random_point(r, 3.0, 1.0);
    ASSERT_LT(dist(exp_map(log_map(g), 1), g), 1e-9) << i;
  }
}

TEST(WeightedModulus, Examples) {
  for (auto c : {LieCoefficients{0, 0, 0, 0}}) {
    EXPECT_EQ(weighted_modulus(c).original, 0);
    EXPECT_EQ(weighted_modulus(c).smooth, 0);
  }
  EXPECT_DOUBLE_EQ(weighted_modulus({1, 0, 0, 0}).original, 1);
  EXPECT_DOUBLE_EQ(weighted_modulus({1, 0, 0, 0}).smooth, 1);
  EXPECT_DOUBLE_EQ(weighted_modulus({0, 0, 1, 0}).original, 1);
  EXPECT_DOUBLE_EQ(weighted_modulus({0, 0, 1, 0}).smooth, 1);
}

TEST(WeightedModulus, Sandwich) {
  std::mt19937_64 r(8);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int i = 0; i < 10000; ++i) {
    const auto m = weighted_modulus({u(r), u(r), u(r), u(r)});
    ASSERT_LE(m.original / std::sqrt(2.0), m.smooth + 1e-14);
    ASSERT_LE(m.smooth, m.original + 1e-14);
  }
}

TEST(StructureConstants, Table) {
  const auto c = structure_constants();
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k) EXPECT_EQ(c[i][j][k], -c[j][i][k]);
  int nonzero = 0;
  for (auto& a : c)
    for (auto& b : a)
      for (double v : b) nonzero += v != 0;
  EXPECT_EQ(nonzero, 8);
  EXPECT_EQ(c[0][1][2], 1);
  EXPECT_EQ(c[0][2][1], -1);
  EXPECT_EQ(c[3][1][1], 1);
  EXPECT_EQ(c[3][2][2], 1);
}

TEST(StructureConstants, MatchFlowCommutators) {
  // [A_i, A_j] from the group commutator exp(sA_i) exp(sA_j) exp(-sA_i) exp(-sA_j) = exp(s^2 [A_i, A_j]) + O(s^3).
  const auto c = structure_constants();
  const double s = 1e-4;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      LieCoefficients a{}, b{}, na{}, nb{};
      double* pa = &a.c1;
      double* pb = &b.c1;
      pa[i] = 1;
      pb[j] = 1;
      (&na.c1)[i] = -1;
      (&nb.c1)[j] = -1;
      const auto g = group_mul(group_mul(exp_map(a, s), exp_map(b, s)), group_mul(exp_map(na, s), exp_map(nb, s)));
      const auto l = log_map(g);
      const double got[4] = {l.c1 / (s * s), l.c2 / (s * s), l.c3 / (s * s), l.c4 / (s * s)};
      for (int k = 0; k < 4; ++k) EXPECT_NEAR(got[k], c[i][j][k], 1e-3) << i << j << k;
    }
}

TEST(LeftFrame, Examples) {
  const auto id = left_frame_coefficients({});
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(id[i][j], i == j ? 1 : 0);
  const auto q = left_frame_coefficients({0, 0, 0, pi / 2});
  EXPECT_NEAR(q[1][1], 0, 1e-15);
  EXPECT_NEAR(q[1][2], 1, 1e-15);
  EXPECT_NEAR(q[2][1], -1, 1e-15);
  EXPECT_NEAR(q[2][2], 0, 1e-15);
  const auto s = left_frame_coefficients({0, 0, std::log(2.0), 0});
  EXPECT_NEAR(s[1][1], 2, 1e-15);
  EXPECT_NEAR(s[2][2], 2, 1e-15);
}

TEST(LeftFrame, Determinant) {
  std::mt19937_64 r(9);
  for (int i = 0; i < 100; ++i) {
    const auto g = random_point(r);
    const auto m = left_frame_coefficients(g);
    const double det = m[0][0] * m[3][3] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]);
    EXPECT_NEAR(det, std::exp(2 * g.tau), 1e-12 * std::exp(2 * g.tau));
  }
}

TEST(LeftFrame, ChainRuleAndLeftInvariance) {
  // F(x, y, tau, theta) smooth; A_i F(g) = d/ds F(g exp(s A_i)) must equal frame row i . grad F(g),
  // and (A_i (F o L_h))(g) = (A_i F)(h g).
  auto F = [](const Sim2Point& p) {
    return std::sin(0.3 * p.x + 0.2 * p.y) * std::cos(p.theta) + 0.5 * p.tau * p.x + std::cos(0.7 * p.y - p.theta);
  };
  auto grad = [&](const Sim2Point& p) {
    const double e = 1e-6;
    std::array<double, 4> g{};
    for (int i = 0; i < 4; ++i) {
      Sim2Point a = p, b = p;
      double* pa[4] = {&a.theta, &a.x, &a.y, &a.tau};
      double* pb[4] = {&b.theta, &b.x, &b.y, &b.tau};
      *pa[i] += e;
      *pb[i] -= e;
      g[i] = (F(a) - F(b)) / (2 * e);
    }
    return g;
  };
  auto along = [&](auto&& fn, const Sim2Point& g, int i) {
    LieCoefficients c{};
    (&c.c1)[i] = 1;
    const double e = 1e-6;
    LieCoefficients n = c;
    (&n.c1)[i] = -1;
    return (fn(exp_map(c, e, g)) - fn(exp_map(n, e, g))) / (2 * e);
  };
  std::mt19937_64 r(10);
  for (int it = 0; it < 20; ++it) {
    const auto g = random_point(r, 3.0), h = random_point(r, 3.0);
    const auto m = left_frame_coefficients(g);
    const auto d = grad(g);
    // Lie coefficient order is (theta, xi, eta, tau); frame rows use the same order.
    for (int i = 0; i < 4; ++i) {
      double row = 0;
      for (int j = 0; j < 4; ++j) row += m[i][j] * d[j];
      EXPECT_NEAR(along(F, g, i), row, 1e-6);
      auto Fh = [&](const Sim2Point& p) { return F(group_mul(h, p)); };
      EXPECT_NEAR(along(Fh, g, i), along(F, group_mul(h, g), i), 1e-6);
    }
  }
}

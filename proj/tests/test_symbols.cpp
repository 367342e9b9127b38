#include <cmath>
#include <random>

#include <gtest/gtest.h>
#include <Eigen/Dense>

#include "kds/symbols.hpp"

using namespace kds;

namespace {

const SpacetimeParams kKds = kerr_de_sitter(3.0, 0.2, 0.05);
const SpacetimeParams kDss = de_sitter_schwarzschild(3.0, 0.2);

PhasePoint random_point(std::mt19937_64& rng, const SpacetimeParams& p) {
  const auto h = horizon_roots(p);
  std::uniform_real_distribution<double> R(h.r_minus * 0.9, h.r_plus * 1.05), Th(0.3, pi - 0.3), X(-2.0, 2.0);
  return {R(rng), Th(rng), X(rng), X(rng), X(rng), X(rng)};
}

// v^T (rho^2 G) v with v = (xi, sigma, eta, zeta), the expanded metric form
template <class T>
T metric_form(const SpacetimeParams& p, const PhasePoint& q, CSample cs, T sigma, int s) {
  const Eigen::Matrix4d M = dual_metric_scaled(p, q.r, q.theta, cs, s);
  const T v[4] = {T(q.xi), sigma, T(q.eta), T(q.zeta)};
  T acc = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) acc += M(i, j) * v[i] * v[j];
  return acc;
}

// finite-difference symplectic gradient (d_xi p, d_eta p, d_zeta p, -d_r p, -d_theta p, 0)
template <class F>
PhaseVector fd_field(F p, const PhasePoint& q) {
  auto d = [&](auto setter) {
    return num::richardson_derivative(
        [&](double e) {
          PhasePoint x = q;
          setter(x, e);
          return p(x);
        },
        0.0, 1e-4);
  };
  return {d([](PhasePoint& x, double e) { x.xi += e; }), d([](PhasePoint& x, double e) { x.eta += e; }),
          d([](PhasePoint& x, double e) { x.zeta += e; }), -d([](PhasePoint& x, double e) { x.r += e; }),
          -d([](PhasePoint& x, double e) { x.theta += e; }), 0.0};
}

double rel_err(const PhaseVector& a, const PhaseVector& b) {
  double num = 0.0, den = 0.0;
  for (int i = 0; i < 6; ++i) num = std::max(num, std::abs(a[i] - b[i])), den = std::max(den, std::abs(b[i]));
  return num / std::max(den, 1e-300);
}

}  // namespace

TEST(KdsClassical, SchwarzschildSubstitution) {
  const PhasePoint q{1.2, pi / 2, 0.0, 1.0, 0.0, 0.0};
  EXPECT_NEAR(kds_classical_symbol(kDss, zero_c(), q, 1), -mu_tilde(kDss, 1.2).value, 1e-15);
}

TEST(KdsClassical, ZeroSection) {
  std::mt19937_64 rng(1);
  for (int k = 0; k < 10; ++k) {
    auto q = random_point(rng, kKds);
    q.xi = q.eta = q.zeta = 0.0;
    EXPECT_EQ(kds_classical_symbol(kKds, zero_c(), q, 1), 0.0);
  }
}

TEST(KdsClassical, EquatorialReflection) {
  std::mt19937_64 rng(2);
  for (int k = 0; k < 20; ++k) {
    const auto q = random_point(rng, kKds);
    PhasePoint m = q;
    m.theta = pi - q.theta;
    m.eta = -q.eta;
    EXPECT_NEAR(kds_classical_symbol(kKds, zero_c(), q, 1), kds_classical_symbol(kKds, zero_c(), m, 1), 1e-13);
  }
}

TEST(KdsFull, ReducesToClassicalAtZeroSigma) {
  std::mt19937_64 rng(3);
  const auto c = profile_of(choose_c(kKds));
  for (int k = 0; k < 20; ++k) {
    const auto q = random_point(rng, kKds);
    for (int s : {1, -1}) {
      const cplx v = kds_full_symbol(kKds, c, q, 0.0, s);
      EXPECT_NEAR(v.real(), kds_classical_symbol(kKds, c, q, s), 1e-13);
      EXPECT_EQ(v.imag(), 0.0);
    }
  }
}

TEST(KdsFull, RealForRealSigma) {
  std::mt19937_64 rng(4);
  const auto c = profile_of(choose_c(kKds));
  for (int k = 0; k < 20; ++k) EXPECT_EQ(kds_full_symbol(kKds, c, random_point(rng, kKds), 1.7, 1).imag(), 0.0);
}

TEST(KdsFull, ExpandedMetricOracle) {
  std::mt19937_64 rng(5);
  const auto cf = choose_c(kKds);
  const auto c = profile_of(cf);
  for (int k = 0; k < 10; ++k) {
    const auto q = random_point(rng, kKds);
    const cplx sigma(0.7 * k - 2.0, 0.3 * k - 1.0);
    for (int s : {1, -1}) {
      const cplx a = kds_full_symbol(kKds, c, q, sigma, s);
      const cplx b = metric_form<cplx>(kKds, q, c(q.r), sigma, s);
      EXPECT_LT(std::abs(a - b), 1e-12 * (1.0 + std::abs(b)));
    }
  }
}

TEST(KdsSemiclassical, SchwarzschildDisplayedForm) {
  std::mt19937_64 rng(6);
  for (int k = 0; k < 20; ++k) {
    const auto q = random_point(rng, kDss);
    const double z = 0.8;
    for (int s : {1, -1}) {
      const double st = std::sin(q.theta);
      const double expect = -mu_tilde(kDss, q.r).value * q.xi * q.xi - s * 2.0 * q.r * q.r * q.xi * z - q.eta * q.eta -
                            q.zeta * q.zeta / (st * st);
      const cplx v = kds_semiclassical_symbol(kDss, zero_c(), {q, z, 1e-3}, s);
      EXPECT_NEAR(v.real(), expect, 1e-12);
      EXPECT_EQ(v.imag(), 0.0);
    }
  }
}

TEST(KdsSemiclassical, ScalingIdentityWithFull) {
  std::mt19937_64 rng(7);
  const auto c = profile_of(choose_c(kKds));
  const double h = 1e-3;
  for (int k = 0; k < 10; ++k) {
    const auto q = random_point(rng, kKds);
    const cplx z(1.0, -0.2 * k);
    PhasePoint qs = q;
    qs.xi /= h;
    qs.eta /= h;
    qs.zeta /= h;
    const cplx lhs = kds_semiclassical_symbol(kKds, c, {q, z, h}, 1);
    const cplx rhs = h * h * kds_full_symbol(kKds, c, qs, z / h, 1);
    EXPECT_LT(std::abs(lhs - rhs), 1e-8 * std::abs(rhs));
  }
}

TEST(KdsHamilton, AnnihilatesSymbolAndMatchesFiniteDifferences) {
  std::mt19937_64 rng(8);
  const auto cf = choose_c(kKds);
  const auto c = profile_of(cf);
  for (int k = 0; k < 100; ++k) {
    const auto q = random_point(rng, kKds);
    const double z = (k % 3) - 1.0;
    const int s = (k % 2) ? 1 : -1;
    auto p = [&](const PhasePoint& x) { return kds_symbol<double>(kKds, c(x.r), x, z, s); };
    const auto H = kds_hamilton(kKds, c, q, z, s);
    EXPECT_LT(rel_err(H, fd_field(p, q)), 1e-6);
    // H_p p: directional derivative along the field
    double hp = num::richardson_derivative(
        [&](double e) {
          return p({q.r + e * H[0], q.theta + e * H[1], q.phi + e * H[2], q.xi + e * H[3], q.eta + e * H[4],
                    q.zeta + e * H[5]});
        },
        0.0, 1e-4);
    double scale = 0.0;
    for (double v : H) scale += v * v;
    EXPECT_LT(std::abs(hp), 1e-8 * scale);
  }
}

TEST(KdsHamilton, ConservesZetaAndCarter) {
  std::mt19937_64 rng(9);
  for (int k = 0; k < 50; ++k) {
    const auto q = random_point(rng, kKds);
    const double z = 0.5 * (k % 5) - 1.0;
    const auto H = kds_hamilton(kKds, zero_c(), q, z, 1);
    EXPECT_EQ(H[5], 0.0);
    // H_p ptilde = d_theta ptilde * theta' + d_eta ptilde * eta' (zeta is conserved)
    const auto ang = angular(kKds, q.theta);
    const double dpt_eta = 2.0 * ang.kappa * q.eta;
    const double w = q.zeta - kKds.alpha * ang.s2 * z;
    const double dpt_th = ang.dkappa * q.eta * q.eta + ang.dK * w * w - 2.0 * ang.K * w * kKds.alpha * ang.ds2 * z;
    const double Hpt = dpt_th * H[1] + dpt_eta * H[4];
    EXPECT_NEAR(Hpt, 0.0, 1e-12 * (1.0 + std::abs(dpt_th * H[1])));
  }
}

TEST(KdsHamilton, CompactChartMatchesPushforward) {
  std::mt19937_64 rng(10);
  for (int k = 0; k < 50; ++k) {
    auto q = random_point(rng, kKds);
    if (std::abs(q.xi) < 0.1) q.xi = 0.5;
    const double z = 0.3 * (k % 4);
    const auto cp = to_compact(q);
    const auto F = kds_hamilton(kKds, zero_c(), q, z, 1);
    const double sg = cp.sign_xi, nu = cp.nu;
    const PhaseVector push{nu * F[0], nu * F[1], nu * F[2], nu * (-sg * F[3] * nu * nu),
                           nu * (F[4] * nu - q.eta * sg * F[3] * nu * nu), nu * (F[5] * nu - q.zeta * sg * F[3] * nu * nu)};
    const auto C = kds_hamilton_compact(kKds, zero_c(), cp, z, 1);
    EXPECT_LT(rel_err(C, push), 1e-8);
  }
}

TEST(KdsHamilton, RadialSetRate) {
  const auto h = horizon_roots(kKds);
  for (int sg : {1, -1}) {
    for (int hs : {1, -1}) {
      const CompactPhasePoint cp{h.r(hs), pi / 2, 0.0, 0.0, 0.0, 0.0, sg};
      const auto C = kds_hamilton_compact(kKds, zero_c(), cp, 0.0, hs);
      // rescaled nu-component is nu * (-sgn mu~'), so divide by nu via the chart formula
      const CompactPhasePoint cp1{h.r(hs), pi / 2, 0.0, 1e-8, 0.0, 0.0, sg};
      const auto C1 = kds_hamilton_compact(kKds, zero_c(), cp1, 0.0, hs);
      EXPECT_EQ(C[3], 0.0);
      EXPECT_NEAR(C1[3] / 1e-8, -sg * mu_tilde(kKds, h.r(hs)).d1, 1e-9);
    }
  }
}

TEST(Subprincipal, Values) {
  EXPECT_NEAR(subprincipal_beta(de_sitter(), 1), 1.0, 1e-13);
  const auto h = horizon_roots(kDss);
  EXPECT_NEAR(subprincipal_beta(kDss, 1), 2.0 / h.gamma_plus * h.r_plus * h.r_plus, 1e-13);
  EXPECT_NEAR(subprincipal_beta(kDss, -1), 2.0 / h.gamma_minus * h.r_minus * h.r_minus, 1e-13);
  EXPECT_THROW(subprincipal_beta(de_sitter(), -1), Error);
}

TEST(DeSitterCharts, YChartAtOrigin) {
  YPoint q{Eigen::Vector3d::Zero(), Eigen::Vector3d(0.3, -0.4, 1.2)};
  const cplx s(0.7, 0.2);
  EXPECT_LT(std::abs(ds_symbol_y<cplx>(q, s) - (s * s - q.zeta.squaredNorm())), 1e-15);
}

TEST(DeSitterCharts, PolarMatchesYChart) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> N(0.0, 1.0);
  for (int k = 0; k < 20; ++k) {
    Eigen::Vector3d dir(N(rng), N(rng), N(rng));
    dir.normalize();
    YPoint q{0.5 * dir, Eigen::Vector3d(N(rng), N(rng), N(rng))};
    const auto pp = ds_y_to_polar(q);
    for (cplx s : {cplx(0.0), cplx(1.3, 0.0), cplx(0.4, -0.9)}) {
      const cplx a = ds_symbol<cplx>(4, pp, s), b = ds_symbol_y<cplx>(q, s);
      EXPECT_LT(std::abs(a - b), 1e-10 * (1.0 + std::abs(b)));
    }
  }
}

TEST(DeSitterCharts, ClassicalSubcase) {
  const PhasePoint q{0.3, 1.0, 0.0, 0.7, 0.2, -0.5};
  const double r2 = 0.7, st = std::sin(1.0);
  EXPECT_NEAR(ds_symbol<double>(4, q, 0.0), -4 * r2 * 0.3 * 0.49 - (0.04 + 0.25 / (st * st)) / r2, 1e-14);
}

TEST(DeSitterCharts, HamiltonFiniteDifference) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> M(-0.5, 0.9), Th(0.3, 2.8), X(-2.0, 2.0);
  for (int k = 0; k < 100; ++k) {
    const PhasePoint q{M(rng), Th(rng), 0.0, X(rng), X(rng), X(rng)};
    const double z = X(rng);
    const auto H = ds_hamilton(q, z);
    EXPECT_LT(rel_err(H, fd_field([&](const PhasePoint& x) { return ds_symbol<double>(4, x, z); }, q)), 1e-6);
  }
}

TEST(DeSitterCharts, RescaledRateFour) {
  for (int sg : {1, -1}) {
    const CompactPhasePoint cp{0.0, pi / 2, 0.0, 1e-8, 0.0, 0.0, sg};
    EXPECT_NEAR(ds_hamilton_compact(cp, 0.0)[3] / 1e-8, -4.0 * sg, 1e-9);
  }
}

TEST(Minkowski, RadialCoefficientsMatchMonomialExpansion) {
  // P s^m Y_ell = [(M - i m)^2 + 1/4] s^m + [m(m-1) + (n-2)m - ell(ell+n-3)] s^{m-2}, M = sigma - i(n-1)/2
  for (int n : {3, 4, 5}) {
    for (int ell : {0, 1, 2}) {
      const cplx sigma(0.3, -1.1);
      const auto ode = minkowski_mode_coeffs(n, sigma, ell);
      const cplx M = sigma - I * (0.5 * (n - 1));
      for (int m : {0, 1, 2, 5}) {
        for (double s : {0.3, 0.8}) {
          const cplx lhs = ode.a2(s) * double(m * (m - 1)) * std::pow(s, m - 2) + ode.a1(s) * double(m) * std::pow(s, m - 1) +
                           ode.a0(s) * std::pow(s, m);
          const cplx rhs = ((M - I * double(m)) * (M - I * double(m)) + 0.25) * std::pow(s, m) +
                           double(m * (m - 1) + (n - 2) * m - ell * (ell + n - 3)) * std::pow(s, m - 2);
          EXPECT_LT(std::abs(lhs - rhs), 1e-12 * (1.0 + std::abs(rhs)));
        }
      }
    }
  }
}

TEST(Minkowski, QuadraticInSigma) {
  const auto a = minkowski_mode_coeffs(4, 0.0, 1), b = minkowski_mode_coeffs(4, 1.0, 1), c = minkowski_mode_coeffs(4, 2.0, 1),
             d = minkowski_mode_coeffs(4, 3.0, 1);
  for (double s : {0.2, 0.7}) {
    // third finite difference of a quadratic vanishes
    EXPECT_LT(std::abs(d.a0(s) - 3.0 * c.a0(s) + 3.0 * b.a0(s) - a.a0(s)), 1e-12);
    EXPECT_LT(std::abs(d.a1(s) - 3.0 * c.a1(s) + 3.0 * b.a1(s) - a.a1(s)), 1e-12);
    // sigma^2 coefficient of the zeroth-order term is 1
    EXPECT_NEAR((c.a0(s) - 2.0 * b.a0(s) + a.a0(s)).real() / 2.0, 1.0, 1e-12);
    EXPECT_EQ(a.a2(s), d.a2(s));
  }
}

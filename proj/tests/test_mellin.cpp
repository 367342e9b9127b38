#include <cmath>

#include <gtest/gtest.h>

#include "kds/mellin.hpp"

using namespace kds;

namespace {

// Gaussian in x = log tau, centered inside the default grid
cplx gaussian_profile(double tau) {
  const double x = std::log(tau);
  return std::exp(-0.5 * (x + 7.0) * (x + 7.0)) * std::exp(I * 1.5 * x);
}

double max_abs(const CMat& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST(MellinGrid, DefaultLogGrid) {
  const auto t = log_grid();
  ASSERT_EQ(t.size(), 1024u);
  EXPECT_DOUBLE_EQ(t.front(), 1.0);
  EXPECT_NEAR(t.back(), 1e-6, 1e-18);
  const auto u = sample_temporal(t, [](double) { return 1.0; });
  EXPECT_NO_THROW(validate(u));
  auto bad = u;
  bad.tau[5] *= 1.001;
  EXPECT_THROW(validate(bad), Error);
}

TEST(MellinGrid, CorrectedTrapezoidIsHighOrder) {
  // int_0^{n-1} exp(0.01 t) dt on unit spacing
  const std::size_t n = 200;
  const Vec w = detail::corrected_trapezoid(n);
  double s = 0.0;
  for (std::size_t j = 0; j < n; ++j) s += w[j] * std::exp(0.01 * j);
  EXPECT_NEAR(s, (std::exp(0.01 * (n - 1)) - 1.0) / 0.01, 1e-10);
}

TEST(MellinTransform, PowerOnUnitIntervalClosedForm) {
  const double a = 2.0;
  const auto u = sample_temporal(log_grid(), [a](double t) { return std::pow(t, a); });
  const auto c = make_contour(0.0, 3.0, 13);
  const auto v = mellin_transform(u, c);
  for (std::size_t j = 0; j < c.size(); ++j) {
    const cplx ref = 1.0 / (a - I * c.sigma(j));
    EXPECT_LT(std::abs(v.values(j, 0) - ref), 1e-8) << c.sigma(j);
  }
  // shifted contour: exponent a - alpha stays positive
  const auto v2 = mellin_transform(u, make_contour(0.5, 2.0, 9));
  for (std::size_t j = 0; j < 9; ++j)
    EXPECT_LT(std::abs(v2.values(j, 0) - 1.0 / (a - I * v2.contour.sigma(j))), 1e-8);
}

TEST(MellinTransform, Plancherel) {
  const auto u = sample_temporal(log_grid(), gaussian_profile);
  for (double alpha : {0.0, 0.3}) {
    const auto v = mellin_transform(u, make_contour(alpha, 20.0, 801));
    EXPECT_NEAR(contour_norm(v) / weighted_norm(u, alpha), 1.0, 1e-8) << alpha;
  }
}

TEST(MellinTransform, RoundTrip) {
  const auto u = sample_temporal(log_grid(), gaussian_profile);
  const auto v = mellin_transform(u, make_contour(0.2, 20.0, 801));
  const auto w = inverse_mellin(v, u.tau);
  EXPECT_LT(max_abs(w.values - u.values), 1e-6 * max_abs(u.values));
}

TEST(MellinTransform, Linearity) {
  const auto t = log_grid();
  const auto u1 = sample_temporal(t, gaussian_profile);
  const auto u2 = sample_temporal(t, [](double s) { return std::exp(-std::pow(std::log(s) + 5.0, 2)); });
  auto sum = u1;
  sum.values = 2.0 * u1.values - I * u2.values;
  const auto c = make_contour(0.1, 10.0, 101);
  const auto v1 = mellin_transform(u1, c), v2 = mellin_transform(u2, c), vs = mellin_transform(sum, c);
  EXPECT_LT(max_abs(vs.values - 2.0 * v1.values + I * v2.values), 1e-12 * max_abs(vs.values));
}

TEST(MellinTransform, GrowingWeightedDataDiverges) {
  const auto u = sample_temporal(log_grid(), [](double t) { return std::sqrt(t); });
  try {
    mellin_transform(u, make_contour(1.0));
    FAIL() << "expected ContourDivergence";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ContourDivergence);
  }
}

TEST(InverseMellin, ZeroAndShiftRule) {
  const auto c = make_contour(0.0, 20.0, 801);
  ContourSamples z{c, CMat::Zero(static_cast<Eigen::Index>(c.size()), 1)};
  EXPECT_EQ(max_abs(inverse_mellin(z, log_grid(1e-3, 1.0, 64)).values), 0.0);

  ContourSamples v{c, CMat(static_cast<Eigen::Index>(c.size()), 1)};
  for (std::size_t j = 0; j < c.size(); ++j) v.values(j, 0) = std::exp(-c.xi[j] * c.xi[j] / 8.0);
  const double tau0 = 0.3;
  ContourSamples shifted = v;
  for (std::size_t j = 0; j < c.size(); ++j) shifted.values(j, 0) *= std::exp(I * c.sigma(j) * std::log(tau0));
  const auto tau = log_grid(1e-3, 1.0, 64);
  std::vector<double> scaled(tau);
  for (auto& t : scaled) t *= tau0;
  const auto a = inverse_mellin(shifted, tau), b = inverse_mellin(v, scaled);
  EXPECT_LT(max_abs(a.values - b.values), 1e-12);
}

TEST(InverseMellin, SlowDecayDiverges) {
  const auto c = make_contour(0.0, 20.0, 201);
  ContourSamples v{c, CMat(static_cast<Eigen::Index>(c.size()), 1)};
  for (std::size_t j = 0; j < c.size(); ++j) v.values(j, 0) = 1.0 / (2.0 - I * c.sigma(j));
  EXPECT_THROW(inverse_mellin(v, log_grid()), Error);
}

TEST(Residues, SimplePoleConstantSource) {
  const cplx s1(0.4, -0.3);
  CVec R(2);
  R << 1.0, cplx(0.5, -2.0);
  auto v = [&](cplx s) -> CVec { return R / (s - s1) + CVec::Constant(2, std::cos(s)); };
  const auto L = laurent_principal(v, s1);
  ASSERT_EQ(L.order, 1);
  const auto terms = residue_terms(L);
  ASSERT_EQ(terms.size(), 1u);
  EXPECT_EQ(terms[0].kappa, 0);
  EXPECT_LT((terms[0].a - (-I) * R).norm(), 1e-12);
}

class JordanFamily : public ::testing::Test {
 protected:
  const cplx s1{0.3, -0.5};
  const double w = 1.0;
  CVec f = (CVec(2) << cplx(1.0, 0.2), cplx(-0.7, 0.4)).finished();

  cplx g(cplx s) const { return std::exp(-s * s / (2.0 * w * w)); }
  CVec v(cplx s) const {
    CMat A(2, 2);
    A << s - s1, 1.0, 0.0, s - s1;
    return A.partialPivLu().solve(f) * g(s);
  }
};

TEST_F(JordanFamily, LogTermFromDoublePole) {
  auto fn = [this](cplx s) { return v(s); };
  const auto L = laurent_principal(fn, s1);
  ASSERT_EQ(L.order, 2);
  // analytic Laurent data of [[1/d, -1/d^2], [0, 1/d]] f g
  const cplx g0 = g(s1), g1 = -s1 / (w * w) * g0;
  CVec Bm2(2), Bm1(2);
  Bm2 << -g0 * f[1], 0.0;
  Bm1 << g0 * f[0] - g1 * f[1], g0 * f[1];
  const auto terms = residue_terms(L);
  ASSERT_EQ(terms.size(), 2u);
  EXPECT_EQ(terms[1].kappa, 1);
  EXPECT_LT((terms[0].a - (-I) * Bm1).norm(), 1e-8);
  EXPECT_LT((terms[1].a - Bm2).norm(), 1e-8);
}

TEST_F(JordanFamily, ExpansionReconstructsAndRemainderDecays) {
  auto fn = [this](cplx s) { return v(s); };
  const double ell = 1.5;
  const auto ex = expand_meromorphic(fn, {s1}, ell);
  EXPECT_EQ(ex.terms.size(), 2u);
  EXPECT_LT(ex.reconstruction, 1e-6);
  const auto fit = fit_decay(ex.remainder, 1e-6, 1e-2);
  EXPECT_GE(fit.rate, ell * 0.98);
  // no poles below the starting contour: nothing to collect
  const auto none = expand_meromorphic(fn, {s1}, 0.2);
  EXPECT_TRUE(none.terms.empty());
  EXPECT_LT(none.reconstruction, 1e-6);
}

TEST_F(JordanFamily, PoleOnContourIsRejected) {
  auto fn = [this](cplx s) { return v(s); };
  try {
    expand_meromorphic(fn, {s1}, 0.5);
    FAIL() << "expected PoleOnContour";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::PoleOnContour);
  }
}

TEST(ResonanceExpand, DeSitterPipeline) {
  const auto op = build_operator(de_sitter(3.0, 4), 0, 40, default_absorbing_spec(-0.5));
  const CVec f = sample_source(op, [](double m) { return m > 0.1 && m < 0.9 ? std::pow(std::sin(pi * (m - 0.1) / 0.8), 4) : 0.0; });
  const auto deep = resonance_expand(f, op, 2.5);
  const auto shallow = resonance_expand(f, op, 1.5);
  EXPECT_LT(deep.reconstruction, 1e-6);
  EXPECT_LT(shallow.reconstruction, 1e-6);
  bool has0 = false, has2 = false;
  for (const auto& t : deep.terms) {
    has0 |= std::abs(t.sigma) < 1e-6;
    has2 |= std::abs(t.sigma + 2.0 * I) < 1e-6;
  }
  EXPECT_TRUE(has0 && has2);
  // the shallow list is the part of the deep list above Im sigma = -1.5
  for (const auto& t : shallow.terms) {
    bool found = false;
    for (const auto& d : deep.terms)
      if (std::abs(d.sigma - t.sigma) < 1e-10 && d.kappa == t.kappa) {
        found = true;
        EXPECT_LT((d.a - t.a).norm(), 1e-8 * std::max(1.0, t.a.norm()));
      }
    EXPECT_TRUE(found) << t.sigma;
  }
  EXPECT_GE(fit_decay(deep.remainder, 1e-6, 1e-2).rate, 2.5 * 0.98);
}

TEST(FitDecay, PowerLaws) {
  const auto t = log_grid();
  const auto p = sample_temporal(t, [](double s) { return std::pow(s, 0.7); });
  EXPECT_NEAR(fit_decay(p, 1e-6, 1e-1).rate, 0.7, 1e-6);
  const auto q = sample_temporal(t, [](double s) { return std::pow(s, 0.7) * std::log(s); });
  const auto f = fit_decay(q, 1e-6, 1e-1, true);
  EXPECT_NEAR(f.rate, 0.7, 1e-6);
  EXPECT_EQ(f.detected_log_power, 1);
  EXPECT_LT(f.residual, 1e-10);
  EXPECT_THROW(fit_decay(p, 0.5, 0.52), Error);
}

TEST(Threshold, Arithmetic) {
  const auto r = threshold({1.0, 2.0, 1.0}, 0.0);
  EXPECT_EQ(r.regime, Regime::PropagateAway);
  EXPECT_DOUBLE_EQ(r.boundary, -1.0);
  EXPECT_TRUE(r.cs_member);
  EXPECT_EQ(threshold({0.5, 2.0, 1.0}, 0.0).regime, Regime::Boundary);
  EXPECT_EQ(threshold({0.0, 2.0, 1.0}, 0.0).regime, Regime::PropagateToward);
  EXPECT_FALSE(threshold({0.0, 2.0, 1.0}, 0.5).cs_member);
}

TEST(Threshold, DeSitterStrip) {
  const auto h = horizon_roots(de_sitter(3.0, 4));
  for (double s : {0.0, 0.5, 1.0, 2.0}) {
    const auto r = threshold(threshold_spec(s, h), 0.0);
    EXPECT_NEAR(r.boundary, 1.0 - 2.0 * s, 1e-12);
  }
}

TEST(Threshold, BetaSelectionRule) {
  const ThresholdSpec hi{1.0, 2.0, 1.5, 0.5}, lo{0.2, 2.0, 1.5, 0.5};
  EXPECT_DOUBLE_EQ(threshold(hi, 0.0).beta, 1.5);
  EXPECT_DOUBLE_EQ(threshold(lo, 0.0).beta, 0.5);
  const auto h = horizon_roots(de_sitter_schwarzschild(3.0, 0.2));
  const auto r = threshold(threshold_spec(0.7, h), 0.0);
  EXPECT_DOUBLE_EQ(r.beta, std::max(h.beta_plus, h.beta_minus));
}

TEST(BSobolev, WeightsGrowWithOrder) {
  const auto u = sample_temporal(log_grid(), gaussian_profile);
  const auto v = mellin_transform(u, make_contour(0.0, 20.0, 801));
  EXPECT_NEAR(b_sobolev_norm(v, 0.0), contour_norm(v), 1e-14);
  EXPECT_GT(b_sobolev_norm(v, 1.0), b_sobolev_norm(v, 0.0));
}

#include <cmath>
#include <map>
#include <random>

#include <gtest/gtest.h>

#include "kds/resonances.hpp"

using namespace kds;

namespace {

const SpacetimeParams kDs = de_sitter(3.0, 4);
const SpacetimeParams kMink = minkowski_boundary(4);
const SpacetimeParams kDss = de_sitter_schwarzschild(3.0, 0.2);

const AbsorbingSpec kSpec = default_absorbing_spec(-0.5);

// Solves are cached across tests; N = 80 lists take about a second each.
const ResonanceList& cached(const SpacetimeParams& p, int ell, int N, double mu0 = -0.5) {
  static std::map<std::tuple<int, int, int, double>, ResonanceList> cache;
  const auto key = std::make_tuple(static_cast<int>(p.model), ell, N, mu0);
  auto it = cache.find(key);
  if (it == cache.end()) {
    const auto op = build_operator(p, ell, N, default_absorbing_spec(mu0));
    it = cache.emplace(key, solve_resonances(op, Region{-6.0, 6.0, -4.0, 0.5})).first;
  }
  return it->second;
}

bool contains(const ResonanceList& L, cplx s, double tol) {
  for (const auto& e : L.entries)
    if (std::abs(e.sigma - s) < tol) return true;
  return false;
}

CVec random_vector(Eigen::Index n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  CVec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = cplx(g(rng), g(rng));
  return v;
}

// smooth bump on (a, b)
auto bump(double a, double b) {
  return [a, b](double x) {
    if (x <= a || x >= b) return 0.0;
    const double t = (2.0 * x - a - b) / (b - a);
    return std::pow(1.0 - t * t, 4);
  };
}

}  // namespace

TEST(BuildOperator, SigmaSquaredCoefficientIsMinusIdentity) {
  const auto op = build_operator(kDs, 0, 40, kSpec);
  for (Eigen::Index i = 0; i < op.size(); ++i)
    for (Eigen::Index j = 0; j < op.size(); ++j) {
      const cplx expect = (op.equation_row[i] && i == j) ? cplx(-1.0) : cplx(0.0);
      ASSERT_EQ(op.A[2](i, j), expect) << i << "," << j;
    }
  EXPECT_TRUE(op.A[0].allFinite() && op.A[1].allFinite());
}

TEST(BuildOperator, InteriorRowsMatchAnalyticDifferentiation) {
  const int N = 40;
  const cplx s(0.7, 0.3);
  for (const auto& p : {kDs, kMink})
    for (int ell : {0, 2}) {
      const auto op = build_operator(p, ell, N, kSpec);
      const CMat M = op.pencil(s);
      const double d = p.n - 1;
      const double lam = p.model == Model::MinkowskiBoundary ? 0.25 * (d * d - 1.0) : 0.0;
      for (int k : {0, 1, 2, 5, 11, 20, N - 3}) {
        CVec u = CVec::Zero(op.size());
        const auto& e = op.elements[0];
        for (int i = 0; i < e.n; ++i) u[e.offset + i] = std::pow(e.x[i], k);
        const CVec Pu = M * u;
        double err = 0.0, scale = 0.0;
        for (int i = 1; i + 1 < e.n; ++i) {
          const double x = e.x[i];
          const double u0 = std::pow(x, k), u1 = k >= 1 ? k * std::pow(x, k - 1) : 0.0,
                       u2 = k >= 2 ? k * (k - 1.0) * std::pow(x, k - 2) : 0.0;
          // -P_sigma in the mu variable
          const cplx ref = -4.0 * x * (1.0 - x) * u2 - (4.0 - (4.0 + 4.0 * ell + 2.0 * d) * x) * u1 +
                           4.0 * I * s * (1.0 - x) * u1 +
                           (ell * (ell + d) + lam - I * s * (2.0 * ell + d) - s * s) * u0;
          err = std::max(err, std::abs(Pu[e.offset + i] - ref));
          scale = std::max(scale, std::abs(ref));
        }
        EXPECT_LT(err, 1e-10 * std::max(1.0, scale)) << to_string(p.model) << " ell=" << ell << " k=" << k;
      }
    }
}

TEST(BuildOperator, NoSpecialRowAtHorizon) {
  const auto op = build_operator(kDs, 1, 40, kSpec);
  ASSERT_LT(op.physical_lo(), 0.0);
  ASSERT_GT(op.physical_hi(), 0.0);
  // a single physical element holds the equation on every node, the horizon included
  ASSERT_EQ(op.n_physical, 1);
  for (Eigen::Index i = 0; i < op.physical_size(); ++i) EXPECT_TRUE(op.equation_row[i]) << i;
  // and the only coupling of the physical block is to itself
  const Eigen::Index np = op.physical_size();
  for (const auto& A : op.A) EXPECT_EQ(A.topRightCorner(np, op.size() - np).norm(), 0.0);
}

TEST(BuildOperator, RejectsRotatingModel) {
  try {
    build_operator(kerr_de_sitter(3.0, 0.2, 0.05), 0, 40, kSpec);
    FAIL() << "expected UnsupportedModel";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnsupportedModel);
  }
  EXPECT_THROW(build_operator(kDs, 0, 12, kSpec), Error);
}

TEST(BuildOperator, SchwarzschildLayoutBracketsBothHorizons) {
  const auto op = build_operator(kDss, 0, 30, absorbing_spec_for(kDss));
  const auto h = horizon_roots(kDss);
  EXPECT_LT(op.physical_lo(), h.r_minus);
  EXPECT_GT(op.physical_hi(), h.r_plus);
  EXPECT_EQ(op.variable(), "r");
  EXPECT_TRUE(op.A[2].allFinite());
}

TEST(Resonances, MinkowskiLattice) {
  // -i(l + 1 + m) for m >= 0: the set -i(1 + j) meets each l only from j = l on
  for (int ell = 0; ell < 3; ++ell) {
    const auto& L = cached(kMink, ell, 80);
    for (int j = ell; j < 3; ++j) EXPECT_TRUE(contains(L, cplx(0.0, -(1.0 + j)), 1e-6)) << "ell=" << ell << " j=" << j;
  }
}

TEST(Resonances, SortedWithConvergenceData) {
  const auto& L = cached(kDs, 0, 80);
  ASSERT_FALSE(L.entries.empty());
  EXPECT_EQ(L.N_check, 100);
  for (std::size_t k = 0; k < L.entries.size(); ++k) {
    EXPECT_TRUE(std::isfinite(L.entries[k].convergence_delta));
    EXPECT_GE(L.entries[k].multiplicity, 1);
    EXPECT_EQ(L.entries[k].spurious_warning, L.entries[k].convergence_delta > 1e-4);
    if (k > 0) {
      EXPECT_GE(L.entries[k - 1].sigma.imag(), L.entries[k].sigma.imag());
    }
  }
}

TEST(Resonances, DeSitterLowestValues) {
  // d = 3: -i(l + 2m) and -i(l + 3 + 2m)
  const auto& L0 = cached(kDs, 0, 80);
  EXPECT_TRUE(contains(L0, 0.0, 1e-8));
  EXPECT_TRUE(contains(L0, cplx(0.0, -2.0), 1e-8));
  const auto& L1 = cached(kDs, 1, 80);
  EXPECT_TRUE(contains(L1, cplx(0.0, -1.0), 1e-8));
  EXPECT_FALSE(contains(L1, 0.0, 1e-3));
}

TEST(Resonances, UpperHalfPlaneIsFree) {
  for (int ell = 0; ell < 3; ++ell)
    for (const auto& e : cached(kDs, ell, 80).entries)
      if (e.convergence_delta < 1e-6) {
        EXPECT_LE(e.sigma.imag(), 1e-8) << "ell=" << ell << " " << e.sigma;
      }
}

TEST(Resonances, IndependentOfAbsorbingLevel) {
  for (int ell = 0; ell < 2; ++ell) {
    const auto& a = cached(kDs, ell, 80, -0.5);
    const auto& b = cached(kDs, ell, 80, -0.6);
    int matched = 0;
    for (const auto& e : a.entries) {
      if (e.convergence_delta > 1e-6) continue;
      EXPECT_TRUE(contains(b, e.sigma, 1e-6)) << "ell=" << ell << " " << e.sigma;
      ++matched;
    }
    EXPECT_GE(matched, 2);
  }
}

TEST(Resonances, StripCountStableUnderRefinement) {
  const Region R{-10.0, 10.0, -2.5, 0.5};
  const auto op = build_operator(kDs, 0, 60, kSpec);
  auto count = [&](const ResonanceList& L) {
    int n = 0;
    for (const auto& e : L.entries) n += e.spurious_warning ? 0 : e.multiplicity;
    return n;
  };
  const int a = count(solve_resonances(op, R));
  const int b = count(solve_resonances(rebuild(op, 75), R));
  EXPECT_EQ(a, b);
  EXPECT_GT(a, 0);
}

TEST(Resonances, EmptyRegionGivesEmptyList) {
  const auto op = build_operator(kDs, 0, 40, kSpec);
  EXPECT_TRUE(solve_resonances(op, Region{1.0, 2.0, 5.0, 6.0}).entries.empty());
}

TEST(Resolvent, RoundTrip) {
  const auto op = build_operator(kDs, 1, 60, kSpec);
  const cplx s(1.3, 0.4);
  const CVec u0 = random_vector(op.size(), 7);
  const CVec u = resolvent_apply(op, s, op.pencil(s) * u0);
  EXPECT_LT((u - u0).norm() / u0.norm(), 1e-8);
}

TEST(Resolvent, NearPoleIsReported) {
  const auto& L = cached(kDs, 1, 80);
  const auto op = build_operator(kDs, 1, 80, kSpec);
  const CVec f = sample_source(op, bump(0.2, 0.8));
  try {
    resolvent_apply(op, cplx(0.0, -1.0) + 5e-5, f, &L);
    FAIL() << "expected NearPole";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NearPole);
  }
}

TEST(Resolvent, IndependentOfAbsorbingSpec) {
  AbsorbingSpec b = default_absorbing_spec(-0.6);
  b.C = 3.0;
  b.stencil = 0.5;
  const auto opa = build_operator(kDs, 0, 60, kSpec);
  const auto opb = build_operator(kDs, 0, 60, b);
  const auto f = bump(0.05, 0.9);
  for (cplx s : {cplx(1.5, 0.0), cplx(0.5, -0.5)}) {
    const CVec ua = resolvent_apply(opa, s, sample_source(opa, f));
    const CVec ub = resolvent_apply(opb, s, sample_source(opb, f));
    EXPECT_LT(compare_on_region(opa, ua, opb, ub, 0.0, 1.0), 1e-6) << s;
  }
}

TEST(Resolvent, HolomorphicInSigma) {
  const auto op = build_operator(kDs, 0, 50, kSpec);
  const CVec f = sample_source(op, bump(0.1, 0.9));
  const cplx s(1.3, 0.4);
  const double h = 1e-4;
  const CVec dx = (resolvent_apply(op, s + h, f) - resolvent_apply(op, s - h, f)) / (2.0 * h);
  const CVec dy = (resolvent_apply(op, s + I * h, f) - resolvent_apply(op, s - I * h, f)) / (2.0 * h);
  const double norm = resolvent_apply(op, s, f).norm();
  // d/d(conj sigma) = (d/dx + i d/dy)/2
  EXPECT_LT((0.5 * (dx + I * dy)).norm() / norm, 1e-6);
}

TEST(Resolvent, HighEnergyDecay) {
  double lo = 1e300, hi = 0.0;
  for (double s : {20.0, 40.0, 80.0}) {
    const auto op = build_operator(kDs, 0, 160, kSpec);
    const double v = cutoff_resolvent_norm(op, s, 0.1, 0.9) * s;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  EXPECT_LT(hi / lo, 3.0);
}

TEST(Gluing, IdentityHoldsAtDiscreteLevel) {
  const auto op = build_operator(kDs, 0, 60, kSpec);
  Vec chi_prime(op.size());
  for (Eigen::Index i = 0; i < op.size(); ++i) chi_prime[i] = bump(0.2, 0.7)(op.grid[i]);
  for (cplx s : {cplx(2.0, 1.0), cplx(-1.0, 0.5)}) {
    const auto rep = gluing_check(op, s, chi_prime, 1.0);
    EXPECT_EQ(rep.probes, 20);
    EXPECT_LT(rep.residual, 1e-8) << s;
    EXPECT_GT(rep.resolvent_norm, 0.0);
  }
}

TEST(Gluing, ZeroCutoffIsExact) {
  const auto op = build_operator(kDs, 0, 60, kSpec);
  const auto rep = gluing_check(op, cplx(2.0, 1.0), Vec::Zero(op.size()), 1.0);
  EXPECT_EQ(rep.residual, 0.0);
}

TEST(Gluing, StableUnderReseeding) {
  const auto op = build_operator(kDs, 0, 60, kSpec);
  Vec chi_prime(op.size());
  for (Eigen::Index i = 0; i < op.size(); ++i) chi_prime[i] = bump(0.2, 0.7)(op.grid[i]);
  std::vector<double> r;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) r.push_back(gluing_check(op, cplx(2.0, 1.0), chi_prime, 1.0, 20, seed).residual);
  double mean = 0.0, var = 0.0;
  for (double v : r) mean += v / r.size();
  for (double v : r) var += (v - mean) * (v - mean) / r.size();
  EXPECT_LT(var, 1e-10);
}

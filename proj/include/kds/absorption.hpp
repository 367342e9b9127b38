#pragma once
// Complex absorbing symbols q_{h,z}, the extension p~ = chi1 p - chi2 p^ of the
// semiclassical symbol past the absorbing collar, and ellipticity scans.
//
// The absorbing variable is mu (de Sitter chart) or mu~ (Kerr-de Sitter family).
// Breakpoints, ordered support_hi > plateau_hi > plateau_lo > support_lo, all < 0:
//   chi  = digamma on [plateau_lo, plateau_hi], supported in (support_lo, support_hi)
//   chi2 = 1 for mu <= plateau_lo, 0 for mu >= plateau_hi, chi1 = 1 - chi2.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "kds/core.hpp"
#include "kds/numerics.hpp"
#include "kds/spacetime.hpp"
#include "kds/symbols.hpp"

namespace kds {

struct AbsorbingSpec {
  double mu0 = -0.5;  // absorption centre; the artificial end of the radial grid
  double support_hi = -0.25;
  double plateau_hi = -0.375;
  double plateau_lo = -0.625;
  double support_lo = -0.75;
  int j = 1;              // branch integer of the 2j-th root
  double C = 2.0;         // branch-cut offset of the operator-level f
  double digamma = 1.0;   // plateau height of chi
  double stencil = 1.0;   // weight of the second-derivative part of the discrete Q
};

// Breakpoints at 0.5, 0.75, 1.25 and 1.5 times mu0.
inline AbsorbingSpec default_absorbing_spec(double mu0 = -0.5) {
  AbsorbingSpec s;
  s.mu0 = mu0;
  s.support_hi = 0.5 * mu0;
  s.plateau_hi = 0.75 * mu0;
  s.plateau_lo = 1.25 * mu0;
  s.support_lo = 1.5 * mu0;
  return s;
}

inline void validate(const AbsorbingSpec& s) {
  if (!(s.mu0 < 0.0)) raise(ErrorCode::ConfigError, "absorbing spec: mu0 must be negative");
  if (!(s.support_lo < s.plateau_lo && s.plateau_lo < s.plateau_hi && s.plateau_hi < s.support_hi &&
        s.support_hi < 0.0))
    raise(ErrorCode::ConfigError, "absorbing spec: need support_lo < plateau_lo < plateau_hi < support_hi < 0");
  if (s.j < 1) raise(ErrorCode::ConfigError, "absorbing spec: j must be >= 1");
  if (!(s.C > 0.0)) raise(ErrorCode::ConfigError, "absorbing spec: C must be positive");
  if (!(s.digamma > 0.0)) raise(ErrorCode::ConfigError, "absorbing spec: digamma must be positive");
  if (!(s.stencil >= 0.0)) raise(ErrorCode::ConfigError, "absorbing spec: stencil must be >= 0");
}

// For the Kerr-de Sitter family: mu0 is the larger of mu~ at the two ends of
// the radial domain, so the plateau is reached on both sides.
inline AbsorbingSpec absorbing_spec_for(const SpacetimeParams& p, double delta_frac = 0.1) {
  if (p.model == Model::DeSitter || p.model == Model::MinkowskiBoundary) return default_absorbing_spec(-0.5);
  const auto h = horizon_roots(p);
  const auto d = radial_domain(p, h, delta_frac);
  double mu0 = mu_tilde(p, d.r_hi).value;
  if (h.has_inner) mu0 = std::max(mu0, mu_tilde(p, d.r_lo).value);
  return default_absorbing_spec(mu0);
}

// chi0(s) = e^{-1/s} for s > 0, so that s^2 chi0' = chi0.
inline double chi0(double s) { return s > 0.0 ? std::exp(-1.0 / s) : 0.0; }
inline double chi0_prime(double s) { return s > 0.0 ? std::exp(-1.0 / s) / (s * s) : 0.0; }

// Smooth step: 0 for t <= 0, 1 for t >= 1, S(t) + S(1-t) = 1.
inline double smooth_step(double t) {
  const double a = chi0(t), b = chi0(1.0 - t);
  return a / (a + b);
}
inline double smooth_step_prime(double t) {
  const double a = chi0(t), b = chi0(1.0 - t);
  if (a == 0.0 || b == 0.0) return 0.0;
  const double da = chi0_prime(t), db = -chi0_prime(1.0 - t);
  return (da * b - a * db) / ((a + b) * (a + b));
}

inline double absorbing_chi(const AbsorbingSpec& s, double mu) {
  if (mu >= s.support_hi || mu <= s.support_lo) return 0.0;
  if (mu > s.plateau_hi) return s.digamma * smooth_step((s.support_hi - mu) / (s.support_hi - s.plateau_hi));
  if (mu < s.plateau_lo) return s.digamma * smooth_step((mu - s.support_lo) / (s.plateau_lo - s.support_lo));
  return s.digamma;
}

inline double absorbing_chi_prime(const AbsorbingSpec& s, double mu) {
  if (mu >= s.support_hi || mu <= s.support_lo) return 0.0;
  if (mu > s.plateau_hi) {
    const double w = s.support_hi - s.plateau_hi;
    return -s.digamma * smooth_step_prime((s.support_hi - mu) / w) / w;
  }
  if (mu < s.plateau_lo) {
    const double w = s.plateau_lo - s.support_lo;
    return s.digamma * smooth_step_prime((mu - s.support_lo) / w) / w;
  }
  return 0.0;
}

inline double chi1(const AbsorbingSpec& s, double mu) {
  return smooth_step((mu - s.plateau_lo) / (s.plateau_hi - s.plateau_lo));
}
inline double chi2(const AbsorbingSpec& s, double mu) {
  return smooth_step((s.plateau_hi - mu) / (s.plateau_hi - s.plateau_lo));
}

// f = (|varpi|^{2j} + z^{2j} + C^{2j})^{1/2j} on the principal branch.
inline cplx f_z(double varpi_norm, cplx z, int j, double C) {
  require(j >= 1 && varpi_norm >= 0.0 && C >= 0.0, "f_z: need j >= 1, |varpi| >= 0, C >= 0");
  const int m = 2 * j;
  const cplx w = std::pow(varpi_norm, m) + std::pow(z, m) + std::pow(C, m);
  if (w.imag() == 0.0 && w.real() <= 0.0) raise(ErrorCode::BranchCut, "f_z: argument on the branch cut");
  return std::exp(std::log(w) / double(m));
}

// sigma outside the half-lines e^{i pi (2k+1)/(2j)} [C, infinity)
inline bool in_holomorphy_domain(cplx sigma, int j, double C) {
  const double r = std::abs(sigma);
  if (r < C) return true;
  const double ang = std::arg(sigma);
  for (int k = -j; k < j; ++k) {
    const double a = pi * (2 * k + 1) / (2.0 * j);
    if (std::abs(std::remainder(ang - a, 2.0 * pi)) < 1e-14) return false;
  }
  return true;
}

// Riemannian fiber norm: xi^2 + eta^2 + zeta^2/sin^2 for the Kerr-de Sitter
// family, the Y-chart |zeta|^2 = 4 r^2 xi^2 + |eta|^2/r^2 in the de Sitter mu chart.
inline double fiber_norm(const SpacetimeParams& p, const PhasePoint& pt) {
  const double st = std::sin(pt.theta);
  const double eta2 = pt.eta * pt.eta + pt.zeta * pt.zeta / (st * st);
  if (p.model == Model::DeSitter) {
    const double r2 = 1.0 - pt.r;
    return std::sqrt(4.0 * r2 * pt.xi * pt.xi + eta2 / r2);
  }
  return std::sqrt(pt.xi * pt.xi + eta2);
}

// absorbing variable at a base point: mu (de Sitter chart) or mu~(r)
inline double absorbing_variable(const SpacetimeParams& p, double base) {
  return p.model == Model::DeSitter ? base : mu_tilde(p, base).value;
}

// semiclassical symbol of either family (de Sitter: n = 4 mu chart)
inline cplx p_semiclassical(const SpacetimeParams& p, CSample cs, const PhasePoint& pt, cplx z, int sign) {
  if (p.model == Model::DeSitter) return ds_symbol<cplx>(4, pt, z);
  return kds_symbol<cplx>(p, cs, pt, z, sign);
}

// <varpi + z dtau/tau, dtau/tau>_G (Kerr-de Sitter: the rho^2-scaled pairing)
inline cplx time_pairing(const SpacetimeParams& p, CSample cs, const PhasePoint& pt, cplx z, int sign) {
  if (p.model == Model::DeSitter) return 2.0 * (1.0 - pt.r) * pt.xi + z;
  const Eigen::Matrix4d M = dual_metric_scaled(p, pt.r, pt.theta, cs, sign);
  return M(1, 0) * pt.xi + M(1, 1) * z + M(1, 3) * pt.zeta;
}

inline double time_norm(const SpacetimeParams& p, CSample cs, const PhasePoint& pt, int sign) {
  if (p.model == Model::DeSitter) return 1.0;
  return dual_metric_scaled(p, pt.r, pt.theta, cs, sign)(1, 1);
}

// q = -chi f_z <varpi + z dtau/tau, dtau/tau>_G; f_z is the semiclassical
// principal symbol of the operator-level f (the C term scales out).
inline cplx q_semiclassical(const SpacetimeParams& p, const SemiclassicalPoint& spt, const AbsorbingSpec& s,
                            const CProfile& c = zero_c(), int sign = 1) {
  const auto& pt = spt.point;
  const double chi = absorbing_chi(s, absorbing_variable(p, pt.r));
  if (chi == 0.0) return 0.0;
  const CSample cs = c(pt.r);
  return -chi * f_z(fiber_norm(p, pt), spt.z, s.j, 0.0) * time_pairing(p, cs, pt, spt.z, sign);
}

// p~ = chi1 p - chi2 p^, p^ = f_z^2
inline cplx extend_p(const SpacetimeParams& p, const SemiclassicalPoint& spt, const AbsorbingSpec& s,
                     const CProfile& c = zero_c(), int sign = 1) {
  const auto& pt = spt.point;
  const double mu = absorbing_variable(p, pt.r);
  const double c1 = chi1(s, mu), c2 = chi2(s, mu);
  cplx v = 0.0;
  if (c1 > 0.0) v += c1 * p_semiclassical(p, c(pt.r), pt, spt.z, sign);
  if (c2 > 0.0) {
    const cplx f = f_z(fiber_norm(p, pt), spt.z, s.j, 0.0);
    v -= c2 * f * f;
  }
  return v;
}

struct EllipticityReport {
  std::string region;
  std::size_t points = 0;
  double min_abs = std::numeric_limits<double>::infinity();  // min |p~ - i q| on {chi2 > 0 or chi > 0}
  std::size_t sign_points = 0;                                // characteristic-set points in the collar
  std::size_t sign_violations = 0;                            // -+q < 0 on Sigma_+-
  std::size_t interior_points = 0;
  double interior_min = std::numeric_limits<double>::infinity();  // min |p| on the interior, Im z > 0
  double interior_bound = 0.0;  // (Im z)^2 for de Sitter, 0 otherwise; smallest over the z-set

  bool ok() const {
    return min_abs > 0.0 && sign_violations == 0 && (interior_points == 0 || interior_min > interior_bound);
  }
};

struct EllipticityGrid {
  int n_base = 64;     // collar / interior base points per side
  int n_theta = 6;
  int n_fiber = 12;    // per fiber dimension
  double fiber_max = 4.0;
  double imag_min = 0.5;  // interior scan only for Im z >= imag_min
};

namespace detail {

// base intervals of {chi2 > 0 or chi > 0}: mu < support_hi
inline std::vector<std::pair<double, double>> collar_intervals(const SpacetimeParams& p, const AbsorbingSpec& s) {
  if (p.model == Model::DeSitter) return {{s.support_lo - 0.5 * (s.support_hi - s.support_lo), s.support_hi}};
  const auto h = horizon_roots(p);
  const auto d = radial_domain(p, h);
  auto g = [&](double r) { return mu_tilde(p, r).value - s.support_hi; };
  std::vector<std::pair<double, double>> out;
  if (g(d.r_hi) < 0.0) out.push_back({num::bracket_root(g, h.r_plus, d.r_hi), d.r_hi});
  if (h.has_inner && g(d.r_lo) < 0.0) out.push_back({d.r_lo, num::bracket_root(g, d.r_lo, h.r_minus)});
  return out;
}

inline double grid_point(double a, double b, int i, int n) { return a + (b - a) * (i + 0.5) / n; }

}  // namespace detail

// Scans the collar for every z and, for Im z >= imag_min, the interior
// (de Sitter: Y chart on |Y| < 1; Kerr-de Sitter: r_- < r < r_+).
inline EllipticityReport ellipticity_scan(const SpacetimeParams& p, const AbsorbingSpec& s, const EllipticityGrid& g,
                                          const std::vector<cplx>& zs, const CProfile& c, int sign = 1) {
  validate(s);
  EllipticityReport rep;
  rep.region = p.model == Model::DeSitter ? "de Sitter collar mu < " + std::to_string(s.support_hi)
                                          : "collar mu~ < " + std::to_string(s.support_hi);
  const bool ds = p.model == Model::DeSitter;
  const int nf = g.n_fiber;
  auto fib = [&](int i) { return -g.fiber_max + 2.0 * g.fiber_max * i / (nf - 1); };
  rep.interior_bound = std::numeric_limits<double>::infinity();
  for (const cplx z : zs) {
    for (const auto& [a, b] : detail::collar_intervals(p, s)) {
      for (int ib = 0; ib < g.n_base; ++ib) {
        const double base = detail::grid_point(a, b, ib, g.n_base);
        const CSample cs = c(base);
        for (int it = 0; it < g.n_theta; ++it) {
          const double th = detail::grid_point(0.2, pi - 0.2, it, g.n_theta);
          for (int i1 = 0; i1 < nf; ++i1)
            for (int i2 = 0; i2 < nf; ++i2)
              for (int i3 = 0; i3 < nf; ++i3) {
                const PhasePoint pt{base, th, 0.0, fib(i1), fib(i2), fib(i3)};
                const SemiclassicalPoint spt{pt, z, 1.0};
                const cplx v = extend_p(p, spt, s, c, sign) - I * q_semiclassical(p, spt, s, c, sign);
                rep.min_abs = std::min(rep.min_abs, std::abs(v));
                ++rep.points;
              }
          // sign contract on the characteristic set of p (real z): eta from p = 0
          if (z.imag() != 0.0) continue;
          for (int i1 = 0; i1 < nf; ++i1)
            for (int i3 = 0; i3 < nf; ++i3) {
              PhasePoint pt{base, th, 0.0, fib(i1), 0.0, fib(i3)};
              const double rest = p_semiclassical(p, cs, pt, z, sign).real();
              const double kappa = ds ? 1.0 / (1.0 - base) : angular(p, th).kappa;
              if (rest < 0.0) continue;
              pt.eta = std::sqrt(rest / kappa);
              const double pair = time_pairing(p, cs, pt, z, sign).real();
              if (pair == 0.0) continue;
              const double q = q_semiclassical(p, {pt, z, 1.0}, s, c, sign).real();
              ++rep.sign_points;
              // Sigma_+ : pairing > 0 needs -q >= 0; Sigma_- : pairing < 0 needs q >= 0
              if ((pair > 0.0 && q > 0.0) || (pair < 0.0 && q < 0.0)) ++rep.sign_violations;
            }
        }
      }
    }
    if (z.imag() < g.imag_min) continue;
    rep.interior_bound = std::min(rep.interior_bound, ds ? z.imag() * z.imag() : 0.0);
    if (ds) {
      // p = (Y.zeta - z)^2 - |zeta|^2 depends on |Y|, |zeta| and the angle between them
      for (int iy = 0; iy < g.n_base; ++iy) {
        const double y = 0.99 * iy / (g.n_base - 1);
        for (int i1 = 0; i1 < nf; ++i1)
          for (int i2 = 0; i2 < nf; ++i2) {
            YPoint q{Eigen::Vector3d(y, 0.0, 0.0), Eigen::Vector3d(fib(i1), fib(i2), 0.0)};
            rep.interior_min = std::min(rep.interior_min, std::abs(ds_symbol_y<cplx>(q, z)));
            ++rep.interior_points;
          }
      }
    } else {
      const auto h = horizon_roots(p);
      const double lo = h.has_inner ? h.r_minus : 0.1 * h.r_plus;
      for (int ib = 0; ib < g.n_base; ++ib) {
        const double r = detail::grid_point(lo, h.r_plus, ib, g.n_base);
        const CSample cs = c(r);
        for (int it = 0; it < g.n_theta; ++it) {
          const double th = detail::grid_point(0.2, pi - 0.2, it, g.n_theta);
          for (int i1 = 0; i1 < nf; ++i1)
            for (int i2 = 0; i2 < nf; ++i2)
              for (int i3 = 0; i3 < nf; ++i3) {
                const PhasePoint pt{r, th, 0.0, fib(i1), fib(i2), fib(i3)};
                rep.interior_min = std::min(rep.interior_min, std::abs(kds_symbol<cplx>(p, cs, pt, z, sign)));
                ++rep.interior_points;
              }
        }
      }
    }
  }
  if (rep.interior_points == 0) rep.interior_bound = 0.0;
  return rep;
}

// Doubles digamma until 2 chi2 |Im f_z| |<beta, dtau/tau>| < (digamma/2)(Im z)^2 <dtau/tau, dtau/tau>^2
// holds with margin 2 on the plateau grid, beta = varpi + Re z dtau/tau.
inline double select_digamma(const SpacetimeParams& p, AbsorbingSpec s, const std::vector<cplx>& zs,
                             const EllipticityGrid& g, const CProfile& c, int sign = 1, int max_doublings = 60) {
  validate(s);
  double need = 0.0;  // max over the grid of 2 * lhs / ((Im z)^2 T^2 / 2)
  const int nf = g.n_fiber;
  auto fib = [&](int i) { return -g.fiber_max + 2.0 * g.fiber_max * i / (nf - 1); };
  for (const cplx z : zs) {
    if (!(z.imag() > 0.0)) continue;
    for (const auto& [a, b] : detail::collar_intervals(p, s)) {
      for (int ib = 0; ib < g.n_base; ++ib) {
        const double base = detail::grid_point(a, b, ib, g.n_base);
        const double mu = absorbing_variable(p, base);
        const double c2 = chi2(s, mu);
        if (c2 == 0.0 || chi1(s, mu) == 0.0) continue;
        const CSample cs = c(base);
        for (int it = 0; it < g.n_theta; ++it) {
          const double th = detail::grid_point(0.2, pi - 0.2, it, g.n_theta);
          for (int i1 = 0; i1 < nf; ++i1)
            for (int i2 = 0; i2 < nf; ++i2)
              for (int i3 = 0; i3 < nf; ++i3) {
                const PhasePoint pt{base, th, 0.0, fib(i1), fib(i2), fib(i3)};
                const double T = time_norm(p, cs, pt, sign);
                const double beta = time_pairing(p, cs, pt, z.real(), sign).real();
                const double imf = f_z(fiber_norm(p, pt), z, s.j, 0.0).imag();
                const double lhs = 2.0 * c2 * std::abs(imf) * std::abs(beta);
                need = std::max(need, 2.0 * lhs / (0.5 * z.imag() * z.imag() * T * T));
              }
        }
      }
    }
  }
  double F = s.digamma;
  for (int k = 0; k < max_doublings && !(F > need); ++k) F *= 2.0;
  if (!(F > need)) raise(ErrorCode::ConfigError, "select_digamma: no admissible plateau height");
  return F;
}

}  // namespace kds

#pragma once
// Kerr-de Sitter family: parameters, the quartic mu~, horizons, admissibility,
// the b-frame dual metric in Kerr-star form and the smooth function c(r).

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kds/core.hpp"
#include "kds/numerics.hpp"

namespace kds {

enum class Model { DeSitter, DSSchwarzschild, KerrDeSitter, MinkowskiBoundary };

inline const char* to_string(Model m) {
  switch (m) {
    case Model::DeSitter: return "deSitter";
    case Model::DSSchwarzschild: return "dSSchwarzschild";
    case Model::KerrDeSitter: return "KerrDeSitter";
    case Model::MinkowskiBoundary: return "MinkowskiBoundary";
  }
  return "unknown";
}

inline Model model_from_string(const std::string& s) {
  if (s == "deSitter" || s == "de_sitter" || s == "ds") return Model::DeSitter;
  if (s == "dSSchwarzschild" || s == "dss" || s == "schwarzschild_de_sitter") return Model::DSSchwarzschild;
  if (s == "KerrDeSitter" || s == "kds" || s == "kerr_de_sitter") return Model::KerrDeSitter;
  if (s == "MinkowskiBoundary" || s == "minkowski") return Model::MinkowskiBoundary;
  raise(ErrorCode::ConfigError, "unknown model '" + s + "'");
}

struct SpacetimeParams {
  double lambda = 3.0;
  double r_s = 0.0;
  double alpha = 0.0;
  Model model = Model::KerrDeSitter;
  int n = 4;  // spacetime dimension, used by the de Sitter and Minkowski models

  double gamma() const { return lambda * alpha * alpha / 3.0; }
};

inline void validate(const SpacetimeParams& p) {
  require(std::isfinite(p.lambda) && std::isfinite(p.r_s) && std::isfinite(p.alpha), "non-finite parameters");
  require(p.lambda >= 0.0, "lambda must be >= 0");
  require(p.r_s >= 0.0, "r_s must be >= 0");
  require(p.n >= 3, "spacetime dimension n must be >= 3");
  if (p.model == Model::DeSitter) require(p.r_s == 0.0 && p.alpha == 0.0, "deSitter model needs r_s = alpha = 0");
  if (p.model == Model::DSSchwarzschild) require(p.alpha == 0.0, "dSSchwarzschild model needs alpha = 0");
}

inline SpacetimeParams de_sitter(double lambda = 3.0, int n = 4) {
  return {lambda, 0.0, 0.0, Model::DeSitter, n};
}
inline SpacetimeParams de_sitter_schwarzschild(double lambda, double r_s) {
  return {lambda, r_s, 0.0, Model::DSSchwarzschild, 4};
}
inline SpacetimeParams kerr_de_sitter(double lambda, double r_s, double alpha) {
  return {lambda, r_s, alpha, Model::KerrDeSitter, 4};
}
inline SpacetimeParams minkowski_boundary(int n = 4) { return {3.0, 0.0, 0.0, Model::MinkowskiBoundary, n}; }

// mu~(r) = (r^2 + alpha^2)(1 - lambda r^2 / 3) - r_s r, ascending coefficients.
// The Minkowski boundary model uses the light-cone analogue s^2 (1 - s^2).
inline std::array<double, 5> mu_tilde_coefficients(const SpacetimeParams& p) {
  if (p.model == Model::MinkowskiBoundary) return {0.0, 0.0, 1.0, 0.0, -1.0};
  const double g = p.gamma();
  return {p.alpha * p.alpha, -p.r_s, 1.0 - g, 0.0, -p.lambda / 3.0};
}

struct MuTilde {
  double value;
  double d1;
  double d2;
};

inline MuTilde mu_tilde(const SpacetimeParams& p, double r) {
  const auto c = mu_tilde_coefficients(p);
  const double v = c[0] + r * (c[1] + r * (c[2] + r * (c[3] + r * c[4])));
  const double d1 = c[1] + r * (2.0 * c[2] + r * (3.0 * c[3] + r * 4.0 * c[4]));
  const double d2 = 2.0 * c[2] + r * (6.0 * c[3] + r * 12.0 * c[4]);
  return {v, d1, d2};
}

struct HorizonData {
  double r_minus = std::numeric_limits<double>::quiet_NaN();
  double r_plus = std::numeric_limits<double>::quiet_NaN();
  double gamma_minus = std::numeric_limits<double>::quiet_NaN();
  double gamma_plus = std::numeric_limits<double>::quiet_NaN();
  double gamma = 0.0;
  double beta_minus = std::numeric_limits<double>::quiet_NaN();
  double beta_plus = std::numeric_limits<double>::quiet_NaN();
  bool has_inner = false;

  double r(int sign) const { return sign > 0 ? r_plus : r_minus; }
  double surface_gravity(int sign) const { return sign > 0 ? gamma_plus : gamma_minus; }
  double beta(int sign) const { return sign > 0 ? beta_plus : beta_minus; }
};

inline double beta_from(const SpacetimeParams& p, double r, double Gamma) {
  return 2.0 / Gamma * (1.0 + p.gamma()) * (r * r + p.alpha * p.alpha);
}

inline HorizonData horizon_roots(const SpacetimeParams& p) {
  validate(p);
  const auto c = mu_tilde_coefficients(p);
  HorizonData h;
  h.gamma = p.gamma();
  if (!(h.gamma >= 0.0 && h.gamma < 1.0)) raise(ErrorCode::NoHorizons, "gamma outside [0,1)");
  auto roots = num::polynomial_roots({c.begin(), c.end()});
  std::vector<double> real_pos;
  for (const auto& z : roots) {
    if (std::abs(z.imag()) <= 1e-7 * std::max(1.0, std::abs(z.real())) && z.real() > 1e-10) {
      // one Newton polish on the real quartic
      double r = z.real();
      const auto m = mu_tilde(p, r);
      if (m.d1 != 0.0) r -= m.value / m.d1;
      real_pos.push_back(r);
    }
  }
  std::sort(real_pos.begin(), real_pos.end());
  if (real_pos.empty()) raise(ErrorCode::NoHorizons, "mu~ has no positive root");
  const double tol = 1e-12 * std::max(1.0, p.r_s * p.r_s);
  const double rp = real_pos.back();
  const auto mp = mu_tilde(p, rp);
  if (!(mp.d1 < 0.0) || std::abs(mp.value) > tol) raise(ErrorCode::NoHorizons, "outer root fails -mu~' > 0");
  h.r_plus = rp;
  h.gamma_plus = -mp.d1;
  h.beta_plus = beta_from(p, rp, h.gamma_plus);
  const bool needs_inner = p.model == Model::DSSchwarzschild || p.model == Model::KerrDeSitter;
  if (needs_inner) {
    if (real_pos.size() < 2) raise(ErrorCode::NoHorizons, "no inner horizon");
    const double rm = real_pos[real_pos.size() - 2];
    const auto mm = mu_tilde(p, rm);
    if (!(mm.d1 > 0.0) || std::abs(mm.value) > tol || !(rm < rp))
      raise(ErrorCode::NoHorizons, "inner root fails mu~' > 0");
    h.r_minus = rm;
    h.gamma_minus = mm.d1;
    h.beta_minus = beta_from(p, rm, h.gamma_minus);
    h.has_inner = true;
  }
  return h;
}

// Radial domain [r_lo, r_hi] extended by delta beyond the horizons.
struct RadialDomain {
  double r_lo;
  double r_hi;
  double delta;
};

inline RadialDomain radial_domain(const SpacetimeParams& p, const HorizonData& h, double delta_frac = 0.1) {
  if (h.has_inner) {
    const double d = delta_frac * (h.r_plus - h.r_minus);
    return {std::max(h.r_minus - d, 1e-6), h.r_plus + d, d};
  }
  const double d = delta_frac * h.r_plus;
  (void)p;
  return {0.0, h.r_plus + d, d};
}

struct Diagnostic {
  std::string name;
  double value;
  double threshold;
};

struct AdmissibilityReport {
  bool horizons_exist = false;
  bool classical_nontrapping = false;
  bool semiclassical_regime = false;
  bool ergoregions_disjoint = false;
  std::string error;  // filled when horizon_roots failed
  std::vector<Diagnostic> diagnostics;

  bool all() const { return horizons_exist && classical_nontrapping && semiclassical_regime && ergoregions_disjoint; }
};

// Critical points of mu~ strictly inside (a, b).
inline std::vector<double> mu_tilde_critical_points(const SpacetimeParams& p, double a, double b) {
  const auto c = mu_tilde_coefficients(p);
  std::vector<double> dc = {c[1], 2.0 * c[2], 3.0 * c[3], 4.0 * c[4]};
  std::vector<double> out;
  for (const auto& z : num::polynomial_roots(dc)) {
    if (std::abs(z.imag()) > 1e-9 * std::max(1.0, std::abs(z.real()))) continue;
    if (z.real() > a && z.real() < b) out.push_back(z.real());
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline AdmissibilityReport admissibility(const SpacetimeParams& p, double delta_frac = 0.1, int grid = 2048) {
  AdmissibilityReport rep;
  HorizonData h;
  try {
    h = horizon_roots(p);
    rep.horizons_exist = true;
  } catch (const Error& e) {
    rep.error = e.what();
    rep.diagnostics.push_back({"horizons", 0.0, 1.0});
    return rep;
  }
  const double a2 = p.alpha * p.alpha;
  const double inner = h.has_inner ? h.r_minus : 0.0;
  // no classical trapping: alpha^2 < mu~ at interior critical points
  rep.classical_nontrapping = true;
  for (double r0 : mu_tilde_critical_points(p, inner, h.r_plus)) {
    const double v = mu_tilde(p, r0).value;
    rep.diagnostics.push_back({"mu_tilde_at_critical_point", v, a2});
    if (!(a2 < v)) rep.classical_nontrapping = false;
  }
  // semiclassical regime |alpha| < (sqrt 3 / 4) r_s; alpha = 0 needs no bound
  const double bound = std::sqrt(3.0) / 4.0 * p.r_s;
  rep.diagnostics.push_back({"abs_alpha", std::abs(p.alpha), bound});
  rep.semiclassical_regime = rep.horizons_exist && (p.alpha == 0.0 || std::abs(p.alpha) < bound);
  // ergoregion components of {mu~ <= alpha^2}
  const auto dom = radial_domain(p, h, delta_frac);
  const double lo = h.has_inner ? h.r_minus - dom.delta : 0.0;
  const double hi = h.r_plus + dom.delta;
  int components = 0;
  bool inside = false;
  for (int i = 0; i < grid; ++i) {
    const double r = lo + (hi - lo) * (i + 0.5) / grid;
    if (r <= 0.0) continue;
    const bool in = mu_tilde(p, r).value <= a2;
    if (in && !inside) ++components;
    inside = in;
  }
  const int expected = h.has_inner ? 2 : 1;
  rep.diagnostics.push_back({"ergoregion_components", double(components), double(expected)});
  rep.ergoregions_disjoint = components == expected;
  return rep;
}

// c(r) value and derivative.
struct CSample {
  double c;
  double dc;
};

// c = 0 everywhere; used where the paper takes c = 0.
struct ZeroC {
  CSample sample(double) const { return {0.0, 0.0}; }
};

// Dual metric coefficients rho^2 G in the frame (xi, sigma, eta, zeta).
inline Eigen::Matrix4d dual_metric_scaled(const SpacetimeParams& p, double r, double theta, CSample cs,
                                          int horizon_sign) {
  if (theta < 1e-6 || theta > pi - 1e-6) raise(ErrorCode::PolarSingularity, "theta too close to a pole");
  const double g1 = 1.0 + p.gamma();
  const double al = p.alpha;
  const double a = g1 * al;
  const double b = g1 * (r * r + al * al);
  const double ct = std::cos(theta), st = std::sin(theta);
  const double s2 = st * st;
  const double kappa = 1.0 + p.gamma() * ct * ct;
  const double K = g1 * g1 / (kappa * s2);
  const double mt = mu_tilde(p, r).value;
  const double c = cs.c;
  const double s = horizon_sign >= 0 ? 1.0 : -1.0;
  Eigen::Matrix4d M = Eigen::Matrix4d::Zero();
  M(0, 0) = -mt;
  M(0, 1) = M(1, 0) = -s * (mt * c + b);
  M(1, 1) = -mt * c * c - 2.0 * b * c - g1 * g1 * al * al * s2 / kappa;
  M(0, 3) = M(3, 0) = s * a;
  M(1, 3) = M(3, 1) = a * c + g1 * g1 * al / kappa;
  M(2, 2) = -kappa;
  M(3, 3) = -K;
  return M;
}

inline double rho_squared(const SpacetimeParams& p, double r, double theta) {
  const double ct = std::cos(theta);
  return r * r + p.alpha * p.alpha * ct * ct;
}

inline Eigen::Matrix4d dual_metric(const SpacetimeParams& p, double r, double theta, CSample cs, int horizon_sign) {
  return dual_metric_scaled(p, r, theta, cs, horizon_sign) / rho_squared(p, r, theta);
}

// Metric g = G^{-1}.
inline Eigen::Matrix4d metric(const SpacetimeParams& p, double r, double theta, CSample cs, int horizon_sign) {
  return dual_metric(p, r, theta, cs, horizon_sign).inverse();
}

// Smooth c(r): exact -b/mu~ where mu~ > mu~_1, a constant where mu~ < 0 and a
// quintic blend in between, so that dtau/tau stays time-like.
class CFunction {
 public:
  CFunction(const SpacetimeParams& p, double mu1_frac = 0.5, double delta_frac = 0.1, int grid = 2048)
      : p_(p), h_(horizon_roots(p)) {
    dom_ = radial_domain(p, h_, delta_frac);
    const double inner = h_.has_inner ? h_.r_minus : 0.0;
    // location and value of max mu~ between the horizons
    r_peak_ = inner + 0.5 * (h_.r_plus - inner);
    double best = mu_tilde(p_, r_peak_).value;
    for (double r0 : mu_tilde_critical_points(p_, inner, h_.r_plus)) {
      const double v = mu_tilde(p_, r0).value;
      if (v > best) best = v, r_peak_ = r0;
    }
    mu_max_ = best;
    mu1_ = mu1_frac * mu_max_;
    require(mu1_ > 0.0, "CFunction: mu~_1 must be positive");
    // smallest b over the blended and collar parts
    const double g1 = 1.0 + p_.gamma();
    double bmin = std::numeric_limits<double>::infinity();
    for (int i = 0; i < grid; ++i) {
      const double r = dom_.r_lo + (dom_.r_hi - dom_.r_lo) * (i + 0.5) / grid;
      if (!blended(r) || mu_tilde(p_, r).value > mu1_) continue;
      bmin = std::min(bmin, g1 * (r * r + p_.alpha * p_.alpha));
    }
    const double a2 = sqr(g1 * p_.alpha);
    const double lo = -bmin / mu1_;
    const double hi = -a2 / bmin;
    if (!(lo < hi)) raise(ErrorCode::InfeasibleC, "empty interval for the constant part of c");
    c_const_ = p_.alpha == 0.0 ? 0.5 * lo : 0.5 * (lo + hi);
    // verify the time-like inequality on the grid
    for (int i = 0; i <= grid; ++i) {
      const double r = dom_.r_lo + (dom_.r_hi - dom_.r_lo) * i / grid;
      if (r <= 0.0) continue;
      const double v = timelike_lhs(r);
      worst_ = std::max(worst_, v);
      if (!(v < -1e-8 * std::max(1.0, std::abs(c_const_)))) {
        raise(ErrorCode::InfeasibleC, "time-like condition fails at r=" + std::to_string(r));
      }
    }
  }

  // mu~ c^2 + 2 b c + a^2, negative when dtau/tau is time-like
  double timelike_lhs(double r) const {
    const double g1 = 1.0 + p_.gamma();
    const double b = g1 * (r * r + p_.alpha * p_.alpha);
    const double c = sample(r).c;
    return mu_tilde(p_, r).value * c * c + 2.0 * b * c + sqr(g1 * p_.alpha);
  }

  CSample sample(double r) const {
    const double g1 = 1.0 + p_.gamma();
    const double b = g1 * (r * r + p_.alpha * p_.alpha);
    const double db = 2.0 * g1 * r;
    const auto m = mu_tilde(p_, r);
    if (!blended(r) || m.value > mu1_) {
      return {-b / m.value, -db / m.value + b * m.d1 / (m.value * m.value)};
    }
    if (m.value <= 0.0) return {c_const_, 0.0};
    // c = (1-S) c0 + S c_exact, evaluated without dividing by small mu~
    const double t = m.value / mu1_;
    const double S = t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
    const double dS = 30.0 * t * t * (1.0 - t) * (1.0 - t) / mu1_;  // dS/dmu~
    const double S_t = t * t * (10.0 - 15.0 * t + 6.0 * t * t);     // S / t
    const double dS_t = t * (20.0 - 45.0 * t + 24.0 * t * t) * m.d1 / mu1_;  // d(S/t)/dr
    const double Sce = -b * S_t / mu1_;
    const double dSce = -(db * S_t + b * dS_t) / mu1_;
    const double c = (1.0 - S) * c_const_ + Sce;
    const double dc = -dS * m.d1 * c_const_ + dSce;
    return {c, dc};
  }

  double mu1() const { return mu1_; }
  double mu_max() const { return mu_max_; }
  double c_const() const { return c_const_; }
  double worst_lhs() const { return worst_; }
  const RadialDomain& domain() const { return dom_; }
  const HorizonData& horizons() const { return h_; }
  const SpacetimeParams& params() const { return p_; }

  std::vector<std::pair<double, double>> sampled(int n) const {
    std::vector<std::pair<double, double>> out;
    for (int i = 0; i <= n; ++i) {
      const double r = dom_.r_lo + (dom_.r_hi - dom_.r_lo) * i / n;
      if (r > 0.0) out.emplace_back(r, sample(r).c);
    }
    return out;
  }

 private:
  // the blend is used on the horizon sides of the peak; without an inner
  // horizon the inner side keeps the exact formula down to the origin
  bool blended(double r) const { return r >= r_peak_ || h_.has_inner; }

  SpacetimeParams p_;
  HorizonData h_;
  RadialDomain dom_{};
  double r_peak_ = 0.0;
  double mu_max_ = 0.0;
  double mu1_ = 0.0;
  double c_const_ = 0.0;
  double worst_ = -std::numeric_limits<double>::infinity();
};

inline CFunction choose_c(const SpacetimeParams& p, double mu1_frac = 0.5, double delta_frac = 0.1) {
  return CFunction(p, mu1_frac, delta_frac);
}

}  // namespace kds

#pragma once
// Principal symbols and Hamilton vector fields: Kerr-de Sitter in Kerr-star
// form (classical, full and semiclassical), the de Sitter polar and Y charts,
// and the radial coefficients of the Minkowski boundary operator.

#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "kds/core.hpp"
#include "kds/spacetime.hpp"

namespace kds {

// Covector xi dr + sigma dtau/tau + eta dtheta + zeta dphi over (r, theta, phi).
struct PhasePoint {
  double r = 0.0;
  double theta = pi / 2;
  double phi = 0.0;
  double xi = 0.0;
  double eta = 0.0;
  double zeta = 0.0;
};

// Fiber-compactified chart near fiber infinity: nu = 1/|xi|.
struct CompactPhasePoint {
  double r = 0.0;
  double theta = pi / 2;
  double phi = 0.0;
  double nu = 0.0;
  double eta_hat = 0.0;
  double zeta_hat = 0.0;
  int sign_xi = 1;
};

struct SemiclassicalPoint {
  PhasePoint point;
  cplx z;
  double h = 1.0;
};

// d/dt of (r, theta, phi, xi, eta, zeta) or of (r, theta, phi, nu, eta_hat, zeta_hat).
using PhaseVector = std::array<double, 6>;

inline CompactPhasePoint to_compact(const PhasePoint& p) {
  require(p.xi != 0.0, "to_compact: xi must be nonzero");
  const double a = std::abs(p.xi);
  return {p.r, p.theta, p.phi, 1.0 / a, p.eta / a, p.zeta / a, p.xi > 0 ? 1 : -1};
}

inline PhasePoint from_compact(const CompactPhasePoint& c) {
  require(c.nu > 0.0, "from_compact: nu must be positive");
  return {c.r, c.theta, c.phi, c.sign_xi / c.nu, c.eta_hat / c.nu, c.zeta_hat / c.nu};
}

// Type-erased c(r) profile.
using CProfile = std::function<CSample(double)>;

inline CProfile zero_c() {
  return [](double) { return CSample{0.0, 0.0}; };
}
inline CProfile profile_of(const CFunction& f) {
  return [f](double r) { return f.sample(r); };
}

inline void check_theta(double theta) {
  if (theta < 1e-6 || theta > pi - 1e-6) raise(ErrorCode::PolarSingularity, "theta within 1e-6 of a pole");
}

// Angular pieces kappa, K = (1+gamma)^2/(kappa sin^2) and their theta-derivatives.
struct Angular {
  double kappa, dkappa, K, dK, s2, ds2;
};

inline Angular angular(const SpacetimeParams& p, double theta) {
  const double g = p.gamma(), g1 = 1.0 + g;
  const double ct = std::cos(theta), st = std::sin(theta);
  const double s2 = st * st, ds2 = 2.0 * st * ct;
  const double kappa = 1.0 + g * ct * ct, dkappa = -g * ds2;
  const double K = g1 * g1 / (kappa * s2);
  const double dK = -K * (dkappa / kappa + ds2 / s2);
  return {kappa, dkappa, K, dK, s2, ds2};
}

// p = -mu~ X^2 -+ 2bXz +- 2aX zeta - ptilde with X = xi +- c z. With the fiber
// variables scaled by 1/h and z -> z/h this is the full symbol.
template <class T>
T kds_symbol(const SpacetimeParams& p, CSample cs, const PhasePoint& pt, T z, int horizon_sign) {
  check_theta(pt.theta);
  const double s = horizon_sign >= 0 ? 1.0 : -1.0;
  const double g1 = 1.0 + p.gamma();
  const double a = g1 * p.alpha, b = g1 * (pt.r * pt.r + p.alpha * p.alpha);
  const auto ang = angular(p, pt.theta);
  const double mt = mu_tilde(p, pt.r).value;
  const T X = pt.xi + s * cs.c * z;
  const T w = pt.zeta - p.alpha * ang.s2 * z;
  return -mt * X * X - 2.0 * s * b * X * z + 2.0 * s * a * X * pt.zeta - ang.kappa * pt.eta * pt.eta - ang.K * w * w;
}

template <class T>
T kds_p_tilde(const SpacetimeParams& p, const PhasePoint& pt, T z) {
  check_theta(pt.theta);
  const auto ang = angular(p, pt.theta);
  const T w = pt.zeta - p.alpha * ang.s2 * z;
  return ang.kappa * pt.eta * pt.eta + ang.K * w * w;
}

inline double kds_classical_symbol(const SpacetimeParams& p, const CProfile& c, const PhasePoint& pt,
                                   int horizon_sign) {
  return kds_symbol<double>(p, c(pt.r), pt, 0.0, horizon_sign);
}

inline cplx kds_full_symbol(const SpacetimeParams& p, const CProfile& c, const PhasePoint& pt, cplx sigma,
                            int horizon_sign) {
  return kds_symbol<cplx>(p, c(pt.r), pt, sigma, horizon_sign);
}

inline cplx kds_semiclassical_symbol(const SpacetimeParams& p, const CProfile& c, const SemiclassicalPoint& spt,
                                     int horizon_sign) {
  require(spt.h > 0.0, "semiclassical parameter h must be positive");
  return kds_symbol<cplx>(p, c(spt.point.r), spt.point, spt.z, horizon_sign);
}

struct SymbolGrad {
  double value = 0.0;
  double dr = 0.0, dtheta = 0.0;  // base derivatives (phi-independent)
  double dxi = 0.0, deta = 0.0, dzeta = 0.0;
};

// Value and gradient for real z.
inline SymbolGrad kds_symbol_grad(const SpacetimeParams& p, CSample cs, const PhasePoint& pt, double z,
                                  int horizon_sign) {
  check_theta(pt.theta);
  const double s = horizon_sign >= 0 ? 1.0 : -1.0;
  const double g1 = 1.0 + p.gamma();
  const double a = g1 * p.alpha, b = g1 * (pt.r * pt.r + p.alpha * p.alpha), db = 2.0 * g1 * pt.r;
  const auto ang = angular(p, pt.theta);
  const auto m = mu_tilde(p, pt.r);
  const double X = pt.xi + s * cs.c * z;
  const double w = pt.zeta - p.alpha * ang.s2 * z;
  const double dw = -p.alpha * ang.ds2 * z;
  SymbolGrad g;
  g.value = -m.value * X * X - 2.0 * s * b * X * z + 2.0 * s * a * X * pt.zeta - ang.kappa * pt.eta * pt.eta -
            ang.K * w * w;
  g.dxi = -2.0 * m.value * X - 2.0 * s * b * z + 2.0 * s * a * pt.zeta;
  g.deta = -2.0 * ang.kappa * pt.eta;
  g.dzeta = 2.0 * s * a * X - 2.0 * ang.K * w;
  g.dr = -m.d1 * X * X - 2.0 * s * m.value * X * cs.dc * z - 2.0 * s * db * X * z - 2.0 * b * cs.dc * z * z +
         2.0 * a * cs.dc * z * pt.zeta;
  g.dtheta = -ang.dkappa * pt.eta * pt.eta - ang.dK * w * w - 2.0 * ang.K * w * dw;
  return g;
}

inline PhaseVector hamilton_from_grad(const SymbolGrad& g) {
  return {g.dxi, g.deta, g.dzeta, -g.dr, -g.dtheta, 0.0};
}

// H_p in the affine chart, for the symbol with real spectral parameter z
// (z = 0 gives the classical symbol).
inline PhaseVector kds_hamilton(const SpacetimeParams& p, const CProfile& c, const PhasePoint& pt, double z,
                                int horizon_sign) {
  return hamilton_from_grad(kds_symbol_grad(p, c(pt.r), pt, z, horizon_sign));
}

// nu H_p in the compact chart. The symbol is jointly homogeneous of degree 2 in
// (xi, eta, zeta, z), so everything is evaluated at (sgn, eta_hat, zeta_hat, z nu).
inline PhaseVector compact_from_grad(const SymbolGrad& g, const CompactPhasePoint& c) {
  const double sg = c.sign_xi;
  const double Fxi = -g.dr, Feta = -g.dtheta, Fzeta = 0.0;
  return {g.dxi, g.deta, g.dzeta, -sg * c.nu * Fxi, Feta - sg * c.eta_hat * Fxi, Fzeta - sg * c.zeta_hat * Fxi};
}

inline PhaseVector kds_hamilton_compact(const SpacetimeParams& p, const CProfile& c, const CompactPhasePoint& cp,
                                        double z, int horizon_sign) {
  const PhasePoint hat{cp.r, cp.theta, cp.phi, double(cp.sign_xi), cp.eta_hat, cp.zeta_hat};
  return compact_from_grad(kds_symbol_grad(p, c(cp.r), hat, z * cp.nu, horizon_sign), cp);
}

inline double subprincipal_beta(const SpacetimeParams& p, int horizon_sign) {
  const auto h = horizon_roots(p);
  if (horizon_sign < 0 && !h.has_inner) raise(ErrorCode::NoHorizons, "model has no inner horizon");
  return h.beta(horizon_sign);
}

// ---------------------------------------------------------------------------
// de Sitter, chart (mu, theta, phi) with mu = 1 - r^2 (unit Lambda = 3 scale).
// p = -4 r^2 mu xi^2 + 4 r^2 z xi + z^2 - r^{-2} |eta|^2,
// |eta|^2 = eta_theta^2 + eta_phi^2 / sin^2 theta on the two-sphere. For other
// dimensions only |eta|^2 enters, and it is conserved.
// The PhasePoint field r carries mu in this chart.

template <class T>
T ds_symbol(int n, const PhasePoint& pt, T z) {
  require(n >= 3, "ds_symbol: n must be >= 3");
  check_theta(pt.theta);
  const double mu = pt.r;
  const double r2 = 1.0 - mu;
  require(r2 > 0.0, "ds_symbol: polar chart needs r > 0 (use the Y chart)");
  const double st = std::sin(pt.theta);
  const double eta2 = pt.eta * pt.eta + pt.zeta * pt.zeta / (st * st);
  return -4.0 * r2 * mu * pt.xi * pt.xi + 4.0 * r2 * z * pt.xi + z * z - eta2 / r2;
}

inline SymbolGrad ds_symbol_grad(const PhasePoint& pt, double z) {
  check_theta(pt.theta);
  const double mu = pt.r, r2 = 1.0 - mu;
  require(r2 > 0.0, "ds_symbol_grad: polar chart needs r > 0");
  const double st = std::sin(pt.theta), ct = std::cos(pt.theta);
  const double eta2 = pt.eta * pt.eta + pt.zeta * pt.zeta / (st * st);
  SymbolGrad g;
  g.value = -4.0 * r2 * mu * pt.xi * pt.xi + 4.0 * r2 * z * pt.xi + z * z - eta2 / r2;
  g.dr = -4.0 * (1.0 - 2.0 * mu) * pt.xi * pt.xi - 4.0 * z * pt.xi - eta2 / (r2 * r2);
  g.dxi = -8.0 * r2 * mu * pt.xi + 4.0 * r2 * z;
  g.deta = -2.0 * pt.eta / r2;
  g.dzeta = -2.0 * pt.zeta / (st * st * r2);
  g.dtheta = 2.0 * pt.zeta * pt.zeta * ct / (st * st * st * r2);
  return g;
}

inline PhaseVector ds_hamilton(const PhasePoint& pt, double z) { return hamilton_from_grad(ds_symbol_grad(pt, z)); }

inline PhaseVector ds_hamilton_compact(const CompactPhasePoint& cp, double z) {
  const PhasePoint hat{cp.r, cp.theta, cp.phi, double(cp.sign_xi), cp.eta_hat, cp.zeta_hat};
  return compact_from_grad(ds_symbol_grad(hat, z * cp.nu), cp);
}

// Y chart: Y = r omega in R^{n-1}, covector zeta dY; p = (Y.zeta - z)^2 - |zeta|^2.
struct YPoint {
  Eigen::VectorXd Y;
  Eigen::VectorXd zeta;
};

template <class T>
T ds_symbol_y(const YPoint& q, T z) {
  const T yz = q.Y.dot(q.zeta) - z;
  return yz * yz - q.zeta.squaredNorm();
}

// (dY/dt, dzeta/dt) for real z
inline YPoint ds_hamilton_y(const YPoint& q, double z) {
  const double yz = q.Y.dot(q.zeta) - z;
  return {2.0 * yz * q.Y - 2.0 * q.zeta, -2.0 * yz * q.zeta};
}

// Polar data of a Y-chart point for n = 4: mu, (theta, phi), xi_mu, eta.
inline PhasePoint ds_y_to_polar(const YPoint& q) {
  require(q.Y.size() == 3 && q.zeta.size() == 3, "ds_y_to_polar: three-dimensional Y expected");
  const double r = q.Y.norm();
  require(r > 0.0 && r < 1.0, "ds_y_to_polar: need 0 < r < 1");
  const double theta = std::acos(q.Y[2] / r), phi = std::atan2(q.Y[1], q.Y[0]);
  const double st = std::sin(theta), ct = std::cos(theta), sp = std::sin(phi), cph = std::cos(phi);
  // dY/dr, dY/dtheta, dY/dphi
  const Eigen::Vector3d er(st * cph, st * sp, ct);
  const Eigen::Vector3d eth(r * ct * cph, r * ct * sp, -r * st);
  const Eigen::Vector3d eph(-r * st * sp, r * st * cph, 0.0);
  const Eigen::Vector3d zt = q.zeta;
  const double xi_r = zt.dot(er);
  // mu = 1 - r^2, so xi_r = -2 r xi_mu
  return {1.0 - r * r, theta, phi, -xi_r / (2.0 * r), zt.dot(eth), zt.dot(eph)};
}

// ---------------------------------------------------------------------------
// Minkowski boundary model: radial operator of
// (Z D_Z + sigma - i(n-1)/2)^2 + 1/4 - Delta_Z on degree-ell harmonics,
// written as a2(s) u'' + a1(s) u' + a0(s) u with Laurent coefficients in s.
struct RadialCoefficient {
  // sum_k coef[k] s^(k + lowest)
  int lowest = 0;
  std::vector<cplx> coef;

  cplx operator()(double s) const {
    cplx v = 0.0;
    for (std::size_t k = 0; k < coef.size(); ++k) v += coef[k] * std::pow(s, double(int(k) + lowest));
    return v;
  }
};

struct RadialOde {
  RadialCoefficient a2, a1, a0;
};

inline RadialOde minkowski_mode_coeffs(int n, cplx sigma, int ell) {
  require(n >= 3 && ell >= 0, "minkowski_mode_coeffs: need n >= 3, ell >= 0");
  const cplx m = sigma - I * (0.5 * (n - 1));
  RadialOde ode;
  // (1 - s^2) u''
  ode.a2 = {0, {1.0, 0.0, -1.0}};
  // ((n-2)/s - (1 + 2 i m) s) u'; 1 + 2im = n + 2 i sigma
  ode.a1 = {-1, {double(n - 2), 0.0, -(1.0 + 2.0 * I * m)}};
  // m^2 + 1/4 - ell(ell+n-3)/s^2
  ode.a0 = {-2, {-double(ell * (ell + n - 3)), 0.0, m * m + 0.25}};
  return ode;
}

}  // namespace kds

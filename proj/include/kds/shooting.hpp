#pragma once
// Shooting oracle for the radial pencils: Frobenius series at the two
// regular singular ends, Runge-Kutta continuation to a midpoint and the
// Wronskian there.  Independent of the collocation discretization.
//
// The series at a horizon is normalized by prod_j (a1 (j-1) + b0)/(a1 j), the
// factors whose zeros make the exponent-0 recurrence degenerate, so the
// determinant is entire in sigma.

#include <array>
#include <cmath>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/numeric/odeint.hpp>

#include "kds/core.hpp"
#include "kds/numerics.hpp"
#include "kds/resonances.hpp"

namespace kds {

// Truncated power series in a local variable x.
using Series = std::vector<cplx>;

inline Series series_mul(const Series& a, const Series& b) {
  Series c(a.size(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; i + j < a.size() && j < b.size(); ++j) c[i + j] += a[i] * b[j];
  return c;
}

inline Series series_derivative(const Series& a) {
  Series d(a.size(), 0.0);
  for (std::size_t k = 1; k < a.size(); ++k) d[k - 1] = double(k) * a[k];
  return d;
}

// Taylor coefficients at r0 of the polynomial sum_k p_k r^k.
inline Series polynomial_shift(const std::vector<double>& p, double r0, std::size_t M) {
  Series s(M, 0.0);
  for (std::size_t j = 0; j < std::min(M, p.size()); ++j) {
    double acc = 0.0, binom = 1.0;
    for (std::size_t k = j; k < p.size(); ++k) {
      acc += p[k] * binom * std::pow(r0, double(k - j));
      binom = binom * double(k + 1) / double(k + 1 - j);
    }
    s[j] = acc;
  }
  return s;
}

// 1/(r0 + x) as a series in x.
inline Series series_reciprocal_linear(double r0, std::size_t M) {
  Series s(M);
  for (std::size_t k = 0; k < M; ++k) s[k] = ((k % 2) ? -1.0 : 1.0) / std::pow(r0, double(k + 1));
  return s;
}

struct FrobeniusValue {
  cplx y, dy;
};

// Exponent-0 solution of a y'' + b y' + c y = 0 at a regular singular point
// x = 0 (a0 = 0, a1 != 0), evaluated at x.  All M terms are always used so
// the normalization does not depend on x or on the convergence of the sum.
inline FrobeniusValue frobenius(const Series& a, const Series& b, const Series& c, double x) {
  const std::size_t M = a.size();
  require(b.size() == M && c.size() == M && M >= 4, "frobenius: series lengths");
  require(a[0] == 0.0 && std::abs(a[1]) > 0.0, "frobenius: need a simple zero of a at the expansion point");
  auto dhat = [&](std::size_t j) { return (a[1] * double(j - 1) + b[0]) / (a[1] * double(j)); };
  // z_m = w_m prod_{j<=m} dhat_j; P[k] = prod_{j=k+1}^{m} dhat_j for the current m
  std::vector<cplx> z(M, 0.0), P(M, 1.0);
  z[0] = 1.0;
  for (std::size_t m = 0; m + 1 < M; ++m) {
    // sum over the lower-order terms of the x^m coefficient
    cplx S = 0.0;
    for (std::size_t j = 0; j <= m + 2 && j < M; ++j) {
      if (j >= 2 && m + 2 >= j) {
        const std::size_t k = m + 2 - j;
        S += a[j] * double(k) * double(k - 1) * z[k] * P[k];
      }
      if (j >= 1 && m + 1 >= j) {
        const std::size_t k = m + 1 - j;
        S += b[j] * double(k) * z[k] * P[k];
      }
      if (m >= j) S += c[j] * z[m - j] * P[m - j];
    }
    z[m + 1] = -S / (a[1] * double(m + 1) * double(m + 1));
    // advance the running products to m + 1
    const cplx d = dhat(m + 1);
    for (std::size_t k = 0; k <= m; ++k) P[k] *= d;
    P[m + 1] = 1.0;
  }
  // y_m = z_m prod_{j=m+1}^{M} dhat_j; build the tail products backwards
  FrobeniusValue v{0.0, 0.0};
  cplx tail = dhat(M);
  for (std::size_t m = M; m-- > 0;) {
    const cplx ym = z[m] * tail;
    v.y += ym * std::pow(x, double(m));
    if (m > 0) v.dy += ym * double(m) * std::pow(x, double(m - 1));
    tail *= dhat(m);
  }
  return v;
}

// ---------------------------------------------------------------------------
// Radial ODE a y'' + b y' + c y = 0 of the negated pencil, in closed form.

struct RadialOdePoint {
  cplx a, b, c;
};

inline RadialOdePoint radial_ode(const SpacetimeParams& p, int ell, cplx s, double x, double dss_kappa = 0.5) {
  if (radial_mu_model(p)) {
    const double d = p.n - 1, lam = ah_lambda(p);
    return {-4.0 * x * (1.0 - x), -(4.0 - (4.0 + 4.0 * ell + 2.0 * d) * x) + 4.0 * I * s * (1.0 - x),
            ell * (ell + d) + lam - I * s * (2.0 * ell + d) - s * s};
  }
  const auto m = dss_model(p, dss_kappa);
  return {-m.mu(x), -m.dmu(x) - 2.0 * I * s * m.B(x), ell * (ell + 1.0) - I * s * m.dB(x) + s * s * m.E(x)};
}

struct ShootingOptions {
  std::size_t terms = 120;   // series length
  double patch = 0.25;       // de Sitter/Minkowski patch distance from each end
  double rk_tol = 1e-13;
  std::size_t max_steps = 200000;
  double dss_kappa = 0.5;
};

namespace detail {

struct EndSeries {
  Series a, b, c;
  double x0;     // expansion point in the global variable
  double orient; // d/dx_local = orient * d/dx_global
};

inline EndSeries mu_end(const SpacetimeParams& p, int ell, cplx s, bool horizon, std::size_t M) {
  const double d = p.n - 1, lam = ah_lambda(p);
  const cplx b0 = -4.0 + 4.0 * I * s, b1 = (4.0 + 4.0 * ell + 2.0 * d) - 4.0 * I * s;
  const cplx c0 = ell * (ell + d) + lam - I * s * (2.0 * ell + d) - s * s;
  EndSeries e;
  e.a.assign(M, 0.0);
  e.b.assign(M, 0.0);
  e.c.assign(M, 0.0);
  e.a[1] = -4.0;
  e.a[2] = 4.0;
  e.c[0] = c0;
  if (horizon) {
    e.b[0] = b0;
    e.b[1] = b1;
    e.x0 = 0.0;
    e.orient = 1.0;
  } else {
    // t = 1 - mu
    e.b[0] = -(b0 + b1);
    e.b[1] = b1;
    e.x0 = 1.0;
    e.orient = -1.0;
  }
  return e;
}

inline EndSeries dss_end(const DssModel& m, int ell, cplx s, bool outer, std::size_t M) {
  EndSeries e;
  e.x0 = outer ? m.r_plus : m.r_minus;
  e.orient = 1.0;
  const double r0 = e.x0;
  const auto mc = mu_tilde_coefficients(m.p);
  const Series mu = polynomial_shift(std::vector<double>(mc.begin(), mc.end()), r0, M);
  const Series dmu = series_derivative(mu);
  Series ps(M, 0.0), r2(M, 0.0);
  ps[0] = m.psi(r0);
  ps[1] = m.dpsi();
  r2[0] = r0 * r0;
  r2[1] = 2.0 * r0;
  r2[2] = 1.0;
  Series inner(M);
  for (std::size_t k = 0; k < M; ++k) inner[k] = r2[k] - m.kappa * mu[k];
  const Series B = series_mul(ps, inner), dB = series_derivative(B);
  Series q = series_mul(series_reciprocal_linear(r0, M), series_reciprocal_linear(r0 - m.r3, M));
  for (auto& v : q) v *= -12.0 / (m.p.lambda * m.width() * m.width());
  Series ct(M);
  for (std::size_t k = 0; k < M; ++k) ct[k] = -m.kappa * ps[k];
  const Series r4 = series_mul(r2, r2);
  const Series t1 = series_mul(q, r4), t2 = series_mul(series_mul(ps, r2), ct), t3 = series_mul(mu, series_mul(ct, ct));
  e.a.resize(M);
  e.b.resize(M);
  e.c.resize(M);
  for (std::size_t k = 0; k < M; ++k) {
    const cplx E = t1[k] + 2.0 * t2[k] + t3[k];
    e.a[k] = -mu[k];
    e.b[k] = -dmu[k] - 2.0 * I * s * B[k];
    e.c[k] = -I * s * dB[k] + s * s * E;
  }
  e.c[0] += ell * (ell + 1.0);
  e.a[0] = 0.0;  // mu~ vanishes at the horizon
  return e;
}

// Integrates y from x0 to x1 with complex (y, y') split into four reals.
inline FrobeniusValue continue_solution(const SpacetimeParams& p, int ell, cplx s, FrobeniusValue v, double x0,
                                        double x1, const ShootingOptions& o) {
  using State = std::array<double, 4>;
  auto rhs = [&](const State& u, State& du, double x) {
    const auto c = radial_ode(p, ell, s, x, o.dss_kappa);
    const cplx y(u[0], u[1]), dy(u[2], u[3]);
    const cplx d2 = -(c.b * dy + c.c * y) / c.a;
    du = {dy.real(), dy.imag(), d2.real(), d2.imag()};
  };
  State u = {v.y.real(), v.y.imag(), v.dy.real(), v.dy.imag()};
  namespace ode = boost::numeric::odeint;
  auto stepper = ode::make_controlled(o.rk_tol, o.rk_tol, ode::runge_kutta_dopri5<State>());
  std::size_t steps = 0;
  try {
    steps = ode::integrate_adaptive(stepper, rhs, u, x0, x1, (x1 - x0) / 64.0,
                                    [&](const State&, double) {
                                      if (++steps > o.max_steps) throw Error(ErrorCode::StiffFailure, "step budget");
                                    });
  } catch (const Error&) {
    raise(ErrorCode::StiffFailure, "shooting: step budget exhausted at sigma = " + std::to_string(s.real()) + " " +
                                       std::to_string(s.imag()) + "i");
  } catch (const std::exception& e) {
    raise(ErrorCode::StiffFailure, std::string("shooting: ") + e.what());
  }
  for (double w : u)
    if (!std::isfinite(w)) raise(ErrorCode::StiffFailure, "shooting: non-finite solution");
  return {cplx(u[0], u[1]), cplx(u[2], u[3])};
}

}  // namespace detail

// Smooth solution at each end, continued to the midpoint; returns the Wronskian.
inline cplx oracle_shooting(const SpacetimeParams& p, int ell, cplx s, const ShootingOptions& o = {}) {
  if (p.alpha != 0.0) raise(ErrorCode::UnsupportedModel, "oracle_shooting needs alpha = 0");
  std::array<detail::EndSeries, 2> ends;
  std::array<double, 2> patch;
  double mid;
  if (radial_mu_model(p)) {
    ends = {detail::mu_end(p, ell, s, true, o.terms), detail::mu_end(p, ell, s, false, o.terms)};
    patch = {o.patch, 1.0 - o.patch};
    mid = 0.5;
  } else {
    const auto m = dss_model(p, o.dss_kappa);
    ends = {detail::dss_end(m, ell, s, false, o.terms), detail::dss_end(m, ell, s, true, o.terms)};
    // series radius: distance to r = 0 and to the other horizon
    const double w = m.width();
    const double d_lo = 0.4 * std::min(m.r_minus, w), d_hi = 0.4 * std::min(w, m.r_plus - m.r3);
    patch = {m.r_minus + std::min(d_lo, 0.4 * w), m.r_plus - std::min(d_hi, 0.4 * w)};
    mid = 0.5 * (m.r_minus + m.r_plus);
  }
  std::array<FrobeniusValue, 2> at;
  for (int k = 0; k < 2; ++k) {
    const auto& e = ends[k];
    const double xl = e.orient * (patch[k] - e.x0);
    auto v = frobenius(e.a, e.b, e.c, xl);
    v.dy *= e.orient;
    at[k] = detail::continue_solution(p, ell, s, v, patch[k], mid, o);
  }
  return at[0].y * at[1].dy - at[0].dy * at[1].y;
}

// Winding number of the determinant around a circle.
inline int shooting_winding(const SpacetimeParams& p, int ell, cplx center, double radius, int n = 64,
                            const ShootingOptions& o = {}) {
  double total = 0.0;
  cplx prev = oracle_shooting(p, ell, center + radius, o);
  for (int k = 1; k <= n; ++k) {
    const cplx cur = oracle_shooting(p, ell, center + radius * std::exp(I * (2.0 * pi * k / n)), o);
    total += std::arg(cur / prev);
    prev = cur;
  }
  return static_cast<int>(std::lround(total / (2.0 * pi)));
}

// Secant iteration on the determinant.
inline cplx shooting_zero(const SpacetimeParams& p, int ell, cplx guess, double tol = 1e-13, int max_iter = 60,
                          const ShootingOptions& o = {}) {
  cplx x0 = guess, x1 = guess + 1e-4 * std::max(1.0, std::abs(guess));
  cplx f0 = oracle_shooting(p, ell, x0, o), f1 = oracle_shooting(p, ell, x1, o);
  for (int k = 0; k < max_iter; ++k) {
    if (f1 == f0) break;
    const cplx x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
    x0 = x1;
    f0 = f1;
    x1 = x2;
    if (std::abs(x1 - x0) < tol * std::max(1.0, std::abs(x1))) break;
    f1 = oracle_shooting(p, ell, x1, o);
  }
  if (!std::isfinite(std::abs(x1))) raise(ErrorCode::NoRoot, "shooting_zero: diverged");
  return x1;
}

// ---------------------------------------------------------------------------
// Cutoff-resolvent correspondence for de Sitter-Schwarzschild:
//   -e^{i sigma h} R_g(sigma) e^{-i sigma h} f = R(sigma) f   on K_delta.
// R comes from the global pencil; R_g from the static operator
//   P_g w = (mu~ w')' + sigma^2 r^4/mu~ w - l(l+1) w
// collocated on K_delta = [r_- + delta, r_+ - delta] with outgoing Robin
// conditions from the smooth solutions at r_-+.

struct CorrespondenceReport {
  double discrepancy = 0.0;  // max |u_global - u_static| on the static nodes
  double max_abs = 0.0;      // max |u_static|
  double k_lo = 0.0, k_hi = 0.0;
};

template <class F>
CorrespondenceReport cutoff_correspondence_check(const SpacetimeParams& p, int ell, int N, cplx s, F&& f,
                                                 double f_lo, double f_hi, double k_delta_frac = 0.1,
                                                 const AbsorbingSpec* spec_in = nullptr) {
  const auto m = dss_model(p);
  const AbsorbingSpec spec = spec_in ? *spec_in : absorbing_spec_for(m.p);
  CorrespondenceReport rep;
  const double dK = k_delta_frac * m.width();
  rep.k_lo = m.r_minus + dK;
  rep.k_hi = m.r_plus - dK;

  // global pencil with element breaks at the source support
  OperatorOptions oo;
  const auto probe = build_operator(m.p, ell, 16, spec);
  for (double b : {f_lo, f_hi})
    if (b > probe.physical_lo() && b < probe.physical_hi()) oo.breaks.push_back(b);
  const auto op = build_operator(m.p, ell, N, spec, oo);
  const CVec u = resolvent_apply(op, s, sample_source(op, f));

  // h on K_delta up to a constant, h' = -H
  auto h = [&](double r) {
    return -boost::math::quadrature::gauss_kronrod<double, 31>::integrate([&](double t) { return m.H(t); }, rep.k_lo,
                                                                          r, 8, 1e-14);
  };
  // static elements on K_delta with the same breaks
  std::vector<double> br = {rep.k_lo};
  for (double b : {f_lo, f_hi})
    if (b > rep.k_lo && b < rep.k_hi) br.push_back(b);
  br.push_back(rep.k_hi);
  std::vector<RadialElement> els;
  Eigen::Index total = 0;
  for (std::size_t i = 0; i + 1 < br.size(); ++i) {
    els.push_back(detail::make_element(br[i], br[i + 1], N, ElementKind::Physical, -1));
    els.back().offset = total;
    total += N;
  }
  CMat L = CMat::Zero(total, total);
  CVec g = CVec::Zero(total);
  std::vector<double> hv(static_cast<std::size_t>(total));
  for (const auto& e : els) {
    const Mat D2 = e.D * e.D;
    for (int i = 0; i < e.n; ++i) {
      const double r = e.x[i], mu = m.mu(r);
      const Eigen::Index row = e.offset + i;
      L.block(row, e.offset, 1, e.n) = -(mu * D2.row(i) + m.dmu(r) * e.D.row(i)).cast<cplx>();
      L(row, row) -= s * s * std::pow(r, 4) / mu - ell * (ell + 1.0);
      hv[row] = h(r);
      g[row] = std::exp(-I * s * hv[row]) * f(r);
    }
  }
  for (std::size_t k = 0; k + 1 < els.size(); ++k) {
    const auto& l = els[k];
    const auto& r = els[k + 1];
    const Eigen::Index rv = l.offset + l.n - 1, rd = r.offset;
    L.row(rv).setZero();
    L.row(rd).setZero();
    g[rv] = g[rd] = 0.0;
    L(rv, rv) = 1.0;
    L(rv, r.offset) = -1.0;
    L.block(rd, l.offset, 1, l.n) = l.D.row(l.n - 1).cast<cplx>();
    L.block(rd, r.offset, 1, r.n) -= r.D.row(0).cast<cplx>();
  }
  // Robin rows: w = e^{-i sigma h} phi, w'/w = phi'/phi + i sigma H
  const ShootingOptions so;
  auto robin = [&](bool outer) {
    const auto e = detail::dss_end(m, ell, s, outer, so.terms);
    const double x = outer ? rep.k_hi : rep.k_lo;
    const auto v = frobenius(e.a, e.b, e.c, x - e.x0);
    return v.dy / v.y + I * s * m.H(x);
  };
  {
    const auto& e = els.front();
    L.row(0).setZero();
    L.block(0, 0, 1, e.n) = e.D.row(0).cast<cplx>();
    L(0, 0) -= robin(false);
    g[0] = 0.0;
    const auto& l = els.back();
    const Eigen::Index last = total - 1;
    L.row(last).setZero();
    L.block(last, l.offset, 1, l.n) = l.D.row(l.n - 1).cast<cplx>();
    L(last, last) -= robin(true);
    g[last] = 0.0;
  }
  const CVec w = solve_pencil(L, g);
  for (const auto& e : els)
    for (int i = 0; i < e.n; ++i) {
      const Eigen::Index row = e.offset + i;
      const cplx us = std::exp(I * s * hv[row]) * w[row];
      rep.max_abs = std::max(rep.max_abs, std::abs(us));
      rep.discrepancy = std::max(rep.discrepancy, std::abs(us - op.evaluate(u, e.x[i])));
    }
  return rep;
}

}  // namespace kds

#pragma once
// Bicharacteristic flow on the fiber-compactified cotangent bundle and the
// numerical checks built on it: radial sources/sinks at the horizons, the
// trapped set and its linearization, escape-function conditions.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/numeric/odeint.hpp>

#include "kds/core.hpp"
#include "kds/numerics.hpp"
#include "kds/spacetime.hpp"
#include "kds/symbols.hpp"

namespace kds {

enum class SymbolId { KerrDeSitter, DeSitter };

inline SymbolId symbol_for(const SpacetimeParams& p) {
  return p.model == Model::DeSitter ? SymbolId::DeSitter : SymbolId::KerrDeSitter;
}

// A symbol with fixed real spectral parameter z together with its base domain.
struct FlowSystem {
  SymbolId id = SymbolId::KerrDeSitter;
  SpacetimeParams params;
  CProfile c = zero_c();
  double z = 0.0;
  int horizon_sign = 1;
  double base_lo = 0.0;  // r (or mu in the de Sitter chart)
  double base_hi = 0.0;

  SymbolGrad grad(const PhasePoint& pt, double zz) const {
    return id == SymbolId::DeSitter ? ds_symbol_grad(pt, zz) : kds_symbol_grad(params, c(pt.r), pt, zz, horizon_sign);
  }
  double value(const PhasePoint& pt) const { return grad(pt, z).value; }
  // conserved angular quantity: Carter-type ptilde for Kerr-de Sitter, |eta|^2 for de Sitter
  double ptilde(const PhasePoint& pt, double zz) const {
    if (id == SymbolId::DeSitter) {
      const double st = std::sin(pt.theta);
      return pt.eta * pt.eta + pt.zeta * pt.zeta / (st * st);
    }
    return kds_p_tilde<double>(params, pt, zz);
  }
  PhaseVector affine_field(const PhasePoint& pt) const { return hamilton_from_grad(grad(pt, z)); }
  PhaseVector compact_field(const CompactPhasePoint& cp) const {
    const PhasePoint hat{cp.r, cp.theta, cp.phi, double(cp.sign_xi), cp.eta_hat, cp.zeta_hat};
    return compact_from_grad(grad(hat, z * cp.nu), cp);
  }
};

// Default flow system for a model: classical or semiclassical symbol with c = 0
// on the domain [r_- - delta, r_+ + delta] (de Sitter: mu chart, r in (0, 1+delta)).
inline FlowSystem make_flow_system(const SpacetimeParams& p, double z = 0.0, int horizon_sign = 1,
                                   double delta_frac = 0.1) {
  FlowSystem s;
  s.id = symbol_for(p);
  s.params = p;
  s.z = z;
  s.horizon_sign = horizon_sign;
  const auto h = horizon_roots(p);
  if (s.id == SymbolId::DeSitter) {
    require(std::abs(p.lambda - 3.0) < 1e-14, "de Sitter flow uses the Lambda = 3 normalization");
    const double rmax = 1.0 + delta_frac;
    s.base_lo = 1.0 - rmax * rmax;
    s.base_hi = 1.0 - 1e-4;
  } else {
    const auto d = radial_domain(p, h, delta_frac);
    s.base_lo = d.r_lo;
    s.base_hi = d.r_hi;
  }
  return s;
}

enum class Chart { Affine = 0, Compact = 1 };

struct FlowState {
  Chart chart = Chart::Compact;
  PhaseVector y{};  // (r,theta,phi,xi,eta,zeta) or (r,theta,phi,nu,eta_hat,zeta_hat)
  int sign_xi = 1;  // used in the compact chart

  static FlowState from(const CompactPhasePoint& c) {
    return {Chart::Compact, {c.r, c.theta, c.phi, c.nu, c.eta_hat, c.zeta_hat}, c.sign_xi};
  }
  static FlowState from(const PhasePoint& p) {
    return {Chart::Affine, {p.r, p.theta, p.phi, p.xi, p.eta, p.zeta}, p.xi >= 0 ? 1 : -1};
  }
  CompactPhasePoint compact() const {
    if (chart == Chart::Compact) return {y[0], y[1], y[2], y[3], y[4], y[5], sign_xi};
    return to_compact(affine());
  }
  PhasePoint affine() const {
    if (chart == Chart::Affine) return {y[0], y[1], y[2], y[3], y[4], y[5]};
    return from_compact(compact());
  }
  double nu() const { return chart == Chart::Compact ? y[3] : 1.0 / std::abs(y[3]); }
};

struct FlowSample {
  double t = 0.0;
  FlowState state;
  double p = 0.0, zeta = 0.0, ptilde = 0.0;   // affine values (infinite at nu = 0)
  double p_hat = 0.0, ptilde_hat = 0.0;       // nu^2-rescaled values
  double xi_weight = 1.0;                     // <xi> = sqrt(1 + xi^2)
};

struct IntegratorStats {
  std::size_t steps = 0;
  std::size_t rejected = 0;
  double tolerance = 0.0;
  int chart_switches = 0;
};

enum class FlowStatus { Completed, DomainExit, PolarSingularity };

struct Bicharacteristic {
  std::vector<FlowSample> samples;
  IntegratorStats stats;
  FlowStatus status = FlowStatus::Completed;

  // |q(t) - q(0)| / max(1, |q(0)|, <xi(t)>^m) with m = 2 for p, ptilde and m = 1 for zeta
  double max_drift_p() const { return drift([](const FlowSample& s) { return s.p; }, 2); }
  double max_drift_zeta() const { return drift([](const FlowSample& s) { return s.zeta; }, 1); }
  double max_drift_ptilde() const { return drift([](const FlowSample& s) { return s.ptilde; }, 2); }

 private:
  template <class F>
  double drift(F get, int m) const {
    double worst = 0.0;
    if (samples.empty()) return 0.0;
    const double q0 = get(samples.front());
    for (const auto& s : samples) {
      const double q = get(s);
      if (!std::isfinite(q)) continue;
      const double scale = std::max({1.0, std::abs(q0), std::pow(s.xi_weight, m)});
      worst = std::max(worst, std::abs(q - q0) / scale);
    }
    return worst;
  }
};

namespace detail {

using State6 = std::array<double, 6>;
using Dopri = boost::numeric::odeint::runge_kutta_dopri5<State6>;
using BaseChecker = boost::numeric::odeint::default_error_checker<double, Dopri::algebra_type, Dopri::operations_type>;

// Error checker that counts rejected trial steps.
class CountingChecker : public BaseChecker {
 public:
  CountingChecker(double eps_abs, double eps_rel, std::shared_ptr<std::size_t> counter)
      : BaseChecker(eps_abs, eps_rel, 1.0, 1.0), counter_(std::move(counter)) {}

  template <class State, class Deriv, class Err, class Time>
  double error(const State& x, const Deriv& dx, Err& xe, Time dt) const {
    return count(BaseChecker::error(x, dx, xe, dt));
  }
  template <class State, class Deriv, class Err, class Time>
  double error(Dopri::algebra_type& a, const State& x, const Deriv& dx, Err& xe, Time dt) const {
    return count(BaseChecker::error(a, x, dx, xe, dt));
  }

 private:
  double count(double e) const {
    if (e > 1.0) ++*counter_;
    return e;
  }
  std::shared_ptr<std::size_t> counter_;
};

using Controlled = boost::numeric::odeint::controlled_runge_kutta<Dopri, CountingChecker>;
using Dense = boost::numeric::odeint::dense_output_runge_kutta<Controlled>;

}  // namespace detail

inline FlowSample make_sample(const FlowSystem& sys, double t, const FlowState& st) {
  FlowSample s;
  s.t = t;
  s.state = st;
  const auto cp = st.chart == Chart::Compact ? st.compact() : CompactPhasePoint{};
  if (st.chart == Chart::Compact) {
    const PhasePoint hat{cp.r, cp.theta, cp.phi, double(cp.sign_xi), cp.eta_hat, cp.zeta_hat};
    const double nu = cp.nu;
    s.p_hat = sys.grad(hat, sys.z * nu).value;
    s.ptilde_hat = sys.ptilde(hat, sys.z * nu);
    if (nu > 0.0) {
      s.p = s.p_hat / (nu * nu);
      s.ptilde = s.ptilde_hat / (nu * nu);
      s.zeta = cp.zeta_hat / nu;
      s.xi_weight = std::sqrt(1.0 + 1.0 / (nu * nu));
    } else {
      s.p = s.ptilde = s.zeta = std::numeric_limits<double>::infinity();
      s.xi_weight = std::numeric_limits<double>::infinity();
    }
  } else {
    const auto pt = st.affine();
    s.p = sys.value(pt);
    s.ptilde = sys.ptilde(pt, sys.z);
    s.zeta = pt.zeta;
    s.xi_weight = std::sqrt(1.0 + pt.xi * pt.xi);
    const double nu2 = pt.xi != 0.0 ? 1.0 / (pt.xi * pt.xi) : std::numeric_limits<double>::infinity();
    s.p_hat = s.p * nu2;
    s.ptilde_hat = s.ptilde * nu2;
  }
  return s;
}

struct FlowOptions {
  int direction = 1;       // -1 integrates -H_p
  int n_output = 201;      // uniformly spaced output samples in [0, T]
  double abs_tol = -1.0;   // defaults to tol * 1e-6
  std::size_t max_steps = 2000000;
};

// Integrate the rescaled field (1+xi^2)^{-1/2} H_p, which equals
// (1+nu^2)^{-1/2} nu H_p in the compact chart. The compact chart is used while
// nu < 1 and the affine chart while |xi| < 2.
inline Bicharacteristic integrate_flow(const FlowSystem& sys, FlowState start, double T, double tol,
                                       const FlowOptions& opt = {}) {
  require(tol >= 1e-12 && tol <= 1e-4, "integrate_flow: tol must lie in [1e-12, 1e-4]");
  require(T > 0.0 && opt.n_output >= 2, "integrate_flow: need T > 0 and at least two samples");
  namespace ode = boost::numeric::odeint;
  Bicharacteristic out;
  out.stats.tolerance = tol;
  auto rejected = std::make_shared<std::size_t>(0);
  // local error control is kept 100x tighter than tol so the accumulated drift
  // of the conserved quantities stays within 10 tol over long runs
  const double rel_tol = 1e-2 * tol;
  const double abs_tol = opt.abs_tol > 0.0 ? opt.abs_tol : rel_tol * 1e-6;
  const double dir = opt.direction >= 0 ? 1.0 : -1.0;

  FlowState cur = start;
  auto rhs = [&](const detail::State6& y, detail::State6& dy, double) {
    PhaseVector f;
    double w;
    if (cur.chart == Chart::Compact) {
      const CompactPhasePoint cp{y[0], y[1], y[2], y[3], y[4], y[5], cur.sign_xi};
      f = sys.compact_field(cp);
      w = 1.0 / std::sqrt(1.0 + y[3] * y[3]);
    } else {
      f = sys.affine_field({y[0], y[1], y[2], y[3], y[4], y[5]});
      w = 1.0 / std::sqrt(1.0 + y[3] * y[3]);
    }
    for (int i = 0; i < 6; ++i) dy[i] = dir * w * f[i];
  };

  auto make_stepper = [&]() {
    return detail::Dense(detail::Controlled(detail::CountingChecker(abs_tol, rel_tol, rejected)));
  };
  auto stepper = make_stepper();
  double t = 0.0;
  double dt0 = std::min(1e-3, T / 10.0);
  stepper.initialize(cur.y, t, dt0);
  std::size_t next = 0;
  const double dT = T / (opt.n_output - 1);
  out.samples.push_back(make_sample(sys, 0.0, cur));
  next = 1;
  try {
    while (next < std::size_t(opt.n_output)) {
      if (out.stats.steps >= opt.max_steps) raise(ErrorCode::StepFailure, "step budget exhausted");
      const auto span = stepper.do_step(rhs);
      ++out.stats.steps;
      if (!(stepper.current_time_step() > 1e-14 * std::max(1.0, T)))
        raise(ErrorCode::StepFailure, "step size underflow");
      while (next < std::size_t(opt.n_output) && next * dT <= span.second) {
        FlowState s = cur;
        stepper.calc_state(next * dT, s.y);
        out.samples.push_back(make_sample(sys, next * dT, s));
        ++next;
      }
      t = span.second;
      FlowState now = cur;
      now.y = stepper.current_state();
      if (now.y[0] < sys.base_lo || now.y[0] > sys.base_hi) {
        out.status = FlowStatus::DomainExit;
        break;
      }
      if (now.y[1] < 1e-6 || now.y[1] > pi - 1e-6) {
        out.status = FlowStatus::PolarSingularity;
        break;
      }
      bool switched = false;
      if (now.chart == Chart::Compact && now.y[3] > 1.0) {
        const auto a = now.affine();
        cur = FlowState::from(a);
        switched = true;
      } else if (now.chart == Chart::Affine && std::abs(now.y[3]) > 2.0) {
        cur = FlowState::from(to_compact(now.affine()));
        switched = true;
      }
      if (switched) {
        ++out.stats.chart_switches;
        const double dt = stepper.current_time_step();
        stepper = make_stepper();
        stepper.initialize(cur.y, t, dt);
      }
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    raise(ErrorCode::StepFailure, e.what());
  }
  out.stats.rejected = *rejected;
  return out;
}

inline Bicharacteristic integrate_flow(const FlowSystem& sys, const CompactPhasePoint& start, double T, double tol,
                                       const FlowOptions& opt = {}) {
  FlowState s = FlowState::from(start);
  if (start.nu > 1.0) s = FlowState::from(from_compact(start));
  return integrate_flow(sys, s, T, tol, opt);
}

// ---------------------------------------------------------------------------
// Radial sets

struct RadialSetReport {
  int horizon_sign = 1;
  bool sink = false;  // false means source
  double beta0_measured = 0.0;
  double beta0_expected = 0.0;
  double rho0_rate = 0.0;
  double max_rel_deviation = 0.0;
  int trajectories = 0;
  std::vector<double> rates;

  std::string kind() const { return sink ? "sink" : "source"; }
};

struct RadialOptions {
  int trajectories = 24;
  std::uint64_t seed = 12345;
  int sign_xi = 0;  // 0: -1 for Kerr-de Sitter, horizon_sign for de Sitter
  double tol = 1e-10;
  double shell_nu = 1e-3;
  double shell_angle = 1e-3;
  double shell_mu = 1e-4;
  double periods = 8.0;  // integration length in units of 1/expected rate
};

// slope of log(q) on the final half of the samples
inline double fitted_log_rate(const Bicharacteristic& b, double (*get)(const FlowSample&)) {
  std::vector<double> t, y;
  const std::size_t n = b.samples.size();
  for (std::size_t i = n / 2; i < n; ++i) {
    const double v = get(b.samples[i]);
    if (v > 0.0 && std::isfinite(v)) {
      t.push_back(b.samples[i].t);
      y.push_back(std::log(v));
    }
  }
  if (t.size() < 8) raise(ErrorCode::DegenerateFit, "too few samples for a rate fit");
  return num::fit_line(t, y).slope;
}

inline RadialSetReport classify_radial(const SpacetimeParams& p, int horizon_sign, const RadialOptions& o = {}) {
  const auto h = horizon_roots(p);
  const bool ds = symbol_for(p) == SymbolId::DeSitter;
  if (!ds && horizon_sign < 0 && !h.has_inner) raise(ErrorCode::NoHorizons, "no inner horizon");
  auto sys = make_flow_system(p, 0.0, ds ? 1 : horizon_sign);
  const int sgn = o.sign_xi != 0 ? o.sign_xi : (ds ? horizon_sign : -1);
  RadialSetReport rep;
  rep.horizon_sign = horizon_sign;
  rep.beta0_expected = ds ? 4.0 : h.surface_gravity(horizon_sign);
  const double base0 = ds ? 0.0 : h.r(horizon_sign);
  const double slope0 = ds ? -1.0 : mu_tilde(p, base0).d1;  // d mu / d(base)
  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> U(0.5, 1.5), A(pi / 3, 2 * pi / 3);
  std::bernoulli_distribution B(0.5);
  const double T = o.periods / rep.beta0_expected;
  std::vector<double> rho_rates;
  int sinks = 0;
  for (int k = 0; k < o.trajectories; ++k) {
    const double mu_target = o.shell_mu * U(rng) * (B(rng) ? 1.0 : -1.0);
    CompactPhasePoint cp;
    cp.r = base0 + mu_target / slope0;
    cp.theta = A(rng);
    cp.phi = 0.0;
    cp.nu = o.shell_nu * U(rng);
    cp.eta_hat = o.shell_angle * U(rng) * (B(rng) ? 1.0 : -1.0);
    cp.zeta_hat = o.shell_angle * U(rng) * (B(rng) ? 1.0 : -1.0);
    cp.sign_xi = sgn;
    FlowOptions fo;
    fo.abs_tol = 1e-24;
    // the direction in which the trajectory settles onto this radial set decides sink or source
    auto settles = [&](const Bicharacteristic& b) {
      const auto e = b.samples.back().state.compact();
      const double m0 = ds ? cp.r : mu_tilde(p, cp.r).value, m1 = ds ? e.r : mu_tilde(p, e.r).value;
      return b.status == FlowStatus::Completed && e.nu < 1e-2 * cp.nu && std::abs(m1) < std::abs(m0) &&
             std::abs(e.r - base0) < std::abs(cp.r - base0);
    };
    auto nu_rate = [](const Bicharacteristic& b) {
      return fitted_log_rate(b, +[](const FlowSample& s) { return s.state.nu(); });
    };
    Bicharacteristic run = integrate_flow(sys, cp, T, o.tol, fo);
    double rate;
    if (settles(run)) {
      ++sinks;
      rate = -nu_rate(run);
    } else {
      fo.direction = -1;
      run = integrate_flow(sys, cp, T, o.tol, fo);
      if (!settles(run)) raise(ErrorCode::StepFailure, "trajectory settles onto the radial set in neither direction");
      rate = -nu_rate(run);
    }
    const Bicharacteristic* used = &run;
    rep.rates.push_back(rate);
    rho_rates.push_back(-fitted_log_rate(
        *used, +[](const FlowSample& s) { return s.ptilde_hat + s.p_hat * s.p_hat; }));
  }
  rep.trajectories = o.trajectories;
  rep.sink = 2 * sinks > o.trajectories;
  double sum = 0.0;
  for (double r : rep.rates) {
    sum += r;
    rep.max_rel_deviation = std::max(rep.max_rel_deviation, std::abs(r - rep.beta0_expected) / rep.beta0_expected);
  }
  rep.beta0_measured = sum / rep.rates.size();
  double rs = 0.0;
  for (double r : rho_rates) rs += r;
  rep.rho0_rate = rs / rho_rates.size();
  return rep;
}

// ---------------------------------------------------------------------------
// Trapped set: critical points of F = mu~^{-1} W^2, W = (r^2+alpha^2) z - alpha zeta.

struct TrappedSetPoint {
  double r_c = 0.0;
  double zeta = 0.0;
  double z = 0.0;
  double xi_c = 0.0;
  double f_residual = 0.0;
  int horizon_sign = 1;
};

inline double trap_W(const SpacetimeParams& p, double r, double zeta, double z) {
  return (r * r + p.alpha * p.alpha) * z - p.alpha * zeta;
}

inline double trap_f(const SpacetimeParams& p, double r, double zeta, double z) {
  const auto m = mu_tilde(p, r);
  return trap_W(p, r, zeta, z) * m.d1 - 4.0 * r * m.value * z;
}

// F'' = d^2/dr^2 (W^2 / mu~)
inline double trap_F2(const SpacetimeParams& p, double r, double zeta, double z) {
  const auto m = mu_tilde(p, r);
  const double W = trap_W(p, r, zeta, z), dW = 2.0 * r * z, d2W = 2.0 * z;
  const double G = W * W, dG = 2.0 * W * dW, d2G = 2.0 * dW * dW + 2.0 * W * d2W;
  const double u = m.value;
  return d2G / u - 2.0 * dG * m.d1 / (u * u) + G * (2.0 * m.d1 * m.d1 / (u * u * u) - m.d2 / (u * u));
}

inline TrappedSetPoint find_trapped_set(const SpacetimeParams& p, double zeta, double z, int horizon_sign = 1,
                                        int grid = 2048) {
  require(z != 0.0, "find_trapped_set: z must be nonzero");
  const auto h = horizon_roots(p);
  if (!h.has_inner) raise(ErrorCode::NoRoot, "model has no inner horizon");
  auto f = [&](double r) { return trap_f(p, r, zeta, z); };
  const double a = h.r_minus, b = h.r_plus;
  const double eps = 1e-9 * (b - a);
  int changes = 0;
  double lo = 0.0, hi = 0.0;
  double rprev = a + eps, fprev = f(rprev);
  for (int i = 1; i <= grid; ++i) {
    const double r = a + eps + (b - a - 2 * eps) * i / grid;
    if (trap_W(p, r, zeta, z) == 0.0) raise(ErrorCode::NoRoot, "W vanishes on the bracket");
    const double fr = f(r);
    if (std::signbit(fr) != std::signbit(fprev)) {
      ++changes;
      lo = rprev;
      hi = r;
    }
    rprev = r;
    fprev = fr;
  }
  if (changes == 0) raise(ErrorCode::NoRoot, "f has no sign change in (r_-, r_+)");
  if (changes > 1) raise(ErrorCode::MultipleRoots, std::to_string(changes) + " sign changes of f");
  TrappedSetPoint t;
  t.r_c = num::bracket_root(f, lo, hi, std::numeric_limits<double>::digits - 1);
  t.zeta = zeta;
  t.z = z;
  t.horizon_sign = horizon_sign;
  const double s = horizon_sign >= 0 ? 1.0 : -1.0;
  t.xi_c = -s * (1.0 + p.gamma()) * trap_W(p, t.r_c, zeta, z) / mu_tilde(p, t.r_c).value;
  t.f_residual = std::abs(f(t.r_c));
  return t;
}

struct LinearizationSpectrum {
  std::array<cplx, 2> eigenvalues;
  Eigen::Matrix2d matrix;
  double F2 = 0.0;
  std::array<double, 2> flow_rates{};  // from the integrated flow map
  double flow_rel_deviation = 0.0;
};

// Reduced (r, xi) field with c = 0 at theta = pi/2, eta = 0 (the subsystem closes).
inline std::array<double, 2> trap_reduced_field(const SpacetimeParams& p, double r, double xi, double zeta, double z,
                                                int horizon_sign) {
  const double s = horizon_sign >= 0 ? 1.0 : -1.0, g1 = 1.0 + p.gamma();
  const auto m = mu_tilde(p, r);
  const double W = trap_W(p, r, zeta, z), dW = 2.0 * r * z;
  return {-2.0 * m.value * xi - 2.0 * s * g1 * W, m.d1 * xi * xi + 2.0 * s * g1 * dW * xi};
}

inline LinearizationSpectrum trapping_linearization(const SpacetimeParams& p, const TrappedSetPoint& t,
                                                    bool cross_validate = true) {
  const double g1 = 1.0 + p.gamma();
  const double mt = mu_tilde(p, t.r_c).value;
  LinearizationSpectrum L;
  L.F2 = trap_F2(p, t.r_c, t.zeta, t.z);
  if (!(L.F2 > 0.0)) raise(ErrorCode::DegenerateLinearization, "F'' <= 0 at the trapped set");
  L.matrix << 0.0, -mt * g1 * g1 * L.F2, -2.0, 0.0;
  Eigen::EigenSolver<Eigen::Matrix2d> es(L.matrix);
  L.eigenvalues = {es.eigenvalues()[0], es.eigenvalues()[1]};
  if (std::real(L.eigenvalues[0]) < std::real(L.eigenvalues[1])) std::swap(L.eigenvalues[0], L.eigenvalues[1]);
  if (!cross_validate) return L;
  // Jacobian of the time-t flow map of the reduced system, by central differences
  const double lam = std::abs(std::real(L.eigenvalues[0]));
  const double tf = 0.05 / std::max(lam, 1e-12);
  auto flow = [&](double r, double xi) {
    std::array<double, 2> y{r, xi};
    namespace ode = boost::numeric::odeint;
    auto sys = [&](const std::array<double, 2>& x, std::array<double, 2>& dx, double) {
      dx = trap_reduced_field(p, x[0], x[1], t.zeta, t.z, t.horizon_sign);
    };
    ode::integrate_adaptive(ode::make_controlled<ode::runge_kutta_dopri5<std::array<double, 2>>>(1e-13, 1e-13), sys,
                            y, 0.0, tf, tf / 100);
    return y;
  };
  const double hr = 1e-6 * std::max(1.0, t.r_c), hx = 1e-6 * std::max(1.0, std::abs(t.xi_c));
  Eigen::Matrix2d J;
  const auto rp = flow(t.r_c + hr, t.xi_c), rm = flow(t.r_c - hr, t.xi_c);
  const auto xp = flow(t.r_c, t.xi_c + hx), xm = flow(t.r_c, t.xi_c - hx);
  J << (rp[0] - rm[0]) / (2 * hr), (xp[0] - xm[0]) / (2 * hx), (rp[1] - rm[1]) / (2 * hr), (xp[1] - xm[1]) / (2 * hx);
  Eigen::EigenSolver<Eigen::Matrix2d> ej(J);
  for (int i = 0; i < 2; ++i) L.flow_rates[i] = std::log(std::abs(ej.eigenvalues()[i])) / tf;
  if (L.flow_rates[0] < L.flow_rates[1]) std::swap(L.flow_rates[0], L.flow_rates[1]);
  L.flow_rel_deviation = std::max(std::abs(L.flow_rates[0] - lam), std::abs(L.flow_rates[1] + lam)) / lam;
  return L;
}

// ---------------------------------------------------------------------------
// Escape-function scans

struct EscapeReport {
  std::size_t points = 0;          // characteristic-set points examined
  std::size_t stationary = 0;      // points with H r = 0 (or H mu = 0)
  std::size_t violations = 0;
  double min_abs_Hr_nonpositive = std::numeric_limits<double>::infinity();  // over mu~ <= 0 (relative)
  double worst_margin = std::numeric_limits<double>::infinity();            // min of signed second derivative
  std::string note;

  bool ok() const { return violations == 0; }
};

struct EscapeGrid {
  int nr = 50;
  int ntheta = 50;
  int nratio = 20;  // zeta / z samples
  int nxi = 41;     // xi samples in mu~ <= 0
  std::vector<double> z_values{1.0, -1.0};
  double ratio_max = 1.0;  // |zeta / z| range relative to (r_+^2 + alpha^2)
};

// Kerr-de Sitter family with c = 0 and real z.
inline EscapeReport escape_scan_kds(const SpacetimeParams& p, const EscapeGrid& g = {}, int horizon_sign = 1) {
  const auto h = horizon_roots(p);
  require(h.has_inner, "escape_scan_kds: needs two horizons");
  const auto dom = radial_domain(p, h);
  const double s = horizon_sign >= 0 ? 1.0 : -1.0, g1 = 1.0 + p.gamma();
  const double exclusion = 1e-2 * (h.r_plus - h.r_minus);
  EscapeReport rep;
  for (double z : g.z_values) {
    for (int k = 0; k < g.nratio; ++k) {
      const double zeta = z * g.ratio_max * (h.r_plus * h.r_plus + p.alpha * p.alpha) * (2.0 * (k + 0.5) / g.nratio - 1.0);
      double rc = std::numeric_limits<double>::quiet_NaN();
      try {
        rc = find_trapped_set(p, zeta, z, horizon_sign).r_c;
      } catch (const Error&) {
      }
      for (int it = 0; it < g.ntheta; ++it) {
        const double th = 0.05 + (pi - 0.1) * (it + 0.5) / g.ntheta;
        const auto ang = angular(p, th);
        const double w = zeta - p.alpha * ang.s2 * z;
        for (int ir = 0; ir < g.nr; ++ir) {
          const double r = dom.r_lo + (dom.r_hi - dom.r_lo) * (ir + 0.5) / g.nr;
          const auto m = mu_tilde(p, r);
          const double W = trap_W(p, r, zeta, z);
          if (m.value > 0.0) {
            // H r = 0 fixes xi; eta from p = 0
            const double xi = -s * g1 * W / m.value;
            const double eta2 = (g1 * g1 * W * W / m.value - ang.K * w * w) / ang.kappa;
            if (eta2 < 0.0) continue;
            ++rep.points;
            ++rep.stationary;
            if (std::isnan(rc) || std::abs(r - rc) <= exclusion) continue;
            const double xidot = m.d1 * xi * xi + 2.0 * s * g1 * (2.0 * r * z) * xi;
            const double H2r = -2.0 * m.value * xidot;
            const double margin = H2r * (r > rc ? 1.0 : -1.0);
            rep.worst_margin = std::min(rep.worst_margin, margin / (1.0 + std::abs(H2r)));
            if (!(margin > 0.0)) ++rep.violations;
          } else {
            // mu~ <= 0: on the characteristic set H r must not vanish
            for (int ix = 0; ix < g.nxi; ++ix) {
              const double xi = 10.0 * (2.0 * ix / (g.nxi - 1.0) - 1.0);
              const PhasePoint base{r, th, 0.0, xi, 0.0, zeta};
              const double rest = kds_symbol<double>(p, {0.0, 0.0}, base, z, horizon_sign);  // eta = 0
              const double eta2 = rest / ang.kappa;
              if (eta2 < 0.0) continue;
              ++rep.points;
              const double Hr = -2.0 * (m.value * xi + s * g1 * W);
              const double scale = (r * r + p.alpha * p.alpha * std::cos(th) * std::cos(th)) * std::abs(z);
              rep.min_abs_Hr_nonpositive = std::min(rep.min_abs_Hr_nonpositive, std::abs(Hr) / scale);
              if (Hr == 0.0) ++rep.violations;
            }
          }
        }
      }
    }
  }
  return rep;
}

// de Sitter mu chart: H mu = 0, p = 0, 0 < mu < 1 implies H^2 mu < 0.
inline EscapeReport escape_scan_ds(const std::vector<double>& z_values = {1.0, -1.0, 0.5, 2.0}, int nmu = 400) {
  EscapeReport rep;
  for (double z : z_values) {
    for (int i = 0; i < nmu; ++i) {
      const double mu = (i + 0.5) / nmu;
      const double r2 = 1.0 - mu;
      const double xi = z / (2.0 * mu);
      const double eta2 = r2 * (r2 * z * z / mu + z * z);
      ++rep.points;
      ++rep.stationary;
      const double dmu_p = -4.0 * (1.0 - 2.0 * mu) * xi * xi - 4.0 * z * xi - eta2 / (r2 * r2);
      const double H2mu = 8.0 * r2 * mu * dmu_p;
      rep.worst_margin = std::min(rep.worst_margin, -H2mu);
      if (!(H2mu < 0.0)) ++rep.violations;
    }
  }
  return rep;
}

// de Sitter Y chart: H(Y.zeta) = -2|zeta|^2; returns the largest value of
// H(Y.zeta) on characteristic-set points with |zeta| >= zeta_min, |Y| <= y_max.
inline double ds_y_escape_sup(std::uint64_t seed, int samples, double z, double zeta_min = 0.1, double y_max = 0.9,
                              double* identity_residual = nullptr) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  double sup = -std::numeric_limits<double>::infinity(), resid = 0.0;
  int got = 0, attempts = 0;
  while (got < samples && attempts < 100 * samples) {
    ++attempts;
    Eigen::Vector3d Y(N(rng), N(rng), N(rng));
    Y *= y_max * std::cbrt(U(rng)) / Y.norm();
    Eigen::Vector3d dir(N(rng), N(rng), N(rng));
    dir.normalize();
    // choose |zeta| = t so that p = (t Y.dir - z)^2 - t^2 = 0
    const double a = Y.dot(dir);
    const double A = a * a - 1.0, B = -2.0 * z * a, C = z * z;
    const double disc = B * B - 4 * A * C;
    if (disc < 0.0) continue;
    for (double t : {(-B + std::sqrt(disc)) / (2 * A), (-B - std::sqrt(disc)) / (2 * A)}) {
      if (!(t >= zeta_min)) continue;
      const YPoint q{Y, t * dir};
      const auto d = ds_hamilton_y(q, z);
      const double HYz = d.Y.dot(q.zeta) + q.Y.dot(d.zeta);
      resid = std::max(resid, std::abs(HYz + 2.0 * q.zeta.squaredNorm()));
      sup = std::max(sup, HYz);
      ++got;
    }
  }
  if (identity_residual) *identity_residual = resid;
  return sup;
}

// ---------------------------------------------------------------------------
// Mild trapping: H F = 0 implies H^2 F < 0 on the annulus 1 < F < 2 of the
// characteristic set.

struct MildTrapSpec {
  std::function<double(const PhasePoint&)> F;
  double lo = 1.0;
  double hi = 2.0;
};

struct MildTrapReport {
  bool ok = true;
  std::size_t zeros = 0;
  std::size_t violations = 0;
  double worst = -std::numeric_limits<double>::infinity();  // max of H^2 F at zeros
  PhasePoint worst_point;
};

// F = 2 - (Ft - e1)/(e2 - e1) with Ft = ((r - r_c)/a)^2 + (Xi/b)^2 and
// Xi = mu~ xi +- (1+gamma) W, which is >= 2 near the trapped set and <= 1 away.
inline MildTrapSpec default_trap_function(const SpacetimeParams& p, double z, int horizon_sign = 1, double e1 = 0.25,
                                          double e2 = 1.0, double a = 0.02, double b = 0.02) {
  const double s = horizon_sign >= 0 ? 1.0 : -1.0, g1 = 1.0 + p.gamma();
  MildTrapSpec spec;
  spec.F = [=](const PhasePoint& q) {
    const double rc = find_trapped_set(p, q.zeta, z, horizon_sign).r_c;
    const double Xi = mu_tilde(p, q.r).value * q.xi + s * g1 * trap_W(p, q.r, q.zeta, z);
    const double Ft = sqr((q.r - rc) / a) + sqr(Xi / b);
    return 2.0 - (Ft - e1) / (e2 - e1);
  };
  return spec;
}

struct MildTrapGrid {
  int nr = 40;
  int nxi = 200;
  std::vector<double> thetas{pi / 2, pi / 3};
  std::vector<double> zeta_ratios{0.0, 0.05};  // zeta / z
  double r_halfwidth = 0.05;                   // relative to r_+ - r_-
};

inline MildTrapReport mild_trap_function_check(const MildTrapSpec& spec, const SpacetimeParams& p, double z,
                                               const MildTrapGrid& g = {}, int horizon_sign = 1) {
  const auto h = horizon_roots(p);
  const auto c0 = zero_c();
  MildTrapReport rep;
  auto field = [&](const PhasePoint& q) { return kds_hamilton(p, c0, q, z, horizon_sign); };
  auto shift = [](const PhasePoint& q, const PhaseVector& v, double e) {
    return PhasePoint{q.r + e * v[0], q.theta + e * v[1], q.phi + e * v[2],
                      q.xi + e * v[3], q.eta + e * v[4], q.zeta + e * v[5]};
  };
  auto HF = [&](const PhasePoint& q) {
    const auto v = field(q);
    return num::richardson_derivative([&](double e) { return spec.F(shift(q, v, e)); }, 0.0, 1e-4);
  };
  auto H2F = [&](const PhasePoint& q) {
    const auto v = field(q);
    return num::richardson_derivative([&](double e) { return HF(shift(q, v, e)); }, 0.0, 1e-4);
  };
  const double s = horizon_sign >= 0 ? 1.0 : -1.0, g1 = 1.0 + p.gamma();
  const double width = g.r_halfwidth * (h.r_plus - h.r_minus);
  for (double ratio : g.zeta_ratios) {
    const double zeta = ratio * z;
    double rc;
    try {
      rc = find_trapped_set(p, zeta, z, horizon_sign).r_c;
    } catch (const Error&) {
      continue;
    }
    for (double th : g.thetas) {
      const auto ang = angular(p, th);
      for (int ir = 0; ir < g.nr; ++ir) {
        const double r = rc - width + 2.0 * width * (ir + 0.5) / g.nr;
        const double mt = mu_tilde(p, r).value;
        if (mt <= 0.0) continue;
        const double xic = -s * g1 * trap_W(p, r, zeta, z) / mt;
        // points on the characteristic set along a xi line, eta >= 0 branch
        auto point = [&](double xi, bool& valid) {
          const PhasePoint base{r, th, 0.0, xi, 0.0, zeta};
          const double e2 = kds_symbol<double>(p, {0.0, 0.0}, base, z, horizon_sign) / ang.kappa;
          valid = e2 >= 0.0;
          return PhasePoint{r, th, 0.0, xi, std::sqrt(std::max(e2, 0.0)), zeta};
        };
        const double span = 4.0 * std::abs(xic) + 1.0;
        double xprev = xic - span, fprev = 0.0;
        bool vprev = false;
        for (int ix = 0; ix <= g.nxi; ++ix) {
          const double xi = xic - span + 2.0 * span * ix / g.nxi;
          bool valid;
          const auto q = point(xi, valid);
          const double Fv = valid ? spec.F(q) : 0.0;
          const bool in = valid && Fv > spec.lo && Fv < spec.hi;
          const double hf = in ? HF(q) : 0.0;
          if (in && vprev && std::signbit(hf) != std::signbit(fprev)) {
            // refine the zero of H F along the line
            double a = xprev, b = xi;
            for (int k = 0; k < 60; ++k) {
              const double m = 0.5 * (a + b);
              bool vm;
              const double hm = HF(point(m, vm));
              if (std::signbit(hm) == std::signbit(fprev)) a = m; else b = m;
            }
            bool vz;
            const auto qz = point(0.5 * (a + b), vz);
            const double Fz = spec.F(qz);
            if (vz && Fz > spec.lo && Fz < spec.hi) {
              ++rep.zeros;
              const double h2 = H2F(qz);
              if (h2 > rep.worst) rep.worst = h2, rep.worst_point = qz;
              if (!(h2 < 0.0)) ++rep.violations;
            }
          }
          xprev = xi;
          fprev = hf;
          vprev = in;
        }
      }
    }
  }
  rep.ok = rep.violations == 0;
  return rep;
}

// ---------------------------------------------------------------------------
// Characteristic-set samples of the classical symbol: mu~ <= alpha^2 must hold.

struct ErgoregionSampleReport {
  std::size_t samples = 0;
  double max_excess = -std::numeric_limits<double>::infinity();  // max of mu~ - alpha^2
};

inline ErgoregionSampleReport ergoregion_samples(const SpacetimeParams& p, std::size_t n, std::uint64_t seed,
                                                 int horizon_sign = 1) {
  const auto h = horizon_roots(p);
  const auto dom = radial_domain(p, h);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> R(dom.r_lo, dom.r_hi), Th(0.05, pi - 0.05), X(-1.0, 1.0);
  const double s = horizon_sign >= 0 ? 1.0 : -1.0;
  const double a = (1.0 + p.gamma()) * p.alpha;
  ErgoregionSampleReport rep;
  std::size_t attempts = 0;
  while (rep.samples < n && attempts < 1000 * n) {
    ++attempts;
    const double r = R(rng), th = Th(rng);
    double xi = X(rng);
    if (xi == 0.0) continue;
    const double zeta = 3.0 * X(rng);
    const auto ang = angular(p, th);
    const double mt = mu_tilde(p, r).value;
    // eta^2 from p = -mu~ xi^2 +- 2 a xi zeta - kappa eta^2 - K zeta^2 = 0
    const double eta2 = (-mt * xi * xi + 2.0 * s * a * xi * zeta - ang.K * zeta * zeta) / ang.kappa;
    if (eta2 < 0.0) continue;
    ++rep.samples;
    rep.max_excess = std::max(rep.max_excess, mt - p.alpha * p.alpha);
  }
  return rep;
}

}  // namespace kds

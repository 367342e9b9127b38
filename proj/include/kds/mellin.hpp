#pragma once
// Mellin transform in tau on a log-uniform grid, its inverse along
// horizontal contours, resonance expansions by contour shifting, decay fits
// and the Fredholm threshold of the radial-point estimates.
//
// Conventions: v(sigma) = int tau^{-i sigma} u(tau) dtau/tau and
// u(tau) = (2 pi)^{-1} int_{Im sigma = -alpha} tau^{i sigma} v(sigma) dsigma.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "kds/core.hpp"
#include "kds/resonances.hpp"
#include "kds/spacetime.hpp"

namespace kds {

// Samples u(tau_k) on a strictly decreasing log-uniform grid; one column per
// spatial component.
struct TemporalSamples {
  std::vector<double> tau;
  CMat values;

  Eigen::Index size() const { return static_cast<Eigen::Index>(tau.size()); }
  double log_step() const { return std::log(tau[0] / tau[1]); }
};

inline std::vector<double> log_grid(double tau_min = 1e-6, double tau_max = 1.0, int n = 1 << 10) {
  require(tau_min > 0.0 && tau_max > tau_min && n >= 8, "log_grid: need 0 < tau_min < tau_max and n >= 8");
  std::vector<double> t(static_cast<std::size_t>(n));
  const double a = std::log(tau_max), b = std::log(tau_min);
  for (int k = 0; k < n; ++k) t[k] = std::exp(a + (b - a) * k / (n - 1));
  return t;
}

inline void validate(const TemporalSamples& u) {
  require(u.tau.size() >= 8, "TemporalSamples: need at least 8 samples");
  require(u.values.rows() == u.size(), "TemporalSamples: value rows must match the grid");
  const double h = u.log_step();
  for (std::size_t k = 0; k + 1 < u.tau.size(); ++k) {
    require(u.tau[k + 1] > 0.0 && u.tau[k + 1] < u.tau[k], "TemporalSamples: grid must be positive and decreasing");
    require(std::abs(std::log(u.tau[k] / u.tau[k + 1]) - h) <= 1e-12 * std::max(1.0, h),
            "TemporalSamples: grid is not log-uniform");
  }
}

template <class F>
TemporalSamples sample_temporal(const std::vector<double>& tau, F&& f) {
  TemporalSamples u;
  u.tau = tau;
  u.values.resize(static_cast<Eigen::Index>(tau.size()), 1);
  for (std::size_t k = 0; k < tau.size(); ++k) u.values(static_cast<Eigen::Index>(k), 0) = f(tau[k]);
  return u;
}

// Horizontal contour Im sigma = -alpha sampled at uniform Re sigma.
struct Contour {
  double alpha = 0.0;
  std::vector<double> xi;

  cplx sigma(std::size_t k) const { return cplx(xi[k], -alpha); }
  std::size_t size() const { return xi.size(); }
};

inline Contour make_contour(double alpha, double xi_max = 20.0, int n = 801) {
  require(xi_max > 0.0 && n >= 8, "make_contour: need xi_max > 0 and n >= 8");
  Contour c;
  c.alpha = alpha;
  c.xi.resize(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) c.xi[k] = -xi_max + 2.0 * xi_max * k / (n - 1);
  return c;
}

// Values on a contour: one row per contour point, one column per component.
struct ContourSamples {
  Contour contour;
  CMat values;
};

namespace detail {

// Composite trapezoid weights with symmetric end corrections exact for
// polynomials of degree < m (Gregory-type), unit spacing.
inline Vec corrected_trapezoid(std::size_t n, int m = 8) {
  Vec w = Vec::Ones(static_cast<Eigen::Index>(n));
  if (n < static_cast<std::size_t>(3 * m + 2)) {
    w[0] = w[n - 1] = 0.5;
    return w;
  }
  // the corrections are local to each end; a symmetric rule on one length
  // only sees even moments, so fit on two lengths at once
  Mat A(2 * m, m);
  Vec r(2 * m);
  for (int len = 0; len < 2; ++len) {
    const int n0 = 3 * m + len;
    for (int p = 0; p < m; ++p) {
      double s = 0.0;
      for (int j = 0; j < n0; ++j) s += std::pow(double(j), p);
      r[len * m + p] = std::pow(double(n0 - 1), p + 1) / (p + 1) - s;
      for (int j = 0; j < m; ++j) A(len * m + p, j) = std::pow(double(j), p) + std::pow(double(n0 - 1 - j), p);
    }
  }
  const Vec c = A.colPivHouseholderQr().solve(r);
  for (int j = 0; j < m; ++j) {
    w[j] += c[j];
    w[n - 1 - j] += c[j];
  }
  return w;
}

inline double tail_ratio(const CMat& weighted) {
  const double peak = weighted.cwiseAbs().maxCoeff();
  if (peak == 0.0) return 0.0;
  const Eigen::Index n = weighted.rows();
  return std::max(weighted.row(0).cwiseAbs().maxCoeff(), weighted.row(n - 1).cwiseAbs().maxCoeff()) / peak;
}

}  // namespace detail

// Quadrature of int tau^{-i sigma} u dtau/tau in x = log tau on the sample
// grid.  The grid end at small tau must carry a negligible weighted tail:
// |tau^{-alpha} u| there above tail_tol times its peak raises ContourDivergence.
// The end at the largest tau is treated as the edge of the support.
inline ContourSamples mellin_transform(const TemporalSamples& u, const Contour& c, double tail_tol = 1e-8) {
  validate(u);
  const Eigen::Index n = u.size(), m = u.values.cols();
  const double h = u.log_step();
  const Vec w = detail::corrected_trapezoid(static_cast<std::size_t>(n)) * h;
  CMat weighted(n, m);
  for (Eigen::Index k = 0; k < n; ++k) weighted.row(k) = std::pow(u.tau[k], -c.alpha) * u.values.row(k);
  const double tail = weighted.row(n - 1).cwiseAbs().maxCoeff();
  const double peak = weighted.cwiseAbs().maxCoeff();
  if (tail > tail_tol * peak)
    raise(ErrorCode::ContourDivergence, "mellin_transform: weighted samples do not decay toward tau -> 0");
  ContourSamples v;
  v.contour = c;
  v.values = CMat::Zero(static_cast<Eigen::Index>(c.size()), m);
  for (std::size_t j = 0; j < c.size(); ++j) {
    for (Eigen::Index k = 0; k < n; ++k) {
      const double x = std::log(u.tau[k]);
      v.values.row(static_cast<Eigen::Index>(j)) += (w[k] * std::exp(-I * c.xi[j] * x)) * weighted.row(k);
    }
  }
  return v;
}

// (2 pi)^{-1} int tau^{i sigma} v dsigma along the contour, evaluated on tau.
// Samples at the contour ends above tail_tol times the peak raise
// ContourDivergence (the truncated integral would not converge).
inline TemporalSamples inverse_mellin(const ContourSamples& v, const std::vector<double>& tau,
                                      double tail_tol = 1e-8) {
  const auto& c = v.contour;
  require(c.size() >= 8 && v.values.rows() == static_cast<Eigen::Index>(c.size()),
          "inverse_mellin: contour samples mismatch");
  if (detail::tail_ratio(v.values) > tail_tol)
    raise(ErrorCode::ContourDivergence, "inverse_mellin: contour samples do not decay at the truncation");
  const double dxi = c.xi[1] - c.xi[0];
  const Vec w = detail::corrected_trapezoid(c.size()) * (dxi / (2.0 * pi));
  TemporalSamples u;
  u.tau = tau;
  u.values = CMat::Zero(static_cast<Eigen::Index>(tau.size()), v.values.cols());
  for (std::size_t k = 0; k < tau.size(); ++k) {
    const double x = std::log(tau[k]);
    for (std::size_t j = 0; j < c.size(); ++j)
      u.values.row(static_cast<Eigen::Index>(k)) +=
          (w[static_cast<Eigen::Index>(j)] * std::exp(I * c.sigma(j) * x)) * v.values.row(static_cast<Eigen::Index>(j));
  }
  return u;
}

// Weighted L^2 norms of the two sides of Plancherel:
// int |u|^2 tau^{-2 alpha} dtau/tau  and  (2 pi)^{-1} int |v|^2 dxi.
inline double weighted_norm(const TemporalSamples& u, double alpha) {
  const Vec w = detail::corrected_trapezoid(static_cast<std::size_t>(u.size())) * u.log_step();
  double s = 0.0;
  for (Eigen::Index k = 0; k < u.size(); ++k) s += w[k] * std::pow(u.tau[k], -2.0 * alpha) * u.values.row(k).squaredNorm();
  return std::sqrt(s);
}

inline double contour_norm(const ContourSamples& v) {
  const double dxi = v.contour.xi[1] - v.contour.xi[0];
  const Vec w = detail::corrected_trapezoid(v.contour.size()) * dxi;
  double s = 0.0;
  for (Eigen::Index j = 0; j < v.values.rows(); ++j) s += w[j] * v.values.row(j).squaredNorm();
  return std::sqrt(s / (2.0 * pi));
}

// Discrete b-Sobolev norm of order s on the contour: weights <|sigma|>^{2s}.
inline double b_sobolev_norm(const ContourSamples& v, double s) {
  const double dxi = v.contour.xi[1] - v.contour.xi[0];
  const Vec w = detail::corrected_trapezoid(v.contour.size()) * dxi;
  double acc = 0.0;
  for (Eigen::Index j = 0; j < v.values.rows(); ++j) {
    const double jb = std::sqrt(1.0 + std::norm(v.contour.sigma(static_cast<std::size_t>(j))));
    acc += w[j] * std::pow(jb, 2.0 * s) * v.values.row(j).squaredNorm();
  }
  return std::sqrt(acc / (2.0 * pi));
}

// ---------------------------------------------------------------------------
// Resonance expansions.

// a * tau^{i sigma} (log tau)^kappa
struct ExpansionTerm {
  cplx sigma;
  int kappa = 0;
  CVec a;
};

inline CVec evaluate_term(const ExpansionTerm& t, double tau) {
  const double x = std::log(tau);
  return t.a * (std::exp(I * t.sigma * x) * std::pow(x, t.kappa));
}

struct LaurentData {
  cplx sigma;
  std::vector<CVec> principal;  // B_{-1}, B_{-2}, ... of v around sigma
  int order = 0;                // highest k with B_{-k} above threshold
};

// Principal part of v at sigma by the trapezoid rule on a circle.  Order k
// is kept while |B_{-k}| radius^{-k} exceeds threshold times the largest
// sample on the circle.
template <class V>
LaurentData laurent_principal(V&& v, cplx sigma, double radius = 1e-2, int nodes = 64, int max_order = 6,
                              double threshold = 1e-8) {
  std::vector<CVec> samples;
  std::vector<cplx> z;
  for (int m = 0; m < nodes; ++m) {
    z.push_back(radius * std::exp(I * (2.0 * pi * m / nodes)));
    samples.push_back(v(sigma + z.back()));
  }
  LaurentData L;
  L.sigma = sigma;
  double peak = 0.0;
  for (const auto& s : samples) peak = std::max(peak, s.norm());
  for (int k = 1; k <= max_order; ++k) {
    CVec b = CVec::Zero(samples[0].size());
    for (int m = 0; m < nodes; ++m) b += samples[m] * (std::pow(z[m], k) / double(nodes));
    L.principal.push_back(b);
  }
  for (int k = 1; k <= max_order; ++k)
    if (L.principal[k - 1].norm() * std::pow(radius, -k) > threshold * peak) L.order = k;
  L.principal.resize(static_cast<std::size_t>(L.order));
  return L;
}

// Terms of -i Res[tau^{i sigma} v(sigma)]:
//   B_{-k}/(s - s0)^k contributes B_{-k} (i log tau)^{k-1}/(k-1)! tau^{i s0}.
inline std::vector<ExpansionTerm> residue_terms(const LaurentData& L) {
  std::vector<ExpansionTerm> out;
  double fact = 1.0;
  for (int kappa = 0; kappa < L.order; ++kappa) {
    if (kappa > 0) fact *= kappa;
    const CVec a = L.principal[static_cast<std::size_t>(kappa)] * (-I * std::pow(I, kappa) / fact);
    out.push_back({L.sigma, kappa, a});
  }
  return out;
}

struct ExpansionSpec {
  double alpha_top = -0.5;  // starting contour Im sigma = 0.5, above all poles
  double xi_max = 24.0;
  int n_xi = 961;
  double source_width = 1.0;  // f^(sigma) = f exp(-sigma^2 / (2 w^2))
  double circle_radius = 1e-2;
  int circle_nodes = 64;
  double jordan_threshold = 1e-8;
  std::vector<double> tau = log_grid();
};

struct Expansion {
  std::vector<ExpansionTerm> terms;
  std::vector<LaurentData> poles;
  TemporalSamples remainder;
  TemporalSamples direct;       // inverse Mellin along the starting contour
  double reconstruction = 0.0;  // max |direct - terms - remainder| / max |direct|
};

inline TemporalSamples synthesize(const std::vector<ExpansionTerm>& terms, const std::vector<double>& tau,
                                  Eigen::Index components) {
  TemporalSamples u;
  u.tau = tau;
  u.values = CMat::Zero(static_cast<Eigen::Index>(tau.size()), components);
  for (std::size_t k = 0; k < tau.size(); ++k)
    for (const auto& t : terms) u.values.row(static_cast<Eigen::Index>(k)) += evaluate_term(t, tau[k]).transpose();
  return u;
}

namespace detail {

template <class V>
ContourSamples sample_contour(V&& v, const Contour& c) {
  ContourSamples s;
  s.contour = c;
  for (std::size_t j = 0; j < c.size(); ++j) {
    const CVec x = v(c.sigma(j));
    if (j == 0) s.values = CMat::Zero(static_cast<Eigen::Index>(c.size()), x.size());
    s.values.row(static_cast<Eigen::Index>(j)) = x.transpose();
  }
  return s;
}

}  // namespace detail

// Expansion of u = inverse Mellin of v along Im sigma = -alpha_top into the
// residues at the listed poles with Im sigma > -ell_target plus the integral
// along Im sigma = -ell_target.
template <class V>
Expansion expand_meromorphic(V&& v, const std::vector<cplx>& poles, double ell_target, const ExpansionSpec& e = {}) {
  require(-e.alpha_top > -ell_target, "expand: the starting contour must lie above the target line");
  Expansion out;
  for (cplx p : poles) {
    if (std::abs(p.imag() + ell_target) < 2.0 * e.circle_radius || p.imag() > -e.alpha_top - 2.0 * e.circle_radius)
      raise(ErrorCode::PoleOnContour, "expand: pole at " + std::to_string(p.real()) + " " +
                                          std::to_string(p.imag()) + "i lies on an integration contour");
    if (p.imag() < -ell_target || std::abs(p.real()) > e.xi_max) continue;
    auto L = laurent_principal(v, p, e.circle_radius, e.circle_nodes, 6, e.jordan_threshold);
    if (L.order == 0) continue;
    for (auto& t : residue_terms(L)) out.terms.push_back(std::move(t));
    out.poles.push_back(std::move(L));
  }
  const auto top = detail::sample_contour(v, make_contour(e.alpha_top, e.xi_max, e.n_xi));
  const auto low = detail::sample_contour(v, make_contour(ell_target, e.xi_max, e.n_xi));
  out.direct = inverse_mellin(top, e.tau);
  out.remainder = inverse_mellin(low, e.tau);
  const auto sum = synthesize(out.terms, e.tau, top.values.cols());
  const double scale = out.direct.values.cwiseAbs().maxCoeff();
  out.reconstruction =
      (out.direct.values - sum.values - out.remainder.values).cwiseAbs().maxCoeff() / std::max(scale, 1e-300);
  return out;
}

namespace detail {

// Eigenvalues of the physical block of the pencil inside the region,
// polished by Newton on log det.
inline std::vector<cplx> physical_poles(const DiscretizedOperator& op, const Region& region) {
  const Eigen::Index n = op.physical_size();
  std::array<CMat, 3> A;
  for (int k = 0; k < 3; ++k) A[k] = op.A[k].topLeftCorner(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double m = 0.0;
    for (const auto& M : A) m = std::max(m, M.row(i).cwiseAbs().maxCoeff());
    if (m > 0.0)
      for (auto& M : A) M.row(i) /= m;
  }
  CMat L = CMat::Zero(2 * n, 2 * n), B = CMat::Zero(2 * n, 2 * n);
  L.block(0, n, n, n).setIdentity();
  L.block(n, 0, n, n) = -A[0];
  L.block(n, n, n, n) = -A[1];
  B.block(0, 0, n, n).setIdentity();
  B.block(n, n, n, n) = A[2];
  const auto ev = num::generalized_eigen(L, B, false);
  std::vector<cplx> out;
  for (std::size_t k = 0; k < ev.alpha.size(); ++k) {
    if (std::abs(ev.beta[k]) <= 1e-13 * std::abs(ev.alpha[k])) continue;
    cplx s = ev.alpha[k] / ev.beta[k];
    if (!std::isfinite(std::abs(s)) || !region.contains(s)) continue;
    for (int it = 0; it < 8; ++it) {
      const CMat M = A[0] + s * A[1] + (s * s) * A[2];
      const cplx tr = Eigen::PartialPivLU<CMat>(M).solve(A[1] + (2.0 * s) * A[2]).trace();
      if (!std::isfinite(std::abs(tr)) || tr == 0.0) break;
      const cplx ds = -1.0 / tr;
      if (std::abs(ds) > 1e-3) break;
      s += ds;
      if (std::abs(ds) < 1e-15 * std::max(1.0, std::abs(s))) break;
    }
    bool dup = false;
    for (cplx q : out) dup |= std::abs(q - s) < 1e-6;
    if (!dup) out.push_back(s);
  }
  return out;
}

}  // namespace detail

// Resonance expansion for a discretized pencil and a source f with
// Gaussian Mellin profile.  Poles are the eigenvalues of the pencil in the
// strip; pass a list to reuse an earlier solve.
inline Expansion resonance_expand(const CVec& f, const DiscretizedOperator& op, double ell_target,
                                  const ExpansionSpec& e = {}, const std::vector<cplx>* poles_in = nullptr) {
  require(f.size() == op.size(), "resonance_expand: source size mismatch");
  const Eigen::Index np = op.physical_size();
  // the physical block decouples; restrict to it
  const CVec fp = f.head(np);
  auto v = [&](cplx s) -> CVec {
    const CMat M = op.pencil(s).topLeftCorner(np, np);
    return Eigen::PartialPivLU<CMat>(M).solve(fp) * std::exp(-s * s / (2.0 * e.source_width * e.source_width));
  };
  const Region R{-e.xi_max - 1.0, e.xi_max + 1.0, -ell_target - 1.0, -e.alpha_top + 1.0};
  const std::vector<cplx> poles = poles_in ? *poles_in : detail::physical_poles(op, R);
  return expand_meromorphic(v, poles, ell_target, e);
}

// ---------------------------------------------------------------------------
// Decay fits.

struct DecayFit {
  double rate = 0.0;       // ||u|| ~ tau^rate |log tau|^log_power
  double log_power = 0.0;  // fitted exponent of |log tau| (0 without the correction)
  int detected_log_power = 0;
  double residual = 0.0;   // rms of the log fit
  int samples = 0;
};

inline DecayFit fit_decay(const TemporalSamples& u, double tau_lo, double tau_hi, bool log_correction = false) {
  std::vector<double> X, Y, Z;
  for (Eigen::Index k = 0; k < u.size(); ++k) {
    const double t = u.tau[k];
    if (t < tau_lo || t > tau_hi) continue;
    const double n = u.values.row(k).norm();
    if (!(n > 0.0) || !std::isfinite(n)) continue;
    X.push_back(std::log(t));
    Y.push_back(std::log(n));
    Z.push_back(std::log(std::abs(std::log(t))));
  }
  if (X.size() < 8) raise(ErrorCode::DegenerateFit, "fit_decay: fewer than 8 usable samples in the window");
  const int cols = log_correction ? 3 : 2;
  Mat A(static_cast<Eigen::Index>(X.size()), cols);
  Vec y(static_cast<Eigen::Index>(X.size()));
  for (std::size_t k = 0; k < X.size(); ++k) {
    A(k, 0) = 1.0;
    A(k, 1) = X[k];
    if (log_correction) A(k, 2) = Z[k];
    y[k] = Y[k];
  }
  const Vec c = A.colPivHouseholderQr().solve(y);
  DecayFit f;
  f.rate = c[1];
  f.log_power = log_correction ? c[2] : 0.0;
  f.detected_log_power = static_cast<int>(std::lround(f.log_power));
  f.residual = std::sqrt((A * c - y).squaredNorm() / double(X.size()));
  f.samples = static_cast<int>(X.size());
  return f;
}

// ---------------------------------------------------------------------------
// Fredholm threshold at the radial sets.

enum class Regime { PropagateAway, PropagateToward, Boundary };

inline const char* to_string(Regime r) {
  switch (r) {
    case Regime::PropagateAway: return "propagate-away";
    case Regime::PropagateToward: return "propagate-toward";
    case Regime::Boundary: return "boundary";
  }
  return "unknown";
}

struct ThresholdSpec {
  double s = 1.0;
  double k = 2.0;
  double beta_plus = 1.0;
  double beta_minus = std::numeric_limits<double>::quiet_NaN();  // NaN: single horizon
};

inline ThresholdSpec threshold_spec(double s, const HorizonData& h, double k = 2.0) {
  return {s, k, h.beta_plus, h.has_inner ? h.beta_minus : std::numeric_limits<double>::quiet_NaN()};
}

struct ThresholdResult {
  Regime regime = Regime::Boundary;
  bool cs_member = false;
  double beta = 0.0;
  double boundary = 0.0;   // C_s: Im sigma > boundary
  double critical = 0.0;   // (k - 1 - beta Im sigma)/2
};

// beta = max(beta_+, beta_-) for s >= 1/2 and min otherwise.
inline ThresholdResult threshold(const ThresholdSpec& t, double im_sigma, double tol = 1e-12) {
  require(t.beta_plus > 0.0, "threshold: beta must be positive");
  double beta = t.beta_plus;
  if (std::isfinite(t.beta_minus)) {
    require(t.beta_minus > 0.0, "threshold: beta must be positive");
    beta = t.s >= 0.5 ? std::max(t.beta_plus, t.beta_minus) : std::min(t.beta_plus, t.beta_minus);
  }
  ThresholdResult r;
  r.beta = beta;
  r.boundary = (t.k - 1.0 - 2.0 * t.s) / beta;
  r.critical = 0.5 * (t.k - 1.0 - beta * im_sigma);
  if (std::abs(t.s - r.critical) <= tol)
    r.regime = Regime::Boundary;
  else
    r.regime = t.s > r.critical ? Regime::PropagateAway : Regime::PropagateToward;
  r.cs_member = im_sigma > r.boundary + tol;
  return r;
}

}  // namespace kds

#pragma once
// Spectral-element discretization of the spherically symmetric pencils
// A(sigma) = A0 + sigma A1 + sigma^2 A2 = -(P_sigma - i Q_sigma) and their
// resonances, resolvents and algebraic identities.
//
// Variables: mu in [mu0, 1] for the de Sitter and Minkowski models (mu = 1 at
// the origin, mu = 0 the horizon), r in [r(mu0), r(mu0)] around both horizons
// for de Sitter-Schwarzschild.  The physical region is one or more fully
// collocated Chebyshev elements patched with C^1 conditions; the absorbing
// collars are element chains that continue the solution as an initial value
// problem, so nothing in the collar feeds back into the physical region.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kds/absorption.hpp"
#include "kds/core.hpp"
#include "kds/numerics.hpp"
#include "kds/spacetime.hpp"

namespace kds {

using num::CMat;
using num::CVec;
using num::Mat;
using num::Vec;

// ---------------------------------------------------------------------------
// de Sitter-Schwarzschild radial model in a smooth global time function.
// With psi = (2r - r_+ - r_-)/(r_+ - r_-) the time function t = t_static + h,
// h' = -B/mu~, B = psi (r^2 - kappa mu~), keeps the pencil regular across both
// horizons.  E = (B^2 - r^4)/mu~ is the sigma^2 coefficient; it is negative
// (time-like level sets) for small kappa.

struct DssModel {
  SpacetimeParams p;
  double r_minus = 0.0, r_plus = 0.0, r3 = 0.0, kappa = 0.5;

  double width() const { return r_plus - r_minus; }
  double mu(double r) const { return mu_tilde(p, r).value; }
  double dmu(double r) const { return mu_tilde(p, r).d1; }
  double psi(double r) const { return (2.0 * r - r_plus - r_minus) / width(); }
  double dpsi() const { return 2.0 / width(); }
  double B(double r) const { return psi(r) * (r * r - kappa * mu(r)); }
  double dB(double r) const { return dpsi() * (r * r - kappa * mu(r)) + psi(r) * (2.0 * r - kappa * dmu(r)); }
  // (psi^2 - 1)/mu~ in closed form, regular at both horizons
  double q(double r) const { return -12.0 / (p.lambda * width() * width() * r * (r - r3)); }
  double E(double r) const {
    const double ps = psi(r), ct = -kappa * ps;
    return q(r) * std::pow(r, 4) + 2.0 * ps * r * r * ct + mu(r) * ct * ct;
  }
  // H = B/mu~ = -h'; finite away from the horizons
  double H(double r) const { return B(r) / mu(r); }
};

inline DssModel dss_model(const SpacetimeParams& p, double kappa = 0.5) {
  if (p.alpha != 0.0) raise(ErrorCode::UnsupportedModel, "radial pencils need alpha = 0");
  if (p.model != Model::DSSchwarzschild && p.model != Model::KerrDeSitter)
    raise(ErrorCode::UnsupportedModel, "dss_model: not a de Sitter-Schwarzschild parameter set");
  const auto h = horizon_roots(p);
  if (!h.has_inner) raise(ErrorCode::NoHorizons, "dss_model: need two horizons");
  DssModel m;
  m.p = p;
  m.p.model = Model::DSSchwarzschild;
  m.r_minus = h.r_minus;
  m.r_plus = h.r_plus;
  m.r3 = -(h.r_minus + h.r_plus);  // the roots of mu~ sum to zero
  m.kappa = kappa;
  return m;
}

// ---------------------------------------------------------------------------
// Pencil coefficients: A_k = diag(c2_k) D^2 + diag(c1_k) D + diag(c0_k).

struct PencilCoefficients {
  std::array<CVec, 3> c2, c1, c0;
};

inline bool radial_mu_model(const SpacetimeParams& p) {
  return p.model == Model::DeSitter || p.model == Model::MinkowskiBoundary;
}

// Spatial dimension d = n - 1 and the constant lambda of the
// asymptotically hyperbolic form; lambda = ((n-1)^2 - 1)/4 for Minkowski.
inline double ah_lambda(const SpacetimeParams& p) {
  const double d = p.n - 1;
  return p.model == Model::MinkowskiBoundary ? 0.25 * (d * d - 1.0) : 0.0;
}

inline PencilCoefficients pencil_coefficients(const SpacetimeParams& p, int ell, const Vec& x, double dss_kappa = 0.5) {
  require(ell >= 0, "pencil_coefficients: ell must be >= 0");
  const Eigen::Index n = x.size();
  PencilCoefficients c;
  for (int k = 0; k < 3; ++k) {
    c.c2[k] = CVec::Zero(n);
    c.c1[k] = CVec::Zero(n);
    c.c0[k] = CVec::Zero(n);
  }
  if (radial_mu_model(p)) {
    const double d = p.n - 1, lam = ah_lambda(p);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double m = x[i];
      c.c2[0][i] = -4.0 * m * (1.0 - m);
      c.c1[0][i] = -(4.0 - (4.0 + 4.0 * ell + 2.0 * d) * m);
      c.c0[0][i] = ell * (ell + d) + lam;
      c.c1[1][i] = 4.0 * I * (1.0 - m);
      c.c0[1][i] = -I * (2.0 * ell + d);
      c.c0[2][i] = -1.0;
    }
    return c;
  }
  const auto m = dss_model(p, dss_kappa);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r = x[i];
    c.c2[0][i] = -m.mu(r);
    c.c1[0][i] = -m.dmu(r);
    c.c0[0][i] = ell * (ell + 1.0);
    c.c1[1][i] = -2.0 * I * m.B(r);
    c.c0[1][i] = -I * m.dB(r);
    c.c0[2][i] = m.E(r);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Operator layout and assembly.

enum class ElementKind { Physical, Left, Right };

struct RadialElement {
  double a = 0.0, b = 0.0;
  int n = 0;
  ElementKind kind = ElementKind::Physical;
  int parent = -1;  // chain elements: the element they continue
  Eigen::Index offset = 0;
  Vec x;
  Mat D;
};

struct OperatorOptions {
  int collar_nodes = 0;         // nodes per collar element; 0 -> max(10, N/4)
  std::vector<double> breaks;   // extra element breaks inside the physical region
  double dss_kappa = 0.5;
};

struct DiscretizedOperator {
  SpacetimeParams params;
  int ell = 0;
  int N = 0;  // nodes per physical element
  AbsorbingSpec spec;
  OperatorOptions options;
  std::vector<RadialElement> elements;  // physical elements first, left to right
  int n_physical = 0;
  Vec grid;         // all nodes in element order
  Vec absorb_var;   // mu or mu~ at the nodes
  Vec chi;          // absorbing profile at the nodes
  std::vector<bool> equation_row;  // rows holding the differential equation
  std::array<CMat, 3> A;

  Eigen::Index size() const { return grid.size(); }
  Eigen::Index physical_size() const {
    return elements[n_physical - 1].offset + elements[n_physical - 1].n;
  }
  double physical_lo() const { return elements.front().a; }
  double physical_hi() const { return elements[n_physical - 1].b; }
  std::string variable() const { return radial_mu_model(params) ? "mu" : "r"; }

  CMat pencil(cplx s) const { return A[0] + s * A[1] + (s * s) * A[2]; }
  CMat pencil_derivative(cplx s) const { return A[1] + (2.0 * s) * A[2]; }

  // Grid function value at x in the physical region by barycentric interpolation.
  cplx evaluate(const CVec& u, double x) const {
    for (int e = 0; e < n_physical; ++e) {
      const auto& el = elements[e];
      if (x >= el.a - 1e-14 && x <= el.b + 1e-14)
        return num::barycentric(el.x, u.segment(el.offset, el.n), x);
    }
    raise(ErrorCode::InvalidArgument, "evaluate: point outside the physical region");
  }

  // Clenshaw-Curtis weights for the physical nodes (zero elsewhere).
  Vec physical_weights() const {
    Vec w = Vec::Zero(size());
    for (int e = 0; e < n_physical; ++e) {
      const auto& el = elements[e];
      w.segment(el.offset, el.n) += num::clenshaw_curtis(el.n, el.a, el.b);
    }
    return w;
  }
};

namespace detail {

// r on the given side of the horizon with mu~(r) = level < 0.
inline double dss_level_point(const DssModel& m, double level, bool outer) {
  auto g = [&](double r) { return m.mu(r) - level; };
  if (outer) {
    double hi = m.r_plus * 1.5;
    for (int k = 0; k < 60 && g(hi) > 0.0; ++k) hi *= 1.5;
    return num::bracket_root(g, m.r_plus, hi);
  }
  // mu~ is negative on (0, r_-) with a single minimum
  const double rmin = num::bracket_root([&](double r) { return m.dmu(r); }, 1e-12, m.r_minus);
  if (g(rmin) > 0.0)
    raise(ErrorCode::ConfigError, "absorbing level " + std::to_string(level) + " is below min mu~ inside r_-");
  return num::bracket_root(g, rmin, m.r_minus);
}

struct Layout {
  std::vector<double> physical;  // ascending breakpoints
  std::vector<std::pair<double, double>> left, right;  // outward chains
};

inline Layout layout_for(const SpacetimeParams& p, const AbsorbingSpec& s, const OperatorOptions& o) {
  Layout L;
  double lo, hi;
  if (radial_mu_model(p)) {
    lo = s.support_hi;
    hi = 1.0;
    L.left = {{s.plateau_hi, s.support_hi}, {s.mu0, s.plateau_hi}};
  } else {
    const auto m = dss_model(p, o.dss_kappa);
    const double a_lo = dss_level_point(m, s.support_hi, false), a_hi = dss_level_point(m, s.support_hi, true);
    const double p_lo = dss_level_point(m, s.plateau_hi, false), p_hi = dss_level_point(m, s.plateau_hi, true);
    const double e_lo = dss_level_point(m, s.mu0, false), e_hi = dss_level_point(m, s.mu0, true);
    lo = a_lo;
    hi = a_hi;
    L.left = {{p_lo, a_lo}, {e_lo, p_lo}};
    L.right = {{a_hi, p_hi}, {p_hi, e_hi}};
  }
  L.physical.push_back(lo);
  std::vector<double> br = o.breaks;
  std::sort(br.begin(), br.end());
  for (double b : br) {
    if (!(b > lo && b < hi)) raise(ErrorCode::ConfigError, "element break outside the physical region");
    L.physical.push_back(b);
  }
  L.physical.push_back(hi);
  return L;
}

inline RadialElement make_element(double a, double b, int n, ElementKind kind, int parent) {
  RadialElement e;
  e.a = a;
  e.b = b;
  e.n = n;
  e.kind = kind;
  e.parent = parent;
  const auto g = num::chebyshev(n, a, b);
  e.x = g.x;
  e.D = g.D;
  return e;
}

inline void set_row(std::array<CMat, 3>& A, Eigen::Index row) {
  for (auto& M : A) M.row(row).setZero();
}

}  // namespace detail

inline DiscretizedOperator build_operator(const SpacetimeParams& p, int ell, int N, const AbsorbingSpec& spec,
                                          const OperatorOptions& opt = {}) {
  if (p.alpha != 0.0) raise(ErrorCode::UnsupportedModel, "resonance pencils need alpha = 0");
  if (!radial_mu_model(p) && p.model != Model::DSSchwarzschild && p.model != Model::KerrDeSitter)
    raise(ErrorCode::UnsupportedModel, "build_operator: unsupported model");
  require(N >= 16, "build_operator: N must be >= 16");
  require(ell >= 0, "build_operator: ell must be >= 0");
  validate(spec);
  if (radial_mu_model(p)) validate(p);

  DiscretizedOperator op;
  op.params = p;
  op.ell = ell;
  op.N = N;
  op.spec = spec;
  op.options = opt;
  const int nc = opt.collar_nodes > 0 ? opt.collar_nodes : std::max(10, N / 4);
  require(nc >= 4, "build_operator: collar elements need at least 4 nodes");

  const auto L = detail::layout_for(p, spec, opt);
  for (std::size_t i = 0; i + 1 < L.physical.size(); ++i)
    op.elements.push_back(detail::make_element(L.physical[i], L.physical[i + 1], N, ElementKind::Physical, -1));
  op.n_physical = static_cast<int>(op.elements.size());
  int parent = 0;
  for (const auto& [a, b] : L.left) {
    op.elements.push_back(detail::make_element(a, b, nc, ElementKind::Left, parent));
    parent = static_cast<int>(op.elements.size()) - 1;
  }
  parent = op.n_physical - 1;
  for (const auto& [a, b] : L.right) {
    op.elements.push_back(detail::make_element(a, b, nc, ElementKind::Right, parent));
    parent = static_cast<int>(op.elements.size()) - 1;
  }

  Eigen::Index total = 0;
  for (auto& e : op.elements) {
    e.offset = total;
    total += e.n;
  }
  op.grid.resize(total);
  op.absorb_var.resize(total);
  op.chi.resize(total);
  op.equation_row.assign(static_cast<std::size_t>(total), true);
  for (auto& M : op.A) M = CMat::Zero(total, total);

  for (const auto& e : op.elements) {
    op.grid.segment(e.offset, e.n) = e.x;
    const auto c = pencil_coefficients(p, ell, e.x, opt.dss_kappa);
    const Mat D2 = e.D * e.D;
    Vec chi(e.n);
    for (int i = 0; i < e.n; ++i) {
      op.absorb_var[e.offset + i] = absorbing_variable(p, e.x[i]);
      chi[i] = absorbing_chi(spec, op.absorb_var[e.offset + i]);
    }
    op.chi.segment(e.offset, e.n) = chi;
    std::array<CMat, 3> blk;
    for (int k = 0; k < 3; ++k) {
      blk[k] = c.c2[k].asDiagonal() * D2.cast<cplx>() + c.c1[k].asDiagonal() * e.D.cast<cplx>();
      blk[k].diagonal() += c.c0[k];
    }
    // -i Q: the plateau profile times the symbol-matching stencil 1 - k D^2
    const Mat stencil = Mat::Identity(e.n, e.n) - spec.stencil * D2;
    blk[0] -= I * (chi.asDiagonal() * stencil).cast<cplx>();
    for (int k = 0; k < 3; ++k) op.A[k].block(e.offset, e.offset, e.n, e.n) = blk[k];
  }

  // C^1 patching between physical elements
  for (int e = 0; e + 1 < op.n_physical; ++e) {
    const auto& l = op.elements[e];
    const auto& r = op.elements[e + 1];
    const Eigen::Index rv = l.offset + l.n - 1, rd = r.offset;
    detail::set_row(op.A, rv);
    detail::set_row(op.A, rd);
    op.A[0](rv, rv) = 1.0;
    op.A[0](rv, r.offset) = -1.0;
    op.A[0].block(rd, l.offset, 1, l.n) = l.D.row(l.n - 1).cast<cplx>();
    op.A[0].block(rd, r.offset, 1, r.n) -= r.D.row(0).cast<cplx>();
    op.equation_row[rv] = op.equation_row[rd] = false;
  }
  // collar chains: value continuity at the interface node, derivative
  // continuity in the free-end row
  for (std::size_t k = op.n_physical; k < op.elements.size(); ++k) {
    const auto& e = op.elements[k];
    const auto& pe = op.elements[e.parent];
    const bool left = e.kind == ElementKind::Left;
    const int ie = left ? e.n - 1 : 0, fe = left ? 0 : e.n - 1, ip = left ? 0 : pe.n - 1;
    const Eigen::Index rv = e.offset + ie, rd = e.offset + fe;
    detail::set_row(op.A, rv);
    detail::set_row(op.A, rd);
    op.A[0](rv, rv) = 1.0;
    op.A[0](rv, pe.offset + ip) = -1.0;
    op.A[0].block(rd, e.offset, 1, e.n) = e.D.row(ie).cast<cplx>();
    op.A[0].block(rd, pe.offset, 1, pe.n) -= pe.D.row(ip).cast<cplx>();
    op.equation_row[rv] = op.equation_row[rd] = false;
  }
  for (const auto& M : op.A)
    if (!M.allFinite()) raise(ErrorCode::SolverFailure, "build_operator: non-finite matrix entries");
  return op;
}

inline DiscretizedOperator rebuild(const DiscretizedOperator& op, int N) {
  return build_operator(op.params, op.ell, N, op.spec, op.options);
}

// Source vector: samples of f on the equation rows, zero on the matching rows.
template <class F>
CVec sample_source(const DiscretizedOperator& op, F&& f) {
  CVec v = CVec::Zero(op.size());
  for (Eigen::Index i = 0; i < op.size(); ++i)
    if (op.equation_row[i]) v[i] = f(op.grid[i]);
  return v;
}

// ---------------------------------------------------------------------------
// Resonances.

struct Region {
  double re_min = -10.0, re_max = 10.0, im_min = -5.0, im_max = 1.0;
  bool contains(cplx s, double margin = 0.0) const {
    return s.real() >= re_min - margin && s.real() <= re_max + margin && s.imag() >= im_min - margin &&
           s.imag() <= im_max + margin;
  }
};

struct ResonanceOptions {
  double cluster_radius = 1e-6;
  double collar_fraction_max = 0.99;  // spurious filter on the eigenvector mass in the collars
  int delta_N = 0;                    // 0 -> N/4
  bool refine = true;
  int refine_iterations = 12;
  double spurious_threshold = 1e-4;
  bool convergence = true;
};

struct Resonance {
  cplx sigma;
  int multiplicity = 1;
  double convergence_delta = std::numeric_limits<double>::infinity();
  bool spurious_warning = false;
  double collar_fraction = 0.0;
};

struct ResonanceList {
  int N = 0, N_check = 0;
  std::vector<Resonance> entries;
};

namespace detail {

// Newton step on log det: sigma <- sigma - 1/tr(M^{-1} M').
inline cplx refine_resonance(const DiscretizedOperator& op, cplx s0, int iters) {
  cplx s = s0;
  for (int k = 0; k < iters; ++k) {
    const Eigen::PartialPivLU<CMat> lu(op.pencil(s));
    const cplx tr = lu.solve(op.pencil_derivative(s)).trace();
    if (!std::isfinite(std::abs(tr)) || std::abs(tr) == 0.0) break;
    const cplx ds = -1.0 / tr;
    s += ds;
    if (std::abs(ds) < 1e-15 * std::max(1.0, std::abs(s))) break;
  }
  if (!std::isfinite(std::abs(s)) || std::abs(s - s0) > 1e-3 * std::max(1.0, std::abs(s0))) return s0;
  return s;
}

}  // namespace detail

// Eigenvalues of the linearized pencil in the region, filtered, refined and clustered.
inline std::vector<Resonance> raw_resonances(const DiscretizedOperator& op, const Region& region,
                                             const ResonanceOptions& o = {}) {
  const Eigen::Index n = op.size();
  // row equilibration keeps the collar and matching rows on one scale
  Vec scale(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double m = 0.0;
    for (const auto& M : op.A) m = std::max(m, M.row(i).cwiseAbs().maxCoeff());
    scale[i] = m > 0.0 ? 1.0 / m : 1.0;
  }
  std::array<CMat, 3> A;
  for (int k = 0; k < 3; ++k) A[k] = scale.asDiagonal() * op.A[k];
  CMat L = CMat::Zero(2 * n, 2 * n), B = CMat::Zero(2 * n, 2 * n);
  L.block(0, n, n, n).setIdentity();
  L.block(n, 0, n, n) = -A[0];
  L.block(n, n, n, n) = -A[1];
  B.block(0, 0, n, n).setIdentity();
  B.block(n, n, n, n) = A[2];
  const auto ev = num::generalized_eigen(L, B, true);

  const Eigen::Index phys = op.physical_size();
  std::vector<Resonance> found;
  for (std::size_t k = 0; k < ev.alpha.size(); ++k) {
    if (std::abs(ev.beta[k]) <= 1e-13 * std::abs(ev.alpha[k])) continue;
    const cplx s = ev.alpha[k] / ev.beta[k];
    if (!std::isfinite(std::abs(s)) || !region.contains(s, 1e-3)) continue;
    const CVec v = ev.vectors.col(static_cast<Eigen::Index>(k)).head(n);
    const double tot = v.norm();
    const double frac = n > phys ? v.tail(n - phys).norm() / tot : 0.0;
    if (!(frac < o.collar_fraction_max)) continue;
    Resonance r;
    r.sigma = o.refine ? detail::refine_resonance(op, s, o.refine_iterations) : s;
    r.collar_fraction = frac;
    if (region.contains(r.sigma)) found.push_back(r);
  }
  // cluster within the radius; multiplicity counts the members
  std::sort(found.begin(), found.end(), [](const Resonance& a, const Resonance& b) {
    return a.sigma.imag() != b.sigma.imag() ? a.sigma.imag() > b.sigma.imag() : a.sigma.real() < b.sigma.real();
  });
  std::vector<Resonance> out;
  std::vector<bool> used(found.size(), false);
  for (std::size_t i = 0; i < found.size(); ++i) {
    if (used[i]) continue;
    Resonance c = found[i];
    cplx sum = c.sigma;
    int m = 1;
    for (std::size_t j = i + 1; j < found.size(); ++j)
      if (!used[j] && std::abs(found[j].sigma - c.sigma) < o.cluster_radius) {
        used[j] = true;
        sum += found[j].sigma;
        c.collar_fraction = std::max(c.collar_fraction, found[j].collar_fraction);
        ++m;
      }
    c.sigma = sum / double(m);
    c.multiplicity = m;
    out.push_back(c);
  }
  std::sort(out.begin(), out.end(), [](const Resonance& a, const Resonance& b) {
    return a.sigma.imag() != b.sigma.imag() ? a.sigma.imag() > b.sigma.imag() : a.sigma.real() < b.sigma.real();
  });
  return out;
}

inline ResonanceList solve_resonances(const DiscretizedOperator& op, const Region& region,
                                      const ResonanceOptions& o = {}) {
  ResonanceList list;
  list.N = op.N;
  list.entries = raw_resonances(op, region, o);
  if (!o.convergence) return list;
  const int dN = o.delta_N > 0 ? o.delta_N : std::max(1, op.N / 4);
  list.N_check = op.N + dN;
  Region wide = region;
  wide.re_min -= 0.1;
  wide.re_max += 0.1;
  wide.im_min -= 0.1;
  wide.im_max += 0.1;
  const auto check = raw_resonances(rebuild(op, list.N_check), wide, o);
  for (auto& e : list.entries) {
    for (const auto& c : check) e.convergence_delta = std::min(e.convergence_delta, std::abs(c.sigma - e.sigma));
    e.spurious_warning = !(e.convergence_delta <= o.spurious_threshold);
  }
  return list;
}

// ---------------------------------------------------------------------------
// Resolvent and identities.

inline bool near_listed_pole(cplx s, const ResonanceList* known, double radius = 1e-4) {
  if (!known) return false;
  for (const auto& e : known->entries)
    if (std::abs(e.sigma - s) < radius) return true;
  return false;
}

// Solves A(sigma) u = f with one step of iterative refinement.
inline CVec solve_pencil(const CMat& M, const CVec& f) {
  const Eigen::PartialPivLU<CMat> lu(M);
  if (!(lu.rcond() > 1e-14)) raise(ErrorCode::NearPole, "pencil is numerically singular");
  CVec u = lu.solve(f);
  u += lu.solve(f - M * u);
  return u;
}

inline CVec resolvent_apply(const DiscretizedOperator& op, cplx s, const CVec& f,
                            const ResonanceList* known = nullptr) {
  require(f.size() == op.size(), "resolvent_apply: size mismatch");
  if (near_listed_pole(s, known)) raise(ErrorCode::NearPole, "sigma within 1e-4 of a listed resonance");
  // residual measured on the row-equilibrated system
  CMat M = op.pencil(s);
  CVec g = f;
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    const double w = M.row(i).cwiseAbs().maxCoeff();
    if (w > 0.0) {
      M.row(i) /= w;
      g[i] /= w;
    }
  }
  const CVec u = solve_pencil(M, g);
  const double res = (M * u - g).norm();
  if (res > 1e-10 * std::max(g.norm(), 1e-300))
    raise(ErrorCode::NearPole, "resolvent residual " + std::to_string(res) + " exceeds 1e-10 |f|");
  return u;
}

struct GluingReport {
  double residual = 0.0;      // max over probes of |R v - rhs v| / |v|
  double resolvent_norm = 0.0;  // max |R v| / |v| over probes
  int probes = 0;
};

// R = R' - R'(i Q' + Q' (chi R chi) Q') R' with R' = (A - i Q')^{-1} and
// Q' = weight * diag(chi'), chi' supported in the physical interior.
inline GluingReport gluing_check(const DiscretizedOperator& op, cplx s, const Vec& chi_prime, double weight,
                                 int probes = 20, std::uint64_t seed = 1) {
  require(chi_prime.size() == op.size(), "gluing_check: cutoff size mismatch");
  const CMat M = op.pencil(s);
  const CVec q = (weight * chi_prime).cast<cplx>();
  const CMat Mp = M - I * CMat(q.asDiagonal());
  const Eigen::PartialPivLU<CMat> R(M), Rp(Mp);
  if (!(R.rcond() > 1e-14) || !(Rp.rcond() > 1e-14)) raise(ErrorCode::NearPole, "gluing_check: near a pole");
  // chi R chi with chi = 1 on supp chi' acts as R between the Q' factors
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> G;
  GluingReport rep;
  rep.probes = probes;
  for (int k = 0; k < probes; ++k) {
    CVec v(op.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = cplx(G(rng), G(rng));
    v /= v.norm();
    const CVec lhs = R.solve(v);
    const CVec t = Rp.solve(v);
    const CVec inner = q.asDiagonal() * R.solve(q.asDiagonal() * t);
    const CVec rhs = t - Rp.solve(I * (q.asDiagonal() * t) + inner);
    rep.residual = std::max(rep.residual, (lhs - rhs).norm());
    rep.resolvent_norm = std::max(rep.resolvent_norm, lhs.norm());
  }
  return rep;
}

// Largest difference of the two resolvent outputs on [lo, 1] (or [lo, hi]),
// sampled at the physical nodes of the first operator.
inline double compare_on_region(const DiscretizedOperator& a, const CVec& ua, const DiscretizedOperator& b,
                                const CVec& ub, double lo, double hi) {
  double d = 0.0;
  for (int e = 0; e < a.n_physical; ++e)
    for (int i = 0; i < a.elements[e].n; ++i) {
      const double x = a.elements[e].x[i];
      if (x < lo || x > hi) continue;
      d = std::max(d, std::abs(ua[a.elements[e].offset + i] - b.evaluate(ub, x)));
    }
  return d;
}

// Weighted L^2 norm of the cutoff resolvent chi R(sigma) chi on the physical
// nodes in (lo, hi); the physical block decouples from the collars.
inline double cutoff_resolvent_norm(const DiscretizedOperator& op, cplx s, double lo, double hi) {
  const Eigen::Index np = op.physical_size();
  const CMat M = op.pencil(s).topLeftCorner(np, np);
  const Eigen::PartialPivLU<CMat> lu(M);
  if (!(lu.rcond() > 1e-15)) raise(ErrorCode::NearPole, "cutoff_resolvent_norm: near a pole");
  const Vec w = op.physical_weights().head(np);
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < np; ++i)
    if (op.grid[i] > lo && op.grid[i] < hi && op.equation_row[i]) idx.push_back(i);
  const Eigen::Index m = static_cast<Eigen::Index>(idx.size());
  require(m > 0, "cutoff_resolvent_norm: empty window");
  CMat rhs = CMat::Zero(np, m);
  for (Eigen::Index j = 0; j < m; ++j) rhs(idx[j], j) = 1.0 / std::sqrt(w[idx[j]]);
  const CMat sol = lu.solve(rhs);
  CMat K(m, m);
  for (Eigen::Index i = 0; i < m; ++i) K.row(i) = std::sqrt(w[idx[i]]) * sol.row(idx[i]);
  Eigen::JacobiSVD<CMat> svd(K);
  return svd.singularValues()[0];
}

}  // namespace kds

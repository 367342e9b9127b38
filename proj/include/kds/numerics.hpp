#pragma once
// Numerical building blocks: Chebyshev collocation, quadrature, fits,
// finite differences, polynomial roots, bracketed roots and the
// generalized complex eigenproblem.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/Polynomials>
#include <boost/math/tools/roots.hpp>

#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

#include "kds/core.hpp"

namespace kds::num {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

// Chebyshev-Lobatto nodes on [a,b] in ascending order with the matching
// first-derivative matrix.
struct ChebGrid {
  Vec x;
  Mat D;
};

inline ChebGrid chebyshev(int n, double a, double b) {
  require(n >= 2, "chebyshev: need at least two nodes");
  const int N = n - 1;
  Vec t(n), c(n);
  // t_j = -cos(pi j / N), ascending
  for (int j = 0; j < n; ++j) {
    t[j] = -std::cos(pi * j / N);
    c[j] = ((j == 0 || j == N) ? 2.0 : 1.0) * ((j % 2) ? -1.0 : 1.0);
  }
  // use sin form for the differences to limit cancellation
  Mat D = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double dx = 2.0 * std::sin(pi * (i + j) / (2.0 * N)) * std::sin(pi * (i - j) / (2.0 * N));
      D(i, j) = (c[i] / c[j]) / dx;
    }
  }
  for (int i = 0; i < n; ++i) D(i, i) = -D.row(i).sum();
  ChebGrid g;
  g.x = (0.5 * (a + b)) * Vec::Ones(n) + (0.5 * (b - a)) * t;
  g.x[0] = a;
  g.x[N] = b;
  g.D = D * (2.0 / (b - a));
  return g;
}

// Clenshaw-Curtis weights for the ascending Lobatto nodes on [a,b].
inline Vec clenshaw_curtis(int n, double a, double b) {
  const int N = n - 1;
  Vec w = Vec::Zero(n);
  std::vector<double> v(std::max(N - 1, 0), 1.0);
  if (N % 2 == 0) {
    w[0] = w[N] = 1.0 / (double(N) * N - 1.0);
    for (int k = 1; k < N / 2; ++k)
      for (int j = 1; j < N; ++j) v[j - 1] -= 2.0 * std::cos(2.0 * k * pi * j / N) / (4.0 * k * k - 1.0);
    for (int j = 1; j < N; ++j) v[j - 1] -= std::cos(pi * j) / (double(N) * N - 1.0);
  } else {
    w[0] = w[N] = 1.0 / (double(N) * N);
    for (int k = 1; k <= (N - 1) / 2; ++k)
      for (int j = 1; j < N; ++j) v[j - 1] -= 2.0 * std::cos(2.0 * k * pi * j / N) / (4.0 * k * k - 1.0);
  }
  for (int j = 1; j < N; ++j) w[j] = 2.0 * v[j - 1] / N;
  return w * (0.5 * (b - a));
}

// Barycentric interpolation from Chebyshev-Lobatto samples.
template <class Values>
auto barycentric(const Vec& nodes, const Values& f, double xq) {
  using T = std::decay_t<decltype(f[0])>;
  const int n = static_cast<int>(nodes.size());
  T num{};
  double den = 0.0;
  for (int j = 0; j < n; ++j) {
    const double d = xq - nodes[j];
    if (d == 0.0) return T(f[j]);
    double w = (j % 2) ? -1.0 : 1.0;
    if (j == 0 || j == n - 1) w *= 0.5;
    num += T(f[j]) * (w / d);
    den += w / d;
  }
  return T(num / den);
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // rms residual
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, "fit_line: need at least two samples");
  const Eigen::Index n = static_cast<Eigen::Index>(x.size());
  Mat A(n, 2);
  Vec b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    A(i, 0) = x[i];
    A(i, 1) = 1.0;
    b[i] = y[i];
  }
  const Vec c = A.colPivHouseholderQr().solve(b);
  const Vec r = A * c - b;
  return {c[0], c[1], std::sqrt(r.squaredNorm() / double(n))};
}

// General least squares with an arbitrary design matrix.
inline Vec least_squares(const Mat& A, const Vec& b) { return A.colPivHouseholderQr().solve(b); }

// Central difference with one Richardson extrapolation step.
template <class F>
auto richardson_derivative(F&& f, double x, double h) {
  auto d = [&](double s) { return (f(x + s) - f(x - s)) / (2.0 * s); };
  return (4.0 * d(0.5 * h) - d(h)) / 3.0;
}

// Roots of sum_k c_k x^k (ascending coefficients) via the companion matrix.
inline std::vector<cplx> polynomial_roots(std::vector<double> c) {
  while (c.size() > 1 && c.back() == 0.0) c.pop_back();
  if (c.size() <= 1) return {};
  Eigen::VectorXd coeffs = Eigen::Map<Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
  Eigen::PolynomialSolver<double, Eigen::Dynamic> solver;
  solver.compute(coeffs);
  std::vector<cplx> out;
  for (Eigen::Index i = 0; i < solver.roots().size(); ++i) out.push_back(solver.roots()[i]);
  return out;
}

inline double polyval(const std::vector<double>& c, double x) {
  double s = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) s = s * x + *it;
  return s;
}

// Bracketed root by TOMS 748; requires a sign change on [a,b].
template <class F>
double bracket_root(F&& f, double a, double b, int bits = 50, std::uintmax_t max_iter = 200) {
  double fa = f(a), fb = f(b);
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  require(std::signbit(fa) != std::signbit(fb), "bracket_root: no sign change");
  boost::math::tools::eps_tolerance<double> tol(bits);
  auto r = boost::math::tools::toms748_solve(f, a, b, fa, fb, tol, max_iter);
  return 0.5 * (r.first + r.second);
}

// Generalized eigenproblem L v = lambda B v through LAPACK zggev.
struct GenEigResult {
  std::vector<cplx> alpha;
  std::vector<cplx> beta;
  CMat vectors;  // right eigenvectors (columns), empty unless requested
};

inline GenEigResult generalized_eigen(CMat L, CMat B, bool want_vectors) {
  require(L.rows() == L.cols() && B.rows() == L.rows() && B.cols() == L.cols(), "generalized_eigen: shape");
  const lapack_int n = static_cast<lapack_int>(L.rows());
  GenEigResult out;
  out.alpha.resize(n);
  out.beta.resize(n);
  CMat vr;
  if (want_vectors) vr.resize(n, n);
  cplx dummy{};
  const lapack_int info = LAPACKE_zggev(LAPACK_COL_MAJOR, 'N', want_vectors ? 'V' : 'N', n, L.data(), n, B.data(), n,
                                        out.alpha.data(), out.beta.data(), &dummy, 1,
                                        want_vectors ? vr.data() : &dummy, want_vectors ? n : 1);
  if (info != 0) raise(ErrorCode::SolverFailure, "zggev returned info=" + std::to_string(info));
  out.vectors = std::move(vr);
  return out;
}

// Standard normal samples and uniform samples are drawn by callers from
// std::mt19937_64 so every run is reproducible from a seed.

}  // namespace kds::num

#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#define LAPACK_COMPLEX_CUSTOM
#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

#include "stredalab/model.hpp"

namespace stredalab {

using Eigen::VectorXcd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Eigensolving
// ---------------------------------------------------------------------------

struct BlockSpectrum {
  VectorXd evals;    // ascending
  MatrixXcd evecs;   // columns match evals
  bool full = true;  // full spectrum vs converged partial set
  double converged_below = kInf;  // partial mode: spectrum is complete below this
  int dim = 0;
};

struct Spectrum {
  BlockSpectrum up, down;
  const BlockSpectrum& block(int spin) const { return spin > 0 ? up : down; }
  BlockSpectrum& block(int spin) { return spin > 0 ? up : down; }

  /// Merged eigenvalues: ascending, spin up before down on ties.
  std::vector<std::pair<double, int>> merged() const {
    std::vector<std::pair<double, int>> m;
    m.reserve(up.evals.size() + down.evals.size());
    for (int i = 0; i < up.evals.size(); ++i) m.emplace_back(up.evals[i], +1);
    for (int i = 0; i < down.evals.size(); ++i) m.emplace_back(down.evals[i], -1);
    std::stable_sort(m.begin(), m.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first < b.first;
      return a.second > b.second;
    });
    return m;
  }
  double min_eval() const {
    double m = kInf;
    if (up.evals.size()) m = std::min(m, up.evals[0]);
    if (down.evals.size()) m = std::min(m, down.evals[0]);
    return m;
  }
};

namespace detail {

/// Deterministic phase convention: largest-magnitude entry real positive.
inline void fix_column_phases(MatrixXcd& V) {
  for (int c = 0; c < V.cols(); ++c) {
    int lead = 0;
    double best = 0.0;
    for (int r = 0; r < V.rows(); ++r) {
      const double a = std::abs(V(r, c));
      if (a > best + 1e-12) {
        best = a;
        lead = r;
      }
    }
    const Complex z = V(lead, c);
    if (std::abs(z) > 0) V.col(c) *= std::conj(z) / std::abs(z);
  }
}

}  // namespace detail

/// Full dense Hermitian eigendecomposition (LAPACK zheevd).
inline BlockSpectrum dense_eigensolve(const MatrixXcd& A) {
  const int n = static_cast<int>(A.rows());
  const double herm = (A - A.adjoint()).cwiseAbs().maxCoeff();
  const double scale = std::max(1e-300, A.cwiseAbs().maxCoeff());
  if (herm > 1e-10 * scale) throw std::invalid_argument("eigensolve: non-Hermitian input");
  BlockSpectrum s;
  s.dim = n;
  s.evecs = A;
  s.evals.resize(n);
  const int info = LAPACKE_zheevd(LAPACK_COL_MAJOR, 'V', 'L', n,
                                  reinterpret_cast<lapack_complex_double*>(s.evecs.data()), n,
                                  s.evals.data());
  if (info != 0) throw std::runtime_error("eigensolve: zheevd failed, info=" + std::to_string(info));
  detail::fix_column_phases(s.evecs);
  return s;
}

inline BlockSpectrum dense_eigensolve(const SparseOp& A) {
  return dense_eigensolve(MatrixXcd(A));
}

/// Lanczos with full reorthogonalization: converges every eigenpair below
/// `until_energy` plus a few above it (to expose the gap edge). Suited to
/// low-lying spectra of large sparse blocks.
inline BlockSpectrum lanczos_lowest(const SparseOp& A, double until_energy,
                                    int max_iter = 2500, double tol = 1e-10,
                                    unsigned seed = 12345) {
  const int n = static_cast<int>(A.rows());
  const int m_max = std::min(n, max_iter);
  MatrixXcd V(n, m_max);
  std::vector<double> alpha, beta;  // beta[k] links v_k and v_{k+1}
  std::mt19937 rng(seed);
  std::normal_distribution<double> gauss;
  VectorXcd v(n);
  for (int i = 0; i < n; ++i) v[i] = Complex(gauss(rng), gauss(rng));
  v.normalize();
  V.col(0) = v;

  auto tridiag_eig = [&](int m, VectorXd& theta, Eigen::MatrixXd& S) {
    theta.resize(m);
    std::vector<double> d(alpha.begin(), alpha.begin() + m);
    std::vector<double> e(m > 1 ? m - 1 : 1);
    for (int i = 0; i + 1 < m; ++i) e[i] = beta[i];
    S.resize(m, m);
    const int info = LAPACKE_dstev(LAPACK_COL_MAJOR, 'V', m, d.data(), e.data(), S.data(), m);
    if (info != 0) throw std::runtime_error("lanczos: dstev failed");
    for (int i = 0; i < m; ++i) theta[i] = d[i];
  };

  int m = 0;
  int stable_count = -1, stable_runs = 0;
  VectorXd theta;
  Eigen::MatrixXd S;
  bool done = false;
  while (m < m_max && !done) {
    // one Lanczos step
    VectorXcd w = A * V.col(m);
    if (m > 0) w -= beta[m - 1] * V.col(m - 1);
    const double a = std::real(V.col(m).dot(w));
    alpha.push_back(a);
    w -= a * V.col(m);
    // full reorthogonalization, twice
    for (int pass = 0; pass < 2; ++pass)
      w -= V.leftCols(m + 1) * (V.leftCols(m + 1).adjoint() * w);
    double b = w.norm();
    if (b < 1e-13) {
      // invariant subspace hit; restart with a fresh random direction. The
      // true coupling between the exhausted block and the new one is zero,
      // so the tridiagonal matrix gets a zero off-diagonal entry here.
      for (int i = 0; i < n; ++i) w[i] = Complex(gauss(rng), gauss(rng));
      for (int pass = 0; pass < 2; ++pass)
        w -= V.leftCols(m + 1) * (V.leftCols(m + 1).adjoint() * w);
      b = w.norm();
      if (b < 1e-13) {  // space exhausted
        ++m;
        beta.push_back(0.0);
        break;
      }
      beta.push_back(0.0);
      ++m;
      if (m < m_max) V.col(m) = w / b;
      continue;
    }
    beta.push_back(b);
    ++m;
    if (m < m_max) V.col(m) = w / b;

    if (m % 25 != 0 && m < m_max) continue;
    tridiag_eig(m, theta, S);
    const double bm = beta[m - 1];
    // converged Ritz pairs, lowest first
    int nconv = 0;
    while (nconv < m && bm * std::abs(S(m - 1, nconv)) <= tol * std::max(1.0, std::abs(theta[nconv])))
      ++nconv;
    int below = 0;
    while (below < nconv && theta[below] < until_energy) ++below;
    const bool edge_covered = nconv >= below + 2 || nconv == m;
    if (edge_covered && below > 0) {
      if (below == stable_count)
        ++stable_runs;
      else {
        stable_count = below;
        stable_runs = 0;
      }
      if (stable_runs >= 2) done = true;
    } else if (edge_covered && below == 0 && nconv >= 2) {
      done = true;  // nothing below the target energy
    }
  }
  if (alpha.empty()) throw std::runtime_error("lanczos: no iterations performed");
  tridiag_eig(m, theta, S);
  const double bm = beta[m - 1];
  int nconv = 0;
  while (nconv < m && bm * std::abs(S(m - 1, nconv)) <= tol * std::max(1.0, std::abs(theta[nconv])))
    ++nconv;
  if (nconv == 0) throw std::runtime_error("lanczos: no converged eigenpairs");
  int below = 0;
  while (below < nconv && theta[below] < until_energy) ++below;
  const int keep = std::min(nconv, below + 3);
  BlockSpectrum s;
  s.dim = n;
  s.full = false;
  s.evals.resize(keep);
  for (int i = 0; i < keep; ++i) s.evals[i] = theta[i];
  s.evecs = V.leftCols(m) * S.leftCols(keep);
  s.converged_below = keep < nconv ? theta[keep] : theta[nconv - 1];
  detail::fix_column_phases(s.evecs);
  return s;
}

enum class EigMode { automatic, dense, lanczos };

struct EigOptions {
  EigMode mode = EigMode::automatic;
  int dense_cutoff = 20000;      // per spin block
  double lanczos_until = 0.0;    // converge spectrum below this energy
  double lanczos_margin = 1.0;   // extra margin above the target energy
  int lanczos_max_iter = 2500;
  double tol = 1e-10;
};

/// Full or partial spectrum of both spin blocks.
inline Spectrum eigensolve(const Hamiltonian& H, const EigOptions& opt = {}) {
  Spectrum s;
  for (int spin : {+1, -1}) {
    const SparseOp& B = H.block(spin);
    EigMode mode = opt.mode;
    if (mode == EigMode::automatic)
      mode = B.rows() <= opt.dense_cutoff ? EigMode::dense : EigMode::lanczos;
    if (mode == EigMode::dense)
      s.block(spin) = dense_eigensolve(B);
    else
      s.block(spin) = lanczos_lowest(B, opt.lanczos_until + opt.lanczos_margin,
                                     opt.lanczos_max_iter, opt.tol);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Gap detection and Fermi projection
// ---------------------------------------------------------------------------

struct GapInfo {
  double E_F = 0.0;
  double gap_lower = -kInf;
  double gap_upper = kInf;
  int rank_below = 0;
  double width() const { return gap_upper - gap_lower; }
};

inline GapInfo detect_gap(const Spectrum& s, double E_F) {
  GapInfo gi;
  gi.E_F = E_F;
  for (int spin : {+1, -1}) {
    const BlockSpectrum& b = s.block(spin);
    if (!b.full && b.converged_below < E_F)
      throw std::runtime_error("detect_gap: partial spectrum does not reach E_F");
    for (int i = 0; i < b.evals.size(); ++i) {
      const double l = b.evals[i];
      if (std::abs(l - E_F) <= 1e-10) throw std::runtime_error("detect_gap: E_F inside spectrum");
      if (l < E_F) {
        gi.rank_below++;
        gi.gap_lower = std::max(gi.gap_lower, l);
      } else {
        gi.gap_upper = std::min(gi.gap_upper, l);
      }
    }
  }
  return gi;
}

/// Pi = sum_{lambda < E_F} v v^dag stored as per-block orthonormal factors.
struct BlockProjection {
  MatrixXcd U;  // dim x rank
  int dim = 0;
  int rank() const { return static_cast<int>(U.cols()); }
  MatrixXcd dense() const {
    if (rank() == 0) return MatrixXcd::Zero(dim, dim);
    return U * U.adjoint();
  }
  MatrixXcd apply(const MatrixXcd& X) const {
    if (rank() == 0) return MatrixXcd::Zero(X.rows(), X.cols());
    return U * (U.adjoint() * X);
  }
};

struct Projection {
  BlockProjection up, down;
  const BlockProjection& block(int spin) const { return spin > 0 ? up : down; }
  BlockProjection& block(int spin) { return spin > 0 ? up : down; }
  int rank() const { return up.rank() + down.rank(); }
};

inline Projection fermi_projection(const Spectrum& s, const GapInfo& gap) {
  Projection p;
  for (int spin : {+1, -1}) {
    const BlockSpectrum& b = s.block(spin);
    int r = 0;
    while (r < b.evals.size() && b.evals[r] < gap.E_F) ++r;
    p.block(spin).dim = b.dim;
    p.block(spin).U = b.evecs.leftCols(r);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Contours and Riesz projections
// ---------------------------------------------------------------------------

/// Discretized positively-oriented closed contour: quadrature of a \oint dw.
struct Contour {
  VectorXcd nodes;
  VectorXcd weights;
  double enclosed_lo = 0.0, enclosed_hi = 0.0;  // real interval surrounded
  bool encloses(double lambda) const { return lambda > enclosed_lo && lambda < enclosed_hi; }
};

namespace detail {

/// Gauss-Legendre nodes and weights on [-1, 1].
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.resize(n);
  w.resize(n);
  for (int i = 0; i < n; ++i) {
    double t = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double p0 = 1, p1 = 0, dp = 0;
    for (int it = 0; it < 100; ++it) {
      p0 = 1;
      p1 = 0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2 * j + 1) * t * p1 - j * p2) / (j + 1);
      }
      dp = n * (t * p0 - p1) / (t * t - 1);
      const double dt = p0 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-15) break;
    }
    x[i] = t;
    w[i] = 2.0 / ((1 - t * t) * dp * dp);
  }
}

}  // namespace detail

/// Rectangle with corners re in {left, right}, im in {-half, +half}.
/// Vertical sides carry sinh-graded Gauss-Legendre nodes clustered toward
/// their real-axis crossings, where the spectrum comes closest; horizontal
/// sides carry plain Gauss-Legendre. Positively oriented.
inline Contour rectangle_contour(double re_left, double re_right, double im_half, int n_nodes,
                                 double grading = 4.0) {
  if (n_nodes < 16) throw std::invalid_argument("contour: need at least 16 nodes");
  if (!(re_right > re_left) || !(im_half > 0))
    throw std::invalid_argument("contour: degenerate rectangle");
  const int nv = (3 * n_nodes) / 8;
  const int nh = (n_nodes - 2 * nv) / 2;
  std::vector<double> xv, wv, xh, wh;
  detail::gauss_legendre(nv, xv, wv);
  detail::gauss_legendre(std::max(nh, 2), xh, wh);
  Contour c;
  std::vector<Complex> nodes, weights;
  const double sh = std::sinh(grading);
  auto add_vertical = [&](double re, int dir) {
    for (int i = 0; i < nv; ++i) {
      const double t = xv[i] * dir;
      const double im = im_half * std::sinh(grading * t) / sh;
      const double dim = im_half * grading * std::cosh(grading * t) / sh;
      nodes.emplace_back(re, im);
      weights.emplace_back(Complex(0, dir * dim * wv[i]));
    }
  };
  auto add_horizontal = [&](double im, int dir) {
    for (size_t i = 0; i < xh.size(); ++i) {
      const double t = xh[i] * dir;
      nodes.emplace_back(0.5 * (re_left + re_right) + 0.5 * (re_right - re_left) * t, im);
      weights.emplace_back(Complex(dir * 0.5 * (re_right - re_left) * wh[i], 0));
    }
  };
  add_horizontal(-im_half, +1);
  add_vertical(re_right, +1);
  add_horizontal(+im_half, -1);
  add_vertical(re_left, -1);
  c.nodes = Eigen::Map<VectorXcd>(nodes.data(), nodes.size());
  c.weights = Eigen::Map<VectorXcd>(weights.data(), weights.size());
  c.enclosed_lo = re_left;
  c.enclosed_hi = re_right;
  return c;
}

/// Positively-oriented circle; uniform trapezoid nodes (spectrally accurate
/// for the periodic parametrization).
inline Contour circle_contour(Complex center, double radius, int n_nodes) {
  if (n_nodes < 16) throw std::invalid_argument("contour: need at least 16 nodes");
  if (!(radius > 0)) throw std::invalid_argument("contour: radius must be > 0");
  Contour c;
  c.nodes.resize(n_nodes);
  c.weights.resize(n_nodes);
  for (int k = 0; k < n_nodes; ++k) {
    const double t = kTwoPi * (k + 0.5) / n_nodes;
    const Complex e = std::exp(Complex(0.0, t));
    c.nodes[k] = center + radius * e;
    c.weights[k] = Complex(0.0, 1.0) * radius * e * (kTwoPi / n_nodes);
  }
  c.enclosed_lo = center.real() - radius;
  c.enclosed_hi = center.real() + radius;
  return c;
}

/// Contour surrounding all eigenvalues below E_F: vertical sides at E_F and
/// lambda_min - 1, horizontal sides at +-(gap_width/2 + 1).
inline Contour build_contour(const GapInfo& gap, const Spectrum& spec, int n_nodes = 128) {
  if (!std::isfinite(gap.gap_lower))
    throw std::invalid_argument("build_contour: degenerate gap (nothing below E_F)");
  const double lam_min = spec.min_eval();
  const double width = std::isfinite(gap.gap_upper) ? gap.width() : 2.0;
  Contour c = rectangle_contour(lam_min - 1.0, gap.E_F, 0.5 * width + 1.0, n_nodes);
  // invariant: nodes at distance >= gap_width/4 from the spectrum
  for (int k = 0; k < c.nodes.size(); ++k) {
    double dmin = kInf;
    for (auto [l, s] : spec.merged()) dmin = std::min(dmin, std::abs(c.nodes[k] - Complex(l, 0)));
    if (dmin < 0.25 * width - 1e-12)
      throw std::runtime_error("build_contour: node too close to spectrum");
  }
  return c;
}

// ---------------------------------------------------------------------------
// Resolvent machinery (single block, dense or sparse)
// ---------------------------------------------------------------------------

/// (H - w)^{-1} A by factorized solve; refuses near-singular shifts.
inline MatrixXcd resolvent_apply(const MatrixXcd& H, Complex w, const MatrixXcd& A) {
  const int n = static_cast<int>(H.rows());
  MatrixXcd M = H - w * MatrixXcd::Identity(n, n);
  Eigen::PartialPivLU<MatrixXcd> lu(M);
  MatrixXcd X = lu.solve(A);
  // LU solves are backward stable, so a near-singular shift shows up as a
  // huge solution rather than a bad residual.
  if (!(X.norm() <= 1e8 * std::max(1e-300, A.norm())))
    throw std::runtime_error("resolvent_apply: shift too close to spectrum");
  const double resid = (M * X - A).norm();
  if (!(resid <= 1e-8 * std::max(1.0, X.norm()) * std::max(1.0, M.norm())))
    throw std::runtime_error("resolvent_apply: solve failed");
  return X;
}

/// Reusable factorization of (H - w) for a sparse block.
class SparseResolvent {
 public:
  SparseResolvent(const SparseOp& H, Complex w) {
    SparseOp I(H.rows(), H.cols());
    I.setIdentity();
    SparseOp M = SparseOp(H - w * I);
    solver_.compute(M);
    if (solver_.info() != Eigen::Success)
      throw std::runtime_error("SparseResolvent: factorization failed");
  }
  MatrixXcd apply(const MatrixXcd& A) const { return solver_.solve(A); }

 private:
  Eigen::SparseLU<SparseOp> solver_;
};

/// Riesz projection (i/2pi) \oint dw (H - w)^{-1} of one dense block.
inline MatrixXcd riesz_projection_block(const MatrixXcd& H, const Contour& contour) {
  const int n = static_cast<int>(H.rows());
  MatrixXcd acc = MatrixXcd::Zero(n, n);
  const MatrixXcd I = MatrixXcd::Identity(n, n);
  for (int k = 0; k < contour.nodes.size(); ++k) {
    Eigen::PartialPivLU<MatrixXcd> lu(H - contour.nodes[k] * I);
    acc += contour.weights[k] * lu.solve(I);
  }
  return Complex(0.0, 1.0 / kTwoPi) * acc;
}

/// Riesz projection of both spin blocks of a Hamiltonian, dense.
inline std::pair<MatrixXcd, MatrixXcd> riesz_projection(const Hamiltonian& H,
                                                        const Contour& contour) {
  return {riesz_projection_block(MatrixXcd(H.block(+1)), contour),
          riesz_projection_block(MatrixXcd(H.block(-1)), contour)};
}

// ---------------------------------------------------------------------------
// Off-diagonal parts and the Liouvillian inverse
// ---------------------------------------------------------------------------

/// A^OD = Pi A Pi^perp + Pi^perp A Pi for a dense projection.
inline MatrixXcd offdiagonal_part(const MatrixXcd& A, const MatrixXcd& Pi) {
  MatrixXcd PA = Pi * A, AP = A * Pi, PAP = PA * Pi;
  return PA + AP - 2.0 * PAP;
}

inline MatrixXcd diagonal_part(const MatrixXcd& A, const MatrixXcd& Pi) {
  return A - offdiagonal_part(A, Pi);
}

/// C = (i/2pi) \oint dw R_w A^OD R_w, the unique off-diagonal solution of
/// [H, C] = [A, Pi]; quadrature route.
inline MatrixXcd liouvillian_solve(const MatrixXcd& H, const Contour& contour,
                                   const MatrixXcd& A, const MatrixXcd& Pi) {
  const int n = static_cast<int>(H.rows());
  const MatrixXcd Aod = offdiagonal_part(A, Pi);
  MatrixXcd acc = MatrixXcd::Zero(n, n);
  const MatrixXcd I = MatrixXcd::Identity(n, n);
  for (int k = 0; k < contour.nodes.size(); ++k) {
    Eigen::PartialPivLU<MatrixXcd> lu(H - contour.nodes[k] * I);
    MatrixXcd R = lu.solve(I);
    acc += contour.weights[k] * (R * Aod * R);
  }
  return Complex(0.0, 1.0 / kTwoPi) * acc;
}

/// Independent spectral-basis route: C_{nm} = [A, Pi]_{nm} / (lambda_n - lambda_m)
/// on the off-diagonal blocks.
inline MatrixXcd liouvillian_solve_spectral(const BlockSpectrum& s, int rank_below,
                                            const MatrixXcd& A) {
  const int n = static_cast<int>(s.evals.size());
  MatrixXcd At = s.evecs.adjoint() * A * s.evecs;
  MatrixXcd C = MatrixXcd::Zero(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      const bool occ_a = a < rank_below, occ_b = b < rank_below;
      if (occ_a == occ_b) continue;
      // [A, Pi]_{ab} = At_{ab} (chi_b - chi_a)
      const double comm = (occ_b ? 1.0 : 0.0) - (occ_a ? 1.0 : 0.0);
      C(a, b) = At(a, b) * comm / (s.evals[a] - s.evals[b]);
    }
  return s.evecs * C * s.evecs.adjoint();
}

/// T_{A1,A2} = (1/2pi) \oint dw { R (i[H,A1]) R (i[H,A2]) R - (1 <-> 2) };
/// satisfies -i [[Pi,A1],[Pi,A2]] = Pi T Pi - Pi^perp T Pi^perp.
inline MatrixXcd double_commutator_T(const MatrixXcd& H, const Contour& contour,
                                     const MatrixXcd& A1, const MatrixXcd& A2) {
  const int n = static_cast<int>(H.rows());
  const Complex iu(0.0, 1.0);
  const MatrixXcd C1 = iu * (H * A1 - A1 * H);
  const MatrixXcd C2 = iu * (H * A2 - A2 * H);
  MatrixXcd acc = MatrixXcd::Zero(n, n);
  const MatrixXcd I = MatrixXcd::Identity(n, n);
  for (int k = 0; k < contour.nodes.size(); ++k) {
    Eigen::PartialPivLU<MatrixXcd> lu(H - contour.nodes[k] * I);
    MatrixXcd R = lu.solve(I);
    acc += contour.weights[k] * (R * C1 * R * C2 * R - R * C2 * R * C1 * R);
  }
  return acc / kTwoPi;
}

}  // namespace stredalab

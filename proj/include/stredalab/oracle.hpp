#pragma once

#include <functional>
#include <numeric>

#include "stredalab/spectral.hpp"

namespace stredalab {

// ---------------------------------------------------------------------------
// Momentum-space Chern numbers (Fukui-Hatsugai)
// ---------------------------------------------------------------------------

/// Bloch Hamiltonian family over the magnetic Brillouin zone
/// [0, 2pi/q) x [0, 2pi), sampled on an N1 x N2 grid.
struct BlochGrid {
  int q = 1;
  int N1 = 6;
  int N2 = 6;
  std::function<MatrixXcd(double k1, double k2)> factory;

  void validate() const {
    if (N1 < 6 || N2 < 6) throw std::invalid_argument("BlochGrid: need N1, N2 >= 6");
    if (!factory) throw std::invalid_argument("BlochGrid: missing factory");
  }
};

/// Lattice field-strength construction over link variables of the filled-band
/// projector; returns an exact integer. The plaquette-sum residual against
/// that integer is written to *residual when provided.
///
/// The factory must be 2 pi periodic in both arguments. k1 is swept over the
/// full period (q * N1 points) rather than one magnetic Brillouin zone:
/// H(k1 + 2 pi / q) is only unitarily equivalent to H(k1), so index-wrapping
/// the reduced zone would sew the seam with mismatched frames. The Berry
/// curvature repeats exactly q times across the full period, so the integer
/// plaquette total is q * Ch and the division below is exact.
inline int fukui_hatsugai_chern(const BlochGrid& bloch, int bands_filled,
                                double* residual = nullptr) {
  bloch.validate();
  if (bands_filled < 1) throw std::invalid_argument("fukui_hatsugai: bands_filled must be >= 1");
  const int N1 = bloch.q * bloch.N1, N2 = bloch.N2;
  std::vector<MatrixXcd> frames(static_cast<size_t>(N1) * N2);
  for (int i = 0; i < N1; ++i)
    for (int j = 0; j < N2; ++j) {
      const double k1 = kTwoPi * i / N1;
      const double k2 = kTwoPi * j / N2;
      BlockSpectrum s = dense_eigensolve(bloch.factory(k1, k2));
      if (bands_filled > s.evals.size())
        throw std::invalid_argument("fukui_hatsugai: filling above the top band");
      // all bands filled is allowed (trivial projector, Ch = 0); otherwise
      // the chosen filling must be gapped on the whole grid
      if (bands_filled < s.evals.size() &&
          s.evals[bands_filled] - s.evals[bands_filled - 1] < 1e-10)
        throw std::runtime_error("fukui_hatsugai: gap closing on grid");
      frames[static_cast<size_t>(i) * N2 + j] = s.evecs.leftCols(bands_filled);
    }
  auto at = [&](int i, int j) -> const MatrixXcd& {
    return frames[static_cast<size_t>((i + N1) % N1) * N2 + (j + N2) % N2];
  };
  auto link = [&](int i, int j, int di, int dj) {
    const Complex d = (at(i, j).adjoint() * at(i + di, j + dj)).determinant();
    if (std::abs(d) < 1e-8)
      throw std::runtime_error("fukui_hatsugai: degenerate link (gap closing on grid)");
    return d / std::abs(d);
  };
  double total = 0.0;
  for (int i = 0; i < N1; ++i)
    for (int j = 0; j < N2; ++j) {
      const Complex plaq =
          link(i, j, 1, 0) * link(i + 1, j, 0, 1) / (link(i, j + 1, 1, 0) * link(i, j, 0, 1));
      total += std::arg(plaq);  // field strength in (-pi, pi]
    }
  const double ch = total / (kTwoPi * bloch.q);
  const int rounded = static_cast<int>(std::lround(ch));
  if (residual) *residual = std::abs(ch - rounded);
  if (std::abs(ch - rounded) > 1e-6)
    throw std::runtime_error("fukui_hatsugai: plaquette sum does not round to an integer");
  return rounded;
}

// ---------------------------------------------------------------------------
// Hofstadter magnetic Bloch factory
// ---------------------------------------------------------------------------

/// q x q magnetic Bloch matrix of the square-lattice hopping model with flux
/// 2 pi p / q per plaquette, matching the torus builder: the symmetric-gauge
/// torus Hamiltonian is gauge-equivalent to the Landau-gauge one with plain
/// periodic boundary conditions (the cocycles cancel when q divides the side),
/// whose Bloch reduction is the Harper matrix below. x0 is the coordinate of
/// the first grid column, carried over so the k2 offset matches exactly.
inline BlochGrid hofstadter_bloch(int p, int q, int N1, int N2, double x0 = 0.0) {
  if (q < 1) throw std::invalid_argument("hofstadter_bloch: q must be >= 1");
  if (std::gcd(std::abs(p), q) != 1 && p != 0)
    throw std::invalid_argument("hofstadter_bloch: p/q not in lowest terms");
  BlochGrid b;
  b.q = q;
  b.N1 = N1;
  b.N2 = N2;
  const double phi = kTwoPi * p / q;
  b.factory = [q, phi, x0](double k1, double k2) {
    MatrixXcd H = MatrixXcd::Zero(q, q);
    for (int a = 0; a < q; ++a) {
      H(a, a) = -2.0 * std::cos(k2 - phi * (x0 + a));
      const int an = (a + 1) % q;
      H(a, an) += -std::exp(Complex(0.0, k1));
      H(an, a) += -std::exp(Complex(0.0, -k1));
    }
    return H;
  };
  return b;
}

// ---------------------------------------------------------------------------
// Analytic Landau reference
// ---------------------------------------------------------------------------

struct LandauReference {
  double isdos = 0.0;
  double sch = 0.0;
};

/// Free Landau levels at field B with fillings nu_up/nu_down: level degeneracy
/// is B/2pi per unit area, so isdos = (1/2)(nu_up - nu_down) B/2pi and
/// sch = (nu_up - nu_down)/2. Satisfies d(isdos)/dB = sch/2pi identically.
inline LandauReference landau_reference(double B, int nu_up, int nu_down) {
  if (B <= 0.0) throw std::invalid_argument("landau_reference: B must be > 0");
  LandauReference r;
  r.isdos = 0.5 * (nu_up - nu_down) * B / kTwoPi;
  r.sch = 0.5 * (nu_up - nu_down);
  return r;
}

// ---------------------------------------------------------------------------
// Brute-force operator identities on random gapped matrices
// ---------------------------------------------------------------------------

struct IdentityReport {
  double liouvillian_residual = 0.0;    // ||[H, I(A^OD)] - [A, Pi]||
  double uniqueness_residual = 0.0;     // quadrature vs spectral-basis solution
  double double_comm_residual = 0.0;    // -i[[Pi,A1],[Pi,A2]] vs Pi T Pi - Pp T Pp
  double trace_residual = 0.0;          // |tr Pi [[Pi,D1],[Pi,D2]] Pi|, D_j diagonal
  int dim = 0;
  double gap_width = 0.0;
};

namespace detail {

inline MatrixXcd random_hermitian(int dim, std::mt19937& rng, double scale = 1.0) {
  std::normal_distribution<double> gauss;
  MatrixXcd A(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) A(i, j) = Complex(gauss(rng), gauss(rng));
  return scale * 0.5 * (A + A.adjoint().eval());
}

}  // namespace detail

/// Random gapped Hermitian matrix with random bounded A1, A2; checks the
/// Liouvillian identity, off-diagonal uniqueness, the double-commutator
/// identity, and the global commutator-trace nullity.
inline IdentityReport brute_force_identities(int dim, unsigned seed, int contour_nodes = 128) {
  if (dim < 2 || dim > 200)
    throw std::invalid_argument("brute_force_identities: dim must be in [2, 200]");
  std::mt19937 rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));  // O(1) spectral span
  // spectrum with an enforced gap: diagonalize, push eigenvalues apart
  BlockSpectrum base = dense_eigensolve(detail::random_hermitian(dim, rng, scale));
  const int r = dim / 2;
  const double gap = 1.0;
  VectorXd evals = base.evals;
  const double split = 0.5 * (evals[r - 1] + evals[r]);
  for (int i = 0; i < dim; ++i) evals[i] += (i < r ? -0.5 : 0.5) * gap;
  const MatrixXcd H = base.evecs * evals.asDiagonal() * base.evecs.adjoint();
  const double E_F = split;
  const MatrixXcd Pi = base.evecs.leftCols(r) * base.evecs.leftCols(r).adjoint();
  const Contour contour = rectangle_contour(evals[0] - 1.0, E_F, 0.5 * gap + 1.0, contour_nodes);

  const MatrixXcd A1 = detail::random_hermitian(dim, rng, scale);
  const MatrixXcd A2 = detail::random_hermitian(dim, rng, scale);

  IdentityReport rep;
  rep.dim = dim;
  rep.gap_width = evals[r] - evals[r - 1];

  // (a) Liouvillian identity
  const MatrixXcd C = liouvillian_solve(H, contour, A1, Pi);
  const MatrixXcd lhs = H * C - C * H;
  const MatrixXcd rhs = A1 * Pi - Pi * A1;
  rep.liouvillian_residual = (lhs - rhs).norm();

  // (b) off-diagonal uniqueness: independent spectral-basis construction
  BlockSpectrum s;
  s.evals = evals;
  s.evecs = base.evecs;
  s.dim = dim;
  const MatrixXcd C_spec = liouvillian_solve_spectral(s, r, A1);
  rep.uniqueness_residual = (C - C_spec).norm();

  // (c) double-commutator identity
  const MatrixXcd T = double_commutator_T(H, contour, A1, A2);
  const MatrixXcd K1 = Pi * A1 - A1 * Pi;
  const MatrixXcd K2 = Pi * A2 - A2 * Pi;
  const MatrixXcd lhs_dc = Complex(0, -1) * (K1 * K2 - K2 * K1);
  const MatrixXcd Pp = MatrixXcd::Identity(dim, dim) - Pi;
  const MatrixXcd rhs_dc = Pi * T * Pi - Pp * T * Pp;
  rep.double_comm_residual = (lhs_dc - rhs_dc).norm();

  // (d) global marker-trace nullity. This needs commuting observables (the
  // role played by the position operators): use random real diagonals.
  std::normal_distribution<double> gauss;
  MatrixXcd D1 = MatrixXcd::Zero(dim, dim), D2 = MatrixXcd::Zero(dim, dim);
  for (int i = 0; i < dim; ++i) {
    D1(i, i) = gauss(rng);
    D2(i, i) = gauss(rng);
  }
  const MatrixXcd L1 = Pi * D1 - D1 * Pi;
  const MatrixXcd L2 = Pi * D2 - D2 * Pi;
  rep.trace_residual = std::abs((Pi * (L1 * L2 - L2 * L1) * Pi).trace());
  return rep;
}

}  // namespace stredalab

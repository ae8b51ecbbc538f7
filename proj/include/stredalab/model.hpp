#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "stredalab/geometry.hpp"

namespace stredalab {

using Complex = std::complex<double>;
using SparseOp = Eigen::SparseMatrix<Complex>;
using Eigen::MatrixXcd;
using Eigen::VectorXd;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Declarative description of the model: backend, potential, spin-orbit,
/// fields, geometry, discretization.
struct HamiltonianSpec {
  Backend backend = Backend::tightbinding;
  double v1 = 0.0;
  double v2 = 0.0;
  double soc_strength = 0.0;
  double zeeman_coupling = 0.0;
  double B1 = 0.0;
  double B2 = 0.0;
  int half_width_L = 1;
  int points_per_cell = 8;
  Boundary boundary = Boundary::dirichlet;
  double tb_flux_per_plaquette = 0.0;  // units of 2*pi
  double tb_spin_flux_offset = 0.0;    // per-spin flux asymmetry, units of 2*pi

  void validate() const {
    if (!std::isfinite(v1) || !std::isfinite(v2))
      throw std::invalid_argument("spec: potential amplitudes must be finite");
    if (!std::isfinite(B1) || !std::isfinite(B2) || !std::isfinite(soc_strength) ||
        !std::isfinite(zeeman_coupling))
      throw std::invalid_argument("spec: couplings must be finite");
    if (half_width_L < 1) throw std::invalid_argument("spec: half_width_L must be >= 1");
    if (backend == Backend::continuum && points_per_cell < 4)
      throw std::invalid_argument("spec: points_per_cell must be >= 4");
  }

  Geometry geometry() const {
    Geometry g;
    g.boundary = boundary;
    if (backend == Backend::continuum) {
      g.h = 1.0 / points_per_cell;
      g.nx = g.ny = 2 * half_width_L * points_per_cell;
    } else {
      g.h = 1.0;
      g.nx = g.ny = 2 * half_width_L;
    }
    g.x0 = -half_width_L + g.h;
    g.y0 = -half_width_L + g.h;
    return g;
  }

  /// Effective magnetic field seen by one spin sector (spin = +1 / -1).
  double effective_field(int spin) const {
    if (backend == Backend::continuum) return B2;
    return kTwoPi * (tb_flux_per_plaquette + spin * tb_spin_flux_offset) + B2;
  }

  /// On-site Zeeman shift of one spin sector: 2 B1 zeeman * s^z.
  double zeeman_shift(int spin) const { return spin * B1 * zeeman_coupling; }

  /// Canonical serialization, used as cache key.
  std::string canonical_string() const;
};

/// A spinful operator with conserved s^z: two independent scalar blocks on
/// the same grid. kernel_scale converts matrix elements to kernel values.
struct BlockPair {
  SparseOp up, down;
  const SparseOp& block(int spin) const { return spin > 0 ? up : down; }
  SparseOp& block(int spin) { return spin > 0 ? up : down; }
};

struct Hamiltonian {
  HamiltonianSpec spec;
  Geometry geom;
  BlockPair blocks;
  double kernel_scale = 1.0;  // grid cell area h^2
  const SparseOp& block(int spin) const { return blocks.block(spin); }
  int block_dim() const { return geom.n_sites(); }
  int dimension() const { return 2 * geom.n_sites(); }
};

namespace detail {

inline void check_torus_flux(const Geometry& g, double beff, const char* who) {
  if (g.boundary != Boundary::torus) return;
  const double total = beff * g.period_x() * g.period_y();
  const double m = total / kTwoPi;
  if (std::abs(m - std::round(m)) > 1e-9)
    throw std::invalid_argument(std::string(who) +
                                ": torus flux not quantized (B * area not a multiple of 2*pi)");
}

// Symmetric-gauge vector potential A = (beff/2) * (-y, x).
inline double gauge_A(double beff, int axis, double x, double y) {
  return axis == 0 ? -0.5 * beff * y : 0.5 * beff * x;
}

// Forward hop x -> x + h e_axis; returns target site and accumulated
// magnetic boundary phase (torus) or -1 when the hop leaves the open box.
inline int hop_target(const Geometry& g, double beff, int i, int j, int axis,
                      Complex& boundary_phase) {
  boundary_phase = Complex(1.0, 0.0);
  int ti = i + (axis == 0 ? 1 : 0);
  int tj = j + (axis == 1 ? 1 : 0);
  if (ti < g.nx && tj < g.ny) return g.index(ti, tj);
  if (g.boundary == Boundary::dirichlet) return -1;
  const double xs = g.x0 + i * g.h;
  const double ys = g.y0 + j * g.h;
  if (ti == g.nx) {
    // psi(x + a1) = exp(i B x2 Mx / 2) psi(x)
    boundary_phase = std::exp(Complex(0.0, 0.5 * beff * ys * g.period_x()));
    ti = 0;
  }
  if (tj == g.ny) {
    // psi(x + a2) = exp(-i B x1 My / 2) psi(x)
    boundary_phase = boundary_phase * std::exp(Complex(0.0, -0.5 * beff * xs * g.period_y()));
    tj = 0;
  }
  return g.index(ti, tj);
}

}  // namespace detail

/// Discretized magnetic momentum P_axis for one spin sector: central
/// difference of -i d/dx_axis with symmetric-gauge link phases (midpoint
/// rule, exact for a linear gauge) plus an optional diagonal term.
inline SparseOp momentum_block(const Geometry& g, double beff, int axis,
                               const VectorXd* diagonal = nullptr) {
  detail::check_torus_flux(g, beff, "momentum_block");
  const int n = g.n_sites();
  std::vector<Eigen::Triplet<Complex>> trip;
  trip.reserve(4 * n);
  const Complex coeff(0.0, -1.0 / (2.0 * g.h));
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const int s = g.index(i, j);
      const double xs = g.x0 + i * g.h;
      const double ys = g.y0 + j * g.h;
      Complex bphase;
      const int t = detail::hop_target(g, beff, i, j, axis, bphase);
      if (t < 0) continue;
      const double mx = xs + (axis == 0 ? 0.5 * g.h : 0.0);
      const double my = ys + (axis == 1 ? 0.5 * g.h : 0.0);
      const double theta = g.h * detail::gauge_A(beff, axis, mx, my);
      const Complex v = coeff * std::exp(Complex(0.0, -theta)) * bphase;
      trip.emplace_back(s, t, v);
      trip.emplace_back(t, s, std::conj(v));
    }
  if (diagonal) {
    for (int s = 0; s < n; ++s)
      if ((*diagonal)[s] != 0.0) trip.emplace_back(s, s, Complex((*diagonal)[s], 0.0));
  }
  SparseOp P(n, n);
  P.setFromTriplets(trip.begin(), trip.end());
  return P;
}

/// Nearest-neighbor hopping matrix (amplitude -1) with Peierls link phases
/// for a uniform field beff per unit area, plus a real diagonal.
inline SparseOp hopping_block(const Geometry& g, double beff, const VectorXd& diagonal) {
  detail::check_torus_flux(g, beff, "hopping_block");
  const int n = g.n_sites();
  std::vector<Eigen::Triplet<Complex>> trip;
  trip.reserve(5 * n);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const int s = g.index(i, j);
      const double xs = g.x0 + i * g.h;
      const double ys = g.y0 + j * g.h;
      for (int axis = 0; axis < 2; ++axis) {
        Complex bphase;
        const int t = detail::hop_target(g, beff, i, j, axis, bphase);
        if (t < 0) continue;
        const double mx = xs + (axis == 0 ? 0.5 * g.h : 0.0);
        const double my = ys + (axis == 1 ? 0.5 * g.h : 0.0);
        const double theta = g.h * detail::gauge_A(beff, axis, mx, my);
        const Complex v = -std::exp(Complex(0.0, -theta)) * bphase;
        trip.emplace_back(s, t, v);
        trip.emplace_back(t, s, std::conj(v));
      }
      trip.emplace_back(s, s, Complex(diagonal[s], 0.0));
    }
  SparseOp H(n, n);
  H.setFromTriplets(trip.begin(), trip.end());
  return H;
}

/// Default potential V(x) = v1 cos(2 pi x1) + v2 cos(2 pi x2).
inline double default_potential(const HamiltonianSpec& spec, double x, double y) {
  return spec.v1 * std::cos(kTwoPi * x) + spec.v2 * std::cos(kTwoPi * y);
}

/// (-d2 V, d1 V) for the default potential.
inline Eigen::Vector2d default_potential_perp_grad(const HamiltonianSpec& spec, double x,
                                                   double y) {
  return {kTwoPi * spec.v2 * std::sin(kTwoPi * y), -kTwoPi * spec.v1 * std::sin(kTwoPi * x)};
}

/// Covariant 5-point kinetic term (1/2) sum_j D_j^dag D_j with magnetic link
/// phases: hard-wall Dirichlet keeps the full diagonal 2/h^2 so deleted links
/// act as a true wall. Unlike the square of the central-difference momentum,
/// this dispersion has a single valley (no spurious doubler states), and it
/// satisfies i[H, X_j] = P_j exactly in the bulk for the central-difference
/// momentum.
inline SparseOp kinetic_block(const Geometry& g, double beff) {
  detail::check_torus_flux(g, beff, "kinetic_block");
  const int n = g.n_sites();
  std::vector<Eigen::Triplet<Complex>> trip;
  trip.reserve(5 * n);
  const double w = 0.5 / (g.h * g.h);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const int s = g.index(i, j);
      const double xs = g.x0 + i * g.h;
      const double ys = g.y0 + j * g.h;
      trip.emplace_back(s, s, Complex(4.0 * w, 0.0));
      for (int axis = 0; axis < 2; ++axis) {
        Complex bphase;
        const int t = detail::hop_target(g, beff, i, j, axis, bphase);
        if (t < 0) continue;
        const double mx = xs + (axis == 0 ? 0.5 * g.h : 0.0);
        const double my = ys + (axis == 1 ? 0.5 * g.h : 0.0);
        const double theta = g.h * detail::gauge_A(beff, axis, mx, my);
        const Complex v = -w * std::exp(Complex(0.0, -theta)) * bphase;
        trip.emplace_back(s, t, v);
        trip.emplace_back(t, s, std::conj(v));
      }
    }
  SparseOp K(n, n);
  K.setFromTriplets(trip.begin(), trip.end());
  return K;
}

/// One spin sector of the continuum Hamiltonian with arbitrary potential
/// callables; used by the standard builder and by structural tests.
/// H = (1/2) P(B)^2 + V + zeeman with P(B) = p - A + S_soc expanded as
/// kinetic + (1/2){P_j, S_j} + (1/2) S_j^2, where S_j is the diagonal
/// spin-orbit term of the momentum.
inline SparseOp continuum_block(const Geometry& g, double beff, int spin, double soc,
                                double zeeman_shift,
                                const std::function<double(double, double)>& V,
                                const std::function<Eigen::Vector2d(double, double)>& perp_grad) {
  const int n = g.n_sites();
  VectorXd soc1(n), soc2(n), vdiag(n);
  for (int s = 0; s < n; ++s) {
    const auto pg = perp_grad(g.x(s), g.y(s));
    soc1[s] = spin * 0.25 * soc * pg[0];
    soc2[s] = spin * 0.25 * soc * pg[1];
    vdiag[s] = V(g.x(s), g.y(s)) + zeeman_shift +
               0.5 * (soc1[s] * soc1[s] + soc2[s] * soc2[s]);
  }
  SparseOp H = kinetic_block(g, beff);
  if (soc != 0.0) {
    for (int axis = 0; axis < 2; ++axis) {
      SparseOp P = momentum_block(g, beff, axis);
      const VectorXd& sd = axis == 0 ? soc1 : soc2;
      SparseOp S(n, n);
      std::vector<Eigen::Triplet<Complex>> st;
      for (int s = 0; s < n; ++s)
        if (sd[s] != 0.0) st.emplace_back(s, s, Complex(sd[s], 0.0));
      S.setFromTriplets(st.begin(), st.end());
      H = SparseOp(H + SparseOp(0.5 * (SparseOp(P * S) + SparseOp(S * P))));
    }
  }
  std::vector<Eigen::Triplet<Complex>> trip;
  for (int s = 0; s < n; ++s) trip.emplace_back(s, s, Complex(vdiag[s], 0.0));
  SparseOp D(n, n);
  D.setFromTriplets(trip.begin(), trip.end());
  return SparseOp(H + D);
}

/// H = (1/2) P(B2)^2 + V + 2 B1 zeeman S^z on the grid, both spin blocks.
inline Hamiltonian build_continuum_hamiltonian(const HamiltonianSpec& spec) {
  spec.validate();
  if (spec.backend != Backend::continuum)
    throw std::invalid_argument("build_continuum_hamiltonian: backend must be continuum");
  Hamiltonian H;
  H.spec = spec;
  H.geom = spec.geometry();
  H.kernel_scale = H.geom.cell_area();
  auto V = [&spec](double x, double y) { return default_potential(spec, x, y); };
  auto pg = [&spec](double x, double y) { return default_potential_perp_grad(spec, x, y); };
  for (int spin : {+1, -1})
    H.blocks.block(spin) = continuum_block(H.geom, spec.effective_field(spin), spin,
                                           spec.soc_strength, spec.zeeman_shift(spin), V, pg);
  return H;
}

/// Square-lattice surrogate: nearest-neighbor hopping -1, per-spin Peierls
/// flux 2 pi (flux + s * offset) + B2 per plaquette, on-site Zeeman.
inline Hamiltonian build_tightbinding_hamiltonian(const HamiltonianSpec& spec) {
  spec.validate();
  if (spec.backend != Backend::tightbinding)
    throw std::invalid_argument("build_tightbinding_hamiltonian: backend must be tightbinding");
  Hamiltonian H;
  H.spec = spec;
  H.geom = spec.geometry();
  H.kernel_scale = 1.0;
  const int n = H.geom.n_sites();
  for (int spin : {+1, -1}) {
    VectorXd diag = VectorXd::Constant(n, spec.zeeman_shift(spin));
    H.blocks.block(spin) = hopping_block(H.geom, spec.effective_field(spin), diag);
  }
  return H;
}

inline Hamiltonian build_hamiltonian(const HamiltonianSpec& spec) {
  return spec.backend == Backend::continuum ? build_continuum_hamiltonian(spec)
                                            : build_tightbinding_hamiltonian(spec);
}

/// Diagonal position operators; refuses on the torus where position is
/// ill-defined.
inline std::pair<VectorXd, VectorXd> position_operators(const Geometry& g) {
  if (g.boundary == Boundary::torus)
    throw std::invalid_argument("position operator undefined on torus");
  const int n = g.n_sites();
  VectorXd x1(n), x2(n);
  for (int s = 0; s < n; ++s) {
    x1[s] = g.x(s);
    x2[s] = g.y(s);
  }
  return {x1, x2};
}

/// P_1, P_2 for both spin sectors, on the same discretization as the
/// Hamiltonian builders.
inline std::pair<BlockPair, BlockPair> momentum_operators(const HamiltonianSpec& spec) {
  spec.validate();
  const Geometry g = spec.geometry();
  BlockPair P1, P2;
  for (int spin : {+1, -1}) {
    const double beff = spec.effective_field(spin);
    if (spec.backend == Backend::continuum) {
      const int n = g.n_sites();
      VectorXd soc1(n), soc2(n);
      for (int s = 0; s < n; ++s) {
        const auto pg = default_potential_perp_grad(spec, g.x(s), g.y(s));
        soc1[s] = spin * 0.25 * spec.soc_strength * pg[0];
        soc2[s] = spin * 0.25 * spec.soc_strength * pg[1];
      }
      P1.block(spin) = momentum_block(g, beff, 0, &soc1);
      P2.block(spin) = momentum_block(g, beff, 1, &soc2);
    } else {
      // lattice current operator i[H, X_j] written per link: each forward hop
      // carries displacement +1 along its axis, which also holds across the
      // torus seam where the bare coordinate difference would be wrong
      const int n = g.n_sites();
      std::vector<Eigen::Triplet<Complex>> t1, t2;
      for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
          const int s = g.index(i, j);
          const double xs = g.x0 + i * g.h;
          const double ys = g.y0 + j * g.h;
          for (int axis = 0; axis < 2; ++axis) {
            Complex bphase;
            const int t = detail::hop_target(g, beff, i, j, axis, bphase);
            if (t < 0) continue;
            const double mx = xs + (axis == 0 ? 0.5 * g.h : 0.0);
            const double my = ys + (axis == 1 ? 0.5 * g.h : 0.0);
            const double theta = g.h * detail::gauge_A(beff, axis, mx, my);
            const Complex hop = -std::exp(Complex(0.0, -theta)) * bphase;  // H(s, t)
            const Complex v = Complex(0.0, 1.0) * hop;  // i * H(s,t) * (X_t - X_s)
            auto& trip = axis == 0 ? t1 : t2;
            trip.emplace_back(s, t, v);
            trip.emplace_back(t, s, std::conj(v));
          }
        }
      P1.block(spin).resize(n, n);
      P2.block(spin).resize(n, n);
      P1.block(spin).setFromTriplets(t1.begin(), t1.end());
      P2.block(spin).setFromTriplets(t2.begin(), t2.end());
    }
  }
  return {P1, P2};
}

/// Unitary magnetic translation by n unit cells on the torus (symmetric
/// gauge cocycle). Commutes with every covariant operator at quantized flux.
inline SparseOp magnetic_translation(const Geometry& g, double beff, int n1_cells,
                                     int n2_cells) {
  if (g.boundary != Boundary::torus)
    throw std::invalid_argument("magnetic_translation: torus geometry required");
  const double steps1 = n1_cells / g.h;
  const double steps2 = n2_cells / g.h;
  if (std::abs(steps1 - std::round(steps1)) > 1e-9 ||
      std::abs(steps2 - std::round(steps2)) > 1e-9)
    throw std::invalid_argument("magnetic_translation: translation incommensurate with grid");
  const int s1 = static_cast<int>(std::round(steps1));
  const int s2 = static_cast<int>(std::round(steps2));
  const int n = g.n_sites();
  std::vector<Eigen::Triplet<Complex>> trip;
  trip.reserve(n);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const int row = g.index(i, j);
      const double xr = g.x0 + i * g.h;
      const double yr = g.y0 + j * g.h;
      // phase of the plane translation
      double phase = 0.5 * beff * (yr * n1_cells - xr * n2_cells);
      // unwrap x - n back into the fundamental domain
      int ii = i - s1, jj = j - s2;
      double zx = xr - n1_cells, zy = yr - n2_cells;
      while (ii < 0) {
        // psi(u - a1) = exp(-i B u2 Mx / 2) psi(u), u = z + a1
        zx += g.period_x();
        ii += g.nx;
        phase += -0.5 * beff * zy * g.period_x();
      }
      while (ii >= g.nx) {
        zx -= g.period_x();
        ii -= g.nx;
        phase += 0.5 * beff * zy * g.period_x();
      }
      while (jj < 0) {
        // psi(u - a2) = exp(+i B u1 My / 2) psi(u), u = z + a2
        zy += g.period_y();
        jj += g.ny;
        phase += 0.5 * beff * zx * g.period_y();
      }
      while (jj >= g.ny) {
        zy -= g.period_y();
        jj -= g.ny;
        phase += -0.5 * beff * zx * g.period_y();
      }
      trip.emplace_back(row, g.index(ii, jj), std::exp(Complex(0.0, phase)));
    }
  SparseOp T(n, n);
  T.setFromTriplets(trip.begin(), trip.end());
  return T;
}

/// Max entrywise residual of magnetic covariance of a kernel under
/// translation by n unit cells, relative to the largest kernel entry.
inline double covariance_check(const SparseOp& K, const Geometry& g, double beff,
                               int n1_cells, int n2_cells) {
  SparseOp T = magnetic_translation(g, beff, n1_cells, n2_cells);
  SparseOp shifted = SparseOp(T * SparseOp(K * SparseOp(T.adjoint())));
  SparseOp diff = SparseOp(shifted - K);
  double num = 0.0, den = 0.0;
  for (int k = 0; k < diff.outerSize(); ++k)
    for (SparseOp::InnerIterator it(diff, k); it; ++it)
      num = std::max(num, std::abs(it.value()));
  for (int k = 0; k < K.outerSize(); ++k)
    for (SparseOp::InnerIterator it(K, k); it; ++it) den = std::max(den, std::abs(it.value()));
  return den > 0 ? num / den : num;
}

/// Relative hermiticity residual max|A - A^dag| / max|A|.
inline double hermiticity_residual(const SparseOp& A) {
  SparseOp diff = SparseOp(A - SparseOp(A.adjoint()));
  double num = 0.0, den = 0.0;
  for (int k = 0; k < diff.outerSize(); ++k)
    for (SparseOp::InnerIterator it(diff, k); it; ++it)
      num = std::max(num, std::abs(it.value()));
  for (int k = 0; k < A.outerSize(); ++k)
    for (SparseOp::InnerIterator it(A, k); it; ++it) den = std::max(den, std::abs(it.value()));
  return den > 0 ? num / den : num;
}

inline std::string HamiltonianSpec::canonical_string() const {
  auto f = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  std::string s;
  s += backend == Backend::continuum ? "continuum;" : "tightbinding;";
  s += "v1=" + f(v1) + ";v2=" + f(v2) + ";soc=" + f(soc_strength) +
       ";zee=" + f(zeeman_coupling) + ";B1=" + f(B1) + ";B2=" + f(B2) +
       ";L=" + std::to_string(half_width_L) + ";n=" + std::to_string(points_per_cell) +
       ";bc=" + (boundary == Boundary::torus ? "torus" : "dirichlet") +
       ";flux=" + f(tb_flux_per_plaquette) + ";offset=" + f(tb_spin_flux_offset);
  return s;
}

}  // namespace stredalab

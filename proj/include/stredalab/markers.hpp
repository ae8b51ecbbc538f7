#pragma once

#include <cmath>
#include <limits>

#include "stredalab/spectral.hpp"

namespace stredalab {

// ---------------------------------------------------------------------------
// Trace per unit volume and integrated spin density of states
// ---------------------------------------------------------------------------

/// tau(A) = (1/|W|) sum_{x in W, s} A(x,s; x,s) * cell measure. With matrix
/// elements A_{xy} and kernel A(x;y) = A_{xy}/h^2 the two h^2 factors cancel:
/// tau = sum of window diagonal entries / window area.
inline double trace_per_unit_volume(const MatrixXcd& A_up, const MatrixXcd& A_down,
                                    const BulkWindow& w) {
  Complex acc = 0.0;
  for (int s : w.sites) acc += A_up(s, s) + A_down(s, s);
  if (std::abs(acc.imag()) > 1e-8 * std::max(1.0, std::abs(acc.real())))
    throw std::runtime_error("trace_per_unit_volume: non-real diagonal sum");
  return acc.real() / w.area;
}

inline double trace_per_unit_volume(const BlockPair& A, const BulkWindow& w) {
  Complex acc = 0.0;
  for (int spin : {+1, -1})
    for (int s : w.sites) acc += A.block(spin).coeff(s, s);
  if (std::abs(acc.imag()) > 1e-8 * std::max(1.0, std::abs(acc.real())))
    throw std::runtime_error("trace_per_unit_volume: non-real diagonal sum");
  return acc.real() / w.area;
}

/// Window trace of one spin block of a low-rank projection:
/// sum_{x in W} Pi(x,x) = sum_{x in W} |U(x,:)|^2.
inline double block_window_trace(const BlockProjection& p, const BulkWindow& w) {
  if (p.rank() == 0) return 0.0;
  double acc = 0.0;
  for (int s : w.sites) acc += p.U.row(s).squaredNorm();
  return acc;
}

inline double trace_per_unit_volume(const Projection& p, const BulkWindow& w) {
  return (block_window_trace(p.up, w) + block_window_trace(p.down, w)) / w.area;
}

/// IsDOS = tau(S^z Pi) = (1/2)(tau(Pi^up) - tau(Pi^down)).
inline double isdos(const Projection& p, const BulkWindow& w) {
  return 0.5 * (block_window_trace(p.up, w) - block_window_trace(p.down, w)) / w.area;
}

// ---------------------------------------------------------------------------
// Chern and spin Chern markers
// ---------------------------------------------------------------------------

/// Chern marker of one spin block: Ch = 2 pi i tau(Pi [[X1,Pi],[X2,Pi]] Pi).
/// With Pi = U U^dag and G_j := U^dag X_j U the sandwiched double commutator
/// collapses to U [G1, G2] U^dag (X1, X2 commute), so only the rank-sized
/// commutator and window rows of U are needed.
inline double chern_marker_block(const BlockProjection& p, const VectorXd& x1,
                                 const VectorXd& x2, const BulkWindow& w) {
  if (p.rank() == 0) return 0.0;
  const MatrixXcd G1 = p.U.adjoint() * x1.asDiagonal() * p.U;
  const MatrixXcd G2 = p.U.adjoint() * x2.asDiagonal() * p.U;
  const MatrixXcd K = G1 * G2 - G2 * G1;  // anti-Hermitian
  Complex tr = 0.0;
  for (int s : w.sites) tr += (p.U.row(s) * K * p.U.row(s).adjoint())(0, 0);
  const Complex ch = Complex(0.0, kTwoPi) * tr / w.area;
  if (std::abs(ch.imag()) > 1e-8 * std::max(1.0, std::abs(ch.real())))
    throw std::runtime_error("chern_marker: non-real marker value");
  return ch.real();
}

/// Chern marker of the full (spinful) projection: sum of the block markers.
inline double chern_marker(const Projection& p, const VectorXd& x1, const VectorXd& x2,
                           const BulkWindow& w) {
  return chern_marker_block(p.up, x1, x2, w) + chern_marker_block(p.down, x1, x2, w);
}

/// SCh = 2 pi i tau(S^z Pi [[X1,Pi],[X2,Pi]] Pi). Since the stored projection
/// commutes with S^z by construction, the S^z weight (+-1/2 per spin site sum)
/// makes this identically (Ch_up - Ch_down)/2.
inline double spin_chern_marker(const Projection& p, const VectorXd& x1, const VectorXd& x2,
                                const BulkWindow& w) {
  return 0.5 * (chern_marker_block(p.up, x1, x2, w) - chern_marker_block(p.down, x1, x2, w));
}

/// Pi^{up/down} = P^{up/down} Pi P^{up/down}: the stored blocks themselves.
inline std::pair<BlockProjection, BlockProjection> spin_decompose(const Projection& p) {
  return {p.up, p.down};
}

// ---------------------------------------------------------------------------
// Time reversal
// ---------------------------------------------------------------------------

/// Fermionic time reversal Theta = i (1 x sigma^y) K maps the spin blocks as
/// Theta Pi Theta^{-1} = diag(conj(Pi_down), conj(Pi_up)). Returns
/// max(||Theta Pi Theta^{-1} - Pi||, |Ch_up + Ch_down|). Refuses at B != 0.
inline double time_reversal_check(const HamiltonianSpec& spec, const Projection& p,
                                  const VectorXd& x1, const VectorXd& x2,
                                  const BulkWindow& w) {
  if (spec.B1 != 0.0 || spec.B2 != 0.0 || spec.tb_flux_per_plaquette != 0.0)
    throw std::invalid_argument("time_reversal_check: requires B = 0");
  const MatrixXcd diff = p.up.dense() - p.down.dense().conjugate();
  const double op_resid = diff.norm();
  const double marker_sum = std::abs(chern_marker_block(p.up, x1, x2, w) +
                                     chern_marker_block(p.down, x1, x2, w));
  return std::max(op_resid, marker_sum);
}

// ---------------------------------------------------------------------------
// Kernel decay diagnostics
// ---------------------------------------------------------------------------

struct DecayFit {
  double alpha = 0.0;  // decay rate; +inf sentinel for exactly diagonal kernels
  double C = 0.0;      // prefactor
  double r2 = 0.0;     // log-linear fit quality
};

/// Bins the max kernel norm of Pi(x;y) by |x - y| using rows anchored at the
/// sample center, then fits log(max) ~ log(C) - alpha * d on distances in
/// [d_min, d_max]. Gapless inputs show up as a bad fit (r2 < 0.5), flagged by
/// the caller rather than fatal here.
inline DecayFit kernel_decay_profile(const Projection& p, const Geometry& g,
                                     double d_min = 2.0, double d_max = 0.0) {
  if (d_max <= 0.0) d_max = 0.5 * g.nx * g.h;
  const double bin_w = std::max(g.h, 0.25);
  const int n_bins = static_cast<int>(std::ceil(d_max / bin_w)) + 1;
  std::vector<double> bin_max(n_bins, 0.0);
  // anchor rows: sites within one bin width of the grid center
  const double cx = g.x0 + 0.5 * (g.nx - 1) * g.h;
  const double cy = g.y0 + 0.5 * (g.ny - 1) * g.h;
  std::vector<int> anchors;
  for (int s = 0; s < g.n_sites(); ++s)
    if (std::abs(g.x(s) - cx) <= 0.5 * bin_w + 1e-12 &&
        std::abs(g.y(s) - cy) <= 0.5 * bin_w + 1e-12)
      anchors.push_back(s);
  const double scale = 1.0 / g.cell_area();  // matrix element -> kernel value
  for (int spin : {+1, -1}) {
    const BlockProjection& b = p.block(spin);
    if (b.rank() == 0) continue;
    for (int a : anchors) {
      const VectorXcd row = b.U * b.U.row(a).adjoint();  // Pi(y, a) for all y
      for (int y = 0; y < row.size(); ++y) {
        const double dx = g.x(y) - g.x(a), dy = g.y(y) - g.y(a);
        const double d = std::hypot(dx, dy);
        if (d > d_max) continue;
        const int bin = static_cast<int>(d / bin_w);
        bin_max[bin] = std::max(bin_max[bin], std::abs(row[y]) * scale);
      }
    }
  }
  // collect fit points: bin centers in [d_min, d_max], above rounding floor
  std::vector<double> ds, ls;
  for (int b = 0; b < n_bins; ++b) {
    const double d = (b + 0.5) * bin_w;
    if (d < d_min || d > d_max) continue;
    if (bin_max[b] > 1e-13) {
      ds.push_back(d);
      ls.push_back(std::log(bin_max[b]));
    }
  }
  DecayFit fit;
  if (ds.size() < 3) {
    // off-diagonal kernel below floor everywhere: exactly diagonal case
    bool all_zero = true;
    for (int b = 1; b < n_bins; ++b)
      if (bin_max[b] > 1e-13) all_zero = false;
    if (all_zero) {
      fit.alpha = std::numeric_limits<double>::infinity();
      fit.C = bin_max[0];
      fit.r2 = 1.0;
    }
    return fit;
  }
  const int n = static_cast<int>(ds.size());
  double sd = 0, sl = 0, sdd = 0, sdl = 0, sll = 0;
  for (int i = 0; i < n; ++i) {
    sd += ds[i];
    sl += ls[i];
    sdd += ds[i] * ds[i];
    sdl += ds[i] * ls[i];
    sll += ls[i] * ls[i];
  }
  const double cov = sdl - sd * sl / n;
  const double var_d = sdd - sd * sd / n;
  const double var_l = sll - sl * sl / n;
  const double slope = cov / var_d;
  fit.alpha = -slope;
  fit.C = std::exp(sl / n - slope * sd / n);
  fit.r2 = var_l > 0 ? cov * cov / (var_d * var_l) : 1.0;
  return fit;
}

// ---------------------------------------------------------------------------
// Marker report
// ---------------------------------------------------------------------------

struct MarkerReport {
  double isdos = 0.0;
  double ch_up = 0.0;
  double ch_down = 0.0;
  double sch = 0.0;
  int nearest_int_up = 0;
  int nearest_int_down = 0;
  double quantization_residual = 0.0;
  double decay_rate_alpha = 0.0;
  double decay_fit_r2 = 0.0;
};

inline MarkerReport compute_marker_report(const Projection& p, const Geometry& g,
                                          const BulkWindow& w) {
  auto [x1, x2] = position_operators(g);
  MarkerReport r;
  r.isdos = isdos(p, w);
  r.ch_up = chern_marker_block(p.up, x1, x2, w);
  r.ch_down = chern_marker_block(p.down, x1, x2, w);
  r.sch = 0.5 * (r.ch_up - r.ch_down);
  r.nearest_int_up = static_cast<int>(std::lround(r.ch_up));
  r.nearest_int_down = static_cast<int>(std::lround(r.ch_down));
  r.quantization_residual = std::max(std::abs(r.ch_up - r.nearest_int_up),
                                     std::abs(r.ch_down - r.nearest_int_down));
  const DecayFit fit = kernel_decay_profile(p, g);
  r.decay_rate_alpha = fit.alpha;
  r.decay_fit_r2 = fit.r2;
  return r;
}

}  // namespace stredalab

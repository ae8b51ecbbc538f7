#include <catch2/catch_amalgamated.hpp>

#include "stredalab/model.hpp"
#include "stredalab/spectral.hpp"

using namespace stredalab;

namespace {

HamiltonianSpec continuum_spec(double v1, double v2, double B2, Boundary bc, int L, int n) {
  HamiltonianSpec s;
  s.backend = Backend::continuum;
  s.v1 = v1;
  s.v2 = v2;
  s.B2 = B2;
  s.half_width_L = L;
  s.points_per_cell = n;
  s.boundary = bc;
  return s;
}

}  // namespace

TEST_CASE("free continuum torus: ground state at zero, spin blocks identical", "[model]") {
  auto spec = continuum_spec(0, 0, 0, Boundary::torus, 1, 16);
  Hamiltonian H = build_continuum_hamiltonian(spec);
  REQUIRE(hermiticity_residual(H.block(+1)) < 1e-12);
  REQUIRE((MatrixXcd(H.block(+1)) - MatrixXcd(H.block(-1))).cwiseAbs().maxCoeff() == 0.0);
  BlockSpectrum s = dense_eigensolve(H.block(+1));
  REQUIRE(std::abs(s.evals[0]) < 1e-10);
}

TEST_CASE("zeeman coupling shifts the spin sectors by exactly 2B", "[model]") {
  auto spec = continuum_spec(0, 0, 0, Boundary::torus, 1, 8);
  spec.B1 = 0.37;
  spec.zeeman_coupling = 1.0;
  Hamiltonian H = build_continuum_hamiltonian(spec);
  BlockSpectrum up = dense_eigensolve(H.block(+1));
  BlockSpectrum dn = dense_eigensolve(H.block(-1));
  VectorXd diff = up.evals - dn.evals;
  for (int i = 0; i < diff.size(); ++i) REQUIRE(diff[i] == Catch::Approx(2 * 0.37).margin(1e-12));
}

TEST_CASE("structural checks: hermiticity and exact spin conservation", "[model]") {
  auto spec = continuum_spec(1, 1, 0.3, Boundary::dirichlet, 2, 12);
  spec.soc_strength = 1.0;
  Hamiltonian H = build_continuum_hamiltonian(spec);
  REQUIRE(hermiticity_residual(H.block(+1)) < 1e-12);
  REQUIRE(hermiticity_residual(H.block(-1)) < 1e-12);
  // spin blocks are built independently; the (up,down) entries of the full
  // operator are zero by construction, hence [H, S^z] = 0 exactly.
}

TEST_CASE("tight-binding flux 0: standard band in [-4, 4]", "[model]") {
  HamiltonianSpec spec;
  spec.backend = Backend::tightbinding;
  spec.half_width_L = 6;
  spec.boundary = Boundary::torus;
  Hamiltonian H = build_tightbinding_hamiltonian(spec);
  BlockSpectrum s = dense_eigensolve(H.block(+1));
  REQUIRE(s.evals.minCoeff() >= -4.0 - 1e-12);
  REQUIRE(s.evals.maxCoeff() <= 4.0 + 1e-12);
  REQUIRE(s.evals.minCoeff() == Catch::Approx(-4.0).margin(1e-10));  // k = 0 state on torus
}

TEST_CASE("tight-binding spin-flux offset: opposite fluxes, identical spectra", "[model]") {
  HamiltonianSpec spec;
  spec.backend = Backend::tightbinding;
  spec.half_width_L = 5;
  spec.boundary = Boundary::dirichlet;
  spec.tb_spin_flux_offset = 0.17;
  Hamiltonian H = build_tightbinding_hamiltonian(spec);
  // down block is the complex conjugate of the up block
  REQUIRE((MatrixXcd(H.block(-1)) - MatrixXcd(H.block(+1)).conjugate()).cwiseAbs().maxCoeff() <
          1e-13);
  BlockSpectrum up = dense_eigensolve(H.block(+1));
  BlockSpectrum dn = dense_eigensolve(H.block(-1));
  REQUIRE((up.evals - dn.evals).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("torus flux quantization is enforced", "[model]") {
  HamiltonianSpec spec;
  spec.backend = Backend::tightbinding;
  spec.half_width_L = 3;
  spec.boundary = Boundary::torus;
  spec.tb_flux_per_plaquette = 0.1;  // 0.1 * 36 plaquettes = 3.6 flux quanta
  REQUIRE_THROWS_AS(build_tightbinding_hamiltonian(spec), std::invalid_argument);
  spec.tb_flux_per_plaquette = 1.0 / 6.0;  // 6 flux quanta through the torus
  REQUIRE_NOTHROW(build_tightbinding_hamiltonian(spec));
}

TEST_CASE("position operators: diagonal, refuse torus", "[model]") {
  auto spec = continuum_spec(0, 0, 0, Boundary::dirichlet, 1, 4);
  Geometry g = spec.geometry();
  auto [x1, x2] = position_operators(g);
  REQUIRE(x1.size() == g.n_sites());
  REQUIRE(x1.minCoeff() == Catch::Approx(g.x0));
  Geometry torus = g;
  torus.boundary = Boundary::torus;
  REQUIRE_THROWS_WITH(position_operators(torus), "position operator undefined on torus");
}

TEST_CASE("free momentum on torus matches low plane-wave modes", "[model]") {
  auto spec = continuum_spec(0, 0, 0, Boundary::torus, 1, 16);
  auto [P1, P2] = momentum_operators(spec);
  REQUIRE(hermiticity_residual(P1.up) < 1e-12);
  BlockSpectrum s = dense_eigensolve(P1.up);
  // plane waves e^{i k x}, k = 2 pi m / (2L) = pi m; discrete eigenvalue sin(kh)/h
  const double h = 1.0 / 16;
  for (int m : {0, 1, 2}) {
    const double k = std::numbers::pi * m;
    const double expected = std::sin(k * h) / h;
    double dmin = kInf;
    for (int i = 0; i < s.evals.size(); ++i) dmin = std::min(dmin, std::abs(s.evals[i] - expected));
    REQUIRE(dmin < 1e-10);
    REQUIRE(std::abs(expected - k) <= k * k * k * h * h / 5.0 + 1e-12);  // O(h^2) on low modes
  }
}

TEST_CASE("soc term splits the momentum blocks by the stated diagonal", "[model]") {
  auto spec = continuum_spec(1, 0, 0, Boundary::dirichlet, 1, 8);
  spec.soc_strength = 1.0;
  auto [P1, P2] = momentum_operators(spec);
  Geometry g = spec.geometry();
  MatrixXcd diff = MatrixXcd(P2.up) - MatrixXcd(P2.down);
  // up/down differ by 2 * (1/4) * d1 V on the second component
  for (int s = 0; s < g.n_sites(); ++s) {
    const double d1V = -kTwoPi * std::sin(kTwoPi * g.x(s));
    REQUIRE(std::abs(diff(s, s) - Complex(0.5 * d1V, 0)) < 1e-12);
  }
  diff.diagonal().setZero();
  REQUIRE(diff.cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("i[H, X_1] reproduces P_1 in the bulk", "[model]") {
  auto residual_at = [](int n, double soc) {
    auto spec = continuum_spec(0.5, 0.5, 0.2, Boundary::dirichlet, 1, n);
    spec.soc_strength = soc;
    Hamiltonian H = build_continuum_hamiltonian(spec);
    auto [P1, P2] = momentum_operators(spec);
    Geometry g = spec.geometry();
    auto [x1, x2] = position_operators(g);
    // smooth bump supported away from the boundary
    VectorXcd psi(g.n_sites());
    for (int s = 0; s < g.n_sites(); ++s) {
      const double r2 = g.x(s) * g.x(s) + g.y(s) * g.y(s);
      psi[s] = std::exp(-8.0 * r2);
    }
    psi.normalize();
    VectorXcd hx = H.block(+1) * x1.cast<Complex>().cwiseProduct(psi);
    VectorXcd xh = x1.cast<Complex>().cwiseProduct(VectorXcd(H.block(+1) * psi));
    VectorXcd comm = Complex(0, 1) * (hx - xh);
    return (comm - VectorXcd(P1.up * psi)).norm();
  };
  SECTION("exact lattice identity without spin-orbit") {
    REQUIRE(residual_at(16, 0.0) < 1e-10);
  }
  SECTION("second-order convergence of the spin-orbit cross term") {
    const double r16 = residual_at(16, 1.0), r32 = residual_at(32, 1.0);
    REQUIRE(r32 < r16);
    REQUIRE(r16 / r32 > 2.5);
    REQUIRE(r16 / r32 < 8.0);
  }
}

TEST_CASE("magnetic covariance of built kernels on the torus", "[model]") {
  SECTION("plain periodicity at B = 0") {
    auto spec = continuum_spec(0.8, 0.5, 0, Boundary::torus, 2, 8);
    Hamiltonian H = build_continuum_hamiltonian(spec);
    REQUIRE(covariance_check(H.block(+1), H.geom, 0.0, 1, 0) < 1e-12);
  }
  SECTION("quantized flux") {
    const int L = 2;
    const double B = kTwoPi * 4.0 / ((2 * L) * (2 * L));
    auto spec = continuum_spec(0.8, 0.5, B, Boundary::torus, L, 8);
    Hamiltonian H = build_continuum_hamiltonian(spec);
    REQUIRE(covariance_check(H.block(+1), H.geom, B, 1, 0) < 1e-10);
    REQUIRE(covariance_check(H.block(+1), H.geom, B, 1, 1) < 1e-10);
    REQUIRE(covariance_check(H.block(-1), H.geom, B, 0, 1) < 1e-10);
  }
  SECTION("broken periodicity is flagged") {
    auto spec = continuum_spec(0, 0, 0, Boundary::torus, 2, 8);
    Geometry g = spec.geometry();
    // incommensurate potential: not Z^2-periodic
    auto V = [](double x, double y) { return std::cos(std::numbers::sqrt2 * x + 0.3 * y); };
    auto pg = [](double, double) { return Eigen::Vector2d{0, 0}; };
    SparseOp H = continuum_block(g, 0.0, +1, 0.0, 0.0, V, pg);
    REQUIRE(covariance_check(H, g, 0.0, 1, 0) > 0.01);
  }
}

TEST_CASE("time-reversal pairing: spin blocks conjugate at B = 0", "[model]") {
  auto spec = continuum_spec(0.7, 0.4, 0, Boundary::dirichlet, 1, 8);
  spec.soc_strength = 1.3;
  Hamiltonian H = build_continuum_hamiltonian(spec);
  REQUIRE((MatrixXcd(H.block(-1)) - MatrixXcd(H.block(+1)).conjugate()).cwiseAbs().maxCoeff() <
          1e-12);
}

TEST_CASE("doubling the grid resolution improves eigenvalues at second order", "[model]") {
  auto lowest = [](int n) {
    auto spec = continuum_spec(1.0, 1.0, 0, Boundary::torus, 1, n);
    Hamiltonian H = build_continuum_hamiltonian(spec);
    BlockSpectrum s = dense_eigensolve(H.block(+1));
    return VectorXd(s.evals.head(5));
  };
  VectorXd e8 = lowest(6), e16 = lowest(12), e32 = lowest(24);
  // Richardson: treat the finest values as reference
  for (int i = 0; i < 5; ++i) {
    const double err8 = std::abs(e8[i] - e32[i]);
    const double err16 = std::abs(e16[i] - e32[i]);
    if (err16 < 1e-11) continue;
    const double ratio = err8 / err16;
    REQUIRE(ratio > 2.5);
    REQUIRE(ratio < 8.0);  // coarse grids: pre-asymptotic wobble around 4
  }
}

TEST_CASE("spec validation rejects bad input", "[model]") {
  HamiltonianSpec spec;
  spec.backend = Backend::continuum;
  spec.points_per_cell = 3;
  REQUIRE_THROWS_AS(build_continuum_hamiltonian(spec), std::invalid_argument);
  spec.points_per_cell = 8;
  spec.v1 = std::nan("");
  REQUIRE_THROWS_AS(build_continuum_hamiltonian(spec), std::invalid_argument);
}

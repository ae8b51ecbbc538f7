// Acceptance gate: every headline claim is checked at its stated tolerance,
// one PASS/FAIL line per criterion. Run with a criterion name to execute one,
// or with no arguments to execute all.

#include <chrono>
#include <cstring>
#include <iostream>

#include "stredalab/run.hpp"

using namespace stredalab;

namespace {

double now_s() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

bool emit(const std::string& name, bool pass, const std::string& detail) {
  std::cout << (pass ? "PASS " : "FAIL ") << name << ": " << detail << "\n" << std::flush;
  return pass;
}

std::string num(double v) { return format_number(v, 4); }

HamiltonianSpec tb_spec(int L, double flux, double offset,
                        Boundary b = Boundary::dirichlet) {
  HamiltonianSpec s;
  s.backend = Backend::tightbinding;
  s.half_width_L = L;
  s.boundary = b;
  s.tb_flux_per_plaquette = flux;
  s.tb_spin_flux_offset = offset;
  return s;
}

Projection projection_at(const Hamiltonian& H, double E_F) {
  const Spectrum s = eigensolve(H);
  return fermi_projection(s, detect_gap(s, E_F));
}

// ---------------------------------------------------------------------------
// Gapped fixtures shared by the quantization, Riesz, and decay criteria.
// Expected Chern numbers come from the momentum-space oracle via the
// gap-labeling Diophantine equation.
// ---------------------------------------------------------------------------

struct Fixture {
  const char* name;
  double flux, offset, E_F;
  int L;        // marker evaluation size
  int L_small;  // dense Riesz evaluation size
  int fhs_p, fhs_q, fhs_bands;
};

const Fixture kFixtures[] = {
    {"flux_1/3_lowband", 1.0 / 3.0, 0.0, -1.2, 12, 6, 1, 3, 1},
    {"flux_1/3_twobands", 1.0 / 3.0, 0.0, 1.2, 12, 6, 1, 3, 2},
    {"spin_flux_1/3", 0.0, 1.0 / 3.0, -1.2, 15, 6, 1, 3, 1},
    {"flux_1/5_lowband", 1.0 / 5.0, 0.0, -2.125, 15, 10, 1, 5, 1},
};

// ---------------------------------------------------------------------------
// Criterion 1a: three-way spin Streda identity on the Landau demo
// ---------------------------------------------------------------------------

bool landau_streda() {
  const double t0 = now_s();
  HamiltonianSpec spec;
  spec.backend = Backend::continuum;
  spec.half_width_L = 4;
  spec.points_per_cell = 12;
  spec.v1 = spec.v2 = 0.05;  // small periodic potential on top of the Landau levels
  spec.zeeman_coupling = -1.0;
  spec.boundary = Boundary::dirichlet;
  ResponseOptions opt;
  opt.fermi_energy = 0.0;  // nu_up = 1, nu_down = 0
  opt.contour_nodes = 48;
  opt.eig.mode = EigMode::lanczos;
  // converge only a thin shell above the gap: the gap edge sits at 0.17 on
  // the open sample and 0.78 on the torus twin, both inside the margin once
  // the edge-coverage rule adds its extra converged pairs
  opt.eig.lanczos_margin = 0.4;
  // B = pi/2 keeps the magnetic length well inside the open box; the torus
  // twin then carries 16 flux quanta, so the contour route quantizes cleanly
  const StredaReport r = verify_spin_streda(spec, std::numbers::pi / 2.0, 1e-3, opt);

  const double tol = 5e-2 * std::max(1.0, std::abs(r.sch_over_2pi));
  const double analytic = 0.25 / std::numbers::pi;
  const bool pass = r.residual_streda_fd <= tol && r.residual_streda_kubo <= tol &&
                    std::abs(r.fd_derivative - r.sigma_contour) <= tol &&
                    std::abs(r.fd_derivative - analytic) <= 0.05 * analytic &&
                    std::abs(r.sigma_contour - analytic) <= 0.05 * analytic;
  return emit("streda_landau", pass,
              "fd=" + num(r.fd_derivative) + " sch/2pi=" + num(r.sch_over_2pi) +
                  " sigma=" + num(r.sigma_contour) + " analytic=" + num(analytic) +
                  " tol=" + num(tol) + " t=" + num(now_s() - t0) + "s");
}

// ---------------------------------------------------------------------------
// Criterion 1b: three-way spin Streda identity on the 30x30 spin-flux demo
// ---------------------------------------------------------------------------

bool tb_streda() {
  const double t0 = now_s();
  const HamiltonianSpec spec = tb_spec(15, 0.0, 1.0 / 3.0);
  ResponseOptions opt;
  opt.fermi_energy = -1.2;
  const StredaReport r = verify_spin_streda(spec, 0.0, 1e-3, opt);
  const double tol = 5e-2 * std::max(1.0, std::abs(r.sch_over_2pi));
  const bool pass = r.residual_streda_fd <= tol && r.residual_streda_kubo <= tol &&
                    std::abs(r.fd_derivative - r.sigma_contour) <= tol;
  return emit("streda_tb", pass,
              "fd=" + num(r.fd_derivative) + " sch/2pi=" + num(r.sch_over_2pi) +
                  " sigma=" + num(r.sigma_contour) + " tol=" + num(tol) +
                  " t=" + num(now_s() - t0) + "s");
}

// ---------------------------------------------------------------------------
// Criterion 2: marker quantization against the momentum-space oracle
// ---------------------------------------------------------------------------

bool quantization() {
  bool pass = true;
  double worst_q = 0.0, worst_fhs = 0.0;
  for (const Fixture& f : kFixtures) {
    const Hamiltonian H = build_tightbinding_hamiltonian(tb_spec(f.L, f.flux, f.offset));
    const Projection p = projection_at(H, f.E_F);
    const BulkWindow w = make_central_window(H.geom, 0.25 * f.L);
    const MarkerReport mr = compute_marker_report(p, H.geom, w);
    const int ch_oracle = fukui_hatsugai_chern(
        hofstadter_bloch(f.fhs_p, f.fhs_q, 8, 4 * f.fhs_q), f.fhs_bands);
    const double q_up = std::abs(mr.ch_up - std::lround(mr.ch_up));
    const double q_sch = std::abs(mr.sch - std::lround(2.0 * mr.sch) / 2.0);
    const double fhs_dev = std::abs(mr.ch_up - ch_oracle);
    worst_q = std::max({worst_q, q_up, q_sch});
    worst_fhs = std::max(worst_fhs, fhs_dev);
    if (q_up > 1e-2 || q_sch > 1e-2 || fhs_dev > 5e-2) pass = false;
  }
  return emit("quantization", pass,
              "4 fixtures, worst residual=" + num(worst_q) + " (tol 1e-2), worst |marker-FHS|=" +
                  num(worst_fhs) + " (tol 5e-2)");
}

// ---------------------------------------------------------------------------
// Criterion 3: fermionic time reversal at zero magnetic field
// ---------------------------------------------------------------------------

bool time_reversal() {
  bool pass = true;
  double worst_op = 0.0, worst_int = 0.0;

  {  // continuum with spin-orbit coupling, E_F in the widest low spacing
    HamiltonianSpec spec;
    spec.backend = Backend::continuum;
    spec.half_width_L = 2;
    spec.points_per_cell = 6;
    spec.v1 = 0.7;
    spec.v2 = 0.4;
    spec.soc_strength = 1.3;
    spec.boundary = Boundary::dirichlet;
    const Hamiltonian H = build_continuum_hamiltonian(spec);
    const Spectrum s = eigensolve(H);
    const auto merged = s.merged();
    double E_F = 0.0, best = 0.0;
    for (size_t i = 1; i < merged.size() / 4; ++i) {
      const double d = merged[i].first - merged[i - 1].first;
      if (d > best) {
        best = d;
        E_F = 0.5 * (merged[i].first + merged[i - 1].first);
      }
    }
    const Projection p = fermi_projection(s, detect_gap(s, E_F));
    auto [x1, x2] = position_operators(H.geom);
    const BulkWindow w = make_central_window(H.geom, 0.75);
    // small box with E_F in a level spacing rather than a true bulk gap: the
    // operator symmetry is exact but the marker has no quantization to check
    worst_op = std::max(worst_op, time_reversal_check(spec, p, x1, x2, w));
  }
  {  // tight-binding spin-flux model: Kramers pair of Chern numbers
    const HamiltonianSpec spec = tb_spec(12, 0.0, 1.0 / 3.0);
    const Hamiltonian H = build_tightbinding_hamiltonian(spec);
    const Projection p = projection_at(H, -1.2);
    auto [x1, x2] = position_operators(H.geom);
    const BulkWindow w = make_central_window(H.geom, 4.0);
    const double resid = time_reversal_check(spec, p, x1, x2, w);
    const double sch = spin_chern_marker(p, x1, x2, w);
    worst_op = std::max(worst_op, resid);
    worst_int = std::max(worst_int, std::abs(sch - std::lround(sch)));
  }
  // the returned residual is max(operator residual, |Ch_up + Ch_down|), so
  // one bound at 1e-10 enforces both the 1e-10 and the 1e-6 requirement
  if (worst_op > 1e-10 || worst_int > 1e-2) pass = false;
  return emit("time_reversal", pass,
              "worst operator/marker-sum residual=" + num(worst_op) +
                  " (tol 1e-10), worst SCh off integer=" + num(worst_int) + " (tol 1e-2)");
}

// ---------------------------------------------------------------------------
// Criterion 4: Riesz contour projection vs the spectral projection
// ---------------------------------------------------------------------------

bool riesz() {
  bool pass = true;
  double worst_diff = 0.0, worst_idem = 0.0;
  for (const Fixture& f : kFixtures) {
    // torus instances: no in-gap edge states, so the 128-node contour has the
    // full bulk gap of clearance (fixture sizes keep the flux integer)
    const Hamiltonian H =
        build_tightbinding_hamiltonian(tb_spec(f.L_small, f.flux, f.offset, Boundary::torus));
    const Spectrum s = eigensolve(H);
    const GapInfo gap = detect_gap(s, f.E_F);
    const Contour c = build_contour(gap, s, 128);
    for (int spin : {+1, -1}) {
      const BlockSpectrum& b = s.block(spin);
      int rank = 0;
      while (rank < b.evals.size() && b.evals[rank] < f.E_F) ++rank;
      if (rank == 0) continue;
      const MatrixXcd Pi_spec =
          b.evecs.leftCols(rank) * b.evecs.leftCols(rank).adjoint();
      const MatrixXcd Pi_riesz = riesz_projection_block(MatrixXcd(H.block(spin)), c);
      worst_diff = std::max(worst_diff, (Pi_riesz - Pi_spec).norm());
      worst_idem = std::max(worst_idem, (Pi_riesz * Pi_riesz - Pi_riesz).norm());
    }
  }
  if (worst_diff > 1e-8 || worst_idem > 1e-8) pass = false;
  return emit("riesz", pass,
              "4 fixtures at 128 nodes, worst |Pi_riesz - Pi_spectral|=" + num(worst_diff) +
                  ", worst idempotency=" + num(worst_idem) + " (tol 1e-8)");
}

// ---------------------------------------------------------------------------
// Criterion 5: lemma suite on random gapped instances
// ---------------------------------------------------------------------------

bool lemma() {
  const double t0 = now_s();
  bool pass = true;
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const int dim = 10 * (i + 1);  // 10 .. 200
    const IdentityReport r = brute_force_identities(dim, 4242u + i);
    const bool ok = r.liouvillian_residual <= 1e-6 && r.uniqueness_residual <= 1e-8 &&
                    r.double_comm_residual <= 1e-6 && r.trace_residual <= 1e-8 * dim;
    worst = std::max({worst, r.liouvillian_residual, r.double_comm_residual});
    if (!ok) pass = false;
  }
  const double elapsed = now_s() - t0;
  if (elapsed > 120.0) pass = false;
  return emit("lemma", pass,
              "20 instances dim 10..200, worst contour residual=" + num(worst) +
                  " (tol 1e-6), t=" + num(elapsed) + "s (budget 120s)");
}

// ---------------------------------------------------------------------------
// Criterion 6: Kubo conductivity approaches the zero-temperature limit
// ---------------------------------------------------------------------------

bool kubo() {
  // quantized torus twin of the tight-binding demo (edge-free spectra)
  const HamiltonianSpec spec = tb_spec(15, 0.0, 1.0 / 3.0, Boundary::torus);
  const Hamiltonian H = build_hamiltonian(spec);
  const Spectrum s = eigensolve(H);
  const GapInfo gap = detect_gap(s, -1.2);
  const Projection p = fermi_projection(s, gap);
  const Contour c = build_contour(gap, s, 128);
  auto [P1, P2] = momentum_operators(spec);
  ResponseOptions ropt;
  const BulkWindow w = default_window(spec, H.geom, ropt);
  const SigmaZero sz = sigma_zero_limit(H, p, P1, P2, c, w);

  bool monotone = true;
  double prev = 1e300, final_dev = 0.0;
  for (double scale : {1e-1, 1e-2, 1e-3}) {
    KuboParams prm;
    prm.T = scale;
    prm.mu = -1.2;
    prm.omega = Complex(scale, -scale);
    const double dev = std::abs(kubo_sigma(H, s, P1, P2, prm).real() - sz.plain);
    if (dev >= prev) monotone = false;
    prev = dev;
    final_dev = dev;
  }
  const bool pass = final_dev <= 5e-2 && monotone;
  return emit("kubo", pass,
              "|kubo(1e-3) - contour|=" + num(final_dev) + " (tol 5e-2), monotone=" +
                  (monotone ? "yes" : "no") + ", sigma_contour=" + num(sz.plain));
}

// ---------------------------------------------------------------------------
// Criterion 7: projection kernel decay, gapped vs gapless
// ---------------------------------------------------------------------------

bool decay() {
  bool pass = true;
  double worst_r2 = 1.0, min_alpha = 1e300;
  for (const Fixture& f : kFixtures) {
    const Hamiltonian H = build_tightbinding_hamiltonian(tb_spec(f.L, f.flux, f.offset));
    const Projection p = projection_at(H, f.E_F);
    const DecayFit fit = kernel_decay_profile(p, H.geom);
    worst_r2 = std::min(worst_r2, fit.r2);
    min_alpha = std::min(min_alpha, fit.alpha);
    if (fit.r2 < 0.9 || !(fit.alpha > 0.0)) pass = false;
  }
  // gapless control: free lattice with E_F inside the band
  const Hamiltonian Hc = build_tightbinding_hamiltonian(tb_spec(12, 0.0, 0.0));
  const Projection pc = projection_at(Hc, -3.2);
  const DecayFit ctrl = kernel_decay_profile(pc, Hc.geom);
  const bool flagged = ctrl.r2 < 0.5;
  if (!flagged) pass = false;
  return emit("decay", pass,
              "gapped worst r2=" + num(worst_r2) + " (>=0.9), min alpha=" + num(min_alpha) +
                  " (>0); gapless control r2=" + num(ctrl.r2) + " flagged=" +
                  (flagged ? "yes" : "no"));
}

// ---------------------------------------------------------------------------
// Criterion 8: spin Chern plateau across an 11-point B sweep
// ---------------------------------------------------------------------------

bool plateau() {
  const double t0 = now_s();
  const auto dir = std::filesystem::temp_directory_path() / "stredalab_acceptance_plateau";
  std::filesystem::remove_all(dir);
  // spin-flux model on a 24x24 open sample; grid points at B = 2 pi k / 576,
  // k = -5..5, so the torus twin used for the contour value stays quantized
  const double B_max = 5.0 * kTwoPi / 576.0;
  RunConfig cfg = parse_config_text(
      "model.backend = tightbinding\n"
      "model.half_width_L = 12\n"
      "model.tb_spin_flux_offset = 0.333333333333333333\n"
      "fermi_energy = -1.2\n"
      "contour_nodes = 64\n"
      "threads = 1\n"
      "sweep.B_start = -" +
      format_number(B_max, 17) + "\nsweep.B_end = " + format_number(B_max, 17) +
      "\nsweep.steps = 11\noutput_dir = " + dir.string() + "\n");
  validate_config(cfg);
  run_sweep(cfg);

  std::ifstream csv(dir / "sweep.csv");
  std::string line;
  std::getline(csv, line);  // header
  int rows = 0, gapped = 0;
  double sch_min = 1e300, sch_max = -1e300;
  while (std::getline(csv, line)) {
    ++rows;
    // sch is column 10 (0-based 9) of the frozen schema
    std::istringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.back() != "1") continue;
    ++gapped;
    const double sch = std::stod(cells[9]);
    sch_min = std::min(sch_min, sch);
    sch_max = std::max(sch_max, sch);
  }
  const double spread = sch_max - sch_min;
  const bool pass = rows == 11 && gapped == 11 && spread <= 1e-2;
  return emit("plateau", pass,
              "11-point sweep, gapped rows=" + std::to_string(gapped) + ", sch in [" +
                  num(sch_min) + ", " + num(sch_max) + "], spread=" + num(spread) +
                  " (tol 1e-2), t=" + num(now_s() - t0) + "s");
}

struct Criterion {
  const char* name;
  bool (*fn)();
};

const Criterion kCriteria[] = {
    {"streda_landau", landau_streda}, {"streda_tb", tb_streda}, {"quantization", quantization},
    {"time_reversal", time_reversal}, {"riesz", riesz},         {"lemma", lemma},
    {"kubo", kubo},                   {"decay", decay},         {"plateau", plateau},
};

}  // namespace

int main(int argc, char** argv) {
  bool all_pass = true;
  bool matched = false;
  for (const Criterion& c : kCriteria) {
    if (argc > 1 && std::strcmp(argv[1], c.name) != 0) continue;
    matched = true;
    try {
      if (!c.fn()) all_pass = false;
    } catch (const std::exception& e) {
      emit(c.name, false, std::string("exception: ") + e.what());
      all_pass = false;
    }
  }
  if (!matched) {
    std::cerr << "unknown criterion '" << (argc > 1 ? argv[1] : "") << "'; available:";
    for (const Criterion& c : kCriteria) std::cerr << ' ' << c.name;
    std::cerr << '\n';
    return 2;
  }
  return all_pass ? 0 : 1;
}

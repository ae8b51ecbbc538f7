#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "stredalab/cache.hpp"
#include "stredalab/config.hpp"
#include "stredalab/oracle.hpp"
#include "stredalab/report.hpp"
#include "stredalab/response.hpp"

namespace stredalab {

using LogFn = std::function<void(const std::string&)>;

namespace detail {

inline double now_ms() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double, std::milli>(clock::now().time_since_epoch()).count();
}

}  // namespace detail

/// Eigensolve with an optional on-disk cache. The key combines the canonical
/// model string with the eigensolver options; a hit skips the solve entirely.
inline Spectrum cached_eigensolve(const Hamiltonian& H, const EigOptions& eig,
                                  const EigenCache& cache, bool enabled, const LogFn& log) {
  const std::string key = H.spec.canonical_string() + "|" + detail::eig_key(eig);
  const std::string hash = detail::cache_hash(key);
  if (enabled) {
    Spectrum s;
    if (cache.load(key, s)) {
      log("eigensolve: cache hit " + hash);
      return s;
    }
  }
  const double t0 = detail::now_ms();
  Spectrum s = eigensolve(H, eig);
  log("eigensolve: computed " + hash + " in " +
      format_number(detail::now_ms() - t0, 4) + " ms");
  if (enabled) {
    cache.store(key, s);
    log("eigensolve: cache store " + hash);
  }
  return s;
}

/// Everything a report row or report.json needs about one (model, B) point.
struct PointResult {
  double B = 0.0;
  double E_F = 0.0;
  double gap_lower = 0.0;
  double gap_upper = 0.0;
  int rank_below = 0;
  MarkerReport markers;
  double isdos_minus = 0.0;
  double isdos_plus = 0.0;
  double fd_derivative = 0.0;
  double sigma_contour = 0.0;
  double residual_streda_fd = 0.0;
  double residual_streda_kubo = 0.0;
};

namespace detail {

inline EigOptions eig_for(const RunConfig& cfg) {
  EigOptions eig;
  eig.mode = cfg.eig_mode;
  eig.lanczos_until = cfg.fermi_energy;
  return eig;
}

inline ResponseOptions response_for(const RunConfig& cfg) {
  ResponseOptions opt;
  opt.fermi_energy = cfg.fermi_energy;
  opt.delta_B = cfg.delta_B;
  opt.contour_nodes = cfg.contour_nodes;
  opt.window_half_extent = cfg.window_half_extent;
  opt.window_min_buffer = cfg.window_min_buffer;
  return opt;
}

/// IsDOS at one field endpoint, using the shared cache-aware eigensolve.
inline double isdos_endpoint(HamiltonianSpec spec, double B, const RunConfig& cfg,
                             const EigenCache& cache, const LogFn& log) {
  spec.B1 = spec.B2 = B;
  const Hamiltonian H = build_hamiltonian(spec);
  const Spectrum s = cached_eigensolve(H, eig_for(cfg), cache, cfg.cache, log);
  const GapInfo gap = detect_gap(s, cfg.fermi_energy);
  if (gap.rank_below == 0 && !std::isfinite(gap.gap_lower))
    throw std::runtime_error("isdos endpoint: nothing below the Fermi energy");
  const Projection p = fermi_projection(s, gap);
  const BulkWindow w = default_window(spec, H.geom, response_for(cfg));
  return isdos(p, w);
}

}  // namespace detail

/// Full pipeline for one point: build, eigensolve (cached), gap, markers,
/// finite-difference Streda slope, and contour conductivity (torus twin for
/// open samples). Throws on numerical failure; the caller maps that to exit
/// code 3 for single runs or to a flagged row in sweeps.
inline PointResult compute_point(const RunConfig& cfg, double B, const EigenCache& cache,
                                 const LogFn& log) {
  PointResult r;
  r.B = B;
  r.E_F = cfg.fermi_energy;
  HamiltonianSpec spec = cfg.model;
  spec.B1 = spec.B2 = B;
  const ResponseOptions ropt = detail::response_for(cfg);
  const EigOptions eig = detail::eig_for(cfg);

  double t0 = detail::now_ms();
  const Hamiltonian H = build_hamiltonian(spec);
  log("stage build: " + format_number(detail::now_ms() - t0, 4) + " ms");

  const Spectrum s = cached_eigensolve(H, eig, cache, cfg.cache, log);

  t0 = detail::now_ms();
  const GapInfo gap = detect_gap(s, cfg.fermi_energy);
  r.gap_lower = gap.gap_lower;
  r.gap_upper = gap.gap_upper;
  r.rank_below = gap.rank_below;
  const Projection p = fermi_projection(s, gap);
  const BulkWindow w = default_window(spec, H.geom, ropt);
  r.markers = compute_marker_report(p, H.geom, w);
  log("stage markers: " + format_number(detail::now_ms() - t0, 4) + " ms");

  t0 = detail::now_ms();
  r.isdos_minus = detail::isdos_endpoint(spec, B - cfg.delta_B, cfg, cache, log);
  r.isdos_plus = detail::isdos_endpoint(spec, B + cfg.delta_B, cfg, cache, log);
  r.fd_derivative = (r.isdos_plus - r.isdos_minus) / (2.0 * cfg.delta_B);
  log("stage streda_fd: " + format_number(detail::now_ms() - t0, 4) + " ms");

  // Contour conductivity: open samples carry in-gap edge states, so the
  // separating contour is built on the torus twin when it exists.
  t0 = detail::now_ms();
  auto sigma_on = [&](const HamiltonianSpec& ss, const Hamiltonian& HH, const Spectrum& sp,
                      const GapInfo& gg) {
    const Projection pp = fermi_projection(sp, gg);
    const Contour contour = build_contour(gg, sp, cfg.contour_nodes);
    const BulkWindow ww = default_window(ss, HH.geom, ropt);
    auto [P1, P2] = momentum_operators(ss);
    return sigma_zero_limit(HH, pp, P1, P2, contour, ww, false).plain;
  };
  if (spec.boundary == Boundary::torus) {
    r.sigma_contour = sigma_on(spec, H, s, gap);
  } else {
    try {
      HamiltonianSpec twin = spec;
      twin.boundary = Boundary::torus;
      const Hamiltonian Ht = build_hamiltonian(twin);
      const Spectrum st = cached_eigensolve(Ht, eig, cache, cfg.cache, log);
      const GapInfo gt = detect_gap(st, cfg.fermi_energy);
      r.sigma_contour = sigma_on(twin, Ht, st, gt);
      log("stage sigma_contour: torus twin");
    } catch (const std::exception& e) {
      log(std::string("stage sigma_contour: twin unavailable (") + e.what() +
          "), using open sample");
      r.sigma_contour = sigma_on(spec, H, s, gap);
    }
  }
  log("stage sigma_contour: " + format_number(detail::now_ms() - t0, 4) + " ms");

  r.residual_streda_fd = std::abs(r.fd_derivative - r.markers.sch / kTwoPi);
  r.residual_streda_kubo = std::abs(r.sigma_contour - r.markers.sch / kTwoPi);
  return r;
}

/// report.json: union of the marker and Streda report fields, fixed key order.
inline JsonReport point_json(const PointResult& r, const RunConfig& cfg) {
  JsonReport j(cfg.precision_digits);
  j.add("B", r.B);
  j.add("E_F", r.E_F);
  j.add("delta_B", cfg.delta_B);
  j.add("gap_lower", r.gap_lower);
  j.add("gap_upper", r.gap_upper);
  j.add("rank_below", r.rank_below);
  j.add("isdos", r.markers.isdos);
  j.add("isdos_minus", r.isdos_minus);
  j.add("isdos_plus", r.isdos_plus);
  j.add("fd_derivative", r.fd_derivative);
  j.add("ch_up", r.markers.ch_up);
  j.add("ch_down", r.markers.ch_down);
  j.add("sch", r.markers.sch);
  j.add("sch_over_2pi", r.markers.sch / kTwoPi);
  j.add("quantization_residual", r.markers.quantization_residual);
  j.add("sigma_contour", r.sigma_contour);
  j.add("residual_streda_fd", r.residual_streda_fd);
  j.add("residual_streda_kubo", r.residual_streda_kubo);
  j.add("decay_rate_alpha", r.markers.decay_rate_alpha);
  j.add("decay_fit_r2", r.markers.decay_fit_r2);
  return j;
}

/// Single experiment: one point at the configured field, persisted as
/// report.json plus a stage-timing log. Numerical failures propagate.
inline void run_single(const RunConfig& cfg) {
  std::ofstream logfile(std::filesystem::path(cfg.output_dir) / "run.log", std::ios::trunc);
  const LogFn log = [&](const std::string& line) {
    logfile << line << '\n';
    logfile.flush();
  };
  const EigenCache cache(cfg.output_dir);
  const PointResult r = compute_point(cfg, cfg.model.B2, cache, log);
  point_json(r, cfg).write(std::filesystem::path(cfg.output_dir) / "report.json");
  log("report.json written");
}

inline int resolve_threads(const RunConfig& cfg) {
  if (const char* env = std::getenv("STREDALAB_THREADS")) {
    const int t = std::atoi(env);
    if (t > 0) return t;
  }
  if (cfg.threads > 0) return cfg.threads;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

namespace detail {

inline std::vector<std::string> sweep_row(const std::optional<PointResult>& r, double B,
                                          double E_F, int digits) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  auto f = [&](double v) { return format_number(v, digits); };
  std::vector<std::string> cells;
  cells.push_back(f(B));
  cells.push_back(f(E_F));
  if (r) {
    cells.push_back(f(r->gap_lower));
    cells.push_back(f(r->gap_upper));
    cells.push_back(std::to_string(r->rank_below));
    cells.push_back(f(r->markers.isdos));
    cells.push_back(f(r->fd_derivative));
    cells.push_back(f(r->markers.ch_up));
    cells.push_back(f(r->markers.ch_down));
    cells.push_back(f(r->markers.sch));
    cells.push_back(f(r->sigma_contour));
    cells.push_back(f(r->residual_streda_fd));
    cells.push_back(f(r->residual_streda_kubo));
    cells.push_back("1");
  } else {
    for (int i = 0; i < 11; ++i) cells.push_back(f(nan));
    cells.push_back("0");
  }
  return cells;
}

}  // namespace detail

/// B-sweep over an even grid: points run in a worker pool, rows are written by
/// a single ordered writer so the CSV is always ascending in B and every
/// flushed row is complete. Gapless points become flagged rows, not failures.
inline void run_sweep(const RunConfig& cfg) {
  if (!cfg.has_sweep) throw ConfigError("sweep requested but config has no sweep.* keys");
  const int n = cfg.sweep_steps;
  std::vector<double> grid(n);
  for (int i = 0; i < n; ++i)
    grid[i] = cfg.sweep_B_start + (cfg.sweep_B_end - cfg.sweep_B_start) * i / (n - 1);

  std::ofstream logfile(std::filesystem::path(cfg.output_dir) / "run.log", std::ios::trunc);
  const EigenCache cache(cfg.output_dir);
  CsvWriter csv(std::filesystem::path(cfg.output_dir) / "sweep.csv", kSweepCsvHeader);

  std::vector<std::optional<PointResult>> results(n);
  std::vector<std::string> logs(n);
  std::vector<char> done(n, 0);
  std::mutex mtx;
  std::condition_variable cv;
  std::atomic<int> next{0};

  auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      std::string local;
      const LogFn log = [&](const std::string& line) {
        local += "  " + line + "\n";
      };
      std::optional<PointResult> r;
      try {
        r = compute_point(cfg, grid[i], cache, log);
      } catch (const std::exception& e) {
        local += std::string("  point failed: ") + e.what() + "\n";
      }
      std::lock_guard<std::mutex> lk(mtx);
      results[i] = std::move(r);
      logs[i] = std::move(local);
      done[i] = 1;
      cv.notify_all();
    }
  };

  const int n_threads = std::min(resolve_threads(cfg), n);
  std::vector<std::thread> pool;
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);

  {
    std::unique_lock<std::mutex> lk(mtx);
    for (int i = 0; i < n; ++i) {
      cv.wait(lk, [&] { return done[i] != 0; });
      csv.write_row(detail::sweep_row(results[i], grid[i], cfg.fermi_energy,
                                      cfg.precision_digits));
      logfile << "point " << i << " B = " << format_number(grid[i], cfg.precision_digits)
              << (results[i] ? " ok" : " gapless/failed") << '\n'
              << logs[i];
      logfile.flush();
    }
  }
  for (auto& t : pool) t.join();
  logfile << "sweep.csv written (" << n << " rows)\n";
}

/// Oracle verb: the matrix-level identity checks plus the momentum-space
/// Chern fixtures, printed one line each; returns false if anything misses.
inline bool run_oracle(std::ostream& out) {
  bool ok = true;
  auto line = [&](const std::string& name, bool pass, const std::string& detail) {
    out << (pass ? "PASS " : "FAIL ") << name << ": " << detail << '\n';
    if (!pass) ok = false;
  };

  for (int dim : {2, 24, 96}) {
    try {
      const IdentityReport rep = brute_force_identities(dim, 1000u + dim);
      const bool pass = rep.liouvillian_residual < 1e-6 && rep.uniqueness_residual < 1e-8 &&
                        rep.double_comm_residual < 1e-6 && rep.trace_residual < 1e-8 * dim;
      line("brute_force dim=" + std::to_string(dim), pass,
           "liou=" + format_number(rep.liouvillian_residual, 3) +
               " uniq=" + format_number(rep.uniqueness_residual, 3) +
               " dcomm=" + format_number(rep.double_comm_residual, 3) +
               " trace=" + format_number(rep.trace_residual, 3));
    } catch (const std::exception& e) {
      line("brute_force dim=" + std::to_string(dim), false, e.what());
    }
  }

  struct Fixture {
    int p, q, filled, expected;
  };
  for (const Fixture& f : {Fixture{0, 1, 1, 0}, Fixture{1, 3, 1, 1}, Fixture{1, 3, 2, -1},
                           Fixture{2, 5, 1, -2}, Fixture{-1, 3, 1, -1}}) {
    try {
      double resid = 0.0;
      const int ch = fukui_hatsugai_chern(hofstadter_bloch(f.p, f.q, 8, 10), f.filled, &resid);
      line("fukui_hatsugai flux=" + std::to_string(f.p) + "/" + std::to_string(f.q) +
               " bands=" + std::to_string(f.filled),
           ch == f.expected && resid < 1e-10,
           "ch=" + std::to_string(ch) + " expected=" + std::to_string(f.expected) +
               " residual=" + format_number(resid, 3));
    } catch (const std::exception& e) {
      line("fukui_hatsugai flux=" + std::to_string(f.p) + "/" + std::to_string(f.q), false,
           e.what());
    }
  }
  return ok;
}

}  // namespace stredalab

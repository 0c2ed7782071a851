#pragma once

// Orchestration: single runs, eps sweeps, the Plotnikov comparison and the
// model check, with CSV / JSON artifacts.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <fmt/os.h>

#include "json.hpp"

#include "fastreact/config.hpp"
#include "fastreact/diagnostics.hpp"
#include "fastreact/identities.hpp"
#include "fastreact/kinetics.hpp"
#include "fastreact/model.hpp"
#include "fastreact/solver.hpp"

namespace fastreact {

using Json = nlohmann::ordered_json;

inline constexpr int kReportSchemaVersion = 1;
inline constexpr double kWronskianMargin = 0.1;  // fraction of f+ - f- cut at each end
inline constexpr int kWronskianSamples = 100;
inline constexpr double kPopulatedWeight = 0.1;

// ---------------------------------------------------------------------------
// Building blocks from a config

inline ReactionFunction build_reaction(const RunConfig& cfg) {
  if (cfg.model.kind == "builtin-cubic") {
    auto rf = ReactionFunction::reference_cubic();
    if (cfg.model.u_max == rf.u_max()) return rf;
    return ReactionFunction::polynomial({0.0, 6.0, -4.5, 1.0}, cfg.model.u_max);
  }
  return ReactionFunction::polynomial(cfg.model.coeffs, cfg.model.u_max);
}

inline ProfileSpec build_profile(const RunConfig& cfg) {
  const auto& p = cfg.init.params;
  if (cfg.init.kind == "constant") return ConstantProfile{p[0], p[1]};
  if (cfg.init.kind == "cosine-sum") {
    return CosineSumProfile{p[0], std::vector<double>(p.begin() + 1, p.end())};
  }
  const double L = cfg.solver.L;
  return PlateauBlendProfile{p[0], p[1], p[2] * L, p[3] * L, p[4], static_cast<int>(p[5])};
}

inline Grid1D build_grid(const RunConfig& cfg) { return Grid1D(cfg.solver.n_cells, cfg.solver.L); }

inline SolverConfig build_solver_config(const RunConfig& cfg, const Grid1D& grid) {
  SolverConfig sc;
  sc.epsilon = cfg.solver.epsilon;
  sc.dt = cfg.solver.dt;
  sc.T = cfg.solver.T;
  sc.theta = cfg.solver.theta;
  sc.newton_tol = cfg.solver.newton_tol;
  sc.max_newton = cfg.solver.newton_max_iter;
  sc.max_halvings = cfg.solver.max_halvings;
  const double dt = sc.effective_dt(grid);
  const auto steps = static_cast<long long>(std::ceil(sc.T / dt - 1e-9));
  if (cfg.solver.snapshot_stride > 0) {
    sc.snapshot_stride = cfg.solver.snapshot_stride;
  } else {
    sc.snapshot_stride = static_cast<int>(std::max(1LL, steps / (32LL * cfg.kinetics.cells_t)));
  }
  return sc;
}

// ---------------------------------------------------------------------------
// Output helpers

inline std::string num(double x) { return fmt::format("{:.17g}", x); }

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw Error("failed writing " + path.string());
}

inline void write_json(const std::filesystem::path& path, const Json& j) {
  write_text(path, j.dump(2) + "\n");
}

inline Json read_json(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path.string());
  return Json::parse(is);
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

// ---------------------------------------------------------------------------
// Model check

struct ModelCheck {
  BranchStructure structure{};
  double wronskian_lo = 0.0;
  double wronskian_hi = 0.0;
  double wronskian_min = 0.0;
  bool plotnikov_valid = false;
  double min_slope = 0.0;
  double residual_minus = 0.0;  // |F(alpha-) - f-|
  double residual_plus = 0.0;   // |F(beta+) - f+|

  bool ok() const { return wronskian_min > 0.0 && residual_minus < 1e-10 && residual_plus < 1e-10; }
};

inline ModelCheck check_model(const ReactionFunction& rf) {
  BranchInverses bi(rf);
  ModelCheck mc;
  mc.structure = bi.structure();
  const double delta = kWronskianMargin * (mc.structure.f_plus - mc.structure.f_minus);
  mc.wronskian_lo = mc.structure.f_minus + delta;
  mc.wronskian_hi = mc.structure.f_plus - delta;
  mc.wronskian_min = nondegeneracy_check(bi, mc.wronskian_lo, mc.wronskian_hi, kWronskianSamples);
  const PlotnikovMaps maps(rf);
  mc.plotnikov_valid = maps.valid();
  mc.min_slope = maps.min_slope();
  mc.residual_minus = std::abs(rf.value(mc.structure.alpha_minus) - mc.structure.f_minus);
  mc.residual_plus = std::abs(rf.value(mc.structure.beta_plus) - mc.structure.f_plus);
  return mc;
}

inline Json to_json(const ModelCheck& mc) {
  const auto& s = mc.structure;
  return Json{{"alpha_minus", s.alpha_minus}, {"alpha_plus", s.alpha_plus},
              {"beta_minus", s.beta_minus},   {"beta_plus", s.beta_plus},
              {"f_minus", s.f_minus},         {"f_plus", s.f_plus},
              {"residual_minus", mc.residual_minus}, {"residual_plus", mc.residual_plus},
              {"wronskian_interval", {mc.wronskian_lo, mc.wronskian_hi}},
              {"wronskian_min_abs", mc.wronskian_min},
              {"plotnikov_valid", mc.plotnikov_valid}, {"min_slope", mc.min_slope},
              {"ok", mc.ok()}};
}

// ---------------------------------------------------------------------------
// Exact-limit tier: identities on synthetic limit objects

struct ExactTier {
  double pushforward = 0.0;
  double closed_form = 0.0;
  double main_identity = 0.0;
  double plotnikov_a = 0.0;
  double plotnikov_b = 0.0;
  double plotnikov_c = 0.0;
  std::size_t evaluations = 0;

  double worst() const {
    return std::max({pushforward, closed_form, main_identity, plotnikov_a, plotnikov_b, plotnikov_c});
  }
};

/// Samples of one cell in the exact limit: v = v_bar everywhere and u on the
/// roots S_i(v_bar) with the given counts; w = I(u).
struct SyntheticCell {
  std::vector<double> u;
  std::vector<double> v;
  std::vector<double> w;
};

inline SyntheticCell synthetic_cell(const BranchInverses& bi, const PlotnikovMaps& maps,
                                    double v_bar, const std::array<std::size_t, 3>& counts) {
  SyntheticCell c;
  for (int i = 0; i < 3; ++i) {
    const double root = bi.S(i + 1, v_bar);
    for (std::size_t k = 0; k < counts[static_cast<std::size_t>(i)]; ++k) {
      c.u.push_back(root);
      c.v.push_back(v_bar);
      c.w.push_back(maps.I(root));
    }
  }
  return c;
}

struct PlotnikovCellResidual {
  double sum_sq_a = 0.0;  // sum of (v - A(w))^2 over samples
  double sup_b = 0.0;
  double sup_c = 0.0;
  double mean_c = 0.0;
};

/// (a) v - A(w); (b) sup over w_nodes of |k - p o I^{-1}|; (c) sup and mean
/// over xi_nodes of the Lemma-type pushforward gap between k, p and q.
inline PlotnikovCellResidual plotnikov_cell_residual(std::span<const double> u,
                                                     std::span<const double> v,
                                                     std::span<const double> w,
                                                     const BranchInverses& bi,
                                                     const PlotnikovMaps& maps,
                                                     std::span<const double> w_nodes,
                                                     std::span<const double> xi_nodes) {
  PlotnikovCellResidual r;
  std::vector<double> iu(u.size());
  for (std::size_t s = 0; s < u.size(); ++s) {
    const double d = v[s] - maps.A(std::clamp(w[s], 0.0, maps.w_max()));
    r.sum_sq_a += d * d;
    iu[s] = maps.I(u[s]);
  }
  const SampleKinetic k(std::vector<double>(w.begin(), w.end()));
  const SampleKinetic p_of_inv(std::move(iu));
  for (double xi : w_nodes) r.sup_b = std::max(r.sup_b, std::abs(k(xi) - p_of_inv(xi)));
  const SampleKinetic p(std::vector<double>(u.begin(), u.end()));
  const SampleKinetic q(std::vector<double>(v.begin(), v.end()));
  double acc = 0.0;
  for (double xi : xi_nodes) {
    const double g = plotnikov_pushforward_gap(k, p, q, bi, maps, xi);
    r.sup_c = std::max(r.sup_c, g);
    acc += g;
  }
  r.mean_c = xi_nodes.empty() ? 0.0 : acc / static_cast<double>(xi_nodes.size());
  return r;
}

inline ExactTier exact_tier(const BranchInverses& bi, double fold_guard, std::uint64_t seed,
                            int trials = 200) {
  const PlotnikovMaps maps(bi.reaction());
  std::mt19937_64 rng(seed);
  const double fm = bi.f_minus();
  const double fp = bi.f_plus();
  const double delta = fold_guard * (fp - fm);
  const double top = std::max(fp, bi.structure().beta_plus) * 1.5;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> unstable(fm + delta, fp - delta);
  auto draw_rate = [&]() {
    for (;;) {
      const double x = top * unit(rng);
      if (x > 1e-3 && std::abs(x - fm) > delta && std::abs(x - fp) > delta) return x;
    }
  };

  ExactTier et;
  for (int t = 0; t < trials; ++t) {
    const double v_bar = unstable(rng);
    const double k1 = unit(rng);
    const double k2 = k1 * unit(rng);
    const ThreeJumpKinetic p(bi, v_bar, k1, k2);
    const auto q = [v_bar](double xi) { return chi(v_bar, xi); };
    for (int r = 0; r < 16; ++r) {
      const double eta = draw_rate();
      const double xi = draw_rate();
      et.pushforward = std::max(et.pushforward, pushforward_gap(p, q, bi, xi));
      et.main_identity = std::max(et.main_identity, main_identity_gap(p, q, bi, eta, xi));
      ++et.evaluations;
    }

    // Closed forms in the unstable region for a smooth non-increasing p.
    const double c = 0.2 + unit(rng);
    const auto ps = [c](double tau) { return tau <= 0.0 ? 0.0 : 1.0 / (1.0 + c * tau * tau); };
    const auto qs = [&](double xi) { return pushforward(ps, bi, xi); };
    std::array<double, 3> trip{unstable(rng), unstable(rng), unstable(rng)};
    std::sort(trip.begin(), trip.end());
    const double xi1 = trip[0], eta = trip[1], xi2 = trip[2];
    et.closed_form = std::max(et.closed_form, std::abs(r_functional(ps, bi, eta, xi1) -
                                                       r_closed_below(ps, bi, eta, xi1)));
    et.closed_form = std::max(et.closed_form, std::abs(r_functional(ps, bi, eta, xi2) -
                                                       r_closed_above(ps, qs, bi, eta, xi2)));

    // Plotnikov variables on a synthetic limit cell.
    if (maps.valid()) {
      const std::size_t n = 600;
      const auto n1 = static_cast<std::size_t>(std::floor((1.0 - k1) * n));
      const auto n3 = static_cast<std::size_t>(std::floor(k2 * n));
      const SyntheticCell cell = synthetic_cell(bi, maps, v_bar, {n1, n - n1 - n3, n3});
      std::vector<double> w_nodes, xi_nodes;
      for (int r = 0; r < 16; ++r) {
        w_nodes.push_back(maps.w_max() * unit(rng));
        xi_nodes.push_back(draw_rate());
      }
      const auto res = plotnikov_cell_residual(cell.u, cell.v, cell.w, bi, maps, w_nodes, xi_nodes);
      et.plotnikov_a = std::max(et.plotnikov_a, std::sqrt(res.sum_sq_a / static_cast<double>(n)));
      et.plotnikov_b = std::max(et.plotnikov_b, res.sup_b);
      et.plotnikov_c = std::max(et.plotnikov_c, res.sup_c);
    }
  }
  return et;
}

// ---------------------------------------------------------------------------
// Single run

struct RunSummary {
  double epsilon = 0.0;
  bool completed = false;
  std::string error;
  AprioriReport apriori;
  double energy_initial = 0.0;
  double energy_max_increase = 0.0;
  double identity_mean = 0.0;
  double identity_sup = 0.0;
  double pushforward_mean = 0.0;
  double binarization = 0.0;
  double mean_rho = 0.0;
  bool weights_exact = false;  // lambda_i >= 0, sum exactly 1, kappa_2 <= kappa_1 in every cell
  std::size_t populated_cells = 0;
  std::size_t low_confidence_cells = 0;
  double defect_hist_total = 0.0;
  double defect_snapshot_norm_sq = 0.0;
  double defect_bookkeeping_rel = 0.0;
  double plotnikov_a = 0.0;
  double plotnikov_b = 0.0;
  double plotnikov_c_mean = 0.0;
  bool plotnikov_valid = false;

  bool mass_ok() const { return apriori.max_mass_drift <= 1e-8; }
  bool bounds_ok() const { return !apriori.bound_violation && !apriori.negativity_violation; }
  bool energy_ok() const {
    return energy_max_increase <= 1e-8 * std::abs(energy_initial);
  }
  bool bookkeeping_ok() const { return defect_bookkeeping_rel <= 1e-10; }
  bool checks_ok() const {
    return completed && mass_ok() && bounds_ok() && energy_ok() && bookkeeping_ok() && weights_exact;
  }
};

struct RunOutput {
  RunSummary summary;
  Json report;
  Json timings;
  std::filesystem::path dir;
  Trajectory<FieldState> trajectory;
};

namespace harness_detail {

inline void write_fields(const std::filesystem::path& path, const FieldState& s, const Grid1D& g) {
  auto out = fmt::output_file(path.string());
  out.print("x,u,v\n");
  for (std::size_t j = 0; j < s.u.size(); ++j) {
    out.print("{},{},{}\n", num(g.x(j)), num(s.u[j]), num(s.v[j]));
  }
}

inline std::size_t nearest_snapshot(const Trajectory<FieldState>& traj, double t) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < traj.size(); ++k) {
    if (std::abs(traj.snapshots[k].t - t) < std::abs(traj.snapshots[best].t - t)) best = k;
  }
  return best;
}

inline void write_trajectory_artifacts(const std::filesystem::path& dir,
                                       const Trajectory<FieldState>& traj, const Grid1D& grid,
                                       const RunConfig& cfg) {
  {
    auto out = fmt::output_file((dir / "snapshots.csv").string());
    out.print("index,t,fields_file\n");
    for (std::size_t k = 0; k < traj.size(); ++k) {
      const bool written = k % static_cast<std::size_t>(cfg.run.fields_every) == 0 || k + 1 == traj.size();
      out.print("{},{},{}\n", k, num(traj.snapshots[k].t),
                written ? fmt::format("fields_{:04d}.csv", k) : std::string());
    }
  }
  for (std::size_t k = 0; k < traj.size(); ++k) {
    if (k % static_cast<std::size_t>(cfg.run.fields_every) == 0 || k + 1 == traj.size()) {
      write_fields(dir / fmt::format("fields_{:04d}.csv", k), traj.snapshots[k], grid);
    }
  }
  for (std::size_t m = 0; m < cfg.run.plot_times.size(); ++m) {
    const FieldState& s = traj.snapshots[nearest_snapshot(traj, cfg.run.plot_times[m])];
    for (const char* which : {"u", "v"}) {
      auto out = fmt::output_file((dir / fmt::format("plot_{}_{}.dat", which, m)).string());
      out.print("# x {} at t = {}\n", which, num(s.t));
      const auto& f = which[0] == 'u' ? s.u : s.v;
      for (std::size_t j = 0; j < f.size(); ++j) out.print("{} {}\n", num(grid.x(j)), num(f[j]));
    }
  }
}

}  // namespace harness_detail

inline Json to_json(const AprioriReport& a) {
  return Json{{"M_bound", a.M_bound},
              {"max_u", a.max_u},
              {"max_v", a.max_v},
              {"min_u", a.min_u},
              {"min_v", a.min_v},
              {"grad_v_norm", a.grad_v_norm},
              {"scaled_defect_norm", a.scaled_defect_norm},
              {"eps_lap_v_norm", a.eps_lap_norm},
              {"defect_norm", a.defect_norm},
              {"max_mass_drift", a.max_mass_drift},
              {"bound_violation", a.bound_violation},
              {"negativity_violation", a.negativity_violation}};
}

inline Json config_json(const RunConfig& cfg) {
  Json j = Json::object();
  for (const auto& [k, v] : cfg.echo()) j[k] = v;
  return j;
}

/// Integrates the configured system and evaluates every diagnostic. Artifacts
/// go to out_dir/label when `write` is set.
inline RunOutput run_single(const RunConfig& cfg, bool write = true) {
  using Clock = std::chrono::steady_clock;
  const auto t_start = Clock::now();
  RunOutput out;
  RunSummary& sum = out.summary;
  sum.epsilon = cfg.solver.epsilon;

  const ReactionFunction rf = build_reaction(cfg);
  const BranchInverses bi(rf);
  const Grid1D grid = build_grid(cfg);
  const SolverConfig sc = build_solver_config(cfg, grid);
  const double dt = sc.effective_dt(grid);
  const FieldState s0 = init_fields(grid, build_profile(cfg), rf);
  const double M = bound_M(s0, rf, bi.structure());

  out.dir = std::filesystem::path(cfg.run.out_dir) / cfg.run.label;
  if (write) std::filesystem::create_directories(out.dir);

  Json& rep = out.report;
  rep["schema_version"] = kReportSchemaVersion;
  rep["label"] = cfg.run.label;
  rep["config"] = config_json(cfg);
  rep["model"] = to_json(check_model(rf));

  StepNorms norms(s0, rf, grid);
  SystemStepper stepper(grid, rf, sc);
  try {
    out.trajectory = integrate<FieldState>(s0, std::ref(stepper), sc, dt, {}, std::ref(norms));
  } catch (const IntegrationFailure<FieldState>& e) {
    sum.error = e.what();
    rep["status"] = "integration_failed";
    rep["error"] = e.what();
    rep["partial_snapshots"] = e.partial().size();
    if (write) {
      harness_detail::write_trajectory_artifacts(out.dir, e.partial(), grid, cfg);
      write_json(out.dir / "report.json", rep);
    }
    throw;
  }
  const auto t_integrated = Clock::now();
  const auto& traj = out.trajectory;

  sum.apriori = norms.report(M, sc.epsilon);
  sum.energy_initial = norms.initial_energy();
  sum.energy_max_increase = norms.max_energy_increase();

  const CellPartition part{cfg.kinetics.cells_t, cfg.kinetics.cells_x};
  const auto cells = sample_cells(traj, grid, part);
  const XiGrid xg(cfg.kinetics.xi_max > 0.0 ? cfg.kinetics.xi_max : M, cfg.kinetics.xi_bins);
  const EmpiricalKinetic ek = empirical_kinetic(cells, part, xg);
  const WeightField wf = young_weights(cells, part, bi, cfg.model.fold_guard);
  const double cell_dt = (traj.final().t - traj.initial().t) / part.cells_t;
  const ConcentrationMetrics cm = concentration_metrics(ek, cells, wf, cell_dt);
  const RetainedBand band = retained_band(bi, xg, cfg.kinetics.guard_band, cfg.model.fold_guard);
  const ResidualStats ident =
      kinetic_identity_residual(ek, bi, band, cfg.kinetics.pairs_per_cell, cfg.run.seed);
  const std::vector<double> pf = pushforward_residual(ek, bi, band);
  const DefectHistogram dh = defect_measure(cells, rf, xg, sc.epsilon);
  const AprioriReport snap = apriori_report(traj, rf, bi.structure(), grid, sc.epsilon);

  sum.identity_mean = ident.mean;
  sum.identity_sup = ident.sup;
  double pf_sup = 0.0;
  for (double x : pf) {
    sum.pushforward_mean += x / static_cast<double>(pf.size());
    pf_sup = std::max(pf_sup, x);
  }
  sum.binarization = cm.binarization_fraction;
  sum.mean_rho = wf.mean_rho();
  sum.weights_exact = true;
  for (std::size_t c = 0; c < wf.cells.size(); ++c) {
    const auto& w = wf.cells[c];
    const bool nonneg = w.lambda[0] >= 0.0 && w.lambda[1] >= 0.0 && w.lambda[2] >= 0.0;
    sum.weights_exact = sum.weights_exact && nonneg && w.lambda[0] + w.lambda[1] + w.lambda[2] == 1.0 &&
                        w.kappa2 <= w.kappa1;
    int populated = 0;
    for (double l : w.lambda) populated += l >= kPopulatedWeight ? 1 : 0;
    if (populated >= 2 && 10.0 * cm.var_v[c] <= cm.var_u[c]) ++sum.populated_cells;
    if (w.low_confidence) ++sum.low_confidence_cells;
  }
  sum.defect_hist_total = dh.total_n2;
  sum.defect_snapshot_norm_sq = snap.scaled_defect_norm * snap.scaled_defect_norm;
  {
    const double denom = std::max(std::abs(sum.defect_snapshot_norm_sq), 1e-300);
    sum.defect_bookkeeping_rel =
        sum.defect_snapshot_norm_sq == 0.0 && dh.total_n2 == 0.0
            ? 0.0
            : std::abs(dh.total_n2 - sum.defect_snapshot_norm_sq) / denom;
  }

  // Plotnikov variables from the same trajectory.
  const PlotnikovMaps maps(rf);
  sum.plotnikov_valid = maps.valid();
  double pl_c_sup = 0.0;
  if (maps.valid()) {
    std::vector<double> w_nodes, xi_nodes;
    const double w_top = maps.I(std::min(M, rf.u_max()));
    for (int k = 0; k < xg.bins(); ++k) {
      w_nodes.push_back(w_top * (k + 0.5) / xg.bins());
      if (band.contains(xg.node(k))) xi_nodes.push_back(xg.node(k));
    }
    double sq = 0.0, cmean = 0.0;
    for (const auto& c : cells) {
      std::vector<double> w(c.size());
      for (std::size_t s = 0; s < c.size(); ++s) w[s] = c.u[s] + c.v[s];
      const auto r = plotnikov_cell_residual(c.u, c.v, w, bi, maps, w_nodes, xi_nodes);
      for (std::size_t s = 0; s < c.size(); ++s) {
        const double d = c.v[s] - maps.A(std::clamp(w[s], 0.0, maps.w_max()));
        sq += d * d * c.weight[s];
      }
      sum.plotnikov_b = std::max(sum.plotnikov_b, r.sup_b);
      pl_c_sup = std::max(pl_c_sup, r.sup_c);
      cmean += r.mean_c / static_cast<double>(cells.size());
    }
    sum.plotnikov_a = std::sqrt(sq);
    sum.plotnikov_c_mean = cmean;
  }
  sum.completed = true;
  const auto t_analysed = Clock::now();

  rep["status"] = "completed";
  rep["solver"] = Json{{"dt", dt},
                       {"steps", traj.steps},
                       {"halvings", traj.halvings},
                       {"snapshots", traj.size()},
                       {"snapshot_stride", sc.snapshot_stride},
                       {"max_newton_iterations", stepper.stats().max_newton_iterations},
                       {"clamped_negatives", stepper.stats().clamped_negatives}};
  rep["apriori"] = to_json(sum.apriori);
  rep["apriori_snapshots"] = to_json(snap);
  rep["energy"] = Json{{"initial", sum.energy_initial},
                       {"final", energy(traj.final(), rf, grid)},
                       {"max_increase", sum.energy_max_increase},
                       {"nonincreasing", sum.energy_ok()}};
  rep["kinetics"] = Json{{"xi_max", xg.xi_max()},
                         {"xi_bins", xg.bins()},
                         {"retained_band", {band.lo, band.hi}},
                         {"fold_delta", band.delta},
                         {"identity_residual_mean", ident.mean},
                         {"identity_residual_sup", ident.sup},
                         {"identity_pairs", ident.count},
                         {"pushforward_residual_mean", sum.pushforward_mean},
                         {"pushforward_residual_sup", pf_sup},
                         {"binarization_fraction", cm.binarization_fraction},
                         {"max_abs_dlambda_dt", cm.max_abs_dlambda_dt}};
  rep["defect_measure"] = Json{{"total_n2", dh.total_n2},
                               {"total_n1", dh.total_n1},
                               {"scaled_defect_norm_sq", sum.defect_snapshot_norm_sq},
                               {"relative_mismatch", sum.defect_bookkeeping_rel}};
  rep["weights"] = Json{{"cells", wf.cells.size()},
                        {"mean_rho", sum.mean_rho},
                        {"exact_sums", sum.weights_exact},
                        {"populated_cells", sum.populated_cells},
                        {"low_confidence_cells", sum.low_confidence_cells}};
  rep["plotnikov"] = Json{{"valid", maps.valid()},
                          {"v_minus_A_w_norm", sum.plotnikov_a},
                          {"k_vs_p_of_Iinv_sup", sum.plotnikov_b},
                          {"pushforward_gap_mean", sum.plotnikov_c_mean},
                          {"pushforward_gap_sup", pl_c_sup}};
  rep["checks"] = Json{{"mass", sum.mass_ok()},
                       {"bounds", sum.bounds_ok()},
                       {"energy", sum.energy_ok()},
                       {"defect_bookkeeping", sum.bookkeeping_ok()},
                       {"weights", sum.weights_exact},
                       {"all", sum.checks_ok()}};

  auto secs = [](auto a, auto b) { return std::chrono::duration<double>(b - a).count(); };
  out.timings = Json{{"label", cfg.run.label},
                     {"integrate_s", secs(t_start, t_integrated)},
                     {"analyse_s", secs(t_integrated, t_analysed)}};

  if (write) {
    harness_detail::write_trajectory_artifacts(out.dir, traj, grid, cfg);
    {
      auto f = fmt::output_file((out.dir / "kinetic_profiles.csv").string());
      f.print("cell,t_cell,x_cell,xi,p,q\n");
      for (std::size_t c = 0; c < ek.cells(); ++c) {
        for (int k = 0; k < xg.bins(); ++k) {
          f.print("{},{},{},{},{},{}\n", c, cells[c].it, cells[c].ix, num(xg.node(k)),
                  num(ek.p[c][static_cast<std::size_t>(k)]), num(ek.q[c][static_cast<std::size_t>(k)]));
        }
      }
    }
    {
      auto f = fmt::output_file((out.dir / "kinetic_defect.csv").string());
      f.print("cell,t_cell,x_cell,xi,n1,n2\n");
      for (std::size_t c = 0; c < dh.n2.size(); ++c) {
        for (int k = 0; k < xg.bins(); ++k) {
          f.print("{},{},{},{},{},{}\n", c, cells[c].it, cells[c].ix, num(xg.node(k)),
                  num(dh.n1[c][static_cast<std::size_t>(k)]), num(dh.n2[c][static_cast<std::size_t>(k)]));
        }
      }
    }
    {
      auto f = fmt::output_file((out.dir / "weights.csv").string());
      f.print("t_cell,x_cell,lambda1,lambda2,lambda3,v_bar,rho,kappa1,kappa2,low_confidence,var_u,var_v\n");
      for (std::size_t c = 0; c < wf.cells.size(); ++c) {
        const auto& w = wf.cells[c];
        f.print("{},{},{},{},{},{},{},{},{},{},{},{}\n", cells[c].it, cells[c].ix, num(w.lambda[0]),
                num(w.lambda[1]), num(w.lambda[2]), num(w.v_bar), num(w.rho), num(w.kappa1),
                num(w.kappa2), w.low_confidence ? 1 : 0, num(cm.var_u[c]), num(cm.var_v[c]));
      }
    }
    write_json(out.dir / "report.json", rep);
    write_json(out.dir / "timings.json", out.timings);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sweeps

inline bool strictly_decreasing(const std::vector<double>& x) {
  for (std::size_t k = 1; k < x.size(); ++k) {
    if (!(x[k] < x[k - 1])) return false;
  }
  return true;
}

/// x[k] <= (1 + slack) x[k-1] for every k.
inline bool decreasing_within(const std::vector<double>& x, double slack) {
  for (std::size_t k = 1; k < x.size(); ++k) {
    if (!(x[k] <= (1.0 + slack) * x[k - 1])) return false;
  }
  return true;
}

struct SweepSummary {
  std::vector<double> eps;  // strictly decreasing
  std::vector<RunSummary> members;
  PowerFit fit;
  bool fit_available = false;
  std::string fit_error;
  bool defect_decreasing = false;
  bool identity_decreasing = false;
  bool binarization_decreasing = false;
  bool rho_decreasing = false;  // within 20 %
  bool plotnikov_a_decreasing = false;

  std::vector<const RunSummary*> survivors() const {
    std::vector<const RunSummary*> s;
    for (const auto& m : members) {
      if (m.completed) s.push_back(&m);
    }
    return s;
  }
  bool checks_ok() const {
    bool members_ok = true;
    for (const auto& m : members) members_ok = members_ok && m.checks_ok();
    return members_ok && fit_available && !fit.degenerate && fit.slope >= 0.4 && defect_decreasing &&
           identity_decreasing && binarization_decreasing && rho_decreasing;
  }
};

inline std::string eps_label(double eps) { return fmt::format("eps_{:.3g}", eps); }

inline SweepSummary run_sweep(const RunConfig& cfg, std::vector<double> eps_list, bool parallel = true,
                              bool write = true) {
  if (eps_list.size() < 3) throw ValidationError("a sweep needs at least 3 eps values");
  for (double e : eps_list) {
    if (!(e > 0.0)) throw ValidationError("sweep eps values must be positive");
  }
  std::sort(eps_list.begin(), eps_list.end(), std::greater<>());
  if (std::adjacent_find(eps_list.begin(), eps_list.end()) != eps_list.end()) {
    throw ValidationError("sweep eps values must be distinct");
  }

  const std::filesystem::path root = std::filesystem::path(cfg.run.out_dir) / cfg.run.label;
  if (write) std::filesystem::create_directories(root);

  auto member = [&](double eps) {
    RunConfig c = cfg;
    c.solver.epsilon = eps;
    c.run.out_dir = root.string();
    c.run.label = eps_label(eps);
    try {
      return run_single(c, write).summary;
    } catch (const std::exception& e) {
      RunSummary failed;
      failed.epsilon = eps;
      failed.error = e.what();
      return failed;
    }
  };

  SweepSummary sw;
  sw.eps = eps_list;
  std::vector<std::future<RunSummary>> futures;
  for (double e : eps_list) {
    futures.push_back(std::async(parallel ? std::launch::async : std::launch::deferred, member, e));
  }
  for (auto& f : futures) sw.members.push_back(f.get());

  std::vector<double> fe, fd, ident, bin, rho, pa;
  for (const auto* m : sw.survivors()) {
    fe.push_back(m->epsilon);
    fd.push_back(m->apriori.defect_norm);
    ident.push_back(m->identity_mean);
    bin.push_back(m->binarization);
    rho.push_back(m->mean_rho);
    pa.push_back(m->plotnikov_a);
  }
  if (fe.size() >= 3) {
    try {
      sw.fit = sweep_fit(fe, fd);
      sw.fit_available = true;
    } catch (const FitError& e) {
      sw.fit_error = e.what();
    }
  } else {
    sw.fit_error = "fewer than 3 surviving members";
  }
  sw.defect_decreasing = strictly_decreasing(fd);
  sw.identity_decreasing = strictly_decreasing(ident);
  sw.binarization_decreasing = strictly_decreasing(bin);
  sw.rho_decreasing = decreasing_within(rho, 0.2);
  sw.plotnikov_a_decreasing = strictly_decreasing(pa);

  if (write) {
    auto f = fmt::output_file((root / "sweep.csv").string());
    f.print(
        "eps,status,defect_norm,scaled_defect_norm,grad_v_norm,mean_rho,identity_mean,identity_sup,"
        "pushforward_mean,binarization,populated_cells,plotnikov_a,mass_drift,checks\n");
    for (const auto& m : sw.members) {
      f.print("{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", num(m.epsilon),
              m.completed ? "ok" : "failed", num(m.apriori.defect_norm),
              num(m.apriori.scaled_defect_norm), num(m.apriori.grad_v_norm), num(m.mean_rho),
              num(m.identity_mean), num(m.identity_sup), num(m.pushforward_mean), num(m.binarization),
              m.populated_cells, num(m.plotnikov_a), num(m.apriori.max_mass_drift),
              m.checks_ok() ? "pass" : "fail");
    }
    Json j{{"schema_version", kReportSchemaVersion},
           {"label", cfg.run.label},
           {"eps", sw.eps},
           {"fit_available", sw.fit_available},
           {"fit_error", sw.fit_error},
           {"defect_slope", sw.fit.slope},
           {"defect_slope_ci95", {sw.fit.ci_low, sw.fit.ci_high}},
           {"fit_degenerate", sw.fit.degenerate},
           {"fit_points", sw.fit.points},
           {"trend_defect_decreasing", sw.defect_decreasing},
           {"trend_identity_decreasing", sw.identity_decreasing},
           {"trend_binarization_decreasing", sw.binarization_decreasing},
           {"trend_rho_decreasing_within_20pct", sw.rho_decreasing},
           {"trend_plotnikov_a_decreasing", sw.plotnikov_a_decreasing},
           {"failed_members", Json::array()},
           {"checks_ok", sw.checks_ok()}};
    for (const auto& m : sw.members) {
      if (!m.completed) j["failed_members"].push_back(Json{{"eps", m.epsilon}, {"error", m.error}});
    }
    write_json(root / "sweep.json", j);
  }
  return sw;
}

// ---------------------------------------------------------------------------
// Plotnikov comparison

struct PlotnikovComparison {
  RunSummary system;
  double w_difference_l2 = 0.0;  // ||w_plotnikov(T) - (u + v)(T)||
  double plotnikov_mass_drift = 0.0;
  bool valid = false;
};

inline PlotnikovComparison compare_plotnikov(const RunConfig& cfg, bool write = true) {
  const ReactionFunction rf = build_reaction(cfg);
  const PlotnikovMaps maps(rf);
  if (!maps.valid()) {
    throw ValidityError("Plotnikov comparison needs min F' > -1 (found " +
                        num(maps.min_slope()) + ")");
  }
  PlotnikovComparison pc;
  pc.valid = true;
  RunOutput sys = run_single(cfg, write);
  pc.system = sys.summary;

  const Grid1D grid = build_grid(cfg);
  const SolverConfig sc = build_solver_config(cfg, grid);
  const double dt = sc.effective_dt(grid);
  const FieldState& s0 = sys.trajectory.initial();
  PlotnikovState w0{s0.t, std::vector<double>(s0.u.size())};
  for (std::size_t j = 0; j < s0.u.size(); ++j) w0.w[j] = s0.u[j] + s0.v[j];
  SolverConfig pcfg = sc;
  pcfg.snapshot_stride = std::numeric_limits<int>::max();
  const auto traj = integrate<PlotnikovState>(w0, PlotnikovStepper<PlotnikovMaps>(grid, maps, pcfg),
                                              pcfg, dt);
  const PlotnikovState& wT = traj.final();
  const FieldState& sT = sys.trajectory.final();
  double diff = 0.0, m0 = 0.0, m1 = 0.0;
  for (std::size_t j = 0; j < wT.w.size(); ++j) {
    const double d = wT.w[j] - (sT.u[j] + sT.v[j]);
    diff += d * d * grid.h();
    m0 += w0.w[j] * grid.h();
    m1 += wT.w[j] * grid.h();
  }
  pc.w_difference_l2 = std::sqrt(diff);
  pc.plotnikov_mass_drift = std::abs(m1 - m0) / std::max(std::abs(m0), 1e-300);

  if (write) {
    auto f = fmt::output_file((sys.dir / "plotnikov.csv").string());
    f.print("x,w_plotnikov,A_w_plotnikov,w_system,v_system\n");
    for (std::size_t j = 0; j < wT.w.size(); ++j) {
      f.print("{},{},{},{},{}\n", num(grid.x(j)), num(wT.w[j]),
              num(maps.A(std::clamp(wT.w[j], 0.0, maps.w_max()))), num(sT.u[j] + sT.v[j]),
              num(sT.v[j]));
    }
    Json j{{"schema_version", kReportSchemaVersion},
           {"label", cfg.run.label},
           {"v_minus_A_w_norm", pc.system.plotnikov_a},
           {"k_vs_p_of_Iinv_sup", pc.system.plotnikov_b},
           {"pushforward_gap_mean", pc.system.plotnikov_c_mean},
           {"w_difference_l2_at_T", pc.w_difference_l2},
           {"plotnikov_mass_drift", pc.plotnikov_mass_drift}};
    write_json(sys.dir / "plotnikov.json", j);
  }
  return pc;
}

}  // namespace fastreact

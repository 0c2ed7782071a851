#pragma once

// Cell-averaged kinetic functions, Young-measure weights and the defect
// histogram, extracted from a trajectory of the fast-reaction system.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fastreact/error.hpp"
#include "fastreact/grid.hpp"
#include "fastreact/identities.hpp"
#include "fastreact/model.hpp"
#include "fastreact/solver.hpp"

namespace fastreact {

/// m uniform bins on [0, xi_max]; profiles are evaluated at bin centres.
class XiGrid {
 public:
  XiGrid(double xi_max, int m) : xi_max_(xi_max), m_(m) {
    if (!(xi_max > 0.0) || !std::isfinite(xi_max)) throw ValidationError("xi_max must be positive");
    if (m < 32) throw ValidationError("xi grid needs at least 32 bins");
  }
  double xi_max() const noexcept { return xi_max_; }
  int bins() const noexcept { return m_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(m_); }
  double width() const noexcept { return xi_max_ / m_; }
  double edge(int k) const noexcept { return width() * k; }
  double node(int k) const noexcept { return width() * (k + 0.5); }
  /// Bin index of xi, clamped into [0, m).
  int bin_of(double xi) const noexcept {
    const double r = std::floor(xi / width());
    if (!(r >= 0.0)) return 0;
    return r >= m_ ? m_ - 1 : static_cast<int>(r);
  }

 private:
  double xi_max_;
  int m_;
};

struct CellPartition {
  int cells_t = 32;
  int cells_x = 16;
  std::size_t min_samples = 16;

  void validate() const {
    if (cells_t < 1 || cells_x < 1) throw ValidationError("cell partition needs positive counts");
  }
  std::size_t count() const noexcept { return static_cast<std::size_t>(cells_t) * cells_x; }
};

/// Samples of one space-time cell. `weight` is the quadrature weight
/// (trapezoid in time times h) of each sample.
struct CellSamples {
  int it = 0;
  int ix = 0;
  std::vector<double> u;
  std::vector<double> v;
  std::vector<double> grad_v_sq;
  std::vector<double> weight;

  std::size_t size() const noexcept { return u.size(); }
};

/// Trapezoid weights over the snapshot times.
template <class State>
std::vector<double> trapezoid_weights(const Trajectory<State>& traj) {
  const std::size_t n = traj.size();
  std::vector<double> w(n, 0.0);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double dt = traj.snapshots[k + 1].t - traj.snapshots[k].t;
    w[k] += 0.5 * dt;
    w[k + 1] += 0.5 * dt;
  }
  return w;
}

/// Time cell of each snapshot: floor((t - t0) / (T - t0) * cells_t), with t = T
/// in the last cell.
template <class State>
int time_cell(const Trajectory<State>& traj, double t, int cells_t) {
  const double t0 = traj.initial().t;
  const double t1 = traj.final().t;
  if (!(t1 > t0)) return 0;
  const int c = static_cast<int>(std::floor((t - t0) / (t1 - t0) * cells_t));
  return std::clamp(c, 0, cells_t - 1);
}

inline std::vector<CellSamples> sample_cells(const Trajectory<FieldState>& traj, const Grid1D& grid,
                                             const CellPartition& part) {
  part.validate();
  const std::size_t n = grid.size();
  if (static_cast<std::size_t>(part.cells_x) > n) {
    throw PartitionError("more space cells than grid cells");
  }
  std::vector<CellSamples> cells(part.count());
  for (int it = 0; it < part.cells_t; ++it) {
    for (int ix = 0; ix < part.cells_x; ++ix) {
      auto& c = cells[static_cast<std::size_t>(it) * part.cells_x + ix];
      c.it = it;
      c.ix = ix;
    }
  }
  const std::vector<double> tw = trapezoid_weights(traj);
  const double h = grid.h();
  for (std::size_t s = 0; s < traj.size(); ++s) {
    const FieldState& st = traj.snapshots[s];
    if (st.u.size() != n || st.v.size() != n) throw ValidationError("snapshot size mismatch");
    const int it = time_cell(traj, st.t, part.cells_t);
    for (std::size_t j = 0; j < n; ++j) {
      const int ix = static_cast<int>(j * static_cast<std::size_t>(part.cells_x) / n);
      auto& c = cells[static_cast<std::size_t>(it) * part.cells_x + ix];
      const double left = st.v[j == 0 ? 0 : j - 1];
      const double right = st.v[j + 1 == n ? n - 1 : j + 1];
      const double g = (right - left) / (2.0 * h);
      c.u.push_back(st.u[j]);
      c.v.push_back(st.v[j]);
      c.grad_v_sq.push_back(g * g);
      c.weight.push_back(tw[s] * h);
    }
  }
  for (const auto& c : cells) {
    if (c.size() < part.min_samples) {
      throw PartitionError("cell (t " + std::to_string(c.it) + ", x " + std::to_string(c.ix) +
                           ") holds " + std::to_string(c.size()) + " samples, fewer than " +
                           std::to_string(part.min_samples));
    }
  }
  return cells;
}

// ---------------------------------------------------------------------------
// Kinetic profiles

/// Piecewise-linear view of a profile sampled at the bin centres; flat beyond
/// the end nodes and 0 for xi <= 0.
class KineticProfile {
 public:
  KineticProfile(std::span<const double> values, const XiGrid& grid)
      : values_(values), grid_(&grid) {}

  double operator()(double xi) const noexcept {
    if (xi <= 0.0) return 0.0;
    const double pos = xi / grid_->width() - 0.5;
    if (pos <= 0.0) return values_.front();
    const auto last = static_cast<double>(values_.size() - 1);
    if (pos >= last) return values_.back();
    const auto k = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(k);
    return values_[k] + frac * (values_[k + 1] - values_[k]);
  }

 private:
  std::span<const double> values_;
  const XiGrid* grid_;
};

/// Fraction of a sample set with 0 < xi <= value: the exact cell average of
/// chi_value(xi), used where interpolation error must be avoided.
class SampleKinetic {
 public:
  explicit SampleKinetic(std::vector<double> values) : sorted_(std::move(values)) {
    std::sort(sorted_.begin(), sorted_.end());
  }
  double operator()(double xi) const noexcept {
    if (xi <= 0.0 || sorted_.empty()) return 0.0;
    const auto it = std::lower_bound(sorted_.begin(), sorted_.end(), xi);
    return static_cast<double>(sorted_.end() - it) / static_cast<double>(sorted_.size());
  }

 private:
  std::vector<double> sorted_;
};

struct EmpiricalKinetic {
  XiGrid grid;
  int cells_t = 0;
  int cells_x = 0;
  std::vector<std::vector<double>> p;  // [cell][bin]
  std::vector<std::vector<double>> q;
  std::vector<double> mean_u;
  std::vector<double> mean_v;

  std::size_t cells() const noexcept { return p.size(); }
  KineticProfile p_profile(std::size_t c) const { return {p[c], grid}; }
  KineticProfile q_profile(std::size_t c) const { return {q[c], grid}; }
};

namespace detail {
inline std::vector<double> indicator_average(std::span<const double> samples, const XiGrid& g) {
  std::vector<double> out(g.size(), 0.0);
  for (double s : samples) {
    for (int k = 0; k < g.bins() && g.node(k) <= s; ++k) out[static_cast<std::size_t>(k)] += 1.0;
  }
  const auto n = static_cast<double>(samples.size());
  for (double& x : out) x /= n;
  return out;
}

inline double mean(std::span<const double> x) {
  double acc = 0.0;
  for (double e : x) acc += e;
  return x.empty() ? 0.0 : acc / static_cast<double>(x.size());
}

inline double variance(std::span<const double> x) {
  const double m = mean(x);
  double acc = 0.0;
  for (double e : x) acc += (e - m) * (e - m);
  return x.empty() ? 0.0 : acc / static_cast<double>(x.size());
}
}  // namespace detail

/// p(cell, xi_k) = mean of 1_{0 < xi_k <= u}; q likewise from v.
inline EmpiricalKinetic empirical_kinetic(std::span<const CellSamples> cells,
                                          const CellPartition& part, const XiGrid& xg) {
  EmpiricalKinetic ek{xg, part.cells_t, part.cells_x, {}, {}, {}, {}};
  ek.p.reserve(cells.size());
  ek.q.reserve(cells.size());
  for (const auto& c : cells) {
    ek.p.push_back(detail::indicator_average(c.u, xg));
    ek.q.push_back(detail::indicator_average(c.v, xg));
    ek.mean_u.push_back(detail::mean(c.u));
    ek.mean_v.push_back(detail::mean(c.v));
  }
  return ek;
}

// ---------------------------------------------------------------------------
// Young-measure weights

struct CellWeights {
  std::array<double, 3> lambda{};
  std::array<std::size_t, 3> count{};
  double kappa1 = 0.0;
  double kappa2 = 0.0;
  double v_bar = 0.0;
  double rho = 0.0;
  bool low_confidence = false;
};

struct WeightField {
  int cells_t = 0;
  int cells_x = 0;
  std::vector<CellWeights> cells;

  double mean_rho() const {
    double acc = 0.0;
    for (const auto& c : cells) acc += c.rho;
    return cells.empty() ? 0.0 : acc / static_cast<double>(cells.size());
  }
};

/// Fractions of counts that sum to exactly 1 in floating point.
inline std::array<double, 3> exact_fractions(const std::array<std::size_t, 3>& count) {
  const auto n = static_cast<double>(count[0] + count[1] + count[2]);
  std::array<double, 3> lam{};
  if (n == 0.0) return lam;
  for (int i = 0; i < 3; ++i) lam[i] = static_cast<double>(count[i]) / n;
  const auto big = static_cast<int>(std::max_element(count.begin(), count.end()) - count.begin());
  auto total = [&] { return lam[0] + lam[1] + lam[2]; };
  // Walk one component a few ulps either way until the ordered sum hits 1;
  // try the dominant share first.
  for (int shift = 0; shift < 3 && total() != 1.0; ++shift) {
    const int i = (big + shift) % 3;
    if (count[static_cast<std::size_t>(i)] == 0) continue;
    const double base = lam[i];
    for (int k = 1; k <= 32 && total() != 1.0; ++k) {
      for (double dir : {2.0, -1.0}) {
        lam[i] = base;
        for (int step = 0; step < k; ++step) lam[i] = std::nextafter(lam[i], dir);
        if (total() == 1.0) break;
      }
    }
    if (total() != 1.0) lam[i] = base;
  }
  return lam;
}

inline CellWeights classify_cell(std::span<const double> u, double v_bar, const BranchInverses& bi,
                                 double fold_guard) {
  CellWeights w;
  w.v_bar = v_bar;
  const double delta = fold_guard * (bi.f_plus() - bi.f_minus());
  w.low_confidence =
      std::abs(v_bar - bi.f_minus()) <= delta || std::abs(v_bar - bi.f_plus()) <= delta;

  std::array<bool, 3> available{true, true, true};
  if (!(v_bar > bi.f_minus() && v_bar < bi.f_plus())) {
    available = {v_bar <= bi.f_minus(), false, v_bar >= bi.f_plus()};
  }
  const std::array<double, 3> roots{bi.S(1, v_bar), bi.S(2, v_bar), bi.S(3, v_bar)};
  double dist_sum = 0.0;
  for (double x : u) {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 3; ++i) {
      if (!available[i]) continue;
      const double d = std::abs(x - roots[i]);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    ++w.count[static_cast<std::size_t>(best)];
    dist_sum += best_d;
  }
  w.lambda = exact_fractions(w.count);
  w.rho = u.empty() ? 0.0 : dist_sum / static_cast<double>(u.size());
  w.kappa1 = 1.0 - w.lambda[0];
  w.kappa2 = w.lambda[2];
  return w;
}

inline WeightField young_weights(std::span<const CellSamples> cells, const CellPartition& part,
                                 const BranchInverses& bi, double fold_guard) {
  WeightField wf{part.cells_t, part.cells_x, {}};
  wf.cells.reserve(cells.size());
  for (const auto& c : cells) wf.cells.push_back(classify_cell(c.u, detail::mean(c.v), bi, fold_guard));
  return wf;
}

// ---------------------------------------------------------------------------
// Defect measure

struct DefectHistogram {
  XiGrid grid;
  std::vector<std::vector<double>> n2;  // [cell][bin]
  std::vector<std::vector<double>> n1;
  double total_n2 = 0.0;
  double total_n1 = 0.0;
};

/// Adds `mass` spread with uniform density over [a, b] (clipped to the grid);
/// a degenerate or fully clipped segment goes to the single containing bin.
inline void deposit_segment(std::vector<double>& bins, const XiGrid& g, double a, double b,
                            double mass) {
  if (a > b) std::swap(a, b);
  const double lo = std::clamp(a, 0.0, g.xi_max());
  const double hi = std::clamp(b, 0.0, g.xi_max());
  if (!(hi > lo)) {
    bins[static_cast<std::size_t>(g.bin_of(lo))] += mass;
    return;
  }
  const int k0 = g.bin_of(lo);
  const int k1 = g.bin_of(hi);
  if (k0 == k1) {
    bins[static_cast<std::size_t>(k0)] += mass;
    return;
  }
  const double density = mass / (hi - lo);
  double placed = 0.0;
  for (int k = k0; k < k1; ++k) {
    const double part = density * (std::min(hi, g.edge(k + 1)) - std::max(lo, g.edge(k)));
    bins[static_cast<std::size_t>(k)] += part;
    placed += part;
  }
  bins[static_cast<std::size_t>(k1)] += mass - placed;
}

inline DefectHistogram defect_measure(std::span<const CellSamples> cells, const ReactionFunction& rf,
                                      const XiGrid& xg, double epsilon) {
  if (!(epsilon > 0.0)) throw ValidationError("epsilon must be positive");
  DefectHistogram dh{xg, {}, {}, 0.0, 0.0};
  for (const auto& c : cells) {
    std::vector<double> n2(xg.size(), 0.0);
    std::vector<double> n1(xg.size(), 0.0);
    for (std::size_t s = 0; s < c.size(); ++s) {
      const double fu = rf.value(c.u[s]);
      const double d = c.v[s] - fu;
      const double mass = d * d / epsilon * c.weight[s];
      deposit_segment(n2, xg, fu, c.v[s], mass);
      dh.total_n2 += mass;
      const double g = c.grad_v_sq[s] * c.weight[s];
      n1[static_cast<std::size_t>(xg.bin_of(c.v[s]))] += g;
      dh.total_n1 += g;
    }
    dh.n2.push_back(std::move(n2));
    dh.n1.push_back(std::move(n1));
  }
  return dh;
}

// ---------------------------------------------------------------------------
// Concentration metrics

struct ConcentrationMetrics {
  double binarization_fraction = 0.0;
  std::vector<double> var_u;
  std::vector<double> var_v;
  // [cell of the later time slab][branch]; empty when cells_t == 1
  std::vector<std::array<double, 3>> dlambda_dt;
  double max_abs_dlambda_dt = 0.0;
};

inline ConcentrationMetrics concentration_metrics(const EmpiricalKinetic& ek,
                                                  std::span<const CellSamples> cells,
                                                  const WeightField& wf, double cell_dt) {
  ConcentrationMetrics m;
  std::size_t mid = 0;
  std::size_t total = 0;
  for (const auto& row : ek.q) {
    for (double x : row) {
      if (x > 0.1 && x < 0.9) ++mid;
      ++total;
    }
  }
  m.binarization_fraction = total ? static_cast<double>(mid) / static_cast<double>(total) : 0.0;
  for (const auto& c : cells) {
    m.var_u.push_back(detail::variance(c.u));
    m.var_v.push_back(detail::variance(c.v));
  }
  if (wf.cells_t > 1 && cell_dt > 0.0) {
    for (int it = 1; it < wf.cells_t; ++it) {
      for (int ix = 0; ix < wf.cells_x; ++ix) {
        const auto& now = wf.cells[static_cast<std::size_t>(it) * wf.cells_x + ix];
        const auto& before = wf.cells[static_cast<std::size_t>(it - 1) * wf.cells_x + ix];
        std::array<double, 3> d{};
        for (int i = 0; i < 3; ++i) {
          d[i] = (now.lambda[i] - before.lambda[i]) / cell_dt;
          m.max_abs_dlambda_dt = std::max(m.max_abs_dlambda_dt, std::abs(d[i]));
        }
        m.dlambda_dt.push_back(d);
      }
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Identity residuals on empirical data

/// Rate values kept for identity evaluation: [g xi_max, (1 - g) xi_max]
/// without the fold bands |xi - f_pm| <= delta_fold.
struct RetainedBand {
  double lo;
  double hi;
  double f_minus;
  double f_plus;
  double delta;

  bool contains(double xi) const noexcept {
    return xi >= lo && xi <= hi && std::abs(xi - f_minus) > delta && std::abs(xi - f_plus) > delta;
  }
};

inline RetainedBand retained_band(const BranchInverses& bi, const XiGrid& xg, double guard_band,
                                  double fold_guard) {
  return {guard_band * xg.xi_max(), (1.0 - guard_band) * xg.xi_max(), bi.f_minus(), bi.f_plus(),
          fold_guard * (bi.f_plus() - bi.f_minus())};
}

struct ResidualStats {
  double sup = 0.0;
  double mean = 0.0;
  std::size_t count = 0;
};

/// Per cell: sup over retained bin centres of |q - pushforward(p)|.
inline std::vector<double> pushforward_residual(const EmpiricalKinetic& ek, const BranchInverses& bi,
                                                const RetainedBand& band) {
  std::vector<double> out;
  out.reserve(ek.cells());
  for (std::size_t c = 0; c < ek.cells(); ++c) {
    const auto p = ek.p_profile(c);
    const auto q = ek.q_profile(c);
    double sup = 0.0;
    for (int k = 0; k < ek.grid.bins(); ++k) {
      const double xi = ek.grid.node(k);
      if (band.contains(xi)) sup = std::max(sup, pushforward_gap(p, q, bi, xi));
    }
    out.push_back(sup);
  }
  return out;
}

/// Draws pairs (eta, xi) uniformly from the retained band.
class PairSampler {
 public:
  PairSampler(const RetainedBand& band, std::uint64_t seed) : band_(band), rng_(seed) {
    if (!(band.hi > band.lo)) throw ValidationError("retained identity band is empty");
  }
  double draw() {
    std::uniform_real_distribution<double> dist(band_.lo, band_.hi);
    for (;;) {
      const double x = dist(rng_);
      if (band_.contains(x)) return x;
    }
  }

 private:
  RetainedBand band_;
  std::mt19937_64 rng_;
};

inline ResidualStats kinetic_identity_residual(const EmpiricalKinetic& ek, const BranchInverses& bi,
                                               const RetainedBand& band, int pairs_per_cell,
                                               std::uint64_t seed) {
  if (pairs_per_cell < 1) throw ValidationError("pairs_per_cell must be positive");
  PairSampler sampler(band, seed);
  ResidualStats st;
  double acc = 0.0;
  for (std::size_t c = 0; c < ek.cells(); ++c) {
    const auto p = ek.p_profile(c);
    const auto q = ek.q_profile(c);
    for (int k = 0; k < pairs_per_cell; ++k) {
      const double eta = sampler.draw();
      const double xi = sampler.draw();
      const double r = main_identity_gap(p, q, bi, eta, xi);
      st.sup = std::max(st.sup, r);
      acc += r;
      ++st.count;
    }
  }
  st.mean = st.count ? acc / static_cast<double>(st.count) : 0.0;
  return st;
}

}  // namespace fastreact

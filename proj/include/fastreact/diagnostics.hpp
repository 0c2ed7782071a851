#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "fastreact/error.hpp"
#include "fastreact/grid.hpp"
#include "fastreact/kinetics.hpp"
#include "fastreact/model.hpp"
#include "fastreact/solver.hpp"

namespace fastreact {

/// Midpoint quadrature of u + v.
inline double total_mass(const FieldState& s, const Grid1D& grid) {
  double acc = 0.0;
  for (std::size_t j = 0; j < s.u.size(); ++j) acc += s.u[j] + s.v[j];
  return acc * grid.h();
}

inline double energy(const FieldState& s, const ReactionFunction& rf, const Grid1D& grid) {
  double acc = 0.0;
  for (std::size_t j = 0; j < s.u.size(); ++j) {
    acc += rf.primitive(std::max(s.u[j], 0.0)) + 0.5 * s.v[j] * s.v[j];
  }
  return acc * grid.h();
}

struct EnergyTrace {
  std::vector<double> energy;
  double max_increase = 0.0;  // largest E(t_{k+1}) - E(t_k), 0 if nonincreasing

  bool nonincreasing(double rel_tol) const {
    return energy.empty() || max_increase <= rel_tol * std::abs(energy.front());
  }
};

inline EnergyTrace energy_trace(const Trajectory<FieldState>& traj, const ReactionFunction& rf,
                                const Grid1D& grid) {
  EnergyTrace et;
  for (const auto& s : traj.snapshots) et.energy.push_back(energy(s, rf, grid));
  for (std::size_t k = 1; k < et.energy.size(); ++k) {
    et.max_increase = std::max(et.max_increase, et.energy[k] - et.energy[k - 1]);
  }
  return et;
}

struct AprioriReport {
  double M_bound = 0.0;
  double max_u = 0.0;
  double max_v = 0.0;
  double min_u = 0.0;
  double min_v = 0.0;
  double grad_v_norm = 0.0;       // ||grad v||_{L2(time x space)}
  double scaled_defect_norm = 0.0;  // ||(F(u) - v)/sqrt(eps)||
  double eps_lap_norm = 0.0;      // ||sqrt(eps) Lap v||
  double defect_norm = 0.0;       // ||F(u) - v||
  double max_mass_drift = 0.0;    // relative
  bool bound_violation = false;
  bool negativity_violation = false;
};

inline double bound_M(const FieldState& s0, const ReactionFunction& rf, const BranchStructure& bs) {
  double m = std::max(bs.f_plus, bs.beta_plus);
  for (std::size_t j = 0; j < s0.u.size(); ++j) {
    m = std::max({m, std::abs(rf.value(s0.u[j])), std::abs(s0.u[j]), std::abs(s0.v[j])});
  }
  return m;
}

inline AprioriReport apriori_report(const Trajectory<FieldState>& traj, const ReactionFunction& rf,
                                    const BranchStructure& bs, const Grid1D& grid, double epsilon,
                                    double bound_tol = 1e-6, double neg_tol = 1e-8) {
  if (!(epsilon > 0.0)) throw ValidationError("epsilon must be positive");
  AprioriReport r;
  r.M_bound = bound_M(traj.initial(), rf, bs);
  r.max_u = r.max_v = -std::numeric_limits<double>::infinity();
  r.min_u = r.min_v = std::numeric_limits<double>::infinity();
  const std::vector<double> tw = trapezoid_weights(traj);
  const double h = grid.h();
  const double mass0 = total_mass(traj.initial(), grid);
  double grad = 0.0, defect = 0.0, lap = 0.0;
  std::vector<double> lv(grid.size());
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const FieldState& s = traj.snapshots[k];
    const std::size_t n = s.u.size();
    double g = 0.0, d = 0.0, l = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      r.max_u = std::max(r.max_u, s.u[j]);
      r.max_v = std::max(r.max_v, s.v[j]);
      r.min_u = std::min(r.min_u, s.u[j]);
      r.min_v = std::min(r.min_v, s.v[j]);
      const double e = rf.value(s.u[j]) - s.v[j];
      d += e * e;
    }
    for (std::size_t j = 0; j + 1 < n; ++j) {
      const double f = (s.v[j + 1] - s.v[j]) / h;
      g += f * f;
    }
    neumann_laplacian(s.v, lv, h);
    for (double x : lv) l += x * x;
    grad += tw[k] * g * h;
    defect += tw[k] * d * h;
    lap += tw[k] * l * h;
    const double scale = mass0 != 0.0 ? std::abs(mass0) : 1.0;
    r.max_mass_drift = std::max(r.max_mass_drift, std::abs(total_mass(s, grid) - mass0) / scale);
  }
  r.grad_v_norm = std::sqrt(grad);
  r.defect_norm = std::sqrt(defect);
  r.scaled_defect_norm = std::sqrt(defect / epsilon);
  r.eps_lap_norm = std::sqrt(epsilon * lap);
  r.bound_violation = std::max(r.max_u, r.max_v) > r.M_bound + bound_tol;
  r.negativity_violation = std::min(r.min_u, r.min_v) < -neg_tol;
  return r;
}

/// Space-time norms accumulated after every step (trapezoid over all step
/// times), with extrema and mass drift checked at every step as well.
class StepNorms {
 public:
  StepNorms(const FieldState& initial, const ReactionFunction& rf, const Grid1D& grid)
      : rf_(&rf), grid_(grid), mass0_(total_mass(initial, grid)), lap_(grid.size()) {
    last_ = snapshot_terms(initial);
    track_extrema(initial);
    energy0_ = last_energy_ = energy(initial, rf, grid);
  }

  void operator()(const FieldState& before, const FieldState& after) {
    const Terms now = snapshot_terms(after);
    const double dt = after.t - before.t;
    grad_ += 0.5 * dt * (last_.grad + now.grad);
    defect_ += 0.5 * dt * (last_.defect + now.defect);
    lap_sq_ += 0.5 * dt * (last_.lap + now.lap);
    last_ = now;
    track_extrema(after);
    const double scale = mass0_ != 0.0 ? std::abs(mass0_) : 1.0;
    drift_ = std::max(drift_, std::abs(total_mass(after, grid_) - mass0_) / scale);
    const double e = energy(after, *rf_, grid_);
    max_energy_increase_ = std::max(max_energy_increase_, e - last_energy_);
    last_energy_ = e;
  }

  /// Fills the norm, extremum and drift fields of a report.
  AprioriReport report(double M_bound, double epsilon, double bound_tol = 1e-6,
                       double neg_tol = 1e-8) const {
    AprioriReport r;
    r.M_bound = M_bound;
    r.max_u = max_u_;
    r.max_v = max_v_;
    r.min_u = min_u_;
    r.min_v = min_v_;
    r.grad_v_norm = std::sqrt(grad_);
    r.defect_norm = std::sqrt(defect_);
    r.scaled_defect_norm = std::sqrt(defect_ / epsilon);
    r.eps_lap_norm = std::sqrt(epsilon * lap_sq_);
    r.max_mass_drift = drift_;
    r.bound_violation = std::max(max_u_, max_v_) > M_bound + bound_tol;
    r.negativity_violation = std::min(min_u_, min_v_) < -neg_tol;
    return r;
  }

  double max_energy_increase() const noexcept { return max_energy_increase_; }
  double initial_energy() const noexcept { return energy0_; }

 private:
  struct Terms {
    double grad = 0.0;
    double defect = 0.0;
    double lap = 0.0;
  };

  Terms snapshot_terms(const FieldState& s) {
    Terms t;
    const double h = grid_.h();
    const std::size_t n = s.u.size();
    for (std::size_t j = 0; j < n; ++j) {
      const double e = rf_->value(s.u[j]) - s.v[j];
      t.defect += e * e * h;
    }
    for (std::size_t j = 0; j + 1 < n; ++j) {
      const double f = (s.v[j + 1] - s.v[j]) / h;
      t.grad += f * f * h;
    }
    neumann_laplacian(s.v, lap_, h);
    for (double x : lap_) t.lap += x * x * h;
    return t;
  }

  void track_extrema(const FieldState& s) {
    for (std::size_t j = 0; j < s.u.size(); ++j) {
      max_u_ = std::max(max_u_, s.u[j]);
      max_v_ = std::max(max_v_, s.v[j]);
      min_u_ = std::min(min_u_, s.u[j]);
      min_v_ = std::min(min_v_, s.v[j]);
    }
  }

  const ReactionFunction* rf_;
  Grid1D grid_;
  double mass0_;
  std::vector<double> lap_;
  Terms last_;
  double grad_ = 0.0, defect_ = 0.0, lap_sq_ = 0.0, drift_ = 0.0;
  double max_u_ = -std::numeric_limits<double>::infinity();
  double max_v_ = -std::numeric_limits<double>::infinity();
  double min_u_ = std::numeric_limits<double>::infinity();
  double min_v_ = std::numeric_limits<double>::infinity();
  double energy0_ = 0.0;
  double last_energy_ = 0.0;
  double max_energy_increase_ = 0.0;
};

struct PowerFit {
  double slope = 0.0;
  double intercept = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t points = 0;
  bool degenerate = false;
};

/// Least-squares slope of log(defect) against log(eps) with a 95% interval.
/// Any nonpositive defect makes the fit degenerate.
inline PowerFit sweep_fit(std::span<const double> eps, std::span<const double> defect) {
  if (eps.size() != defect.size()) throw FitError("eps and defect lists differ in length");
  if (eps.size() < 3) throw FitError("a rate fit needs at least 3 points");
  PowerFit fit;
  fit.points = eps.size();
  for (std::size_t k = 0; k < eps.size(); ++k) {
    if (!(eps[k] > 0.0)) throw FitError("eps values must be positive");
    if (!(defect[k] > 0.0) || !std::isfinite(defect[k])) {
      fit.degenerate = true;
      return fit;
    }
  }
  const auto n = static_cast<double>(eps.size());
  double sx = 0.0, sy = 0.0;
  for (std::size_t k = 0; k < eps.size(); ++k) {
    sx += std::log(eps[k]);
    sy += std::log(defect[k]);
  }
  const double mx = sx / n;
  const double my = sy / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < eps.size(); ++k) {
    const double dx = std::log(eps[k]) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(defect[k]) - my);
  }
  if (!(sxx > 0.0)) throw FitError("eps values must not all coincide");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sse = 0.0;
  for (std::size_t k = 0; k < eps.size(); ++k) {
    const double res = std::log(defect[k]) - (fit.intercept + fit.slope * std::log(eps[k]));
    sse += res * res;
  }
  const double se = std::sqrt(sse / (n - 2.0) / sxx);
  const boost::math::students_t dist(n - 2.0);
  const double tq = boost::math::quantile(boost::math::complement(dist, 0.025));
  fit.ci_low = fit.slope - tq * se;
  fit.ci_high = fit.slope + tq * se;
  return fit;
}

}  // namespace fastreact

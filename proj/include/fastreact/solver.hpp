#pragma once

// Time integration of
//   u_t = (v - F(u)) / eps,   v_t = v_xx + (F(u) - v) / eps
// and of the pseudo-parabolic regularization
//   w_t = (A(w))_xx + eps (w_t)_xx
// on a 1-D Neumann grid.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "fastreact/error.hpp"
#include "fastreact/grid.hpp"
#include "fastreact/model.hpp"

namespace fastreact {

struct FieldState {
  double t = 0.0;
  std::vector<double> u;
  std::vector<double> v;
};

struct PlotnikovState {
  double t = 0.0;
  std::vector<double> w;
};

struct SolverConfig {
  double epsilon = 1e-3;
  double dt = 0.0;  // <= 0 selects min(0.25 h^2, 10 eps)
  double T = 1.0;
  double newton_tol = 1e-12;
  int max_newton = 50;
  int snapshot_stride = 1;
  double theta = 1.0;
  int max_halvings = 8;
  double tol_neg = 1e-12;

  void validate() const {
    if (!(epsilon > 0.0)) throw ValidationError("epsilon must be positive");
    if (!(dt >= 0.0)) throw ValidationError("dt must be nonnegative (0 = automatic)");
    if (!(T >= 0.0)) throw ValidationError("horizon T must be nonnegative");
    if (!(theta >= 0.5 && theta <= 1.0)) throw ValidationError("theta must lie in [0.5, 1]");
    if (!(newton_tol > 0.0)) throw ValidationError("newton_tol must be positive");
    if (max_newton < 1) throw ValidationError("max_newton must be at least 1");
    if (snapshot_stride < 1) throw ValidationError("snapshot_stride must be at least 1");
    if (max_halvings < 0) throw ValidationError("max_halvings must be nonnegative");
  }

  double effective_dt(const Grid1D& grid) const {
    if (dt > 0.0) return dt;
    return std::min(0.25 * grid.h() * grid.h(), 10.0 * epsilon);
  }
};

// ---------------------------------------------------------------------------
// Initial data

struct ConstantProfile {
  double u0;
  double v0;
};

/// u0 = mean + sum_k a_k cos(k pi x / L), k = 1, 2, ...; v0 = F(u0).
struct CosineSumProfile {
  double mean;
  std::vector<double> amplitudes;
};

/// Plateaus u_left on [0, x_a] and u_right on [x_b, L] joined by a cosine
/// ramp. An optional perturbation amp * cos(mode pi x / L) is tapered by
/// 4 b (1 - b), b the ramp, so it vanishes on both plateaus. v0 = F(u0).
struct PlateauBlendProfile {
  double u_left;
  double u_right;
  double x_a;
  double x_b;
  double amplitude = 0.0;
  int mode = 0;
};

using ProfileSpec = std::variant<ConstantProfile, CosineSumProfile, PlateauBlendProfile>;

inline FieldState init_fields(const Grid1D& grid, const ProfileSpec& spec,
                              const ReactionFunction& rf) {
  FieldState s;
  s.u.resize(grid.size());
  s.v.resize(grid.size());
  const double L = grid.length();
  const double pi = std::numbers::pi;

  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, ConstantProfile>) {
          if (p.u0 < 0.0 || p.v0 < 0.0) throw ValidationError("initial data must be nonnegative");
          std::fill(s.u.begin(), s.u.end(), p.u0);
          std::fill(s.v.begin(), s.v.end(), p.v0);
          return;
        } else if constexpr (std::is_same_v<P, CosineSumProfile>) {
          for (std::size_t j = 0; j < grid.size(); ++j) {
            double u = p.mean;
            for (std::size_t k = 0; k < p.amplitudes.size(); ++k) {
              u += p.amplitudes[k] * std::cos(static_cast<double>(k + 1) * pi * grid.x(j) / L);
            }
            s.u[j] = u;
          }
        } else {
          if (!(p.x_a >= 0.0 && p.x_a < p.x_b && p.x_b <= L)) {
            throw ValidationError("plateau-blend needs 0 <= x_a < x_b <= L");
          }
          if (p.mode < 0) throw ValidationError("perturbation mode must be nonnegative");
          for (std::size_t j = 0; j < grid.size(); ++j) {
            const double x = grid.x(j);
            double b = 0.0;
            if (x >= p.x_b) {
              b = 1.0;
            } else if (x > p.x_a) {
              b = 0.5 * (1.0 - std::cos(pi * (x - p.x_a) / (p.x_b - p.x_a)));
            }
            double u = p.u_left + (p.u_right - p.u_left) * b;
            if (p.mode > 0) u += p.amplitude * 4.0 * b * (1.0 - b) * std::cos(p.mode * pi * x / L);
            s.u[j] = u;
          }
        }
        for (std::size_t j = 0; j < grid.size(); ++j) {
          if (s.u[j] < 0.0) {
            throw ValidationError("initial profile is negative at x = " + std::to_string(grid.x(j)));
          }
          if (s.u[j] > rf.u_max()) {
            throw ValidationError("initial profile exceeds u_max at x = " +
                                  std::to_string(grid.x(j)));
          }
          s.v[j] = rf.value(s.u[j]);
        }
      },
      spec);
  return s;
}

// ---------------------------------------------------------------------------
// Steppers

struct StepStats {
  int max_newton_iterations = 0;
  std::size_t clamped_negatives = 0;
};

namespace detail {

// Backward Euler for the cellwise reaction over tau: with r = tau / eps and
// s = u + v fixed, solve x - u - r (s - x - F(x)) = 0. The root lies in [0, s]
// for nonnegative data, which brackets the damped Newton iteration.
inline std::pair<double, int> reaction_solve(double u, double v, double tau,
                                             const ReactionFunction& rf,
                                             const SolverConfig& cfg, std::size_t cell) {
  const double r = tau / cfg.epsilon;
  const double s = u + v;
  const auto g = [&](double x) { return (x - u) - r * ((s - x) - rf.value(x)); };
  const double scale = 1.0 + std::abs(u) + r * (std::abs(s) + std::abs(rf.value(u)));
  const double tol = cfg.newton_tol * scale;

  double lo = std::min(0.0, std::min(u, s));
  double hi = std::max(s, u);
  double x = u;
  double gx = g(x);
  for (int it = 0; it <= cfg.max_newton; ++it) {
    if (std::abs(gx) <= tol) return {x, it};
    if (gx < 0.0) {
      lo = std::max(lo, x);
    } else {
      hi = std::min(hi, x);
    }
    const double dg = 1.0 + r * (1.0 + rf.slope(x));
    double step = dg > 0.0 ? -gx / dg : 0.0;
    double next = x + step;
    double gnext = 0.0;
    bool accepted = false;
    for (int damp = 0; damp <= 8 && dg > 0.0; ++damp) {
      if (next > lo && next < hi) {
        gnext = g(next);
        if (std::abs(gnext) < std::abs(gx)) {
          accepted = true;
          break;
        }
      }
      step *= 0.5;
      next = x + step;
    }
    if (!accepted) {
      next = 0.5 * (lo + hi);
      gnext = g(next);
    }
    if (std::abs(next - x) <= cfg.newton_tol * (1.0 + std::abs(x)) && std::abs(gnext) <= 1e3 * tol) {
      return {next, it + 1};
    }
    x = next;
    gx = gnext;
  }
  throw StepFailure(cell, "reaction Newton did not converge in cell " + std::to_string(cell));
}

inline void clamp_negatives(std::vector<double>& f, double tol, StepStats& stats) {
  for (double& x : f) {
    if (x < -tol) {
      x = -tol;
      ++stats.clamped_negatives;
    }
  }
}

}  // namespace detail

inline void reaction_substep(FieldState& s, double tau, const ReactionFunction& rf,
                             const SolverConfig& cfg, StepStats& stats) {
  for (std::size_t j = 0; j < s.u.size(); ++j) {
    const auto [x, iters] = detail::reaction_solve(s.u[j], s.v[j], tau, rf, cfg, j);
    s.v[j] -= x - s.u[j];
    s.u[j] = x;
    stats.max_newton_iterations = std::max(stats.max_newton_iterations, iters);
  }
}

// theta-scheme in increment form: (I - theta dt Lap) dv = dt Lap v.
inline void diffusion_substep(std::vector<double>& v, double dt, double theta, const Grid1D& grid) {
  thread_local std::vector<double> inc;
  inc.resize(v.size());
  neumann_laplacian(v, inc, grid.h());
  for (double& x : inc) x *= dt;
  solve_shifted_neumann(theta * dt, grid.h(), inc);
  for (std::size_t j = 0; j < v.size(); ++j) v[j] += inc[j];
}

/// One Strang step: half reaction, full diffusion on v, half reaction.
inline FieldState step_system(const FieldState& state, const Grid1D& grid,
                              const ReactionFunction& rf, const SolverConfig& cfg, double dt,
                              StepStats* stats = nullptr) {
  StepStats local;
  StepStats& st = stats ? *stats : local;
  FieldState next = state;
  reaction_substep(next, 0.5 * dt, rf, cfg, st);
  diffusion_substep(next.v, dt, cfg.theta, grid);
  reaction_substep(next, 0.5 * dt, rf, cfg, st);
  detail::clamp_negatives(next.u, cfg.tol_neg, st);
  detail::clamp_negatives(next.v, cfg.tol_neg, st);
  next.t = state.t + dt;
  return next;
}

template <class Maps>
concept PressureMap = requires(const Maps& m, double w) {
  { m.valid() } -> std::convertible_to<bool>;
  { m.A(w) } -> std::convertible_to<double>;
};

/// (I - eps Lap)(w_new - w)/dt = Lap A(w): one SPD tridiagonal solve.
template <PressureMap Maps>
PlotnikovState step_plotnikov(const PlotnikovState& state, const Grid1D& grid, const Maps& maps,
                              const SolverConfig& cfg, double dt) {
  if (!maps.valid()) throw ValidityError("Plotnikov stepper needs valid maps");
  const std::size_t n = state.w.size();
  std::vector<double> a(n);
  for (std::size_t j = 0; j < n; ++j) a[j] = maps.A(state.w[j]);
  std::vector<double> inc = neumann_laplacian(a, grid.h());
  for (double& x : inc) x *= dt;
  solve_shifted_neumann(cfg.epsilon, grid.h(), inc);
  PlotnikovState next{state.t + dt, state.w};
  for (std::size_t j = 0; j < n; ++j) next.w[j] += inc[j];
  return next;
}

class SystemStepper {
 public:
  SystemStepper(const Grid1D& grid, const ReactionFunction& rf, const SolverConfig& cfg)
      : grid_(grid), rf_(rf), cfg_(cfg) {}

  FieldState operator()(const FieldState& s, double dt) {
    return step_system(s, grid_, rf_, cfg_, dt, &stats_);
  }
  const StepStats& stats() const noexcept { return stats_; }

 private:
  Grid1D grid_;
  const ReactionFunction& rf_;
  SolverConfig cfg_;
  StepStats stats_;
};

template <PressureMap Maps>
class PlotnikovStepper {
 public:
  PlotnikovStepper(const Grid1D& grid, const Maps& maps, const SolverConfig& cfg)
      : grid_(grid), maps_(maps), cfg_(cfg) {}

  PlotnikovState operator()(const PlotnikovState& s, double dt) {
    return step_plotnikov(s, grid_, maps_, cfg_, dt);
  }

 private:
  Grid1D grid_;
  const Maps& maps_;
  SolverConfig cfg_;
};

// ---------------------------------------------------------------------------
// Integration

template <class State>
struct Trajectory {
  std::vector<State> snapshots;
  std::size_t steps = 0;  // nominal steps taken
  std::size_t halvings = 0;

  const State& initial() const { return snapshots.front(); }
  const State& final() const { return snapshots.back(); }
  std::size_t size() const noexcept { return snapshots.size(); }
};

class IntegrationError : public Error {
 public:
  using Error::Error;
};

/// Raised when dt underflows; carries the trajectory recorded so far.
template <class State>
class IntegrationFailure : public IntegrationError {
 public:
  IntegrationFailure(Trajectory<State> partial, const std::string& what)
      : IntegrationError(what), partial_(std::move(partial)) {}
  const Trajectory<State>& partial() const noexcept { return partial_; }

 private:
  Trajectory<State> partial_;
};

template <class State>
using Observer = std::function<void(const State&, std::size_t)>;

/// Called after every nominal step with the state before and after it.
template <class State>
using StepHook = std::function<void(const State&, const State&)>;

/// Uniform nominal steps of size T / ceil(T / dt). A failing step is retried
/// as two half steps, recursively, at most cfg.max_halvings deep. Snapshots
/// at step 0, every snapshot_stride steps, and the final step.
template <class State, class Stepper>
Trajectory<State> integrate(const State& initial, Stepper&& stepper, const SolverConfig& cfg,
                            double dt, std::span<const Observer<State>> observers = {},
                            const StepHook<State>& on_step = {}) {
  cfg.validate();
  if (!(dt > 0.0)) throw ValidationError("dt must be positive");
  if (cfg.T < initial.t) throw ValidationError("horizon T precedes the initial time");

  Trajectory<State> traj;
  auto record = [&](const State& s, std::size_t step) {
    traj.snapshots.push_back(s);
    for (const auto& obs : observers) obs(s, step);
  };
  record(initial, 0);
  const double span = cfg.T - initial.t;
  if (span == 0.0) return traj;

  const auto n_steps = static_cast<std::size_t>(std::ceil(span / dt - 1e-9));
  const double h_t = span / static_cast<double>(n_steps);
  const double dt_min = h_t / std::ldexp(1.0, cfg.max_halvings);

  std::function<State(const State&, double)> advance = [&](const State& s, double step) -> State {
    try {
      return stepper(s, step);
    } catch (const StepFailure& e) {
      const double half = 0.5 * step;
      if (half < dt_min * (1.0 - 1e-12)) {
        throw IntegrationFailure<State>(traj, std::string("dt underflow: ") + e.what());
      }
      ++traj.halvings;
      return advance(advance(s, half), half);
    }
  };

  State current = initial;
  for (std::size_t k = 1; k <= n_steps; ++k) {
    State next = advance(current, h_t);
    next.t = initial.t + h_t * static_cast<double>(k);
    if (on_step) on_step(current, next);
    current = std::move(next);
    traj.steps = k;
    const auto stride = static_cast<std::size_t>(cfg.snapshot_stride);
    if (k % stride == 0 || k == n_steps) record(current, k);
  }
  return traj;
}

}  // namespace fastreact

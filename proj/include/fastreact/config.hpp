#pragma once

// Flat `section.key = value` configuration with '#' comments.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fastreact/error.hpp"

namespace fastreact {

struct ModelSection {
  std::string kind = "builtin-cubic";  // builtin-cubic | coefficients
  std::vector<double> coeffs;          // ascending powers
  double u_max = 4.0;
  double fold_guard = 1e-3;
};

struct SolverSection {
  double epsilon = 1e-3;
  double dt = 0.0;  // 0: min(0.25 h^2, 10 eps)
  double T = 1.0;
  int n_cells = 256;
  double L = 1.0;
  double theta = 1.0;
  double newton_tol = 1e-12;
  int newton_max_iter = 50;
  int max_halvings = 8;
  int snapshot_stride = 0;  // 0: about 32 snapshots per time cell
};

struct InitSection {
  std::string kind = "plateau-blend";  // constant | cosine-sum | plateau-blend
  // plateau-blend: u_left, u_right, x_a / L, x_b / L, amplitude, mode
  std::vector<double> params{0.4, 2.6, 0.05, 0.95, 0.5, 100.0};
};

struct KineticsSection {
  int xi_bins = 128;
  double xi_max = 0.0;  // 0: the a priori bound M
  int cells_t = 32;
  int cells_x = 16;
  double guard_band = 0.02;  // fraction of xi_max cut at both ends
  int pairs_per_cell = 64;
};

struct RunSection {
  std::string out_dir = "out";
  std::string label = "run";
  std::uint64_t seed = 20240917;
  std::vector<double> plot_times{0.02, 1.0};
  int fields_every = 32;  // write every k-th snapshot to fields_NNNN.csv
};

struct RunConfig {
  ModelSection model;
  SolverSection solver;
  InitSection init;
  KineticsSection kinetics;
  RunSection run;
  std::map<std::string, std::size_t> key_lines;  // explicit keys -> line

  /// Canonical key = value listing of every setting (defaults included).
  std::vector<std::pair<std::string, std::string>> echo() const;
};

namespace config_detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double to_double(std::string_view text, std::size_t line, const std::string& key) {
  const std::string_view t = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError(line, key, "expected a number, got '" + std::string(t) + "'");
  }
  if (!std::isfinite(v)) throw ConfigError(line, key, "value must be finite");
  return v;
}

inline long long to_int(std::string_view text, std::size_t line, const std::string& key) {
  const std::string_view t = trim(text);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError(line, key, "expected an integer, got '" + std::string(t) + "'");
  }
  return v;
}

inline std::vector<double> to_list(std::string_view text, std::size_t line, const std::string& key) {
  std::vector<double> out;
  const std::string_view t = trim(text);
  if (t.empty()) return out;
  std::size_t start = 0;
  while (start <= t.size()) {
    const auto comma = t.find(',', start);
    const auto piece = t.substr(start, comma == std::string_view::npos ? t.size() - start : comma - start);
    out.push_back(to_double(piece, line, key));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline std::string fmt_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (k) s += ", ";
    s += fmt_double(v[k]);
  }
  return s;
}

}  // namespace config_detail

inline std::vector<std::pair<std::string, std::string>> RunConfig::echo() const {
  using config_detail::fmt_double;
  using config_detail::fmt_list;
  return {
      {"model.kind", model.kind},
      {"model.coeffs", fmt_list(model.coeffs)},
      {"model.u_max", fmt_double(model.u_max)},
      {"model.fold_guard", fmt_double(model.fold_guard)},
      {"solver.epsilon", fmt_double(solver.epsilon)},
      {"solver.dt", fmt_double(solver.dt)},
      {"solver.T", fmt_double(solver.T)},
      {"solver.n_cells", std::to_string(solver.n_cells)},
      {"solver.L", fmt_double(solver.L)},
      {"solver.theta", fmt_double(solver.theta)},
      {"solver.newton_tol", fmt_double(solver.newton_tol)},
      {"solver.newton_max_iter", std::to_string(solver.newton_max_iter)},
      {"solver.max_halvings", std::to_string(solver.max_halvings)},
      {"solver.snapshot_stride", std::to_string(solver.snapshot_stride)},
      {"init.kind", init.kind},
      {"init.params", fmt_list(init.params)},
      {"kinetics.xi_bins", std::to_string(kinetics.xi_bins)},
      {"kinetics.xi_max", fmt_double(kinetics.xi_max)},
      {"kinetics.cells_t", std::to_string(kinetics.cells_t)},
      {"kinetics.cells_x", std::to_string(kinetics.cells_x)},
      {"kinetics.guard_band", fmt_double(kinetics.guard_band)},
      {"kinetics.pairs_per_cell", std::to_string(kinetics.pairs_per_cell)},
      {"run.out_dir", run.out_dir},
      {"run.label", run.label},
      {"run.seed", std::to_string(run.seed)},
      {"run.plot_times", fmt_list(run.plot_times)},
      {"run.fields_every", std::to_string(run.fields_every)},
  };
}

/// Parses and validates config text; every problem is reported with its
/// line and key. Keys not present keep their defaults.
inline RunConfig parse_config(std::string_view text) {
  using namespace config_detail;
  RunConfig cfg;
  using Setter = std::function<void(std::string_view, std::size_t, const std::string&)>;

  auto real = [](double& dst) -> Setter {
    return [&dst](std::string_view v, std::size_t line, const std::string& key) {
      dst = to_double(v, line, key);
    };
  };
  auto integer = [](int& dst) -> Setter {
    return [&dst](std::string_view v, std::size_t line, const std::string& key) {
      const long long x = to_int(v, line, key);
      if (x < -2147483647LL || x > 2147483647LL) throw ConfigError(line, key, "integer out of range");
      dst = static_cast<int>(x);
    };
  };
  auto text_value = [](std::string& dst) -> Setter {
    return [&dst](std::string_view v, std::size_t line, const std::string& key) {
      if (v.empty()) throw ConfigError(line, key, "value must not be empty");
      dst = std::string(v);
    };
  };
  auto list = [](std::vector<double>& dst) -> Setter {
    return [&dst](std::string_view v, std::size_t line, const std::string& key) {
      dst = to_list(v, line, key);
    };
  };

  std::map<std::string, Setter, std::less<>> setters{
      {"model.kind", text_value(cfg.model.kind)},
      {"model.coeffs", list(cfg.model.coeffs)},
      {"model.u_max", real(cfg.model.u_max)},
      {"model.fold_guard", real(cfg.model.fold_guard)},
      {"solver.epsilon", real(cfg.solver.epsilon)},
      {"solver.dt", real(cfg.solver.dt)},
      {"solver.T", real(cfg.solver.T)},
      {"solver.n_cells", integer(cfg.solver.n_cells)},
      {"solver.L", real(cfg.solver.L)},
      {"solver.theta", real(cfg.solver.theta)},
      {"solver.newton_tol", real(cfg.solver.newton_tol)},
      {"solver.newton_max_iter", integer(cfg.solver.newton_max_iter)},
      {"solver.max_halvings", integer(cfg.solver.max_halvings)},
      {"solver.snapshot_stride", integer(cfg.solver.snapshot_stride)},
      {"init.kind", text_value(cfg.init.kind)},
      {"init.params", list(cfg.init.params)},
      {"kinetics.xi_bins", integer(cfg.kinetics.xi_bins)},
      {"kinetics.xi_max", real(cfg.kinetics.xi_max)},
      {"kinetics.cells_t", integer(cfg.kinetics.cells_t)},
      {"kinetics.cells_x", integer(cfg.kinetics.cells_x)},
      {"kinetics.guard_band", real(cfg.kinetics.guard_band)},
      {"kinetics.pairs_per_cell", integer(cfg.kinetics.pairs_per_cell)},
      {"run.out_dir", text_value(cfg.run.out_dir)},
      {"run.label", text_value(cfg.run.label)},
      {"run.seed",
       [&cfg](std::string_view v, std::size_t line, const std::string& key) {
         const long long x = to_int(v, line, key);
         if (x < 0) throw ConfigError(line, key, "seed must be nonnegative");
         cfg.run.seed = static_cast<std::uint64_t>(x);
       }},
      {"run.plot_times", list(cfg.run.plot_times)},
      {"run.fields_every", integer(cfg.run.fields_every)},
  };

  bool init_params_given = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(line_no, std::string(line), "expected 'section.key = value'");
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError(line_no, key, "unknown key");
    if (cfg.key_lines.count(key)) throw ConfigError(line_no, key, "duplicate key");
    cfg.key_lines[key] = line_no;
    it->second(value, line_no, key);
    if (key == "init.params") init_params_given = true;
  }

  auto fail = [&](const std::string& key, const std::string& what) {
    const auto it = cfg.key_lines.find(key);
    throw ConfigError(it == cfg.key_lines.end() ? 0 : it->second, key, what);
  };

  const auto& m = cfg.model;
  if (m.kind != "builtin-cubic" && m.kind != "coefficients") {
    fail("model.kind", "must be builtin-cubic or coefficients");
  }
  if (m.kind == "coefficients" && m.coeffs.size() < 2) {
    fail("model.coeffs", "coefficients model needs at least 2 coefficients");
  }
  if (m.kind == "builtin-cubic" && !m.coeffs.empty()) {
    fail("model.coeffs", "coefficients are only read with model.kind = coefficients");
  }
  if (!(m.u_max > 0.0)) fail("model.u_max", "must be positive");
  if (!(m.fold_guard > 0.0 && m.fold_guard < 0.5)) fail("model.fold_guard", "must lie in (0, 0.5)");

  const auto& s = cfg.solver;
  if (!(s.epsilon > 0.0)) fail("solver.epsilon", "must be positive");
  if (!(s.dt >= 0.0)) fail("solver.dt", "must be nonnegative (0 = automatic)");
  if (!(s.T > 0.0)) fail("solver.T", "must be positive");
  if (s.n_cells < 8) fail("solver.n_cells", "must be at least 8");
  if (!(s.L > 0.0)) fail("solver.L", "must be positive");
  if (!(s.theta >= 0.5 && s.theta <= 1.0)) fail("solver.theta", "must lie in [0.5, 1]");
  if (!(s.newton_tol > 0.0)) fail("solver.newton_tol", "must be positive");
  if (s.newton_max_iter < 1) fail("solver.newton_max_iter", "must be at least 1");
  if (s.max_halvings < 0 || s.max_halvings > 40) fail("solver.max_halvings", "must lie in [0, 40]");
  if (s.snapshot_stride < 0) fail("solver.snapshot_stride", "must be nonnegative (0 = automatic)");

  auto& in = cfg.init;
  if (in.kind == "constant") {
    if (!init_params_given) in.params = {3.0, 4.5};
    if (in.params.size() != 2) fail("init.params", "constant takes u0, v0");
  } else if (in.kind == "cosine-sum") {
    if (!init_params_given) in.params = {1.5, 0.5};
    if (in.params.empty()) fail("init.params", "cosine-sum takes mean, a_1, a_2, ...");
  } else if (in.kind == "plateau-blend") {
    if (in.params.size() != 6) {
      fail("init.params", "plateau-blend takes u_left, u_right, x_a/L, x_b/L, amplitude, mode");
    }
    if (!(in.params[2] >= 0.0 && in.params[2] < in.params[3] && in.params[3] <= 1.0)) {
      fail("init.params", "plateau-blend needs 0 <= x_a/L < x_b/L <= 1");
    }
    if (in.params[5] < 0.0 || in.params[5] != std::floor(in.params[5])) {
      fail("init.params", "perturbation mode must be a nonnegative integer");
    }
  } else {
    fail("init.kind", "must be constant, cosine-sum or plateau-blend");
  }

  const auto& k = cfg.kinetics;
  if (k.xi_bins < 32) fail("kinetics.xi_bins", "must be at least 32");
  if (!(k.xi_max >= 0.0)) fail("kinetics.xi_max", "must be nonnegative (0 = automatic)");
  if (k.cells_t < 1) fail("kinetics.cells_t", "must be positive");
  if (k.cells_x < 1 || k.cells_x > s.n_cells) fail("kinetics.cells_x", "must lie in [1, n_cells]");
  if (!(k.guard_band >= 0.0 && k.guard_band < 0.5)) fail("kinetics.guard_band", "must lie in [0, 0.5)");
  if (k.pairs_per_cell < 1) fail("kinetics.pairs_per_cell", "must be positive");

  for (double t : cfg.run.plot_times) {
    if (!(t >= 0.0 && t <= s.T)) fail("run.plot_times", "plot times must lie in [0, T]");
  }
  if (cfg.run.fields_every < 1) fail("run.fields_every", "must be positive");
  if (cfg.run.label.find_first_of("/\\") != std::string::npos) {
    fail("run.label", "must not contain path separators");
  }
  return cfg;
}

}  // namespace fastreact

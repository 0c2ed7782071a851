// Command-line front end: run, sweep, compare-plotnikov, check-model.
// Exit status: 0 all checks passed, 2 some check failed, 1 execution error.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "fastreact/fastreact.hpp"

namespace {

using namespace fastreact;

RunConfig load(const std::string& path, const std::string& out_dir) {
  RunConfig cfg = parse_config(path.empty() ? std::string() : read_text(path));
  if (!out_dir.empty()) cfg.run.out_dir = out_dir;
  return cfg;
}

std::vector<double> parse_eps(const std::string& text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const std::string piece =
        text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    std::size_t used = 0;
    const double v = std::stod(piece, &used);
    if (piece.find_first_not_of(" \t", used) != std::string::npos) {
      throw ValidationError("bad eps value '" + piece + "'");
    }
    out.push_back(v);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

int print_run(const RunSummary& s) {
  fmt::print("eps {:.3g}: defect {:.6e}, scaled defect {:.6e}, mass drift {:.2e}, rho {:.4e}\n",
             s.epsilon, s.apriori.defect_norm, s.apriori.scaled_defect_norm,
             s.apriori.max_mass_drift, s.mean_rho);
  fmt::print("  identity residual mean {:.4e}, binarization {:.4f}, populated cells {}\n",
             s.identity_mean, s.binarization, s.populated_cells);
  fmt::print("  checks: mass {} bounds {} energy {} bookkeeping {} weights {}\n", s.mass_ok(),
             s.bounds_ok(), s.energy_ok(), s.bookkeeping_ok(), s.weights_exact);
  return s.checks_ok() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fast-reaction limit laboratory"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir;
  std::string eps_text;
  bool serial = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "flat key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory (overrides run.out_dir)");
  };
  auto* run = app.add_subcommand("run", "integrate one configuration and write its artifacts");
  auto* sweep = app.add_subcommand("sweep", "run an eps sweep and fit the defect rate");
  auto* compare = app.add_subcommand("compare-plotnikov", "compare against the pseudo-parabolic equation");
  auto* check = app.add_subcommand("check-model", "branch structure and nondegeneracy certificate");
  for (auto* sub : {run, sweep, compare, check}) add_common(sub);
  sweep->add_option("--eps", eps_text, "comma-separated eps values")->required();
  sweep->add_flag("--serial", serial, "run members one after another");

  CLI11_PARSE(app, argc, argv);

  try {
    const RunConfig cfg = load(config_path, out_dir);
    if (*check) {
      const ModelCheck mc = check_model(build_reaction(cfg));
      fmt::print("{}\n", to_json(mc).dump(2));
      return mc.ok() ? 0 : 2;
    }
    if (*run) {
      const RunOutput out = run_single(cfg);
      fmt::print("wrote {}\n", out.dir.string());
      return print_run(out.summary);
    }
    if (*sweep) {
      const SweepSummary sw = run_sweep(cfg, parse_eps(eps_text), !serial);
      for (const auto& m : sw.members) {
        if (m.completed) {
          print_run(m);
        } else {
          fmt::print("eps {:.3g}: FAILED ({})\n", m.epsilon, m.error);
        }
      }
      if (sw.fit_available) {
        fmt::print("defect slope {:.4f} (95% CI {:.4f} .. {:.4f}){}\n", sw.fit.slope, sw.fit.ci_low,
                   sw.fit.ci_high, sw.fit.degenerate ? " [degenerate]" : "");
      } else {
        fmt::print("defect slope unavailable: {}\n", sw.fit_error);
      }
      fmt::print("trends: defect {} identity {} binarization {} rho(20%) {}\n", sw.defect_decreasing,
                 sw.identity_decreasing, sw.binarization_decreasing, sw.rho_decreasing);
      return sw.checks_ok() ? 0 : 2;
    }
    if (*compare) {
      const PlotnikovComparison pc = compare_plotnikov(cfg);
      fmt::print("||v - A(w)|| {:.6e}, sup|k - p o I^-1| {:.6e}, pushforward gap mean {:.6e}\n",
                 pc.system.plotnikov_a, pc.system.plotnikov_b, pc.system.plotnikov_c_mean);
      fmt::print("||w_plotnikov(T) - (u+v)(T)|| {:.6e}, Plotnikov mass drift {:.2e}\n",
                 pc.w_difference_l2, pc.plotnikov_mass_drift);
      return pc.system.checks_ok() ? 0 : 2;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}

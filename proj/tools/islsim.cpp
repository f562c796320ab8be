// Command-line harness: episode runs, parameter sweeps, convergence and
// scaling studies, the mean-field gap experiment, and the verification
// suites. Every command is deterministic for a given (config, seeds); output
// is CSV plus a plain-text manifest per output directory.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "islsim/csv.hpp"
#include "islsim/experiments.hpp"
#include "islsim/verify.hpp"

namespace fs = std::filesystem;
using namespace islsim;

namespace {

constexpr const char* kToolVersion = "islsim 1.0.0";

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitConfigError = 2;
constexpr int kExitNoConverge = 3;

struct GlobalOpts {
  std::string config;
  std::string out = "out";
  int seeds = 1;
  int threads = 1;
  bool strict = false;
};

Scenario load(const GlobalOpts& g) {
  Scenario sc = g.config.empty() ? default_scenario() : load_scenario(g.config);
  sc.solver.threads = g.threads;
  return sc;
}

std::vector<double> parse_doubles(const std::string& list) {
  std::vector<double> out;
  std::stringstream ss(list);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ConfigError("not a number in list: '" + tok + "'");
    }
  }
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

std::vector<int> parse_ints(const std::string& list) {
  std::vector<int> out;
  for (double v : parse_doubles(list)) out.push_back(static_cast<int>(v));
  return out;
}

// The manifest carries everything needed to reproduce the directory. No
// wall-clock content: repeated runs must hash identically.
void write_manifest(const fs::path& dir, const std::string& command,
                    const Scenario& sc,
                    const std::vector<std::uint64_t>& seeds) {
  std::ofstream mf(dir / "manifest.txt", std::ios::binary);
  mf << "tool: " << kToolVersion << "\n";
  mf << "command: " << command << "\n";
  mf << "scenario_hash: " << scenario_hash_hex(sc) << "\n";
  mf << "out: " << dir.string() << "\n";
  mf << "seeds:";
  for (auto s : seeds) mf << ' ' << s;
  mf << "\n";
}

void write_battery_csv(const fs::path& dir, const EpisodeResult& ep,
                       double floor_j) {
  CsvWriter w((dir / "battery.csv").string(),
              {"satellite", "slot", "charge_J", "phi", "depleted"});
  for (std::size_t m = 0; m < ep.battery_j.size(); ++m)
    for (std::size_t t = 0; t < ep.battery_j[m].size(); ++t) {
      w.field(m);
      w.field(t);
      w.field(ep.battery_j[m][t]);
      w.field(static_cast<int>(ep.illuminated[m][t]));
      w.field(ep.battery_j[m][t] <= floor_j ? 1 : 0);
      w.endrow();
    }
}

void write_flows_csv(const fs::path& dir, const EpisodeResult& ep) {
  CsvWriter w((dir / "flows.csv").string(),
              {"flow_id", "src", "dst", "demand_bps"});
  for (const auto& f : ep.flows) {
    w.field(f.id);
    w.field(f.src);
    w.field(f.dst);
    w.field(f.demand_bps);
    w.endrow();
  }
}

void write_solution_csv(const fs::path& dir, const EpisodeResult& ep) {
  CsvWriter w((dir / "solution.csv").string(),
              {"satellite", "slot", "neighbor", "rate_bps", "power_W"});
  for (const auto& r : ep.solution) {
    w.field(r.satellite);
    w.field(r.slot);
    w.field(r.neighbor);
    w.field(r.rate_bps);
    w.field(r.power_w);
    w.endrow();
  }
}

void write_episode_convergence_csv(const fs::path& dir,
                                   const EpisodeResult& ep) {
  CsvWriter w((dir / "convergence.csv").string(), {"slot", "k", "residual"});
  for (std::size_t t = 0; t < ep.step_norms.size(); ++t)
    for (std::size_t k = 0; k < ep.step_norms[t].size(); ++k) {
      w.field(t);
      w.field(k + 1);
      w.field(ep.step_norms[t][k]);
      w.endrow();
    }
}

int cmd_run(const GlobalOpts& g, const std::string& vname) {
  Scenario sc = load(g);
  Variant v = variant_from_name(vname);
  auto seeds = seed_list(sc.seed, g.seeds);
  fs::create_directories(g.out);
  write_manifest(g.out, "run --variant " + vname, sc, seeds);

  CsvWriter metrics((fs::path(g.out) / "metrics.csv").string(),
                    {"run_seed", "variant", "theta", "esr", "fvr",
                     "ee_bits_per_J"});
  int bad_slots = 0;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    EpisodeResult ep = run_episode(sc, v, seeds[i], /*keep_solution=*/true);
    bad_slots += ep.non_converged_slots;
    char sub[32];
    std::snprintf(sub, sizeof sub, "run_%02zu", i);
    fs::path dir = fs::path(g.out) / sub;
    fs::create_directories(dir);
    write_battery_csv(dir, ep, sc.energy.floor_j);
    write_flows_csv(dir, ep);
    write_solution_csv(dir, ep);
    write_episode_convergence_csv(dir, ep);

    metrics.field(seeds[i]);
    metrics.field(std::string(vname));
    metrics.field(sc.cons.eclipse_fraction);
    metrics.field(ep.esr(sc.energy.floor_j));
    metrics.field(ep.fvr());
    metrics.field(ep.ee());
    metrics.endrow();
  }
  if (bad_slots > 0) {
    std::cout << bad_slots << " slot(s) stopped at the iteration cap\n";
    if (g.strict) return kExitNoConverge;
  }
  return kExitOk;
}

int cmd_sweep_theta(const GlobalOpts& g, const std::string& theta_list,
                    const std::string& variant_list) {
  Scenario sc = load(g);
  std::vector<double> thetas = parse_doubles(theta_list);
  std::vector<Variant> variants;
  {
    std::stringstream ss(variant_list);
    std::string tok;
    while (std::getline(ss, tok, ',')) variants.push_back(variant_from_name(tok));
  }
  auto seeds = seed_list(sc.seed, g.seeds);
  fs::create_directories(g.out);
  write_manifest(g.out,
                 "sweep-theta " + theta_list + " variants " + variant_list, sc,
                 seeds);

  auto cells = run_theta_sweep(sc, thetas, variants, seeds);
  CsvWriter w((fs::path(g.out) / "sweep_theta.csv").string(),
              {"theta", "variant", "esr_mean", "esr_sem", "gap_mean",
               "shortfall_bps"});
  for (const auto& c : cells) {
    w.field(c.theta);
    w.field(std::string(variant_name(c.variant)));
    w.field(c.esr.mean);
    w.field(c.esr.sem);
    w.field(c.gap_mean);
    w.field(c.shortfall_mean);
    w.endrow();
  }
  return kExitOk;
}

int cmd_converge(const GlobalOpts& g, const std::string& variant_name_s,
                 int iters) {
  Scenario sc = load(g);
  auto seeds = seed_list(sc.seed, 1);
  fs::create_directories(g.out);
  write_manifest(g.out, "converge --variant " + variant_name_s, sc, seeds);

  ConvergenceStudy cs = run_convergence(sc, variant_from_name(variant_name_s),
                                        iters);
  CsvWriter w((fs::path(g.out) / "convergence.csv").string(),
              {"slot", "k", "residual"});
  for (std::size_t k = 0; k < cs.residual.size(); ++k) {
    w.field(0);
    w.field(k);
    w.field(cs.residual[k]);
    w.endrow();
  }
  std::cout << "plateau at k = " << cs.plateau
            << ", log-log slope = " << format_g(cs.fit.slope)
            << " (r2 = " << format_g(cs.fit.r2)
            << "), residual ratio over the fit window = "
            << format_g(cs.final_ratio) << "\n";
  return kExitOk;
}

int cmd_scale(const GlobalOpts& g, const std::string& size_list, int reps) {
  Scenario sc = load(g);
  std::vector<int> sizes = parse_ints(size_list);
  auto seeds = seed_list(sc.seed, 1);
  fs::create_directories(g.out);
  write_manifest(g.out, "scale " + size_list, sc, seeds);

  ScaleStudy st = run_scaling(sc, sizes, reps);
  CsvWriter w((fs::path(g.out) / "scaling.csv").string(),
              {"M", "ms_per_slot"});
  for (const auto& r : st.rows) {
    w.field(r.size);
    w.field(r.ms_per_slot);
    w.endrow();
  }
  std::cout << "linear fit: ms = " << format_g(st.fit.slope) << " * M + "
            << format_g(st.fit.intercept) << ", r2 = " << format_g(st.fit.r2)
            << "\n";
  return st.fit.r2 >= 0.9 ? kExitOk : kExitCheckFailed;
}

int cmd_mfg_gap(const GlobalOpts& g, const std::string& size_list) {
  Scenario sc = load(g);
  std::vector<int> sizes = parse_ints(size_list);
  auto seeds = seed_list(sc.seed, g.seeds);
  fs::create_directories(g.out);
  write_manifest(g.out, "mfg-gap " + size_list, sc, seeds);

  GapStudy gs = run_gap_study(sc, sizes, seeds);
  {
    CsvWriter w((fs::path(g.out) / "gap_study.csv").string(),
                {"M", "gap", "slope"});
    for (const auto& r : gs.rows) {
      w.field(r.size);
      w.field(r.gap);
      w.field(gs.fit.slope);
      w.endrow();
    }
  }
  {
    CsvWriter w((fs::path(g.out) / "mfg_density.csv").string(),
                {"t", "c_J", "mu"});
    for (std::size_t t = 0; t < gs.mfe.mu_path.size(); ++t)
      for (int i = 0; i < gs.env.grid.cells; ++i) {
        w.field(t);
        w.field(gs.env.grid.center(i));
        w.field(gs.mfe.mu_path[t][i]);
        w.endrow();
      }
  }
  {
    CsvWriter w((fs::path(g.out) / "mfg_policy.csv").string(),
                {"t", "c_J", "rate_bps"});
    for (std::size_t t = 0; t < gs.mfe.hjb.policy.size(); ++t)
      for (int i = 0; i < gs.env.grid.cells; ++i) {
        w.field(t);
        w.field(gs.env.grid.center(i));
        w.field(gs.mfe.hjb.policy[t][i]);
        w.endrow();
      }
  }
  std::cout << "gap slope over M: " << format_g(gs.fit.slope)
            << " (r2 = " << format_g(gs.fit.r2) << ")\n";
  return kExitOk;
}

int cmd_ablate(const GlobalOpts& g) {
  Scenario sc = load(g);
  auto seeds = seed_list(sc.seed, g.seeds);
  fs::create_directories(g.out);
  write_manifest(g.out, "ablate", sc, seeds);

  auto rows = run_ablation(sc, seeds);
  CsvWriter w((fs::path(g.out) / "ablation.csv").string(),
              {"variant", "esr_mean", "esr_sem", "esr_ci_lo", "esr_ci_hi",
               "fvr_mean", "fvr_sem", "fvr_ci_lo", "fvr_ci_hi", "ee_mean",
               "ee_sem"});
  for (const auto& r : rows) {
    w.field(std::string(variant_name(r.variant)));
    w.field(r.esr.mean);
    w.field(r.esr.sem);
    w.field(r.esr.ci_lo);
    w.field(r.esr.ci_hi);
    w.field(r.fvr.mean);
    w.field(r.fvr.sem);
    w.field(r.fvr.ci_lo);
    w.field(r.fvr.ci_hi);
    w.field(r.ee.mean);
    w.field(r.ee.sem);
    w.endrow();
  }
  return kExitOk;
}

int cmd_verify(const GlobalOpts& g) {
  Scenario sc = load(g);
  fs::create_directories(g.out);
  write_manifest(g.out, "verify", sc, {sc.seed});

  auto checks = run_verify_suites(sc.seed);
  std::ofstream rep(fs::path(g.out) / "verify_report.txt", std::ios::binary);
  bool all = true;
  for (const auto& c : checks) {
    all = all && c.pass;
    rep << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
    std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail
              << "\n";
  }
  rep << (all ? "ALL PASS" : "FAILURES PRESENT") << "\n";
  return all ? kExitOk : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"battery-aware inter-satellite link allocation toolbench"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--config", g.config, "scenario file (key = value lines)");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--seeds", g.seeds, "number of derived run seeds")
      ->check(CLI::PositiveNumber);
  app.add_option("--threads", g.threads, "worker threads for local solves")
      ->check(CLI::PositiveNumber);
  app.add_flag("--strict", g.strict,
               "treat solver non-convergence as an error (exit 3)");

  std::string variant = "v3";
  std::string thetas = "0,0.1,0.2,0.38,0.5";
  std::string sweep_variants = "v0,v3";
  std::string scale_sizes = "16,32,64,128";
  std::string gap_sizes = "32,64,128,256";
  int converge_iters = 320;
  int scale_reps = 3;

  auto* run = app.add_subcommand("run", "simulate episodes, write metrics");
  run->add_option("--variant", variant, "v0|v1|v2|v3");

  auto* sweep = app.add_subcommand("sweep-theta",
                                   "eclipse-fraction sweep of survival");
  sweep->add_option("--thetas", thetas, "comma list of eclipse fractions");
  sweep->add_option("--variants", sweep_variants, "comma list of variants");

  auto* conv = app.add_subcommand("converge", "single-slot convergence study");
  conv->add_option("--variant", variant, "v0|v1|v2|v3");
  conv->add_option("--iters", converge_iters, "outer iterations to record");

  auto* scale = app.add_subcommand("scale", "wall time vs constellation size");
  scale->add_option("--sizes", scale_sizes, "comma list of sizes");
  scale->add_option("--reps", scale_reps, "timing repetitions per size");

  auto* gap = app.add_subcommand("mfg-gap",
                                 "finite game vs mean-field policy gap");
  gap->add_option("--sizes", gap_sizes, "comma list of sizes");

  app.add_subcommand("ablate", "variant ablation table");
  app.add_subcommand("verify", "identity and conservation suites");
  // let `islsim <cmd> --config ...` reach the global options
  for (auto* sub : app.get_subcommands(nullptr)) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfigError;  // bad usage is a config error
  }

  try {
    if (app.got_subcommand("run")) return cmd_run(g, variant);
    if (app.got_subcommand("sweep-theta"))
      return cmd_sweep_theta(g, thetas, sweep_variants);
    if (app.got_subcommand("converge"))
      return cmd_converge(g, variant, converge_iters);
    if (app.got_subcommand("scale")) return cmd_scale(g, scale_sizes, scale_reps);
    if (app.got_subcommand("mfg-gap")) return cmd_mfg_gap(g, gap_sizes);
    if (app.got_subcommand("ablate")) return cmd_ablate(g);
    if (app.got_subcommand("verify")) return cmd_verify(g);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCheckFailed;
  }
  return kExitConfigError;
}

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include "apgx/config.hpp"
#include "apgx/errors.hpp"
#include "apgx/gradcheck.hpp"
#include "apgx/trainer.hpp"

namespace fs = std::filesystem;
using namespace apgx;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFail = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
  std::vector<std::uint64_t> seeds;
  std::string cur;
  for (char c : s + ",") {
    if (c == ',') {
      if (!cur.empty()) seeds.push_back(std::stoull(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (seeds.empty()) throw ConfigError("--seeds: expected a comma-separated list");
  return seeds;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> vals;
  for (std::uint64_t v : parse_seed_list(s)) vals.push_back(static_cast<int>(v));
  return vals;
}

TrainConfig load_config(const std::string& path,
                        const std::vector<std::string>& overrides) {
  TrainConfig cfg = parse_config_file(path);
  for (const std::string& ov : overrides) {
    size_t eq = ov.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--override '" + ov + "': expected KEY=VALUE");
    apply_override(cfg, ov.substr(0, eq), ov.substr(eq + 1));
  }
  return cfg;
}

void write_csv_file(const std::vector<IterationMetrics>& rows,
                    const fs::path& path) {
  std::ofstream f(path, std::ios::binary);  // binary keeps LF endings
  if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
  write_metrics_csv(rows, f);
}

// env steps at the first iteration whose evaluation return reaches the
// threshold; -1 when never reached
long steps_to_threshold(const std::vector<IterationMetrics>& rows,
                        double threshold) {
  for (const IterationMetrics& r : rows)
    if (r.eval_return_mean >= threshold) return r.env_steps;
  return -1;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string steps_cell(double med) {
  if (!std::isfinite(med)) return "not_reached";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", med);
  return buf;
}

struct ModeSummary {
  std::string label;
  double final_mean = 0.0;
  double final_std = 0.0;
  double median_steps = std::numeric_limits<double>::infinity();
};

ModeSummary summarize(const std::string& label,
                      const std::vector<std::vector<IterationMetrics>>& runs,
                      double threshold) {
  ModeSummary s;
  s.label = label;
  std::vector<double> finals, steps;
  for (const auto& rows : runs) {
    finals.push_back(rows.back().eval_return_mean);
    long st = steps_to_threshold(rows, threshold);
    steps.push_back(st < 0 ? std::numeric_limits<double>::infinity()
                           : static_cast<double>(st));
  }
  for (double f : finals) s.final_mean += f;
  s.final_mean /= static_cast<double>(finals.size());
  double var = 0.0;
  for (double f : finals) var += (f - s.final_mean) * (f - s.final_mean);
  s.final_std = std::sqrt(var / static_cast<double>(finals.size()));
  s.median_steps = median(steps);
  return s;
}

int cmd_train(const std::string& config_path, const std::string& out_dir,
              const std::vector<std::string>& overrides) {
  TrainConfig cfg = load_config(config_path, overrides);
  cfg.validate();
  fs::create_directories(out_dir);

  RunManifest manifest;
  manifest.command = "train";
  manifest.out_dir = out_dir;
  manifest.seeds = {cfg.seed};
  manifest.mode = mode_string(cfg.mode);
  manifest.config_snapshot = serialize_config(cfg);
  manifest.csv_files = {"metrics.csv"};
  write_manifest(manifest, (fs::path(out_dir) / "manifest.txt").string());

  TrainResult res = train(cfg);
  write_csv_file(res.metrics, fs::path(out_dir) / "metrics.csv");
  save_params(res.policy, (fs::path(out_dir) / "policy.ckpt").string());
  save_params(res.critic, (fs::path(out_dir) / "critic.ckpt").string());

  const IterationMetrics& last = res.metrics.back();
  std::printf("done: %d iterations, %ld env steps, eval return %.4f +- %.4f\n",
              cfg.iterations, last.env_steps, last.eval_return_mean,
              last.eval_return_std);
  std::printf("wrote %s/metrics.csv, policy.ckpt, critic.ckpt\n", out_dir.c_str());
  return kExitOk;
}

int cmd_compare(const std::string& config_path, const std::string& out_dir,
                const std::string& seeds_arg,
                const std::vector<std::string>& overrides) {
  TrainConfig base = load_config(config_path, overrides);
  std::vector<std::uint64_t> seeds = parse_seed_list(seeds_arg);

  fs::create_directories(out_dir);
  const std::vector<Mode> modes = {Mode::kAugmented, Mode::kPpoBaseline,
                                   Mode::kApgOnly};

  RunManifest manifest;
  manifest.command = "compare";
  manifest.out_dir = out_dir;
  manifest.seeds = seeds;
  manifest.mode = "augmented,ppo_baseline,apg_only";
  manifest.config_snapshot = serialize_config(base);
  for (Mode m : modes)
    for (std::uint64_t s : seeds)
      manifest.csv_files.push_back(mode_string(m) + "_seed" + std::to_string(s) + ".csv");
  manifest.csv_files.push_back("summary.csv");
  write_manifest(manifest, (fs::path(out_dir) / "manifest.txt").string());

  std::vector<std::vector<std::vector<IterationMetrics>>> all(modes.size());
  for (size_t mi = 0; mi < modes.size(); ++mi) {
    for (std::uint64_t s : seeds) {
      TrainConfig cfg = base;
      cfg.mode = modes[mi];
      cfg.seed = s;
      cfg.validate();
      TrainResult res = train(cfg);
      write_csv_file(res.metrics,
                     fs::path(out_dir) / (mode_string(modes[mi]) + "_seed" +
                                          std::to_string(s) + ".csv"));
      all[mi].push_back(std::move(res.metrics));
    }
  }

  // threshold: 90% of the baseline's final median return
  std::vector<double> base_finals;
  for (const auto& rows : all[1]) base_finals.push_back(rows.back().eval_return_mean);
  double threshold = 0.9 * median(base_finals);

  std::ofstream sum(fs::path(out_dir) / "summary.csv", std::ios::binary);
  sum << "mode,final_return_mean,final_return_std,median_steps_to_threshold,threshold\n";
  std::printf("%-14s %16s %16s %24s\n", "mode", "final_mean", "final_std",
              "median_steps_to_thresh");
  for (size_t mi = 0; mi < modes.size(); ++mi) {
    ModeSummary s = summarize(mode_string(modes[mi]), all[mi], threshold);
    sum << s.label << "," << format_double(s.final_mean) << ","
        << format_double(s.final_std) << "," << steps_cell(s.median_steps)
        << "," << format_double(threshold) << "\n";
    std::printf("%-14s %16.6g %16.6g %24s\n", s.label.c_str(), s.final_mean,
                s.final_std, steps_cell(s.median_steps).c_str());
  }
  std::printf("threshold (0.9 x baseline final median): %.6g\n", threshold);
  return kExitOk;
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir,
              const std::string& axis, const std::string& values_arg,
              const std::string& seeds_arg,
              const std::vector<std::string>& overrides) {
  if (axis != "h" && axis != "f")
    throw ConfigError("--axis must be 'h' or 'f'");
  TrainConfig base = load_config(config_path, overrides);
  base.apg_lanes = 64;  // the sensitivity protocol pins the agent count
  std::vector<int> values = parse_int_list(values_arg);
  std::vector<std::uint64_t> seeds = parse_seed_list(seeds_arg);

  fs::create_directories(out_dir);
  RunManifest manifest;
  manifest.command = "sweep";
  manifest.out_dir = out_dir;
  manifest.seeds = seeds;
  manifest.mode = "augmented (sweep over " + axis + ") vs ppo_baseline";
  manifest.config_snapshot = serialize_config(base);
  for (std::uint64_t s : seeds)
    manifest.csv_files.push_back("baseline_seed" + std::to_string(s) + ".csv");
  for (int v : values)
    for (std::uint64_t s : seeds)
      manifest.csv_files.push_back("sweep_" + axis + std::to_string(v) +
                                   "_seed" + std::to_string(s) + ".csv");
  manifest.csv_files.push_back("sweep_summary.csv");
  write_manifest(manifest, (fs::path(out_dir) / "manifest.txt").string());

  // shared baseline runs define the threshold for every axis value
  std::vector<std::vector<IterationMetrics>> baseline_runs;
  for (std::uint64_t s : seeds) {
    TrainConfig cfg = base;
    cfg.mode = Mode::kPpoBaseline;
    cfg.seed = s;
    cfg.validate();
    TrainResult res = train(cfg);
    write_csv_file(res.metrics,
                   fs::path(out_dir) / ("baseline_seed" + std::to_string(s) + ".csv"));
    baseline_runs.push_back(std::move(res.metrics));
  }
  std::vector<double> base_finals;
  for (const auto& rows : baseline_runs)
    base_finals.push_back(rows.back().eval_return_mean);
  double threshold = 0.9 * median(base_finals);

  std::ofstream sum(fs::path(out_dir) / "sweep_summary.csv", std::ios::binary);
  sum << "axis,value,final_return_mean,final_return_std,"
         "median_steps_to_threshold,threshold\n";
  std::printf("%-6s %8s %16s %16s %24s\n", "axis", "value", "final_mean",
              "final_std", "median_steps_to_thresh");
  for (int v : values) {
    std::vector<std::vector<IterationMetrics>> runs;
    for (std::uint64_t s : seeds) {
      TrainConfig cfg = base;
      cfg.mode = Mode::kAugmented;
      cfg.seed = s;
      if (axis == "h")
        cfg.apg_horizon = v;
      else
        cfg.apg_frequency = v;
      cfg.validate();
      TrainResult res = train(cfg);
      write_csv_file(res.metrics,
                     fs::path(out_dir) / ("sweep_" + axis + std::to_string(v) +
                                          "_seed" + std::to_string(s) + ".csv"));
      runs.push_back(std::move(res.metrics));
    }
    ModeSummary s = summarize(axis + "=" + std::to_string(v), runs, threshold);
    sum << axis << "," << v << "," << format_double(s.final_mean) << ","
        << format_double(s.final_std) << "," << steps_cell(s.median_steps)
        << "," << format_double(threshold) << "\n";
    std::printf("%-6s %8d %16.6g %16.6g %24s\n", axis.c_str(), v, s.final_mean,
                s.final_std, steps_cell(s.median_steps).c_str());
  }
  return kExitOk;
}

int cmd_gradcheck(int samples, std::uint64_t seed) {
  bool ok = true;
  auto report = [&ok](const std::string& what, double err, double bound) {
    bool pass = err < bound;
    ok = ok && pass;
    std::printf("%-44s max err %.3e  (bound %.0e)  %s\n", what.c_str(), err,
                bound, pass ? "ok" : "FAIL");
  };

  for (EnvName env : {EnvName::kPointMass, EnvName::kPendulum, EnvName::kCartpole}) {
    Rng rng(seed);
    double err = env_jacobian_max_err(env, samples, 1e-5, rng);
    report("jacobians: " + env_name_string(env) + " (" +
               std::to_string(samples) + " samples)",
           err, 1e-6);
  }
  {
    Rng rng(seed);
    report("net backward passes (10 random nets)", net_gradient_max_err(10, rng),
           1e-6);
  }
  for (EnvName env : {EnvName::kPointMass, EnvName::kPendulum}) {
    double worst = 0.0;
    for (int lanes : {1, 4})
      for (int horizon : {1, 2, 4, 8}) {
        Rng rng(seed + lanes * 100 + horizon);
        worst = std::max(worst, bptt_max_err(env, lanes, horizon, 0.95, rng));
      }
    report("rollout backward: " + env_name_string(env) + " (N={1,4}, h={1,2,4,8})",
           worst, 1e-4);
  }
  {
    Rng rng(seed);
    report("rollout backward: cartpole (N=4, h=4)",
           bptt_max_err(EnvName::kCartpole, 4, 4, 0.95, rng), 1e-3);
  }
  return ok ? kExitOk : kExitFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"apgx: PPO with exploration steered by gradients through "
               "differentiable dynamics"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "apgx_out";
  std::vector<std::string> overrides;
  std::string seeds_arg = "1", values_arg, axis;
  std::uint64_t seed_flag = 0;
  bool seed_given = false;
  std::string mode_flag;
  int gc_samples = 1000;
  std::uint64_t gc_seed = 1;

  auto add_common = [&](CLI::App* cmd, bool needs_config) {
    auto* c = cmd->add_option("--config", config_path, "config file path");
    if (needs_config) c->required();
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--override", overrides,
                    "KEY=VALUE config override (repeatable)");
  };

  CLI::App* train_cmd = app.add_subcommand("train", "run one training job");
  add_common(train_cmd, true);
  train_cmd->add_option("--seed", seed_flag, "seed override")
      ->each([&](const std::string&) { seed_given = true; });
  train_cmd->add_option("--mode", mode_flag,
                        "mode override: augmented | ppo_baseline | apg_only");

  CLI::App* compare_cmd =
      app.add_subcommand("compare", "run all three modes over a seed list");
  add_common(compare_cmd, true);
  compare_cmd->add_option("--seeds", seeds_arg, "comma-separated seeds");

  CLI::App* sweep_cmd =
      app.add_subcommand("sweep", "sensitivity sweep over h or f");
  add_common(sweep_cmd, true);
  sweep_cmd->add_option("--axis", axis, "h | f")->required();
  sweep_cmd->add_option("--values", values_arg, "comma-separated values")->required();
  sweep_cmd->add_option("--seeds", seeds_arg, "comma-separated seeds");

  CLI::App* gradcheck_cmd = app.add_subcommand(
      "gradcheck", "run every finite-difference suite and print max errors");
  gradcheck_cmd->add_option("--samples", gc_samples, "random (s, a) pairs per env");
  gradcheck_cmd->add_option("--seed", gc_seed, "rng seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (train_cmd->parsed()) {
      if (seed_given) overrides.push_back("run.seed=" + std::to_string(seed_flag));
      if (!mode_flag.empty()) overrides.push_back("run.mode=" + mode_flag);
      return cmd_train(config_path, out_dir, overrides);
    }
    if (compare_cmd->parsed())
      return cmd_compare(config_path, out_dir, seeds_arg, overrides);
    if (sweep_cmd->parsed())
      return cmd_sweep(config_path, out_dir, axis, values_arg, seeds_arg, overrides);
    if (gradcheck_cmd->parsed()) return cmd_gradcheck(gc_samples, gc_seed);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFail;
  }
  return kExitFail;
}

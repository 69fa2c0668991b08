#include "apgx/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <ostream>

#include "apgx/errors.hpp"

namespace apgx {

namespace {
const std::vector<int> kHiddenLayers = {64, 64};

double lane_return_mean(const RolloutBatch& batch, Source tag) {
  double sum = 0.0;
  int lanes = 0;
  const int T = batch.steps_per_lane;
  for (int lane = 0; lane < batch.num_lanes; ++lane) {
    const Transition* tr = batch.transitions.data() + static_cast<size_t>(lane) * T;
    if (tr[0].source != tag) continue;
    double lane_sum = 0.0;
    for (int t = 0; t < T; ++t) lane_sum += tr[t].reward;
    sum += lane_sum;
    ++lanes;
  }
  return lanes > 0 ? sum / lanes : std::numeric_limits<double>::quiet_NaN();
}
}  // namespace

std::string mode_string(Mode m) {
  switch (m) {
    case Mode::kAugmented: return "augmented";
    case Mode::kPpoBaseline: return "ppo_baseline";
    case Mode::kApgOnly: return "apg_only";
  }
  return "?";
}

Mode mode_from_string(const std::string& s) {
  if (s == "augmented") return Mode::kAugmented;
  if (s == "ppo_baseline") return Mode::kPpoBaseline;
  if (s == "apg_only") return Mode::kApgOnly;
  throw ConfigError("unknown mode '" + s + "'");
}

int TrainConfig::explore_lane_count() const {
  if (mode != Mode::kAugmented) return 0;
  return static_cast<int>(std::floor(explore_fraction * ppo_lanes + 1e-9));
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("config: " + msg); };
  if (iterations < 1) fail("run.iterations must be >= 1");
  if (eval_episodes < 1) fail("run.eval_episodes must be >= 1");
  if (!(discount > 0.0 && discount <= 1.0)) fail("run.discount must be in (0, 1]");
  if (apg_frequency < 1) fail("apg.update_frequency must be >= 1");
  if (apg_horizon < 1) fail("apg.horizon must be >= 1");
  if (apg_epochs < 0) fail("apg.epochs must be >= 0");
  if (apg_lanes < 1) fail("apg.agents must be >= 1");
  if (!(apg_lr > 0.0)) fail("apg.learning_rate must be > 0");
  if (ppo_lanes < 1) fail("ppo.lanes must be >= 1");
  if (rollout_steps < 1) fail("ppo.rollout_steps must be >= 1");
  if (explore_fraction < 0.0 || explore_fraction > 1.0)
    fail("ppo.explore_fraction must be in [0, 1]");
  if (!(ppo_lr > 0.0)) fail("ppo.learning_rate must be > 0");
  if (gae_lambda < 0.0 || gae_lambda > 1.0) fail("ppo.gae_lambda must be in [0, 1]");
  if (!(clip_eps > 0.0)) fail("ppo.clip_epsilon must be > 0");
  if (entropy_coef < 0.0) fail("ppo.entropy_coef must be >= 0");
  if (policy_epochs < 1) fail("ppo.policy_epochs must be >= 1");
  if (critic_epochs < 1) fail("ppo.critic_epochs must be >= 1");
  if (minibatches < 1) fail("ppo.minibatches must be >= 1");
  if (mode == Mode::kAugmented && primary_lane_count() < 1)
    fail("ppo.explore_fraction leaves no primary lanes; the critic needs primary data");
}

TrainConfig default_config(EnvName env) {
  TrainConfig cfg;
  cfg.env = env;
  switch (env) {
    case EnvName::kPointMass:
    case EnvName::kPendulum:
      cfg.apg_frequency = 1;
      cfg.apg_horizon = 4;
      cfg.apg_lr = 3e-5;
      cfg.discount = 0.95;
      cfg.apg_lanes = 256;
      cfg.explore_fraction = 0.5;
      cfg.apg_epochs = 5;
      break;
    case EnvName::kCartpole:
      cfg.apg_frequency = 1;
      cfg.apg_horizon = 4;
      cfg.apg_lr = 3e-5;
      cfg.discount = 0.95;
      cfg.apg_lanes = 256;
      cfg.explore_fraction = 0.5;
      cfg.apg_epochs = 2;
      break;
  }
  return cfg;
}

GapStats advantage_gap(const RolloutBatch& batch) {
  GapStats out;
  double psum = 0.0, xsum = 0.0;
  long pn = 0, xn = 0;
  for (const Transition& tr : batch.transitions) {
    if (tr.source == Source::kPrimary) {
      psum += tr.advantage;
      ++pn;
    } else {
      xsum += tr.advantage;
      ++xn;
    }
  }
  out.primary_present = pn > 0;
  out.explore_present = xn > 0;
  if (pn > 0) out.primary_mean = psum / pn;
  if (xn > 0) out.explore_mean = xsum / xn;
  if (pn > 0 && xn > 0) out.gap = out.explore_mean - out.primary_mean;
  return out;
}

TrainResult train(const TrainConfig& cfg) {
  cfg.validate();
  DiffEnv env(cfg.env);
  const EnvSpec& spec = env.spec();
  Rng rng(cfg.seed);

  TrainResult res;
  res.policy = make_policy(spec.dim_s, spec.dim_a, kHiddenLayers, rng);
  res.critic = make_critic(spec.dim_s, kHiddenLayers, rng);
  AdamState policy_opt = make_adam_state(res.policy);
  AdamState critic_opt = make_adam_state(res.critic);

  ApgSettings apg{cfg.apg_lanes, cfg.apg_horizon, cfg.apg_epochs, cfg.apg_lr,
                  cfg.discount};
  PpoSettings ppo{cfg.policy_epochs, cfg.critic_epochs, cfg.minibatches,
                  cfg.ppo_lr,        cfg.ppo_lr,        cfg.clip_eps,
                  cfg.entropy_coef};

  const int n_explore = cfg.explore_lane_count();
  const int n_primary = cfg.primary_lane_count();
  long env_steps = 0;

  for (int k = 0; k < cfg.iterations; ++k) {
    auto t0 = std::chrono::steady_clock::now();
    IterationMetrics row;
    row.iter = k;

    if (cfg.mode == Mode::kApgOnly) {
      ExploreResult er = make_exploratory_policy(res.policy, res.critic, env, apg, rng);
      env_steps += er.env_steps;
      if (!er.loss_trace.empty()) row.apg_loss = er.loss_trace.back();
      if (er.failed)
        std::cerr << "iteration " << k << ": apg update failed (" << er.failure
                  << "), policy kept\n";
      else
        res.policy = std::move(er.policy);
    } else {
      bool explore_now =
          cfg.mode == Mode::kAugmented && (k % cfg.apg_frequency == 0) && n_explore > 0;

      RolloutBatch batch;
      if (explore_now) {
        ExploreResult er = make_exploratory_policy(res.policy, res.critic, env, apg, rng);
        env_steps += er.env_steps;
        if (!er.loss_trace.empty()) row.apg_loss = er.loss_trace.back();
        if (er.failed) {
          std::cerr << "iteration " << k << ": apg update failed (" << er.failure
                    << "), running plain ppo\n";
          batch = collect_rollout(env, res.policy, res.critic, cfg.ppo_lanes,
                                  cfg.rollout_steps, rng, Source::kPrimary);
        } else {
          RolloutBatch primary =
              collect_rollout(env, res.policy, res.critic, n_primary,
                              cfg.rollout_steps, rng, Source::kPrimary);
          RolloutBatch explore =
              collect_rollout(env, er.policy, res.critic, n_explore,
                              cfg.rollout_steps, rng, Source::kExplore);
          batch = merge_batches(std::move(primary), std::move(explore));
          // er.policy goes out of scope here; nothing of it survives
        }
      } else {
        batch = collect_rollout(env, res.policy, res.critic, cfg.ppo_lanes,
                                cfg.rollout_steps, rng, Source::kPrimary);
      }
      env_steps += static_cast<long>(cfg.ppo_lanes) * cfg.rollout_steps;

      compute_gae(batch, cfg.discount, cfg.gae_lambda);
      GapStats gap = advantage_gap(batch);
      row.adv_primary_mean = gap.primary_mean;
      row.adv_explore_mean = gap.explore_mean;
      row.adv_gap = gap.gap;
      row.train_return_mean = lane_return_mean(batch, Source::kPrimary);

      ppo_update(res.policy, res.critic, policy_opt, critic_opt, batch, ppo, rng);
    }

    Rng eval_rng(cfg.seed + 0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(k) + 1));
    EvalStats ev = evaluate(res.policy, env, cfg.eval_episodes, eval_rng);
    row.eval_return_mean = ev.mean;
    row.eval_return_std = ev.stddev;
    row.env_steps = env_steps;
    row.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    res.metrics.push_back(row);
  }
  return res;
}

void write_metrics_csv(const std::vector<IterationMetrics>& rows,
                       std::ostream& os) {
  os << "iter,env_steps,eval_return_mean,eval_return_std,train_return_mean,"
        "adv_primary_mean,adv_explore_mean,adv_gap,apg_loss,wall_ms\n";
  char buf[512];
  for (const IterationMetrics& r : rows) {
    std::snprintf(buf, sizeof(buf),
                  "%d,%ld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  r.iter, r.env_steps, r.eval_return_mean, r.eval_return_std,
                  r.train_return_mean, r.adv_primary_mean, r.adv_explore_mean,
                  r.adv_gap, r.apg_loss, r.wall_ms);
    os << buf;
  }
}

}  // namespace apgx

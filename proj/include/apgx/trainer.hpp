#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "apgx/apg.hpp"
#include "apgx/env.hpp"
#include "apgx/mlp.hpp"
#include "apgx/ppo.hpp"

namespace apgx {

enum class Mode { kAugmented, kPpoBaseline, kApgOnly };

std::string mode_string(Mode m);
Mode mode_from_string(const std::string& s);

struct TrainConfig {
  EnvName env = EnvName::kPointMass;
  Mode mode = Mode::kAugmented;
  int iterations = 200;    // K
  std::uint64_t seed = 1;
  double discount = 0.95;  // gamma, shared by the PPO and APG objectives
  int eval_episodes = 8;

  // exploration engine
  int apg_frequency = 1;  // f: exploratory refresh every f iterations
  int apg_horizon = 4;    // h
  int apg_epochs = 5;     // e
  int apg_lanes = 256;    // N
  double apg_lr = 3e-5;

  // model-free learner
  int ppo_lanes = 64;             // n
  int rollout_steps = 32;         // T
  double explore_fraction = 0.5;  // alpha: share of lanes given to explore
  double ppo_lr = 3e-4;
  double gae_lambda = 0.95;
  double clip_eps = 0.2;
  double entropy_coef = 1e-3;
  int policy_epochs = 4;
  int critic_epochs = 4;
  int minibatches = 8;

  int explore_lane_count() const;  // floor(alpha * n)
  int primary_lane_count() const { return ppo_lanes - explore_lane_count(); }
  // Throws ConfigError on invalid settings.
  void validate() const;
};

// Per-environment defaults; exploration hyperparameters follow the
// published per-task table where a row exists (pendulum reuses the
// point-mass row).
TrainConfig default_config(EnvName env);

struct IterationMetrics {
  int iter = 0;
  long env_steps = 0;  // cumulative, PPO and APG rollouts both counted
  double eval_return_mean = 0.0;
  double eval_return_std = 0.0;
  double train_return_mean = std::numeric_limits<double>::quiet_NaN();
  double adv_primary_mean = std::numeric_limits<double>::quiet_NaN();
  double adv_explore_mean = std::numeric_limits<double>::quiet_NaN();
  double adv_gap = std::numeric_limits<double>::quiet_NaN();
  double apg_loss = std::numeric_limits<double>::quiet_NaN();
  double wall_ms = 0.0;
};

struct TrainResult {
  std::vector<IterationMetrics> metrics;
  MlpParams policy;
  MlpParams critic;
};

// Full training run per the configured mode:
//   augmented    - every f-th iteration a short-lived exploratory policy is
//                  derived by APG, collects the alpha share of lanes, its
//                  data is merged for the policy update, and it is dropped;
//                  the critic fits primary data only
//   ppo_baseline - plain PPO on all lanes
//   apg_only     - chained exploratory updates, no PPO (reference mode)
// Deterministic under seed. APG numerical failures degrade the iteration to
// plain PPO (logged to stderr); other numerical failures propagate.
TrainResult train(const TrainConfig& cfg);

struct GapStats {
  bool primary_present = false;
  bool explore_present = false;
  double primary_mean = std::numeric_limits<double>::quiet_NaN();
  double explore_mean = std::numeric_limits<double>::quiet_NaN();
  double gap = std::numeric_limits<double>::quiet_NaN();
};

// Mean pre-normalization advantage of explore-tagged minus primary-tagged
// samples; missing sources leave the gap flagged NaN.
GapStats advantage_gap(const RolloutBatch& batch);

struct EvalStats {
  double mean = 0.0;
  double stddev = 0.0;
};

// Deterministic-mean-action rollouts to episode end; undiscounted returns.
template <Environment E>
EvalStats evaluate(const MlpParams& policy, const E& env, int episodes,
                   Rng& rng) {
  const EnvSpec& spec = env.spec();
  std::vector<double> returns;
  returns.reserve(episodes);
  for (int ep = 0; ep < episodes; ++ep) {
    EnvState s = env.reset(rng);
    double total = 0.0;
    while (!s.done) {
      Eigen::VectorXd a = clip_action(spec, mlp_forward(policy, s.sim));
      StepOutput st = env.step(s, a);
      total += st.reward;
      s = st.next;
    }
    returns.push_back(total);
  }
  EvalStats out;
  for (double r : returns) out.mean += r;
  out.mean /= static_cast<double>(returns.size());
  double var = 0.0;
  for (double r : returns) var += (r - out.mean) * (r - out.mean);
  out.stddev = std::sqrt(var / static_cast<double>(returns.size()));
  return out;
}

// Fixed 10-column schema, header row, LF endings, %.17g numerics.
void write_metrics_csv(const std::vector<IterationMetrics>& rows,
                       std::ostream& os);

}  // namespace apgx

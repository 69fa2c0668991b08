#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "apgx/env.hpp"
#include "apgx/errors.hpp"
#include "apgx/mlp.hpp"

namespace apgx {

enum class Source { kPrimary, kExplore };

struct Transition {
  Eigen::VectorXd obs;
  Eigen::VectorXd action;  // pre-clip sample; log-probs are taken here
  double reward = 0.0;
  bool done = false;       // termination predicate held at the successor
  bool truncated = false;  // episode cap or rollout cut; bootstrap applies
  double behavior_log_prob = 0.0;
  double value = 0.0;           // V(obs) under the collecting critic
  Source source = Source::kPrimary;
  double bootstrap_value = 0.0;  // V(successor), only when truncated
  double advantage = std::numeric_limits<double>::quiet_NaN();
  double return_target = std::numeric_limits<double>::quiet_NaN();
};

struct RolloutBatch {
  int num_lanes = 0;
  int steps_per_lane = 0;
  std::vector<Transition> transitions;  // [lane * steps_per_lane + t]
  bool values_ready = false;
  bool gae_ready = false;

  int size() const { return static_cast<int>(transitions.size()); }
};

// Stochastic on-policy rollout in fresh-reset lanes. Actions are sampled
// from the Gaussian policy, clipped before the env step, and logged
// unclipped with their behavior log-prob. Episodes auto-reset on done;
// cap hits and the rollout cut are recorded as truncation with the
// critic's value at the successor state.
template <Environment E>
RolloutBatch collect_rollout(const E& env, const MlpParams& policy,
                             const MlpParams& critic, int num_lanes,
                             int steps_per_lane, Rng& rng, Source tag) {
  const EnvSpec& spec = env.spec();
  RolloutBatch batch;
  batch.num_lanes = num_lanes;
  batch.steps_per_lane = steps_per_lane;
  batch.transitions.resize(static_cast<size_t>(num_lanes) * steps_per_lane);

  for (int lane = 0; lane < num_lanes; ++lane) {
    EnvState state = env.reset(rng);
    for (int t = 0; t < steps_per_lane; ++t) {
      Transition& tr = batch.transitions[static_cast<size_t>(lane) * steps_per_lane + t];
      PolicyOutput pol = policy_forward(policy, state.sim);
      Eigen::VectorXd noise = rng.normal_vec(spec.dim_a);
      Eigen::VectorXd raw = sample_reparam(pol, noise);

      tr.obs = state.sim;
      tr.action = raw;
      tr.behavior_log_prob = log_prob(pol, raw);
      tr.value = value_forward(critic, state.sim);
      tr.source = tag;

      StepOutput st = env.step(state, clip_action(spec, raw));
      tr.reward = st.reward;

      bool terminated = st.next.done && env.terminal(st.next.sim);
      bool capped = st.next.done && !terminated;
      if (terminated) {
        tr.done = true;
      } else if (capped || t == steps_per_lane - 1) {
        tr.truncated = true;
        tr.bootstrap_value = value_forward(critic, st.next.sim);
      }

      if (st.next.done)
        state = env.reset(rng);
      else
        state = st.next;
    }
  }
  batch.values_ready = true;
  return batch;
}

// GAE over each lane: delta_t = r_t + gamma*V(s_{t+1})*(1-done_t) - V(s_t)
// with the stored bootstrap value standing in for V(s_{t+1}) at truncation;
// the lambda chain never crosses an episode boundary. Return targets are
// advantage + value.
void compute_gae(RolloutBatch& batch, double discount, double lambda);

// Concatenates explore-tagged lanes after the primary ones.
RolloutBatch merge_batches(RolloutBatch primary, RolloutBatch explore);

struct LossGrad {
  double loss = 0.0;
  MlpParams grad;
};

// Clipped-surrogate policy loss with entropy bonus over the given samples.
// `advantages` aligns with `items` and is used as-is (normalization is the
// caller's business). The probability ratio divides by each sample's stored
// behavior log-prob, which realizes the per-source importance ratio.
LossGrad ppo_policy_loss(const MlpParams& policy,
                         const std::vector<const Transition*>& items,
                         const std::vector<double>& advantages,
                         double clip_eps, double entropy_coef);

// Mean squared error of the critic against return targets over the
// primary-tagged subset of `items`; explore samples are ignored.
LossGrad value_loss(const MlpParams& critic,
                    const std::vector<const Transition*>& items);

struct PpoSettings {
  int policy_epochs = 4;
  int critic_epochs = 4;
  int minibatches = 8;
  double policy_lr = 3e-4;
  double critic_lr = 3e-4;
  double clip_eps = 0.2;
  double entropy_coef = 1e-3;
};

struct PpoUpdateStats {
  double last_policy_loss = 0.0;
  double last_value_loss = 0.0;
  // max |ratio - 1| over primary samples before the first policy epoch
  double max_primary_ratio_dev = 0.0;
};

// Shuffled-minibatch PPO epochs on the full batch (policy) and on its
// primary subset (critic), with per-minibatch advantage normalization
// (mean 0, std 1, std floored at 1e-8).
PpoUpdateStats ppo_update(MlpParams& policy, MlpParams& critic,
                          AdamState& policy_opt, AdamState& critic_opt,
                          const RolloutBatch& batch, const PpoSettings& cfg,
                          Rng& rng);

}  // namespace apgx

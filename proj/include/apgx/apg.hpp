#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "apgx/env.hpp"
#include "apgx/errors.hpp"
#include "apgx/mlp.hpp"

namespace apgx {

// Per-step record of a short-horizon exploratory rollout. Enough is kept to
// run the backward recursion and to replay the forward loss independently.
struct ApgStepRecord {
  Eigen::VectorXd obs;     // state the action was taken in
  Eigen::VectorXd action;  // clipped action fed to the env
  Eigen::VectorXd noise;   // reparameterization noise
  Eigen::VectorXd clip_mask;  // 1 where the raw sample stayed in bounds
  double reward = 0.0;
  bool active = false;     // false once the lane has stopped
  bool saturated = false;  // any coordinate hit the action bounds
  Eigen::MatrixXd jac_f_s, jac_f_a;
  Eigen::VectorXd grad_r_s, grad_r_a;
};

struct ApgLaneEnd {
  Eigen::VectorXd obs;      // state whose value closes the lane's objective
  int steps = 0;            // active steps taken (== horizon unless stopped)
  bool terminated = false;  // stopped by the termination predicate
};

struct ApgTape {
  int num_lanes = 0;
  int horizon = 0;
  std::vector<ApgStepRecord> steps;  // [lane * horizon + t]
  std::vector<ApgLaneEnd> ends;      // [lane]

  const ApgStepRecord& at(int lane, int t) const {
    return steps[static_cast<size_t>(lane) * horizon + t];
  }
  ApgStepRecord& at(int lane, int t) {
    return steps[static_cast<size_t>(lane) * horizon + t];
  }
  bool any_saturation() const {
    for (const auto& r : steps)
      if (r.active && r.saturated) return true;
    return false;
  }
};

struct ApgRollout {
  ApgTape tape;
  double loss = 0.0;
};

// Rolls the policy for `horizon` steps in `num_lanes` fresh-reset lanes and
// evaluates the negated discounted short-horizon return with a critic value
// closing each lane. Lanes that hit the termination predicate stop early:
// their remaining rewards are zero and the value term is taken at the stop
// state with the discount accumulated so far.
//
// Draw order is fixed (all resets, then per step all lanes' noise, drawn
// whether or not a lane is still active) so a replay from a copied rng under
// perturbed parameters stays aligned draw-for-draw.
template <Environment E>
ApgRollout apg_rollout(const E& env, const MlpParams& policy,
                       const MlpParams& critic, int num_lanes, int horizon,
                       double discount, Rng& rng) {
  const EnvSpec& spec = env.spec();
  ApgRollout out;
  ApgTape& tape = out.tape;
  tape.num_lanes = num_lanes;
  tape.horizon = horizon;
  tape.steps.resize(static_cast<size_t>(num_lanes) * horizon);
  tape.ends.resize(num_lanes);

  std::vector<EnvState> states(num_lanes);
  for (int i = 0; i < num_lanes; ++i) states[i] = env.reset(rng);
  std::vector<bool> running(num_lanes, true);

  for (int t = 0; t < horizon; ++t) {
    for (int i = 0; i < num_lanes; ++i) {
      Eigen::VectorXd noise = rng.normal_vec(spec.dim_a);
      if (!running[i]) continue;

      PolicyOutput pol = policy_forward(policy, states[i].sim);
      Eigen::VectorXd raw = sample_reparam(pol, noise);
      Eigen::VectorXd act = clip_action(spec, raw);

      StepOutput st = env.step(states[i], act);
      if (!std::isfinite(st.reward) || !st.next.sim.allFinite())
        throw NumericalError("non-finite state or reward in apg rollout", i, t);

      ApgStepRecord& rec = tape.at(i, t);
      rec.obs = states[i].sim;
      rec.action = act;
      rec.noise = noise;
      rec.clip_mask =
          (act.array() == raw.array()).cast<double>().matrix();
      rec.reward = st.reward;
      rec.active = true;
      rec.saturated = rec.clip_mask.minCoeff() < 1.0;
      rec.jac_f_s = std::move(st.jac_f_s);
      rec.jac_f_a = std::move(st.jac_f_a);
      rec.grad_r_s = std::move(st.grad_r_s);
      rec.grad_r_a = std::move(st.grad_r_a);

      states[i] = st.next;
      if (st.next.done) {
        running[i] = false;
        tape.ends[i].obs = states[i].sim;
        tape.ends[i].steps = t + 1;
        tape.ends[i].terminated = env.terminal(states[i].sim);
      }
    }
  }
  for (int i = 0; i < num_lanes; ++i) {
    if (running[i]) {
      tape.ends[i].obs = states[i].sim;
      tape.ends[i].steps = horizon;
      tape.ends[i].terminated = false;
    }
  }

  // loss = -(1/(N h)) sum_i [ sum_t gamma^t r_t  +  gamma^{steps_i} V(end_i) ]
  double total = 0.0;
  for (int i = 0; i < num_lanes; ++i) {
    double g = 1.0;
    for (int t = 0; t < tape.ends[i].steps; ++t) {
      total += g * tape.at(i, t).reward;
      g *= discount;
    }
    total += g * value_forward(critic, tape.ends[i].obs);
  }
  out.loss = -total / (static_cast<double>(num_lanes) * horizon);
  if (!std::isfinite(out.loss))
    throw NumericalError("non-finite apg loss", -1, -1);
  return out;
}

// Reverse recursion over the tape giving the exact gradient of the rollout
// loss w.r.t. the policy. The action clip uses its exact subgradient: a
// saturated coordinate passes nothing back to the sampler, which keeps the
// analytic gradient equal to finite differences of the replayed loss even
// when samples sit on the bounds. Lanes are reduced in fixed order.
MlpParams apg_backward(const ApgTape& tape, const MlpParams& policy,
                       const MlpParams& critic, double discount);

struct ExploreResult {
  MlpParams policy;
  std::vector<double> loss_trace;
  long env_steps = 0;  // lanes * horizon * epochs, padding included
  bool failed = false;
  std::string failure;
};

struct ApgSettings {
  int num_lanes = 256;
  int horizon = 4;
  int epochs = 5;
  double lr = 3e-5;
  double discount = 0.95;
};

// Copies the policy and improves the copy with `epochs` rounds of
// rollout / backward / norm-clip / Adam (fresh optimizer state). The source
// policy is never touched. On a numerical failure the unmodified copy is
// returned with the failed flag set.
template <Environment E>
ExploreResult make_exploratory_policy(const MlpParams& policy,
                                      const MlpParams& critic, const E& env,
                                      const ApgSettings& cfg, Rng& rng) {
  ExploreResult res;
  res.policy = policy;
  res.env_steps = static_cast<long>(cfg.num_lanes) * cfg.horizon * cfg.epochs;

  MlpParams candidate = policy;
  AdamState opt = make_adam_state(candidate);
  try {
    for (int e = 0; e < cfg.epochs; ++e) {
      ApgRollout roll = apg_rollout(env, candidate, critic, cfg.num_lanes,
                                    cfg.horizon, cfg.discount, rng);
      res.loss_trace.push_back(roll.loss);
      MlpParams grad = apg_backward(roll.tape, candidate, critic, cfg.discount);
      double norm = global_grad_norm(grad);
      if (norm > 1.0) scale_params(grad, 1.0 / norm);
      adam_step(candidate, grad, opt, cfg.lr);
      clamp_log_std(candidate);
    }
    res.policy = std::move(candidate);
  } catch (const NumericalError& err) {
    res.failed = true;
    res.failure = err.what();
  }
  return res;
}

// Concave quadratic used to exercise the improvement guarantee of a single
// smooth ascent step.
struct QuadraticObjective {
  double curvature = 1.0;  // smoothness constant of -curvature/2 * |x|^2
  double step_size = 0.1;
  int dim = 4;
};

double quadratic_value(const QuadraticObjective& q, const Eigen::VectorXd& x);
Eigen::VectorXd quadratic_gradient(const QuadraticObjective& q,
                                   const Eigen::VectorXd& x);

// True iff one gradient-ascent step of q.step_size improves the objective
// from a nonzero start; holds exactly when step_size < 2 / curvature.
bool ascent_step_improves(const QuadraticObjective& q);

}  // namespace apgx

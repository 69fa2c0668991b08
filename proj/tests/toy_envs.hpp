#pragma once

// Hand-built environments with trivially known losses and gradients, used to
// pin down the rollout and backward machinery independently of the real
// dynamics.

#include <limits>

#include "apgx/env.hpp"

namespace apgx::testing {

inline EnvSpec scalar_spec(double lo = -10.0, double hi = 10.0) {
  EnvSpec s;
  s.name = EnvName::kPointMass;  // label only; dynamics live below
  s.dim_s = 1;
  s.dim_a = 1;
  s.dt = 0.05;
  s.episode_cap = 1000000;
  s.action_low = Eigen::VectorXd::Constant(1, lo);
  s.action_high = Eigen::VectorXd::Constant(1, hi);
  return s;
}

// f(s, a) = s, r(s, a) = c. All derivative blocks that matter are constant.
struct ConstRewardEnv {
  double c = 0.0;
  EnvSpec spec_ = scalar_spec();

  const EnvSpec& spec() const { return spec_; }
  EnvState reset(Rng&) const { return {Eigen::VectorXd::Zero(1), 0, false}; }
  bool terminal(const Eigen::VectorXd&) const { return false; }
  StepOutput step(const EnvState& s, const Eigen::VectorXd&) const {
    StepOutput out;
    out.next.sim = s.sim;
    out.next.step_count = s.step_count + 1;
    out.next.done = out.next.step_count >= spec_.episode_cap;
    out.reward = c;
    out.jac_f_s = Eigen::MatrixXd::Identity(1, 1);
    out.jac_f_a = Eigen::MatrixXd::Zero(1, 1);
    out.grad_r_s = Eigen::VectorXd::Zero(1);
    out.grad_r_a = Eigen::VectorXd::Zero(1);
    return out;
  }
};

// f(s, a) = s, r(s, a) = w a. The rollout loss gradient is a pure chain
// through the reward's action derivative.
struct LinearRewardEnv {
  double w = 1.0;
  EnvSpec spec_ = scalar_spec();

  const EnvSpec& spec() const { return spec_; }
  EnvState reset(Rng&) const {
    return {Eigen::VectorXd::Constant(1, 0.8), 0, false};
  }
  bool terminal(const Eigen::VectorXd&) const { return false; }
  StepOutput step(const EnvState& s, const Eigen::VectorXd& a) const {
    StepOutput out;
    out.next.sim = s.sim;
    out.next.step_count = s.step_count + 1;
    out.next.done = false;
    out.reward = w * a[0];
    out.jac_f_s = Eigen::MatrixXd::Identity(1, 1);
    out.jac_f_a = Eigen::MatrixXd::Zero(1, 1);
    out.grad_r_s = Eigen::VectorXd::Zero(1);
    out.grad_r_a = Eigen::VectorXd::Constant(1, w);
    return out;
  }
};

// Produces a NaN reward on the step with the given index.
struct NanRewardEnv {
  int bad_step = 0;
  EnvSpec spec_ = scalar_spec();

  const EnvSpec& spec() const { return spec_; }
  EnvState reset(Rng&) const { return {Eigen::VectorXd::Zero(1), 0, false}; }
  bool terminal(const Eigen::VectorXd&) const { return false; }
  StepOutput step(const EnvState& s, const Eigen::VectorXd&) const {
    StepOutput out;
    out.next.sim = s.sim;
    out.next.step_count = s.step_count + 1;
    out.next.done = false;
    out.reward = s.step_count == bad_step
                     ? std::numeric_limits<double>::quiet_NaN()
                     : 1.0;
    out.jac_f_s = Eigen::MatrixXd::Identity(1, 1);
    out.jac_f_a = Eigen::MatrixXd::Zero(1, 1);
    out.grad_r_s = Eigen::VectorXd::Zero(1);
    out.grad_r_a = Eigen::VectorXd::Zero(1);
    return out;
  }
};

// Terminates once |s| crosses a bound; s' = s + a.
struct BoundedWalkEnv {
  double bound = 1.0;
  EnvSpec spec_ = scalar_spec();

  const EnvSpec& spec() const { return spec_; }
  EnvState reset(Rng&) const { return {Eigen::VectorXd::Zero(1), 0, false}; }
  bool terminal(const Eigen::VectorXd& sim) const {
    return std::abs(sim[0]) > bound;
  }
  StepOutput step(const EnvState& s, const Eigen::VectorXd& a) const {
    StepOutput out;
    out.next.sim = s.sim + a;
    out.next.step_count = s.step_count + 1;
    out.next.done =
        terminal(out.next.sim) || out.next.step_count >= spec_.episode_cap;
    out.reward = 1.0;
    out.jac_f_s = Eigen::MatrixXd::Identity(1, 1);
    out.jac_f_a = Eigen::MatrixXd::Identity(1, 1);
    out.grad_r_s = Eigen::VectorXd::Zero(1);
    out.grad_r_a = Eigen::VectorXd::Zero(1);
    return out;
  }
};

// V == bias: a critic with zero weights and a fixed output bias.
inline MlpParams constant_critic(int dim_s, double value) {
  Rng rng(0);
  MlpParams c = make_critic(dim_s, {4}, rng);
  for (auto& w : c.weights) w.setZero();
  for (auto& b : c.biases) b.setZero();
  c.biases.back()[0] = value;
  return c;
}

}  // namespace apgx::testing

#include "apgx/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

#include "apgx/apg.hpp"
#include "apgx/mlp.hpp"

namespace apgx {

namespace {

EnvState random_state(const DiffEnv& env, Rng& rng) {
  EnvState s;
  s.step_count = 0;
  s.done = false;
  switch (env.spec().name) {
    case EnvName::kPointMass:
      s.sim = Eigen::VectorXd(4);
      s.sim << rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0),
          rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0);
      break;
    case EnvName::kPendulum: {
      // keep clear of the reward wrap at theta = 0 (mod 2pi)
      double theta;
      do {
        theta = rng.uniform(-2.0 * M_PI, 2.0 * M_PI);
      } while (std::abs(wrap_angle(theta)) < 1e-3);
      s.sim = Eigen::VectorXd(2);
      s.sim << theta, rng.uniform(-4.0, 4.0);
      break;
    }
    case EnvName::kCartpole:
      s.sim = Eigen::VectorXd(4);
      s.sim << rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0),
          rng.uniform(-0.25, 0.25), rng.uniform(-1.0, 1.0);
      break;
  }
  return s;
}

Eigen::VectorXd random_action(const EnvSpec& spec, Rng& rng) {
  Eigen::VectorXd a(spec.dim_a);
  for (int j = 0; j < spec.dim_a; ++j)
    a[j] = rng.uniform(spec.action_low[j], spec.action_high[j]);
  return a;
}

double floored_rel(double analytic, double fd) {
  return std::abs(analytic - fd) / std::max(1.0, std::abs(analytic));
}

double vec_rel_err(const Eigen::VectorXd& analytic, const Eigen::VectorXd& fd) {
  double scale = std::max(1.0, analytic.cwiseAbs().maxCoeff());
  return (analytic - fd).cwiseAbs().maxCoeff() / scale;
}

}  // namespace

double env_jacobian_max_err(EnvName name, int samples, double eps, Rng& rng) {
  if (!(eps > 0.0 && eps <= 1e-3))
    throw std::invalid_argument("eps must be in (0, 1e-3]");
  DiffEnv env(name);
  double worst = 0.0;
  for (int i = 0; i < samples; ++i) {
    EnvState s = random_state(env, rng);
    Eigen::VectorXd a = random_action(env.spec(), rng);
    worst = std::max(worst, check_jacobians(env, s, a, eps));
  }
  return worst;
}

double net_gradient_max_err(int nets, Rng& rng) {
  const double eps = 1e-6;
  double worst = 0.0;

  for (int i = 0; i < nets; ++i) {
    int dim_s = 2 + static_cast<int>(rng.next_u64() % 4);
    int dim_a = 1 + static_cast<int>(rng.next_u64() % 3);
    MlpParams policy = make_policy(dim_s, dim_a, {8, 8}, rng);
    for (int j = 0; j < dim_a; ++j) policy.log_std[j] = rng.uniform(-1.0, 0.5);
    MlpParams critic = make_critic(dim_s, {8, 8}, rng);

    Eigen::VectorXd obs = rng.normal_vec(dim_s);
    Eigen::VectorXd noise = rng.normal_vec(dim_a);
    Eigen::VectorXd up = rng.normal_vec(dim_a);

    // scalar probe g(theta) = up . a(theta, obs, noise)
    MlpVjp vjp = policy_backward(policy, obs, noise, up);
    Eigen::VectorXd theta = flatten(policy);
    Eigen::VectorXd fd(theta.size());
    MlpParams probe = policy;
    for (int k = 0; k < theta.size(); ++k) {
      Eigen::VectorXd t = theta;
      t[k] += eps;
      unflatten(t, probe);
      double hi = up.dot(sample_reparam(policy_forward(probe, obs), noise));
      t[k] -= 2 * eps;
      unflatten(t, probe);
      double lo = up.dot(sample_reparam(policy_forward(probe, obs), noise));
      fd[k] = (hi - lo) / (2 * eps);
    }
    worst = std::max(worst, vec_rel_err(flatten(vjp.grad), fd));

    Eigen::VectorXd fd_s(dim_s);
    for (int k = 0; k < dim_s; ++k) {
      Eigen::VectorXd o = obs;
      o[k] += eps;
      double hi = up.dot(sample_reparam(policy_forward(policy, o), noise));
      o[k] -= 2 * eps;
      double lo = up.dot(sample_reparam(policy_forward(policy, o), noise));
      fd_s[k] = (hi - lo) / (2 * eps);
    }
    worst = std::max(worst, vec_rel_err(vjp.grad_input, fd_s));

    // critic: g(phi) = c * V_phi(obs)
    double up_v = rng.normal();
    MlpVjp cj = value_backward(critic, obs, up_v);
    Eigen::VectorXd phi = flatten(critic);
    Eigen::VectorXd fd_c(phi.size());
    MlpParams cprobe = critic;
    for (int k = 0; k < phi.size(); ++k) {
      Eigen::VectorXd t = phi;
      t[k] += eps;
      unflatten(t, cprobe);
      double hi = up_v * value_forward(cprobe, obs);
      t[k] -= 2 * eps;
      unflatten(t, cprobe);
      double lo = up_v * value_forward(cprobe, obs);
      fd_c[k] = (hi - lo) / (2 * eps);
    }
    worst = std::max(worst, vec_rel_err(flatten(cj.grad), fd_c));

    Eigen::VectorXd fd_cs(dim_s);
    for (int k = 0; k < dim_s; ++k) {
      Eigen::VectorXd o = obs;
      o[k] += eps;
      double hi = up_v * value_forward(critic, o);
      o[k] -= 2 * eps;
      double lo = up_v * value_forward(critic, o);
      fd_cs[k] = (hi - lo) / (2 * eps);
    }
    worst = std::max(worst, vec_rel_err(cj.grad_input, fd_cs));
  }
  (void)floored_rel;
  return worst;
}

double bptt_max_err(EnvName name, int lanes, int horizon, double discount,
                    Rng& rng) {
  DiffEnv env(name);
  const EnvSpec& spec = env.spec();

  MlpParams policy = make_policy(spec.dim_s, spec.dim_a, {8, 8}, rng);
  for (int j = 0; j < spec.dim_a; ++j) policy.log_std[j] = -2.0;
  MlpParams critic = make_critic(spec.dim_s, {8, 8}, rng);

  Rng tape_rng = rng.split(0xB9);
  Rng replay = tape_rng;  // copy: replays identical resets and noise
  ApgRollout roll =
      apg_rollout(env, policy, critic, lanes, horizon, discount, tape_rng);
  if (roll.tape.any_saturation())
    throw std::logic_error("bptt gradcheck rollout saturated an action bound");
  for (const ApgLaneEnd& end : roll.tape.ends)
    if (end.terminated)
      throw std::logic_error("bptt gradcheck rollout hit a termination boundary");

  MlpParams grad = apg_backward(roll.tape, policy, critic, discount);

  const double eps = 1e-5;
  Eigen::VectorXd theta = flatten(policy);
  Eigen::VectorXd fd(theta.size());
  MlpParams probe = policy;
  for (int k = 0; k < theta.size(); ++k) {
    Eigen::VectorXd t = theta;
    t[k] += eps;
    unflatten(t, probe);
    Rng r1 = replay;
    double hi = apg_rollout(env, probe, critic, lanes, horizon, discount, r1).loss;
    t[k] -= 2 * eps;
    unflatten(t, probe);
    Rng r2 = replay;
    double lo = apg_rollout(env, probe, critic, lanes, horizon, discount, r2).loss;
    fd[k] = (hi - lo) / (2 * eps);
  }
  return vec_rel_err(flatten(grad), fd);
}

}  // namespace apgx

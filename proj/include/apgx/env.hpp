#pragma once

#include <Eigen/Dense>
#include <concepts>
#include <string>

#include "apgx/rng.hpp"

namespace apgx {

enum class EnvName { kPointMass, kPendulum, kCartpole };

std::string env_name_string(EnvName name);
EnvName env_name_from_string(const std::string& s);

struct EnvSpec {
  EnvName name;
  int dim_s = 0;
  int dim_a = 0;
  double dt = 0.05;
  Eigen::VectorXd action_low;
  Eigen::VectorXd action_high;
  int episode_cap = 200;
};

struct EnvState {
  Eigen::VectorXd sim;
  int step_count = 0;
  bool done = false;
};

// One transition together with the analytic derivative blocks of the
// dynamics f(s, a) and the reward r(s, a), all evaluated at (s, a).
struct StepOutput {
  EnvState next;
  double reward = 0.0;
  Eigen::MatrixXd jac_f_s;   // dim_s x dim_s
  Eigen::MatrixXd jac_f_a;   // dim_s x dim_a
  Eigen::VectorXd grad_r_s;  // dim_s
  Eigen::VectorXd grad_r_a;  // dim_a
};

// Deterministic toy environments with closed-form Jacobians. Semi-implicit
// Euler throughout: velocities update first, then positions.
class DiffEnv {
 public:
  explicit DiffEnv(EnvName name);

  const EnvSpec& spec() const { return spec_; }

  EnvState reset(Rng& rng) const;

  // Deterministic reset core: u holds one unit-interval draw per sampled
  // state coordinate. reset() draws u from the rng and delegates here.
  EnvState reset_from_unit(const Eigen::VectorXd& u) const;

  StepOutput step(const EnvState& s, const Eigen::VectorXd& a) const;

  // Termination predicate on raw state (false for point_mass / pendulum).
  bool terminal(const Eigen::VectorXd& sim) const;

 private:
  EnvSpec spec_;
};

// Rollout machinery is generic over this so tests can substitute
// hand-built environments with known losses and gradients.
template <typename E>
concept Environment = requires(const E& e, const EnvState& s,
                               const Eigen::VectorXd& a, Rng& rng) {
  { e.spec() } -> std::convertible_to<const EnvSpec&>;
  { e.reset(rng) } -> std::same_as<EnvState>;
  { e.step(s, a) } -> std::same_as<StepOutput>;
  { e.terminal(s.sim) } -> std::same_as<bool>;
};

inline Eigen::VectorXd clip_action(const EnvSpec& spec,
                                   const Eigen::VectorXd& a) {
  return a.cwiseMax(spec.action_low).cwiseMin(spec.action_high);
}

// Maps x to (-pi, pi].
double wrap_angle(double x);

// Max over all entries of the four derivative blocks of
// |analytic - central_fd| / max(1, |analytic|).
template <Environment E>
double check_jacobians(const E& env, const EnvState& s,
                       const Eigen::VectorXd& a, double eps) {
  const EnvSpec& spec = env.spec();
  StepOutput out = env.step(s, a);

  const int ds = spec.dim_s;
  const int da = spec.dim_a;
  Eigen::MatrixXd fd_f_s(ds, ds), fd_f_a(ds, da);
  Eigen::VectorXd fd_r_s(ds), fd_r_a(da);

  for (int j = 0; j < ds; ++j) {
    EnvState hi = s, lo = s;
    hi.sim[j] += eps;
    lo.sim[j] -= eps;
    StepOutput oh = env.step(hi, a);
    StepOutput ol = env.step(lo, a);
    fd_f_s.col(j) = (oh.next.sim - ol.next.sim) / (2.0 * eps);
    fd_r_s[j] = (oh.reward - ol.reward) / (2.0 * eps);
  }
  for (int j = 0; j < da; ++j) {
    Eigen::VectorXd hi = a, lo = a;
    hi[j] += eps;
    lo[j] -= eps;
    StepOutput oh = env.step(s, hi);
    StepOutput ol = env.step(s, lo);
    fd_f_a.col(j) = (oh.next.sim - ol.next.sim) / (2.0 * eps);
    fd_r_a[j] = (oh.reward - ol.reward) / (2.0 * eps);
  }

  auto rel = [](double analytic, double fd) {
    return std::abs(analytic - fd) / std::max(1.0, std::abs(analytic));
  };
  double err = 0.0;
  for (int i = 0; i < ds; ++i) {
    for (int j = 0; j < ds; ++j) err = std::max(err, rel(out.jac_f_s(i, j), fd_f_s(i, j)));
    for (int j = 0; j < da; ++j) err = std::max(err, rel(out.jac_f_a(i, j), fd_f_a(i, j)));
    err = std::max(err, rel(out.grad_r_s[i], fd_r_s[i]));
  }
  for (int j = 0; j < da; ++j) err = std::max(err, rel(out.grad_r_a[j], fd_r_a[j]));
  return err;
}

}  // namespace apgx

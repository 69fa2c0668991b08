#include "apgx/apg.hpp"

namespace apgx {

MlpParams apg_backward(const ApgTape& tape, const MlpParams& policy,
                       const MlpParams& critic, double discount) {
  MlpParams grad = zeros_like(policy);
  const double scale =
      1.0 / (static_cast<double>(tape.num_lanes) * tape.horizon);

  for (int lane = 0; lane < tape.num_lanes; ++lane) {
    const ApgLaneEnd& end = tape.ends[lane];

    // dL/ds at the lane's closing state. The value tail is differentiated
    // only for time truncation; the termination predicate is not smooth, so
    // terminated lanes start the recursion from zero.
    Eigen::VectorXd dl_ds = Eigen::VectorXd::Zero(end.obs.size());
    if (!end.terminated) {
      double coeff = -std::pow(discount, end.steps) * scale;
      MlpVjp v = value_backward(critic, end.obs, 1.0);
      dl_ds = coeff * v.grad_input;
    }

    for (int t = end.steps - 1; t >= 0; --t) {
      const ApgStepRecord& rec = tape.at(lane, t);
      const double rc = -std::pow(discount, t) * scale;

      // total derivative w.r.t. the clipped action: direct reward term plus
      // the state path through the dynamics
      Eigen::VectorXd dl_da =
          rc * rec.grad_r_a + rec.jac_f_a.transpose() * dl_ds;
      // clip subgradient: saturated coordinates feed nothing back
      Eigen::VectorXd dl_da_raw = dl_da.cwiseProduct(rec.clip_mask);

      // policy contribution: dL/dtheta += (dL/da) dpi/dtheta, and the
      // state-through-policy path (dL/da) dpi/ds feeds the recursion
      MlpVjp pol = policy_backward(policy, rec.obs, rec.noise, dl_da_raw);
      accumulate(grad, pol.grad);

      dl_ds = rc * rec.grad_r_s + rec.jac_f_s.transpose() * dl_ds +
              pol.grad_input;
      if (!dl_ds.allFinite())
        throw NumericalError("non-finite state gradient in apg backward", lane, t);
    }
  }

  if (!flatten(grad).allFinite())
    throw NumericalError("non-finite policy gradient in apg backward", -1, -1);
  return grad;
}

double quadratic_value(const QuadraticObjective& q, const Eigen::VectorXd& x) {
  return -0.5 * q.curvature * x.squaredNorm();
}

Eigen::VectorXd quadratic_gradient(const QuadraticObjective& q,
                                   const Eigen::VectorXd& x) {
  return -q.curvature * x;
}

bool ascent_step_improves(const QuadraticObjective& q) {
  Eigen::VectorXd x0 = Eigen::VectorXd::Ones(q.dim);
  Eigen::VectorXd x1 = x0 + q.step_size * quadratic_gradient(q, x0);
  return quadratic_value(q, x1) > quadratic_value(q, x0);
}

}  // namespace apgx

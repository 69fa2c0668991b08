#include "apgx/env.hpp"

#include <cmath>
#include <stdexcept>

namespace apgx {

namespace {

constexpr double kGravity = 9.81;

// point_mass
constexpr double kPmDamping = 0.1;
constexpr double kPmActionCost = 0.001;
constexpr double kPmTargetX = 1.0;
constexpr double kPmTargetY = 1.0;

// pendulum: unit mass, unit length, angle 0 = hanging down
constexpr double kPenDamping = 0.05;
constexpr double kPenActionCost = 0.001;
constexpr double kPenVelCost = 0.1;

// cartpole
constexpr double kCpCartMass = 1.0;
constexpr double kCpPoleMass = 0.1;
constexpr double kCpHalfLength = 0.5;
constexpr double kCpThetaLimit = 0.2;
constexpr double kCpXLimit = 2.4;

EnvSpec make_spec(EnvName name) {
  EnvSpec s;
  s.name = name;
  s.dt = 0.05;
  s.episode_cap = 200;
  switch (name) {
    case EnvName::kPointMass:
      s.dim_s = 4;
      s.dim_a = 2;
      s.action_low = Eigen::VectorXd::Constant(2, -1.0);
      s.action_high = Eigen::VectorXd::Constant(2, 1.0);
      break;
    case EnvName::kPendulum:
      s.dim_s = 2;
      s.dim_a = 1;
      s.action_low = Eigen::VectorXd::Constant(1, -2.0);
      s.action_high = Eigen::VectorXd::Constant(1, 2.0);
      break;
    case EnvName::kCartpole:
      s.dim_s = 4;
      s.dim_a = 1;
      s.action_low = Eigen::VectorXd::Constant(1, -10.0);
      s.action_high = Eigen::VectorXd::Constant(1, 10.0);
      break;
  }
  return s;
}

}  // namespace

std::string env_name_string(EnvName name) {
  switch (name) {
    case EnvName::kPointMass: return "point_mass";
    case EnvName::kPendulum: return "pendulum";
    case EnvName::kCartpole: return "cartpole";
  }
  return "?";
}

EnvName env_name_from_string(const std::string& s) {
  if (s == "point_mass") return EnvName::kPointMass;
  if (s == "pendulum") return EnvName::kPendulum;
  if (s == "cartpole") return EnvName::kCartpole;
  throw std::invalid_argument("unknown environment '" + s + "'");
}

double wrap_angle(double x) {
  double w = std::fmod(x + M_PI, 2.0 * M_PI);
  if (w <= 0.0) w += 2.0 * M_PI;
  return w - M_PI;
}

DiffEnv::DiffEnv(EnvName name) : spec_(make_spec(name)) {}

EnvState DiffEnv::reset_from_unit(const Eigen::VectorXd& u) const {
  EnvState st;
  st.step_count = 0;
  st.done = false;
  switch (spec_.name) {
    case EnvName::kPointMass: {
      if (u.size() != 2) throw std::invalid_argument("point_mass reset wants 2 draws");
      st.sim = Eigen::VectorXd::Zero(4);
      st.sim[0] = -0.5 + u[0];  // px ~ U[-0.5, 0.5]
      st.sim[1] = -0.5 + u[1];  // py ~ U[-0.5, 0.5]
      break;
    }
    case EnvName::kPendulum: {
      if (u.size() != 2) throw std::invalid_argument("pendulum reset wants 2 draws");
      st.sim = Eigen::VectorXd(2);
      st.sim[0] = M_PI - u[0] * 2.0 * M_PI;  // theta ~ U(-pi, pi]
      st.sim[1] = -1.0 + u[1] * 2.0;         // theta_dot ~ U[-1, 1]
      break;
    }
    case EnvName::kCartpole: {
      if (u.size() != 4) throw std::invalid_argument("cartpole reset wants 4 draws");
      st.sim = Eigen::VectorXd(4);
      for (int i = 0; i < 4; ++i) st.sim[i] = -0.05 + u[i] * 0.1;  // U[-0.05, 0.05]
      break;
    }
  }
  return st;
}

EnvState DiffEnv::reset(Rng& rng) const {
  int draws = spec_.name == EnvName::kCartpole ? 4 : 2;
  Eigen::VectorXd u(draws);
  for (int i = 0; i < draws; ++i) u[i] = rng.uniform();
  return reset_from_unit(u);
}

bool DiffEnv::terminal(const Eigen::VectorXd& sim) const {
  if (spec_.name != EnvName::kCartpole) return false;
  return std::abs(sim[2]) > kCpThetaLimit || std::abs(sim[0]) > kCpXLimit;
}

StepOutput DiffEnv::step(const EnvState& s, const Eigen::VectorXd& a) const {
  if (s.sim.size() != spec_.dim_s)
    throw std::invalid_argument("state dimension mismatch");
  if (a.size() != spec_.dim_a)
    throw std::invalid_argument("action dimension mismatch");

  const double dt = spec_.dt;
  StepOutput out;
  out.jac_f_s = Eigen::MatrixXd::Zero(spec_.dim_s, spec_.dim_s);
  out.jac_f_a = Eigen::MatrixXd::Zero(spec_.dim_s, spec_.dim_a);
  out.grad_r_s = Eigen::VectorXd::Zero(spec_.dim_s);
  out.grad_r_a = Eigen::VectorXd::Zero(spec_.dim_a);
  out.next.sim = Eigen::VectorXd(spec_.dim_s);

  switch (spec_.name) {
    case EnvName::kPointMass: {
      // s = [px, py, vx, vy]; v' = v + dt*(a - 0.1 v); p' = p + dt*v'
      const double decay = 1.0 - kPmDamping * dt;
      Eigen::Vector2d p(s.sim[0], s.sim[1]);
      Eigen::Vector2d v(s.sim[2], s.sim[3]);
      Eigen::Vector2d vn = decay * v + dt * a;
      Eigen::Vector2d pn = p + dt * vn;
      out.next.sim << pn[0], pn[1], vn[0], vn[1];

      out.jac_f_s.block<2, 2>(0, 0) = Eigen::Matrix2d::Identity();
      out.jac_f_s.block<2, 2>(0, 2) = dt * decay * Eigen::Matrix2d::Identity();
      out.jac_f_s.block<2, 2>(2, 2) = decay * Eigen::Matrix2d::Identity();
      out.jac_f_a.block<2, 2>(0, 0) = dt * dt * Eigen::Matrix2d::Identity();
      out.jac_f_a.block<2, 2>(2, 0) = dt * Eigen::Matrix2d::Identity();

      Eigen::Vector2d d = p - Eigen::Vector2d(kPmTargetX, kPmTargetY);
      double gauss = std::exp(-d.squaredNorm());
      out.reward = gauss - kPmActionCost * a.squaredNorm();
      out.grad_r_s.head<2>() = -2.0 * gauss * d;
      out.grad_r_a = -2.0 * kPmActionCost * a;
      break;
    }
    case EnvName::kPendulum: {
      // s = [theta, theta_dot]; theta_dd = -g sin(theta) + a - 0.05 theta_dot
      const double th = s.sim[0];
      const double om = s.sim[1];
      const double tau = a[0];
      const double acc = -kGravity * std::sin(th) + tau - kPenDamping * om;
      const double omn = om + dt * acc;
      const double thn = th + dt * omn;
      out.next.sim << thn, omn;

      const double dacc_dth = -kGravity * std::cos(th);
      const double domn_dth = dt * dacc_dth;
      const double domn_dom = 1.0 - kPenDamping * dt;
      out.jac_f_s << 1.0 + dt * domn_dth, dt * domn_dom,
                     domn_dth, domn_dom;
      out.jac_f_a << dt * dt, dt;

      const double e = wrap_angle(th - M_PI);
      out.reward = -(e * e + kPenVelCost * om * om + kPenActionCost * tau * tau);
      out.grad_r_s << -2.0 * e, -2.0 * kPenVelCost * om;
      out.grad_r_a << -2.0 * kPenActionCost * tau;
      break;
    }
    case EnvName::kCartpole: {
      // s = [x, x_dot, theta, theta_dot]; theta 0 = upright
      const double xd = s.sim[1];
      const double th = s.sim[2];
      const double om = s.sim[3];
      const double force = a[0];

      const double total = kCpCartMass + kCpPoleMass;
      const double pml = kCpPoleMass * kCpHalfLength;
      const double sth = std::sin(th), cth = std::cos(th);

      const double tmp = (force + pml * om * om * sth) / total;
      const double denom =
          kCpHalfLength * (4.0 / 3.0 - kCpPoleMass * cth * cth / total);
      const double th_acc = (kGravity * sth - cth * tmp) / denom;
      const double x_acc = tmp - pml * th_acc * cth / total;

      const double xdn = xd + dt * x_acc;
      const double xn = s.sim[0] + dt * xdn;
      const double omn = om + dt * th_acc;
      const double thn = th + dt * omn;
      out.next.sim << xn, xdn, thn, omn;

      // partials of tmp, denom, th_acc, x_acc w.r.t. (theta, omega, force)
      const double dtmp_df = 1.0 / total;
      const double dtmp_dom = 2.0 * pml * om * sth / total;
      const double dtmp_dth = pml * om * om * cth / total;
      const double ddenom_dth =
          kCpHalfLength * 2.0 * kCpPoleMass * cth * sth / total;
      const double num = kGravity * sth - cth * tmp;
      const double dnum_dth = kGravity * cth + sth * tmp - cth * dtmp_dth;
      const double dthacc_dth = (dnum_dth * denom - num * ddenom_dth) / (denom * denom);
      const double dthacc_dom = -cth * dtmp_dom / denom;
      const double dthacc_df = -cth * dtmp_df / denom;
      const double dxacc_dth =
          dtmp_dth - pml * (dthacc_dth * cth - th_acc * sth) / total;
      const double dxacc_dom = dtmp_dom - pml * dthacc_dom * cth / total;
      const double dxacc_df = dtmp_df - pml * dthacc_df * cth / total;

      // rows: x, x_dot, theta, theta_dot; cols: x, x_dot, theta, theta_dot
      out.jac_f_s(0, 0) = 1.0;
      out.jac_f_s(0, 1) = dt;
      out.jac_f_s(0, 2) = dt * dt * dxacc_dth;
      out.jac_f_s(0, 3) = dt * dt * dxacc_dom;
      out.jac_f_s(1, 1) = 1.0;
      out.jac_f_s(1, 2) = dt * dxacc_dth;
      out.jac_f_s(1, 3) = dt * dxacc_dom;
      out.jac_f_s(2, 2) = 1.0 + dt * dt * dthacc_dth;
      out.jac_f_s(2, 3) = dt * (1.0 + dt * dthacc_dom);
      out.jac_f_s(3, 2) = dt * dthacc_dth;
      out.jac_f_s(3, 3) = 1.0 + dt * dthacc_dom;
      out.jac_f_a(0, 0) = dt * dt * dxacc_df;
      out.jac_f_a(1, 0) = dt * dxacc_df;
      out.jac_f_a(2, 0) = dt * dt * dthacc_df;
      out.jac_f_a(3, 0) = dt * dthacc_df;

      const double th_n = th / kCpThetaLimit;
      const double f_n = force / 10.0;
      out.reward = 1.0 - th_n * th_n - 0.01 * f_n * f_n;
      out.grad_r_s[2] = -2.0 * th / (kCpThetaLimit * kCpThetaLimit);
      out.grad_r_a[0] = -2.0 * 0.01 * force / 100.0;
      break;
    }
  }

  out.next.step_count = s.step_count + 1;
  out.next.done =
      terminal(out.next.sim) || out.next.step_count >= spec_.episode_cap;
  return out;
}

}  // namespace apgx

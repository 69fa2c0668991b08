#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "apgx/rng.hpp"

namespace apgx {

// Weights and biases of a tanh MLP (linear output layer). Policies carry a
// state-independent learnable log_std; critics leave it empty. The same
// struct doubles as a gradient container.
struct MlpParams {
  std::vector<Eigen::MatrixXd> weights;  // weights[l] is out x in
  std::vector<Eigen::VectorXd> biases;
  Eigen::VectorXd log_std;  // size 0 for critics

  int input_dim() const { return static_cast<int>(weights.front().cols()); }
  int output_dim() const { return static_cast<int>(weights.back().rows()); }
  bool is_policy() const { return log_std.size() > 0; }
};

// Scaled uniform (Glorot-style) init: W ~ U(-b, b), b = gain*sqrt(6/(in+out)).
MlpParams make_mlp(int in_dim, const std::vector<int>& hidden, int out_dim,
                   double hidden_gain, double output_gain, Rng& rng);
MlpParams make_policy(int dim_s, int dim_a, const std::vector<int>& hidden, Rng& rng);
MlpParams make_critic(int dim_s, const std::vector<int>& hidden, Rng& rng);

Eigen::VectorXd mlp_forward(const MlpParams& p, const Eigen::VectorXd& x);

struct MlpVjp {
  MlpParams grad;               // same shapes as the net (log_std grad included)
  Eigen::VectorXd grad_input;   // dL/dx
};

// Exact vector-Jacobian product of the net output w.r.t. parameters and
// input; recomputes the forward pass internally.
MlpVjp mlp_backward(const MlpParams& p, const Eigen::VectorXd& x,
                    const Eigen::VectorXd& upstream);

struct PolicyOutput {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;
};

PolicyOutput policy_forward(const MlpParams& policy, const Eigen::VectorXd& obs);

// a = mean + std (.) noise
Eigen::VectorXd sample_reparam(const PolicyOutput& out, const Eigen::VectorXd& noise);

// Diagonal-Gaussian log density.
double log_prob(const PolicyOutput& out, const Eigen::VectorXd& action);

// Sum over coordinates of 0.5*ln(2*pi*e) + log_std (state independent).
double entropy(const MlpParams& policy);

// VJP of a(theta, s) = mean_theta(s) + exp(log_std) (.) noise.
MlpVjp policy_backward(const MlpParams& policy, const Eigen::VectorXd& obs,
                       const Eigen::VectorXd& noise, const Eigen::VectorXd& upstream);

double value_forward(const MlpParams& critic, const Eigen::VectorXd& obs);
MlpVjp value_backward(const MlpParams& critic, const Eigen::VectorXd& obs,
                      double upstream);

// Flat parameter vector: per layer W (row-major) then b, then log_std.
int param_count(const MlpParams& p);
Eigen::VectorXd flatten(const MlpParams& p);
void unflatten(const Eigen::VectorXd& v, MlpParams& p);

MlpParams zeros_like(const MlpParams& p);
void accumulate(MlpParams& into, const MlpParams& g);
double global_grad_norm(const MlpParams& g);
void scale_params(MlpParams& g, double s);
void clamp_log_std(MlpParams& policy, double lo = -5.0, double hi = 2.0);

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long step = 0;
};

AdamState make_adam_state(const MlpParams& p);

// Standard Adam with bias correction.
void adam_step(MlpParams& p, const MlpParams& grad, AdamState& st, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

// Checkpoint io; layout documented in the README ("APGXMLP1" magic).
void save_params(const MlpParams& p, const std::string& path);
MlpParams load_params(const std::string& path);

}  // namespace apgx

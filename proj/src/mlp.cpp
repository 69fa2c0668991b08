#include "apgx/mlp.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace apgx {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
constexpr char kMagic[8] = {'A', 'P', 'G', 'X', 'M', 'L', 'P', '1'};

void check_obs(const MlpParams& p, const Eigen::VectorXd& x) {
  if (x.size() != p.input_dim())
    throw std::invalid_argument("observation dimension mismatch");
}
}  // namespace

MlpParams make_mlp(int in_dim, const std::vector<int>& hidden, int out_dim,
                   double hidden_gain, double output_gain, Rng& rng) {
  MlpParams p;
  std::vector<int> dims;
  dims.push_back(in_dim);
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(out_dim);
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    int in = dims[l], out = dims[l + 1];
    double gain = (l + 2 == dims.size()) ? output_gain : hidden_gain;
    double bound = gain * std::sqrt(6.0 / (in + out));
    Eigen::MatrixXd w(out, in);
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) w(r, c) = rng.uniform(-bound, bound);
    p.weights.push_back(std::move(w));
    p.biases.push_back(Eigen::VectorXd::Zero(out));
  }
  return p;
}

MlpParams make_policy(int dim_s, int dim_a, const std::vector<int>& hidden, Rng& rng) {
  MlpParams p = make_mlp(dim_s, hidden, dim_a, 1.0, 0.01, rng);
  p.log_std = Eigen::VectorXd::Zero(dim_a);
  return p;
}

MlpParams make_critic(int dim_s, const std::vector<int>& hidden, Rng& rng) {
  return make_mlp(dim_s, hidden, 1, 1.0, 1.0, rng);
}

Eigen::VectorXd mlp_forward(const MlpParams& p, const Eigen::VectorXd& x) {
  check_obs(p, x);
  Eigen::VectorXd h = x;
  const size_t last = p.weights.size() - 1;
  for (size_t l = 0; l < p.weights.size(); ++l) {
    h = p.weights[l] * h + p.biases[l];
    if (l != last) h = h.array().tanh();
  }
  return h;
}

MlpVjp mlp_backward(const MlpParams& p, const Eigen::VectorXd& x,
                    const Eigen::VectorXd& upstream) {
  check_obs(p, x);
  const size_t L = p.weights.size();

  // forward, keeping post-activation values per layer
  std::vector<Eigen::VectorXd> acts(L + 1);
  acts[0] = x;
  for (size_t l = 0; l < L; ++l) {
    acts[l + 1] = p.weights[l] * acts[l] + p.biases[l];
    if (l + 1 != L) acts[l + 1] = acts[l + 1].array().tanh();
  }

  MlpVjp vjp;
  vjp.grad = zeros_like(p);
  Eigen::VectorXd d = upstream;  // dL/d(pre-activation of layer l)
  for (size_t l = L; l-- > 0;) {
    vjp.grad.weights[l] = d * acts[l].transpose();
    vjp.grad.biases[l] = d;
    d = p.weights[l].transpose() * d;
    if (l > 0) d = d.cwiseProduct(Eigen::VectorXd::Ones(acts[l].size()) -
                                  acts[l].cwiseProduct(acts[l]));
  }
  vjp.grad_input = d;
  return vjp;
}

PolicyOutput policy_forward(const MlpParams& policy, const Eigen::VectorXd& obs) {
  PolicyOutput out;
  out.mean = mlp_forward(policy, obs);
  out.std = policy.log_std.array().exp();
  return out;
}

Eigen::VectorXd sample_reparam(const PolicyOutput& out, const Eigen::VectorXd& noise) {
  return out.mean + out.std.cwiseProduct(noise);
}

double log_prob(const PolicyOutput& out, const Eigen::VectorXd& action) {
  double lp = 0.0;
  for (int j = 0; j < action.size(); ++j) {
    double z = (action[j] - out.mean[j]) / out.std[j];
    lp += -0.5 * (z * z + kLog2Pi) - std::log(out.std[j]);
  }
  return lp;
}

double entropy(const MlpParams& policy) {
  double h = 0.0;
  for (int j = 0; j < policy.log_std.size(); ++j)
    h += 0.5 * (1.0 + kLog2Pi) + policy.log_std[j];
  return h;
}

MlpVjp policy_backward(const MlpParams& policy, const Eigen::VectorXd& obs,
                       const Eigen::VectorXd& noise, const Eigen::VectorXd& upstream) {
  MlpVjp vjp = mlp_backward(policy, obs, upstream);
  // a_j = mean_j + exp(log_std_j) * eps_j
  Eigen::VectorXd std = policy.log_std.array().exp();
  vjp.grad.log_std = upstream.cwiseProduct(std).cwiseProduct(noise);
  return vjp;
}

double value_forward(const MlpParams& critic, const Eigen::VectorXd& obs) {
  return mlp_forward(critic, obs)[0];
}

MlpVjp value_backward(const MlpParams& critic, const Eigen::VectorXd& obs,
                      double upstream) {
  Eigen::VectorXd u(1);
  u[0] = upstream;
  return mlp_backward(critic, obs, u);
}

int param_count(const MlpParams& p) {
  int n = 0;
  for (size_t l = 0; l < p.weights.size(); ++l)
    n += static_cast<int>(p.weights[l].size() + p.biases[l].size());
  return n + static_cast<int>(p.log_std.size());
}

Eigen::VectorXd flatten(const MlpParams& p) {
  Eigen::VectorXd v(param_count(p));
  int k = 0;
  for (size_t l = 0; l < p.weights.size(); ++l) {
    const auto& w = p.weights[l];
    for (int r = 0; r < w.rows(); ++r)
      for (int c = 0; c < w.cols(); ++c) v[k++] = w(r, c);
    for (int i = 0; i < p.biases[l].size(); ++i) v[k++] = p.biases[l][i];
  }
  for (int i = 0; i < p.log_std.size(); ++i) v[k++] = p.log_std[i];
  return v;
}

void unflatten(const Eigen::VectorXd& v, MlpParams& p) {
  if (v.size() != param_count(p))
    throw std::invalid_argument("flat vector length mismatch");
  int k = 0;
  for (size_t l = 0; l < p.weights.size(); ++l) {
    auto& w = p.weights[l];
    for (int r = 0; r < w.rows(); ++r)
      for (int c = 0; c < w.cols(); ++c) w(r, c) = v[k++];
    for (int i = 0; i < p.biases[l].size(); ++i) p.biases[l][i] = v[k++];
  }
  for (int i = 0; i < p.log_std.size(); ++i) p.log_std[i] = v[k++];
}

MlpParams zeros_like(const MlpParams& p) {
  MlpParams z;
  for (const auto& w : p.weights)
    z.weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
  for (const auto& b : p.biases)
    z.biases.push_back(Eigen::VectorXd::Zero(b.size()));
  z.log_std = Eigen::VectorXd::Zero(p.log_std.size());
  return z;
}

void accumulate(MlpParams& into, const MlpParams& g) {
  for (size_t l = 0; l < into.weights.size(); ++l) {
    into.weights[l] += g.weights[l];
    into.biases[l] += g.biases[l];
  }
  if (into.log_std.size() > 0) into.log_std += g.log_std;
}

double global_grad_norm(const MlpParams& g) {
  double sq = 0.0;
  for (size_t l = 0; l < g.weights.size(); ++l)
    sq += g.weights[l].squaredNorm() + g.biases[l].squaredNorm();
  sq += g.log_std.squaredNorm();
  return std::sqrt(sq);
}

void scale_params(MlpParams& g, double s) {
  for (size_t l = 0; l < g.weights.size(); ++l) {
    g.weights[l] *= s;
    g.biases[l] *= s;
  }
  g.log_std *= s;
}

void clamp_log_std(MlpParams& policy, double lo, double hi) {
  for (int j = 0; j < policy.log_std.size(); ++j)
    policy.log_std[j] = std::min(hi, std::max(lo, policy.log_std[j]));
}

AdamState make_adam_state(const MlpParams& p) {
  AdamState st;
  st.m = Eigen::VectorXd::Zero(param_count(p));
  st.v = Eigen::VectorXd::Zero(param_count(p));
  st.step = 0;
  return st;
}

void adam_step(MlpParams& p, const MlpParams& grad, AdamState& st, double lr,
               double beta1, double beta2, double eps) {
  Eigen::VectorXd g = flatten(grad);
  Eigen::VectorXd theta = flatten(p);
  if (g.size() != st.m.size())
    throw std::invalid_argument("adam state size mismatch");
  st.step += 1;
  st.m = beta1 * st.m + (1.0 - beta1) * g;
  st.v = beta2 * st.v + (1.0 - beta2) * g.cwiseProduct(g);
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(st.step));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(st.step));
  for (int i = 0; i < theta.size(); ++i) {
    double mhat = st.m[i] / bc1;
    double vhat = st.v[i] / bc2;
    theta[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
  unflatten(theta, p);
}

void save_params(const MlpParams& p, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f.write(kMagic, 8);
  auto put_u32 = [&f](std::uint32_t x) {
    f.write(reinterpret_cast<const char*>(&x), 4);
  };
  auto put_doubles = [&f](const double* d, size_t n) {
    f.write(reinterpret_cast<const char*>(d), static_cast<std::streamsize>(8 * n));
  };
  put_u32(static_cast<std::uint32_t>(p.weights.size()));
  for (size_t l = 0; l < p.weights.size(); ++l) {
    const auto& w = p.weights[l];
    put_u32(static_cast<std::uint32_t>(w.rows()));
    put_u32(static_cast<std::uint32_t>(w.cols()));
    // row-major on disk
    for (int r = 0; r < w.rows(); ++r)
      for (int c = 0; c < w.cols(); ++c) {
        double x = w(r, c);
        put_doubles(&x, 1);
      }
    put_doubles(p.biases[l].data(), static_cast<size_t>(p.biases[l].size()));
  }
  put_u32(static_cast<std::uint32_t>(p.log_std.size()));
  put_doubles(p.log_std.data(), static_cast<size_t>(p.log_std.size()));
  if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

MlpParams load_params(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "'");
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("'" + path + "' is not an APGXMLP1 checkpoint");
  auto get_u32 = [&f]() {
    std::uint32_t x = 0;
    f.read(reinterpret_cast<char*>(&x), 4);
    return x;
  };
  MlpParams p;
  std::uint32_t layers = get_u32();
  for (std::uint32_t l = 0; l < layers; ++l) {
    std::uint32_t rows = get_u32();
    std::uint32_t cols = get_u32();
    Eigen::MatrixXd w(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r)
      for (std::uint32_t c = 0; c < cols; ++c) {
        double x;
        f.read(reinterpret_cast<char*>(&x), 8);
        w(r, c) = x;
      }
    Eigen::VectorXd b(rows);
    f.read(reinterpret_cast<char*>(b.data()), 8 * rows);
    p.weights.push_back(std::move(w));
    p.biases.push_back(std::move(b));
  }
  std::uint32_t nstd = get_u32();
  p.log_std = Eigen::VectorXd(nstd);
  if (nstd > 0) f.read(reinterpret_cast<char*>(p.log_std.data()), 8 * nstd);
  if (!f) throw std::runtime_error("truncated checkpoint '" + path + "'");
  return p;
}

}  // namespace apgx

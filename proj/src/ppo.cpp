#include "apgx/ppo.hpp"

#include <algorithm>
#include <stdexcept>

namespace apgx {

namespace {

// Deterministic Fisher-Yates (std::shuffle is implementation defined).
void shuffle_indices(std::vector<int>& idx, Rng& rng) {
  for (size_t i = idx.size(); i > 1; --i) {
    size_t j = static_cast<size_t>(rng.next_u64() % i);
    std::swap(idx[i - 1], idx[j]);
  }
}

std::vector<std::vector<int>> split_minibatches(const std::vector<int>& idx,
                                                int count) {
  std::vector<std::vector<int>> out;
  const int n = static_cast<int>(idx.size());
  count = std::min(count, n);
  int base = n / count, extra = n % count, at = 0;
  for (int m = 0; m < count; ++m) {
    int len = base + (m < extra ? 1 : 0);
    out.emplace_back(idx.begin() + at, idx.begin() + at + len);
    at += len;
  }
  return out;
}

}  // namespace

void compute_gae(RolloutBatch& batch, double discount, double lambda) {
  if (!batch.values_ready)
    throw std::logic_error("compute_gae: batch has no critic values");
  const int T = batch.steps_per_lane;
  for (int lane = 0; lane < batch.num_lanes; ++lane) {
    Transition* tr = batch.transitions.data() + static_cast<size_t>(lane) * T;
    double carry = 0.0;
    for (int t = T - 1; t >= 0; --t) {
      double next_value;
      if (tr[t].done) {
        next_value = 0.0;
      } else if (tr[t].truncated) {
        next_value = tr[t].bootstrap_value;
      } else {
        next_value = tr[t + 1].value;
      }
      double delta = tr[t].reward + discount * next_value - tr[t].value;
      bool boundary = tr[t].done || tr[t].truncated;
      carry = delta + discount * lambda * (boundary ? 0.0 : carry);
      tr[t].advantage = carry;
      tr[t].return_target = carry + tr[t].value;
    }
  }
  batch.gae_ready = true;
}

RolloutBatch merge_batches(RolloutBatch primary, RolloutBatch explore) {
  if (explore.size() == 0) return primary;
  if (primary.steps_per_lane != explore.steps_per_lane)
    throw std::invalid_argument("merge_batches: lane lengths differ");
  primary.num_lanes += explore.num_lanes;
  primary.transitions.insert(primary.transitions.end(),
                             std::make_move_iterator(explore.transitions.begin()),
                             std::make_move_iterator(explore.transitions.end()));
  primary.values_ready = primary.values_ready && explore.values_ready;
  primary.gae_ready = primary.gae_ready && explore.gae_ready;
  return primary;
}

LossGrad ppo_policy_loss(const MlpParams& policy,
                         const std::vector<const Transition*>& items,
                         const std::vector<double>& advantages,
                         double clip_eps, double entropy_coef) {
  if (items.empty()) throw std::invalid_argument("ppo_policy_loss: empty minibatch");
  if (items.size() != advantages.size())
    throw std::invalid_argument("ppo_policy_loss: advantage count mismatch");

  LossGrad out;
  out.grad = zeros_like(policy);
  const double inv_m = 1.0 / static_cast<double>(items.size());
  const Eigen::VectorXd std_vec = policy.log_std.array().exp();

  double surr_sum = 0.0;
  for (size_t k = 0; k < items.size(); ++k) {
    const Transition& tr = *items[k];
    const double adv = advantages[k];
    PolicyOutput pol = policy_forward(policy, tr.obs);
    double lp = log_prob(pol, tr.action);
    double ratio = std::exp(lp - tr.behavior_log_prob);
    if (!std::isfinite(ratio))
      throw NumericalError("non-finite importance ratio at sample " +
                               std::to_string(k),
                           -1, static_cast<int>(k));

    double plain = ratio * adv;
    double clipped =
        std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * adv;
    surr_sum += std::min(plain, clipped);

    // the clipped branch has zero gradient when the ratio is saturated
    if (plain <= clipped) {
      double coef = -inv_m * adv * ratio;  // d(-surr/m)/dlogp
      Eigen::VectorXd z = (tr.action - pol.mean).cwiseQuotient(pol.std);
      Eigen::VectorXd up_mean = coef * z.cwiseQuotient(pol.std);
      MlpVjp vjp = mlp_backward(policy, tr.obs, up_mean);
      accumulate(out.grad, vjp.grad);
      out.grad.log_std +=
          coef * (z.cwiseProduct(z) - Eigen::VectorXd::Ones(z.size()));
    }
  }

  out.loss = -(surr_sum * inv_m + entropy_coef * entropy(policy));
  out.grad.log_std.array() -= entropy_coef;
  if (!std::isfinite(out.loss))
    throw NumericalError("non-finite policy loss", -1, -1);
  return out;
}

LossGrad value_loss(const MlpParams& critic,
                    const std::vector<const Transition*>& items) {
  std::vector<const Transition*> primary;
  for (const Transition* t : items)
    if (t->source == Source::kPrimary) primary.push_back(t);
  if (primary.empty())
    throw std::invalid_argument("value_loss: no primary-tagged samples");

  LossGrad out;
  out.grad = zeros_like(critic);
  const double inv_m = 1.0 / static_cast<double>(primary.size());
  for (const Transition* t : primary) {
    if (!std::isfinite(t->return_target))
      throw std::logic_error("value_loss: return targets missing");
    double v = value_forward(critic, t->obs);
    double diff = v - t->return_target;
    out.loss += diff * diff * inv_m;
    MlpVjp vjp = value_backward(critic, t->obs, 2.0 * diff * inv_m);
    accumulate(out.grad, vjp.grad);
  }
  return out;
}

PpoUpdateStats ppo_update(MlpParams& policy, MlpParams& critic,
                          AdamState& policy_opt, AdamState& critic_opt,
                          const RolloutBatch& batch, const PpoSettings& cfg,
                          Rng& rng) {
  if (!batch.gae_ready)
    throw std::logic_error("ppo_update: advantages not computed");

  PpoUpdateStats stats;

  // ratio diagnostic before any parameter movement
  for (const Transition& tr : batch.transitions) {
    if (tr.source != Source::kPrimary) continue;
    PolicyOutput pol = policy_forward(policy, tr.obs);
    double ratio = std::exp(log_prob(pol, tr.action) - tr.behavior_log_prob);
    stats.max_primary_ratio_dev =
        std::max(stats.max_primary_ratio_dev, std::abs(ratio - 1.0));
  }

  std::vector<int> all_idx(batch.transitions.size());
  for (size_t i = 0; i < all_idx.size(); ++i) all_idx[i] = static_cast<int>(i);

  for (int epoch = 0; epoch < cfg.policy_epochs; ++epoch) {
    shuffle_indices(all_idx, rng);
    for (const auto& mb : split_minibatches(all_idx, cfg.minibatches)) {
      std::vector<const Transition*> items;
      std::vector<double> adv;
      items.reserve(mb.size());
      adv.reserve(mb.size());
      for (int i : mb) {
        items.push_back(&batch.transitions[i]);
        adv.push_back(batch.transitions[i].advantage);
      }
      double mean = 0.0;
      for (double a : adv) mean += a;
      mean /= static_cast<double>(adv.size());
      double var = 0.0;
      for (double a : adv) var += (a - mean) * (a - mean);
      double sd = std::sqrt(var / static_cast<double>(adv.size()));
      double denom = std::max(sd, 1e-8);
      for (double& a : adv) a = (a - mean) / denom;

      LossGrad lg =
          ppo_policy_loss(policy, items, adv, cfg.clip_eps, cfg.entropy_coef);
      adam_step(policy, lg.grad, policy_opt, cfg.policy_lr);
      clamp_log_std(policy);
      stats.last_policy_loss = lg.loss;
    }
  }

  std::vector<int> primary_idx;
  for (size_t i = 0; i < batch.transitions.size(); ++i)
    if (batch.transitions[i].source == Source::kPrimary)
      primary_idx.push_back(static_cast<int>(i));
  if (primary_idx.empty())
    throw std::invalid_argument("ppo_update: no primary data for the critic");

  for (int epoch = 0; epoch < cfg.critic_epochs; ++epoch) {
    shuffle_indices(primary_idx, rng);
    for (const auto& mb : split_minibatches(primary_idx, cfg.minibatches)) {
      std::vector<const Transition*> items;
      items.reserve(mb.size());
      for (int i : mb) items.push_back(&batch.transitions[i]);
      LossGrad lg = value_loss(critic, items);
      adam_step(critic, lg.grad, critic_opt, cfg.critic_lr);
      stats.last_value_loss = lg.loss;
    }
  }
  return stats;
}

}  // namespace apgx

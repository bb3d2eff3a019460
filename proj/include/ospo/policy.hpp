#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "ospo/advantage.hpp"
#include "ospo/rng.hpp"

namespace ospo {

// Bigram tabular softmax policy: pi(y_t | y_{t-1}) = softmax(logits[y_{t-1}]).
// Small enough that the clipped-surrogate gradient is exact.
struct TabularPolicy {
  int vocab_size = 0;
  std::vector<double> logits;  // V x V row-major, row = previous token

  static TabularPolicy zeros(int vocab_size) {
    TabularPolicy p;
    p.vocab_size = vocab_size;
    p.logits.assign(static_cast<std::size_t>(vocab_size) * vocab_size, 0.0);
    return p;
  }

  double logit(int prev, int next) const {
    return logits[static_cast<std::size_t>(prev) * vocab_size + next];
  }
  double& logit(int prev, int next) {
    return logits[static_cast<std::size_t>(prev) * vocab_size + next];
  }

  std::vector<double> probs_row(int prev) const {
    std::vector<double> p(vocab_size);
    const double* row = logits.data() + static_cast<std::size_t>(prev) * vocab_size;
    double hi = row[0];
    for (int i = 1; i < vocab_size; ++i) hi = std::max(hi, row[i]);
    double z = 0.0;
    for (int i = 0; i < vocab_size; ++i) {
      p[i] = std::exp(row[i] - hi);
      z += p[i];
    }
    for (int i = 0; i < vocab_size; ++i) p[i] /= z;
    return p;
  }

  std::vector<double> log_probs_row(int prev) const {
    std::vector<double> lp(vocab_size);
    const double* row = logits.data() + static_cast<std::size_t>(prev) * vocab_size;
    double hi = row[0];
    for (int i = 1; i < vocab_size; ++i) hi = std::max(hi, row[i]);
    double z = 0.0;
    for (int i = 0; i < vocab_size; ++i) z += std::exp(row[i] - hi);
    const double log_z = hi + std::log(z);
    for (int i = 0; i < vocab_size; ++i) lp[i] = row[i] - log_z;
    return lp;
  }
};

struct Rollout {
  std::vector<int> tokens;       // sampled tokens, terminal eos included
  std::vector<double> logp_old;  // per-token log-probs under the sampler
  double reward = 0.0;
};

struct GroupBatch {
  int context_token = 0;  // shared prompt context (start token)
  std::vector<Rollout> rollouts;
  std::vector<double> group_advantages;
  std::vector<TokenAdvantages> token_advantages;
};

namespace detail {

// CDF walk in index order; deterministic given the uniform draw.
inline int draw_categorical(std::span<const double> probs, double u) {
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

}  // namespace detail

// Samples G sequences autoregressively from `policy`, starting at the
// context token, stopping at eos or max_len. Per-token log-probs are frozen
// as logp_old for later importance ratios.
inline GroupBatch sample_group(const TabularPolicy& policy, int context_token,
                               int group_size, int max_len, int eos_token,
                               Rng& rng) {
  if (group_size < 2)
    throw std::invalid_argument("sample_group: group size must be >= 2");
  if (max_len < 1) throw std::invalid_argument("sample_group: max_len >= 1");
  GroupBatch batch;
  batch.context_token = context_token;
  batch.rollouts.resize(group_size);
  for (Rollout& r : batch.rollouts) {
    int prev = context_token;
    for (int t = 0; t < max_len; ++t) {
      const std::vector<double> probs = policy.probs_row(prev);
      const int tok = detail::draw_categorical(probs, rng.uniform());
      r.tokens.push_back(tok);
      r.logp_old.push_back(std::log(probs[tok]));
      if (tok == eos_token) break;
      prev = tok;
    }
  }
  return batch;
}

inline std::vector<double> importance_ratios(const TabularPolicy& policy_new,
                                             const Rollout& rollout,
                                             int context_token) {
  std::vector<double> ratios(rollout.tokens.size());
  int prev = context_token;
  for (std::size_t t = 0; t < rollout.tokens.size(); ++t) {
    const int tok = rollout.tokens[t];
    const std::vector<double> lp = policy_new.log_probs_row(prev);
    ratios[t] = std::exp(lp[tok] - rollout.logp_old[t]);
    prev = tok;
  }
  return ratios;
}

// (1/T) sum_t min(rho_t A_t, clip(rho_t, 1-eps, 1+eps) A_t)
inline double clipped_surrogate(std::span<const double> ratios,
                                std::span<const double> token_advs,
                                double clip_eps) {
  if (ratios.size() != token_advs.size())
    throw std::invalid_argument("clipped_surrogate: length mismatch");
  if (ratios.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t t = 0; t < ratios.size(); ++t) {
    const double clipped =
        std::clamp(ratios[t], 1.0 - clip_eps, 1.0 + clip_eps);
    sum += std::min(ratios[t] * token_advs[t], clipped * token_advs[t]);
  }
  return sum / static_cast<double>(ratios.size());
}

// Batch objective: mean over rollouts of the per-rollout surrogate.
inline double batch_objective(const TabularPolicy& policy,
                              const GroupBatch& batch, double clip_eps) {
  if (batch.rollouts.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t g = 0; g < batch.rollouts.size(); ++g) {
    const std::vector<double> ratios =
        importance_ratios(policy, batch.rollouts[g], batch.context_token);
    sum += clipped_surrogate(ratios, batch.token_advantages[g].values, clip_eps);
  }
  return sum / static_cast<double>(batch.rollouts.size());
}

// Exact gradient of the batch objective w.r.t. the logits, with logp_old
// held constant. Tokens where the clip is active and binding contribute
// nothing; elsewhere d(rho)/d(logit[prev][k]) = rho * (1[k=y] - pi(k|prev)).
inline std::vector<double> objective_gradient(const TabularPolicy& policy,
                                              const GroupBatch& batch,
                                              double clip_eps) {
  const int v = policy.vocab_size;
  std::vector<double> grad(static_cast<std::size_t>(v) * v, 0.0);
  const double g_count = static_cast<double>(batch.rollouts.size());
  for (std::size_t g = 0; g < batch.rollouts.size(); ++g) {
    const Rollout& r = batch.rollouts[g];
    const std::vector<double>& advs = batch.token_advantages[g].values;
    if (r.tokens.empty()) continue;
    const double t_count = static_cast<double>(r.tokens.size());
    int prev = batch.context_token;
    for (std::size_t t = 0; t < r.tokens.size(); ++t) {
      const int tok = r.tokens[t];
      const std::vector<double> probs = policy.probs_row(prev);
      const double rho = probs[tok] / std::exp(r.logp_old[t]);
      const double a = advs[t];
      const double clipped = std::clamp(rho, 1.0 - clip_eps, 1.0 + clip_eps);
      if (rho * a <= clipped * a) {
        const double coeff = rho * a / (g_count * t_count);
        double* row = grad.data() + static_cast<std::size_t>(prev) * v;
        for (int k = 0; k < v; ++k)
          row[k] += coeff * ((k == tok ? 1.0 : 0.0) - probs[k]);
      }
      prev = tok;
    }
  }
  return grad;
}

inline void apply_gradient(TabularPolicy& policy,
                           std::span<const double> grad, double learning_rate) {
  if (grad.size() != policy.logits.size())
    throw std::invalid_argument("apply_gradient: size mismatch");
  for (std::size_t i = 0; i < grad.size(); ++i)
    policy.logits[i] += learning_rate * grad[i];
}

}  // namespace ospo

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "ospo/attribution.hpp"

namespace ospo {

enum class AdvantageMode { zscore, mean_only };

enum class RedistributionRule { prop, rank, prop_clip, uniform };

struct GroupRewards {
  std::vector<double> rewards;
  double mean = 0.0;
  double stddev = 0.0;  // population
};

inline GroupRewards summarize_rewards(const std::vector<double>& rewards) {
  GroupRewards g;
  g.rewards = rewards;
  if (rewards.empty()) return g;
  g.mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) /
           static_cast<double>(rewards.size());
  double var = 0.0;
  for (double r : rewards) var += (r - g.mean) * (r - g.mean);
  g.stddev = std::sqrt(var / static_cast<double>(rewards.size()));
  return g;
}

// Group-relative sequence advantages. zscore divides by the population std
// and degenerates to all zeros when the group rewards are (numerically)
// identical; mean_only is plain baseline subtraction.
inline std::vector<double> group_advantages(const std::vector<double>& rewards,
                                            AdvantageMode mode) {
  if (rewards.size() < 2)
    throw std::invalid_argument("group_advantages: need G >= 2 rewards");
  const GroupRewards g = summarize_rewards(rewards);
  std::vector<double> out(rewards.size());
  if (mode == AdvantageMode::zscore && g.stddev < 1e-12) {
    std::fill(out.begin(), out.end(), 0.0);
    return out;
  }
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    const double centered = rewards[i] - g.mean;
    out[i] = mode == AdvantageMode::zscore ? centered / g.stddev : centered;
  }
  return out;
}

struct TokenAdvantages {
  std::vector<double> values;
  RedistributionRule rule = RedistributionRule::uniform;
  double sequence_advantage = 0.0;
};

inline TokenAdvantages uniform_advantages(double a_hat, std::size_t n_tokens) {
  TokenAdvantages adv;
  adv.values.assign(n_tokens, a_hat);
  adv.rule = RedistributionRule::uniform;
  adv.sequence_advantage = a_hat;
  return adv;
}

// Proportional rule: A_t = T_scope * phi_norm_t * A_hat over covered tokens,
// where T_scope is the covered-token count; tokens outside every segment get
// the plain sequence advantage. The scope mean equals A_hat.
inline TokenAdvantages redistribute_prop(double a_hat,
                                         const OwenAttribution& attr) {
  TokenAdvantages adv;
  adv.rule = RedistributionRule::prop;
  adv.sequence_advantage = a_hat;
  const std::size_t n = attr.n_tokens();
  const double scope = static_cast<double>(attr.covered_count());
  adv.values.resize(n);
  for (std::size_t t = 0; t < n; ++t)
    adv.values[t] =
        attr.coverage[t] ? scope * attr.phi_norm[t] * a_hat : a_hat;
  return adv;
}

namespace detail {

// Ranks 1..T ascending by value; ties resolved by position (earlier token
// gets the lower rank).
inline std::vector<std::size_t> ascending_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b];
  });
  std::vector<std::size_t> rank(values.size());
  for (std::size_t i = 0; i < order.size(); ++i) rank[order[i]] = i + 1;
  return rank;
}

}  // namespace detail

// Rank rule: A_t = T * A_hat * rank_t / sum(rank). The rank sum is T(T+1)/2,
// so the mean is A_hat for any T.
inline TokenAdvantages redistribute_rank(double a_hat,
                                         std::span<const double> phi_tok) {
  TokenAdvantages adv;
  adv.rule = RedistributionRule::rank;
  adv.sequence_advantage = a_hat;
  const std::size_t n = phi_tok.size();
  adv.values.resize(n);
  if (n == 0) return adv;
  const std::vector<std::size_t> rank = detail::ascending_ranks(phi_tok);
  const double rank_sum = static_cast<double>(n) * (n + 1) / 2.0;
  for (std::size_t t = 0; t < n; ++t)
    adv.values[t] =
        static_cast<double>(n) * a_hat * static_cast<double>(rank[t]) / rank_sum;
  return adv;
}

// Rank rule confined to the covered span: ranks are computed among covered
// tokens only, uncovered tokens receive the sequence advantage.
inline TokenAdvantages redistribute_rank_scoped(double a_hat,
                                                const OwenAttribution& attr) {
  TokenAdvantages adv;
  adv.rule = RedistributionRule::rank;
  adv.sequence_advantage = a_hat;
  const std::size_t n = attr.n_tokens();
  adv.values.assign(n, a_hat);
  std::vector<double> scoped;
  std::vector<std::size_t> where;
  for (std::size_t t = 0; t < n; ++t) {
    if (!attr.coverage[t]) continue;
    scoped.push_back(attr.phi_tok[t]);
    where.push_back(t);
  }
  if (scoped.empty()) return adv;
  const TokenAdvantages inner = redistribute_rank(a_hat, scoped);
  for (std::size_t i = 0; i < where.size(); ++i)
    adv.values[where[i]] = inner.values[i];
  return adv;
}

// Chebyshev-style clamp to [-2*sigma, +2*sigma] where sigma is the std of
// the group advantages. No renormalization afterwards, so the scope mean may
// move; a degenerate group (sigma = 0) zeroes everything.
inline TokenAdvantages clip_redistributed(TokenAdvantages adv,
                                          std::span<const double> group_advs) {
  double mean = 0.0;
  for (double a : group_advs) mean += a;
  mean /= group_advs.empty() ? 1.0 : static_cast<double>(group_advs.size());
  double var = 0.0;
  for (double a : group_advs) var += (a - mean) * (a - mean);
  const double sigma =
      group_advs.empty()
          ? 0.0
          : std::sqrt(var / static_cast<double>(group_advs.size()));
  const double bound = 2.0 * sigma;
  for (double& v : adv.values) v = std::clamp(v, -bound, bound);
  adv.rule = RedistributionRule::prop_clip;
  return adv;
}

}  // namespace ospo

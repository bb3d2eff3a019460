#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ospo/advantage.hpp"
#include "ospo/attribution.hpp"
#include "ospo/coalition.hpp"
#include "ospo/envs.hpp"
#include "ospo/policy.hpp"
#include "ospo/stats.hpp"

namespace ospo {

enum class Algorithm { grpo, ospo_prop, ospo_rank, ospo_prop_clip };

inline std::string algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::grpo: return "GRPO";
    case Algorithm::ospo_prop: return "OSPO_prop";
    case Algorithm::ospo_rank: return "OSPO_rank";
    case Algorithm::ospo_prop_clip: return "OSPO_prop_clip";
  }
  return "unknown";
}

inline std::optional<Algorithm> parse_algorithm(const std::string& name) {
  if (name == "GRPO") return Algorithm::grpo;
  if (name == "OSPO_prop") return Algorithm::ospo_prop;
  if (name == "OSPO_rank") return Algorithm::ospo_rank;
  if (name == "OSPO_prop_clip") return Algorithm::ospo_prop_clip;
  return std::nullopt;
}

struct TrainerConfig {
  Algorithm algorithm = Algorithm::ospo_prop;
  int group_size = 8;          // G
  int max_len = 6;
  double clip_eps = 0.2;
  double learning_rate = 1.0;
  int steps = 200;
  int w_max = 4;
  int coalition_budget = 48;   // M
  CoalitionMode mode = CoalitionMode::contiguous;
  AdvantageMode adv_mode = AdvantageMode::zscore;
  int epochs = 1;              // surrogate updates per sampled batch
  int eval_rollouts = 16;
  std::uint64_t seed = 1;

  void validate() const {
    if (group_size < 2) throw std::invalid_argument("trainer: G >= 2");
    if (!(clip_eps > 0.0 && clip_eps < 1.0))
      throw std::invalid_argument("trainer: clip_eps in (0,1)");
    if (steps < 1) throw std::invalid_argument("trainer: steps >= 1");
    if (max_len < 1) throw std::invalid_argument("trainer: max_len >= 1");
    if (w_max < 1) throw std::invalid_argument("trainer: w_max >= 1");
    if (coalition_budget < 2)
      throw std::invalid_argument("trainer: coalition budget M >= 2");
    if (epochs < 1) throw std::invalid_argument("trainer: epochs >= 1");
    if (eval_rollouts < 1)
      throw std::invalid_argument("trainer: eval_rollouts >= 1");
    if (learning_rate < 0.0)
      throw std::invalid_argument("trainer: learning rate >= 0");
  }
};

struct CurveRow {
  int step = 0;
  double train_reward_mean = 0.0;
  double train_reward_std = 0.0;
  double eval_metric = 0.0;
  long long oracle_calls = 0;  // characteristic evaluations this step
  double wall_ms = 0.0;
  double mean_abs_adv = 0.0;
  std::optional<double> credit_pearson;
  std::optional<double> credit_spearman;
};

// Attribution snapshot of the final step, for the JSON case-study report.
struct AttributionCase {
  struct RolloutCase {
    std::vector<int> tokens;
    double reward = 0.0;
    double sequence_advantage = 0.0;
    std::vector<double> phi_seg;
    std::vector<double> phi_norm;
    std::vector<std::pair<std::vector<int>, double>> coalition_values;
    std::vector<long long> width_counts;
    double sampled_fraction = 1.0;
    long long n_oracle_calls = 0;
    long long n_marginal_evals = 0;
  };
  int step = 0;
  std::vector<RolloutCase> rollouts;
};

struct TrainResult {
  std::vector<CurveRow> curve;
  TabularPolicy final_policy;
  std::optional<AttributionCase> last_case;
};

namespace detail {

constexpr std::uint64_t kSampleStream = 0x5a11;
constexpr std::uint64_t kPlanStream = 0x91a7;
constexpr std::uint64_t kEvalStream = 0xe7a1;

// One-token-per-segment weight matrix over the full rollout (content tokens
// covered, trailing eos uncovered).
inline SegmentWeightMatrix rollout_weights(std::size_t n_content,
                                           std::size_t n_tokens) {
  std::vector<Segment> segs(n_content);
  for (std::size_t i = 0; i < n_content; ++i)
    segs[i] = Segment{i, i, i + 1, {}};
  return build_weight_matrix(segs, n_tokens);
}

}  // namespace detail

template <class Env>
TrainResult train(const TrainerConfig& cfg, const Env& env) {
  cfg.validate();
  TrainResult result;
  TabularPolicy policy = TabularPolicy::zeros(env.vocab_size());
  const bool is_ospo = cfg.algorithm != Algorithm::grpo;
  const std::uint64_t eval_seed =
      Rng::derive(cfg.seed, detail::kEvalStream, 0);

  for (int step = 0; step < cfg.steps; ++step) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng sample_rng(Rng::derive(cfg.seed, detail::kSampleStream, step));
    GroupBatch batch = sample_group(policy, env.bos(), cfg.group_size,
                                    cfg.max_len, env.eos(), sample_rng);
    std::vector<double> rewards(batch.rollouts.size());
    for (std::size_t g = 0; g < batch.rollouts.size(); ++g) {
      batch.rollouts[g].reward = env.sequence_reward(batch.rollouts[g].tokens);
      rewards[g] = batch.rollouts[g].reward;
    }
    batch.group_advantages = group_advantages(rewards, cfg.adv_mode);

    long long oracle_calls = 0;
    std::vector<double> pearsons, spearmans;
    AttributionCase step_case;
    step_case.step = step;
    batch.token_advantages.resize(batch.rollouts.size());
    for (std::size_t g = 0; g < batch.rollouts.size(); ++g) {
      const Rollout& rollout = batch.rollouts[g];
      const double a_hat = batch.group_advantages[g];
      const std::size_t n_tokens = rollout.tokens.size();
      if (!is_ospo) {
        batch.token_advantages[g] = uniform_advantages(a_hat, n_tokens);
        continue;
      }
      const std::vector<int> content = env.content(rollout.tokens);
      const int n_segments = static_cast<int>(content.size());
      if (n_segments == 0) {
        batch.token_advantages[g] = uniform_advantages(a_hat, n_tokens);
        continue;
      }
      const CoalitionPlan plan = sample_plan(
          n_segments, cfg.w_max, cfg.coalition_budget, cfg.mode,
          Rng::derive(cfg.seed, detail::kPlanStream,
                      static_cast<std::uint64_t>(step) * cfg.group_size + g));
      const CharacteristicFn fn = env.characteristic(rollout.tokens);
      CoalitionEvaluations evals = evaluate_plan(plan, fn);
      const std::vector<double> phi_seg = owen_values(evals, fn);
      oracle_calls += evals.n_oracle_calls;
      const SegmentWeightMatrix w =
          detail::rollout_weights(content.size(), n_tokens);
      const OwenAttribution attr = project_and_normalize(phi_seg, w);
      switch (cfg.algorithm) {
        case Algorithm::ospo_prop:
          batch.token_advantages[g] = redistribute_prop(a_hat, attr);
          break;
        case Algorithm::ospo_rank:
          batch.token_advantages[g] = redistribute_rank_scoped(a_hat, attr);
          break;
        case Algorithm::ospo_prop_clip:
          batch.token_advantages[g] = clip_redistributed(
              redistribute_prop(a_hat, attr), batch.group_advantages);
          break;
        case Algorithm::grpo:
          break;
      }
      if (env.has_truth() && n_segments >= 2) {
        const std::vector<double> truth = env.truth_weights(rollout.tokens);
        const Correlation corr = credit_accuracy(phi_seg, truth);
        if (corr.pearson_defined) pearsons.push_back(corr.pearson);
        if (corr.spearman_defined) spearmans.push_back(corr.spearman);
      }
      if (step + 1 == cfg.steps) {
        AttributionCase::RolloutCase rc;
        rc.tokens = rollout.tokens;
        rc.reward = rollout.reward;
        rc.sequence_advantage = a_hat;
        rc.phi_seg = phi_seg;
        rc.phi_norm = attr.phi_norm;
        for (const Coalition& c : plan.coalitions)
          rc.coalition_values.emplace_back(c.members,
                                           evals.values.at(c.members));
        rc.width_counts = plan.width_counts;
        rc.sampled_fraction = plan.sampled_fraction;
        rc.n_oracle_calls = evals.n_oracle_calls;
        rc.n_marginal_evals = evals.n_marginal_evals;
        step_case.rollouts.push_back(std::move(rc));
      }
    }

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      const std::vector<double> grad =
          objective_gradient(policy, batch, cfg.clip_eps);
      apply_gradient(policy, grad, cfg.learning_rate);
    }

    // Fixed-seed evaluation set: with an unchanged policy the metric is
    // constant across steps.
    Rng eval_rng(eval_seed);
    double eval_sum = 0.0;
    for (int e = 0; e < cfg.eval_rollouts; ++e) {
      std::vector<int> tokens;
      int prev = env.bos();
      for (int t = 0; t < cfg.max_len; ++t) {
        const std::vector<double> probs = policy.probs_row(prev);
        const int tok = detail::draw_categorical(probs, eval_rng.uniform());
        tokens.push_back(tok);
        if (tok == env.eos()) break;
        prev = tok;
      }
      eval_sum += env.sequence_reward(tokens);
    }

    CurveRow row;
    row.step = step;
    const GroupRewards gr = summarize_rewards(rewards);
    row.train_reward_mean = gr.mean;
    row.train_reward_std = gr.stddev;
    row.eval_metric = eval_sum / cfg.eval_rollouts;
    row.oracle_calls = oracle_calls;
    double abs_sum = 0.0;
    std::size_t abs_n = 0;
    for (const TokenAdvantages& ta : batch.token_advantages)
      for (double v : ta.values) {
        abs_sum += std::abs(v);
        ++abs_n;
      }
    row.mean_abs_adv = abs_n > 0 ? abs_sum / static_cast<double>(abs_n) : 0.0;
    if (!pearsons.empty()) {
      double s = 0.0;
      for (double p : pearsons) s += p;
      row.credit_pearson = s / static_cast<double>(pearsons.size());
    }
    if (!spearmans.empty()) {
      double s = 0.0;
      for (double p : spearmans) s += p;
      row.credit_spearman = s / static_cast<double>(spearmans.size());
    }
    row.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    result.curve.push_back(row);
    if (is_ospo && step + 1 == cfg.steps && !step_case.rollouts.empty())
      result.last_case = std::move(step_case);
  }
  result.final_policy = std::move(policy);
  return result;
}

// First step whose eval metric reaches the threshold, if any.
inline std::optional<int> steps_to_threshold(const std::vector<CurveRow>& curve,
                                             double threshold) {
  for (const CurveRow& row : curve)
    if (row.eval_metric >= threshold) return row.step;
  return std::nullopt;
}

}  // namespace ospo

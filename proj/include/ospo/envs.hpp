#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "ospo/attribution.hpp"
#include "ospo/coalition.hpp"
#include "ospo/reward.hpp"
#include "ospo/segmentation.hpp"

namespace ospo {

// Environments share a token-id convention: 0 = start-of-sequence context,
// 1 = end-of-sequence, the rest is content vocabulary. The trainer treats
// each content token of a rollout as one attribution segment; the trailing
// eos (when present) stays outside every segment and falls back to the
// uniform sequence advantage.

// A vocabulary where some tokens carry known ground-truth weights: 8 (by
// default) attribute tokens with descending weights, the remainder worthless
// distractors, plus a bonus when the two strongest attributes appear
// adjacent in this order. Duplicated tokens only count once, so the optimal
// response is a run of distinct attributes.
struct StructuredEnvConfig {
  int vocab_size = 24;
  int n_attributes = 8;
  std::vector<double> attribute_weights;  // defaults to a descending ramp
  double adjacency_bonus = 0.05;          // for (first, second) attribute pair
  double clamp_hi = 1.0;
  // false: a repeated token only counts once (structured search setting);
  // true: strictly additive, every occurrence carries its weight.
  bool count_repeats = false;
  // Deduction per index gap when a fragmented (non-contiguous) coalition is
  // evaluated: a partial response with holes reads incoherently, so its
  // reward is confounded. Contiguous evaluations never pay this.
  double gap_penalty = 0.0;
};

class StructuredEnv {
 public:
  explicit StructuredEnv(StructuredEnvConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.vocab_size < cfg_.n_attributes + 2)
      throw std::invalid_argument(
          "StructuredEnv: vocab must fit bos, eos and the attribute tokens");
    if (cfg_.attribute_weights.empty()) {
      cfg_.attribute_weights.resize(cfg_.n_attributes);
      for (int i = 0; i < cfg_.n_attributes; ++i)
        cfg_.attribute_weights[i] =
            0.025 * static_cast<double>(cfg_.n_attributes - i);
    }
    if (static_cast<int>(cfg_.attribute_weights.size()) != cfg_.n_attributes)
      throw std::invalid_argument(
          "StructuredEnv: attribute_weights size must equal n_attributes");
  }

  int vocab_size() const { return cfg_.vocab_size; }
  int bos() const { return 0; }
  int eos() const { return 1; }
  bool has_truth() const { return true; }

  double token_weight(int token) const {
    const int a = token - 2;
    if (a >= 0 && a < cfg_.n_attributes) return cfg_.attribute_weights[a];
    return 0.0;
  }

  // Generated tokens with the trailing eos stripped.
  std::vector<int> content(const std::vector<int>& tokens) const {
    std::vector<int> c = tokens;
    if (!c.empty() && c.back() == eos()) c.pop_back();
    return c;
  }

  double sequence_reward(const std::vector<int>& tokens) const {
    const std::vector<int> c = content(tokens);
    Coalition full;
    full.members.resize(c.size());
    for (std::size_t i = 0; i < c.size(); ++i)
      full.members[i] = static_cast<int>(i);
    return characteristic(tokens)(full);
  }

  // v(S) over the segment indices of one response: each distinct token value
  // counts once, plus the bonus for every adjacent index pair in S realizing
  // (attr_0, attr_1) in order.
  CharacteristicFn characteristic(const std::vector<int>& tokens) const {
    const std::vector<int> c = content(tokens);
    const StructuredEnvConfig cfg = cfg_;
    const int first = 2, second = 3;
    return [c, cfg, first, second](const Coalition& s) {
      double v = 0.0;
      std::set<int> seen;
      for (int j : s.members) {
        if (j < 0 || static_cast<std::size_t>(j) >= c.size())
          throw std::invalid_argument("StructuredEnv: member out of range");
        const int tok = c[j];
        if (!cfg.count_repeats && !seen.insert(tok).second) continue;
        const int a = tok - 2;
        if (a >= 0 && a < cfg.n_attributes) v += cfg.attribute_weights[a];
      }
      for (std::size_t i = 1; i < s.members.size(); ++i) {
        const int p = s.members[i - 1];
        if (s.members[i] == p + 1 && c[p] == first && c[p + 1] == second)
          v += cfg.adjacency_bonus;
        if (s.members[i] > p + 1) v -= cfg.gap_penalty;
      }
      return std::clamp(v, 0.0, cfg.clamp_hi);
    };
  }

  // Per-segment ground truth: the token's weight on its first occurrence in
  // the response, zero for repeats (every occurrence in count_repeats mode;
  // the bonus is interaction, not counted).
  std::vector<double> truth_weights(const std::vector<int>& tokens) const {
    const std::vector<int> c = content(tokens);
    std::vector<double> truth(c.size(), 0.0);
    std::set<int> seen;
    for (std::size_t i = 0; i < c.size(); ++i)
      if (cfg_.count_repeats || seen.insert(c[i]).second)
        truth[i] = token_weight(c[i]);
    return truth;
  }

  // Best achievable terminal reward for responses up to max_len content
  // tokens: the top-k distinct attribute weights plus the adjacency bonus
  // whenever both bonus tokens fit.
  double optimal_reward(int max_len) const {
    std::vector<double> w = cfg_.attribute_weights;
    std::sort(w.begin(), w.end(), std::greater<>());
    if (cfg_.count_repeats)
      return std::min(w.front() * static_cast<double>(max_len), cfg_.clamp_hi);
    double total = 0.0;
    const int take = std::min<int>(max_len, static_cast<int>(w.size()));
    for (int i = 0; i < take; ++i) total += w[i];
    if (take >= 2) total += cfg_.adjacency_bonus;
    return std::min(total, cfg_.clamp_hi);
  }

  const StructuredEnvConfig& config() const { return cfg_; }

 private:
  StructuredEnvConfig cfg_;
};

// Policy tokens mapped onto corpus terms; the reward is the NDCG of the
// generated query against a fixed query context. Content token i >= 2 emits
// words[i]; the candidate word list is the corpus vocabulary ordered by
// descending frequency (ties by term) so the mapping is reproducible.
class RetrievalEnv {
 public:
  RetrievalEnv(DenseIndex index, QueryContext ctx, int vocab_size)
      : index_(std::make_shared<DenseIndex>(std::move(index))),
        ctx_(std::move(ctx)),
        vocab_size_(vocab_size) {
    if (vocab_size_ < 3)
      throw std::invalid_argument("RetrievalEnv: vocab_size >= 3");
    std::map<std::string, long long> freq;
    for (const Document& d : index_->docs)
      for (const auto& [tok, count] : d.tokens) freq[tok] += count;
    std::vector<std::pair<long long, std::string>> ordered;
    ordered.reserve(freq.size());
    for (const auto& [tok, count] : freq) ordered.emplace_back(count, tok);
    std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    words_.resize(vocab_size_);
    for (int i = 2; i < vocab_size_; ++i) {
      const std::size_t w = static_cast<std::size_t>(i) - 2;
      if (w >= ordered.size())
        throw OracleError("RetrievalEnv: corpus vocabulary smaller than the "
                          "policy vocabulary");
      words_[i] = ordered[w].second;
    }
  }

  int vocab_size() const { return vocab_size_; }
  int bos() const { return 0; }
  int eos() const { return 1; }
  bool has_truth() const { return false; }
  const std::string& word(int token) const { return words_.at(token); }

  std::vector<int> content(const std::vector<int>& tokens) const {
    std::vector<int> c = tokens;
    if (!c.empty() && c.back() == eos()) c.pop_back();
    return c;
  }

  std::vector<Segment> segments_of(const std::vector<int>& tokens) const {
    const std::vector<int> c = content(tokens);
    std::vector<Segment> segs(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
      segs[i].index = i;
      segs[i].token_begin = i;
      segs[i].token_end = i + 1;
      segs[i].text = c[i] >= 2 ? words_[c[i]] : std::string{};
    }
    return segs;
  }

  double sequence_reward(const std::vector<int>& tokens) const {
    const std::vector<Segment> segs = segments_of(tokens);
    Coalition full;
    full.members.resize(segs.size());
    for (std::size_t i = 0; i < segs.size(); ++i)
      full.members[i] = static_cast<int>(i);
    if (full.members.empty()) return 0.0;
    return eval_characteristic_retrieval(ctx_, segs, full, *index_, nullptr);
  }

  // Coalition member indices are only meaningful within one response, so the
  // memoization cache lives inside the returned closure.
  CharacteristicFn characteristic(const std::vector<int>& tokens) const {
    auto segs = std::make_shared<std::vector<Segment>>(segments_of(tokens));
    auto cache = std::make_shared<CharacteristicCache>();
    auto index = index_;
    QueryContext ctx = ctx_;
    return [segs, index, cache, ctx](const Coalition& s) {
      return eval_characteristic_retrieval(ctx, *segs, s, *index, cache.get());
    };
  }

  std::vector<double> truth_weights(const std::vector<int>&) const {
    return {};
  }

  double optimal_reward(int) const { return 1.0; }

 private:
  std::shared_ptr<DenseIndex> index_;
  QueryContext ctx_;
  int vocab_size_ = 0;
  std::vector<std::string> words_;
};

}  // namespace ospo

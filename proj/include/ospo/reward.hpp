#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ospo/coalition.hpp"
#include "ospo/segmentation.hpp"

namespace ospo {

// Raised when a reward oracle cannot produce a value (bad corpus, malformed
// query file, ...). The CLI maps this to its own exit code.
struct OracleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Toy dense retrieval: bag-of-token documents, exact cosine ranking
// ---------------------------------------------------------------------------

struct Document {
  std::string doc_id;
  std::map<std::string, int> tokens;  // lowercase token -> count
};

using Vocab = std::map<std::string, int>;  // token -> dimension

struct Embedding {
  std::vector<double> values;
  bool empty = false;  // no in-vocab token contributed
};

// Lowercased word bag; punctuation-only tokens dropped.
inline std::map<std::string, int> token_bag(std::string_view text) {
  std::map<std::string, int> bag;
  const TokenizedResponse resp = tokenize(text);
  for (const std::string& tok : resp.tokens) {
    if (is_punct_token(tok)) continue;
    ++bag[detail::lowercase(tok)];
  }
  return bag;
}

inline Embedding embed(const std::map<std::string, int>& bag,
                       const Vocab& vocab) {
  if (vocab.empty()) throw std::invalid_argument("embed: empty vocabulary");
  Embedding e;
  e.values.assign(vocab.size(), 0.0);
  for (const auto& [tok, count] : bag) {
    auto it = vocab.find(tok);
    if (it != vocab.end()) e.values[it->second] += count;
  }
  double norm_sq = 0.0;
  for (double v : e.values) norm_sq += v * v;
  if (norm_sq == 0.0) {
    e.empty = true;
    return e;
  }
  const double inv = 1.0 / std::sqrt(norm_sq);
  for (double& v : e.values) v *= inv;
  return e;
}

struct DenseIndex {
  std::vector<Document> docs;
  std::vector<std::vector<double>> vectors;  // unit vectors, one per doc
  Vocab vocab;
};

inline DenseIndex build_index(std::vector<Document> docs) {
  DenseIndex index;
  std::set<std::string> ids;
  for (const Document& d : docs) {
    if (d.tokens.empty())
      throw OracleError("build_index: document '" + d.doc_id +
                        "' has an empty token bag");
    if (!ids.insert(d.doc_id).second)
      throw OracleError("build_index: duplicate doc_id '" + d.doc_id + "'");
    for (const auto& kv : d.tokens) index.vocab.emplace(kv.first, 0);
  }
  int dim = 0;
  for (auto& [tok, d] : index.vocab) d = dim++;
  index.docs = std::move(docs);
  index.vectors.reserve(index.docs.size());
  for (const Document& d : index.docs) {
    Embedding e = embed(d.tokens, index.vocab);
    if (e.empty)
      throw OracleError("build_index: document '" + d.doc_id +
                        "' embeds to the zero vector");
    index.vectors.push_back(std::move(e.values));
  }
  return index;
}

struct QueryContext {
  std::string query_id;
  std::set<std::string> relevant;                // binary relevance
  std::optional<std::set<std::string>> pool;     // candidate pool, ~100 ids
  int k = 10;                                    // retrieval cutoff
};

// Exact cosine ranking over the corpus, cut to K, then filtered to the
// candidate pool (order preserved). Ties break by ascending doc_id. A zero
// query vector yields an empty ranking.
inline std::vector<std::string> retrieve_topk(const DenseIndex& index,
                                              const Embedding& query,
                                              const QueryContext& ctx) {
  if (ctx.k < 1) throw std::invalid_argument("retrieve_topk: k >= 1");
  if (query.values.size() != index.vocab.size())
    throw std::invalid_argument("retrieve_topk: query dimension mismatch");
  if (query.empty) return {};

  std::vector<std::pair<double, const std::string*>> scored;
  scored.reserve(index.docs.size());
  for (std::size_t d = 0; d < index.docs.size(); ++d) {
    double dot = 0.0;
    const std::vector<double>& v = index.vectors[d];
    for (std::size_t i = 0; i < v.size(); ++i) dot += v[i] * query.values[i];
    scored.emplace_back(dot, &index.docs[d].doc_id);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return *a.second < *b.second;
  });
  std::vector<std::string> ranking;
  const std::size_t cut = std::min<std::size_t>(ctx.k, scored.size());
  for (std::size_t i = 0; i < cut; ++i) {
    if (ctx.pool && !ctx.pool->count(*scored[i].second)) continue;
    ranking.push_back(*scored[i].second);
  }
  return ranking;
}

// ---------------------------------------------------------------------------
// Ranking metrics (binary gains, log2 discount)
// ---------------------------------------------------------------------------

namespace detail {

// Number of relevant items the ideal ranking could surface: restricted to
// the candidate pool when one is present.
inline int ideal_relevant_count(const QueryContext& ctx) {
  if (!ctx.pool) return static_cast<int>(ctx.relevant.size());
  int n = 0;
  for (const std::string& id : ctx.relevant)
    if (ctx.pool->count(id)) ++n;
  return n;
}

}  // namespace detail

inline double ndcg(const std::vector<std::string>& ranking,
                   const QueryContext& ctx) {
  const int n_rel = detail::ideal_relevant_count(ctx);
  if (n_rel == 0) return 0.0;
  double dcg = 0.0;
  for (std::size_t i = 0; i < ranking.size(); ++i)
    if (ctx.relevant.count(ranking[i]))
      dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  double idcg = 0.0;
  for (int i = 0; i < n_rel; ++i)
    idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  return dcg / idcg;
}

struct RankMetrics {
  double ndcg = 0.0;
  double mrr = 0.0;
  double average_precision = 0.0;
  double recall = 0.0;
};

inline RankMetrics rank_metrics(const std::vector<std::string>& ranking,
                                const QueryContext& ctx) {
  RankMetrics m;
  const int n_rel = detail::ideal_relevant_count(ctx);
  if (n_rel == 0) return m;
  m.ndcg = ndcg(ranking, ctx);
  int hits = 0;
  double ap = 0.0;
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    if (!ctx.relevant.count(ranking[i])) continue;
    ++hits;
    if (hits == 1) m.mrr = 1.0 / static_cast<double>(i + 1);
    ap += static_cast<double>(hits) / static_cast<double>(i + 1);
  }
  m.average_precision = ap / n_rel;
  m.recall = static_cast<double>(hits) / n_rel;
  return m;
}

// ---------------------------------------------------------------------------
// Characteristic functions v(S)
// ---------------------------------------------------------------------------

// Memoizes (query, coalition) -> reward. Safe for concurrent insert/lookup;
// identical inputs always produce identical values, so last-write-wins.
class CharacteristicCache {
 public:
  std::optional<double> lookup(const std::string& query_id,
                               const std::vector<int>& members) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = values_.find({query_id, members});
    if (it == values_.end()) {
      ++misses_;
      return std::nullopt;
    }
    ++hits_;
    return it->second;
  }
  void store(const std::string& query_id, const std::vector<int>& members,
             double value) {
    std::lock_guard<std::mutex> lock(mu_);
    values_[{query_id, members}] = value;
  }
  long long hits() const {
    std::lock_guard<std::mutex> lock(mu_);
    return hits_;
  }
  long long misses() const {
    std::lock_guard<std::mutex> lock(mu_);
    return misses_;
  }

 private:
  mutable std::mutex mu_;
  mutable long long hits_ = 0;
  mutable long long misses_ = 0;
  std::map<std::pair<std::string, std::vector<int>>, double> values_;
};

// v(S) for the retrieval oracle: concatenate the member segment texts in
// index order with single spaces, embed, retrieve, score by NDCG.
// v(empty) = 0 exactly.
inline double eval_characteristic_retrieval(const QueryContext& ctx,
                                            const std::vector<Segment>& segments,
                                            const Coalition& coalition,
                                            const DenseIndex& index,
                                            CharacteristicCache* cache = nullptr) {
  if (coalition.empty()) return 0.0;
  if (cache) {
    if (auto hit = cache->lookup(ctx.query_id, coalition.members)) return *hit;
  }
  std::string query_text;
  for (int m : coalition.members) {
    if (m < 0 || static_cast<std::size_t>(m) >= segments.size())
      throw std::invalid_argument(
          "eval_characteristic_retrieval: coalition member out of range");
    if (!query_text.empty()) query_text += ' ';
    query_text += segments[m].text;
  }
  const Embedding q = embed(token_bag(query_text), index.vocab);
  const double value = ndcg(retrieve_topk(index, q, ctx), ctx);
  if (cache) cache->store(ctx.query_id, coalition.members, value);
  return value;
}

// Ground-truth oracle with known per-segment weights and an optional bonus
// between adjacent segment pairs: v(S) = clamp(baseline + sum w*_j + bonus).
struct SyntheticOracle {
  std::vector<double> weights;          // w*_j per segment
  std::vector<double> adjacent_bonus;   // bonus[j] couples segments j, j+1
  double baseline = 0.0;
  double clamp_lo = 0.0;
  double clamp_hi = 1.0;

  double operator()(const Coalition& coalition) const {
    double v = baseline;
    for (int m : coalition.members) {
      if (m < 0 || static_cast<std::size_t>(m) >= weights.size())
        throw std::invalid_argument("SyntheticOracle: member out of range");
      v += weights[m];
    }
    for (std::size_t i = 1; i < coalition.members.size(); ++i) {
      const int a = coalition.members[i - 1];
      if (coalition.members[i] == a + 1 &&
          static_cast<std::size_t>(a) < adjacent_bonus.size())
        v += adjacent_bonus[a];
    }
    return std::clamp(v, clamp_lo, clamp_hi);
  }
};

inline double combined_reward(double quality, bool format_ok,
                              double quality_weight = 0.9) {
  return quality_weight * quality + (1.0 - quality_weight) * (format_ok ? 1.0 : 0.0);
}

}  // namespace ospo

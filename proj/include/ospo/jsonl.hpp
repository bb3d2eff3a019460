#pragma once

#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ospo/reward.hpp"
#include "ospo/trainer.hpp"

namespace ospo {

// Corpus file: JSON Lines, {"doc_id": str, "text": str} per line.
inline std::vector<Document> load_corpus_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw OracleError("cannot open corpus file: " + path);
  std::vector<Document> docs;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw OracleError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.contains("doc_id") || !j.contains("text"))
      throw OracleError(path + ":" + std::to_string(line_no) +
                        ": expected doc_id and text fields");
    Document d;
    d.doc_id = j.at("doc_id").get<std::string>();
    d.tokens = token_bag(j.at("text").get<std::string>());
    docs.push_back(std::move(d));
  }
  return docs;
}

// Query file: JSON Lines, {"query_id": str, "relevant": [ids],
// "pool": [ids] (optional), "k": int}.
inline std::vector<QueryContext> load_queries_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw OracleError("cannot open query file: " + path);
  std::vector<QueryContext> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw OracleError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.contains("query_id") || !j.contains("relevant") || !j.contains("k"))
      throw OracleError(path + ":" + std::to_string(line_no) +
                        ": expected query_id, relevant and k fields");
    QueryContext ctx;
    ctx.query_id = j.at("query_id").get<std::string>();
    for (const auto& id : j.at("relevant"))
      ctx.relevant.insert(id.get<std::string>());
    if (j.contains("pool")) {
      std::set<std::string> pool;
      for (const auto& id : j.at("pool")) pool.insert(id.get<std::string>());
      ctx.pool = std::move(pool);
    }
    ctx.k = j.at("k").get<int>();
    if (ctx.k < 1)
      throw OracleError(path + ":" + std::to_string(line_no) + ": k must be >= 1");
    if (ctx.pool)
      for (const std::string& id : ctx.relevant)
        if (!ctx.pool->count(id))
          throw OracleError(path + ":" + std::to_string(line_no) +
                            ": relevant id '" + id + "' missing from pool");
    out.push_back(std::move(ctx));
  }
  return out;
}

inline nlohmann::json attribution_case_json(const AttributionCase& c) {
  nlohmann::json j;
  j["step"] = c.step;
  j["rollouts"] = nlohmann::json::array();
  for (const auto& rc : c.rollouts) {
    nlohmann::json r;
    r["tokens"] = rc.tokens;
    r["reward"] = rc.reward;
    r["sequence_advantage"] = rc.sequence_advantage;
    r["phi_seg"] = rc.phi_seg;
    r["phi_norm"] = rc.phi_norm;
    r["coalitions"] = nlohmann::json::array();
    for (const auto& [members, value] : rc.coalition_values)
      r["coalitions"].push_back({{"members", members}, {"value", value}});
    r["plan_stats"] = {{"width_counts", rc.width_counts},
                       {"sampled_fraction", rc.sampled_fraction},
                       {"n_oracle_calls", rc.n_oracle_calls},
                       {"n_marginal_evals", rc.n_marginal_evals}};
    j["rollouts"].push_back(std::move(r));
  }
  return j;
}

}  // namespace ospo

#pragma once

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ospo/envs.hpp"
#include "ospo/jsonl.hpp"
#include "ospo/stats.hpp"
#include "ospo/trainer.hpp"

namespace ospo {

// Configuration problem: reported with the offending field, mapped to the
// usage-error exit code by the CLI.
struct SpecError : std::runtime_error {
  std::string field;
  SpecError(std::string field_, const std::string& message)
      : std::runtime_error(field_ + ": " + message), field(std::move(field_)) {}
};

struct OracleConfig {
  enum class Type { synthetic, retrieval };
  Type type = Type::synthetic;
  StructuredEnvConfig synthetic;
  std::string corpus_path;
  std::string queries_path;
  std::string query_id;  // empty: first query in the file
  int vocab_size = 16;   // policy vocabulary for retrieval environments
};

struct GridCell {
  int w_max = 4;
  int budget = 48;
  CoalitionMode mode = CoalitionMode::contiguous;

  std::string label() const {
    return "w" + std::to_string(w_max) + "_p" + std::to_string(budget);
  }
  std::string mode_name() const {
    return mode == CoalitionMode::contiguous ? "contiguous" : "all_subsets";
  }
};

struct ExperimentSpec {
  std::string name;
  TrainerConfig trainer;
  std::vector<Algorithm> algorithms;  // >= 2 required by `compare`
  std::optional<double> threshold;
  OracleConfig oracle;
  std::vector<GridCell> grid;
  std::vector<std::uint64_t> seeds;
};

// ---------------------------------------------------------------------------
// Spec parsing
// ---------------------------------------------------------------------------

namespace detail {

inline CoalitionMode parse_mode(const std::string& s, const std::string& field) {
  if (s == "contiguous") return CoalitionMode::contiguous;
  if (s == "all_subsets") return CoalitionMode::all_subsets;
  throw SpecError(field, "unknown coalition mode '" + s + "'");
}

template <class T>
T get_or(const nlohmann::json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(key, e.what());
  }
}

}  // namespace detail

inline ExperimentSpec parse_spec(const nlohmann::json& j) {
  ExperimentSpec spec;
  if (!j.contains("name") || !j.at("name").is_string())
    throw SpecError("name", "experiment name (string) is required");
  spec.name = j.at("name").get<std::string>();

  const nlohmann::json trainer =
      j.contains("trainer") ? j.at("trainer") : nlohmann::json::object();
  TrainerConfig& t = spec.trainer;
  t.group_size = detail::get_or(trainer, "G", t.group_size);
  t.max_len = detail::get_or(trainer, "max_len", t.max_len);
  t.clip_eps = detail::get_or(trainer, "clip_eps", t.clip_eps);
  t.learning_rate = detail::get_or(trainer, "learning_rate", t.learning_rate);
  t.steps = detail::get_or(trainer, "steps", t.steps);
  t.epochs = detail::get_or(trainer, "epochs", t.epochs);
  t.eval_rollouts = detail::get_or(trainer, "eval_rollouts", t.eval_rollouts);
  const std::string adv =
      detail::get_or<std::string>(trainer, "adv_mode", "zscore");
  if (adv == "zscore")
    t.adv_mode = AdvantageMode::zscore;
  else if (adv == "mean_only")
    t.adv_mode = AdvantageMode::mean_only;
  else
    throw SpecError("trainer.adv_mode", "must be zscore or mean_only");

  const std::string algo =
      detail::get_or<std::string>(j, "algorithm", "OSPO_prop");
  if (auto a = parse_algorithm(algo))
    t.algorithm = *a;
  else
    throw SpecError("algorithm", "unknown algorithm '" + algo + "'");

  if (j.contains("algorithms")) {
    for (const auto& name : j.at("algorithms")) {
      const std::string s = name.get<std::string>();
      if (auto a = parse_algorithm(s))
        spec.algorithms.push_back(*a);
      else
        throw SpecError("algorithms", "unknown algorithm '" + s + "'");
    }
  }
  if (j.contains("threshold"))
    spec.threshold = j.at("threshold").get<double>();

  if (!j.contains("oracle") || !j.at("oracle").is_object())
    throw SpecError("oracle", "oracle configuration is required");
  const nlohmann::json& oracle = j.at("oracle");
  const std::string otype = detail::get_or<std::string>(oracle, "type", "");
  if (otype == "synthetic") {
    spec.oracle.type = OracleConfig::Type::synthetic;
    StructuredEnvConfig& env = spec.oracle.synthetic;
    env.vocab_size = detail::get_or(oracle, "vocab_size", env.vocab_size);
    env.n_attributes = detail::get_or(oracle, "n_attributes", env.n_attributes);
    env.adjacency_bonus =
        detail::get_or(oracle, "adjacency_bonus", env.adjacency_bonus);
    if (oracle.contains("attribute_weights"))
      env.attribute_weights =
          oracle.at("attribute_weights").get<std::vector<double>>();
  } else if (otype == "retrieval") {
    spec.oracle.type = OracleConfig::Type::retrieval;
    if (!oracle.contains("corpus"))
      throw SpecError("oracle.corpus", "corpus path is required");
    if (!oracle.contains("queries"))
      throw SpecError("oracle.queries", "queries path is required");
    spec.oracle.corpus_path = oracle.at("corpus").get<std::string>();
    spec.oracle.queries_path = oracle.at("queries").get<std::string>();
    spec.oracle.query_id = detail::get_or<std::string>(oracle, "query_id", "");
    spec.oracle.vocab_size =
        detail::get_or(oracle, "vocab_size", spec.oracle.vocab_size);
    namespace fs = std::filesystem;
    if (!fs::exists(spec.oracle.corpus_path))
      throw SpecError("oracle.corpus",
                      "file not found: " + spec.oracle.corpus_path);
    if (!fs::exists(spec.oracle.queries_path))
      throw SpecError("oracle.queries",
                      "file not found: " + spec.oracle.queries_path);
  } else {
    throw SpecError("oracle.type", "must be synthetic or retrieval");
  }

  const nlohmann::json grid =
      j.contains("grid") ? j.at("grid") : nlohmann::json::object();
  const std::vector<int> ws =
      detail::get_or(grid, "w_max", std::vector<int>{spec.trainer.w_max});
  const std::vector<int> ms =
      detail::get_or(grid, "M", std::vector<int>{spec.trainer.coalition_budget});
  std::vector<std::string> modes =
      detail::get_or(grid, "mode", std::vector<std::string>{"contiguous"});
  if (ws.empty()) throw SpecError("grid.w_max", "grid list must be non-empty");
  if (ms.empty()) throw SpecError("grid.M", "grid list must be non-empty");
  if (modes.empty()) throw SpecError("grid.mode", "grid list must be non-empty");
  for (int w : ws)
    for (int m : ms)
      for (const std::string& mode : modes)
        spec.grid.push_back(GridCell{w, m, detail::parse_mode(mode, "grid.mode")});

  if (!j.contains("seeds") || !j.at("seeds").is_array() || j.at("seeds").empty())
    throw SpecError("seeds", "a non-empty seed list is required");
  for (const auto& s : j.at("seeds"))
    spec.seeds.push_back(s.get<std::uint64_t>());
  return spec;
}

inline ExperimentSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("spec", "cannot open spec file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SpecError("spec", std::string("invalid JSON: ") + e.what());
  }
  return parse_spec(j);
}

// ---------------------------------------------------------------------------
// Environments from the oracle config
// ---------------------------------------------------------------------------

using AnyEnv = std::variant<StructuredEnv, RetrievalEnv>;

inline AnyEnv build_env(const OracleConfig& oracle) {
  if (oracle.type == OracleConfig::Type::synthetic)
    return StructuredEnv(oracle.synthetic);
  const std::vector<Document> docs = load_corpus_jsonl(oracle.corpus_path);
  if (docs.empty()) throw OracleError("corpus is empty: " + oracle.corpus_path);
  DenseIndex index = build_index(docs);
  const std::vector<QueryContext> queries =
      load_queries_jsonl(oracle.queries_path);
  if (queries.empty())
    throw OracleError("query file is empty: " + oracle.queries_path);
  const QueryContext* ctx = &queries.front();
  if (!oracle.query_id.empty()) {
    ctx = nullptr;
    for (const QueryContext& q : queries)
      if (q.query_id == oracle.query_id) ctx = &q;
    if (!ctx)
      throw OracleError("query_id not found: " + oracle.query_id);
  }
  return RetrievalEnv(std::move(index), *ctx, oracle.vocab_size);
}

// ---------------------------------------------------------------------------
// CSV helpers: shortest round-trip double formatting keeps re-runs bitwise
// identical.
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string curve_csv(const std::vector<CurveRow>& curve) {
  std::string out =
      "step,train_reward_mean,train_reward_std,eval_metric,oracle_calls,"
      "wall_ms,mean_abs_adv,credit_pearson,credit_spearman\n";
  for (const CurveRow& row : curve) {
    out += std::to_string(row.step);
    out += ',';
    out += format_double(row.train_reward_mean);
    out += ',';
    out += format_double(row.train_reward_std);
    out += ',';
    out += format_double(row.eval_metric);
    out += ',';
    out += std::to_string(row.oracle_calls);
    out += ',';
    out += format_double(row.wall_ms);
    out += ',';
    out += format_double(row.mean_abs_adv);
    out += ',';
    if (row.credit_pearson) out += format_double(*row.credit_pearson);
    out += ',';
    if (row.credit_spearman) out += format_double(*row.credit_spearman);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Experiment runner
// ---------------------------------------------------------------------------

struct RunRecord {
  GridCell cell;
  Algorithm algorithm = Algorithm::ospo_prop;
  std::uint64_t seed = 0;
  TrainResult result;
};

// Evaluation summary of one run: the final evaluations of the curve
// (at most the last `window`).
inline std::vector<double> final_evals(const std::vector<CurveRow>& curve,
                                       std::size_t window = 10) {
  std::vector<double> out;
  const std::size_t start =
      curve.size() > window ? curve.size() - window : std::size_t{0};
  for (std::size_t i = start; i < curve.size(); ++i)
    out.push_back(curve[i].eval_metric);
  return out;
}

namespace detail {

template <class Fn>
void parallel_for(std::size_t n_tasks, int jobs, Fn&& fn) {
  if (jobs <= 1 || n_tasks <= 1) {
    for (std::size_t i = 0; i < n_tasks; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mu;
  std::vector<std::thread> workers;
  const std::size_t n_workers =
      std::min(static_cast<std::size_t>(jobs), n_tasks);
  for (std::size_t w = 0; w < n_workers; ++w)
    workers.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n_tasks) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  for (std::thread& t : workers) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

inline TrainResult run_one(const AnyEnv& env, const TrainerConfig& cfg) {
  return std::visit([&](const auto& e) { return train(cfg, e); }, env);
}

}  // namespace detail

// Runs every grid cell for every seed, writes one curve CSV per run plus a
// summary CSV pooling the final evaluations across seeds. OSPO runs also dump
// the final-step attribution case study as JSON.
inline std::vector<RunRecord> run_experiment(const ExperimentSpec& spec,
                                             const std::string& out_dir,
                                             int jobs = 1,
                                             std::uint64_t seed_offset = 0) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::path(out_dir) / spec.name;
  fs::create_directories(dir);
  const AnyEnv env = build_env(spec.oracle);

  std::vector<RunRecord> records;
  for (const GridCell& cell : spec.grid)
    for (std::uint64_t seed : spec.seeds) {
      RunRecord r;
      r.cell = cell;
      r.algorithm = spec.trainer.algorithm;
      r.seed = seed + seed_offset;
      records.push_back(std::move(r));
    }

  detail::parallel_for(records.size(), jobs, [&](std::size_t i) {
    RunRecord& rec = records[i];
    TrainerConfig cfg = spec.trainer;
    cfg.w_max = rec.cell.w_max;
    cfg.coalition_budget = rec.cell.budget;
    cfg.mode = rec.cell.mode;
    cfg.seed = rec.seed;
    rec.result = detail::run_one(env, cfg);
  });

  for (const RunRecord& rec : records) {
    const std::string stem = rec.cell.label() + "_" + rec.cell.mode_name() +
                             "_seed" + std::to_string(rec.seed);
    std::ofstream csv(dir / (stem + ".csv"));
    csv << curve_csv(rec.result.curve);
    if (rec.result.last_case) {
      std::ofstream js(dir / (stem + "_case.json"));
      js << attribution_case_json(*rec.result.last_case).dump(2) << '\n';
    }
  }

  std::ofstream summary(dir / "summary.csv");
  summary << "cell,mode,w_max,M,algorithm,seeds,evals_per_seed,eval_mean,"
             "eval_std,eval_max\n";
  for (const GridCell& cell : spec.grid) {
    std::vector<double> pooled;
    std::size_t evals_per_seed = 0;
    for (const RunRecord& rec : records) {
      if (!(rec.cell.w_max == cell.w_max && rec.cell.budget == cell.budget &&
            rec.cell.mode == cell.mode))
        continue;
      const std::vector<double> evals = final_evals(rec.result.curve);
      evals_per_seed = evals.size();
      pooled.insert(pooled.end(), evals.begin(), evals.end());
    }
    const GroupRewards agg = summarize_rewards(pooled);
    double peak = 0.0;
    for (double v : pooled) peak = std::max(peak, v);
    summary << cell.label() << ',' << cell.mode_name() << ',' << cell.w_max
            << ',' << cell.budget << ',' << algorithm_name(spec.trainer.algorithm)
            << ',' << spec.seeds.size() << ',' << evals_per_seed << ','
            << format_double(agg.mean) << ',' << format_double(agg.stddev)
            << ',' << format_double(peak) << '\n';
  }
  return records;
}

// ---------------------------------------------------------------------------
// Algorithm comparison: median steps-to-threshold across seeds
// ---------------------------------------------------------------------------

struct CompareRow {
  Algorithm algorithm = Algorithm::grpo;
  std::optional<double> median_steps;  // nullopt: median run never reached it
  int reached = 0;
  int seeds = 0;
};

inline std::vector<CompareRow> compare_algorithms(
    const ExperimentSpec& spec, double threshold,
    const std::string& out_dir = {}, int jobs = 1,
    std::uint64_t seed_offset = 0) {
  if (spec.algorithms.size() < 2)
    throw SpecError("algorithms",
                    "compare requires at least two algorithms in the spec");
  if (spec.grid.size() != 1)
    throw SpecError("grid", "compare requires exactly one grid cell");
  const AnyEnv env = build_env(spec.oracle);
  const GridCell cell = spec.grid.front();

  struct Task {
    Algorithm algorithm;
    std::uint64_t seed;
    std::optional<int> steps;
  };
  std::vector<Task> tasks;
  for (Algorithm a : spec.algorithms)
    for (std::uint64_t seed : spec.seeds)
      tasks.push_back(Task{a, seed + seed_offset, std::nullopt});

  detail::parallel_for(tasks.size(), jobs, [&](std::size_t i) {
    TrainerConfig cfg = spec.trainer;
    cfg.algorithm = tasks[i].algorithm;
    cfg.w_max = cell.w_max;
    cfg.coalition_budget = cell.budget;
    cfg.mode = cell.mode;
    cfg.seed = tasks[i].seed;
    const TrainResult res = detail::run_one(env, cfg);
    tasks[i].steps = steps_to_threshold(res.curve, threshold);
  });

  std::vector<CompareRow> rows;
  for (Algorithm a : spec.algorithms) {
    CompareRow row;
    row.algorithm = a;
    std::vector<double> steps;
    for (const Task& t : tasks) {
      if (t.algorithm != a) continue;
      ++row.seeds;
      if (t.steps) {
        ++row.reached;
        steps.push_back(static_cast<double>(*t.steps));
      } else {
        steps.push_back(std::numeric_limits<double>::infinity());
      }
    }
    const double med = median(steps);
    if (std::isfinite(med)) row.median_steps = med;
    rows.push_back(row);
  }

  if (!out_dir.empty()) {
    namespace fs = std::filesystem;
    const fs::path dir = fs::path(out_dir) / spec.name;
    fs::create_directories(dir);
    std::ofstream csv(dir / "compare.csv");
    csv << "algorithm,seeds,reached,median_steps_to_threshold\n";
    for (const CompareRow& row : rows) {
      csv << algorithm_name(row.algorithm) << ',' << row.seeds << ','
          << row.reached << ',';
      if (row.median_steps)
        csv << format_double(*row.median_steps);
      else
        csv << "never";
      csv << '\n';
    }
  }
  return rows;
}

}  // namespace ospo

// Command-line front end: experiment runs, algorithm comparisons, and
// one-shot Owen attribution dumps against a retrieval corpus.

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ospo/attribution.hpp"
#include "ospo/coalition.hpp"
#include "ospo/experiment.hpp"
#include "ospo/jsonl.hpp"
#include "ospo/reward.hpp"
#include "ospo/segmentation.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitOracle = 3;

int cmd_run(const std::string& spec_path, const std::string& out_dir, int jobs,
            std::uint64_t seed_offset) {
  const ospo::ExperimentSpec spec = ospo::load_spec(spec_path);
  ospo::run_experiment(spec, out_dir, jobs, seed_offset);
  std::cout << "wrote " << out_dir << "/" << spec.name << "/summary.csv\n";
  return kExitOk;
}

int cmd_compare(const std::string& spec_path, std::optional<double> threshold,
                const std::string& out_dir, int jobs) {
  const ospo::ExperimentSpec spec = ospo::load_spec(spec_path);
  if (!threshold) threshold = spec.threshold;
  if (!threshold)
    throw ospo::SpecError("threshold",
                          "required via --threshold or the spec file");
  const std::vector<ospo::CompareRow> rows =
      ospo::compare_algorithms(spec, *threshold, out_dir, jobs);
  std::cout << "algorithm,seeds,reached,median_steps_to_threshold\n";
  for (const ospo::CompareRow& row : rows) {
    std::cout << ospo::algorithm_name(row.algorithm) << ',' << row.seeds << ','
              << row.reached << ',';
    if (row.median_steps)
      std::cout << ospo::format_double(*row.median_steps);
    else
      std::cout << "never";
    std::cout << '\n';
  }
  return kExitOk;
}

int cmd_attribute(const std::string& corpus_path, const std::string& queries_path,
                  const std::string& response, int w_max, int budget,
                  const std::string& mode_name, const std::string& segmenter,
                  int max_segments) {
  const ospo::CoalitionMode mode =
      ospo::detail::parse_mode(mode_name, "mode");
  const std::vector<ospo::Document> docs = ospo::load_corpus_jsonl(corpus_path);
  if (docs.empty()) throw ospo::OracleError("corpus is empty: " + corpus_path);
  const ospo::DenseIndex index = ospo::build_index(docs);
  const std::vector<ospo::QueryContext> queries =
      ospo::load_queries_jsonl(queries_path);
  if (queries.empty())
    throw ospo::OracleError("query file is empty: " + queries_path);

  const ospo::TokenizedResponse resp = ospo::tokenize(response);
  std::vector<ospo::Segment> segments;
  if (segmenter == "phrase") {
    ospo::PhraseConfig cfg;
    cfg.max_segments = static_cast<std::size_t>(max_segments);
    segments = ospo::segment_phrases(resp, cfg);
  } else if (segmenter == "sentence") {
    segments = ospo::segment_sentences(resp);
  } else {
    throw ospo::SpecError("segmenter", "must be phrase or sentence");
  }
  const int n = static_cast<int>(segments.size());

  nlohmann::json out;
  out["response"] = response;
  out["segmenter"] = segmenter;
  out["segments"] = nlohmann::json::array();
  for (const ospo::Segment& s : segments)
    out["segments"].push_back({{"index", s.index},
                               {"text", s.text},
                               {"token_range", {s.token_begin, s.token_end}}});
  out["queries"] = nlohmann::json::array();

  for (const ospo::QueryContext& ctx : queries) {
    nlohmann::json q;
    q["query_id"] = ctx.query_id;
    if (n == 0) {
      q["phi_seg"] = nlohmann::json::array();
      out["queries"].push_back(std::move(q));
      continue;
    }
    const ospo::CoalitionPlan plan =
        ospo::sample_plan(n, w_max, budget, mode, /*seed=*/1);
    ospo::CharacteristicCache cache;
    const ospo::CharacteristicFn fn = [&](const ospo::Coalition& s) {
      return ospo::eval_characteristic_retrieval(ctx, segments, s, index,
                                                 &cache);
    };
    ospo::CoalitionEvaluations evals = ospo::evaluate_plan(plan, fn);
    const std::vector<double> phi_seg = ospo::owen_values(evals, fn);
    const ospo::SegmentWeightMatrix weights =
        ospo::build_weight_matrix(segments, resp.size());
    const ospo::OwenAttribution attr =
        ospo::project_and_normalize(phi_seg, weights);

    q["coalitions"] = nlohmann::json::array();
    for (const ospo::Coalition& c : plan.coalitions)
      q["coalitions"].push_back(
          {{"members", c.members},
           {"contiguous", c.contiguous},
           {"value", evals.values.at(c.members)}});
    q["phi_seg"] = phi_seg;
    q["phi_tok"] = attr.phi_tok;
    q["phi_norm"] = attr.phi_norm;
    q["plan_stats"] = {{"width_counts", plan.width_counts},
                       {"sampled_fraction", plan.sampled_fraction},
                       {"total_count", plan.total_count},
                       {"n_oracle_calls", evals.n_oracle_calls},
                       {"n_marginal_evals", evals.n_marginal_evals}};
    out["queries"].push_back(std::move(q));
  }
  std::cout << out.dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Owen-value credit assignment for group-relative policy "
               "optimization: experiments, comparisons, attribution dumps"};
  app.require_subcommand(1);

  std::string spec_path, out_dir = "out";
  int jobs = 1;
  std::uint64_t seed_offset = 0;

  CLI::App* run = app.add_subcommand("run", "run an experiment grid");
  run->add_option("--spec", spec_path, "experiment spec (JSON)")->required();
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--jobs", jobs, "parallel grid cells");
  run->add_option("--seed-offset", seed_offset, "added to every seed");

  std::optional<double> threshold;
  CLI::App* compare =
      app.add_subcommand("compare", "algorithm steps-to-threshold comparison");
  compare->add_option("--spec", spec_path, "experiment spec (JSON)")->required();
  compare->add_option("--threshold", threshold, "eval-metric threshold");
  compare->add_option("--out", out_dir, "output directory");
  compare->add_option("--jobs", jobs, "parallel runs");

  std::string corpus_path, queries_path, response;
  int w_max = 4, budget = 32, max_segments = 16;
  std::string mode_name = "contiguous", segmenter = "phrase";
  CLI::App* attribute =
      app.add_subcommand("attribute", "one-shot Owen attribution for a response");
  attribute->add_option("--corpus", corpus_path, "corpus JSONL")->required();
  attribute->add_option("--queries", queries_path, "queries JSONL")->required();
  attribute->add_option("--response", response, "response text")->required();
  attribute->add_option("--w", w_max, "max coalition width");
  attribute->add_option("--m", budget, "coalition budget");
  attribute->add_option("--mode", mode_name, "contiguous | all_subsets");
  attribute->add_option("--segmenter", segmenter, "phrase | sentence");
  attribute->add_option("--max-segments", max_segments, "phrase segment cap");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*run) return cmd_run(spec_path, out_dir, jobs, seed_offset);
    if (*compare) return cmd_compare(spec_path, threshold, out_dir, jobs);
    if (*attribute)
      return cmd_attribute(corpus_path, queries_path, response, w_max, budget,
                           mode_name, segmenter, max_segments);
  } catch (const ospo::SpecError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ospo::OracleError& e) {
    std::cerr << "oracle error: " << e.what() << '\n';
    return kExitOracle;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitOk;
}

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <vector>

#include "ospo/attribution.hpp"
#include "ospo/coalition.hpp"
#include "ospo/reward.hpp"
#include "ospo/rng.hpp"

using namespace ospo;

namespace {

// Random characteristic table over all subsets of {0..n-1}, v(empty) = 0.
std::map<std::vector<int>, double> random_table(int n, Rng& rng) {
  std::map<std::vector<int>, double> table;
  for (const Coalition& c : enumerate_all_subsets(n, n))
    table[c.members] = c.empty() ? 0.0 : rng.uniform(-1.0, 1.0);
  return table;
}

CharacteristicFn table_fn(const std::map<std::vector<int>, double>& table) {
  return [&table](const Coalition& c) { return table.at(c.members); };
}

// Independent Shapley oracle: average marginal contribution over all N!
// arrival orders.
std::vector<double> shapley_by_permutations(
    const std::map<std::vector<int>, double>& table, int n) {
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<double> phi(n, 0.0);
  long long count = 0;
  do {
    std::vector<int> prefix;
    for (int j : perm) {
      const double before = table.at(prefix);
      std::vector<int> with = prefix;
      with.push_back(j);
      std::sort(with.begin(), with.end());
      phi[j] += table.at(with) - before;
      prefix = with;
    }
    ++count;
  } while (std::next_permutation(perm.begin(), perm.end()));
  for (double& p : phi) p /= static_cast<double>(count);
  return phi;
}

}  // namespace

TEST_CASE("single segment receives the whole marginal") {
  const CoalitionPlan plan = sample_plan(1, 2, 8, CoalitionMode::contiguous, 1);
  const CharacteristicFn fn = [](const Coalition& c) {
    return c.empty() ? 0.0 : 0.7;
  };
  CoalitionEvaluations evals = evaluate_plan(plan, fn);
  const std::vector<double> phi = owen_values(evals, fn);
  REQUIRE(phi.size() == 1);
  CHECK_THAT(phi[0], Catch::Matchers::WithinAbs(0.7, 1e-15));
}

TEST_CASE("zero segments yield an empty vector") {
  const CoalitionPlan plan = sample_plan(0, 2, 8, CoalitionMode::contiguous, 1);
  const CharacteristicFn fn = [](const Coalition&) { return 0.0; };
  CoalitionEvaluations evals = evaluate_plan(plan, fn);
  CHECK(owen_values(evals, fn).empty());
}

TEST_CASE("pinned coalition table reproduces the worked marginal") {
  // v({0,1}) = 0.50, v({0,1,2}) = 0.72: adding segment 2 contributes +0.22
  std::map<std::vector<int>, double> table;
  table[{}] = 0.0;
  table[{0}] = 0.45;
  table[{1}] = 0.20;
  table[{2}] = 0.30;
  table[{0, 1}] = 0.50;
  table[{0, 1, 2}] = 0.72;

  CoalitionPlan pair_only;
  pair_only.n_segments = 3;
  pair_only.w_max = 3;
  pair_only.mode = CoalitionMode::contiguous;
  pair_only.coalitions = {make_coalition({0, 1}), make_coalition({0, 1, 2})};

  CoalitionEvaluations evals = evaluate_plan(pair_only, table_fn(table));
  const std::vector<double> phi = owen_values(evals, table_fn(table));
  CHECK(phi[2] == 0.72 - 0.50);  // exactly +0.22

  // with the empty anchor present, the singleton marginal joins the average
  CoalitionPlan with_empty = pair_only;
  with_empty.coalitions.insert(with_empty.coalitions.begin(), Coalition{});
  CoalitionEvaluations evals2 = evaluate_plan(with_empty, table_fn(table));
  const std::vector<double> phi2 = owen_values(evals2, table_fn(table));
  CHECK_THAT(phi2[2], Catch::Matchers::WithinAbs(0.26, 1e-12));
}

TEST_CASE("additive synthetic oracle is recovered exactly") {
  Rng rng(1234);
  for (int n = 1; n <= 6; ++n) {
    SyntheticOracle oracle;
    for (int i = 0; i < n; ++i)
      oracle.weights.push_back(rng.uniform() / static_cast<double>(n));
    const CoalitionPlan plan =
        sample_plan(n, n + 1, 1 << 12, CoalitionMode::contiguous, 1);
    const CharacteristicFn fn = [&oracle](const Coalition& c) {
      return oracle(c);
    };
    CoalitionEvaluations evals = evaluate_plan(plan, fn);
    const std::vector<double> phi = owen_values(evals, fn);
    for (int j = 0; j < n; ++j)
      REQUIRE_THAT(phi[j],
                   Catch::Matchers::WithinAbs(oracle.weights[j], 1e-12));
  }
}

TEST_CASE("owen equals exact shapley for two segments") {
  Rng rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    const auto table = random_table(2, rng);
    const CoalitionPlan plan =
        sample_plan(2, 2, 16, CoalitionMode::contiguous, 1);
    CoalitionEvaluations evals = evaluate_plan(plan, table_fn(table));
    const std::vector<double> owen = owen_values(evals, table_fn(table));
    const std::vector<double> shapley = shapley_exact(table_fn(table), 2);
    for (int j = 0; j < 2; ++j)
      REQUIRE_THAT(owen[j], Catch::Matchers::WithinAbs(shapley[j], 1e-12));
  }
}

TEST_CASE("exact shapley satisfies the classic axioms") {
  Rng rng(7);

  SECTION("additivity") {
    SyntheticOracle oracle;
    oracle.weights = {0.2, 0.05, 0.11, 0.09};
    const CharacteristicFn fn = [&oracle](const Coalition& c) {
      return oracle(c);
    };
    const std::vector<double> phi = shapley_exact(fn, 4);
    for (int j = 0; j < 4; ++j)
      CHECK_THAT(phi[j], Catch::Matchers::WithinAbs(oracle.weights[j], 1e-12));
  }

  SECTION("symmetry: value depending only on |S| gives equal shares") {
    const CharacteristicFn fn = [](const Coalition& c) {
      return std::sqrt(static_cast<double>(c.width()));
    };
    const std::vector<double> phi = shapley_exact(fn, 5);
    for (int j = 1; j < 5; ++j)
      CHECK_THAT(phi[j], Catch::Matchers::WithinAbs(phi[0], 1e-12));
  }

  SECTION("efficiency over random tables") {
    for (int trial = 0; trial < 20; ++trial) {
      const int n = 1 + static_cast<int>(rng.below(6));
      const auto table = random_table(n, rng);
      const std::vector<double> phi = shapley_exact(table_fn(table), n);
      const double total = std::accumulate(phi.begin(), phi.end(), 0.0);
      std::vector<int> full(n);
      std::iota(full.begin(), full.end(), 0);
      REQUIRE_THAT(total, Catch::Matchers::WithinAbs(
                              table.at(full) - table.at({}), 1e-12));
    }
  }

  SECTION("matches the permutation oracle") {
    for (int n = 1; n <= 5; ++n) {
      const auto table = random_table(n, rng);
      const std::vector<double> direct = shapley_exact(table_fn(table), n);
      const std::vector<double> by_perm = shapley_by_permutations(table, n);
      for (int j = 0; j < n; ++j)
        REQUIRE_THAT(direct[j],
                     Catch::Matchers::WithinAbs(by_perm[j], 1e-12));
    }
  }

  SECTION("size guard") {
    const CharacteristicFn fn = [](const Coalition&) { return 0.0; };
    CHECK_THROWS_AS(shapley_exact(fn, 13), std::invalid_argument);
  }
}

TEST_CASE("on-demand unions are counted as marginal evaluations") {
  std::map<std::vector<int>, double> table;
  table[{}] = 0.0;
  table[{0}] = 0.4;
  table[{1}] = 0.1;
  table[{0, 1}] = 0.6;

  CoalitionPlan plan;
  plan.n_segments = 2;
  plan.w_max = 2;
  plan.mode = CoalitionMode::contiguous;
  plan.coalitions = {Coalition{}, make_coalition({0})};  // {1}, {0,1} missing

  CoalitionEvaluations evals = evaluate_plan(plan, table_fn(table));
  CHECK(evals.n_oracle_calls == 2);
  const std::vector<double> phi = owen_values(evals, table_fn(table));
  // C_0 = {empty}: phi_0 = v({0}). C_1 = {empty, {0}}: both unions on demand.
  CHECK_THAT(phi[0], Catch::Matchers::WithinAbs(0.4, 1e-15));
  CHECK_THAT(phi[1], Catch::Matchers::WithinAbs((0.1 + 0.2) / 2.0, 1e-15));
  CHECK(evals.n_marginal_evals == 2);
  CHECK(evals.n_oracle_calls == 4);
}

TEST_CASE("empty applicable set falls back to the forced singleton") {
  std::map<std::vector<int>, double> table;
  table[{}] = 0.05;
  table[{0}] = 0.3;
  table[{1}] = 0.25;
  table[{0, 1}] = 0.6;

  CoalitionPlan plan;  // no anchors at all: C_j comes back empty
  plan.n_segments = 2;
  plan.w_max = 2;
  plan.mode = CoalitionMode::contiguous;
  plan.coalitions = {make_coalition({0, 1})};

  CoalitionEvaluations evals = evaluate_plan(plan, table_fn(table));
  const std::vector<double> phi = owen_values(evals, table_fn(table));
  CHECK_THAT(phi[0], Catch::Matchers::WithinAbs(0.25, 1e-15));  // 0.3 - 0.05
  CHECK_THAT(phi[1], Catch::Matchers::WithinAbs(0.20, 1e-15));
}

TEST_CASE("increasing one union value never decreases phi_j") {
  Rng rng(888);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(5));
    auto table = random_table(n, rng);
    const CoalitionPlan plan =
        sample_plan(n, n, 1 << 12, CoalitionMode::contiguous, 5);
    const int j = static_cast<int>(rng.below(n));

    CoalitionEvaluations evals = evaluate_plan(plan, table_fn(table));
    const double before = owen_values(evals, table_fn(table))[j];

    const std::vector<Coalition> applicable = applicable_coalitions(j, plan);
    REQUIRE_FALSE(applicable.empty());
    const Coalition& s = applicable[rng.below(applicable.size())];
    std::vector<int> with = s.members;
    with.push_back(j);
    std::sort(with.begin(), with.end());
    table[with] += 0.5;

    CoalitionEvaluations evals2 = evaluate_plan(plan, table_fn(table));
    const double after = owen_values(evals2, table_fn(table))[j];
    REQUIRE(after >= before);
  }
}

TEST_CASE("sampled plans agree with full enumeration at M = |C|") {
  Rng rng(2718);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 3 + static_cast<int>(rng.below(6));
    const int w = 2 + static_cast<int>(rng.below(4));
    const auto table = random_table(n, rng);
    const CoalitionPlan full =
        sample_plan(n, w, 1 << 14, CoalitionMode::contiguous, 1);
    const CoalitionPlan at_budget = sample_plan(
        n, w, static_cast<int>(full.coalitions.size()),
        CoalitionMode::contiguous, rng.next_u64());
    REQUIRE(at_budget.coalitions.size() == full.coalitions.size());
    CoalitionEvaluations ef = evaluate_plan(full, table_fn(table));
    CoalitionEvaluations eb = evaluate_plan(at_budget, table_fn(table));
    const std::vector<double> pf = owen_values(ef, table_fn(table));
    const std::vector<double> pb = owen_values(eb, table_fn(table));
    for (int j = 0; j < n; ++j) REQUIRE(pf[j] == pb[j]);
  }
}

TEST_CASE("monte-carlo estimates tighten as the budget grows") {
  Rng rng(13);
  const int n = 8, w = 4;
  const auto table = random_table(n, rng);
  const CoalitionPlan full =
      sample_plan(n, w, 1 << 14, CoalitionMode::contiguous, 1);
  CoalitionEvaluations ef = evaluate_plan(full, table_fn(table));
  const std::vector<double> reference = owen_values(ef, table_fn(table));

  auto mean_error = [&](int budget) {
    double total = 0.0;
    const int n_seeds = 200;
    for (int seed = 0; seed < n_seeds; ++seed) {
      const CoalitionPlan plan =
          sample_plan(n, w, budget, CoalitionMode::contiguous, seed);
      CoalitionEvaluations evals = evaluate_plan(plan, table_fn(table));
      const std::vector<double> phi = owen_values(evals, table_fn(table));
      for (int j = 0; j < n; ++j) total += std::abs(phi[j] - reference[j]);
    }
    return total / static_cast<double>(n_seeds * n);
  };

  const int full_size = static_cast<int>(full.coalitions.size());
  const double coarse = mean_error(6);
  const double fine = mean_error(full_size - 4);
  const double exact = mean_error(full_size);
  CHECK(exact == 0.0);
  CHECK(fine < coarse);
}

TEST_CASE("projection multiplies by the weight matrix transpose") {
  SECTION("single covered token") {
    const SegmentWeightMatrix w = build_weight_matrix({{0, 0, 1, "x"}}, 1);
    const OwenAttribution attr = project_and_normalize({0.26}, w);
    CHECK(attr.phi_tok == std::vector<double>{0.26});
    CHECK(attr.phi_norm == std::vector<double>{1.0});
  }

  SECTION("equal segments share uniformly") {
    const SegmentWeightMatrix w =
        build_weight_matrix({{0, 0, 2, "ab"}, {1, 2, 4, "cd"}}, 4);
    const OwenAttribution attr = project_and_normalize({0.2, 0.2}, w);
    for (double p : attr.phi_norm)
      CHECK_THAT(p, Catch::Matchers::WithinAbs(0.25, 1e-15));
  }

  SECTION("negative segment values are floored before normalizing") {
    const SegmentWeightMatrix w =
        build_weight_matrix({{0, 0, 1, "a"}, {1, 1, 2, "b"}}, 2);
    const OwenAttribution attr = project_and_normalize({-0.1, 0.3}, w);
    CHECK(attr.phi_tok[0] == -0.1);
    CHECK(attr.phi_norm[0] == 0.0);
    CHECK(attr.phi_norm[1] == 1.0);
  }

  SECTION("all-nonpositive mass falls back to uniform over covered tokens") {
    const SegmentWeightMatrix w =
        build_weight_matrix({{0, 0, 1, "a"}, {1, 1, 2, "b"}}, 3);
    const OwenAttribution attr = project_and_normalize({-0.1, -0.5}, w);
    CHECK(attr.phi_norm[0] == 0.5);
    CHECK(attr.phi_norm[1] == 0.5);
    CHECK(attr.phi_norm[2] == 0.0);  // uncovered stays at zero
    CHECK_FALSE(attr.coverage[2]);
  }
}

TEST_CASE("normalized weights are scale invariant") {
  Rng rng(3141);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(5));
    std::vector<Segment> segs;
    std::size_t t = 0;
    for (int j = 0; j < n; ++j) {
      const std::size_t len = 1 + rng.below(3);
      segs.push_back({static_cast<std::size_t>(j), t, t + len, {}});
      t += len;
    }
    const SegmentWeightMatrix w = build_weight_matrix(segs, t);
    std::vector<double> phi(n);
    for (double& p : phi) p = rng.uniform(-0.5, 1.0);
    const double c = rng.uniform(0.25, 4.0);
    std::vector<double> scaled = phi;
    for (double& p : scaled) p *= c;
    const OwenAttribution a = project_and_normalize(phi, w);
    const OwenAttribution b = project_and_normalize(scaled, w);
    for (std::size_t i = 0; i < a.phi_norm.size(); ++i)
      REQUIRE_THAT(a.phi_norm[i],
                   Catch::Matchers::WithinAbs(b.phi_norm[i], 1e-12));
  }
}

TEST_CASE("phi_norm sums to one over covered tokens") {
  Rng rng(1618);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(6));
    std::vector<Segment> segs;
    std::size_t t = rng.below(2);  // possibly an uncovered leading token
    for (int j = 0; j < n; ++j) {
      const std::size_t len = 1 + rng.below(3);
      segs.push_back({static_cast<std::size_t>(j), t, t + len, {}});
      t += len + rng.below(2);
    }
    const SegmentWeightMatrix w = build_weight_matrix(segs, t);
    std::vector<double> phi(n);
    for (double& p : phi) p = rng.uniform(-1.0, 1.0);
    const OwenAttribution attr = project_and_normalize(phi, w);
    double total = 0.0;
    for (std::size_t i = 0; i < attr.phi_norm.size(); ++i) {
      REQUIRE(attr.phi_norm[i] >= 0.0);
      if (!attr.coverage[i]) REQUIRE(attr.phi_norm[i] == 0.0);
      total += attr.phi_norm[i];
    }
    REQUIRE_THAT(total, Catch::Matchers::WithinAbs(1.0, 1e-12));
  }
}

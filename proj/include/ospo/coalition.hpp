#pragma once

#include <algorithm>
#include <bit>
#include <compare>
#include <cstdint>
#include <numeric>
#include <set>
#include <stdexcept>
#include <vector>

#include "ospo/rng.hpp"

namespace ospo {

enum class CoalitionMode { contiguous, all_subsets };

// A coalition of segment indices. Members are kept sorted ascending; the
// empty coalition is valid and counts as contiguous.
struct Coalition {
  std::vector<int> members;
  bool contiguous = true;

  bool empty() const { return members.empty(); }
  int width() const { return static_cast<int>(members.size()); }
  bool contains(int j) const {
    return std::binary_search(members.begin(), members.end(), j);
  }
  auto operator<=>(const Coalition& other) const {
    return members <=> other.members;
  }
  bool operator==(const Coalition& other) const {
    return members == other.members;
  }
};

inline bool is_contiguous_members(const std::vector<int>& members) {
  for (std::size_t i = 1; i < members.size(); ++i)
    if (members[i] != members[i - 1] + 1) return false;
  return true;
}

inline Coalition make_coalition(std::vector<int> members) {
  std::sort(members.begin(), members.end());
  Coalition c;
  c.contiguous = is_contiguous_members(members);
  c.members = std::move(members);
  return c;
}

inline Coalition make_window(int start, int width) {
  Coalition c;
  c.members.resize(width);
  std::iota(c.members.begin(), c.members.end(), start);
  c.contiguous = true;
  return c;
}

// |C| = 1 + sum_{w=1}^{min(w_max,N)} (N - w + 1); the leading 1 is the empty
// coalition, the summation counts every starting position per width.
inline long long count_contiguous(int n, int w_max) {
  if (n < 0) throw std::invalid_argument("count_contiguous: n must be >= 0");
  if (w_max < 1)
    throw std::invalid_argument("count_contiguous: w_max must be >= 1");
  long long total = 1;
  const int top = std::min(w_max, n);
  for (int w = 1; w <= top; ++w) total += n - w + 1;
  return total;
}

// Empty coalition, all windows of width <= min(w_max, N), and the full
// coalition. When N > w_max the full coalition is not a window, so the list
// has one entry more than count_contiguous.
inline std::vector<Coalition> enumerate_contiguous(int n, int w_max) {
  if (n < 0) throw std::invalid_argument("enumerate_contiguous: n >= 0");
  if (w_max < 1) throw std::invalid_argument("enumerate_contiguous: w_max >= 1");
  std::vector<Coalition> out;
  out.push_back(Coalition{});
  const int top = std::min(w_max, n);
  for (int w = 1; w <= top; ++w)
    for (int i = 0; i + w <= n; ++i) out.push_back(make_window(i, w));
  if (n > w_max && n > 0) out.push_back(make_window(0, n));
  return out;
}

// Ablation mode: every subset of cardinality <= w_max plus the anchors.
// Guarded enumeration; the sampler handles larger N by rejection.
inline std::vector<Coalition> enumerate_all_subsets(int n, int w_max) {
  if (n < 0) throw std::invalid_argument("enumerate_all_subsets: n >= 0");
  if (n > 20)
    throw std::invalid_argument(
        "enumerate_all_subsets: n > 20 would enumerate over 2^20 subsets");
  if (w_max < 1)
    throw std::invalid_argument("enumerate_all_subsets: w_max >= 1");
  std::vector<Coalition> out;
  const std::uint32_t end = 1u << n;
  for (std::uint32_t mask = 0; mask < end; ++mask) {
    const int width = std::popcount(mask);
    if (width > w_max) continue;
    std::vector<int> members;
    members.reserve(width);
    for (int i = 0; i < n; ++i)
      if (mask & (1u << i)) members.push_back(i);
    out.push_back(make_coalition(std::move(members)));
  }
  if (n > w_max && n > 0) out.push_back(make_window(0, n));
  return out;
}

inline long long total_coalition_count(int n, int w_max, CoalitionMode mode) {
  if (mode == CoalitionMode::contiguous) {
    long long c = count_contiguous(n, w_max);
    if (n > w_max && n > 0) ++c;  // explicit full-coalition anchor
    return c;
  }
  // sum_{w=0}^{min(w_max,n)} C(n,w), saturating; plus the full anchor
  long double total = 0.0L;
  long double binom = 1.0L;
  const int top = std::min(w_max, n);
  for (int w = 0; w <= top; ++w) {
    total += binom;
    binom = binom * (n - w) / (w + 1);
  }
  if (n > w_max && n > 0) total += 1.0L;
  const long double cap = 9.0e18L;
  return total > cap ? static_cast<long long>(cap)
                     : static_cast<long long>(total);
}

// The sampled evaluation plan: always contains the empty and full anchor
// coalitions, holds min(M, |C|) coalitions total, duplicate-free, and is
// stored in canonical (lexicographic member) order so downstream reductions
// are reproducible regardless of how values get evaluated.
struct CoalitionPlan {
  int n_segments = 0;
  int w_max = 1;
  CoalitionMode mode = CoalitionMode::contiguous;
  std::vector<Coalition> coalitions;
  int budget = 0;                    // M
  std::uint64_t seed = 0;
  long long total_count = 0;         // |C| for this mode
  std::vector<long long> width_counts;  // sampled coalitions per width
  double sampled_fraction = 1.0;
};

namespace detail {

inline void finalize_plan(CoalitionPlan& plan) {
  std::sort(plan.coalitions.begin(), plan.coalitions.end());
  plan.coalitions.erase(
      std::unique(plan.coalitions.begin(), plan.coalitions.end()),
      plan.coalitions.end());
  plan.width_counts.assign(plan.n_segments + 1, 0);
  for (const Coalition& c : plan.coalitions)
    ++plan.width_counts[c.width()];
  plan.sampled_fraction =
      plan.total_count > 0
          ? static_cast<double>(plan.coalitions.size()) /
                static_cast<double>(plan.total_count)
          : 1.0;
}

}  // namespace detail

inline CoalitionPlan sample_plan(int n, int w_max, int budget,
                                 CoalitionMode mode, std::uint64_t seed) {
  if (budget < 2)
    throw std::invalid_argument(
        "sample_plan: budget must be >= 2 to keep the anchor coalitions");
  if (n < 0) throw std::invalid_argument("sample_plan: n >= 0");
  if (w_max < 1) throw std::invalid_argument("sample_plan: w_max >= 1");

  CoalitionPlan plan;
  plan.n_segments = n;
  plan.w_max = w_max;
  plan.mode = mode;
  plan.budget = budget;
  plan.seed = seed;
  plan.total_count = total_coalition_count(n, w_max, mode);

  const bool enumerable = mode == CoalitionMode::contiguous || n <= 20;
  if (enumerable) {
    std::vector<Coalition> all = mode == CoalitionMode::contiguous
                                     ? enumerate_contiguous(n, w_max)
                                     : enumerate_all_subsets(n, w_max);
    if (static_cast<long long>(all.size()) <= budget) {
      plan.coalitions = std::move(all);
    } else {
      const Coalition empty{};
      const Coalition full = n > 0 ? make_window(0, n) : Coalition{};
      std::vector<Coalition> rest;
      rest.reserve(all.size());
      for (Coalition& c : all)
        if (!(c == empty) && !(c == full)) rest.push_back(std::move(c));
      Rng rng(seed);
      rng.shuffle(rest);
      plan.coalitions.push_back(empty);
      if (n > 0) plan.coalitions.push_back(full);
      const std::size_t take =
          static_cast<std::size_t>(budget) - plan.coalitions.size();
      plan.coalitions.insert(plan.coalitions.end(), rest.begin(),
                             rest.begin() + take);
    }
  } else {
    // all-subsets mode with n too large to enumerate: rejection sampling,
    // capped at 100*M attempts
    Rng rng(seed);
    std::set<std::vector<int>> seen;
    plan.coalitions.push_back(Coalition{});
    seen.insert({});
    plan.coalitions.push_back(make_window(0, n));
    seen.insert(plan.coalitions.back().members);
    std::vector<int> pool(n);
    std::iota(pool.begin(), pool.end(), 0);
    const long long cap = 100LL * budget;
    for (long long attempt = 0;
         attempt < cap &&
         plan.coalitions.size() < static_cast<std::size_t>(budget);
         ++attempt) {
      const int w = 1 + static_cast<int>(rng.below(std::min(w_max, n)));
      for (int i = 0; i < w; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(
                                      rng.below(static_cast<std::uint64_t>(
                                          pool.size() - i)));
        std::swap(pool[i], pool[j]);
      }
      std::vector<int> members(pool.begin(), pool.begin() + w);
      std::sort(members.begin(), members.end());
      if (seen.insert(members).second)
        plan.coalitions.push_back(make_coalition(std::move(members)));
    }
  }

  detail::finalize_plan(plan);
  return plan;
}

// C_j: coalitions S in the plan with j not in S such that, in contiguous
// mode, both S and S u {j} are contiguous. The empty coalition qualifies for
// every j; the full coalition never does since it contains j.
inline std::vector<Coalition> applicable_coalitions(int j,
                                                    const CoalitionPlan& plan) {
  if (j < 0 || j >= plan.n_segments)
    throw std::invalid_argument("applicable_coalitions: segment out of range");
  std::vector<Coalition> out;
  for (const Coalition& s : plan.coalitions) {
    if (s.contains(j)) continue;
    if (plan.mode == CoalitionMode::contiguous) {
      if (!s.contiguous) continue;
      if (!s.empty()) {
        const int lo = s.members.front();
        const int hi = s.members.back();
        if (j != lo - 1 && j != hi + 1) continue;  // union must stay contiguous
      }
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace ospo

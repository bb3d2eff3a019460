#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <vector>

#include "ospo/coalition.hpp"
#include "ospo/segmentation.hpp"

namespace ospo {

using CharacteristicFn = std::function<double(const Coalition&)>;

// Evaluated characteristic values for a plan. `values` is keyed by member
// list; unions needed for marginals but absent from the plan are evaluated
// on demand by owen_values and tallied separately.
struct CoalitionEvaluations {
  CoalitionPlan plan;
  std::map<std::vector<int>, double> values;
  long long n_oracle_calls = 0;    // every characteristic invocation
  long long n_marginal_evals = 0;  // on-demand unions beyond the plan
};

inline CoalitionEvaluations evaluate_plan(const CoalitionPlan& plan,
                                          const CharacteristicFn& fn) {
  CoalitionEvaluations evals;
  evals.plan = plan;
  for (const Coalition& c : plan.coalitions) {
    evals.values.emplace(c.members, fn(c));
    ++evals.n_oracle_calls;
  }
  return evals;
}

namespace detail {

inline double resolve_value(CoalitionEvaluations& evals,
                            const CharacteristicFn& fn,
                            const std::vector<int>& members, bool* on_demand) {
  auto it = evals.values.find(members);
  if (it != evals.values.end()) {
    if (on_demand) *on_demand = false;
    return it->second;
  }
  const double v = fn(make_coalition(members));
  evals.values.emplace(members, v);
  ++evals.n_oracle_calls;
  if (on_demand) *on_demand = true;
  return v;
}

inline std::vector<int> with_member(const std::vector<int>& members, int j) {
  std::vector<int> out;
  out.reserve(members.size() + 1);
  auto pos = std::lower_bound(members.begin(), members.end(), j);
  out.insert(out.end(), members.begin(), pos);
  out.push_back(j);
  out.insert(out.end(), pos, members.end());
  return out;
}

}  // namespace detail

// phi_j = (1/|C_j|) * sum_{S in C_j} [v(S u {j}) - v(S)]. Unions outside the
// plan are evaluated on demand and charged to the marginal-eval budget. A
// segment whose C_j comes back empty falls back to the forced singleton
// marginal v({j}) - v(empty).
inline std::vector<double> owen_values(CoalitionEvaluations& evals,
                                       const CharacteristicFn& fn) {
  const CoalitionPlan& plan = evals.plan;
  std::vector<double> phi(plan.n_segments, 0.0);
  for (int j = 0; j < plan.n_segments; ++j) {
    const std::vector<Coalition> applicable = applicable_coalitions(j, plan);
    bool on_demand = false;
    if (applicable.empty()) {
      const double v_empty =
          detail::resolve_value(evals, fn, {}, &on_demand);
      if (on_demand) ++evals.n_marginal_evals;
      const double v_single =
          detail::resolve_value(evals, fn, {j}, &on_demand);
      if (on_demand) ++evals.n_marginal_evals;
      phi[j] = v_single - v_empty;
      continue;
    }
    double sum = 0.0;
    for (const Coalition& s : applicable) {
      const double v_s = detail::resolve_value(evals, fn, s.members, &on_demand);
      if (on_demand) ++evals.n_marginal_evals;
      const double v_union = detail::resolve_value(
          evals, fn, detail::with_member(s.members, j), &on_demand);
      if (on_demand) ++evals.n_marginal_evals;
      sum += v_union - v_s;
    }
    phi[j] = sum / static_cast<double>(applicable.size());
  }
  return phi;
}

// Exact Shapley values by full subset enumeration:
// phi_j = sum_{S not containing j} |S|!(N-|S|-1)!/N! * [v(S u {j}) - v(S)].
// Verification oracle only; guarded at N <= 12.
inline std::vector<double> shapley_exact(const CharacteristicFn& fn, int n) {
  if (n < 0) throw std::invalid_argument("shapley_exact: n >= 0");
  if (n > 12)
    throw std::invalid_argument("shapley_exact: n > 12 (2^n enumeration)");
  std::vector<double> phi(n, 0.0);
  if (n == 0) return phi;

  std::vector<double> factorial(n + 1, 1.0);
  for (int i = 1; i <= n; ++i) factorial[i] = factorial[i - 1] * i;

  const std::uint32_t end = 1u << n;
  std::vector<double> value(end);
  for (std::uint32_t mask = 0; mask < end; ++mask) {
    std::vector<int> members;
    for (int i = 0; i < n; ++i)
      if (mask & (1u << i)) members.push_back(i);
    value[mask] = fn(make_coalition(std::move(members)));
  }
  for (int j = 0; j < n; ++j) {
    const std::uint32_t bit = 1u << j;
    for (std::uint32_t mask = 0; mask < end; ++mask) {
      if (mask & bit) continue;
      const int s = std::popcount(mask);
      const double weight =
          factorial[s] * factorial[n - s - 1] / factorial[n];
      phi[j] += weight * (value[mask | bit] - value[mask]);
    }
  }
  return phi;
}

// ---------------------------------------------------------------------------
// Token projection and normalization
// ---------------------------------------------------------------------------

struct OwenAttribution {
  std::vector<double> phi_seg;   // per segment
  std::vector<double> phi_tok;   // W^T * phi_seg
  std::vector<double> phi_norm;  // nonnegative, sums to 1 over covered tokens
  std::vector<bool> coverage;    // token covered by some segment

  std::size_t n_tokens() const { return phi_tok.size(); }
  std::size_t covered_count() const {
    return static_cast<std::size_t>(
        std::count(coverage.begin(), coverage.end(), true));
  }
};

// phi_tok = W^T phi_seg. For the normalized weights, negative entries are
// floored at zero; if nothing positive remains the covered tokens share a
// uniform weight. The signed values stay available in phi_tok/phi_seg.
inline OwenAttribution project_and_normalize(const std::vector<double>& phi_seg,
                                             const SegmentWeightMatrix& w) {
  if (phi_seg.size() != w.n_segments)
    throw std::invalid_argument("project_and_normalize: dimension mismatch");
  OwenAttribution attr;
  attr.phi_seg = phi_seg;
  attr.phi_tok.assign(w.n_tokens, 0.0);
  attr.coverage.assign(w.n_tokens, false);
  for (std::size_t t = 0; t < w.n_tokens; ++t) {
    double acc = 0.0;
    double col = 0.0;
    for (std::size_t j = 0; j < w.n_segments; ++j) {
      acc += w.at(j, t) * phi_seg[j];
      col += w.at(j, t);
    }
    attr.phi_tok[t] = acc;
    attr.coverage[t] = col > 0.0;
  }
  attr.phi_norm.assign(w.n_tokens, 0.0);
  double mass = 0.0;
  for (std::size_t t = 0; t < w.n_tokens; ++t)
    if (attr.coverage[t]) mass += std::max(attr.phi_tok[t], 0.0);
  if (mass > 0.0) {
    for (std::size_t t = 0; t < w.n_tokens; ++t)
      if (attr.coverage[t])
        attr.phi_norm[t] = std::max(attr.phi_tok[t], 0.0) / mass;
  } else {
    const std::size_t covered = attr.covered_count();
    if (covered > 0) {
      const double u = 1.0 / static_cast<double>(covered);
      for (std::size_t t = 0; t < w.n_tokens; ++t)
        if (attr.coverage[t]) attr.phi_norm[t] = u;
    }
  }
  return attr;
}

}  // namespace ospo

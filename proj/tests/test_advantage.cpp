#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "ospo/advantage.hpp"
#include "ospo/rng.hpp"
#include "ospo/segmentation.hpp"

using namespace ospo;

namespace {

// Fully covered single-segment attribution with the given normalized weights.
OwenAttribution attr_with_weights(const std::vector<double>& phi_norm) {
  OwenAttribution attr;
  attr.phi_norm = phi_norm;
  attr.phi_tok = phi_norm;
  attr.phi_seg = {1.0};
  attr.coverage.assign(phi_norm.size(), true);
  return attr;
}

std::vector<double> random_simplex(std::size_t n, Rng& rng) {
  std::vector<double> w(n);
  double total = 0.0;
  for (double& x : w) {
    x = -std::log(1.0 - rng.uniform());  // Exp(1) draws
    total += x;
  }
  for (double& x : w) x /= total;
  return w;
}

}  // namespace

TEST_CASE("group advantages, zscore and mean-only") {
  const std::vector<double> z = group_advantages({1.0, 0.0}, AdvantageMode::zscore);
  CHECK_THAT(z[0], Catch::Matchers::WithinAbs(1.0, 1e-12));
  CHECK_THAT(z[1], Catch::Matchers::WithinAbs(-1.0, 1e-12));

  const std::vector<double> flat =
      group_advantages({0.4, 0.4, 0.4}, AdvantageMode::zscore);
  CHECK(flat == std::vector<double>{0.0, 0.0, 0.0});

  const std::vector<double> m =
      group_advantages({0.9, 0.5, 0.1}, AdvantageMode::mean_only);
  CHECK_THAT(m[0], Catch::Matchers::WithinAbs(0.4, 1e-12));
  CHECK_THAT(m[1], Catch::Matchers::WithinAbs(0.0, 1e-12));
  CHECK_THAT(m[2], Catch::Matchers::WithinAbs(-0.4, 1e-12));

  CHECK_THROWS_AS(group_advantages({1.0}, AdvantageMode::zscore),
                  std::invalid_argument);
}

TEST_CASE("proportional redistribution") {
  SECTION("single token is forced to the sequence advantage") {
    const TokenAdvantages adv = redistribute_prop(0.7, attr_with_weights({1.0}));
    CHECK(adv.values == std::vector<double>{0.7});
  }

  SECTION("uniform weights reduce to the uniform rule") {
    const TokenAdvantages adv =
        redistribute_prop(-1.3, attr_with_weights({0.25, 0.25, 0.25, 0.25}));
    for (double v : adv.values)
      CHECK_THAT(v, Catch::Matchers::WithinAbs(-1.3, 1e-12));
  }

  SECTION("worked two-token case") {
    const TokenAdvantages adv =
        redistribute_prop(1.0, attr_with_weights({0.75, 0.25}));
    CHECK_THAT(adv.values[0], Catch::Matchers::WithinAbs(1.5, 1e-12));
    CHECK_THAT(adv.values[1], Catch::Matchers::WithinAbs(0.5, 1e-12));
    CHECK_THAT((adv.values[0] + adv.values[1]) / 2.0,
               Catch::Matchers::WithinAbs(1.0, 1e-12));
  }

  SECTION("uncovered tokens fall back to the sequence advantage") {
    OwenAttribution attr;
    attr.phi_norm = {0.75, 0.25, 0.0};
    attr.phi_tok = {0.3, 0.1, 0.0};
    attr.coverage = {true, true, false};
    const TokenAdvantages adv = redistribute_prop(2.0, attr);
    CHECK_THAT(adv.values[0], Catch::Matchers::WithinAbs(3.0, 1e-12));
    CHECK_THAT(adv.values[1], Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK(adv.values[2] == 2.0);
    // covered-scope mean is preserved
    CHECK_THAT((adv.values[0] + adv.values[1]) / 2.0,
               Catch::Matchers::WithinAbs(2.0, 1e-12));
  }
}

TEST_CASE("rank redistribution") {
  SECTION("distinct values produce the arithmetic ramp") {
    const std::vector<double> phi = {0.1, 0.5, 0.9};
    const TokenAdvantages adv = redistribute_rank(1.0, phi);
    CHECK_THAT(adv.values[0], Catch::Matchers::WithinAbs(0.5, 1e-12));
    CHECK_THAT(adv.values[1], Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK_THAT(adv.values[2], Catch::Matchers::WithinAbs(1.5, 1e-12));
  }

  SECTION("single token") {
    const std::vector<double> phi = {0.4};
    CHECK(redistribute_rank(0.9, phi).values == std::vector<double>{0.9});
  }

  SECTION("ties rank by position") {
    const std::vector<double> phi = {0.2, 0.2, 0.2};
    const TokenAdvantages adv = redistribute_rank(1.0, phi);
    CHECK_THAT(adv.values[0], Catch::Matchers::WithinAbs(0.5, 1e-12));
    CHECK_THAT(adv.values[1], Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK_THAT(adv.values[2], Catch::Matchers::WithinAbs(1.5, 1e-12));
  }

  SECTION("top token weight is 2*A*T/(T+1)") {
    Rng rng(555);
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t t = 2 + rng.below(60);
      std::vector<double> phi(t);
      for (double& p : phi) p = rng.uniform();
      const double a_hat = rng.uniform(0.1, 3.0);
      const TokenAdvantages adv = redistribute_rank(a_hat, phi);
      double top = adv.values[0];
      for (double v : adv.values) top = std::max(top, v);
      REQUIRE_THAT(top, Catch::Matchers::WithinAbs(
                            2.0 * a_hat * static_cast<double>(t) /
                                static_cast<double>(t + 1),
                            1e-9));
    }
  }
}

TEST_CASE("length invariance of prop and rank rules") {
  Rng rng(2025);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t t = 1 + rng.below(512);
    const std::vector<double> phi_norm = random_simplex(t, rng);
    const double a_hat = rng.uniform(-3.0, 3.0);

    const TokenAdvantages prop = redistribute_prop(a_hat, attr_with_weights(phi_norm));
    double mean = 0.0;
    for (double v : prop.values) mean += v;
    mean /= static_cast<double>(t);
    REQUIRE_THAT(mean, Catch::Matchers::WithinAbs(a_hat, 1e-9));

    const TokenAdvantages rank = redistribute_rank(a_hat, phi_norm);
    mean = 0.0;
    for (double v : rank.values) mean += v;
    mean /= static_cast<double>(t);
    REQUIRE_THAT(mean, Catch::Matchers::WithinAbs(a_hat, 1e-9));
  }
}

TEST_CASE("prop rule preserves the weight ordering") {
  Rng rng(808);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t t = 2 + rng.below(30);
    const std::vector<double> phi = random_simplex(t, rng);
    const double a_hat = trial % 2 == 0 ? rng.uniform(0.01, 3.0)
                                        : rng.uniform(-3.0, -0.01);
    const TokenAdvantages adv = redistribute_prop(a_hat, attr_with_weights(phi));
    for (std::size_t i = 0; i < t; ++i)
      for (std::size_t j = 0; j < t; ++j) {
        if (phi[i] <= phi[j]) continue;
        if (a_hat > 0.0)
          REQUIRE(adv.values[i] > adv.values[j]);
        else
          REQUIRE(adv.values[i] < adv.values[j]);
      }
  }
}

TEST_CASE("rank rule ignores the scale of phi") {
  Rng rng(4242);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t t = 2 + rng.below(20);
    std::vector<double> phi(t);
    for (double& p : phi) p = rng.uniform(-1.0, 1.0);
    std::vector<double> scaled = phi;
    const double c = rng.uniform(0.1, 7.0);
    for (double& p : scaled) p *= c;
    const TokenAdvantages a = redistribute_rank(0.8, phi);
    const TokenAdvantages b = redistribute_rank(0.8, scaled);
    REQUIRE(a.values == b.values);
  }
}

TEST_CASE("chebyshev clipping") {
  const std::vector<double> unit_group = {1.0, -1.0};  // population std = 1
  TokenAdvantages adv;
  adv.values = {3.5, -3.5, 0.2};
  adv.sequence_advantage = 1.0;

  SECTION("values clamp to two standard deviations") {
    const TokenAdvantages clipped = clip_redistributed(adv, unit_group);
    CHECK(clipped.values[0] == 2.0);
    CHECK(clipped.values[1] == -2.0);
    CHECK(clipped.values[2] == 0.2);
    CHECK(clipped.rule == RedistributionRule::prop_clip);
  }

  SECTION("inside the interval nothing changes") {
    TokenAdvantages small;
    small.values = {0.5, -0.5};
    const TokenAdvantages clipped = clip_redistributed(small, unit_group);
    CHECK(clipped.values == std::vector<double>{0.5, -0.5});
  }

  SECTION("degenerate group zeroes everything") {
    // identical rewards make group_advantages exactly zero, so sigma is zero
    const std::vector<double> flat_group =
        group_advantages({0.7, 0.7, 0.7}, AdvantageMode::zscore);
    const TokenAdvantages clipped = clip_redistributed(adv, flat_group);
    for (double v : clipped.values) CHECK(v == 0.0);
  }
}

TEST_CASE("uniform advantages") {
  const TokenAdvantages adv = uniform_advantages(-1.0, 4);
  CHECK(adv.values == std::vector<double>{-1.0, -1.0, -1.0, -1.0});
  CHECK(uniform_advantages(0.0, 3).values == std::vector<double>{0.0, 0.0, 0.0});
  double mean = 0.0;
  for (double v : adv.values) mean += v;
  CHECK(mean / 4.0 == -1.0);
}

TEST_CASE("degenerate group produces zero advantages under every rule") {
  const std::vector<double> advs =
      group_advantages({0.3, 0.3, 0.3, 0.3}, AdvantageMode::zscore);
  const double a_hat = advs[0];
  REQUIRE(a_hat == 0.0);
  const OwenAttribution attr = attr_with_weights({0.7, 0.2, 0.1});
  for (double v : redistribute_prop(a_hat, attr).values) CHECK(v == 0.0);
  for (double v : redistribute_rank(a_hat, attr.phi_tok).values) CHECK(v == 0.0);
  for (double v : uniform_advantages(a_hat, 3).values) CHECK(v == 0.0);
  for (double v :
       clip_redistributed(redistribute_prop(a_hat, attr), advs).values)
    CHECK(v == 0.0);
}

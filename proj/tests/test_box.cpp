// Copyright 2026 The nlbox developers
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <random>

#include "nlbox/box.hpp"
#include "nlbox/common.hpp"
#include "nlbox/local_polytope.hpp"

using namespace nlbox;

namespace {

// Independent oracle for the correlation functions: direct summation over
// the table, written against the definition rather than the implementation.
std::array<double, 4> correlations_oracle(const Box& box) {
  std::array<double, 4> e{};
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y) {
      double v = 0.0;
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) v += ((a == b) ? 1.0 : -1.0) * box.p(a, b, x, y);
      e[2 * x + y] = v;
    }
  return e;
}

double marginal_oracle_alice(const Box& box, int a, int x, int y) {
  return box.p(a, 0, x, y) + box.p(a, 1, x, y);
}

Box random_non_signaling_box(std::mt19937_64& rng) {
  const auto& local = local_deterministic_vertices();
  const auto& pr = pr_variant_vertices();
  std::vector<Box> parts;
  std::vector<double> weights;
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double total = 0.0;
  for (const auto& v : local)
    if (coin(rng)) {
      parts.push_back(v);
      weights.push_back(unit(rng));
      total += weights.back();
    }
  for (const auto& v : pr)
    if (coin(rng)) {
      parts.push_back(v);
      weights.push_back(unit(rng));
      total += weights.back();
    }
  if (parts.empty()) {
    parts.push_back(uniform_box());
    weights.push_back(1.0);
    total = 1.0;
  }
  for (double& w : weights) w /= total;
  return mix(parts, weights);
}

}  // namespace

TEST_CASE("validate_box accepts PR and uniform tables, rejects malformed ones") {
  std::array<double, 16> raw{};
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y)
          raw[(((a << 1) | b) << 2) | (x << 1) | y] = ((a ^ b) == (x & y)) ? 0.5 : 0.0;
  const Box pr = validate_box(raw);
  CHECK(approx_equal(pr, pr_box(), 0.0));

  raw.fill(0.25);
  CHECK(approx_equal(validate_box(raw), uniform_box(), 0.0));

  raw[0] = 1.1;  // P(0,0|0,0)
  CHECK_THROWS_AS(validate_box(raw), NormalizationError);

  raw.fill(0.25);
  raw[0] = -0.25;
  CHECK_THROWS_AS(validate_box(raw), NegativeEntryError);
}

TEST_CASE("non-signaling detection") {
  CHECK(is_non_signaling(pr_box()));
  CHECK(is_non_signaling(isotropic_box(0.85)));

  // Alice deterministically outputs Bob's input: a = y.
  const Box signaling = box_from_fn(
      [](int a, int b, int x, int y) { return (a == y) ? 0.5 : 0.0; });
  CHECK_FALSE(is_non_signaling(signaling));
  CHECK_THROWS_AS(marginal_alice(signaling), SignalingBoxError);
}

TEST_CASE("marginals") {
  const auto pr = marginal_alice(pr_box());
  for (int x = 0; x < 2; ++x)
    for (int a = 0; a < 2; ++a) CHECK(pr[x][a] == Catch::Approx(0.5).margin(1e-15));

  const Box det = deterministic_box({0, 0}, {1, 0});
  const auto ma = marginal_alice(det);
  CHECK(ma[0][0] == 1.0);
  CHECK(ma[1][0] == 1.0);

  const Box iso = isotropic_box(0.8);
  for (int a = 0; a < 2; ++a)
    for (int x = 0; x < 2; ++x)
      for (int y = 0; y < 2; ++y)
        CHECK(marginal_oracle_alice(iso, a, x, y) == Catch::Approx(0.5).margin(1e-14));
  const auto mb = marginal_bob(iso);
  for (int y = 0; y < 2; ++y) CHECK(mb[y][0] == Catch::Approx(0.5).margin(1e-14));
}

TEST_CASE("correlation functions match the summation oracle") {
  const CorrelationVector pr = correlations(pr_box());
  CHECK(pr.e00 == Catch::Approx(1.0).margin(1e-15));
  CHECK(pr.e01 == Catch::Approx(1.0).margin(1e-15));
  CHECK(pr.e10 == Catch::Approx(1.0).margin(1e-15));
  CHECK(pr.e11 == Catch::Approx(-1.0).margin(1e-15));

  const CorrelationVector uni = correlations(uniform_box());
  CHECK(uni.e00 == 0.0);
  CHECK(uni.e11 == 0.0);

  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> qdist(0.0, 1.0);
  for (int i = 0; i < 25; ++i) {
    const double q = qdist(rng);
    const Box iso = isotropic_box(q);
    const auto oracle = correlations_oracle(iso);
    const CorrelationVector c = correlations(iso);
    CHECK(c.e00 == Catch::Approx(oracle[0]).margin(1e-14));
    CHECK(c.e01 == Catch::Approx(oracle[1]).margin(1e-14));
    CHECK(c.e10 == Catch::Approx(oracle[2]).margin(1e-14));
    CHECK(c.e11 == Catch::Approx(oracle[3]).margin(1e-14));
    CHECK(c.e00 == Catch::Approx(2.0 * q - 1.0).margin(1e-14));
    CHECK(c.e11 == Catch::Approx(-(2.0 * q - 1.0)).margin(1e-14));
  }
}

TEST_CASE("chsh values") {
  CHECK(chsh(pr_box()).nl == Catch::Approx(4.0).margin(1e-15));
  CHECK(chsh(pr_box()).q_equiv == Catch::Approx(1.0).margin(1e-15));
  CHECK(chsh(uniform_box()).nl == Catch::Approx(0.0).margin(1e-15));
  CHECK(chsh(uniform_box()).q_equiv == Catch::Approx(0.5).margin(1e-15));

  const double q_ts = 0.25 * (2.0 + std::sqrt(2.0));
  CHECK(chsh(isotropic_box(q_ts)).nl == Catch::Approx(2.0 * std::sqrt(2.0)).margin(1e-12));

  // nl = 8q - 4 and q_equiv = q across the isotropic family.
  for (int i = 0; i <= 20; ++i) {
    const double q = 0.5 + 0.025 * i;
    const ChshValue v = chsh(isotropic_box(q));
    CHECK(v.nl == Catch::Approx(8.0 * q - 4.0).margin(1e-12));
    CHECK(v.q_equiv == Catch::Approx(q).margin(1e-13));
  }
}

TEST_CASE("chsh is linear in the table") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    const Box b1 = random_non_signaling_box(rng);
    const Box b2 = random_non_signaling_box(rng);
    const double lam = unit(rng);
    const Box mixed = mix({b1, b2}, {lam, 1.0 - lam});
    CHECK(chsh(mixed).nl ==
          Catch::Approx(lam * chsh(b1).nl + (1.0 - lam) * chsh(b2).nl).margin(1e-12));
  }
}

TEST_CASE("non-signaling boxes are closed under mixtures") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 50; ++i) {
    const Box b = random_non_signaling_box(rng);
    CHECK(is_non_signaling(b, ToleranceProfile::simulated()));
  }
}

TEST_CASE("isotropic_box endpoints and domain") {
  CHECK(approx_equal(isotropic_box(1.0), pr_box(), 0.0));
  CHECK(approx_equal(isotropic_box(0.5), uniform_box(), 0.0));
  CHECK(chsh(isotropic_box(0.75)).nl == Catch::Approx(2.0).margin(1e-14));
  CHECK_THROWS_AS(isotropic_box(1.2), DomainError);
  CHECK_THROWS_AS(isotropic_box(-0.1), DomainError);
}

TEST_CASE("is_isotropic") {
  CHECK(is_isotropic(isotropic_box(0.8)));
  CHECK(is_isotropic(pr_box()));

  // 3/4 PR + 1/4 (a = 0, b = y): E = (1, 0.5, 1, -1), not isotropic.
  const Box skew = mix({pr_box(), deterministic_box({0, 0}, {0, 1})}, {0.75, 0.25});
  const CorrelationVector c = correlations(skew);
  CHECK(c.e00 == Catch::Approx(1.0).margin(1e-14));
  CHECK(c.e01 == Catch::Approx(0.5).margin(1e-14));
  CHECK_FALSE(is_isotropic(skew));

  const Box corr = correlated_error_box(0.9);
  CHECK_FALSE(is_isotropic(corr));
  CHECK(chsh(corr).q_equiv == Catch::Approx(0.9).margin(1e-12));
}

TEST_CASE("canonicalize maps anti-PR to PR and fixes PR") {
  CHECK(approx_equal(canonicalize(anti_pr_box()), pr_box(), 1e-15));
  CHECK(approx_equal(canonicalize(pr_box()), pr_box(), 1e-15));
}

TEST_CASE("canonicalize undoes an output flip on an isotropic box") {
  const Box iso = isotropic_box(0.9);
  const PartyRelabeling flip_alice{0, {1, 1}};
  const PartyRelabeling nothing{0, {0, 0}};
  const Box flipped = relabel(iso, flip_alice, nothing);
  CHECK_FALSE(is_isotropic(flipped));
  CHECK(approx_equal(canonicalize(flipped), iso, 1e-12));
}

TEST_CASE("canonicalize invariants on random non-signaling boxes") {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 40; ++i) {
    const Box b = random_non_signaling_box(rng);
    const Box canon = canonicalize(b);

    CHECK(is_non_signaling(canon, ToleranceProfile::simulated()));
    CHECK(is_local(b) == is_local(canon));

    // Multiset of |E| values is preserved.
    auto abs_sorted = [](const Box& box) {
      const CorrelationVector c = correlations(box);
      std::array<double, 4> v{std::abs(c.e00), std::abs(c.e01), std::abs(c.e10),
                              std::abs(c.e11)};
      std::sort(v.begin(), v.end());
      return v;
    };
    const auto before = abs_sorted(b);
    const auto after = abs_sorted(canon);
    for (int k = 0; k < 4; ++k) CHECK(before[k] == Catch::Approx(after[k]).margin(1e-12));

    // Canonical orientation: dominant sign convention and no relabeling wins.
    const CorrelationVector c = correlations(canon);
    CHECK(c.e00 >= -1e-12);
    CHECK(c.e01 >= -1e-12);
    CHECK(c.e10 >= -1e-12);
    CHECK(chsh(canon).nl >= chsh(b).nl - 1e-12);
    for (const auto& ra : PartyRelabeling::all())
      for (const auto& rb : PartyRelabeling::all())
        CHECK(chsh(relabel(canon, ra, rb)).nl <= chsh(canon).nl + 1e-12);
  }
}

TEST_CASE("classify flags independent, local, signaling") {
  const BoxClass ind = classify(deterministic_box({0, 1}, {1, 1}));
  CHECK_FALSE(ind.signaling);
  CHECK(ind.local);
  CHECK(ind.independent);

  const BoxClass pr = classify(pr_box());
  CHECK_FALSE(pr.signaling);
  CHECK_FALSE(pr.local);
  CHECK_FALSE(pr.independent);

  const Box signaling = box_from_fn(
      [](int a, int b, int x, int y) { return (a == y) ? 0.5 : 0.0; });
  CHECK(classify(signaling).signaling);

  // Local but correlated through shared randomness: not independent.
  const Box shared = mix({deterministic_box({0, 0}, {0, 0}), deterministic_box({1, 1}, {1, 1})},
                         {0.5, 0.5});
  const BoxClass cls = classify(shared);
  CHECK(cls.local);
  CHECK_FALSE(cls.independent);
}

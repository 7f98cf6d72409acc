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

#include <random>
#include <set>

#include "nlbox/local_polytope.hpp"
#include "nlbox/search.hpp"

using namespace nlbox;

namespace {

SearchSpace make_space(int n, bool adaptive = true, OutputClass out = OutputClass::all,
                       bool symmetry = true) {
  SearchSpace s;
  s.n = n;
  s.adaptive = adaptive;
  s.output_class = out;
  s.symmetry_reduction = symmetry;
  return s;
}

Box random_local_box(std::mt19937_64& rng) {
  const auto& vertices = local_deterministic_vertices();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> weights(vertices.size());
  double total = 0.0;
  for (double& w : weights) {
    w = unit(rng);
    total += w;
  }
  for (double& w : weights) w /= total;
  return mix(vertices, weights);
}

}  // namespace

TEST_CASE("wiring counts match the family arithmetic") {
  CHECK(wiring_count(make_space(1)) == 64);               // 4 * 16
  CHECK(wiring_count(make_space(2)) == 16384);            // 4 * 16 * 256
  CHECK(wiring_count(make_space(1, true, OutputClass::xor_affine)) == 32);  // 4 * 8
  CHECK(wiring_count(make_space(2, false)) == 4096);      // 4 * 4 * 256
  CHECK(wiring_count(make_space(3)) == (1ull << 30));

  // The stream yields exactly count wirings, each validating cleanly.
  std::uint64_t seen = 0;
  for_each_wiring(make_space(1), [&](std::uint64_t id, const PartyWiring& w) {
    CHECK(id == seen);
    ++seen;
    Protocol p = Protocol::deterministic(w, w);
    CHECK(validate_protocol(p).empty());
  });
  CHECK(seen == 64);
}

TEST_CASE("decode/encode raw wirings are inverse") {
  for (const SearchSpace space :
       {make_space(1), make_space(2), make_space(2, false),
        make_space(2, true, OutputClass::xor_affine), make_space(3, true, OutputClass::xor_affine)}) {
    const auto family = detail::WiringFamily::make(space);
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<std::uint64_t> ids(0, family.count - 1);
    for (int i = 0; i < 200; ++i) {
      const std::uint64_t id = ids(rng);
      CHECK(family.encode_raw(family.decode_raw(id)) == id);
    }
  }
}

TEST_CASE("relabeling orbits stay inside the family and form a group action") {
  const auto family = detail::WiringFamily::make(make_space(2));
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<std::uint64_t> ids(0, family.count - 1);
  for (int i = 0; i < 100; ++i) {
    const std::uint64_t id = ids(rng);
    std::set<std::uint64_t> orbit;
    for (int flip = 0; flip < 2; ++flip)
      for (int f0 = 0; f0 < 2; ++f0)
        for (int f1 = 0; f1 < 2; ++f1)
          orbit.insert(family.encode_raw(family.relabeled(family.decode_raw(id), flip, f0, f1)));
    CHECK(orbit.count(id) == 1);
    CHECK(orbit.size() <= 8);
    // (flip, 1, 1) is an involution; (flip, 1, 0) squared is the constant
    // output flip, so its fourth power returns home.
    const auto invol = family.relabeled(family.relabeled(family.decode_raw(id), 1, 1, 1), 1, 1, 1);
    CHECK(family.encode_raw(invol) == id);
    auto cycled = family.decode_raw(id);
    for (int rep = 0; rep < 4; ++rep) cycled = family.relabeled(cycled, 1, 1, 0);
    CHECK(family.encode_raw(cycled) == id);
  }
}

TEST_CASE("search on the PR box reaches the algebraic maximum") {
  for (int n : {1, 2}) {
    const SearchReport r = search_max_nl(make_space(n), pr_box());
    CHECK(r.best_q == Catch::Approx(1.0).margin(1e-12));
    CHECK(r.best_nl == Catch::Approx(4.0).margin(1e-12));
  }
}

TEST_CASE("Bell property: local resources cannot be pushed past 3/4") {
  std::mt19937_64 rng(77);
  for (int i = 0; i < 12; ++i) {
    const Box local = random_local_box(rng);
    const SearchReport r = search_max_nl(make_space(1), local);
    CHECK(r.best_q <= 0.75 + 1e-9);
  }
  // n = 2 spot checks (the full grid is the acceptance suite's job).
  for (int i = 0; i < 2; ++i) {
    const Box local = random_local_box(rng);
    const SearchReport r = search_max_nl(make_space(2), local);
    CHECK(r.best_q <= 0.75 + 1e-9);
  }
}

TEST_CASE("no perfection from imperfect isotropic resources") {
  for (double q : {0.9, 0.99}) {
    const SearchReport r = search_max_nl(make_space(1), isotropic_box(q));
    CHECK(r.best_q < 1.0);
    CHECK(r.best_q >= q - 1e-12);  // identity wiring is in the family
  }
}

TEST_CASE("search report fields are consistent") {
  const SearchReport r = search_max_nl(make_space(2), isotropic_box(0.85));
  CHECK(r.resource_q == Catch::Approx(0.85).margin(1e-12));
  CHECK(r.best_q == Catch::Approx(0.5 + r.best_nl / 8.0).margin(1e-15));
  CHECK(r.bound_applicable);
  CHECK(r.bound_q == Catch::Approx(gap(0.85).ceiling).margin(1e-15));
  CHECK(r.bound_respected == (r.best_q <= r.bound_q + 1e-9));
  CHECK(r.best_q <= 1.0 + 1e-12);
  // The reported winner reproduces the reported value through the reference
  // simulation path.
  const Box replay = apply_wiring(r.best_protocol, isotropic_box(0.85));
  CHECK(chsh(canonicalize(replay)).nl == Catch::Approx(r.best_nl).margin(1e-9));
}

TEST_CASE("symmetry reduction does not change the optimum") {
  for (const SearchSpace base :
       {make_space(1), make_space(2, true, OutputClass::xor_affine), make_space(2, false)}) {
    for (double q : {0.8, 0.95}) {
      SearchSpace on = base, off = base;
      on.symmetry_reduction = true;
      off.symmetry_reduction = false;
      const SearchReport r_on = search_max_nl(on, isotropic_box(q));
      const SearchReport r_off = search_max_nl(off, isotropic_box(q));
      CHECK(r_on.best_nl == r_off.best_nl);  // bit-identical by construction
      CHECK(r_on.wirings_examined < r_off.wirings_examined);
    }
  }
}

TEST_CASE("reports are identical across thread counts") {
  for (int threads : {1, 2, 7}) {
    SearchOptions options;
    options.threads = threads;
    const SearchReport r = search_max_nl(make_space(2), isotropic_box(0.8), options);
    static std::string reference;
    const std::string dumped = report_to_json(r).dump();
    if (reference.empty()) reference = dumped;
    CHECK(dumped == reference);
  }
}

TEST_CASE("budget enforcement") {
  CHECK_THROWS_AS(search_max_nl(make_space(3), uniform_box()), SpaceTooLargeError);
  SearchOptions tiny;
  tiny.budget = 1000;
  CHECK_THROWS_AS(search_max_nl(make_space(2), uniform_box(), tiny), SpaceTooLargeError);
}

TEST_CASE("sweep emits one report per grid point and CSV rows") {
  SearchOptions options;
  options.threads = 2;
  const auto reports = sweep(make_space(1), {0.75, 0.8, 1.0}, ResourceKind::isotropic, options);
  REQUIRE(reports.size() == 3);
  CHECK(reports[0].bound_applicable);
  CHECK(reports[1].bound_applicable);
  CHECK_FALSE(reports[2].bound_applicable);  // q = 1 is outside the theorem's domain
  const std::string csv = sweep_to_csv(reports);
  CHECK(csv.rfind("q,best_q,bound_q,respected,count\n", 0) == 0);
  CHECK(csv.find("skipped") != std::string::npos);

  // The correlated-error contrast resource runs end to end; distillability is
  // reported, not asserted.
  const auto contrast =
      sweep(make_space(2), {0.76}, ResourceKind::correlated_error, options);
  CHECK(contrast[0].best_q >= 0.76 - 1e-9);
}

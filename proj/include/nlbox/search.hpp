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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "nlbox/bounds.hpp"
#include "nlbox/box.hpp"
#include "nlbox/common.hpp"
#include "nlbox/wiring.hpp"

namespace nlbox {

enum class OutputClass { all, xor_affine };

struct SearchSpace {
  int n = 2;
  bool adaptive = true;
  OutputClass output_class = OutputClass::all;
  bool symmetry_reduction = true;
};

struct SearchOptions {
  int threads = 0;                       // 0 = hardware concurrency
  std::uint64_t budget = 1ull << 30;     // hard cap on wiring pairs
};

struct SearchReport {
  SearchSpace space;
  double resource_q = 0.0;
  double best_nl = 0.0;
  double best_q = 0.0;
  Protocol best_protocol;
  std::uint64_t wirings_examined = 0;  // wiring pairs
  bool bound_applicable = false;
  double bound_q = std::numeric_limits<double>::quiet_NaN();
  bool bound_respected = true;
};

// ---------------------------------------------------------------------------
// Per-side wiring family: identity usage order, one canonical id per wiring.
// Ids decode by mixed radix, input positions first (position 0 fastest), the
// output function last.
// ---------------------------------------------------------------------------

namespace detail {

struct RawWiring {
  std::array<std::uint32_t, 3> fin{};  // truth table bits, position k has 2^(1+k) bits
  std::uint32_t fout = 0;              // 2^(1+n) bits
};

struct WiringFamily {
  int n = 1;
  bool adaptive = true;
  OutputClass out_class = OutputClass::all;
  std::array<std::uint64_t, 3> input_radix{};
  std::uint64_t output_radix = 0;
  std::uint64_t count = 0;

  static WiringFamily make(const SearchSpace& space) {
    if (space.n < 1 || space.n > 3)
      throw SpaceTooLargeError("search supports n in {1,2,3}");
    WiringFamily f;
    f.n = space.n;
    f.adaptive = space.adaptive;
    f.out_class = space.output_class;
    f.count = 1;
    for (int k = 0; k < f.n; ++k) {
      f.input_radix[k] = space.adaptive ? (1ull << (1u << (1 + k))) : 4ull;
      f.count *= f.input_radix[k];
    }
    f.output_radix = (space.output_class == OutputClass::all)
                         ? (1ull << (1u << (1 + f.n)))
                         : (1ull << (f.n + 2));
    f.count *= f.output_radix;
    return f;
  }

  RawWiring decode_raw(std::uint64_t id) const {
    RawWiring w;
    for (int k = 0; k < n; ++k) {
      const std::uint64_t digit = id % input_radix[k];
      id /= input_radix[k];
      if (adaptive) {
        w.fin[k] = static_cast<std::uint32_t>(digit);
      } else {
        // digit encodes g(x); pad to the adaptive arity ignoring outcomes
        std::uint32_t bits = 0;
        for (std::uint32_t i = 0; i < (1u << (1 + k)); ++i)
          bits |= ((digit >> (i & 1)) & 1u) << i;
        w.fin[k] = bits;
      }
    }
    if (out_class == OutputClass::all) {
      w.fout = static_cast<std::uint32_t>(id);
    } else {
      // id bit 0: constant; bit (1+t): coefficient of argument t
      const std::uint32_t c = static_cast<std::uint32_t>(id) & 1u;
      const std::uint32_t mask = static_cast<std::uint32_t>(id >> 1);
      std::uint32_t bits = 0;
      for (std::uint32_t i = 0; i < (1u << (1 + n)); ++i)
        bits |= (c ^ (std::popcount(i & mask) & 1u)) << i;
      w.fout = bits;
    }
    return w;
  }

  std::uint64_t encode_raw(const RawWiring& w) const {
    std::uint64_t id = 0;
    if (out_class == OutputClass::all) {
      id = w.fout;
    } else {
      const std::uint32_t c = w.fout & 1u;
      std::uint32_t mask = 0;
      for (int t = 0; t <= n; ++t) mask |= (((w.fout >> (1u << t)) & 1u) ^ c) << t;
      std::uint32_t bits = 0;
      for (std::uint32_t i = 0; i < (1u << (1 + n)); ++i)
        bits |= (c ^ (std::popcount(i & mask) & 1u)) << i;
      if (bits != w.fout) throw InternalError("encode_raw: output table is not xor-affine");
      id = (static_cast<std::uint64_t>(mask) << 1) | c;
    }
    for (int k = n - 1; k >= 0; --k) {
      std::uint64_t digit;
      if (adaptive) {
        digit = w.fin[k];
      } else {
        digit = ((w.fin[k] >> 1) & 1u) << 1 | (w.fin[k] & 1u);
      }
      id = id * input_radix[k] + digit;
    }
    return id;
  }

  PartyWiring decode(std::uint64_t id) const {
    const RawWiring raw = decode_raw(id);
    PartyWiring w;
    w.n = n;
    for (int k = 0; k < n; ++k) {
      w.order.push_back(k);
      w.input_fns.emplace_back(1 + k, raw.fin[k]);
    }
    w.output_fn = TruthTable(1 + n, raw.fout);
    return w;
  }

  /// Protocol-level party relabeling acting on a wiring: flip the party input
  /// everywhere, XOR the output with a function of the (new) input. Keeps
  /// every enumerated family closed.
  RawWiring relabeled(const RawWiring& w, int input_flip, int f0, int f1) const {
    RawWiring out;
    for (int k = 0; k < n; ++k) {
      std::uint32_t bits = 0;
      for (std::uint32_t i = 0; i < (1u << (1 + k)); ++i)
        bits |= ((w.fin[k] >> (i ^ static_cast<std::uint32_t>(input_flip))) & 1u) << i;
      out.fin[k] = bits;
    }
    std::uint32_t bits = 0;
    for (std::uint32_t i = 0; i < (1u << (1 + n)); ++i) {
      const std::uint32_t flipped = (w.fout >> (i ^ static_cast<std::uint32_t>(input_flip))) & 1u;
      bits |= (flipped ^ static_cast<std::uint32_t>((i & 1) ? f1 : f0)) << i;
    }
    out.fout = bits;
    return out;
  }

  bool is_orbit_representative(std::uint64_t id) const {
    const RawWiring w = decode_raw(id);
    for (int flip = 0; flip < 2; ++flip)
      for (int f0 = 0; f0 < 2; ++f0)
        for (int f1 = 0; f1 < 2; ++f1) {
          if (flip == 0 && f0 == 0 && f1 == 0) continue;
          if (encode_raw(relabeled(w, flip, f0, f1)) < id) return false;
        }
    return true;
  }
};

/// Precomputed per-wiring behavior: for every (party input, outcome tuple)
/// the packed box-input vector and the final output bit.
struct SideTables {
  int n;
  std::uint32_t tuples;
  std::vector<std::uint8_t> inputs;    // [w][x][tuple]
  std::vector<std::uint8_t> out_bits;  // [w][x][tuple]

  static SideTables build(const WiringFamily& family) {
    SideTables t;
    t.n = family.n;
    t.tuples = 1u << family.n;
    t.inputs.resize(family.count * 2 * t.tuples);
    t.out_bits.resize(family.count * 2 * t.tuples);
    for (std::uint64_t w = 0; w < family.count; ++w) {
      const RawWiring raw = family.decode_raw(w);
      for (std::uint32_t x = 0; x < 2; ++x)
        for (std::uint32_t tup = 0; tup < t.tuples; ++tup) {
          std::uint32_t history = x;
          std::uint32_t box_inputs = 0;
          for (int k = 0; k < family.n; ++k) {
            const std::uint32_t mask = (1u << (1 + k)) - 1;
            box_inputs |= ((raw.fin[k] >> (history & mask)) & 1u) << k;
            history |= ((tup >> k) & 1u) << (1 + k);
          }
          const std::size_t at = (w * 2 + x) * t.tuples + tup;
          t.inputs[at] = static_cast<std::uint8_t>(box_inputs);
          t.out_bits[at] = static_cast<std::uint8_t>((raw.fout >> (x | (tup << 1))) & 1u);
        }
    }
    return t;
  }
};

/// M[xin][a_tuple][yin][b_tuple] = product of the resource's conditionals.
inline std::vector<double> resource_tensor(const Box& box, int n) {
  const std::uint32_t tuples = 1u << n;
  std::vector<double> m(static_cast<std::size_t>(tuples) * tuples * tuples * tuples);
  for (std::uint32_t xin = 0; xin < tuples; ++xin)
    for (std::uint32_t at = 0; at < tuples; ++at)
      for (std::uint32_t yin = 0; yin < tuples; ++yin)
        for (std::uint32_t bt = 0; bt < tuples; ++bt) {
          double prod = 1.0;
          for (int k = 0; k < n; ++k)
            prod *= box.p((at >> k) & 1, (bt >> k) & 1, (xin >> k) & 1, (yin >> k) & 1);
          m[(((static_cast<std::size_t>(xin) * tuples + at) * tuples) + yin) * tuples + bt] =
              prod;
        }
  return m;
}

struct PairBest {
  double nl = -std::numeric_limits<double>::infinity();
  std::uint64_t alice = 0;
  std::uint64_t bob = 0;

  void offer(double nl_cand, std::uint64_t wa, std::uint64_t wb) {
    if (nl_cand > nl || (nl_cand == nl && (wa < alice || (wa == alice && wb < bob)))) {
      nl = nl_cand;
      alice = wa;
      bob = wb;
    }
  }
  void merge(const PairBest& other) { offer(other.nl, other.alice, other.bob); }
};

}  // namespace detail

inline std::uint64_t wiring_count(const SearchSpace& space) {
  return detail::WiringFamily::make(space).count;
}

inline PartyWiring decode_wiring(const SearchSpace& space, std::uint64_t id) {
  const auto family = detail::WiringFamily::make(space);
  if (id >= family.count) throw DomainError("decode_wiring: id out of range");
  return family.decode(id);
}

/// Streams every wiring of the family exactly once in canonical id order.
inline void for_each_wiring(const SearchSpace& space,
                            const std::function<void(std::uint64_t, const PartyWiring&)>& fn,
                            std::uint64_t budget = 1ull << 30) {
  const auto family = detail::WiringFamily::make(space);
  if (family.count > budget)
    throw SpaceTooLargeError("wiring family of size " + std::to_string(family.count) +
                             " exceeds the enumeration budget");
  for (std::uint64_t id = 0; id < family.count; ++id) fn(id, family.decode(id));
}

/// Exhaustive maximum of chsh(canonicalize(output box)) over all enumerated
/// wiring pairs. Deterministic for every thread count: ties break to the
/// lexicographically smallest (alice id, bob id).
inline SearchReport search_max_nl(const SearchSpace& space, const Box& resource,
                                  const SearchOptions& options = {}) {
  if (!is_non_signaling(resource, ToleranceProfile::simulated()))
    throw SignalingResourceError("search resources must be non-signaling");
  const auto family = detail::WiringFamily::make(space);
  const std::uint64_t pair_count = family.count * family.count;
  if (family.count != 0 && pair_count / family.count != family.count)
    throw SpaceTooLargeError("wiring pair space overflows");
  if (pair_count > options.budget)
    throw SpaceTooLargeError("wiring pair space of size " + std::to_string(pair_count) +
                             " exceeds the budget of " + std::to_string(options.budget) +
                             " (override with a larger budget and a restricted family)");

  const detail::SideTables tables = detail::SideTables::build(family);
  const std::vector<double> tensor = detail::resource_tensor(resource, space.n);
  const int n = space.n;
  const std::uint32_t tuples = tables.tuples;

  std::vector<std::uint64_t> alice_ids;
  if (space.symmetry_reduction) {
    for (std::uint64_t id = 0; id < family.count; ++id)
      if (family.is_orbit_representative(id)) alice_ids.push_back(id);
  } else {
    alice_ids.resize(family.count);
    for (std::uint64_t id = 0; id < family.count; ++id) alice_ids[id] = id;
  }

  int threads = options.threads > 0 ? options.threads
                                    : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, 64));

  // Outer loop over Bob wirings: per wb, fold Bob's side into
  // bdot[y][xin][a_tuple] = sum_bt (-1)^{sb} M[xin][a_tuple][yin][bt], then
  // every Alice candidate costs 4 * 2^n fused accumulations.
  std::vector<detail::PairBest> best_per_thread(threads);
  std::vector<std::uint64_t> examined_per_thread(threads, 0);
  auto worker = [&](int tid) {
    detail::PairBest local;
    std::uint64_t examined = 0;
    std::vector<double> bdot(static_cast<std::size_t>(2) * tuples * tuples);
    for (std::uint64_t wb = tid; wb < family.count; wb += threads) {
      const std::uint8_t* ib = &tables.inputs[(wb * 2) * tuples];
      const std::uint8_t* ob = &tables.out_bits[(wb * 2) * tuples];
      for (std::uint32_t y = 0; y < 2; ++y)
        for (std::uint32_t xin = 0; xin < tuples; ++xin)
          for (std::uint32_t at = 0; at < tuples; ++at) {
            double acc = 0.0;
            const std::size_t base =
                ((static_cast<std::size_t>(xin) * tuples + at) * tuples) * tuples;
            for (std::uint32_t bt = 0; bt < tuples; ++bt) {
              const double v = tensor[base + static_cast<std::size_t>(ib[y * tuples + bt]) * tuples + bt];
              acc += ob[y * tuples + bt] ? -v : v;
            }
            bdot[(y * tuples + xin) * tuples + at] = acc;
          }
      for (const std::uint64_t wa : alice_ids) {
        const std::uint8_t* ia = &tables.inputs[(wa * 2) * tuples];
        const std::uint8_t* oa = &tables.out_bits[(wa * 2) * tuples];
        double e[4];
        for (std::uint32_t x = 0; x < 2; ++x)
          for (std::uint32_t y = 0; y < 2; ++y) {
            double acc = 0.0;
            for (std::uint32_t at = 0; at < tuples; ++at) {
              const double v = bdot[(y * tuples + ia[x * tuples + at]) * tuples + at];
              acc += oa[x * tuples + at] ? -v : v;
            }
            e[x * 2 + y] = acc;
          }
        const double sum = e[0] + e[1] + e[2] + e[3];
        double nl = 0.0;
        for (int j = 0; j < 4; ++j) nl = std::max(nl, std::abs(sum - 2.0 * e[j]));
        local.offer(nl, wa, wb);
        ++examined;
      }
    }
    best_per_thread[tid] = local;
    examined_per_thread[tid] = examined;
  };
  std::vector<std::thread> pool;
  for (int tid = 0; tid < threads; ++tid) pool.emplace_back(worker, tid);
  for (auto& th : pool) th.join();

  detail::PairBest best;
  std::uint64_t examined = 0;
  for (int tid = 0; tid < threads; ++tid) {
    best.merge(best_per_thread[tid]);
    examined += examined_per_thread[tid];
  }

  SearchReport report;
  report.space = space;
  report.resource_q = chsh(resource).q_equiv;
  report.best_nl = best.nl;
  report.best_q = 0.5 + best.nl / 8.0;
  report.best_protocol =
      Protocol::deterministic(family.decode(best.alice), family.decode(best.bob));
  report.wirings_examined = examined;

  // Cross-check the kernel against the reference simulation path.
  const Box check = apply_wiring(report.best_protocol, resource);
  if (std::abs(chsh(canonicalize(check)).nl - best.nl) > 1e-9)
    throw InternalError("search kernel disagrees with apply_wiring on the winning pair");

  if (report.resource_q >= bell_q() - 1e-12 && report.resource_q <= tsirelson_q() + 1e-12) {
    report.bound_applicable = true;
    report.bound_q = gap(report.resource_q).ceiling;
    report.bound_respected = report.best_q <= report.bound_q + 1e-9;
  }
  return report;
}

enum class ResourceKind { isotropic, correlated_error };

inline std::vector<SearchReport> sweep(const SearchSpace& space, const std::vector<double>& grid,
                                       ResourceKind kind = ResourceKind::isotropic,
                                       const SearchOptions& options = {}) {
  std::vector<SearchReport> reports;
  reports.reserve(grid.size());
  for (double q : grid) {
    const Box resource =
        kind == ResourceKind::isotropic ? isotropic_box(q) : correlated_error_box(q);
    reports.push_back(search_max_nl(space, resource, options));
  }
  return reports;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline nlohmann::json report_to_json(const SearchReport& r) {
  nlohmann::json j;
  j["space"] = {{"n", r.space.n},
                {"adaptive", r.space.adaptive},
                {"family", r.space.output_class == OutputClass::all ? "all" : "xor-affine"},
                {"symmetry_reduction", r.space.symmetry_reduction}};
  j["resource_q"] = r.resource_q;
  j["best_nl"] = r.best_nl;
  j["best_q"] = r.best_q;
  j["wirings_examined"] = r.wirings_examined;
  if (r.bound_applicable) {
    j["bound_q"] = r.bound_q;
    j["bound_respected"] = r.bound_respected;
  } else {
    j["bound_q"] = nullptr;
    j["bound_respected"] = nullptr;
  }
  j["best_protocol"] = protocol_to_json(r.best_protocol);
  return j;
}

inline std::string sweep_to_csv(const std::vector<SearchReport>& reports) {
  std::string out = "q,best_q,bound_q,respected,count\n";
  char line[256];
  for (const auto& r : reports) {
    if (r.bound_applicable) {
      std::snprintf(line, sizeof(line), "%.12g,%.12g,%.12g,%s,%llu\n", r.resource_q, r.best_q,
                    r.bound_q, r.bound_respected ? "true" : "false",
                    static_cast<unsigned long long>(r.wirings_examined));
    } else {
      std::snprintf(line, sizeof(line), "%.12g,%.12g,,skipped,%llu\n", r.resource_q, r.best_q,
                    static_cast<unsigned long long>(r.wirings_examined));
    }
    out += line;
  }
  return out;
}

}  // namespace nlbox

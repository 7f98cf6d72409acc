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
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nlbox/box.hpp"
#include "nlbox/common.hpp"

namespace nlbox {

// ---------------------------------------------------------------------------
// Boolean functions as truth tables. Bit i of the table is the value on the
// argument assignment whose j-th variable equals bit j of i (variable 0 is
// the least significant bit).
// ---------------------------------------------------------------------------

class TruthTable {
public:
  TruthTable() = default;
  TruthTable(int arity, std::uint64_t bits) : arity_(arity) {
    words_.assign(word_count(), 0);
    words_[0] = (arity >= 6) ? bits : (bits & ((1ULL << (1u << arity)) - 1));
  }

  static TruthTable of(int arity, const std::function<int(std::uint32_t)>& fn) {
    TruthTable t(arity, 0);
    for (std::uint32_t i = 0; i < (1u << arity); ++i)
      if (fn(i)) t.set(i);
    return t;
  }

  int arity() const { return arity_; }
  std::size_t size() const { return std::size_t(1) << arity_; }

  bool eval(std::uint32_t args) const {
    return (words_[args >> 6] >> (args & 63)) & 1ULL;
  }
  void set(std::uint32_t args) { words_[args >> 6] |= 1ULL << (args & 63); }

  bool operator==(const TruthTable& o) const = default;

  /// Hex encoding (most significant nibble first), width fixed by the arity.
  std::string to_hex() const {
    const std::size_t nibbles = std::max<std::size_t>(1, size() / 4);
    std::string out = "0x";
    for (std::size_t i = nibbles; i-- > 0;) {
      const std::uint64_t nib = (words_[(i * 4) >> 6] >> ((i * 4) & 63)) & 0xF;
      out.push_back("0123456789abcdef"[nib]);
    }
    return out;
  }

  static TruthTable from_hex(int arity, const std::string& hex) {
    TruthTable t(arity, 0);
    std::size_t start = hex.rfind("0x", 0) == 0 ? 2 : 0;
    std::size_t pos = 0;
    for (std::size_t i = hex.size(); i-- > start; ++pos) {
      const char c = hex[i];
      std::uint64_t nib = 0;
      if (c >= '0' && c <= '9') nib = c - '0';
      else if (c >= 'a' && c <= 'f') nib = c - 'a' + 10;
      else if (c >= 'A' && c <= 'F') nib = c - 'A' + 10;
      else throw DomainError("truth table: invalid hex digit");
      if (4 * pos < t.size()) t.words_[(pos * 4) >> 6] |= nib << ((pos * 4) & 63);
      else if (nib != 0) throw DomainError("truth table: hex string too wide for arity");
    }
    return t;
  }

private:
  std::size_t word_count() const { return (size() + 63) / 64; }

  int arity_ = 0;
  std::vector<std::uint64_t> words_ = {0};
};

// ---------------------------------------------------------------------------
// One party's adaptive circuit over n box terminals.
//
// order[k] is the box used at step k. input_fns[k] maps (party input, the
// k earlier outcomes in usage order) to that box's input; output_fn maps
// (party input, all n outcomes in box-index order) to the final output bit.
// ---------------------------------------------------------------------------

struct PartyWiring {
  int n = 1;
  std::vector<int> order;
  std::vector<TruthTable> input_fns;
  TruthTable output_fn;

  bool operator==(const PartyWiring&) const = default;

  static PartyWiring identity() {
    PartyWiring w;
    w.n = 1;
    w.order = {0};
    w.input_fns = {TruthTable(1, 0b10)};
    w.output_fn = TruthTable(2, 0b1100);
    return w;
  }

  /// x_k = x for every box, output = XOR of all outcomes.
  static PartyWiring xor_all(int n) {
    PartyWiring w;
    w.n = n;
    w.order.resize(n);
    std::iota(w.order.begin(), w.order.end(), 0);
    for (int k = 0; k < n; ++k)
      w.input_fns.push_back(TruthTable::of(1 + k, [](std::uint32_t args) { return args & 1; }));
    w.output_fn = TruthTable::of(1 + n, [n](std::uint32_t args) {
      int parity = 0;
      for (int j = 0; j < n; ++j) parity ^= (args >> (1 + j)) & 1;
      return parity;
    });
    return w;
  }
};

struct ProtocolBranch {
  double weight = 1.0;
  PartyWiring alice;
  PartyWiring bob;

  bool operator==(const ProtocolBranch&) const = default;
};

/// Non-locality distillation protocol: a convex mixture of deterministic
/// wiring pairs over the same number of boxes.
struct Protocol {
  int n = 1;
  std::vector<ProtocolBranch> branches;

  bool operator==(const Protocol&) const = default;

  static Protocol deterministic(PartyWiring alice, PartyWiring bob) {
    Protocol p;
    p.n = alice.n;
    p.branches.push_back({1.0, std::move(alice), std::move(bob)});
    return p;
  }

  static Protocol identity() {
    return deterministic(PartyWiring::identity(), PartyWiring::identity());
  }
};

/// Two-branch isotropizing twirl: with probability 1/2 do nothing, otherwise
/// Alice flips her input bit and Bob flips his output bit when his input is 1.
/// Permutes the correlation functions as E00->E10, E01->-E11, E10->E00,
/// E11->-E01.
inline Protocol twirl_protocol() {
  Protocol p;
  p.n = 1;
  p.branches.push_back({0.5, PartyWiring::identity(), PartyWiring::identity()});
  PartyWiring alice = PartyWiring::identity();
  alice.input_fns = {TruthTable(1, 0b01)};  // x -> x ^ 1
  PartyWiring bob = PartyWiring::identity();
  bob.output_fn = TruthTable(2, 0b0110);  // (y, o) -> o ^ y
  p.branches.push_back({0.5, alice, bob});
  return p;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct Violation {
  std::string code;
  std::string detail;
};

namespace detail {

inline void validate_party(const PartyWiring& w, int n, const std::string& who,
                           std::vector<Violation>& out) {
  if (w.n != n)
    out.push_back({"ArityMismatch", who + ": wiring declares " + std::to_string(w.n) +
                                        " boxes, protocol has " + std::to_string(n)});
  std::vector<int> seen(n, 0);
  bool perm = static_cast<int>(w.order.size()) == n;
  if (perm)
    for (int j : w.order) {
      if (j < 0 || j >= n || seen[j]++) {
        perm = false;
        break;
      }
    }
  if (!perm) out.push_back({"OrderError", who + ": order is not a permutation of the boxes"});
  if (static_cast<int>(w.input_fns.size()) != n) {
    out.push_back({"ArityMismatch", who + ": expected " + std::to_string(n) + " input functions"});
  } else {
    for (int k = 0; k < n; ++k) {
      if (w.input_fns[k].arity() > 1 + k)
        out.push_back({"CausalityViolation",
                       who + ": input function at position " + std::to_string(k + 1) +
                           " reads outcomes of boxes it has not used yet"});
      else if (w.input_fns[k].arity() < 1 + k)
        out.push_back({"ArityMismatch", who + ": input function at position " +
                                            std::to_string(k + 1) + " has arity " +
                                            std::to_string(w.input_fns[k].arity()) +
                                            ", expected " + std::to_string(1 + k)});
    }
  }
  if (w.output_fn.arity() != 1 + n)
    out.push_back({"ArityMismatch", who + ": output function arity must be " +
                                        std::to_string(1 + n)});
}

}  // namespace detail

inline std::vector<Violation> validate_protocol(const Protocol& p) {
  std::vector<Violation> out;
  if (p.n < 1) out.push_back({"ArityMismatch", "protocol must use at least one box"});
  if (p.branches.empty()) {
    out.push_back({"WeightSumError", "protocol has no branches"});
    return out;
  }
  double weight_sum = 0.0;
  for (std::size_t i = 0; i < p.branches.size(); ++i) {
    const auto& br = p.branches[i];
    if (br.weight < 0)
      out.push_back({"WeightSumError", "branch " + std::to_string(i) + " has negative weight"});
    weight_sum += br.weight;
    const std::string tag = "branch " + std::to_string(i);
    detail::validate_party(br.alice, p.n, tag + " alice", out);
    detail::validate_party(br.bob, p.n, tag + " bob", out);
  }
  if (std::abs(weight_sum - 1.0) > 1e-12)
    out.push_back({"WeightSumError", "branch weights sum to " + std::to_string(weight_sum)});
  return out;
}

inline void require_valid(const Protocol& p) {
  const auto violations = validate_protocol(p);
  if (violations.empty()) return;
  const auto& v = violations.front();
  if (v.code == "CausalityViolation") throw CausalityViolationError(v.detail);
  if (v.code == "WeightSumError") throw WeightSumError(v.detail);
  throw ArityMismatchError(v.detail);
}

// ---------------------------------------------------------------------------
// Exact simulation
// ---------------------------------------------------------------------------

namespace detail {

/// Given the party input and the full outcome tuple (bit j = outcome of box
/// j), returns the packed box-input vector and the final output bit.
inline std::pair<std::uint32_t, int> run_party(const PartyWiring& w, int input_bit,
                                               std::uint32_t outcomes) {
  std::uint32_t box_inputs = 0;
  std::uint32_t history = static_cast<std::uint32_t>(input_bit);
  for (int k = 0; k < w.n; ++k) {
    const int j = w.order[k];
    const std::uint32_t mask = (1u << (1 + k)) - 1;
    const int in = w.input_fns[k].eval(history & mask);
    box_inputs |= static_cast<std::uint32_t>(in) << j;
    history |= ((outcomes >> j) & 1u) << (1 + k);
  }
  const int out = w.output_fn.eval(static_cast<std::uint32_t>(input_bit) | (outcomes << 1));
  return {box_inputs, out};
}

}  // namespace detail

/// Exact output box of a protocol: per protocol input (x,y), every joint
/// outcome tuple of the n boxes is enumerated and weighted by the product of
/// the boxes' conditional probabilities at the adaptively computed inputs.
inline Box apply_wiring(const Protocol& p, const std::vector<Box>& resources,
                        ToleranceProfile tol = ToleranceProfile::simulated()) {
  require_valid(p);
  if (static_cast<int>(resources.size()) != p.n)
    throw ResourceMismatchError("protocol uses " + std::to_string(p.n) + " boxes, got " +
                                std::to_string(resources.size()));
  for (const Box& r : resources)
    if (!is_non_signaling(r, tol))
      throw SignalingResourceError("resource box is signaling; wirings require non-signaling boxes");

  const int n = p.n;
  const std::uint32_t tuples = 1u << n;
  Box out;
  out.table().fill(0.0);
  for (const ProtocolBranch& br : p.branches) {
    for (int x = 0; x < 2; ++x)
      for (int y = 0; y < 2; ++y)
        for (std::uint32_t oa = 0; oa < tuples; ++oa) {
          const auto [xin, a] = detail::run_party(br.alice, x, oa);
          for (std::uint32_t ob = 0; ob < tuples; ++ob) {
            const auto [yin, b] = detail::run_party(br.bob, y, ob);
            double prob = br.weight;
            for (int j = 0; j < n && prob != 0.0; ++j)
              prob *= resources[j].p((oa >> j) & 1, (ob >> j) & 1, (xin >> j) & 1, (yin >> j) & 1);
            out.at(a, b, x, y) += prob;
          }
        }
  }
  return out;
}

/// Convenience: protocol applied to n copies of the same resource.
inline Box apply_wiring(const Protocol& p, const Box& resource,
                        ToleranceProfile tol = ToleranceProfile::simulated()) {
  return apply_wiring(p, std::vector<Box>(p.n, resource), tol);
}

// ---------------------------------------------------------------------------
// Composition: the outer protocol consumes the boxes produced by the inner
// protocols. The result is a flat protocol over the sum of the inner arities
// whose output box equals the nested application.
// ---------------------------------------------------------------------------

namespace detail {

struct NestedParty {
  const PartyWiring* outer;
  std::vector<const PartyWiring*> inners;
  std::vector<int> offsets;
  int total = 0;

  /// Evaluates the whole nested circuit on a global outcome tuple: fills the
  /// packed global box-input vector and returns the final output bit.
  int run(int input_bit, std::uint64_t outcomes, std::uint64_t& global_inputs) const {
    global_inputs = 0;
    const int m = outer->n;
    std::uint32_t history = static_cast<std::uint32_t>(input_bit);
    std::uint32_t outer_outcomes = 0;
    for (int k = 0; k < m; ++k) {
      const int j = outer->order[k];
      const std::uint32_t mask = (1u << (1 + k)) - 1;
      const int u = outer->input_fns[k].eval(history & mask);
      const std::uint32_t slice =
          static_cast<std::uint32_t>((outcomes >> offsets[j]) & ((1u << inners[j]->n) - 1));
      const auto [inner_inputs, a_j] = run_party(*inners[j], u, slice);
      global_inputs |= static_cast<std::uint64_t>(inner_inputs) << offsets[j];
      outer_outcomes |= static_cast<std::uint32_t>(a_j) << j;
      history |= static_cast<std::uint32_t>(a_j) << (1 + k);
    }
    return outer->output_fn.eval(static_cast<std::uint32_t>(input_bit) | (outer_outcomes << 1));
  }
};

inline PartyWiring compose_party(const PartyWiring& outer,
                                 const std::vector<const PartyWiring*>& inners) {
  NestedParty nested;
  nested.outer = &outer;
  nested.inners = inners;
  nested.offsets.resize(inners.size());
  int total = 0;
  for (std::size_t j = 0; j < inners.size(); ++j) {
    nested.offsets[j] = total;
    total += inners[j]->n;
  }
  nested.total = total;
  if (total > 20) throw SpaceTooLargeError("composed protocol would exceed 20 boxes per side");

  PartyWiring composed;
  composed.n = total;
  for (int k = 0; k < outer.n; ++k) {
    const int j = outer.order[k];
    for (int t : inners[j]->order) composed.order.push_back(nested.offsets[j] + t);
  }
  // The input function at composed position p reproduces the nested circuit's
  // decision for that box from (party input, the p earlier outcomes).
  for (int pos = 0; pos < total; ++pos) {
    const int box = composed.order[pos];
    composed.input_fns.push_back(TruthTable::of(1 + pos, [&](std::uint32_t args) {
      std::uint64_t outcomes = 0;
      for (int t = 0; t < pos; ++t) outcomes |= std::uint64_t((args >> (1 + t)) & 1) << composed.order[t];
      std::uint64_t inputs = 0;
      nested.run(args & 1, outcomes, inputs);
      return static_cast<int>((inputs >> box) & 1);
    }));
  }
  composed.output_fn = TruthTable::of(1 + total, [&](std::uint32_t args) {
    std::uint64_t inputs = 0;
    return nested.run(args & 1, args >> 1, inputs);
  });
  return composed;
}

}  // namespace detail

inline Protocol compose(const Protocol& outer, const std::vector<Protocol>& inners) {
  require_valid(outer);
  if (static_cast<int>(inners.size()) != outer.n)
    throw ArityMismatchError("compose: outer protocol uses " + std::to_string(outer.n) +
                             " boxes, got " + std::to_string(inners.size()) + " inner protocols");
  for (const Protocol& p : inners) require_valid(p);

  Protocol out;
  out.n = 0;
  for (const Protocol& p : inners) out.n += p.n;

  // Cartesian product of branch choices; weights multiply.
  std::vector<std::size_t> choice(inners.size(), 0);
  for (const ProtocolBranch& ob : outer.branches) {
    std::fill(choice.begin(), choice.end(), 0);
    while (true) {
      double weight = ob.weight;
      std::vector<const PartyWiring*> in_alice, in_bob;
      for (std::size_t j = 0; j < inners.size(); ++j) {
        const ProtocolBranch& ib = inners[j].branches[choice[j]];
        weight *= ib.weight;
        in_alice.push_back(&ib.alice);
        in_bob.push_back(&ib.bob);
      }
      out.branches.push_back({weight, detail::compose_party(ob.alice, in_alice),
                              detail::compose_party(ob.bob, in_bob)});
      std::size_t j = 0;
      while (j < inners.size() && ++choice[j] == inners[j].branches.size()) choice[j++] = 0;
      if (j == inners.size()) break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON file format: truth tables as hex strings, order 1-based.
// ---------------------------------------------------------------------------

inline nlohmann::json party_to_json(const PartyWiring& w) {
  nlohmann::json j;
  nlohmann::json order = nlohmann::json::array();
  for (int idx : w.order) order.push_back(idx + 1);
  j["order"] = order;
  nlohmann::json fns = nlohmann::json::array();
  for (const auto& fn : w.input_fns) fns.push_back(fn.to_hex());
  j["input_fns"] = fns;
  j["output_fn"] = w.output_fn.to_hex();
  return j;
}

inline PartyWiring party_from_json(const nlohmann::json& j, int n) {
  PartyWiring w;
  w.n = n;
  for (const auto& idx : j.at("order")) w.order.push_back(idx.get<int>() - 1);
  int k = 0;
  for (const auto& fn : j.at("input_fns"))
    w.input_fns.push_back(TruthTable::from_hex(1 + k++, fn.get<std::string>()));
  w.output_fn = TruthTable::from_hex(1 + n, j.at("output_fn").get<std::string>());
  return w;
}

inline nlohmann::json protocol_to_json(const Protocol& p) {
  nlohmann::json j;
  j["n"] = p.n;
  nlohmann::json branches = nlohmann::json::array();
  for (const auto& br : p.branches) {
    nlohmann::json b;
    b["weight"] = br.weight;
    b["alice"] = party_to_json(br.alice);
    b["bob"] = party_to_json(br.bob);
    branches.push_back(b);
  }
  j["branches"] = branches;
  return j;
}

inline Protocol protocol_from_json(const nlohmann::json& j) {
  Protocol p;
  try {
    p.n = j.at("n").get<int>();
    for (const auto& b : j.at("branches"))
      p.branches.push_back(
          {b.at("weight").get<double>(), party_from_json(b.at("alice"), p.n),
           party_from_json(b.at("bob"), p.n)});
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("protocol file: ") + e.what());
  }
  return p;
}

}  // namespace nlbox

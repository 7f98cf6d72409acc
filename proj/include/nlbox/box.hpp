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
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nlbox/common.hpp"

namespace nlbox {

// ---------------------------------------------------------------------------
// Box: conditional distribution P(a,b|x,y) over binary inputs and outputs.
// Stored in [x][y][a][b] nesting order, matching the JSON file format.
// ---------------------------------------------------------------------------

class Box {
public:
  Box() { table_.fill(0.25); }

  static constexpr int index(int x, int y, int a, int b) {
    return (((x << 1) | y) << 2) | (a << 1) | b;
  }

  double p(int a, int b, int x, int y) const { return table_[index(x, y, a, b)]; }
  double& at(int a, int b, int x, int y) { return table_[index(x, y, a, b)]; }

  const std::array<double, 16>& table() const { return table_; }
  std::array<double, 16>& table() { return table_; }

private:
  std::array<double, 16> table_;
};

inline bool approx_equal(const Box& lhs, const Box& rhs, double tol = kBoxEqualityTol) {
  for (int i = 0; i < 16; ++i) {
    if (std::abs(lhs.table()[i] - rhs.table()[i]) > tol) return false;
  }
  return true;
}

/// The four correlation functions E_{x,y}.
struct CorrelationVector {
  double e00, e01, e10, e11;

  double operator()(int x, int y) const {
    return (x == 0) ? (y == 0 ? e00 : e01) : (y == 0 ? e10 : e11);
  }
};

/// CHSH value in the literal input labeling, plus its rescaling
/// q = 1/2 + NL/8.
struct ChshValue {
  double nl;
  double q_equiv;
};

struct BoxClass {
  bool signaling;
  bool local;
  bool independent;
};

// ---------------------------------------------------------------------------
// Construction and validation
// ---------------------------------------------------------------------------

/// Builds a Box from 16 reals indexed (a,b,x,y), checking normalization of
/// every input column and non-negativity of every entry.
inline Box validate_box(const std::array<double, 16>& raw_abxy,
                        ToleranceProfile tol = ToleranceProfile::strict()) {
  Box box;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y) {
          const double v = raw_abxy[(((a << 1) | b) << 2) | (x << 1) | y];
          if (!std::isfinite(v)) throw DomainError("box entry is not finite");
          if (v < -tol.normalization)
            throw NegativeEntryError("negative probability entry P(" + std::to_string(a) + "," +
                                     std::to_string(b) + "|" + std::to_string(x) + "," +
                                     std::to_string(y) + ") = " + std::to_string(v));
          box.at(a, b, x, y) = v;
        }
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y) {
      double sum = 0.0;
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) sum += box.p(a, b, x, y);
      if (std::abs(sum - 1.0) > tol.normalization)
        throw NormalizationError("outcome probabilities for input (" + std::to_string(x) + "," +
                                 std::to_string(y) + ") sum to " + std::to_string(sum));
    }
  return box;
}

inline Box box_from_fn(const std::function<double(int a, int b, int x, int y)>& fn) {
  Box box;
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) box.at(a, b, x, y) = fn(a, b, x, y);
  return box;
}

/// P(a,b|x,y) = q/2 if a XOR b = x AND y, else (1-q)/2.
inline Box isotropic_box(double q) {
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("isotropic_box: q must lie in [0,1]");
  return box_from_fn([q](int a, int b, int x, int y) {
    return ((a ^ b) == (x & y)) ? q / 2.0 : (1.0 - q) / 2.0;
  });
}

inline Box pr_box() { return isotropic_box(1.0); }
inline Box anti_pr_box() { return isotropic_box(0.0); }
inline Box uniform_box() { return isotropic_box(0.5); }

/// Non-isotropic contrast resource: the PR relation holds exactly on inputs
/// (0,0), (0,1), (1,0) and all the error probability 4(1-q) sits on (1,1).
inline Box correlated_error_box(double q) {
  if (!(q >= 0.75 && q <= 1.0)) throw DomainError("correlated_error_box: q must lie in [3/4,1]");
  const double err = 4.0 * (1.0 - q);
  return box_from_fn([err](int a, int b, int x, int y) {
    if (!(x == 1 && y == 1)) return ((a ^ b) == (x & y)) ? 0.5 : 0.0;
    return ((a ^ b) == 1) ? (1.0 - err) / 2.0 : err / 2.0;
  });
}

/// Deterministic local strategy: a = fa(x), b = fb(y), each fn given as two
/// output bits (fn[x]).
inline Box deterministic_box(const std::array<int, 2>& fa, const std::array<int, 2>& fb) {
  return box_from_fn([&](int a, int b, int x, int y) {
    return (a == fa[x] && b == fb[y]) ? 1.0 : 0.0;
  });
}

inline Box mix(const std::vector<Box>& boxes, const std::vector<double>& weights) {
  if (boxes.size() != weights.size() || boxes.empty())
    throw DomainError("mix: need matching, non-empty boxes and weights");
  Box out;
  out.table().fill(0.0);
  for (std::size_t i = 0; i < boxes.size(); ++i)
    for (int k = 0; k < 16; ++k) out.table()[k] += weights[i] * boxes[i].table()[k];
  return out;
}

// ---------------------------------------------------------------------------
// Predicates and functionals
// ---------------------------------------------------------------------------

inline bool is_non_signaling(const Box& box,
                             ToleranceProfile tol = ToleranceProfile::strict()) {
  for (int a = 0; a < 2; ++a)
    for (int x = 0; x < 2; ++x) {
      const double m0 = box.p(a, 0, x, 0) + box.p(a, 1, x, 0);
      const double m1 = box.p(a, 0, x, 1) + box.p(a, 1, x, 1);
      if (std::abs(m0 - m1) > tol.non_signaling) return false;
    }
  for (int b = 0; b < 2; ++b)
    for (int y = 0; y < 2; ++y) {
      const double m0 = box.p(0, b, 0, y) + box.p(1, b, 0, y);
      const double m1 = box.p(0, b, 1, y) + box.p(1, b, 1, y);
      if (std::abs(m0 - m1) > tol.non_signaling) return false;
    }
  return true;
}

/// Alice's marginal P_A(a|x) as a 2x2 stochastic table indexed [x][a].
inline std::array<std::array<double, 2>, 2> marginal_alice(
    const Box& box, ToleranceProfile tol = ToleranceProfile::strict()) {
  std::array<std::array<double, 2>, 2> marg{};
  for (int a = 0; a < 2; ++a)
    for (int x = 0; x < 2; ++x) {
      const double m0 = box.p(a, 0, x, 0) + box.p(a, 1, x, 0);
      const double m1 = box.p(a, 0, x, 1) + box.p(a, 1, x, 1);
      if (std::abs(m0 - m1) > tol.non_signaling)
        throw SignalingBoxError("Alice's marginal depends on Bob's input");
      marg[x][a] = 0.5 * (m0 + m1);
    }
  return marg;
}

inline std::array<std::array<double, 2>, 2> marginal_bob(
    const Box& box, ToleranceProfile tol = ToleranceProfile::strict()) {
  std::array<std::array<double, 2>, 2> marg{};
  for (int b = 0; b < 2; ++b)
    for (int y = 0; y < 2; ++y) {
      const double m0 = box.p(0, b, 0, y) + box.p(1, b, 0, y);
      const double m1 = box.p(0, b, 1, y) + box.p(1, b, 1, y);
      if (std::abs(m0 - m1) > tol.non_signaling)
        throw SignalingBoxError("Bob's marginal depends on Alice's input");
      marg[y][b] = 0.5 * (m0 + m1);
    }
  return marg;
}

inline CorrelationVector correlations(const Box& box) {
  auto corr = [&](int x, int y) {
    return box.p(0, 0, x, y) + box.p(1, 1, x, y) - box.p(0, 1, x, y) - box.p(1, 0, x, y);
  };
  return CorrelationVector{corr(0, 0), corr(0, 1), corr(1, 0), corr(1, 1)};
}

/// NL = E00 + E01 + E10 - E11 in the given labeling; no relabeling
/// optimization happens here (see canonicalize).
inline ChshValue chsh(const Box& box) {
  const CorrelationVector corr = correlations(box);
  const double nl = corr.e00 + corr.e01 + corr.e10 - corr.e11;
  return ChshValue{nl, 0.5 + nl / 8.0};
}

/// Isotropic means E00 = E01 = E10 = -E11 >= 0 plus unbiased outputs on both
/// sides, everything within 1e-9.
inline bool is_isotropic(const Box& box, double tol = kIsotropyTol) {
  const CorrelationVector corr = correlations(box);
  if (corr.e00 < -tol) return false;
  if (std::abs(corr.e00 - corr.e01) > tol) return false;
  if (std::abs(corr.e00 - corr.e10) > tol) return false;
  if (std::abs(corr.e00 + corr.e11) > tol) return false;
  for (int a = 0; a < 2; ++a)
    for (int x = 0; x < 2; ++x)
      for (int y = 0; y < 2; ++y) {
        if (std::abs(box.p(a, 0, x, y) + box.p(a, 1, x, y) - 0.5) > tol) return false;
        if (std::abs(box.p(0, a, x, y) + box.p(1, a, x, y) - 0.5) > tol) return false;
      }
  return true;
}

// ---------------------------------------------------------------------------
// Local reversible relabelings: per party an input flip x -> x^1 together
// with an output map a -> a ^ f(x). Eight per party; pure permutations of the
// probability table.
// ---------------------------------------------------------------------------

struct PartyRelabeling {
  int input_flip = 0;           // applied to the party's input
  std::array<int, 2> out_flip = {0, 0};  // output XOR mask as a function of the (new) input

  static std::array<PartyRelabeling, 8> all() {
    std::array<PartyRelabeling, 8> group;
    int k = 0;
    for (int flip = 0; flip < 2; ++flip)
      for (int f0 = 0; f0 < 2; ++f0)
        for (int f1 = 0; f1 < 2; ++f1) group[k++] = PartyRelabeling{flip, {f0, f1}};
    return group;
  }
};

inline Box relabel(const Box& box, const PartyRelabeling& alice, const PartyRelabeling& bob) {
  Box out;
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
          out.at(a, b, x, y) = box.p(a ^ alice.out_flip[x], b ^ bob.out_flip[y],
                                     x ^ alice.input_flip, y ^ bob.input_flip);
  return out;
}

/// Applies the best relabeling: maximal Eq.-(3) value; among candidates tied
/// within 1e-12 (relabelings that coincide up to rounding), prefers the ones
/// with E00, E01, E10 >= 0 and then the lexicographically smallest table. A
/// sign-correct maximizer always exists, so the returned box satisfies the
/// dominant-sign convention. The result is local-reversibly equivalent to the
/// input and a fixed point of the group.
inline Box canonicalize(const Box& box) {
  const auto group = PartyRelabeling::all();
  std::vector<Box> candidates;
  candidates.reserve(64);
  double max_nl = -8.0;
  for (const auto& ra : group)
    for (const auto& rb : group) {
      candidates.push_back(relabel(box, ra, rb));
      max_nl = std::max(max_nl, chsh(candidates.back()).nl);
    }
  const Box* best = nullptr;
  bool best_nonneg = false;
  for (const Box& cand : candidates) {
    if (chsh(cand).nl < max_nl - 1e-12) continue;
    const CorrelationVector c = correlations(cand);
    const bool nonneg = c.e00 >= -1e-12 && c.e01 >= -1e-12 && c.e10 >= -1e-12;
    if (best == nullptr || (nonneg && !best_nonneg) ||
        (nonneg == best_nonneg &&
         std::lexicographical_compare(cand.table().begin(), cand.table().end(),
                                      best->table().begin(), best->table().end()))) {
      best = &cand;
      best_nonneg = nonneg;
    }
  }
  return *best;
}

// ---------------------------------------------------------------------------
// JSON file format: {"p": [[[[...]]]]} indexed [x][y][a][b].
// ---------------------------------------------------------------------------

inline nlohmann::json box_to_json(const Box& box) {
  nlohmann::json p = nlohmann::json::array();
  for (int x = 0; x < 2; ++x) {
    nlohmann::json jx = nlohmann::json::array();
    for (int y = 0; y < 2; ++y) {
      nlohmann::json jy = nlohmann::json::array();
      for (int a = 0; a < 2; ++a) {
        nlohmann::json ja = nlohmann::json::array();
        for (int b = 0; b < 2; ++b) ja.push_back(box.p(a, b, x, y));
        jy.push_back(ja);
      }
      jx.push_back(jy);
    }
    p.push_back(jx);
  }
  return nlohmann::json{{"p", p}};
}

inline Box box_from_json(const nlohmann::json& j,
                         ToleranceProfile tol = ToleranceProfile::strict()) {
  if (!j.contains("p")) throw DomainError("box file: missing \"p\" field");
  const auto& p = j.at("p");
  std::array<double, 16> raw{};
  try {
    for (int x = 0; x < 2; ++x)
      for (int y = 0; y < 2; ++y)
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b)
            raw[(((a << 1) | b) << 2) | (x << 1) | y] =
                p.at(x).at(y).at(a).at(b).get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("box file: malformed \"p\" array: ") + e.what());
  }
  return validate_box(raw, tol);
}

inline std::string box_to_string(const Box& box) { return box_to_json(box).dump() + "\n"; }

inline Box box_from_string(const std::string& text,
                           ToleranceProfile tol = ToleranceProfile::strict()) {
  return box_from_json(nlohmann::json::parse(text), tol);
}

}  // namespace nlbox

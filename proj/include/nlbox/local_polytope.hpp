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

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "nlbox/box.hpp"
#include "nlbox/common.hpp"

namespace nlbox {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

/// Exact rational value of a finite double (every finite double is dyadic).
inline Rational exact_rational(double v) {
  if (v == 0.0) return Rational(0);
  int exp = 0;
  const double mant = std::frexp(v, &exp);
  const auto scaled = static_cast<long long>(std::ldexp(mant, 53));
  exp -= 53;
  BigInt num(scaled);
  if (exp >= 0) return Rational(num << exp);
  return Rational(num, BigInt(1) << (-exp));
}

// ---------------------------------------------------------------------------
// Polytope data
// ---------------------------------------------------------------------------

/// The 16 deterministic local strategies a = fa(x), b = fb(y).
inline const std::vector<Box>& local_deterministic_vertices() {
  static const std::vector<Box> vertices = [] {
    std::vector<Box> out;
    for (int fa0 = 0; fa0 < 2; ++fa0)
      for (int fa1 = 0; fa1 < 2; ++fa1)
        for (int fb0 = 0; fb0 < 2; ++fb0)
          for (int fb1 = 0; fb1 < 2; ++fb1)
            out.push_back(deterministic_box({fa0, fa1}, {fb0, fb1}));
    return out;
  }();
  return vertices;
}

/// The 8 extremal non-local vertices of the non-signaling polytope:
/// a XOR b = (x AND y) XOR bx XOR gy XOR d with uniform marginals.
inline const std::vector<Box>& pr_variant_vertices() {
  static const std::vector<Box> vertices = [] {
    std::vector<Box> out;
    for (int bcoef = 0; bcoef < 2; ++bcoef)
      for (int gcoef = 0; gcoef < 2; ++gcoef)
        for (int d = 0; d < 2; ++d)
          out.push_back(box_from_fn([=](int a, int b, int x, int y) {
            const int rel = (x & y) ^ (bcoef & x) ^ (gcoef & y) ^ d;
            return ((a ^ b) == rel) ? 0.5 : 0.0;
          }));
    return out;
  }();
  return vertices;
}

// ---------------------------------------------------------------------------
// Fast path: the 8 CHSH sign inequalities, complete for this scenario.
// ---------------------------------------------------------------------------

/// True iff every odd-sign CHSH functional is at most 2 + tol.
inline bool chsh_local_criterion(const Box& box, double tol = 1e-9) {
  const CorrelationVector c = correlations(box);
  const std::array<double, 4> e = {c.e00, c.e01, c.e10, c.e11};
  const double sum = e[0] + e[1] + e[2] + e[3];
  for (int j = 0; j < 4; ++j) {
    if (std::abs(sum - 2.0 * e[j]) > 2.0 + tol) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Trusted oracle: exact LP feasibility over the 16 deterministic vertices.
// The box is reduced to the 8 non-signaling coordinates
// (P_A(0|x), P_B(0|y), P(0,0|x,y)); membership in the convex hull is decided
// by a phase-I simplex in exact rational arithmetic (Bland's rule).
// ---------------------------------------------------------------------------

namespace detail {

inline std::array<Rational, 8> ns_coordinates(const Box& box) {
  std::array<Rational, 8> coords;
  auto entry = [&](int a, int b, int x, int y) { return exact_rational(box.p(a, b, x, y)); };
  // Marginals averaged over the remote input so that representation noise in
  // the signaling directions does not affect membership.
  for (int x = 0; x < 2; ++x)
    coords[x] = (entry(0, 0, x, 0) + entry(0, 1, x, 0) + entry(0, 0, x, 1) + entry(0, 1, x, 1)) / 2;
  for (int y = 0; y < 2; ++y)
    coords[2 + y] =
        (entry(0, 0, 0, y) + entry(1, 0, 0, y) + entry(0, 0, 1, y) + entry(1, 0, 1, y)) / 2;
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y) coords[4 + 2 * x + y] = entry(0, 0, x, y);
  return coords;
}

/// Feasibility of {w >= 0, V w = c, sum w = 1} for the m x n system below.
inline bool simplex_feasible(const std::vector<std::array<Rational, 9>>& columns,
                             const std::array<Rational, 9>& rhs) {
  constexpr int m = 9;
  const int n = static_cast<int>(columns.size());
  // Tableau rows: [structural columns | b]; artificial basis starts as the
  // identity, so only structural coefficients are stored explicitly.
  std::vector<std::vector<Rational>> a(m, std::vector<Rational>(n));
  std::vector<Rational> b(m);
  for (int i = 0; i < m; ++i) {
    const bool flip = rhs[i] < 0;
    b[i] = flip ? Rational(-rhs[i]) : rhs[i];
    for (int j = 0; j < n; ++j) a[i][j] = flip ? Rational(-columns[j][i]) : columns[j][i];
  }
  std::vector<int> basis(m);
  for (int i = 0; i < m; ++i) basis[i] = n + i;  // artificial variables
  // Phase-I reduced costs: r_j = -sum_i a_ij for structural j; objective = sum b.
  std::vector<Rational> reduced(n);
  Rational objective = 0;
  for (int i = 0; i < m; ++i) objective += b[i];
  for (int j = 0; j < n; ++j) {
    Rational s = 0;
    for (int i = 0; i < m; ++i) s += a[i][j];
    reduced[j] = -s;
  }
  while (true) {
    int enter = -1;
    for (int j = 0; j < n; ++j) {
      if (reduced[j] < 0) {
        enter = j;
        break;  // Bland's rule: smallest index
      }
    }
    if (enter < 0) break;
    int leave = -1;
    Rational best_ratio = 0;
    for (int i = 0; i < m; ++i) {
      if (a[i][enter] > 0) {
        const Rational ratio = b[i] / a[i][enter];
        if (leave < 0 || ratio < best_ratio ||
            (ratio == best_ratio && basis[i] < basis[leave])) {
          leave = i;
          best_ratio = ratio;
        }
      }
    }
    if (leave < 0) throw InternalError("phase-I simplex objective unbounded");
    // Pivot on (leave, enter).
    const Rational pivot = a[leave][enter];
    for (int j = 0; j < n; ++j) a[leave][j] /= pivot;
    b[leave] /= pivot;
    for (int i = 0; i < m; ++i) {
      if (i == leave || a[i][enter] == 0) continue;
      const Rational factor = a[i][enter];
      for (int j = 0; j < n; ++j) a[i][j] -= factor * a[leave][j];
      b[i] -= factor * b[leave];
    }
    const Rational rfactor = reduced[enter];
    for (int j = 0; j < n; ++j) reduced[j] -= rfactor * a[leave][j];
    objective += rfactor * b[leave];
    // A leaving artificial contributes 1 to the reduced cost of its column,
    // but artificial columns are never re-entered, so they stay implicit.
    basis[leave] = enter;
  }
  return objective == 0;
}

}  // namespace detail

/// Membership of a non-signaling box in the local polytope, decided exactly
/// on the rationalized table.
inline bool is_local(const Box& box, ToleranceProfile tol = ToleranceProfile::simulated()) {
  if (!is_non_signaling(box, tol)) throw SignalingBoxError("is_local requires a non-signaling box");
  const auto target = detail::ns_coordinates(box);
  const auto& vertices = local_deterministic_vertices();
  std::vector<std::array<Rational, 9>> columns;
  columns.reserve(vertices.size());
  for (const Box& v : vertices) {
    const auto c = detail::ns_coordinates(v);
    std::array<Rational, 9> col;
    for (int i = 0; i < 8; ++i) col[i] = c[i];
    col[8] = 1;  // convex combination
    columns.push_back(col);
  }
  std::array<Rational, 9> rhs;
  for (int i = 0; i < 8; ++i) rhs[i] = target[i];
  rhs[8] = 1;
  return detail::simplex_feasible(columns, rhs);
}

inline BoxClass classify(const Box& box, ToleranceProfile tol = ToleranceProfile::strict()) {
  BoxClass cls{false, false, false};
  cls.signaling = !is_non_signaling(box, tol);
  if (cls.signaling) return cls;
  cls.local = is_local(box, tol);
  const auto ma = marginal_alice(box, tol);
  const auto mb = marginal_bob(box, tol);
  cls.independent = true;
  for (int a = 0; a < 2 && cls.independent; ++a)
    for (int b = 0; b < 2 && cls.independent; ++b)
      for (int x = 0; x < 2 && cls.independent; ++x)
        for (int y = 0; y < 2; ++y) {
          if (std::abs(box.p(a, b, x, y) - ma[x][a] * mb[y][b]) > kBoxEqualityTol) {
            cls.independent = false;
            break;
          }
        }
  return cls;
}

}  // namespace nlbox

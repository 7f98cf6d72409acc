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
#include <string>
#include <utility>
#include <vector>

#include "nlbox/common.hpp"
#include "nlbox/quantum.hpp"
#include "nlbox/wiring.hpp"

namespace nlbox {

inline double bell_q() { return 0.75; }
inline double tsirelson_q() { return 0.25 * (2.0 + std::sqrt(2.0)); }

/// Distillability-gap evaluation at one q.
struct GapEvaluation {
  double q;
  double g;
  double ceiling;     // q + g
  double alpha_of_q;  // inverse of q = 1/2 + sqrt(1+alpha^2)/4
};

/// g(q) = 3/4 - q + (sqrt(2)-1)/4 sqrt(4(2q-1)^2 - 1) on
/// [3/4, (2+sqrt 2)/4]. Values outside the closed domain are hard errors,
/// never clamped.
inline GapEvaluation gap(double q) {
  if (!(q >= bell_q() - 1e-12 && q <= tsirelson_q() + 1e-12))
    throw DomainError("gap: q must lie in [3/4, (2+sqrt(2))/4]");
  const double disc =
      std::clamp(4.0 * (2.0 * q - 1.0) * (2.0 * q - 1.0) - 1.0, 0.0, 1.0);
  const double g = 0.75 - q + 0.25 * (std::sqrt(2.0) - 1.0) * std::sqrt(disc);
  const double alpha = std::sqrt(disc);
  const double ceiling = q + g;
  // Derivation identity: the ceiling equals the rescaled NL[Omega_alpha] +
  // c(alpha) at alpha(q).
  const double via_state =
      0.5 + (2.0 * std::sqrt(1.0 + alpha * alpha) + c_alpha(alpha)) / 8.0;
  if (std::abs(ceiling - via_state) > 1e-12)
    throw InternalError("gap: ceiling disagrees with the state-side derivation");
  return GapEvaluation{q, g, ceiling, alpha};
}

/// Location and value of the unique interior maximum of g, found by
/// golden-section to 1e-10.
inline std::pair<double, double> max_gap() {
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double lo = bell_q(), hi = tsirelson_q();
  double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
  double f1 = gap(x1).g, f2 = gap(x2).g;
  while (hi - lo > 1e-10) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = gap(x2).g;
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = gap(x1).g;
    }
  }
  const double q = 0.5 * (lo + hi);
  return {q, gap(q).g};
}

// ---------------------------------------------------------------------------
// Sampled curves
// ---------------------------------------------------------------------------

struct BoundCurve {
  enum class Kind { distillability_ceiling, nl_vs_fef };
  Kind kind;
  std::pair<double, double> domain;
  std::vector<std::pair<double, double>> samples;
};

inline BoundCurve ceiling_curve(int grid_points) {
  if (grid_points < 2) throw DomainError("ceiling_curve: need at least 2 grid points");
  BoundCurve curve{BoundCurve::Kind::distillability_ceiling, {bell_q(), tsirelson_q()}, {}};
  for (int i = 0; i < grid_points; ++i) {
    const double q =
        bell_q() + (tsirelson_q() - bell_q()) * static_cast<double>(i) / (grid_points - 1);
    curve.samples.emplace_back(q, gap(q).ceiling);
  }
  return curve;
}

inline BoundCurve nl_vs_fef_curve(int grid_points) {
  if (grid_points < 2) throw DomainError("nl_vs_fef_curve: need at least 2 grid points");
  BoundCurve curve{BoundCurve::Kind::nl_vs_fef, {0.25, 1.0}, {}};
  for (int i = 0; i < grid_points; ++i) {
    const double f = 0.25 + 0.75 * static_cast<double>(i) / (grid_points - 1);
    curve.samples.emplace_back(f, nl_upper_from_F(f));
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Known no-go predicates
// ---------------------------------------------------------------------------

struct KnownLimits {
  bool bell_blocked;
  bool tsirelson_blocked;
  bool perfection_blocked;
};

/// Can resources of strength q be distilled to p? The three classical no-go
/// statements as predicates.
inline KnownLimits known_limits(double q, double p) {
  if (!(q >= 0.5 - 1e-12 && q <= 1.0 + 1e-12))
    throw DomainError("known_limits: q must lie in [1/2,1]");
  KnownLimits lim{};
  lim.bell_blocked = (q <= bell_q() + 1e-12) && (p > bell_q() + 1e-12);
  lim.tsirelson_blocked = (q <= tsirelson_q() + 1e-12) && (p > tsirelson_q() + 1e-12);
  lim.perfection_blocked = (q < 1.0 - 1e-12) && (p >= 1.0 - 1e-12);
  return lim;
}

// ---------------------------------------------------------------------------
// Step-function composition argument: a claimed q -> q+delta protocol fed into
// a claimed (q+delta) -> (q+eps+gamma) protocol yields a flat protocol whose
// claim contradicts a ceiling of q+eps whenever gamma > 0.
// ---------------------------------------------------------------------------

struct StepFunctionVerdict {
  bool contradiction;
  std::size_t composed_arity;
  double claimed_p;
  double assumed_ceiling;
  Protocol composed;
  std::string summary;
};

inline StepFunctionVerdict step_function_check(double q, double eps, double delta, double gamma,
                                               const Protocol& p1, const Protocol& p2) {
  if (!(q >= 0.5 && q <= 1.0)) throw DomainError("step_function_check: q must lie in [1/2,1]");
  if (!(eps >= 0.0 && delta >= 0.0 && gamma >= 0.0))
    throw DomainError("step_function_check: eps, delta, gamma must be non-negative");
  if (delta >= eps + 1e-15 && eps > 0.0)
    throw DomainError("step_function_check: requires delta < eps");
  StepFunctionVerdict verdict{};
  verdict.composed = compose(p2, std::vector<Protocol>(p2.n, p1));
  verdict.composed_arity = static_cast<std::size_t>(verdict.composed.n);
  verdict.claimed_p = q + eps + gamma;
  verdict.assumed_ceiling = q + eps;
  verdict.contradiction = gamma > 1e-12;
  verdict.summary =
      verdict.contradiction
          ? "composed protocol over " + std::to_string(verdict.composed.n) +
                " boxes claims q -> q+eps+gamma, contradicting the assumed ceiling q+eps"
          : "no contradiction: the composed claim stays within the assumed ceiling";
  return verdict;
}

}  // namespace nlbox

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

#include <cstdio>
#include <string>
#include <vector>

#include "nlbox/blockdiag.hpp"
#include "nlbox/bounds.hpp"
#include "nlbox/box.hpp"
#include "nlbox/common.hpp"
#include "nlbox/quantum.hpp"
#include "nlbox/search.hpp"
#include "nlbox/wiring.hpp"

namespace nlbox {

struct CriterionResult {
  std::string id;
  bool pass;
  std::string detail;
};

struct VerifyOutcome {
  std::vector<CriterionResult> results;
  bool all_pass = true;

  /// Fixed-format report; byte-identical for every thread count.
  std::string render() const {
    std::string out;
    for (const auto& r : results)
      out += (r.pass ? "[PASS] " : "[FAIL] ") + r.id + "  " + r.detail + "\n";
    out += all_pass ? "verification: all criteria passed\n"
                    : "verification: at least one criterion FAILED\n";
    return out;
  }
};

namespace detail {

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

inline long long binomial(int n, int r) {
  long long out = 1;
  for (int i = 1; i <= r; ++i) out = out * (n - r + i) / i;
  return out;
}

}  // namespace detail

/// Runs the full acceptance suite. Every tolerance is pinned here; the
/// rendered report depends only on the seed, never on the thread count.
inline VerifyOutcome verify_all(std::uint64_t seed = kDefaultSeed, int threads = 0) {
  using detail::fmt;
  VerifyOutcome outcome;
  auto add = [&](const std::string& id, bool pass, const std::string& detail) {
    outcome.results.push_back({id, pass, detail});
    outcome.all_pass = outcome.all_pass && pass;
  };

  // C1: closed-form gap reproduction.
  {
    const double g_left = gap(bell_q()).g;
    const double g_right = gap(tsirelson_q()).g;
    const double q_star = 0.5 + 0.25 * std::sqrt(0.5 * (1.0 + std::sqrt(2.0)));
    const double g_star = gap(q_star).g;
    const bool pass = std::abs(g_left) <= 1e-12 && std::abs(g_right) <= 1e-12 &&
                      std::abs(g_star - 0.0225) <= 5e-4;
    add("C1 gap-closed-form", pass,
        "g(3/4)=" + fmt(g_left) + " g((2+sqrt2)/4)=" + fmt(g_right) + " g(q*)=" + fmt(g_star));
  }

  // C2: NL and fully entangled fraction of Omega_alpha on a 101-point grid,
  // closed forms and optimizer cross-check.
  {
    double err_nl = 0.0, err_f = 0.0, err_opt = 0.0;
    for (int i = 0; i <= 100; ++i) {
      const double alpha = i / 100.0;
      const DensityMatrix rho = omega(alpha).state;
      err_nl = std::max(err_nl, std::abs(nl_state(rho) - 2.0 * std::sqrt(1.0 + alpha * alpha)));
      const double closed = fully_entangled_fraction(rho);
      err_f = std::max(err_f, std::abs(closed - 0.5 * (1.0 + alpha)));
      err_opt = std::max(err_opt,
                         std::abs(closed - fully_entangled_fraction_optimized(rho, 32, seed)));
    }
    const bool pass = err_nl <= 1e-9 && err_f <= 1e-9 && err_opt <= 1e-6;
    add("C2 omega-grid", pass,
        "max|NL-2sqrt(1+a^2)|=" + fmt(err_nl) + " max|F-(1+a)/2|=" + fmt(err_f) +
            " max|F-optimizer|=" + fmt(err_opt));
  }

  // C3: end-to-end isotropic simulation with pre-twirl correlation check.
  {
    double err_corr = 0.0, err_q = 0.0;
    bool all_isotropic = true;
    for (double alpha : {0.0, 0.3, 0.6, 1.0}) {
      const double s = std::sqrt(1.0 + alpha * alpha);
      const Box raw = measure_box(omega(alpha).state, canonical_measurements(alpha).alice,
                                  canonical_measurements(alpha).bob);
      const CorrelationVector c = correlations(raw);
      err_corr = std::max({err_corr, std::abs(c.e00 - 1.0 / s), std::abs(c.e01 - 1.0 / s),
                           std::abs(c.e10 - alpha * alpha / s),
                           std::abs(c.e11 + alpha * alpha / s)});
      const Box twirled = simulate_isotropic(alpha);
      all_isotropic = all_isotropic && is_isotropic(twirled);
      err_q = std::max(err_q, std::abs(chsh(twirled).q_equiv - (0.5 + s / 4.0)));
    }
    const bool pass = err_corr <= 1e-9 && err_q <= 1e-9 && all_isotropic;
    add("C3 lemma4-simulation", pass,
        "max correlation error=" + fmt(err_corr) + " max q error=" + fmt(err_q) +
            (all_isotropic ? " all isotropic" : " NOT isotropic"));
  }

  // C4: tensor-power decomposition reconstruction and degree counts.
  {
    double err = 0.0;
    bool counts_ok = true;
    for (int n = 1; n <= 3; ++n)
      for (double alpha : {0.0, 0.3, 0.7, 1.0}) {
        const auto terms = omega_power_decomposition(alpha, n);
        const Mat direct = tensor_power(omega(alpha).state.mat, n);
        err = std::max(err,
                       (reconstruct_decomposition(terms) - direct).cwiseAbs().maxCoeff());
        for (int r = 0; r <= n; ++r) {
          long long count = 0;
          for (const auto& t : terms)
            if (t.degree == r) ++count;
          if (count != detail::binomial(n, r) * (1ll << r)) counts_ok = false;
        }
      }
    const bool pass = err <= 1e-12 && counts_ok;
    add("C4 power-decomposition", pass,
        "max reconstruction error=" + fmt(err) +
            (counts_ok ? " degree counts match C(n,r)2^r" : " degree counts WRONG"));
  }

  // C5: sampled EDPs never beat (1+alpha)/2; the identity EDP attains it.
  {
    bool pass = true;
    std::string detail_txt;
    for (double alpha : {0.5, 0.8}) {
      const EdpSweepResult sweep_res = edp_sweep(alpha, 2, 1, 1000, seed, threads);
      const double cap = 0.5 * (1.0 + alpha);
      const double ident_err = std::abs(edp_identity(alpha, 2).fidelity - cap);
      pass = pass && sweep_res.max_fidelity <= cap + 1e-9 && ident_err <= 1e-12;
      detail_txt += "alpha=" + fmt(alpha) + ": maxF=" + fmt(sweep_res.max_fidelity) +
                    " cap=" + fmt(cap) + " identity_err=" + fmt(ident_err) + "  ";
    }
    add("C5 edp-sampling", pass, detail_txt);
  }

  // C6: lemma-5 ensembles, zero violations and extremal equality.
  {
    bool pass = true;
    std::string detail_txt;
    for (double alpha : {0.3, 0.7}) {
      Lemma5Report rep;
      try {
        rep = lemma5_witness(alpha, 10000, seed);
      } catch (const CounterexampleFoundError&) {
        pass = false;
        detail_txt += "alpha=" + fmt(alpha) + ": VIOLATIONS  ";
        continue;
      }
      pass = pass && rep.extremal_premise_gap <= 1e-9 && rep.extremal_conclusion_gap <= 1e-9;
      detail_txt += "alpha=" + fmt(alpha) + ": violations=0 extremal_gap=" +
                    fmt(rep.extremal_conclusion_gap) + "  ";
    }
    add("C6 lemma5-ensembles", pass, detail_txt);
  }

  // C7: random complementary projector pairs block-diagonalize cleanly.
  {
    double worst_off = 0.0;
    bool sizes_ok = true;
    const int dims[3] = {2, 4, 8};
    for (int i = 0; i < 200; ++i) {
      const int d = dims[i % 3];
      auto rng = derived_rng(seed, 7000 + static_cast<std::uint64_t>(i));
      const auto [p0, p1] = random_complementary_projectors(d, rng);
      const auto [q0, q1] = random_complementary_projectors(d, rng);
      const BlockDecomposition dec = block_diagonalize(p0, p1, q0, q1, splitmix64(seed) ^ i);
      int total = 0;
      for (int s : dec.block_sizes) {
        total += s;
        if (s != 1 && s != 2) sizes_ok = false;
      }
      if (total != d) sizes_ok = false;
      for (const Mat* op : {&p0, &p1, &q0, &q1})
        worst_off = std::max(
            worst_off, off_block_mass(dec.basis.adjoint() * (*op) * dec.basis, dec.block_sizes));
    }
    const bool pass = worst_off <= 1e-10 && sizes_ok;
    add("C7 block-diagonalization", pass,
        "200 draws on dims {2,4,8}: max off-block mass=" + fmt(worst_off) +
            (sizes_ok ? " all block sizes in {1,2}" : " bad block sizes"));
  }

  // C8: exhaustive n=2 searches against the known ceilings.
  {
    SearchSpace space;
    space.n = 2;
    space.adaptive = true;
    space.output_class = OutputClass::all;
    space.symmetry_reduction = true;
    SearchOptions options;
    options.threads = threads;
    bool pass = true;
    std::string detail_txt;
    {
      const SearchReport r = search_max_nl(space, isotropic_box(0.75), options);
      pass = pass && r.best_q <= 0.75 + 1e-9;
      detail_txt += "q=0.75: best_q=" + fmt(r.best_q) + "  ";
    }
    for (double q : {0.8, 0.85}) {
      const SearchReport r = search_max_nl(space, isotropic_box(q), options);
      pass = pass && r.bound_applicable && r.best_q <= r.bound_q + 1e-9;
      detail_txt += "q=" + fmt(q) + ": best_q=" + fmt(r.best_q) + " ceiling=" + fmt(r.bound_q) + "  ";
    }
    {
      const SearchReport r = search_max_nl(space, isotropic_box(0.99), options);
      pass = pass && r.best_q < 1.0 - 1e-9;
      detail_txt += "q=0.99: best_q=" + fmt(r.best_q);
    }
    add("C8 search-vs-limits", pass, detail_txt);
  }

  // C9: NL never exceeds the F-ceiling on random two-qubit states.
  {
    double worst = -1.0;
    for (int i = 0; i < 10000; ++i) {
      auto rng = derived_rng(seed, 90000 + static_cast<std::uint64_t>(i));
      const DensityMatrix rho = random_density_matrix(4, rng);
      const double excess = nl_state(rho) - nl_upper_from_F(fully_entangled_fraction(rho));
      worst = std::max(worst, excess);
    }
    const bool pass = worst <= 1e-6;
    add("C9 figure3-dominance", pass, "max(NL - ceiling(F)) over 10^4 states=" + fmt(worst));
  }

  // C10: the thread-sensitive computations give byte-identical results for
  // every worker count.
  {
    SearchSpace space;
    space.n = 2;
    space.symmetry_reduction = true;
    SearchOptions one;
    one.threads = 1;
    SearchOptions many;
    many.threads = (threads == 1) ? 4 : (threads > 0 ? threads : 4);
    const std::string search_one =
        report_to_json(search_max_nl(space, isotropic_box(0.85), one)).dump();
    const std::string search_many =
        report_to_json(search_max_nl(space, isotropic_box(0.85), many)).dump();
    const EdpSweepResult edp_one = edp_sweep(0.5, 2, 1, 200, seed, 1);
    const EdpSweepResult edp_many = edp_sweep(0.5, 2, 1, 200, seed, many.threads);
    const bool search_same = search_one == search_many;
    const bool edp_same = edp_one.max_fidelity == edp_many.max_fidelity &&
                          edp_one.argmax_trial == edp_many.argmax_trial &&
                          edp_one.fidelity_sum == edp_many.fidelity_sum;
    const bool pass = search_same && edp_same;
    add("C10 determinism", pass,
        std::string("search report ") + (search_same ? "identical" : "DIFFERS") +
            ", edp digest " + (edp_same ? "identical" : "DIFFERS") +
            " (sum=" + fmt(edp_one.fidelity_sum) + ")");
  }

  return outcome;
}

}  // namespace nlbox

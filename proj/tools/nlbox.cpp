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

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nlbox/blockdiag.hpp"
#include "nlbox/bounds.hpp"
#include "nlbox/box.hpp"
#include "nlbox/local_polytope.hpp"
#include "nlbox/quantum.hpp"
#include "nlbox/search.hpp"
#include "nlbox/verify.hpp"
#include "nlbox/wiring.hpp"

namespace {

using namespace nlbox;

std::string slurp(std::istream& in) {
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open " + path);
  return slurp(in);
}

void write_output(const std::string& path, const std::string& content) {
  if (path.empty()) {
    std::cout << content;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DomainError("cannot write " + path);
  out << content;
}

Box load_box(const std::string& path, ToleranceProfile tol) {
  return box_from_string(path.empty() ? slurp(std::cin) : read_file(path), tol);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::string yesno(bool v) { return v ? "yes" : "no"; }

std::string curve_to_csv(const BoundCurve& curve) {
  std::string out = "abscissa,ordinate\n";
  for (const auto& [x, y] : curve.samples) out += fmt(x) + "," + fmt(y) + "\n";
  return out;
}

DensityMatrix load_state(double alpha, const std::string& state_path) {
  if (!state_path.empty()) return state_from_json(nlohmann::json::parse(read_file(state_path)));
  return omega(alpha).state;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nlbox: exact simulation and search for CHSH-type non-local boxes,\n"
               "non-communicating distillation protocols, and the two-qubit bounds"};
  app.require_subcommand(1);

  std::uint64_t seed = kDefaultSeed;
  std::string seed_arg;
  int threads = 0;
  std::string profile = "strict";
  app.add_option("--seed", seed_arg, "base seed for all sampling (default 0x5EED)");
  app.add_option("--threads", threads, "worker threads (0 = hardware)");
  app.add_option("--tolerance-profile", profile, "strict | simulated")
      ->check(CLI::IsMember({"strict", "simulated"}));

  std::string in_path, out_path, state_path, protocol_path, outer_path;
  std::vector<std::string> box_paths, inner_paths;
  double q = 0.85, p = 1.0, alpha = 1.0, eps = 0.0, delta = 0.0, gamma = 0.0;
  int n = 2, points = 101, dim = 4, ancillas = 1;
  std::uint64_t trials = 1000, budget = 1ull << 30;
  bool adaptive = true;
  bool symmetry = true;
  std::string family = "all", resource = "isotropic", curve_kind = "ceiling", grid_arg;

  // --- box ---------------------------------------------------------------
  auto* box_cmd = app.add_subcommand("box", "validate and analyze box files");
  box_cmd->fallthrough();
  auto* box_check = box_cmd->add_subcommand("check", "validate and classify a box");
  auto* box_chsh = box_cmd->add_subcommand("chsh", "CHSH value in the literal labeling");
  auto* box_canon = box_cmd->add_subcommand("canon", "best local relabeling");
  for (auto* c : {box_check, box_chsh, box_canon}) {
    c->fallthrough();
    c->add_option("--in", in_path, "box file (default: stdin)");
  }
  box_canon->add_option("--out", out_path, "output box file (default: stdout)");

  // --- wire --------------------------------------------------------------
  auto* wire_cmd = app.add_subcommand("wire", "apply, compose and validate protocols");
  wire_cmd->fallthrough();
  auto* wire_apply = wire_cmd->add_subcommand("apply", "apply a protocol to resource boxes");
  wire_apply->add_option("--protocol", protocol_path, "protocol file")->required();
  wire_apply->add_option("--box", box_paths, "resource box file (repeat, or one for all)");
  wire_apply->add_option("--out", out_path, "output box file (default: stdout)");
  auto* wire_compose = wire_cmd->add_subcommand("compose", "flatten nested protocols");
  wire_compose->add_option("--outer", outer_path, "outer protocol")->required();
  wire_compose->add_option("--inner", inner_paths, "inner protocols (repeat, or one for all)")
      ->required();
  wire_compose->add_option("--out", out_path, "output protocol file (default: stdout)");
  auto* wire_validate = wire_cmd->add_subcommand("validate", "list protocol violations");
  wire_validate->add_option("--protocol", protocol_path, "protocol file")->required();
  for (auto* c : {wire_apply, wire_compose, wire_validate}) c->fallthrough();

  // --- search ------------------------------------------------------------
  auto* search_cmd = app.add_subcommand("search", "exhaustive wiring search");
  search_cmd->fallthrough();
  auto* search_run = search_cmd->add_subcommand("run", "search one resource");
  auto* search_sweep = search_cmd->add_subcommand("sweep", "search a q grid, emit CSV");
  for (auto* c : {search_run, search_sweep}) {
    c->fallthrough();
    c->add_option("--n", n, "boxes per side (1..3)");
    c->add_option("--family", family, "all | xor-affine")
        ->check(CLI::IsMember({"all", "xor-affine"}));
    c->add_option("--adaptive", adaptive, "allow inputs to read earlier outcomes");
    c->add_option("--symmetry", symmetry, "prune relabeling-equivalent wirings");
    c->add_option("--budget", budget, "max wiring pairs (default 2^30)");
    c->add_option("--resource", resource, "isotropic | correlated")
        ->check(CLI::IsMember({"isotropic", "correlated"}));
    c->add_option("--out", out_path, "report file");
  }
  search_run->add_option("--q", q, "resource strength");
  search_run->add_option("--box", box_paths, "explicit resource box file");
  search_sweep->add_option("--grid", grid_arg, "comma-separated q values")->required();

  // --- quantum -----------------------------------------------------------
  auto* quantum_cmd = app.add_subcommand("quantum", "two-qubit layer");
  quantum_cmd->fallthrough();
  auto* q_nl = quantum_cmd->add_subcommand("nl", "maximal CHSH value of a state");
  auto* q_fef = quantum_cmd->add_subcommand("fef", "fully entangled fraction");
  auto* q_sim = quantum_cmd->add_subcommand("simulate", "emit the isotropic box of omega(alpha)");
  auto* q_dec = quantum_cmd->add_subcommand("decompose", "tensor-power mixture terms");
  auto* q_edp = quantum_cmd->add_subcommand("edp-sweep", "sampled distillation attempts");
  auto* q_blk = quantum_cmd->add_subcommand("blockdiag", "random projector block structure");
  auto* q_l5 = quantum_cmd->add_subcommand("lemma5", "sampled mean-F vs mean-NL witness");
  for (auto* c : {q_nl, q_fef, q_sim, q_dec, q_edp, q_blk, q_l5}) {
    c->fallthrough();
    c->add_option("--alpha", alpha, "omega parameter in [0,1]");
  }
  q_nl->add_option("--state", state_path, "state file instead of --alpha");
  q_fef->add_option("--state", state_path, "state file instead of --alpha");
  q_sim->add_option("--out", out_path, "output box file (default: stdout)");
  q_dec->add_option("--n", n, "tensor power (1..4)");
  q_edp->add_option("--n", n, "copies of omega (1..3)");
  q_edp->add_option("--ancillas", ancillas, "ancilla qubits per side (0..2)");
  q_edp->add_option("--trials", trials, "number of sampled protocols");
  q_blk->add_option("--dim", dim, "Hilbert-space dimension");
  q_blk->add_option("--trials", trials, "number of random draws");
  q_l5->add_option("--trials", trials, "number of sampled ensembles");

  // --- bounds ------------------------------------------------------------
  auto* bounds_cmd = app.add_subcommand("bounds", "closed-form bound curves and predicates");
  bounds_cmd->fallthrough();
  auto* b_curve = bounds_cmd->add_subcommand("curve", "sample a bound curve as CSV");
  b_curve->add_option("--curve", curve_kind, "ceiling | nlfef")
      ->check(CLI::IsMember({"ceiling", "nlfef"}));
  b_curve->add_option("--points", points, "grid points");
  b_curve->add_option("--out", out_path, "CSV file (default: stdout)");
  auto* b_gap = bounds_cmd->add_subcommand("gap", "distillability gap at q");
  b_gap->add_option("--q", q, "resource strength")->required();
  auto* b_limits = bounds_cmd->add_subcommand("limits", "classical no-go predicates");
  b_limits->add_option("--q", q, "resource strength")->required();
  b_limits->add_option("--p", p, "target strength");
  auto* b_step = bounds_cmd->add_subcommand("step", "composition contradiction check");
  b_step->add_option("--q", q, "base strength");
  b_step->add_option("--eps", eps, "assumed ceiling offset");
  b_step->add_option("--delta", delta, "first claimed gain (< eps)");
  b_step->add_option("--gamma", gamma, "second claimed extra gain");
  for (auto* c : {b_curve, b_gap, b_limits, b_step}) c->fallthrough();

  // --- verify ------------------------------------------------------------
  auto* verify_cmd = app.add_subcommand("verify", "acceptance suite");
  verify_cmd->fallthrough();
  auto* verify_all_cmd = verify_cmd->add_subcommand("all", "run every acceptance criterion");
  verify_all_cmd->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  const ToleranceProfile tol =
      profile == "strict" ? ToleranceProfile::strict() : ToleranceProfile::simulated();

  try {
    if (!seed_arg.empty()) {
      try {
        seed = std::stoull(seed_arg, nullptr, 0);
      } catch (const std::exception&) {
        throw DomainError("invalid --seed value: " + seed_arg);
      }
    }
    if (box_check->parsed()) {
      const Box box = load_box(in_path, tol);
      const BoxClass cls = classify(box, tol);
      const ChshValue v = chsh(box);
      std::cout << "signaling: " << yesno(cls.signaling) << "\n"
                << "local: " << yesno(cls.local) << "\n"
                << "independent: " << yesno(cls.independent) << "\n"
                << "isotropic: " << yesno(is_isotropic(box)) << "\n"
                << "nl = " << fmt(v.nl) << "\n"
                << "q = " << fmt(v.q_equiv) << "\n";
    } else if (box_chsh->parsed()) {
      const ChshValue v = chsh(load_box(in_path, tol));
      std::cout << "nl = " << fmt(v.nl) << "\nq = " << fmt(v.q_equiv) << "\n";
    } else if (box_canon->parsed()) {
      write_output(out_path, box_to_string(canonicalize(load_box(in_path, tol))));
    } else if (wire_apply->parsed()) {
      const Protocol proto = protocol_from_json(nlohmann::json::parse(read_file(protocol_path)));
      std::vector<Box> resources;
      if (box_paths.empty()) throw DomainError("wire apply needs at least one --box");
      for (const auto& path : box_paths) resources.push_back(box_from_string(read_file(path), tol));
      if (static_cast<int>(resources.size()) == 1 && proto.n > 1)
        resources.assign(proto.n, resources.front());
      write_output(out_path, box_to_string(apply_wiring(proto, resources)));
    } else if (wire_compose->parsed()) {
      const Protocol outer = protocol_from_json(nlohmann::json::parse(read_file(outer_path)));
      std::vector<Protocol> inners;
      for (const auto& path : inner_paths)
        inners.push_back(protocol_from_json(nlohmann::json::parse(read_file(path))));
      if (static_cast<int>(inners.size()) == 1 && outer.n > 1)
        inners.assign(outer.n, inners.front());
      write_output(out_path, protocol_to_json(compose(outer, inners)).dump() + "\n");
    } else if (wire_validate->parsed()) {
      const Protocol proto = protocol_from_json(nlohmann::json::parse(read_file(protocol_path)));
      const auto violations = validate_protocol(proto);
      if (violations.empty()) {
        std::cout << "ok\n";
      } else {
        for (const auto& v : violations) std::cout << v.code << ": " << v.detail << "\n";
      }
    } else if (search_run->parsed() || search_sweep->parsed()) {
      SearchSpace space;
      space.n = n;
      space.adaptive = adaptive;
      space.output_class = family == "all" ? OutputClass::all : OutputClass::xor_affine;
      space.symmetry_reduction = symmetry;
      SearchOptions options;
      options.threads = threads;
      options.budget = budget;
      if (search_run->parsed()) {
        Box res = box_paths.empty()
                      ? (resource == "isotropic" ? isotropic_box(q) : correlated_error_box(q))
                      : box_from_string(read_file(box_paths.front()), tol);
        const SearchReport report = search_max_nl(space, res, options);
        std::cout << "resource_q = " << fmt(report.resource_q) << "\n"
                  << "best_nl = " << fmt(report.best_nl) << "\n"
                  << "best_q = " << fmt(report.best_q) << "\n"
                  << "wirings_examined = " << report.wirings_examined << "\n";
        if (report.bound_applicable)
          std::cout << "bound_q = " << fmt(report.bound_q) << "\n"
                    << "bound_respected = " << yesno(report.bound_respected) << "\n";
        else
          std::cout << "bound_q = n/a (q outside [3/4,(2+sqrt2)/4])\n";
        if (!out_path.empty())
          write_output(out_path, report_to_json(report).dump(2) + "\n");
      } else {
        std::vector<double> grid;
        std::stringstream ss(grid_arg);
        std::string item;
        while (std::getline(ss, item, ',')) grid.push_back(std::stod(item));
        const auto reports =
            sweep(space, grid,
                  resource == "isotropic" ? ResourceKind::isotropic : ResourceKind::correlated_error,
                  options);
        write_output(out_path, sweep_to_csv(reports));
      }
    } else if (q_nl->parsed()) {
      std::cout << "nl = " << fmt(nl_state(load_state(alpha, state_path))) << "\n";
    } else if (q_fef->parsed()) {
      const DensityMatrix rho = load_state(alpha, state_path);
      std::cout << "F = " << fmt(fully_entangled_fraction_checked(rho, 32, seed)) << "\n";
    } else if (q_sim->parsed()) {
      write_output(out_path, box_to_string(simulate_isotropic(alpha)));
    } else if (q_dec->parsed()) {
      const auto terms = omega_power_decomposition(alpha, n);
      const double err =
          (reconstruct_decomposition(terms) - tensor_power(omega(alpha).state.mat, n))
              .cwiseAbs()
              .maxCoeff();
      std::cout << "pattern degree weight\n";
      for (const auto& t : terms) {
        std::string pat;
        for (int s : t.pattern) pat += (s == 2) ? '*' : static_cast<char>('0' + s);
        std::cout << pat << " " << t.degree << " " << fmt(t.weight) << "\n";
      }
      std::cout << "reconstruction_error = " << fmt(err) << "\n";
    } else if (q_edp->parsed()) {
      const EdpSweepResult res = edp_sweep(alpha, n, ancillas, trials, seed, threads);
      const double cap = 0.5 * (1.0 + alpha);
      std::cout << "trials = " << res.trials << "\n"
                << "max_F = " << fmt(res.max_fidelity) << "\n"
                << "argmax_trial = " << res.argmax_trial << "\n"
                << "bound = " << fmt(cap) << "\n"
                << "bound_respected = " << yesno(res.max_fidelity <= cap + 1e-9) << "\n";
    } else if (q_blk->parsed()) {
      double worst = 0.0;
      std::vector<int> histogram(3, 0);
      for (std::uint64_t i = 0; i < trials; ++i) {
        auto rng = derived_rng(seed, i);
        const auto [p0, p1] = random_complementary_projectors(dim, rng);
        const auto [q0, q1] = random_complementary_projectors(dim, rng);
        const BlockDecomposition dec = block_diagonalize(p0, p1, q0, q1, splitmix64(seed) ^ i);
        for (int s : dec.block_sizes) ++histogram[s];
        for (const Mat* op : {&p0, &p1, &q0, &q1})
          worst = std::max(worst,
                           off_block_mass(dec.basis.adjoint() * (*op) * dec.basis, dec.block_sizes));
      }
      std::cout << "trials = " << trials << "\n"
                << "blocks_1x1 = " << histogram[1] << "\n"
                << "blocks_2x2 = " << histogram[2] << "\n"
                << "max_off_block_mass = " << fmt(worst) << "\n";
    } else if (q_l5->parsed()) {
      const Lemma5Report rep = lemma5_witness(alpha, trials, seed);
      std::cout << "trials = " << rep.trials << "\n"
                << "violations = " << rep.violations << "\n"
                << "min_conclusion_slack = " << fmt(rep.min_conclusion_slack) << "\n"
                << "extremal_premise_gap = " << fmt(rep.extremal_premise_gap) << "\n"
                << "extremal_conclusion_gap = " << fmt(rep.extremal_conclusion_gap) << "\n";
    } else if (b_curve->parsed()) {
      const BoundCurve curve =
          curve_kind == "ceiling" ? ceiling_curve(points) : nl_vs_fef_curve(points);
      write_output(out_path, curve_to_csv(curve));
    } else if (b_gap->parsed()) {
      const GapEvaluation e = gap(q);
      std::cout << "q = " << fmt(e.q) << "\n"
                << "g = " << fmt(e.g) << "\n"
                << "ceiling = " << fmt(e.ceiling) << "\n"
                << "alpha = " << fmt(e.alpha_of_q) << "\n";
    } else if (b_limits->parsed()) {
      const KnownLimits lim = known_limits(q, p);
      std::cout << "bell_blocked: " << yesno(lim.bell_blocked) << "\n"
                << "tsirelson_blocked: " << yesno(lim.tsirelson_blocked) << "\n"
                << "perfection_blocked: " << yesno(lim.perfection_blocked) << "\n";
    } else if (b_step->parsed()) {
      const auto verdict =
          step_function_check(q, eps, delta, gamma, Protocol::identity(), Protocol::identity());
      std::cout << "contradiction: " << yesno(verdict.contradiction) << "\n"
                << "composed_arity = " << verdict.composed_arity << "\n"
                << "claimed_p = " << fmt(verdict.claimed_p) << "\n"
                << "assumed_ceiling = " << fmt(verdict.assumed_ceiling) << "\n"
                << verdict.summary << "\n";
    } else if (verify_all_cmd->parsed()) {
      const VerifyOutcome outcome = verify_all(seed, threads);
      std::cout << outcome.render();
      return outcome.all_pass ? 0 : 1;
    } else {
      std::cerr << app.help() << "\n";
      return 1;
    }
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const InternalError& e) {
    std::cerr << "internal invariant failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

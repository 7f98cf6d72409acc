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
#include <complex>
#include <cstdint>
#include <functional>
#include <random>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "nlbox/box.hpp"
#include "nlbox/common.hpp"
#include "nlbox/wiring.hpp"

namespace nlbox {

using Complex = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using Mat2 = Eigen::Matrix2cd;
using Mat4 = Eigen::Matrix4cd;

// ---------------------------------------------------------------------------
// Elementary matrices. Qubit 0 is the leftmost (most significant) tensor
// factor throughout.
// ---------------------------------------------------------------------------

inline const Mat2& pauli_x() {
  static const Mat2 m = (Mat2() << 0, 1, 1, 0).finished();
  return m;
}
inline const Mat2& pauli_y() {
  static const Mat2 m = (Mat2() << 0, Complex(0, -1), Complex(0, 1), 0).finished();
  return m;
}
inline const Mat2& pauli_z() {
  static const Mat2 m = (Mat2() << 1, 0, 0, -1).finished();
  return m;
}
inline const Mat2& pauli(int i) {
  switch (i) {
    case 1: return pauli_x();
    case 2: return pauli_y();
    default: return pauli_z();
  }
}

inline Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline Mat tensor_power(const Mat& m, int n) {
  Mat out = Mat::Identity(1, 1);
  for (int i = 0; i < n; ++i) out = kron(out, m);
  return out;
}

struct BellBasis {
  static Vec phi_plus() { return (Vec(4) << 1, 0, 0, 1).finished() / std::sqrt(2.0); }
  static Vec phi_minus() { return (Vec(4) << 1, 0, 0, -1).finished() / std::sqrt(2.0); }
  static Vec psi_plus() { return (Vec(4) << 0, 1, 1, 0).finished() / std::sqrt(2.0); }
  static Vec psi_minus() { return (Vec(4) << 0, 1, -1, 0).finished() / std::sqrt(2.0); }
};

// ---------------------------------------------------------------------------
// States
// ---------------------------------------------------------------------------

/// Validated density matrix: Hermitian, unit trace, PSD up to the tolerances
/// that tensor powers and partial traces can accumulate.
struct DensityMatrix {
  Mat mat;

  int dim() const { return static_cast<int>(mat.rows()); }

  static DensityMatrix make(Mat m) {
    const auto d = m.rows();
    if (d != m.cols() || d < 2 || (d & (d - 1)) != 0)
      throw DomainError("density matrix dimension must be a power of two");
    if ((m - m.adjoint()).cwiseAbs().maxCoeff() > 1e-12)
      throw DomainError("density matrix is not Hermitian");
    if (std::abs(m.trace() - Complex(1.0)) > 1e-12)
      throw DomainError("density matrix trace is not 1");
    Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-10)
      throw DomainError("density matrix has a negative eigenvalue");
    return DensityMatrix{std::move(m)};
  }
};

struct OmegaState {
  double alpha;
  DensityMatrix state;
};

/// The weakly entangled mixed state: (1+a)/2 |Phi+><Phi+| + (1-a)/2
/// |Phi-><Phi-|, equal to a |Phi+><Phi+| + (1-a)/2 (|00><00| + |11><11|).
inline OmegaState omega(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("omega: alpha must lie in [0,1]");
  const Vec phi_p = BellBasis::phi_plus();
  const Vec phi_m = BellBasis::phi_minus();
  const Mat bell_form = 0.5 * (1.0 + alpha) * (phi_p * phi_p.adjoint()) +
                        0.5 * (1.0 - alpha) * (phi_m * phi_m.adjoint());
  Mat direct_form = alpha * (phi_p * phi_p.adjoint());
  direct_form(0, 0) += 0.5 * (1.0 - alpha);
  direct_form(3, 3) += 0.5 * (1.0 - alpha);
  if ((bell_form - direct_form).cwiseAbs().maxCoeff() > 1e-12)
    throw InternalError("omega: the two construction forms disagree");
  return OmegaState{alpha, DensityMatrix::make(bell_form)};
}

// ---------------------------------------------------------------------------
// Binary projective measurements
// ---------------------------------------------------------------------------

/// Qubit observable with eigenvalues +1/-1, kept together with its projector
/// splitting M = P0 - P1, P0 + P1 = I.
struct Observable {
  Mat2 m;

  Mat2 projector(int outcome) const {
    return 0.5 * (Mat2::Identity() + (outcome == 0 ? 1.0 : -1.0) * m);
  }

  static Observable from_bloch(double nx, double ny, double nz) {
    const double norm = std::sqrt(nx * nx + ny * ny + nz * nz);
    if (std::abs(norm - 1.0) > 1e-9)
      throw DomainError("observable: Bloch vector must be unit length");
    Observable o{nx * pauli_x() + ny * pauli_y() + nz * pauli_z()};
    return o;
  }

  void validate() const {
    if ((m - m.adjoint()).cwiseAbs().maxCoeff() > 1e-12)
      throw DomainError("observable is not Hermitian");
    if ((m * m - Mat2::Identity()).cwiseAbs().maxCoeff() > 1e-12)
      throw DomainError("observable does not square to the identity");
  }
};

struct MeasurementSetting {
  std::array<Observable, 2> alice;
  std::array<Observable, 2> bob;
};

/// Born-rule box: P(a,b|x,y) = Tr((P_A^{x,a} x P_B^{y,b}) rho). Always
/// non-signaling.
inline Box measure_box(const DensityMatrix& rho, const std::array<Observable, 2>& alice,
                       const std::array<Observable, 2>& bob) {
  if (rho.dim() != 4) throw DomainError("measure_box expects a two-qubit state");
  for (const auto& o : alice) o.validate();
  for (const auto& o : bob) o.validate();
  Box out;
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          const Mat joint = kron(alice[x].projector(a), bob[y].projector(b));
          out.at(a, b, x, y) = (joint * rho.mat).trace().real();
        }
  return out;
}

/// Measurement directions that extract the full non-locality of Omega_alpha:
/// Alice uses sigma_Z and sigma_X, Bob uses (+-alpha sigma_X + sigma_Z) /
/// sqrt(1+alpha^2).
inline MeasurementSetting canonical_measurements(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw DomainError("canonical_measurements: alpha must lie in [0,1]");
  const double s = std::sqrt(1.0 + alpha * alpha);
  MeasurementSetting ms{{Observable::from_bloch(0, 0, 1), Observable::from_bloch(1, 0, 0)},
                        {Observable::from_bloch(alpha / s, 0, 1.0 / s),
                         Observable::from_bloch(-alpha / s, 0, 1.0 / s)}};
  return ms;
}

/// Measures Omega_alpha with the canonical settings and applies the
/// two-branch twirl, producing an isotropic box with q = 1/2 + sqrt(1+a^2)/4.
inline Box simulate_isotropic(double alpha) {
  const Box raw = measure_box(omega(alpha).state, canonical_measurements(alpha).alice,
                              canonical_measurements(alpha).bob);
  return apply_wiring(twirl_protocol(), raw);
}

// ---------------------------------------------------------------------------
// T-matrix machinery: T_ij = Tr(rho (sigma_i x sigma_j)) carries both the
// CHSH maximum and the fully entangled fraction of a two-qubit state.
// ---------------------------------------------------------------------------

inline Eigen::Matrix3d t_matrix(const DensityMatrix& rho) {
  if (rho.dim() != 4) throw DomainError("t_matrix expects a two-qubit state");
  Eigen::Matrix3d t;
  for (int i = 1; i <= 3; ++i)
    for (int j = 1; j <= 3; ++j)
      t(i - 1, j - 1) = (kron(pauli(i), pauli(j)) * rho.mat).trace().real();
  return t;
}

/// Maximal CHSH value over projective qubit measurements: 2 sqrt(u1+u2) with
/// u1 >= u2 the two largest eigenvalues of T^T T.
inline double nl_state(const DensityMatrix& rho) {
  const Eigen::Matrix3d t = t_matrix(rho);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(t.transpose() * t);
  const auto& ev = es.eigenvalues();  // ascending
  return 2.0 * std::sqrt(std::max(0.0, ev(2) + ev(1)));
}

/// Observables attaining nl_state, built from the top eigenvectors of T^T T.
inline MeasurementSetting optimal_chsh_measurements(const DensityMatrix& rho) {
  const Eigen::Matrix3d t = t_matrix(rho);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(t.transpose() * t);
  const Eigen::Vector3d c1 = es.eigenvectors().col(2);
  const Eigen::Vector3d c2 = es.eigenvectors().col(1);
  const double u1 = std::max(0.0, es.eigenvalues()(2));
  const double u2 = std::max(0.0, es.eigenvalues()(1));
  auto unit_or = [](const Eigen::Vector3d& v, const Eigen::Vector3d& fallback) {
    const double n = v.norm();
    return n > 1e-12 ? Eigen::Vector3d(v / n) : fallback;
  };
  const Eigen::Vector3d a0 = unit_or(t * c1, Eigen::Vector3d(0, 0, 1));
  Eigen::Vector3d a1 = unit_or(t * c2, Eigen::Vector3d(1, 0, 0));
  if (std::abs(a0.dot(a1)) > 0.5) a1 = unit_or(a0.unitOrthogonal(), Eigen::Vector3d(1, 0, 0));
  const double theta = std::atan2(std::sqrt(u2), std::sqrt(u1));
  const Eigen::Vector3d b0 = std::cos(theta) * c1 + std::sin(theta) * c2;
  const Eigen::Vector3d b1 = std::cos(theta) * c1 - std::sin(theta) * c2;
  auto obs = [](const Eigen::Vector3d& v) { return Observable::from_bloch(v(0), v(1), v(2)); };
  return MeasurementSetting{{obs(a0), obs(a1)}, {obs(b0), obs(b1)}};
}

/// F+(sigma) = <Phi+| sigma |Phi+>, no local-unitary optimization.
inline double fidelity_plus(const DensityMatrix& sigma) {
  if (sigma.dim() != 4) throw DomainError("fidelity_plus expects a two-qubit state");
  const Vec phi = BellBasis::phi_plus();
  return (phi.adjoint() * sigma.mat * phi)(0).real();
}

/// Fully entangled fraction, closed form: F = (1 + s1 + s2 +- s3)/4 with the
/// singular values of T, the sign fixed by det T (minus iff det T > 0).
inline double fully_entangled_fraction(const DensityMatrix& rho) {
  const Eigen::Matrix3d t = t_matrix(rho);
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(t);
  const auto& s = svd.singularValues();
  const double third = (t.determinant() <= 0.0) ? s(2) : -s(2);
  return 0.25 * (1.0 + s(0) + s(1) + third);
}

namespace detail {

inline Mat2 su2_from_angles(double theta, double phi, double lambda) {
  const Complex i(0, 1);
  Mat2 rz1, ry, rz2;
  rz1 << std::exp(-i * phi / 2.0), 0, 0, std::exp(i * phi / 2.0);
  ry << std::cos(theta / 2.0), -std::sin(theta / 2.0), std::sin(theta / 2.0),
      std::cos(theta / 2.0);
  rz2 << std::exp(-i * lambda / 2.0), 0, 0, std::exp(i * lambda / 2.0);
  return rz1 * ry * rz2;
}

/// Nelder-Mead maximization; returns the best value found.
inline double nelder_mead_max(const std::function<double(const std::array<double, 6>&)>& f,
                              std::array<double, 6> start, int max_iter, double tol) {
  constexpr int n = 6;
  std::array<std::array<double, 6>, 7> simplex;
  std::array<double, 7> value;
  simplex[0] = start;
  for (int i = 0; i < n; ++i) {
    simplex[i + 1] = start;
    simplex[i + 1][i] += 0.45;
  }
  for (int i = 0; i <= n; ++i) value[i] = f(simplex[i]);
  for (int iter = 0; iter < max_iter; ++iter) {
    std::array<int, 7> idx;
    for (int i = 0; i <= n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return value[a] > value[b]; });
    if (value[idx[0]] - value[idx[n]] < tol) break;
    const int worst = idx[n];
    std::array<double, 6> centroid{};
    for (int i = 0; i <= n; ++i)
      if (i != worst)
        for (int d = 0; d < n; ++d) centroid[d] += simplex[i][d] / n;
    auto blend = [&](double c) {
      std::array<double, 6> p;
      for (int d = 0; d < n; ++d) p[d] = centroid[d] + c * (centroid[d] - simplex[worst][d]);
      return p;
    };
    const auto refl = blend(1.0);
    const double frefl = f(refl);
    if (frefl > value[idx[0]]) {
      const auto expd = blend(2.0);
      const double fexp = f(expd);
      if (fexp > frefl) {
        simplex[worst] = expd;
        value[worst] = fexp;
      } else {
        simplex[worst] = refl;
        value[worst] = frefl;
      }
    } else if (frefl > value[idx[n - 1]]) {
      simplex[worst] = refl;
      value[worst] = frefl;
    } else {
      const auto contr = blend(-0.5);
      const double fcontr = f(contr);
      if (fcontr > value[worst]) {
        simplex[worst] = contr;
        value[worst] = fcontr;
      } else {
        for (int i = 0; i <= n; ++i) {
          if (i == idx[0]) continue;
          for (int d = 0; d < n; ++d)
            simplex[i][d] = 0.5 * (simplex[i][d] + simplex[idx[0]][d]);
          value[i] = f(simplex[i]);
        }
      }
    }
  }
  return *std::max_element(value.begin(), value.end());
}

}  // namespace detail

/// Derivative-free maximization of <Phi+|(UA x UB) rho (UA x UB)^dag|Phi+>
/// over a 6-parameter local-unitary chart; multi-start, used as the
/// cross-check for the closed form.
inline double fully_entangled_fraction_optimized(const DensityMatrix& rho, int starts = 32,
                                                 std::uint64_t seed = kDefaultSeed) {
  if (rho.dim() != 4) throw DomainError("fully_entangled_fraction expects a two-qubit state");
  const Vec phi = BellBasis::phi_plus();
  auto objective = [&](const std::array<double, 6>& p) {
    const Mat2 ua = detail::su2_from_angles(p[0], p[1], p[2]);
    const Mat2 ub = detail::su2_from_angles(p[3], p[4], p[5]);
    const Vec w = kron(ua, ub).adjoint() * phi;
    return (w.adjoint() * rho.mat * w)(0).real();
  };
  double best = 0.0;
  for (int s = 0; s < starts; ++s) {
    std::array<double, 6> start{};
    if (s > 0) {
      auto rng = derived_rng(seed, static_cast<std::uint64_t>(s));
      std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
      for (double& v : start) v = angle(rng);
    }
    best = std::max(best, detail::nelder_mead_max(objective, start, 600, 1e-10));
  }
  return best;
}

/// Closed form cross-checked against the optimizer; throws if they disagree
/// beyond 1e-6.
inline double fully_entangled_fraction_checked(const DensityMatrix& rho, int starts = 32,
                                               std::uint64_t seed = kDefaultSeed) {
  const double closed = fully_entangled_fraction(rho);
  const double optimized = fully_entangled_fraction_optimized(rho, starts, seed);
  if (std::abs(closed - optimized) > 1e-6)
    throw OptimizerDivergenceError("fully entangled fraction: closed form " +
                                   std::to_string(closed) + " vs optimizer " +
                                   std::to_string(optimized));
  return closed;
}

/// Maximal CHSH value for a given fully entangled fraction: 4F on [1/4,1/2),
/// 2 sqrt(1+(2F-1)^2) on [1/2,1]; both branches give 2 at F = 1/2.
inline double nl_upper_from_F(double f) {
  if (!(f >= 0.25 - 1e-12 && f <= 1.0 + 1e-12))
    throw DomainError("nl_upper_from_F: F must lie in [1/4,1]");
  if (f < 0.5) return 4.0 * f;
  const double d = 2.0 * f - 1.0;
  return 2.0 * std::sqrt(1.0 + d * d);
}

/// c(alpha) = alpha (2 sqrt(2) - 2) - 2 sqrt(1+alpha^2) + 2.
inline double c_alpha(double alpha) {
  if (!(alpha >= -1e-12 && alpha <= 1.0 + 1e-12))
    throw DomainError("c_alpha: alpha must lie in [0,1]");
  return alpha * (2.0 * std::sqrt(2.0) - 2.0) - 2.0 * std::sqrt(1.0 + alpha * alpha) + 2.0;
}

// ---------------------------------------------------------------------------
// Random sampling
// ---------------------------------------------------------------------------

/// Haar-random unitary: QR of a complex Ginibre matrix with the R-diagonal
/// phases folded into Q.
inline Mat haar_unitary(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Mat g(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) g(i, j) = Complex(gauss(rng), gauss(rng));
  Eigen::HouseholderQR<Mat> qr(g);
  Mat q = qr.householderQ();
  const Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < dim; ++i) {
    const Complex d = r(i, i);
    q.col(i) *= (std::abs(d) > 1e-300) ? d / std::abs(d) : 1.0;
  }
  return q;
}

inline Vec random_pure_state(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v(i) = Complex(gauss(rng), gauss(rng));
  return v / v.norm();
}

/// Hilbert-Schmidt random density matrix: G G^dag / Tr.
inline DensityMatrix random_density_matrix(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Mat g(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) g(i, j) = Complex(gauss(rng), gauss(rng));
  Mat rho = g * g.adjoint();
  rho /= rho.trace();
  rho = 0.5 * (rho + rho.adjoint());
  return DensityMatrix::make(std::move(rho));
}

// ---------------------------------------------------------------------------
// Qubit bookkeeping
// ---------------------------------------------------------------------------

/// Reorders tensor factors: new position i holds old qubit perm[i].
inline Mat permute_qubits(const Mat& rho, const std::vector<int>& perm) {
  const int n = static_cast<int>(perm.size());
  const int dim = 1 << n;
  if (rho.rows() != dim) throw DomainError("permute_qubits: dimension mismatch");
  std::vector<int> newidx(dim);
  for (int old = 0; old < dim; ++old) {
    int idx = 0;
    for (int i = 0; i < n; ++i) idx |= ((old >> (n - 1 - perm[i])) & 1) << (n - 1 - i);
    newidx[old] = idx;
  }
  Mat out(dim, dim);
  for (int r = 0; r < dim; ++r)
    for (int c = 0; c < dim; ++c) out(newidx[r], newidx[c]) = rho(r, c);
  return out;
}

/// Traces out every qubit not listed in keep (positions big-endian).
inline Mat partial_trace_keep(const Mat& rho, int n_qubits, const std::vector<int>& keep) {
  const int k = static_cast<int>(keep.size());
  std::vector<int> traced;
  for (int i = 0; i < n_qubits; ++i)
    if (std::find(keep.begin(), keep.end(), i) == keep.end()) traced.push_back(i);
  const int t = static_cast<int>(traced.size());
  auto assemble = [&](int kept_bits, int traced_bits) {
    int idx = 0;
    for (int i = 0; i < k; ++i)
      idx |= ((kept_bits >> (k - 1 - i)) & 1) << (n_qubits - 1 - keep[i]);
    for (int i = 0; i < t; ++i)
      idx |= ((traced_bits >> (t - 1 - i)) & 1) << (n_qubits - 1 - traced[i]);
    return idx;
  };
  Mat out = Mat::Zero(1 << k, 1 << k);
  for (int r = 0; r < (1 << k); ++r)
    for (int c = 0; c < (1 << k); ++c) {
      Complex sum = 0;
      for (int tr = 0; tr < (1 << t); ++tr) sum += rho(assemble(r, tr), assemble(c, tr));
      out(r, c) = sum;
    }
  return out;
}

/// Omega_alpha^(x)n with qubits reordered to (A1..An, B1..Bn).
inline Mat omega_power_on_sides(double alpha, int n) {
  const Mat base = tensor_power(omega(alpha).state.mat, n);
  std::vector<int> perm(2 * n);
  for (int i = 0; i < n; ++i) {
    perm[i] = 2 * i;          // Alice block
    perm[n + i] = 2 * i + 1;  // Bob block
  }
  return permute_qubits(base, perm);
}

// ---------------------------------------------------------------------------
// Tensor-power decomposition: Omega_alpha^(x)n as a mixture of the 3^n
// product states built from |00>, |11>, |Phi+> on each pair.
// ---------------------------------------------------------------------------

struct DecompositionTerm {
  std::vector<int> pattern;  // per pair: 0, 1, or 2 (the Phi+ slot)
  int degree;                // count of non-Phi+ entries
  double weight;             // alpha^(n-r) ((1-alpha)/2)^r
};

inline std::vector<DecompositionTerm> omega_power_decomposition(double alpha, int n) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw DomainError("omega_power_decomposition: alpha must lie in [0,1]");
  if (n < 1 || n > 4)
    throw DimensionBudgetError("omega_power_decomposition supports n in [1,4]");
  std::vector<DecompositionTerm> terms;
  std::vector<int> pattern(n, 0);
  int count = 1;
  for (int i = 0; i < n; ++i) count *= 3;
  for (int code = 0; code < count; ++code) {
    int c = code;
    int degree = 0;
    for (int j = 0; j < n; ++j) {
      pattern[j] = c % 3;
      c /= 3;
      if (pattern[j] != 2) ++degree;
    }
    const double weight =
        std::pow(alpha, n - degree) * std::pow(0.5 * (1.0 - alpha), degree);
    terms.push_back({pattern, degree, weight});
  }
  return terms;
}

/// |phi_v> on the pair-ordered qubits (A1 B1 A2 B2 ...).
inline Vec decomposition_state(const DecompositionTerm& term) {
  Vec zero = (Vec(4) << 1, 0, 0, 0).finished();
  Vec one = (Vec(4) << 0, 0, 0, 1).finished();
  Vec state = Vec::Ones(1);
  for (int sym : term.pattern) {
    const Vec& factor = (sym == 0) ? zero : (sym == 1) ? one : BellBasis::phi_plus();
    Vec next(state.size() * 4);
    for (Eigen::Index i = 0; i < state.size(); ++i) next.segment(i * 4, 4) = state(i) * factor;
    state = next;
  }
  return state;
}

inline Mat reconstruct_decomposition(const std::vector<DecompositionTerm>& terms) {
  if (terms.empty()) throw DomainError("empty decomposition");
  const int dim = 1 << (2 * static_cast<int>(terms.front().pattern.size()));
  Mat sum = Mat::Zero(dim, dim);
  for (const auto& term : terms) {
    if (term.weight == 0.0) continue;
    const Vec v = decomposition_state(term);
    sum += term.weight * (v * v.adjoint());
  }
  return sum;
}

// ---------------------------------------------------------------------------
// Entanglement distillation protocols without communication: local unitaries
// on Omega_alpha^(x)n plus ancillas, then partial trace to one qubit a side.
// ---------------------------------------------------------------------------

struct EdpSample {
  DensityMatrix output;
  double fidelity;
};

namespace detail {

inline Mat edp_input_state(double alpha, int n, int ancillas) {
  const int side = n + ancillas;
  if (side > 6 || (1 << (2 * side)) > 4096)
    throw DimensionBudgetError("EDP dimension budget exceeded (total dim must stay <= 4096)");
  Mat state = omega_power_on_sides(alpha, n);  // (A1..An, B1..Bn)
  for (int i = 0; i < 2 * ancillas; ++i) {
    Mat zero = Mat::Zero(2, 2);
    zero(0, 0) = 1.0;
    state = kron(state, zero);
  }
  // Current order: A1..An B1..Bn ZA1..ZAk ZB1..ZBk -> group per side.
  std::vector<int> perm;
  for (int i = 0; i < n; ++i) perm.push_back(i);
  for (int i = 0; i < ancillas; ++i) perm.push_back(2 * n + i);
  for (int i = 0; i < n; ++i) perm.push_back(n + i);
  for (int i = 0; i < ancillas; ++i) perm.push_back(2 * n + ancillas + i);
  return permute_qubits(state, perm);
}

inline EdpSample run_edp(double alpha, int n, int ancillas, const Mat& ua, const Mat& ub) {
  const int side = n + ancillas;
  const Mat u = kron(ua, ub);
  const Mat out_full = u * edp_input_state(alpha, n, ancillas) * u.adjoint();
  Mat two_qubit = partial_trace_keep(out_full, 2 * side, {0, side});
  two_qubit = 0.5 * (two_qubit + two_qubit.adjoint());
  DensityMatrix rho = DensityMatrix::make(std::move(two_qubit));
  const double f = fully_entangled_fraction(rho);
  return EdpSample{std::move(rho), f};
}

}  // namespace detail

/// One Haar-random non-interactive EDP, reproducible from the seed.
inline EdpSample sample_edp(double alpha, int n, int ancillas, std::uint64_t seed) {
  if (n < 1 || n > 3) throw DimensionBudgetError("sample_edp supports n in [1,3]");
  if (ancillas < 0 || ancillas > 2)
    throw DimensionBudgetError("sample_edp supports at most 2 ancillas per side");
  auto rng = derived_rng(seed, 0);
  const int side_dim = 1 << (n + ancillas);
  const Mat ua = haar_unitary(side_dim, rng);
  const Mat ub = haar_unitary(side_dim, rng);
  return detail::run_edp(alpha, n, ancillas, ua, ub);
}

/// The do-nothing EDP keeping the first pair; attains F = (1+alpha)/2.
inline EdpSample edp_identity(double alpha, int n) {
  const int side_dim = 1 << n;
  return detail::run_edp(alpha, n, 0, Mat::Identity(side_dim, side_dim),
                         Mat::Identity(side_dim, side_dim));
}

struct EdpSweepResult {
  double max_fidelity = 0.0;
  std::uint64_t argmax_trial = 0;
  double fidelity_sum = 0.0;  // order-independent digest of all trials
  std::uint64_t trials = 0;
};

/// Seeded trials partitioned deterministically; the result is bit-identical
/// for every thread count (each trial writes its own slot, the reduction runs
/// in trial order).
inline EdpSweepResult edp_sweep(double alpha, int n, int ancillas, std::uint64_t trials,
                                std::uint64_t seed, int threads = 0) {
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min<int>(threads, 64));
  std::vector<double> fidelities(trials, 0.0);
  auto work = [&](int tid) {
    for (std::uint64_t trial = tid; trial < trials; trial += threads)
      fidelities[trial] = sample_edp(alpha, n, ancillas, splitmix64(seed) ^ trial).fidelity;
  };
  std::vector<std::thread> pool;
  for (int tid = 0; tid < threads; ++tid) pool.emplace_back(work, tid);
  for (auto& th : pool) th.join();
  EdpSweepResult merged;
  merged.trials = trials;
  for (std::uint64_t trial = 0; trial < trials; ++trial) {
    merged.fidelity_sum += fidelities[trial];
    if (fidelities[trial] > merged.max_fidelity) {
      merged.max_fidelity = fidelities[trial];
      merged.argmax_trial = trial;
    }
  }
  return merged;
}

// ---------------------------------------------------------------------------
// Lemma-5 style witness: ensembles whose mean fully entangled fraction stays
// below F(Omega_alpha) must keep their mean CHSH value below
// NL[Omega_alpha] + c(alpha).
// ---------------------------------------------------------------------------

struct Lemma5Report {
  std::uint64_t trials = 0;
  std::uint64_t violations = 0;
  double min_conclusion_slack = 0.0;  // bound minus achieved mean NL, minimum over trials
  double extremal_premise_gap = 0.0;
  double extremal_conclusion_gap = 0.0;
};

inline Lemma5Report lemma5_witness(double alpha, std::uint64_t trials,
                                   std::uint64_t seed = kDefaultSeed) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("lemma5_witness: alpha must lie in [0,1]");
  const double premise_cap = 0.5 * (1.0 + alpha);
  const double conclusion_cap = 2.0 * std::sqrt(1.0 + alpha * alpha) + c_alpha(alpha);
  Lemma5Report report;
  report.trials = trials;
  report.min_conclusion_slack = conclusion_cap;
  const Mat id4 = Mat::Identity(4, 4);
  for (std::uint64_t trial = 0; trial < trials; ++trial) {
    auto rng = derived_rng(seed, trial);
    std::uniform_int_distribution<int> size_dist(1, 4);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int k = size_dist(rng);
    std::vector<double> weights(k);
    double wsum = 0.0;
    for (double& w : weights) {
      w = -std::log(std::max(unit(rng), 1e-300));
      wsum += w;
    }
    for (double& w : weights) w /= wsum;
    std::vector<DensityMatrix> states;
    states.reserve(k);
    for (int i = 0; i < k; ++i) {
      if (unit(rng) < 0.5) {
        const Vec psi = random_pure_state(4, rng);
        states.push_back(DensityMatrix::make(psi * psi.adjoint()));
      } else {
        states.push_back(random_density_matrix(4, rng));
      }
    }
    auto mean_f = [&] {
      double s = 0.0;
      for (int i = 0; i < k; ++i) s += weights[i] * fully_entangled_fraction(states[i]);
      return s;
    };
    // Enforce the premise by shrinking toward the maximally mixed state; the
    // fully entangled fraction is convex, so this can only lower the mean.
    double mf = mean_f();
    while (mf > premise_cap) {
      double t = (premise_cap - 0.25) / (mf - 0.25);
      t = std::min(0.999, std::max(0.0, t));
      for (auto& s : states)
        s = DensityMatrix::make((t * s.mat + (1.0 - t) * 0.25 * id4).eval());
      mf = mean_f();
    }
    double mean_nl = 0.0;
    for (int i = 0; i < k; ++i) mean_nl += weights[i] * nl_state(states[i]);
    const double slack = conclusion_cap - mean_nl;
    report.min_conclusion_slack = std::min(report.min_conclusion_slack, slack);
    if (mean_nl > conclusion_cap + 1e-9) ++report.violations;
  }

  // Extremal ensemble: weight alpha on |Phi+>, weight 1-alpha on |00>.
  const Vec phi = BellBasis::phi_plus();
  const DensityMatrix bell = DensityMatrix::make(phi * phi.adjoint());
  Mat zero = Mat::Zero(4, 4);
  zero(0, 0) = 1.0;
  const DensityMatrix product = DensityMatrix::make(std::move(zero));
  const double prem = alpha * fully_entangled_fraction(bell) +
                      (1.0 - alpha) * fully_entangled_fraction(product);
  const double concl = alpha * nl_state(bell) + (1.0 - alpha) * nl_state(product);
  report.extremal_premise_gap = std::abs(prem - premise_cap);
  report.extremal_conclusion_gap = std::abs(concl - conclusion_cap);

  if (report.violations > 0)
    throw CounterexampleFoundError(
        "lemma5_witness found " + std::to_string(report.violations) +
        " conclusion violations; this falsifies the implementation, not the bound");
  return report;
}

// ---------------------------------------------------------------------------
// State file format: {"dim": d, "re": [[...]], "im": [[...]]}.
// ---------------------------------------------------------------------------

inline nlohmann::json state_to_json(const DensityMatrix& rho) {
  const int d = rho.dim();
  nlohmann::json re = nlohmann::json::array(), im = nlohmann::json::array();
  for (int i = 0; i < d; ++i) {
    nlohmann::json rrow = nlohmann::json::array(), irow = nlohmann::json::array();
    for (int j = 0; j < d; ++j) {
      rrow.push_back(rho.mat(i, j).real());
      irow.push_back(rho.mat(i, j).imag());
    }
    re.push_back(rrow);
    im.push_back(irow);
  }
  return nlohmann::json{{"dim", d}, {"re", re}, {"im", im}};
}

inline DensityMatrix state_from_json(const nlohmann::json& j) {
  try {
    const int d = j.at("dim").get<int>();
    Mat m(d, d);
    for (int i = 0; i < d; ++i)
      for (int k = 0; k < d; ++k)
        m(i, k) = Complex(j.at("re").at(i).at(k).get<double>(),
                          j.at("im").at(i).at(k).get<double>());
    return DensityMatrix::make(std::move(m));
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("state file: ") + e.what());
  }
}

}  // namespace nlbox

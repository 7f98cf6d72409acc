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

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "nlbox/common.hpp"
#include "nlbox/quantum.hpp"

namespace nlbox {

/// Orthonormal basis in which two complementary projector pairs are
/// simultaneously block diagonal, blocks of size 1 or 2.
struct BlockDecomposition {
  Mat basis;
  std::vector<int> block_sizes;
};

/// Frobenius mass of the entries of `m` outside the declared diagonal blocks.
inline double off_block_mass(const Mat& m, const std::vector<int>& block_sizes) {
  double off = 0.0;
  int row_start = 0;
  std::vector<std::pair<int, int>> ranges;
  for (int s : block_sizes) {
    ranges.emplace_back(row_start, s);
    row_start += s;
  }
  for (const auto& [r0, rs] : ranges)
    for (int r = r0; r < r0 + rs; ++r)
      for (int c = 0; c < m.cols(); ++c) {
        if (c >= r0 && c < r0 + rs) continue;
        off += std::norm(m(r, c));
      }
  return std::sqrt(off);
}

namespace detail {

inline void check_projector(const Mat& p, const char* name) {
  if ((p - p.adjoint()).cwiseAbs().maxCoeff() > 1e-10)
    throw NotProjectorError(std::string(name) + " is not Hermitian");
  if ((p * p - p).cwiseAbs().maxCoeff() > 1e-10)
    throw NotProjectorError(std::string(name) + " is not idempotent");
}

}  // namespace detail

/// Constructive simultaneous block diagonalization of P0,P1,Q0,Q1 with
/// P0+P1 = Q0+Q1 = I.
///
/// Q0, Q0 P0 Q0 and Q0 P1 Q0 commute; a random real combination splits their
/// joint eigenbasis. Each joint eigenvector v in range(Q0) with
/// lam = <v|P0|v> strictly inside (0,1) spans a 2x2 block together with its
/// partner through a1 = P0 v, a2 = P1 v (the vector a1/lam1 - a2/lam2 lies in
/// range(Q1)); lam at 0 or 1 gives a 1x1 block. Whatever remains is inside
/// range(Q1) and P0 restricts to a projector there, yielding 1x1 blocks.
inline BlockDecomposition block_diagonalize(const Mat& p0, const Mat& p1, const Mat& q0,
                                            const Mat& q1, std::uint64_t seed = kDefaultSeed) {
  const auto d = p0.rows();
  if (p1.rows() != d || q0.rows() != d || q1.rows() != d || p0.cols() != d || p1.cols() != d ||
      q0.cols() != d || q1.cols() != d)
    throw DomainError("block_diagonalize: projectors must be square and of equal dimension");
  detail::check_projector(p0, "P0");
  detail::check_projector(p1, "P1");
  detail::check_projector(q0, "Q0");
  detail::check_projector(q1, "Q1");
  if ((p0 + p1 - Mat::Identity(d, d)).cwiseAbs().maxCoeff() > 1e-10)
    throw NotComplementaryError("P0 + P1 != I");
  if ((q0 + q1 - Mat::Identity(d, d)).cwiseAbs().maxCoeff() > 1e-10)
    throw NotComplementaryError("Q0 + Q1 != I");

  const Mat qpq0 = q0 * p0 * q0;
  const Mat qpq1 = q0 * p1 * q0;
  constexpr double kDegenerate = 1e-10;

  for (int attempt = 0; attempt < 8; ++attempt) {
    auto rng = derived_rng(seed, static_cast<std::uint64_t>(attempt));
    std::uniform_real_distribution<double> coeff(1.0, 2.0);
    const Mat mix = coeff(rng) * q0 + coeff(rng) * qpq0 + coeff(rng) * qpq1;
    Eigen::SelfAdjointEigenSolver<Mat> es(mix);
    const Mat& vectors = es.eigenvectors();

    bool joint = true;
    for (Eigen::Index col = 0; col < d && joint; ++col) {
      const Vec v = vectors.col(col);
      for (const Mat* op : {&q0, &qpq0, &qpq1}) {
        const Vec image = (*op) * v;
        const Complex lam = v.dot(image);
        if ((image - lam * v).norm() > 1e-8) {
          joint = false;
          break;
        }
      }
    }
    if (!joint) continue;  // unlucky draw collided distinct joint eigenvalues

    std::vector<Vec> columns;
    std::vector<int> sizes;
    bool clean = true;
    for (Eigen::Index col = 0; col < d && clean; ++col) {
      const Vec v = vectors.col(col);
      const double q = (v.adjoint() * q0 * v)(0).real();
      if (std::abs(q - 1.0) <= 1e-8) {
        const double lam = (v.adjoint() * p0 * v)(0).real();
        if (lam <= kDegenerate || lam >= 1.0 - kDegenerate) {
          columns.push_back(v);
          sizes.push_back(1);
        } else {
          const Vec a1 = (p0 * v) / std::sqrt(lam);
          const Vec a2 = (p1 * v) / std::sqrt(1.0 - lam);
          columns.push_back(a1);
          columns.push_back(a2);
          sizes.push_back(2);
        }
      } else if (std::abs(q) > 1e-8) {
        clean = false;  // projector eigenvalue off {0,1}: eigenbasis unusable
      }
    }
    if (!clean) continue;

    // Leftover space: orthogonal complement of the collected blocks; it lies
    // inside range(Q1) and P0 restricts to a projector on it.
    const auto t = static_cast<Eigen::Index>(columns.size());
    if (t < d) {
      Mat c(d, t);
      for (Eigen::Index i = 0; i < t; ++i) c.col(i) = columns[i];
      Eigen::HouseholderQR<Mat> qr(c);
      const Mat full = qr.householderQ();
      const Mat s = full.rightCols(d - t);
      const Mat compressed = s.adjoint() * p0 * s;
      Eigen::SelfAdjointEigenSolver<Mat> les(compressed);
      bool leftover_ok = true;
      for (Eigen::Index i = 0; i < d - t; ++i) {
        const double mu = les.eigenvalues()(i);
        if (std::min(std::abs(mu), std::abs(mu - 1.0)) > 1e-7) leftover_ok = false;
      }
      if (!leftover_ok) continue;
      for (Eigen::Index i = 0; i < d - t; ++i) {
        columns.push_back(s * les.eigenvectors().col(i));
        sizes.push_back(1);
      }
    }

    BlockDecomposition out;
    out.basis.resize(d, d);
    for (Eigen::Index i = 0; i < d; ++i) out.basis.col(i) = columns[i];
    out.block_sizes = sizes;

    if ((out.basis.adjoint() * out.basis - Mat::Identity(d, d)).cwiseAbs().maxCoeff() > 1e-10)
      continue;
    bool within = true;
    for (const Mat* op : {&p0, &p1, &q0, &q1}) {
      if (off_block_mass(out.basis.adjoint() * (*op) * out.basis, sizes) > 1e-10) {
        within = false;
        break;
      }
    }
    if (!within) continue;
    return out;
  }
  throw InternalError("block_diagonalize: no random draw produced a clean joint eigenbasis");
}

/// Random rank-r projector pair (P, I-P) from a Haar frame; test utility and
/// CLI demo input.
inline std::pair<Mat, Mat> random_complementary_projectors(int dim, std::mt19937_64& rng) {
  const Mat u = haar_unitary(dim, rng);
  std::uniform_int_distribution<int> rank_dist(0, dim);
  const int rank = rank_dist(rng);
  Mat p = Mat::Zero(dim, dim);
  for (int i = 0; i < rank; ++i) p += u.col(i) * u.col(i).adjoint();
  p = 0.5 * (p + p.adjoint());
  return {p, Mat::Identity(dim, dim) - p};
}

}  // namespace nlbox

// Copyright 2026 BiteNet Authors
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

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace bitenet {

/// Large finite negative constant used to disable attention entries.
/// Finite (not -inf) so softmax and its gradient stay NaN-free; after the
/// row max is subtracted, exp() of a disabled entry underflows to exactly 0.
template <typename Scalar>
constexpr Scalar kMaskNeg = Scalar(-1e9);

enum class MaskKind {
  kNone,      // every position may attend everywhere
  kDiagonal,  // self-attention disabled on the diagonal
  kForward,   // position i attends to later positions j > i
  kBackward,  // position i attends to earlier positions j < i
  kPadding,   // disabled key columns
  kCombined,
};

inline const char* to_string(MaskKind k) {
  switch (k) {
    case MaskKind::kNone: return "none";
    case MaskKind::kDiagonal: return "diagonal";
    case MaskKind::kForward: return "forward";
    case MaskKind::kBackward: return "backward";
    case MaskKind::kPadding: return "padding";
    case MaskKind::kCombined: return "combined";
  }
  return "?";
}

inline MaskKind mask_kind_from_string(const std::string& s) {
  if (s == "none") return MaskKind::kNone;
  if (s == "diagonal") return MaskKind::kDiagonal;
  if (s == "forward") return MaskKind::kForward;
  if (s == "backward") return MaskKind::kBackward;
  if (s == "padding") return MaskKind::kPadding;
  if (s == "combined") return MaskKind::kCombined;
  throw std::invalid_argument("unknown mask kind: " + s);
}

/// Additive attention mask; entries are exactly 0 (open) or kMaskNeg
/// (disabled).
template <typename Scalar>
struct AttentionMask {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  MaskKind kind = MaskKind::kNone;
  Matrix matrix;

  Eigen::Index size() const { return matrix.rows(); }
};

template <typename Scalar>
AttentionMask<Scalar> build_mask(MaskKind kind, Eigen::Index n) {
  if (n < 1) throw std::invalid_argument("build_mask: n must be >= 1");
  AttentionMask<Scalar> m;
  m.kind = kind;
  m.matrix.setZero(n, n);
  switch (kind) {
    case MaskKind::kNone:
      break;
    case MaskKind::kDiagonal:
      for (Eigen::Index i = 0; i < n; ++i) m.matrix(i, i) = kMaskNeg<Scalar>;
      break;
    case MaskKind::kForward:
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) m.matrix(i, j) = kMaskNeg<Scalar>;
      break;
    case MaskKind::kBackward:
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i; j < n; ++j) m.matrix(i, j) = kMaskNeg<Scalar>;
      break;
    default:
      throw std::invalid_argument("build_mask: padding/combined masks are built from validity");
  }
  return m;
}

/// Disables the key columns whose validity flag is false, for every query row.
template <typename Scalar>
AttentionMask<Scalar> key_padding_mask(const std::vector<char>& valid) {
  const Eigen::Index n = static_cast<Eigen::Index>(valid.size());
  AttentionMask<Scalar> m;
  m.kind = MaskKind::kPadding;
  m.matrix.setZero(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    if (!valid[static_cast<std::size_t>(j)]) m.matrix.col(j).setConstant(kMaskNeg<Scalar>);
  return m;
}

/// Elementwise minimum: an entry is open only if open in both masks.
template <typename Scalar>
AttentionMask<Scalar> combine(const AttentionMask<Scalar>& a,
                              const AttentionMask<Scalar>& b) {
  if (a.matrix.rows() != b.matrix.rows() || a.matrix.cols() != b.matrix.cols())
    throw std::invalid_argument("combine: mask shapes differ");
  AttentionMask<Scalar> m;
  m.kind = MaskKind::kCombined;
  m.matrix = a.matrix.cwiseMin(b.matrix);
  return m;
}

/// 1xn mask over a score row, open exactly at valid positions.
template <typename Scalar>
AttentionMask<Scalar> row_validity_mask(const std::vector<char>& valid) {
  AttentionMask<Scalar> m;
  m.kind = MaskKind::kPadding;
  m.matrix.setZero(1, static_cast<Eigen::Index>(valid.size()));
  for (std::size_t j = 0; j < valid.size(); ++j)
    if (!valid[j]) m.matrix(0, static_cast<Eigen::Index>(j)) = kMaskNeg<Scalar>;
  return m;
}

}  // namespace bitenet

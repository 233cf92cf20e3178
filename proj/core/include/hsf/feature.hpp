// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hsf/dataset.hpp"
#include "hsf/matrix.hpp"

namespace hsf {

inline constexpr int kMinTokens = 1;
inline constexpr int kMaxTokens = 8;

/// Last-k feature: k token blocks of width n with a zero block between
/// consecutive tokens, most recent token first:
///
///   [t_m, 0, t_{m-1}, 0, ..., 0, t_{m-k+1}]      length (2k-1)*n
struct FeatureVector {
  int k = 0;
  std::size_t hidden_dim = 0;
  std::vector<double> values;

  bool operator==(const FeatureVector&) const = default;
};

constexpr std::size_t feature_length(int k, std::size_t hidden_dim) noexcept {
  return static_cast<std::size_t>(2 * k - 1) * hidden_dim;
}

/// `tokens` is token-major with `tokens.size() / hidden_dim` tokens.
FeatureVector assemble_feature(std::span<const float> tokens,
                               std::size_t hidden_dim, int k);
FeatureVector assemble_feature(const HiddenStateRecord& record, int k);

struct DesignMatrix {
  Matrix x;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
};

/// Row i is assemble_feature(ds.records[i], k).
DesignMatrix batch_assemble(const Dataset& ds, int k);

}  // namespace hsf

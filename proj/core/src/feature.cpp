// SPDX-License-Identifier: Apache-2.0
#include "hsf/feature.hpp"

#include <algorithm>

#include "hsf/error.hpp"

namespace hsf {

namespace {

void check_k(int k) {
  if (k < kMinTokens || k > kMaxTokens) {
    throw RangeError("k = " + std::to_string(k) + " outside [" +
                     std::to_string(kMinTokens) + ", " +
                     std::to_string(kMaxTokens) + "]");
  }
}

// Writes the feature for the last k tokens into `out` (already zeroed).
void fill(std::span<const float> tokens, std::size_t n, int k,
          std::span<double> out) {
  const std::size_t m = tokens.size() / n;
  for (int j = 0; j < k; ++j) {
    // Block 2j holds token m-1-j (0-based); odd blocks stay zero.
    const auto src = tokens.subspan((m - 1 - static_cast<std::size_t>(j)) * n, n);
    std::copy(src.begin(), src.end(),
              out.begin() + static_cast<std::ptrdiff_t>(2 * j * n));
  }
}

}  // namespace

FeatureVector assemble_feature(std::span<const float> tokens,
                               std::size_t hidden_dim, int k) {
  check_k(k);
  if (hidden_dim == 0 || tokens.size() % hidden_dim != 0) {
    throw DimensionError("token buffer of " + std::to_string(tokens.size()) +
                         " values is not a whole number of " +
                         std::to_string(hidden_dim) + "-vectors");
  }
  const std::size_t m = tokens.size() / hidden_dim;
  if (m < static_cast<std::size_t>(k)) throw InsufficientTokensError(m, k);

  FeatureVector f;
  f.k = k;
  f.hidden_dim = hidden_dim;
  f.values.assign(feature_length(k, hidden_dim), 0.0);
  fill(tokens, hidden_dim, k, f.values);
  return f;
}

FeatureVector assemble_feature(const HiddenStateRecord& record, int k) {
  check_k(k);
  if (record.token_count < static_cast<std::size_t>(k)) {
    throw InsufficientTokensError(record.token_count, k, record.id);
  }
  return assemble_feature(record.values, record.hidden_dim, k);
}

DesignMatrix batch_assemble(const Dataset& ds, int k) {
  check_k(k);
  DesignMatrix out;
  out.x = Matrix(ds.size(), feature_length(k, ds.hidden_dim));
  out.labels.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& r = ds.records[i];
    if (r.token_count < static_cast<std::size_t>(k)) {
      throw InsufficientTokensError(r.token_count, k, r.id);
    }
    if (r.hidden_dim != ds.hidden_dim ||
        r.values.size() != r.token_count * r.hidden_dim) {
      throw DimensionError("record '" + r.id + "' does not match hidden_dim " +
                           std::to_string(ds.hidden_dim));
    }
    fill(r.values, r.hidden_dim, k, out.x.row(i));
    out.labels.push_back(to_int(r.label));
  }
  return out;
}

}  // namespace hsf

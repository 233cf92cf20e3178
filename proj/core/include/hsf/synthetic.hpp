// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "hsf/dataset.hpp"

namespace hsf {

struct ClassSpec {
  std::size_t count = 0;
  std::vector<double> center;  // ignored for the jailbreak class
  double stddev = 1.0;
};

/// Gaussian cluster geometry for a synthetic hidden-state dataset. The
/// last token of each record carries the class signal; earlier tokens are
/// drawn from N(0, background_stddev^2 I).
struct ClusterSpec {
  std::size_t hidden_dim = 0;
  std::size_t tokens_per_record = 8;
  ClassSpec benign;
  ClassSpec harmful;
  ClassSpec jailbreak;
  /// Jailbreak center = lambda * harmful + (1 - lambda) * benign.
  double jailbreak_offset = 0.8;
  double background_stddev = 1.0;
  std::uint64_t seed = 0;
};

inline constexpr std::size_t kMinSyntheticTokens = 8;

std::vector<double> jailbreak_center(const ClusterSpec& spec);

/// Records are emitted benign, then harmful, then jailbreak, with ids
/// "<class>-<index>" and source tags "benign"/"harmful"/"jailbreak".
/// Record i draws from its own counter-based substream.
Dataset generate(const ClusterSpec& spec);

enum class Preset { AlignedSeparable, UnalignedOverlapping, JailbreakTriad };

/// Documented in docs/format.md.
ClusterSpec preset(Preset which, std::uint64_t seed);
/// Accepts "aligned-separable", "unaligned-overlapping", "jailbreak-triad".
/// Throws RangeError listing the valid names otherwise.
Preset parse_preset(std::string_view name);
std::string_view to_string(Preset which) noexcept;

}  // namespace hsf

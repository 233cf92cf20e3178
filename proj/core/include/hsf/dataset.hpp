// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace hsf {

/// Training label. Harmful is the positive class (higher harmfulness score).
enum class Label : std::uint8_t { Benign = 0, Harmful = 1 };

inline int to_int(Label l) noexcept { return static_cast<int>(l); }

/// One query's final-decoder-layer hidden states. Token 0 is the earliest
/// retained token, token `token_count - 1` the last input token.
struct HiddenStateRecord {
  std::string id;
  Label label = Label::Benign;
  std::string source_tag;
  std::size_t token_count = 0;
  std::size_t hidden_dim = 0;
  /// Token-major, `token_count * hidden_dim` entries.
  std::vector<float> values;

  std::span<const float> token(std::size_t i) const {
    return {values.data() + i * hidden_dim, hidden_dim};
  }
  std::span<const float> last_token() const { return token(token_count - 1); }

  bool operator==(const HiddenStateRecord&) const = default;
};

/// Builds a record from per-token vectors; all vectors must share a length.
HiddenStateRecord make_record(std::string id, Label label,
                              std::string source_tag,
                              const std::vector<std::vector<float>>& tokens);

struct Dataset {
  std::size_t hidden_dim = 0;
  std::vector<HiddenStateRecord> records;
  /// Free-form metadata. Only the debug-text form persists it.
  std::map<std::string, std::string> provenance;

  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }

  bool operator==(const Dataset&) const = default;
};

/// Throws InvariantError/DimensionError naming the offending record.
void validate(const HiddenStateRecord& record, std::size_t hidden_dim);
void validate(const Dataset& ds);

/// External judge decision on a model response.
struct JudgeVerdict {
  std::string record_id;
  bool unsafe = false;

  bool operator==(const JudgeVerdict&) const = default;
};

struct SplitOptions {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  bool stratify = true;
};

/// Deterministic partition into (train, val). Both halves keep dataset
/// order. Without stratification the train side gets
/// round(fraction * size) records, clamped so neither side is empty; with
/// stratification each label class is split independently.
std::pair<Dataset, Dataset> split_dataset(const Dataset& ds,
                                          const SplitOptions& options);

}  // namespace hsf

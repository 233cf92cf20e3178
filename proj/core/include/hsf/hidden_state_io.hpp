// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "hsf/dataset.hpp"

namespace hsf {

/// Serialization forms of a Dataset. See docs/format.md.
///
/// Binary ("HSF1"): magic 48 53 46 31, u32 version, u32 hidden_dim,
/// u64 record count, then per record: u32 id length + id bytes, u8 label,
/// u32 tag length + tag bytes, u32 token count, token-major binary32
/// values. All integers and floats little-endian.
///
/// DebugText: JSON lines, header {"hsf_version":1,"hidden_dim":n} then one
/// {"id","label","tag","tokens"} object per record.
enum class DatasetFormat { Binary, DebugText };

inline constexpr std::uint32_t kDatasetVersion = 1;

/// Returns the number of bytes written. Binary output has no timestamps
/// or other run-dependent content.
std::size_t write_dataset(const Dataset& ds, std::ostream& sink,
                          DatasetFormat format);

/// Reads the whole stream and auto-detects the format.
Dataset read_dataset(std::istream& source);
Dataset parse_dataset(std::span<const std::byte> bytes);

void save_dataset(const Dataset& ds, const std::filesystem::path& path,
                  DatasetFormat format);
Dataset load_dataset(const std::filesystem::path& path);

/// Verdict files are JSON lines {"id": string, "unsafe": bool}.
std::vector<JudgeVerdict> read_verdicts(std::istream& source);
void write_verdicts(std::span<const JudgeVerdict> verdicts, std::ostream& sink);
std::vector<JudgeVerdict> load_verdicts(const std::filesystem::path& path);

}  // namespace hsf

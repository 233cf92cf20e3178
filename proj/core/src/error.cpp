// SPDX-License-Identifier: Apache-2.0
#include "hsf/error.hpp"

namespace hsf {

namespace {

std::string with_offset(const std::string& what,
                        std::optional<std::uint64_t> offset) {
  if (!offset) return what;
  return what + " (at byte " + std::to_string(*offset) + ")";
}

std::string insufficient_message(std::size_t m, int k, const std::string& id) {
  std::string msg = "insufficient tokens: record has " + std::to_string(m) +
                    " token(s) but k = " + std::to_string(k);
  if (!id.empty()) msg += " (record '" + id + "')";
  return msg;
}

}  // namespace

FormatError::FormatError(const std::string& what,
                         std::optional<std::uint64_t> offset)
    : Error(ErrorKind::Data, with_offset(what, offset)), offset_(offset) {}

InsufficientTokensError::InsufficientTokensError(std::size_t token_count, int k,
                                                 std::string record_id)
    : Error(ErrorKind::Data, insufficient_message(token_count, k, record_id)),
      token_count_(token_count),
      k_(k),
      record_id_(std::move(record_id)) {}

}  // namespace hsf

// SPDX-License-Identifier: Apache-2.0
#include "hsf/hidden_state_io.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_set>

#include <json.hpp>

#include "byte_io.hpp"
#include "hsf/error.hpp"

namespace hsf {

namespace {

static_assert(std::numeric_limits<float>::is_iec559);

// Debug text keeps key order and prints floats in shortest binary32 form.
using DebugJson =
    nlohmann::basic_json<nlohmann::ordered_map, std::vector, std::string, bool,
                         std::int64_t, std::uint64_t, float>;

constexpr std::array<char, 4> kMagic = {'H', 'S', 'F', '1'};

using detail::ByteReader;
using detail::ByteWriter;

std::size_t write_binary(const Dataset& ds, std::ostream& os) {
  ByteWriter w(os);
  w.bytes(kMagic.data(), kMagic.size());
  w.uint(kDatasetVersion);
  w.uint(ByteWriter::u32(ds.hidden_dim, "hidden_dim"));
  w.uint(static_cast<std::uint64_t>(ds.records.size()));
  for (const auto& r : ds.records) {
    w.string(r.id);
    w.uint(static_cast<std::uint8_t>(r.label));
    w.string(r.source_tag);
    w.uint(ByteWriter::u32(r.token_count, "token_count"));
    for (float v : r.values) w.f32(v);
  }
  return w.written();
}

std::size_t write_debug(const Dataset& ds, std::ostream& os) {
  std::size_t written = 0;
  const auto emit = [&](const DebugJson& j) {
    const std::string line = j.dump() + "\n";
    os.write(line.data(), static_cast<std::streamsize>(line.size()));
    written += line.size();
  };

  DebugJson header;
  header["hsf_version"] = kDatasetVersion;
  header["hidden_dim"] = ds.hidden_dim;
  if (!ds.provenance.empty()) {
    DebugJson prov = DebugJson::object();
    for (const auto& [key, value] : ds.provenance) prov[key] = value;
    header["provenance"] = std::move(prov);
  }
  emit(header);

  for (const auto& r : ds.records) {
    DebugJson tokens = DebugJson::array();
    for (std::size_t t = 0; t < r.token_count; ++t) {
      const auto tok = r.token(t);
      tokens.push_back(DebugJson(std::vector<float>(tok.begin(), tok.end())));
    }
    DebugJson line;
    line["id"] = r.id;
    line["label"] = to_int(r.label);
    line["tag"] = r.source_tag;
    line["tokens"] = std::move(tokens);
    emit(line);
  }
  return written;
}

Dataset read_binary(std::span<const std::byte> bytes) {
  ByteReader in(bytes);
  in.take(kMagic.size());
  const auto version = in.uint<std::uint32_t>();
  if (version != kDatasetVersion) {
    throw FormatError("unsupported HSF1 version " + std::to_string(version),
                      in.offset() - 4);
  }
  Dataset ds;
  ds.hidden_dim = in.uint<std::uint32_t>();
  if (ds.hidden_dim == 0) {
    throw FormatError("hidden_dim must be positive", in.offset() - 4);
  }
  const auto count = in.uint<std::uint64_t>();

  std::unordered_set<std::string> seen;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto where = "record " + std::to_string(i);
    in.context(where);
    const auto record_start = in.offset();

    HiddenStateRecord r;
    r.id = in.string();
    if (r.id.empty()) throw FormatError(where + ": empty id", record_start);
    const auto label_at = in.offset();
    const auto label = in.uint<std::uint8_t>();
    if (label > 1) {
      throw FormatError(where + ": label byte " + std::to_string(label) +
                            " is not 0 or 1",
                        label_at);
    }
    r.label = static_cast<Label>(label);
    r.source_tag = in.string();
    const auto m_at = in.offset();
    r.token_count = in.uint<std::uint32_t>();
    if (r.token_count == 0) {
      throw FormatError(where + ": token_count must be positive", m_at);
    }
    r.hidden_dim = ds.hidden_dim;

    const std::size_t n_values = r.token_count * r.hidden_dim;
    const auto values_at = in.offset();
    if (n_values > in.remaining() / 4) {
      throw FormatError("truncated stream while reading " + where +
                            " token values",
                        values_at);
    }
    const auto raw = in.take(n_values * 4);
    r.values.resize(n_values);
    for (std::size_t j = 0; j < n_values; ++j) {
      std::uint32_t bits = 0;
      for (std::size_t b = 0; b < 4; ++b) {
        bits |= std::to_integer<std::uint32_t>(raw[4 * j + b]) << (8 * b);
      }
      r.values[j] = std::bit_cast<float>(bits);
      if (!std::isfinite(r.values[j])) {
        throw FormatError(where + ": non-finite value", values_at + 4 * j);
      }
    }
    if (!seen.insert(r.id).second) {
      throw FormatError(where + ": duplicate id '" + r.id + "'", record_start);
    }
    ds.records.push_back(std::move(r));
  }
  if (in.remaining() != 0) {
    throw FormatError("trailing bytes after last record", in.offset());
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Debug-text reader

struct Line {
  std::string_view text;
  std::uint64_t offset;
  std::size_t number;  // 1-based
};

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t pos = 0;
  std::size_t number = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    ++number;
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") != std::string_view::npos) {
      fn(Line{line, pos, number});
    }
    pos = end + 1;
  }
}

template <typename Json>
Json parse_line(const Line& line) {
  try {
    return Json::parse(line.text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("line " + std::to_string(line.number) +
                          ": invalid JSON: " + e.what(),
                      line.offset);
  }
}

Dataset read_debug(std::string_view text) {
  Dataset ds;
  bool have_header = false;
  std::unordered_set<std::string> seen;
  std::size_t index = 0;

  for_each_line(text, [&](const Line& line) {
    const auto fail = [&](const std::string& msg) -> FormatError {
      return FormatError("line " + std::to_string(line.number) + ": " + msg,
                         line.offset);
    };
    const DebugJson j = parse_line<DebugJson>(line);
    if (!j.is_object()) throw fail("expected a JSON object");

    if (!have_header) {
      if (!j.contains("hsf_version") || !j["hsf_version"].is_number_integer()) {
        throw fail("unrecognized format: missing hsf_version header");
      }
      if (j["hsf_version"].get<std::int64_t>() != kDatasetVersion) {
        throw fail("unsupported hsf_version " + j["hsf_version"].dump());
      }
      if (!j.contains("hidden_dim") || !j["hidden_dim"].is_number_integer() ||
          j["hidden_dim"].get<std::int64_t>() <= 0) {
        throw fail("hidden_dim must be a positive integer");
      }
      ds.hidden_dim = j["hidden_dim"].get<std::size_t>();
      if (j.contains("provenance")) {
        if (!j["provenance"].is_object()) throw fail("provenance must be an object");
        for (const auto& [key, value] : j["provenance"].items()) {
          if (!value.is_string()) throw fail("provenance values must be strings");
          ds.provenance[key] = value.get<std::string>();
        }
      }
      have_header = true;
      return;
    }

    const auto where = "record " + std::to_string(index);
    HiddenStateRecord r;
    if (!j.contains("id") || !j["id"].is_string()) throw fail(where + ": missing string id");
    r.id = j["id"].get<std::string>();
    if (r.id.empty()) throw fail(where + ": empty id");
    if (!j.contains("label") || !j["label"].is_number_integer()) {
      throw fail(where + ": missing integer label");
    }
    const auto label = j["label"].get<std::int64_t>();
    if (label != 0 && label != 1) throw fail(where + ": label must be 0 or 1");
    r.label = static_cast<Label>(label);
    if (j.contains("tag")) {
      if (!j["tag"].is_string()) throw fail(where + ": tag must be a string");
      r.source_tag = j["tag"].get<std::string>();
    }
    if (!j.contains("tokens") || !j["tokens"].is_array() || j["tokens"].empty()) {
      throw fail(where + ": tokens must be a non-empty array");
    }
    r.hidden_dim = ds.hidden_dim;
    r.token_count = j["tokens"].size();
    r.values.reserve(r.token_count * r.hidden_dim);
    for (const auto& tok : j["tokens"]) {
      if (!tok.is_array() || tok.size() != ds.hidden_dim) {
        throw fail(where + ": dimension mismatch, each token needs " +
                   std::to_string(ds.hidden_dim) + " numbers");
      }
      for (const auto& v : tok) {
        if (!v.is_number()) throw fail(where + ": token entries must be numbers");
        const float f = v.get<float>();
        if (!std::isfinite(f)) throw fail(where + ": non-finite value");
        r.values.push_back(f);
      }
    }
    if (!seen.insert(r.id).second) throw fail(where + ": duplicate id '" + r.id + "'");
    ds.records.push_back(std::move(r));
    ++index;
  });

  if (!have_header) throw FormatError("unrecognized format: empty input", 0);
  return ds;
}

std::string slurp(std::istream& source) {
  std::string data{std::istreambuf_iterator<char>(source),
                   std::istreambuf_iterator<char>()};
  if (source.bad()) throw IoError("read failed");
  return data;
}

std::span<const std::byte> as_bytes(const std::string& s) {
  return {reinterpret_cast<const std::byte*>(s.data()), s.size()};
}

}  // namespace

std::size_t write_dataset(const Dataset& ds, std::ostream& sink,
                          DatasetFormat format) {
  validate(ds);
  const std::size_t n = format == DatasetFormat::Binary ? write_binary(ds, sink)
                                                        : write_debug(ds, sink);
  if (!sink) throw IoError("write failed");
  return n;
}

Dataset parse_dataset(std::span<const std::byte> bytes) {
  if (bytes.size() >= kMagic.size() &&
      std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) == 0) {
    return read_binary(bytes);
  }
  const std::string_view text(reinterpret_cast<const char*>(bytes.data()),
                              bytes.size());
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string_view::npos && text[first] == '{') {
    return read_debug(text);
  }
  throw FormatError("unrecognized format", 0);
}

Dataset read_dataset(std::istream& source) {
  const std::string data = slurp(source);
  return parse_dataset(as_bytes(data));
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path,
                  DatasetFormat format) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  write_dataset(ds, os, format);
  os.close();
  if (!os) throw IoError("write to '" + path.string() + "' failed");
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  return read_dataset(is);
}

std::vector<JudgeVerdict> read_verdicts(std::istream& source) {
  const std::string data = slurp(source);
  std::vector<JudgeVerdict> out;
  for_each_line(data, [&](const Line& line) {
    const auto fail = [&](const std::string& msg) -> FormatError {
      return FormatError("verdict line " + std::to_string(line.number) + ": " + msg,
                         line.offset);
    };
    const auto j = parse_line<nlohmann::json>(line);
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string()) {
      throw fail("expected {\"id\": string, \"unsafe\": bool}");
    }
    if (!j.contains("unsafe") || !j["unsafe"].is_boolean()) {
      throw fail("\"unsafe\" must be a boolean");
    }
    JudgeVerdict v{j["id"].get<std::string>(), j["unsafe"].get<bool>()};
    if (v.record_id.empty()) throw fail("empty id");
    out.push_back(std::move(v));
  });
  return out;
}

void write_verdicts(std::span<const JudgeVerdict> verdicts, std::ostream& sink) {
  for (const auto& v : verdicts) {
    nlohmann::ordered_json j;
    j["id"] = v.record_id;
    j["unsafe"] = v.unsafe;
    sink << j.dump() << '\n';
  }
  if (!sink) throw IoError("write failed");
}

std::vector<JudgeVerdict> load_verdicts(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  return read_verdicts(is);
}

}  // namespace hsf

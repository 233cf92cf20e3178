// SPDX-License-Identifier: Apache-2.0
#include "hsf/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "hsf/error.hpp"
#include "hsf/rng.hpp"

namespace hsf {

HiddenStateRecord make_record(std::string id, Label label,
                              std::string source_tag,
                              const std::vector<std::vector<float>>& tokens) {
  HiddenStateRecord r;
  r.id = std::move(id);
  r.label = label;
  r.source_tag = std::move(source_tag);
  r.token_count = tokens.size();
  r.hidden_dim = tokens.empty() ? 0 : tokens.front().size();
  r.values.reserve(r.token_count * r.hidden_dim);
  for (const auto& t : tokens) {
    if (t.size() != r.hidden_dim) {
      throw DimensionError("record '" + r.id +
                           "': token vectors have differing lengths");
    }
    r.values.insert(r.values.end(), t.begin(), t.end());
  }
  return r;
}

void validate(const HiddenStateRecord& record, std::size_t hidden_dim) {
  const auto where = [&] { return "record '" + record.id + "': "; };
  if (record.id.empty()) throw InvariantError("record with empty id");
  if (record.label != Label::Benign && record.label != Label::Harmful) {
    throw InvariantError(where() + "label must be 0 or 1");
  }
  if (record.token_count == 0) {
    throw InvariantError(where() + "token_count must be positive");
  }
  if (record.hidden_dim != hidden_dim) {
    throw DimensionError(where() + "hidden_dim " +
                         std::to_string(record.hidden_dim) +
                         " != dataset hidden_dim " +
                         std::to_string(hidden_dim));
  }
  if (record.values.size() != record.token_count * record.hidden_dim) {
    throw DimensionError(where() + "expected " +
                         std::to_string(record.token_count * hidden_dim) +
                         " values, have " +
                         std::to_string(record.values.size()));
  }
  for (float v : record.values) {
    if (!std::isfinite(v)) throw InvariantError(where() + "non-finite value");
  }
}

void validate(const Dataset& ds) {
  if (ds.hidden_dim == 0) throw InvariantError("hidden_dim must be positive");
  std::unordered_set<std::string_view> seen;
  seen.reserve(ds.records.size());
  for (const auto& r : ds.records) {
    validate(r, ds.hidden_dim);
    if (!seen.insert(r.id).second) {
      throw InvariantError("duplicate record id '" + r.id + "'");
    }
  }
}

namespace {

constexpr std::uint64_t kSplitStream = 0x5b1175ULL;

std::size_t train_count(std::size_t n, double fraction) {
  return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
}

void shuffle(std::vector<std::size_t>& idx, CounterRng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    std::swap(idx[i - 1], idx[rng.below(i)]);
  }
}

}  // namespace

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds,
                                          const SplitOptions& options) {
  if (!(options.train_fraction > 0.0 && options.train_fraction < 1.0)) {
    throw RangeError("train_fraction must lie in (0, 1)");
  }
  if (ds.size() < 2) {
    throw InvariantError("split needs at least 2 records, have " +
                         std::to_string(ds.size()));
  }

  CounterRng rng(options.seed, kSplitStream);
  std::vector<bool> in_train(ds.size(), false);

  if (options.stratify) {
    for (Label cls : {Label::Benign, Label::Harmful}) {
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.records[i].label == cls) idx.push_back(i);
      }
      if (idx.empty()) {
        throw InvariantError(
            std::string("stratified split: no records with label ") +
            std::to_string(to_int(cls)));
      }
      shuffle(idx, rng);
      const std::size_t n_train = train_count(idx.size(), options.train_fraction);
      for (std::size_t j = 0; j < n_train; ++j) in_train[idx[j]] = true;
    }
  } else {
    std::vector<std::size_t> idx(ds.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    shuffle(idx, rng);
    const std::size_t n_train = std::clamp<std::size_t>(
        train_count(idx.size(), options.train_fraction), 1, idx.size() - 1);
    for (std::size_t j = 0; j < n_train; ++j) in_train[idx[j]] = true;
  }

  std::pair<Dataset, Dataset> out;
  for (Dataset* part : {&out.first, &out.second}) {
    part->hidden_dim = ds.hidden_dim;
    part->provenance = ds.provenance;
  }
  for (std::size_t i = 0; i < ds.size(); ++i) {
    (in_train[i] ? out.first : out.second).records.push_back(ds.records[i]);
  }
  return out;
}

}  // namespace hsf

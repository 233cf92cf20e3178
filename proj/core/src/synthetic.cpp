// SPDX-License-Identifier: Apache-2.0
#include "hsf/synthetic.hpp"

#include <cmath>
#include <cstdio>

#include "hsf/error.hpp"
#include "hsf/rng.hpp"

namespace hsf {

namespace {

constexpr std::size_t kPresetDim = 64;
constexpr std::size_t kPresetTokens = 8;

std::vector<double> axis_center(std::size_t n, double offset) {
  std::vector<double> c(n, 0.0);
  c[0] = offset;
  return c;
}

void check_class(const ClassSpec& cls, std::size_t n, const char* name, bool needs_center) {
  if (cls.count == 0) return;
  if (!(cls.stddev > 0.0) || !std::isfinite(cls.stddev)) {
    throw RangeError(std::string(name) + " stddev must be positive");
  }
  if (needs_center && cls.center.size() != n) {
    throw DimensionError(std::string(name) + " center has " +
                         std::to_string(cls.center.size()) + " entries, hidden_dim is " +
                         std::to_string(n));
  }
}

std::string record_id(const char* prefix, std::size_t i) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s-%06zu", prefix, i);
  return buf;
}

}  // namespace

std::vector<double> jailbreak_center(const ClusterSpec& spec) {
  const double lambda = spec.jailbreak_offset;
  std::vector<double> c(spec.hidden_dim);
  for (std::size_t j = 0; j < spec.hidden_dim; ++j) {
    c[j] = lambda * spec.harmful.center[j] + (1.0 - lambda) * spec.benign.center[j];
  }
  return c;
}

Dataset generate(const ClusterSpec& spec) {
  if (spec.hidden_dim == 0) throw RangeError("hidden_dim must be positive");
  if (spec.tokens_per_record < kMinSyntheticTokens) {
    throw RangeError("tokens_per_record must be at least " +
                     std::to_string(kMinSyntheticTokens));
  }
  if (!(spec.jailbreak_offset >= 0.0 && spec.jailbreak_offset <= 1.0)) {
    throw RangeError("jailbreak_offset must lie in [0, 1]");
  }
  if (!(spec.background_stddev > 0.0)) throw RangeError("background_stddev must be positive");
  const std::size_t n = spec.hidden_dim;
  check_class(spec.benign, n, "benign", true);
  check_class(spec.harmful, n, "harmful", true);
  check_class(spec.jailbreak, n, "jailbreak", false);
  if (spec.jailbreak.count > 0 &&
      (spec.benign.center.size() != n || spec.harmful.center.size() != n)) {
    throw DimensionError("jailbreak center needs benign and harmful centers");
  }

  struct Group {
    const char* name;
    Label label;
    std::size_t count;
    std::vector<double> center;
    double stddev;
  };
  const std::vector<Group> groups = {
      {"benign", Label::Benign, spec.benign.count, spec.benign.center, spec.benign.stddev},
      {"harmful", Label::Harmful, spec.harmful.count, spec.harmful.center,
       spec.harmful.stddev},
      {"jailbreak", Label::Harmful, spec.jailbreak.count,
       spec.jailbreak.count ? jailbreak_center(spec) : std::vector<double>{},
       spec.jailbreak.stddev},
  };

  Dataset ds;
  ds.hidden_dim = n;
  const std::size_t m = spec.tokens_per_record;
  std::uint64_t index = 0;
  for (const auto& g : groups) {
    for (std::size_t i = 0; i < g.count; ++i, ++index) {
      CounterRng rng(spec.seed, index);
      HiddenStateRecord r;
      r.id = record_id(g.name, i);
      r.label = g.label;
      r.source_tag = g.name;
      r.token_count = m;
      r.hidden_dim = n;
      r.values.resize(m * n);
      for (std::size_t t = 0; t + 1 < m; ++t) {
        for (std::size_t j = 0; j < n; ++j) {
          r.values[t * n + j] = static_cast<float>(spec.background_stddev * rng.normal());
        }
      }
      for (std::size_t j = 0; j < n; ++j) {
        r.values[(m - 1) * n + j] = static_cast<float>(g.center[j] + g.stddev * rng.normal());
      }
      ds.records.push_back(std::move(r));
    }
  }
  return ds;
}

ClusterSpec preset(Preset which, std::uint64_t seed) {
  ClusterSpec s;
  s.hidden_dim = kPresetDim;
  s.tokens_per_record = kPresetTokens;
  s.seed = seed;
  s.jailbreak_offset = 0.8;
  s.background_stddev = 0.1;
  // Separation is the distance between the benign and harmful centers,
  // in units of the per-class stddev (1.0).
  const auto two_class = [&](std::size_t count, double separation) {
    s.benign = {count, axis_center(kPresetDim, -separation / 2), 1.0};
    s.harmful = {count, axis_center(kPresetDim, separation / 2), 1.0};
  };
  switch (which) {
    case Preset::AlignedSeparable:
      two_class(1000, 6.0);
      break;
    case Preset::UnalignedOverlapping:
      two_class(600, 0.5);
      break;
    case Preset::JailbreakTriad:
      two_class(300, 10.0);
      s.jailbreak = {300, {}, 1.0};
      break;
  }
  return s;
}

Preset parse_preset(std::string_view name) {
  if (name == "aligned-separable") return Preset::AlignedSeparable;
  if (name == "unaligned-overlapping") return Preset::UnalignedOverlapping;
  if (name == "jailbreak-triad") return Preset::JailbreakTriad;
  throw RangeError("unknown preset '" + std::string(name) +
                   "'; valid presets: aligned-separable, unaligned-overlapping, "
                   "jailbreak-triad");
}

std::string_view to_string(Preset which) noexcept {
  switch (which) {
    case Preset::AlignedSeparable: return "aligned-separable";
    case Preset::UnalignedOverlapping: return "unaligned-overlapping";
    case Preset::JailbreakTriad: return "jailbreak-triad";
  }
  return "unknown";
}

}  // namespace hsf

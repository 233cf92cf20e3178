// SPDX-License-Identifier: Apache-2.0
#include "hsf/classifier.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>

#include "byte_io.hpp"
#include "hsf/error.hpp"
#include "hsf/evaluation.hpp"

namespace hsf {

namespace {

// Substream ids so init, shuffling and dropout never share draws.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kShuffleStream = 2;
constexpr std::uint64_t kDropoutStream = 3;

constexpr std::array<char, 4> kParamsMagic = {'H', 'S', 'F', 'W'};
constexpr std::uint32_t kParamsVersion = 1;

double round_to_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

// Four independent partial sums; fixed order, so results are reproducible.
double dot(std::span<const double> a, std::span<const double> b) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  const std::size_t n = a.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

bool is_mlp(const ClassifierConfig& c) { return c.architecture == Architecture::Mlp1; }

/// Width of the layer that feeds the read-out (and receives dropout).
std::size_t readout_width(const ClassifierConfig& c) {
  return is_mlp(c) ? c.hidden_width : c.input_dim;
}

void check_input(const ClassifierParams& p, std::size_t len) {
  if (len != p.config.input_dim) {
    throw DimensionError("feature length " + std::to_string(len) +
                         " does not match classifier input_dim " +
                         std::to_string(p.config.input_dim) + " (built for k = " +
                         std::to_string(p.config.k) + ")");
  }
}

/// Read-out layer input for one row; also keeps the pre-activations for
/// backprop. `mask` may be empty (eval mode).
void readout_input(const ClassifierParams& p, std::span<const double> x,
                   std::span<const double> mask, std::span<double> pre,
                   std::span<double> out) {
  if (is_mlp(p.config)) {
    const std::size_t in = p.config.input_dim;
    for (std::size_t h = 0; h < p.config.hidden_width; ++h) {
      const std::span<const double> row(p.w1.data() + h * in, in);
      pre[h] = dot(row, x) + p.b1[h];
      out[h] = pre[h] > 0.0 ? pre[h] : 0.0;
    }
  } else {
    std::copy(x.begin(), x.end(), out.begin());
  }
  if (!mask.empty()) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  }
}

double logit_of(const ClassifierParams& p, std::span<const double> x,
                std::span<const double> mask) {
  const std::size_t width = readout_width(p.config);
  std::vector<double> pre(is_mlp(p.config) ? width : 0);
  std::vector<double> act(width);
  readout_input(p, x, mask, pre, act);
  return dot(p.w2, act) + p.b2;
}

std::vector<std::span<double>> tensors(ClassifierParams& p) {
  return {p.w1, p.b1, p.w2, std::span<double>(&p.b2, 1)};
}
std::vector<std::span<double>> tensors(Gradient& g) {
  return {g.w1, g.b1, g.w2, std::span<double>(&g.b2, 1)};
}

}  // namespace

void validate(const ClassifierConfig& c) {
  if (c.input_dim == 0) throw RangeError("classifier input_dim must be positive");
  if (c.architecture != Architecture::Linear && c.architecture != Architecture::Mlp1) {
    throw RangeError("unknown classifier architecture");
  }
  if (is_mlp(c) && c.hidden_width == 0) {
    throw RangeError("hidden_width must be positive");
  }
  if (!(c.dropout_rate >= 0.0 && c.dropout_rate < 1.0)) {
    throw RangeError("dropout_rate must lie in [0, 1)");
  }
  if (!(c.learning_rate > 0.0) || !std::isfinite(c.learning_rate)) {
    throw RangeError("learning_rate must be positive");
  }
  if (c.epochs <= 0) throw RangeError("epochs must be positive");
  if (c.batch_size == 0) throw RangeError("batch_size must be positive");
  if (c.k < kMinTokens || c.k > kMaxTokens) throw RangeError("k outside [1, 8]");
}

ClassifierParams init_params(const ClassifierConfig& config) {
  validate(config);
  ClassifierParams p;
  p.config = config;
  CounterRng rng(config.seed, kInitStream);
  const auto draw = [&](std::vector<double>& w, std::size_t n, std::size_t fan_in,
                        std::size_t fan_out) {
    const double bound =
        std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    w.resize(n);
    for (auto& v : w) {
      float f = static_cast<float>(rng.uniform(-bound, bound));
      if (std::abs(f) > bound) f = std::nextafter(f, 0.0f);
      v = f;
    }
  };
  if (is_mlp(config)) {
    draw(p.w1, config.hidden_width * config.input_dim, config.input_dim,
         config.hidden_width);
    p.b1.assign(config.hidden_width, 0.0);
    draw(p.w2, config.hidden_width, config.hidden_width, 1);
  } else {
    draw(p.w2, config.input_dim, config.input_dim, 1);
  }
  p.b2 = 0.0;
  return p;
}

DropoutSource::DropoutSource(double rate, std::uint64_t seed, std::uint64_t stream)
    : rate_(rate), rng_(seed, stream) {
  if (!(rate >= 0.0 && rate < 1.0)) throw RangeError("dropout_rate must lie in [0, 1)");
}

void DropoutSource::draw(std::span<double> mask) {
  if (rate_ == 0.0) {
    std::fill(mask.begin(), mask.end(), 1.0);
    return;
  }
  const double keep_scale = 1.0 / (1.0 - rate_);
  for (auto& m : mask) m = rng_.uniform() < rate_ ? 0.0 : keep_scale;
}

double forward(const ClassifierParams& params, std::span<const double> x) {
  check_input(params, x.size());
  return logit_of(params, x, {});
}

double forward(const ClassifierParams& params, std::span<const double> x,
               DropoutSource& dropout) {
  check_input(params, x.size());
  std::vector<double> mask(readout_width(params.config));
  dropout.draw(mask);
  return logit_of(params, x, mask);
}

double sigmoid(double logit) noexcept {
  if (logit >= 0.0) return 1.0 / (1.0 + std::exp(-logit));
  const double e = std::exp(logit);
  return e / (1.0 + e);
}

double score(const ClassifierParams& params, std::span<const double> x) {
  return sigmoid(forward(params, x));
}

double bce_loss(double logit, int label) noexcept {
  return std::max(logit, 0.0) - logit * label + std::log1p(std::exp(-std::abs(logit)));
}

Gradient grad(const ClassifierParams& params, const Matrix& rows,
              std::span<const int> labels, DropoutSource* dropout) {
  const auto& c = params.config;
  if (rows.rows == 0) throw InvariantError("gradient needs a non-empty batch");
  if (labels.size() != rows.rows) {
    throw DimensionError("batch has " + std::to_string(rows.rows) + " rows but " +
                         std::to_string(labels.size()) + " labels");
  }
  check_input(params, rows.cols);

  Gradient g;
  g.w1.assign(params.w1.size(), 0.0);
  g.b1.assign(params.b1.size(), 0.0);
  g.w2.assign(params.w2.size(), 0.0);

  const std::size_t n = rows.rows;
  const std::size_t width = readout_width(c);
  const bool mlp = is_mlp(c);
  const double inv_n = 1.0 / static_cast<double>(n);

  // Batch-major buffers, n x width. Masks are drawn row by row.
  std::vector<double> mask(dropout ? n * width : 0);
  if (dropout) {
    for (std::size_t r = 0; r < n; ++r) dropout->draw({mask.data() + r * width, width});
  }
  std::vector<double> act(n * width);
  std::vector<double> pre(mlp ? n * width : 0);
  if (mlp) {
    // Hidden unit outer so each W1 row stays in cache across the batch.
    const std::size_t in = c.input_dim;
    for (std::size_t h = 0; h < width; ++h) {
      const std::span<const double> w(params.w1.data() + h * in, in);
      for (std::size_t r = 0; r < n; ++r) {
        const double v = dot(w, rows.row(r)) + params.b1[h];
        pre[r * width + h] = v;
        act[r * width + h] = v > 0.0 ? v : 0.0;
      }
    }
  } else {
    std::copy(rows.data.begin(), rows.data.end(), act.begin());
  }
  if (dropout) {
    for (std::size_t i = 0; i < act.size(); ++i) act[i] *= mask[i];
  }

  // d(loss)/d(logit) per row, for the mean batch loss.
  std::vector<double> d(n);
  for (std::size_t r = 0; r < n; ++r) {
    const std::span<const double> a(act.data() + r * width, width);
    const double logit = dot(params.w2, a) + params.b2;
    g.loss += bce_loss(logit, labels[r]) * inv_n;
    d[r] = (sigmoid(logit) - labels[r]) * inv_n;
    for (std::size_t i = 0; i < width; ++i) g.w2[i] += d[r] * a[i];
    g.b2 += d[r];
  }

  if (mlp) {
    const std::size_t in = c.input_dim;
    for (std::size_t h = 0; h < width; ++h) {
      double* gw = g.w1.data() + h * in;
      for (std::size_t r = 0; r < n; ++r) {
        const std::size_t idx = r * width + h;
        if (pre[idx] <= 0.0) continue;
        double dh = d[r] * params.w2[h];
        if (dropout) dh *= mask[idx];
        if (dh == 0.0) continue;
        g.b1[h] += dh;
        const double* x = rows.data.data() + r * in;
        for (std::size_t j = 0; j < in; ++j) gw[j] += dh * x[j];
      }
    }
  }
  return g;
}

TrainResult train(const DesignMatrix& train_set, const DesignMatrix& val_set,
                  const ClassifierConfig& config) {
  validate(config);
  const std::size_t n = train_set.size();
  if (n == 0) throw InvariantError("training set is empty");
  if (train_set.x.cols != config.input_dim || train_set.x.rows != n) {
    throw DimensionError("training matrix has " + std::to_string(train_set.x.cols) +
                         " columns, config input_dim is " +
                         std::to_string(config.input_dim));
  }
  if (val_set.size() > 0 && val_set.x.cols != config.input_dim) {
    throw DimensionError("validation matrix width does not match input_dim");
  }
  const auto positives = std::count(train_set.labels.begin(), train_set.labels.end(), 1);
  if (positives == 0 || static_cast<std::size_t>(positives) == n) {
    throw InvariantError("training set must contain both labels");
  }
  const auto val_pos = std::count(val_set.labels.begin(), val_set.labels.end(), 1);
  const bool val_has_both =
      val_pos > 0 && static_cast<std::size_t>(val_pos) < val_set.size();

  ClassifierParams params = init_params(config);
  auto param_views = tensors(params);
  std::vector<std::vector<double>> m1, m2;
  for (auto t : param_views) {
    m1.emplace_back(t.size(), 0.0);
    m2.emplace_back(t.size(), 0.0);
  }
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  long step = 0;

  CounterRng shuffle_rng(config.seed, kShuffleStream);
  DropoutSource dropout(config.dropout_rate, config.seed, kDropoutStream);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  result.history.reserve(static_cast<std::size_t>(config.epochs));
  std::optional<std::pair<double, double>> best;  // (auc or -inf, val_loss)
  std::vector<double> val_logits(val_set.size());

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    }
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t len = std::min(config.batch_size, n - start);
      Matrix batch(len, config.input_dim);
      std::vector<int> labels(len);
      for (std::size_t b = 0; b < len; ++b) {
        const auto src = train_set.x.row(order[start + b]);
        std::copy(src.begin(), src.end(), batch.row(b).begin());
        labels[b] = train_set.labels[order[start + b]];
      }
      Gradient g = grad(params, batch, labels, &dropout);
      epoch_loss += g.loss * static_cast<double>(len);

      ++step;
      const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
      auto grad_views = tensors(g);
      for (std::size_t t = 0; t < param_views.size(); ++t) {
        auto p = param_views[t];
        auto gr = grad_views[t];
        auto& mt = m1[t];
        auto& vt = m2[t];
        for (std::size_t i = 0; i < p.size(); ++i) {
          mt[i] = kBeta1 * mt[i] + (1.0 - kBeta1) * gr[i];
          vt[i] = kBeta2 * vt[i] + (1.0 - kBeta2) * gr[i] * gr[i];
          const double mhat = mt[i] / c1;
          const double vhat = vt[i] / c2;
          p[i] = round_to_f32(p[i] - config.learning_rate * mhat / (std::sqrt(vhat) + kEps));
        }
      }
    }

    EpochStats stats;
    stats.train_loss = epoch_loss / static_cast<double>(n);
    if (!std::isfinite(stats.train_loss)) {
      throw NumericError("non-finite training loss at epoch " + std::to_string(epoch + 1));
    }
    if (val_set.size() > 0) {
      double loss = 0.0;
      for (std::size_t i = 0; i < val_set.size(); ++i) {
        val_logits[i] = logit_of(params, val_set.x.row(i), {});
        loss += bce_loss(val_logits[i], val_set.labels[i]);
      }
      stats.val_loss = loss / static_cast<double>(val_set.size());
      if (!std::isfinite(*stats.val_loss)) {
        throw NumericError("non-finite validation loss at epoch " +
                           std::to_string(epoch + 1));
      }
      if (val_has_both) stats.val_auc = roc_auc(val_logits, val_set.labels);
    }
    result.history.push_back(stats);

    bool better = false;
    if (val_set.size() == 0) {
      better = true;
    } else {
      const std::pair<double, double> key{
          stats.val_auc.value_or(-1.0), *stats.val_loss};
      better = !best || key.first > best->first ||
               (key.first == best->first && key.second < best->second);
      if (better) best = key;
    }
    if (better) {
      result.params = params;
      result.best_epoch = epoch;
    }
  }
  return result;
}

FilterDecision filter_decision(const ClassifierParams& params,
                               std::span<const double> x, double beta) {
  if (!(beta > 0.0 && beta < 1.0)) throw RangeError("beta must lie in (0, 1)");
  FilterDecision d;
  d.score = score(params, x);
  d.threshold = beta;
  d.verdict = d.score > beta ? Verdict::Block : Verdict::Allow;
  return d;
}

// HSFW layout:
//   magic "HSFW", u32 version
//   config: u32 architecture, u32 k, u64 input_dim, u64 hidden_width,
//           f64 dropout_rate, f64 learning_rate, u32 epochs, u64 batch_size,
//           u64 seed
//   tensors, each u32 rank, rank x u32 dims, binary32 values:
//     Linear: w [input_dim], b []
//     Mlp1:   W1 [hidden_width, input_dim], b1 [hidden_width],
//             w2 [hidden_width], b2 []
void save_params(const ClassifierParams& params, std::ostream& sink) {
  const auto& c = params.config;
  validate(c);
  const std::size_t width = readout_width(c);
  const std::size_t expect_w1 = is_mlp(c) ? c.hidden_width * c.input_dim : 0;
  const std::size_t expect_b1 = is_mlp(c) ? c.hidden_width : 0;
  if (params.w1.size() != expect_w1 || params.b1.size() != expect_b1 ||
      params.w2.size() != width) {
    throw DimensionError("parameter shapes do not match the classifier config");
  }

  detail::ByteWriter w(sink);
  w.bytes(kParamsMagic.data(), kParamsMagic.size());
  w.uint(kParamsVersion);
  w.uint(static_cast<std::uint32_t>(c.architecture));
  w.uint(static_cast<std::uint32_t>(c.k));
  w.uint(static_cast<std::uint64_t>(c.input_dim));
  w.uint(static_cast<std::uint64_t>(c.hidden_width));
  w.f64(c.dropout_rate);
  w.f64(c.learning_rate);
  w.uint(static_cast<std::uint32_t>(c.epochs));
  w.uint(static_cast<std::uint64_t>(c.batch_size));
  w.uint(c.seed);

  const auto tensor = [&](std::initializer_list<std::size_t> dims,
                          std::span<const double> values) {
    w.uint(static_cast<std::uint32_t>(dims.size()));
    for (auto d : dims) w.uint(detail::ByteWriter::u32(d, "tensor dimension"));
    for (double v : values) {
      if (!std::isfinite(v)) throw NumericError("non-finite classifier parameter");
      w.f32(static_cast<float>(v));
    }
  };
  if (is_mlp(c)) {
    tensor({c.hidden_width, c.input_dim}, params.w1);
    tensor({c.hidden_width}, params.b1);
    tensor({c.hidden_width}, params.w2);
  } else {
    tensor({c.input_dim}, params.w2);
  }
  tensor({}, std::span<const double>(&params.b2, 1));
  if (!sink) throw IoError("write failed");
}

ClassifierParams load_params(std::istream& source) {
  const std::string data{std::istreambuf_iterator<char>(source),
                         std::istreambuf_iterator<char>()};
  detail::ByteReader in({reinterpret_cast<const std::byte*>(data.data()), data.size()});
  in.context("params header");
  const auto magic = in.take(4);
  if (std::memcmp(magic.data(), kParamsMagic.data(), 4) != 0) {
    throw FormatError("bad magic: not an HSFW params file", 0);
  }
  const auto version = in.uint<std::uint32_t>();
  if (version != kParamsVersion) {
    throw FormatError("unsupported HSFW version " + std::to_string(version), 4);
  }

  ClassifierParams p;
  auto& c = p.config;
  in.context("params config");
  const auto config_at = in.offset();
  const auto arch = in.uint<std::uint32_t>();
  if (arch > 1) throw FormatError("unknown architecture " + std::to_string(arch), config_at);
  c.architecture = static_cast<Architecture>(arch);
  c.k = static_cast<int>(in.uint<std::uint32_t>());
  c.input_dim = in.uint<std::uint64_t>();
  c.hidden_width = in.uint<std::uint64_t>();
  c.dropout_rate = in.f64();
  c.learning_rate = in.f64();
  c.epochs = static_cast<int>(in.uint<std::uint32_t>());
  c.batch_size = in.uint<std::uint64_t>();
  c.seed = in.uint<std::uint64_t>();
  try {
    validate(c);
  } catch (const Error& e) {
    throw FormatError(std::string("invalid config: ") + e.what(), config_at);
  }

  const auto tensor = [&](const char* name, std::initializer_list<std::size_t> dims,
                          std::vector<double>& out) {
    in.context(std::string("tensor ") + name);
    const auto at = in.offset();
    const auto rank = in.uint<std::uint32_t>();
    if (rank != dims.size()) {
      throw FormatError(std::string("shape mismatch for ") + name + ": rank " +
                            std::to_string(rank),
                        at);
    }
    std::size_t count = 1;
    for (auto expect : dims) {
      const auto d = in.uint<std::uint32_t>();
      if (d != expect) {
        throw FormatError(std::string("shape mismatch for ") + name + ": dim " +
                              std::to_string(d) + ", expected " + std::to_string(expect),
                          at);
      }
      count *= d;
    }
    if (count > in.remaining() / 4) {
      throw FormatError("truncated stream while reading tensor " + std::string(name),
                        in.offset());
    }
    out.resize(count);
    for (auto& v : out) {
      v = static_cast<double>(in.f32());
      if (!std::isfinite(v)) {
        throw FormatError(std::string("non-finite value in ") + name, in.offset() - 4);
      }
    }
  };
  std::vector<double> bias;
  if (is_mlp(c)) {
    tensor("W1", {c.hidden_width, c.input_dim}, p.w1);
    tensor("b1", {c.hidden_width}, p.b1);
    tensor("w2", {c.hidden_width}, p.w2);
  } else {
    tensor("w", {c.input_dim}, p.w2);
  }
  tensor("b", {}, bias);
  p.b2 = bias.front();
  if (in.remaining() != 0) throw FormatError("trailing bytes after params", in.offset());
  return p;
}

void save_params(const ClassifierParams& params, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  save_params(params, os);
  os.close();
  if (!os) throw IoError("write to '" + path.string() + "' failed");
}

ClassifierParams load_params(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  return load_params(is);
}

}  // namespace hsf

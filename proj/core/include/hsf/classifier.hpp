// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "hsf/feature.hpp"
#include "hsf/rng.hpp"

namespace hsf {

enum class Architecture : std::uint32_t { Linear = 0, Mlp1 = 1 };

struct ClassifierConfig {
  Architecture architecture = Architecture::Mlp1;
  std::size_t input_dim = 0;
  std::size_t hidden_width = 256;
  double dropout_rate = 0.2;
  double learning_rate = 1e-3;
  int epochs = 50;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  int k = 7;

  bool operator==(const ClassifierConfig&) const = default;
};

void validate(const ClassifierConfig& config);

/// Weak classifier parameters.
///
/// Linear: logit = w2 . x + b2 (w1, b1 empty).
/// Mlp1:   logit = w2 . relu(W1 x + b1) + b2, W1 row-major
///         hidden_width x input_dim.
///
/// Every value produced by init_params/train/load_params is exactly
/// representable in binary32, so the HSFW file round-trips bit-exactly.
struct ClassifierParams {
  ClassifierConfig config;
  std::vector<double> w1;
  std::vector<double> b1;
  std::vector<double> w2;
  double b2 = 0.0;

  bool operator==(const ClassifierParams&) const = default;
};

/// Same layout as ClassifierParams; also carries the mean batch loss.
struct Gradient {
  std::vector<double> w1;
  std::vector<double> b1;
  std::vector<double> w2;
  double b2 = 0.0;
  double loss = 0.0;
};

/// Glorot-uniform weights, zero biases, deterministic in config.seed.
ClassifierParams init_params(const ClassifierConfig& config);

/// Inverted-dropout mask source for training-mode passes. Dropout acts on
/// the input of the read-out layer: the hidden units for Mlp1, the
/// feature entries for Linear.
class DropoutSource {
 public:
  DropoutSource(double rate, std::uint64_t seed, std::uint64_t stream = 0);

  double rate() const noexcept { return rate_; }
  /// Fills `mask` with 0 or 1/(1-rate).
  void draw(std::span<double> mask);

 private:
  double rate_;
  CounterRng rng_;
};

/// Eval-mode logit. Deterministic and dropout-free.
double forward(const ClassifierParams& params, std::span<const double> x);
/// Train-mode logit with a fresh dropout mask from `dropout`.
double forward(const ClassifierParams& params, std::span<const double> x,
               DropoutSource& dropout);

double sigmoid(double logit) noexcept;

/// Harmfulness score in (0,1).
double score(const ClassifierParams& params, std::span<const double> x);

/// Binary cross-entropy on a logit, stable for large |logit|.
double bce_loss(double logit, int label) noexcept;

/// Gradient of the mean batch BCE. With a dropout source, one mask per row
/// is drawn in row order, exactly as the same number of train-mode forward
/// calls would draw them.
Gradient grad(const ClassifierParams& params, const Matrix& rows,
              std::span<const int> labels, DropoutSource* dropout = nullptr);

struct EpochStats {
  double train_loss = 0.0;
  std::optional<double> val_loss;
  std::optional<double> val_auc;

  bool operator==(const EpochStats&) const = default;
};

struct TrainResult {
  ClassifierParams params;
  std::vector<EpochStats> history;
  /// 0-based epoch whose parameters were kept.
  int best_epoch = 0;
};

/// Mini-batch Adam (beta1 0.9, beta2 0.999, eps 1e-8). Keeps the epoch
/// with the highest validation AUC, ties going to lower validation loss.
/// If `val` lacks one class the lowest validation loss wins; if it is
/// empty the final epoch is kept.
TrainResult train(const DesignMatrix& train_set, const DesignMatrix& val_set,
                  const ClassifierConfig& config);

enum class Verdict { Allow, Block };

struct FilterDecision {
  double score = 0.0;
  double threshold = 0.0;
  Verdict verdict = Verdict::Allow;
};

/// Block iff score > beta.
FilterDecision filter_decision(const ClassifierParams& params,
                               std::span<const double> x, double beta);

inline constexpr double kDefaultBeta = 0.5;
inline constexpr int kDefaultK = 7;

/// HSFW params file: magic 48 53 46 57, u32 version, config, tensors.
void save_params(const ClassifierParams& params, std::ostream& sink);
ClassifierParams load_params(std::istream& source);
void save_params(const ClassifierParams& params,
                 const std::filesystem::path& path);
ClassifierParams load_params(const std::filesystem::path& path);

}  // namespace hsf

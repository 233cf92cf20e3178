// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "hsf/matrix.hpp"

namespace hsf {

/// Two-component PCA model. `components` rows are orthonormal and ordered
/// by descending explained variance; each row's largest-magnitude entry is
/// positive.
struct PcaModel {
  std::vector<double> mean;
  std::array<std::vector<double>, 2> components;
  std::array<double, 2> explained_variance{};
};

struct PcaOptions {
  double tolerance = 1e-10;
  int max_iterations = 10000;
};

/// Top-2 eigenpairs of the sample covariance (n-1 denominator) by power
/// iteration with deflation. Rows are centered, never scaled.
/// Throws InvariantError if fewer than 3 rows or fewer than 2 columns, and
/// if the data spans fewer than two directions.
PcaModel pca_fit(const Matrix& rows, const PcaOptions& options = {});

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Point2&) const = default;
};

std::vector<Point2> pca_project(const PcaModel& model, const Matrix& rows);

enum class BoundaryMethod { Logistic, LinearSvm };

/// Decision rule: class 1 iff w . p + b > 0.
struct LinearBoundary {
  std::array<double, 2> weights{};
  double bias = 0.0;
  BoundaryMethod method = BoundaryMethod::Logistic;
  double training_accuracy = 0.0;

  int predict(const Point2& p) const noexcept {
    return weights[0] * p.x + weights[1] * p.y + bias > 0.0 ? 1 : 0;
  }
};

struct BoundaryOptions {
  // logistic regression
  double gradient_tolerance = 1e-6;
  int max_iterations = 10000;
  // soft-margin SVM
  double svm_c = 1.0;
  double svm_tolerance = 1e-9;
  long svm_max_iterations = 1000000;
};

/// Fits a 2-D linear boundary. Requires both classes with >= 2 points each.
LinearBoundary fit_boundary(std::span<const Point2> points,
                            std::span<const int> labels, BoundaryMethod method,
                            const BoundaryOptions& options = {});

enum class PlotClass { Benign, Harmful, Jailbreak };

const char* to_string(PlotClass c) noexcept;

/// Writes "x,y,class" CSV rows in input order, then an optional
/// "# boundary w1 w2 b" comment. Returns the number of data rows.
std::size_t emit_plot_data(std::span<const Point2> points,
                           std::span<const PlotClass> classes,
                           const std::optional<LinearBoundary>& boundary,
                           std::ostream& sink);

}  // namespace hsf

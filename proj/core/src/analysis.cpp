// SPDX-License-Identifier: Apache-2.0
#include "hsf/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "hsf/error.hpp"

namespace hsf {

namespace {

using Vec = std::vector<double>;

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double frobenius(const Matrix& m) { return norm(m.data); }

Matrix multiply(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols; ++j) out(i, j) += aik * b(k, j);
    }
  }
  return out;
}

Vec mat_vec(const Matrix& m, std::span<const double> v) {
  Vec out(m.rows, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) out[i] = dot(m.row(i), v);
  return out;
}

struct EigenPair {
  double value = 0.0;
  Vec vector;
};

// Dominant eigenpair of a symmetric PSD matrix.
//
// The power method is run in two phases. First the normalized matrix is
// squared repeatedly, which applies the power step 2^s times at once and
// converges to the projector onto the dominant eigenspace; its heaviest
// column is the starting vector. Plain power steps on `c` then polish it
// until successive iterates differ by less than the tolerance.
EigenPair dominant_eigenpair(const Matrix& c, const PcaOptions& options) {
  const std::size_t n = c.rows;
  Matrix m = c;
  double scale = frobenius(m);
  for (auto& x : m.data) x /= scale;

  constexpr int kMaxSquarings = 64;
  for (int s = 0; s < kMaxSquarings; ++s) {
    Matrix next = multiply(m, m);
    scale = frobenius(next);
    if (scale == 0.0) break;
    for (auto& x : next.data) x /= scale;
    double change = 0.0;
    for (std::size_t i = 0; i < next.data.size(); ++i) {
      change = std::max(change, std::abs(next.data[i] - m.data[i]));
    }
    m = std::move(next);
    if (change < options.tolerance * 1e-2) break;
  }

  std::size_t best_col = 0;
  double best_norm = -1.0;
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += m(i, j) * m(i, j);
    if (s > best_norm) {
      best_norm = s;
      best_col = j;
    }
  }
  Vec v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = m(i, best_col);
  double len = norm(v);
  if (len == 0.0) {
    v.assign(n, 0.0);
    v[best_col] = 1.0;
    len = 1.0;
  }
  for (auto& x : v) x /= len;

  for (int it = 0; it < options.max_iterations; ++it) {
    Vec w = mat_vec(c, v);
    const double wn = norm(w);
    if (wn == 0.0) break;
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      w[i] /= wn;
      change = std::max(change, std::abs(w[i] - v[i]));
    }
    v = std::move(w);
    if (change < options.tolerance) break;
  }
  return {dot(v, mat_vec(c, v)), std::move(v)};
}

void fix_sign(Vec& v) {
  std::size_t arg = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
  }
  if (v[arg] < 0.0) {
    for (auto& x : v) x = -x;
  }
}

void check_points(std::span<const Point2> points, std::span<const int> labels) {
  if (points.size() != labels.size()) {
    throw DimensionError(std::to_string(points.size()) + " points but " +
                         std::to_string(labels.size()) + " labels");
  }
  std::size_t pos = 0, neg = 0;
  for (int l : labels) {
    if (l == 1) {
      ++pos;
    } else if (l == 0) {
      ++neg;
    } else {
      throw InvariantError("labels must be 0 or 1");
    }
  }
  if (pos == 0 || neg == 0) throw InvariantError("boundary fit needs both classes (single-class input)");
  if (pos < 2 || neg < 2) throw InvariantError("boundary fit needs at least 2 points per class");
  for (const auto& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw NumericError("non-finite point");
  }
}

struct Fit {
  std::array<double, 2> w{};
  double b = 0.0;
};

Fit fit_logistic(std::span<const Point2> pts, std::span<const int> labels,
                 const BoundaryOptions& options) {
  const double n = static_cast<double>(pts.size());
  double mean_sq = 0.0;
  for (const auto& p : pts) mean_sq += (p.x * p.x + p.y * p.y) / n;
  // 1/L for the mean logistic loss, L <= 0.25 * (mean |x|^2 + 1).
  const double step = 1.0 / (0.25 * (mean_sq + 1.0));

  Fit f;
  for (int it = 0; it < options.max_iterations; ++it) {
    double gx = 0.0, gy = 0.0, gb = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double z = f.w[0] * pts[i].x + f.w[1] * pts[i].y + f.b;
      const double sig = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                                  : std::exp(z) / (1.0 + std::exp(z));
      const double r = (sig - labels[i]) / n;
      gx += r * pts[i].x;
      gy += r * pts[i].y;
      gb += r;
    }
    if (std::sqrt(gx * gx + gy * gy + gb * gb) < options.gradient_tolerance) break;
    f.w[0] -= step * gx;
    f.w[1] -= step * gy;
    f.b -= step * gb;
  }
  return f;
}

// Soft-margin linear SVM, solved in the dual by sequential minimal
// optimization with maximal-violating-pair selection.
Fit fit_svm(std::span<const Point2> pts, std::span<const int> labels,
            const BoundaryOptions& options) {
  const std::size_t n = pts.size();
  const double c = options.svm_c;
  if (!(c > 0.0)) throw RangeError("SVM C must be positive");
  constexpr double kTau = 1e-12;

  std::vector<double> y(n), alpha(n, 0.0), g(n, -1.0);
  for (std::size_t i = 0; i < n; ++i) y[i] = labels[i] == 1 ? 1.0 : -1.0;
  const auto kernel = [&](std::size_t a, std::size_t b) {
    return pts[a].x * pts[b].x + pts[a].y * pts[b].y;
  };
  const auto is_upper = [&](std::size_t t) { return alpha[t] >= c; };
  const auto is_lower = [&](std::size_t t) { return alpha[t] <= 0.0; };

  for (long iter = 0; iter < options.svm_max_iterations; ++iter) {
    double gmax = -std::numeric_limits<double>::infinity();
    double gmax2 = -std::numeric_limits<double>::infinity();
    std::size_t i = n, j = n;
    for (std::size_t t = 0; t < n; ++t) {
      if (y[t] > 0) {
        if (!is_upper(t) && -g[t] >= gmax) { gmax = -g[t]; i = t; }
        if (!is_lower(t) && g[t] >= gmax2) { gmax2 = g[t]; j = t; }
      } else {
        if (!is_lower(t) && g[t] >= gmax) { gmax = g[t]; i = t; }
        if (!is_upper(t) && -g[t] >= gmax2) { gmax2 = -g[t]; j = t; }
      }
    }
    if (i == n || j == n || gmax + gmax2 < options.svm_tolerance) break;

    const double old_ai = alpha[i], old_aj = alpha[j];
    const double qij = y[i] * y[j] * kernel(i, j);
    if (y[i] != y[j]) {
      double quad = kernel(i, i) + kernel(j, j) + 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-g[i] - g[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) { alpha[j] = 0; alpha[i] = diff; }
      } else {
        if (alpha[i] < 0) { alpha[i] = 0; alpha[j] = -diff; }
      }
      if (diff > 0) {
        if (alpha[i] > c) { alpha[i] = c; alpha[j] = c - diff; }
      } else {
        if (alpha[j] > c) { alpha[j] = c; alpha[i] = c + diff; }
      }
    } else {
      double quad = kernel(i, i) + kernel(j, j) - 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (g[i] - g[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > c) {
        if (alpha[i] > c) { alpha[i] = c; alpha[j] = sum - c; }
        if (alpha[j] > c) { alpha[j] = c; alpha[i] = sum - c; }
      } else {
        if (alpha[j] < 0) { alpha[j] = 0; alpha[i] = sum; }
        if (alpha[i] < 0) { alpha[i] = 0; alpha[j] = sum; }
      }
    }
    const double dai = alpha[i] - old_ai, daj = alpha[j] - old_aj;
    for (std::size_t t = 0; t < n; ++t) {
      g[t] += y[t] * (y[i] * kernel(t, i) * dai + y[j] * kernel(t, j) * daj);
    }
  }

  Fit f;
  for (std::size_t t = 0; t < n; ++t) {
    f.w[0] += alpha[t] * y[t] * pts[t].x;
    f.w[1] += alpha[t] * y[t] * pts[t].y;
  }
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * g[t];
    if (is_upper(t)) {
      if (y[t] < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (is_lower(t)) {
      if (y[t] > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;
  f.b = -rho;
  return f;
}

void append_number(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

}  // namespace

PcaModel pca_fit(const Matrix& rows, const PcaOptions& options) {
  if (rows.rows < 3) throw InvariantError("PCA needs at least 3 rows");
  if (rows.cols < 2) throw InvariantError("PCA needs at least 2 columns");
  const std::size_t n = rows.cols;
  const double count = static_cast<double>(rows.rows);

  PcaModel model;
  model.mean.assign(n, 0.0);
  for (std::size_t r = 0; r < rows.rows; ++r) {
    const auto row = rows.row(r);
    for (std::size_t j = 0; j < n; ++j) {
      if (!std::isfinite(row[j])) throw NumericError("non-finite PCA input");
      model.mean[j] += row[j];
    }
  }
  for (auto& m : model.mean) m /= count;

  Matrix cov(n, n);
  Vec centered(n);
  for (std::size_t r = 0; r < rows.rows; ++r) {
    const auto row = rows.row(r);
    for (std::size_t j = 0; j < n; ++j) centered[j] = row[j] - model.mean[j];
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a; b < n; ++b) cov(a, b) += centered[a] * centered[b];
    }
  }
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a; b < n; ++b) {
      cov(a, b) /= count - 1.0;
      cov(b, a) = cov(a, b);
    }
  }

  const double total = frobenius(cov);
  if (total == 0.0) throw InvariantError("degenerate variance: all rows identical");
  EigenPair first = dominant_eigenpair(cov, options);

  Matrix deflated = cov;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      deflated(a, b) -= first.value * first.vector[a] * first.vector[b];
    }
  }
  constexpr double kDegenerateRatio = 1e-10;
  if (frobenius(deflated) <= kDegenerateRatio * first.value) {
    throw InvariantError("degenerate variance: data spans fewer than two directions");
  }
  EigenPair second = dominant_eigenpair(deflated, options);

  // Re-orthogonalize against the first component.
  const double overlap = dot(second.vector, first.vector);
  for (std::size_t i = 0; i < n; ++i) second.vector[i] -= overlap * first.vector[i];
  const double len = norm(second.vector);
  for (auto& x : second.vector) x /= len;
  second.value = dot(second.vector, mat_vec(cov, second.vector));

  if (second.value <= kDegenerateRatio * first.value) {
    throw InvariantError("degenerate variance: data spans fewer than two directions");
  }
  if (second.value > first.value) std::swap(first, second);

  fix_sign(first.vector);
  fix_sign(second.vector);
  model.components = {std::move(first.vector), std::move(second.vector)};
  model.explained_variance = {first.value, second.value};
  return model;
}

std::vector<Point2> pca_project(const PcaModel& model, const Matrix& rows) {
  const std::size_t n = model.mean.size();
  if (rows.cols != n) {
    throw DimensionError("rows have " + std::to_string(rows.cols) +
                         " columns, PCA model expects " + std::to_string(n));
  }
  std::vector<Point2> out;
  out.reserve(rows.rows);
  for (std::size_t r = 0; r < rows.rows; ++r) {
    const auto row = rows.row(r);
    Point2 p;
    for (std::size_t j = 0; j < n; ++j) {
      const double c = row[j] - model.mean[j];
      p.x += model.components[0][j] * c;
      p.y += model.components[1][j] * c;
    }
    out.push_back(p);
  }
  return out;
}

LinearBoundary fit_boundary(std::span<const Point2> points, std::span<const int> labels,
                            BoundaryMethod method, const BoundaryOptions& options) {
  check_points(points, labels);

  // Fit on centered points; the shift folds back into the bias.
  Point2 mean;
  for (const auto& p : points) {
    mean.x += p.x;
    mean.y += p.y;
  }
  mean.x /= static_cast<double>(points.size());
  mean.y /= static_cast<double>(points.size());
  std::vector<Point2> centered;
  centered.reserve(points.size());
  for (const auto& p : points) centered.push_back({p.x - mean.x, p.y - mean.y});

  const Fit f = method == BoundaryMethod::Logistic ? fit_logistic(centered, labels, options)
                                                   : fit_svm(centered, labels, options);
  LinearBoundary boundary;
  boundary.method = method;
  boundary.weights = f.w;
  boundary.bias = f.b - f.w[0] * mean.x - f.w[1] * mean.y;

  if (f.w[0] == 0.0 && f.w[1] == 0.0) {
    // No direction separates the classes at all. Place a vertical line past
    // every point so all points fall on the majority side.
    const auto positives = std::count(labels.begin(), labels.end(), 1);
    const bool majority_positive =
        static_cast<std::size_t>(2 * positives) >= labels.size();
    double max_x = points.front().x;
    for (const auto& p : points) max_x = std::max(max_x, p.x);
    boundary.weights = {-1.0, 0.0};
    boundary.bias = max_x + 1.0;
    if (!majority_positive) {
      boundary.weights = {1.0, 0.0};
      boundary.bias = -(max_x + 1.0);
    }
  }
  if (!std::isfinite(boundary.weights[0]) || !std::isfinite(boundary.weights[1]) ||
      !std::isfinite(boundary.bias)) {
    throw NumericError("boundary fit diverged");
  }

  std::size_t correct = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    correct += boundary.predict(points[i]) == labels[i] ? 1 : 0;
  }
  boundary.training_accuracy =
      static_cast<double>(correct) / static_cast<double>(points.size());
  return boundary;
}

const char* to_string(PlotClass c) noexcept {
  switch (c) {
    case PlotClass::Benign: return "benign";
    case PlotClass::Harmful: return "harmful";
    case PlotClass::Jailbreak: return "jailbreak";
  }
  return "unknown";
}

std::size_t emit_plot_data(std::span<const Point2> points,
                           std::span<const PlotClass> classes,
                           const std::optional<LinearBoundary>& boundary,
                           std::ostream& sink) {
  if (points.size() != classes.size()) {
    throw DimensionError(std::to_string(points.size()) + " points but " +
                         std::to_string(classes.size()) + " classes");
  }
  std::string out = "x,y,class\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    append_number(out, points[i].x);
    out += ',';
    append_number(out, points[i].y);
    out += ',';
    out += to_string(classes[i]);
    out += '\n';
  }
  if (boundary) {
    out += "# boundary ";
    append_number(out, boundary->weights[0]);
    out += ' ';
    append_number(out, boundary->weights[1]);
    out += ' ';
    append_number(out, boundary->bias);
    out += '\n';
  }
  sink.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!sink) throw IoError("write failed");
  return points.size();
}

}  // namespace hsf

// Shared numeric domain types. All types are immutable value objects once
// constructed/validated and safe to share across threads. Double precision
// throughout; intensities live in [0,1] (8-bit inputs are divided by 255 at
// ingestion).

#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace chroma {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Errc {
  shape_mismatch,
  non_finite_entry,
  degenerate_input,
  invalid_input,
  io_error,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::shape_mismatch: return "shape-mismatch";
    case Errc::non_finite_entry: return "non-finite-entry";
    case Errc::degenerate_input: return "degenerate-input";
    case Errc::invalid_input: return "invalid-input";
    case Errc::io_error: return "io-error";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what),
        code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

// Structured warning line on stderr; data streams on stdout stay clean.
inline void warn(std::string_view module, std::string_view code,
                 std::string_view detail) {
  std::cerr << "warn module=" << module << " code=" << code << " detail=\""
            << detail << "\"\n";
}

struct RgbPixel {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;

  bool is_valid() const {
    return std::isfinite(r) && std::isfinite(g) && std::isfinite(b) &&
           r >= 0.0 && g >= 0.0 && b >= 0.0;
  }
};

// Corresponding samples from view A and view B. Column i of view_a pairs with
// column i of view_b. Rows are 3 for raw pixels; higher-layer batches carry
// the previous layer's descriptor dimension instead.
struct PixelBatchPair {
  Matrix view_a;
  Matrix view_b;

  Eigen::Index dim() const { return view_a.rows(); }
  Eigen::Index count() const { return view_a.cols(); }

  void validate() const {
    if (view_a.rows() != view_b.rows() || view_a.cols() != view_b.cols())
      throw Error(Errc::shape_mismatch, "view_a and view_b shapes differ");
    if (view_a.cols() < 1)
      throw Error(Errc::invalid_input, "batch needs at least one column");
    if (!view_a.allFinite() || !view_b.allFinite())
      throw Error(Errc::non_finite_entry, "batch contains non-finite values");
  }

  // Both views side by side, view A columns first.
  Matrix concatenated() const {
    Matrix x(view_a.rows(), view_a.cols() + view_b.cols());
    x << view_a, view_b;
    return x;
  }
};

// One layer of the learned model: encoder (w1, b1), decoder (w2, b2) and the
// dictionary. w1 is in_dim x h and lifting computes w1^T x + b1, so the lift
// maps in_dim -> h; w2 is h x in_dim and maps back.
struct ModelParams {
  Matrix w1;    // in_dim x h
  Vector b1;    // h
  Matrix w2;    // h x in_dim
  Vector b2;    // in_dim
  Matrix dict;  // h x d

  Eigen::Index in_dim() const { return w1.rows(); }
  Eigen::Index lifted_dim() const { return w1.cols(); }
  Eigen::Index atom_count() const { return dict.cols(); }
};

struct ValidationResult {
  bool ok = true;
  Errc code = Errc::invalid_input;
  std::string message;

  static ValidationResult accept() { return {}; }
  static ValidationResult reject(Errc code, std::string message) {
    return {false, code, std::move(message)};
  }
};

// Accepts iff every shape/finiteness invariant holds; reports the first
// violated one otherwise.
inline ValidationResult validate_model(const ModelParams& p) {
  const Eigen::Index n = p.w1.rows();
  const Eigen::Index h = p.w1.cols();
  const Eigen::Index d = p.dict.cols();
  if (n < 1 || h < 1)
    return ValidationResult::reject(Errc::shape_mismatch,
                                    "w1 must be at least 1x1");
  if (p.b1.size() != h)
    return ValidationResult::reject(
        Errc::shape_mismatch, "b1 length " + std::to_string(p.b1.size()) +
                                  " does not match h=" + std::to_string(h));
  if (p.w2.rows() != h || p.w2.cols() != n)
    return ValidationResult::reject(Errc::shape_mismatch,
                                    "w2 must be h x in_dim");
  if (p.b2.size() != n)
    return ValidationResult::reject(Errc::shape_mismatch,
                                    "b2 length must equal in_dim");
  if (d < 1 || p.dict.rows() != h)
    return ValidationResult::reject(
        Errc::shape_mismatch, "dict rows " + std::to_string(p.dict.rows()) +
                                  " do not match h=" + std::to_string(h));
  if (!p.w1.allFinite() || !p.b1.allFinite() || !p.w2.allFinite() ||
      !p.b2.allFinite() || !p.dict.allFinite())
    return ValidationResult::reject(Errc::non_finite_entry,
                                    "model contains a non-finite entry");
  return ValidationResult::accept();
}

// Loss weights and optimizer settings. Defaults are the cross-validated
// operating point: h=60, d=250, beta=1, gamma=0.1, lambda=3e-3, rho=0.01,
// eta=0.01, delta=1e-4.
struct HyperParams {
  double beta = 1.0;     // sparse-coding fit weight
  double gamma = 0.1;    // cross-view encoding-equality weight
  double lambda = 3e-3;  // encoder/decoder weight decay
  double rho = 0.01;     // dictionary decay
  double eta = 0.01;     // sparsity weight
  double delta = 1e-4;   // smoothing constant for the L1 surrogate
  int h = 60;            // lifted dimension
  int d = 250;           // dictionary atoms
  int lbfgs_iters = 50;  // inner iterations per phase
  int outer_iters = 100; // alternation rounds
  double tol = 1e-6;     // relative total-loss change for convergence

  void validate() const {
    if (!(delta > 0.0))
      throw Error(Errc::invalid_input, "delta must be positive");
    if (beta < 0 || gamma < 0 || lambda < 0 || rho < 0 || eta < 0)
      throw Error(Errc::invalid_input, "loss weights must be nonnegative");
    if (h < 1 || d < 1)
      throw Error(Errc::invalid_input, "h and d must be at least 1");
    if (lbfgs_iters < 1 || outer_iters < 1)
      throw Error(Errc::invalid_input, "iteration counts must be positive");
    if (!(tol > 0.0)) throw Error(Errc::invalid_input, "tol must be positive");
  }
};

// Codes for a batch pair during training; alpha_a column i encodes view_a
// column i.
struct SparseCodePair {
  Matrix alpha_a;  // d x m
  Matrix alpha_b;  // d x m

  Matrix concatenated() const {
    Matrix a(alpha_a.rows(), alpha_a.cols() + alpha_b.cols());
    a << alpha_a, alpha_b;
    return a;
  }
};

struct LossBreakdown {
  double ae = 0.0;   // reconstruction
  double sc = 0.0;   // sparse-coding fit
  double en = 0.0;   // cross-view encoding disagreement
  double reg = 0.0;  // weight decay + smoothed-L1 sparsity
  double total = 0.0;
};

// Dense grid of per-pixel (or per-cell) values, width x height x depth.
// Storage is raster order: index (x, y, c) -> (y * width + x) * depth + c.
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(int width, int height, int depth)
      : width_(width), height_(height), depth_(depth) {
    if (width < 1 || height < 1 || depth < 1)
      throw Error(Errc::invalid_input, "feature map dims must be positive");
    data_.assign(static_cast<std::size_t>(width) * height * depth, 0.0);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int depth() const { return depth_; }

  double& at(int x, int y, int c) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * depth_ + c];
  }
  double at(int x, int y, int c) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * depth_ + c];
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  // Grid cells as columns, raster order: column index y * width + x.
  Matrix as_columns() const {
    Matrix m(depth_, static_cast<Eigen::Index>(width_) * height_);
    for (Eigen::Index col = 0; col < m.cols(); ++col)
      for (int c = 0; c < depth_; ++c)
        m(c, col) = data_[static_cast<std::size_t>(col) * depth_ + c];
    return m;
  }

  static FeatureMap from_columns(const Matrix& cols, int width, int height) {
    if (cols.cols() != static_cast<Eigen::Index>(width) * height)
      throw Error(Errc::shape_mismatch, "column count does not match grid");
    FeatureMap map(width, height, static_cast<int>(cols.rows()));
    for (Eigen::Index col = 0; col < cols.cols(); ++col)
      for (int c = 0; c < map.depth_; ++c)
        map.data_[static_cast<std::size_t>(col) * map.depth_ + c] =
            cols(c, col);
    return map;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  int depth_ = 0;
  std::vector<double> data_;
};

}  // namespace chroma

#pragma once

// Dense numerics for a single-layer many-to-one GRU classifier: matrices,
// parameter bundles, batched forward/backward through time, Adam and a
// central-difference gradient oracle.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

namespace magicnet::numcore {

using Vector = std::vector<double>;
using Rng = std::mt19937_64;

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// GRU layer weights. Input matrices are hidden x input, recurrent ones
/// hidden x hidden.
///   z  = sigmoid(Wz x + Uz h + bz)
///   r  = sigmoid(Wr x + Ur h + br)
///   c  = tanh(Wh x + Uh (r * h) + bh)
///   h' = (1 - z) * h + z * c
struct GruParams {
  Matrix wz, wr, wh;
  Matrix uz, ur, uh;
  Vector bz, br, bh;

  static GruParams zeros(std::size_t input_dim, std::size_t hidden_dim);

  std::size_t input_dim() const { return wz.cols(); }
  std::size_t hidden_dim() const { return wz.rows(); }

  /// Throws std::logic_error when the nine tensors disagree on
  /// (input_dim, hidden_dim).
  void validate() const;

  bool operator==(const GruParams&) const = default;
};

/// Logit head: logit = w . h + b.
struct LinearParams {
  Vector w;
  double b = 0.0;

  bool operator==(const LinearParams&) const = default;
};

/// GRU layer plus its logit head. The same layout doubles as the gradient
/// bundle and as the shape of a mask set.
struct GruNet {
  GruParams gru;
  LinearParams head;

  static GruNet zeros(std::size_t input_dim, std::size_t hidden_dim);

  std::size_t input_dim() const { return gru.input_dim(); }
  std::size_t hidden_dim() const { return gru.hidden_dim(); }
  std::size_t parameter_count() const;
  void validate() const;

  bool operator==(const GruNet&) const = default;
};

using GradBundle = GruNet;

inline constexpr std::size_t kTensorCount = 11;

/// Views over every tensor of a net in canonical order:
/// wz wr wh uz ur uh bz br bh head.w head.b
std::vector<std::span<double>> tensors(GruNet& net);
std::vector<std::span<const double>> tensors(const GruNet& net);

bool all_finite(const GruNet& net);

/// Glorot-uniform weights, zero biases.
GruNet glorot_init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng);
void glorot_fill(Matrix& m, std::size_t fan_in, std::size_t fan_out, Rng& rng);

// ---------------------------------------------------------------------------
// Batched sequences

/// N sequences of equal length, stored step-major: element (t, n, f) lives at
/// data[(t * count + n) * dim + f], so each step is a contiguous N x dim block.
struct SequenceBatch {
  std::size_t count = 0;
  std::size_t length = 0;
  std::size_t dim = 0;
  std::vector<double> data;
  std::vector<double> targets;  // one per sequence; may be empty for inference

  SequenceBatch() = default;
  SequenceBatch(std::size_t count, std::size_t length, std::size_t dim)
      : count(count), length(length), dim(dim), data(count * length * dim, 0.0) {}

  std::span<const double> step(std::size_t t) const {
    return {data.data() + t * count * dim, count * dim};
  }
  std::span<double> at(std::size_t t, std::size_t n) {
    return {data.data() + (t * count + n) * dim, dim};
  }
  std::span<const double> at(std::size_t t, std::size_t n) const {
    return {data.data() + (t * count + n) * dim, dim};
  }
};

/// Pre-transposed weight layout consumed by the kernels. Build once per
/// weight version and reuse across forward calls.
struct PackedNet {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::vector<double> wx_t;    // input x 3H, columns [z | r | c]
  std::vector<double> uzr_t;   // H x 2H, columns [z | r]
  std::vector<double> uh_t;    // H x H
  std::vector<double> bias;    // 3H
  std::vector<double> uzr;     // 2H x H, rows [Uz ; Ur] (backward)
  std::vector<double> uh;      // H x H (backward)
  Vector head_w;
  double head_b = 0.0;
};

PackedNet pack(const GruNet& net);

struct StepCache {
  std::vector<double> h_prev;  // N x H
  std::vector<double> z, r, c;
  std::vector<double> rh;      // r * h_prev
};

struct ForwardResult {
  std::size_t count = 0;
  std::size_t hidden = 0;
  std::vector<StepCache> steps;
  std::vector<double> h_final;  // N x H
  std::vector<double> logits;   // N

  /// Hidden state after consuming step t (t in [0, length)).
  std::span<const double> hidden_after(std::size_t t) const;
};

ForwardResult forward_batch(const PackedNet& net, const SequenceBatch& batch);
ForwardResult forward_batch(const GruNet& net, const SequenceBatch& batch);

/// Mean binary cross-entropy over the batch, computed from logits.
double bce_loss(std::span<const double> logits, std::span<const double> targets);

/// Exact gradient of bce_loss (mean over sequences) w.r.t. every parameter.
GradBundle backward_batch(const PackedNet& net, const SequenceBatch& batch,
                          const ForwardResult& fwd);
GradBundle backward_batch(const GruNet& net, const SequenceBatch& batch,
                          const ForwardResult& fwd);

// Single-sample convenience wrappers.

struct CellCache {
  Vector h_prev, z, r, c;
};

struct CellOutput {
  Vector h_new;
  CellCache cache;
};

CellOutput gru_cell_forward(std::span<const double> x, std::span<const double> h_prev,
                            const GruParams& p);

struct SequenceOutput {
  double logit = 0.0;
  ForwardResult caches;
  SequenceBatch input;
};

/// Many-to-one pass over one sequence (W >= 1 vectors) from a zero state.
SequenceOutput forward_sequence(std::span<const Vector> seq, const GruNet& net);

GradBundle backward_sequence(const SequenceOutput& out, const GruNet& net, double target);

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  bool operator==(const AdamConfig&) const = default;
};

struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<Vector> m;
  std::vector<Vector> v;

  /// Zeroed moments mirroring the given parameter shapes.
  static AdamState for_params(std::span<const std::span<double>> params,
                              AdamConfig config = {});

  bool operator==(const AdamState&) const = default;
};

void adam_step(std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads, AdamState& state);

// ---------------------------------------------------------------------------
// Gradient oracle

/// Central differences on every entry of `params`; returns
/// max |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
/// Entries are perturbed in place and restored bit-exactly.
double finite_difference_check(const std::function<double()>& loss,
                               std::span<const std::span<double>> params,
                               std::span<const std::span<const double>> analytic,
                               double eps = 1e-5);

}  // namespace magicnet::numcore

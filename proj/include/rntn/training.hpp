#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "rntn/model.hpp"
#include "rntn/rng.hpp"

// Optimization machinery: AdaGrad with validation-driven learning-rate
// decay, global-norm gradient rescaling, and parameter initialization
// (orthogonal matrices, uniform-small tensors and biases).

namespace rntn {

struct TrainConfig {
  double learning_rate = 0.1;
  double decay_factor = 0.5;
  double clip_norm = 5.0;
  std::size_t bptt_k = 0;  // 0 = unlimited
  double dropout_p = 0.0;
  std::size_t batch_size = 15;
  std::size_t max_epochs = 1;
  std::uint64_t seed = 1;
  std::size_t threads = 1;

  void validate() const;
};

// Per-parameter accumulated squared gradients, laid out parallel to
// param_refs(model).
struct OptimizerState {
  std::vector<std::vector<double>> accum;
  double epsilon = 1e-8;

  static OptimizerState for_model(Model& model);
};

// Global L2 norm across every gradient buffer.
double global_grad_norm(ModelGrads& grads);

// If the global norm exceeds clip_norm, rescales every gradient by
// clip_norm / norm (direction preserved); otherwise leaves the gradients
// untouched. Returns the pre-rescale norm.
double clip_rescale(ModelGrads& grads, double clip_norm);

// Elementwise AdaGrad: accum += g^2; param -= lr * g / (sqrt(accum) + eps).
void adagrad_update(Model& params, ModelGrads& grads, OptimizerState& state,
                    double lr);

// Halving-style decay: lr * factor iff the validation cost worsened
// (strictly greater than the previous epoch's).
double maybe_decay_lr(double current_lr, double prev_val_cost, double val_cost,
                      double factor);

// Random matrix with orthonormal columns (rows >= cols) or rows
// (rows < cols); for square shapes Q^T Q = I to machine precision.
Matrix orthogonal_init(std::size_t rows, std::size_t cols, Rng& rng);

// Uniform entries in [-range, range].
void uniform_init(std::vector<double>& values, double range, Rng& rng);

// Initializes every parameter of the model in canonical order: orthogonal
// for all weight matrices (embedding and output projection included),
// uniform in [-1/sqrt(in*d), 1/sqrt(in*d)] for the tensor, uniform
// in [-0.01, 0.01] for biases.
void init_model(Model& model, Rng& rng);

}  // namespace rntn

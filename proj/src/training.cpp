#include "rntn/training.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace rntn {

void TrainConfig::validate() const {
  if (learning_rate <= 0.0)
    throw std::invalid_argument("config: learning rate must be positive");
  if (decay_factor <= 0.0 || decay_factor > 1.0)
    throw std::invalid_argument("config: decay factor must lie in (0, 1]");
  if (clip_norm <= 0.0)
    throw std::invalid_argument("config: clip norm must be positive");
  if (dropout_p < 0.0 || dropout_p >= 1.0)
    throw std::invalid_argument("config: dropout must lie in [0, 1)");
  if (batch_size == 0)
    throw std::invalid_argument("config: batch size must be positive");
  if (threads == 0)
    throw std::invalid_argument("config: thread count must be positive");
}

OptimizerState OptimizerState::for_model(Model& model) {
  OptimizerState state;
  for (const auto& ref : param_refs(model))
    state.accum.emplace_back(ref.values->size(), 0.0);
  return state;
}

double global_grad_norm(ModelGrads& grads) {
  double sq = 0.0;
  for (const auto& ref : param_refs(grads))
    for (double g : *ref.values) sq += g * g;
  return std::sqrt(sq);
}

double clip_rescale(ModelGrads& grads, double clip_norm) {
  if (clip_norm <= 0.0)
    throw std::invalid_argument("clip_rescale: clip norm must be positive");
  double norm = global_grad_norm(grads);
  if (norm > clip_norm) {
    const double scale = clip_norm / norm;
    for (const auto& ref : param_refs(grads))
      for (double& g : *ref.values) g *= scale;
  }
  return norm;
}

void adagrad_update(Model& params, ModelGrads& grads, OptimizerState& state,
                    double lr) {
  auto prefs = param_refs(params);
  auto grefs = param_refs(grads);
  if (state.accum.size() != prefs.size())
    throw std::invalid_argument("adagrad_update: optimizer state mismatch");
  for (std::size_t p = 0; p < prefs.size(); ++p) {
    std::vector<double>& theta = *prefs[p].values;
    const std::vector<double>& g = *grefs[p].values;
    std::vector<double>& acc = state.accum[p];
    if (theta.size() != g.size() || theta.size() != acc.size())
      throw ShapeError("adagrad_update: buffer size mismatch at " +
                       prefs[p].name);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      acc[i] += g[i] * g[i];
      theta[i] -= lr * g[i] / (std::sqrt(acc[i]) + state.epsilon);
    }
  }
}

double maybe_decay_lr(double current_lr, double prev_val_cost, double val_cost,
                      double factor) {
  if (factor <= 0.0 || factor > 1.0)
    throw std::invalid_argument("maybe_decay_lr: factor must lie in (0, 1]");
  return val_cost > prev_val_cost ? current_lr * factor : current_lr;
}

namespace {

// Modified Gram-Schmidt on the columns of a rows x cols matrix (rows >=
// cols), run twice for orthogonality to machine precision. Near-dependent
// draws are replaced and reprojected.
Matrix orthonormal_columns(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix q(rows, cols);
  for (auto& v : q.data) v = rng.gaussian();

  auto column_dot = [&q, rows](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t r = 0; r < rows; ++r) s += q(r, a) * q(r, b);
    return s;
  };

  for (std::size_t c = 0; c < cols; ++c) {
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t p = 0; p < c; ++p) {
        double proj = column_dot(p, c);
        for (std::size_t r = 0; r < rows; ++r) q(r, c) -= proj * q(r, p);
      }
    }
    double norm = std::sqrt(column_dot(c, c));
    while (norm < 1e-12) {
      for (std::size_t r = 0; r < rows; ++r) q(r, c) = rng.gaussian();
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t p = 0; p < c; ++p) {
          double proj = column_dot(p, c);
          for (std::size_t r = 0; r < rows; ++r) q(r, c) -= proj * q(r, p);
        }
      }
      norm = std::sqrt(column_dot(c, c));
    }
    for (std::size_t r = 0; r < rows; ++r) q(r, c) /= norm;
  }
  return q;
}

}  // namespace

Matrix orthogonal_init(std::size_t rows, std::size_t cols, Rng& rng) {
  if (rows == 0 || cols == 0)
    throw std::invalid_argument("orthogonal_init: dimensions must be positive");
  if (rows >= cols) return orthonormal_columns(rows, cols, rng);
  Matrix qt = orthonormal_columns(cols, rows, rng);
  Matrix q(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) q(r, c) = qt(c, r);
  return q;
}

void uniform_init(std::vector<double>& values, double range, Rng& rng) {
  for (double& v : values) v = rng.uniform(-range, range);
}

void init_model(Model& model, Rng& rng) {
  const double bias_range = 0.01;
  const double tensor_range =
      1.0 / std::sqrt(static_cast<double>(model.cell.input_dim) *
                      static_cast<double>(model.cell.hidden_dim));

  for (const auto& ref : param_refs(model)) {
    if (ref.name == "w_tsr") {
      uniform_init(*ref.values, tensor_range, rng);
    } else if (ref.name[0] == 'b') {
      uniform_init(*ref.values, bias_range, rng);
    } else if (ref.name == "embedding") {
      Matrix q = orthogonal_init(model.vocab_size, model.embed_dim, rng);
      *ref.values = std::move(q.data);
    } else if (ref.name == "w_hy") {
      Matrix q = orthogonal_init(model.hidden_dim, model.vocab_size, rng);
      *ref.values = std::move(q.data);
    } else if (ref.name[0] == 'w' && ref.name[2] == 'x') {
      Matrix q =
          orthogonal_init(model.cell.input_dim, model.cell.hidden_dim, rng);
      *ref.values = std::move(q.data);
    } else {
      Matrix q =
          orthogonal_init(model.cell.hidden_dim, model.cell.hidden_dim, rng);
      *ref.values = std::move(q.data);
    }
  }
}

}  // namespace rntn

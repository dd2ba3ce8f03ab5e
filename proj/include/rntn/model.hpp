#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "rntn/cells.hpp"
#include "rntn/data.hpp"
#include "rntn/linalg.hpp"

// A complete language model: embedding -> recurrent cell -> softmax
// projection, with sequence-level loss and truncated BPTT.

namespace rntn {

struct Model {
  CellKind kind = CellKind::SimpleRNN;
  std::size_t embed_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t vocab_size = 0;

  Embedding embedding;  // vocab x embed_dim
  CellParams cell;      // input dim = embed_dim
  OutputLayer output;   // hidden_dim x vocab

  Model() = default;
  Model(CellKind kind, std::size_t embed_dim, std::size_t hidden_dim,
        std::size_t vocab_size);

  // Same shapes, all values zero; doubles as the gradient accumulator.
  Model zeros_like() const {
    return Model(kind, embed_dim, hidden_dim, vocab_size);
  }
};

using ModelGrads = Model;

// Flat named views over every parameter, in the canonical order used by
// checkpoints and the optimizer: embedding, cell parameters, output layer.
std::vector<ParamRef> param_refs(Model& m);

// Total number of 64-bit values across all parameters.
std::size_t param_count(Model& m);

struct LossReport {
  double total_nll = 0.0;       // nats
  std::size_t token_count = 0;  // predictions made

  double mean_nll() const {
    return token_count == 0 ? 0.0 : total_nll / static_cast<double>(token_count);
  }
};

// Pre-sampled inverted-dropout masks for one sentence; entries are either 0
// or 1/(1-p). Masks cover the non-recurrent connections only: embedding ->
// cell input and hidden -> output.
struct DropoutPlan {
  std::vector<Vector> input_mask;   // per step, size embed_dim
  std::vector<Vector> hidden_mask;  // per step, size hidden_dim
};

// Fresh masks for `steps` timesteps. p = 0 yields all-ones masks.
DropoutPlan make_dropout_plan(std::size_t steps, std::size_t embed_dim,
                              std::size_t hidden_dim, double p, Rng& rng);

// Single dropout mask with entries in {0, 1/(1-p)}.
Vector dropout_mask(std::size_t size, double p, Rng& rng);

// Mean negative log-likelihood of tokens[1..] given their prefixes; the
// recurrent state starts at zero. Deterministic (no dropout). Requires at
// least two tokens and every id within the model vocabulary.
LossReport sequence_nll(const Model& model, const std::vector<int>& tokens);

// Truncated BPTT over one sentence. Returns the gradient of the summed NLL
// w.r.t. every parameter, restricted per prediction position i to the
// timesteps j in [max(0, i-K), i]. bptt_k == 0 means unlimited (full
// backpropagation; single reverse sweep). `dropout`, when given, must hold
// masks for tokens.size()-1 steps.
struct BpttResult {
  ModelGrads grads;
  LossReport loss;
};
BpttResult bptt(const Model& model, const std::vector<int>& tokens,
                std::size_t bptt_k, const DropoutPlan* dropout = nullptr);

// Runs the model over a prefix and returns the next-token distribution,
// optionally exposing per-position log-probabilities of the actual
// continuation (used by evaluation dumps).
std::vector<double> sequence_log_probs(const Model& model,
                                       const std::vector<int>& tokens);

}  // namespace rntn

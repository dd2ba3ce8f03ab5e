#include "rntn/model.hpp"

#include <cmath>
#include <stdexcept>

namespace rntn {

Model::Model(CellKind kind, std::size_t embed_dim, std::size_t hidden_dim,
             std::size_t vocab_size)
    : kind(kind),
      embed_dim(embed_dim),
      hidden_dim(hidden_dim),
      vocab_size(vocab_size),
      embedding(vocab_size, embed_dim),
      cell(kind, embed_dim, hidden_dim),
      output(hidden_dim, vocab_size) {
  if (vocab_size == 0)
    throw std::invalid_argument("Model: vocab size must be positive");
}

std::vector<ParamRef> param_refs(Model& m) {
  std::vector<ParamRef> refs;
  refs.push_back({"embedding", &m.embedding.table.data});
  for (auto& r : param_refs(m.cell)) refs.push_back(std::move(r));
  refs.push_back({"w_hy", &m.output.w.data});
  refs.push_back({"b_y", &m.output.b.data});
  return refs;
}

std::size_t param_count(Model& m) {
  std::size_t n = 0;
  for (const auto& r : param_refs(m)) n += r.values->size();
  return n;
}

Vector dropout_mask(std::size_t size, double p, Rng& rng) {
  if (p < 0.0 || p >= 1.0)
    throw std::invalid_argument("dropout_mask: p must lie in [0, 1)");
  Vector mask(size);
  const double keep_scale = 1.0 / (1.0 - p);
  for (std::size_t i = 0; i < size; ++i)
    mask[i] = rng.uniform01() < p ? 0.0 : keep_scale;
  return mask;
}

DropoutPlan make_dropout_plan(std::size_t steps, std::size_t embed_dim,
                              std::size_t hidden_dim, double p, Rng& rng) {
  DropoutPlan plan;
  plan.input_mask.reserve(steps);
  plan.hidden_mask.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    plan.input_mask.push_back(dropout_mask(embed_dim, p, rng));
    plan.hidden_mask.push_back(dropout_mask(hidden_dim, p, rng));
  }
  return plan;
}

namespace {

void check_sequence(const Model& model, const std::vector<int>& tokens) {
  if (tokens.size() < 2)
    throw std::invalid_argument(
        "sequence: need at least two tokens (one prediction), got " +
        std::to_string(tokens.size()));
  for (int id : tokens)
    if (id < 0 || static_cast<std::size_t>(id) >= model.vocab_size)
      throw std::out_of_range("sequence: token id " + std::to_string(id) +
                              " out of range for vocab " +
                              std::to_string(model.vocab_size));
}

struct SequenceForward {
  std::vector<StepTrace> traces;
  std::vector<Vector> h_for_output;  // hidden state after dropout, per step
  LossReport loss;
};

// One shared forward pass for loss, BPTT and log-prob dumps. `dropout` may
// be null; `keep_traces` controls whether the per-step caches are retained.
SequenceForward forward_sequence(const Model& model,
                                 const std::vector<int>& tokens,
                                 const DropoutPlan* dropout, bool keep_traces,
                                 std::vector<double>* log_probs = nullptr) {
  check_sequence(model, tokens);
  const std::size_t steps = tokens.size() - 1;
  if (dropout && (dropout->input_mask.size() < steps ||
                  dropout->hidden_mask.size() < steps))
    throw std::invalid_argument("forward_sequence: dropout plan too short");

  SequenceForward out;
  if (keep_traces) {
    out.traces.reserve(steps);
    out.h_for_output.reserve(steps);
  }

  StepState state = zero_state(model.cell);
  for (std::size_t t = 0; t < steps; ++t) {
    Vector x = embed_lookup(model.embedding, static_cast<std::size_t>(tokens[t]));
    if (dropout) x = hadamard(x, dropout->input_mask[t]);

    StepResult step = step_forward(model.cell, x, state);
    state = step.state;

    Vector h_out = dropout ? hadamard(state.h, dropout->hidden_mask[t])
                           : state.h;
    Vector probs = output_forward(model.output, h_out);
    double lp = std::log(probs[static_cast<std::size_t>(tokens[t + 1])]);
    if (!std::isfinite(lp))
      throw NumericError("forward_sequence: non-finite log-probability");
    out.loss.total_nll -= lp;
    out.loss.token_count += 1;
    if (log_probs) log_probs->push_back(lp);

    if (keep_traces) {
      out.traces.push_back(std::move(step.trace));
      out.h_for_output.push_back(std::move(h_out));
    }
  }
  return out;
}

void accum_matrix(Matrix& dst, const Matrix& src) {
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

// Applies the output-layer backward at prediction position t and returns
// the resulting gradient w.r.t. the recurrent hidden state.
Vector output_grad_at(const Model& model, const SequenceForward& fwd,
                      const std::vector<int>& tokens, std::size_t t,
                      const DropoutPlan* dropout, ModelGrads& grads) {
  OutputBackward ob = output_backward(
      model.output, fwd.h_for_output[t], static_cast<std::size_t>(tokens[t + 1]));
  accum_matrix(grads.output.w, ob.grad_w);
  add_into(grads.output.b, ob.grad_b);
  return dropout ? hadamard(ob.grad_h, dropout->hidden_mask[t])
                 : std::move(ob.grad_h);
}

void backprop_step(const Model& model, const SequenceForward& fwd,
                   const std::vector<int>& tokens, std::size_t j,
                   const DropoutPlan* dropout, const StepState& grad_out,
                   ModelGrads& grads, StepState& grad_prev) {
  StepInputGrads sig =
      step_backward_accum(model.cell, fwd.traces[j], grad_out, grads.cell);
  Vector dx = dropout ? hadamard(sig.grad_x, dropout->input_mask[j])
                      : std::move(sig.grad_x);
  embed_grad_accumulate(grads.embedding, static_cast<std::size_t>(tokens[j]),
                        dx);
  grad_prev = std::move(sig.grad_prev);
}

}  // namespace

LossReport sequence_nll(const Model& model, const std::vector<int>& tokens) {
  return forward_sequence(model, tokens, nullptr, false).loss;
}

std::vector<double> sequence_log_probs(const Model& model,
                                       const std::vector<int>& tokens) {
  std::vector<double> lps;
  lps.reserve(tokens.size() - 1);
  forward_sequence(model, tokens, nullptr, false, &lps);
  return lps;
}

BpttResult bptt(const Model& model, const std::vector<int>& tokens,
                std::size_t bptt_k, const DropoutPlan* dropout) {
  SequenceForward fwd = forward_sequence(model, tokens, dropout, true);
  const std::size_t steps = fwd.traces.size();

  BpttResult out;
  out.grads = model.zeros_like();
  out.loss = fwd.loss;

  const bool lstm = is_lstm_family(model.kind);
  auto fresh_carry = [&]() {
    StepState s;
    s.h = Vector(model.hidden_dim);
    if (lstm) s.c = Vector(model.hidden_dim);
    return s;
  };

  if (bptt_k == 0) {
    // Unlimited: one reverse sweep accumulating every error path.
    StepState carry = fresh_carry();
    for (std::size_t t = steps; t-- > 0;) {
      Vector dh = output_grad_at(model, fwd, tokens, t, dropout, out.grads);
      add_into(carry.h, dh);
      StepState grad_prev;
      backprop_step(model, fwd, tokens, t, dropout, carry, out.grads,
                    grad_prev);
      carry = std::move(grad_prev);
    }
    return out;
  }

  // Truncated: each prediction's error is propagated through at most
  // bptt_k earlier timesteps.
  for (std::size_t i = 0; i < steps; ++i) {
    StepState carry = fresh_carry();
    carry.h = output_grad_at(model, fwd, tokens, i, dropout, out.grads);
    const std::size_t stop = i >= bptt_k ? i - bptt_k : 0;
    for (std::size_t j = i + 1; j-- > stop;) {
      StepState grad_prev;
      backprop_step(model, fwd, tokens, j, dropout, carry, out.grads,
                    grad_prev);
      carry = std::move(grad_prev);
    }
  }
  return out;
}

}  // namespace rntn

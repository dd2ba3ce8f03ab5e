#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "rntn/linalg.hpp"

// Single-timestep forward and backward computation for the five recurrent
// cell variants, plus the softmax output projection.
//
// Conventions (row-vector algebra, as in the cell equations):
//   - input-to-hidden weights are input_dim x hidden_dim,
//   - hidden-to-hidden and peephole weights are hidden_dim x hidden_dim,
//   - the tensor weight has hidden_dim slices of input_dim x hidden_dim.
//
// Gate pre-activations are assembled left to right as
//   x*Wx + h_prev*Wh [+ c_prev*Wc] + bias
// and the candidate pre-activation as
//   x*Wx + gated_h*Wh + bias [+ bilinear term]
// with the bilinear term added last so that a zero tensor reproduces the
// baseline cell bit for bit.

namespace rntn {

enum class CellKind { SimpleRNN, GRU, LSTM, GRURNTN, LSTMRNTN };

bool is_lstm_family(CellKind kind);
bool is_gru_family(CellKind kind);
bool has_tensor(CellKind kind);

// Short lowercase names used by the CLI and checkpoint manifest:
// rnn, gru, lstm, grurntn, lstmrntn.
std::string_view cell_kind_name(CellKind kind);
CellKind parse_cell_kind(std::string_view name);

// All weights for one cell. Only the fields belonging to `kind` are
// allocated; the rest stay empty. The same struct doubles as the gradient
// accumulator (see zeros_like).
struct CellParams {
  CellKind kind = CellKind::SimpleRNN;
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;

  // Hidden candidate (simple RNN and GRU family).
  Matrix w_xh, w_hh;
  Vector b_h;

  // GRU family gates.
  Matrix w_xr, w_hr;
  Vector b_r;
  Matrix w_xz, w_hz;
  Vector b_z;

  // LSTM family gates (w_c* are the cell-value peephole weights).
  Matrix w_xi, w_hi, w_ci;
  Vector b_i;
  Matrix w_xf, w_hf, w_cf;
  Vector b_f;
  Matrix w_xo, w_ho, w_co;
  Vector b_o;

  // LSTM family memory-cell candidate.
  Matrix w_xc, w_hc;
  Vector b_c;

  // Bilinear tensor weight (GRURNTN / LSTMRNTN only).
  Tensor3 tensor;

  CellParams() = default;
  CellParams(CellKind kind, std::size_t input_dim, std::size_t hidden_dim);

  CellParams zeros_like() const {
    return CellParams(kind, input_dim, hidden_dim);
  }
};

using CellGrads = CellParams;

// Named view of one parameter's flat storage, in the canonical ordering
// used for checkpoints, optimizer state and gradient reports.
struct ParamRef {
  std::string name;
  std::vector<double>* values;
};

std::vector<ParamRef> param_refs(CellParams& p);

// Recurrent state carried between timesteps; `c` is present only for the
// LSTM family.
struct StepState {
  Vector h;
  Vector c;
};

StepState zero_state(const CellParams& p);

// Everything the backward step needs from the forward step.
struct StepTrace {
  CellKind kind = CellKind::SimpleRNN;
  Vector x, h_prev, c_prev;

  // GRU family.
  Vector r, z, h_gated, h_cand;

  // LSTM family.
  Vector gate_i, gate_f, gate_o, c_cand, c_new, tanh_c;

  Vector h_new;
};

struct StepResult {
  StepState state;
  StepTrace trace;
};

StepResult step_simple(const CellParams& p, const Vector& x,
                       const StepState& prev);
StepResult step_gru(const CellParams& p, const Vector& x,
                    const StepState& prev);
StepResult step_lstm(const CellParams& p, const Vector& x,
                     const StepState& prev);
StepResult step_grurntn(const CellParams& p, const Vector& x,
                        const StepState& prev);
StepResult step_lstmrntn(const CellParams& p, const Vector& x,
                         const StepState& prev);

// Dispatch on p.kind.
StepResult step_forward(const CellParams& p, const Vector& x,
                        const StepState& prev);

struct StepBackward {
  CellGrads grads;
  Vector grad_x;
  StepState grad_prev;
};

// Exact analytic gradients for one step. `grad_out.h` is dE/dh_t; for the
// LSTM family `grad_out.c` carries dE/dc_t from later timesteps (pass an
// empty vector or zeros when there is none). Throws if the trace kind does
// not match the parameters.
StepBackward step_backward(const CellParams& p, const StepTrace& trace,
                           const StepState& grad_out);

// Accumulating flavour used by BPTT: parameter gradients are added into
// `sink`, while the input/state gradients are returned.
struct StepInputGrads {
  Vector grad_x;
  StepState grad_prev;
};
StepInputGrads step_backward_accum(const CellParams& p, const StepTrace& trace,
                                   const StepState& grad_out, CellGrads& sink);

// ---------------------------------------------------------------------------
// Output projection: probabilities = softmax(h * w + b).
// ---------------------------------------------------------------------------

struct OutputLayer {
  Matrix w;  // hidden_dim x vocab
  Vector b;  // vocab

  OutputLayer() = default;
  OutputLayer(std::size_t hidden_dim, std::size_t vocab)
      : w(hidden_dim, vocab), b(vocab) {}
};

Vector output_forward(const OutputLayer& layer, const Vector& h);

struct OutputBackward {
  Matrix grad_w;
  Vector grad_b;
  Vector grad_h;
  double nll = 0.0;
};

// Softmax + negative log-likelihood of `target`; the logit gradient is
// (p - onehot(target)).
OutputBackward output_backward(const OutputLayer& layer, const Vector& h,
                               std::size_t target);

}  // namespace rntn

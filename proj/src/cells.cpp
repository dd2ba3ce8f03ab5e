#include "rntn/cells.hpp"

#include <cmath>
#include <stdexcept>

namespace rntn {

bool is_lstm_family(CellKind kind) {
  return kind == CellKind::LSTM || kind == CellKind::LSTMRNTN;
}

bool is_gru_family(CellKind kind) {
  return kind == CellKind::GRU || kind == CellKind::GRURNTN;
}

bool has_tensor(CellKind kind) {
  return kind == CellKind::GRURNTN || kind == CellKind::LSTMRNTN;
}

std::string_view cell_kind_name(CellKind kind) {
  switch (kind) {
    case CellKind::SimpleRNN: return "rnn";
    case CellKind::GRU: return "gru";
    case CellKind::LSTM: return "lstm";
    case CellKind::GRURNTN: return "grurntn";
    case CellKind::LSTMRNTN: return "lstmrntn";
  }
  throw std::logic_error("cell_kind_name: bad enum value");
}

CellKind parse_cell_kind(std::string_view name) {
  if (name == "rnn") return CellKind::SimpleRNN;
  if (name == "gru") return CellKind::GRU;
  if (name == "lstm") return CellKind::LSTM;
  if (name == "grurntn") return CellKind::GRURNTN;
  if (name == "lstmrntn") return CellKind::LSTMRNTN;
  throw std::invalid_argument("unknown cell kind: " + std::string(name));
}

CellParams::CellParams(CellKind kind, std::size_t input_dim,
                       std::size_t hidden_dim)
    : kind(kind), input_dim(input_dim), hidden_dim(hidden_dim) {
  if (input_dim == 0 || hidden_dim == 0)
    throw std::invalid_argument("CellParams: dimensions must be positive");
  const std::size_t i = input_dim;
  const std::size_t d = hidden_dim;
  if (is_lstm_family(kind)) {
    w_xi = Matrix(i, d); w_hi = Matrix(d, d); w_ci = Matrix(d, d);
    b_i = Vector(d);
    w_xf = Matrix(i, d); w_hf = Matrix(d, d); w_cf = Matrix(d, d);
    b_f = Vector(d);
    w_xc = Matrix(i, d); w_hc = Matrix(d, d);
    b_c = Vector(d);
    w_xo = Matrix(i, d); w_ho = Matrix(d, d); w_co = Matrix(d, d);
    b_o = Vector(d);
  } else {
    w_xh = Matrix(i, d); w_hh = Matrix(d, d);
    b_h = Vector(d);
    if (is_gru_family(kind)) {
      w_xr = Matrix(i, d); w_hr = Matrix(d, d);
      b_r = Vector(d);
      w_xz = Matrix(i, d); w_hz = Matrix(d, d);
      b_z = Vector(d);
    }
  }
  if (has_tensor(kind)) tensor = Tensor3(i, d);
}

std::vector<ParamRef> param_refs(CellParams& p) {
  std::vector<ParamRef> refs;
  auto push = [&refs](const char* name, auto& field) {
    refs.push_back({name, &field.data});
  };
  switch (p.kind) {
    case CellKind::SimpleRNN:
      push("w_xh", p.w_xh); push("w_hh", p.w_hh); push("b_h", p.b_h);
      break;
    case CellKind::GRU:
    case CellKind::GRURNTN:
      push("w_xr", p.w_xr); push("w_hr", p.w_hr); push("b_r", p.b_r);
      push("w_xz", p.w_xz); push("w_hz", p.w_hz); push("b_z", p.b_z);
      push("w_xh", p.w_xh); push("w_hh", p.w_hh); push("b_h", p.b_h);
      break;
    case CellKind::LSTM:
    case CellKind::LSTMRNTN:
      push("w_xi", p.w_xi); push("w_hi", p.w_hi); push("w_ci", p.w_ci);
      push("b_i", p.b_i);
      push("w_xf", p.w_xf); push("w_hf", p.w_hf); push("w_cf", p.w_cf);
      push("b_f", p.b_f);
      push("w_xc", p.w_xc); push("w_hc", p.w_hc); push("b_c", p.b_c);
      push("w_xo", p.w_xo); push("w_ho", p.w_ho); push("w_co", p.w_co);
      push("b_o", p.b_o);
      break;
  }
  if (has_tensor(p.kind)) refs.push_back({"w_tsr", &p.tensor.data});
  return refs;
}

StepState zero_state(const CellParams& p) {
  StepState s;
  s.h = Vector(p.hidden_dim);
  if (is_lstm_family(p.kind)) s.c = Vector(p.hidden_dim);
  return s;
}

namespace {

void check_step_inputs(const CellParams& p, const Vector& x,
                       const StepState& prev) {
  if (x.size() != p.input_dim)
    throw ShapeError("step: input vector[" + std::to_string(x.size()) +
                     "] does not match cell input dim " +
                     std::to_string(p.input_dim));
  if (prev.h.size() != p.hidden_dim)
    throw ShapeError("step: state vector[" + std::to_string(prev.h.size()) +
                     "] does not match cell hidden dim " +
                     std::to_string(p.hidden_dim));
  if (is_lstm_family(p.kind) && prev.c.size() != p.hidden_dim)
    throw ShapeError("step: cell vector[" + std::to_string(prev.c.size()) +
                     "] does not match cell hidden dim " +
                     std::to_string(p.hidden_dim));
}

// pre[j] = xw[j] + hw[j] + b[j]
Vector gate_pre(const Vector& x, const Matrix& wx, const Vector& h,
                const Matrix& wh, const Vector& b) {
  Vector xw = vecmat(x, wx);
  Vector hw = vecmat(h, wh);
  Vector pre(b.size());
  for (std::size_t j = 0; j < b.size(); ++j) pre[j] = xw[j] + hw[j] + b[j];
  return pre;
}

// pre[j] = xw[j] + hw[j] + cw[j] + b[j]
Vector gate_pre_peephole(const Vector& x, const Matrix& wx, const Vector& h,
                         const Matrix& wh, const Vector& c, const Matrix& wc,
                         const Vector& b) {
  Vector xw = vecmat(x, wx);
  Vector hw = vecmat(h, wh);
  Vector cw = vecmat(c, wc);
  Vector pre(b.size());
  for (std::size_t j = 0; j < b.size(); ++j)
    pre[j] = xw[j] + hw[j] + cw[j] + b[j];
  return pre;
}

// Shared GRU / GRURNTN forward; `tensor` is null for the plain GRU.
StepResult gru_forward(const CellParams& p, const Vector& x,
                       const StepState& prev, const Tensor3* tensor) {
  check_step_inputs(p, x, prev);
  StepTrace t;
  t.kind = p.kind;
  t.x = x;
  t.h_prev = prev.h;

  t.r = sigmoid(gate_pre(x, p.w_xr, prev.h, p.w_hr, p.b_r));
  t.z = sigmoid(gate_pre(x, p.w_xz, prev.h, p.w_hz, p.b_z));
  t.h_gated = hadamard(t.r, prev.h);

  Vector pre = gate_pre(x, p.w_xh, t.h_gated, p.w_hh, p.b_h);
  if (tensor) {
    Vector bil = bilinear(x, *tensor, t.h_gated);
    for (std::size_t j = 0; j < pre.size(); ++j) pre[j] += bil[j];
  }
  t.h_cand = tanh(pre);

  t.h_new = Vector(p.hidden_dim);
  for (std::size_t j = 0; j < p.hidden_dim; ++j)
    t.h_new[j] = (1.0 - t.z[j]) * prev.h[j] + t.z[j] * t.h_cand[j];

  StepResult out;
  out.state.h = t.h_new;
  out.trace = std::move(t);
  return out;
}

// Shared LSTM / LSTMRNTN forward.
StepResult lstm_forward(const CellParams& p, const Vector& x,
                        const StepState& prev, const Tensor3* tensor) {
  check_step_inputs(p, x, prev);
  StepTrace t;
  t.kind = p.kind;
  t.x = x;
  t.h_prev = prev.h;
  t.c_prev = prev.c;

  t.gate_i = sigmoid(
      gate_pre_peephole(x, p.w_xi, prev.h, p.w_hi, prev.c, p.w_ci, p.b_i));
  t.gate_f = sigmoid(
      gate_pre_peephole(x, p.w_xf, prev.h, p.w_hf, prev.c, p.w_cf, p.b_f));

  Vector pre = gate_pre(x, p.w_xc, prev.h, p.w_hc, p.b_c);
  if (tensor) {
    Vector bil = bilinear(x, *tensor, prev.h);
    for (std::size_t j = 0; j < pre.size(); ++j) pre[j] += bil[j];
  }
  t.c_cand = tanh(pre);

  t.c_new = Vector(p.hidden_dim);
  for (std::size_t j = 0; j < p.hidden_dim; ++j)
    t.c_new[j] = t.gate_f[j] * prev.c[j] + t.gate_i[j] * t.c_cand[j];

  // The output gate reads the freshly updated cell value.
  t.gate_o = sigmoid(
      gate_pre_peephole(x, p.w_xo, prev.h, p.w_ho, t.c_new, p.w_co, p.b_o));
  t.tanh_c = tanh(t.c_new);

  t.h_new = hadamard(t.gate_o, t.tanh_c);

  StepResult out;
  out.state.h = t.h_new;
  out.state.c = t.c_new;
  out.trace = std::move(t);
  return out;
}

// grads(r, c) += a[r] * b[c]
void accum_outer(Matrix& grads, const Vector& a, const Vector& b) {
  for (std::size_t r = 0; r < a.size(); ++r)
    for (std::size_t c = 0; c < b.size(); ++c) grads(r, c) += a[r] * b[c];
}

// out[r] += sum_c m(r, c) * v[c]
void accum_matvec(Vector& out, const Matrix& m, const Vector& v) {
  for (std::size_t r = 0; r < m.rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < m.cols; ++c) s += m(r, c) * v[c];
    out[r] += s;
  }
}

void accum_bilinear(const Vector& x, const Tensor3& t, const Vector& h,
                    const Vector& g, Tensor3& gt, Vector& gx, Vector& gh) {
  for (std::size_t k = 0; k < t.out_dim; ++k) {
    for (std::size_t a = 0; a < t.in_dim; ++a) {
      for (std::size_t b = 0; b < t.out_dim; ++b) {
        gt.at(k, a, b) += g[k] * x[a] * h[b];
        gx[a] += g[k] * t.at(k, a, b) * h[b];
        gh[b] += g[k] * x[a] * t.at(k, a, b);
      }
    }
  }
}

StepInputGrads simple_backward(const CellParams& p, const StepTrace& t,
                               const Vector& dh, CellGrads& g) {
  const std::size_t d = p.hidden_dim;
  Vector da(d);
  for (std::size_t j = 0; j < d; ++j)
    da[j] = dh[j] * tanh_deriv_from_output(t.h_new[j]);

  accum_outer(g.w_xh, t.x, da);
  accum_outer(g.w_hh, t.h_prev, da);
  add_into(g.b_h, da);

  StepInputGrads out;
  out.grad_x = Vector(p.input_dim);
  out.grad_prev.h = Vector(d);
  accum_matvec(out.grad_x, p.w_xh, da);
  accum_matvec(out.grad_prev.h, p.w_hh, da);
  return out;
}

StepInputGrads gru_backward(const CellParams& p, const StepTrace& t,
                            const Vector& dh, CellGrads& g) {
  const std::size_t d = p.hidden_dim;
  StepInputGrads out;
  out.grad_x = Vector(p.input_dim);
  out.grad_prev.h = Vector(d);
  Vector& dx = out.grad_x;
  Vector& dh_prev = out.grad_prev.h;

  // h = (1 - z) .* h_prev + z .* h_cand
  Vector dz(d), dcand(d);
  for (std::size_t j = 0; j < d; ++j) {
    dz[j] = dh[j] * (t.h_cand[j] - t.h_prev[j]);
    dcand[j] = dh[j] * t.z[j];
    dh_prev[j] += dh[j] * (1.0 - t.z[j]);
  }

  // Candidate pre-activation.
  Vector da(d);
  for (std::size_t j = 0; j < d; ++j)
    da[j] = dcand[j] * tanh_deriv_from_output(t.h_cand[j]);
  accum_outer(g.w_xh, t.x, da);
  accum_outer(g.w_hh, t.h_gated, da);
  add_into(g.b_h, da);
  accum_matvec(dx, p.w_xh, da);
  Vector dgated(d);
  accum_matvec(dgated, p.w_hh, da);
  if (has_tensor(p.kind))
    accum_bilinear(t.x, p.tensor, t.h_gated, da, g.tensor, dx, dgated);

  // h_gated = r .* h_prev
  Vector dr(d);
  for (std::size_t j = 0; j < d; ++j) {
    dr[j] = dgated[j] * t.h_prev[j];
    dh_prev[j] += dgated[j] * t.r[j];
  }

  // Gates.
  Vector da_r(d), da_z(d);
  for (std::size_t j = 0; j < d; ++j) {
    da_r[j] = dr[j] * sigmoid_deriv_from_output(t.r[j]);
    da_z[j] = dz[j] * sigmoid_deriv_from_output(t.z[j]);
  }
  accum_outer(g.w_xr, t.x, da_r);
  accum_outer(g.w_hr, t.h_prev, da_r);
  add_into(g.b_r, da_r);
  accum_matvec(dx, p.w_xr, da_r);
  accum_matvec(dh_prev, p.w_hr, da_r);

  accum_outer(g.w_xz, t.x, da_z);
  accum_outer(g.w_hz, t.h_prev, da_z);
  add_into(g.b_z, da_z);
  accum_matvec(dx, p.w_xz, da_z);
  accum_matvec(dh_prev, p.w_hz, da_z);
  return out;
}

StepInputGrads lstm_backward(const CellParams& p, const StepTrace& t,
                             const Vector& dh, const Vector& dc_in,
                             CellGrads& g) {
  const std::size_t d = p.hidden_dim;
  StepInputGrads out;
  out.grad_x = Vector(p.input_dim);
  out.grad_prev.h = Vector(d);
  out.grad_prev.c = Vector(d);
  Vector& dx = out.grad_x;
  Vector& dh_prev = out.grad_prev.h;
  Vector& dc_prev = out.grad_prev.c;

  // h = o .* tanh(c)
  Vector do_(d), da_o(d);
  for (std::size_t j = 0; j < d; ++j) {
    do_[j] = dh[j] * t.tanh_c[j];
    da_o[j] = do_[j] * sigmoid_deriv_from_output(t.gate_o[j]);
  }
  accum_outer(g.w_xo, t.x, da_o);
  accum_outer(g.w_ho, t.h_prev, da_o);
  accum_outer(g.w_co, t.c_new, da_o);
  add_into(g.b_o, da_o);
  accum_matvec(dx, p.w_xo, da_o);
  accum_matvec(dh_prev, p.w_ho, da_o);

  // dE/dc_t: carried-in term, the h path, and the output-gate peephole.
  Vector dc(d);
  for (std::size_t j = 0; j < d; ++j)
    dc[j] = dc_in[j] + dh[j] * t.gate_o[j] * tanh_deriv_from_output(t.tanh_c[j]);
  accum_matvec(dc, p.w_co, da_o);

  // c = f .* c_prev + i .* c_cand
  Vector di(d), df(d), dcand(d);
  for (std::size_t j = 0; j < d; ++j) {
    df[j] = dc[j] * t.c_prev[j];
    di[j] = dc[j] * t.c_cand[j];
    dcand[j] = dc[j] * t.gate_i[j];
    dc_prev[j] += dc[j] * t.gate_f[j];
  }

  // Candidate pre-activation.
  Vector da_c(d);
  for (std::size_t j = 0; j < d; ++j)
    da_c[j] = dcand[j] * tanh_deriv_from_output(t.c_cand[j]);
  accum_outer(g.w_xc, t.x, da_c);
  accum_outer(g.w_hc, t.h_prev, da_c);
  add_into(g.b_c, da_c);
  accum_matvec(dx, p.w_xc, da_c);
  accum_matvec(dh_prev, p.w_hc, da_c);
  if (has_tensor(p.kind))
    accum_bilinear(t.x, p.tensor, t.h_prev, da_c, g.tensor, dx, dh_prev);

  // Input and forget gates (with cell peepholes on c_prev).
  Vector da_i(d), da_f(d);
  for (std::size_t j = 0; j < d; ++j) {
    da_i[j] = di[j] * sigmoid_deriv_from_output(t.gate_i[j]);
    da_f[j] = df[j] * sigmoid_deriv_from_output(t.gate_f[j]);
  }
  accum_outer(g.w_xi, t.x, da_i);
  accum_outer(g.w_hi, t.h_prev, da_i);
  accum_outer(g.w_ci, t.c_prev, da_i);
  add_into(g.b_i, da_i);
  accum_matvec(dx, p.w_xi, da_i);
  accum_matvec(dh_prev, p.w_hi, da_i);
  accum_matvec(dc_prev, p.w_ci, da_i);

  accum_outer(g.w_xf, t.x, da_f);
  accum_outer(g.w_hf, t.h_prev, da_f);
  accum_outer(g.w_cf, t.c_prev, da_f);
  add_into(g.b_f, da_f);
  accum_matvec(dx, p.w_xf, da_f);
  accum_matvec(dh_prev, p.w_hf, da_f);
  accum_matvec(dc_prev, p.w_cf, da_f);
  return out;
}

}  // namespace

StepResult step_simple(const CellParams& p, const Vector& x,
                       const StepState& prev) {
  check_step_inputs(p, x, prev);
  StepTrace t;
  t.kind = p.kind;
  t.x = x;
  t.h_prev = prev.h;
  t.h_new = tanh(gate_pre(x, p.w_xh, prev.h, p.w_hh, p.b_h));

  StepResult out;
  out.state.h = t.h_new;
  out.trace = std::move(t);
  return out;
}

StepResult step_gru(const CellParams& p, const Vector& x,
                    const StepState& prev) {
  return gru_forward(p, x, prev, nullptr);
}

StepResult step_grurntn(const CellParams& p, const Vector& x,
                        const StepState& prev) {
  return gru_forward(p, x, prev, &p.tensor);
}

StepResult step_lstm(const CellParams& p, const Vector& x,
                     const StepState& prev) {
  return lstm_forward(p, x, prev, nullptr);
}

StepResult step_lstmrntn(const CellParams& p, const Vector& x,
                         const StepState& prev) {
  return lstm_forward(p, x, prev, &p.tensor);
}

StepResult step_forward(const CellParams& p, const Vector& x,
                        const StepState& prev) {
  switch (p.kind) {
    case CellKind::SimpleRNN: return step_simple(p, x, prev);
    case CellKind::GRU: return step_gru(p, x, prev);
    case CellKind::LSTM: return step_lstm(p, x, prev);
    case CellKind::GRURNTN: return step_grurntn(p, x, prev);
    case CellKind::LSTMRNTN: return step_lstmrntn(p, x, prev);
  }
  throw std::logic_error("step_forward: bad enum value");
}

StepInputGrads step_backward_accum(const CellParams& p, const StepTrace& trace,
                                   const StepState& grad_out,
                                   CellGrads& sink) {
  if (trace.kind != p.kind)
    throw std::invalid_argument(
        "step_backward: trace kind " + std::string(cell_kind_name(trace.kind)) +
        " does not match cell kind " + std::string(cell_kind_name(p.kind)));
  if (grad_out.h.size() != p.hidden_dim)
    throw ShapeError("step_backward: upstream vector[" +
                     std::to_string(grad_out.h.size()) +
                     "] does not match cell hidden dim " +
                     std::to_string(p.hidden_dim));

  switch (p.kind) {
    case CellKind::SimpleRNN:
      return simple_backward(p, trace, grad_out.h, sink);
    case CellKind::GRU:
    case CellKind::GRURNTN:
      return gru_backward(p, trace, grad_out.h, sink);
    case CellKind::LSTM:
    case CellKind::LSTMRNTN: {
      Vector dc = grad_out.c;
      if (dc.empty()) dc = Vector(p.hidden_dim);
      if (dc.size() != p.hidden_dim)
        throw ShapeError("step_backward: upstream cell vector[" +
                         std::to_string(dc.size()) +
                         "] does not match cell hidden dim " +
                         std::to_string(p.hidden_dim));
      return lstm_backward(p, trace, grad_out.h, dc, sink);
    }
  }
  throw std::logic_error("step_backward: bad enum value");
}

StepBackward step_backward(const CellParams& p, const StepTrace& trace,
                           const StepState& grad_out) {
  StepBackward out;
  out.grads = p.zeros_like();
  StepInputGrads in = step_backward_accum(p, trace, grad_out, out.grads);
  out.grad_x = std::move(in.grad_x);
  out.grad_prev = std::move(in.grad_prev);
  return out;
}

Vector output_forward(const OutputLayer& layer, const Vector& h) {
  Vector logits = vecmat(h, layer.w);
  for (std::size_t j = 0; j < logits.size(); ++j) logits[j] += layer.b[j];
  return softmax(logits);
}

OutputBackward output_backward(const OutputLayer& layer, const Vector& h,
                               std::size_t target) {
  if (target >= layer.b.size())
    throw std::out_of_range("output_backward: target " +
                            std::to_string(target) + " out of range for vocab " +
                            std::to_string(layer.b.size()));
  Vector probs = output_forward(layer, h);

  OutputBackward out;
  out.nll = -std::log(probs[target]);

  Vector dlogits = probs;
  dlogits[target] -= 1.0;
  out.grad_w = outer(h, dlogits);
  out.grad_b = dlogits;
  out.grad_h = matvec(layer.w, dlogits);
  return out;
}

}  // namespace rntn

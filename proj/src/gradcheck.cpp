#include "rntn/gradcheck.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "rntn/training.hpp"

namespace rntn {

namespace {

// ---------------------------------------------------------------------------
// Extended-precision forward pass, written as plain scalar loops straight
// from the cell equations. This is the oracle side: it shares no code with
// the double-precision implementation it certifies.
// ---------------------------------------------------------------------------

using ldvec = std::vector<long double>;

long double ld_sigmoid(long double x) { return 1.0L / (1.0L + std::exp(-x)); }

ldvec ld_affine(const Vector& x, const Matrix& wx, const ldvec& h,
                const Matrix& wh, const Vector& b) {
  ldvec out(b.size());
  for (std::size_t j = 0; j < b.size(); ++j) {
    long double s = 0.0L;
    for (std::size_t a = 0; a < wx.rows; ++a) s += (long double)x[a] * wx(a, j);
    for (std::size_t a = 0; a < wh.rows; ++a) s += h[a] * (long double)wh(a, j);
    out[j] = s + (long double)b[j];
  }
  return out;
}

void ld_add_vecmat(ldvec& acc, const ldvec& v, const Matrix& m) {
  for (std::size_t j = 0; j < m.cols; ++j) {
    long double s = 0.0L;
    for (std::size_t a = 0; a < m.rows; ++a) s += v[a] * (long double)m(a, j);
    acc[j] += s;
  }
}

void ld_add_bilinear(ldvec& acc, const Vector& x, const Tensor3& t,
                     const ldvec& h) {
  for (std::size_t k = 0; k < t.out_dim; ++k) {
    long double s = 0.0L;
    for (std::size_t a = 0; a < t.in_dim; ++a)
      for (std::size_t b = 0; b < t.out_dim; ++b)
        s += (long double)x[a] * (long double)t.at(k, a, b) * h[b];
    acc[k] += s;
  }
}

struct LdState {
  ldvec h;
  ldvec c;
};

LdState ld_step(const CellParams& p, const Vector& x, const LdState& prev) {
  const std::size_t d = p.hidden_dim;
  LdState next;
  next.h.assign(d, 0.0L);

  switch (p.kind) {
    case CellKind::SimpleRNN: {
      ldvec pre = ld_affine(x, p.w_xh, prev.h, p.w_hh, p.b_h);
      for (std::size_t j = 0; j < d; ++j) next.h[j] = std::tanh(pre[j]);
      break;
    }
    case CellKind::GRU:
    case CellKind::GRURNTN: {
      ldvec r_pre = ld_affine(x, p.w_xr, prev.h, p.w_hr, p.b_r);
      ldvec z_pre = ld_affine(x, p.w_xz, prev.h, p.w_hz, p.b_z);
      ldvec gated(d);
      ldvec z(d);
      for (std::size_t j = 0; j < d; ++j) {
        gated[j] = ld_sigmoid(r_pre[j]) * prev.h[j];
        z[j] = ld_sigmoid(z_pre[j]);
      }
      ldvec pre(d);
      for (std::size_t j = 0; j < d; ++j) pre[j] = (long double)p.b_h[j];
      for (std::size_t j = 0; j < d; ++j) {
        long double s = 0.0L;
        for (std::size_t a = 0; a < p.w_xh.rows; ++a)
          s += (long double)x[a] * (long double)p.w_xh(a, j);
        pre[j] += s;
      }
      ld_add_vecmat(pre, gated, p.w_hh);
      if (p.kind == CellKind::GRURNTN) ld_add_bilinear(pre, x, p.tensor, gated);
      for (std::size_t j = 0; j < d; ++j)
        next.h[j] = (1.0L - z[j]) * prev.h[j] + z[j] * std::tanh(pre[j]);
      break;
    }
    case CellKind::LSTM:
    case CellKind::LSTMRNTN: {
      ldvec i_pre = ld_affine(x, p.w_xi, prev.h, p.w_hi, p.b_i);
      ldvec f_pre = ld_affine(x, p.w_xf, prev.h, p.w_hf, p.b_f);
      ld_add_vecmat(i_pre, prev.c, p.w_ci);
      ld_add_vecmat(f_pre, prev.c, p.w_cf);

      ldvec c_pre = ld_affine(x, p.w_xc, prev.h, p.w_hc, p.b_c);
      if (p.kind == CellKind::LSTMRNTN)
        ld_add_bilinear(c_pre, x, p.tensor, prev.h);

      next.c.assign(d, 0.0L);
      for (std::size_t j = 0; j < d; ++j)
        next.c[j] = ld_sigmoid(f_pre[j]) * prev.c[j] +
                    ld_sigmoid(i_pre[j]) * std::tanh(c_pre[j]);

      ldvec o_pre = ld_affine(x, p.w_xo, prev.h, p.w_ho, p.b_o);
      ld_add_vecmat(o_pre, next.c, p.w_co);
      for (std::size_t j = 0; j < d; ++j)
        next.h[j] = ld_sigmoid(o_pre[j]) * std::tanh(next.c[j]);
      break;
    }
  }
  return next;
}

LdState ld_zero_state(const CellParams& p) {
  LdState s;
  s.h.assign(p.hidden_dim, 0.0L);
  if (is_lstm_family(p.kind)) s.c.assign(p.hidden_dim, 0.0L);
  return s;
}

}  // namespace

long double step_output_sum_extended(const CellParams& p, const Vector& x,
                                     const StepState& prev) {
  LdState state;
  state.h.assign(prev.h.data.begin(), prev.h.data.end());
  if (is_lstm_family(p.kind))
    state.c.assign(prev.c.data.begin(), prev.c.data.end());
  LdState next = ld_step(p, x, state);
  long double sum = 0.0L;
  for (long double v : next.h) sum += v;
  for (long double v : next.c) sum += v;
  return sum;
}

long double model_nll_extended(const Model& model,
                               const std::vector<int>& tokens) {
  LdState state = ld_zero_state(model.cell);
  long double nll = 0.0L;
  for (std::size_t t = 0; t + 1 < tokens.size(); ++t) {
    Vector x = embed_lookup(model.embedding,
                            static_cast<std::size_t>(tokens[t]));
    state = ld_step(model.cell, x, state);

    // Softmax NLL via log-sum-exp over the logits.
    const std::size_t vocab = model.output.b.size();
    ldvec logits(vocab);
    long double mx = -1e30L;
    for (std::size_t j = 0; j < vocab; ++j) {
      long double s = (long double)model.output.b[j];
      for (std::size_t a = 0; a < model.output.w.rows; ++a)
        s += state.h[a] * (long double)model.output.w(a, j);
      logits[j] = s;
      if (s > mx) mx = s;
    }
    long double sum = 0.0L;
    for (std::size_t j = 0; j < vocab; ++j) sum += std::exp(logits[j] - mx);
    const std::size_t target = static_cast<std::size_t>(tokens[t + 1]);
    nll += mx + std::log(sum) - logits[target];
  }
  return nll;
}

std::vector<double> finite_diff(const std::function<long double()>& loss,
                                std::vector<double>& theta, double eps) {
  if (eps <= 0.0)
    throw std::invalid_argument("finite_diff: eps must be positive");
  std::vector<double> grad(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double saved = theta[i];
    theta[i] = saved + eps;
    const double up_at = theta[i];
    const long double up = loss();
    theta[i] = saved - eps;
    const double down_at = theta[i];
    const long double down = loss();
    theta[i] = saved;
    if (!std::isfinite((double)up) || !std::isfinite((double)down))
      throw std::runtime_error("finite_diff: non-finite loss at coordinate " +
                               std::to_string(i));
    // Divide by the step actually realized in 64-bit storage.
    grad[i] = (double)((up - down) / (long double)(up_at - down_at));
  }
  return grad;
}

CheckReport compare(const std::string& name,
                    const std::vector<double>& analytic,
                    const std::vector<double>& numeric, double rel_tol,
                    double abs_floor) {
  if (analytic.size() != numeric.size())
    throw ShapeError("compare: vector[" + std::to_string(analytic.size()) +
                     "] vs vector[" + std::to_string(numeric.size()) + "]");
  CheckReport report;
  report.name = name;
  report.pass = true;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double a = analytic[i];
    const double n = numeric[i];
    const double abs_err = std::fabs(a - n);
    const double denom = std::max({std::fabs(a), std::fabs(n), abs_floor});
    const double rel_err = abs_err / denom;
    if (rel_err > report.max_rel_error) {
      report.max_rel_error = rel_err;
      report.max_abs_error = abs_err;
      report.worst_index = i;
    }
    const bool coord_ok =
        rel_err < rel_tol ||
        (std::fabs(a) < abs_floor && std::fabs(n) < abs_floor);
    if (!coord_ok) report.pass = false;
  }
  return report;
}

std::vector<CheckReport> check_model_gradients(Model& model,
                                               const std::vector<int>& tokens,
                                               std::size_t bptt_k, double eps,
                                               double rel_tol,
                                               double abs_floor) {
  if (bptt_k != 0)
    throw std::invalid_argument(
        "check_model_gradients: finite differences certify the full-window "
        "gradient; use bptt_k = 0");
  BpttResult analytic = bptt(model, tokens, bptt_k);

  auto loss = [&model, &tokens]() {
    return model_nll_extended(model, tokens);
  };

  std::vector<CheckReport> reports;
  auto arefs = param_refs(analytic.grads);
  auto prefs = param_refs(model);
  for (std::size_t p = 0; p < prefs.size(); ++p) {
    std::vector<double> numeric = finite_diff(loss, *prefs[p].values, eps);
    reports.push_back(
        compare(prefs[p].name, *arefs[p].values, numeric, rel_tol, abs_floor));
  }
  return reports;
}

std::vector<CheckReport> check_random_instance(CellKind kind,
                                               std::size_t embed_dim,
                                               std::size_t hidden_dim,
                                               std::size_t vocab,
                                               std::size_t seq_len,
                                               std::uint64_t seed) {
  Rng rng(seed);
  Model model(kind, embed_dim, hidden_dim, vocab);
  init_model(model, rng);

  std::vector<int> tokens(seq_len);
  for (auto& t : tokens) t = static_cast<int>(rng.below(vocab));

  auto reports = check_model_gradients(model, tokens);
  for (auto& r : reports)
    r.name = std::string(cell_kind_name(kind)) + "." + r.name;
  return reports;
}

bool all_pass(const std::vector<CheckReport>& reports) {
  for (const auto& r : reports)
    if (!r.pass) return false;
  return true;
}

std::string format_reports(const std::vector<CheckReport>& reports) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-22s %12s %12s %8s %6s\n", "parameter",
                "max rel err", "max abs err", "worst", "state");
  out += line;
  for (const auto& r : reports) {
    std::snprintf(line, sizeof(line), "%-22s %12.3e %12.3e %8zu %6s\n",
                  r.name.c_str(), r.max_rel_error, r.max_abs_error,
                  r.worst_index, r.pass ? "ok" : "FAIL");
    out += line;
  }
  return out;
}

}  // namespace rntn

#include "rntn/linalg.hpp"

#include <cmath>
#include <sstream>

namespace rntn {

namespace {

[[noreturn]] void throw_shape(const std::string& op, const std::string& lhs,
                              const std::string& rhs) {
  std::ostringstream msg;
  msg << op << ": shape mismatch between " << lhs << " and " << rhs;
  throw ShapeError(msg.str());
}

std::string vec_shape(const Vector& v) {
  return "vector[" + std::to_string(v.size()) + "]";
}

std::string mat_shape(const Matrix& m) {
  return "matrix[" + std::to_string(m.rows) + "x" + std::to_string(m.cols) +
         "]";
}

std::string tensor_shape(const Tensor3& t) {
  return "tensor[" + std::to_string(t.in_dim) + "x" +
         std::to_string(t.out_dim) + "x" + std::to_string(t.out_dim) + "]";
}

void check_same_size(const char* op, const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw_shape(op, vec_shape(a), vec_shape(b));
}

}  // namespace

Vector vecmat(const Vector& x, const Matrix& m) {
  if (x.size() != m.rows) throw_shape("vecmat", vec_shape(x), mat_shape(m));
  Vector out(m.cols);
  for (std::size_t j = 0; j < m.cols; ++j) {
    double s = 0.0;
    for (std::size_t a = 0; a < m.rows; ++a) s += x[a] * m(a, j);
    out[j] = s;
  }
  return out;
}

Vector matvec(const Matrix& m, const Vector& v) {
  if (v.size() != m.cols) throw_shape("matvec", mat_shape(m), vec_shape(v));
  Vector out(m.rows);
  for (std::size_t r = 0; r < m.rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < m.cols; ++c) s += m(r, c) * v[c];
    out[r] = s;
  }
  return out;
}

Matrix outer(const Vector& a, const Vector& b) {
  Matrix out(a.size(), b.size());
  for (std::size_t r = 0; r < a.size(); ++r)
    for (std::size_t c = 0; c < b.size(); ++c) out(r, c) = a[r] * b[c];
  return out;
}

Vector add(const Vector& a, const Vector& b) {
  check_same_size("add", a, b);
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

Vector sub(const Vector& a, const Vector& b) {
  check_same_size("sub", a, b);
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

Vector hadamard(const Vector& a, const Vector& b) {
  check_same_size("hadamard", a, b);
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

Vector scaled(const Vector& a, double s) {
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * s;
  return out;
}

void add_into(Vector& dst, const Vector& src) {
  check_same_size("add_into", dst, src);
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

Vector bilinear(const Vector& x, const Tensor3& t, const Vector& h) {
  if (x.size() != t.in_dim || h.size() != t.out_dim)
    throw_shape("bilinear", vec_shape(x) + "," + vec_shape(h),
                tensor_shape(t));
  Vector out(t.out_dim);
  for (std::size_t k = 0; k < t.out_dim; ++k) {
    double s = 0.0;
    for (std::size_t a = 0; a < t.in_dim; ++a)
      for (std::size_t b = 0; b < t.out_dim; ++b)
        s += x[a] * t.at(k, a, b) * h[b];
    out[k] = s;
  }
  return out;
}

BilinearGrads bilinear_grads(const Vector& x, const Tensor3& t,
                             const Vector& h, const Vector& g) {
  if (x.size() != t.in_dim || h.size() != t.out_dim)
    throw_shape("bilinear_grads", vec_shape(x) + "," + vec_shape(h),
                tensor_shape(t));
  if (g.size() != t.out_dim)
    throw_shape("bilinear_grads", vec_shape(g), tensor_shape(t));

  BilinearGrads out;
  out.gx = Vector(t.in_dim);
  out.gh = Vector(t.out_dim);
  out.gt = Tensor3(t.in_dim, t.out_dim);
  for (std::size_t k = 0; k < t.out_dim; ++k) {
    for (std::size_t a = 0; a < t.in_dim; ++a) {
      for (std::size_t b = 0; b < t.out_dim; ++b) {
        out.gt.at(k, a, b) = g[k] * x[a] * h[b];
        out.gx[a] += g[k] * t.at(k, a, b) * h[b];
        out.gh[b] += g[k] * x[a] * t.at(k, a, b);
      }
    }
  }
  return out;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Vector sigmoid(const Vector& x) {
  Vector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = sigmoid(x[i]);
  return out;
}

Vector tanh(const Vector& x) {
  Vector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::tanh(x[i]);
  return out;
}

double tanh_deriv_from_output(double f) { return 1.0 - f * f; }

double sigmoid_deriv_from_output(double f) { return f * (1.0 - f); }

Vector softmax(const Vector& x) {
  if (x.empty()) throw ShapeError("softmax: empty input vector[0]");
  double mx = x[0];
  for (std::size_t i = 1; i < x.size(); ++i) mx = std::max(mx, x[i]);
  Vector out(x.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i] - mx);
    sum += out[i];
  }
  for (std::size_t i = 0; i < x.size(); ++i) out[i] /= sum;
  return out;
}

}  // namespace rntn

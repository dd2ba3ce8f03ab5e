#pragma once

#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

// Minimal dense linear algebra for the recurrent tensor cells: 64-bit
// vectors, row-major matrices, 3-D tensor weights, the bilinear tensor
// product and its derivatives, and the elementwise activations.
//
// Every reduction here runs in a fixed, documented index order so that
// results are reproducible and independently re-derivable loop by loop.

namespace rntn {

// Thrown on any dimension mismatch; the message names both shapes.
struct ShapeError : std::invalid_argument {
  explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

// Thrown when a loss or gradient stops being finite; the CLI maps this to
// exit code 2.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

struct Vector {
  std::vector<double> data;

  Vector() = default;
  explicit Vector(std::size_t n) : data(n, 0.0) {}
  Vector(std::initializer_list<double> init) : data(init) {}

  std::size_t size() const noexcept { return data.size(); }
  bool empty() const noexcept { return data.empty(); }
  double& operator[](std::size_t i) noexcept { return data[i]; }
  double operator[](std::size_t i) const noexcept { return data[i]; }

  void fill(double v) { data.assign(data.size(), v); }
};

// Row-major dense matrix. Weight convention follows row-vector algebra:
// a matrix mapping an n-vector to an m-vector has shape n x m and is
// applied as x * W (see vecmat).
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) noexcept {
    return data[r * cols + c];
  }
  double operator()(std::size_t r, std::size_t c) const noexcept {
    return data[r * cols + c];
  }

  void fill(double v) { data.assign(data.size(), v); }
};

// 3-D tensor weight: out_dim slices, each an in_dim x out_dim matrix,
// stored contiguously slice-major (slice, row, col).
struct Tensor3 {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::vector<double> data;

  Tensor3() = default;
  Tensor3(std::size_t i, std::size_t d)
      : in_dim(i), out_dim(d), data(d * i * d, 0.0) {}

  bool empty() const noexcept { return data.empty(); }
  std::size_t slice_count() const noexcept { return out_dim; }

  double& at(std::size_t k, std::size_t a, std::size_t b) noexcept {
    return data[(k * in_dim + a) * out_dim + b];
  }
  double at(std::size_t k, std::size_t a, std::size_t b) const noexcept {
    return data[(k * in_dim + a) * out_dim + b];
  }
};

// ---------------------------------------------------------------------------
// Elementwise / dense kernels.  Accumulation orders (ascending indices, inner
// dimension innermost) are part of the contract: callers may rely on
// bit-reproducible results for identical inputs.
// ---------------------------------------------------------------------------

// out[j] = sum_a x[a] * m(a, j); requires x.size() == m.rows.
Vector vecmat(const Vector& x, const Matrix& m);

// out[r] = sum_c m(r, c) * v[c]; requires v.size() == m.cols.
Vector matvec(const Matrix& m, const Vector& v);

// out(r, c) = a[r] * b[c].
Matrix outer(const Vector& a, const Vector& b);

Vector add(const Vector& a, const Vector& b);
Vector sub(const Vector& a, const Vector& b);
Vector hadamard(const Vector& a, const Vector& b);
Vector scaled(const Vector& a, double s);
void add_into(Vector& dst, const Vector& src);

// Bilinear tensor product: out[k] = x^T * slice_k * h, accumulated as
//   for a ascending, for b ascending: out[k] += x[a] * T(k,a,b) * h[b]
// Requires x.size() == T.in_dim and h.size() == T.out_dim.
Vector bilinear(const Vector& x, const Tensor3& t, const Vector& h);

// Gradients of g . bilinear(x, T, h) w.r.t. all three arguments:
//   gT(k,a,b) = g[k] * x[a] * h[b]
//   gx[a]     = sum_k sum_b g[k] * T(k,a,b) * h[b]   (k outer, b inner)
//   gh[b]     = sum_k sum_a g[k] * x[a] * T(k,a,b)   (k outer, a inner)
struct BilinearGrads {
  Vector gx;
  Tensor3 gt;
  Vector gh;
};
BilinearGrads bilinear_grads(const Vector& x, const Tensor3& t,
                             const Vector& h, const Vector& g);

// ---------------------------------------------------------------------------
// Activations.
// ---------------------------------------------------------------------------

double sigmoid(double x);
Vector sigmoid(const Vector& x);
Vector tanh(const Vector& x);

// Derivatives expressed from the activation output rather than the
// pre-activation: tanh' = 1 - f^2, sigmoid' = f * (1 - f).
double tanh_deriv_from_output(double f);
double sigmoid_deriv_from_output(double f);

// Overflow-safe softmax (max subtraction); output sums to 1.
Vector softmax(const Vector& x);

}  // namespace rntn

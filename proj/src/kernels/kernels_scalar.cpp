#include "irregts/kernels.hpp"

namespace irregts::kernels {
namespace {

void affine_scalar(double* y, const double* W, const double* x, const double* b, size_t m,
                   size_t n) {
  for (size_t i = 0; i < m; ++i) {
    const double* row = W + i * n;
    double acc = 0.0;
    for (size_t j = 0; j < n; ++j) acc += row[j] * x[j];
    y[i] = b ? acc + b[i] : acc;
  }
}

void matvec_t_acc_scalar(double* dx, const double* W, const double* dy, size_t m, size_t n) {
  for (size_t i = 0; i < m; ++i) {
    const double* row = W + i * n;
    const double g = dy[i];
    for (size_t j = 0; j < n; ++j) dx[j] += g * row[j];
  }
}

void ger_acc_scalar(double* dW, const double* dy, const double* x, size_t m, size_t n) {
  for (size_t i = 0; i < m; ++i) {
    double* row = dW + i * n;
    const double g = dy[i];
    for (size_t j = 0; j < n; ++j) row[j] += g * x[j];
  }
}

void axpy_scalar(double* y, double a, const double* x, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void mul_scalar(double* out, const double* a, const double* b, size_t n) {
  for (size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void mul_acc_scalar(double* out, const double* a, const double* b, size_t n) {
  for (size_t i = 0; i < n; ++i) out[i] += a[i] * b[i];
}

double dot_scalar(const double* a, const double* b, size_t n) {
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double sum_scalar(const double* x, size_t n) {
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops ops = {affine_scalar, matvec_t_acc_scalar, ger_acc_scalar, axpy_scalar,
                          mul_scalar,    mul_acc_scalar,      dot_scalar,     sum_scalar,
                          "scalar"};
  return ops;
}

}  // namespace irregts::kernels

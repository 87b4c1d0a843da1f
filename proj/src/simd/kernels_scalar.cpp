#include <cmath>

#include "tailrep/simd/kernels.hpp"

namespace tailrep::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double max_abs_scalar(const double* x, std::size_t n) {
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = std::fabs(x[i]);
    if (a > m) m = a;
  }
  return m;
}

void gemv_scalar(const double* w, const double* bias, const double* x, double* y, std::size_t rows,
                 std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot_scalar(w + r * cols, x, cols) + bias[r];
}

void sgd_update_scalar(double* w, const double* g, std::size_t n, double lr, double wd) {
  for (std::size_t i = 0; i < n; ++i) w[i] -= lr * (g[i] + wd * w[i]);
}

void adamw_update_scalar(double* w, const double* g, double* m, double* v, std::size_t n,
                         const AdamWParams& p) {
  const double c1 = 1.0 - p.beta1;
  const double c2 = 1.0 - p.beta2;
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = p.beta1 * m[i] + c1 * g[i];
    v[i] = p.beta2 * v[i] + c2 * (g[i] * g[i]);
    const double mhat = m[i] / p.bias_correction1;
    const double vhat = v[i] / p.bias_correction2;
    w[i] -= p.learning_rate * (mhat / (std::sqrt(vhat) + p.epsilon) + p.weight_decay * w[i]);
  }
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{Isa::kScalar,  "scalar",          dot_scalar,
                                 axpy_scalar,   max_abs_scalar,    gemv_scalar,
                                 sgd_update_scalar, adamw_update_scalar};
  return table;
}

}  // namespace tailrep::simd

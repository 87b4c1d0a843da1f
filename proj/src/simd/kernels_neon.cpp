#include <arm_neon.h>

#include <cmath>

#include "kernels_internal.hpp"

namespace tailrep::simd::detail {
namespace {

double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  double s = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vmulq_f64(va, vld1q_f64(x + i))));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

double max_abs_neon(const double* x, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vmaxq_f64(acc, vabsq_f64(vld1q_f64(x + i)));
  double m = vmaxvq_f64(acc);
  for (; i < n; ++i) {
    const double a = std::fabs(x[i]);
    if (a > m) m = a;
  }
  return m;
}

void gemv_neon(const double* w, const double* bias, const double* x, double* y, std::size_t rows,
               std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot_neon(w + r * cols, x, cols) + bias[r];
}

void sgd_update_neon(double* w, const double* g, std::size_t n, double lr, double wd) {
  const float64x2_t vlr = vdupq_n_f64(lr);
  const float64x2_t vwd = vdupq_n_f64(wd);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t wi = vld1q_f64(w + i);
    const float64x2_t step = vmulq_f64(vlr, vaddq_f64(vld1q_f64(g + i), vmulq_f64(vwd, wi)));
    vst1q_f64(w + i, vsubq_f64(wi, step));
  }
  for (; i < n; ++i) w[i] -= lr * (g[i] + wd * w[i]);
}

void adamw_update_neon(double* w, const double* g, double* m, double* v, std::size_t n,
                       const AdamWParams& p) {
  const double c1 = 1.0 - p.beta1;
  const double c2 = 1.0 - p.beta2;
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t gi = vld1q_f64(g + i);
    const float64x2_t mi =
        vaddq_f64(vmulq_f64(vdupq_n_f64(p.beta1), vld1q_f64(m + i)), vmulq_f64(vdupq_n_f64(c1), gi));
    const float64x2_t vi = vaddq_f64(vmulq_f64(vdupq_n_f64(p.beta2), vld1q_f64(v + i)),
                                     vmulq_f64(vdupq_n_f64(c2), vmulq_f64(gi, gi)));
    vst1q_f64(m + i, mi);
    vst1q_f64(v + i, vi);
    const float64x2_t mhat = vdivq_f64(mi, vdupq_n_f64(p.bias_correction1));
    const float64x2_t vhat = vdivq_f64(vi, vdupq_n_f64(p.bias_correction2));
    const float64x2_t wi = vld1q_f64(w + i);
    const float64x2_t ratio = vdivq_f64(mhat, vaddq_f64(vsqrtq_f64(vhat), vdupq_n_f64(p.epsilon)));
    const float64x2_t step =
        vmulq_f64(vdupq_n_f64(p.learning_rate), vaddq_f64(ratio, vmulq_f64(vdupq_n_f64(p.weight_decay), wi)));
    vst1q_f64(w + i, vsubq_f64(wi, step));
  }
  for (; i < n; ++i) {
    m[i] = p.beta1 * m[i] + c1 * g[i];
    v[i] = p.beta2 * v[i] + c2 * (g[i] * g[i]);
    const double mhat = m[i] / p.bias_correction1;
    const double vhat = v[i] / p.bias_correction2;
    w[i] -= p.learning_rate * (mhat / (std::sqrt(vhat) + p.epsilon) + p.weight_decay * w[i]);
  }
}

}  // namespace

const KernelTable& neon_table() {
  static const KernelTable table{Isa::kNeon,     "neon",          dot_neon,
                                 axpy_neon,      max_abs_neon,    gemv_neon,
                                 sgd_update_neon, adamw_update_neon};
  return table;
}

}  // namespace tailrep::simd::detail

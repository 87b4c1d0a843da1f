#include <immintrin.h>

#include <cmath>

#include "kernels_internal.hpp"

namespace tailrep::simd::detail {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

double max_abs_avx2(const double* x, std::size_t n) {
  const __m256d sign = _mm256_set1_pd(-0.0);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_max_pd(acc, _mm256_andnot_pd(sign, _mm256_loadu_pd(x + i)));
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double m = 0.0;
  for (double l : lanes) m = l > m ? l : m;
  for (; i < n; ++i) {
    const double a = std::fabs(x[i]);
    if (a > m) m = a;
  }
  return m;
}

void gemv_avx2(const double* w, const double* bias, const double* x, double* y, std::size_t rows,
               std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot_avx2(w + r * cols, x, cols) + bias[r];
}

void sgd_update_avx2(double* w, const double* g, std::size_t n, double lr, double wd) {
  const __m256d vlr = _mm256_set1_pd(lr);
  const __m256d vwd = _mm256_set1_pd(wd);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d wi = _mm256_loadu_pd(w + i);
    const __m256d step = _mm256_mul_pd(vlr, _mm256_add_pd(_mm256_loadu_pd(g + i), _mm256_mul_pd(vwd, wi)));
    _mm256_storeu_pd(w + i, _mm256_sub_pd(wi, step));
  }
  for (; i < n; ++i) w[i] -= lr * (g[i] + wd * w[i]);
}

void adamw_update_avx2(double* w, const double* g, double* m, double* v, std::size_t n,
                       const AdamWParams& p) {
  const double c1 = 1.0 - p.beta1;
  const double c2 = 1.0 - p.beta2;
  const __m256d vb1 = _mm256_set1_pd(p.beta1);
  const __m256d vb2 = _mm256_set1_pd(p.beta2);
  const __m256d vc1 = _mm256_set1_pd(c1);
  const __m256d vc2 = _mm256_set1_pd(c2);
  const __m256d vbc1 = _mm256_set1_pd(p.bias_correction1);
  const __m256d vbc2 = _mm256_set1_pd(p.bias_correction2);
  const __m256d veps = _mm256_set1_pd(p.epsilon);
  const __m256d vlr = _mm256_set1_pd(p.learning_rate);
  const __m256d vwd = _mm256_set1_pd(p.weight_decay);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d gi = _mm256_loadu_pd(g + i);
    const __m256d mi = _mm256_add_pd(_mm256_mul_pd(vb1, _mm256_loadu_pd(m + i)), _mm256_mul_pd(vc1, gi));
    const __m256d vi = _mm256_add_pd(_mm256_mul_pd(vb2, _mm256_loadu_pd(v + i)),
                                     _mm256_mul_pd(vc2, _mm256_mul_pd(gi, gi)));
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    const __m256d mhat = _mm256_div_pd(mi, vbc1);
    const __m256d vhat = _mm256_div_pd(vi, vbc2);
    const __m256d wi = _mm256_loadu_pd(w + i);
    const __m256d ratio = _mm256_div_pd(mhat, _mm256_add_pd(_mm256_sqrt_pd(vhat), veps));
    const __m256d step = _mm256_mul_pd(vlr, _mm256_add_pd(ratio, _mm256_mul_pd(vwd, wi)));
    _mm256_storeu_pd(w + i, _mm256_sub_pd(wi, step));
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

const KernelTable& avx2_table() {
  static const KernelTable table{Isa::kAvx2,     "avx2",          dot_avx2,
                                 axpy_avx2,      max_abs_avx2,    gemv_avx2,
                                 sgd_update_avx2, adamw_update_avx2};
  return table;
}

}  // namespace tailrep::simd::detail

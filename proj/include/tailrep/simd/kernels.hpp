#pragma once

// Dense inner-loop kernels behind a runtime-selected function table.
//
// Every kernel has a scalar reference implementation. AVX2 (x86-64) and NEON
// (aarch64) variants are compiled when the target allows it and chosen at
// first use if the running CPU supports them. TAILREP_ISA=scalar|avx2|neon in
// the environment overrides the choice.
//
// Elementwise kernels (axpy, max_abs, optimizer updates) perform exactly the
// same IEEE operations in every variant and are bitwise identical across
// ISAs. Reductions (dot, gemv) use lane-parallel accumulators and fused
// multiply-add, so they agree with the scalar reference only to rounding.

#include <cstddef>
#include <span>
#include <string_view>

namespace tailrep::simd {

enum class Isa { kScalar, kAvx2, kNeon };

struct AdamWParams {
  double learning_rate;
  double weight_decay;
  double beta1;
  double beta2;
  double epsilon;
  double bias_correction1;  // 1 - beta1^t
  double bias_correction2;  // 1 - beta2^t
};

struct KernelTable {
  Isa isa;
  std::string_view name;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // max_i |x[i]|, 0 for n == 0
  double (*max_abs)(const double* x, std::size_t n);
  // y[r] = dot(w[r, :], x) + bias[r] for a rows x cols row-major w
  void (*gemv)(const double* w, const double* bias, const double* x, double* y, std::size_t rows,
               std::size_t cols);
  // w -= lr * (g + wd * w)
  void (*sgd_update)(double* w, const double* g, std::size_t n, double lr, double wd);
  // decoupled-weight-decay Adam update of w with moment buffers m, v
  void (*adamw_update)(double* w, const double* g, double* m, double* v, std::size_t n,
                       const AdamWParams& p);
};

const KernelTable& scalar_kernels();

bool isa_supported(Isa isa);
/// Throws DomainError when the ISA is not compiled in or not supported by the CPU.
const KernelTable& kernels_for(Isa isa);

const KernelTable& active();
void set_active(Isa isa);
std::string_view isa_name(Isa isa);

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}
inline double max_abs(std::span<const double> x) { return active().max_abs(x.data(), x.size()); }

}  // namespace tailrep::simd

#include "tailrep/heavy_tails.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "tailrep/error.hpp"

namespace tailrep {
namespace {

constexpr double kMaxLog = 700.0;

void check_delta(double delta) {
  if (!(delta > 0.0 && delta <= 1.0)) {
    throw DomainError("logistic dependence must lie in (0, 1], got " + std::to_string(delta));
  }
}

}  // namespace

void LogisticParams::validate() const {
  if (dimension < 1) throw DomainError("logistic dimension must be >= 1");
  check_delta(dependence);
}

double sample_log_positive_stable(double delta, RngStream& rng) {
  check_delta(delta);
  if (delta == 1.0) return 0.0;
  // S = sin(a U) / sin(U)^(1/a) * (sin((1-a) U) / W)^((1-a)/a),
  // U ~ Uniform(0, pi), W ~ Exp(1).
  const double u = std::numbers::pi * rng.uniform();
  const double w = rng.exponential();
  const double a = delta;
  return std::log(std::sin(a * u)) - std::log(std::sin(u)) / a +
         (1.0 - a) / a * (std::log(std::sin((1.0 - a) * u)) - std::log(w));
}

double sample_positive_stable(double delta, RngStream& rng) {
  return std::exp(std::min(sample_log_positive_stable(delta, rng), kMaxLog));
}

Matrix sample_logistic(const LogisticParams& params, std::size_t n, RngStream& rng) {
  params.validate();
  if (n < 1) throw DomainError("sample count must be >= 1");
  const double delta = params.dependence;
  Matrix out(n, params.dimension);
  for (std::size_t i = 0; i < n; ++i) {
    const double log_s = sample_log_positive_stable(delta, rng);
    for (std::size_t j = 0; j < params.dimension; ++j) {
      const double log_x = delta * (log_s - std::log(rng.exponential()));
      out(i, j) = std::exp(std::clamp(log_x, -kMaxLog, kMaxLog));
    }
  }
  return out;
}

double logistic_cdf(std::span<const double> x, double delta) {
  check_delta(delta);
  if (x.empty()) throw DomainError("logistic_cdf needs at least one coordinate");
  // log sum_j x_j^(-1/delta), evaluated with a log-sum-exp
  double peak = -INFINITY;
  for (double v : x) {
    if (!(v > 0.0)) throw DomainError("logistic_cdf is defined for positive coordinates only");
    peak = std::max(peak, -std::log(v) / delta);
  }
  double acc = 0.0;
  for (double v : x) acc += std::exp(-std::log(v) / delta - peak);
  const double log_sum = peak + std::log(acc);
  return std::exp(-std::exp(delta * log_sum));
}

}  // namespace tailrep

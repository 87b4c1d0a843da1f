#pragma once

#include <cstddef>
#include <span>

#include "tailrep/matrix.hpp"
#include "tailrep/rng.hpp"

namespace tailrep {

/// Symmetric multivariate logistic (max-stable) model with unit Frechet
/// margins: P(X <= x) = exp(-(sum_j x_j^(-1/delta))^delta).
/// delta = 1 is independence, delta -> 0 complete dependence.
struct LogisticParams {
  std::size_t dimension = 2;
  double dependence = 0.9;

  void validate() const;
};

/// Positive stable variable with Laplace transform E[exp(-u S)] = exp(-u^delta),
/// via Kanter's representation. delta = 1 returns exactly 1.
double sample_positive_stable(double delta, RngStream& rng);

/// log S for the same draw; stays finite where S itself would overflow.
double sample_log_positive_stable(double delta, RngStream& rng);

/// n draws, one per row: X_j = (S / E_j)^delta with a single positive-stable
/// S per row and i.i.d. unit exponentials E_j.
Matrix sample_logistic(const LogisticParams& params, std::size_t n, RngStream& rng);

double logistic_cdf(std::span<const double> x, double delta);

}  // namespace tailrep

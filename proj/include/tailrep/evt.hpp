#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "tailrep/dataset.hpp"
#include "tailrep/matrix.hpp"
#include "tailrep/nn.hpp"

namespace tailrep {

// The norm is the infinity norm everywhere in the library.

double sup_norm(std::span<const double> x);
std::vector<double> row_norms(const Matrix& points);

/// x / ||x||_inf. Throws DomainError for the zero vector.
std::vector<double> angular_projection(std::span<const double> x);
Matrix angular_projection(const Matrix& points);

/// Coordinatewise empirical-CDF standardization to approximately unit
/// Pareto margins: T_j(v) = 1 / (1 - F_j(v)), F_j(v) = #{X_ij <= v} / (n + 1).
class RankTransformer {
 public:
  static RankTransformer fit(const Matrix& data);

  std::size_t dimension() const noexcept { return sorted_.size(); }
  std::size_t sample_count() const noexcept { return n_; }

  /// Values lie in [1, n + 1] and are nondecreasing in each coordinate.
  std::vector<double> apply(std::span<const double> x) const;
  Matrix apply(const Matrix& points) const;

 private:
  std::vector<std::vector<double>> sorted_;
  std::size_t n_ = 0;
};

struct TailThreshold {
  double t = 0.0;
  std::size_t k = 0;
  double kappa = 0.0;
};

/// t = k-th largest norm with k = floor(kappa * n).
TailThreshold tail_threshold(std::span<const double> norms, double kappa);

/// Ascending indices with norm >= t. A norm equal to t counts as extreme, so
/// ties at the k-th order statistic are all included.
std::vector<std::size_t> select_extremes(std::span<const double> norms, double t);

/// Indices with norm >= lambda * t, lambda >= 1.
std::vector<std::size_t> nested_tail_subset(std::span<const double> norms, double t, double lambda);

/// Label predictor on a single row; returns -1 or +1.
using LabelFn = std::function<int(std::span<const double>)>;

/// Mean 0/1 loss of predict on the rows of data.
double empirical_risk(const LabelFn& predict, const LabeledDataset& data);

/// Mean of 1{Y != predict(Theta(X))} over the given extreme rows.
double empirical_tail_risk(const LabelFn& predict, const LabeledDataset& extremes);

struct TailErmConfig {
  std::vector<std::size_t> hidden = {8};
  nn::OptimConfig optim{nn::OptimizerKind::kAdamW, 5e-3, 0.0, 32, 300};
};

/// Classifier that only sees the pseudo-angle of its input, hence
/// g(lambda x) == g(x) for every lambda > 0.
class AngularClassifier {
 public:
  explicit AngularClassifier(nn::Mlp net) : net_(std::move(net)) {}

  double probability(std::span<const double> x) const;
  int predict(std::span<const double> x) const { return probability(x) > 0.5 ? 1 : -1; }
  LabelFn as_label_fn() const;
  const nn::Mlp& network() const noexcept { return net_; }

 private:
  nn::Mlp net_;
};

/// Fits an angular classifier by minimizing cross-entropy on Theta(X) of the
/// given extreme rows. A single-class input yields a constant classifier.
AngularClassifier fit_tail_erm(const LabeledDataset& extremes, const TailErmConfig& config, std::uint64_t seed);

}  // namespace tailrep

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tailrep/dataset.hpp"
#include "tailrep/evt.hpp"
#include "tailrep/matrix.hpp"

namespace tailrep::diag {

/// Sample Pearson coefficient. Throws DomainError for n < 3, unequal
/// lengths or a zero-variance input.
double pearson_corr(std::span<const double> a, std::span<const double> b);

/// Ranks 1..n with ties sharing their average rank.
std::vector<double> average_ranks(std::span<const double> v);

enum class CorrMethod { kPearson, kSpearman };

/// Two-sided permutation p-value (count + 1) / (permutations + 1), count
/// being the permutations of b whose |statistic| reaches the observed one.
double corr_pvalue(std::span<const double> a, std::span<const double> b, CorrMethod method,
                   std::size_t permutations, std::uint64_t seed);

struct RvReport {
  std::size_t extremes = 0;
  std::vector<std::optional<double>> pvalues;  // per coordinate; empty on error
  std::vector<std::string> errors;             // per coordinate; empty when ok
  std::array<std::size_t, 10> histogram{};     // p-values binned on [0, 1]
  double median_pvalue = 0.0;                  // over the coordinates that have one
};

/// Angle/radius independence audit on the floor(kappa n) largest rows:
/// corr_pvalue(Theta_j, ||x||) for every coordinate j.
RvReport rv_report(const Matrix& points, double kappa, CorrMethod method = CorrMethod::kPearson,
                   std::size_t permutations = 1000, std::uint64_t seed = 0);

std::array<std::size_t, 10> pvalue_histogram(std::span<const double> p);
double median(std::vector<double> v);

/// P(K > x) for the Kolmogorov distribution (first 100 series terms).
double kolmogorov_survival(double x);

struct KsResult {
  double d = 0.0;
  double p = 1.0;
};
KsResult ks_statistic(std::span<const double> sample, const std::function<double(double)>& cdf);

/// Label of classifier(lambda z) for each lambda (non-empty, ascending, >= 1).
std::vector<int> scale_barcode(const LabelFn& classifier, std::span<const double> z, std::span<const double> lambdas);
bool is_constant(std::span<const int> barcode);
/// Fraction of rows whose barcode is constant.
double barcode_constancy(const LabelFn& classifier, const Matrix& points, std::span<const double> lambdas);

struct CurvePoint {
  double lambda = 1.0;
  double loss = 0.0;
  std::size_t count = 0;
};

/// 0/1 loss of predictor on {i : norms[i] >= lambda t} for each lambda;
/// stops at the first empty subset.
std::vector<CurvePoint> tail_loss_curve(const LabelFn& predictor, const LabeledDataset& test,
                                        std::span<const double> norms, double t, std::span<const double> lambdas);

/// Distinct n-grams over total tokens, n in {1, 2}. n-grams do not cross
/// sequence boundaries.
double distinct_n(std::span<const std::vector<int>> sequences, int n);

double f1_score(std::span<const int> predictions, std::span<const int> labels, int positive = 1);

struct CorrelationMatrix {
  std::vector<std::string> names;
  Matrix r;                   // NaN where a column has zero variance
  Matrix p;                   // permutation p-values
  std::vector<bool> flagged;  // zero-variance columns
};
CorrelationMatrix correlation_matrix(std::span<const std::string> names, std::span<const std::vector<double>> columns,
                                     std::size_t permutations = 1000, std::uint64_t seed = 0);

}  // namespace tailrep::diag

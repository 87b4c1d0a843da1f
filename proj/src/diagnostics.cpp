#include "tailrep/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <utility>

#include "tailrep/error.hpp"

namespace tailrep::diag {
namespace {

void check_pair(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DomainError("correlation inputs differ in length");
  if (a.size() < 3) throw DomainError("correlation needs at least 3 observations");
}

// Centered copy scaled to unit sum of squares, so that the Pearson
// coefficient of two such vectors is their dot product.
std::vector<double> standardize(std::span<const double> v) {
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  std::vector<double> out(v.size());
  double ss = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = v[i] - mean;
    ss += out[i] * out[i];
  }
  if (!(ss > 0.0)) throw DomainError("zero variance");
  const double s = std::sqrt(ss);
  for (double& x : out) x /= s;
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace

double pearson_corr(std::span<const double> a, std::span<const double> b) {
  check_pair(a, b);
  return std::clamp(dot(standardize(a), standardize(b)), -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t q = i; q <= j; ++q) ranks[order[q]] = r;
    i = j + 1;
  }
  return ranks;
}

double corr_pvalue(std::span<const double> a, std::span<const double> b, CorrMethod method,
                   std::size_t permutations, std::uint64_t seed) {
  check_pair(a, b);
  if (permutations == 0) throw DomainError("permutation count must be positive");
  std::vector<double> sa, sb;
  if (method == CorrMethod::kSpearman) {
    sa = standardize(average_ranks(a));
    sb = standardize(average_ranks(b));
  } else {
    sa = standardize(a);
    sb = standardize(b);
  }
  const double observed = std::abs(dot(sa, sb));
  // Guards against a permutation that reproduces the data ranking up to
  // summation-order rounding being counted as less extreme.
  const double tol = 1e-12 * std::max(1.0, observed);
  RngStream rng(seed);
  std::size_t count = 0;
  for (std::size_t p = 0; p < permutations; ++p) {
    for (std::size_t i = sb.size() - 1; i > 0; --i) std::swap(sb[i], sb[rng.below(i + 1)]);
    if (std::abs(dot(sa, sb)) >= observed - tol) ++count;
  }
  return static_cast<double>(count + 1) / static_cast<double>(permutations + 1);
}

std::array<std::size_t, 10> pvalue_histogram(std::span<const double> p) {
  std::array<std::size_t, 10> h{};
  for (double v : p) {
    const auto bin = static_cast<std::size_t>(std::clamp(v, 0.0, 1.0) * 10.0);
    ++h[std::min<std::size_t>(bin, 9)];
  }
  return h;
}

double median(std::vector<double> v) {
  if (v.empty()) throw DomainError("median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

RvReport rv_report(const Matrix& points, double kappa, CorrMethod method, std::size_t permutations,
                   std::uint64_t seed) {
  const auto norms = row_norms(points);
  const TailThreshold th = tail_threshold(norms, kappa);
  if (th.k < 10) throw DomainError("regular-variation audit needs at least 10 extremes");
  // Exactly the k largest rows; ties at the threshold are broken by index.
  std::vector<std::size_t> order(norms.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return norms[i] > norms[j]; });
  order.resize(th.k);
  std::sort(order.begin(), order.end());

  RvReport out;
  out.extremes = th.k;
  std::vector<double> radius(th.k);
  Matrix angles(th.k, points.cols());
  for (std::size_t r = 0; r < th.k; ++r) {
    radius[r] = norms[order[r]];
    const auto a = angular_projection(points.row(order[r]));
    std::copy(a.begin(), a.end(), angles.row(r).begin());
  }
  std::vector<double> ok;
  RngStream seeds(seed);
  for (std::size_t j = 0; j < points.cols(); ++j) {
    const std::uint64_t s = seeds.next_u64();
    try {
      const double p = corr_pvalue(angles.column(j), radius, method, permutations, s);
      out.pvalues.emplace_back(p);
      out.errors.emplace_back();
      ok.push_back(p);
    } catch (const DomainError& e) {
      out.pvalues.emplace_back(std::nullopt);
      out.errors.emplace_back(e.what());
    }
  }
  out.histogram = pvalue_histogram(ok);
  out.median_pvalue = ok.empty() ? std::numeric_limits<double>::quiet_NaN() : median(ok);
  return out;
}

double kolmogorov_survival(double x) {
  if (x <= 0.0) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    sum += (k % 2 == 1 ? 2.0 : -2.0) * term;
  }
  return std::clamp(sum, 0.0, 1.0);
}

KsResult ks_statistic(std::span<const double> sample, const std::function<double(double)>& cdf) {
  if (sample.empty()) throw DomainError("KS statistic of an empty sample");
  std::vector<double> s(sample.begin(), sample.end());
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double d = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double f = cdf(s[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  d = std::clamp(d, 0.0, 1.0);
  return {d, kolmogorov_survival(std::sqrt(n) * d)};
}

std::vector<int> scale_barcode(const LabelFn& classifier, std::span<const double> z, std::span<const double> lambdas) {
  std::vector<int> out;
  out.reserve(lambdas.size());
  std::vector<double> v(z.size());
  for (double l : lambdas) {
    for (std::size_t j = 0; j < z.size(); ++j) v[j] = l * z[j];
    out.push_back(classifier(v));
  }
  return out;
}

bool is_constant(std::span<const int> barcode) {
  return std::adjacent_find(barcode.begin(), barcode.end(), std::not_equal_to<>()) == barcode.end();
}

double barcode_constancy(const LabelFn& classifier, const Matrix& points, std::span<const double> lambdas) {
  if (points.rows() == 0) throw DomainError("barcode constancy of an empty set");
  std::size_t constant = 0;
  for (std::size_t i = 0; i < points.rows(); ++i) constant += is_constant(scale_barcode(classifier, points.row(i), lambdas));
  return static_cast<double>(constant) / static_cast<double>(points.rows());
}

std::vector<CurvePoint> tail_loss_curve(const LabelFn& predictor, const LabeledDataset& test,
                                        std::span<const double> norms, double t, std::span<const double> lambdas) {
  if (norms.size() != test.size()) throw DomainError("norms and test set differ in size");
  std::vector<CurvePoint> out;
  for (double l : lambdas) {
    const auto idx = nested_tail_subset(norms, t, l);
    if (idx.empty()) break;
    out.push_back({l, empirical_risk(predictor, test.subset(idx)), idx.size()});
  }
  return out;
}

double distinct_n(std::span<const std::vector<int>> sequences, int n) {
  if (n != 1 && n != 2) throw DomainError("distinct-n supports n = 1 or 2");
  std::size_t total = 0;
  std::set<std::pair<int, int>> grams;
  for (const auto& s : sequences) {
    total += s.size();
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= s.size(); ++i) {
      grams.emplace(s[i], n == 2 ? s[i + 1] : 0);
    }
  }
  if (total == 0) throw DomainError("distinct-n of an empty corpus");
  return static_cast<double>(grams.size()) / static_cast<double>(total);
}

double f1_score(std::span<const int> predictions, std::span<const int> labels, int positive) {
  if (labels.empty() || predictions.size() != labels.size()) throw DomainError("f1 needs equal nonempty inputs");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool p = predictions[i] == positive;
    const bool y = labels[i] == positive;
    tp += p && y;
    fp += p && !y;
    fn += !p && y;
  }
  if (tp == 0) return fp == 0 && fn == 0 ? 1.0 : 0.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

CorrelationMatrix correlation_matrix(std::span<const std::string> names, std::span<const std::vector<double>> columns,
                                     std::size_t permutations, std::uint64_t seed) {
  const std::size_t m = columns.size();
  if (names.size() != m || m == 0) throw DomainError("one name per column required");
  for (const auto& c : columns) {
    if (c.size() != columns[0].size() || c.size() < 3) throw DomainError("columns must share a length >= 3");
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CorrelationMatrix out{{names.begin(), names.end()}, Matrix(m, m, nan), Matrix(m, m, nan), std::vector<bool>(m)};
  for (std::size_t i = 0; i < m; ++i) {
    const double mn = *std::min_element(columns[i].begin(), columns[i].end());
    const double mx = *std::max_element(columns[i].begin(), columns[i].end());
    out.flagged[i] = mn == mx;
  }
  RngStream seeds(seed);
  for (std::size_t i = 0; i < m; ++i) {
    if (out.flagged[i]) continue;
    out.r(i, i) = 1.0;
    out.p(i, i) = 1.0 / static_cast<double>(permutations + 1);
    for (std::size_t j = i + 1; j < m; ++j) {
      if (out.flagged[j]) continue;
      out.r(i, j) = out.r(j, i) = pearson_corr(columns[i], columns[j]);
      out.p(i, j) = out.p(j, i) = corr_pvalue(columns[i], columns[j], CorrMethod::kPearson, permutations, seeds.next_u64());
    }
  }
  return out;
}

}  // namespace tailrep::diag

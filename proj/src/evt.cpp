#include "tailrep/evt.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <string>

#include "tailrep/error.hpp"
#include "tailrep/simd/kernels.hpp"

namespace tailrep {

void LabeledDataset::validate() const {
  if (y.empty()) throw DomainError("dataset is empty");
  if (x.rows() != y.size()) throw DomainError("row count and label count differ");
  for (int label : y) {
    if (label != -1 && label != 1) throw DomainError("labels must be -1 or +1");
  }
  for (double v : x.data()) {
    if (!std::isfinite(v)) throw DomainError("dataset contains a non-finite value");
  }
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices) const {
  LabeledDataset out{x.select_rows(indices), {}};
  out.y.reserve(indices.size());
  for (std::size_t i : indices) out.y.push_back(y[i]);
  return out;
}

std::pair<LabeledDataset, LabeledDataset> split_head(const LabeledDataset& data, std::size_t n_train) {
  if (n_train > data.size()) throw DomainError("split point beyond dataset size");
  std::vector<std::size_t> head(n_train), tail(data.size() - n_train);
  for (std::size_t i = 0; i < n_train; ++i) head[i] = i;
  for (std::size_t i = n_train; i < data.size(); ++i) tail[i - n_train] = i;
  return {data.subset(head), data.subset(tail)};
}

double sup_norm(std::span<const double> x) { return simd::max_abs(x); }

std::vector<double> row_norms(const Matrix& points) {
  std::vector<double> out(points.rows());
  for (std::size_t i = 0; i < points.rows(); ++i) out[i] = sup_norm(points.row(i));
  return out;
}

std::vector<double> angular_projection(std::span<const double> x) {
  const double r = sup_norm(x);
  if (!(r > 0.0)) throw DomainError("the pseudo-angle of the zero vector is undefined");
  std::vector<double> out(x.begin(), x.end());
  for (double& v : out) v /= r;
  return out;
}

Matrix angular_projection(const Matrix& points) {
  Matrix out(points.rows(), points.cols());
  for (std::size_t i = 0; i < points.rows(); ++i) {
    const auto a = angular_projection(points.row(i));
    std::copy(a.begin(), a.end(), out.row(i).begin());
  }
  return out;
}

RankTransformer RankTransformer::fit(const Matrix& data) {
  if (data.rows() == 0 || data.cols() == 0) throw DomainError("cannot fit a rank transform on an empty matrix");
  RankTransformer rt;
  rt.n_ = data.rows();
  rt.sorted_.resize(data.cols());
  for (std::size_t j = 0; j < data.cols(); ++j) {
    rt.sorted_[j] = data.column(j);
    std::sort(rt.sorted_[j].begin(), rt.sorted_[j].end());
  }
  return rt;
}

std::vector<double> RankTransformer::apply(std::span<const double> x) const {
  if (x.size() != dimension()) {
    throw DomainError("rank transform fitted on dimension " + std::to_string(dimension()) + ", got " +
                      std::to_string(x.size()));
  }
  const double n1 = static_cast<double>(n_ + 1);
  std::vector<double> out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    const auto& col = sorted_[j];
    const auto count = static_cast<double>(std::upper_bound(col.begin(), col.end(), x[j]) - col.begin());
    out[j] = n1 / (n1 - count);  // 1 / (1 - count / (n + 1))
  }
  return out;
}

Matrix RankTransformer::apply(const Matrix& points) const {
  Matrix out(points.rows(), points.cols());
  for (std::size_t i = 0; i < points.rows(); ++i) {
    const auto v = apply(points.row(i));
    std::copy(v.begin(), v.end(), out.row(i).begin());
  }
  return out;
}

TailThreshold tail_threshold(std::span<const double> norms, double kappa) {
  if (!(kappa > 0.0 && kappa < 1.0)) throw DomainError("kappa must lie in (0, 1)");
  const auto k = static_cast<std::size_t>(std::floor(kappa * static_cast<double>(norms.size())));
  if (k == 0) {
    throw DomainError("floor(kappa * n) = 0: no extremes for kappa=" + std::to_string(kappa) +
                      ", n=" + std::to_string(norms.size()));
  }
  std::vector<double> sorted(norms.begin(), norms.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1), sorted.end(),
                   std::greater<>());
  return {sorted[k - 1], k, kappa};
}

std::vector<std::size_t> select_extremes(std::span<const double> norms, double t) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < norms.size(); ++i) {
    if (norms[i] >= t) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> nested_tail_subset(std::span<const double> norms, double t, double lambda) {
  if (!(lambda >= 1.0)) throw DomainError("nested tail subsets need lambda >= 1");
  return select_extremes(norms, lambda * t);
}

double empirical_risk(const LabelFn& predict, const LabeledDataset& data) {
  if (data.size() == 0) throw DomainError("risk of an empty set is undefined");
  std::size_t errors = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (predict(data.x.row(i)) != data.y[i]) ++errors;
  }
  return static_cast<double>(errors) / static_cast<double>(data.size());
}

double empirical_tail_risk(const LabelFn& predict, const LabeledDataset& extremes) {
  if (extremes.size() == 0) throw DomainError("tail risk of an empty extreme set is undefined");
  std::size_t errors = 0;
  for (std::size_t i = 0; i < extremes.size(); ++i) {
    if (predict(angular_projection(extremes.x.row(i))) != extremes.y[i]) ++errors;
  }
  return static_cast<double>(errors) / static_cast<double>(extremes.size());
}

double AngularClassifier::probability(std::span<const double> x) const {
  return net_.probability(angular_projection(x));
}

LabelFn AngularClassifier::as_label_fn() const {
  return [self = *this](std::span<const double> x) { return self.predict(x); };
}

AngularClassifier fit_tail_erm(const LabeledDataset& extremes, const TailErmConfig& config, std::uint64_t seed) {
  extremes.validate();
  const std::size_t d = extremes.dimension();
  std::vector<std::size_t> sizes{d};
  sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
  sizes.push_back(1);

  const auto positives = static_cast<std::size_t>(std::count(extremes.y.begin(), extremes.y.end(), 1));
  if (positives == 0 || positives == extremes.size()) {
    std::cerr << "warning: fit_tail_erm got a single-class sample; returning a constant classifier\n";
    auto net = nn::Mlp::init(sizes, nn::Head::kSigmoid, seed);
    std::fill(net.parameters().begin(), net.parameters().end(), 0.0);
    net.bias(net.layer_count() - 1)[0] = positives == 0 ? -30.0 : 30.0;
    return AngularClassifier(std::move(net));
  }

  LabeledDataset angles{angular_projection(extremes.x), extremes.y};
  const RngStream root(seed);
  std::vector<nn::Mlp> chain{nn::Mlp::init(sizes, nn::Head::kSigmoid, root.derive(nn::stream::kInit).next_u64())};
  nn::fit_chain(chain, angles, config.optim, seed);
  return AngularClassifier(std::move(chain.front()));
}

}  // namespace tailrep

#include "tailrep/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "tailrep/error.hpp"
#include "tailrep/simd/kernels.hpp"

namespace tailrep::nn {

double sigmoid(double a) {
  if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
  const double e = std::exp(a);
  return e / (1.0 + e);
}

double log_sigmoid(double a) { return a >= 0.0 ? -std::log1p(std::exp(-a)) : a - std::log1p(std::exp(a)); }

double clamp_probability(double p) { return std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon); }

double bce_loss(double p, int y01) {
  const double q = clamp_probability(p);
  return y01 == 1 ? -std::log(q) : -std::log1p(-q);
}

Mlp::Mlp(std::vector<std::size_t> sizes, Head head, double dropout, std::vector<double> parameters)
    : sizes_(std::move(sizes)), head_(head), dropout_(dropout), params_(std::move(parameters)) {
  if (sizes_.size() < 2) throw DomainError("an Mlp needs at least two layer sizes");
  if (std::any_of(sizes_.begin(), sizes_.end(), [](std::size_t s) { return s == 0; })) {
    throw DomainError("layer sizes must be >= 1");
  }
  if (!(dropout_ >= 0.0 && dropout_ < 1.0)) throw DomainError("dropout rate must lie in [0, 1)");
  build_offsets();
  if (params_.size() != offsets_.back()) {
    throw DomainError("parameter count " + std::to_string(params_.size()) + " does not match layer sizes (" +
                      std::to_string(offsets_.back()) + ")");
  }
  if (!std::all_of(params_.begin(), params_.end(), [](double v) { return std::isfinite(v); })) {
    throw DomainError("Mlp parameters must be finite");
  }
}

void Mlp::build_offsets() {
  offsets_.assign(1, 0);
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets_.push_back(offsets_.back() + sizes_[l] * sizes_[l + 1] + sizes_[l + 1]);
  }
}

Mlp Mlp::init(std::span<const std::size_t> sizes, Head head, std::uint64_t seed, double dropout) {
  if (sizes.size() < 2) throw DomainError("an Mlp needs at least two layer sizes");
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) total += sizes[l] * sizes[l + 1] + sizes[l + 1];
  std::vector<double> params;
  params.reserve(total);
  RngStream rng(seed);
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(sizes[l], 1)));
    for (std::size_t i = 0; i < sizes[l] * sizes[l + 1] + sizes[l + 1]; ++i) {
      params.push_back(rng.uniform(-bound, bound));
    }
  }
  return Mlp({sizes.begin(), sizes.end()}, head, dropout, std::move(params));
}

std::span<double> Mlp::weight(std::size_t layer) {
  return {params_.data() + offsets_[layer], sizes_[layer] * sizes_[layer + 1]};
}
std::span<const double> Mlp::weight(std::size_t layer) const {
  return {params_.data() + offsets_[layer], sizes_[layer] * sizes_[layer + 1]};
}
std::span<double> Mlp::bias(std::size_t layer) {
  return {params_.data() + offsets_[layer] + sizes_[layer] * sizes_[layer + 1], sizes_[layer + 1]};
}
std::span<const double> Mlp::bias(std::size_t layer) const {
  return {params_.data() + offsets_[layer] + sizes_[layer] * sizes_[layer + 1], sizes_[layer + 1]};
}

void Mlp::check_input(std::span<const double> x) const {
  if (x.size() != input_dim()) {
    throw DomainError("input dimension " + std::to_string(x.size()) + " does not match network input " +
                      std::to_string(input_dim()));
  }
}

std::vector<double> Mlp::logits(std::span<const double> x) const {
  check_input(x);
  const auto& k = simd::active();
  std::vector<double> a(x.begin(), x.end());
  std::vector<double> z;
  for (std::size_t l = 0; l < layer_count(); ++l) {
    z.assign(sizes_[l + 1], 0.0);
    k.gemv(weight(l).data(), bias(l).data(), a.data(), z.data(), sizes_[l + 1], sizes_[l]);
    if (l + 1 < layer_count()) {
      for (double& v : z) v = v > 0.0 ? v : 0.0;
    }
    a.swap(z);
  }
  return a;
}

std::vector<double> Mlp::forward(std::span<const double> x) const {
  auto out = logits(x);
  if (head_ == Head::kSigmoid) {
    for (double& v : out) v = clamp_probability(sigmoid(v));
  }
  return out;
}

double Mlp::probability(std::span<const double> x) const {
  if (head_ != Head::kSigmoid) throw DomainError("probability() needs a sigmoid-head network");
  return clamp_probability(sigmoid(logits(x).front()));
}

Tape Mlp::forward_tape(std::span<const double> x, RngStream* dropout_rng) const {
  check_input(x);
  const auto& k = simd::active();
  const bool drop = dropout_rng != nullptr && dropout_ > 0.0;
  const double keep_scale = 1.0 / (1.0 - dropout_);
  Tape tape;
  tape.inputs.reserve(layer_count());
  tape.gates.reserve(layer_count() - 1);
  tape.inputs.emplace_back(x.begin(), x.end());
  for (std::size_t l = 0; l < layer_count(); ++l) {
    std::vector<double> z(sizes_[l + 1]);
    k.gemv(weight(l).data(), bias(l).data(), tape.inputs.back().data(), z.data(), sizes_[l + 1], sizes_[l]);
    if (l + 1 == layer_count()) {
      tape.logits = std::move(z);
      break;
    }
    std::vector<double> gate(z.size());
    for (std::size_t j = 0; j < z.size(); ++j) {
      double g = z[j] > 0.0 ? 1.0 : 0.0;
      if (drop) g = dropout_rng->uniform() < dropout_ ? 0.0 : g * keep_scale;
      gate[j] = g;
      z[j] = z[j] > 0.0 ? z[j] * g : 0.0;
    }
    tape.gates.push_back(std::move(gate));
    tape.inputs.push_back(std::move(z));
  }
  return tape;
}

std::vector<double> Mlp::backward(const Tape& tape, std::span<const double> grad_logits,
                                  std::span<double> grad) const {
  if (grad.size() != params_.size()) throw DomainError("gradient buffer does not match parameter count");
  if (grad_logits.size() != output_dim()) throw DomainError("output gradient has the wrong dimension");
  const auto& k = simd::active();
  std::vector<double> delta(grad_logits.begin(), grad_logits.end());
  for (std::size_t l = layer_count(); l-- > 0;) {
    const std::size_t in = sizes_[l];
    const std::size_t out = sizes_[l + 1];
    const auto& a = tape.inputs[l];
    double* gw = grad.data() + offsets_[l];
    double* gb = gw + in * out;
    const auto w = weight(l);
    std::vector<double> da(in, 0.0);
    for (std::size_t r = 0; r < out; ++r) {
      if (delta[r] == 0.0) continue;
      k.axpy(delta[r], a.data(), gw + r * in, in);
      gb[r] += delta[r];
      k.axpy(delta[r], w.data() + r * in, da.data(), in);
    }
    if (l == 0) return da;
    const auto& gate = tape.gates[l - 1];
    for (std::size_t j = 0; j < in; ++j) da[j] *= gate[j];
    delta.swap(da);
  }
  return delta;
}

void OptimConfig::validate() const {
  if (!(learning_rate > 0.0)) throw DomainError("learning rate must be positive");
  if (!(weight_decay >= 0.0)) throw DomainError("weight decay must be nonnegative");
  if (batch_size < 1) throw DomainError("batch size must be >= 1");
  if (epochs < 1) throw DomainError("epoch count must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw DomainError("Adam betas must lie in [0, 1)");
}

void optim_step(Mlp& net, std::span<const double> grad, const OptimConfig& config, OptimizerState& state) {
  auto params = net.parameters();
  if (grad.size() != params.size()) throw DomainError("gradient does not match parameters");
  const auto& k = simd::active();
  ++state.steps;
  if (config.kind == OptimizerKind::kSgd) {
    k.sgd_update(params.data(), grad.data(), params.size(), config.learning_rate, config.weight_decay);
    return;
  }
  if (state.first_moment.size() != params.size()) {
    state.first_moment.assign(params.size(), 0.0);
    state.second_moment.assign(params.size(), 0.0);
  }
  const double t = static_cast<double>(state.steps);
  const simd::AdamWParams p{config.learning_rate,
                            config.weight_decay,
                            config.beta1,
                            config.beta2,
                            config.epsilon,
                            1.0 - std::pow(config.beta1, t),
                            1.0 - std::pow(config.beta2, t)};
  k.adamw_update(params.data(), grad.data(), state.first_moment.data(), state.second_moment.data(), params.size(),
                 p);
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch, RngStream& rng) {
  if (batch == 0) throw DomainError("batch size must be >= 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  std::vector<std::vector<std::size_t>> batches;
  if (n < batch) {
    if (n > 0) batches.push_back(std::move(order));
    return batches;
  }
  for (std::size_t start = 0; start + batch <= n; start += batch) {
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(start + batch));
  }
  return batches;
}

double chain_step(std::span<Mlp> chain, std::span<OptimizerState> states, const LabeledDataset& data,
                  std::span<const std::size_t> batch, const OptimConfig& config, RngStream& dropout_rng) {
  if (chain.empty() || batch.empty()) throw DomainError("chain_step needs a network and a nonempty batch");
  if (chain.back().head() != Head::kSigmoid || chain.back().output_dim() != 1) {
    throw DomainError("the last network of a chain must be a one-output classifier");
  }
  for (std::size_t s = 0; s + 1 < chain.size(); ++s) {
    if (chain[s].head() != Head::kIdentity) throw DomainError("inner chain stages must have identity heads");
  }
  const std::size_t m = batch.size();
  const std::size_t stages = chain.size();
  // tapes[s][i]: stage s, i-th sample of the batch
  std::vector<std::vector<Tape>> tapes(stages, std::vector<Tape>(m));
  for (std::size_t s = 0; s < stages; ++s) {
    for (std::size_t i = 0; i < m; ++i) {
      std::span<const double> in = s == 0 ? data.x.row(batch[i]) : std::span<const double>(tapes[s - 1][i].logits);
      tapes[s][i] = chain[s].forward_tape(in, &dropout_rng);
    }
  }
  std::vector<std::vector<double>> grads(stages);
  for (std::size_t s = 0; s < stages; ++s) grads[s].assign(chain[s].parameter_count(), 0.0);
  const double weight = 1.0 / static_cast<double>(m);
  double loss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const int y = to_binary(data.y[batch[i]]);
    const double logit = tapes[stages - 1][i].logits.front();
    loss += weight * bce_loss(sigmoid(logit), y);
    std::vector<double> g{weight * bce_logit_gradient(logit, y)};
    for (std::size_t s = stages; s-- > 0;) g = chain[s].backward(tapes[s][i], g, grads[s]);
  }
  for (std::size_t s = stages; s-- > 0;) optim_step(chain[s], grads[s], config, states[s]);
  return loss;
}

void fit_chain(std::span<Mlp> chain, const LabeledDataset& data, const OptimConfig& config, std::uint64_t seed) {
  config.validate();
  data.validate();
  const RngStream root(seed);
  RngStream shuffle = root.derive(stream::kShuffle);
  RngStream dropout = root.derive(stream::kDropout);
  std::vector<OptimizerState> states(chain.size());
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (const auto& batch : epoch_batches(data.size(), config.batch_size, shuffle)) {
      chain_step(chain, states, data, batch, config, dropout);
    }
  }
}

double chain_probability(std::span<const Mlp> chain, std::span<const double> x) {
  std::vector<double> a(x.begin(), x.end());
  for (std::size_t s = 0; s + 1 < chain.size(); ++s) a = chain[s].forward(a);
  return chain.back().probability(a);
}

}  // namespace tailrep::nn

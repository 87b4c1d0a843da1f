#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tailrep/dataset.hpp"
#include "tailrep/rng.hpp"

namespace tailrep::nn {

/// Classifier outputs are clamped to [kProbEpsilon, 1 - kProbEpsilon].
inline constexpr double kProbEpsilon = 1e-7;

enum class Head {
  kSigmoid,   // classifier / discriminator: probability in (0, 1)
  kIdentity,  // encoder / regression: raw last-layer output
};

/// Fixed derivation ids for the random streams carved out of a run seed.
/// Shared by every trainer so runs with equal seeds draw equal streams.
namespace stream {
inline constexpr std::uint64_t kShuffle = 1;
inline constexpr std::uint64_t kDropout = 2;
inline constexpr std::uint64_t kPrior = 3;
inline constexpr std::uint64_t kInit = 4;
}  // namespace stream

double sigmoid(double a);
/// log sigmoid(a), finite for every finite a.
double log_sigmoid(double a);
double clamp_probability(double p);

/// -(y log p + (1 - y) log(1 - p)) with p clamped first; y in {0, 1}.
double bce_loss(double p, int y01);

/// d bce / d logit for p = sigmoid(logit), exact wherever the clamp is inactive.
inline double bce_logit_gradient(double logit, int y01) { return sigmoid(logit) - y01; }

/// Per-sample record of a training-mode forward pass.
struct Tape {
  std::vector<std::vector<double>> inputs;  // input seen by each layer
  std::vector<std::vector<double>> gates;   // relu'(pre) * dropout scale, per hidden layer
  std::vector<double> logits;               // last layer before the head
};

/// Dense feed-forward network: rectifier hidden layers, sigmoid or identity
/// head, optional inverted dropout on hidden activations during training.
/// Parameters live in one flat buffer, layer by layer, each layer's
/// row-major (out x in) weight followed by its bias.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<std::size_t> sizes, Head head, double dropout, std::vector<double> parameters);

  /// Weights and biases uniform on (-1/sqrt(fan_in), 1/sqrt(fan_in)).
  static Mlp init(std::span<const std::size_t> sizes, Head head, std::uint64_t seed, double dropout = 0.0);

  const std::vector<std::size_t>& sizes() const noexcept { return sizes_; }
  Head head() const noexcept { return head_; }
  double dropout() const noexcept { return dropout_; }
  std::size_t layer_count() const noexcept { return sizes_.size() - 1; }
  std::size_t input_dim() const noexcept { return sizes_.front(); }
  std::size_t output_dim() const noexcept { return sizes_.back(); }
  std::size_t parameter_count() const noexcept { return params_.size(); }

  std::span<double> parameters() noexcept { return params_; }
  std::span<const double> parameters() const noexcept { return params_; }
  std::span<double> weight(std::size_t layer);
  std::span<const double> weight(std::size_t layer) const;
  std::span<double> bias(std::size_t layer);
  std::span<const double> bias(std::size_t layer) const;

  /// Inference (dropout off), head not applied.
  std::vector<double> logits(std::span<const double> x) const;
  /// Inference with the head applied; sigmoid outputs are clamped.
  std::vector<double> forward(std::span<const double> x) const;
  /// First output of a sigmoid-head network.
  double probability(std::span<const double> x) const;

  /// Training-mode forward. Dropout is applied when dropout_rng is non-null
  /// and the rate is positive.
  Tape forward_tape(std::span<const double> x, RngStream* dropout_rng) const;

  /// Accumulates d loss / d parameters into grad (same layout as
  /// parameters()) given d loss / d logits; returns d loss / d input.
  std::vector<double> backward(const Tape& tape, std::span<const double> grad_logits,
                               std::span<double> grad) const;

  friend bool operator==(const Mlp&, const Mlp&) = default;

 private:
  void build_offsets();
  void check_input(std::span<const double> x) const;

  std::vector<std::size_t> sizes_;
  Head head_ = Head::kIdentity;
  double dropout_ = 0.0;
  std::vector<double> params_;
  std::vector<std::size_t> offsets_;  // start of each layer's weight block
};

enum class OptimizerKind { kSgd, kAdamW };

struct OptimConfig {
  OptimizerKind kind = OptimizerKind::kAdamW;
  double learning_rate = 5e-4;
  double weight_decay = 1e-5;
  std::size_t batch_size = 64;
  std::size_t epochs = 100;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

/// Moment buffers and step counter; sized on first use.
struct OptimizerState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t steps = 0;
};

/// One descent step with decoupled weight decay.
void optim_step(Mlp& net, std::span<const double> grad, const OptimConfig& config, OptimizerState& state);

/// Shuffled mini-batches covering floor(n / batch) full batches; the
/// incomplete remainder is dropped. n < batch yields one batch of all rows.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch, RngStream& rng);

/// One mean binary cross-entropy step on a stack of networks applied in
/// sequence (the last must be a one-output sigmoid network). Every stage is
/// run over the whole batch before the next one. Returns the batch loss.
double chain_step(std::span<Mlp> chain, std::span<OptimizerState> states, const LabeledDataset& data,
                  std::span<const std::size_t> batch, const OptimConfig& config, RngStream& dropout_rng);

/// Plain supervised training of a stack; streams derived from seed.
void fit_chain(std::span<Mlp> chain, const LabeledDataset& data, const OptimConfig& config, std::uint64_t seed);

/// Chained inference: probability from the last stage.
double chain_probability(std::span<const Mlp> chain, std::span<const double> x);

// Serialization: JSON object {"format":"tailrep.mlp","version":1,...} with
// row-major parameter arrays. Doubles are written in shortest round-trip
// form, so save/load is bit-exact.
std::string mlp_to_json_string(const Mlp& net);
Mlp mlp_from_json_string(const std::string& text);
void save_mlp(const Mlp& net, const std::string& path);
Mlp load_mlp(const std::string& path);

}  // namespace tailrep::nn

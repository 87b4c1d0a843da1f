#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tailrep/matrix.hpp"
#include "tailrep/nn.hpp"

namespace tailrep::augment {

inline constexpr int kStart = 0;
inline constexpr int kStop = 1;

using Sequence = std::vector<int>;

/// Token sequences paired with the embeddings they were produced from.
/// Sequences carry their STOP token (when they have one) and hold at most
/// t_max tokens.
struct SequenceDataset {
  Matrix x;
  std::vector<int> labels;
  std::vector<Sequence> sequences;
  std::size_t vocab = 0;
  std::size_t t_max = 0;

  std::size_t size() const noexcept { return sequences.size(); }
  void validate() const;
};

/// Autoregressive step network: [z, onehot(previous token)] -> vocab logits.
struct ToyDecoder {
  nn::Mlp step;
  std::size_t vocab = 0;
  std::size_t t_max = 0;

  std::size_t latent_dim() const { return step.input_dim() - vocab; }
  std::vector<double> step_input(std::span<const double> z, int previous) const;
  std::vector<double> step_logits(std::span<const double> z, int previous) const;
};

ToyDecoder init_decoder(std::size_t latent_dim, std::size_t vocab, std::size_t t_max,
                        std::span<const std::size_t> hidden, std::uint64_t seed);

std::vector<double> softmax(std::span<const double> logits);

/// -sum_t log softmax(logits_t)[target_t]; positions after the first STOP
/// are ignored. Throws when the target is longer than t_max.
double sequence_nll(std::span<const std::vector<double>> logits, std::span<const int> target, std::size_t t_max);

/// Teacher-forced NLL of target given code z.
double teacher_forced_nll(const ToyDecoder& decoder, std::span<const double> z, std::span<const int> target);

/// Adds weight * d nll / d parameters into grad; returns weight * nll.
double teacher_forced_gradient(const ToyDecoder& decoder, std::span<const double> z, std::span<const int> target,
                               double weight, std::span<double> grad);

/// Number of target positions that count towards the loss.
std::size_t scored_length(std::span<const int> target);

/// sum over sequences of scored_length * log(vocab).
double uniform_nll(std::span<const Sequence> sequences, std::size_t vocab);

struct DecoderConfig {
  std::vector<std::size_t> hidden = {64};
  double kappa = 0.25;   // (0, 1]; 1 trains on every code
  double rho_ext = 1.0;  // weight of the extreme-region loss
  nn::OptimConfig optim{nn::OptimizerKind::kAdamW, 5e-3, 0.0, 32, 200};

  void validate() const;
};

/// Per batch: encode, keep the floor(kappa m) largest codes, descend
/// (rho_ext / k) sum teacher_forced_nll. The encoder stays frozen.
ToyDecoder train_decoder(const nn::Mlp& encoder, const SequenceDataset& data, const DecoderConfig& config,
                         std::uint64_t seed);

/// Greedy decoding from z: START, then argmax tokens until STOP or t_max.
Sequence greedy_decode(const ToyDecoder& decoder, std::span<const double> z);

/// One greedy decode of lambda * encoder(x) per lambda (all >= 1).
std::vector<Sequence> generate_scaled(const ToyDecoder& decoder, const nn::Mlp& encoder, std::span<const double> x,
                                      std::span<const double> lambdas);

/// m equally spaced values on [lo, hi].
std::vector<double> lambda_grid(double lo, double hi, std::size_t m);

/// Fraction of (point, lambda) pairs where 1{C(lambda z) > 1/2} == 1{C(z) > 1/2},
/// z = encoder(x) for each row x of points.
double label_preservation_audit(const nn::Mlp& classifier, const nn::Mlp& encoder, const Matrix& points,
                                std::span<const double> lambdas);

std::string decoder_to_json_string(const ToyDecoder& decoder);
ToyDecoder decoder_from_json_string(const std::string& text);
void save_decoder(const ToyDecoder& decoder, const std::string& path);
ToyDecoder load_decoder(const std::string& path);

}  // namespace tailrep::augment

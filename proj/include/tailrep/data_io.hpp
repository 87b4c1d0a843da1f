#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>

#include "tailrep/augment.hpp"
#include "tailrep/dataset.hpp"
#include "tailrep/nn.hpp"

namespace tailrep::data {

struct GaussianComponent {
  std::array<double, 2> mean{};
  std::array<double, 4> covariance{1.0, 0.0, 0.0, 1.0};  // row-major 2x2
  double weight = 0.5;
  int label = 1;
};

struct MixtureSpec {
  std::array<GaussianComponent, 2> components;

  /// Means (1, 1) labelled -1 and (2.5, 1) labelled +1, shared covariance
  /// diag(1, 0.25), equal weights.
  static MixtureSpec toy();
  /// Throws DomainError unless weights sum to 1, labels are -1/+1 and both
  /// covariances are symmetric positive definite.
  void validate() const;
};

inline constexpr std::size_t kToySize = 3000;
inline constexpr std::size_t kToyTrain = 2250;

LabeledDataset gen_gaussian_mixture(const MixtureSpec& spec, std::size_t n, std::uint64_t seed);

/// Radius R ~ Pareto(1), phase phi ~ U(0, pi/4) and direction
/// theta = phi + 0.15 log R, so the angle drifts with the radius.
/// x = R (cos theta, sin theta, 0.5 cos(theta + 2), ..., 0.5 cos(theta + d - 1));
/// label +1 iff phi >= pi/8.
LabeledDataset gen_dependent_embedding(std::size_t n, std::size_t d, std::uint64_t seed);

/// Token layout for latent sequences: sectors of the angle of the first two
/// latent coordinates, then buckets of the latent norm.
struct SequenceVocab {
  std::size_t sectors = 1;
  std::size_t buckets = 1;

  static SequenceVocab for_size(std::size_t vocab);
  int sector_token(std::size_t s) const { return static_cast<int>(2 + s); }
  int bucket_token(std::size_t b) const { return static_cast<int>(2 + sectors + b); }
};

/// One sequence per latent row: [sector, bucket, STOP], cut to t_max.
/// Norm buckets split at the quantiles of the given latents' norms.
augment::SequenceDataset gen_latent_sequences(const Matrix& latents, const LabeledDataset& inputs,
                                              std::size_t vocab, std::size_t t_max);
augment::SequenceDataset gen_latent_sequences(const nn::Mlp& encoder, const LabeledDataset& inputs,
                                              std::size_t vocab, std::size_t t_max);

/// CSV: first line "d=<int>", then "label,v1,...,vd"; '#' starts a comment
/// line. Values written with 17 significant digits.
std::string format_embeddings(const LabeledDataset& data);
LabeledDataset parse_embeddings(const std::string& text);
void save_embeddings(const LabeledDataset& data, const std::string& path);
LabeledDataset load_embeddings(const std::string& path);

/// Header "d=<int> vocab=<int> tmax=<int>", then "label,v1,...,vd,t1 t2 ...".
std::string format_sequences(const augment::SequenceDataset& data);
augment::SequenceDataset parse_sequences(const std::string& text);
void save_sequences(const augment::SequenceDataset& data, const std::string& path);
augment::SequenceDataset load_sequences(const std::string& path);

}  // namespace tailrep::data

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tailrep/dataset.hpp"
#include "tailrep/evt.hpp"
#include "tailrep/heavy_tails.hpp"
#include "tailrep/nn.hpp"

namespace tailrep::lhtr {

enum class HeadMode {
  kTwoHead,     // dedicated extreme and bulk classifiers
  kSingleHead,  // one classifier shared by both regions
};

struct ClassWeights {
  double ext = 1.0;   // rho_1
  double bulk = 1.0;  // rho_2
};

struct LhtrConfig {
  double kappa = 0.25;
  std::optional<double> rho_ext;   // rho_1; default from default_class_weights
  std::optional<double> rho_bulk;  // rho_2
  double rho_adv = 1e-3;           // rho_3; 0 disables the adversary
  LogisticParams target{2, 0.9};
  std::vector<std::size_t> encoder_sizes{2, 4, 2};
  std::vector<std::size_t> classifier_sizes{2, 8, 1};
  std::vector<std::size_t> discriminator_sizes{2, 8, 1};
  double dropout = 0.4;
  nn::OptimConfig optim{nn::OptimizerKind::kAdamW, 5e-4, 1e-5, 64, 100};
  HeadMode mode = HeadMode::kTwoHead;

  std::size_t latent_dim() const { return encoder_sizes.back(); }
  void validate() const;

  /// Bivariate toy example: 3-layer components, dropout 0.4, batch 64.
  static LhtrConfig toy();
  /// Few-thousand-sample embedding datasets (batch 64, lr 5e-4, rho_3 = 1e-3).
  static LhtrConfig small(std::size_t input_dim, HeadMode mode = HeadMode::kTwoHead);
  /// Large embedding datasets (batch 256, lr 1e-4, rho_3 = 0.01).
  static LhtrConfig large(std::size_t input_dim, HeadMode mode = HeadMode::kTwoHead);
};

/// rho_1 = 1 / (1 - p), rho_2 = 1 / p with p the realized fraction of
/// norms >= the floor(kappa n)-th largest one.
ClassWeights default_class_weights(std::span<const double> norms, double kappa);

struct LhtrModel {
  nn::Mlp encoder;
  nn::Mlp ext;
  nn::Mlp bulk;  // unused in single-head mode
  nn::Mlp discriminator;
  TailThreshold threshold;
  ClassWeights weights;
  LhtrConfig config;

  const nn::Mlp& bulk_head() const { return config.mode == HeadMode::kSingleHead ? ext : bulk; }
  std::vector<double> encode(std::span<const double> x) const { return encoder.forward(x); }
  Matrix encode(const Matrix& x) const;
  /// Boundary convention: ||z|| == t is extreme.
  bool is_extreme(std::span<const double> z) const { return sup_norm(z) >= threshold.t; }
};

/// Fresh networks for the given input dimension; encoder_sizes.front() is
/// replaced by input_dim.
LhtrModel init_model(const LhtrConfig& config, std::size_t input_dim, std::uint64_t seed);

/// Extreme/bulk split of one batch: the floor(kappa m) largest encoded norms
/// (ties broken by batch position) are extreme. Per-sample classifier
/// weights are rho_1 / k and rho_2 / (m - k).
struct BatchAssignment {
  std::vector<bool> extreme;
  std::vector<double> weight;
  std::size_t k = 0;
};
BatchAssignment assign_batch(std::span<const double> norms, double kappa, const ClassWeights& weights);

/// (rho_3 / m) sum_i [log D(prior_i) + log(1 - D(encoded_i))]
double discriminator_objective(const nn::Mlp& discriminator, const Matrix& prior, const Matrix& encoded, double rho_adv);

/// Gradient of discriminator_objective with respect to the discriminator parameters.
std::vector<double> discriminator_objective_gradient(const nn::Mlp& discriminator, const Matrix& prior,
                                                     const Matrix& encoded, double rho_adv);

/// Encoder loss for fixed assignment, dropout off:
/// (1/m) sum_i -rho_3 log D(phi(x_i)) + L_ext + L_bulk.
double encoder_objective(const LhtrModel& model, const Matrix& x, std::span<const int> labels,
                         const BatchAssignment& assignment);
std::vector<double> encoder_objective_gradient(const LhtrModel& model, const Matrix& x, std::span<const int> labels,
                                               const BatchAssignment& assignment);

struct StepMetrics {
  double discriminator_objective = 0.0;
  double ext_loss = 0.0;
  double bulk_loss = 0.0;
  double adversarial_loss = 0.0;  // (1/m) sum -rho_3 log D(z~_i)
  std::size_t extremes = 0;

  double supervised_loss() const { return ext_loss + bulk_loss; }
};

/// Optimizer moments and random streams carried across steps.
struct TrainState {
  explicit TrainState(std::uint64_t seed);

  nn::OptimizerState encoder, ext, bulk, discriminator;
  RngStream shuffle;
  RngStream dropout;
  RngStream prior;
};

/// One iteration: discriminator ascent, then C_ext, C_bulk and encoder
/// descent. Classifier and encoder gradients are taken at the parameters
/// held before this step's classifier updates.
StepMetrics train_step(LhtrModel& model, const LabeledDataset& data, std::span<const std::size_t> batch,
                       TrainState& state);

/// Runs config.optim.epochs epochs of shuffled mini-batch steps on an
/// initialized model, then sets the threshold from the full training set.
std::vector<StepMetrics> fit_lhtr(LhtrModel& model, const LabeledDataset& data, std::uint64_t seed);

LhtrModel train_lhtr(const LabeledDataset& data, const LhtrConfig& config, std::uint64_t seed);

int predict_combined(const LhtrModel& model, std::span<const double> x);
/// Extreme inputs go to C_ext; the rest to external, applied to the raw input.
int predict_hybrid(const LhtrModel& model, const LabelFn& external, std::span<const double> x);

std::string model_to_json_string(const LhtrModel& model);
LhtrModel model_from_json_string(const std::string& text);
void save_model(const LhtrModel& model, const std::string& path);
LhtrModel load_model(const std::string& path);

}  // namespace tailrep::lhtr

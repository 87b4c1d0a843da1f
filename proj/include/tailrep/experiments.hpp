#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tailrep/augment.hpp"
#include "tailrep/dataset.hpp"
#include "tailrep/lhtr.hpp"
#include "tailrep/json_io.hpp"
#include "tailrep/report.hpp"

namespace tailrep::experiments {

struct ExperimentConfig {
  std::uint64_t seed = 0;
  lhtr::LhtrConfig lhtr = lhtr::LhtrConfig::toy();
  std::size_t n_total = 3000;
  std::size_t n_train = 2250;
  std::size_t permutations = 1000;
  std::size_t dependent_n = 10000;  // negative control for the audit
  std::vector<double> barcode_lambdas;  // default 1, 2, ..., 20
  std::vector<double> curve_lambdas;    // default 1, 1.25, ..., 3
  std::size_t comparison_runs = 3;      // seeds seed, seed + 1, ...
  std::size_t vocab = 12;
  std::size_t t_max = 4;
  std::size_t generations = 10;  // M
  double lambda_min = 1.0;
  double lambda_max = 1.5;
  augment::DecoderConfig decoder;

  ExperimentConfig();
  void validate() const;
};

/// Report plus named text artifacts (file name -> contents).
struct Artifacts {
  DiagnosticReport report;
  std::map<std::string, std::string> files;
};

/// Raw-input network with the LHTR encoder and classifier architectures
/// stacked, trained on plain cross-entropy.
struct Baseline {
  std::vector<nn::Mlp> chain;

  double probability(std::span<const double> x) const { return nn::chain_probability(chain, x); }
  int predict(std::span<const double> x) const { return probability(x) > 0.5 ? 1 : -1; }
};
Baseline train_baseline(const LabeledDataset& train, const ExperimentConfig& config, std::uint64_t seed);

Artifacts run_toy_experiment(const ExperimentConfig& config);
Artifacts run_comparison(const ExperimentConfig& config);
/// Trains the model from the toy data unless one is supplied; likewise the decoder.
Artifacts run_augmentation(const ExperimentConfig& config, const std::optional<lhtr::LhtrModel>& model = std::nullopt,
                           const std::optional<augment::ToyDecoder>& decoder = std::nullopt);

/// Fraction of the less frequent label.
double minority_fraction(std::span<const int> labels);

OrderedJson experiment_config_to_json(const ExperimentConfig& config);
/// Overrides the defaults with keys present in j ("lhtr" takes an LHTR config object).
ExperimentConfig experiment_config_from_json(const Json& j, std::size_t input_dim = 2);

}  // namespace tailrep::experiments

#include "tailrep/lhtr.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "tailrep/error.hpp"
#include "tailrep/json_io.hpp"

namespace tailrep::lhtr {
namespace {

void check_sizes(const std::vector<std::size_t>& sizes, const char* what) {
  if (sizes.size() < 2) throw DomainError(std::string(what) + " needs at least two layer sizes");
}

std::size_t extreme_count(double kappa, std::size_t m) {
  return static_cast<std::size_t>(std::floor(kappa * static_cast<double>(m)));
}

// Per-batch gradients of the classifier and encoder losses at fixed parameters.
struct BatchGradients {
  std::vector<double> encoder, ext, bulk;
  double ext_loss = 0.0, bulk_loss = 0.0, adversarial_loss = 0.0;
};

BatchGradients batch_gradients(const LhtrModel& model, std::span<const nn::Tape> encoder_tapes,
                               std::span<const int> labels, const BatchAssignment& assignment,
                               RngStream* dropout_rng) {
  const std::size_t m = encoder_tapes.size();
  const bool single = model.config.mode == HeadMode::kSingleHead;
  const double rho_adv = model.config.rho_adv;
  BatchGradients out;
  out.encoder.assign(model.encoder.parameter_count(), 0.0);
  out.ext.assign(model.ext.parameter_count(), 0.0);
  if (!single) out.bulk.assign(model.bulk.parameter_count(), 0.0);

  auto head_for = [&](std::size_t i) -> const nn::Mlp& {
    return assignment.extreme[i] || single ? model.ext : model.bulk;
  };
  std::vector<nn::Tape> head_tapes(m);
  for (std::size_t i = 0; i < m; ++i) head_tapes[i] = head_for(i).forward_tape(encoder_tapes[i].logits, dropout_rng);

  std::vector<double> scratch(rho_adv > 0.0 ? model.discriminator.parameter_count() : 0);
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t i = 0; i < m; ++i) {
    const int y = to_binary(labels[i]);
    const double logit = head_tapes[i].logits.front();
    const double w = assignment.weight[i];
    const double loss = w * nn::bce_loss(nn::sigmoid(logit), y);
    (assignment.extreme[i] ? out.ext_loss : out.bulk_loss) += loss;

    std::vector<double> g{w * nn::bce_logit_gradient(logit, y)};
    auto& head_grad = assignment.extreme[i] || single ? out.ext : out.bulk;
    std::vector<double> dz = head_for(i).backward(head_tapes[i], g, head_grad);

    if (rho_adv > 0.0) {
      // -(rho_3 / m) log D(z~): d/da = -(rho_3 / m) (1 - sigmoid(a))
      const auto& z = encoder_tapes[i].logits;
      const nn::Tape d_tape = model.discriminator.forward_tape(z, nullptr);
      const double a = d_tape.logits.front();
      out.adversarial_loss += -rho_adv * inv_m * nn::log_sigmoid(a);
      std::vector<double> gd{-rho_adv * inv_m * (1.0 - nn::sigmoid(a))};
      const auto dz_adv = model.discriminator.backward(d_tape, gd, scratch);
      for (std::size_t j = 0; j < dz.size(); ++j) dz[j] += dz_adv[j];
    }
    model.encoder.backward(encoder_tapes[i], dz, out.encoder);
  }
  return out;
}

std::vector<int> batch_labels(const LabeledDataset& data, std::span<const std::size_t> batch) {
  std::vector<int> out(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) out[i] = data.y[batch[i]];
  return out;
}

}  // namespace

void LhtrConfig::validate() const {
  if (!(kappa > 0.0 && kappa < 1.0)) throw DomainError("kappa must lie in (0, 1)");
  if (rho_ext && !(*rho_ext > 0.0)) throw DomainError("rho_1 must be positive");
  if (rho_bulk && !(*rho_bulk > 0.0)) throw DomainError("rho_2 must be positive");
  if (!(rho_adv >= 0.0)) throw DomainError("rho_3 must be nonnegative");
  target.validate();
  check_sizes(encoder_sizes, "encoder");
  check_sizes(classifier_sizes, "classifier");
  check_sizes(discriminator_sizes, "discriminator");
  const std::size_t latent = latent_dim();
  if (classifier_sizes.front() != latent || discriminator_sizes.front() != latent) {
    throw DomainError("classifier and discriminator inputs must match the latent dimension");
  }
  if (classifier_sizes.back() != 1 || discriminator_sizes.back() != 1) {
    throw DomainError("classifier and discriminator must have one output");
  }
  if (target.dimension != latent) throw DomainError("target dimension must match the latent dimension");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw DomainError("dropout rate must lie in [0, 1)");
  optim.validate();
  if (extreme_count(kappa, optim.batch_size) < 1) throw DomainError("floor(kappa * batch) must be >= 1");
}

LhtrConfig LhtrConfig::toy() { return LhtrConfig{}; }

LhtrConfig LhtrConfig::small(std::size_t input_dim, HeadMode mode) {
  LhtrConfig c;
  c.mode = mode;
  const std::size_t latent = mode == HeadMode::kSingleHead ? 100 : 150;
  c.encoder_sizes = {input_dim, 384, 200, latent};
  c.classifier_sizes = mode == HeadMode::kSingleHead ? std::vector<std::size_t>{100, 50, 8, 1}
                                                     : std::vector<std::size_t>{150, 75, 8, 1};
  c.discriminator_sizes = c.classifier_sizes;
  c.target = {latent, 0.9};
  c.rho_adv = 1e-3;
  c.dropout = 0.0;
  c.optim = {nn::OptimizerKind::kAdamW, 5e-4, 1e-5, 64, 500};
  return c;
}

LhtrConfig LhtrConfig::large(std::size_t input_dim, HeadMode mode) {
  LhtrConfig c = small(input_dim, mode);
  c.rho_adv = 0.01;
  c.optim.learning_rate = 1e-4;
  c.optim.batch_size = 256;
  return c;
}

ClassWeights default_class_weights(std::span<const double> norms, double kappa) {
  const TailThreshold th = tail_threshold(norms, kappa);
  const auto selected = select_extremes(norms, th.t).size();
  const double p = static_cast<double>(selected) / static_cast<double>(norms.size());
  if (!(p > 0.0 && p < 1.0)) throw DomainError("degenerate realized extreme fraction " + std::to_string(p));
  return {1.0 / (1.0 - p), 1.0 / p};
}

Matrix LhtrModel::encode(const Matrix& x) const {
  Matrix out(x.rows(), encoder.output_dim());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto z = encoder.forward(x.row(i));
    std::copy(z.begin(), z.end(), out.row(i).begin());
  }
  return out;
}

LhtrModel init_model(const LhtrConfig& config, std::size_t input_dim, std::uint64_t seed) {
  LhtrConfig c = config;
  c.encoder_sizes.front() = input_dim;
  c.validate();
  RngStream init = RngStream(seed).derive(nn::stream::kInit);
  LhtrModel model;
  model.encoder = nn::Mlp::init(c.encoder_sizes, nn::Head::kIdentity, init.next_u64(), c.dropout);
  model.ext = nn::Mlp::init(c.classifier_sizes, nn::Head::kSigmoid, init.next_u64(), c.dropout);
  model.bulk = nn::Mlp::init(c.classifier_sizes, nn::Head::kSigmoid, init.next_u64(), c.dropout);
  model.discriminator = nn::Mlp::init(c.discriminator_sizes, nn::Head::kSigmoid, init.next_u64(), 0.0);
  model.weights = {c.rho_ext.value_or(1.0), c.rho_bulk.value_or(1.0)};
  model.config = std::move(c);
  return model;
}

BatchAssignment assign_batch(std::span<const double> norms, double kappa, const ClassWeights& weights) {
  const std::size_t m = norms.size();
  const std::size_t k = extreme_count(kappa, m);
  if (k < 1) throw DomainError("floor(kappa * m) = 0 for batch size " + std::to_string(m));
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return norms[a] > norms[b]; });
  BatchAssignment out;
  out.k = k;
  out.extreme.assign(m, false);
  out.weight.assign(m, 0.0);
  const double w_ext = weights.ext / static_cast<double>(k);
  const double w_bulk = m > k ? weights.bulk / static_cast<double>(m - k) : 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    out.extreme[order[r]] = r < k;
    out.weight[order[r]] = r < k ? w_ext : w_bulk;
  }
  return out;
}

double discriminator_objective(const nn::Mlp& discriminator, const Matrix& prior, const Matrix& encoded,
                               double rho_adv) {
  if (prior.rows() == 0 || prior.rows() != encoded.rows()) {
    throw DomainError("prior and encoded batches must be nonempty and of equal size");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < prior.rows(); ++i) {
    // log D = log sigmoid(a), log(1 - D) = log sigmoid(-a)
    acc += nn::log_sigmoid(discriminator.logits(prior.row(i))[0]) + nn::log_sigmoid(-discriminator.logits(encoded.row(i))[0]);
  }
  return rho_adv * acc / static_cast<double>(prior.rows());
}

std::vector<double> discriminator_objective_gradient(const nn::Mlp& discriminator, const Matrix& prior,
                                                     const Matrix& encoded, double rho_adv) {
  if (prior.rows() == 0 || prior.rows() != encoded.rows()) {
    throw DomainError("prior and encoded batches must be nonempty and of equal size");
  }
  const double c = rho_adv / static_cast<double>(prior.rows());
  std::vector<double> grad(discriminator.parameter_count(), 0.0);
  for (std::size_t i = 0; i < prior.rows(); ++i) {
    const nn::Tape tp = discriminator.forward_tape(prior.row(i), nullptr);
    std::vector<double> gp{c * (1.0 - nn::sigmoid(tp.logits.front()))};
    discriminator.backward(tp, gp, grad);
    const nn::Tape te = discriminator.forward_tape(encoded.row(i), nullptr);
    std::vector<double> ge{-c * nn::sigmoid(te.logits.front())};
    discriminator.backward(te, ge, grad);
  }
  return grad;
}

double encoder_objective(const LhtrModel& model, const Matrix& x, std::span<const int> labels,
                         const BatchAssignment& assignment) {
  const std::size_t m = x.rows();
  const bool single = model.config.mode == HeadMode::kSingleHead;
  double acc = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const auto z = model.encode(x.row(i));
    const nn::Mlp& head = assignment.extreme[i] || single ? model.ext : model.bulk;
    acc += assignment.weight[i] * nn::bce_loss(head.probability(z), to_binary(labels[i]));
    if (model.config.rho_adv > 0.0) {
      acc += -model.config.rho_adv / static_cast<double>(m) * nn::log_sigmoid(model.discriminator.logits(z)[0]);
    }
  }
  return acc;
}

std::vector<double> encoder_objective_gradient(const LhtrModel& model, const Matrix& x, std::span<const int> labels,
                                               const BatchAssignment& assignment) {
  std::vector<nn::Tape> tapes(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) tapes[i] = model.encoder.forward_tape(x.row(i), nullptr);
  return batch_gradients(model, tapes, labels, assignment, nullptr).encoder;
}

TrainState::TrainState(std::uint64_t seed)
    : shuffle(RngStream(seed).derive(nn::stream::kShuffle)),
      dropout(RngStream(seed).derive(nn::stream::kDropout)),
      prior(RngStream(seed).derive(nn::stream::kPrior)) {}

StepMetrics train_step(LhtrModel& model, const LabeledDataset& data, std::span<const std::size_t> batch,
                       TrainState& state) {
  const LhtrConfig& cfg = model.config;
  const std::size_t m = batch.size();
  if (extreme_count(cfg.kappa, m) < 1) throw DomainError("floor(kappa * m) = 0 for batch size " + std::to_string(m));
  StepMetrics metrics;

  std::vector<nn::Tape> enc_tapes(m);
  for (std::size_t i = 0; i < m; ++i) enc_tapes[i] = model.encoder.forward_tape(data.x.row(batch[i]), &state.dropout);

  if (cfg.rho_adv > 0.0) {
    Matrix encoded(m, model.encoder.output_dim());
    for (std::size_t i = 0; i < m; ++i) std::copy(enc_tapes[i].logits.begin(), enc_tapes[i].logits.end(), encoded.row(i).begin());
    LogisticParams target = cfg.target;
    const Matrix prior = sample_logistic(target, m, state.prior);
    metrics.discriminator_objective = discriminator_objective(model.discriminator, prior, encoded, cfg.rho_adv);
    auto grad = discriminator_objective_gradient(model.discriminator, prior, encoded, cfg.rho_adv);
    for (double& g : grad) g = -g;  // ascent
    nn::optim_step(model.discriminator, grad, cfg.optim, state.discriminator);
  }

  std::vector<double> norms(m);
  for (std::size_t i = 0; i < m; ++i) norms[i] = sup_norm(enc_tapes[i].logits);
  const BatchAssignment assignment = assign_batch(norms, cfg.kappa, model.weights);
  metrics.extremes = assignment.k;

  const auto labels = batch_labels(data, batch);
  BatchGradients g = batch_gradients(model, enc_tapes, labels, assignment, &state.dropout);
  metrics.ext_loss = g.ext_loss;
  metrics.bulk_loss = g.bulk_loss;
  metrics.adversarial_loss = g.adversarial_loss;

  nn::optim_step(model.ext, g.ext, cfg.optim, state.ext);
  if (cfg.mode == HeadMode::kTwoHead) nn::optim_step(model.bulk, g.bulk, cfg.optim, state.bulk);
  nn::optim_step(model.encoder, g.encoder, cfg.optim, state.encoder);
  return metrics;
}

std::vector<StepMetrics> fit_lhtr(LhtrModel& model, const LabeledDataset& data, std::uint64_t seed) {
  data.validate();
  model.config.validate();
  if (data.dimension() != model.encoder.input_dim()) throw DomainError("data dimension does not match the encoder");
  if (!model.config.rho_ext || !model.config.rho_bulk) {
    const ClassWeights defaults = default_class_weights(row_norms(model.encode(data.x)), model.config.kappa);
    model.weights = {model.config.rho_ext.value_or(defaults.ext), model.config.rho_bulk.value_or(defaults.bulk)};
  } else {
    model.weights = {*model.config.rho_ext, *model.config.rho_bulk};
  }
  TrainState state(seed);
  std::vector<StepMetrics> history;
  for (std::size_t epoch = 0; epoch < model.config.optim.epochs; ++epoch) {
    for (const auto& batch : nn::epoch_batches(data.size(), model.config.optim.batch_size, state.shuffle)) {
      history.push_back(train_step(model, data, batch, state));
    }
  }
  model.threshold = tail_threshold(row_norms(model.encode(data.x)), model.config.kappa);
  return history;
}

LhtrModel train_lhtr(const LabeledDataset& data, const LhtrConfig& config, std::uint64_t seed) {
  data.validate();
  LhtrModel model = init_model(config, data.dimension(), seed);
  fit_lhtr(model, data, seed);
  return model;
}

int predict_combined(const LhtrModel& model, std::span<const double> x) {
  const auto z = model.encode(x);
  const nn::Mlp& head = model.is_extreme(z) ? model.ext : model.bulk_head();
  return head.probability(z) > 0.5 ? 1 : -1;
}

int predict_hybrid(const LhtrModel& model, const LabelFn& external, std::span<const double> x) {
  const auto z = model.encode(x);
  if (model.is_extreme(z)) return model.ext.probability(z) > 0.5 ? 1 : -1;
  return external(x);
}

}  // namespace tailrep::lhtr

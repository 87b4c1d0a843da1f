#include "tailrep/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tailrep/error.hpp"
#include "tailrep/evt.hpp"
#include "tailrep/json_io.hpp"

namespace tailrep::augment {
namespace {

void check_lambdas(std::span<const double> lambdas) {
  for (double l : lambdas) {
    if (!(l >= 1.0)) throw DomainError("scale factors must be >= 1");
  }
}

std::vector<double> scaled(std::span<const double> z, double lambda) {
  std::vector<double> out(z.begin(), z.end());
  for (double& v : out) v *= lambda;
  return out;
}

}  // namespace

void SequenceDataset::validate() const {
  if (vocab < 4) throw DomainError("vocabulary needs at least 4 tokens");
  if (t_max < 1) throw DomainError("t_max must be positive");
  if (x.rows() != sequences.size() || labels.size() != sequences.size()) {
    throw DomainError("embeddings, labels and sequences differ in count");
  }
  for (const auto& s : sequences) {
    if (s.size() > t_max) throw DomainError("sequence longer than t_max");
    for (int tok : s) {
      if (tok < 0 || static_cast<std::size_t>(tok) >= vocab) throw DomainError("token id out of range");
    }
  }
}

std::vector<double> ToyDecoder::step_input(std::span<const double> z, int previous) const {
  if (z.size() != latent_dim()) throw DomainError("latent code has the wrong dimension");
  std::vector<double> in(z.begin(), z.end());
  in.resize(z.size() + vocab, 0.0);
  in[z.size() + static_cast<std::size_t>(previous)] = 1.0;
  return in;
}

std::vector<double> ToyDecoder::step_logits(std::span<const double> z, int previous) const {
  return step.logits(step_input(z, previous));
}

ToyDecoder init_decoder(std::size_t latent_dim, std::size_t vocab, std::size_t t_max,
                        std::span<const std::size_t> hidden, std::uint64_t seed) {
  if (vocab < 4) throw DomainError("vocabulary needs at least 4 tokens");
  if (t_max < 1) throw DomainError("t_max must be positive");
  std::vector<std::size_t> sizes{latent_dim + vocab};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(vocab);
  return {nn::Mlp::init(sizes, nn::Head::kIdentity, seed), vocab, t_max};
}

std::vector<double> softmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) total += p[i] = std::exp(logits[i] - mx);
  for (double& v : p) v /= total;
  return p;
}

namespace {

double log_softmax_at(std::span<const double> logits, int index) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double v : logits) total += std::exp(v - mx);
  return logits[static_cast<std::size_t>(index)] - mx - std::log(total);
}

}  // namespace

std::size_t scored_length(std::span<const int> target) {
  const auto stop = std::find(target.begin(), target.end(), kStop);
  return stop == target.end() ? target.size() : static_cast<std::size_t>(stop - target.begin()) + 1;
}

double sequence_nll(std::span<const std::vector<double>> logits, std::span<const int> target, std::size_t t_max) {
  if (target.size() > t_max) throw DomainError("target longer than t_max");
  const std::size_t len = scored_length(target);
  if (logits.size() < len) throw DomainError("fewer step logits than target tokens");
  double nll = 0.0;
  for (std::size_t t = 0; t < len; ++t) nll -= log_softmax_at(logits[t], target[t]);
  return nll;
}

double teacher_forced_nll(const ToyDecoder& decoder, std::span<const double> z, std::span<const int> target) {
  const std::size_t len = scored_length(target);
  std::vector<std::vector<double>> logits(len);
  int prev = kStart;
  for (std::size_t t = 0; t < len; ++t) {
    logits[t] = decoder.step_logits(z, prev);
    prev = target[t];
  }
  return sequence_nll(logits, target, decoder.t_max);
}

double teacher_forced_gradient(const ToyDecoder& decoder, std::span<const double> z, std::span<const int> target,
                               double weight, std::span<double> grad) {
  if (target.size() > decoder.t_max) throw DomainError("target longer than t_max");
  const std::size_t len = scored_length(target);
  double nll = 0.0;
  int prev = kStart;
  for (std::size_t t = 0; t < len; ++t) {
    const nn::Tape tape = decoder.step.forward_tape(decoder.step_input(z, prev), nullptr);
    nll -= log_softmax_at(tape.logits, target[t]);
    std::vector<double> g = softmax(tape.logits);
    g[static_cast<std::size_t>(target[t])] -= 1.0;
    for (double& v : g) v *= weight;
    decoder.step.backward(tape, g, grad);
    prev = target[t];
  }
  return weight * nll;
}

double uniform_nll(std::span<const Sequence> sequences, std::size_t vocab) {
  double total = 0.0;
  for (const auto& s : sequences) total += static_cast<double>(scored_length(s)) * std::log(static_cast<double>(vocab));
  return total;
}

void DecoderConfig::validate() const {
  if (!(kappa > 0.0 && kappa <= 1.0)) throw DomainError("decoder kappa must lie in (0, 1]");
  if (!(rho_ext > 0.0)) throw DomainError("rho_1 must be positive");
  optim.validate();
  if (static_cast<std::size_t>(std::floor(kappa * static_cast<double>(optim.batch_size))) < 1) {
    throw DomainError("floor(kappa * batch) must be >= 1");
  }
}

ToyDecoder train_decoder(const nn::Mlp& encoder, const SequenceDataset& data, const DecoderConfig& config,
                         std::uint64_t seed) {
  config.validate();
  data.validate();
  if (data.size() == 0) throw DomainError("empty sequence dataset");
  if (data.x.cols() != encoder.input_dim()) throw DomainError("embedding dimension does not match the encoder");

  const RngStream root(seed);
  RngStream init = root.derive(nn::stream::kInit);
  RngStream shuffle = root.derive(nn::stream::kShuffle);
  ToyDecoder decoder = init_decoder(encoder.output_dim(), data.vocab, data.t_max, config.hidden, init.next_u64());
  const Matrix codes = [&] {
    Matrix z(data.size(), encoder.output_dim());
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto zi = encoder.forward(data.x.row(i));
      std::copy(zi.begin(), zi.end(), z.row(i).begin());
    }
    return z;
  }();
  const std::vector<double> norms = row_norms(codes);

  nn::OptimizerState state;
  std::vector<double> grad(decoder.step.parameter_count());
  for (std::size_t epoch = 0; epoch < config.optim.epochs; ++epoch) {
    for (const auto& batch : nn::epoch_batches(data.size(), config.optim.batch_size, shuffle)) {
      const std::size_t m = batch.size();
      const std::size_t k = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::floor(config.kappa * static_cast<double>(m))));
      std::vector<std::size_t> order(batch.begin(), batch.end());
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return norms[a] > norms[b]; });
      std::fill(grad.begin(), grad.end(), 0.0);
      const double w = config.rho_ext / static_cast<double>(k);
      for (std::size_t r = 0; r < k; ++r) {
        teacher_forced_gradient(decoder, codes.row(order[r]), data.sequences[order[r]], w, grad);
      }
      nn::optim_step(decoder.step, grad, config.optim, state);
    }
  }
  return decoder;
}

Sequence greedy_decode(const ToyDecoder& decoder, std::span<const double> z) {
  Sequence out;
  int prev = kStart;
  while (out.size() < decoder.t_max) {
    const auto logits = decoder.step_logits(z, prev);
    prev = static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    out.push_back(prev);
    if (prev == kStop) break;
  }
  return out;
}

std::vector<Sequence> generate_scaled(const ToyDecoder& decoder, const nn::Mlp& encoder, std::span<const double> x,
                                      std::span<const double> lambdas) {
  check_lambdas(lambdas);
  const auto z = encoder.forward(x);
  std::vector<Sequence> out;
  out.reserve(lambdas.size());
  for (double l : lambdas) out.push_back(greedy_decode(decoder, scaled(z, l)));
  return out;
}

std::vector<double> lambda_grid(double lo, double hi, std::size_t m) {
  if (m == 0) throw DomainError("empty scale grid");
  if (!(lo >= 1.0 && hi >= lo)) throw DomainError("scale grid needs 1 <= lo <= hi");
  if (m == 1) return {lo};
  std::vector<double> out(m);
  for (std::size_t j = 0; j < m; ++j) out[j] = lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(m - 1);
  return out;
}

double label_preservation_audit(const nn::Mlp& classifier, const nn::Mlp& encoder, const Matrix& points,
                                std::span<const double> lambdas) {
  if (points.rows() == 0 || lambdas.empty()) throw DomainError("preservation audit needs points and scales");
  check_lambdas(lambdas);
  std::size_t kept = 0;
  for (std::size_t i = 0; i < points.rows(); ++i) {
    const auto z = encoder.forward(points.row(i));
    const bool base = classifier.probability(z) > 0.5;
    for (double l : lambdas) kept += (classifier.probability(scaled(z, l)) > 0.5) == base;
  }
  return static_cast<double>(kept) / static_cast<double>(points.rows() * lambdas.size());
}

std::string decoder_to_json_string(const ToyDecoder& decoder) {
  OrderedJson j;
  j["format"] = "tailrep.decoder";
  j["version"] = 1;
  j["vocab"] = decoder.vocab;
  j["t_max"] = decoder.t_max;
  j["step"] = nn::mlp_to_json(decoder.step);
  return j.dump(1) + "\n";
}

ToyDecoder decoder_from_json_string(const std::string& text) {
  try {
    const Json j = Json::parse(text);
    if (j.at("format").get<std::string>() != "tailrep.decoder") throw ParseError("not a decoder document", 0);
    ToyDecoder d{nn::mlp_from_json(j.at("step")), j.at("vocab").get<std::size_t>(), j.at("t_max").get<std::size_t>()};
    if (d.step.output_dim() != d.vocab || d.step.input_dim() <= d.vocab) {
      throw ParseError("decoder step network does not match the vocabulary", 0);
    }
    return d;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("malformed decoder document: ") + e.what(), 0);
  }
}

void save_decoder(const ToyDecoder& decoder, const std::string& path) {
  write_text_file(path, decoder_to_json_string(decoder));
}

ToyDecoder load_decoder(const std::string& path) { return decoder_from_json_string(read_text_file(path)); }

}  // namespace tailrep::augment

#include "tailrep/experiments.hpp"

#include <algorithm>
#include <cmath>

#include "tailrep/data_io.hpp"
#include "tailrep/diagnostics.hpp"
#include "tailrep/error.hpp"
#include "tailrep/evt.hpp"

namespace tailrep::experiments {
namespace {

std::string role(bool extreme) { return extreme ? "extreme" : "bulk"; }

// CSV point cloud with class and role columns.
std::string scatter_csv(const Matrix& points, std::span<const int> labels, const std::vector<bool>& extreme) {
  std::string out;
  for (std::size_t j = 0; j < points.cols(); ++j) out += "x" + std::to_string(j + 1) + ",";
  out += "label,role\n";
  for (std::size_t i = 0; i < points.rows(); ++i) {
    for (double v : points.row(i)) out += format_double(v) + ",";
    out += std::to_string(labels[i]) + "," + role(extreme[i]) + "\n";
  }
  return out;
}

std::vector<bool> mask(std::size_t n, std::span<const std::size_t> indices) {
  std::vector<bool> m(n, false);
  for (auto i : indices) m[i] = true;
  return m;
}

std::vector<int> labels_at(const LabeledDataset& d, std::span<const std::size_t> idx) {
  std::vector<int> out;
  for (auto i : idx) out.push_back(d.y[i]);
  return out;
}

LabelFn sigmoid_label(const nn::Mlp& net) {
  return [&net](std::span<const double> v) { return net.probability(v) > 0.5 ? 1 : -1; };
}

LabelFn baseline_label(const Baseline& b) {
  return [&b](std::span<const double> v) { return b.predict(v); };
}

std::vector<std::size_t> complement(std::size_t n, std::span<const std::size_t> idx) {
  const auto m = mask(n, idx);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (!m[i]) out.push_back(i);
  }
  return out;
}

void put_rv(DiagnosticReport& r, const std::string& name, const diag::RvReport& rv) {
  std::vector<double> ps;
  for (const auto& p : rv.pvalues) {
    if (p) ps.push_back(*p);
  }
  r.pvalues[name] = ps;
  if (!ps.empty()) r.scalars[name + "_median_p"] = rv.median_pvalue;
  auto& hist = r.series[name + "_histogram"];
  for (std::size_t b = 0; b < rv.histogram.size(); ++b) hist.emplace_back(0.05 + 0.1 * static_cast<double>(b), static_cast<double>(rv.histogram[b]));
}

struct Split {
  LabeledDataset train, test;
};

Split toy_split(const ExperimentConfig& config, std::uint64_t seed) {
  auto [train, test] = split_head(data::gen_gaussian_mixture(data::MixtureSpec::toy(), config.n_total, seed), config.n_train);
  return {std::move(train), std::move(test)};
}

double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

ExperimentConfig::ExperimentConfig() {
  for (int l = 1; l <= 20; ++l) barcode_lambdas.push_back(l);
  for (int j = 0; j <= 8; ++j) curve_lambdas.push_back(1.0 + 0.25 * j);
  decoder.optim = {nn::OptimizerKind::kAdamW, 5e-3, 0.0, 64, 200};
}

void ExperimentConfig::validate() const {
  lhtr.validate();
  if (n_total == 0 || n_train == 0 || n_train >= n_total) throw DomainError("need 0 < n_train < n_total");
  if (barcode_lambdas.empty() || curve_lambdas.empty()) throw DomainError("scale grids must be nonempty");
  if (!std::is_sorted(barcode_lambdas.begin(), barcode_lambdas.end()) || barcode_lambdas.front() < 1.0 ||
      !std::is_sorted(curve_lambdas.begin(), curve_lambdas.end()) || curve_lambdas.front() < 1.0) {
    throw DomainError("scale grids must be ascending and >= 1");
  }
  if (comparison_runs == 0) throw DomainError("comparison needs at least one run");
  if (generations == 0) throw DomainError("generation count must be positive");
  if (!(lambda_min >= 1.0 && lambda_max >= lambda_min)) throw DomainError("need 1 <= lambda-min <= lambda-max");
  decoder.validate();
}

double minority_fraction(std::span<const int> labels) {
  if (labels.empty()) throw DomainError("minority fraction of an empty set");
  const auto pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  return static_cast<double>(std::min(pos, labels.size() - pos)) / static_cast<double>(labels.size());
}

Baseline train_baseline(const LabeledDataset& train, const ExperimentConfig& config, std::uint64_t seed) {
  std::vector<std::size_t> enc = config.lhtr.encoder_sizes;
  enc.front() = train.dimension();
  RngStream init = RngStream(seed).derive(nn::stream::kInit);
  Baseline b;
  b.chain.push_back(nn::Mlp::init(enc, nn::Head::kIdentity, init.next_u64(), config.lhtr.dropout));
  b.chain.push_back(nn::Mlp::init(config.lhtr.classifier_sizes, nn::Head::kSigmoid, init.next_u64(), config.lhtr.dropout));
  nn::fit_chain(b.chain, train, config.lhtr.optim, seed);
  return b;
}

Artifacts run_toy_experiment(const ExperimentConfig& config) {
  config.validate();
  const double kappa = config.lhtr.kappa;
  const auto [train, test] = toy_split(config, config.seed);
  const lhtr::LhtrModel model = lhtr::train_lhtr(train, config.lhtr, config.seed);

  Artifacts out;
  auto& r = out.report;
  r.meta = {{"experiment", "toy"}, {"seed", config.seed}, {"kappa", kappa}, {"dataset", "gaussian-mixture"},
            {"n_train", train.size()}, {"n_test", test.size()}};

  // Input-space extremes after rank standardization.
  const RankTransformer rt = RankTransformer::fit(train.x);
  const auto input_norms = row_norms(rt.apply(train.x));
  const TailThreshold input_th = tail_threshold(input_norms, kappa);
  const auto input_ext = select_extremes(input_norms, input_th.t);

  const Matrix z_train = model.encode(train.x);
  const auto latent_norms = row_norms(z_train);
  const auto latent_ext = select_extremes(latent_norms, model.threshold.t);

  out.files["input_scatter_input_extremes.csv"] = scatter_csv(train.x, train.y, mask(train.size(), input_ext));
  out.files["latent_scatter.csv"] = scatter_csv(z_train, train.y, mask(train.size(), latent_ext));
  out.files["input_scatter_latent_extremes.csv"] = scatter_csv(train.x, train.y, mask(train.size(), latent_ext));

  r.scalars["input_extremes_k"] = static_cast<double>(input_th.k);
  r.scalars["input_extremes_selected"] = static_cast<double>(input_ext.size());
  r.scalars["latent_extremes_k"] = static_cast<double>(model.threshold.k);
  r.scalars["latent_extremes_selected"] = static_cast<double>(latent_ext.size());
  r.scalars["latent_threshold"] = model.threshold.t;
  r.scalars["minority_fraction_input_extremes"] = minority_fraction(labels_at(train, input_ext));
  r.scalars["minority_fraction_latent_extremes"] = minority_fraction(labels_at(train, latent_ext));
  r.scalars["minority_fraction_train"] = minority_fraction(train.y);

  RngStream audit_seeds = RngStream(config.seed).derive(5);
  put_rv(r, "latent_rv", diag::rv_report(z_train, kappa, diag::CorrMethod::kPearson, config.permutations, audit_seeds.next_u64()));
  const auto dependent = data::gen_dependent_embedding(config.dependent_n, 2, config.seed);
  put_rv(r, "dependent_rv", diag::rv_report(dependent.x, kappa, diag::CorrMethod::kPearson, config.permutations, audit_seeds.next_u64()));

  // Scale barcodes on latent-extreme test points.
  const Matrix z_test = model.encode(test.x);
  const auto test_norms = row_norms(z_test);
  const auto test_ext = select_extremes(test_norms, model.threshold.t);
  const LabeledDataset test_ext_x = test.subset(test_ext);
  const Matrix z_test_ext = z_test.select_rows(test_ext);
  r.scalars["test_extremes"] = static_cast<double>(test_ext.size());

  const Baseline baseline = train_baseline(train, config, config.seed);
  const auto train_ext_set = LabeledDataset{z_train.select_rows(latent_ext), labels_at(train, latent_ext)};
  const AngularClassifier tail_erm = fit_tail_erm(train_ext_set, TailErmConfig{}, config.seed);

  if (!test_ext.empty()) {
    r.scalars["barcode_constancy_ext"] = diag::barcode_constancy(sigmoid_label(model.ext), z_test_ext, config.barcode_lambdas);
    r.scalars["barcode_constancy_nn"] = diag::barcode_constancy(baseline_label(baseline), test_ext_x.x, config.barcode_lambdas);
    r.scalars["barcode_constancy_tail_erm"] = diag::barcode_constancy(tail_erm.as_label_fn(), z_test_ext, config.barcode_lambdas);
    std::string barcodes = "index";
    for (double l : config.barcode_lambdas) barcodes += ",lambda_" + format_double(l);
    barcodes += "\n";
    for (std::size_t i = 0; i < test_ext.size(); ++i) {
      barcodes += std::to_string(test_ext[i]);
      for (int b : diag::scale_barcode(sigmoid_label(model.ext), z_test_ext.row(i), config.barcode_lambdas)) {
        barcodes += "," + std::to_string(b);
      }
      barcodes += "\n";
    }
    out.files["scale_barcodes.csv"] = barcodes;
  }

  const auto bulk_idx = complement(test.size(), test_ext);
  auto combined = [&model](std::span<const double> x) { return lhtr::predict_combined(model, x); };
  if (!test_ext.empty()) r.scalars["test_loss_extreme"] = empirical_risk(combined, test_ext_x);
  if (!bulk_idx.empty()) r.scalars["test_loss_bulk"] = empirical_risk(combined, test.subset(bulk_idx));
  r.scalars["test_loss_overall"] = empirical_risk(combined, test);
  return out;
}

Artifacts run_comparison(const ExperimentConfig& config) {
  config.validate();
  Artifacts out;
  auto& r = out.report;
  r.meta = {{"experiment", "comparison"}, {"seed", config.seed}, {"kappa", config.lhtr.kappa},
            {"dataset", "gaussian-mixture"}, {"runs", config.comparison_runs}};
  const std::vector<std::string> names{"nn", "lhtr1", "lhtr"};
  std::map<std::string, std::vector<std::vector<double>>> curves;
  std::map<std::string, std::vector<double>> ext_loss, bulk_loss, overall_loss;
  std::vector<double> hybrid_loss, ext_only_loss;
  std::string table = "run,model,extreme_loss,bulk_loss,overall_loss,extreme_fraction\n";

  for (std::size_t run = 0; run < config.comparison_runs; ++run) {
    const std::uint64_t seed = config.seed + run;
    const auto [train, test] = toy_split(config, seed);
    lhtr::LhtrConfig single = config.lhtr;
    single.mode = lhtr::HeadMode::kSingleHead;
    const lhtr::LhtrModel two_head = lhtr::train_lhtr(train, config.lhtr, seed);
    const lhtr::LhtrModel one_head = lhtr::train_lhtr(train, single, seed);
    const Baseline baseline = train_baseline(train, config, seed);

    // Common evaluation set: extremes of the two-head representation.
    const auto norms = row_norms(two_head.encode(test.x));
    const auto ext_idx = select_extremes(norms, two_head.threshold.t);
    const auto bulk_idx = complement(test.size(), ext_idx);
    const double frac = static_cast<double>(ext_idx.size()) / static_cast<double>(test.size());

    const std::map<std::string, LabelFn> predictors{
        {"nn", baseline_label(baseline)},
        {"lhtr1", [&](std::span<const double> x) { return lhtr::predict_combined(one_head, x); }},
        {"lhtr", [&](std::span<const double> x) { return lhtr::predict_combined(two_head, x); }},
    };
    for (const auto& name : names) {
      const LabelFn& f = predictors.at(name);
      const double e = ext_idx.empty() ? 0.0 : empirical_risk(f, test.subset(ext_idx));
      const double b = bulk_idx.empty() ? 0.0 : empirical_risk(f, test.subset(bulk_idx));
      const double o = empirical_risk(f, test);
      ext_loss[name].push_back(e);
      bulk_loss[name].push_back(b);
      overall_loss[name].push_back(o);
      table += std::to_string(run) + "," + name + "," + format_double(e) + "," + format_double(b) + "," +
               format_double(o) + "," + format_double(frac) + "\n";
      std::vector<double> curve;
      for (const auto& pt : diag::tail_loss_curve(f, test, norms, two_head.threshold.t, config.curve_lambdas)) {
        curve.push_back(pt.loss);
      }
      curves[name].push_back(std::move(curve));
    }
    const LabelFn nn_fn = predictors.at("nn");
    const LabelFn hybrid = [&](std::span<const double> x) { return lhtr::predict_hybrid(two_head, nn_fn, x); };
    const double h = empirical_risk(hybrid, test);
    hybrid_loss.push_back(h);
    const double he = ext_idx.empty() ? 0.0 : empirical_risk(hybrid, test.subset(ext_idx));
    const double hb = bulk_idx.empty() ? 0.0 : empirical_risk(hybrid, test.subset(bulk_idx));
    table += std::to_string(run) + ",hybrid," + format_double(he) + "," + format_double(hb) + "," + format_double(h) +
             "," + format_double(frac) + "\n";
    // C_ext on every point, the counterpart of the bulk-only NN model.
    const double eo = empirical_risk(
        [&](std::span<const double> x) { return two_head.ext.probability(two_head.encode(x)) > 0.5 ? 1 : -1; }, test);
    ext_only_loss.push_back(eo);
    r.scalars["run" + std::to_string(run) + "_ext_only_overall_loss"] = eo;
    r.scalars["run" + std::to_string(run) + "_hybrid_overall_loss"] = h;
    r.scalars["run" + std::to_string(run) + "_hybrid_extreme_loss"] = he;
    r.scalars["run" + std::to_string(run) + "_hybrid_bulk_loss"] = hb;
    r.scalars["run" + std::to_string(run) + "_extreme_fraction"] = frac;
  }

  for (const auto& name : names) {
    r.scalars[name + "_median_extreme_loss"] = diag::median(ext_loss[name]);
    r.scalars[name + "_median_bulk_loss"] = diag::median(bulk_loss[name]);
    r.scalars[name + "_median_overall_loss"] = diag::median(overall_loss[name]);
    // Median curve over runs, cut to the shortest run.
    std::size_t len = config.curve_lambdas.size();
    for (const auto& c : curves[name]) len = std::min(len, c.size());
    auto& s = r.series["tail_loss_" + name];
    for (std::size_t j = 0; j < len; ++j) {
      std::vector<double> at;
      for (const auto& c : curves[name]) at.push_back(c[j]);
      s.emplace_back(config.curve_lambdas[j], diag::median(at));
    }
    for (std::size_t run = 0; run < config.comparison_runs; ++run) {
      r.scalars["run" + std::to_string(run) + "_" + name + "_extreme_loss"] = ext_loss[name][run];
    }
  }
  r.scalars["hybrid_median_overall_loss"] = diag::median(hybrid_loss);
  r.scalars["ext_only_median_overall_loss"] = diag::median(ext_only_loss);
  out.files["loss_table.csv"] = table;
  return out;
}

Artifacts run_augmentation(const ExperimentConfig& config, const std::optional<lhtr::LhtrModel>& given_model,
                           const std::optional<augment::ToyDecoder>& given_decoder) {
  config.validate();
  const auto [train, test] = toy_split(config, config.seed);
  const lhtr::LhtrModel model = given_model ? *given_model : lhtr::train_lhtr(train, config.lhtr, config.seed);
  if (model.encoder.input_dim() != train.dimension()) throw DomainError("model input dimension does not match the data");

  const auto seqs = data::gen_latent_sequences(model.encoder, train, config.vocab, config.t_max);
  augment::DecoderConfig dcfg = config.decoder;
  dcfg.kappa = config.lhtr.kappa;
  dcfg.rho_ext = model.weights.ext;
  const augment::ToyDecoder decoder = given_decoder ? *given_decoder : augment::train_decoder(model.encoder, seqs, dcfg, config.seed);

  Artifacts out;
  auto& r = out.report;
  r.meta = {{"experiment", "augmentation"}, {"seed", config.seed}, {"kappa", config.lhtr.kappa},
            {"dataset", "gaussian-mixture"}, {"vocab", config.vocab}, {"t_max", config.t_max}};

  const Matrix z_train = model.encode(train.x);
  const auto ext_idx = select_extremes(row_norms(z_train), model.threshold.t);
  if (ext_idx.empty()) throw DomainError("no extreme training points");

  double nll = 0.0;
  std::vector<augment::Sequence> targets;
  for (auto i : ext_idx) {
    nll += augment::teacher_forced_nll(decoder, z_train.row(i), seqs.sequences[i]);
    targets.push_back(seqs.sequences[i]);
  }
  const double uniform = augment::uniform_nll(targets, config.vocab);
  r.scalars["decoder_nll_extremes"] = nll;
  r.scalars["uniform_nll_extremes"] = uniform;
  r.scalars["decoder_nll_ratio"] = nll / uniform;

  const auto lambdas = augment::lambda_grid(config.lambda_min, config.lambda_max, config.generations);
  std::vector<augment::Sequence> generated;
  std::string corpus = "source,lambda,tokens,preserved\n";
  LabeledDataset augmented{z_train.select_rows(ext_idx), labels_at(train, ext_idx)};
  bool all_counts_ok = true;
  for (auto i : ext_idx) {
    const auto seqs_i = augment::generate_scaled(decoder, model.encoder, train.x.row(i), lambdas);
    all_counts_ok = all_counts_ok && seqs_i.size() == config.generations;
    const auto z = z_train.row(i);
    const bool base = model.ext.probability(z) > 0.5;
    for (std::size_t j = 0; j < lambdas.size(); ++j) {
      std::vector<double> zl(z.begin(), z.end());
      for (double& v : zl) v *= lambdas[j];
      const bool kept = (model.ext.probability(zl) > 0.5) == base;
      std::string toks;
      for (std::size_t t = 0; t < seqs_i[j].size(); ++t) toks += (t ? " " : "") + std::to_string(seqs_i[j][t]);
      corpus += std::to_string(i) + "," + format_double(lambdas[j]) + "," + toks + "," + (kept ? "1" : "0") + "\n";
      generated.push_back(seqs_i[j]);
      augmented.x.append_row(zl);
      augmented.y.push_back(train.y[i]);
    }
  }
  out.files["generated.csv"] = corpus;
  r.scalars["generated_sequences"] = static_cast<double>(generated.size());
  r.scalars["generations_per_point_ok"] = all_counts_ok ? 1.0 : 0.0;
  r.scalars["dist1"] = diag::distinct_n(generated, 1);
  r.scalars["dist2"] = diag::distinct_n(generated, 2);
  r.scalars["label_preservation"] =
      augment::label_preservation_audit(model.ext, model.encoder, train.x.select_rows(ext_idx), lambdas);

  // Tail classifier on raw versus augmented extreme codes, scored on test extremes.
  const Matrix z_test = model.encode(test.x);
  const auto test_ext = select_extremes(row_norms(z_test), model.threshold.t);
  if (!test_ext.empty()) {
    const LabeledDataset raw{z_train.select_rows(ext_idx), labels_at(train, ext_idx)};
    const Matrix zt = z_test.select_rows(test_ext);
    const auto yt = labels_at(test, test_ext);
    auto f1_of = [&](const AngularClassifier& g) {
      std::vector<int> pred;
      for (std::size_t i = 0; i < zt.rows(); ++i) pred.push_back(g.predict(zt.row(i)));
      return diag::f1_score(pred, yt, 1);
    };
    r.scalars["f1_raw"] = f1_of(fit_tail_erm(raw, TailErmConfig{}, config.seed));
    r.scalars["f1_augmented"] = f1_of(fit_tail_erm(augmented, TailErmConfig{}, config.seed));
  }
  std::vector<double> mean_len;
  for (const auto& s : generated) mean_len.push_back(static_cast<double>(s.size()));
  r.scalars["mean_generated_length"] = mean(mean_len);
  return out;
}

OrderedJson experiment_config_to_json(const ExperimentConfig& c) {
  OrderedJson j;
  j["seed"] = c.seed;
  j["lhtr"] = lhtr::config_to_json(c.lhtr);
  j["n_total"] = c.n_total;
  j["n_train"] = c.n_train;
  j["permutations"] = c.permutations;
  j["dependent_n"] = c.dependent_n;
  j["barcode_lambdas"] = c.barcode_lambdas;
  j["curve_lambdas"] = c.curve_lambdas;
  j["comparison_runs"] = c.comparison_runs;
  j["vocab"] = c.vocab;
  j["t_max"] = c.t_max;
  j["generations"] = c.generations;
  j["lambda_min"] = c.lambda_min;
  j["lambda_max"] = c.lambda_max;
  j["decoder"] = {{"hidden", c.decoder.hidden}, {"optim", nn::optim_to_json(c.decoder.optim)}};
  return j;
}

ExperimentConfig experiment_config_from_json(const Json& j, std::size_t input_dim) {
  try {
    ExperimentConfig c;
    c.seed = j.value("seed", c.seed);
    if (j.contains("lhtr")) c.lhtr = lhtr::config_from_json(j["lhtr"], input_dim);
    c.n_total = j.value("n_total", c.n_total);
    c.n_train = j.value("n_train", c.n_train);
    c.permutations = j.value("permutations", c.permutations);
    c.dependent_n = j.value("dependent_n", c.dependent_n);
    if (j.contains("barcode_lambdas")) c.barcode_lambdas = j["barcode_lambdas"].get<std::vector<double>>();
    if (j.contains("curve_lambdas")) c.curve_lambdas = j["curve_lambdas"].get<std::vector<double>>();
    c.comparison_runs = j.value("comparison_runs", c.comparison_runs);
    c.vocab = j.value("vocab", c.vocab);
    c.t_max = j.value("t_max", c.t_max);
    c.generations = j.value("generations", c.generations);
    c.lambda_min = j.value("lambda_min", c.lambda_min);
    c.lambda_max = j.value("lambda_max", c.lambda_max);
    if (j.contains("decoder")) {
      const auto& d = j["decoder"];
      if (d.contains("hidden")) c.decoder.hidden = d["hidden"].get<std::vector<std::size_t>>();
      if (d.contains("optim")) c.decoder.optim = nn::optim_from_json(d["optim"], c.decoder.optim);
    }
    return c;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("malformed experiment config: ") + e.what(), 0);
  }
}

}  // namespace tailrep::experiments

// tailrep: command-line front end for heavy-tailed representation learning,
// tail classification, diagnostics and latent augmentation.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tailrep/augment.hpp"
#include "tailrep/data_io.hpp"
#include "tailrep/diagnostics.hpp"
#include "tailrep/error.hpp"
#include "tailrep/experiments.hpp"
#include "tailrep/heavy_tails.hpp"
#include "tailrep/json_io.hpp"
#include "tailrep/lhtr.hpp"
#include "tailrep/report.hpp"
#include "tailrep/simd/kernels.hpp"

namespace fs = std::filesystem;
using namespace tailrep;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  std::string config;
};

std::string in_dir(const Globals& g, const std::string& name) { return (fs::path(g.out_dir) / name).string(); }

Json load_config(const Globals& g) {
  if (g.config.empty()) return Json::object();
  try {
    return Json::parse(read_text_file(g.config));
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("invalid config JSON: ") + e.what(), 0);
  }
}

// Everything needed to repeat the run: argv, seed, effective config and the
// kernel set (reductions round differently per instruction set).
void write_manifest(const Globals& g, const std::string& command, const std::vector<std::string>& argv,
                    const OrderedJson& effective, const std::vector<std::string>& outputs) {
  OrderedJson m;
  m["tool"] = "tailrep";
  m["version"] = TAILREP_VERSION;
  m["command"] = command;
  m["argv"] = argv;
  m["seed"] = g.seed;
  m["isa"] = simd::active().name;
  m["config"] = effective;
  m["outputs"] = outputs;
  write_text_file(in_dir(g, command + ".manifest.json"), m.dump(1) + "\n");
}

std::vector<double> parse_lambdas(const std::string& spec) {
  // "a:b" -> a, a+1, ..., b ; "a:b:m" -> m points on [a, b] ; else comma list
  std::vector<double> out;
  const auto c1 = spec.find(':');
  if (c1 != std::string::npos) {
    const auto c2 = spec.find(':', c1 + 1);
    const double lo = std::stod(spec.substr(0, c1));
    if (c2 == std::string::npos) {
      const double hi = std::stod(spec.substr(c1 + 1));
      for (double l = lo; l <= hi + 1e-9; l += 1.0) out.push_back(l);
    } else {
      const double hi = std::stod(spec.substr(c1 + 1, c2 - c1 - 1));
      out = augment::lambda_grid(lo, hi, std::stoul(spec.substr(c2 + 1)));
    }
  } else {
    std::stringstream in(spec);
    for (std::string tok; std::getline(in, tok, ',');) out.push_back(std::stod(tok));
  }
  if (out.empty()) throw DomainError("empty scale grid '" + spec + "'");
  return out;
}

void write_report(const DiagnosticReport& r, const std::string& path) { write_text_file(path, r.to_json_string()); }

void write_artifacts(const Globals& g, const experiments::Artifacts& a, const std::string& report_name,
                     std::vector<std::string>& outputs) {
  fs::create_directories(g.out_dir);
  write_report(a.report, in_dir(g, report_name));
  outputs.push_back(report_name);
  for (const auto& [name, text] : a.files) {
    write_text_file(in_dir(g, name), text);
    outputs.push_back(name);
  }
  for (const auto& [name, series] : a.report.series) {
    (void)series;
    const std::string file = "series_" + name + ".csv";
    write_text_file(in_dir(g, file), a.report.series_csv(name));
    outputs.push_back(file);
  }
}

OrderedJson dataset_meta(const std::string& path, const LabeledDataset& d) {
  return {{"path", path}, {"n", d.size()}, {"d", d.dimension()}};
}

void print_error(const std::string& type, const std::string& message, std::optional<std::size_t> line = {}) {
  OrderedJson e{{"error", {{"type", type}, {"message", message}}}};
  if (line) e["error"]["line"] = *line;
  std::cerr << e.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tailrep: heavy-tailed representations for tail classification"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Seed for every random stream")->capture_default_str();
  app.add_option("--out-dir", g.out_dir, "Directory for manifests and artifacts")->capture_default_str();
  app.add_option("--config", g.config, "JSON configuration file");

  std::vector<std::string> args(argv + 1, argv + argc);
  std::vector<std::string> outputs;
  OrderedJson effective = OrderedJson::object();

  // sample-logistic
  auto* sl = app.add_subcommand("sample-logistic", "Draw from the multivariate logistic model");
  std::size_t sl_d = 2, sl_n = 1000;
  double sl_delta = 0.9;
  std::string sl_out;
  sl->add_option("--d", sl_d, "Dimension")->capture_default_str();
  sl->add_option("--delta", sl_delta, "Dependence in (0, 1]")->capture_default_str();
  sl->add_option("--n", sl_n, "Sample size")->capture_default_str();
  sl->add_option("--out", sl_out, "Output CSV")->required();
  sl->callback([&] {
    LogisticParams p{sl_d, sl_delta};
    RngStream rng(g.seed);
    const Matrix x = sample_logistic(p, sl_n, rng);
    std::string text = "# d=" + std::to_string(sl_d) + " delta=" + format_double(sl_delta) + "\n";
    for (std::size_t i = 0; i < x.rows(); ++i) {
      for (std::size_t j = 0; j < x.cols(); ++j) text += (j ? "," : "") + format_double(x(i, j));
      text += "\n";
    }
    write_text_file(sl_out, text);
    outputs.push_back(sl_out);
    effective = {{"d", sl_d}, {"delta", sl_delta}, {"n", sl_n}};
  });

  // gen-toy
  auto* gt = app.add_subcommand("gen-toy", "Generate the two-component Gaussian mixture");
  std::size_t gt_n = data::kToySize, gt_train = data::kToyTrain;
  std::string gt_out, gt_train_out, gt_test_out;
  gt->add_option("--n", gt_n, "Sample size")->capture_default_str();
  gt->add_option("--n-train", gt_train, "Rows written to --train-out")->capture_default_str();
  gt->add_option("--out", gt_out, "Output embeddings CSV (all rows)")->required();
  gt->add_option("--train-out", gt_train_out, "Optional CSV of the first --n-train rows");
  gt->add_option("--test-out", gt_test_out, "Optional CSV of the remaining rows");
  gt->callback([&] {
    const auto d = data::gen_gaussian_mixture(data::MixtureSpec::toy(), gt_n, g.seed);
    data::save_embeddings(d, gt_out);
    outputs.push_back(gt_out);
    if (!gt_train_out.empty() || !gt_test_out.empty()) {
      const auto [train, test] = split_head(d, gt_train);
      if (!gt_train_out.empty()) {
        data::save_embeddings(train, gt_train_out);
        outputs.push_back(gt_train_out);
      }
      if (!gt_test_out.empty()) {
        data::save_embeddings(test, gt_test_out);
        outputs.push_back(gt_test_out);
      }
    }
    effective = {{"n", gt_n}, {"n_train", gt_train}};
  });

  // gen-dependent
  auto* gd = app.add_subcommand("gen-dependent", "Generate embeddings whose angle drifts with the radius");
  std::size_t gd_n = 10000, gd_d = 2;
  std::string gd_out;
  gd->add_option("--n", gd_n, "Sample size")->capture_default_str();
  gd->add_option("--d", gd_d, "Dimension (>= 2)")->capture_default_str();
  gd->add_option("--out", gd_out, "Output embeddings CSV")->required();
  gd->callback([&] {
    data::save_embeddings(data::gen_dependent_embedding(gd_n, gd_d, g.seed), gd_out);
    outputs.push_back(gd_out);
    effective = {{"n", gd_n}, {"d", gd_d}};
  });

  // gen-seqs
  auto* gs = app.add_subcommand("gen-seqs", "Derive token sequences from latent sector and norm bucket");
  std::string gs_data, gs_model, gs_out;
  std::size_t gs_vocab = 12, gs_tmax = 4;
  gs->add_option("--data", gs_data, "Embeddings CSV")->required();
  gs->add_option("--model", gs_model, "LHTR model bundle; raw embeddings are used as latents without it");
  gs->add_option("--vocab", gs_vocab, "Vocabulary size (>= 4)")->capture_default_str();
  gs->add_option("--tmax", gs_tmax, "Maximum sequence length")->capture_default_str();
  gs->add_option("--out", gs_out, "Output sequence file")->required();
  gs->callback([&] {
    const auto d = data::load_embeddings(gs_data);
    const auto seqs = gs_model.empty() ? data::gen_latent_sequences(d.x, d, gs_vocab, gs_tmax)
                                       : data::gen_latent_sequences(lhtr::load_model(gs_model).encoder, d, gs_vocab, gs_tmax);
    data::save_sequences(seqs, gs_out);
    outputs.push_back(gs_out);
    effective = {{"data", dataset_meta(gs_data, d)}, {"model", gs_model}, {"vocab", gs_vocab}, {"tmax", gs_tmax}};
  });

  // train-lhtr
  auto* tl = app.add_subcommand("train-lhtr", "Train encoder, extreme/bulk classifiers and discriminator");
  std::string tl_data, tl_out, tl_preset = "toy";
  bool tl_single = false;
  tl->add_option("--data", tl_data, "Training embeddings CSV")->required();
  tl->add_option("--out", tl_out, "Output model bundle (JSON)")->required();
  tl->add_option("--preset", tl_preset, "Architecture preset used when --config is absent")
      ->check(CLI::IsMember({"toy", "small", "large"}))
      ->capture_default_str();
  tl->add_flag("--single-head", tl_single, "One classifier for both regions");
  tl->callback([&] {
    const auto d = data::load_embeddings(tl_data);
    Json cj = load_config(g);
    if (!cj.contains("preset")) cj["preset"] = tl_preset;
    if (tl_single) cj["mode"] = "single-head";
    const auto cfg = lhtr::config_from_json(cj, d.dimension());
    lhtr::LhtrModel model = lhtr::init_model(cfg, d.dimension(), g.seed);
    const auto history = lhtr::fit_lhtr(model, d, g.seed);
    lhtr::save_model(model, tl_out);
    outputs.push_back(tl_out);
    fs::create_directories(g.out_dir);
    std::string csv = "step,discriminator_objective,ext_loss,bulk_loss,adversarial_loss\n";
    for (std::size_t s = 0; s < history.size(); ++s) {
      const auto& h = history[s];
      csv += std::to_string(s) + "," + format_double(h.discriminator_objective) + "," + format_double(h.ext_loss) + "," +
             format_double(h.bulk_loss) + "," + format_double(h.adversarial_loss) + "\n";
    }
    write_text_file(in_dir(g, "train-lhtr.history.csv"), csv);
    outputs.push_back("train-lhtr.history.csv");
    effective = {{"data", dataset_meta(tl_data, d)}, {"lhtr", lhtr::config_to_json(cfg)}};
  });

  // diagnose-rv
  auto* dr = app.add_subcommand("diagnose-rv", "Angle/radius independence audit on the largest points");
  std::string dr_data, dr_model, dr_out, dr_method = "pearson";
  double dr_kappa = 0.25;
  std::size_t dr_perm = 1000;
  dr->add_option("--data", dr_data, "Embeddings CSV")->required();
  dr->add_option("--model", dr_model, "Audit the encoded points of this model instead of the raw ones");
  dr->add_option("--kappa", dr_kappa, "Extreme fraction")->capture_default_str();
  dr->add_option("--method", dr_method, "Correlation statistic")
      ->check(CLI::IsMember({"pearson", "spearman"}))
      ->capture_default_str();
  dr->add_option("--permutations", dr_perm, "Permutations per test")->capture_default_str();
  dr->add_option("--out", dr_out, "Output report JSON")->required();
  dr->callback([&] {
    const auto d = data::load_embeddings(dr_data);
    const Matrix pts = dr_model.empty() ? d.x : lhtr::load_model(dr_model).encode(d.x);
    const auto method = dr_method == "spearman" ? diag::CorrMethod::kSpearman : diag::CorrMethod::kPearson;
    const auto rv = diag::rv_report(pts, dr_kappa, method, dr_perm, g.seed);
    DiagnosticReport r;
    r.meta = {{"command", "diagnose-rv"}, {"seed", g.seed}, {"kappa", dr_kappa}, {"dataset", dr_data},
              {"method", dr_method}, {"extremes", rv.extremes}};
    OrderedJson errors = OrderedJson::object();
    std::vector<double> ps;
    for (std::size_t j = 0; j < rv.pvalues.size(); ++j) {
      if (rv.pvalues[j]) {
        ps.push_back(*rv.pvalues[j]);
      } else {
        errors[std::to_string(j)] = rv.errors[j];
      }
    }
    r.meta["coordinate_errors"] = errors;
    r.pvalues["angle_radius"] = ps;
    if (!ps.empty()) r.scalars["median_p"] = rv.median_pvalue;
    auto& h = r.series["histogram"];
    for (std::size_t b = 0; b < 10; ++b) h.emplace_back(0.05 + 0.1 * static_cast<double>(b), static_cast<double>(rv.histogram[b]));
    write_report(r, dr_out);
    outputs.push_back(dr_out);
    effective = {{"data", dataset_meta(dr_data, d)}, {"model", dr_model}, {"kappa", dr_kappa},
                 {"method", dr_method}, {"permutations", dr_perm}};
  });

  // barcode
  auto* bc = app.add_subcommand("barcode", "Predicted labels of C_ext(lambda z) on latent-extreme points");
  std::string bc_model, bc_data, bc_out, bc_csv, bc_lambdas = "1:20";
  bc->add_option("--model", bc_model, "LHTR model bundle")->required();
  bc->add_option("--data", bc_data, "Embeddings CSV")->required();
  bc->add_option("--lambdas", bc_lambdas, "'a:b' integer steps, 'a:b:m' m points, or a comma list")->capture_default_str();
  bc->add_option("--out", bc_out, "Output report JSON")->required();
  bc->add_option("--csv", bc_csv, "Optional barcode matrix CSV");
  bc->callback([&] {
    const auto model = lhtr::load_model(bc_model);
    const auto d = data::load_embeddings(bc_data);
    const auto lambdas = parse_lambdas(bc_lambdas);
    const Matrix z = model.encode(d.x);
    const auto idx = select_extremes(row_norms(z), model.threshold.t);
    const LabelFn ext = [&](std::span<const double> v) { return model.ext.probability(v) > 0.5 ? 1 : -1; };
    DiagnosticReport r;
    r.meta = {{"command", "barcode"}, {"seed", g.seed}, {"kappa", model.config.kappa}, {"dataset", bc_data}};
    r.scalars["extremes"] = static_cast<double>(idx.size());
    std::string csv = "index";
    for (double l : lambdas) csv += ",lambda_" + format_double(l);
    csv += "\n";
    std::size_t constant = 0;
    for (auto i : idx) {
      const auto code = diag::scale_barcode(ext, z.row(i), lambdas);
      constant += diag::is_constant(code);
      csv += std::to_string(i);
      for (int b : code) csv += "," + std::to_string(b);
      csv += "\n";
    }
    if (!idx.empty()) r.scalars["constancy"] = static_cast<double>(constant) / static_cast<double>(idx.size());
    write_report(r, bc_out);
    outputs.push_back(bc_out);
    if (!bc_csv.empty()) {
      write_text_file(bc_csv, csv);
      outputs.push_back(bc_csv);
    }
    effective = {{"model", bc_model}, {"data", dataset_meta(bc_data, d)}, {"lambdas", lambdas}};
  });

  // tail-curve
  auto* tc = app.add_subcommand("tail-curve", "0/1 loss on nested latent tail subsets");
  std::string tc_model, tc_data, tc_out, tc_lambdas = "1:3:9";
  tc->add_option("--model", tc_model, "LHTR model bundle")->required();
  tc->add_option("--data", tc_data, "Labelled test embeddings CSV")->required();
  tc->add_option("--lambdas", tc_lambdas, "'a:b' integer steps, 'a:b:m' m points, or a comma list")->capture_default_str();
  tc->add_option("--out", tc_out, "Output report JSON")->required();
  tc->callback([&] {
    const auto model = lhtr::load_model(tc_model);
    const auto d = data::load_embeddings(tc_data);
    const auto lambdas = parse_lambdas(tc_lambdas);
    const auto norms = row_norms(model.encode(d.x));
    const LabelFn f = [&](std::span<const double> x) { return lhtr::predict_combined(model, x); };
    const auto curve = diag::tail_loss_curve(f, d, norms, model.threshold.t, lambdas);
    DiagnosticReport r;
    r.meta = {{"command", "tail-curve"}, {"seed", g.seed}, {"kappa", model.config.kappa}, {"dataset", tc_data},
              {"truncated", curve.size() < lambdas.size()}};
    auto& loss = r.series["tail_loss"];
    auto& count = r.series["tail_count"];
    for (const auto& p : curve) {
      loss.emplace_back(p.lambda, p.loss);
      count.emplace_back(p.lambda, static_cast<double>(p.count));
    }
    if (curve.size() < lambdas.size()) {
      std::cerr << "tail-curve: empty subset at lambda " << lambdas[curve.size()] << "; curve truncated\n";
    }
    write_report(r, tc_out);
    outputs.push_back(tc_out);
    effective = {{"model", tc_model}, {"data", dataset_meta(tc_data, d)}, {"lambdas", lambdas}};
  });

  // augment
  auto* au = app.add_subcommand("augment", "Decode lambda-scaled extreme codes");
  std::string au_model, au_decoder, au_data, au_out;
  double au_lo = 1.0, au_hi = 1.5;
  std::size_t au_m = 10;
  bool au_force = false;
  au->add_option("--model", au_model, "LHTR model bundle")->required();
  au->add_option("--decoder", au_decoder, "Decoder file; trained on --data and saved here when missing")->required();
  au->add_option("--data", au_data, "Sequence file (embeddings + token sequences)")->required();
  au->add_option("--lambda-min", au_lo, "Smallest scale")->capture_default_str();
  au->add_option("--lambda-max", au_hi, "Largest scale")->capture_default_str();
  au->add_option("--m", au_m, "Sequences per point")->capture_default_str();
  au->add_flag("--allow-bulk", au_force, "Also decode points below the model threshold (with a warning)");
  au->add_option("--out", au_out, "Output CSV")->required();
  au->callback([&] {
    const auto model = lhtr::load_model(au_model);
    const auto seqs = data::load_sequences(au_data);
    augment::DecoderConfig dcfg = experiments::ExperimentConfig{}.decoder;
    const Json cj = load_config(g);
    if (cj.contains("decoder")) {
      const auto& dj = cj["decoder"];
      if (dj.contains("hidden")) dcfg.hidden = dj["hidden"].get<std::vector<std::size_t>>();
      if (dj.contains("optim")) dcfg.optim = nn::optim_from_json(dj["optim"], dcfg.optim);
    }
    dcfg.kappa = model.config.kappa;
    dcfg.rho_ext = model.weights.ext;
    augment::ToyDecoder decoder;
    const bool trained = !fs::exists(au_decoder);
    if (trained) {
      decoder = augment::train_decoder(model.encoder, seqs, dcfg, g.seed);
      augment::save_decoder(decoder, au_decoder);
      outputs.push_back(au_decoder);
    } else {
      decoder = augment::load_decoder(au_decoder);
    }
    const auto lambdas = augment::lambda_grid(au_lo, au_hi, au_m);
    std::string csv = "source,lambda,tokens,preserved\n";
    std::size_t skipped = 0;
    for (std::size_t i = 0; i < seqs.size(); ++i) {
      const auto z = model.encode(seqs.x.row(i));
      if (!model.is_extreme(z)) {
        if (!au_force) {
          ++skipped;
          continue;
        }
        std::cerr << "augment: point " << i << " lies below the threshold\n";
      }
      const auto gen = augment::generate_scaled(decoder, model.encoder, seqs.x.row(i), lambdas);
      const bool base = model.ext.probability(z) > 0.5;
      for (std::size_t j = 0; j < lambdas.size(); ++j) {
        std::vector<double> zl = z;
        for (double& v : zl) v *= lambdas[j];
        const bool kept = (model.ext.probability(zl) > 0.5) == base;
        std::string toks;
        for (std::size_t t = 0; t < gen[j].size(); ++t) toks += (t ? " " : "") + std::to_string(gen[j][t]);
        csv += std::to_string(i) + "," + format_double(lambdas[j]) + "," + toks + "," + (kept ? "1" : "0") + "\n";
      }
    }
    write_text_file(au_out, csv);
    outputs.push_back(au_out);
    effective = {{"model", au_model}, {"decoder", au_decoder}, {"decoder_trained", trained}, {"data", au_data},
                 {"lambdas", lambdas}, {"bulk_points_skipped", skipped},
                 {"decoder_config", {{"hidden", dcfg.hidden}, {"optim", nn::optim_to_json(dcfg.optim)}}}};
  });

  // toy-experiment / compare
  auto experiment_config = [&] {
    auto cfg = experiments::experiment_config_from_json(load_config(g));
    cfg.seed = g.seed;
    return cfg;
  };
  auto* te = app.add_subcommand("toy-experiment", "Mixture data: extremes, audits, barcodes");
  te->callback([&] {
    const auto cfg = experiment_config();
    write_artifacts(g, experiments::run_toy_experiment(cfg), "toy_report.json", outputs);
    effective = experiments::experiment_config_to_json(cfg);
  });
  auto* cp = app.add_subcommand("compare", "NN model vs single-head vs two-head on tail subsets");
  cp->callback([&] {
    const auto cfg = experiment_config();
    write_artifacts(g, experiments::run_comparison(cfg), "compare_report.json", outputs);
    effective = experiments::experiment_config_to_json(cfg);
  });

  try {
    app.parse(argc, argv);
    const std::string command = app.get_subcommands().front()->get_name();
    fs::create_directories(g.out_dir);
    write_manifest(g, command, args, effective, outputs);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return 2;
  } catch (const ParseError& e) {
    print_error("parse", e.what(), e.line() ? std::optional<std::size_t>(e.line()) : std::nullopt);
    return 1;
  } catch (const DomainError& e) {
    print_error("domain", e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("runtime", e.what());
    return 1;
  }
  return 0;
}

// Acceptance checks. Run with --criterion N for one check or with no
// arguments for all of them; prints one PASS/FAIL line per criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "support.hpp"
#include "tailrep/augment.hpp"
#include "tailrep/data_io.hpp"
#include "tailrep/diagnostics.hpp"
#include "tailrep/evt.hpp"
#include "tailrep/experiments.hpp"
#include "tailrep/heavy_tails.hpp"
#include "tailrep/lhtr.hpp"
#include "tailrep/nn.hpp"

using namespace tailrep;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    detail << (ok ? "" : "[failed] ") << what << "; ";
  }
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double scalar(const DiagnosticReport& r, const std::string& key) {
  const auto it = r.scalars.find(key);
  return it == r.scalars.end() ? std::nan("") : it->second;
}

void c1(Outcome& o) {
  const std::vector<std::vector<double>> grid{{0.5, 0.5}, {1, 1}, {2, 2}, {1, 4}, {4, 1}};
  const auto frechet = [](double x) { return x > 0.0 ? std::exp(-1.0 / x) : 0.0; };
  for (const double delta : {0.1, 0.5, 0.9}) {
    RngStream rng(101);
    const auto t0 = std::chrono::steady_clock::now();
    const Matrix x = sample_logistic(LogisticParams{2, delta}, 100000, rng);
    double worst = 0.0;
    for (const auto& g : grid) {
      std::size_t below = 0;
      for (std::size_t i = 0; i < x.rows(); ++i) below += x(i, 0) <= g[0] && x(i, 1) <= g[1];
      worst = std::max(worst, std::abs(static_cast<double>(below) / 1e5 - logistic_cdf(g, delta)));
    }
    double ks = 0.0;
    for (std::size_t j = 0; j < 2; ++j) ks = std::max(ks, diag::ks_statistic(x.column(j), frechet).d);
    const double secs = seconds_since(t0);
    o.require(worst <= 0.01, "delta=" + num(delta) + " cdf err " + num(worst));
    o.require(ks <= 0.01, "delta=" + num(delta) + " margin KS " + num(ks));
    o.require(secs <= 10.0, "delta=" + num(delta) + " " + num(secs) + " s");
  }
}

void c2(Outcome& o) {
  for (const double delta : {0.1, 0.5, 0.9}) {
    RngStream rng(202);
    std::vector<double> s(100000);
    for (double& v : s) v = sample_positive_stable(delta, rng);
    for (const double u : {0.5, 1.0, 2.0}) {
      double mean = 0.0;
      for (double v : s) mean += std::exp(-u * v);
      mean /= static_cast<double>(s.size());
      const double err = std::abs(mean - std::exp(-std::pow(u, delta)));
      o.require(err <= 0.005, "delta=" + num(delta) + " u=" + num(u) + " err " + num(err));
    }
  }
  RngStream rng(203);
  bool exact = true;
  for (int i = 0; i < 1000; ++i) exact = exact && sample_positive_stable(1.0, rng) == 1.0;
  o.require(exact, "delta=1 gives exactly 1");
}

void c3(Outcome& o) {
  RngStream rng(303);
  const std::size_t n = 10000;
  Matrix x(n, 3);
  for (std::size_t i = 0; i < n; ++i) {
    x(i, 0) = rng.normal();
    x(i, 1) = std::exp(2.0 * rng.normal());
    x(i, 2) = rng.exponential() - 0.3 * x(i, 0);
  }
  const Matrix t = RankTransformer::fit(x).apply(x);
  for (std::size_t j = 0; j < 3; ++j) {
    const double d = diag::ks_statistic(t.column(j), [](double v) { return v < 1.0 ? 0.0 : 1.0 - 1.0 / v; }).d;
    o.require(d <= 0.05, "coordinate " + std::to_string(j) + " KS " + num(d));
  }
}

LabeledDataset labeled_noise(std::size_t n, std::size_t d, std::uint64_t seed) {
  RngStream rng(seed);
  LabeledDataset out{Matrix(n, d), std::vector<int>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) out.x(i, j) = rng.normal() * (1.0 + 2.0 * rng.uniform());
    out.y[i] = rng.uniform() < 0.5 ? -1 : 1;
  }
  return out;
}

// Gradient checks for every network of one LHTR configuration.
void check_lhtr_gradients(Outcome& o, const std::string& name, lhtr::LhtrConfig c, std::size_t input_dim) {
  c.dropout = 0.0;
  c.rho_adv = 0.5;
  c.optim.batch_size = 16;
  lhtr::LhtrModel model = lhtr::init_model(c, input_dim, 7);
  model.weights = {1.4, 0.7};
  const auto data = labeled_noise(16, input_dim, 8);
  const auto assignment = lhtr::assign_batch(row_norms(model.encode(data.x)), c.kappa, model.weights);
  const auto f = [&] { return lhtr::encoder_objective(model, data.x, data.y, assignment); };
  const auto g = lhtr::encoder_objective_gradient(model, data.x, data.y, assignment);
  const double e_enc = testing::max_relative_error(g, testing::numeric_gradient(f, model.encoder.parameters()));
  o.require(e_enc <= 1e-4, name + " encoder objective " + num(e_enc));

  // Classifier heads: gradient of the same objective with respect to their parameters.
  for (const bool ext : {true, false}) {
    if (!ext && c.mode == lhtr::HeadMode::kSingleHead) continue;
    nn::Mlp& head = ext ? model.ext : model.bulk;
    std::vector<double> analytic(head.parameter_count(), 0.0);
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (c.mode == lhtr::HeadMode::kTwoHead && assignment.extreme[i] != ext) continue;
      const auto z = model.encode(data.x.row(i));
      const nn::Tape t = head.forward_tape(z, nullptr);
      std::vector<double> gl{assignment.weight[i] * nn::bce_logit_gradient(t.logits[0], to_binary(data.y[i]))};
      head.backward(t, gl, analytic);
    }
    const double e = testing::max_relative_error(analytic, testing::numeric_gradient(f, head.parameters()));
    o.require(e <= 1e-4, name + (ext ? " C_ext " : " C_bulk ") + num(e));
  }

  RngStream rng(9);
  const Matrix prior = sample_logistic(c.target, 16, rng);
  const Matrix enc = model.encode(data.x);
  const auto fd = [&] { return lhtr::discriminator_objective(model.discriminator, prior, enc, c.rho_adv); };
  const auto gd = lhtr::discriminator_objective_gradient(model.discriminator, prior, enc, c.rho_adv);
  const double e_d = testing::max_relative_error(gd, testing::numeric_gradient(fd, model.discriminator.parameters()));
  o.require(e_d <= 1e-4, name + " discriminator " + num(e_d));
}

lhtr::LhtrConfig shrink(lhtr::LhtrConfig c, std::size_t input_dim) {
  // Same depth and head layout, widths divided down.
  const std::size_t latent = c.latent_dim() / 25;
  c.encoder_sizes = {input_dim, c.encoder_sizes[1] / 32, c.encoder_sizes[2] / 25, latent};
  std::vector<std::size_t> cls{latent};
  for (std::size_t l = 1; l + 1 < c.classifier_sizes.size(); ++l) cls.push_back(std::max<std::size_t>(2, c.classifier_sizes[l] / 10));
  cls.push_back(1);
  c.classifier_sizes = cls;
  c.discriminator_sizes = cls;
  c.target.dimension = latent;
  return c;
}

void c4(Outcome& o) {
  check_lhtr_gradients(o, "toy", lhtr::LhtrConfig::toy(), 2);
  for (const auto mode : {lhtr::HeadMode::kTwoHead, lhtr::HeadMode::kSingleHead}) {
    const std::string tag = mode == lhtr::HeadMode::kTwoHead ? "" : "-1";
    check_lhtr_gradients(o, "small" + tag, shrink(lhtr::LhtrConfig::small(12, mode), 12), 12);
    check_lhtr_gradients(o, "large" + tag, shrink(lhtr::LhtrConfig::large(12, mode), 12), 12);
  }
  const std::vector<std::size_t> baseline_sizes{2, 4, 2};
  std::vector<nn::Mlp> chain{nn::Mlp::init(baseline_sizes, nn::Head::kIdentity, 1),
                             nn::Mlp::init(std::vector<std::size_t>{2, 8, 1}, nn::Head::kSigmoid, 2)};
  const auto data = labeled_noise(10, 2, 3);
  for (std::size_t s = 0; s < 2; ++s) {
    std::vector<double> analytic(chain[s].parameter_count(), 0.0);
    std::vector<double> scratch(chain[1].parameter_count(), 0.0);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const nn::Tape t0 = chain[0].forward_tape(data.x.row(i), nullptr);
      const nn::Tape t1 = chain[1].forward_tape(t0.logits, nullptr);
      std::vector<double> g{0.1 * nn::bce_logit_gradient(t1.logits[0], to_binary(data.y[i]))};
      g = chain[1].backward(t1, g, s == 1 ? std::span<double>(analytic) : std::span<double>(scratch));
      if (s == 0) chain[0].backward(t0, g, analytic);
    }
    const auto f = [&] {
      double l = 0.0;
      for (std::size_t i = 0; i < data.size(); ++i) {
        l += 0.1 * nn::bce_loss(nn::chain_probability(chain, data.x.row(i)), to_binary(data.y[i]));
      }
      return l;
    };
    const double e = testing::max_relative_error(analytic, testing::numeric_gradient(f, chain[s].parameters()));
    o.require(e <= 1e-4, "baseline stage " + std::to_string(s) + " " + num(e));
  }
  const std::vector<std::size_t> hidden{12};
  augment::ToyDecoder dec = augment::init_decoder(3, 7, 5, hidden, 4);
  const std::vector<double> z{0.4, -1.3, 2.2};
  for (const std::vector<int>& target : {std::vector<int>{2, 5, 6, 3, augment::kStop}, std::vector<int>{4, 4, 4}}) {
    std::vector<double> g(dec.step.parameter_count(), 0.0);
    augment::teacher_forced_gradient(dec, z, target, 1.0, g);
    const auto f = [&] { return augment::teacher_forced_nll(dec, z, target); };
    const double e = testing::max_relative_error(g, testing::numeric_gradient(f, dec.step.parameters()));
    o.require(e <= 1e-4, "decoder step network " + num(e));
  }
}

void c5(Outcome& o) {
  const auto all = data::gen_gaussian_mixture(data::MixtureSpec::toy(), data::kToySize, 5);
  const auto [train, test] = split_head(all, data::kToyTrain);
  lhtr::LhtrConfig c = lhtr::LhtrConfig::toy();
  c.mode = lhtr::HeadMode::kSingleHead;
  c.rho_adv = 0.0;
  c.rho_ext = 0.25;  // rho / k and rho / (m - k) both 1/64 at m = 64
  c.rho_bulk = 0.75;
  lhtr::LhtrModel model = lhtr::init_model(c, 2, 55);
  std::vector<nn::Mlp> chain{model.encoder, model.ext};
  lhtr::fit_lhtr(model, train, 55);
  nn::fit_chain(chain, train, c.optim, 55);
  double worst = 0.0;
  const auto compare = [&](std::span<const double> a, std::span<const double> b) {
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  };
  compare(model.encoder.parameters(), chain[0].parameters());
  compare(model.ext.parameters(), chain[1].parameters());
  o.require(worst <= 1e-12, "max parameter difference " + num(worst));
}

void c6(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto a = experiments::run_toy_experiment(experiments::ExperimentConfig{});
  const double secs = seconds_since(t0);
  const auto& r = a.report;
  const double latent = scalar(r, "latent_rv_median_p");
  const double dependent = scalar(r, "dependent_rv_median_p");
  const double min_latent = scalar(r, "minority_fraction_latent_extremes");
  const double min_input = scalar(r, "minority_fraction_input_extremes");
  o.require(latent >= 0.1, "latent median p " + num(latent));
  o.require(dependent <= 0.01, "dependent median p " + num(dependent));
  o.require(min_latent > min_input, "minority fraction latent " + num(min_latent) + " vs input " + num(min_input));
  o.require(secs <= 300.0, "runtime " + num(secs) + " s");
}

void c7(Outcome& o) {
  const auto a = experiments::run_toy_experiment(experiments::ExperimentConfig{});
  const double ext = scalar(a.report, "barcode_constancy_ext");
  const double nn = scalar(a.report, "barcode_constancy_nn");
  const double erm = scalar(a.report, "barcode_constancy_tail_erm");
  o.require(ext >= 0.95, "C_ext constancy " + num(ext));
  o.require(nn < ext, "NN constancy " + num(nn) + " strictly below C_ext");
  o.require(erm == 1.0, "angular ERM constancy " + num(erm));
}

void c8(Outcome& o) {
  const auto a = experiments::run_comparison(experiments::ExperimentConfig{});
  const auto& r = a.report;
  const double two = scalar(r, "lhtr_median_extreme_loss");
  const double one = scalar(r, "lhtr1_median_extreme_loss");
  o.require(two <= one, "median extreme loss LHTR " + num(two) + " vs LHTR1 " + num(one));
  const double hybrid = scalar(r, "hybrid_median_overall_loss");
  const double bulk_only = scalar(r, "nn_median_overall_loss");
  const double ext_only = scalar(r, "ext_only_median_overall_loss");
  o.require(hybrid <= std::max(bulk_only, ext_only),
            "hybrid " + num(hybrid) + " vs bulk-only " + num(bulk_only) + " / extreme-only " + num(ext_only));
}

void c9(Outcome& o) {
  const auto a = experiments::run_augmentation(experiments::ExperimentConfig{});
  const auto& r = a.report;
  const double ratio = scalar(r, "decoder_nll_ratio");
  o.require(ratio < 0.1, "decoder nll / uniform " + num(ratio));
  o.require(scalar(r, "generations_per_point_ok") == 1.0, "10 sequences per point");
  const double keep = scalar(r, "label_preservation");
  o.require(keep >= 0.95, "label preservation " + num(keep));
  const double d1 = scalar(r, "dist1");
  const double d2 = scalar(r, "dist2");
  o.require(d1 > 0.0 && d1 <= 1.0 && d2 > 0.0 && d2 <= 1.0, "dist1 " + num(d1) + " dist2 " + num(d2));
}

void c10(Outcome& o) {
  o.require(nn::bce_loss(0.5, 1) == std::numbers::ln2 && nn::bce_loss(0.5, 0) == std::numbers::ln2,
            "bce(0.5) = ln 2");
  const std::vector<std::vector<int>> seqs{{2, 3, 1}, {2, 3, 1}, {4, 1}};
  o.require(diag::distinct_n(seqs, 1) == 4.0 / 8.0, "distinct-1 = 4/8");
  o.require(diag::distinct_n(seqs, 2) == 3.0 / 8.0, "distinct-2 = 3/8");
  const std::vector<int> pred{1, 1, -1, -1, 1};
  const std::vector<int> gold{1, -1, -1, 1, 1};
  o.require(diag::f1_score(pred, gold) == 2.0 / 3.0, "f1 = 2/3");
  o.require(diag::f1_score(std::vector<int>{-1}, std::vector<int>{-1}) == 1.0, "f1 with no positives = 1");

  RngStream rng(10);
  const std::size_t n = 600;
  LabeledDataset d{Matrix(n, 2), std::vector<int>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    d.x(i, 0) = 1.0 / rng.uniform();
    d.x(i, 1) = 1.0 / rng.uniform();
    d.y[i] = (d.x(i, 0) > d.x(i, 1)) == (rng.uniform() < 0.8) ? 1 : -1;
  }
  const auto norms = row_norms(d.x);
  const auto th = tail_threshold(norms, 0.25);
  const auto ext = d.subset(select_extremes(norms, th.t));
  const auto g = fit_tail_erm(ext, TailErmConfig{}, 11);
  const std::vector<double> one{1.0};
  const auto curve = diag::tail_loss_curve(g.as_label_fn(), d, norms, th.t, one);
  const double risk = empirical_tail_risk(g.as_label_fn(), ext);
  o.require(curve.size() == 1 && curve[0].loss == risk, "tail curve at 1 = tail risk " + num(risk));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void c11(Outcome& o) {
  const std::string cli = TAILREP_CLI_PATH;
  const fs::path root = fs::temp_directory_path() / ("tailrep_determinism_" + std::to_string(::getpid()));
  fs::remove_all(root);
  const std::string exp_config =
      R"({"permutations": 200, "dependent_n": 2000, "comparison_runs": 2, "lhtr": {"optim": {"epochs": 20}}})";
  const std::string lhtr_config = R"({"preset": "toy", "optim": {"epochs": 20}})";
  const std::vector<std::string> commands{
      "sample-logistic --d 3 --delta 0.4 --n 2000 --out logistic.csv",
      "gen-toy --out toy.csv --train-out train.csv --test-out test.csv",
      "gen-dependent --n 2000 --d 3 --out dependent.csv",
      "--config lhtr.json train-lhtr --data train.csv --out model.json",
      "gen-seqs --data train.csv --model model.json --out seqs.txt",
      "diagnose-rv --data dependent.csv --permutations 200 --out rv.json",
      "diagnose-rv --data train.csv --model model.json --method spearman --permutations 200 --out rv_latent.json",
      "barcode --model model.json --data test.csv --out barcode.json --csv barcode.csv",
      "tail-curve --model model.json --data test.csv --out curve.json",
      "augment --model model.json --decoder decoder.json --data seqs.txt --out generated.csv",
      "--config experiment.json --out-dir toy toy-experiment",
      "--config experiment.json --out-dir compare compare",
  };
  for (const char* run : {"a", "b"}) {
    const fs::path dir = root / run;
    fs::create_directories(dir);
    std::ofstream(dir / "experiment.json") << exp_config;
    std::ofstream(dir / "lhtr.json") << lhtr_config;
    for (const auto& c : commands) {
      const std::string line = "cd '" + dir.string() + "' && '" + cli + "' --seed 7 " + c + " > /dev/null";
      if (std::system(line.c_str()) != 0) {
        o.require(false, "command failed: " + c);
        return;
      }
    }
  }
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), root / "a");
    const fs::path other = root / "b" / rel;
    ++files;
    if (!fs::exists(other) || slurp(e.path()) != slurp(other)) o.require(false, "differs: " + rel.string());
  }
  std::size_t files_b = 0;
  for (const auto& e : fs::recursive_directory_iterator(root / "b")) files_b += e.is_regular_file();
  o.require(files == files_b, std::to_string(files) + " files compared");
  if (o.pass) fs::remove_all(root);
}

const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> kCriteria{
    {"logistic sampler", c1},         {"positive-stable Laplace transform", c2},
    {"rank transform margins", c3},   {"gradient checks", c4},
    {"ablation equivalence", c5},     {"toy regular-variation contrast", c6},
    {"scale invariance", c7},         {"tail classification ordering", c8},
    {"augmentation audit", c9},       {"metric units", c10},
    {"CLI determinism", c11},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::size_t> which;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--criterion" && i + 1 < argc) {
      which.push_back(std::stoul(argv[++i]));
    } else {
      std::cerr << "usage: acceptance [--criterion N]...\n";
      return 2;
    }
  }
  if (which.empty()) {
    for (std::size_t n = 1; n <= kCriteria.size(); ++n) which.push_back(n);
  }
  bool all = true;
  for (const std::size_t n : which) {
    if (n < 1 || n > kCriteria.size()) {
      std::cerr << "no criterion " << n << "\n";
      return 2;
    }
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      kCriteria[n - 1].second(o);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << n << " (" << kCriteria[n - 1].first << ", "
              << num(seconds_since(t0)) << " s): " << o.detail.str() << std::endl;
    all = all && o.pass;
  }
  return all ? 0 : 1;
}

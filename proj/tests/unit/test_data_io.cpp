#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "doctest.h"
#include "tailrep/data_io.hpp"
#include "tailrep/diagnostics.hpp"
#include "tailrep/error.hpp"
#include "tailrep/evt.hpp"

using namespace tailrep;
using namespace tailrep::data;
using doctest::Approx;

namespace {

std::size_t error_line(const std::string& text) {
  try {
    parse_embeddings(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST_SUITE("data_io") {
  TEST_CASE("toy mixture: size, balance and component moments") {
    const auto d = gen_gaussian_mixture(MixtureSpec::toy(), kToySize, 1);
    CHECK(d.size() == 3000);
    CHECK(d.dimension() == 2);
    double pos = 0, mx[2] = {0, 0}, my[2] = {0, 0}, vx[2] = {0, 0}, vy[2] = {0, 0};
    std::size_t cnt[2] = {0, 0};
    for (std::size_t i = 0; i < d.size(); ++i) {
      const int c = d.y[i] > 0 ? 1 : 0;
      pos += c;
      ++cnt[c];
      mx[c] += d.x(i, 0);
      my[c] += d.x(i, 1);
    }
    for (int c = 0; c < 2; ++c) {
      mx[c] /= cnt[c];
      my[c] /= cnt[c];
    }
    for (std::size_t i = 0; i < d.size(); ++i) {
      const int c = d.y[i] > 0 ? 1 : 0;
      vx[c] += std::pow(d.x(i, 0) - mx[c], 2) / cnt[c];
      vy[c] += std::pow(d.x(i, 1) - my[c], 2) / cnt[c];
    }
    CHECK(pos / 3000.0 == Approx(0.5).epsilon(0.1));
    CHECK(mx[0] == Approx(1.0).epsilon(0.1));
    CHECK(mx[1] == Approx(2.5).epsilon(0.05));
    CHECK(my[0] == Approx(1.0).epsilon(0.05));
    CHECK(vx[1] == Approx(1.0).epsilon(0.1));
    CHECK(vy[1] == Approx(0.25).epsilon(0.1));
    CHECK(gen_gaussian_mixture(MixtureSpec::toy(), 50, 1).x == gen_gaussian_mixture(MixtureSpec::toy(), 50, 1).x);
  }

  TEST_CASE("mixture validation") {
    auto spec = MixtureSpec::toy();
    CHECK_NOTHROW(spec.validate());
    spec.components[0].covariance = {1.0, 2.0, 2.0, 1.0};
    CHECK_THROWS_AS(spec.validate(), DomainError);
    spec = MixtureSpec::toy();
    spec.components[1].covariance = {1.0, 0.5, 0.4, 1.0};
    CHECK_THROWS_AS(spec.validate(), DomainError);
    spec = MixtureSpec::toy();
    spec.components[0].weight = 0.7;
    CHECK_THROWS_AS(spec.validate(), DomainError);
    spec = MixtureSpec::toy();
    spec.components[0].label = 0;
    CHECK_THROWS_AS(spec.validate(), DomainError);
    CHECK_THROWS_AS(gen_gaussian_mixture(MixtureSpec::toy(), 0, 1), DomainError);
  }

  TEST_CASE("dependent embedding: deterministic, balanced, radius-dependent angle") {
    const auto a = gen_dependent_embedding(4000, 4, 3);
    const auto b = gen_dependent_embedding(4000, 4, 3);
    CHECK(a.x == b.x);
    CHECK(a.y == b.y);
    CHECK(a.dimension() == 4);
    double pos = 0;
    for (int y : a.y) pos += y > 0;
    CHECK(pos / 4000.0 == Approx(0.5).epsilon(0.1));
    CHECK_THROWS_AS(gen_dependent_embedding(10, 1, 3), DomainError);
    std::vector<double> theta(a.size()), log_r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      theta[i] = std::atan2(a.x(i, 1), a.x(i, 0));
      log_r[i] = std::log(std::hypot(a.x(i, 0), a.x(i, 1)));
    }
    // sd(0.15 log R) / sd(theta) = 0.15 / sqrt(0.15^2 + (pi/4)^2 / 12) ~ 0.55
    CHECK(diag::pearson_corr(theta, log_r) == Approx(0.55).epsilon(0.1));
  }

  TEST_CASE("latent sequences") {
    const auto vocab = SequenceVocab::for_size(12);
    CHECK(vocab.sectors == 8);
    CHECK(vocab.buckets == 2);
    CHECK(SequenceVocab::for_size(5).sectors == 2);
    CHECK(SequenceVocab::for_size(5).buckets == 1);
    RngStream rng(1);
    LabeledDataset inputs{Matrix(40, 2), std::vector<int>(40, 1)};
    Matrix z(40, 2);
    for (std::size_t i = 0; i < 40; ++i) {
      z(i, 0) = rng.normal();
      z(i, 1) = rng.normal();
    }
    // rows 0 and 1 share a latent
    z(1, 0) = z(0, 0);
    z(1, 1) = z(0, 1);
    const auto s = gen_latent_sequences(z, inputs, 12, 3);
    CHECK(s.size() == 40);
    CHECK(s.sequences[0] == s.sequences[1]);
    for (const auto& seq : s.sequences) {
      CHECK(seq.size() == 3);
      CHECK(seq.back() == augment::kStop);
      CHECK(seq[0] >= 2);
      CHECK(seq[0] < 10);
      CHECK(seq[1] >= 10);
      CHECK(seq[1] < 12);
    }
    const auto cut = gen_latent_sequences(z, inputs, 12, 2);
    for (const auto& seq : cut.sequences) CHECK(seq.size() == 2);
    CHECK_NOTHROW(cut.validate());
    CHECK_THROWS_AS(gen_latent_sequences(z, inputs, 3, 3), DomainError);
  }

  TEST_CASE("embedding files round trip bit exactly") {
    RngStream rng(2);
    LabeledDataset d{Matrix(20, 3), std::vector<int>(20)};
    for (std::size_t i = 0; i < 20; ++i) {
      for (std::size_t j = 0; j < 3; ++j) d.x(i, j) = rng.normal() * std::exp(rng.uniform(-30.0, 30.0));
      d.y[i] = i % 3 == 0 ? -1 : 1;
    }
    d.x(0, 0) = std::nextafter(1.0, 2.0);
    d.x(1, 1) = 5e-324;
    const auto text = format_embeddings(d);
    const auto back = parse_embeddings(text);
    CHECK(back.x == d.x);
    CHECK(back.y == d.y);
    CHECK(format_embeddings(back) == text);
    const auto path = (std::filesystem::temp_directory_path() / "tailrep_emb.csv").string();
    save_embeddings(d, path);
    CHECK(load_embeddings(path).x == d.x);
    std::filesystem::remove(path);
  }

  TEST_CASE("embedding parser: comments and errors with line numbers") {
    const auto ok = parse_embeddings("# note\nd=2\n1,0.5,2\n\n# more\n-1,3,4\n");
    CHECK(ok.size() == 2);
    CHECK(ok.x(1, 1) == 4.0);
    CHECK(error_line("d=2\n1,0.5\n") == 2);
    CHECK(error_line("d=2\n1,0.5,1\n0,1,2\n") == 3);
    CHECK(error_line("d=2\n1,0.5,1\n1,nan,2\n") == 3);
    CHECK(error_line("d=2\n1,0.5,1\n1,inf,2\n") == 3);
    CHECK(error_line("d=2\n1,0.5,x\n") == 2);
    CHECK(error_line("# c\nd=0\n1,2\n") == 2);
    CHECK(error_line("dim=2\n1,2,3\n") == 1);
    CHECK_THROWS_AS(parse_embeddings(""), ParseError);
    CHECK_THROWS_AS(parse_embeddings("d=2\n"), ParseError);
    CHECK_THROWS_AS(load_embeddings("/nonexistent/tailrep.csv"), ParseError);
  }

  TEST_CASE("sequence files round trip and reject bad rows") {
    augment::SequenceDataset d;
    d.x = Matrix(3, 2, std::vector<double>{0.1, -0.2, 1e-300, 3.0, 7.0, 8.0});
    d.labels = {1, -1, 1};
    d.sequences = {{2, 3, 1}, {1}, {4, 4}};
    d.vocab = 6;
    d.t_max = 3;
    const auto text = format_sequences(d);
    const auto back = parse_sequences(text);
    CHECK(back.x == d.x);
    CHECK(back.labels == d.labels);
    CHECK(back.sequences == d.sequences);
    CHECK(back.vocab == 6);
    CHECK(back.t_max == 3);
    CHECK(format_sequences(back) == text);
    CHECK_THROWS_AS(parse_sequences("d=1 vocab=4 tmax=2\n1,0.5,1 2 3\n"), ParseError);
    CHECK_THROWS_AS(parse_sequences("d=1 vocab=4 tmax=3\n1,0.5,9\n"), ParseError);
    CHECK_THROWS_AS(parse_sequences("d=1 vocab=4\n1,0.5,1\n"), ParseError);
    CHECK_THROWS_AS(parse_sequences("d=1 vocab=4 tmax=3\n1,0.5\n"), ParseError);
  }
}

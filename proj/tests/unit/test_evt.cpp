#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "tailrep/diagnostics.hpp"
#include "tailrep/error.hpp"
#include "tailrep/evt.hpp"
#include "tailrep/heavy_tails.hpp"

using namespace tailrep;
using doctest::Approx;

TEST_SUITE("evt") {
  TEST_CASE("angular projection examples") {
    const std::vector<double> x{3.0, 1.0};
    const auto a = angular_projection(x);
    CHECK(a[0] == 1.0);
    CHECK(a[1] == Approx(1.0 / 3.0).epsilon(1e-15));
    const std::vector<double> zero{0.0, 0.0};
    CHECK_THROWS_AS(angular_projection(zero), DomainError);
  }

  TEST_CASE("angular projection: unit norm and homogeneity") {
    RngStream rng(2);
    for (int t = 0; t < 1000; ++t) {
      std::vector<double> x(1 + rng.below(6));
      for (double& v : x) v = rng.normal() * std::exp(rng.uniform(-5.0, 5.0));
      const auto a = angular_projection(x);
      CHECK(sup_norm(a) == 1.0);
      auto scaled = x;
      const double pow2 = std::ldexp(1.0, static_cast<int>(rng.below(40)) - 20);
      for (double& v : scaled) v *= pow2;
      CHECK(angular_projection(scaled) == a);
      auto lam = x;
      const double l = rng.uniform(0.01, 100.0);
      for (double& v : lam) v *= l;
      const auto b = angular_projection(lam);
      for (std::size_t j = 0; j < a.size(); ++j) CHECK(b[j] == Approx(a[j]).epsilon(1e-14));
    }
  }

  TEST_CASE("rank transform examples") {
    const Matrix col(3, 1, std::vector<double>{1.0, 2.0, 3.0});
    const auto rt = RankTransformer::fit(col);
    CHECK(rt.apply(std::vector<double>{2.0})[0] == 2.0);
    CHECK(rt.apply(std::vector<double>{3.0})[0] == 4.0);
    CHECK(rt.apply(std::vector<double>{0.5})[0] == 1.0);
    CHECK_THROWS_AS(rt.apply(std::vector<double>{1.0, 2.0}), DomainError);
    CHECK_THROWS_AS(RankTransformer::fit(Matrix(0, 2)), DomainError);
  }

  TEST_CASE("rank transform of the fitting data hits the rank grid") {
    RngStream rng(3);
    const std::size_t n = 50;
    Matrix x(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
      x(i, 0) = rng.normal();
      x(i, 1) = rng.exponential();
    }
    const Matrix t = RankTransformer::fit(x).apply(x);
    for (std::size_t j = 0; j < 2; ++j) {
      auto c = t.column(j);
      std::sort(c.begin(), c.end());
      for (std::size_t r = 0; r < n; ++r) {
        CHECK(c[r] == Approx(static_cast<double>(n + 1) / static_cast<double>(n - r)).epsilon(1e-14));
      }
    }
  }

  TEST_CASE("rank transform: monotone and bounded") {
    RngStream rng(4);
    Matrix x(200, 3);
    for (std::size_t i = 0; i < 200; ++i) {
      for (std::size_t j = 0; j < 3; ++j) x(i, j) = rng.normal();
    }
    const auto rt = RankTransformer::fit(x);
    for (int t = 0; t < 500; ++t) {
      std::vector<double> a{rng.normal() * 3, rng.normal() * 3, rng.normal() * 3};
      auto b = a;
      b[rng.below(3)] += rng.uniform(0.0, 2.0);
      const auto ta = rt.apply(a);
      const auto tb = rt.apply(b);
      for (std::size_t j = 0; j < 3; ++j) {
        CHECK(ta[j] >= 1.0);
        CHECK(ta[j] <= 201.0);
        CHECK(tb[j] >= ta[j]);
      }
    }
  }

  TEST_CASE("rank transform: Pareto margins") {
    RngStream rng(5);
    const std::size_t n = 10000;
    Matrix x(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
      x(i, 0) = rng.normal();
      x(i, 1) = std::exp(rng.normal());
    }
    const Matrix t = RankTransformer::fit(x).apply(x);
    for (std::size_t j = 0; j < 2; ++j) {
      CHECK(diag::ks_statistic(t.column(j), [](double v) { return v < 1.0 ? 0.0 : 1.0 - 1.0 / v; }).d <= 0.05);
    }
  }

  TEST_CASE("tail threshold examples") {
    const std::vector<double> norms{5, 4, 3, 2, 1, 0.5, 0.2, 0.1};
    const auto th = tail_threshold(norms, 0.25);
    CHECK(th.k == 2);
    CHECK(th.t == 4.0);
    CHECK(tail_threshold(std::vector<double>(3000, 1.0), 0.25).k == 750);
    CHECK(tail_threshold(std::vector<double>(17, 2.5), 0.3).t == 2.5);
    CHECK_THROWS_AS(tail_threshold(std::vector<double>(3, 1.0), 0.25), DomainError);
    CHECK_THROWS_AS(tail_threshold(norms, 0.0), DomainError);
    CHECK_THROWS_AS(tail_threshold(norms, 1.0), DomainError);
  }

  TEST_CASE("select extremes examples") {
    const std::vector<double> norms{5, 4, 3};
    CHECK(select_extremes(norms, 4.0) == std::vector<std::size_t>{0, 1});
    CHECK(select_extremes(norms, 6.0).empty());
    CHECK(select_extremes(norms, 0.1) == std::vector<std::size_t>{0, 1, 2});
  }

  TEST_CASE("select extremes: k points at the threshold for distinct norms; ties included") {
    RngStream rng(6);
    std::vector<double> norms(1001);
    for (double& v : norms) v = rng.exponential();
    const auto th = tail_threshold(norms, 0.25);
    CHECK(select_extremes(norms, th.t).size() == th.k);
    const std::vector<double> tied{3, 2, 2, 2, 1, 1, 1, 1};
    const auto t2 = tail_threshold(tied, 0.25);
    CHECK(t2.t == 2.0);
    CHECK(select_extremes(tied, t2.t).size() == 4);
  }

  TEST_CASE("nested tail subsets") {
    const std::vector<double> norms{10, 5, 4};
    CHECK(nested_tail_subset(norms, 4.0, 2.0) == std::vector<std::size_t>{0});
    CHECK(nested_tail_subset(norms, 4.0, 1.0) == select_extremes(norms, 4.0));
    CHECK(nested_tail_subset(norms, 4.0, 1e9).empty());
    CHECK_THROWS_AS(nested_tail_subset(norms, 4.0, 0.5), DomainError);
    RngStream rng(7);
    std::vector<double> many(500);
    for (double& v : many) v = 1.0 / rng.uniform();
    double prev = 1.0;
    auto prev_set = nested_tail_subset(many, 2.0, prev);
    for (int s = 0; s < 50; ++s) {
      const double l = prev + rng.uniform(0.0, 0.5);
      const auto cur = nested_tail_subset(many, 2.0, l);
      CHECK(std::includes(prev_set.begin(), prev_set.end(), cur.begin(), cur.end()));
      prev = l;
      prev_set = cur;
    }
  }

  TEST_CASE("empirical tail risk examples") {
    LabeledDataset d{Matrix(4, 2, std::vector<double>{1, 0, 2, 1, 0.5, 3, 4, 4}), {1, 1, -1, -1}};
    const LabelFn first_axis = [](std::span<const double> a) { return a[0] == 1.0 ? 1 : -1; };
    CHECK(empirical_tail_risk(first_axis, d) == 0.25);
    const LabelFn perfect = [](std::span<const double> a) { return a[1] < 1.0 ? 1 : -1; };
    CHECK(empirical_tail_risk(perfect, d) == 0.0);
    const LabelFn constant = [](std::span<const double>) { return 1; };
    CHECK(empirical_tail_risk(constant, d) == 0.5);
    CHECK_THROWS_AS(empirical_tail_risk(constant, LabeledDataset{}), DomainError);
  }

  TEST_CASE("tail ERM: separable angular clusters") {
    RngStream rng(8);
    const std::size_t n = 200;
    LabeledDataset d{Matrix(n, 2), std::vector<int>(n)};
    for (std::size_t i = 0; i < n; ++i) {
      const bool pos = i % 2 == 0;
      const double angle = pos ? rng.uniform(0.05, 0.6) : rng.uniform(0.95, 1.5);
      const double r = 1.0 / rng.uniform();
      d.x(i, 0) = r * std::cos(angle);
      d.x(i, 1) = r * std::sin(angle);
      d.y[i] = pos ? 1 : -1;
    }
    const auto g = fit_tail_erm(d, TailErmConfig{}, 1);
    CHECK(empirical_tail_risk(g.as_label_fn(), d) == 0.0);
    for (std::size_t i = 0; i < 20; ++i) {
      auto scaled = std::vector<double>(d.x.row(i).begin(), d.x.row(i).end());
      for (double l : {1.5, 7.0, 1000.0}) {
        std::vector<double> s = scaled;
        for (double& v : s) v *= l;
        CHECK(g.predict(s) == g.predict(d.x.row(i)));
      }
    }
  }

  TEST_CASE("tail ERM: single class and empty input") {
    LabeledDataset d{Matrix(3, 2, std::vector<double>{1, 2, 3, 1, 2, 2}), {-1, -1, -1}};
    const auto g = fit_tail_erm(d, TailErmConfig{}, 2);
    CHECK(empirical_tail_risk(g.as_label_fn(), d) == 0.0);
    CHECK(g.predict(std::vector<double>{-5.0, 0.1}) == -1);
    CHECK_THROWS_AS(fit_tail_erm(LabeledDataset{}, TailErmConfig{}, 2), DomainError);
  }

  TEST_CASE("dataset validation") {
    LabeledDataset bad_label{Matrix(1, 1, 1.0), {0}};
    CHECK_THROWS_AS(bad_label.validate(), DomainError);
    LabeledDataset nan{Matrix(1, 1, std::nan("")), {1}};
    CHECK_THROWS_AS(nan.validate(), DomainError);
    LabeledDataset mismatch{Matrix(2, 1, 1.0), {1}};
    CHECK_THROWS_AS(mismatch.validate(), DomainError);
  }
}

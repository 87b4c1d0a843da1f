#include <cmath>
#include <cstring>
#include <vector>

#include "doctest.h"
#include "tailrep/error.hpp"
#include "tailrep/rng.hpp"
#include "tailrep/simd/kernels.hpp"

using namespace tailrep;
using simd::Isa;

namespace {

std::vector<double> random_vector(std::size_t n, RngStream& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal() * std::exp(rng.uniform(-3.0, 3.0));
  return v;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

std::vector<Isa> available() {
  std::vector<Isa> out;
  for (Isa isa : {Isa::kAvx2, Isa::kNeon}) {
    if (simd::isa_supported(isa)) out.push_back(isa);
  }
  return out;
}

}  // namespace

TEST_SUITE("simd") {
  TEST_CASE("scalar table is always available") {
    CHECK(simd::isa_supported(Isa::kScalar));
    CHECK(simd::kernels_for(Isa::kScalar).isa == Isa::kScalar);
    CHECK(simd::isa_name(Isa::kScalar) == "scalar");
  }

  TEST_CASE("unsupported isa is rejected") {
    for (Isa isa : {Isa::kAvx2, Isa::kNeon}) {
      if (!simd::isa_supported(isa)) CHECK_THROWS_AS(simd::kernels_for(isa), DomainError);
    }
  }

  TEST_CASE("vector kernels agree with the scalar reference") {
    const auto& ref = simd::scalar_kernels();
    RngStream rng(11);
    for (Isa isa : available()) {
      const auto& k = simd::kernels_for(isa);
      CAPTURE(k.name);
      for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 8u, 15u, 64u, 257u}) {
        CAPTURE(n);
        const auto a = random_vector(n, rng);
        const auto b = random_vector(n, rng);

        double mag = 0.0;
        for (std::size_t i = 0; i < n; ++i) mag += std::abs(a[i] * b[i]);
        CHECK(std::abs(k.dot(a.data(), b.data(), n) - ref.dot(a.data(), b.data(), n)) <= 1e-14 * mag + 1e-300);

        auto y1 = b, y2 = b;
        ref.axpy(0.37, a.data(), y1.data(), n);
        k.axpy(0.37, a.data(), y2.data(), n);
        CHECK(bitwise_equal(y1, y2));

        CHECK(k.max_abs(a.data(), n) == ref.max_abs(a.data(), n));

        auto w1 = a, w2 = a;
        ref.sgd_update(w1.data(), b.data(), n, 1e-3, 1e-5);
        k.sgd_update(w2.data(), b.data(), n, 1e-3, 1e-5);
        CHECK(bitwise_equal(w1, w2));

        auto m1 = random_vector(n, rng), v1 = random_vector(n, rng);
        for (double& x : v1) x = std::abs(x);
        auto m2 = m1, v2 = v1;
        w1 = a;
        w2 = a;
        const simd::AdamWParams p{5e-4, 1e-5, 0.9, 0.999, 1e-8, 1.0 - 0.9 * 0.9, 1.0 - 0.999 * 0.999};
        for (int step = 0; step < 3; ++step) {
          ref.adamw_update(w1.data(), b.data(), m1.data(), v1.data(), n, p);
          k.adamw_update(w2.data(), b.data(), m2.data(), v2.data(), n, p);
        }
        CHECK(bitwise_equal(w1, w2));
        CHECK(bitwise_equal(m1, m2));
        CHECK(bitwise_equal(v1, v2));
      }
    }
  }

  TEST_CASE("gemv agrees with the scalar reference") {
    const auto& ref = simd::scalar_kernels();
    RngStream rng(12);
    for (Isa isa : available()) {
      const auto& k = simd::kernels_for(isa);
      for (auto [rows, cols] : {std::pair<std::size_t, std::size_t>{1, 1}, {3, 5}, {8, 2}, {17, 33}, {384, 200}}) {
        const auto w = random_vector(rows * cols, rng);
        const auto bias = random_vector(rows, rng);
        const auto x = random_vector(cols, rng);
        std::vector<double> y1(rows), y2(rows);
        ref.gemv(w.data(), bias.data(), x.data(), y1.data(), rows, cols);
        k.gemv(w.data(), bias.data(), x.data(), y2.data(), rows, cols);
        for (std::size_t r = 0; r < rows; ++r) {
          double mag = std::abs(bias[r]);
          for (std::size_t c = 0; c < cols; ++c) mag += std::abs(w[r * cols + c] * x[c]);
          CHECK(std::abs(y1[r] - y2[r]) <= 1e-14 * mag);
        }
      }
    }
  }

  TEST_CASE("active table can be switched") {
    const Isa before = simd::active().isa;
    simd::set_active(Isa::kScalar);
    CHECK(simd::active().isa == Isa::kScalar);
    simd::set_active(before);
    CHECK(simd::active().isa == before);
  }
}

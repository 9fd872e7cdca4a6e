#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "daif/spectral.hpp"
#include "support/oracles.hpp"

using namespace daif::spectral;

namespace {

std::vector<double> random_series(std::size_t n, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  std::vector<double> x(n);
  for (double& v : x) v = dist(gen);
  return x;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("rdft of simple signals") {
  SUBCASE("constant series is DC only") {
    Spectrum s = rdft({1.0, 1.0, 1.0, 1.0});
    REQUIRE(s.bins() == 3);
    CHECK(s.coefficients[0].real() == doctest::Approx(4.0));
    CHECK(std::abs(s.coefficients[1]) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(std::abs(s.coefficients[2]) == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("impulse has a flat spectrum") {
    Spectrum s = rdft({1.0, 0.0, 0.0, 0.0});
    REQUIRE(s.bins() == 3);
    for (const auto& c : s.coefficients) {
      CHECK(c.real() == doctest::Approx(1.0));
      CHECK(c.imag() == doctest::Approx(0.0).epsilon(1e-12));
    }
  }
  SUBCASE("empty input is rejected") {
    CHECK_THROWS_AS(rdft({}), daif::ContractError);
  }
}

TEST_CASE("rdft matches the naive DFT oracle") {
  std::mt19937_64 gen(42);
  const auto x = random_series(8, gen);
  Spectrum s = rdft(x);
  const auto expected = oracle::naive_rdft(x);
  REQUIRE(s.bins() == expected.size());
  for (std::size_t j = 0; j < expected.size(); ++j) {
    CHECK(std::abs(s.coefficients[j] - expected[j]) <= 1e-9);
  }
}

TEST_CASE("irdft inverts rdft") {
  SUBCASE("DC-only spectrum gives a constant") {
    Spectrum s;
    s.original_length = 4;
    s.coefficients = {{4.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}};
    const auto x = irdft(s);
    for (double v : x) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("round trip on random length-16") {
    std::mt19937_64 gen(1);
    const auto x = random_series(16, gen);
    CHECK(max_abs_diff(irdft(rdft(x)), x) <= 1e-9);
  }
  SUBCASE("single nonzero bin matches the closed-form sinusoid") {
    const std::size_t t = 32, j = 3;
    Spectrum s;
    s.original_length = t;
    s.coefficients.assign(t / 2 + 1, {0.0, 0.0});
    const double a = 2.5, b = -1.25;
    s.coefficients[j] = {a, b};
    const auto x = irdft(s);
    for (std::size_t i = 0; i < t; ++i) {
      const double angle =
          2.0 * oracle::kPi * static_cast<double>(j) * static_cast<double>(i) / t;
      const double expected =
          (2.0 / static_cast<double>(t)) * (a * std::cos(angle) - b * std::sin(angle));
      CHECK(x[i] == doctest::Approx(expected).epsilon(1e-9));
    }
  }
  SUBCASE("inconsistent coefficient count is rejected") {
    Spectrum s;
    s.original_length = 8;
    s.coefficients.assign(3, {0.0, 0.0});
    CHECK_THROWS_AS(irdft(s), daif::ContractError);
  }
}

TEST_CASE("amplitude") {
  SUBCASE("constant series peaks only at DC") {
    const auto amps = amplitude(rdft(std::vector<double>(10, 3.0)));
    CHECK(amps[0] == doctest::Approx(30.0));
    for (std::size_t j = 1; j < amps.size(); ++j) CHECK(amps[j] <= 1e-9);
  }
  SUBCASE("3+4i has amplitude 5") {
    Spectrum s;
    s.original_length = 8;
    s.coefficients.assign(5, {0.0, 0.0});
    s.coefficients[2] = {3.0, 4.0};
    CHECK(amplitude(s)[2] == doctest::Approx(5.0));
  }
  SUBCASE("two-tone amplitudes peak at the tone bins") {
    const std::size_t t = 64;
    std::vector<double> x(t);
    for (std::size_t i = 0; i < t; ++i) {
      x[i] = std::cos(2.0 * oracle::kPi * 5.0 * i / t) +
             0.5 * std::cos(2.0 * oracle::kPi * 11.0 * i / t);
    }
    const auto amps = amplitude(rdft(x));
    const auto oracle_amps = oracle::naive_rdft(x);
    for (std::size_t j = 0; j < amps.size(); ++j) {
      CHECK(amps[j] == doctest::Approx(std::abs(oracle_amps[j])).epsilon(1e-9));
      if (j != 5 && j != 11) CHECK(amps[j] < amps[5]);
    }
    CHECK(amps[5] > amps[11]);
    CHECK(amps[11] > 1.0);
  }
}

TEST_CASE("top_k_indices") {
  SUBCASE("k equal to length keeps everything") {
    const auto idx = top_k_indices({1.0, 5.0, 2.0}, 3);
    CHECK(idx == std::vector<std::size_t>{0, 1, 2});
  }
  SUBCASE("ties break toward the lower index") {
    CHECK(top_k_indices({5.0, 1.0, 9.0, 9.0}, 2) == std::vector<std::size_t>{2, 3});
    CHECK(top_k_indices({9.0, 1.0, 9.0, 5.0}, 2) == std::vector<std::size_t>{0, 2});
  }
  SUBCASE("matches a full-sort oracle on random input") {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> dist(0.0, 10.0);
    std::vector<double> amps(20);
    for (double& v : amps) v = dist(gen);
    const auto idx = top_k_indices(amps, 3);
    std::vector<std::size_t> order(amps.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return amps[a] > amps[b]; });
    std::vector<std::size_t> expected(order.begin(), order.begin() + 3);
    std::sort(expected.begin(), expected.end());
    CHECK(idx == expected);
  }
  SUBCASE("k out of range") {
    CHECK_THROWS_AS(top_k_indices({1.0, 2.0}, 0), daif::ContractError);
    CHECK_THROWS_AS(top_k_indices({1.0, 2.0}, 3), daif::ContractError);
  }
}

TEST_CASE("frequency_filter") {
  SUBCASE("constant series is preserved for any k") {
    const std::vector<double> x(12, 2.5);
    for (std::size_t k : {std::size_t{1}, std::size_t{3}, std::size_t{7}}) {
      CHECK(max_abs_diff(frequency_filter(x, k), x) <= 1e-9);
    }
  }
  SUBCASE("single spectral line is reproduced with k=1") {
    const std::size_t t = 32;
    std::vector<double> x(t);
    for (std::size_t i = 0; i < t; ++i) x[i] = std::cos(2.0 * oracle::kPi * 3.0 * i / t);
    CHECK(max_abs_diff(frequency_filter(x, 1), x) <= 1e-9);
  }
  SUBCASE("two tones plus noise match the oracle reconstruction") {
    const std::size_t t = 64;
    std::mt19937_64 gen(13);
    std::uniform_real_distribution<double> eps(-0.01, 0.01);
    std::vector<double> x(t);
    for (std::size_t i = 0; i < t; ++i) {
      x[i] = std::cos(2.0 * oracle::kPi * 2.0 * i / t) +
             0.3 * std::cos(2.0 * oracle::kPi * 7.0 * i / t) + eps(gen);
    }
    const auto filtered = frequency_filter(x, 2);
    CHECK(max_abs_diff(filtered, oracle::naive_frequency_filter(x, 2)) <= 1e-9);
    // The retained bins are exactly the tone bins.
    const auto amps = amplitude(rdft(filtered));
    for (std::size_t j = 0; j < amps.size(); ++j) {
      if (j == 2 || j == 7) {
        CHECK(amps[j] > 1.0);
      } else {
        CHECK(amps[j] <= 1e-9);
      }
    }
  }
}

TEST_CASE("round-trip property across lengths including non-powers of two") {
  std::mt19937_64 gen(77);
  for (std::size_t t : {1u, 2u, 3u, 5u, 7u, 12u, 37u, 96u, 100u, 128u, 257u, 512u}) {
    const auto x = random_series(t, gen);
    CHECK(max_abs_diff(irdft(rdft(x)), x) <= 1e-9);
  }
}

TEST_CASE("max-K identity and idempotence") {
  std::mt19937_64 gen(99);
  for (std::size_t t : {8u, 15u, 31u, 96u}) {
    const auto x = random_series(t, gen);
    const std::size_t max_k = t / 2 + 1;
    CHECK(max_abs_diff(frequency_filter(x, max_k), x) <= 1e-9);
    for (std::size_t k : {std::size_t{1}, std::size_t{3}}) {
      if (k > max_k) continue;
      const auto once = frequency_filter(x, k);
      const auto twice = frequency_filter(once, k);
      CHECK(max_abs_diff(once, twice) <= 1e-9);
    }
  }
}

TEST_CASE("rdft is linear") {
  std::mt19937_64 gen(3);
  const auto x = random_series(48, gen);
  const auto y = random_series(48, gen);
  const double a = 2.5, b = -0.75;
  std::vector<double> combo(48);
  for (std::size_t i = 0; i < 48; ++i) combo[i] = a * x[i] + b * y[i];
  const auto sc = rdft(combo);
  const auto sx = rdft(x);
  const auto sy = rdft(y);
  for (std::size_t j = 0; j < sc.bins(); ++j) {
    const auto expected = a * sx.coefficients[j] + b * sy.coefficients[j];
    CHECK(std::abs(sc.coefficients[j] - expected) <= 1e-9);
  }
}

TEST_CASE("filtered energy is nondecreasing in k") {
  std::mt19937_64 gen(21);
  const auto x = random_series(40, gen);
  double prev = 0.0;
  for (std::size_t k = 1; k <= 21; ++k) {
    const auto f = frequency_filter(x, k);
    double energy = 0.0;
    for (double v : f) energy += v * v;
    CHECK(energy >= prev - 1e-9);
    prev = energy;
  }
}

TEST_CASE("always_keep_dc retains the mean") {
  // A strong tone plus a small offset: with plain top-1 the tone wins and the
  // mean is dropped; with the flag the DC bin survives.
  const std::size_t t = 32;
  std::vector<double> x(t);
  for (std::size_t i = 0; i < t; ++i) {
    x[i] = 0.05 + std::cos(2.0 * oracle::kPi * 4.0 * i / t);
  }
  const auto plain = frequency_filter(x, 1, false);
  double mean_plain = 0.0;
  for (double v : plain) mean_plain += v;
  CHECK(std::abs(mean_plain / t) <= 1e-12);

  const auto kept = frequency_filter(x, 2, true);
  double mean_kept = 0.0;
  for (double v : kept) mean_kept += v;
  CHECK(mean_kept / t == doctest::Approx(0.05).epsilon(1e-9));
}

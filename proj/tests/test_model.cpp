#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "frontier/model.hpp"
#include "frontier/parallel.hpp"

using namespace frontier;
using Catch::Approx;

namespace {

const std::vector<ErrorLaw>& all_laws() {
  static const std::vector<ErrorLaw> laws{PowerTail{0.5}, PowerTail{1.0},   PowerTail{2.7},
                                          MirroredExp{2.0}, UniformSym{0.3}, PolyBump{-0.5},
                                          PolyBump{0.0},    PolyBump{1.5}};
  return laws;
}

}  // namespace

TEST_CASE("cdf examples", "[model]") {
  CHECK(cdf(PowerTail{1.0}, -0.25) == Approx(0.75));
  CHECK(cdf(MirroredExp{2.0}, 0.0) == 1.0);
  CHECK(cdf(MirroredExp{2.0}, -0.5) == Approx(std::exp(-1.0)).epsilon(1e-14));
  CHECK(cdf(PowerTail{1.0}, -2.0) == 0.0);
  CHECK(cdf(PowerTail{1.0}, 0.5) == 1.0);
  CHECK(cdf(UniformSym{1.0}, 0.0) == Approx(0.5));
  CHECK(cdf(PolyBump{0.0}, 0.5) == Approx(0.75));
}

TEST_CASE("quantile examples", "[model]") {
  CHECK(quantile(PowerTail{1.0}, 0.5) == Approx(-0.5));
  CHECK(quantile(PowerTail{2.0}, 0.75) == Approx(-0.5));
  CHECK(quantile(UniformSym{1.0}, 0.25) == Approx(-0.5));
  CHECK_THROWS_AS(quantile(PowerTail{1.0}, 0.0), DomainError);
  CHECK_THROWS_AS(quantile(PowerTail{1.0}, 1.0), DomainError);
}

TEST_CASE("quantile inverts the cdf", "[model]") {
  for (const auto& law : all_laws()) {
    INFO(describe(law));
    for (int k = 1; k <= 99; ++k) {
      const double u = k / 100.0;
      CHECK(std::abs(cdf(law, quantile(law, u)) - u) < 1e-9);
    }
  }
}

TEST_CASE("cdf shape", "[model]") {
  for (const auto& law : all_laws()) {
    INFO(describe(law));
    const auto [lo, hi] = support(law);
    if (std::isfinite(lo)) CHECK(cdf(law, lo) == 0.0);
    CHECK(cdf(law, hi) == 1.0);
    if (is_one_sided(law)) CHECK(hi <= 0.0);
    else CHECK(lo == -hi);
    double prev = 0.0;
    for (int k = 0; k <= 400; ++k) {
      const double y = -2.0 + k / 100.0;
      const double f = cdf(law, y);
      CHECK(f >= prev);
      CHECK(f >= 0.0);
      CHECK(f <= 1.0);
      prev = f;
    }
  }
}

TEST_CASE("power tail is exact", "[model]") {
  for (double a : {0.5, 1.0, 2.0, 3.3})
    for (double t : {0.01, 0.2, 0.5, 0.99, 1.0})
      CHECK(1.0 - cdf(PowerTail{a}, -t) == Approx(std::pow(t, a)).margin(1e-15));
}

TEST_CASE("bump density integrates to one", "[model]") {
  for (double z : {-0.5, 0.0, 1.0, 1.5, 4.0}) {
    const ErrorLaw law = PolyBump{z};
    const int k = 200000;
    double s = 0;
    for (int j = 0; j < k; ++j) s += pdf(law, -1.0 + 2.0 * (j + 0.5) / k) * 2.0 / k;
    CHECK(s == Approx(1.0).margin(z < 0 ? 5e-3 : 1e-6));
  }
}

TEST_CASE("tail index", "[model]") {
  CHECK(alpha_of(MirroredExp{5.0}) == 1.0);
  CHECK(alpha_of(PowerTail{0.5}) == 0.5);
  CHECK(alpha_of(PolyBump{1.0}) == 2.0);
  CHECK(alpha_of(UniformSym{2.0}) == 1.0);
  CHECK(std::isinf(alpha_of(ZeroNoise{})));
}

TEST_CASE("invalid laws", "[model]") {
  CHECK_THROWS_AS(validate(PowerTail{0.0}), DomainError);
  CHECK_THROWS_AS(validate(MirroredExp{-1.0}), DomainError);
  CHECK_THROWS_AS(validate(UniformSym{0.0}), DomainError);
  CHECK_THROWS_AS(validate(PolyBump{-1.0}), DomainError);
}

TEST_CASE("sampling", "[model]") {
  const auto u = sample_errors(UniformSym{1.0}, 10000, 3);
  CHECK(std::all_of(u.begin(), u.end(), [](double v) { return v >= -1.0 && v <= 1.0; }));

  // |eps| is uniform on [0, 1]: mean 1/2, sd 1/sqrt(12).
  const std::size_t n = 100000;
  const auto e = sample_errors(PowerTail{1.0}, n, 17);
  double mean = 0;
  for (double v : e) mean += std::abs(v);
  mean /= static_cast<double>(n);
  CHECK(std::abs(mean - 0.5) < 3.0 / std::sqrt(12.0 * static_cast<double>(n)));

  CHECK(sample_errors(MirroredExp{2.0}, 500, 9) == sample_errors(MirroredExp{2.0}, 500, 9));
  CHECK(sample_errors(MirroredExp{2.0}, 500, 9) != sample_errors(MirroredExp{2.0}, 500, 10));
}

TEST_CASE("empirical cdf lies in the DKW band", "[model]") {
  const std::size_t n = 100000;
  // P(sup |F_n - F| > eps) <= 2 exp(-2 n eps^2) < 1% at eps = 0.01.
  for (const auto& law : all_laws()) {
    INFO(describe(law));
    auto x = sample_errors(law, n, 123);
    std::sort(x.begin(), x.end());
    double sup = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double f = cdf(law, x[i]);
      sup = std::max({sup, std::abs(static_cast<double>(i + 1) / n - f),
                      std::abs(static_cast<double>(i) / n - f)});
    }
    CHECK(sup < 0.01);
  }
}

TEST_CASE("generated samples", "[model]") {
  const auto zero = make_truth("zero");
  const auto s = generate_sample(zero, MirroredExp{1.0}, 300, 4);
  CHECK(s.n == 300);
  CHECK(std::all_of(s.ys.begin(), s.ys.end(), [](double y) { return y <= 0.0; }));

  const auto g = make_truth("sine_linear");
  const auto t = generate_sample(g, UniformSym{0.4}, 200, 8);
  for (std::size_t i = 1; i <= t.n; ++i) {
    CHECK(t.y(i) >= g(t.design(i)) - 0.4);
    CHECK(t.y(i) <= g(t.design(i)) + 0.4);
  }

  RegressionTruth one{[](double) { return 1.0; }, 2.0, 0.0, "one"};
  const auto two = generate_sample(one, ZeroNoise{}, 2, 0);
  CHECK(two.ys == std::vector<double>{1.0, 1.0});
  // The power-tail quantile tends to the endpoint as u -> 1.
  CHECK(quantile(PowerTail{1.0}, 1.0 - 1e-12) == Approx(0.0).margin(1e-11));

  CHECK_THROWS_AS(generate_sample(zero, ZeroNoise{}, 1, 0), DomainError);
  CHECK_THROWS_AS(make_truth("nope"), DomainError);
}

TEST_CASE("parallel sampling matches serial sampling", "[model]") {
  const CounterRng master(99);
  const std::size_t reps = 64;
  auto draw = [&](std::size_t threads) {
    std::vector<std::vector<double>> out(reps);
    parallel_for(reps, threads, [&](std::size_t r) {
      CounterRng rng = master.split(r);
      out[r] = sample_errors(PolyBump{1.5}, 257, rng);
    });
    return out;
  };
  const auto serial = draw(1);
  CHECK(draw(4) == serial);
  CHECK(draw(7) == serial);
  CHECK(serial[0] != serial[1]);
}

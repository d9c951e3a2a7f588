#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "frontier/estimators.hpp"
#include "frontier/kernels.hpp"
#include "frontier/model.hpp"

using namespace frontier;
using Catch::Approx;

namespace {

double window_max(const Sample& s, double x, double h) {
  const auto win = window_at(s, x, h);
  return *std::max_element(win.ys.begin(), win.ys.end());
}

}  // namespace

TEST_CASE("optimal bandwidth", "[estimators]") {
  CHECK(optimal_bandwidth(1.0, 2.0, 1000) == Approx(0.1904491248).epsilon(1e-9));
  CHECK(optimal_bandwidth(1.0, 1.0, 8) == Approx(0.5098334951).epsilon(1e-9));
  double prev = 1.0;
  for (std::size_t n = 10; n < 100000; n *= 2) {
    const double h = optimal_bandwidth(1.5, 2.0, n);
    CHECK(h < prev);
    prev = h;
  }
  CHECK_THROWS_AS(optimal_bandwidth(0.0, 1.0, 100), DomainError);
  CHECK_THROWS_AS(optimal_bandwidth(1.0, 1.0, 2), DomainError);
}

TEST_CASE("windows follow the design", "[estimators]") {
  const Sample s(std::vector<double>(10, 0.0));
  const auto win = window_at(s, 0.5, 0.2);
  // i/n in [0.3, 0.7] -> i = 3..7.
  REQUIRE(win.size() == 5);
  CHECK(win.ts.front() == Approx(-1.0));
  CHECK(win.ts.back() == Approx(1.0));
  CHECK(win.ts[2] == Approx(0.0).margin(1e-15));
}

TEST_CASE("beta <= 1 gives the local maximum", "[estimators]") {
  const auto s = generate_sample(make_truth("abs_kink"), PowerTail{1.0}, 300, 11);
  const double h = 0.05;
  const auto grid = make_grid(h, 1.0 - h, 97);
  const auto fit = fit_boundary(s, h, 1.0, grid);
  CHECK(fit.degree == 0);
  for (std::size_t k = 0; k < grid.size(); ++k) CHECK(fit.values[k] == window_max(s, grid[k], h));
}

TEST_CASE("integral objective with beta = 2 equals the local linear form", "[estimators]") {
  for (int rep = 0; rep < 20; ++rep) {
    const auto s = generate_sample(make_truth("sine_linear"), MirroredExp{3.0}, 200, 100 + rep);
    const double h = 0.1;
    const auto grid = make_grid(h, 1.0 - h, 64);
    const auto a = fit_boundary(s, h, 2.0, grid);
    const auto b = fit_local_linear_hvk(s, h, grid);
    for (std::size_t k = 0; k < grid.size(); ++k) REQUIRE(a.values[k] == Approx(b.values[k]).margin(1e-8));
  }
}

TEST_CASE("local linear form on hand-computed windows", "[estimators]") {
  // n = 4, h = 0.25, x = 0.5: window i = 1, 2, 3 -> t = -1, 0, 1.
  const Sample tent({0.0, 1.0, 0.0, -5.0});
  const auto fit = fit_local_linear_hvk(tent, 0.25, {0.5});
  CHECK(fit.values[0] == Approx(1.0).margin(1e-12));
  const Sample flat({2.5, 2.5, 2.5, 2.5});
  CHECK(fit_local_linear_hvk(flat, 0.25, {0.5}).values[0] == Approx(2.5).margin(1e-12));
}

TEST_CASE("zero noise reproduces polynomial truths", "[estimators]") {
  for (double beta : {0.5, 1.0, 2.0, 3.0}) {
    const auto s = generate_sample(make_truth("zero"), ZeroNoise{}, 100, 1);
    const double h = 0.1;
    const auto fit = fit_boundary(s, h, beta, make_grid(h, 1.0 - h, 33));
    for (double v : fit.values) CHECK(v == Approx(0.0).margin(1e-12));
  }
  const auto lin = generate_sample(make_truth("linear"), ZeroNoise{}, 100, 1);
  const auto grid = make_grid(0.1, 0.9, 33);
  const auto fit = fit_boundary(lin, 0.1, 2.0, grid);
  for (std::size_t k = 0; k < grid.size(); ++k) CHECK(fit.values[k] == Approx(4.0 * grid[k]).margin(1e-10));
}

TEST_CASE("fitted polynomial lies above each design point's response", "[estimators]") {
  for (double beta : {1.0, 2.0, 3.0, 4.0}) {
    const auto s = generate_sample(make_truth("sine_linear"), PowerTail{1.5}, 400, 5);
    const double h = 0.08;
    const auto grid = design_grid(s.n, h, 1.0 - h);
    const auto fit = fit_boundary(s, h, beta, grid);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const auto i = static_cast<std::size_t>(std::lround(grid[k] * s.n));
      REQUIRE(fit.values[k] >= s.y(i) - 1e-9);
    }
  }
}

TEST_CASE("raising a response never lowers ghat", "[estimators]") {
  auto s = generate_sample(make_truth("sine_linear"), PowerTail{1.0}, 200, 8);
  const double h = 0.1;
  const auto grid = make_grid(h, 1.0 - h, 50);
  const auto before = fit_boundary(s, h, 2.0, grid);
  s.ys[99] += 0.3;
  const auto after = fit_boundary(s, h, 2.0, grid);
  for (std::size_t k = 0; k < grid.size(); ++k) CHECK(after.values[k] >= before.values[k] - 1e-10);
}

TEST_CASE("riemann variant matches brute force per window", "[estimators]") {
  const auto s = generate_sample(make_truth("quadratic"), MirroredExp{2.0}, 120, 4);
  const double h = 0.05;
  const auto grid = make_grid(h, 1.0 - h, 20);
  for (double beta : {2.0, 3.0}) {
    const auto fit = fit_boundary(s, h, beta, grid, ObjectiveKind::riemann);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const auto win = window_at(s, grid[k], h);
      const int d = degree_for(beta);
      const auto bf = brute_force_solve(win, riemann_objective(d, win.ts), d);
      // p(0) itself may be non-unique for riemann weights; compare objective.
      const auto lp = solve_upper_polynomial(win, riemann_objective(d, win.ts), d);
      CHECK(lp.objective_value == Approx(bf.objective_value).margin(1e-8));
      CHECK(fit.values[k] == lp.coeffs[0]);
    }
  }
}

TEST_CASE("degree drops when a window is too small", "[estimators]") {
  const Sample s({0.0, 1.0, 0.5, 0.2, 0.1, 0.0, 0.3, 0.0, 0.2, 0.1});
  // h = 0.1 with n = 10: three points per interior window; degree 3 needs four.
  const auto fit = fit_boundary(s, 0.1, 4.0, {0.5});
  CHECK(fit.lowered == 1);
  CHECK(std::isfinite(fit.values[0]));
}

TEST_CASE("fit_boundary validates inputs", "[estimators]") {
  const auto s = generate_sample(make_truth("zero"), PowerTail{1.0}, 50, 1);
  CHECK_THROWS_AS(fit_boundary(s, 0.6, 2.0, std::vector<double>{0.5}), DomainError);
  CHECK_THROWS_AS(fit_boundary(s, 0.1, 2.0, std::vector<double>{0.05}), DomainError);
  CHECK_THROWS_AS(fit_boundary(s, 0.1, 0.0, std::vector<double>{0.5}), DomainError);
  // h below the design spacing leaves windows empty.
  CHECK_THROWS_AS(fit_boundary(s, 0.001, 2.0, std::vector<double>{0.5 + 0.01}), EstimationError);
}

TEST_CASE("midrange estimators", "[estimators]") {
  const Sample sym({-1.0, 1.0, -1.0, 1.0});
  CHECK(fit_midrange_mean(sym, 0.25, {0.5}).values[0] == 0.0);
  const Sample two({0.0, 4.0, 0.0, 4.0});
  CHECK(fit_midrange_mean(two, 0.25, {0.5}).values[0] == 2.0);

  const auto s = generate_sample(make_truth("sine_linear"), UniformSym{0.7}, 300, 21);
  const double h = 0.07;
  const auto grid = make_grid(h, 1.0 - h, 80);
  const auto classic = fit_midrange_mean(s, h, grid);
  const auto via_lp = fit_midrange_mean(s, h, grid, 1.0);
  for (std::size_t k = 0; k < grid.size(); ++k) CHECK(via_lp.values[k] == classic.values[k]);
}

TEST_CASE("smoothing reproduces constants and lines", "[estimators]") {
  const double h = 0.1, b = 0.15;
  const auto fine_grid = make_grid(h, 1.0 - h, 8001);
  BoundaryFit constant{fine_grid, std::vector<double>(fine_grid.size(), 0.7), h, 1};
  BoundaryFit line = constant;
  for (std::size_t i = 0; i < fine_grid.size(); ++i) line.values[i] = fine_grid[i];
  const auto grid = make_grid(h + b, 1.0 - h - b, 21);
  for (int order : {2, 4}) {
    const auto k = build_kernel(order);
    const auto sc = smooth_boundary(constant, b, k, grid);
    const auto sl = smooth_boundary(line, b, k, grid);
    for (std::size_t j = 0; j < grid.size(); ++j) {
      CHECK(sc.values[j] == Approx(0.7).margin(1e-6));
      CHECK(sc.derivs[j] == Approx(0.0).margin(1e-6));
      CHECK(sl.values[j] == Approx(grid[j]).margin(1e-6));
      CHECK(sl.derivs[j] == Approx(1.0).margin(1e-5));
    }
  }
}

TEST_CASE("smoothing domain checks", "[estimators]") {
  const double h = 0.1;
  const auto fine_grid = make_grid(h, 1.0 - h, 801);
  BoundaryFit fit{fine_grid, std::vector<double>(fine_grid.size(), 0.0), h, 1};
  const auto k = build_kernel(2);
  CHECK_THROWS_AS(smooth_boundary(fit, 0.1, k, {0.15}), DomainError);
  CHECK_THROWS_AS(smooth_boundary(fit, 0.45, k, {0.5}), DomainError);
  CHECK(smooth_boundary(fit, 0.2, k, {0.5}, 1.0).outside_theory);
  CHECK_FALSE(smooth_boundary(fit, 0.2, k, {0.5}, 2.0).outside_theory);
}

TEST_CASE("smoothing a fitted boundary tracks the truth", "[estimators]") {
  const auto truth = make_truth("sine_linear");
  const auto s = generate_sample(truth, PowerTail{1.0}, 2000, 12);
  const double h = optimal_bandwidth(1.0, 2.0, s.n);
  const double b = 0.1;
  const auto fine = fit_boundary(s, h, 2.0, design_grid(s.n, h, 1.0 - h));
  const auto grid = make_grid(h + b, 1.0 - h - b, 50);
  const auto sm = smooth_boundary(fine, b, build_kernel(kernel_order_for(2.0)), grid);
  double raw_err = 0.0, smooth_err = 0.0;
  for (std::size_t i = 0; i < fine.grid.size(); ++i)
    raw_err = std::max(raw_err, std::abs(fine.values[i] - truth(fine.grid[i])));
  for (std::size_t j = 0; j < grid.size(); ++j)
    smooth_err = std::max(smooth_err, std::abs(sm.values[j] - truth(grid[j])));
  CHECK(smooth_err < raw_err + 0.2);
}

TEST_CASE("bias under g == 0", "[estimators]") {
  const auto zero = estimate_bias_g0(ZeroNoise{}, 200, 0.1, 2.0, 100, 1);
  CHECK(zero.value == 0.0);
  CHECK(zero.standard_error == 0.0);

  // Degree 0: ghat(1/2) is a maximum of non-positive errors.
  const auto d0 = estimate_bias_g0(PowerTail{1.0}, 500, 0.1, 1.0, 400, 2);
  CHECK(d0.value <= 0.0);
  // E max of k U[-1,0] errors is -1/(k+1); the window holds 101 points.
  CHECK(d0.value == Approx(-1.0 / 102.0).margin(4.0 * d0.standard_error));

  CHECK_THROWS_AS(estimate_bias_g0(PowerTail{1.0}, 500, 0.1, 1.0, 99, 2), DomainError);

  // Same seed, any thread count: identical.
  const auto a = estimate_bias_g0(PowerTail{2.0}, 300, 0.1, 2.0, 200, 9, 1);
  const auto b = estimate_bias_g0(PowerTail{2.0}, 300, 0.1, 2.0, 200, 9, 4);
  CHECK(a.value == b.value);
  CHECK(a.standard_error == b.standard_error);
}

TEST_CASE("bias halves when n h quadruples at alpha = 2", "[estimators]") {
  const auto small = estimate_bias_g0(PowerTail{2.0}, 1000, 0.1, 2.0, 3000, 31);
  const auto large = estimate_bias_g0(PowerTail{2.0}, 4000, 0.1, 2.0, 3000, 32);
  const double ratio = small.value / large.value;
  CHECK(ratio > 1.7);
  CHECK(ratio < 2.4);
}

TEST_CASE("bias correction shifts values only", "[estimators]") {
  SmoothFit fit;
  fit.grid = {0.3, 0.5};
  fit.values = {1.0, 2.0};
  fit.derivs = {0.25, -0.5};
  const auto same = bias_corrected_smooth(fit, BiasEstimate{0.0, 100, 0.0});
  CHECK(same.values == fit.values);
  const auto up = bias_corrected_smooth(fit, BiasEstimate{-0.1, 100, 0.0});
  CHECK(up.values[0] == Approx(1.1));
  CHECK(up.values[1] == Approx(2.1));
  CHECK(up.derivs == fit.derivs);
}

TEST_CASE("default smoothing bandwidth rule", "[estimators]") {
  const double h = 0.1;
  const double b = smoothing_bandwidth(1.0, 2.0, 4000, h);
  const double base = h * h + std::log(4000.0) / (4000.0 * h);
  CHECK(b == Approx(1.5 * std::pow(base, 1.0 / 1.5)));
  CHECK(smoothing_bandwidth(1.0, 2.0, 4000, h, {1.0, 0.1}) ==
        Approx(std::pow(base, 1.0 / 1.2)));
}

// Acceptance checks, one PASS/FAIL line per criterion.
//
//   acceptance [--criterion N]... [--threads T]
//
// Study settings live in the configs/ directory so the same runs can be
// repeated with the frontier-lab CLI.

#include <CLI11.hpp>
#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "../support.hpp"
#include "frontier/frontier.hpp"

using namespace frontier;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::size_t g_threads = 0;

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::string join(const std::vector<double>& v, int digits = 4) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(v[i], digits);
  return s;
}

MonteCarloResult study(const std::string& name) {
  return run_experiment(parse_config(std::string(ACCEPTANCE_CONFIG_DIR) + "/" + name), g_threads);
}

// ---------------------------------------------------------------------------

Outcome lp_oracle() {
  CounterRng rng(1);
  double worst = 0.0;
  bool max_exact = true;
  for (int rep = 0; rep < 1000; ++rep) {
    const int d = rep % 4;
    const auto win = testing_support::random_window(rng, d, 15, rep % 2 == 0);
    const auto obj = integral_objective(d);
    const auto fit = solve_upper_polynomial(win, obj, d);
    const auto bf = brute_force_solve(win, obj, d);
    worst = std::max(worst, std::abs(fit.objective_value - bf.objective_value));
    if (d == 0) max_exact &= fit.coeffs[0] == *std::max_element(win.ys.begin(), win.ys.end());
  }
  return {worst <= 1e-8 && max_exact,
          "max |simplex - brute force| = " + fmt(worst) + ", degree 0 equals window max: " + (max_exact ? "yes" : "no")};
}

Outcome local_linear_equivalence() {
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const ErrorLaw law = rep % 2 == 0 ? ErrorLaw{PowerTail{0.5 + rep / 50.0}} : ErrorLaw{MirroredExp{1.0 + rep / 25.0}};
    const auto s = generate_sample(make_truth(rep % 3 == 0 ? "quadratic" : "sine_linear"), law, 200, 1000 + rep);
    const double h = 0.05 + 0.002 * rep;
    const auto grid = make_grid(h, 1.0 - h, 512);
    const auto a = fit_boundary(s, h, 2.0, grid);
    const auto b = fit_local_linear_hvk(s, h, grid);
    for (std::size_t k = 0; k < grid.size(); ++k) worst = std::max(worst, std::abs(a.values[k] - b.values[k]));
  }
  return {worst <= 1e-8, "max |LP - local linear| over 100 samples = " + fmt(worst)};
}

Outcome kernel_moments() {
  using boost::math::quadrature::gauss;
  double worst = 0.0;
  for (int order : {2, 4, 6}) {
    const auto k = build_kernel(order);
    for (int r = 0; r < order; ++r) {
      const double m = gauss<double, 30>::integrate([&](double u) { return std::pow(u, r) * k(u); }, -1.0, 1.0);
      worst = std::max(worst, std::abs(m - (r == 0 ? 1.0 : 0.0)));
    }
  }
  const auto k2 = build_kernel(2);
  const bool biweight = k2.q_coeffs() == std::vector<double>{15.0 / 16.0};
  return {worst <= 1e-10 && biweight,
          "max moment error = " + fmt(worst) + ", order 2 is 15/16 (1 - u^2)^2: " + (biweight ? "yes" : "no")};
}

Outcome rate_exponents() {
  bool ok = true;
  std::string detail;
  for (const char* name : {"rates_a1_b1.conf", "rates_a1_b2.conf", "rates_a2_b2.conf"}) {
    const auto r = study(name);
    const bool cell = r.slope && std::abs(r.slope->deviation) <= 0.15;
    ok &= cell;
    detail += std::string(detail.empty() ? "" : "; ") + name + " slope " +
              (r.slope ? fmt(r.slope->value, 3) + " vs " + fmt(r.slope->theory, 3) : "n/a");
  }
  return {ok, detail};
}

Outcome edf_equivalence() {
  const auto r = study("edf_raw.conf");
  const auto med = r.column("median_sqrt_m_sup_edf_diff");
  return {strictly_decreasing(med), "medians " + join(med)};
}

Outcome remainder_negligible() {
  const auto r = study("edf_remainder.conf");
  const auto med = r.column("median_sqrt_m_remainder");
  return {strictly_decreasing(med), "medians " + join(med)};
}

Outcome bias_scaling() {
  bool ok = true;
  std::string detail;
  for (const char* name : {"bias_a1.conf", "bias_a2.conf"}) {
    const auto r = study(name);
    const bool cell = r.slope && std::abs(r.slope->deviation) <= 0.2;
    ok &= cell;
    detail += std::string(detail.empty() ? "" : "; ") + name + " slope " +
              (r.slope ? fmt(r.slope->value, 3) + " vs " + fmt(r.slope->theory, 3) : "n/a");
  }
  return {ok, detail};
}

Outcome power_study() {
  const auto r = study("power_cvm.conf");
  std::vector<double> size, power;
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    if (r.at(i, "zeta") == 0.0) size.push_back(r.at(i, "rejection_frequency"));
    if (r.at(i, "zeta") == 1.5) power.push_back(r.at(i, "rejection_frequency"));
  }
  bool ok = size.size() == 3 && power.size() == 3;
  for (double s : size) ok &= s >= 0.02 && s <= 0.08;
  for (std::size_t i = 0; ok && i < size.size(); ++i) ok &= power[i] > size[i];
  int inversions = 0;
  for (std::size_t i = 1; i < power.size(); ++i) inversions += power[i] < power[i - 1];
  ok &= !power.empty() && power.back() > power.front() && inversions <= 1;
  return {ok, "size at n = 50, 100, 200: " + join(size, 3) + "; power at zeta = 1.5: " + join(power, 3)};
}

Outcome ks_calibration() {
  // Known null, true errors: p-values should be uniform.
  const std::size_t reps = 2000, m = 200;
  const ErrorLaw law = UniformSym{1.0};
  std::vector<double> p(reps);
  const CounterRng master(9001);
  parallel_for(reps, g_threads, [&](std::size_t r) {
    CounterRng rng = master.split(r);
    p[r] = 1.0 - kolmogorov_cdf(ks_statistic(sample_errors(law, m, rng), law));
  });
  std::sort(p.begin(), p.end());
  double dev = 0.0;
  for (std::size_t i = 0; i < reps; ++i) {
    const double u = std::clamp(p[i], 0.0, 1.0);
    dev = std::max({dev, std::abs(static_cast<double>(i + 1) / reps - u), std::abs(static_cast<double>(i) / reps - u)});
  }
  const auto r = study("size_ks.conf");
  const double size = r.at(0, "rejection_frequency");
  return {dev <= 0.05 && size >= 0.02 && size <= 0.09,
          "p-value sup deviation " + fmt(dev, 3) + "; pipeline size at n = 500: " + fmt(size, 3)};
}

Outcome kolmogorov_series() {
  const double f = kolmogorov_cdf(1.3581);
  const double q = kolmogorov_quantile(0.95);
  return {f >= 0.9499 && f <= 0.9501 && std::abs(q - 1.3581) <= 5e-4,
          "cdf(1.3581) = " + fmt(f, 8) + ", quantile(0.95) = " + fmt(q, 8)};
}

struct Criterion {
  int id;
  const char* title;
  double limit_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<int> only;
  app.add_option("--criterion", only, "run only these criteria");
  app.add_option("--threads", g_threads, "worker threads (0 = all cores)");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> all{
      {1, "LP solver matches brute force", 10, lp_oracle},
      {2, "LP fit equals local linear form", 30, local_linear_equivalence},
      {3, "kernel moments", 1, kernel_moments},
      {4, "sup-norm rate exponents", 20 * 60, rate_exponents},
      {5, "residual EDF equivalence", 15 * 60, edf_equivalence},
      {6, "expansion remainder negligible", 20 * 60, remainder_negligible},
      {7, "bias scaling", 10 * 60, bias_scaling},
      {8, "power study", 30 * 60, power_study},
      {9, "KS calibration", 15 * 60, ks_calibration},
      {10, "Kolmogorov series", 1, kolmogorov_series},
  };

  int failures = 0;
  for (const auto& c : all) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.limit_seconds;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::cout << "criterion " << c.id << " (" << c.title << "): " << (pass ? "PASS" : "FAIL") << " | " << o.detail
              << " | " << fmt(secs, 3) << " s of " << fmt(c.limit_seconds, 4) << " s" << (in_time ? "" : " (too slow)")
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}

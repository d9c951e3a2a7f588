#pragma once

// Boundary and mean regression estimators on the fixed design i/n.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "frontier/errors.hpp"
#include "frontier/kernels.hpp"
#include "frontier/model.hpp"
#include "frontier/parallel.hpp"
#include "frontier/polyopt.hpp"
#include "frontier/rng.hpp"

namespace frontier {

enum class ObjectiveKind { integral, riemann };

inline std::string to_string(ObjectiveKind k) {
  return k == ObjectiveKind::integral ? "integral" : "riemann";
}

// Polynomial degree ceil(beta) - 1.
inline int degree_for(double beta) {
  if (!(beta > 0.0)) throw DomainError("beta must be positive");
  return static_cast<int>(std::ceil(beta)) - 1;
}

// h = ((log n) / n)^(1 / (alpha beta + 1)).
inline double optimal_bandwidth(double alpha, double beta, std::size_t n) {
  if (!(alpha > 0.0) || !(beta > 0.0)) throw DomainError("alpha and beta must be positive");
  if (n < 3) throw DomainError("optimal_bandwidth needs n >= 3");
  const double nn = static_cast<double>(n);
  return std::pow(std::log(nn) / nn, 1.0 / (alpha * beta + 1.0));
}

struct SmoothingRule {
  double factor = 1.5;
  std::optional<double> delta;  // defaults to min(0.25, (beta - 1) / 2)
};

// b = factor * (h^beta + ((log n) / (n h))^(1/alpha))^(1 / (1 + 2 delta)).
inline double smoothing_bandwidth(double alpha, double beta, std::size_t n, double h,
                                  const SmoothingRule& rule = {}) {
  if (!(alpha > 0.0) || !(beta > 0.0) || !(h > 0.0)) throw DomainError("invalid bandwidth inputs");
  const double delta =
      rule.delta.value_or(beta > 1.0 ? std::min(0.25, 0.5 * (beta - 1.0)) : 0.25);
  if (!(delta > 0.0)) throw DomainError("smoothing delta must be positive");
  const double nn = static_cast<double>(n);
  const double base = std::pow(h, beta) + std::pow(std::log(nn) / (nn * h), 1.0 / alpha);
  return rule.factor * std::pow(base, 1.0 / (1.0 + 2.0 * delta));
}

// count equispaced points covering [lo, hi].
inline std::vector<double> make_grid(double lo, double hi, std::size_t count) {
  if (!(lo <= hi)) throw DomainError("make_grid: empty interval");
  if (count == 0) return {};
  if (count == 1) return {0.5 * (lo + hi)};
  std::vector<double> g(count);
  for (std::size_t k = 0; k < count; ++k)
    g[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(count - 1);
  g.back() = hi;
  return g;
}

// Design points i/n lying in [lo, hi].
inline std::vector<double> design_grid(std::size_t n, double lo, double hi) {
  std::vector<double> g;
  const double nn = static_cast<double>(n);
  for (std::size_t i = 1; i <= n; ++i) {
    const double x = static_cast<double>(i) / nn;
    if (x >= lo - 1e-12 && x <= hi + 1e-12) g.push_back(x);
  }
  return g;
}

// Window {i : |i/n - x| <= h} in standardized coordinates t = (i/n - x)/h.
inline WindowData window_at(const Sample& s, double x, double h, double sign = 1.0) {
  const double nn = static_cast<double>(s.n);
  const double tol = 1e-12;
  const auto first = static_cast<long long>(std::ceil(nn * (x - h) - 1e-9));
  const auto last = static_cast<long long>(std::floor(nn * (x + h) + 1e-9));
  WindowData win;
  for (long long i = std::max(1LL, first); i <= std::min<long long>(last, s.n); ++i) {
    const double xi = static_cast<double>(i) / nn;
    if (std::abs(xi - x) > h + tol) continue;
    win.ts.push_back(std::clamp((xi - x) / h, -1.0, 1.0));
    win.ys.push_back(sign * s.ys[static_cast<std::size_t>(i) - 1]);
  }
  return win;
}

struct BoundaryFit {
  std::vector<double> grid;
  std::vector<double> values;
  double h = 0.0;
  int degree = 0;
  ObjectiveKind objective_kind = ObjectiveKind::integral;
  std::size_t n = 0;
  std::size_t lowered = 0;  // grid points where the degree had to drop
};

namespace detail {

// Centre value p(0) of the upper polynomial on one window.
inline double upper_fit_center(const WindowData& win, int degree, ObjectiveKind kind,
                               std::size_t* lowered = nullptr) {
  if (win.size() == 0) throw EstimationError("empty estimation window");
  int d = degree;
  if (win.size() < static_cast<std::size_t>(d) + 1) {
    d = static_cast<int>(win.size()) - 1;
    if (lowered) ++*lowered;
  }
  const auto obj = kind == ObjectiveKind::integral ? integral_objective(d)
                                                   : riemann_objective(d, win.ts);
  return solve_upper_polynomial(win, obj, d).coeffs[0];
}

inline void check_bandwidth(double h) {
  if (!(h > 0.0 && h < 0.5)) throw DomainError("bandwidth h must lie in (0, 1/2)");
}

inline void check_grid(const std::vector<double>& grid, double lo, double hi) {
  for (double x : grid)
    if (x < lo - 1e-12 || x > hi + 1e-12)
      throw DomainError("evaluation point " + std::to_string(x) + " outside [" +
                        std::to_string(lo) + ", " + std::to_string(hi) + "]");
}

// ghat at every grid point for the responses sign * Y.
inline BoundaryFit fit_upper(const Sample& s, double h, int degree, const std::vector<double>& grid,
                             ObjectiveKind kind, double sign) {
  BoundaryFit fit;
  fit.grid = grid;
  fit.h = h;
  fit.degree = degree;
  fit.objective_kind = kind;
  fit.n = s.n;
  fit.values.reserve(grid.size());
  for (double x : grid) fit.values.push_back(upper_fit_center(window_at(s, x, h, sign), degree, kind, &fit.lowered));
  return fit;
}

}  // namespace detail

// ghat(x) = p(0) of the minimal-area polynomial of degree ceil(beta)-1 above
// the window data.
inline BoundaryFit fit_boundary(const Sample& s, double h, double beta,
                                const std::vector<double>& grid,
                                ObjectiveKind kind = ObjectiveKind::integral) {
  detail::check_bandwidth(h);
  detail::check_grid(grid, h, 1.0 - h);
  return detail::fit_upper(s, h, degree_for(beta), grid, kind, 1.0);
}

// ghat on the 512-point default grid over [h, 1 - h].
inline BoundaryFit fit_boundary(const Sample& s, double h, double beta) {
  return fit_boundary(s, h, beta, make_grid(h, 1.0 - h, 512));
}

// Local linear form: inf{a0 : Y_i <= a0 + a1 (i/n - x) on the window}.
inline BoundaryFit fit_local_linear_hvk(const Sample& s, double h, const std::vector<double>& grid) {
  detail::check_bandwidth(h);
  detail::check_grid(grid, h, 1.0 - h);
  BoundaryFit fit;
  fit.grid = grid;
  fit.h = h;
  fit.degree = 1;
  fit.n = s.n;
  const ObjectiveWeights intercept_only{{1.0, 0.0}};
  for (double x : grid) {
    const auto win = window_at(s, x, h);
    if (win.size() < 2) throw EstimationError("local linear fit needs two points per window");
    fit.values.push_back(solve_upper_polynomial(win, intercept_only, 1).coeffs[0]);
  }
  return fit;
}

// Local midrange (min + max) / 2, or with `beta` the symmetric form
// (ghat[Y] - ghat[-Y]) / 2 with polynomials of degree ceil(beta) - 1.
inline BoundaryFit fit_midrange_mean(const Sample& s, double h, const std::vector<double>& grid,
                                     std::optional<double> beta = std::nullopt) {
  detail::check_bandwidth(h);
  detail::check_grid(grid, h, 1.0 - h);
  if (beta) {
    const int d = degree_for(*beta);
    auto upper = detail::fit_upper(s, h, d, grid, ObjectiveKind::integral, 1.0);
    const auto lower = detail::fit_upper(s, h, d, grid, ObjectiveKind::integral, -1.0);
    for (std::size_t k = 0; k < grid.size(); ++k)
      upper.values[k] = 0.5 * (upper.values[k] - lower.values[k]);
    upper.lowered += lower.lowered;
    return upper;
  }
  BoundaryFit fit;
  fit.grid = grid;
  fit.h = h;
  fit.degree = 0;
  fit.n = s.n;
  for (double x : grid) {
    const auto win = window_at(s, x, h);
    if (win.size() == 0) throw EstimationError("empty estimation window");
    const auto [lo, hi] = std::minmax_element(win.ys.begin(), win.ys.end());
    fit.values.push_back(0.5 * (*lo + *hi));
  }
  return fit;
}

struct SmoothFit {
  std::vector<double> grid;
  std::vector<double> values;  // gtilde
  std::vector<double> derivs;  // gtilde'
  double h = 0.0;
  double b = 0.0;
  int kernel_order = 2;
  bool outside_theory = false;  // beta <= 1: smoothing results do not apply
};

// gtilde(x) = int_h^{1-h} ghat(z) K((x - z)/b) / b dz and its derivative,
// by the composite trapezoid rule on the grid of `fine`.
inline SmoothFit smooth_boundary(const BoundaryFit& fine, double b, const HigherOrderKernel& k,
                                 const std::vector<double>& grid, double beta = 2.0) {
  const double h = fine.h;
  if (!(b > 0.0)) throw DomainError("smoothing bandwidth must be positive");
  if (!(h + b < 0.5)) throw DomainError("h + b must be below 1/2");
  if (fine.grid.size() < 2) throw DomainError("fine fit needs at least two grid points");
  if (fine.n > 0) {
    const double step = 1.0 / static_cast<double>(fine.n);
    if (fine.grid.front() > h + step + 1e-12 || fine.grid.back() < 1.0 - h - step - 1e-12)
      throw DomainError("fine fit does not cover [h, 1 - h]");
    for (std::size_t i = 1; i < fine.grid.size(); ++i)
      if (fine.grid[i] - fine.grid[i - 1] > step + 1e-12)
        throw DomainError("fine fit grid is coarser than 1/n");
  }
  detail::check_grid(grid, h + b, 1.0 - h - b);

  SmoothFit out;
  out.grid = grid;
  out.h = h;
  out.b = b;
  out.kernel_order = k.order();
  out.outside_theory = beta <= 1.0;
  out.values.reserve(grid.size());
  out.derivs.reserve(grid.size());
  const auto& z = fine.grid;
  const auto& g = fine.values;
  for (double x : grid) {
    auto lo = std::lower_bound(z.begin(), z.end(), x - b);
    auto hi = std::upper_bound(z.begin(), z.end(), x + b);
    std::size_t i0 = static_cast<std::size_t>(lo - z.begin());
    std::size_t i1 = static_cast<std::size_t>(hi - z.begin());
    // Include one neighbour on each side so partial end cells are covered.
    if (i0 > 0) --i0;
    if (i1 < z.size()) ++i1;
    double val = 0.0, der = 0.0;
    double prev_v = 0.0, prev_d = 0.0;
    for (std::size_t i = i0; i < i1; ++i) {
      const double u = (x - z[i]) / b;
      const double fv = g[i] * k(u) / b;
      const double fd = g[i] * k.derivative(u) / (b * b);
      if (i > i0) {
        const double dz = z[i] - z[i - 1];
        val += 0.5 * dz * (fv + prev_v);
        der += 0.5 * dz * (fd + prev_d);
      }
      prev_v = fv;
      prev_d = fd;
    }
    out.values.push_back(val);
    out.derivs.push_back(der);
  }
  return out;
}

struct BiasEstimate {
  double value = 0.0;
  std::size_t replicates = 0;
  double standard_error = 0.0;
};

namespace detail {

// ghat(1/2) under g == 0 for each replicate; stream r is keyed by (seed, r).
inline std::vector<double> center_fits_g0(const ErrorLaw& law, std::size_t n, double h, double beta,
                                          std::size_t replicates, std::uint64_t seed,
                                          std::size_t threads = 0) {
  validate(law);
  check_bandwidth(h);
  const int d = degree_for(beta);
  const CounterRng master(seed);
  std::vector<double> out(replicates);
  parallel_for(replicates, threads, [&](std::size_t r) {
    CounterRng rng = master.split(r);
    const Sample s(sample_errors(law, n, rng));
    out[r] = upper_fit_center(window_at(s, 0.5, h), d, ObjectiveKind::integral);
  });
  return out;
}

inline BiasEstimate summarize(const std::vector<double>& v) {
  BiasEstimate e;
  e.replicates = v.size();
  if (v.empty()) return e;
  // Fixed-order summation keeps the result independent of thread count.
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  e.value = mean;
  e.standard_error =
      v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()))
                   : 0.0;
  return e;
}

}  // namespace detail

// Monte-Carlo estimate of E_{g == 0} ghat(1/2).
inline BiasEstimate estimate_bias_g0(const ErrorLaw& law, std::size_t n, double h, double beta,
                                     std::size_t replicates, std::uint64_t seed,
                                     std::size_t threads = 0) {
  if (replicates < 100) throw DomainError("estimate_bias_g0 needs at least 100 replicates");
  return detail::summarize(detail::center_fits_g0(law, n, h, beta, replicates, seed, threads));
}

// gtilde* = gtilde - E_{g == 0} ghat(1/2).
inline SmoothFit bias_corrected_smooth(SmoothFit fit, const BiasEstimate& bias) {
  for (double& v : fit.values) v -= bias.value;
  return fit;
}

}  // namespace frontier

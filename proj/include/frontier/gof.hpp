#pragma once

// Residual empirical distribution functions and goodness-of-fit tests for
// the error law.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iterator>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "frontier/errors.hpp"
#include "frontier/estimators.hpp"
#include "frontier/model.hpp"
#include "frontier/parallel.hpp"
#include "frontier/rng.hpp"

namespace frontier {

// ---------------------------------------------------------------------------
// Residuals

enum class ResidualVariant { boundary, mean, smooth };

struct Residuals {
  std::vector<double> values;       // index i - 1 for design point i/n; NaN off the fit
  std::vector<char> interior_mask;  // 1 where the residual enters the EDF
  std::size_t m = 0;                // popcount(interior_mask)
  ResidualVariant variant = ResidualVariant::boundary;

  std::vector<double> interior() const {
    std::vector<double> out;
    out.reserve(m);
    for (std::size_t i = 0; i < values.size(); ++i)
      if (interior_mask[i]) out.push_back(values[i]);
    return out;
  }
};

namespace detail {

// n * t snapped to an integer when within rounding noise.
inline double scaled(std::size_t n, double t) {
  const double v = static_cast<double>(n) * t;
  const double r = std::round(v);
  return std::abs(v - r) < 1e-9 ? r : v;
}

// Value of `grid/values` at each design point i/n, NaN where absent.
inline std::vector<double> on_design(std::size_t n, const std::vector<double>& grid,
                                     const std::vector<double>& values) {
  std::vector<double> out(n, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double v = static_cast<double>(n) * grid[k];
    const double r = std::round(v);
    if (std::abs(v - r) > 1e-7 || r < 1 || r > static_cast<double>(n)) continue;
    out[static_cast<std::size_t>(r) - 1] = values[k];
  }
  return out;
}

inline Residuals build_residuals(const Sample& s, const std::vector<double>& fitted,
                                 std::size_t first, std::size_t last, ResidualVariant variant) {
  Residuals r;
  r.variant = variant;
  r.values.assign(s.n, std::numeric_limits<double>::quiet_NaN());
  r.interior_mask.assign(s.n, 0);
  for (std::size_t i = 1; i <= s.n; ++i) {
    if (!std::isnan(fitted[i - 1])) r.values[i - 1] = s.y(i) - fitted[i - 1];
    if (i >= first && i <= last) {
      if (std::isnan(fitted[i - 1]))
        throw DomainError("fit does not cover interior design point " + std::to_string(i));
      r.interior_mask[i - 1] = 1;
      ++r.m;
    }
  }
  return r;
}

}  // namespace detail

// Interior design points h < i/n <= 1 - h: count n - floor(nh) - ceil(nh).
inline std::pair<std::size_t, std::size_t> interior_range(std::size_t n, double h) {
  const double nh = detail::scaled(n, h);
  const auto first = static_cast<std::size_t>(std::floor(nh)) + 1;
  const auto last = n - static_cast<std::size_t>(std::ceil(nh));
  return {first, last};
}

// Design points in [h + b, 1 - h - b]: count n - 2 ceil(n (h + b)) + 1.
inline std::pair<std::size_t, std::size_t> smooth_interior_range(std::size_t n, double h, double b) {
  const auto c = static_cast<std::size_t>(std::ceil(detail::scaled(n, h + b)));
  return {c, n - c};
}

// Residuals Y_i - fit(i/n) from a boundary (eps-hat) or mean (eta-hat) fit.
inline Residuals residuals(const Sample& s, const BoundaryFit& fit,
                           ResidualVariant variant = ResidualVariant::boundary) {
  if (variant == ResidualVariant::smooth)
    throw DomainError("smooth residuals need a SmoothFit");
  const auto [first, last] = interior_range(s.n, fit.h);
  if (first > last) throw DomainError("no interior design points");
  return detail::build_residuals(s, detail::on_design(s.n, fit.grid, fit.values), first, last,
                                 variant);
}

// Residuals Y_i - gtilde(i/n) on I_n = [h + b, 1 - h - b].
inline Residuals residuals(const Sample& s, const SmoothFit& fit) {
  const auto [first, last] = smooth_interior_range(s.n, fit.h, fit.b);
  if (first > last) throw DomainError("no design points inside I_n");
  return detail::build_residuals(s, detail::on_design(s.n, fit.grid, fit.values), first, last,
                                 ResidualVariant::smooth);
}

// ---------------------------------------------------------------------------
// Empirical distribution functions

class EmpiricalCdf {
 public:
  explicit EmpiricalCdf(std::vector<double> values) : sorted_(std::move(values)) {
    if (sorted_.empty()) throw DomainError("empirical cdf of an empty sample");
    std::stable_sort(sorted_.begin(), sorted_.end());
  }

  double operator()(double y) const {
    const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), y);
    return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
  }

  // Left limit F(y-).
  double left(double y) const {
    const auto it = std::lower_bound(sorted_.begin(), sorted_.end(), y);
    return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
  }

  const std::vector<double>& sorted() const noexcept { return sorted_; }
  std::size_t size() const noexcept { return sorted_.size(); }

 private:
  std::vector<double> sorted_;
};

// (1/m) sum_i 1{values_i <= y} mask_i.
inline double edf(std::span<const double> values, std::span<const char> mask, std::size_t m,
                  double y) {
  if (m == 0) throw DomainError("edf: no interior observations");
  std::size_t count = 0, seen = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!mask[i]) continue;
    ++seen;
    if (values[i] <= y) ++count;
  }
  if (seen != m) throw DomainError("edf: m does not match the mask");
  return static_cast<double>(count) / static_cast<double>(m);
}

inline double edf(const Residuals& r, double y) { return edf(r.values, r.interior_mask, r.m, y); }

// sup_y |A(y) - B(y)| for two step functions, evaluated exactly at every
// jump point and its left limit.
inline double sup_edf_diff(const EmpiricalCdf& a, const EmpiricalCdf& b) {
  std::vector<double> jumps;
  jumps.reserve(a.size() + b.size());
  std::merge(a.sorted().begin(), a.sorted().end(), b.sorted().begin(), b.sorted().end(),
             std::back_inserter(jumps));
  jumps.erase(std::unique(jumps.begin(), jumps.end()), jumps.end());
  double sup = 0.0;
  for (double y : jumps) {
    sup = std::max(sup, std::abs(a(y) - b(y)));
    sup = std::max(sup, std::abs(a.left(y) - b.left(y)));
  }
  return sup;
}

// Second term of the residual EDF expansion,
//   (1/m) sum_j [F(y + delta_j) - F(y)],  delta_j = (gtilde* - g)(j/n),
// for each y in y_grid.
inline std::vector<double> expansion_remainder(std::span<const double> deltas, const ErrorLaw& law,
                                               std::span<const double> y_grid) {
  if (deltas.empty()) throw DomainError("expansion_remainder: no interior points");
  std::vector<double> out;
  out.reserve(y_grid.size());
  for (double y : y_grid) {
    const double fy = cdf(law, y);
    double acc = 0.0;
    for (double d : deltas) acc += cdf(law, y + d) - fy;
    out.push_back(acc / static_cast<double>(deltas.size()));
  }
  return out;
}

// Convenience form: gtilde* evaluated at design points, the true g, and the
// mask I_n taken from the fit's bandwidths.
inline std::vector<double> expansion_remainder(const SmoothFit& star, const RegressionTruth& g,
                                               std::size_t n, const ErrorLaw& law,
                                               std::span<const double> y_grid) {
  const auto on = detail::on_design(n, star.grid, star.values);
  const auto [first, last] = smooth_interior_range(n, star.h, star.b);
  std::vector<double> deltas;
  for (std::size_t j = first; j <= last; ++j) {
    if (std::isnan(on[j - 1])) throw DomainError("gtilde* missing at an interior design point");
    deltas.push_back(on[j - 1] - g(static_cast<double>(j) / static_cast<double>(n)));
  }
  return expansion_remainder(deltas, law, y_grid);
}

// ---------------------------------------------------------------------------
// Parameter estimates under the null

// max |eta-hat| over the interior.
inline double estimate_theta_uniform(const Residuals& r) {
  if (r.m == 0) throw DomainError("estimate_theta_uniform: empty interior");
  double t = 0.0;
  for (std::size_t i = 0; i < r.values.size(); ++i)
    if (r.interior_mask[i]) t = std::max(t, std::abs(r.values[i]));
  return t;
}

// -1 / (interior mean of eps-hat).
inline double estimate_theta_exp(const Residuals& r) {
  if (r.m == 0) throw DomainError("estimate_theta_exp: empty interior");
  double sum = 0.0;
  for (std::size_t i = 0; i < r.values.size(); ++i)
    if (r.interior_mask[i]) sum += r.values[i];
  const double mean = sum / static_cast<double>(r.m);
  if (!(mean < 0.0)) throw DomainError("estimate_theta_exp: interior mean residual is not negative");
  return -1.0 / mean;
}

// ---------------------------------------------------------------------------
// Test statistics

namespace detail {

template <class Cdf>
std::vector<double> pit_sorted(std::span<const double> xs, const Cdf& f) {
  std::vector<double> u;
  u.reserve(xs.size());
  for (double x : xs) u.push_back(f(x));
  std::stable_sort(u.begin(), u.end());
  return u;
}

}  // namespace detail

// sqrt(m) sup_y |F_m(y) - F0(y)| for a continuous null cdf F0, from the
// sorted probability-integral transforms.
template <class Cdf>
double ks_statistic(std::span<const double> xs, const Cdf& null_cdf) {
  if (xs.empty()) throw DomainError("ks_statistic: empty sample");
  const auto u = detail::pit_sorted(xs, null_cdf);
  const double m = static_cast<double>(u.size());
  double d = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    d = std::max(d, static_cast<double>(i + 1) / m - u[i]);
    d = std::max(d, u[i] - static_cast<double>(i) / m);
  }
  return std::sqrt(m) * d;
}

inline double ks_statistic(std::span<const double> xs, const ErrorLaw& null) {
  return ks_statistic(xs, [&](double y) { return cdf(null, y); });
}

inline double ks_statistic(const Residuals& r, const ErrorLaw& null) {
  return ks_statistic(r.interior(), null);
}

// m int (F_m - F0)^2 dF0 = sum (U_(i) - (2i - 1)/(2m))^2 + 1/(12m).
template <class Cdf>
double cvm_statistic(std::span<const double> xs, const Cdf& null_cdf) {
  if (xs.empty()) throw DomainError("cvm_statistic: empty sample");
  const auto u = detail::pit_sorted(xs, null_cdf);
  const double m = static_cast<double>(u.size());
  double s = 1.0 / (12.0 * m);
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double e = u[i] - (2.0 * static_cast<double>(i) + 1.0) / (2.0 * m);
    s += e * e;
  }
  return s;
}

inline double cvm_statistic(std::span<const double> xs, const ErrorLaw& null) {
  return cvm_statistic(xs, [&](double y) { return cdf(null, y); });
}

inline double cvm_statistic(const Residuals& r, const ErrorLaw& null) {
  return cvm_statistic(r.interior(), null);
}

// ---------------------------------------------------------------------------
// Limiting laws

// P(sup |B(t)| <= x) for a Brownian bridge B.
inline double kolmogorov_cdf(double x) {
  using std::numbers::pi;
  if (!(x > 0.0)) return 0.0;
  if (x < 1.0) {
    // Jacobi-transformed series, fast for small x.
    const double c = pi * pi / (8.0 * x * x);
    double s = 0.0;
    for (int k = 1; k < 100; ++k) {
      const double term = std::exp(-(2 * k - 1) * (2 * k - 1) * c);
      s += term;
      if (term < 1e-16) break;
    }
    return std::sqrt(2.0 * pi) / x * s;
  }
  double s = 0.0;
  for (int k = 1; k < 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    s += (k % 2 == 1 ? term : -term);
    if (term < 1e-12) break;
  }
  return std::clamp(1.0 - 2.0 * s, 0.0, 1.0);
}

// Limit law of the Cramer-von Mises statistic (Anderson-Darling series).
inline double cvm_limit_cdf(double x) {
  using std::numbers::pi;
  if (!(x > 0.0)) return 0.0;
  if (x > 30.0) return 1.0;
  double s = 0.0;
  double coef = 1.0;  // Gamma(j + 1/2) / (Gamma(1/2) j!)
  for (int j = 0; j < 200; ++j) {
    const double a = 4.0 * j + 1.0;
    const double z = a * a / (16.0 * x);
    if (z > 700.0) break;
    const double term = coef * std::sqrt(a) * std::exp(-z) * std::cyl_bessel_k(0.25, z);
    s += term;
    if (term < 1e-16) break;
    coef *= (j + 0.5) / (j + 1.0);
  }
  return std::clamp(s / (pi * std::sqrt(x)), 0.0, 1.0);
}

namespace detail {

template <class Cdf>
double invert_cdf(Cdf&& f, double p, double lo, double hi) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("probability must lie in (0, 1)");
  for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

inline double kolmogorov_quantile(double p) { return detail::invert_cdf(kolmogorov_cdf, p, 0.0, 10.0); }
inline double cvm_limit_quantile(double p) { return detail::invert_cdf(cvm_limit_cdf, p, 1e-6, 30.0); }

// ---------------------------------------------------------------------------
// Critical values and the test procedure

enum class TestKind { ks, cvm };
enum class NullFamily { uniform_sym, mirrored_exp };

inline std::string to_string(TestKind t) { return t == TestKind::ks ? "ks" : "cvm"; }
inline std::string to_string(NullFamily f) {
  return f == NullFamily::uniform_sym ? "uniform" : "mexp";
}

struct Asymptotic {};
struct MonteCarlo {
  std::size_t replicates = 200;
  std::uint64_t seed = 0;
};
using CvMode = std::variant<Asymptotic, MonteCarlo>;

// i.i.d. sample of size m from a fully specified null; no estimation.
struct SimpleNull {
  std::size_t m = 100;
};

// Composite null handled through the whole estimation pipeline.
struct PipelineNull {
  NullFamily family = NullFamily::uniform_sym;
  std::size_t n = 100;
  double h = 0.1;
  double beta = 2.0;
};

using NullSpec = std::variant<SimpleNull, PipelineNull>;

struct PipelineOutcome {
  double theta_hat = 0.0;
  double statistic = 0.0;
  std::size_t m = 0;
  int degree = 0;
};

// fit -> residuals -> theta-hat -> statistic. The uniform family uses the
// symmetric mean estimator (ghat[Y] - ghat[-Y]) / 2, the mirrored
// exponential family the boundary estimator.
inline PipelineOutcome run_pipeline(const Sample& s, NullFamily family, double beta, double h,
                                    TestKind test) {
  const auto grid = design_grid(s.n, h, 1.0 - h);
  // Residual spreads below rounding noise of the data count as zero.
  double scale = 1.0;
  for (double y : s.ys) scale = std::max(scale, std::abs(y));
  const double tiny = 1e-12 * scale;
  PipelineOutcome out;
  out.degree = degree_for(beta);
  ErrorLaw null;
  Residuals r;
  if (family == NullFamily::uniform_sym) {
    r = residuals(s, fit_midrange_mean(s, h, grid, beta), ResidualVariant::mean);
    out.theta_hat = estimate_theta_uniform(r);
    if (!(out.theta_hat > tiny))
      throw DomainError("degenerate residuals: estimated uniform half-width is zero");
    null = UniformSym{out.theta_hat};
  } else {
    r = residuals(s, fit_boundary(s, h, beta, grid), ResidualVariant::boundary);
    out.theta_hat = estimate_theta_exp(r);
    if (!(1.0 / out.theta_hat > tiny))
      throw DomainError("degenerate residuals: mean residual is zero");
    null = MirroredExp{out.theta_hat};
  }
  out.m = r.m;
  out.statistic = test == TestKind::ks ? ks_statistic(r, null) : cvm_statistic(r, null);
  return out;
}

// Sorted Monte-Carlo null distribution of the statistic. Pipeline nulls are
// simulated with g == 0: the fits are affine-equivariant and the statistics
// invariant under rescaling the errors, so theta drops out and any linear g
// gives the same law.
inline std::vector<double> null_distribution(TestKind test, const NullSpec& spec,
                                             const MonteCarlo& mc, std::size_t threads = 0) {
  if (mc.replicates < 1) throw DomainError("Monte-Carlo mode needs at least one replicate");
  std::vector<double> stats(mc.replicates);
  const CounterRng master(mc.seed);
  if (const auto* simple = std::get_if<SimpleNull>(&spec)) {
    const ErrorLaw law = UniformSym{1.0};
    parallel_for(mc.replicates, threads, [&](std::size_t r) {
      CounterRng rng = master.split(r);
      const auto xs = sample_errors(law, simple->m, rng);
      stats[r] = test == TestKind::ks ? ks_statistic(xs, law) : cvm_statistic(xs, law);
    });
  } else {
    const auto& p = std::get<PipelineNull>(spec);
    const ErrorLaw law = p.family == NullFamily::uniform_sym ? ErrorLaw{UniformSym{1.0}}
                                                             : ErrorLaw{MirroredExp{1.0}};
    const auto zero = make_truth("zero");
    parallel_for(mc.replicates, threads, [&](std::size_t r) {
      CounterRng rng = master.split(r);
      const auto s = generate_sample(zero, law, p.n, rng);
      stats[r] = run_pipeline(s, p.family, p.beta, p.h, test).statistic;
    });
  }
  std::sort(stats.begin(), stats.end());
  return stats;
}

// Empirical (1 - level) quantile of a sorted sample (inverse EDF).
inline double upper_quantile(const std::vector<double>& sorted, double level) {
  const double q = std::ceil((1.0 - level) * static_cast<double>(sorted.size()) - 1e-9);
  const auto idx = static_cast<std::size_t>(std::clamp(q, 1.0, static_cast<double>(sorted.size())));
  return sorted[idx - 1];
}

inline bool asymptotic_supported(TestKind, const NullSpec& spec) {
  if (std::holds_alternative<SimpleNull>(spec)) return true;
  // With theta estimated by max |eta-hat| the effect is o(n^{-1/2}), so both
  // uniform statistics keep their simple-null limits. For the mirrored
  // exponential the estimate changes the limit law.
  return std::get<PipelineNull>(spec).family == NullFamily::uniform_sym;
}

inline double critical_value(TestKind test, const NullSpec& spec, double level, const CvMode& mode,
                             std::size_t threads = 0) {
  if (!(level > 0.0 && level < 1.0)) throw DomainError("level must lie in (0, 1)");
  if (std::holds_alternative<Asymptotic>(mode)) {
    if (!asymptotic_supported(test, spec))
      throw UnsupportedMode(
          "no asymptotic critical value for an estimated-parameter mirrored exponential null; "
          "use Monte-Carlo mode (mc:R)");
    return test == TestKind::ks ? kolmogorov_quantile(1.0 - level) : cvm_limit_quantile(1.0 - level);
  }
  return upper_quantile(null_distribution(test, spec, std::get<MonteCarlo>(mode), threads), level);
}

struct GofOptions {
  NullFamily family = NullFamily::uniform_sym;
  double beta = 2.0;
  double h = 0.1;
  double level = 0.05;
  TestKind test = TestKind::cvm;
  CvMode cv = Asymptotic{};
  std::size_t threads = 0;
};

struct GofResult {
  double theta_hat = 0.0;
  double statistic = 0.0;
  double critical_value = 0.0;
  double p_value = 1.0;
  bool reject = false;
  // metadata
  std::size_t m = 0;
  double h = 0.0;
  double beta = 0.0;
  int degree = 0;
  TestKind test = TestKind::cvm;
  NullFamily family = NullFamily::uniform_sym;
  std::string cv_source;
  std::string normalization = "sqrt(m_n)";
};

// Critical value and p-value for one observed statistic.
struct Calibration {
  double critical = 0.0;
  double p_value = 1.0;
  std::string source;
};

inline Calibration calibrate(double statistic, TestKind test, const NullSpec& spec, double level,
                             const CvMode& mode, std::size_t threads = 0) {
  Calibration c;
  if (std::holds_alternative<Asymptotic>(mode)) {
    c.critical = critical_value(test, spec, level, mode);
    c.p_value = 1.0 - (test == TestKind::ks ? kolmogorov_cdf(statistic) : cvm_limit_cdf(statistic));
    c.source = test == TestKind::ks ? "asymptotic:kolmogorov" : "asymptotic:omega2";
    return c;
  }
  const auto& mc = std::get<MonteCarlo>(mode);
  const auto dist = null_distribution(test, spec, mc, threads);
  c.critical = upper_quantile(dist, level);
  const auto exceed = static_cast<double>(dist.end() - std::lower_bound(dist.begin(), dist.end(), statistic));
  c.p_value = (1.0 + exceed) / (static_cast<double>(dist.size()) + 1.0);
  c.source = "monte_carlo:" + std::to_string(mc.replicates);
  return c;
}

inline GofResult gof_test(const Sample& s, const GofOptions& opt) {
  detail::check_bandwidth(opt.h);
  if (!(opt.level > 0.0 && opt.level < 1.0)) throw DomainError("level must lie in (0, 1)");
  const auto out = run_pipeline(s, opt.family, opt.beta, opt.h, opt.test);
  const NullSpec spec = PipelineNull{opt.family, s.n, opt.h, opt.beta};
  const auto cal = calibrate(out.statistic, opt.test, spec, opt.level, opt.cv, opt.threads);
  GofResult r;
  r.theta_hat = out.theta_hat;
  r.statistic = out.statistic;
  r.critical_value = cal.critical;
  r.p_value = std::clamp(cal.p_value, 0.0, 1.0);
  r.reject = r.statistic > r.critical_value;
  r.m = out.m;
  r.h = opt.h;
  r.beta = opt.beta;
  r.degree = out.degree;
  r.test = opt.test;
  r.family = opt.family;
  r.cv_source = cal.source;
  return r;
}

// ---------------------------------------------------------------------------
// Where the asymptotic results apply

struct ApplicabilityReport {
  bool edf_equivalence = false;      // 1/beta < alpha < 2 - 1/beta
  bool remainder_bandwidths = false;  // alpha < 3 - 3/(2 beta): h and b rates are compatible
  bool expansion_whole_line = false;  // beta > 1, alpha > 1/beta, admissible delta exists
  bool smoothing_covered = false;     // beta > 1
};

inline ApplicabilityReport applicability_report(double alpha, double beta) {
  if (!(alpha > 0.0) || !(beta > 0.0)) throw DomainError("alpha and beta must be positive");
  ApplicabilityReport r;
  r.edf_equivalence = 1.0 / beta < alpha && alpha < 2.0 - 1.0 / beta;
  r.remainder_bandwidths = alpha < 3.0 - 3.0 / (2.0 * beta);
  r.smoothing_covered = beta > 1.0;
  // For beta <= 2 some delta with max(0, 1/alpha - 1) < delta < beta - 1 must exist.
  const bool delta_ok = beta > 2.0 || std::max(0.0, 1.0 / alpha - 1.0) < beta - 1.0;
  r.expansion_whole_line = beta > 1.0 && alpha > 1.0 / beta && delta_ok;
  return r;
}

}  // namespace frontier

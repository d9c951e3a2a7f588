#pragma once

// Fixed-design boundary regression model Y_i = g(i/n) + eps_i.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "frontier/errors.hpp"
#include "frontier/rng.hpp"

namespace frontier {

// F(y) = 1 - |y|^alpha on [-1, 0].
struct PowerTail {
  double alpha = 1.0;
};

// F(y) = exp(theta * y) for y < 0.
struct MirroredExp {
  double theta = 1.0;
};

// Uniform on [-theta, theta].
struct UniformSym {
  double theta = 1.0;
};

// Density ((zeta + 1) / 2) (1 - |y|)^zeta on [-1, 1]; zeta = 0 is U[-1, 1].
struct PolyBump {
  double zeta = 0.0;
};

// eps == 0. Used for zero-noise checks.
struct ZeroNoise {};

using ErrorLaw = std::variant<PowerTail, MirroredExp, UniformSym, PolyBump, ZeroNoise>;

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

inline void validate(const ErrorLaw& law) {
  std::visit(Overloaded{
                 [](const PowerTail& l) {
                   if (!(l.alpha > 0.0) || !std::isfinite(l.alpha))
                     throw DomainError("powertail: alpha must be positive");
                 },
                 [](const MirroredExp& l) {
                   if (!(l.theta > 0.0) || !std::isfinite(l.theta))
                     throw DomainError("mexp: theta must be positive");
                 },
                 [](const UniformSym& l) {
                   if (!(l.theta > 0.0) || !std::isfinite(l.theta))
                     throw DomainError("uniform: theta must be positive");
                 },
                 [](const PolyBump& l) {
                   if (!(l.zeta > -1.0) || !std::isfinite(l.zeta))
                     throw DomainError("polybump: zeta must exceed -1");
                 },
                 [](const ZeroNoise&) {},
             },
             law);
}

inline bool is_one_sided(const ErrorLaw& law) {
  return std::holds_alternative<PowerTail>(law) || std::holds_alternative<MirroredExp>(law) ||
         std::holds_alternative<ZeroNoise>(law);
}

// Closed support [lo, hi]; lo may be -inf.
inline std::pair<double, double> support(const ErrorLaw& law) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  return std::visit(Overloaded{
                        [](const PowerTail&) { return std::pair{-1.0, 0.0}; },
                        [&](const MirroredExp&) { return std::pair{-inf, 0.0}; },
                        [](const UniformSym& l) { return std::pair{-l.theta, l.theta}; },
                        [](const PolyBump&) { return std::pair{-1.0, 1.0}; },
                        [](const ZeroNoise&) { return std::pair{0.0, 0.0}; },
                    },
                    law);
}

inline double cdf(const ErrorLaw& law, double y) {
  const auto [lo, hi] = support(law);
  if (y >= hi) return 1.0;
  if (y < lo) return 0.0;
  const double v = std::visit(
      Overloaded{
          [&](const PowerTail& l) { return 1.0 - std::pow(-y, l.alpha); },
          [&](const MirroredExp& l) { return std::exp(l.theta * y); },
          [&](const UniformSym& l) { return (y + l.theta) / (2.0 * l.theta); },
          [&](const PolyBump& l) {
            const double e = l.zeta + 1.0;
            return y <= 0.0 ? 0.5 * std::pow(1.0 + y, e) : 1.0 - 0.5 * std::pow(1.0 - y, e);
          },
          [&](const ZeroNoise&) { return 0.0; },
      },
      law);
  return std::clamp(v, 0.0, 1.0);
}

inline double pdf(const ErrorLaw& law, double y) {
  const auto [lo, hi] = support(law);
  if (y < lo || y > hi) return 0.0;
  return std::visit(Overloaded{
                        [&](const PowerTail& l) {
                          return y == 0.0 && l.alpha < 1.0
                                     ? std::numeric_limits<double>::infinity()
                                     : l.alpha * std::pow(-y, l.alpha - 1.0);
                        },
                        [&](const MirroredExp& l) { return l.theta * std::exp(l.theta * y); },
                        [&](const UniformSym& l) { return 0.5 / l.theta; },
                        [&](const PolyBump& l) {
                          return 0.5 * (l.zeta + 1.0) * std::pow(1.0 - std::abs(y), l.zeta);
                        },
                        [&](const ZeroNoise&) { return std::numeric_limits<double>::infinity(); },
                    },
                    law);
}

inline double quantile(const ErrorLaw& law, double u) {
  if (!(u > 0.0 && u < 1.0)) throw DomainError("quantile: u must lie in (0, 1)");
  return std::visit(Overloaded{
                        [&](const PowerTail& l) { return -std::pow(1.0 - u, 1.0 / l.alpha); },
                        [&](const MirroredExp& l) { return std::log(u) / l.theta; },
                        [&](const UniformSym& l) { return l.theta * (2.0 * u - 1.0); },
                        [&](const PolyBump& l) {
                          const double inv = 1.0 / (l.zeta + 1.0);
                          return u <= 0.5 ? std::pow(2.0 * u, inv) - 1.0
                                          : 1.0 - std::pow(2.0 * (1.0 - u), inv);
                        },
                        [&](const ZeroNoise&) { return 0.0; },
                    },
                    law);
}

// Extreme-value index at the upper endpoint. Infinite for ZeroNoise.
inline double alpha_of(const ErrorLaw& law) {
  return std::visit(Overloaded{
                        [](const PowerTail& l) { return l.alpha; },
                        [](const MirroredExp&) { return 1.0; },
                        [](const UniformSym&) { return 1.0; },
                        [](const PolyBump& l) { return l.zeta + 1.0; },
                        [](const ZeroNoise&) { return std::numeric_limits<double>::infinity(); },
                    },
                    law);
}

inline std::string describe(const ErrorLaw& law) {
  return std::visit(
      Overloaded{
          [](const PowerTail& l) { return "powertail(alpha=" + std::to_string(l.alpha) + ")"; },
          [](const MirroredExp& l) { return "mexp(theta=" + std::to_string(l.theta) + ")"; },
          [](const UniformSym& l) { return "uniform(theta=" + std::to_string(l.theta) + ")"; },
          [](const PolyBump& l) { return "polybump(zeta=" + std::to_string(l.zeta) + ")"; },
          [](const ZeroNoise&) { return std::string("zero"); },
      },
      law);
}

inline std::vector<double> sample_errors(const ErrorLaw& law, std::size_t n, CounterRng& rng) {
  std::vector<double> out(n);
  if (std::holds_alternative<ZeroNoise>(law)) return out;
  for (auto& e : out) e = quantile(law, rng.uniform());
  return out;
}

inline std::vector<double> sample_errors(const ErrorLaw& law, std::size_t n, std::uint64_t seed) {
  validate(law);
  if (n < 1) throw DomainError("sample_errors: n must be at least 1");
  CounterRng rng(seed);
  return sample_errors(law, n, rng);
}

struct RegressionTruth {
  std::function<double(double)> evaluator;
  double beta = 1.0;
  std::optional<double> holder_const;
  std::string name = "custom";

  double operator()(double x) const { return evaluator(x); }
};

// Named regression functions used by the experiments.
inline RegressionTruth make_truth(const std::string& name) {
  using std::numbers::pi;
  if (name == "zero") return {[](double) { return 0.0; }, 2.0, 0.0, name};
  if (name == "linear") return {[](double x) { return 4.0 * x; }, 2.0, 0.0, name};
  if (name == "quadratic") return {[](double x) { return x * x; }, 2.0, 2.0, name};
  if (name == "abs_kink") return {[](double x) { return std::abs(x - 0.5); }, 1.0, 1.0, name};
  if (name == "sine_linear")
    return {[](double x) { return 0.5 * std::sin(2.0 * pi * x) + 4.0 * x; }, 2.0,
            2.0 * pi * pi, name};
  throw DomainError("unknown regression function '" + name + "'");
}

// Responses at the design points i/n, i = 1..n; ys[i - 1] belongs to i.
struct Sample {
  std::size_t n = 0;
  std::vector<double> ys;

  Sample() = default;
  explicit Sample(std::vector<double> values) : n(values.size()), ys(std::move(values)) {
    if (n < 2) throw DomainError("sample needs at least two observations");
  }

  double design(std::size_t i) const { return static_cast<double>(i) / static_cast<double>(n); }
  double y(std::size_t i) const { return ys[i - 1]; }
};

inline Sample generate_sample(const RegressionTruth& truth, const ErrorLaw& law, std::size_t n,
                              CounterRng& rng) {
  if (n < 2) throw DomainError("generate_sample: n must be at least 2");
  auto ys = sample_errors(law, n, rng);
  for (std::size_t i = 1; i <= n; ++i)
    ys[i - 1] += truth(static_cast<double>(i) / static_cast<double>(n));
  return Sample(std::move(ys));
}

inline Sample generate_sample(const RegressionTruth& truth, const ErrorLaw& law, std::size_t n,
                              std::uint64_t seed) {
  validate(law);
  CounterRng rng(seed);
  return generate_sample(truth, law, n, rng);
}

}  // namespace frontier

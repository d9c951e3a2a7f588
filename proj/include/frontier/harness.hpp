#pragma once

// Experiment configuration, seeded Monte-Carlo studies and report output.
//
// Every replicate draws from its own counter-based stream keyed by
// (master seed, cell, replicate), and per-replicate results land in
// per-index slots before any reduction. Outputs are therefore a function of
// the configuration and seed alone, whatever the worker count.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "frontier/errors.hpp"
#include "frontier/estimators.hpp"
#include "frontier/gof.hpp"
#include "frontier/kernels.hpp"
#include "frontier/model.hpp"
#include "frontier/parallel.hpp"
#include "frontier/rng.hpp"

namespace frontier {

inline constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Text helpers

// Shortest decimal form that reads back to the same double.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(std::string_view s, char sep = ',') {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::optional<double> to_double(std::string_view s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) return std::nullopt;
  return v;
}

inline std::optional<std::uint64_t> to_u64(std::string_view s) {
  std::uint64_t v = 0;
  const auto* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) return std::nullopt;
  return v;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Error-law specs: "power_tail:1.5", "mexp:2", "uniform:1", "bump:0.5", "zero".

inline ErrorLaw parse_law(std::string_view spec) {
  const auto parts = detail::split_list(spec, ':');
  const std::string& name = parts[0];
  if (name == "zero" && parts.size() == 1) return ZeroNoise{};
  if (parts.size() != 2) throw DomainError("law spec must look like name:parameter");
  const auto p = detail::to_double(parts[1]);
  if (!p) throw DomainError("malformed law parameter '" + parts[1] + "'");
  ErrorLaw law;
  if (name == "power_tail") law = PowerTail{*p};
  else if (name == "mexp") law = MirroredExp{*p};
  else if (name == "uniform") law = UniformSym{*p};
  else if (name == "bump") law = PolyBump{*p};
  else throw DomainError("unknown law '" + name + "'");
  validate(law);
  return law;
}

inline std::string format_law(const ErrorLaw& law) {
  return std::visit(
      Overloaded{[](const PowerTail& l) { return "power_tail:" + format_number(l.alpha); },
                 [](const MirroredExp& l) { return "mexp:" + format_number(l.theta); },
                 [](const UniformSym& l) { return "uniform:" + format_number(l.theta); },
                 [](const PolyBump& l) { return "bump:" + format_number(l.zeta); },
                 [](const ZeroNoise&) { return std::string("zero"); }},
      law);
}

// ---------------------------------------------------------------------------
// Configuration

enum class ExperimentKind { power, rates, edf_equivalence, bias_profile };

inline std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::power: return "power";
    case ExperimentKind::rates: return "rates";
    case ExperimentKind::edf_equivalence: return "edf_equivalence";
    case ExperimentKind::bias_profile: return "bias_profile";
  }
  return "?";
}

inline std::optional<ExperimentKind> parse_kind(std::string_view s) {
  if (s == "power") return ExperimentKind::power;
  if (s == "rates") return ExperimentKind::rates;
  if (s == "edf_equivalence" || s == "edf") return ExperimentKind::edf_equivalence;
  if (s == "bias_profile" || s == "bias") return ExperimentKind::bias_profile;
  return std::nullopt;
}

// h = constant * optimal_bandwidth(alpha, beta, n), or h = constant * n^(-exponent).
struct BandwidthRule {
  enum class Kind { optimal, power } kind = Kind::optimal;
  double constant = 1.0;
  double exponent = 0.0;

  double operator()(double alpha, double beta, std::size_t n) const {
    if (kind == Kind::optimal) return constant * optimal_bandwidth(alpha, beta, n);
    return constant * std::pow(static_cast<double>(n), -exponent);
  }
  bool operator==(const BandwidthRule&) const = default;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::power;
  std::string law = "power_tail:1";  // error law (the power study uses bump:zeta instead)
  std::string truth = "sine_linear";
  std::vector<std::size_t> ns;
  std::vector<double> zetas;  // power study only
  BandwidthRule bandwidth;
  double beta = 2.0;
  double level = 0.05;
  TestKind test = TestKind::cvm;
  NullFamily null_family = NullFamily::uniform_sym;
  std::size_t cv_replicates = 0;  // 0: asymptotic critical values
  std::size_t replicates = 200;
  std::uint64_t seed = 0;
  std::string seed_source = "default";  // default | config | env
  std::string output;
  // edf_equivalence
  bool remainder = true;  // also run the smoothed-estimator remainder track
  double smoothing_factor = 1.0;
  std::optional<double> smoothing_delta;
  std::size_t bias_replicates = 2000;
  double kappa = -0.1;
  std::optional<double> y_min;  // lower end of the y grid; default is a low quantile
  std::size_t y_points = 200;
  // rates
  std::size_t grid_points = 512;

  bool operator==(const ExperimentConfig&) const = default;
};

inline ExperimentConfig default_config(ExperimentKind kind) {
  ExperimentConfig c;
  c.kind = kind;
  c.output = to_string(kind);
  switch (kind) {
    case ExperimentKind::power:
      c.ns = {50, 100, 200};
      c.zetas = {0.0, 0.5, 1.0, 1.5};
      c.bandwidth = {BandwidthRule::Kind::power, 0.6, 1.0 / 3.0};
      c.cv_replicates = 1000;
      break;
    case ExperimentKind::rates:
      c.ns = {250, 500, 1000, 2000, 4000};
      break;
    case ExperimentKind::edf_equivalence:
      c.law = "mexp:1";
      c.truth = "quadratic";
      c.ns = {500, 1000, 2000, 4000};
      break;
    case ExperimentKind::bias_profile:
      c.ns = {250, 500, 1000, 2000, 4000, 8000};
      c.bandwidth = {BandwidthRule::Kind::power, 0.1, 0.0};
      c.replicates = 2000;
      break;
  }
  return c;
}

inline double config_alpha(const ExperimentConfig& c) {
  // The power study's null family has tail index 1 in both cases.
  if (c.kind == ExperimentKind::power) return 1.0;
  return alpha_of(parse_law(c.law));
}

namespace detail {

inline std::string cv_string(const ExperimentConfig& c) {
  return c.cv_replicates == 0 ? "asymptotic" : "mc:" + std::to_string(c.cv_replicates);
}

// Range checks that depend on several keys; `line_of` maps a key to its line.
template <class LineOf>
void validate_config(const ExperimentConfig& c, LineOf&& line_of) {
  auto fail = [&](const std::string& key, const std::string& what) {
    throw ConfigError(what, line_of(key));
  };
  if (c.replicates < 1) fail("replicates", "replicates must be at least 1");
  if (c.ns.empty()) fail("n", "n list is empty");
  for (auto n : c.ns)
    if (n < 10) fail("n", "every n must be at least 10");
  if (!(c.beta > 0.0)) fail("beta", "beta must be positive");
  if (!(c.level > 0.0 && c.level < 1.0)) fail("level", "level must lie in (0, 1)");
  if (!(c.bandwidth.constant > 0.0)) fail("bandwidth_constant", "bandwidth constant must be positive");
  if (c.kind == ExperimentKind::power) {
    if (c.zetas.empty()) fail("zeta", "zeta list is empty");
    for (double z : c.zetas)
      if (!(z > -1.0)) fail("zeta", "zeta must exceed -1");
  } else {
    try {
      parse_law(c.law);
    } catch (const DomainError& e) {
      fail("law", e.what());
    }
  }
  try {
    make_truth(c.truth);
  } catch (const DomainError& e) {
    fail("truth", e.what());
  }
  const double alpha = config_alpha(c);
  for (auto n : c.ns) {
    double h = 0.0;
    try {
      h = c.bandwidth(std::isfinite(alpha) ? alpha : 1.0, c.beta, n);
    } catch (const DomainError& e) {
      fail("bandwidth", e.what());
    }
    if (!(h > 0.0 && h < 0.5))
      fail("bandwidth", "bandwidth rule gives h = " + format_number(h) + " outside (0, 1/2) at n = " +
                            std::to_string(n));
    if (c.kind == ExperimentKind::edf_equivalence && c.remainder && c.beta > 1.0 && std::isfinite(alpha)) {
      const double b = smoothing_bandwidth(alpha, c.beta, n, h, {c.smoothing_factor, c.smoothing_delta});
      if (!(h + b < 0.5))
        fail("smoothing_factor", "h + b = " + format_number(h + b) + " is not below 1/2 at n = " +
                                     std::to_string(n));
    }
  }
  if (c.kind == ExperimentKind::edf_equivalence) {
    if (c.bias_replicates < 100) fail("bias_replicates", "bias_replicates must be at least 100");
    if (!(c.kappa < 0.0)) fail("kappa", "kappa must be negative");
    if (c.y_min && !(*c.y_min < c.kappa)) fail("y_min", "y_min must lie below kappa");
    if (c.y_points < 2) fail("y_points", "y_points must be at least 2");
  }
  if (c.kind == ExperimentKind::rates && c.grid_points < 2) fail("grid_points", "grid_points must be at least 2");
}

}  // namespace detail

// Parses `key = value` lines under a single `[kind]` header. '#' starts a comment.
inline ExperimentConfig parse_config_text(std::string_view text) {
  std::map<std::string, int> lines;
  std::optional<ExperimentConfig> cfg;
  int header_line = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    const std::string line = detail::trim(std::string_view(raw).substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("malformed section header", lineno);
      if (cfg) throw ConfigError("only one [kind] section is allowed", lineno);
      const auto kind = parse_kind(detail::trim(std::string_view(line).substr(1, line.size() - 2)));
      if (!kind) throw ConfigError("unknown experiment kind " + line, lineno);
      cfg = default_config(*kind);
      header_line = lineno;
      continue;
    }
    if (!cfg) throw ConfigError("key outside a [kind] section", lineno);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value", lineno);
    const std::string key = detail::trim(std::string_view(line).substr(0, eq));
    const std::string value = detail::trim(std::string_view(line).substr(eq + 1));
    if (lines.count(key)) throw ConfigError("duplicate key '" + key + "'", lineno);
    lines[key] = lineno;

    auto number = [&](const std::string& v) {
      const auto d = detail::to_double(v);
      if (!d) throw ConfigError("malformed number '" + v + "' for key '" + key + "'", lineno);
      return *d;
    };
    auto count = [&](const std::string& v) {
      const auto u = detail::to_u64(v);
      if (!u) throw ConfigError("malformed count '" + v + "' for key '" + key + "'", lineno);
      return static_cast<std::size_t>(*u);
    };
    auto& c = *cfg;
    if (key == "law") c.law = value;
    else if (key == "truth") c.truth = value;
    else if (key == "n") {
      c.ns.clear();
      for (const auto& v : detail::split_list(value)) c.ns.push_back(count(v));
    } else if (key == "zeta") {
      c.zetas.clear();
      for (const auto& v : detail::split_list(value)) c.zetas.push_back(number(v));
    } else if (key == "bandwidth") {
      if (value == "optimal") c.bandwidth.kind = BandwidthRule::Kind::optimal;
      else if (value == "power") c.bandwidth.kind = BandwidthRule::Kind::power;
      else throw ConfigError("bandwidth must be 'optimal' or 'power'", lineno);
    } else if (key == "bandwidth_constant") c.bandwidth.constant = number(value);
    else if (key == "bandwidth_exponent") c.bandwidth.exponent = number(value);
    else if (key == "beta") c.beta = number(value);
    else if (key == "level") c.level = number(value);
    else if (key == "test") {
      if (value == "ks") c.test = TestKind::ks;
      else if (value == "cvm") c.test = TestKind::cvm;
      else throw ConfigError("test must be 'ks' or 'cvm'", lineno);
    } else if (key == "null") {
      if (value == "uniform") c.null_family = NullFamily::uniform_sym;
      else if (value == "mexp") c.null_family = NullFamily::mirrored_exp;
      else throw ConfigError("null must be 'uniform' or 'mexp'", lineno);
    } else if (key == "cv") {
      if (value == "asymptotic") c.cv_replicates = 0;
      else if (value.rfind("mc:", 0) == 0) {
        c.cv_replicates = count(value.substr(3));
        if (c.cv_replicates < 1) throw ConfigError("mc:R needs R >= 1", lineno);
      } else throw ConfigError("cv must be 'asymptotic' or 'mc:R'", lineno);
    } else if (key == "replicates") c.replicates = count(value);
    else if (key == "seed") {
      const auto s = detail::to_u64(value);
      if (!s) throw ConfigError("malformed seed '" + value + "'", lineno);
      c.seed = *s;
      c.seed_source = "config";
    } else if (key == "output") c.output = value;
    else if (key == "remainder") {
      if (value == "on") c.remainder = true;
      else if (value == "off") c.remainder = false;
      else throw ConfigError("remainder must be 'on' or 'off'", lineno);
    } else if (key == "smoothing_factor") c.smoothing_factor = number(value);
    else if (key == "smoothing_delta") c.smoothing_delta = number(value);
    else if (key == "bias_replicates") c.bias_replicates = count(value);
    else if (key == "kappa") c.kappa = number(value);
    else if (key == "y_min") c.y_min = number(value);
    else if (key == "y_points") c.y_points = count(value);
    else if (key == "grid_points") c.grid_points = count(value);
    else throw ConfigError("unknown key '" + key + "'", lineno);
  }
  if (!cfg) throw ConfigError("no [kind] section found", lineno);
  detail::validate_config(*cfg, [&](const std::string& key) {
    const auto it = lines.find(key);
    return it == lines.end() ? header_line : it->second;
  });
  return *cfg;
}

inline ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string(), 0);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

inline std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream o;
  auto list = [](const auto& xs, auto fmt) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? ", " : "") + fmt(xs[i]);
    return s;
  };
  o << '[' << to_string(c.kind) << "]\n";
  if (c.kind != ExperimentKind::power) o << "law = " << c.law << '\n';
  o << "truth = " << c.truth << '\n';
  o << "n = " << list(c.ns, [](std::size_t n) { return std::to_string(n); }) << '\n';
  if (c.kind == ExperimentKind::power)
    o << "zeta = " << list(c.zetas, [](double z) { return format_number(z); }) << '\n';
  o << "bandwidth = " << (c.bandwidth.kind == BandwidthRule::Kind::optimal ? "optimal" : "power") << '\n';
  o << "bandwidth_constant = " << format_number(c.bandwidth.constant) << '\n';
  o << "bandwidth_exponent = " << format_number(c.bandwidth.exponent) << '\n';
  o << "beta = " << format_number(c.beta) << '\n';
  o << "replicates = " << c.replicates << '\n';
  if (c.seed_source != "default") o << "seed = " << c.seed << '\n';
  o << "output = " << c.output << '\n';
  switch (c.kind) {
    case ExperimentKind::power:
      o << "null = " << to_string(c.null_family) << '\n';
      o << "test = " << to_string(c.test) << '\n';
      o << "level = " << format_number(c.level) << '\n';
      o << "cv = " << detail::cv_string(c) << '\n';
      break;
    case ExperimentKind::rates:
      o << "grid_points = " << c.grid_points << '\n';
      break;
    case ExperimentKind::edf_equivalence:
      o << "remainder = " << (c.remainder ? "on" : "off") << '\n';
      o << "smoothing_factor = " << format_number(c.smoothing_factor) << '\n';
      if (c.smoothing_delta) o << "smoothing_delta = " << format_number(*c.smoothing_delta) << '\n';
      o << "bias_replicates = " << c.bias_replicates << '\n';
      o << "kappa = " << format_number(c.kappa) << '\n';
      if (c.y_min) o << "y_min = " << format_number(*c.y_min) << '\n';
      o << "y_points = " << c.y_points << '\n';
      break;
    case ExperimentKind::bias_profile:
      break;
  }
  return o.str();
}

// FRONTIER_LAB_SEED-style override; returns false for a malformed value.
inline bool apply_seed_override(ExperimentConfig& c, const char* value) {
  if (value == nullptr) return true;
  const auto s = detail::to_u64(detail::trim(value));
  if (!s) return false;
  c.seed = *s;
  c.seed_source = "env";
  return true;
}

// ---------------------------------------------------------------------------
// Results

struct SlopeFit {
  double value = 0.0;
  double theory = 0.0;
  double deviation = 0.0;  // value - theory
  std::string regressor;
};

struct MonteCarloResult {
  ExperimentKind kind = ExperimentKind::power;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::optional<SlopeFit> slope;
  std::vector<std::pair<std::string, bool>> verdicts;
  std::vector<std::string> notes;
  std::uint64_t seed = 0;
  std::string seed_source;
  std::string config_text;
  // Not part of the determinism guarantee.
  double wall_seconds = 0.0;
  std::size_t threads = 1;

  std::size_t column_index(std::string_view name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw DomainError("no column '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - columns.begin());
  }
  double at(std::size_t row, std::string_view name) const { return rows.at(row)[column_index(name)]; }
  std::vector<double> column(std::string_view name) const {
    const auto k = column_index(name);
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(r[k]);
    return out;
  }
  std::optional<bool> verdict(std::string_view name) const {
    for (const auto& [k, v] : verdicts)
      if (k == name) return v;
    return std::nullopt;
  }
};

// ---------------------------------------------------------------------------
// Summaries

inline double median(std::vector<double> v) {
  if (v.empty()) throw DomainError("median of an empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size();
  return 0.5 * (v[(k - 1) / 2] + v[k / 2]);
}

// Linear-interpolation quantile of a sample.
inline double sample_quantile(std::vector<double> v, double p) {
  if (v.empty()) throw DomainError("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double mean(const std::vector<double>& v) {
  if (v.empty()) throw DomainError("mean of an empty sample");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Ordinary least-squares slope of y on x.
inline double ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("slope fit needs two or more points");
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (!(sxx > 0.0)) throw DomainError("slope fit needs distinct x values");
  return sxy / sxx;
}

inline bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

namespace detail {

constexpr std::size_t kMinSlopePoints = 4;

inline std::uint64_t derived_seed(std::uint64_t seed, std::uint64_t tag) {
  CounterRng r = CounterRng(seed).split(tag);
  return r();
}

// Stream for replicate r of cell c.
inline CounterRng replicate_stream(std::uint64_t seed, std::uint64_t cell, std::uint64_t r) {
  return CounterRng(seed).split(cell).split(r);
}

inline MonteCarloResult start_result(const ExperimentConfig& c, std::size_t threads) {
  MonteCarloResult r;
  r.kind = c.kind;
  r.seed = c.seed;
  r.seed_source = c.seed_source;
  r.config_text = serialize_config(c);
  r.threads = threads == 0 ? default_threads() : threads;
  return r;
}

inline void check_kind(const ExperimentConfig& c, ExperimentKind k) {
  if (c.kind != k)
    throw ConfigError("config describes a " + to_string(c.kind) + " experiment, not " + to_string(k), 0);
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Studies

// Rejection frequencies of the goodness-of-fit test under bump(zeta) errors.
// One Monte-Carlo null distribution per n serves every zeta and replicate.
inline MonteCarloResult run_power_study(const ExperimentConfig& c, std::size_t threads = 0) {
  detail::check_kind(c, ExperimentKind::power);
  detail::Stopwatch clock;
  auto res = detail::start_result(c, threads);
  res.columns = {"n", "zeta", "h", "replicates", "rejection_frequency", "critical_value",
                 "median_statistic", "median_theta_hat"};
  const auto g = make_truth(c.truth);
  for (std::size_t ni = 0; ni < c.ns.size(); ++ni) {
    const std::size_t n = c.ns[ni];
    const double h = c.bandwidth(1.0, c.beta, n);
    const NullSpec spec = PipelineNull{c.null_family, n, h, c.beta};
    double crit = 0.0;
    if (c.cv_replicates > 0) {
      const MonteCarlo mc{c.cv_replicates, detail::derived_seed(c.seed, 1'000'000 + ni)};
      crit = upper_quantile(null_distribution(c.test, spec, mc, threads), c.level);
    } else {
      crit = critical_value(c.test, spec, c.level, Asymptotic{});
    }
    for (std::size_t zi = 0; zi < c.zetas.size(); ++zi) {
      const ErrorLaw law = PolyBump{c.zetas[zi]};
      std::vector<double> stats(c.replicates), thetas(c.replicates);
      const std::uint64_t cell = ni * 1000 + zi;
      parallel_for(c.replicates, threads, [&](std::size_t r) {
        CounterRng rng = detail::replicate_stream(c.seed, cell, r);
        const auto s = generate_sample(g, law, n, rng);
        const auto out = run_pipeline(s, c.null_family, c.beta, h, c.test);
        stats[r] = out.statistic;
        thetas[r] = out.theta_hat;
      });
      const auto rejected = std::count_if(stats.begin(), stats.end(), [&](double t) { return t > crit; });
      res.rows.push_back({static_cast<double>(n), c.zetas[zi], h, static_cast<double>(c.replicates),
                          static_cast<double>(rejected) / static_cast<double>(c.replicates), crit,
                          median(stats), median(thetas)});
    }
  }
  res.notes.push_back(std::string("critical values: ") +
                      (c.cv_replicates > 0 ? "monte_carlo:" + std::to_string(c.cv_replicates)
                                           : "asymptotic"));
  res.wall_seconds = clock.seconds();
  return res;
}

// Median sup-norm error of the boundary estimator against the truth; slope of
// log(median) on log((log n) / n).
inline MonteCarloResult run_rate_study(const ExperimentConfig& c, std::size_t threads = 0) {
  detail::check_kind(c, ExperimentKind::rates);
  detail::Stopwatch clock;
  auto res = detail::start_result(c, threads);
  res.columns = {"n", "h", "replicates", "median_sup_error", "mean_sup_error", "q10_sup_error",
                 "q90_sup_error"};
  const auto g = make_truth(c.truth);
  const ErrorLaw law = parse_law(c.law);
  const double alpha = alpha_of(law);
  const bool degenerate = std::holds_alternative<ZeroNoise>(law);
  std::vector<double> xs, ys;
  for (std::size_t ni = 0; ni < c.ns.size(); ++ni) {
    const std::size_t n = c.ns[ni];
    const double h = c.bandwidth(degenerate ? 1.0 : alpha, c.beta, n);
    const auto grid = make_grid(h, 1.0 - h, c.grid_points);
    std::vector<double> truth(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) truth[k] = g(grid[k]);
    std::vector<double> err(c.replicates);
    parallel_for(c.replicates, threads, [&](std::size_t r) {
      CounterRng rng = detail::replicate_stream(c.seed, ni, r);
      const auto fit = fit_boundary(generate_sample(g, law, n, rng), h, c.beta, grid);
      double sup = 0.0;
      for (std::size_t k = 0; k < grid.size(); ++k) sup = std::max(sup, std::abs(fit.values[k] - truth[k]));
      err[r] = sup;
    });
    const double med = median(err);
    res.rows.push_back({static_cast<double>(n), h, static_cast<double>(c.replicates), med, mean(err),
                        sample_quantile(err, 0.1), sample_quantile(err, 0.9)});
    const double nn = static_cast<double>(n);
    xs.push_back(std::log(std::log(nn) / nn));
    ys.push_back(std::log(med));
  }
  const bool all_tiny = std::all_of(ys.begin(), ys.end(), [](double y) { return !(y > std::log(1e-10)); });
  if (degenerate || all_tiny) {
    res.notes.push_back("slope fit skipped: errors are at rounding level (zero-noise data)");
  } else if (xs.size() < detail::kMinSlopePoints) {
    res.notes.push_back("slope fit skipped: needs at least 4 sample sizes");
  } else {
    const double theory = c.beta / (alpha * c.beta + 1.0);
    const double s = ols_slope(xs, ys);
    res.slope = SlopeFit{s, theory, s - theory, "log((log n) / n)"};
  }
  res.wall_seconds = clock.seconds();
  return res;
}

// Two tracks per n: sqrt(m) sup |Fhat_n - F_n| with raw boundary residuals, and
// sqrt(m) times the largest expansion remainder on y <= kappa with the
// bias-corrected smoothed estimator.
inline MonteCarloResult run_edf_equivalence_study(const ExperimentConfig& c, std::size_t threads = 0) {
  detail::check_kind(c, ExperimentKind::edf_equivalence);
  detail::Stopwatch clock;
  auto res = detail::start_result(c, threads);
  res.columns = {"n", "h", "b", "m_raw", "m_smooth", "replicates", "bias_g0",
                 "median_sqrt_m_sup_edf_diff", "median_sqrt_m_remainder"};
  const auto g = make_truth(c.truth);
  const ErrorLaw law = parse_law(c.law);
  const double alpha = alpha_of(law);
  if (!std::isfinite(alpha)) throw ConfigError("the EDF study needs a non-degenerate error law", 0);
  const auto report = applicability_report(alpha, c.beta);
  if (!report.edf_equivalence) res.notes.push_back("outside the EDF-equivalence region (1/beta < alpha < 2 - 1/beta)");
  if (!report.remainder_bandwidths)
    res.notes.push_back("outside the remainder-negligibility region (alpha < 3 - 3/(2 beta))");
  const bool smooth = c.remainder && c.beta > 1.0;
  if (c.remainder && !smooth) res.notes.push_back("remainder track skipped: smoothing needs beta > 1");

  const auto kernel = build_kernel(kernel_order_for(c.beta));
  const auto [lo_support, hi_support] = support(law);
  const double y_lo = c.y_min ? *c.y_min : std::max(lo_support, quantile(law, 1e-4));
  const auto y_grid = make_grid(y_lo, std::min(c.kappa, hi_support), c.y_points);

  std::vector<double> track1, track2;
  for (std::size_t ni = 0; ni < c.ns.size(); ++ni) {
    const std::size_t n = c.ns[ni];
    const double h = c.bandwidth(alpha, c.beta, n);
    const double b = smooth ? smoothing_bandwidth(alpha, c.beta, n, h, {c.smoothing_factor, c.smoothing_delta})
                            : std::numeric_limits<double>::quiet_NaN();
    BiasEstimate bias;
    std::size_t m_smooth = 0;
    if (smooth) {
      bias = detail::summarize(detail::center_fits_g0(law, n, h, c.beta, c.bias_replicates,
                                                      detail::derived_seed(c.seed, 2'000'000 + ni), threads));
      const auto [a, z] = smooth_interior_range(n, h, b);
      m_smooth = z >= a ? z - a + 1 : 0;
    }
    const auto [first, last] = interior_range(n, h);
    const std::size_t m_raw = last - first + 1;
    const auto fine_grid = design_grid(n, h, 1.0 - h);
    const auto smooth_grid = smooth ? design_grid(n, h + b, 1.0 - h - b) : std::vector<double>{};

    std::vector<double> t1(c.replicates), t2(c.replicates);
    parallel_for(c.replicates, threads, [&](std::size_t r) {
      CounterRng rng = detail::replicate_stream(c.seed, ni, r);
      const auto eps = sample_errors(law, n, rng);
      std::vector<double> ys(n);
      for (std::size_t i = 1; i <= n; ++i) ys[i - 1] = g(static_cast<double>(i) / static_cast<double>(n)) + eps[i - 1];
      const Sample s(std::move(ys));
      const auto fit = fit_boundary(s, h, c.beta, fine_grid);
      const auto resid = residuals(s, fit);
      std::vector<double> true_errors;
      for (std::size_t i = 0; i < n; ++i)
        if (resid.interior_mask[i]) true_errors.push_back(eps[i]);
      t1[r] = std::sqrt(static_cast<double>(resid.m)) *
              sup_edf_diff(EmpiricalCdf(resid.interior()), EmpiricalCdf(std::move(true_errors)));
      if (smooth) {
        const auto star = bias_corrected_smooth(smooth_boundary(fit, b, kernel, smooth_grid, c.beta), bias);
        const auto rem = expansion_remainder(star, g, n, law, y_grid);
        double worst = 0.0;
        for (double v : rem) worst = std::max(worst, std::abs(v));
        t2[r] = std::sqrt(static_cast<double>(m_smooth)) * worst;
      }
    });
    track1.push_back(median(t1));
    track2.push_back(smooth ? median(t2) : std::numeric_limits<double>::quiet_NaN());
    res.rows.push_back({static_cast<double>(n), h, b, static_cast<double>(m_raw), static_cast<double>(m_smooth),
                        static_cast<double>(c.replicates), smooth ? bias.value : std::numeric_limits<double>::quiet_NaN(),
                        track1.back(), track2.back()});
  }
  res.verdicts.emplace_back("sup_edf_diff_strictly_decreasing", strictly_decreasing(track1));
  if (smooth) res.verdicts.emplace_back("remainder_strictly_decreasing", strictly_decreasing(track2));
  res.wall_seconds = clock.seconds();
  return res;
}

// E_{g == 0} ghat(1/2) across n; slope of log|bias| on log((log n) / (n h)).
inline MonteCarloResult run_bias_profile(const ExperimentConfig& c, std::size_t threads = 0) {
  detail::check_kind(c, ExperimentKind::bias_profile);
  detail::Stopwatch clock;
  auto res = detail::start_result(c, threads);
  res.columns = {"n", "h", "replicates", "rate_scale", "bias", "standard_error"};
  const ErrorLaw law = parse_law(c.law);
  const double alpha = alpha_of(law);
  const bool degenerate = !std::isfinite(alpha);
  std::vector<double> xs, ys;
  bool wide = false, zero = false;
  for (std::size_t ni = 0; ni < c.ns.size(); ++ni) {
    const std::size_t n = c.ns[ni];
    const double h = c.bandwidth(degenerate ? 1.0 : alpha, c.beta, n);
    const auto est = detail::summarize(
        detail::center_fits_g0(law, n, h, c.beta, c.replicates, detail::derived_seed(c.seed, ni), threads));
    const double nn = static_cast<double>(n);
    const double rate = std::log(nn) / (nn * h);
    res.rows.push_back({nn, h, static_cast<double>(c.replicates), rate, est.value, est.standard_error});
    if (est.value == 0.0) zero = true;
    if (est.standard_error > 0.25 * std::abs(est.value)) wide = true;
    xs.push_back(std::log(rate));
    ys.push_back(std::log(std::abs(est.value)));
  }
  if (wide) res.notes.push_back("wide standard errors: some |bias| estimates have relative error above 25%");
  if (degenerate || zero) {
    res.notes.push_back("slope fit skipped: bias is exactly zero (zero-noise data)");
  } else if (xs.size() < detail::kMinSlopePoints) {
    res.notes.push_back("slope fit skipped: needs at least 4 sample sizes");
  } else {
    const double s = ols_slope(xs, ys);
    res.slope = SlopeFit{s, 1.0 / alpha, s - 1.0 / alpha, "log((log n) / (n h))"};
  }
  res.wall_seconds = clock.seconds();
  return res;
}

inline MonteCarloResult run_experiment(const ExperimentConfig& c, std::size_t threads = 0) {
  switch (c.kind) {
    case ExperimentKind::power: return run_power_study(c, threads);
    case ExperimentKind::rates: return run_rate_study(c, threads);
    case ExperimentKind::edf_equivalence: return run_edf_equivalence_study(c, threads);
    case ExperimentKind::bias_profile: return run_bias_profile(c, threads);
  }
  throw ConfigError("unknown experiment kind", 0);
}

// ---------------------------------------------------------------------------
// Output

inline std::string results_csv(const MonteCarloResult& r) {
  std::string out;
  for (std::size_t k = 0; k < r.columns.size(); ++k) out += (k ? "," : "") + r.columns[k];
  out += '\n';
  for (const auto& row : r.rows) {
    for (std::size_t k = 0; k < row.size(); ++k) out += (k ? "," : "") + format_number(row[k]);
    out += '\n';
  }
  return out;
}

inline std::string results_meta(const MonteCarloResult& r) {
  std::ostringstream o;
  o << "kind = " << to_string(r.kind) << '\n';
  o << "version = " << kVersion << '\n';
  o << "seed = " << r.seed << '\n';
  o << "seed_source = " << r.seed_source << '\n';
  o << "streams = counter(seed, cell, replicate)\n";
  if (r.slope) {
    o << "slope = " << format_number(r.slope->value) << '\n';
    o << "slope_theory = " << format_number(r.slope->theory) << '\n';
    o << "slope_deviation = " << format_number(r.slope->deviation) << '\n';
    o << "slope_regressor = " << r.slope->regressor << '\n';
  }
  for (const auto& [k, v] : r.verdicts) o << "verdict." << k << " = " << (v ? "true" : "false") << '\n';
  for (const auto& n : r.notes) o << "note = " << n << '\n';
  o << "[config]\n" << r.config_text;
  o << "[run]\n";
  o << "wall_seconds = " << format_number(r.wall_seconds) << '\n';
  o << "threads = " << r.threads << '\n';
  return o.str();
}

struct ChartSeries {
  std::string name;
  std::vector<double> xs, ys;
};

// Fixed-template line chart; coordinates are printed with two decimals.
inline std::string svg_chart(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                             const std::vector<ChartSeries>& series) {
  constexpr double W = 640, H = 420, L = 70, R = 150, T = 40, B = 60;
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.xs.size(); ++i) {
      if (!std::isfinite(s.xs[i]) || !std::isfinite(s.ys[i])) continue;
      x0 = std::min(x0, s.xs[i]), x1 = std::max(x1, s.xs[i]);
      y0 = std::min(y0, s.ys[i]), y1 = std::max(y1, s.ys[i]);
    }
  if (!(x0 <= x1)) x0 = 0, x1 = 1;
  if (!(y0 <= y1)) y0 = 0, y1 = 1;
  if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
  auto f2 = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };
  auto f4 = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return std::string(buf);
  };
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0, yv = y0 + (y1 - y0) * k / 4.0;
    o << "<text x=\"" << f2(px(xv)) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">" << f4(xv) << "</text>\n";
    o << "<text x=\"" << L - 6 << "\" y=\"" << f2(py(yv) + 4) << "\" text-anchor=\"end\">" << f4(yv) << "</text>\n";
  }
  o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 18 << "\" text-anchor=\"middle\">" << xlabel << "</text>\n";
  o << "<text x=\"18\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
    << (T + H - B) / 2 << ")\">" << ylabel << "</text>\n";
  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* colour = palette[si % 7];
    o << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"2\" points=\"";
    bool first = true;
    for (std::size_t i = 0; i < s.xs.size(); ++i) {
      if (!std::isfinite(s.xs[i]) || !std::isfinite(s.ys[i])) continue;
      o << (first ? "" : " ") << f2(px(s.xs[i])) << ',' << f2(py(s.ys[i]));
      first = false;
    }
    o << "\"/>\n";
    for (std::size_t i = 0; i < s.xs.size(); ++i) {
      if (!std::isfinite(s.xs[i]) || !std::isfinite(s.ys[i])) continue;
      o << "<circle cx=\"" << f2(px(s.xs[i])) << "\" cy=\"" << f2(py(s.ys[i])) << "\" r=\"3\" fill=\"" << colour
        << "\"/>\n";
    }
    const double ly = T + 10 + 18.0 * static_cast<double>(si);
    o << "<line x1=\"" << W - R + 12 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 32 << "\" y2=\"" << ly
      << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << W - R + 38 << "\" y=\"" << ly + 4 << "\">" << s.name << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

inline std::string results_svg(const MonteCarloResult& r) {
  std::vector<ChartSeries> series;
  auto logv = [](std::vector<double> v) {
    for (double& x : v) x = std::log(x);
    return v;
  };
  switch (r.kind) {
    case ExperimentKind::power: {
      std::map<double, ChartSeries> by_n;
      for (std::size_t i = 0; i < r.rows.size(); ++i) {
        auto& s = by_n[r.at(i, "n")];
        s.name = "n = " + format_number(r.at(i, "n"));
        s.xs.push_back(r.at(i, "zeta"));
        s.ys.push_back(r.at(i, "rejection_frequency"));
      }
      for (auto& [n, s] : by_n) series.push_back(std::move(s));
      return svg_chart("Power curves", "zeta", "rejection frequency", series);
    }
    case ExperimentKind::rates:
      series.push_back({"median sup error", logv(r.column("n")), logv(r.column("median_sup_error"))});
      return svg_chart("Sup-norm error", "log n", "log median error", series);
    case ExperimentKind::edf_equivalence:
      series.push_back({"EDF difference", logv(r.column("n")), r.column("median_sqrt_m_sup_edf_diff")});
      series.push_back({"remainder", logv(r.column("n")), r.column("median_sqrt_m_remainder")});
      return svg_chart("Residual EDF tracks", "log n", "median of sqrt(m) x statistic", series);
    case ExperimentKind::bias_profile: {
      auto ab = r.column("bias");
      for (double& v : ab) v = std::abs(v);
      series.push_back({"|bias|", logv(r.column("rate_scale")), logv(ab)});
      return svg_chart("Bias under g = 0", "log((log n) / (n h))", "log |bias|", series);
    }
  }
  return {};
}

struct WrittenFiles {
  std::filesystem::path csv, meta, svg;
};

// Writes <dir>/<stem>.csv, .meta and .svg.
inline WrittenFiles write_results(const MonteCarloResult& r, const std::filesystem::path& dir,
                                  const std::string& stem) {
  std::filesystem::create_directories(dir);
  WrittenFiles f{dir / (stem + ".csv"), dir / (stem + ".meta"), dir / (stem + ".svg")};
  auto put = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << text;
  };
  put(f.csv, results_csv(r));
  put(f.meta, results_meta(r));
  put(f.svg, results_svg(r));
  return f;
}

}  // namespace frontier

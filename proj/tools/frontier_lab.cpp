// frontier-lab: batch front end for the boundary-regression library.
//
// Exit codes: 0 success, 2 configuration or usage error, 3 numerical failure.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "frontier/frontier.hpp"

using namespace frontier;

namespace {

constexpr int kConfigExit = 2;
constexpr int kNumericExit = 3;

// Reads (index, y) rows. A header row and blank lines are skipped; indices
// must run 1..n in order.
Sample read_sample(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open input " + path);
  std::vector<double> ys;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto fields = detail::split_list(line);
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (fields.size() != 2) throw ConfigError("expected two columns (index, y)", lineno);
    const auto idx = detail::to_u64(fields[0]);
    const auto y = detail::to_double(fields[1]);
    if (!idx || !y) {
      if (ys.empty() && lineno == 1) continue;  // header
      throw ConfigError("malformed row '" + line + "'", lineno);
    }
    if (*idx != ys.size() + 1) throw ConfigError("indices must run 1, 2, ..., n", lineno);
    if (!std::isfinite(*y)) throw ConfigError("non-finite response", lineno);
    ys.push_back(*y);
  }
  if (ys.size() < 2) throw ConfigError("input needs at least two observations");
  return Sample(std::move(ys));
}

std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv("FRONTIER_LAB_SEED");
  if (v == nullptr) return std::nullopt;
  const auto s = detail::to_u64(detail::trim(v));
  if (!s) throw ConfigError("FRONTIER_LAB_SEED must be a non-negative integer");
  return s;
}

// Option checks that would otherwise surface as computation errors.
void check_fit_options(double beta, double h) {
  if (!(beta > 0.0)) throw ConfigError("--beta must be positive");
  if (!(h > 0.0 && h < 0.5)) throw ConfigError("--bandwidth must lie in (0, 1/2)");
}

std::ostream& open_out(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path, std::ios::binary);
  if (!file) throw ConfigError("cannot write " + path);
  return file;
}

struct StudyArgs {
  std::string config;
  std::size_t threads = 0;
  std::string out = ".";
};

void run_study(ExperimentKind kind, const StudyArgs& a) {
  auto cfg = parse_config(a.config);
  if (cfg.kind != kind)
    throw ConfigError(a.config + " describes a " + to_string(cfg.kind) + " experiment");
  if (!apply_seed_override(cfg, std::getenv("FRONTIER_LAB_SEED")))
    throw ConfigError("FRONTIER_LAB_SEED must be a non-negative integer");
  const auto result = run_experiment(cfg, a.threads);
  const auto files = write_results(result, a.out, cfg.output);
  std::cerr << to_string(kind) << ": " << result.rows.size() << " rows, seed " << result.seed << " ("
            << result.seed_source << ")\n";
  if (result.slope)
    std::cerr << "  slope " << format_number(result.slope->value) << " vs theory "
              << format_number(result.slope->theory) << '\n';
  for (const auto& [k, v] : result.verdicts) std::cerr << "  " << k << ": " << (v ? "yes" : "no") << '\n';
  for (const auto& n : result.notes) std::cerr << "  note: " << n << '\n';
  std::cerr << "  wrote " << files.csv.string() << ", " << files.meta.string() << ", " << files.svg.string() << '\n';
}

struct EstimateArgs {
  std::string input, out, law;
  double beta = 2.0, h = 0.1;
  bool smooth = false, bias_correct = false;
  std::optional<double> b;
  std::size_t bias_replicates = 2000;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
};

void run_estimate(const EstimateArgs& a) {
  check_fit_options(a.beta, a.h);
  const Sample s = read_sample(a.input);
  const auto fine = fit_boundary(s, a.h, a.beta, design_grid(s.n, a.h, 1.0 - a.h));
  std::ofstream file;
  std::ostream& out = open_out(a.out, file);
  if (!a.smooth) {
    if (a.bias_correct) throw ConfigError("--bias-correct needs --smooth");
    out << "x,ghat\n";
    for (std::size_t i = 0; i < fine.grid.size(); ++i)
      out << format_number(fine.grid[i]) << ',' << format_number(fine.values[i]) << '\n';
    return;
  }
  std::optional<ErrorLaw> law;
  if (!a.law.empty()) {
    try {
      law = parse_law(a.law);
    } catch (const DomainError& e) {
      throw ConfigError(std::string("--law: ") + e.what());
    }
  }
  double b = 0.0;
  if (a.b) b = *a.b;
  else if (law) b = smoothing_bandwidth(alpha_of(*law), a.beta, s.n, a.h, {});
  else throw ConfigError("--smooth needs --b or --law to choose the smoothing bandwidth");
  if (!(a.h + b < 0.5)) throw ConfigError("h + b must be below 1/2");
  const auto kernel = build_kernel(kernel_order_for(a.beta));
  auto fit = smooth_boundary(fine, b, kernel, design_grid(s.n, a.h + b, 1.0 - a.h - b), a.beta);
  std::optional<SmoothFit> star;
  if (a.bias_correct) {
    if (!law) throw ConfigError("--bias-correct needs --law");
    const auto seed = env_seed().value_or(a.seed);
    star = bias_corrected_smooth(fit, estimate_bias_g0(*law, s.n, a.h, a.beta, a.bias_replicates, seed, a.threads));
  }
  out << "x,ghat,gtilde,gtilde_prime" << (star ? ",gstar" : "") << '\n';
  std::size_t j = 0;
  for (std::size_t i = 0; i < fine.grid.size(); ++i) {
    out << format_number(fine.grid[i]) << ',' << format_number(fine.values[i]);
    if (j < fit.grid.size() && std::abs(fit.grid[j] - fine.grid[i]) < 1e-12) {
      out << ',' << format_number(fit.values[j]) << ',' << format_number(fit.derivs[j]);
      if (star) out << ',' << format_number(star->values[j]);
      ++j;
    } else {
      out << ",," << (star ? "," : "");
    }
    out << '\n';
  }
}

struct GofArgs {
  std::string input, null = "uniform", test = "cvm", cv = "asymptotic";
  double beta = 2.0, h = 0.1, level = 0.05;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
};

void run_gof(const GofArgs& a) {
  check_fit_options(a.beta, a.h);
  if (!(a.level > 0.0 && a.level < 1.0)) throw ConfigError("--level must lie in (0, 1)");
  const Sample s = read_sample(a.input);
  GofOptions opt;
  opt.family = a.null == "mexp" ? NullFamily::mirrored_exp : NullFamily::uniform_sym;
  opt.test = a.test == "ks" ? TestKind::ks : TestKind::cvm;
  opt.beta = a.beta;
  opt.h = a.h;
  opt.level = a.level;
  opt.threads = a.threads;
  if (a.cv == "asymptotic") {
    opt.cv = Asymptotic{};
  } else if (a.cv.rfind("mc:", 0) == 0) {
    const auto r = detail::to_u64(a.cv.substr(3));
    if (!r || *r == 0) throw ConfigError("--cv mc:R needs a positive R");
    opt.cv = MonteCarlo{static_cast<std::size_t>(*r), env_seed().value_or(a.seed)};
  } else {
    throw ConfigError("--cv must be 'asymptotic' or 'mc:R'");
  }
  const auto r = gof_test(s, opt);
  std::cout << format_number(r.theta_hat) << ',' << format_number(r.statistic) << ','
            << format_number(r.critical_value) << ',' << format_number(r.p_value) << ','
            << (r.reject ? 1 : 0) << '\n';
  std::cerr << "columns: theta_hat,statistic,critical,p_value,reject\n"
            << to_string(r.test) << " test of the " << to_string(r.family) << " null: statistic "
            << format_number(r.statistic) << ", critical value " << format_number(r.critical_value) << " ("
            << r.cv_source << "), p = " << format_number(r.p_value) << " -> "
            << (r.reject ? "reject" : "do not reject") << " at level " << format_number(a.level)
            << "\n  m = " << r.m << ", h = " << format_number(r.h) << ", degree " << r.degree
            << ", theta_hat = " << format_number(r.theta_hat) << ", normalization " << r.normalization << '\n';
}

void run_kernel(int order, std::size_t points) {
  if (points < 2) throw ConfigError("--grid needs at least 2 points");
  HigherOrderKernel k;
  try {
    k = build_kernel(order);
  } catch (const DomainError& e) {
    throw ConfigError(std::string("--order: ") + e.what());
  }
  std::cout << "u,K,K_prime\n";
  for (const double u : make_grid(-1.0, 1.0, points))
    std::cout << format_number(u) << ',' << format_number(k(u)) << ','
              << format_number(eval_kernel_derivative(k, u)) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Boundary regression, residual EDFs and goodness-of-fit tests"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  StudyArgs study;
  std::vector<std::pair<CLI::App*, ExperimentKind>> studies;
  for (const auto& [name, kind, help] :
       {std::tuple{"power", ExperimentKind::power, "power curves of the goodness-of-fit test"},
        std::tuple{"rates", ExperimentKind::rates, "sup-norm error rates of the boundary estimator"},
        std::tuple{"edf", ExperimentKind::edf_equivalence, "residual EDF tracks across n"},
        std::tuple{"bias", ExperimentKind::bias_profile, "bias of the centre fit under g = 0"}}) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", study.config, "experiment config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--threads", study.threads, "worker threads (0 = all cores)");
    sub->add_option("--out", study.out, "output directory");
    studies.emplace_back(sub, kind);
  }

  EstimateArgs est;
  auto* estimate = app.add_subcommand("estimate", "fit the boundary (and optionally smooth it)");
  estimate->add_option("--input", est.input, "CSV with columns index,y")->required();
  estimate->add_option("--beta", est.beta, "smoothness index")->required()->check(CLI::PositiveNumber);
  estimate->add_option("--bandwidth", est.h, "bandwidth h")->required();
  estimate->add_flag("--smooth", est.smooth, "add the kernel-smoothed fit");
  estimate->add_option("--b", est.b, "smoothing bandwidth");
  estimate->add_flag("--bias-correct", est.bias_correct, "subtract the simulated bias under g = 0");
  estimate->add_option("--law", est.law, "error law spec, e.g. power_tail:1 or mexp:2");
  estimate->add_option("--bias-replicates", est.bias_replicates, "replicates for the bias estimate");
  estimate->add_option("--seed", est.seed, "seed for the bias simulation");
  estimate->add_option("--threads", est.threads, "worker threads (0 = all cores)");
  estimate->add_option("--out", est.out, "output CSV (default stdout)");

  GofArgs gof;
  auto* gofcmd = app.add_subcommand("gof", "goodness-of-fit test for the error law");
  gofcmd->add_option("--input", gof.input, "CSV with columns index,y")->required();
  gofcmd->add_option("--null", gof.null, "null family")->check(CLI::IsMember({"uniform", "mexp"}));
  gofcmd->add_option("--beta", gof.beta, "smoothness index")->check(CLI::PositiveNumber);
  gofcmd->add_option("--bandwidth", gof.h, "bandwidth h")->required();
  gofcmd->add_option("--level", gof.level, "test level");
  gofcmd->add_option("--test", gof.test, "statistic")->check(CLI::IsMember({"ks", "cvm"}));
  gofcmd->add_option("--cv", gof.cv, "asymptotic or mc:R");
  gofcmd->add_option("--seed", gof.seed, "seed for Monte-Carlo critical values");
  gofcmd->add_option("--threads", gof.threads, "worker threads (0 = all cores)");

  int order = 2;
  std::size_t points = 101;
  auto* kernel = app.add_subcommand("kernel", "tabulate a higher-order kernel");
  kernel->add_option("--order", order, "kernel order")->required();
  kernel->add_option("--grid", points, "number of points on [-1, 1]");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigExit;
  }

  try {
    for (const auto& [sub, kind] : studies)
      if (sub->parsed()) run_study(kind, study);
    if (estimate->parsed()) run_estimate(est);
    if (gofcmd->parsed()) run_gof(gof);
    if (kernel->parsed()) run_kernel(order, points);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigExit;
  } catch (const UnsupportedMode& e) {
    std::cerr << "unsupported: " << e.what() << '\n';
    return kConfigExit;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumericExit;
  }
  return 0;
}

// Command-line front end: build scenarios, run chains, compute diagnostics.
#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "l1gibbs/diagnostics.hpp"
#include "l1gibbs/io.hpp"
#include "l1gibbs/scenarios.hpp"
#include "l1gibbs/version.hpp"

namespace fs = std::filesystem;
using namespace l1gibbs;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

bool parse_on_off(const std::string& v, const char* flag) {
  if (v == "on" || v == "1" || v == "true") return true;
  if (v == "off" || v == "0" || v == "false") return false;
  throw UsageError(std::string(flag) + " expects on or off, got '" + v + "'");
}

std::string chain_file(std::size_t i, const char* stem, const char* ext) {
  return std::string(stem) + "_" + std::to_string(i) + ext;
}

// ---- scenario --------------------------------------------------------------

struct ScenarioArgs {
  std::string kind = "1d";
  int L_u = 6, L_m = 5;
  std::string lambda_rule = "table";
  std::optional<double> noise_sigma;
  int grid = 127;
  double blur_sigma = 0.015, rel_noise = 0.1, lambda = -1.0;
  int fine_factor = 4, n_spots = 12;
  long n = 256;
  std::string prior = "tv";
  std::uint64_t seed = 1;
  std::string out;
};

void add_scenario(CLI::App& app, ScenarioArgs& a) {
  auto* sub = app.add_subcommand("scenario", "Build a problem instance and write it to --out");
  sub->add_option("--config", "key = value file of long option names; command-line flags win");
  sub->add_option("--kind", a.kind, "1d, 2d or denoise")->check(CLI::IsMember({"1d", "2d", "denoise"}));
  sub->add_option("--L-u", a.L_u, "1d: n = 2^L_u - 1");
  sub->add_option("--L-m", a.L_m, "1d: k = 2^L_m - 2");
  sub->add_option("--lambda-rule", a.lambda_rule, "1d: fixed:<v>, scaled or table");
  sub->add_option("--noise-sigma", a.noise_sigma, "1d and denoise: noise standard deviation");
  sub->add_option("--grid", a.grid, "2d: pixels per side (odd)");
  sub->add_option("--blur-sigma", a.blur_sigma, "2d: Gaussian kernel width");
  sub->add_option("--rel-noise", a.rel_noise, "2d: noise sd relative to max clean data");
  sub->add_option("--fine-factor", a.fine_factor, "2d: refinement of the data-generation grid");
  sub->add_option("--n-spots", a.n_spots, "2d: circles in the default phantom");
  sub->add_option("--lambda", a.lambda, "2d and denoise: prior weight");
  sub->add_option("--n", a.n, "denoise: signal length");
  sub->add_option("--prior", a.prior, "denoise: tv or impulse")->check(CLI::IsMember({"tv", "impulse"}));
  sub->add_option("--seed", a.seed, "data seed");
  sub->add_option("--out", a.out, "output directory")->required();
}

int run_scenario(const ScenarioArgs& a, const std::string& command_line) {
  Scenario s;
  if (a.kind == "1d") {
    Scenario1dConfig c;
    c.L_u = a.L_u;
    c.L_m = a.L_m;
    c.lambda = LambdaRule::parse(a.lambda_rule);
    c.noise_sigma = a.noise_sigma.value_or(c.noise_sigma);
    c.seed = a.seed;
    s = build_1d(c);
  } else if (a.kind == "2d") {
    Scenario2dConfig c;
    c.grid = a.grid;
    c.blur_sigma = a.blur_sigma;
    c.rel_noise = a.rel_noise;
    c.fine_factor = a.fine_factor;
    c.n_spots = a.n_spots;
    if (a.lambda >= 0.0) c.lambda = a.lambda;
    c.seed = a.seed;
    s = build_2d(c);
  } else {
    DenoisingConfig c;
    c.n = a.n;
    c.noise_sigma = a.noise_sigma.value_or(c.noise_sigma);
    if (a.lambda >= 0.0) c.lambda = a.lambda;
    c.tv_prior = a.prior == "tv";
    c.seed = a.seed;
    s = build_denoising(c);
  }
  save_scenario(a.out, s);
  Manifest run;
  run["tool_version"] = kVersion;
  run["command"] = command_line;
  run["created"] = utc_now();
  write_manifest(fs::path(a.out) / "command.txt", run);
  std::cout << "scenario " << s.kind << ": n=" << s.model->n() << " k=" << s.model->k()
            << " lambda=" << format_double(s.model->lambda()) << " sigma=" << format_double(s.model->noise_sigma())
            << " -> " << a.out << "\n";
  return 0;
}

// ---- sample ----------------------------------------------------------------

struct SampleArgs {
  std::string scenario, sampler = "rngibbs", out;
  int n_o = 0;
  double kappa0 = 1.0;
  long n_star = 0;
  std::string adapt = "on";
  std::size_t burn_in = 0, samples = 1000, thin = 1;
  std::uint64_t seed = 1;
  std::string sigma2_block = "off";
  double alpha = 1.0, beta = 1.0;
  int chains = 1;
  std::string store_samples = "on";
  bool trace_log_posterior = false, trace_burn_in = false;
  std::size_t burn_in_trace_stride = 1;
  std::string project;
  std::string cache = "auto";
};

void add_sample(CLI::App& app, SampleArgs& a) {
  auto* sub = app.add_subcommand("sample", "Run one or more chains on a stored scenario");
  sub->add_option("--config", "key = value file of long option names; command-line flags win");
  sub->add_option("--scenario", a.scenario, "scenario directory")->required();
  sub->add_option("--sampler", a.sampler, "mh-iso, mh-ncom, mh-si, rngibbs or sysgibbs");
  sub->add_option("--n-o", a.n_o, "overrelaxation auxiliary draws (odd; 1 = plain Gibbs)");
  sub->add_option("--kappa0", a.kappa0, "MH initial step size");
  sub->add_option("--n-star", a.n_star, "MH-Ncom components per proposal (0: n^(7/12))");
  sub->add_option("--adapt", a.adapt, "MH step-size adaptation during burn-in (on/off)");
  sub->add_option("--burn-in", a.burn_in, "discarded samples");
  sub->add_option("--samples", a.samples, "recorded samples");
  sub->add_option("--thin", a.thin, "keep every thin-th sample");
  sub->add_option("--seed", a.seed, "base seed; chain i uses a seed derived from it");
  sub->add_option("--sigma2-block", a.sigma2_block, "sample the noise variance too (on/off)");
  sub->add_option("--alpha", a.alpha, "inverse-gamma shape for sigma^2");
  sub->add_option("--beta", a.beta, "inverse-gamma scale for sigma^2");
  sub->add_option("--chains", a.chains, "independent chains, run concurrently")->check(CLI::PositiveNumber);
  sub->add_option("--store-samples", a.store_samples, "write the full chain (on/off)");
  sub->add_flag("--trace-log-posterior", a.trace_log_posterior, "record log posterior of retained samples");
  sub->add_flag("--trace-burn-in", a.trace_burn_in, "record log posterior during burn-in");
  sub->add_option("--burn-in-trace-stride", a.burn_in_trace_stride, "burn-in trace spacing");
  sub->add_option("--project", a.project, "array file with a direction w; <w,u> is recorded per sample");
  sub->add_option("--cache", a.cache, "Gibbs cache: auto, dense-gram or operator")
      ->check(CLI::IsMember({"auto", "dense-gram", "operator"}));
  sub->add_option("--out", a.out, "output directory")->required();
}

int run_sample(const SampleArgs& a, const std::string& command_line) {
  const Scenario s = load_scenario(a.scenario);
  SamplerSpec spec = parse_sampler(a.sampler);
  if (a.n_o != 0) {
    if (spec.kind != SamplerSpec::Kind::kGibbs) throw UsageError("--n-o applies to Gibbs samplers only");
    spec.gibbs.n_o = a.n_o;
  }
  spec.mh.kappa = a.kappa0;
  spec.mh.n_star = a.n_star;
  spec.mh.adapt = parse_on_off(a.adapt, "--adapt");
  spec.hierarchical.enabled = parse_on_off(a.sigma2_block, "--sigma2-block");
  spec.hierarchical.alpha = a.alpha;
  spec.hierarchical.beta = a.beta;
  spec.gibbs.validate();
  spec.mh.validate();
  spec.hierarchical.validate();

  ChainConfig cfg;
  cfg.burn_in = a.burn_in;
  cfg.samples = a.samples;
  cfg.stride = a.thin;
  cfg.seed = a.seed;
  cfg.store_samples = parse_on_off(a.store_samples, "--store-samples");
  cfg.trace_log_posterior = a.trace_log_posterior;
  cfg.trace_burn_in = a.trace_burn_in;
  cfg.burn_in_trace_stride = a.burn_in_trace_stride;
  cfg.cache.mode = a.cache == "dense-gram" ? CacheMode::kDenseGram
                   : a.cache == "operator" ? CacheMode::kOperator
                                           : CacheMode::kAuto;
  if (!a.project.empty()) {
    const auto w = read_array(a.project);
    if (static_cast<Index>(w.size()) != s.model->n()) throw UsageError("--project: direction length != n");
    cfg.projections.push_back(Eigen::Map<const VectorXd>(w.data(), static_cast<Index>(w.size())));
  }
  if (a.thin == 0) throw UsageError("--thin must be positive");

  fs::create_directories(a.out);
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<Chain> chains =
      a.chains == 1 ? std::vector<Chain>{run_chain(*s.model, spec, cfg)}
                    : run_chains(*s.model, spec, cfg, a.chains, a.chains);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  Manifest m;
  m["tool_version"] = kVersion;
  m["command"] = command_line;
  m["created"] = utc_now();
  m["scenario"] = fs::absolute(a.scenario).lexically_normal().string();
  for (const auto& [k, v] : scenario_manifest(s)) m["scenario." + k] = v;
  m["sampler"] = spec.name();
  m["sampler.arg"] = a.sampler;
  m["unit"] = spec.unit();
  m["n_o"] = std::to_string(spec.gibbs.n_o);
  m["kappa0"] = format_double(spec.mh.kappa);
  m["n_star"] = std::to_string(spec.kind == SamplerSpec::Kind::kMh ? spec.mh.resolved_n_star(s.model->n()) : 0);
  m["adapt"] = spec.mh.adapt ? "on" : "off";
  m["sigma2_block"] = spec.hierarchical.enabled ? "on" : "off";
  m["alpha"] = format_double(spec.hierarchical.alpha);
  m["beta"] = format_double(spec.hierarchical.beta);
  m["burn_in"] = std::to_string(cfg.burn_in);
  m["samples"] = std::to_string(cfg.samples);
  m["thin"] = std::to_string(cfg.stride);
  m["trace_burn_in"] = cfg.trace_burn_in ? "1" : "0";
  m["burn_in_trace_stride"] = std::to_string(cfg.burn_in_trace_stride);
  m["trace_log_posterior"] = cfg.trace_log_posterior ? "1" : "0";
  m["seed"] = std::to_string(cfg.seed);
  m["chains"] = std::to_string(chains.size());
  m["cache"] = a.cache;
  m["project"] = a.project.empty() ? "" : fs::absolute(a.project).lexically_normal().string();
  m["wall_seconds"] = format_double(wall);

  int failures = 0;
  for (std::size_t i = 0; i < chains.size(); ++i) {
    const Chain& c = chains[i];
    const std::string id = std::to_string(i);
    m["chain." + id + ".seed"] = std::to_string(c.seed);
    m["chain." + id + ".t_s"] = format_double(c.t_s);
    write_chain(fs::path(a.out) / chain_file(i, "chain", ".bin"), c, {{"scenario", m["scenario"]}});
    if (!c.log_posterior_trace.empty()) write_array(fs::path(a.out) / chain_file(i, "logpost", ".bin"), c.log_posterior_trace);
    if (!c.burn_in_trace.empty()) write_array(fs::path(a.out) / chain_file(i, "burnin", ".bin"), c.burn_in_trace);
    if (!c.sigma2_trace.empty()) write_array(fs::path(a.out) / chain_file(i, "sigma2", ".bin"), c.sigma2_trace);
    if (!c.projections.empty()) write_array(fs::path(a.out) / chain_file(i, "projection", ".bin"), c.projections[0]);
    if (c.aborted) {
      ++failures;
      std::cerr << "chain " << i << " aborted: " << c.error << "\n";
    }
    std::cout << spec.name() << " chain " << i << ": seed=" << c.seed << " retained=" << c.samples.rows()
              << " t_s=" << format_double(c.t_s);
    if (spec.kind == SamplerSpec::Kind::kMh) std::cout << " acceptance=" << c.acceptance_rate << " kappa=" << c.kappa;
    std::cout << "\n";
  }
  write_manifest(fs::path(a.out) / "manifest.txt", m);
  return failures == 0 ? 0 : 3;
}

// ---- diagnose --------------------------------------------------------------

struct DiagnoseArgs {
  std::string run, reference, direction = "eigvec", out;
  long tau_max = -1;
  double threshold = 0.01;
};

void add_diagnose(CLI::App& app, DiagnoseArgs& a) {
  auto* sub = app.add_subcommand("diagnose", "Autocorrelation, lag table, burn-in trace and CM estimate of a run");
  sub->add_option("--config", "key = value file of long option names; command-line flags win");
  sub->add_option("--run", a.run, "directory written by sample")->required();
  sub->add_option("--direction", a.direction,
                  "test function: eigvec (leading covariance eigenvector), coord:<i>, file:<array> or projection");
  sub->add_option("--reference", a.reference, "run whose samples define the eigvec direction (default: --run)");
  sub->add_option("--tau-max", a.tau_max, "largest lag (default min(K-1, 1e6))");
  sub->add_option("--threshold", a.threshold, "acf level for the lag table");
  sub->add_option("--out", a.out, "output directory")->required();
}

std::vector<StoredChain> load_run(const fs::path& dir, bool samples) {
  const Manifest m = read_manifest(dir / "manifest.txt");
  const auto count = parse_u64(manifest_get(m, "chains"));
  std::vector<StoredChain> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(read_chain(dir / chain_file(i, "chain", ".bin"), samples));
  return out;
}

MatrixXd pooled(const std::vector<StoredChain>& chains) {
  Index rows = 0;
  for (const auto& c : chains) rows += c.samples.rows();
  if (rows == 0) throw UsageError("run has no stored samples; sample with --store-samples on");
  MatrixXd all(rows, chains.front().samples.cols());
  Index r = 0;
  for (const auto& c : chains) {
    all.middleRows(r, c.samples.rows()) = c.samples;
    r += c.samples.rows();
  }
  return all;
}

int run_diagnose(const DiagnoseArgs& a, const std::string& command_line) {
  const fs::path run(a.run);
  const Manifest rm = read_manifest(run / "manifest.txt");
  const bool use_projection = a.direction == "projection";
  const auto chains = load_run(run, !use_projection);
  const Index n = static_cast<Index>(parse_u64(manifest_get(rm, "scenario.n")));

  fs::create_directories(a.out);
  Manifest dm;
  dm["tool_version"] = kVersion;
  dm["command"] = command_line;
  dm["created"] = utc_now();
  dm["run"] = fs::absolute(run).lexically_normal().string();
  dm["direction"] = a.direction;
  dm["threshold"] = format_double(a.threshold);

  VectorXd w;
  if (!use_projection) {
    if (a.direction == "eigvec") {
      const MatrixXd ref = a.reference.empty() ? pooled(chains) : pooled(load_run(a.reference, true));
      const EigvecResult ev = leading_eigvec(ref);
      w = ev.function.direction;
      dm["eigenvalue"] = format_double(ev.eigenvalue);
      dm["second_eigenvalue"] = format_double(ev.second_eigenvalue);
      dm["degenerate"] = ev.degenerate ? "1" : "0";
      if (!a.reference.empty()) dm["reference"] = fs::absolute(a.reference).lexically_normal().string();
    } else if (a.direction.rfind("coord:", 0) == 0) {
      const auto i = static_cast<Index>(parse_u64(a.direction.substr(6)));
      if (i >= n) throw UsageError("coordinate out of range");
      w = TestFunction::coordinate(n, i).direction;
    } else if (a.direction.rfind("file:", 0) == 0) {
      const auto v = read_array(a.direction.substr(5));
      w = Eigen::Map<const VectorXd>(v.data(), static_cast<Index>(v.size()));
      if (w.size() != n) throw UsageError("direction length != n");
    } else {
      throw UsageError("unknown --direction '" + a.direction + "'");
    }
    write_array(fs::path(a.out) / "direction.bin", w);
  }

  std::vector<double> acf_chain, acf_tau, acf_r, acf_t;
  std::vector<double> lag_chain, lag_tau, lag_t, lag_conv;
  for (std::size_t i = 0; i < chains.size(); ++i) {
    std::vector<double> g;
    if (use_projection) {
      g = read_array(run / chain_file(i, "projection", ".bin"));
    } else {
      const VectorXd proj = chains[i].samples * w;
      g.assign(proj.data(), proj.data() + proj.size());
    }
    if (g.size() < 2) throw UsageError("chain " + std::to_string(i) + " is too short for an acf");
    const std::size_t tau_max = a.tau_max >= 0 ? std::min<std::size_t>(a.tau_max, g.size() - 1) : default_tau_max(g.size());
    const AcfResult acf = autocorrelation(g, tau_max, chains[i].header.t_s);
    for (std::size_t t = 0; t < acf.r.size(); ++t) {
      acf_chain.push_back(static_cast<double>(i));
      acf_tau.push_back(static_cast<double>(t));
      acf_r.push_back(acf.r[t]);
      acf_t.push_back(static_cast<double>(t) * acf.t_s);
    }
    const LagResult lag = lag_below(acf, a.threshold);
    lag_chain.push_back(static_cast<double>(i));
    lag_tau.push_back(lag.converged ? static_cast<double>(lag.tau) : -1.0);
    lag_t.push_back(lag.converged ? lag.t : -1.0);
    lag_conv.push_back(lag.converged ? 1.0 : 0.0);
  }
  write_csv(fs::path(a.out) / "acf.csv", {"chain", "tau", "R", "t"}, {acf_chain, acf_tau, acf_r, acf_t});
  write_csv(fs::path(a.out) / "lag.csv", {"chain", "tau", "t", "converged"}, {lag_chain, lag_tau, lag_t, lag_conv});

  // Burn-in traces share their spacing, so they average pointwise.
  std::vector<std::vector<double>> traces;
  for (std::size_t i = 0; i < chains.size(); ++i) {
    const fs::path p = run / chain_file(i, "burnin", ".bin");
    if (fs::exists(p)) traces.push_back(read_array(p));
  }
  if (!traces.empty()) {
    std::size_t len = traces.front().size();
    for (const auto& t : traces) len = std::min(len, t.size());
    std::vector<double> step(len), mean(len, 0.0);
    const double stride = rm.count("burn_in_trace_stride") ? parse_double(rm.at("burn_in_trace_stride")) : 1.0;
    for (std::size_t j = 0; j < len; ++j) {
      step[j] = static_cast<double>(j) * stride;
      for (const auto& t : traces) mean[j] += t[j] / static_cast<double>(traces.size());
    }
    write_csv(fs::path(a.out) / "burn_in.csv", {"step", "mean_log_posterior"}, {step, mean});
    if (len > 0) dm["burn_in_plateau_step"] = format_double(step[plateau_index(mean)]);
  }

  if (!use_projection) {
    const VectorXd cm = cm_estimate(pooled(chains));
    std::vector<double> idx(static_cast<std::size_t>(cm.size())), val(cm.data(), cm.data() + cm.size());
    for (std::size_t j = 0; j < idx.size(); ++j) idx[j] = static_cast<double>(j);
    write_csv(fs::path(a.out) / "cm.csv", {"index", "cm"}, {idx, val});
  }
  write_manifest(fs::path(a.out) / "manifest.txt", dm);
  for (std::size_t i = 0; i < lag_chain.size(); ++i) {
    std::cout << "chain " << i << ": tau_" << a.threshold << " = ";
    if (lag_conv[i] > 0) {
      std::cout << lag_tau[i] << " (t = " << lag_t[i] << " s)\n";
    } else {
      std::cout << "not reached\n";
    }
  }
  return 0;
}

// Splices `--config FILE` entries into the argument list as --key value,
// skipping keys already given as flags.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::vector<std::string> out;
  std::string file;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      file = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      file = args[i].substr(9);
    } else {
      out.push_back(args[i]);
    }
  }
  if (file.empty() || out.empty()) return out;
  auto given = [&](const std::string& flag) {
    for (const auto& a : out) {
      if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    }
    return false;
  };
  std::vector<std::string> extra;
  for (const auto& [key, value] : read_manifest(file)) {
    const std::string flag = "--" + key;
    if (given(flag)) continue;
    extra.push_back(flag);
    if (value != "true") extra.push_back(value);  // bare flags are written as key = true
  }
  out.insert(out.begin() + 1, extra.begin(), extra.end());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gibbs and Metropolis-Hastings sampling for L1-type posteriors"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  ScenarioArgs sa;
  SampleArgs pa;
  DiagnoseArgs da;
  add_scenario(app, sa);
  add_sample(app, pa);
  add_diagnose(app, da);
  std::vector<std::string> args;
  try {
    args = expand_config(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  }
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  std::ostringstream cl;
  cl << argv[0];
  for (const auto& a : args) cl << ' ' << a;
  try {
    if (app.got_subcommand("scenario")) return run_scenario(sa, cl.str());
    if (app.got_subcommand("sample")) return run_sample(pa, cl.str());
    return run_diagnose(da, cl.str());
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

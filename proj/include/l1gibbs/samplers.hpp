#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "l1gibbs/posterior.hpp"
#include "l1gibbs/random.hpp"

namespace l1gibbs {

enum class MhVariant { kIso, kNcom, kSi };

struct MhConfig {
  MhVariant variant = MhVariant::kIso;
  double kappa = 1.0;
  /// Components per MH-Ncom proposal; 0 selects floor(n^(7/12)).
  Index n_star = 0;
  bool adapt = true;
  /// Keep adapting after burn-in. Off by default so the recorded chain is Markov.
  bool adapt_after_burn_in = false;
  std::size_t adapt_window = 10000;
  double up_factor = 1.2;
  double down_factor = 0.8;
  double high_rate = 0.35;
  double low_rate = 0.15;

  void validate() const;
  Index resolved_n_star(Index n) const;
};

/// One adaptation decision: the window's acceptance rate and the new kappa.
struct KappaEvent {
  std::size_t sample = 0;
  double rate = 0.0;
  double kappa = 0.0;
};

/// New kappa after a completed window with `accepted` of `window` proposals.
double adapt_kappa(double kappa, std::size_t accepted, std::size_t window, const MhConfig& config);

enum class Scan { kRandom, kSystematic };

struct GibbsConfig {
  Scan scan = Scan::kRandom;
  int n_o = 1;  // odd; 1 means plain Gibbs
  void validate() const;
};

struct HierarchicalConfig {
  bool enabled = false;
  double alpha = 1.0;
  double beta = 1.0;
  void validate() const;
};

/// Which engine, with its settings.
struct SamplerSpec {
  enum class Kind { kMh, kGibbs };
  Kind kind = Kind::kGibbs;
  MhConfig mh;
  GibbsConfig gibbs;
  HierarchicalConfig hierarchical;

  /// Display name such as "MH-Iso", "RnGibbs" or "SysGibbsO7".
  std::string name() const;
  /// What one sample means: "proposal" or "sweep".
  std::string unit() const;
};

/// Parses mh-iso | mh-ncom | mh-si | rngibbs | sysgibbs, optionally with an
/// overrelaxation suffix such as rngibbso7. Case-insensitive.
SamplerSpec parse_sampler(const std::string& name);

/// Random-walk MH state in u-coordinates with incrementally tracked
/// residual m - A u and D u.
class MhState {
 public:
  MhState(const PosteriorModel& model, const VectorXd& u0);

  const VectorXd& u() const { return u_; }
  double log_posterior() const { return -model_->precision_half() * misfit_ - model_->lambda() * l1_; }
  double data_misfit() const { return misfit_; }
  /// Recompute residual, D u and the scalar sums from u.
  void refresh();

  /// One proposal; returns true if accepted.
  bool step(const MhConfig& config, double kappa, Rng& rng);

 private:
  bool step_full(double kappa, Rng& rng);
  bool step_subset(Index count, double kappa, Rng& rng);

  const PosteriorModel* model_;
  VectorXd u_, residual_, du_;
  double misfit_ = 0.0;
  double l1_ = 0.0;
  std::vector<Index> perm_;
  // Scratch for proposals touching few components.
  VectorXd dres_, ddu_, theta_, tmp_;
  std::vector<char> res_mark_, du_mark_;
  std::vector<Index> res_touched_, du_touched_, picked_;
  SparseColumn column_;
  std::size_t steps_since_refresh_ = 0;
};

/// Accept/reject one symmetric random-walk proposal.
bool mh_step(MhState& state, const MhConfig& config, double kappa, Rng& rng);

/// Advances a Gibbs scan by one component update and returns its index.
/// `cursor` is the systematic-scan position.
Index gibbs_update(CoefficientCache& cache, const GibbsConfig& config, Rng& rng, Index& cursor);

/// Draw from the inverse-gamma conditional of sigma^2 given a data misfit
/// |m - A u|^2 over k observations.
double sample_sigma2(double misfit, Index k, const HierarchicalConfig& config, Rng& rng);
double sample_sigma2(const VectorXd& u, const PosteriorModel& model,
                     const HierarchicalConfig& config, Rng& rng);

struct ChainConfig {
  std::size_t burn_in = 0;   // K0, in samples
  std::size_t samples = 0;   // K, in samples
  std::size_t stride = 1;    // thinning of everything recorded after burn-in
  std::uint64_t seed = 1;
  bool store_samples = true;
  bool trace_log_posterior = false;
  /// Record log posterior during burn-in every burn_in_trace_stride samples.
  bool trace_burn_in = false;
  std::size_t burn_in_trace_stride = 1;
  /// Directions w in u-space; <w, u> is recorded for each retained sample.
  std::vector<VectorXd> projections;
  std::optional<VectorXd> u0;  // default u = 0
  CacheOptions cache;
};

struct Chain {
  MatrixXd samples;  // retained samples in u-coordinates, one per row
  std::size_t burn_in = 0;
  std::size_t total = 0;
  std::size_t stride = 1;
  std::uint64_t seed = 0;
  double t_s = 0.0;  // wall seconds per sample after burn-in
  std::string sampler;
  std::string unit;
  std::size_t updates_per_sample = 1;
  std::vector<double> log_posterior_trace;
  std::vector<double> burn_in_trace;
  std::vector<double> sigma2_trace;
  std::vector<std::vector<double>> projections;
  std::vector<KappaEvent> kappa_events;
  double kappa = 0.0;
  double acceptance_rate = 0.0;  // MH, post burn-in
  VectorXd final_u;
  double final_sigma2 = 0.0;
  bool aborted = false;
  std::string error;

  std::size_t retained() const { return total == 0 ? 0 : (total + stride - 1) / stride; }
};

/// Runs burn-in and sampling. The model is copied, so hierarchical runs do
/// not disturb the caller's noise level. Deterministic given the seed.
Chain run_chain(const PosteriorModel& model, const SamplerSpec& spec, const ChainConfig& config);

/// Runs chains with seeds derive_seed(config.seed, i) on up to `threads`
/// threads.
std::vector<Chain> run_chains(const PosteriorModel& model, const SamplerSpec& spec,
                              const ChainConfig& config, int count, int threads);

}  // namespace l1gibbs

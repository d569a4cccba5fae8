#include "l1gibbs/samplers.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <sstream>
#include <thread>

namespace l1gibbs {

void MhConfig::validate() const {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw std::invalid_argument("MhConfig: kappa must be positive");
  if (!(0.0 < low_rate && low_rate < high_rate && high_rate < 1.0)) {
    throw std::invalid_argument("MhConfig: need 0 < low_rate < high_rate < 1");
  }
  if (!(up_factor > 1.0) || !(down_factor > 0.0 && down_factor < 1.0)) {
    throw std::invalid_argument("MhConfig: factors must bracket 1");
  }
  if (adapt_window == 0) throw std::invalid_argument("MhConfig: adapt_window must be positive");
}

Index MhConfig::resolved_n_star(Index n) const {
  Index s = n_star > 0 ? n_star
                       : static_cast<Index>(std::floor(std::pow(static_cast<double>(n), 7.0 / 12.0)));
  return std::clamp<Index>(s, 1, n);
}

double adapt_kappa(double kappa, std::size_t accepted, std::size_t window, const MhConfig& config) {
  const double rate = static_cast<double>(accepted) / static_cast<double>(window);
  if (rate > config.high_rate) return kappa * config.up_factor;
  if (rate < config.low_rate) return kappa * config.down_factor;
  return kappa;
}

void GibbsConfig::validate() const {
  if (n_o < 1 || n_o % 2 == 0) throw std::invalid_argument("GibbsConfig: n_o must be odd and positive");
}

void HierarchicalConfig::validate() const {
  if (!(alpha > 0.0) || !(beta > 0.0)) {
    throw std::invalid_argument("HierarchicalConfig: alpha and beta must be positive");
  }
}

std::string SamplerSpec::name() const {
  if (kind == Kind::kMh) {
    switch (mh.variant) {
      case MhVariant::kIso: return "MH-Iso";
      case MhVariant::kNcom: return "MH-Ncom";
      case MhVariant::kSi: return "MH-Si";
    }
  }
  std::string s = gibbs.scan == Scan::kRandom ? "RnGibbs" : "SysGibbs";
  if (gibbs.n_o > 1) s += "O" + std::to_string(gibbs.n_o);
  return s;
}

std::string SamplerSpec::unit() const { return kind == Kind::kMh ? "proposal" : "sweep"; }

SamplerSpec parse_sampler(const std::string& raw) {
  std::string name;
  for (char ch : raw) name += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  SamplerSpec spec;
  if (name == "mh-iso" || name == "mh-ncom" || name == "mh-si") {
    spec.kind = SamplerSpec::Kind::kMh;
    spec.mh.variant = name == "mh-iso" ? MhVariant::kIso
                      : name == "mh-ncom" ? MhVariant::kNcom
                                          : MhVariant::kSi;
    return spec;
  }
  std::string rest;
  if (name.rfind("rngibbs", 0) == 0) {
    spec.gibbs.scan = Scan::kRandom;
    rest = name.substr(7);
  } else if (name.rfind("sysgibbs", 0) == 0) {
    spec.gibbs.scan = Scan::kSystematic;
    rest = name.substr(8);
  } else {
    throw std::invalid_argument("unknown sampler '" + raw + "'");
  }
  if (!rest.empty()) {
    if (rest[0] != 'o' || rest.size() < 2 ||
        !std::all_of(rest.begin() + 1, rest.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      throw std::invalid_argument("unknown sampler '" + raw + "'");
    }
    spec.gibbs.n_o = std::stoi(rest.substr(1));
  }
  spec.gibbs.validate();
  return spec;
}

MhState::MhState(const PosteriorModel& model, const VectorXd& u0) : model_(&model), u_(u0) {
  const Index n = model.n();
  if (u0.size() != n) throw std::invalid_argument("MhState: u0 size != n");
  perm_.resize(n);
  for (Index i = 0; i < n; ++i) perm_[i] = i;
  dres_ = VectorXd::Zero(model.k());
  ddu_ = VectorXd::Zero(model.prior_rows());
  res_mark_.assign(model.k(), 0);
  du_mark_.assign(model.prior_rows(), 0);
  refresh();
}

void MhState::refresh() {
  residual_ = model_->data() - model_->op() * u_;
  du_ = model_->d() * u_;
  misfit_ = residual_.squaredNorm();
  l1_ = du_.lpNorm<1>();
  steps_since_refresh_ = 0;
}

bool MhState::step(const MhConfig& config, double kappa, Rng& rng) {
  bool accepted = false;
  switch (config.variant) {
    case MhVariant::kIso: accepted = step_full(kappa, rng); break;
    case MhVariant::kNcom: accepted = step_subset(config.resolved_n_star(u_.size()), kappa, rng); break;
    case MhVariant::kSi: accepted = step_subset(1, kappa, rng); break;
  }
  if (++steps_since_refresh_ >= 10000) refresh();
  return accepted;
}

namespace {

bool metropolis_accept(double log_ratio, Rng& rng) {
  if (log_ratio >= 0.0) return true;
  return std::log(rng.uniform()) < log_ratio;
}

}  // namespace

bool MhState::step_full(double kappa, Rng& rng) {
  const Index n = u_.size();
  theta_.resize(n);
  for (Index i = 0; i < n; ++i) theta_[i] = kappa * rng.normal();
  model_->op().apply(theta_, tmp_);
  VectorXd res_new = residual_ - tmp_;
  VectorXd du_new = du_ + model_->d() * theta_;
  const double misfit_new = res_new.squaredNorm();
  const double l1_new = du_new.lpNorm<1>();
  const double s = model_->precision_half();
  const double lam = model_->lambda();
  const double log_ratio = -s * (misfit_new - misfit_) - lam * (l1_new - l1_);
  if (!metropolis_accept(log_ratio, rng)) return false;
  u_ += theta_;
  residual_.swap(res_new);
  du_.swap(du_new);
  misfit_ = misfit_new;
  l1_ = l1_new;
  return true;
}

bool MhState::step_subset(Index count, double kappa, Rng& rng) {
  const Index n = u_.size();
  // Partial Fisher-Yates: the first `count` entries of perm_ become a
  // uniformly chosen set of distinct indices.
  picked_.clear();
  theta_.resize(count);
  for (Index t = 0; t < count; ++t) {
    const Index j = t + static_cast<Index>(rng.index(static_cast<std::uint64_t>(n - t)));
    std::swap(perm_[t], perm_[j]);
    picked_.push_back(perm_[t]);
    theta_[t] = kappa * rng.normal();
  }
  const SparseMatrixD& d = model_->d();
  for (Index t = 0; t < count; ++t) {
    const Index j = picked_[t];
    model_->op().column(j, column_);
    for (std::size_t q = 0; q < column_.index.size(); ++q) {
      const Index r = column_.index[q];
      if (!res_mark_[r]) {
        res_mark_[r] = 1;
        res_touched_.push_back(r);
        dres_[r] = 0.0;
      }
      dres_[r] += column_.value[q] * theta_[t];
    }
    for (SparseMatrixD::InnerIterator it(d, j); it; ++it) {
      const Index r = it.row();
      if (!du_mark_[r]) {
        du_mark_[r] = 1;
        du_touched_.push_back(r);
        ddu_[r] = 0.0;
      }
      ddu_[r] += it.value() * theta_[t];
    }
  }
  double dmisfit = 0.0;
  for (Index r : res_touched_) dmisfit += dres_[r] * (dres_[r] - 2.0 * residual_[r]);
  double dl1 = 0.0;
  for (Index r : du_touched_) dl1 += std::fabs(du_[r] + ddu_[r]) - std::fabs(du_[r]);
  const double log_ratio = -model_->precision_half() * dmisfit - model_->lambda() * dl1;
  const bool accepted = metropolis_accept(log_ratio, rng);
  if (accepted) {
    for (Index t = 0; t < count; ++t) u_[picked_[t]] += theta_[t];
    for (Index r : res_touched_) residual_[r] -= dres_[r];
    for (Index r : du_touched_) du_[r] += ddu_[r];
    misfit_ += dmisfit;
    l1_ += dl1;
  }
  for (Index r : res_touched_) res_mark_[r] = 0;
  for (Index r : du_touched_) du_mark_[r] = 0;
  res_touched_.clear();
  du_touched_.clear();
  return accepted;
}

bool mh_step(MhState& state, const MhConfig& config, double kappa, Rng& rng) {
  return state.step(config, kappa, rng);
}

Index gibbs_update(CoefficientCache& cache, const GibbsConfig& config, Rng& rng, Index& cursor) {
  const Index n = cache.xi().size();
  Index i;
  if (config.scan == Scan::kRandom) {
    i = static_cast<Index>(rng.index(static_cast<std::uint64_t>(n)));
  } else {
    i = cursor;
    cursor = (cursor + 1) % n;
  }
  const ExpQuadParams params = cache.conditional_params(i);
  double value;
  try {
    const NormalizationTerms terms = prepare(params);
    value = config.n_o == 1 ? sample(terms, rng)
                            : sample_overrelaxed(terms, cache.xi()[i], config.n_o, rng);
  } catch (const NumericalError& e) {
    throw NumericalError(std::string(e.what()) + " (component " + std::to_string(i) + ")", e.params());
  }
  cache.commit(i, value);
  return i;
}

double sample_sigma2(double misfit, Index k, const HierarchicalConfig& config, Rng& rng) {
  const double shape = config.alpha + 0.5 * static_cast<double>(k);
  const double scale = 0.5 * misfit + config.beta;
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw std::domain_error("sample_sigma2: inverse-gamma scale is not positive and finite");
  }
  const double g = rng.gamma(shape);
  const double draw = scale / g;
  if (!(draw > 0.0) || !std::isfinite(draw)) throw std::domain_error("sample_sigma2: draw out of range");
  return draw;
}

double sample_sigma2(const VectorXd& u, const PosteriorModel& model, const HierarchicalConfig& config,
                     Rng& rng) {
  return sample_sigma2(model.data_misfit_u(u), model.k(), config, rng);
}

namespace {

using Clock = std::chrono::steady_clock;

// The per-engine part of run_chain: advance by one sample and report state.
struct Engine {
  virtual ~Engine() = default;
  virtual void advance(bool adapting) = 0;
  virtual VectorXd u() const = 0;
  virtual double log_posterior() const = 0;
  virtual double projection(std::size_t p) const = 0;
};

struct GibbsEngine final : Engine {
  GibbsEngine(PosteriorModel& model, const SamplerSpec& spec, const ChainConfig& config, Rng& rng)
      : model(model), spec(spec), rng(rng),
        cache(model, model.xi_from_u(config.u0 ? *config.u0 : VectorXd::Zero(model.n())), config.cache) {
    for (const auto& w : config.projections) vt.push_back(model.basis().apply_transpose(w));
  }
  void advance(bool) override {
    const Index n = model.n();
    for (Index t = 0; t < n; ++t) gibbs_update(cache, spec.gibbs, rng, cursor);
    if (spec.hierarchical.enabled) {
      model.set_noise_variance(sample_sigma2(cache.data_misfit(), model.k(), spec.hierarchical, rng));
    }
  }
  VectorXd u() const override { return model.u_from_xi(cache.xi()); }
  double log_posterior() const override { return cache.log_posterior(); }
  double projection(std::size_t p) const override { return vt[p].dot(cache.xi()); }

  PosteriorModel& model;
  const SamplerSpec& spec;
  Rng& rng;
  CoefficientCache cache;
  std::vector<VectorXd> vt;
  Index cursor = 0;
};

struct MhEngine final : Engine {
  MhEngine(PosteriorModel& model, const SamplerSpec& spec, const ChainConfig& config, Rng& rng,
           Chain& chain)
      : model(model), spec(spec), config(config), rng(rng), chain(chain),
        state(model, config.u0 ? *config.u0 : VectorXd::Zero(model.n())), kappa(spec.mh.kappa) {}
  void advance(bool adapting) override {
    const bool acc = state.step(spec.mh, kappa, rng);
    ++proposals;
    if (acc) ++accepted_total;
    if (adapting) {
      if (acc) ++window_accepted;
      if (++window_count == spec.mh.adapt_window) {
        const double next = adapt_kappa(kappa, window_accepted, window_count, spec.mh);
        if (next != kappa) {
          chain.kappa_events.push_back(
              {proposals, static_cast<double>(window_accepted) / static_cast<double>(window_count), next});
        }
        kappa = next;
        window_count = 0;
        window_accepted = 0;
      }
    }
    if (spec.hierarchical.enabled && proposals % static_cast<std::size_t>(model.n()) == 0) {
      model.set_noise_variance(sample_sigma2(state.data_misfit(), model.k(), spec.hierarchical, rng));
    }
  }
  VectorXd u() const override { return state.u(); }
  double log_posterior() const override { return state.log_posterior(); }
  double projection(std::size_t p) const override { return config.projections[p].dot(state.u()); }

  PosteriorModel& model;
  const SamplerSpec& spec;
  const ChainConfig& config;
  Rng& rng;
  Chain& chain;
  MhState state;
  double kappa;
  std::size_t proposals = 0, accepted_total = 0, window_count = 0, window_accepted = 0;
};

}  // namespace

Chain run_chain(const PosteriorModel& model_in, const SamplerSpec& spec, const ChainConfig& config) {
  Chain chain;
  chain.burn_in = config.burn_in;
  chain.total = config.samples;
  chain.stride = std::max<std::size_t>(config.stride, 1);
  chain.seed = config.seed;
  chain.sampler = spec.name();
  chain.unit = spec.unit();

  PosteriorModel model = model_in;
  const Index n = model.n();
  chain.updates_per_sample = spec.kind == SamplerSpec::Kind::kMh ? 1 : static_cast<std::size_t>(n);
  for (const auto& w : config.projections) {
    if (w.size() != n) throw std::invalid_argument("run_chain: projection direction has wrong size");
  }
  if (config.u0 && config.u0->size() != n) throw std::invalid_argument("run_chain: u0 has wrong size");
  if (spec.kind == SamplerSpec::Kind::kMh) spec.mh.validate();
  spec.gibbs.validate();
  if (spec.hierarchical.enabled) spec.hierarchical.validate();

  Rng rng(config.seed);
  std::unique_ptr<Engine> engine;
  if (spec.kind == SamplerSpec::Kind::kMh) {
    engine = std::make_unique<MhEngine>(model, spec, config, rng, chain);
  } else {
    engine = std::make_unique<GibbsEngine>(model, spec, config, rng);
  }
  auto* mh = dynamic_cast<MhEngine*>(engine.get());

  const std::size_t retained = chain.retained();
  if (config.store_samples) chain.samples.resize(static_cast<Index>(retained), n);
  chain.projections.assign(config.projections.size(), {});
  for (auto& p : chain.projections) p.reserve(retained);

  std::size_t recorded = 0;
  const auto t0 = Clock::now();
  auto t1 = t0;
  try {
    const bool adapt = spec.kind == SamplerSpec::Kind::kMh && spec.mh.adapt;
    for (std::size_t t = 0; t < config.burn_in; ++t) {
      engine->advance(adapt);
      if (config.trace_burn_in && t % std::max<std::size_t>(config.burn_in_trace_stride, 1) == 0) {
        chain.burn_in_trace.push_back(engine->log_posterior());
      }
    }
    std::size_t accepted_before = mh ? mh->accepted_total : 0;
    t1 = Clock::now();
    const bool adapt_after = adapt && spec.mh.adapt_after_burn_in;
    for (std::size_t t = 0; t < config.samples; ++t) {
      engine->advance(adapt_after);
      if (t % chain.stride != 0) continue;
      if (config.store_samples) chain.samples.row(static_cast<Index>(recorded)) = engine->u().transpose();
      for (std::size_t p = 0; p < config.projections.size(); ++p) {
        chain.projections[p].push_back(engine->projection(p));
      }
      if (config.trace_log_posterior) chain.log_posterior_trace.push_back(engine->log_posterior());
      if (spec.hierarchical.enabled) chain.sigma2_trace.push_back(model.noise_variance());
      ++recorded;
    }
    if (mh && config.samples > 0) {
      chain.acceptance_rate = static_cast<double>(mh->accepted_total - accepted_before) /
                              static_cast<double>(config.samples);
    }
  } catch (const std::exception& e) {
    chain.aborted = true;
    chain.error = e.what();
    if (config.store_samples) chain.samples.conservativeResize(static_cast<Index>(recorded), n);
  }
  const auto t2 = Clock::now();
  const double sampling = std::chrono::duration<double>(t2 - t1).count();
  const double whole = std::chrono::duration<double>(t2 - t0).count();
  if (config.samples > 0) {
    chain.t_s = sampling / static_cast<double>(config.samples);
  } else {
    chain.t_s = whole / static_cast<double>(std::max<std::size_t>(config.burn_in, 1));
  }
  chain.t_s = std::max(chain.t_s, 1e-12);
  chain.kappa = mh ? mh->kappa : 0.0;
  chain.final_u = engine->u();
  chain.final_sigma2 = model.noise_variance();
  return chain;
}

std::vector<Chain> run_chains(const PosteriorModel& model, const SamplerSpec& spec,
                              const ChainConfig& config, int count, int threads) {
  std::vector<Chain> chains(static_cast<std::size_t>(std::max(count, 0)));
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (int i = next++; i < count; i = next++) {
      ChainConfig c = config;
      c.seed = derive_seed(config.seed, static_cast<std::uint64_t>(i));
      chains[static_cast<std::size_t>(i)] = run_chain(model, spec, c);
    }
  };
  const int workers = std::clamp(threads, 1, std::max(count, 1));
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  return chains;
}

}  // namespace l1gibbs

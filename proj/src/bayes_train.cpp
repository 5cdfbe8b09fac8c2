// Copyright 2026 The BONN Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "bonn/bayes_train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

namespace bonn {
namespace {

enum Stream : std::uint64_t {
  kInitStream = 1,
  kShuffleStream = 2,
  kDropoutStream = 3,
  kNoiseStream = 4,
  kPredictStream = 5,
};

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

struct Chunk {
  Eigen::Index begin, count;
};

std::vector<Chunk> split_columns(Eigen::Index cols, int workers) {
  const Eigen::Index w = std::clamp<Eigen::Index>(workers, 1, std::max<Eigen::Index>(cols, 1));
  std::vector<Chunk> chunks;
  Eigen::Index start = 0;
  for (Eigen::Index k = 0; k < w; ++k) {
    const Eigen::Index count = cols / w + (k < cols % w ? 1 : 0);
    chunks.push_back({start, count});
    start += count;
  }
  return chunks;
}

/// scale * sum ||f(x) - x||^2 over the columns of `x`, with its gradient
/// accumulated into `grad` when non-null.
double scaled_sum_sq(const Sequential& model, const Eigen::VectorXd& params,
                     const Eigen::MatrixXd& x, double scale, Eigen::VectorXd* grad,
                     ForwardContext& ctx) {
  const std::span<const double> p(params.data(), static_cast<std::size_t>(params.size()));
  std::vector<LayerCache> caches;
  const Eigen::MatrixXd y = model.forward(p, x, ctx, grad != nullptr ? &caches : nullptr);
  const Eigen::MatrixXd diff = y - x;
  if (grad != nullptr) *grad += model.backward(p, caches, (2.0 * scale) * diff);
  return scale * diff.squaredNorm();
}

/// Fans columns out to workers and reduces in chunk order.
double parallel_sum_sq(const Sequential& model, const Eigen::VectorXd& params,
                       const Eigen::MatrixXd& x, double scale, Eigen::VectorXd* grad,
                       ForwardContext& ctx, int workers, std::uint64_t dropout_seed) {
  if (workers <= 1 || x.cols() < 2) return scaled_sum_sq(model, params, x, scale, grad, ctx);
  const std::vector<Chunk> chunks = split_columns(x.cols(), workers);
  std::vector<double> losses(chunks.size(), 0.0);
  std::vector<Eigen::VectorXd> grads(chunks.size());
  std::vector<std::thread> threads;
  for (std::size_t k = 0; k < chunks.size(); ++k) {
    threads.emplace_back([&, k] {
      Rng rng = make_rng(dropout_seed, {k});
      ForwardContext local{ctx.dropout_active, &rng};
      Eigen::VectorXd g;
      if (grad != nullptr) g = Eigen::VectorXd::Zero(params.size());
      losses[k] = scaled_sum_sq(model, params, x.middleCols(chunks[k].begin, chunks[k].count),
                                scale, grad != nullptr ? &g : nullptr, local);
      grads[k] = std::move(g);
    });
  }
  for (std::thread& t : threads) t.join();
  double loss = 0.0;
  for (std::size_t k = 0; k < chunks.size(); ++k) {
    loss += losses[k];
    if (grad != nullptr) *grad += grads[k];
  }
  return loss;
}

std::vector<std::size_t> shuffled(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i)) % i;
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

Eigen::MatrixXd gather(const Eigen::MatrixXd& data, const std::vector<std::size_t>& order,
                       std::size_t begin, std::size_t end) {
  Eigen::MatrixXd batch(data.rows(), static_cast<Eigen::Index>(end - begin));
  for (std::size_t k = begin; k < end; ++k) {
    batch.col(static_cast<Eigen::Index>(k - begin)) = data.col(static_cast<Eigen::Index>(order[k]));
  }
  return batch;
}

double validation_mse(const Sequential& model, const Eigen::VectorXd& params,
                      const Eigen::MatrixXd& val) {
  if (val.cols() == 0) return 0.0;
  ForwardContext ctx;
  return reconstruction_loss(model, params, val, nullptr, ctx);
}

}  // namespace

std::string_view mode_name(TrainMode mode) {
  switch (mode) {
    case TrainMode::kPointEstimate: return "PE";
    case TrainMode::kBayesian: return "Bayesian";
    case TrainMode::kMcDropout: return "MCD";
    case TrainMode::kEnsemble: return "Ensemble";
  }
  return "PE";
}

TrainMode parse_mode(std::string_view name) {
  for (TrainMode m : {TrainMode::kPointEstimate, TrainMode::kBayesian, TrainMode::kMcDropout,
                      TrainMode::kEnsemble}) {
    if (mode_name(m) == name) return m;
  }
  throw std::invalid_argument("unknown training mode '" + std::string(name) +
                              "' (expected PE, Bayesian, MCD or Ensemble)");
}

std::string_view optimizer_name(OptimizerKind kind) {
  return kind == OptimizerKind::kAdam ? "adam" : "sgd";
}

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "adam") return OptimizerKind::kAdam;
  if (name == "sgd") return OptimizerKind::kSgdMomentum;
  throw std::invalid_argument("unknown optimizer '" + std::string(name) + "' (expected sgd or adam)");
}

void TrainConfig::validate() const {
  require(learning_rate > 0.0 && std::isfinite(learning_rate), "learning_rate must be positive");
  require(epochs >= 0, "epochs must be nonnegative");
  require(batch_size >= 1, "batch_size must be positive");
  require(mc_samples >= 1, "mc_samples must be at least 1");
  require(eval_samples >= 1, "eval_samples must be at least 1");
  require(std::isfinite(kl_scale), "kl_scale must be finite");
  require(dropout_rate >= 0.0 && dropout_rate < 1.0, "dropout_rate must lie in [0, 1)");
  require(ensemble_size >= 1, "ensemble_size must be at least 1");
  require(sigma_lik > 0.0, "sigma_lik must be positive");
  require(momentum >= 0.0 && momentum < 1.0, "momentum must lie in [0, 1)");
  require(init_sigma > 0.0, "init_sigma must be positive");
  require(workers >= 1, "workers must be at least 1");
}

Eigen::VectorXd VariationalParams::sigma() const {
  Eigen::VectorXd s(rho.size());
  for (Eigen::Index i = 0; i < rho.size(); ++i) s[i] = softplus(rho[i]);
  return s;
}

void VariationalParams::validate() const {
  require(mu.size() == rho.size(), "variational mean and scale differ in length");
  require(mu.allFinite() && rho.allFinite(), "variational parameters must be finite");
}

VariationalParams VariationalParams::around(const Eigen::VectorXd& mean, double sigma) {
  require(sigma > 0.0, "posterior scale must be positive");
  return {mean, Eigen::VectorXd::Constant(mean.size(), inverse_softplus(sigma))};
}

Eigen::VectorXd sample_params(const VariationalParams& vp, Rng& rng, Eigen::VectorXd* eps_out) {
  Eigen::VectorXd eps(vp.size());
  fill_standard_normal(rng, eps.data(), static_cast<std::size_t>(eps.size()));
  Eigen::VectorXd theta = vp.mu + vp.sigma().cwiseProduct(eps);
  if (eps_out != nullptr) *eps_out = std::move(eps);
  return theta;
}

namespace {

// softplus(rho), its derivative sigmoid(rho) and the KL term in one pass.
struct PosteriorTerms {
  Eigen::VectorXd sigma;
  Eigen::VectorXd dsigma;
  double kl = 0.0;
};

PosteriorTerms posterior_terms(const VariationalParams& vp, bool derivative) {
  PosteriorTerms t;
  t.sigma.resize(vp.size());
  if (derivative) t.dsigma.resize(vp.size());
  double kl = 0.0;
  for (Eigen::Index i = 0; i < vp.size(); ++i) {
    const double r = vp.rho[i];
    const double e = std::exp(-std::abs(r));
    const double s = r > 0.0 ? r + std::log1p(e) : std::log1p(e);
    t.sigma[i] = s;
    if (derivative) t.dsigma[i] = r > 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
    kl += s * s + vp.mu[i] * vp.mu[i] - 2.0 * std::log(s) - 1.0;
  }
  t.kl = 0.5 * kl;
  return t;
}

}  // namespace

double kl_term(const VariationalParams& vp) { return posterior_terms(vp, false).kl; }

ElboResult elbo_loss_with_noise(const Sequential& model, const VariationalParams& vp,
                                const Eigen::MatrixXd& batch,
                                const std::vector<Eigen::VectorXd>& eps,
                                const ElboOptions& opts) {
  require(batch.cols() > 0, "ELBO needs a nonempty batch");
  require(!eps.empty(), "ELBO needs at least one draw");
  require(vp.size() == static_cast<Eigen::Index>(model.num_params()),
          "variational parameters do not match the model");
  const PosteriorTerms terms = posterior_terms(vp, true);
  const Eigen::VectorXd& sigma = terms.sigma;
  const Eigen::VectorXd& dsigma = terms.dsigma;
  const double draws = static_cast<double>(eps.size());
  const double scale = 1.0 / (2.0 * opts.sigma_lik * opts.sigma_lik * draws);

  ElboResult r;
  r.grad_mu = Eigen::VectorXd::Zero(vp.size());
  r.grad_rho = Eigen::VectorXd::Zero(vp.size());
  Eigen::VectorXd g(vp.size());
  for (const Eigen::VectorXd& e : eps) {
    const Eigen::VectorXd theta = vp.mu + sigma.cwiseProduct(e);
    g.setZero();
    ForwardContext ctx;
    r.nll += parallel_sum_sq(model, theta, batch, scale, &g, ctx, opts.workers, 0);
    r.grad_mu += g;
    r.grad_rho += g.cwiseProduct(e).cwiseProduct(dsigma);
  }
  r.kl = terms.kl;
  r.loss = r.nll + opts.kl_scale * r.kl;
  r.grad_mu += opts.kl_scale * vp.mu;
  r.grad_rho += opts.kl_scale *
                (sigma - sigma.cwiseInverse()).cwiseProduct(dsigma);
  return r;
}

ElboResult elbo_loss(const Sequential& model, const VariationalParams& vp,
                     const Eigen::MatrixXd& batch, Rng& rng, const ElboOptions& opts) {
  require(opts.samples >= 1, "ELBO needs at least one draw");
  std::vector<Eigen::VectorXd> eps(static_cast<std::size_t>(opts.samples));
  for (Eigen::VectorXd& e : eps) {
    e.resize(vp.size());
    fill_standard_normal(rng, e.data(), static_cast<std::size_t>(e.size()));
  }
  return elbo_loss_with_noise(model, vp, batch, eps, opts);
}

double reconstruction_loss(const Sequential& model, const Eigen::VectorXd& params,
                           const Eigen::MatrixXd& batch, Eigen::VectorXd* grad,
                           ForwardContext& ctx, int workers, std::uint64_t dropout_seed) {
  require(batch.cols() > 0, "reconstruction loss needs a nonempty batch");
  if (grad != nullptr) *grad = Eigen::VectorXd::Zero(params.size());
  const double scale = 1.0 / static_cast<double>(batch.size());
  return parallel_sum_sq(model, params, batch, scale, grad, ctx, workers, dropout_seed);
}

void optimizer_step(const TrainConfig& config, OptimizerState& state, Eigen::VectorXd& params,
                    const Eigen::VectorXd& grad) {
  if (state.m.size() != params.size()) state.m = Eigen::VectorXd::Zero(params.size());
  ++state.step;
  if (config.optimizer == OptimizerKind::kSgdMomentum) {
    state.m = config.momentum * state.m + grad;
    params -= config.learning_rate * state.m;
    return;
  }
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  if (state.v.size() != params.size()) state.v = Eigen::VectorXd::Zero(params.size());
  state.m = kBeta1 * state.m + (1.0 - kBeta1) * grad;
  state.v = kBeta2 * state.v + (1.0 - kBeta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.step));
  params.array() -= config.learning_rate * (state.m.array() / c1) /
                    ((state.v.array() / c2).sqrt() + kEps);
}

TrainState init_train_state(const Sequential& model, TrainMode mode, const TrainConfig& config) {
  config.validate();
  TrainState state;
  state.model.mode = mode;
  const int members = mode == TrainMode::kEnsemble ? config.ensemble_size : 1;
  for (int e = 0; e < members; ++e) {
    Rng rng = make_rng(config.seed, {kInitStream, static_cast<std::uint64_t>(e)});
    state.model.members.push_back(model.init_params(rng));
  }
  if (mode == TrainMode::kBayesian) {
    state.model.posterior = VariationalParams::around(state.model.members.front(), config.init_sigma);
    state.model.members.clear();
    state.optimizers.resize(2);
  } else {
    state.optimizers.resize(static_cast<std::size_t>(members));
  }
  if (mode == TrainMode::kMcDropout) state.model.dropout_rate = config.dropout_rate;
  return state;
}

void train_epochs(const Sequential& model, TrainState& state, const Eigen::MatrixXd& train,
                  const Eigen::MatrixXd& val, const TrainConfig& config, int epochs) {
  config.validate();
  require(epochs >= 0, "epoch count must be nonnegative");
  if (epochs == 0) return;
  require(train.cols() > 0, "training set is empty");
  const std::size_t n = static_cast<std::size_t>(train.cols());
  const std::size_t bs = static_cast<std::size_t>(config.batch_size);
  const std::size_t num_batches = (n + bs - 1) / bs;
  const TrainMode mode = state.model.mode;

  for (int k = 0; k < epochs; ++k) {
    const int epoch = state.epochs_done;
    const auto ep = static_cast<std::uint64_t>(epoch);
    if (mode == TrainMode::kBayesian) {
      Rng shuffle_rng = make_rng(config.seed, {kShuffleStream, 0, ep});
      Rng noise = make_rng(config.seed, {kNoiseStream, ep});
      const std::vector<std::size_t> order = shuffled(n, shuffle_rng);
      ElboOptions opts;
      opts.samples = config.mc_samples;
      opts.sigma_lik = config.sigma_lik;
      opts.kl_scale = config.kl_scale > 0.0 ? config.kl_scale : 1.0 / static_cast<double>(num_batches);
      opts.workers = config.workers;
      VariationalParams& vp = state.model.posterior;
      double total = 0.0;
      for (std::size_t b = 0; b < num_batches; ++b) {
        const Eigen::MatrixXd batch = gather(train, order, b * bs, std::min(n, (b + 1) * bs));
        const ElboResult r = elbo_loss(model, vp, batch, noise, opts);
        const auto step = static_cast<std::int64_t>(ep * num_batches + b);
        if (!std::isfinite(r.loss)) {
          throw DivergenceError(step, "non-finite loss at step " + std::to_string(step));
        }
        optimizer_step(config, state.optimizers[0], vp.mu, r.grad_mu);
        optimizer_step(config, state.optimizers[1], vp.rho, r.grad_rho);
        total += r.loss;
      }
      state.history.push_back({0, epoch, total / static_cast<double>(num_batches),
                               validation_mse(model, vp.mu, val)});
    } else {
      for (std::size_t m = 0; m < state.model.members.size(); ++m) {
        Eigen::VectorXd& params = state.model.members[m];
        Rng shuffle_rng = make_rng(config.seed, {kShuffleStream, m, ep});
        const std::vector<std::size_t> order = shuffled(n, shuffle_rng);
        const bool dropout = mode == TrainMode::kMcDropout && state.model.dropout_rate > 0.0;
        Rng dropout_rng = make_rng(config.seed, {kDropoutStream, m, ep});
        double total = 0.0;
        Eigen::VectorXd grad;
        for (std::size_t b = 0; b < num_batches; ++b) {
          const Eigen::MatrixXd batch = gather(train, order, b * bs, std::min(n, (b + 1) * bs));
          ForwardContext ctx{dropout, &dropout_rng};
          const std::uint64_t chunk_seed =
              derive_seed(config.seed, {kDropoutStream, m, ep, static_cast<std::uint64_t>(b)});
          const double loss =
              reconstruction_loss(model, params, batch, &grad, ctx, config.workers, chunk_seed);
          const auto step = static_cast<std::int64_t>(ep * num_batches + b);
          if (!std::isfinite(loss) || !grad.allFinite()) {
            throw DivergenceError(step, "non-finite loss at step " + std::to_string(step));
          }
          optimizer_step(config, state.optimizers[m], params, grad);
          total += loss;
        }
        state.history.push_back({static_cast<int>(m), epoch,
                                 total / static_cast<double>(num_batches),
                                 validation_mse(model, params, val)});
      }
    }
    ++state.epochs_done;
  }
}

TrainedModel train(const Sequential& model, TrainMode mode, const Eigen::MatrixXd& train,
                   const Eigen::MatrixXd& val, const TrainConfig& config) {
  TrainState state = init_train_state(model, mode, config);
  train_epochs(model, state, train, val, config, config.epochs);
  return std::move(state.model);
}

int predictive_count(const TrainedModel& trained, int samples) {
  require(samples >= 1, "predictive needs at least one sample");
  switch (trained.mode) {
    case TrainMode::kPointEstimate: return 1;
    case TrainMode::kEnsemble: return static_cast<int>(trained.members.size());
    default: return samples;
  }
}

PredictiveDraw predictive_draw(const TrainedModel& trained, int t, std::uint64_t seed) {
  PredictiveDraw d;
  d.rng = make_rng(seed, {kPredictStream, static_cast<std::uint64_t>(t)});
  switch (trained.mode) {
    case TrainMode::kPointEstimate: d.params = trained.members.at(0); break;
    case TrainMode::kEnsemble: d.params = trained.members.at(static_cast<std::size_t>(t)); break;
    case TrainMode::kMcDropout:
      d.params = trained.members.at(0);
      d.dropout = trained.dropout_rate > 0.0;
      break;
    case TrainMode::kBayesian: d.params = sample_params(trained.posterior, d.rng); break;
  }
  return d;
}

std::vector<Eigen::MatrixXd> predictive(const Sequential& model, const TrainedModel& trained,
                                        const Eigen::MatrixXd& x, int samples,
                                        std::uint64_t seed) {
  const int count = predictive_count(trained, samples);
  std::vector<Eigen::MatrixXd> out;
  for (int t = 0; t < count; ++t) {
    PredictiveDraw d = predictive_draw(trained, t, seed);
    ForwardContext ctx{d.dropout, &d.rng};
    out.push_back(
        model.forward({d.params.data(), static_cast<std::size_t>(d.params.size())}, x, ctx));
  }
  return out;
}

PredictiveSummary summarize(const std::vector<Eigen::MatrixXd>& samples) {
  require(!samples.empty(), "cannot summarize zero samples");
  PredictiveSummary s;
  s.mean = Eigen::MatrixXd::Zero(samples[0].rows(), samples[0].cols());
  for (const Eigen::MatrixXd& m : samples) s.mean += m;
  s.mean /= static_cast<double>(samples.size());
  s.variance = Eigen::MatrixXd::Zero(s.mean.rows(), s.mean.cols());
  if (samples.size() > 1) {
    for (const Eigen::MatrixXd& m : samples) s.variance += (m - s.mean).cwiseAbs2();
    s.variance /= static_cast<double>(samples.size() - 1);
  }
  return s;
}

const Eigen::VectorXd& representative_params(const TrainedModel& trained) {
  if (trained.mode == TrainMode::kBayesian) return trained.posterior.mu;
  return trained.members.at(0);
}

}  // namespace bonn

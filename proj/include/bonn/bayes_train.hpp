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

// Training engines for reconstruction models: point estimates (PE), mean
// field Gaussian variational inference (Bayesian), Monte Carlo dropout (MCD)
// and deep ensembles.
//
// Every random stream is derived from (seed, purpose, member, epoch, ...),
// so a run resumed at an epoch boundary replays the same batches and noise
// as an uninterrupted one.

#ifndef BONN_BAYES_TRAIN_HPP
#define BONN_BAYES_TRAIN_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "bonn/model.hpp"
#include "bonn/rng.hpp"

namespace bonn {

enum class TrainMode { kPointEstimate, kBayesian, kMcDropout, kEnsemble };

std::string_view mode_name(TrainMode mode);
TrainMode parse_mode(std::string_view name);

enum class OptimizerKind { kSgdMomentum, kAdam };

std::string_view optimizer_name(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view name);

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 10;
  int batch_size = 32;
  int mc_samples = 1;       // T per ELBO estimate
  int eval_samples = 16;    // T at evaluation
  double kl_scale = 0.0;    // <= 0 selects 1 / num_batches
  std::uint64_t seed = 0;
  double dropout_rate = 0.1;
  int ensemble_size = 5;
  double sigma_lik = 0.1;
  double momentum = 0.9;
  OptimizerKind optimizer = OptimizerKind::kSgdMomentum;
  double init_sigma = 0.01;
  int workers = 1;

  void validate() const;
};

inline double softplus(double r) {
  return r > 0.0 ? r + std::log1p(std::exp(-r)) : std::log1p(std::exp(r));
}
inline double inverse_softplus(double s) { return s > 30.0 ? s : std::log(std::expm1(s)); }
inline double sigmoid(double r) { return 1.0 / (1.0 + std::exp(-r)); }

struct VariationalParams {
  Eigen::VectorXd mu;
  Eigen::VectorXd rho;

  Eigen::Index size() const { return mu.size(); }
  Eigen::VectorXd sigma() const;
  void validate() const;
  static VariationalParams around(const Eigen::VectorXd& mean, double sigma);
};

/// theta = mu + softplus(rho) * eps with eps ~ N(0, I). If `eps_out` is
/// non-null it receives eps.
Eigen::VectorXd sample_params(const VariationalParams& vp, Rng& rng,
                              Eigen::VectorXd* eps_out = nullptr);

/// KL(q || N(0, I)) = 1/2 sum_i [sigma_i^2 + mu_i^2 - log sigma_i^2 - 1].
double kl_term(const VariationalParams& vp);

struct ElboOptions {
  int samples = 1;
  double sigma_lik = 0.1;
  double kl_scale = 1.0;
  int workers = 1;
};

struct ElboResult {
  double loss = 0.0;  // negative ELBO on the batch
  double nll = 0.0;   // Monte Carlo likelihood part, constants dropped
  double kl = 0.0;    // unscaled KL
  Eigen::VectorXd grad_mu;
  Eigen::VectorXd grad_rho;
};

/// -ELBO on `batch` (columns are samples, the target is the input):
///   (1/T) sum_t sum_x ||f_theta_t(x) - x||^2 / (2 sigma_lik^2) + kl_scale * KL
ElboResult elbo_loss(const Sequential& model, const VariationalParams& vp,
                     const Eigen::MatrixXd& batch, Rng& rng, const ElboOptions& opts);

/// Same, with the standard normal draws supplied (common random numbers).
ElboResult elbo_loss_with_noise(const Sequential& model, const VariationalParams& vp,
                                const Eigen::MatrixXd& batch,
                                const std::vector<Eigen::VectorXd>& eps,
                                const ElboOptions& opts);

/// Mean per-element squared reconstruction error and its gradient.
double reconstruction_loss(const Sequential& model, const Eigen::VectorXd& params,
                           const Eigen::MatrixXd& batch, Eigen::VectorXd* grad,
                           ForwardContext& ctx, int workers = 1,
                           std::uint64_t dropout_seed = 0);

struct OptimizerState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  std::int64_t step = 0;
};

void optimizer_step(const TrainConfig& config, OptimizerState& state, Eigen::VectorXd& params,
                    const Eigen::VectorXd& grad);

struct TrainedModel {
  TrainMode mode = TrainMode::kPointEstimate;
  std::vector<Eigen::VectorXd> members;  // PE / MCD: one, Ensemble: E
  VariationalParams posterior;           // Bayesian only
  double dropout_rate = 0.0;             // MCD only
};

struct EpochRecord {
  int member = 0;
  int epoch = 0;
  double train_loss = 0.0;
  double val_mse = 0.0;
};

struct TrainState {
  TrainedModel model;
  std::vector<OptimizerState> optimizers;
  int epochs_done = 0;
  std::vector<EpochRecord> history;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::int64_t step, const std::string& what)
      : std::runtime_error(what), step_(step) {}
  std::int64_t step() const { return step_; }

 private:
  std::int64_t step_;
};

TrainState init_train_state(const Sequential& model, TrainMode mode, const TrainConfig& config);

/// Runs `epochs` more epochs; appends one EpochRecord per member and epoch.
void train_epochs(const Sequential& model, TrainState& state, const Eigen::MatrixXd& train,
                  const Eigen::MatrixXd& val, const TrainConfig& config, int epochs);

TrainedModel train(const Sequential& model, TrainMode mode, const Eigen::MatrixXd& train,
                   const Eigen::MatrixXd& val, const TrainConfig& config);

/// Monte Carlo predictive samples for `x`: T posterior draws (Bayesian), T
/// dropout passes (MCD), one pass per member (Ensemble) or a single pass (PE).
std::vector<Eigen::MatrixXd> predictive(const Sequential& model, const TrainedModel& trained,
                                        const Eigen::MatrixXd& x, int samples,
                                        std::uint64_t seed);

/// Number of predictive draws: 1 (PE), E (Ensemble) or `samples`.
int predictive_count(const TrainedModel& trained, int samples);

/// Parameters of draw t and the dropout stream to run it with.
struct PredictiveDraw {
  Eigen::VectorXd params;
  bool dropout = false;
  Rng rng;
};

PredictiveDraw predictive_draw(const TrainedModel& trained, int t, std::uint64_t seed);

struct PredictiveSummary {
  Eigen::MatrixXd mean;
  Eigen::MatrixXd variance;  // unbiased; zero when there is one sample
};

PredictiveSummary summarize(const std::vector<Eigen::MatrixXd>& samples);

/// Deterministic parameter vector representing a trained model (the
/// posterior mean for Bayesian, the first member otherwise).
const Eigen::VectorXd& representative_params(const TrainedModel& trained);

}  // namespace bonn

#endif  // BONN_BAYES_TRAIN_HPP

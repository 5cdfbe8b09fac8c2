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


// Reconstruction autoencoders over voxel blocks and the anomaly decision
// rule built on their reconstruction error.

#ifndef BONN_ANOMALY_HPP
#define BONN_ANOMALY_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "bonn/bayes_train.hpp"
#include "bonn/data_synth.hpp"
#include "bonn/metrics.hpp"
#include "bonn/model.hpp"

namespace bonn {

enum class Variant { kFnn, kQfnn, kCnn3d, kQcnn3d };

std::string_view variant_name(Variant variant);
Variant parse_variant(std::string_view name);

struct AutoencoderSpec {
  Variant variant = Variant::kFnn;
  int block_edge = 16;
  int hidden = 128;  // feedforward hidden width
  int latent = 64;
  Topology topology = Topology::kButterfly;
  double dropout_rate = 0.1;  // only active under MC dropout

  void validate() const;
  int voxels() const { return block_edge * block_edge * block_edge; }
};

nlohmann::json spec_to_json(const AutoencoderSpec& spec);
AutoencoderSpec spec_from_json(const nlohmann::json& j);

/// Feedforward: 4096 -> 128 (ReLU) -> 64 | dropout, ReLU -> 128 (tanh),
/// dropout -> 4096. QFNN swaps the two inner layers for orthogonal ones.
///
/// Convolutional (kernel 2 throughout):
///   encoder  conv s2 -> 8 ch, ReLU, conv s2 -> 16 ch, dense -> latent, dropout
///   decoder  dense -> 16 x 4^3, ReLU, upsample, conv -> 8 ch, ReLU,
///            upsample, dropout, conv -> 1 ch, tanh
/// QCNN3D uses orthogonal convolutions.
Sequential build_autoencoder(const AutoencoderSpec& spec);

/// Per-voxel mean squared error of each column.
Eigen::VectorXd reconstruction_scores(const Eigen::MatrixXd& blocks,
                                      const Eigen::MatrixXd& reconstructions);
double score(std::span<const double> block, std::span<const double> reconstruction);

struct Threshold {
  double tau = 0.0;
  double f1 = 0.0;
  bool degenerate = false;  // all scores equal
};

/// Midpoint threshold maximizing F1 of (score > tau); ties go to the
/// smaller tau. Throws if only one class is present.
Threshold calibrate_threshold(std::span<const double> scores,
                              std::span<const std::uint8_t> labels);

struct AnomalyDecision {
  double score = 0.0;  // mean over draws
  double threshold = 0.0;
  int label = 0;
  double confidence = 0.5;
  double p_anomaly = 0.0;
};

/// PE confidences are softened to {0.05, 0.95}.
inline constexpr double kPointEstimateLow = 0.05;
inline constexpr double kPointEstimateHigh = 0.95;

/// Decision from the scores of T stochastic passes over one block.
AnomalyDecision decide(std::span<const double> draw_scores, double tau, bool point_estimate);

/// Scores of every block under each predictive draw: result[draw][block].
std::vector<Eigen::VectorXd> draw_scores(const Sequential& model, const TrainedModel& trained,
                                         const Eigen::MatrixXd& blocks, int samples,
                                         std::uint64_t seed);

std::vector<AnomalyDecision> classify(const Sequential& model, const TrainedModel& trained,
                                      const Eigen::MatrixXd& blocks, double tau, int samples,
                                      std::uint64_t seed);

struct EvaluationOptions {
  int samples = 16;
  int num_bins = 10;
  std::uint64_t seed = 0;
};

struct EvaluationReport {
  std::string model_name;
  Threshold threshold;
  ClassificationScores scores;
  CalibrationReport calibration;
  AnomalySizeExtremes extremes;
  std::vector<std::size_t> block_ids;
  std::vector<AnomalyDecision> decisions;
  std::vector<std::uint8_t> truth;
  std::vector<std::uint32_t> sizes;
};

/// Calibrates tau on the validation split (mean draw score per block) and
/// classifies the test split. Throws if the splits share a block.
EvaluationReport evaluate(const Sequential& model, const TrainedModel& trained,
                          const BlockDataset& data, const std::string& model_name,
                          const EvaluationOptions& options);

/// Column order: Model, Precision, ECE, Recall, F1, SDA, LuDA.
std::string metrics_csv_header();
std::string metrics_csv_row(const EvaluationReport& report);
nlohmann::json metrics_json(const EvaluationReport& report);
/// One JSON object per line:
/// {block_id, score, p_anomaly, label, truth, anomaly_size}.
std::string decisions_jsonl(const EvaluationReport& report);

}  // namespace bonn

#endif  // BONN_ANOMALY_HPP

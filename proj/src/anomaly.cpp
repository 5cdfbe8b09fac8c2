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


#include "bonn/anomaly.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace bonn {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

// Blocks scored per forward pass; bounds peak memory on large splits.
constexpr Eigen::Index kScoreChunk = 256;

std::string fixed(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << std::fixed << v;
  return os.str();
}

std::string optional_size(const std::optional<std::uint32_t>& v) {
  return v ? std::to_string(*v) : std::string("none");
}

}  // namespace

std::string_view variant_name(Variant variant) {
  switch (variant) {
    case Variant::kFnn: return "FNN";
    case Variant::kQfnn: return "QFNN";
    case Variant::kCnn3d: return "CNN3D";
    case Variant::kQcnn3d: return "QCNN3D";
  }
  return "FNN";
}

Variant parse_variant(std::string_view name) {
  for (Variant v : {Variant::kFnn, Variant::kQfnn, Variant::kCnn3d, Variant::kQcnn3d}) {
    if (variant_name(v) == name) return v;
  }
  throw std::invalid_argument("unknown autoencoder variant '" + std::string(name) +
                              "' (expected FNN, QFNN, CNN3D or QCNN3D)");
}

void AutoencoderSpec::validate() const {
  require(block_edge >= 4 && block_edge % 4 == 0, "block_edge must be a positive multiple of 4");
  require(hidden >= 2 && latent >= 1, "hidden and latent widths must be positive");
  require(latent <= hidden, "latent width must not exceed the hidden width");
  require(dropout_rate >= 0.0 && dropout_rate < 1.0, "dropout_rate must lie in [0, 1)");
  require(topology == Topology::kPyramid || topology == Topology::kButterfly,
          "autoencoder topology must be pyramid or butterfly");
  if (topology == Topology::kButterfly && (variant == Variant::kQfnn)) {
    require(is_power_of_two(hidden),
            "butterfly layers need a power-of-two hidden width");
  }
}

nlohmann::json spec_to_json(const AutoencoderSpec& spec) {
  return {{"variant", std::string(variant_name(spec.variant))},
          {"block_edge", spec.block_edge},
          {"hidden", spec.hidden},
          {"latent", spec.latent},
          {"topology", std::string(topology_name(spec.topology))},
          {"dropout_rate", spec.dropout_rate}};
}

AutoencoderSpec spec_from_json(const nlohmann::json& j) {
  AutoencoderSpec s;
  s.variant = parse_variant(j.at("variant").get<std::string>());
  s.block_edge = j.at("block_edge").get<int>();
  s.hidden = j.at("hidden").get<int>();
  s.latent = j.at("latent").get<int>();
  s.topology = parse_topology(j.at("topology").get<std::string>());
  s.dropout_rate = j.at("dropout_rate").get<double>();
  s.validate();
  return s;
}

Sequential build_autoencoder(const AutoencoderSpec& spec) {
  spec.validate();
  Sequential m;
  const int v = spec.voxels();
  const double rate = spec.dropout_rate;
  if (spec.variant == Variant::kFnn || spec.variant == Variant::kQfnn) {
    const bool ortho = spec.variant == Variant::kQfnn;
    const FeatureShape hid = FeatureShape::flat(spec.hidden);
    const FeatureShape lat = FeatureShape::flat(spec.latent);
    m.add(std::make_unique<DenseLayer>(v, spec.hidden), "enc_in");
    m.add(std::make_unique<ReluLayer>(hid));
    if (ortho) {
      m.add(std::make_unique<OrthoDenseLayer>(spec.hidden, spec.latent, spec.topology), "enc_latent");
    } else {
      m.add(std::make_unique<DenseLayer>(spec.hidden, spec.latent), "enc_latent");
    }
    m.add(std::make_unique<DropoutLayer>(lat, rate));
    m.add(std::make_unique<ReluLayer>(lat));
    if (ortho) {
      m.add(std::make_unique<OrthoDenseLayer>(spec.latent, spec.hidden, spec.topology), "dec_hidden");
    } else {
      m.add(std::make_unique<DenseLayer>(spec.latent, spec.hidden), "dec_hidden");
    }
    m.add(std::make_unique<TanhLayer>(hid));
    m.add(std::make_unique<DropoutLayer>(hid, rate));
    m.add(std::make_unique<DenseLayer>(spec.hidden, v), "dec_out");
    return m;
  }

  const bool ortho = spec.variant == Variant::kQcnn3d;
  const int e = spec.block_edge;
  auto conv = [&](int channels, std::array<int, 3> shape, int filters, int stride, Padding pad,
                  const std::string& name) {
    const ConvGeometry g = make_conv_geometry(channels, shape, 2, stride, pad);
    if (ortho) {
      m.add(std::make_unique<OrthoConvLayer>(g, filters, spec.topology), name);
    } else {
      m.add(std::make_unique<ConvLayer>(g, filters), name);
    }
    return FeatureShape{filters, g.out_shape};
  };
  FeatureShape h = conv(1, {e, e, e}, 8, 2, Padding::kValid, "enc_conv1");
  m.add(std::make_unique<ReluLayer>(h));
  h = conv(h.channels, h.spatial, 16, 2, Padding::kValid, "enc_conv2");
  const FeatureShape deep = h;
  m.add(std::make_unique<DenseLayer>(deep.size(), spec.latent), "enc_latent");
  m.add(std::make_unique<DropoutLayer>(FeatureShape::flat(spec.latent), rate));
  m.add(std::make_unique<DenseLayer>(spec.latent, deep.size()), "dec_dense");
  m.add(std::make_unique<ReluLayer>(deep));
  m.add(std::make_unique<UpsampleLayer>(deep, 2));
  h = conv(deep.channels, m.output_shape().spatial, 8, 1, Padding::kSame, "dec_conv1");
  m.add(std::make_unique<ReluLayer>(h));
  m.add(std::make_unique<UpsampleLayer>(h, 2));
  m.add(std::make_unique<DropoutLayer>(m.output_shape(), rate));
  h = conv(8, m.output_shape().spatial, 1, 1, Padding::kSame, "dec_conv2");
  m.add(std::make_unique<TanhLayer>(h));
  require(m.output_shape().size() == v, "decoder output does not match the block size");
  return m;
}

Eigen::VectorXd reconstruction_scores(const Eigen::MatrixXd& blocks,
                                      const Eigen::MatrixXd& reconstructions) {
  require(blocks.rows() == reconstructions.rows() && blocks.cols() == reconstructions.cols(),
          "reconstruction shape does not match the blocks");
  require(blocks.rows() > 0, "blocks must be nonempty");
  return (reconstructions - blocks).colwise().squaredNorm().transpose() /
         static_cast<double>(blocks.rows());
}

double score(std::span<const double> block, std::span<const double> reconstruction) {
  return mse(block, reconstruction);
}

Threshold calibrate_threshold(std::span<const double> scores,
                              std::span<const std::uint8_t> labels) {
  require(scores.size() == labels.size(), "scores and labels differ in length");
  require(!scores.empty(), "threshold calibration needs samples");
  std::size_t positives = 0;
  for (std::uint8_t l : labels) positives += l != 0 ? 1 : 0;
  require(positives > 0 && positives < labels.size(),
          "threshold calibration needs both classes in the validation set");
  for (double s : scores) require(std::isfinite(s), "scores must be finite");

  std::vector<double> distinct(scores.begin(), scores.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  auto f1_at = [&](double tau) {
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] > tau) (labels[i] != 0 ? tp : fp) += 1;
    }
    const std::size_t fn = positives - tp;
    return tp == 0 ? 0.0 : 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
  };

  Threshold best;
  if (distinct.size() == 1) {
    best.tau = distinct[0];
    best.f1 = f1_at(best.tau);
    best.degenerate = true;
    return best;
  }
  std::vector<double> candidates;
  candidates.push_back(distinct[0] - 0.5 * (distinct[1] - distinct[0]));
  for (std::size_t i = 0; i + 1 < distinct.size(); ++i) {
    candidates.push_back(0.5 * (distinct[i] + distinct[i + 1]));
  }
  best.f1 = -1.0;
  for (double tau : candidates) {
    const double f = f1_at(tau);
    if (f > best.f1) {
      best.f1 = f;
      best.tau = tau;
    }
  }
  return best;
}

AnomalyDecision decide(std::span<const double> draw_scores, double tau, bool point_estimate) {
  require(!draw_scores.empty(), "a decision needs at least one draw");
  AnomalyDecision d;
  d.threshold = tau;
  std::size_t above = 0;
  double sum = 0.0;
  for (double s : draw_scores) {
    sum += s;
    above += s > tau ? 1 : 0;
  }
  d.score = sum / static_cast<double>(draw_scores.size());
  d.p_anomaly = static_cast<double>(above) / static_cast<double>(draw_scores.size());
  if (point_estimate) d.p_anomaly = d.p_anomaly > 0.5 ? kPointEstimateHigh : kPointEstimateLow;
  d.label = d.p_anomaly > 0.5 ? 1 : 0;
  d.confidence = std::max(d.p_anomaly, 1.0 - d.p_anomaly);
  return d;
}

std::vector<Eigen::VectorXd> draw_scores(const Sequential& model, const TrainedModel& trained,
                                         const Eigen::MatrixXd& blocks, int samples,
                                         std::uint64_t seed) {
  require(static_cast<int>(blocks.rows()) == model.input_shape().size(),
          "block size does not match the model");
  const int count = predictive_count(trained, samples);
  std::vector<Eigen::VectorXd> out;
  for (int t = 0; t < count; ++t) {
    PredictiveDraw d = predictive_draw(trained, t, seed);
    ForwardContext ctx{d.dropout, &d.rng};
    const std::span<const double> p(d.params.data(), static_cast<std::size_t>(d.params.size()));
    Eigen::VectorXd s(blocks.cols());
    for (Eigen::Index c = 0; c < blocks.cols(); c += kScoreChunk) {
      const Eigen::Index n = std::min(kScoreChunk, blocks.cols() - c);
      const Eigen::MatrixXd x = blocks.middleCols(c, n);
      s.segment(c, n) = reconstruction_scores(x, model.forward(p, x, ctx));
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<AnomalyDecision> classify(const Sequential& model, const TrainedModel& trained,
                                      const Eigen::MatrixXd& blocks, double tau, int samples,
                                      std::uint64_t seed) {
  const std::vector<Eigen::VectorXd> draws = draw_scores(model, trained, blocks, samples, seed);
  const bool pe = trained.mode == TrainMode::kPointEstimate;
  std::vector<AnomalyDecision> out;
  std::vector<double> per_block(draws.size());
  for (Eigen::Index b = 0; b < blocks.cols(); ++b) {
    for (std::size_t t = 0; t < draws.size(); ++t) per_block[t] = draws[t][b];
    out.push_back(decide(per_block, tau, pe));
  }
  return out;
}

EvaluationReport evaluate(const Sequential& model, const TrainedModel& trained,
                          const BlockDataset& data, const std::string& model_name,
                          const EvaluationOptions& options) {
  data.validate();
  const std::vector<std::size_t> val = data.indices(Split::kVal);
  const std::vector<std::size_t> test = data.indices(Split::kTest);
  const std::set<std::size_t> val_set(val.begin(), val.end());
  for (std::size_t i : test) {
    if (val_set.count(i) != 0) throw std::runtime_error("validation and test splits overlap");
  }
  require(!val.empty() && !test.empty(), "evaluation needs validation and test blocks");

  EvaluationReport r;
  r.model_name = model_name;
  {
    const std::vector<Eigen::VectorXd> draws =
        draw_scores(model, trained, data.matrix(val), options.samples, options.seed);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(val.size()));
    for (const Eigen::VectorXd& d : draws) mean += d;
    mean /= static_cast<double>(draws.size());
    std::vector<std::uint8_t> labels;
    for (std::size_t i : val) labels.push_back(data.labels[i]);
    r.threshold = calibrate_threshold({mean.data(), val.size()}, labels);
  }

  // A separate stream for the test draws keeps them independent of the
  // calibration draws.
  r.decisions = classify(model, trained, data.matrix(test), r.threshold.tau, options.samples,
                         derive_seed(options.seed, {1}));
  r.block_ids = test;
  std::vector<std::uint8_t> predicted;
  std::vector<std::uint8_t> correct;
  std::vector<double> confidences;
  for (std::size_t k = 0; k < test.size(); ++k) {
    const std::size_t i = test[k];
    r.truth.push_back(data.labels[i]);
    r.sizes.push_back(data.sizes[i]);
    predicted.push_back(static_cast<std::uint8_t>(r.decisions[k].label));
    correct.push_back(r.decisions[k].label == data.labels[i] ? 1 : 0);
    confidences.push_back(r.decisions[k].confidence);
  }
  r.scores = precision_recall_f1(r.truth, predicted);
  r.calibration = ece(confidences, correct, options.num_bins);
  r.extremes = sda_luda(r.truth, predicted, r.sizes);
  return r;
}

std::string metrics_csv_header() { return "Model,Precision,ECE,Recall,F1,SDA,LuDA"; }

std::string metrics_csv_row(const EvaluationReport& r) {
  return r.model_name + "," + fixed(r.scores.precision) + "," + fixed(r.calibration.ece) + "," +
         fixed(r.scores.recall) + "," + fixed(r.scores.f1) + "," + optional_size(r.extremes.sda) +
         "," + optional_size(r.extremes.luda);
}

nlohmann::json metrics_json(const EvaluationReport& r) {
  auto opt = [](const std::optional<std::uint32_t>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  nlohmann::json bins = nlohmann::json::array();
  for (const CalibrationBin& b : r.calibration.bins) {
    bins.push_back({{"m", b.m}, {"count", b.count}, {"accuracy", b.accuracy},
                    {"confidence", b.confidence}});
  }
  return {{"Model", r.model_name},
          {"Precision", r.scores.precision},
          {"ECE", r.calibration.ece},
          {"Recall", r.scores.recall},
          {"F1", r.scores.f1},
          {"SDA", opt(r.extremes.sda)},
          {"LuDA", opt(r.extremes.luda)},
          {"precision_undefined", r.scores.precision_undefined},
          {"threshold", r.threshold.tau},
          {"threshold_degenerate", r.threshold.degenerate},
          {"validation_f1", r.threshold.f1},
          {"test_blocks", r.block_ids.size()},
          {"calibration_bins", bins}};
}

std::string decisions_jsonl(const EvaluationReport& r) {
  std::string out;
  for (std::size_t k = 0; k < r.decisions.size(); ++k) {
    const nlohmann::json j = {{"block_id", r.block_ids[k]},
                              {"score", r.decisions[k].score},
                              {"p_anomaly", r.decisions[k].p_anomaly},
                              {"label", r.decisions[k].label},
                              {"truth", r.truth[k]},
                              {"anomaly_size", r.sizes[k]}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace bonn

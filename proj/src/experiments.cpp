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


#include "bonn/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "bonn/data_synth.hpp"
#include "bonn/ortho_nn.hpp"
#include "bonn/rng.hpp"

namespace bonn {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

enum Stream : std::uint64_t {
  kAngleStream = 1,
  kInputStream = 2,
  kShotStream = 3,
  kSubsetStream = 4,
};

constexpr int kScanEdge = 96;

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(9) << v;
  return os.str();
}

}  // namespace

void FidelityConfig::validate() const {
  require(n >= 2 && n <= 20, "fidelity n must lie in [2, 20]");
  require(num_inputs >= 1, "num_inputs must be positive");
  require(input_source == "random" || input_source == "scan",
          "input_source must be 'random' or 'scan'");
  if (input_source == "scan") {
    require(kScanEdge % n == 0, "scan inputs need n dividing 96");
    require(num_inputs <= n, "scan inputs provide at most n rows");
  }
  for (const NamedNoise& m : modes) m.noise.validate();
}

std::vector<NamedNoise> default_fidelity_modes(double gate_error, double readout_flip) {
  auto make = [](std::optional<std::uint64_t> shots, double eps, double flip) {
    NoiseModel nm;
    nm.shots = shots;
    nm.gate_error = eps;
    nm.readout_flip = flip;
    return nm;
  };
  return {{"exact", make(std::nullopt, 0.0, 0.0)},
          {"shots_1k", make(1000, 0.0, 0.0)},
          {"shots_10k", make(10000, 0.0, 0.0)},
          {"noisy_1k", make(1000, gate_error, readout_flip)},
          {"noisy_10k", make(10000, gate_error, readout_flip)}};
}

std::optional<double> FidelityResult::average(std::size_t mode) const {
  double sum = 0.0;
  int count = 0;
  for (const std::optional<double>& f : fidelity.at(mode)) {
    if (f) {
      sum += *f;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / count;
}

std::vector<Eigen::VectorXd> fidelity_inputs(const FidelityConfig& config) {
  config.validate();
  std::vector<Eigen::VectorXd> inputs;
  if (config.input_source == "random") {
    for (int i = 0; i < config.num_inputs; ++i) {
      Rng rng = make_rng(config.seed, {kInputStream, static_cast<std::uint64_t>(i)});
      Eigen::VectorXd x(config.n);
      do {
        for (int j = 0; j < config.n; ++j) x[j] = standard_normal(rng);
      } while (x.norm() == 0.0);
      inputs.push_back(x.normalized());
    }
    return inputs;
  }
  // Central z slice of a synthetic scan, averaged down to n x n tiles.
  const VoxelScan scan = generate_scan(kScanEdge, random_defects(kScanEdge, 16, 0.025, config.seed),
                                       config.seed);
  const int tile = kScanEdge / config.n;
  const int z = kScanEdge / 2;
  for (int r = 0; r < config.num_inputs; ++r) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(config.n);
    for (int c = 0; c < config.n; ++c) {
      for (int dy = 0; dy < tile; ++dy) {
        for (int dx = 0; dx < tile; ++dx) {
          x[c] += scan.values[scan.index(z, r * tile + dy, c * tile + dx)];
        }
      }
    }
    require(x.norm() > 0.0, "scan row is identically zero");
    inputs.push_back(x.normalized());
  }
  return inputs;
}

FidelityResult run_fidelity(const FidelityConfig& config) {
  config.validate();
  FidelityResult result;
  result.inputs = fidelity_inputs(config);
  const std::vector<NamedNoise> modes =
      config.modes.empty() ? default_fidelity_modes() : config.modes;

  const CircuitLayout pyramid = build_layout(Topology::kPyramid, config.n);
  const CircuitLayout loader = build_layout(Topology::kParallelLoader, config.n);
  const int gates = static_cast<int>(loader.gates.size() + pyramid.gates.size());
  Rng angle_rng = make_rng(config.seed, {kAngleStream});
  Eigen::VectorXd angles(pyramid.num_params);
  for (Eigen::Index k = 0; k < angles.size(); ++k) {
    angles[k] = (2.0 * uniform01(angle_rng) - 1.0) * std::numbers::pi;
  }

  std::vector<UnaryState> outputs;
  for (const Eigen::VectorXd& x : result.inputs) {
    const UnaryState loaded = simulate(loader, loader_angles(x, Topology::kParallelLoader),
                                       UnaryState::basis(config.n, 0));
    outputs.push_back(simulate(pyramid, angles, loaded));
  }
  for (std::size_t m = 0; m < modes.size(); ++m) {
    result.modes.push_back(modes[m].name);
    std::vector<std::optional<double>> row;
    for (std::size_t i = 0; i < outputs.size(); ++i) {
      const ShotCounts counts =
          sample_shots(outputs[i], modes[m].noise, gates,
                       derive_seed(config.seed, {kShotStream, m, static_cast<std::uint64_t>(i)}));
      try {
        row.push_back(fidelity_estimate(postselect_unary(counts), outputs[i].amplitudes()));
      } catch (const AllLeakedError&) {
        row.push_back(std::nullopt);
      }
    }
    result.fidelity.push_back(std::move(row));
  }
  return result;
}

std::string fidelity_csv(const FidelityResult& result) {
  std::string out = "input";
  for (const std::string& m : result.modes) out += "," + m;
  out += "\n";
  for (std::size_t i = 0; i < result.inputs.size(); ++i) {
    out += std::to_string(i);
    for (std::size_t m = 0; m < result.modes.size(); ++m) {
      const std::optional<double>& f = result.fidelity[m][i];
      out += "," + (f ? num(*f) : std::string("leaked"));
    }
    out += "\n";
  }
  out += "average";
  for (std::size_t m = 0; m < result.modes.size(); ++m) {
    const std::optional<double> a = result.average(m);
    out += "," + (a ? num(*a) : std::string("leaked"));
  }
  out += "\n";
  return out;
}

Eigen::VectorXd noisy_circuit_output(const CircuitLayout& layout, const Eigen::VectorXd& angles,
                                     const Eigen::VectorXd& x, const NoiseModel& noise,
                                     std::uint64_t seed) {
  const int n = layout.n;
  require(x.size() <= n, "circuit input is wider than the circuit");
  Eigen::VectorXd padded = Eigen::VectorXd::Zero(n);
  padded.head(x.size()) = x;
  const double norm = padded.norm();
  if (norm == 0.0) return padded;
  const CircuitLayout loader = build_layout(Topology::kParallelLoader, n);
  const UnaryState loaded = simulate(loader, loader_angles(padded / norm, Topology::kParallelLoader),
                                     UnaryState::basis(n, 0));
  const UnaryState out = simulate(layout, angles, loaded);
  const int gates = static_cast<int>(loader.gates.size() + layout.gates.size());
  const Eigen::VectorXd p = postselect_unary(sample_shots(out, noise, gates, seed));
  return norm * signed_amplitudes(p, out.amplitudes());
}

void HwFractionConfig::validate() const {
  require(shots >= 1, "shots must be positive");
  require(repeats >= 1, "repeats must be positive");
  require(!fractions.empty(), "fractions must be nonempty");
  for (int f : fractions) require(f >= 0 && f <= 100, "fraction outside [0, 100]");
  NoiseModel nm{shots, gate_error, readout_flip};
  nm.validate();
}

HwFractionResult run_hw_fraction(const Sequential& model, const Eigen::VectorXd& params,
                                 const Eigen::VectorXd& block, const HwFractionConfig& config) {
  config.validate();
  require(model.size() >= 2, "model is too small");
  require(static_cast<std::size_t>(params.size()) == model.num_params(),
          "parameter vector does not match the model");
  const auto* conv = dynamic_cast<const OrthoConvLayer*>(&model.layer(0));
  require(conv != nullptr, "first layer must be an orthogonal convolution (QCNN3D)");
  const ConvGeometry& g2 = conv->geometry();
  require(g2.channels == 1 && g2.kernel == 2 && g2.stride == 2 && g2.padding == Padding::kValid,
          "first convolution must be single-channel, kernel 2, stride 2, valid");
  const int e = g2.in_shape[0];
  require(g2.in_shape[1] == e && g2.in_shape[2] == e, "input block must be cubic");
  require(block.size() == static_cast<Eigen::Index>(e) * e * e, "block size does not match the model");
  require(config.slice >= 0 && config.slice < e, "slice outside the block");

  const Eigen::VectorXd theta = params.segment(static_cast<Eigen::Index>(model.offset(0)),
                                               static_cast<Eigen::Index>(conv->num_params()));
  const int filters = conv->filters();
  const Eigen::MatrixXd filter_bank =
      layer_matrix(conv->layout(), theta).topLeftCorner(filters, g2.patch_size());

  // Stride-1 "same" convolution with the trained filters: one circuit per
  // output position. With kernel 2 the padding sits on the far side, so
  // position (2a, 2b, 2c) coincides with the model's output (a, b, c).
  const ConvGeometry g1 = make_conv_geometry(1, {e, e, e}, 2, 1, Padding::kSame);
  const Eigen::MatrixXd patches = im2col(block.data(), g1);
  const Eigen::MatrixXd ideal = filter_bank * patches;  // filters x e^3

  std::vector<int> circuit_pos;  // slice positions, (z, y) row-major
  for (int z = 0; z < e; ++z) {
    for (int y = 0; y < e; ++y) circuit_pos.push_back((z * e + y) * e + config.slice);
  }
  const int circuits = static_cast<int>(circuit_pos.size());

  ForwardContext ctx;
  const std::span<const double> p(params.data(), static_cast<std::size_t>(params.size()));
  const Eigen::MatrixXd first = model.forward_range(p, block, ctx, 0, 1);
  const Eigen::MatrixXd reference = model.forward_range(p, first, ctx, 1, model.size());
  const int positions2 = g2.positions();
  const int half = g2.out_shape[0];

  NoiseModel noise;
  noise.shots = config.shots;
  noise.gate_error = config.gate_error;
  noise.readout_flip = config.readout_flip;

  HwFractionResult result;
  result.circuits = circuits;
  for (int r = 0; r < config.repeats; ++r) {
    const auto rr = static_cast<std::uint64_t>(r);
    std::vector<int> order(static_cast<std::size_t>(circuits));
    std::iota(order.begin(), order.end(), 0);
    Rng subset_rng = make_rng(config.seed, {kSubsetStream, rr});
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform01(subset_rng) * static_cast<double>(i)) % i;
      std::swap(order[i - 1], order[j]);
    }
    // Every circuit's noisy output for this repeat, computed once.
    Eigen::MatrixXd noisy(filters, circuits);
    for (int c = 0; c < circuits; ++c) {
      noisy.col(c) = noisy_circuit_output(conv->layout(), theta, patches.col(circuit_pos[c]), noise,
                                          derive_seed(config.seed, {kShotStream, rr,
                                                                    static_cast<std::uint64_t>(c)}))
                         .head(filters);
    }

    for (int f : config.fractions) {
      const int k = f * circuits / 100;
      double sq = 0.0;
      Eigen::MatrixXd injected = first;
      for (int i = 0; i < k; ++i) {
        const int c = order[static_cast<std::size_t>(i)];
        const Eigen::VectorXd diff = noisy.col(c) - ideal.col(circuit_pos[c]);
        sq += diff.squaredNorm();
        const int pos = circuit_pos[c];
        const int z = pos / (e * e), y = (pos / e) % e, x = pos % e;
        if (z % 2 == 0 && y % 2 == 0 && x % 2 == 0) {
          const int pos2 = ((z / 2) * half + y / 2) * half + x / 2;
          for (int ch = 0; ch < filters; ++ch) injected(ch * positions2 + pos2, 0) = noisy(ch, c);
        }
      }
      HwFractionRow row;
      row.fraction = f;
      row.repeat = r;
      row.noisy_circuits = k;
      row.layer_mse = sq / (static_cast<double>(circuits) * filters);
      row.conv_mse = sq / static_cast<double>(ideal.size());
      if (k > 0) {
        const Eigen::MatrixXd out = model.forward_range(p, injected, ctx, 1, model.size());
        row.autoencoder_mse = (out - reference).squaredNorm() / static_cast<double>(out.size());
      }
      result.rows.push_back(row);
    }
  }
  return result;
}

std::string hw_fraction_csv(const HwFractionResult& result) {
  std::string out = "fraction,repeat,noisy_circuits,layer_mse,conv_mse,autoencoder_mse\n";
  for (const HwFractionRow& r : result.rows) {
    out += std::to_string(r.fraction) + "," + std::to_string(r.repeat) + "," +
           std::to_string(r.noisy_circuits) + "," + num(r.layer_mse) + "," + num(r.conv_mse) + "," +
           num(r.autoencoder_mse) + "\n";
  }
  return out;
}

std::string hw_fraction_summary_csv(const HwFractionResult& result) {
  std::vector<int> fractions;
  for (const HwFractionRow& r : result.rows) {
    if (std::find(fractions.begin(), fractions.end(), r.fraction) == fractions.end()) {
      fractions.push_back(r.fraction);
    }
  }
  std::string out = "fraction,layer_mean,layer_std,conv_mean,conv_std,autoencoder_mean,autoencoder_std\n";
  for (int f : fractions) {
    std::vector<std::array<double, 3>> v;
    for (const HwFractionRow& r : result.rows) {
      if (r.fraction == f) v.push_back({r.layer_mse, r.conv_mse, r.autoencoder_mse});
    }
    out += std::to_string(f);
    for (int s = 0; s < 3; ++s) {
      double mean = 0.0;
      for (const auto& a : v) mean += a[s] / static_cast<double>(v.size());
      double var = 0.0;
      for (const auto& a : v) var += (a[s] - mean) * (a[s] - mean);
      const double sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
      out += "," + num(mean) + "," + num(sd);
    }
    out += "\n";
  }
  return out;
}

}  // namespace bonn

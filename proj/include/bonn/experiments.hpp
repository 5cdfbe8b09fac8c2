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


// Hardware emulation experiments: state fidelity of a loader + pyramid
// circuit under shot and gate noise, and the reconstruction error as a
// growing fraction of a trained model's convolution circuits run noisily.

#ifndef BONN_EXPERIMENTS_HPP
#define BONN_EXPERIMENTS_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bonn/anomaly.hpp"
#include "bonn/bayes_train.hpp"
#include "bonn/subspace_sim.hpp"

namespace bonn {

// Calibrated so the noisy 8-qubit fidelity lands in [0.93, 0.98].
inline constexpr double kDefaultGateError = 0.06;
inline constexpr double kDefaultReadoutFlip = 0.01;

struct NamedNoise {
  std::string name;
  NoiseModel noise;
};

struct FidelityConfig {
  int n = 8;
  int num_inputs = 8;
  std::string input_source = "random";  // or "scan": rows of a downscaled slice
  std::vector<NamedNoise> modes;        // empty selects the five default modes
  std::uint64_t seed = 0;

  void validate() const;
};

/// exact, shots-only 1k / 10k, noisy 1k / 10k.
std::vector<NamedNoise> default_fidelity_modes(double gate_error = kDefaultGateError,
                                               double readout_flip = kDefaultReadoutFlip);

struct FidelityResult {
  std::vector<std::string> modes;
  std::vector<Eigen::VectorXd> inputs;
  // fidelity[mode][input]; nullopt when every shot leaked.
  std::vector<std::vector<std::optional<double>>> fidelity;

  /// Mean over inputs with a defined fidelity; nullopt if none.
  std::optional<double> average(std::size_t mode) const;
};

/// Unit-norm inputs for the fidelity experiment.
std::vector<Eigen::VectorXd> fidelity_inputs(const FidelityConfig& config);

FidelityResult run_fidelity(const FidelityConfig& config);

/// Columns: input,<mode...>, then a final "average" row.
std::string fidelity_csv(const FidelityResult& result);

/// Noisy estimate of the circuit output O x: loader + circuit, sampled,
/// post-selected, signs from the ideal output, rescaled by |x|. A zero input
/// maps to zero without sampling.
Eigen::VectorXd noisy_circuit_output(const CircuitLayout& layout, const Eigen::VectorXd& angles,
                                     const Eigen::VectorXd& x, const NoiseModel& noise,
                                     std::uint64_t seed);

struct HwFractionConfig {
  int slice = 14;  // index along the last axis
  std::uint64_t shots = 5000;
  double gate_error = kDefaultGateError;
  double readout_flip = kDefaultReadoutFlip;
  int repeats = 5;
  std::vector<int> fractions{0, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
  std::uint64_t seed = 0;

  void validate() const;
};

struct HwFractionRow {
  int fraction = 0;
  int repeat = 0;
  int noisy_circuits = 0;
  double layer_mse = 0.0;
  double conv_mse = 0.0;
  double autoencoder_mse = 0.0;
};

struct HwFractionResult {
  std::vector<HwFractionRow> rows;
  int circuits = 0;  // circuits in the slice
};

/// The model must be a QCNN3D autoencoder whose first layer is an
/// orthogonal convolution with kernel 2 and stride 2. Its filters are run
/// as a stride-1 convolution over `block`; the circuits of slice `slice`
/// are the candidates for noisy execution. Within one repeat the noisy
/// subsets are nested and each circuit keeps its shot seed, so the sweep
/// differs only in which circuits are noisy.
HwFractionResult run_hw_fraction(const Sequential& model, const Eigen::VectorXd& params,
                                 const Eigen::VectorXd& block, const HwFractionConfig& config);

/// Per-row CSV: fraction,repeat,noisy_circuits,layer_mse,conv_mse,autoencoder_mse
std::string hw_fraction_csv(const HwFractionResult& result);
/// Per-fraction mean and sample standard deviation of each scope.
std::string hw_fraction_summary_csv(const HwFractionResult& result);

}  // namespace bonn

#endif  // BONN_EXPERIMENTS_HPP

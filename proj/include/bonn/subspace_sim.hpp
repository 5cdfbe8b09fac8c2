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

// Simulation of Hamming-weight preserving (RBS) circuits restricted to the
// unary subspace. A state on n qubits is the real vector of amplitudes of the
// basis states e_j (bit j set, all others clear), so every circuit acts as an
// n x n orthogonal matrix and the 2^n space is never materialized.

#ifndef BONN_SUBSPACE_SIM_HPP
#define BONN_SUBSPACE_SIM_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace bonn {

class UnaryState {
 public:
  /// Validates n >= 2 and unit norm (within 1e-9).
  explicit UnaryState(Eigen::VectorXd amplitudes);

  static UnaryState basis(int n, int j);

  int n() const { return static_cast<int>(amplitudes_.size()); }
  const Eigen::VectorXd& amplitudes() const { return amplitudes_; }
  double operator[](int j) const { return amplitudes_[j]; }

 private:
  Eigen::VectorXd amplitudes_;
};

/// One RBS gate on qubits (i, j). The angle is either read from slot `slot`
/// of the circuit's angle vector, or is `fixed_angle` when slot < 0.
struct RbsGate {
  int i = 0;
  int j = 1;
  int slot = -1;
  double fixed_angle = 0.0;
};

enum class Topology { kPyramid, kButterfly, kDiagonalLoader, kParallelLoader, kCustom };

std::string_view topology_name(Topology t);
Topology parse_topology(std::string_view name);

struct CircuitLayout {
  int n = 0;
  std::vector<RbsGate> gates;
  Topology topology = Topology::kCustom;
  int num_params = 0;

  /// Throws std::invalid_argument on out-of-range or coincident indices.
  void validate() const;
};

/// Restricted action of RBS_{i,j}(theta):
///   a_i' = cos(theta) a_i + sin(theta) a_j
///   a_j' = -sin(theta) a_i + cos(theta) a_j
UnaryState apply_rbs(const UnaryState& state, int i, int j, double theta);

/// Pyramid, butterfly and the two loaders. Every gate gets its own slot.
CircuitLayout build_layout(Topology topology, int n);

/// Angles that prepare `x` from e_0 with the loader of the given topology.
Eigen::VectorXd loader_angles(const Eigen::VectorXd& x, Topology topology);

UnaryState simulate(const CircuitLayout& layout, const Eigen::VectorXd& angles,
                    const UnaryState& input);

/// Column j is simulate(layout, angles, e_j).
Eigen::MatrixXd layer_matrix(const CircuitLayout& layout, const Eigen::VectorXd& angles);

// Raw kernels. `rows` is n x B; each gate mixes two rows. These accept
// arbitrary (unnormalized) columns since the circuit is linear.
void apply_circuit(const CircuitLayout& layout, const Eigen::VectorXd& angles,
                   Eigen::Ref<Eigen::MatrixXd> rows);
void apply_circuit_transpose(const CircuitLayout& layout, const Eigen::VectorXd& angles,
                             Eigen::Ref<Eigen::MatrixXd> rows);

/// Reverse-mode pass through a circuit. Given the circuit output `output`
/// (n x B) and dL/d(output) `upstream`, returns dL/d(angles). If `grad_input`
/// is non-null it receives dL/d(input) = U^T upstream. Inputs are recovered
/// by inverting gates, so no per-gate activations are stored.
Eigen::VectorXd circuit_backward(const CircuitLayout& layout, const Eigen::VectorXd& angles,
                                 const Eigen::MatrixXd& output, const Eigen::MatrixXd& upstream,
                                 Eigen::MatrixXd* grad_input = nullptr);

struct NoiseModel {
  /// nullopt means the exact outcome distribution (infinite shots).
  std::optional<std::uint64_t> shots;
  double gate_error = 0.0;
  double readout_flip = 0.0;

  void validate() const;
};

/// Outcome weights keyed by bitstring (bit j <-> qubit j). Sampled counts are
/// integers; exact mode stores probabilities.
struct ShotCounts {
  int n = 0;
  std::map<std::uint64_t, double> counts;

  double total() const;
};

/// Measures `state` under `noise`. `gate_count` is the number of gates the
/// state went through, which sets the leakage probability 1 - (1 - eps)^G.
ShotCounts sample_shots(const UnaryState& state, const NoiseModel& noise, int gate_count,
                        std::uint64_t seed);

/// Raised when post-selection leaves nothing.
class AllLeakedError : public std::runtime_error {
 public:
  AllLeakedError() : std::runtime_error("no unary outcomes survived post-selection") {}
};

/// Keeps Hamming-weight-1 outcomes and renormalizes to a distribution over j.
Eigen::VectorXd postselect_unary(const ShotCounts& counts);

/// (sum_j sqrt(p_j) |y_j|)^2.
double fidelity_estimate(const Eigen::VectorXd& probabilities, const Eigen::VectorXd& ideal);

/// sqrt(p) carrying the sign pattern of `sign_reference` (zero-sign -> +).
Eigen::VectorXd signed_amplitudes(const Eigen::VectorXd& probabilities,
                                  const Eigen::VectorXd& sign_reference);

inline bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace bonn

#endif  // BONN_SUBSPACE_SIM_HPP

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

#include "bonn/subspace_sim.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "bonn/rng.hpp"

namespace bonn {
namespace {

constexpr double kUnitTolerance = 1e-9;

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

/// Node of the parallel loader tree: splits [lo, hi) at mid. The gate moves
/// amplitude from qubit lo to qubit mid.
struct SplitNode {
  int lo, mid, hi, depth;
};

std::vector<SplitNode> parallel_tree(int n) {
  std::vector<SplitNode> nodes;
  std::vector<SplitNode> frontier;
  auto push = [&](int lo, int hi, int depth) {
    if (hi - lo < 2) return;
    const int mid = lo + (hi - lo + 1) / 2;
    frontier.push_back({lo, mid, hi, depth});
  };
  push(0, n, 0);
  // Breadth first, so gates of one tree level are contiguous (log depth).
  for (std::size_t k = 0; k < frontier.size(); ++k) {
    const SplitNode node = frontier[k];
    nodes.push_back(node);
    push(node.lo, node.mid, node.depth + 1);
    push(node.mid, node.hi, node.depth + 1);
  }
  return nodes;
}

inline double gate_angle(const RbsGate& g, const Eigen::VectorXd& angles) {
  return g.slot >= 0 ? angles[g.slot] : g.fixed_angle;
}

void check_angles(const CircuitLayout& layout, const Eigen::VectorXd& angles) {
  if (angles.size() != layout.num_params) {
    throw std::invalid_argument("angle vector length " + std::to_string(angles.size()) +
                                " does not match layout parameter count " +
                                std::to_string(layout.num_params));
  }
}

}  // namespace

UnaryState::UnaryState(Eigen::VectorXd amplitudes) : amplitudes_(std::move(amplitudes)) {
  require(amplitudes_.size() >= 2, "unary state needs at least 2 qubits");
  require(amplitudes_.allFinite(), "unary state amplitudes must be finite");
  require(std::abs(amplitudes_.squaredNorm() - 1.0) <= kUnitTolerance,
          "unary state amplitudes must have unit norm");
}

UnaryState UnaryState::basis(int n, int j) {
  require(n >= 2 && j >= 0 && j < n, "basis index out of range");
  Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
  a[j] = 1.0;
  return UnaryState(std::move(a));
}

std::string_view topology_name(Topology t) {
  switch (t) {
    case Topology::kPyramid: return "pyramid";
    case Topology::kButterfly: return "butterfly";
    case Topology::kDiagonalLoader: return "diagonal_loader";
    case Topology::kParallelLoader: return "parallel_loader";
    case Topology::kCustom: return "custom";
  }
  return "custom";
}

Topology parse_topology(std::string_view name) {
  for (Topology t : {Topology::kPyramid, Topology::kButterfly, Topology::kDiagonalLoader,
                     Topology::kParallelLoader, Topology::kCustom}) {
    if (topology_name(t) == name) return t;
  }
  throw std::invalid_argument("unknown topology '" + std::string(name) + "'");
}

void CircuitLayout::validate() const {
  require(n >= 2, "layout needs at least 2 qubits");
  for (const RbsGate& g : gates) {
    require(g.i >= 0 && g.i < n && g.j >= 0 && g.j < n, "gate qubit index out of range");
    require(g.i != g.j, "gate acts on a single qubit");
    require(g.slot < num_params, "gate parameter slot out of range");
  }
}

UnaryState apply_rbs(const UnaryState& state, int i, int j, double theta) {
  require(i >= 0 && j >= 0 && i < state.n() && j < state.n(), "rbs index out of range");
  require(i != j, "rbs needs two distinct qubits");
  Eigen::VectorXd a = state.amplitudes();
  const double c = std::cos(theta), s = std::sin(theta);
  const double ai = a[i], aj = a[j];
  a[i] = c * ai + s * aj;
  a[j] = -s * ai + c * aj;
  return UnaryState(std::move(a));
}

CircuitLayout build_layout(Topology topology, int n) {
  require(n >= 2, "layout needs at least 2 qubits");
  CircuitLayout layout;
  layout.n = n;
  layout.topology = topology;
  auto add = [&](int i, int j) {
    layout.gates.push_back({i, j, layout.num_params, 0.0});
    ++layout.num_params;
  };
  switch (topology) {
    case Topology::kPyramid:
      // Pair (i, i+1) fires at t = i, i+2, ..., 2(n-2) - i.
      for (int t = 0; t <= 2 * (n - 2); ++t) {
        for (int i = t % 2; i <= std::min(t, 2 * (n - 2) - t); i += 2) add(i, i + 1);
      }
      break;
    case Topology::kButterfly: {
      if (!is_power_of_two(n)) throw std::invalid_argument("butterfly layout needs n a power of two");
      for (int bit = 1; bit < n; bit <<= 1) {
        for (int i = 0; i < n; ++i) {
          if ((i & bit) == 0) add(i, i | bit);
        }
      }
      break;
    }
    case Topology::kDiagonalLoader:
      for (int k = 0; k + 1 < n; ++k) add(k + 1, k);
      break;
    case Topology::kParallelLoader:
      for (const SplitNode& node : parallel_tree(n)) add(node.mid, node.lo);
      break;
    case Topology::kCustom:
      throw std::invalid_argument("custom layouts are assembled by the caller");
  }
  return layout;
}

Eigen::VectorXd loader_angles(const Eigen::VectorXd& x, Topology topology) {
  const int n = static_cast<int>(x.size());
  require(n >= 2, "loader input needs at least 2 entries");
  require(x.allFinite(), "loader input must be finite");
  const double norm2 = x.squaredNorm();
  require(norm2 > 0.0, "loader input is the zero vector");
  require(std::abs(norm2 - 1.0) <= kUnitTolerance, "loader input must have unit norm");

  Eigen::VectorXd angles(n - 1);
  if (topology == Topology::kDiagonalLoader) {
    // tail[k] = ||x[k:]||
    Eigen::VectorXd tail(n + 1);
    tail[n] = 0.0;
    for (int k = n - 1; k >= 0; --k) tail[k] = std::hypot(tail[k + 1], x[k]);
    for (int k = 0; k + 1 < n; ++k) {
      const double forward = (k + 2 == n) ? x[n - 1] : tail[k + 1];
      angles[k] = std::atan2(forward, x[k]);
    }
    return angles;
  }
  if (topology == Topology::kParallelLoader) {
    // Singletons carry their signed value, larger ranges their norm.
    auto signed_norm = [&](int lo, int hi) {
      return hi - lo == 1 ? x[lo] : x.segment(lo, hi - lo).norm();
    };
    int k = 0;
    for (const SplitNode& node : parallel_tree(n)) {
      angles[k++] = std::atan2(signed_norm(node.mid, node.hi), signed_norm(node.lo, node.mid));
    }
    return angles;
  }
  throw std::invalid_argument("loader_angles needs a loader topology");
}

void apply_circuit(const CircuitLayout& layout, const Eigen::VectorXd& angles,
                   Eigen::Ref<Eigen::MatrixXd> rows) {
  check_angles(layout, angles);
  require(rows.rows() == layout.n, "circuit input has wrong number of rows");
  const Eigen::Index cols = rows.cols();
  for (const RbsGate& g : layout.gates) {
    const double theta = gate_angle(g, angles);
    const double c = std::cos(theta), s = std::sin(theta);
    for (Eigen::Index b = 0; b < cols; ++b) {
      const double ai = rows(g.i, b), aj = rows(g.j, b);
      rows(g.i, b) = c * ai + s * aj;
      rows(g.j, b) = -s * ai + c * aj;
    }
  }
}

void apply_circuit_transpose(const CircuitLayout& layout, const Eigen::VectorXd& angles,
                             Eigen::Ref<Eigen::MatrixXd> rows) {
  check_angles(layout, angles);
  require(rows.rows() == layout.n, "circuit input has wrong number of rows");
  const Eigen::Index cols = rows.cols();
  for (auto it = layout.gates.rbegin(); it != layout.gates.rend(); ++it) {
    const double theta = gate_angle(*it, angles);
    const double c = std::cos(theta), s = std::sin(theta);
    for (Eigen::Index b = 0; b < cols; ++b) {
      const double yi = rows(it->i, b), yj = rows(it->j, b);
      rows(it->i, b) = c * yi - s * yj;
      rows(it->j, b) = s * yi + c * yj;
    }
  }
}

Eigen::VectorXd circuit_backward(const CircuitLayout& layout, const Eigen::VectorXd& angles,
                                 const Eigen::MatrixXd& output, const Eigen::MatrixXd& upstream,
                                 Eigen::MatrixXd* grad_input) {
  check_angles(layout, angles);
  require(output.rows() == layout.n && upstream.rows() == layout.n &&
              output.cols() == upstream.cols(),
          "circuit_backward shape mismatch");
  Eigen::MatrixXd state = output;
  Eigen::MatrixXd adjoint = upstream;
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(layout.num_params);
  const Eigen::Index cols = state.cols();
  for (auto it = layout.gates.rbegin(); it != layout.gates.rend(); ++it) {
    const int i = it->i, j = it->j;
    const double theta = gate_angle(*it, angles);
    const double c = std::cos(theta), s = std::sin(theta);
    double g = 0.0;
    for (Eigen::Index b = 0; b < cols; ++b) {
      // Undo the gate to recover its input.
      const double yi = state(i, b), yj = state(j, b);
      const double ai = c * yi - s * yj;
      const double aj = s * yi + c * yj;
      state(i, b) = ai;
      state(j, b) = aj;
      const double li = adjoint(i, b), lj = adjoint(j, b);
      g += li * (-s * ai + c * aj) + lj * (-c * ai - s * aj);
      adjoint(i, b) = c * li - s * lj;
      adjoint(j, b) = s * li + c * lj;
    }
    if (it->slot >= 0) grad[it->slot] += g;
  }
  if (grad_input != nullptr) *grad_input = std::move(adjoint);
  return grad;
}

UnaryState simulate(const CircuitLayout& layout, const Eigen::VectorXd& angles,
                    const UnaryState& input) {
  require(input.n() == layout.n, "state width does not match layout");
  Eigen::MatrixXd column = input.amplitudes();
  apply_circuit(layout, angles, column);
  return UnaryState(Eigen::VectorXd(column.col(0)));
}

Eigen::MatrixXd layer_matrix(const CircuitLayout& layout, const Eigen::VectorXd& angles) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(layout.n, layout.n);
  apply_circuit(layout, angles, m);
  return m;
}

void NoiseModel::validate() const {
  require(!shots.has_value() || *shots > 0, "shot count must be positive");
  require(gate_error >= 0.0 && gate_error < 1.0, "gate_error must lie in [0, 1)");
  require(readout_flip >= 0.0 && readout_flip < 1.0, "readout_flip must lie in [0, 1)");
}

double ShotCounts::total() const {
  double t = 0.0;
  for (const auto& [bits, w] : counts) t += w;
  return t;
}

ShotCounts sample_shots(const UnaryState& state, const NoiseModel& noise, int gate_count,
                        std::uint64_t seed) {
  noise.validate();
  require(gate_count >= 0, "gate count must be nonnegative");
  const int n = state.n();
  require(n <= 64, "bitstring outcomes support at most 64 qubits");
  const double leak = 1.0 - std::pow(1.0 - noise.gate_error, gate_count);
  const double flip = noise.readout_flip;
  const std::uint64_t mask = n == 64 ? ~0ULL : ((1ULL << n) - 1);

  Eigen::VectorXd born = state.amplitudes().array().square();
  born /= born.sum();

  ShotCounts out;
  out.n = n;

  if (!noise.shots.has_value()) {
    if (leak == 0.0 && flip == 0.0) {
      for (int j = 0; j < n; ++j) {
        if (born[j] > 0.0) out.counts[1ULL << j] = born[j];
      }
      return out;
    }
    require(n <= 20, "exact noisy distribution is limited to 20 qubits");
    const std::uint64_t outcomes = 1ULL << n;
    const double uniform = leak / static_cast<double>(outcomes);
    for (std::uint64_t o = 0; o < outcomes; ++o) {
      double p = 0.0;
      for (int j = 0; j < n; ++j) {
        const int d = std::popcount(o ^ (1ULL << j));
        p += born[j] * std::pow(flip, d) * std::pow(1.0 - flip, n - d);
      }
      const double w = uniform + (1.0 - leak) * p;
      if (w > 0.0) out.counts[o] = w;
    }
    return out;
  }

  Eigen::VectorXd cumulative(n);
  double acc = 0.0;
  for (int j = 0; j < n; ++j) cumulative[j] = (acc += born[j]);

  Rng rng = make_rng(seed);
  std::vector<std::uint64_t> tally(static_cast<std::size_t>(n), 0);
  for (std::uint64_t shot = 0; shot < *noise.shots; ++shot) {
    std::uint64_t bits;
    if (leak > 0.0 && uniform01(rng) < leak) {
      bits = rng() & mask;
    } else {
      const double u = uniform01(rng) * acc;
      int j = static_cast<int>(std::upper_bound(cumulative.data(), cumulative.data() + n, u) -
                               cumulative.data());
      bits = 1ULL << std::min(j, n - 1);
    }
    if (flip > 0.0) {
      for (int q = 0; q < n; ++q) {
        if (uniform01(rng) < flip) bits ^= 1ULL << q;
      }
    }
    out.counts[bits] += 1.0;
  }
  return out;
}

Eigen::VectorXd postselect_unary(const ShotCounts& counts) {
  require(!counts.counts.empty(), "postselect_unary needs at least one outcome");
  require(counts.n >= 2 && counts.n <= 64, "counts carry an invalid qubit count");
  Eigen::VectorXd p = Eigen::VectorXd::Zero(counts.n);
  double kept = 0.0;
  for (const auto& [bits, w] : counts.counts) {
    if (std::popcount(bits) != 1) continue;
    const int j = std::countr_zero(bits);
    if (j >= counts.n) continue;
    p[j] += w;
    kept += w;
  }
  if (kept <= 0.0) throw AllLeakedError();
  return p / kept;
}

double fidelity_estimate(const Eigen::VectorXd& probabilities, const Eigen::VectorXd& ideal) {
  require(probabilities.size() == ideal.size(), "fidelity inputs differ in length");
  require((probabilities.array() >= 0.0).all(), "probabilities must be nonnegative");
  const double overlap = (probabilities.array().sqrt() * ideal.array().abs()).sum();
  return std::clamp(overlap * overlap, 0.0, 1.0);
}

Eigen::VectorXd signed_amplitudes(const Eigen::VectorXd& probabilities,
                                  const Eigen::VectorXd& sign_reference) {
  require(probabilities.size() == sign_reference.size(), "amplitude inputs differ in length");
  Eigen::VectorXd y = probabilities.array().max(0.0).sqrt();
  for (Eigen::Index j = 0; j < y.size(); ++j) {
    if (sign_reference[j] < 0.0) y[j] = -y[j];
  }
  return y;
}

}  // namespace bonn

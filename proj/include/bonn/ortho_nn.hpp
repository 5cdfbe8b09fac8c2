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

#ifndef BONN_ORTHO_NN_HPP
#define BONN_ORTHO_NN_HPP

#include <array>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "bonn/subspace_sim.hpp"

namespace bonn {

/// Dense c x D1 x D2 x D3 tensor, stored channel-major then row-major
/// (index = ((c * D1 + z) * D2 + y) * D3 + x).
struct Tensor3D {
  int channels = 1;
  std::array<int, 3> shape{0, 0, 0};
  std::vector<double> data;

  Tensor3D() = default;
  Tensor3D(int channels, std::array<int, 3> shape, double fill = 0.0);

  std::size_t voxels() const {
    return static_cast<std::size_t>(shape[0]) * shape[1] * shape[2];
  }
  std::size_t size() const { return channels * voxels(); }
  std::size_t index(int c, int z, int y, int x) const {
    return ((static_cast<std::size_t>(c) * shape[0] + z) * shape[1] + y) * shape[2] + x;
  }
  double& at(int c, int z, int y, int x) { return data[index(c, z, y, x)]; }
  double at(int c, int z, int y, int x) const { return data[index(c, z, y, x)]; }

  Eigen::Map<const Eigen::VectorXd> flat() const {
    return {data.data(), static_cast<Eigen::Index>(data.size())};
  }
};

struct DenseLinearLayer {
  Eigen::MatrixXd W;  // out x in
  Eigen::VectorXd b;  // out
};

Eigen::VectorXd dense_forward(const DenseLinearLayer& layer, const Eigen::VectorXd& x);

/// y = O[:out_dim, :in_dim] x, where O is the circuit's orthogonal matrix on
/// n = max(in_dim, out_dim) qubits. Inputs are zero-padded, outputs truncated.
struct OrthoLinearLayer {
  CircuitLayout layout;
  Eigen::VectorXd theta;
  int in_dim = 0;
  int out_dim = 0;

  int n() const { return layout.n; }
  /// The effective out_dim x in_dim matrix.
  Eigen::MatrixXd effective_matrix() const;
};

OrthoLinearLayer make_ortho_linear(int in_dim, int out_dim, Topology topology,
                                   Eigen::VectorXd theta = {});

Eigen::VectorXd ortho_forward(const OrthoLinearLayer& layer, const Eigen::VectorXd& x);

struct OrthoGradients {
  Eigen::VectorXd grad_theta;
  Eigen::VectorXd grad_x;
};

OrthoGradients ortho_backward(const OrthoLinearLayer& layer, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& upstream);

/// dL/dtheta for a product O[:rows, :cols] when dL/dO[:rows, :cols] = grad.
Eigen::VectorXd angle_gradient_from_matrix(const CircuitLayout& layout,
                                           const Eigen::VectorXd& theta,
                                           const Eigen::MatrixXd& full_matrix,
                                           const Eigen::MatrixXd& grad_block);

enum class Padding { kValid, kSame };

/// Output geometry of a cubic-kernel 3D convolution. "same" yields
/// ceil(D / stride) outputs per axis with the extra padding on the far side.
struct ConvGeometry {
  int channels = 1;
  std::array<int, 3> in_shape{0, 0, 0};
  int kernel = 1;
  int stride = 1;
  Padding padding = Padding::kValid;
  std::array<int, 3> out_shape{0, 0, 0};
  std::array<int, 3> pad_before{0, 0, 0};

  int patch_size() const { return channels * kernel * kernel * kernel; }
  int positions() const { return out_shape[0] * out_shape[1] * out_shape[2]; }
};

ConvGeometry make_conv_geometry(int channels, std::array<int, 3> in_shape, int kernel,
                                int stride, Padding padding);

/// Patch matrix (patch_size x positions). Rows ordered (c, dz, dy, dx),
/// columns ordered (oz, oy, ox). Out-of-range voxels read as zero.
Eigen::MatrixXd im2col(const double* input, const ConvGeometry& geom);

/// Adjoint of im2col: scatter-adds patch gradients into `grad_input`.
void col2im_add(const Eigen::MatrixXd& patches, const ConvGeometry& geom, double* grad_input);

/// 3D convolution whose flattened filter bank F (k x c*d^3) is the top-left
/// block of a circuit's orthogonal matrix on n = max(k, c*d^3) qubits.
struct OrthoConv3DLayer {
  int kernel = 2;
  int filters = 8;
  int stride = 1;
  Padding padding = Padding::kValid;
  int in_channels = 1;
  CircuitLayout layout;
  Eigen::VectorXd theta;

  int patch_size() const { return in_channels * kernel * kernel * kernel; }
  int n() const { return layout.n; }
  Eigen::MatrixXd filter_matrix() const;
};

OrthoConv3DLayer make_ortho_conv3d(int kernel, int filters, int stride, Padding padding,
                                   Topology topology, int in_channels = 1,
                                   Eigen::VectorXd theta = {});

Tensor3D conv3d_forward(const OrthoConv3DLayer& layer, const Tensor3D& x);

struct ConvGradients {
  Eigen::VectorXd grad_theta;
  Tensor3D grad_x;
};

ConvGradients conv3d_backward(const OrthoConv3DLayer& layer, const Tensor3D& x,
                              const Tensor3D& upstream);

// Elementwise activations.
inline double relu(double v) { return v > 0.0 ? v : 0.0; }
inline double relu_derivative(double v) { return v > 0.0 ? 1.0 : 0.0; }
inline double tanh_activation(double v) { return std::tanh(v); }
inline double tanh_derivative(double v) {
  const double t = std::tanh(v);
  return 1.0 - t * t;
}

}  // namespace bonn

#endif  // BONN_ORTHO_NN_HPP

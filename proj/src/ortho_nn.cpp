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

#include "bonn/ortho_nn.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace bonn {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

Eigen::VectorXd default_theta(const CircuitLayout& layout, Eigen::VectorXd theta) {
  if (theta.size() == 0) return Eigen::VectorXd::Zero(layout.num_params);
  require(theta.size() == layout.num_params, "theta length does not match the layout");
  return theta;
}

}  // namespace

Tensor3D::Tensor3D(int channels_, std::array<int, 3> shape_, double fill)
    : channels(channels_), shape(shape_) {
  require(channels > 0 && shape[0] > 0 && shape[1] > 0 && shape[2] > 0,
          "tensor dimensions must be positive");
  data.assign(size(), fill);
}

Eigen::VectorXd dense_forward(const DenseLinearLayer& layer, const Eigen::VectorXd& x) {
  require(layer.W.cols() == x.size(), "dense layer input dimension mismatch");
  require(layer.W.rows() == layer.b.size(), "dense layer bias dimension mismatch");
  return layer.W * x + layer.b;
}

OrthoLinearLayer make_ortho_linear(int in_dim, int out_dim, Topology topology,
                                   Eigen::VectorXd theta) {
  require(in_dim >= 1 && out_dim >= 1, "orthogonal layer dimensions must be positive");
  OrthoLinearLayer layer;
  layer.layout = build_layout(topology, std::max({in_dim, out_dim, 2}));
  layer.theta = default_theta(layer.layout, std::move(theta));
  layer.in_dim = in_dim;
  layer.out_dim = out_dim;
  return layer;
}

Eigen::MatrixXd OrthoLinearLayer::effective_matrix() const {
  return layer_matrix(layout, theta).topLeftCorner(out_dim, in_dim);
}

Eigen::VectorXd ortho_forward(const OrthoLinearLayer& layer, const Eigen::VectorXd& x) {
  require(x.size() == layer.in_dim, "orthogonal layer input dimension mismatch");
  require(x.allFinite(), "orthogonal layer input must be finite");
  Eigen::VectorXd padded = Eigen::VectorXd::Zero(layer.n());
  padded.head(layer.in_dim) = x;
  const double rho = padded.norm();
  if (rho == 0.0) return Eigen::VectorXd::Zero(layer.out_dim);
  const UnaryState out = simulate(layer.layout, layer.theta, UnaryState(padded / rho));
  return rho * out.amplitudes().head(layer.out_dim);
}

OrthoGradients ortho_backward(const OrthoLinearLayer& layer, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& upstream) {
  require(x.size() == layer.in_dim, "orthogonal layer input dimension mismatch");
  require(upstream.size() == layer.out_dim, "orthogonal layer gradient dimension mismatch");
  // The layer is linear in x, so the rescaling by ||x|| folds away.
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(layer.n(), 1);
  out.col(0).head(layer.in_dim) = x;
  apply_circuit(layer.layout, layer.theta, out);
  Eigen::MatrixXd adj = Eigen::MatrixXd::Zero(layer.n(), 1);
  adj.col(0).head(layer.out_dim) = upstream;
  Eigen::MatrixXd grad_in;
  OrthoGradients g;
  g.grad_theta = circuit_backward(layer.layout, layer.theta, out, adj, &grad_in);
  g.grad_x = grad_in.col(0).head(layer.in_dim);
  return g;
}

Eigen::VectorXd angle_gradient_from_matrix(const CircuitLayout& layout,
                                           const Eigen::VectorXd& theta,
                                           const Eigen::MatrixXd& full_matrix,
                                           const Eigen::MatrixXd& grad_block) {
  require(grad_block.rows() <= layout.n && grad_block.cols() <= layout.n,
          "gradient block larger than the circuit");
  Eigen::MatrixXd upstream = Eigen::MatrixXd::Zero(layout.n, layout.n);
  upstream.topLeftCorner(grad_block.rows(), grad_block.cols()) = grad_block;
  return circuit_backward(layout, theta, full_matrix, upstream);
}

ConvGeometry make_conv_geometry(int channels, std::array<int, 3> in_shape, int kernel,
                                int stride, Padding padding) {
  require(channels >= 1, "convolution needs at least one channel");
  require(kernel >= 1 && stride >= 1, "kernel and stride must be positive");
  ConvGeometry g;
  g.channels = channels;
  g.in_shape = in_shape;
  g.kernel = kernel;
  g.stride = stride;
  g.padding = padding;
  for (int a = 0; a < 3; ++a) {
    const int edge = in_shape[a];
    require(edge >= 1, "input edge must be positive");
    if (padding == Padding::kValid) {
      require(kernel <= edge, "kernel larger than input with valid padding");
      g.out_shape[a] = (edge - kernel) / stride + 1;
      g.pad_before[a] = 0;
    } else {
      g.out_shape[a] = (edge + stride - 1) / stride;
      const int total = std::max((g.out_shape[a] - 1) * stride + kernel - edge, 0);
      g.pad_before[a] = total / 2;
    }
  }
  return g;
}

Eigen::MatrixXd im2col(const double* input, const ConvGeometry& g) {
  const int d = g.kernel;
  const auto [D0, D1, D2] = g.in_shape;
  const auto [O0, O1, O2] = g.out_shape;
  Eigen::MatrixXd patches(g.patch_size(), g.positions());
  int col = 0;
  for (int oz = 0; oz < O0; ++oz) {
    for (int oy = 0; oy < O1; ++oy) {
      for (int ox = 0; ox < O2; ++ox, ++col) {
        double* dst = patches.col(col).data();
        const int z0 = oz * g.stride - g.pad_before[0];
        const int y0 = oy * g.stride - g.pad_before[1];
        const int x0 = ox * g.stride - g.pad_before[2];
        int row = 0;
        for (int c = 0; c < g.channels; ++c) {
          const double* plane = input + static_cast<std::size_t>(c) * D0 * D1 * D2;
          for (int dz = 0; dz < d; ++dz) {
            const int z = z0 + dz;
            for (int dy = 0; dy < d; ++dy) {
              const int y = y0 + dy;
              for (int dx = 0; dx < d; ++dx, ++row) {
                const int x = x0 + dx;
                const bool inside = z >= 0 && z < D0 && y >= 0 && y < D1 && x >= 0 && x < D2;
                dst[row] = inside ? plane[(static_cast<std::size_t>(z) * D1 + y) * D2 + x] : 0.0;
              }
            }
          }
        }
      }
    }
  }
  return patches;
}

void col2im_add(const Eigen::MatrixXd& patches, const ConvGeometry& g, double* grad_input) {
  require(patches.rows() == g.patch_size() && patches.cols() == g.positions(),
          "patch gradient shape mismatch");
  const int d = g.kernel;
  const auto [D0, D1, D2] = g.in_shape;
  const auto [O0, O1, O2] = g.out_shape;
  int col = 0;
  for (int oz = 0; oz < O0; ++oz) {
    for (int oy = 0; oy < O1; ++oy) {
      for (int ox = 0; ox < O2; ++ox, ++col) {
        const double* src = patches.col(col).data();
        const int z0 = oz * g.stride - g.pad_before[0];
        const int y0 = oy * g.stride - g.pad_before[1];
        const int x0 = ox * g.stride - g.pad_before[2];
        int row = 0;
        for (int c = 0; c < g.channels; ++c) {
          double* plane = grad_input + static_cast<std::size_t>(c) * D0 * D1 * D2;
          for (int dz = 0; dz < d; ++dz) {
            const int z = z0 + dz;
            for (int dy = 0; dy < d; ++dy) {
              const int y = y0 + dy;
              for (int dx = 0; dx < d; ++dx, ++row) {
                const int x = x0 + dx;
                if (z >= 0 && z < D0 && y >= 0 && y < D1 && x >= 0 && x < D2) {
                  plane[(static_cast<std::size_t>(z) * D1 + y) * D2 + x] += src[row];
                }
              }
            }
          }
        }
      }
    }
  }
}

OrthoConv3DLayer make_ortho_conv3d(int kernel, int filters, int stride, Padding padding,
                                   Topology topology, int in_channels, Eigen::VectorXd theta) {
  require(kernel >= 1 && filters >= 1 && stride >= 1 && in_channels >= 1,
          "convolution hyperparameters must be positive");
  OrthoConv3DLayer layer;
  layer.kernel = kernel;
  layer.filters = filters;
  layer.stride = stride;
  layer.padding = padding;
  layer.in_channels = in_channels;
  layer.layout = build_layout(topology, std::max({filters, layer.patch_size(), 2}));
  layer.theta = default_theta(layer.layout, std::move(theta));
  return layer;
}

Eigen::MatrixXd OrthoConv3DLayer::filter_matrix() const {
  return layer_matrix(layout, theta).topLeftCorner(filters, patch_size());
}

Tensor3D conv3d_forward(const OrthoConv3DLayer& layer, const Tensor3D& x) {
  require(x.channels == layer.in_channels, "convolution input channel mismatch");
  const ConvGeometry g =
      make_conv_geometry(x.channels, x.shape, layer.kernel, layer.stride, layer.padding);
  const Eigen::MatrixXd patches = im2col(x.data.data(), g);
  Tensor3D out(layer.filters, g.out_shape);
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> y(
      out.data.data(), layer.filters, g.positions());
  y.noalias() = layer.filter_matrix() * patches;
  return out;
}

ConvGradients conv3d_backward(const OrthoConv3DLayer& layer, const Tensor3D& x,
                              const Tensor3D& upstream) {
  require(x.channels == layer.in_channels, "convolution input channel mismatch");
  const ConvGeometry g =
      make_conv_geometry(x.channels, x.shape, layer.kernel, layer.stride, layer.padding);
  require(upstream.channels == layer.filters && upstream.shape == g.out_shape,
          "convolution upstream gradient shape mismatch");
  const Eigen::MatrixXd patches = im2col(x.data.data(), g);
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> dy(
      upstream.data.data(), layer.filters, g.positions());
  const Eigen::MatrixXd full = layer_matrix(layer.layout, layer.theta);
  const Eigen::MatrixXd filters = full.topLeftCorner(layer.filters, layer.patch_size());

  ConvGradients grads;
  const Eigen::MatrixXd grad_filters = dy * patches.transpose();
  grads.grad_theta = angle_gradient_from_matrix(layer.layout, layer.theta, full, grad_filters);
  const Eigen::MatrixXd grad_patches = filters.transpose() * dy;
  grads.grad_x = Tensor3D(x.channels, x.shape);
  col2im_add(grad_patches, g, grads.grad_x.data.data());
  return grads;
}

}  // namespace bonn

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

// Batched layer stack over a flat parameter vector. Batches are
// features x batch matrices (one column per sample); spatial features are
// laid out like Tensor3D::data. Parameters live outside the layers so that
// point estimates, posterior draws and ensemble members share one model.

#ifndef BONN_MODEL_HPP
#define BONN_MODEL_HPP

#include <array>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bonn/ortho_nn.hpp"
#include "bonn/rng.hpp"

namespace bonn {

struct FeatureShape {
  int channels = 1;
  std::array<int, 3> spatial{1, 1, 1};

  int size() const { return channels * spatial[0] * spatial[1] * spatial[2]; }
  static FeatureShape flat(int n) { return {n, {1, 1, 1}}; }
  bool operator==(const FeatureShape&) const = default;
};

struct ForwardContext {
  bool dropout_active = false;
  Rng* dropout_rng = nullptr;
};

struct LayerCache {
  Eigen::MatrixXd input;
  Eigen::MatrixXd aux;
};

/// Slice of the flat parameter vector owned by one layer.
struct ParamSlice {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
  bool is_angle = false;
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual std::string kind() const = 0;
  virtual FeatureShape input_shape() const = 0;
  virtual FeatureShape output_shape() const = 0;
  virtual std::size_t num_params() const { return 0; }
  virtual bool angles() const { return false; }
  virtual void init_params(std::span<double> /*params*/, Rng& /*rng*/) const {}
  virtual Eigen::MatrixXd forward(std::span<const double> params, const Eigen::MatrixXd& x,
                                  ForwardContext& ctx, LayerCache* cache) const = 0;
  /// Accumulates into `grad_params` and returns dL/d(input).
  virtual Eigen::MatrixXd backward(std::span<const double> params, const LayerCache& cache,
                                   const Eigen::MatrixXd& grad_out,
                                   std::span<double> grad_params) const = 0;
};

class DenseLayer final : public Layer {
 public:
  DenseLayer(int in, int out);
  std::string kind() const override { return "dense"; }
  FeatureShape input_shape() const override { return FeatureShape::flat(in_); }
  FeatureShape output_shape() const override { return FeatureShape::flat(out_); }
  std::size_t num_params() const override;
  void init_params(std::span<double> params, Rng& rng) const override;
  Eigen::MatrixXd forward(std::span<const double> params, const Eigen::MatrixXd& x,
                          ForwardContext& ctx, LayerCache* cache) const override;
  Eigen::MatrixXd backward(std::span<const double> params, const LayerCache& cache,
                           const Eigen::MatrixXd& grad_out,
                           std::span<double> grad_params) const override;

 private:
  int in_, out_;
};

/// Orthogonal linear layer; parameters are circuit angles, no bias.
class OrthoDenseLayer final : public Layer {
 public:
  OrthoDenseLayer(int in, int out, Topology topology);
  std::string kind() const override { return "ortho_dense"; }
  FeatureShape input_shape() const override { return FeatureShape::flat(in_); }
  FeatureShape output_shape() const override { return FeatureShape::flat(out_); }
  std::size_t num_params() const override { return layout_.num_params; }
  bool angles() const override { return true; }
  void init_params(std::span<double> params, Rng& rng) const override;
  Eigen::MatrixXd forward(std::span<const double> params, const Eigen::MatrixXd& x,
                          ForwardContext& ctx, LayerCache* cache) const override;
  Eigen::MatrixXd backward(std::span<const double> params, const LayerCache& cache,
                           const Eigen::MatrixXd& grad_out,
                           std::span<double> grad_params) const override;
  const CircuitLayout& layout() const { return layout_; }

 private:
  int in_, out_;
  CircuitLayout layout_;
};

/// 3D convolution with an unconstrained filter bank and bias.
class ConvLayer final : public Layer {
 public:
  ConvLayer(ConvGeometry geom, int filters);
  std::string kind() const override { return "conv3d"; }
  FeatureShape input_shape() const override { return {geom_.channels, geom_.in_shape}; }
  FeatureShape output_shape() const override { return {filters_, geom_.out_shape}; }
  std::size_t num_params() const override;
  void init_params(std::span<double> params, Rng& rng) const override;
  Eigen::MatrixXd forward(std::span<const double> params, const Eigen::MatrixXd& x,
                          ForwardContext& ctx, LayerCache* cache) const override;
  Eigen::MatrixXd backward(std::span<const double> params, const LayerCache& cache,
                           const Eigen::MatrixXd& grad_out,
                           std::span<double> grad_params) const override;
  const ConvGeometry& geometry() const { return geom_; }

 private:
  ConvGeometry geom_;
  int filters_;
};

/// OrthoConv3D: filters are the first rows of a circuit's orthogonal matrix.
class OrthoConvLayer final : public Layer {
 public:
  OrthoConvLayer(ConvGeometry geom, int filters, Topology topology);
  std::string kind() const override { return "ortho_conv3d"; }
  FeatureShape input_shape() const override { return {geom_.channels, geom_.in_shape}; }
  FeatureShape output_shape() const override { return {filters_, geom_.out_shape}; }
  std::size_t num_params() const override { return layout_.num_params; }
  bool angles() const override { return true; }
  void init_params(std::span<double> params, Rng& rng) const override;
  Eigen::MatrixXd forward(std::span<const double> params, const Eigen::MatrixXd& x,
                          ForwardContext& ctx, LayerCache* cache) const override;
  Eigen::MatrixXd backward(std::span<const double> params, const LayerCache& cache,
                           const Eigen::MatrixXd& grad_out,
                           std::span<double> grad_params) const override;
  const ConvGeometry& geometry() const { return geom_; }
  const CircuitLayout& layout() const { return layout_; }
  int filters() const { return filters_; }

 private:
  ConvGeometry geom_;
  int filters_;
  CircuitLayout layout_;
};

class ReluLayer final : public Layer {
 public:
  explicit ReluLayer(FeatureShape shape) : shape_(shape) {}
  std::string kind() const override { return "relu"; }
  FeatureShape input_shape() const override { return shape_; }
  FeatureShape output_shape() const override { return shape_; }
  Eigen::MatrixXd forward(std::span<const double> params, const Eigen::MatrixXd& x,
                          ForwardContext& ctx, LayerCache* cache) const override;
  Eigen::MatrixXd backward(std::span<const double> params, const LayerCache& cache,
                           const Eigen::MatrixXd& grad_out,
                           std::span<double> grad_params) const override;

 private:
  FeatureShape shape_;
};

class TanhLayer final : public Layer {
 public:
  explicit TanhLayer(FeatureShape shape) : shape_(shape) {}
  std::string kind() const override { return "tanh"; }
  FeatureShape input_shape() const override { return shape_; }
  FeatureShape output_shape() const override { return shape_; }
  Eigen::MatrixXd forward(std::span<const double> params, const Eigen::MatrixXd& x,
                          ForwardContext& ctx, LayerCache* cache) const override;
  Eigen::MatrixXd backward(std::span<const double> params, const LayerCache& cache,
                           const Eigen::MatrixXd& grad_out,
                           std::span<double> grad_params) const override;

 private:
  FeatureShape shape_;
};

/// Inverted dropout; identity unless ctx.dropout_active and rate > 0.
class DropoutLayer final : public Layer {
 public:
  DropoutLayer(FeatureShape shape, double rate);
  std::string kind() const override { return "dropout"; }
  FeatureShape input_shape() const override { return shape_; }
  FeatureShape output_shape() const override { return shape_; }
  Eigen::MatrixXd forward(std::span<const double> params, const Eigen::MatrixXd& x,
                          ForwardContext& ctx, LayerCache* cache) const override;
  Eigen::MatrixXd backward(std::span<const double> params, const LayerCache& cache,
                           const Eigen::MatrixXd& grad_out,
                           std::span<double> grad_params) const override;
  double rate() const { return rate_; }

 private:
  FeatureShape shape_;
  double rate_;
};

/// Nearest-neighbour upsampling by an integer factor on every axis.
class UpsampleLayer final : public Layer {
 public:
  UpsampleLayer(FeatureShape in, int factor);
  std::string kind() const override { return "upsample"; }
  FeatureShape input_shape() const override { return in_; }
  FeatureShape output_shape() const override;
  Eigen::MatrixXd forward(std::span<const double> params, const Eigen::MatrixXd& x,
                          ForwardContext& ctx, LayerCache* cache) const override;
  Eigen::MatrixXd backward(std::span<const double> params, const LayerCache& cache,
                           const Eigen::MatrixXd& grad_out,
                           std::span<double> grad_params) const override;

 private:
  FeatureShape in_;
  int factor_;
};

class Sequential {
 public:
  Sequential() = default;
  Sequential(Sequential&&) = default;
  Sequential& operator=(Sequential&&) = default;

  /// Appends a layer; its input shape must match the previous output.
  void add(std::unique_ptr<Layer> layer, std::string name = {});

  std::size_t num_params() const { return num_params_; }
  std::size_t size() const { return layers_.size(); }
  const Layer& layer(std::size_t k) const { return *layers_[k]; }
  const std::vector<ParamSlice>& slices() const { return slices_; }
  std::size_t offset(std::size_t k) const { return offsets_[k]; }
  FeatureShape input_shape() const;
  FeatureShape output_shape() const;

  /// Fresh parameters (Kaiming-normal weights, zero biases, angles uniform
  /// in [-pi/8, pi/8]).
  Eigen::VectorXd init_params(Rng& rng) const;
  /// Mask of parameters that are circuit angles.
  std::vector<bool> angle_mask() const;

  Eigen::MatrixXd forward(std::span<const double> params, const Eigen::MatrixXd& x,
                          ForwardContext& ctx, std::vector<LayerCache>* caches = nullptr) const;
  /// Runs layers [first, last).
  Eigen::MatrixXd forward_range(std::span<const double> params, const Eigen::MatrixXd& x,
                                ForwardContext& ctx, std::size_t first, std::size_t last) const;
  /// Gradient of sum(grad_out .* output) w.r.t. params (returned) and,
  /// optionally, the input.
  Eigen::VectorXd backward(std::span<const double> params, const std::vector<LayerCache>& caches,
                           const Eigen::MatrixXd& grad_out,
                           Eigen::MatrixXd* grad_input = nullptr) const;

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
  std::vector<std::size_t> offsets_;
  std::vector<ParamSlice> slices_;
  std::size_t num_params_ = 0;
};

}  // namespace bonn

#endif  // BONN_MODEL_HPP

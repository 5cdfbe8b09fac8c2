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

#include "bonn/model.hpp"

#include <algorithm>
#include <numbers>
#include <stdexcept>

namespace bonn {
namespace {

using RowMajorMap =
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstRowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

void check_input(const Eigen::MatrixXd& x, const FeatureShape& shape, const char* who) {
  if (x.rows() != shape.size()) {
    throw std::invalid_argument(std::string(who) + ": expected " + std::to_string(shape.size()) +
                                " input features, got " + std::to_string(x.rows()));
  }
}

Eigen::VectorXd to_vector(std::span<const double> p) {
  return Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size()));
}

void init_kaiming(std::span<double> weights, int fan_in, Rng& rng) {
  const double sd = std::sqrt(2.0 / fan_in);
  for (double& w : weights) w = sd * standard_normal(rng);
}

void init_angles(std::span<double> params, Rng& rng) {
  constexpr double kHalfWidth = std::numbers::pi / 8.0;
  for (double& a : params) a = (2.0 * uniform01(rng) - 1.0) * kHalfWidth;
}

}  // namespace

// ---------------------------------------------------------------- dense

DenseLayer::DenseLayer(int in, int out) : in_(in), out_(out) {
  require(in >= 1 && out >= 1, "dense layer dimensions must be positive");
}

std::size_t DenseLayer::num_params() const {
  return static_cast<std::size_t>(in_) * out_ + out_;
}

void DenseLayer::init_params(std::span<double> params, Rng& rng) const {
  const std::size_t nw = static_cast<std::size_t>(in_) * out_;
  init_kaiming(params.first(nw), in_, rng);
  std::fill(params.begin() + nw, params.end(), 0.0);
}

Eigen::MatrixXd DenseLayer::forward(std::span<const double> params, const Eigen::MatrixXd& x,
                                    ForwardContext&, LayerCache* cache) const {
  check_input(x, input_shape(), "dense");
  Eigen::Map<const Eigen::MatrixXd> W(params.data(), out_, in_);
  Eigen::Map<const Eigen::VectorXd> b(params.data() + static_cast<std::size_t>(in_) * out_, out_);
  Eigen::MatrixXd y = W * x;
  y.colwise() += b;
  if (cache != nullptr) cache->input = x;
  return y;
}

Eigen::MatrixXd DenseLayer::backward(std::span<const double> params, const LayerCache& cache,
                                     const Eigen::MatrixXd& grad_out,
                                     std::span<double> grad_params) const {
  Eigen::Map<const Eigen::MatrixXd> W(params.data(), out_, in_);
  Eigen::Map<Eigen::MatrixXd> dW(grad_params.data(), out_, in_);
  Eigen::Map<Eigen::VectorXd> db(grad_params.data() + static_cast<std::size_t>(in_) * out_, out_);
  dW.noalias() += grad_out * cache.input.transpose();
  db += grad_out.rowwise().sum();
  return W.transpose() * grad_out;
}

// ---------------------------------------------------------- ortho dense

OrthoDenseLayer::OrthoDenseLayer(int in, int out, Topology topology)
    : in_(in), out_(out), layout_(build_layout(topology, std::max({in, out, 2}))) {}

void OrthoDenseLayer::init_params(std::span<double> params, Rng& rng) const {
  init_angles(params, rng);
}

Eigen::MatrixXd OrthoDenseLayer::forward(std::span<const double> params,
                                         const Eigen::MatrixXd& x, ForwardContext&,
                                         LayerCache* cache) const {
  check_input(x, input_shape(), "ortho_dense");
  Eigen::MatrixXd full = layer_matrix(layout_, to_vector(params));
  Eigen::MatrixXd y = full.topLeftCorner(out_, in_) * x;
  if (cache != nullptr) {
    cache->input = x;
    cache->aux = std::move(full);
  }
  return y;
}

Eigen::MatrixXd OrthoDenseLayer::backward(std::span<const double> params,
                                          const LayerCache& cache,
                                          const Eigen::MatrixXd& grad_out,
                                          std::span<double> grad_params) const {
  const Eigen::MatrixXd& full = cache.aux;
  const Eigen::MatrixXd grad_block = grad_out * cache.input.transpose();
  const Eigen::VectorXd g =
      angle_gradient_from_matrix(layout_, to_vector(params), full, grad_block);
  Eigen::Map<Eigen::VectorXd>(grad_params.data(), g.size()) += g;
  return full.topLeftCorner(out_, in_).transpose() * grad_out;
}

// ----------------------------------------------------------------- conv

namespace {

/// Shared batched convolution given a filter bank (k x patch) and bias.
Eigen::MatrixXd conv_forward_batch(const ConvGeometry& g, const Eigen::MatrixXd& filters,
                                   const Eigen::VectorXd* bias, const Eigen::MatrixXd& x) {
  const int k = static_cast<int>(filters.rows());
  const int positions = g.positions();
  Eigen::MatrixXd y(static_cast<Eigen::Index>(k) * positions, x.cols());
  for (Eigen::Index b = 0; b < x.cols(); ++b) {
    const Eigen::MatrixXd patches = im2col(x.col(b).data(), g);
    RowMajorMap out(y.col(b).data(), k, positions);
    out.noalias() = filters * patches;
    if (bias != nullptr) out.colwise() += *bias;
  }
  return y;
}

/// Returns dL/dx; accumulates dL/dfilters and optionally dL/dbias.
Eigen::MatrixXd conv_backward_batch(const ConvGeometry& g, const Eigen::MatrixXd& filters,
                                    const Eigen::MatrixXd& x, const Eigen::MatrixXd& grad_out,
                                    Eigen::Ref<Eigen::MatrixXd> grad_filters,
                                    Eigen::VectorXd* grad_bias) {
  const int k = static_cast<int>(filters.rows());
  const int positions = g.positions();
  Eigen::MatrixXd grad_x = Eigen::MatrixXd::Zero(x.rows(), x.cols());
  for (Eigen::Index b = 0; b < x.cols(); ++b) {
    const Eigen::MatrixXd patches = im2col(x.col(b).data(), g);
    ConstRowMajorMap dy(grad_out.col(b).data(), k, positions);
    grad_filters.noalias() += dy * patches.transpose();
    if (grad_bias != nullptr) *grad_bias += dy.rowwise().sum();
    const Eigen::MatrixXd grad_patches = filters.transpose() * dy;
    col2im_add(grad_patches, g, grad_x.col(b).data());
  }
  return grad_x;
}

}  // namespace

ConvLayer::ConvLayer(ConvGeometry geom, int filters) : geom_(geom), filters_(filters) {
  require(filters >= 1, "conv layer needs at least one filter");
}

std::size_t ConvLayer::num_params() const {
  return static_cast<std::size_t>(filters_) * geom_.patch_size() + filters_;
}

void ConvLayer::init_params(std::span<double> params, Rng& rng) const {
  const std::size_t nw = static_cast<std::size_t>(filters_) * geom_.patch_size();
  init_kaiming(params.first(nw), geom_.patch_size(), rng);
  std::fill(params.begin() + nw, params.end(), 0.0);
}

Eigen::MatrixXd ConvLayer::forward(std::span<const double> params, const Eigen::MatrixXd& x,
                                   ForwardContext&, LayerCache* cache) const {
  check_input(x, input_shape(), "conv3d");
  const std::size_t nw = static_cast<std::size_t>(filters_) * geom_.patch_size();
  const Eigen::MatrixXd W = Eigen::Map<const Eigen::MatrixXd>(params.data(), filters_,
                                                              geom_.patch_size());
  const Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(params.data() + nw, filters_);
  if (cache != nullptr) cache->input = x;
  return conv_forward_batch(geom_, W, &b, x);
}

Eigen::MatrixXd ConvLayer::backward(std::span<const double> params, const LayerCache& cache,
                                    const Eigen::MatrixXd& grad_out,
                                    std::span<double> grad_params) const {
  const std::size_t nw = static_cast<std::size_t>(filters_) * geom_.patch_size();
  const Eigen::MatrixXd W = Eigen::Map<const Eigen::MatrixXd>(params.data(), filters_,
                                                              geom_.patch_size());
  Eigen::MatrixXd dW = Eigen::MatrixXd::Zero(filters_, geom_.patch_size());
  Eigen::VectorXd db = Eigen::VectorXd::Zero(filters_);
  Eigen::MatrixXd grad_x = conv_backward_batch(geom_, W, cache.input, grad_out, dW, &db);
  Eigen::Map<Eigen::MatrixXd>(grad_params.data(), filters_, geom_.patch_size()) += dW;
  Eigen::Map<Eigen::VectorXd>(grad_params.data() + nw, filters_) += db;
  return grad_x;
}

OrthoConvLayer::OrthoConvLayer(ConvGeometry geom, int filters, Topology topology)
    : geom_(geom),
      filters_(filters),
      layout_(build_layout(topology, std::max({filters, geom.patch_size(), 2}))) {}

void OrthoConvLayer::init_params(std::span<double> params, Rng& rng) const {
  init_angles(params, rng);
}

Eigen::MatrixXd OrthoConvLayer::forward(std::span<const double> params,
                                        const Eigen::MatrixXd& x, ForwardContext&,
                                        LayerCache* cache) const {
  check_input(x, input_shape(), "ortho_conv3d");
  Eigen::MatrixXd full = layer_matrix(layout_, to_vector(params));
  const Eigen::MatrixXd filters = full.topLeftCorner(filters_, geom_.patch_size());
  if (cache != nullptr) {
    cache->input = x;
    cache->aux = std::move(full);
  }
  return conv_forward_batch(geom_, filters, nullptr, x);
}

Eigen::MatrixXd OrthoConvLayer::backward(std::span<const double> params,
                                         const LayerCache& cache,
                                         const Eigen::MatrixXd& grad_out,
                                         std::span<double> grad_params) const {
  const Eigen::MatrixXd& full = cache.aux;
  const Eigen::MatrixXd filters = full.topLeftCorner(filters_, geom_.patch_size());
  Eigen::MatrixXd dF = Eigen::MatrixXd::Zero(filters_, geom_.patch_size());
  Eigen::MatrixXd grad_x = conv_backward_batch(geom_, filters, cache.input, grad_out, dF, nullptr);
  const Eigen::VectorXd g = angle_gradient_from_matrix(layout_, to_vector(params), full, dF);
  Eigen::Map<Eigen::VectorXd>(grad_params.data(), g.size()) += g;
  return grad_x;
}

// ---------------------------------------------------------- activations

Eigen::MatrixXd ReluLayer::forward(std::span<const double>, const Eigen::MatrixXd& x,
                                   ForwardContext&, LayerCache* cache) const {
  check_input(x, shape_, "relu");
  if (cache != nullptr) cache->input = x;
  return x.cwiseMax(0.0);
}

Eigen::MatrixXd ReluLayer::backward(std::span<const double>, const LayerCache& cache,
                                    const Eigen::MatrixXd& grad_out, std::span<double>) const {
  return (cache.input.array() > 0.0).select(grad_out, 0.0);
}

Eigen::MatrixXd TanhLayer::forward(std::span<const double>, const Eigen::MatrixXd& x,
                                   ForwardContext&, LayerCache* cache) const {
  check_input(x, shape_, "tanh");
  Eigen::MatrixXd y = x.array().tanh().matrix();
  if (cache != nullptr) cache->aux = y;
  return y;
}

Eigen::MatrixXd TanhLayer::backward(std::span<const double>, const LayerCache& cache,
                                    const Eigen::MatrixXd& grad_out, std::span<double>) const {
  return (grad_out.array() * (1.0 - cache.aux.array().square())).matrix();
}

DropoutLayer::DropoutLayer(FeatureShape shape, double rate) : shape_(shape), rate_(rate) {
  require(rate >= 0.0 && rate < 1.0, "dropout rate must lie in [0, 1)");
}

Eigen::MatrixXd DropoutLayer::forward(std::span<const double>, const Eigen::MatrixXd& x,
                                      ForwardContext& ctx, LayerCache* cache) const {
  check_input(x, shape_, "dropout");
  if (!ctx.dropout_active || rate_ == 0.0) {
    if (cache != nullptr) cache->aux.resize(0, 0);
    return x;
  }
  require(ctx.dropout_rng != nullptr, "active dropout needs an rng");
  const double keep_scale = 1.0 / (1.0 - rate_);
  Eigen::MatrixXd mask(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < mask.cols(); ++c) {
    for (Eigen::Index r = 0; r < mask.rows(); ++r) {
      mask(r, c) = uniform01(*ctx.dropout_rng) < rate_ ? 0.0 : keep_scale;
    }
  }
  Eigen::MatrixXd y = x.cwiseProduct(mask);
  if (cache != nullptr) cache->aux = std::move(mask);
  return y;
}

Eigen::MatrixXd DropoutLayer::backward(std::span<const double>, const LayerCache& cache,
                                       const Eigen::MatrixXd& grad_out, std::span<double>) const {
  if (cache.aux.size() == 0) return grad_out;
  return grad_out.cwiseProduct(cache.aux);
}

UpsampleLayer::UpsampleLayer(FeatureShape in, int factor) : in_(in), factor_(factor) {
  require(factor >= 1, "upsample factor must be positive");
}

FeatureShape UpsampleLayer::output_shape() const {
  return {in_.channels,
          {in_.spatial[0] * factor_, in_.spatial[1] * factor_, in_.spatial[2] * factor_}};
}

Eigen::MatrixXd UpsampleLayer::forward(std::span<const double>, const Eigen::MatrixXd& x,
                                       ForwardContext&, LayerCache*) const {
  check_input(x, in_, "upsample");
  const FeatureShape out = output_shape();
  const auto [A, B, C] = in_.spatial;
  const auto [OA, OB, OC] = out.spatial;
  Eigen::MatrixXd y(out.size(), x.cols());
  for (Eigen::Index s = 0; s < x.cols(); ++s) {
    const double* src = x.col(s).data();
    double* dst = y.col(s).data();
    for (int c = 0; c < in_.channels; ++c) {
      for (int z = 0; z < OA; ++z) {
        for (int yy = 0; yy < OB; ++yy) {
          for (int xx = 0; xx < OC; ++xx) {
            dst[((static_cast<std::size_t>(c) * OA + z) * OB + yy) * OC + xx] =
                src[((static_cast<std::size_t>(c) * A + z / factor_) * B + yy / factor_) * C +
                    xx / factor_];
          }
        }
      }
    }
  }
  return y;
}

Eigen::MatrixXd UpsampleLayer::backward(std::span<const double>, const LayerCache&,
                                        const Eigen::MatrixXd& grad_out, std::span<double>) const {
  const FeatureShape out = output_shape();
  const auto [A, B, C] = in_.spatial;
  const auto [OA, OB, OC] = out.spatial;
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(in_.size(), grad_out.cols());
  for (Eigen::Index s = 0; s < grad_out.cols(); ++s) {
    const double* src = grad_out.col(s).data();
    double* dst = g.col(s).data();
    for (int c = 0; c < in_.channels; ++c) {
      for (int z = 0; z < OA; ++z) {
        for (int yy = 0; yy < OB; ++yy) {
          for (int xx = 0; xx < OC; ++xx) {
            dst[((static_cast<std::size_t>(c) * A + z / factor_) * B + yy / factor_) * C +
                xx / factor_] += src[((static_cast<std::size_t>(c) * OA + z) * OB + yy) * OC + xx];
          }
        }
      }
    }
  }
  return g;
}

// ----------------------------------------------------------- sequential

namespace {

// Equal shapes, or a flatten / unflatten between a flat and a spatial shape.
bool reshape_compatible(const FeatureShape& out, const FeatureShape& in) {
  if (out == in) return true;
  const FeatureShape flat{1, {1, 1, 1}};
  const bool out_flat = out.spatial == flat.spatial;
  const bool in_flat = in.spatial == flat.spatial;
  return out.size() == in.size() && (out_flat || in_flat);
}

}  // namespace

void Sequential::add(std::unique_ptr<Layer> layer, std::string name) {
  if (!layers_.empty() && !reshape_compatible(layers_.back()->output_shape(), layer->input_shape())) {
    throw std::invalid_argument("layer '" + layer->kind() + "' input shape does not match " +
                                "the previous layer output");
  }
  if (name.empty()) name = layer->kind() + std::to_string(layers_.size());
  offsets_.push_back(num_params_);
  if (layer->num_params() > 0) {
    slices_.push_back({name, num_params_, layer->num_params(), layer->angles()});
  }
  num_params_ += layer->num_params();
  layers_.push_back(std::move(layer));
}

FeatureShape Sequential::input_shape() const { return layers_.front()->input_shape(); }
FeatureShape Sequential::output_shape() const { return layers_.back()->output_shape(); }

Eigen::VectorXd Sequential::init_params(Rng& rng) const {
  Eigen::VectorXd p(static_cast<Eigen::Index>(num_params_));
  std::span<double> all(p.data(), num_params_);
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    layers_[k]->init_params(all.subspan(offsets_[k], layers_[k]->num_params()), rng);
  }
  return p;
}

std::vector<bool> Sequential::angle_mask() const {
  std::vector<bool> mask(num_params_, false);
  for (const ParamSlice& s : slices_) {
    if (s.is_angle) std::fill_n(mask.begin() + s.offset, s.size, true);
  }
  return mask;
}

Eigen::MatrixXd Sequential::forward(std::span<const double> params, const Eigen::MatrixXd& x,
                                    ForwardContext& ctx, std::vector<LayerCache>* caches) const {
  require(params.size() == num_params_, "parameter vector length mismatch");
  if (caches != nullptr) caches->assign(layers_.size(), LayerCache{});
  Eigen::MatrixXd h = x;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    h = layers_[k]->forward(params.subspan(offsets_[k], layers_[k]->num_params()), h, ctx,
                            caches != nullptr ? &(*caches)[k] : nullptr);
  }
  return h;
}

Eigen::MatrixXd Sequential::forward_range(std::span<const double> params,
                                          const Eigen::MatrixXd& x, ForwardContext& ctx,
                                          std::size_t first, std::size_t last) const {
  require(params.size() == num_params_, "parameter vector length mismatch");
  require(first <= last && last <= layers_.size(), "layer range out of bounds");
  Eigen::MatrixXd h = x;
  for (std::size_t k = first; k < last; ++k) {
    h = layers_[k]->forward(params.subspan(offsets_[k], layers_[k]->num_params()), h, ctx,
                            nullptr);
  }
  return h;
}

Eigen::VectorXd Sequential::backward(std::span<const double> params,
                                     const std::vector<LayerCache>& caches,
                                     const Eigen::MatrixXd& grad_out,
                                     Eigen::MatrixXd* grad_input) const {
  require(caches.size() == layers_.size(), "backward needs one cache per layer");
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_params_));
  std::span<double> all(grad.data(), num_params_);
  Eigen::MatrixXd g = grad_out;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const std::size_t np = layers_[k]->num_params();
    g = layers_[k]->backward(params.subspan(offsets_[k], np), caches[k], g,
                             all.subspan(offsets_[k], np));
  }
  if (grad_input != nullptr) *grad_input = std::move(g);
  return grad;
}

}  // namespace bonn

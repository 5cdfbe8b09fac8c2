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

#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

namespace bonn {
namespace {

std::span<const double> sp(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = standard_normal(rng);
  return m;
}

// Scalar loss sum(w .* f(params, x)) and its central-difference gradient.
double probe(const Sequential& net, const Eigen::VectorXd& p, const Eigen::MatrixXd& x,
             const Eigen::MatrixXd& w) {
  ForwardContext ctx;
  return (net.forward(sp(p), x, ctx).array() * w.array()).sum();
}

void expect_gradients_match(const Sequential& net, const Eigen::VectorXd& p,
                            const Eigen::MatrixXd& x, Rng& rng, int stride) {
  ForwardContext ctx;
  std::vector<LayerCache> caches;
  const Eigen::MatrixXd y = net.forward(sp(p), x, ctx, &caches);
  const Eigen::MatrixXd w = random_matrix(y.rows(), y.cols(), rng);
  Eigen::MatrixXd grad_x;
  const Eigen::VectorXd g = net.backward(sp(p), caches, w, &grad_x);
  ASSERT_EQ(static_cast<std::size_t>(g.size()), net.num_params());
  const double h = 1e-5;
  for (Eigen::Index k = 0; k < p.size(); k += stride) {
    Eigen::VectorXd pp = p, pm = p;
    pp[k] += h;
    pm[k] -= h;
    const double fd = (probe(net, pp, x, w) - probe(net, pm, x, w)) / (2 * h);
    EXPECT_NEAR(g[k], fd, 1e-4 * std::max(1.0, std::abs(fd))) << "param " << k;
  }
  for (Eigen::Index k = 0; k < x.size(); k += stride) {
    Eigen::MatrixXd xp = x, xm = x;
    xp.data()[k] += h;
    xm.data()[k] -= h;
    const double fd = (probe(net, p, xp, w) - probe(net, p, xm, w)) / (2 * h);
    EXPECT_NEAR(grad_x.data()[k], fd, 1e-4 * std::max(1.0, std::abs(fd))) << "input " << k;
  }
}

TEST(DenseLayer, ColumnMajorWeightsThenBias) {
  Sequential net;
  net.add(std::make_unique<DenseLayer>(2, 2));
  ASSERT_EQ(net.num_params(), 6u);
  Eigen::VectorXd p(6);
  p << 1, 2, 3, 4, 10, 20;  // W = [[1,3],[2,4]], b = [10,20]
  Eigen::MatrixXd x(2, 1);
  x << 1, -1;
  ForwardContext ctx;
  const Eigen::MatrixXd y = net.forward(sp(p), x, ctx);
  EXPECT_DOUBLE_EQ(y(0, 0), 1 - 3 + 10);
  EXPECT_DOUBLE_EQ(y(1, 0), 2 - 4 + 20);
}

TEST(OrthoDenseLayer, MatchesOrthoLinear) {
  Rng rng = make_rng(1);
  Sequential net;
  net.add(std::make_unique<OrthoDenseLayer>(8, 4, Topology::kButterfly));
  const Eigen::VectorXd p = net.init_params(rng);
  const Eigen::MatrixXd x = random_matrix(8, 3, rng);
  ForwardContext ctx;
  const Eigen::MatrixXd y = net.forward(sp(p), x, ctx);
  const OrthoLinearLayer ref = make_ortho_linear(8, 4, Topology::kButterfly, p);
  for (int c = 0; c < 3; ++c) {
    EXPECT_LT((y.col(c) - ortho_forward(ref, x.col(c))).cwiseAbs().maxCoeff(), 1e-12);
  }
  for (double a : p) EXPECT_LE(std::abs(a), std::numbers::pi / 8);
  EXPECT_EQ(net.angle_mask(), std::vector<bool>(p.size(), true));
}

TEST(ConvLayer, MatchesOrthoConvWhenWeightsAreCircuitFilters) {
  Rng rng = make_rng(2);
  const ConvGeometry g = make_conv_geometry(1, {4, 4, 4}, 2, 2, Padding::kValid);
  OrthoConv3DLayer ref = make_ortho_conv3d(2, 8, 2, Padding::kValid, Topology::kPyramid);
  for (auto& a : ref.theta) a = standard_normal(rng);
  Sequential plain, ortho;
  plain.add(std::make_unique<ConvLayer>(g, 8));
  ortho.add(std::make_unique<OrthoConvLayer>(g, 8, Topology::kPyramid));
  Eigen::VectorXd pw(plain.num_params());
  const Eigen::MatrixXd f = ref.filter_matrix();
  std::copy(f.data(), f.data() + f.size(), pw.data());
  pw.tail(8).setZero();
  Tensor3D x(1, {4, 4, 4});
  for (double& v : x.data) v = standard_normal(rng);
  const Eigen::MatrixXd col = x.flat();
  ForwardContext ctx;
  const Eigen::MatrixXd a = plain.forward(sp(pw), col, ctx);
  const Eigen::MatrixXd b = ortho.forward(sp(ref.theta), col, ctx);
  const Tensor3D c = conv3d_forward(ref, x);
  EXPECT_LT((a - c.flat()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((b - c.flat()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(UpsampleLayer, NearestNeighbour) {
  Sequential net;
  net.add(std::make_unique<UpsampleLayer>(FeatureShape{2, {1, 2, 1}}, 2));
  EXPECT_EQ(net.output_shape(), (FeatureShape{2, {2, 4, 2}}));
  Eigen::MatrixXd x(4, 1);
  x << 1, 2, 3, 4;
  ForwardContext ctx;
  const Eigen::MatrixXd y = net.forward({}, x, ctx);
  Tensor3D out(2, {2, 4, 2});
  out.data.assign(y.data(), y.data() + y.size());
  for (int c = 0; c < 2; ++c) {
    for (int z = 0; z < 2; ++z) {
      for (int yy = 0; yy < 4; ++yy) {
        for (int xx = 0; xx < 2; ++xx) EXPECT_EQ(out.at(c, z, yy, xx), x(c * 2 + yy / 2, 0));
      }
    }
  }
}

TEST(DropoutLayer, InactiveIsIdentityAndActiveScalesKeptUnits) {
  Sequential net;
  net.add(std::make_unique<DropoutLayer>(FeatureShape::flat(2000), 0.25));
  const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(2000, 1);
  ForwardContext off;
  EXPECT_EQ(net.forward({}, x, off), x);
  Rng rng = make_rng(3);
  ForwardContext on{true, &rng};
  const Eigen::MatrixXd y = net.forward({}, x, on);
  int dropped = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y(i) == 0.0) {
      ++dropped;
    } else {
      EXPECT_DOUBLE_EQ(y(i), 1.0 / 0.75);
    }
  }
  EXPECT_NEAR(dropped / 2000.0, 0.25, 0.04);
  ForwardContext no_rng{true, nullptr};
  EXPECT_THROW(net.forward({}, x, no_rng), std::invalid_argument);
}

TEST(Sequential, RejectsShapeMismatchButAllowsFlatten) {
  Sequential net;
  net.add(std::make_unique<DenseLayer>(4, 3));
  EXPECT_THROW(net.add(std::make_unique<DenseLayer>(4, 2)), std::invalid_argument);
  Sequential spatial;
  spatial.add(std::make_unique<ConvLayer>(make_conv_geometry(1, {2, 2, 2}, 2, 1, Padding::kSame), 2));
  spatial.add(std::make_unique<DenseLayer>(16, 3));
  EXPECT_EQ(spatial.output_shape(), FeatureShape::flat(3));
}

TEST(Sequential, SlicesPartitionParameters) {
  Sequential net;
  net.add(std::make_unique<DenseLayer>(5, 4), "a");
  net.add(std::make_unique<ReluLayer>(FeatureShape::flat(4)));
  net.add(std::make_unique<OrthoDenseLayer>(4, 4, Topology::kPyramid), "b");
  EXPECT_EQ(net.num_params(), 5u * 4 + 4 + 6);
  std::size_t next = 0;
  for (const ParamSlice& s : net.slices()) {
    EXPECT_EQ(s.offset, next);
    next += s.size;
  }
  EXPECT_EQ(next, net.num_params());
  const std::vector<bool> mask = net.angle_mask();
  EXPECT_FALSE(mask[0]);
  EXPECT_TRUE(mask.back());
}

TEST(Sequential, InitIsKaimingWithZeroBias) {
  Rng rng = make_rng(4);
  Sequential net;
  net.add(std::make_unique<DenseLayer>(400, 50));
  const Eigen::VectorXd p = net.init_params(rng);
  const Eigen::VectorXd w = p.head(20000);
  const double mean = w.mean();
  const double sd = std::sqrt((w.array() - mean).square().sum() / (w.size() - 1));
  EXPECT_NEAR(mean, 0.0, 0.003);
  EXPECT_NEAR(sd, std::sqrt(2.0 / 400), 0.002);
  EXPECT_EQ(p.tail(50).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Sequential, DenseStackGradients) {
  Rng rng = make_rng(5);
  Sequential net;
  net.add(std::make_unique<DenseLayer>(6, 5));
  net.add(std::make_unique<ReluLayer>(FeatureShape::flat(5)));
  net.add(std::make_unique<OrthoDenseLayer>(5, 4, Topology::kPyramid));
  net.add(std::make_unique<TanhLayer>(FeatureShape::flat(4)));
  net.add(std::make_unique<OrthoDenseLayer>(4, 7, Topology::kPyramid));
  net.add(std::make_unique<DenseLayer>(7, 3));
  const Eigen::VectorXd p = net.init_params(rng);
  expect_gradients_match(net, p, random_matrix(6, 3, rng), rng, 1);
}

TEST(Sequential, ConvStackGradients) {
  Rng rng = make_rng(6);
  Sequential net;
  const ConvGeometry g1 = make_conv_geometry(1, {4, 4, 4}, 2, 2, Padding::kValid);
  net.add(std::make_unique<OrthoConvLayer>(g1, 4, Topology::kButterfly));
  net.add(std::make_unique<ReluLayer>(FeatureShape{4, {2, 2, 2}}));
  net.add(std::make_unique<UpsampleLayer>(FeatureShape{4, {2, 2, 2}}, 2));
  const ConvGeometry g2 = make_conv_geometry(4, {4, 4, 4}, 2, 1, Padding::kSame);
  net.add(std::make_unique<ConvLayer>(g2, 2));
  net.add(std::make_unique<TanhLayer>(FeatureShape{2, {4, 4, 4}}));
  net.add(std::make_unique<DenseLayer>(128, 3));
  const Eigen::VectorXd p = net.init_params(rng);
  expect_gradients_match(net, p, random_matrix(64, 2, rng), rng, 3);
}

TEST(Sequential, ForwardRangeComposes) {
  Rng rng = make_rng(7);
  Sequential net;
  net.add(std::make_unique<DenseLayer>(3, 4));
  net.add(std::make_unique<TanhLayer>(FeatureShape::flat(4)));
  net.add(std::make_unique<DenseLayer>(4, 2));
  const Eigen::VectorXd p = net.init_params(rng);
  const Eigen::MatrixXd x = random_matrix(3, 5, rng);
  ForwardContext ctx;
  const Eigen::MatrixXd mid = net.forward_range(sp(p), x, ctx, 0, 2);
  const Eigen::MatrixXd end = net.forward_range(sp(p), mid, ctx, 2, 3);
  EXPECT_LT((end - net.forward(sp(p), x, ctx)).cwiseAbs().maxCoeff(), 1e-14);
}

}  // namespace
}  // namespace bonn

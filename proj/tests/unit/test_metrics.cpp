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


#include "bonn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <gtest/gtest.h>

#include "bonn/rng.hpp"

namespace bonn {
namespace {

// Reference ECE: bins ((m-1)/M, m/M], weights |B_m| / N.
double reference_ece(const std::vector<double>& conf, const std::vector<std::uint8_t>& ok, int M) {
  std::map<int, std::pair<double, double>> sums;  // bin -> (sum conf, sum correct)
  std::map<int, int> counts;
  for (std::size_t i = 0; i < conf.size(); ++i) {
    const int m = std::max(1, static_cast<int>(std::ceil(conf[i] * M - 1e-12)));
    sums[m].first += conf[i];
    sums[m].second += ok[i];
    ++counts[m];
  }
  double e = 0.0;
  for (const auto& [m, s] : sums) {
    const double n = counts[m];
    e += n / static_cast<double>(conf.size()) * std::abs(s.second / n - s.first / n);
  }
  return e;
}

TEST(Ece, PerfectConfidentPredictor) {
  const std::vector<double> conf(20, 1.0);
  const std::vector<std::uint8_t> ok(20, 1);
  EXPECT_EQ(ece(conf, ok).ece, 0.0);
}

TEST(Ece, HandComputedExample) {
  const std::vector<double> conf(4, 0.9);
  const std::vector<std::uint8_t> ok = {1, 1, 1, 0};
  const CalibrationReport r = ece(conf, ok, 2);
  EXPECT_NEAR(r.ece, 0.15, 1e-15);
  ASSERT_EQ(r.bins.size(), 2u);
  EXPECT_EQ(r.bins[1].count, 4u);
  EXPECT_DOUBLE_EQ(r.bins[1].accuracy, 0.75);
}

TEST(Ece, CalibratedPredictorIsSmall) {
  Rng rng = make_rng(1);
  std::vector<double> conf;
  std::vector<std::uint8_t> ok;
  for (int i = 0; i < 10000; ++i) {
    const double p = 0.5 + 0.5 * uniform01(rng);
    conf.push_back(p);
    ok.push_back(uniform01(rng) < p ? 1 : 0);
  }
  EXPECT_LT(ece(conf, ok).ece, 0.02);
}

TEST(Ece, MatchesReferenceAndProperties) {
  Rng rng = make_rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 60);
    const int M = 1 + static_cast<int>(rng() % 15);
    std::vector<double> conf;
    std::vector<std::uint8_t> ok;
    for (int i = 0; i < n; ++i) {
      conf.push_back(trial % 3 == 0 ? std::ceil(uniform01(rng) * 10) / 10 : 1.0 - uniform01(rng));
      ok.push_back(rng() % 2);
    }
    const double e = ece(conf, ok, M).ece;
    EXPECT_NEAR(e, reference_ece(conf, ok, M), 1e-12);
    EXPECT_GE(e, 0.0);
    EXPECT_LE(e, 1.0);
    std::vector<std::size_t> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    std::reverse(perm.begin(), perm.end());
    std::vector<double> conf_p;
    std::vector<std::uint8_t> ok_p;
    for (std::size_t i : perm) {
      conf_p.push_back(conf[i]);
      ok_p.push_back(ok[i]);
    }
    EXPECT_NEAR(ece(conf_p, ok_p, M).ece, e, 1e-12);
    double acc = 0.0, mean_conf = 0.0;
    for (int i = 0; i < n; ++i) {
      acc += ok[i];
      mean_conf += conf[i];
    }
    EXPECT_NEAR(ece(conf, ok, 1).ece, std::abs(acc - mean_conf) / n, 1e-12);
  }
}

TEST(Ece, RejectsBadInput) {
  const std::vector<double> conf = {0.5, 0.7};
  const std::vector<std::uint8_t> ok = {1};
  EXPECT_THROW(ece(conf, ok), std::invalid_argument);
  const std::vector<std::uint8_t> ok2 = {1, 0};
  EXPECT_THROW(ece(conf, ok2, 0), std::invalid_argument);
}

TEST(PrecisionRecall, Examples) {
  const std::vector<std::uint8_t> truth = {1, 1, 0, 1, 0};
  const ClassificationScores perfect = precision_recall_f1(truth, truth);
  EXPECT_EQ(perfect.precision, 1.0);
  EXPECT_EQ(perfect.recall, 1.0);
  EXPECT_EQ(perfect.f1, 1.0);
  const std::vector<std::uint8_t> none(5, 0);
  const ClassificationScores neg = precision_recall_f1(truth, none);
  EXPECT_EQ(neg.recall, 0.0);
  EXPECT_TRUE(neg.precision_undefined);
  // TP = 3, FP = 1, FN = 2.
  const std::vector<std::uint8_t> t2 = {1, 1, 1, 1, 1, 0, 0};
  const std::vector<std::uint8_t> p2 = {1, 1, 1, 0, 0, 1, 0};
  const ClassificationScores s = precision_recall_f1(t2, p2);
  EXPECT_DOUBLE_EQ(s.precision, 0.75);
  EXPECT_DOUBLE_EQ(s.recall, 0.6);
  EXPECT_NEAR(s.f1, 2.0 / 3.0, 1e-15);
}

TEST(PrecisionRecall, MatchesConfusionCounts) {
  Rng rng = make_rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 30);
    std::vector<std::uint8_t> t, p;
    int tp = 0, fp = 0, fn = 0;
    for (int i = 0; i < n; ++i) {
      t.push_back(rng() % 2);
      p.push_back(rng() % 2);
      tp += t.back() && p.back();
      fp += !t.back() && p.back();
      fn += t.back() && !p.back();
    }
    const ClassificationScores s = precision_recall_f1(t, p);
    EXPECT_EQ(s.precision_undefined, tp + fp == 0);
    EXPECT_EQ(s.recall_undefined, tp + fn == 0);
    if (tp + fp > 0) EXPECT_DOUBLE_EQ(s.precision, static_cast<double>(tp) / (tp + fp));
    if (tp + fn > 0) EXPECT_DOUBLE_EQ(s.recall, static_cast<double>(tp) / (tp + fn));
    if (tp > 0) EXPECT_NEAR(s.f1, 2.0 * tp / (2.0 * tp + fp + fn), 1e-14);
  }
}

TEST(SdaLuda, Examples) {
  const std::vector<std::uint8_t> truth = {1, 1, 1, 0};
  const std::vector<std::uint8_t> pred = {1, 0, 1, 1};
  const std::vector<std::uint32_t> sizes = {4, 22, 9, 0};
  const AnomalySizeExtremes e = sda_luda(truth, pred, sizes);
  EXPECT_EQ(e.sda, 4u);
  EXPECT_EQ(e.luda, 22u);
  const AnomalySizeExtremes all = sda_luda(truth, truth, sizes);
  EXPECT_FALSE(all.luda.has_value());
  EXPECT_EQ(all.sda, 4u);
}

TEST(SdaLuda, MatchesBruteForce) {
  Rng rng = make_rng(4);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 20);
    std::vector<std::uint8_t> t, p;
    std::vector<std::uint32_t> sizes;
    for (int i = 0; i < n; ++i) {
      t.push_back(rng() % 3 == 0);
      p.push_back(rng() % 2);
      sizes.push_back(t.back() ? 1 + static_cast<std::uint32_t>(rng() % 100) : 0);
    }
    std::vector<std::uint32_t> detected, missed;
    for (int i = 0; i < n; ++i) {
      if (t[i] && p[i]) detected.push_back(sizes[i]);
      if (t[i] && !p[i]) missed.push_back(sizes[i]);
    }
    std::sort(detected.begin(), detected.end());
    std::sort(missed.rbegin(), missed.rend());
    const AnomalySizeExtremes e = sda_luda(t, p, sizes);
    EXPECT_EQ(e.sda.has_value(), !detected.empty());
    EXPECT_EQ(e.luda.has_value(), !missed.empty());
    if (!detected.empty()) EXPECT_EQ(*e.sda, detected.front());
    if (!missed.empty()) EXPECT_EQ(*e.luda, missed.front());
  }
}

TEST(Mse, Values) {
  const std::vector<double> a = {1.0, 2.0, 3.0};
  const std::vector<double> b = {1.1, 2.1, 3.1};
  EXPECT_EQ(mse(a, a), 0.0);
  EXPECT_NEAR(mse(a, b), 0.01, 1e-15);
  EXPECT_EQ(mse(a, b), mse(b, a));
  EXPECT_THROW(mse(a, std::vector<double>{1.0}), std::invalid_argument);
}

TEST(RankCorrelation, Values) {
  const std::vector<double> x = {1, 2, 3, 4, 5};
  const std::vector<double> up = {2, 4, 8, 16, 32};
  const std::vector<double> down = {5, 4, 3, 2, 1};
  EXPECT_NEAR(rank_correlation(x, up), 1.0, 1e-15);
  EXPECT_NEAR(rank_correlation(x, down), -1.0, 1e-15);
  // Ties: ranks of {1, 1, 2} are {1.5, 1.5, 3}; Pearson of ranks with {1, 2, 3} is sqrt(3)/2.
  EXPECT_NEAR(rank_correlation(std::vector<double>{1, 1, 2}, std::vector<double>{1, 2, 3}),
              std::sqrt(3.0) / 2.0, 1e-12);
  EXPECT_THROW(rank_correlation(std::vector<double>{1, 1}, std::vector<double>{1, 2}),
               std::invalid_argument);
}

}  // namespace
}  // namespace bonn

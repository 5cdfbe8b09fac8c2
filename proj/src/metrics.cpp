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
#include <stdexcept>
#include <string>

namespace bonn {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

CalibrationReport ece(std::span<const double> confidences, std::span<const std::uint8_t> correct,
                      int num_bins) {
  require(!confidences.empty(), "ece needs at least one sample");
  require(confidences.size() == correct.size(), "ece inputs differ in length");
  require(num_bins >= 1, "ece needs at least one bin");
  CalibrationReport report;
  report.num_bins = num_bins;
  std::vector<double> conf_sum(num_bins, 0.0), hits(num_bins, 0.0);
  std::vector<std::size_t> counts(num_bins, 0);
  for (std::size_t i = 0; i < confidences.size(); ++i) {
    const double p = confidences[i];
    require(p > 0.0 && p <= 1.0, "confidences must lie in (0, 1]");
    const int m = std::clamp(static_cast<int>(std::ceil(p * num_bins)), 1, num_bins);
    conf_sum[m - 1] += p;
    hits[m - 1] += correct[i] ? 1.0 : 0.0;
    ++counts[m - 1];
  }
  const auto total = static_cast<double>(confidences.size());
  for (int m = 1; m <= num_bins; ++m) {
    CalibrationBin bin;
    bin.m = m;
    bin.count = counts[m - 1];
    if (bin.count > 0) {
      bin.accuracy = hits[m - 1] / static_cast<double>(bin.count);
      bin.confidence = conf_sum[m - 1] / static_cast<double>(bin.count);
      report.ece += static_cast<double>(bin.count) / total * std::abs(bin.accuracy - bin.confidence);
    }
    report.bins.push_back(bin);
  }
  return report;
}

ClassificationScores precision_recall_f1(std::span<const std::uint8_t> truth,
                                         std::span<const std::uint8_t> predicted) {
  require(truth.size() == predicted.size(), "truth and predictions differ in length");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool t = truth[i] != 0, p = predicted[i] != 0;
    tp += t && p;
    fp += !t && p;
    fn += t && !p;
  }
  ClassificationScores s;
  s.precision_undefined = tp + fp == 0;
  s.recall_undefined = tp + fn == 0;
  s.precision = s.precision_undefined ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  s.recall = s.recall_undefined ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

AnomalySizeExtremes sda_luda(std::span<const std::uint8_t> truth,
                             std::span<const std::uint8_t> predicted,
                             std::span<const std::uint32_t> sizes) {
  require(truth.size() == predicted.size() && truth.size() == sizes.size(),
          "sda_luda inputs differ in length");
  AnomalySizeExtremes out;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    require((truth[i] != 0) == (sizes[i] > 0), "anomaly size disagrees with its label");
    if (!truth[i]) continue;
    if (predicted[i]) {
      out.sda = out.sda ? std::min(*out.sda, sizes[i]) : sizes[i];
    } else {
      out.luda = out.luda ? std::max(*out.luda, sizes[i]) : sizes[i];
    }
  }
  return out;
}

double mse(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "mse inputs differ in shape");
  require(!a.empty(), "mse of empty inputs");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double rank_correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("rank correlation inputs differ in length");
  if (a.size() < 2) throw std::invalid_argument("rank correlation needs two samples");
  const std::vector<double> ra = average_ranks(a), rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    ma += ra[i] / n;
    mb += rb[i] / n;
  }
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) throw std::invalid_argument("rank correlation of a constant");
  return sab / std::sqrt(saa * sbb);
}

}  // namespace bonn

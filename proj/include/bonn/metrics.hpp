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

#ifndef BONN_METRICS_HPP
#define BONN_METRICS_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace bonn {

struct CalibrationBin {
  int m = 0;  // 1-based; covers ((m-1)/M, m/M]
  std::size_t count = 0;
  double accuracy = 0.0;
  double confidence = 0.0;
};

struct CalibrationReport {
  double ece = 0.0;
  int num_bins = 10;
  std::vector<CalibrationBin> bins;
};

/// Expected calibration error. Each bin is weighted by its share of the
/// samples; empty bins contribute nothing.
CalibrationReport ece(std::span<const double> confidences, std::span<const std::uint8_t> correct,
                      int num_bins = 10);

struct ClassificationScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_undefined = false;  // no positive predictions
  bool recall_undefined = false;     // no positive labels
};

ClassificationScores precision_recall_f1(std::span<const std::uint8_t> truth,
                                         std::span<const std::uint8_t> predicted);

/// Smallest detected / largest undetected anomaly size; nullopt when the
/// category is empty.
struct AnomalySizeExtremes {
  std::optional<std::uint32_t> sda;
  std::optional<std::uint32_t> luda;
};

AnomalySizeExtremes sda_luda(std::span<const std::uint8_t> truth,
                             std::span<const std::uint8_t> predicted,
                             std::span<const std::uint32_t> sizes);

double mse(std::span<const double> a, std::span<const double> b);

/// Spearman rank correlation (average ranks on ties). Throws if fewer than
/// two samples or either side is constant.
double rank_correlation(std::span<const double> a, std::span<const double> b);

}  // namespace bonn

#endif  // BONN_METRICS_HPP

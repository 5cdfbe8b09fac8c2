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

// Synthetic greyscale scans with injected defects, and their decomposition
// into labelled blocks.

#ifndef BONN_DATA_SYNTH_HPP
#define BONN_DATA_SYNTH_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace bonn {

enum class DefectKind { kPore, kInclusion, kLackOfFusion };

/// A defect in voxel coordinates (z, y, x).
///  - pore: axis-aligned ellipsoid with semi-axes `radii`, low intensity.
///  - inclusion: sphere of radius radii[0], high intensity.
///  - lack of fusion: slab of half-thickness radii[2] around the plane
///    through `center` with unit normal `normal`, clipped to a disc of
///    radius radii[0].
struct Defect {
  DefectKind kind = DefectKind::kPore;
  std::array<double, 3> center{0, 0, 0};
  std::array<double, 3> radii{1, 1, 1};
  std::array<double, 3> normal{1, 0, 0};

  bool contains(double z, double y, double x) const;
  /// Inclusive integer bounding box {zmin, ymin, xmin, zmax, ymax, xmax}.
  std::array<int, 6> bounds() const;
  double intensity() const;
};

struct VoxelScan {
  int edge = 0;
  std::vector<float> values;        // edge^3, in [0, 1]
  std::vector<std::uint8_t> mask;   // edge^3, 1 on defect voxels

  std::size_t index(int z, int y, int x) const {
    return (static_cast<std::size_t>(z) * edge + y) * edge + x;
  }
  std::size_t mask_count() const;
};

/// Throws std::invalid_argument if edge is not a multiple of 16 or a defect
/// does not fit in the scan.
VoxelScan generate_scan(int edge, const std::vector<Defect>& defects, std::uint64_t seed);

/// Draws defects for a scan so that on average a fraction `prevalence` of
/// its blocks is anomalous. Each defect is kept inside one block.
std::vector<Defect> random_defects(int edge, int block_edge, double prevalence,
                                   std::uint64_t seed);

enum class Split : std::uint32_t { kTrain = 0, kVal = 1, kTest = 2 };

struct BlockDataset {
  int block_edge = 16;
  std::vector<std::vector<float>> blocks;
  std::vector<std::uint8_t> labels;
  std::vector<std::uint32_t> sizes;
  std::vector<Split> splits;

  std::size_t size() const { return blocks.size(); }
  void append(const BlockDataset& other);
  std::vector<std::size_t> indices(Split split) const;
  /// Blocks of a split as a (block_edge^3 x count) matrix.
  Eigen::MatrixXd matrix(const std::vector<std::size_t>& which) const;
  void validate() const;
};

/// Non-overlapping blocks in lexicographic (z, y, x) block order. A block is
/// anomalous iff any of its mask voxels is set; size = mask voxel count.
BlockDataset decompose(const VoxelScan& scan, int block_edge = 16);

/// Inverse of decompose for the voxel values.
std::vector<float> reassemble(const BlockDataset& dataset, int edge);

/// Stratified split assignment (per label) with the given train/val
/// fractions; the remainder is test.
void assign_splits(BlockDataset& dataset, double train_fraction, double val_fraction,
                   std::uint64_t seed);

class DatasetFormatError : public std::runtime_error {
 public:
  enum class Kind { kBadMagic, kCorruptHeader, kTruncated, kIo };
  DatasetFormatError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

inline constexpr char kDatasetMagic[5] = {'B', 'O', 'N', 'N', '1'};
inline constexpr std::size_t kDatasetHeaderBytes = 5 + 4 + 4;

void save_dataset(const BlockDataset& dataset, const std::filesystem::path& path);
BlockDataset load_dataset(const std::filesystem::path& path);

}  // namespace bonn

#endif  // BONN_DATA_SYNTH_HPP

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

#include "bonn/data_synth.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <numbers>

#include "bonn/rng.hpp"

namespace bonn {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kNoiseTerms = 16;
constexpr double kNoiseAmplitude = 0.05;
// Defect semi-axis range in voxels; large enough that a typical defect
// changes a block's reconstruction error by more than the background does.
constexpr double kMinRadius = 1.5;
constexpr double kMaxRadius = 3.5;

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

std::size_t uniform_index(Rng& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(const unsigned char* b) {
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

bool Defect::contains(double z, double y, double x) const {
  const double dz = z - center[0], dy = y - center[1], dx = x - center[2];
  switch (kind) {
    case DefectKind::kPore: {
      const double q = (dz * dz) / (radii[0] * radii[0]) + (dy * dy) / (radii[1] * radii[1]) +
                       (dx * dx) / (radii[2] * radii[2]);
      return q <= 1.0;
    }
    case DefectKind::kInclusion:
      return dz * dz + dy * dy + dx * dx <= radii[0] * radii[0];
    case DefectKind::kLackOfFusion: {
      const double along = dz * normal[0] + dy * normal[1] + dx * normal[2];
      const double r2 = dz * dz + dy * dy + dx * dx - along * along;
      return std::abs(along) <= radii[2] && r2 <= radii[0] * radii[0];
    }
  }
  return false;
}

std::array<int, 6> Defect::bounds() const {
  std::array<double, 3> ext{};
  switch (kind) {
    case DefectKind::kPore: ext = radii; break;
    case DefectKind::kInclusion: ext = {radii[0], radii[0], radii[0]}; break;
    case DefectKind::kLackOfFusion: {
      const double e = std::hypot(radii[0], radii[2]);
      ext = {e, e, e};
      break;
    }
  }
  std::array<int, 6> b{};
  for (int a = 0; a < 3; ++a) {
    b[a] = static_cast<int>(std::ceil(center[a] - ext[a] - 1e-12));
    b[a + 3] = static_cast<int>(std::floor(center[a] + ext[a] + 1e-12));
  }
  return b;
}

double Defect::intensity() const {
  switch (kind) {
    case DefectKind::kPore: return 0.08;
    case DefectKind::kInclusion: return 0.95;
    case DefectKind::kLackOfFusion: return 0.12;
  }
  return 0.0;
}

std::size_t VoxelScan::mask_count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

VoxelScan generate_scan(int edge, const std::vector<Defect>& defects, std::uint64_t seed) {
  require(edge >= 16 && edge % 16 == 0, "scan edge must be a positive multiple of 16");
  for (const Defect& d : defects) {
    const auto b = d.bounds();
    for (int a = 0; a < 3; ++a) {
      require(b[a] >= 0 && b[a + 3] < edge, "defect does not fit inside the scan");
    }
  }
  Rng rng = make_rng(seed, {0x5ca9});
  VoxelScan scan;
  scan.edge = edge;
  const std::size_t n = static_cast<std::size_t>(edge) * edge * edge;
  scan.values.assign(n, 0.0f);
  scan.mask.assign(n, 0);

  // Band-limited noise: sum of random-phase plane waves, evaluated through
  // separable complex exponentials per axis.
  std::vector<std::complex<double>> terms(n, 0.0);
  std::vector<double> noise(n, 0.0);
  for (int t = 0; t < kNoiseTerms; ++t) {
    const double cos_polar = uniform(rng, -1.0, 1.0);
    const double sin_polar = std::sqrt(1.0 - cos_polar * cos_polar);
    const double azimuth = uniform(rng, 0.0, kTwoPi);
    const double wavelength = uniform(rng, 6.0, 24.0);
    const double k = kTwoPi / wavelength;
    const std::array<double, 3> kv{k * cos_polar, k * sin_polar * std::cos(azimuth),
                                   k * sin_polar * std::sin(azimuth)};
    const double phase = uniform(rng, 0.0, kTwoPi);
    std::array<std::vector<std::complex<double>>, 3> axis;
    for (int a = 0; a < 3; ++a) {
      axis[a].resize(edge);
      for (int i = 0; i < edge; ++i) axis[a][i] = std::polar(1.0, kv[a] * i + (a == 0 ? phase : 0.0));
    }
    for (int z = 0; z < edge; ++z) {
      for (int y = 0; y < edge; ++y) {
        const std::complex<double> zy = axis[0][z] * axis[1][y];
        double* row = noise.data() + scan.index(z, y, 0);
        for (int x = 0; x < edge; ++x) row[x] += (zy * axis[2][x]).imag();
      }
    }
  }
  const double noise_scale = kNoiseAmplitude / std::sqrt(kNoiseTerms / 2.0);
  for (int z = 0; z < edge; ++z) {
    // Layered build: slow vertical gradient plus periodic layer banding.
    const double base = 0.35 + 0.25 * z / edge + 0.04 * std::sin(kTwoPi * z / 4.0);
    for (int y = 0; y < edge; ++y) {
      for (int x = 0; x < edge; ++x) {
        const std::size_t i = scan.index(z, y, x);
        scan.values[i] = static_cast<float>(base + noise_scale * noise[i]);
      }
    }
  }

  for (const Defect& d : defects) {
    const auto b = d.bounds();
    for (int z = b[0]; z <= b[3]; ++z) {
      for (int y = b[1]; y <= b[4]; ++y) {
        for (int x = b[2]; x <= b[5]; ++x) {
          if (!d.contains(z, y, x)) continue;
          const std::size_t i = scan.index(z, y, x);
          scan.values[i] = static_cast<float>(d.intensity());
          scan.mask[i] = 1;
        }
      }
    }
  }
  for (float& v : scan.values) v = std::clamp(v, 0.0f, 1.0f);
  return scan;
}

std::vector<Defect> random_defects(int edge, int block_edge, double prevalence,
                                   std::uint64_t seed) {
  require(block_edge >= 12 && edge % block_edge == 0, "edge must be divisible by block edge");
  require(prevalence >= 0.0 && prevalence <= 1.0, "prevalence must lie in [0, 1]");
  Rng rng = make_rng(seed, {0xdefec7});
  const int per_axis = edge / block_edge;
  const std::size_t num_blocks = static_cast<std::size_t>(per_axis) * per_axis * per_axis;
  const double expected = prevalence * static_cast<double>(num_blocks);
  std::size_t count = static_cast<std::size_t>(std::floor(expected));
  if (uniform01(rng) < expected - std::floor(expected)) ++count;
  count = std::min(count, num_blocks);

  std::vector<std::size_t> order(num_blocks);
  for (std::size_t i = 0; i < num_blocks; ++i) order[i] = i;
  shuffle(order, rng);

  std::vector<Defect> defects;
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t blk = order[k];
    const std::array<int, 3> origin{
        static_cast<int>(blk / (per_axis * per_axis)) * block_edge,
        static_cast<int>((blk / per_axis) % per_axis) * block_edge,
        static_cast<int>(blk % per_axis) * block_edge};
    Defect d;
    const double pick = uniform01(rng);
    if (pick < 0.5) {
      d.kind = DefectKind::kPore;
      d.radii = {uniform(rng, kMinRadius, kMaxRadius), uniform(rng, kMinRadius, kMaxRadius),
                 uniform(rng, kMinRadius, kMaxRadius)};
    } else if (pick < 0.75) {
      d.kind = DefectKind::kInclusion;
      const double r = uniform(rng, kMinRadius, kMaxRadius);
      d.radii = {r, r, r};
    } else {
      d.kind = DefectKind::kLackOfFusion;
      d.radii = {uniform(rng, kMinRadius + 1.0, kMaxRadius + 1.0), 0.0, uniform(rng, 0.5, 1.0)};
      std::array<double, 3> nrm{standard_normal(rng), standard_normal(rng), standard_normal(rng)};
      const double len = std::sqrt(nrm[0] * nrm[0] + nrm[1] * nrm[1] + nrm[2] * nrm[2]);
      for (double& c : nrm) c /= len;
      d.normal = nrm;
    }
    // Integer centres far enough from the block faces to keep the whole
    // defect inside the block.
    const std::array<int, 6> reach = d.bounds();
    for (int a = 0; a < 3; ++a) {
      const int margin = std::max(-reach[a], reach[a + 3]);
      const int lo = origin[a] + margin, hi = origin[a] + block_edge - 1 - margin;
      d.center[a] = lo + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(hi - lo + 1)));
    }
    defects.push_back(d);
  }
  return defects;
}

void BlockDataset::append(const BlockDataset& other) {
  if (blocks.empty()) block_edge = other.block_edge;
  require(block_edge == other.block_edge, "cannot append datasets with different block edges");
  blocks.insert(blocks.end(), other.blocks.begin(), other.blocks.end());
  labels.insert(labels.end(), other.labels.begin(), other.labels.end());
  sizes.insert(sizes.end(), other.sizes.begin(), other.sizes.end());
  splits.insert(splits.end(), other.splits.begin(), other.splits.end());
}

std::vector<std::size_t> BlockDataset::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < splits.size(); ++i) {
    if (splits[i] == split) out.push_back(i);
  }
  return out;
}

Eigen::MatrixXd BlockDataset::matrix(const std::vector<std::size_t>& which) const {
  const Eigen::Index voxels = static_cast<Eigen::Index>(block_edge) * block_edge * block_edge;
  Eigen::MatrixXd m(voxels, static_cast<Eigen::Index>(which.size()));
  for (std::size_t c = 0; c < which.size(); ++c) {
    const std::vector<float>& b = blocks.at(which[c]);
    for (Eigen::Index r = 0; r < voxels; ++r) m(r, static_cast<Eigen::Index>(c)) = b[r];
  }
  return m;
}

void BlockDataset::validate() const {
  const std::size_t voxels = static_cast<std::size_t>(block_edge) * block_edge * block_edge;
  require(labels.size() == blocks.size() && sizes.size() == blocks.size() &&
              splits.size() == blocks.size(),
          "dataset columns differ in length");
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    require(blocks[i].size() == voxels, "block has the wrong number of voxels");
    require(labels[i] == (sizes[i] > 0 ? 1 : 0), "block label disagrees with its anomaly size");
    require(static_cast<std::uint32_t>(splits[i]) <= 2, "block has an unknown split tag");
  }
}

BlockDataset decompose(const VoxelScan& scan, int block_edge) {
  require(block_edge >= 1 && scan.edge % block_edge == 0,
          "scan edge is not divisible by the block edge");
  const int per_axis = scan.edge / block_edge;
  BlockDataset out;
  out.block_edge = block_edge;
  for (int bz = 0; bz < per_axis; ++bz) {
    for (int by = 0; by < per_axis; ++by) {
      for (int bx = 0; bx < per_axis; ++bx) {
        std::vector<float> block;
        block.reserve(static_cast<std::size_t>(block_edge) * block_edge * block_edge);
        std::uint32_t size = 0;
        for (int z = 0; z < block_edge; ++z) {
          for (int y = 0; y < block_edge; ++y) {
            for (int x = 0; x < block_edge; ++x) {
              const std::size_t i =
                  scan.index(bz * block_edge + z, by * block_edge + y, bx * block_edge + x);
              block.push_back(scan.values[i]);
              size += scan.mask[i];
            }
          }
        }
        out.blocks.push_back(std::move(block));
        out.labels.push_back(size > 0 ? 1 : 0);
        out.sizes.push_back(size);
        out.splits.push_back(Split::kTrain);
      }
    }
  }
  return out;
}

std::vector<float> reassemble(const BlockDataset& dataset, int edge) {
  const int be = dataset.block_edge;
  require(edge % be == 0, "edge is not divisible by the block edge");
  const int per_axis = edge / be;
  require(dataset.size() == static_cast<std::size_t>(per_axis) * per_axis * per_axis,
          "block count does not match the scan edge");
  std::vector<float> values(static_cast<std::size_t>(edge) * edge * edge);
  std::size_t k = 0;
  for (int bz = 0; bz < per_axis; ++bz) {
    for (int by = 0; by < per_axis; ++by) {
      for (int bx = 0; bx < per_axis; ++bx, ++k) {
        std::size_t v = 0;
        for (int z = 0; z < be; ++z) {
          for (int y = 0; y < be; ++y) {
            for (int x = 0; x < be; ++x, ++v) {
              values[(static_cast<std::size_t>(bz * be + z) * edge + (by * be + y)) * edge +
                     (bx * be + x)] = dataset.blocks[k][v];
            }
          }
        }
      }
    }
  }
  return values;
}

void assign_splits(BlockDataset& dataset, double train_fraction, double val_fraction,
                   std::uint64_t seed) {
  require(train_fraction >= 0.0 && val_fraction >= 0.0 && train_fraction + val_fraction <= 1.0,
          "split fractions must be nonnegative and sum to at most 1");
  Rng rng = make_rng(seed, {0x5917});
  for (std::uint8_t label : {std::uint8_t{0}, std::uint8_t{1}}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      if (dataset.labels[i] == label) members.push_back(i);
    }
    shuffle(members, rng);
    const auto n = static_cast<double>(members.size());
    const std::size_t n_train = static_cast<std::size_t>(std::llround(train_fraction * n));
    const std::size_t n_val = std::min(members.size() - n_train,
                                       static_cast<std::size_t>(std::llround(val_fraction * n)));
    for (std::size_t k = 0; k < members.size(); ++k) {
      dataset.splits[members[k]] =
          k < n_train ? Split::kTrain : (k < n_train + n_val ? Split::kVal : Split::kTest);
    }
  }
}

void save_dataset(const BlockDataset& dataset, const std::filesystem::path& path) {
  dataset.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw DatasetFormatError(DatasetFormatError::Kind::kIo,
                             "cannot open '" + path.string() + "' for writing");
  }
  out.write(kDatasetMagic, sizeof(kDatasetMagic));
  put_u32(out, static_cast<std::uint32_t>(dataset.block_edge));
  put_u32(out, static_cast<std::uint32_t>(dataset.size()));
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const char label = static_cast<char>(dataset.labels[i]);
    out.write(&label, 1);
    put_u32(out, dataset.sizes[i]);
    put_u32(out, static_cast<std::uint32_t>(dataset.splits[i]));
    for (float v : dataset.blocks[i]) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  if (!out) {
    throw DatasetFormatError(DatasetFormatError::Kind::kIo, "write to '" + path.string() + "' failed");
  }
}

BlockDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DatasetFormatError(DatasetFormatError::Kind::kIo, "cannot open '" + path.string() + "'");
  }
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < sizeof(kDatasetMagic) ||
      std::memcmp(bytes.data(), kDatasetMagic, sizeof(kDatasetMagic)) != 0) {
    throw DatasetFormatError(DatasetFormatError::Kind::kBadMagic,
                             "'" + path.string() + "' is not a block dataset (bad magic)");
  }
  if (bytes.size() < kDatasetHeaderBytes) {
    throw DatasetFormatError(DatasetFormatError::Kind::kTruncated, "dataset header is truncated");
  }
  BlockDataset ds;
  const std::uint32_t edge = get_u32(bytes.data() + 5);
  const std::uint32_t count = get_u32(bytes.data() + 9);
  if (edge == 0 || edge > 1024) {
    throw DatasetFormatError(DatasetFormatError::Kind::kCorruptHeader,
                             "dataset header has an invalid block edge");
  }
  ds.block_edge = static_cast<int>(edge);
  const std::size_t voxels = static_cast<std::size_t>(edge) * edge * edge;
  const std::size_t record = 9 + 4 * voxels;
  if (bytes.size() - kDatasetHeaderBytes < static_cast<std::size_t>(count) * record) {
    throw DatasetFormatError(DatasetFormatError::Kind::kTruncated,
                             "dataset payload is truncated");
  }
  if (bytes.size() - kDatasetHeaderBytes > static_cast<std::size_t>(count) * record) {
    throw DatasetFormatError(DatasetFormatError::Kind::kCorruptHeader,
                             "dataset has trailing bytes beyond the declared block count");
  }
  const unsigned char* p = bytes.data() + kDatasetHeaderBytes;
  for (std::uint32_t i = 0; i < count; ++i, p += record) {
    const std::uint32_t split = get_u32(p + 5);
    if (p[0] > 1 || split > 2) {
      throw DatasetFormatError(DatasetFormatError::Kind::kCorruptHeader,
                               "block record has an invalid label or split tag");
    }
    ds.labels.push_back(p[0]);
    ds.sizes.push_back(get_u32(p + 1));
    ds.splits.push_back(static_cast<Split>(split));
    std::vector<float> block(voxels);
    for (std::size_t v = 0; v < voxels; ++v) {
      block[v] = std::bit_cast<float>(get_u32(p + 9 + 4 * v));
    }
    ds.blocks.push_back(std::move(block));
  }
  try {
    ds.validate();
  } catch (const std::invalid_argument& e) {
    throw DatasetFormatError(DatasetFormatError::Kind::kCorruptHeader, e.what());
  }
  return ds;
}

}  // namespace bonn

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cropgan/tensor.hpp"

namespace cropgan {

inline constexpr int kTimesteps = 9;
inline constexpr int kBands = 6;
inline constexpr int kSampleSize = kTimesteps * kBands;

// One pixel's composited time series: 9 windows x 6 bands, row-major,
// unitless reflectance in [0,1].
using Sample = std::array<double, kSampleSize>;

struct LabeledDataset {
  std::vector<Sample> samples;
  std::vector<std::uint8_t> labels;  // empty, or one {0,1} entry per sample
  std::vector<std::pair<std::uint32_t, std::uint32_t>> coords;  // optional (x,y) per sample
  std::string domain;

  std::size_t size() const { return samples.size(); }
  bool labeled() const { return !labels.empty(); }
  bool has_coords() const { return !coords.empty(); }
  void validate() const;
};

// Batch tensor (n,9,6,1) gathered over the given sample indices.
Tensor to_batch(const LabeledDataset& ds, const std::vector<int>& indices);
Tensor to_batch(const LabeledDataset& ds);

// Dataset file layout (integers and doubles little-endian):
//   magic "CGTS" | version u16 | count u32 | timesteps u16 | bands u16
//   flags u8 (bit0 labels present, bit1 coords present)
//   samples f64 row-major | labels u8 x count | coords (u32,u32) x count
void write_dataset(const std::string& path, const LabeledDataset& ds);
LabeledDataset read_dataset(const std::string& path);

}  // namespace cropgan

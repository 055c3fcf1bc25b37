#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cropgan/network.hpp"

namespace cropgan {

// On-disk layout (all integers little-endian):
//   magic "CGCK" | version u16 | role u8 | epoch u32
//   manifest: count u32, then per tensor ndim u8 + dims u32 x ndim
//   tensor data as f64, concatenated in manifest order
//   metadata: count u32, then per line byte length u32 + UTF-8 "key=value"
struct Checkpoint {
  NetworkRole role = NetworkRole::CropMapper;
  std::uint32_t epoch = 0;
  std::vector<Tensor> tensors;
  std::vector<std::pair<std::string, std::string>> metadata;

  const std::string* find_meta(const std::string& key) const;
};

void save_checkpoint(Network& network, const std::string& path, std::uint32_t epoch,
                     const std::vector<std::pair<std::string, std::string>>& metadata = {});

Checkpoint load_checkpoint(const std::string& path);

// Rebuilds the role's architecture and installs the checkpoint tensors,
// validating the shape manifest against it.
Network network_from_checkpoint(const Checkpoint& ckpt);

Network load_network(const std::string& path);

}  // namespace cropgan

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fairkit/nn/mlp.hpp"
#include "fairkit/nn/optimizer.hpp"

namespace fairkit::nn {

struct CheckpointEntry {
  std::string name;
  Network network;
  std::optional<OptimizerState> optimizer;
};

/// Binary checkpoint container:
///
///   magic "FAIRKCKP", u32 version, u64 epoch, u32 entry count, then per entry:
///   name, MlpSpec, parameters (layer order, row-major weight then bias),
///   optional optimizer state (kind, hyperparameters, step, moments).
///
/// All integers little-endian; reals IEEE-754 binary64.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::uint64_t epoch = 0;
  std::vector<CheckpointEntry> entries;

  const CheckpointEntry& at(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace fairkit::nn

// SPDX-License-Identifier: Apache-2.0
//
// Layout: "FPLN", u32 version, u64 header length, JSON header, then
// little-endian f32 values: planes (level-major, XY YZ XZ XT YT ZT), MLP
// layers (weight then bias), Adam first moments, Adam second moments, and
// the occupancy density cache.
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "forplane/trainer.hpp"

namespace forplane {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public DataError {
 public:
  enum class Kind { Magic, Version, Length, Header };
  CheckpointError(Kind kind, const std::string& what) : DataError(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

std::vector<std::uint8_t> save_checkpoint(const TrainState& state);
TrainState load_checkpoint(std::span<const std::uint8_t> bytes);

void write_checkpoint(const std::filesystem::path& path, const TrainState& state);
TrainState read_checkpoint(const std::filesystem::path& path);

}  // namespace forplane

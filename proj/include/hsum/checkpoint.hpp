#pragma once

#include <filesystem>

#include <json.hpp>

#include "hsum/network.hpp"

namespace hsum {

inline constexpr char kCheckpointMagic[4] = {'H', 'S', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr const char* kCheckpointFormat = "hsum-checkpoint/1";

// Archive layout:
//   "HSCK", u32 version, u64 header length, JSON header
//   {"format", "config", "tensors": [names], "metadata"},
//   then one HSUM array per tensor in header order.
// The writer emits no timestamps, so identical models give identical bytes.
void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const nlohmann::json& metadata = nlohmann::json::object());

Model load_checkpoint(const std::filesystem::path& path, nlohmann::json* metadata = nullptr);

}  // namespace hsum

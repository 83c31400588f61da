#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "spikecode/network.hpp"

namespace spikecode {

/// Free-form settings echoed into the checkpoint next to the network config.
using CheckpointMeta = std::map<std::string, std::string>;

template <typename Scalar>
struct LoadedCheckpoint {
  SpikingNetwork<Scalar> net;
  CheckpointMeta meta;
};

/// JSON container, format "spikecode-checkpoint" version 1. Every layer is
/// stored as an out x in x k x k weight tensor plus bias, in 64-bit floats.
template <typename Scalar>
void save_checkpoint(const SpikingNetwork<Scalar>& net, const std::filesystem::path& path,
                     const CheckpointMeta& meta = {});

/// Throws IoError for unreadable or malformed files.
template <typename Scalar>
LoadedCheckpoint<Scalar> load_checkpoint(const std::filesystem::path& path);

}  // namespace spikecode

#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "tk/params.hpp"

namespace tk {

inline constexpr const char* kCheckpointVersion = "tk-ckpt-1";

// Archive layout:
//
//   tk-ckpt-1\n
//   entries <N>\n
//   <name> <rank> <dim0> ... <dim_{rank-1}> <payload_bytes>\n   (N lines)
//   data\n
//   <payloads, concatenated in entry order>
//
// Payloads are row-major little-endian IEEE-754 binary32.
struct CheckpointEntry {
  Shape shape;
  std::vector<float> values;
};

using CheckpointArchive = std::map<std::string, CheckpointEntry>;

void write_checkpoint(const std::filesystem::path& path, const ParameterStore<double>& params);
CheckpointArchive read_checkpoint(const std::filesystem::path& path);

// Copies every archived tensor into the matching parameter; names and shapes
// must match exactly in both directions.
void load_checkpoint(const std::filesystem::path& path, ParameterStore<double>& params);

// Rounds every parameter to binary32, which is what a save/load cycle does.
void round_to_checkpoint_precision(ParameterStore<double>& params);

}  // namespace tk

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "recore/autodiff/array.hpp"

namespace recore::ad {

// In-memory image of a checkpoint file.
//
// File layout: a text manifest followed by raw little-endian blocks.
//
//   RECORE-CKPT
//   version 1
//   meta <key> <value to end of line>
//   tensor <name> f32 <rank> <d0> ... <d{rank-1}> <offset> <nbytes>
//   counter <name> i64 <offset> 8
//   end
//   <blob>
//
// Offsets are relative to the first byte after the "end" line.
struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::map<std::string, Array> tensors;
  std::map<std::string, std::int64_t> counters;
};

inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace recore::ad

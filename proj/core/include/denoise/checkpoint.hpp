// Versioned little-endian binary checkpoints.
//
// Layout: magic "DNCK", u32 version, u64 config hash, u32 tensor count, then
// per tensor: u32 name length, name bytes, u64 rows, u64 cols, rows*cols f64.
// The classifier dropout rate is stored as a 1x1 tensor named "dropout_rate".
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "denoise/model.hpp"

namespace denoise {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint64_t config_hash = 0;
  RepMode rep_mode = RepMode::kLogits;
  ClassifierParams classifier;
  std::optional<NoiseHeadParams> noise_head;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace denoise

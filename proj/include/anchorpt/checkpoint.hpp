#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "anchorpt/adam.hpp"
#include "anchorpt/encoder.hpp"
#include "anchorpt/vocab.hpp"

namespace anchorpt {

// Layout (all integers little-endian):
//   8 bytes  magic "ANCHORPT"
//   u32      format version
//   u64      header length, then a UTF-8 JSON header holding the encoder
//            config, the vocabulary, the optimizer step and free-form metadata
//   u32      tensor count, then per tensor:
//            u32 name length, name bytes, u32 rows, u32 cols,
//            rows*cols float32 values in row-major order
// Optimizer moments, when present, are stored as "adam.m/<name>" and
// "adam.v/<name>" tensors.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  EncoderConfig config;
  EncoderParameters params;
  Vocabulary vocab;
  std::optional<AdamState> optimizer;
  nlohmann::json metadata = nlohmann::json::object();
};

nlohmann::json config_to_json(const EncoderConfig& config);
EncoderConfig config_from_json(const nlohmann::json& j);

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);

/// Throws on a bad magic, a version mismatch or tensors whose shapes do not
/// match the stored config. When `expected` is given its config must match.
Checkpoint load_checkpoint(const std::string& path,
                           const std::optional<EncoderConfig>& expected = std::nullopt);

}  // namespace anchorpt

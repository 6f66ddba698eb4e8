#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cdaae/adam.hpp"
#include "cdaae/config.hpp"
#include "cdaae/model.hpp"

namespace cdaae {

struct TrainState {
  std::size_t global_step = 0;
  std::size_t epoch = 0;          // index of the epoch the next step belongs to, or the last finished one
  std::size_t step_in_epoch = 0;  // steps done inside `epoch`

  bool operator==(const TrainState&) const = default;
};

struct LossRecord {
  std::size_t step = 0;
  LossBundle losses;
};

/// Everything needed to resume training or run inference.
struct Checkpoint {
  TrainConfig config;
  ModelParams<float> params;
  AdamState<float> adam_ae;
  AdamState<float> adam_disc;
  TrainState state;
  std::vector<LossRecord> loss_history;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Little-endian layout: "CDAE", u32 version, u32 length + JSON header
/// (config, model, state, loss history), u32 tensor count, then per tensor
/// u32 length + name, u32 ndim, u32 dims, f32 data. Model tensors come
/// first, followed by Adam moments named "adam.ae.m.<param>",
/// "adam.ae.v.<param>", "adam.disc.m.<param>" and "adam.disc.v.<param>".
std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& checkpoint);
/// Throws ValidationError on a bad magic, version, truncation or a tensor
/// set that does not match the recorded model.
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Hex SHA-256 of a byte buffer or file.
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string file_sha256_hex(const std::filesystem::path& path);

/// Fresh checkpoint: initialized weights, zero moments, step 0.
Checkpoint initial_checkpoint(const TrainConfig& config);

}  // namespace cdaae

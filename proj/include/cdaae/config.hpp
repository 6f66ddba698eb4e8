#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cdaae/labels.hpp"
#include "cdaae/model.hpp"

namespace cdaae {

/// Training configuration. The JSON form uses the field names below; unknown
/// keys are rejected and missing optional keys keep their defaults.
struct TrainConfig {
  SkipPosition skip_position = SkipPosition::P2;
  LabelMode label_mode = LabelMode::AU;
  double lr_ae = 1e-3;
  double lr_disc = 1e-4;
  std::size_t batch_size = 32;
  double alpha = 1.0;
  double beta1 = 1e-2;
  double beta2 = 1e-3;
  std::size_t epochs = 40;
  std::uint64_t seed = 0;
  std::string manifest;    // required
  std::string output_dir;  // required

  std::optional<std::size_t> max_steps;     // stop early after this many steps in total
  std::vector<std::string> train_subjects;  // fold: train on these subjects only; empty = all
  std::size_t per_au_cap = 2000;
  std::size_t zero_frames = 1000;
  std::string heldout_manifest;  // optional synthetic corpus used by ablation reports

  /// Throws ValidationError: learning rates <= 0, batch_size 0, negative
  /// loss weights, empty manifest or output_dir.
  void validate() const;
  LossWeights loss_weights() const { return {alpha, beta1, beta2}; }

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

/// Reads a JSON config; relative paths inside it are resolved against the
/// config file's directory.
TrainConfig load_config(const std::filesystem::path& path);
void save_config(const TrainConfig& config, const std::filesystem::path& path);

}  // namespace cdaae

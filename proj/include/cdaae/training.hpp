#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "cdaae/adam.hpp"
#include "cdaae/checkpoint.hpp"
#include "cdaae/config.hpp"
#include "cdaae/dataset.hpp"
#include "cdaae/model.hpp"
#include "cdaae/sampler.hpp"

namespace cdaae {

struct Optimizers {
  AdamState<float> autoencoder;
  AdamState<float> discriminators;
};

/// Phase 1: one Adam step on D_E and D_G jointly with the encoder and
/// decoder frozen. Writes l_e_d and l_g_d into `losses`.
void discriminator_phase(Cdaae<float>& model, AdamState<float>& optimizer, const Batch& batch,
                         const Tensor<float>& prior, LossBundle& losses);
/// Phase 2: one Adam step on the encoder and decoder with D_E and D_G
/// frozen. Writes l_r, l_e_g, l_g_g and total_ae into `losses`.
void autoencoder_phase(Cdaae<float>& model, AdamState<float>& optimizer, const Batch& batch,
                       const LossWeights& weights, LossBundle& losses);

/// One alternating update on `batch`.
///
/// Phase 1 draws z* ~ N(0, I) per batch element and takes one Adam step on
/// D_E and D_G jointly (E/G frozen). Phase 2 takes one Adam step on the
/// encoder and decoder on alpha L_R + beta1 L_E + beta2 L_G (D_E/D_G frozen).
/// The discriminator terms of the result are measured in phase 1, the
/// autoencoder terms in phase 2, each before its own update. Throws
/// NumericError carrying every term when any of them is not finite.
LossBundle train_step(Cdaae<float>& model, Optimizers& optimizers, const Batch& batch, const LossWeights& weights,
                      std::mt19937_64& rng);

/// Independent generator for a (seed, stream, index) triple.
std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

/// Training pairs of one epoch: resampled from the manifest and shuffled,
/// both as a function of (seed, epoch) only.
std::vector<FacePair> epoch_pairs(const CorpusManifest& manifest, const TrainConfig& config, std::size_t epoch);

std::size_t steps_per_epoch(std::size_t pair_count, std::size_t batch_size);

using ProgressFn = std::function<void(const LossRecord&)>;

struct TrainResult {
  Checkpoint checkpoint;
  std::filesystem::path final_checkpoint;
};

/// Trains from scratch. Writes `checkpoint_latest.cdae` after every epoch,
/// then `checkpoint_final.cdae` and `losses.csv` into config.output_dir.
/// Manifest problems surface before step 0.
TrainResult train(const TrainConfig& config, const ProgressFn& progress = {});
/// Continues a saved run until its configured budget is spent. The result is
/// bitwise identical to an uninterrupted run with the same config.
TrainResult resume(const std::filesystem::path& checkpoint_path, const ProgressFn& progress = {});
TrainResult resume(Checkpoint checkpoint, const ProgressFn& progress = {});

/// Total number of steps the config asks for on a corpus yielding
/// `pair_count` pairs per epoch.
std::size_t planned_steps(const TrainConfig& config, std::size_t pair_count);

/// Manifest after the config's subject filter, validated against the config.
CorpusManifest training_manifest(const TrainConfig& config);

inline constexpr const char* kLossCsvHeader = "step,l_r,l_e_d,l_e_g,l_g_d,l_g_g,total_ae";
void write_loss_csv(const std::vector<LossRecord>& history, const std::filesystem::path& path);

/// Trailing mean of L_R over `window` steps ending at each record.
std::vector<double> smoothed_reconstruction(const std::vector<LossRecord>& history, std::size_t window = 50);

}  // namespace cdaae

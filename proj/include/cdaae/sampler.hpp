#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cdaae/labels.hpp"
#include "cdaae/manifest.hpp"

namespace cdaae {

/// Same-subject training triple. `source` and `target` index manifest rows;
/// `label` is the target frame's label.
struct FacePair {
  std::size_t source = 0;
  std::size_t target = 0;
  LabelVector label;
  std::string subject_id;
};

struct AuSamplerOptions {
  std::size_t per_au_cap = 2000;
  std::size_t zero_frames = 1000;
};

/// Intensity bins used for stratification: (0,0.2], (0.2,0.4], ... (0.8,1],
/// one unit each on the original 0-5 coding scale.
inline constexpr std::size_t kIntensityBins = 5;
std::size_t intensity_bin(double intensity);

struct AuSample {
  std::vector<FacePair> pairs;
  std::array<std::size_t, kActionUnitCount> selected_per_au{};  // targets picked for each AU
  std::size_t selected_zero = 0;
  std::vector<std::string> warnings;  // one per AU without nonzero frames
};

/// For each AU, up to `per_au_cap` frames with nonzero intensity, stratified
/// over intensity bins in proportion to their counts (largest remainder,
/// without replacement inside a bin), plus `zero_frames` all-zero frames
/// drawn once for the whole corpus. Each target gets a uniformly random
/// source from the same subject's frames. Deterministic in `seed`.
AuSample sample_pairs_au(const CorpusManifest& manifest, const AuSamplerOptions& options, std::uint64_t seed);

/// Every image paired with every image of the same subject and gaze,
/// itself included. Throws ValidationError listing the holes when a
/// (subject, gaze) cell lacks an emotion or holds one twice. The pair order
/// is a permutation fixed by `seed`.
std::vector<FacePair> sample_pairs_emotion(const CorpusManifest& manifest, std::uint64_t seed);

/// Pairs for `manifest` in its own label mode, in deterministic order.
std::vector<FacePair> sample_pairs(const CorpusManifest& manifest, const AuSamplerOptions& options, std::uint64_t seed);

}  // namespace cdaae

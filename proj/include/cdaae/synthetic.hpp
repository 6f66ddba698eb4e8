#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cdaae/image.hpp"
#include "cdaae/labels.hpp"
#include "cdaae/manifest.hpp"

namespace cdaae {

struct IdentityParams {
  double skin_tone = 0.5;
  double face_aspect = 0.5;
  double eye_spacing = 0.5;
  double nose_length = 0.5;

  std::array<double, 4> values() const { return {skin_tone, face_aspect, eye_spacing, nose_length}; }
};

struct ExpressionParams {
  double brow_raise = 0;
  double brow_lower = 0;
  double mouth_open = 0;
  double mouth_corner = 0;

  std::array<double, 4> values() const { return {brow_raise, brow_lower, mouth_open, mouth_corner}; }
};

/// Procedural cartoon face: four identity and four expression parameters in [0,1].
struct SyntheticFaceSpec {
  IdentityParams identity;
  ExpressionParams expression;

  /// identity values followed by expression values.
  std::array<double, 8> values() const;
  static SyntheticFaceSpec from_values(const std::array<double, 8>& v);
  /// Throws ValidationError for any parameter outside [0,1].
  void validate() const;
};

/// AU label slot driven by each expression parameter: brow_raise -> AU2,
/// brow_lower -> AU4, mouth_open -> AU26, mouth_corner -> AU12.
inline constexpr std::array<std::size_t, 4> kSyntheticLabelSlots = {1, 2, 11, 6};

LabelVector expression_label(const ExpressionParams& expression);
ExpressionParams expression_from_label(const LabelVector& label);

/// Deterministic anti-aliased 32x32 rendering of `spec`.
Image render_synthetic_face(const SyntheticFaceSpec& spec);

struct PixelBox {
  std::size_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open

  bool contains(std::size_t x, std::size_t y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
};

/// Pixels the mouth of `spec` can touch.
PixelBox mouth_bounding_box(const SyntheticFaceSpec& spec);

/// A rendered corpus together with its ground truth.
struct SyntheticCorpus {
  CorpusManifest manifest;
  std::vector<SyntheticFaceSpec> truth;  // per manifest row
  std::vector<Image> images;             // per manifest row
};

/// Minimum pairwise distance between the identities of distinct subjects.
inline constexpr double kMinIdentityDistance = 0.05;

/// `n_subjects` random identities (rejection-sampled to be at least
/// kMinIdentityDistance apart) with `n_expressions` expressions each. The
/// first expression of every subject is neutral. Subject ids are
/// `<prefix><index>`.
SyntheticCorpus make_synthetic_corpus(std::size_t n_subjects, std::size_t n_expressions, std::uint64_t seed,
                                      const std::string& subject_prefix = "s");

/// Writes manifest.csv, images/*.png and ground_truth.csv into `dir`.
void write_synthetic_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& dir);

inline constexpr const char* kGroundTruthHeader =
    "image_path,subject_id,skin_tone,face_aspect,eye_spacing,nose_length,brow_raise,brow_lower,mouth_open,mouth_corner";

/// Ground truth keyed by image_path.
std::map<std::string, SyntheticFaceSpec> read_ground_truth(const std::filesystem::path& path);

/// Re-attaches ground truth and images to a manifest loaded from disk.
SyntheticCorpus load_synthetic_corpus(const std::filesystem::path& manifest_path,
                                      const std::filesystem::path& ground_truth_path);

}  // namespace cdaae

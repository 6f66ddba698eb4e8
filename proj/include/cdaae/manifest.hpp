#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "cdaae/image.hpp"
#include "cdaae/labels.hpp"

namespace cdaae {

struct ManifestRow {
  std::string image_path;  // relative to the manifest directory
  std::string subject_id;
  std::string gaze;        // empty when the corpus has no gaze variants
  LabelVector label;
};

/// A corpus of pre-aligned face crops with one expression label per image.
///
/// CSV schema (UTF-8, one header row):
///   image_path,subject_id,gaze,label_mode,l1,...,l12
/// label_mode is "au" (intensities already in [0,1]), "au5" (intensities on
/// the 0-5 coding scale, divided by 5 on load) or "emotion" (one-hot over
/// l1..l8, l9..l12 empty). All rows must share the AU or the emotion family.
struct CorpusManifest {
  LabelMode label_mode = LabelMode::AU;
  std::filesystem::path root;
  std::vector<ManifestRow> rows;

  /// Throws ValidationError: no rows, duplicate image_path, subject with a
  /// single image, label outside [0,1], non one-hot emotion label.
  void validate() const;

  std::filesystem::path resolve(const ManifestRow& row) const { return root / row.image_path; }
  Image load_image(std::size_t row) const;
  /// Subject ids in first-appearance order.
  std::vector<std::string> subjects() const;
  /// Rows of the listed subjects only, in original order.
  CorpusManifest filter_subjects(const std::vector<std::string>& subject_ids) const;
};

inline constexpr const char* kManifestHeader =
    "image_path,subject_id,gaze,label_mode,l1,l2,l3,l4,l5,l6,l7,l8,l9,l10,l11,l12";

CorpusManifest parse_manifest(std::istream& in, const std::filesystem::path& root);
CorpusManifest load_manifest(const std::filesystem::path& path);
void write_manifest(const CorpusManifest& manifest, const std::filesystem::path& path);

/// Splits one CSV record honouring double-quoted fields.
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace cdaae

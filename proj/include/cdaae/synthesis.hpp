#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "cdaae/image.hpp"
#include "cdaae/labels.hpp"
#include "cdaae/model.hpp"

namespace cdaae {

/// Single-image synthesis: `source` is [3,32,32] or [1,3,32,32]; returns
/// [1,3,32,32].
Tensor<float> synthesize_one(const Cdaae<float>& model, const Tensor<float>& source, const LabelVector& label);

struct GridAxis {
  std::size_t label_index = 0;
  std::vector<double> values;
};

/// Two-label sweep. Cells are laid out row-major: rows follow `y`, columns
/// follow `x`; every other label entry comes from `base`.
struct GridSpec {
  GridAxis x;
  GridAxis y;
  LabelVector base;

  /// Throws ValidationError: empty axis, value outside [0,1], equal or
  /// out-of-range label indices, invalid base label.
  void validate() const;
  LabelVector cell_label(std::size_t row, std::size_t column) const;
};

/// Parses "AU2:0,0.2,0.4" (or "happiness:0,1" in emotion mode).
GridAxis parse_grid_axis(std::string_view text, LabelMode mode);

struct GridResult {
  Image image;                       // columns*32 by rows*32
  std::vector<Tensor<float>> cells;  // row-major, each [1,3,32,32]
  std::size_t rows = 0;
  std::size_t columns = 0;
};

GridResult manifold_grid(const Cdaae<float>& model, const Tensor<float>& source, const GridSpec& spec);

/// `weight` on class a, 1 - weight on class b, zeros elsewhere.
LabelVector blend_emotions(std::size_t class_a, std::size_t class_b, double weight);

/// Synthesis under blend_emotions(class_a, class_b, weight). Throws
/// UsageError for identical classes or a non emotion-mode model.
Tensor<float> interpolate_emotions(const Cdaae<float>& model, const Tensor<float>& source, std::size_t class_a,
                                   std::size_t class_b, double weight = 0.5);

struct StripResult {
  Image image;                           // two rows: real frames over generated frames
  std::vector<Tensor<float>> generated;  // per column, [1,3,32,32]
};

/// Column i shows frames[i] above synthesize(frames[source_index], labels[i]).
StripResult comparison_strip(const Cdaae<float>& model, const std::vector<Tensor<float>>& frames,
                             const std::vector<LabelVector>& labels, std::size_t source_index);

}  // namespace cdaae

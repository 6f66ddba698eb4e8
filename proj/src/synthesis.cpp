#include "cdaae/synthesis.hpp"

#include <algorithm>
#include <string>

#include "cdaae/error.hpp"

namespace cdaae {

Tensor<float> synthesize_one(const Cdaae<float>& model, const Tensor<float>& source, const LabelVector& label) {
  const Tensor<float> batch = source.rank() == 3 ? source.reshaped(Shape{1, kImageChannels, kImageSize, kImageSize})
                                                 : source;
  return model.synthesize(batch, label_batch<float>({label}, model.label_mode()));
}

void GridSpec::validate() const {
  base.validate();
  for (const GridAxis* axis : {&x, &y}) {
    if (axis->values.empty()) throw ValidationError("grid axis has no values");
    if (axis->label_index >= base.size()) throw ValidationError("grid axis label index out of range");
    for (double v : axis->values) {
      if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("grid value " + std::to_string(v) + " outside [0,1]");
    }
  }
  if (x.label_index == y.label_index) throw ValidationError("grid axes must use distinct labels");
}

LabelVector GridSpec::cell_label(std::size_t row, std::size_t column) const {
  LabelVector l = base;
  l[x.label_index] = x.values.at(column);
  l[y.label_index] = y.values.at(row);
  return l;
}

GridAxis parse_grid_axis(std::string_view text, LabelMode mode) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw ValidationError("grid axis must look like NAME:v1,v2,...");
  const std::string_view name = text.substr(0, colon);
  const auto index = mode == LabelMode::AU ? action_unit_index(name) : emotion_index(name);
  if (!index) throw ValidationError("unknown label name '" + std::string(name) + "'");
  GridAxis axis{*index, {}};
  std::string rest(text.substr(colon + 1));
  std::size_t pos = 0;
  while (pos <= rest.size()) {
    const auto comma = std::min(rest.find(',', pos), rest.size());
    const std::string item = rest.substr(pos, comma - pos);
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (item.empty() || used != item.size()) throw ValidationError("bad grid value '" + item + "'");
    axis.values.push_back(v);
    pos = comma + 1;
  }
  return axis;
}

GridResult manifold_grid(const Cdaae<float>& model, const Tensor<float>& source, const GridSpec& spec) {
  if (spec.base.mode != model.label_mode()) throw UsageError("grid base label does not match the model label mode");
  spec.validate();
  GridResult r;
  r.rows = spec.y.values.size();
  r.columns = spec.x.values.size();
  std::vector<Image> tiles;
  for (std::size_t row = 0; row < r.rows; ++row) {
    for (std::size_t col = 0; col < r.columns; ++col) {
      r.cells.push_back(synthesize_one(model, source, spec.cell_label(row, col)));
      tiles.push_back(postprocess(r.cells.back()));
    }
  }
  r.image = tile_images(tiles, r.columns);
  return r;
}

LabelVector blend_emotions(std::size_t class_a, std::size_t class_b, double weight) {
  if (class_a >= kEmotionCount || class_b >= kEmotionCount) throw UsageError("emotion class out of range");
  if (class_a == class_b) throw UsageError("interpolation needs two different emotion classes");
  if (!(weight >= 0.0 && weight <= 1.0)) throw UsageError("interpolation weight must lie in [0,1]");
  LabelVector l = LabelVector::zeros(LabelMode::Emotion);
  l[class_a] = weight;
  l[class_b] = 1.0 - weight;
  return l;
}

Tensor<float> interpolate_emotions(const Cdaae<float>& model, const Tensor<float>& source, std::size_t class_a,
                                   std::size_t class_b, double weight) {
  if (model.label_mode() != LabelMode::Emotion) throw UsageError("emotion interpolation needs an emotion-mode model");
  return synthesize_one(model, source, blend_emotions(class_a, class_b, weight));
}

StripResult comparison_strip(const Cdaae<float>& model, const std::vector<Tensor<float>>& frames,
                             const std::vector<LabelVector>& labels, std::size_t source_index) {
  if (frames.empty() || frames.size() != labels.size()) throw UsageError("comparison strip needs one label per frame");
  if (source_index >= frames.size()) throw UsageError("comparison strip source index out of range");
  StripResult r;
  std::vector<Image> top, bottom;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    top.push_back(postprocess(frames[i]));
    r.generated.push_back(synthesize_one(model, frames[source_index], labels[i]));
    bottom.push_back(postprocess(r.generated.back()));
  }
  std::vector<Image> tiles = top;
  tiles.insert(tiles.end(), bottom.begin(), bottom.end());
  r.image = tile_images(tiles, frames.size());
  return r;
}

}  // namespace cdaae

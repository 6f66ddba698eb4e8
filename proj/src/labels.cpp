#include "cdaae/labels.hpp"

#include <algorithm>
#include <cctype>

#include "cdaae/error.hpp"

namespace cdaae {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

}  // namespace

std::size_t label_dim(LabelMode mode) { return mode == LabelMode::AU ? kActionUnitCount : kEmotionCount; }

std::string_view to_string(LabelMode mode) { return mode == LabelMode::AU ? "au" : "emotion"; }

LabelMode parse_label_mode(std::string_view text) {
  const auto t = lower(text);
  if (t == "au") return LabelMode::AU;
  if (t == "emotion") return LabelMode::Emotion;
  throw ValidationError("unknown label mode '" + std::string(text) + "'");
}

std::optional<std::size_t> action_unit_index(std::string_view name) {
  const auto n = lower(name);
  for (std::size_t i = 0; i < kActionUnitNames.size(); ++i) {
    if (lower(kActionUnitNames[i]) == n) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> emotion_index(std::string_view name) {
  const auto n = lower(name);
  for (std::size_t i = 0; i < kEmotionNames.size(); ++i) {
    if (kEmotionNames[i] == n) return i;
  }
  return std::nullopt;
}

LabelVector LabelVector::zeros(LabelMode mode) { return {mode, std::vector<double>(label_dim(mode), 0.0)}; }

LabelVector LabelVector::one_hot(std::size_t emotion) {
  if (emotion >= kEmotionCount) throw ValidationError("emotion index out of range");
  auto l = zeros(LabelMode::Emotion);
  l.values[emotion] = 1.0;
  return l;
}

void LabelVector::validate() const {
  if (values.size() != label_dim(mode)) {
    throw ValidationError("label has " + std::to_string(values.size()) + " entries, expected " +
                          std::to_string(label_dim(mode)));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] >= 0.0 && values[i] <= 1.0)) {
      throw ValidationError("label entry " + std::to_string(i + 1) + " = " + std::to_string(values[i]) +
                            " outside [0,1]");
    }
  }
}

bool LabelVector::is_one_hot() const {
  std::size_t ones = 0;
  for (double v : values) {
    if (v == 1.0) {
      ++ones;
    } else if (v != 0.0) {
      return false;
    }
  }
  return ones == 1;
}

}  // namespace cdaae

#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cdaae {

enum class LabelMode { AU, Emotion };

inline constexpr std::size_t kActionUnitCount = 12;
inline constexpr std::size_t kEmotionCount = 8;

/// The twelve coded action units, in label-slot order.
inline constexpr std::array<std::string_view, kActionUnitCount> kActionUnitNames = {
    "AU1", "AU2", "AU4", "AU5", "AU6", "AU9", "AU12", "AU15", "AU17", "AU20", "AU25", "AU26"};

/// Emotion classes, in label-slot order.
inline constexpr std::array<std::string_view, kEmotionCount> kEmotionNames = {
    "neutral", "happiness", "sadness", "anger", "disgust", "contempt", "fear", "surprise"};

std::size_t label_dim(LabelMode mode);
std::string_view to_string(LabelMode mode);
/// Accepts "au" / "emotion" (case-insensitive).
LabelMode parse_label_mode(std::string_view text);

/// Slot index of an action unit name such as "AU26"; nullopt when unknown.
std::optional<std::size_t> action_unit_index(std::string_view name);
/// Slot index of an emotion name such as "happiness"; nullopt when unknown.
std::optional<std::size_t> emotion_index(std::string_view name);

/// Target expression: 12 AU intensities or 8 emotion weights, all in [0,1].
struct LabelVector {
  LabelMode mode = LabelMode::AU;
  std::vector<double> values;

  static LabelVector zeros(LabelMode mode);
  static LabelVector one_hot(std::size_t emotion);

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }

  /// Throws ValidationError on wrong length or entries outside [0,1].
  void validate() const;
  bool is_one_hot() const;

  bool operator==(const LabelVector&) const = default;
};

}  // namespace cdaae

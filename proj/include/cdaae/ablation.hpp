#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include <json.hpp>

#include "cdaae/eval.hpp"
#include "cdaae/training.hpp"

namespace cdaae {

inline constexpr std::array<SkipPosition, 4> kAblationPositions = {SkipPosition::None, SkipPosition::P1,
                                                                   SkipPosition::P2, SkipPosition::P3};

struct AblationEntry {
  SkipPosition position = SkipPosition::P2;
  std::filesystem::path checkpoint;
  double final_smoothed_l_r = 0;
  std::optional<EvalReport> eval;
};

struct AblationReport {
  std::vector<AblationEntry> entries;

  const AblationEntry* find(SkipPosition position) const;
  /// nullopt when either side is missing or was not evaluated.
  std::optional<bool> p2_at_least_none() const;
  /// nullopt unless P1 and at least one other position were evaluated.
  std::optional<bool> p1_highest_identity() const;
  nlohmann::json to_json() const;
};

/// Trains one model per position from `base` with identical seeds and data
/// order, each into `<base.output_dir>/<position>`. When `heldout` and
/// `oracle` are given every model is evaluated on them.
AblationReport run_ablation(const TrainConfig& base, const std::vector<SkipPosition>& positions,
                            const SyntheticCorpus* heldout = nullptr, const OracleRegressor* oracle = nullptr,
                            const ProgressFn& progress = {});

}  // namespace cdaae

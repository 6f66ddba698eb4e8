#include "cdaae/ablation.hpp"

#include <algorithm>

#include "cdaae/error.hpp"

namespace cdaae {

const AblationEntry* AblationReport::find(SkipPosition position) const {
  for (const auto& e : entries) {
    if (e.position == position) return &e;
  }
  return nullptr;
}

std::optional<bool> AblationReport::p2_at_least_none() const {
  const auto* p2 = find(SkipPosition::P2);
  const auto* none = find(SkipPosition::None);
  if (!p2 || !none || !p2->eval || !none->eval) return std::nullopt;
  return p2->eval->identity.score >= none->eval->identity.score;
}

std::optional<bool> AblationReport::p1_highest_identity() const {
  const auto* p1 = find(SkipPosition::P1);
  if (!p1 || !p1->eval) return std::nullopt;
  std::size_t others = 0;
  bool highest = true;
  for (const auto& e : entries) {
    if (e.position == SkipPosition::P1 || !e.eval) continue;
    ++others;
    if (e.eval->identity.score > p1->eval->identity.score) highest = false;
  }
  if (others == 0) return std::nullopt;
  return highest;
}

nlohmann::json AblationReport::to_json() const {
  nlohmann::json j;
  j["variants"] = nlohmann::json::array();
  for (const auto& e : entries) {
    nlohmann::json v{{"skip_position", std::string(to_string(e.position))},
                     {"checkpoint", e.checkpoint.string()},
                     {"final_smoothed_l_r", e.final_smoothed_l_r}};
    if (e.eval) v["eval"] = e.eval->to_json();
    j["variants"].push_back(v);
  }
  auto opt = [](std::optional<bool> b) { return b ? nlohmann::json(*b) : nlohmann::json(nullptr); };
  j["p2_identity_at_least_none"] = opt(p2_at_least_none());
  j["p1_identity_highest"] = opt(p1_highest_identity());
  return j;
}

AblationReport run_ablation(const TrainConfig& base, const std::vector<SkipPosition>& positions,
                            const SyntheticCorpus* heldout, const OracleRegressor* oracle,
                            const ProgressFn& progress) {
  if (positions.empty()) throw UsageError("ablation needs at least one skip position");
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (std::find(positions.begin(), positions.begin() + i, positions[i]) != positions.begin() + i) {
      throw UsageError("duplicate skip position " + std::string(to_string(positions[i])));
    }
  }
  if ((heldout == nullptr) != (oracle == nullptr)) throw UsageError("evaluation needs both a corpus and an oracle");
  base.validate();
  training_manifest(base);

  AblationReport report;
  for (auto pos : positions) {
    TrainConfig cfg = base;
    cfg.skip_position = pos;
    cfg.output_dir = (std::filesystem::path(base.output_dir) / std::string(to_string(pos))).string();
    const auto result = train(cfg, progress);
    AblationEntry entry;
    entry.position = pos;
    entry.checkpoint = result.final_checkpoint;
    const auto smoothed = smoothed_reconstruction(result.checkpoint.loss_history);
    entry.final_smoothed_l_r = smoothed.empty() ? 0.0 : smoothed.back();
    if (heldout) {
      const Cdaae<float> model(result.checkpoint.params);
      entry.eval = evaluate(model_synthesis(model), *heldout, *oracle);
    }
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace cdaae

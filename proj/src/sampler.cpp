#include "cdaae/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <utility>

#include "cdaae/error.hpp"

namespace cdaae {

std::size_t intensity_bin(double intensity) {
  if (!(intensity > 0.0)) throw UsageError("intensity_bin: intensity must be positive");
  const double scaled = std::ceil(intensity * static_cast<double>(kIntensityBins) - 1e-9);
  return std::min<std::size_t>(kIntensityBins - 1, static_cast<std::size_t>(std::max(1.0, scaled)) - 1);
}

namespace {

std::map<std::string, std::vector<std::size_t>> rows_by_subject(const CorpusManifest& manifest) {
  std::map<std::string, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < manifest.rows.size(); ++i) out[manifest.rows[i].subject_id].push_back(i);
  return out;
}

// `count` indices drawn from `pool` without replacement.
std::vector<std::size_t> draw_without_replacement(std::vector<std::size_t> pool, std::size_t count,
                                                  std::mt19937_64& rng) {
  count = std::min(count, pool.size());
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(count);
  return pool;
}

// Largest-remainder apportionment of `total` over `counts`.
std::vector<std::size_t> apportion(const std::vector<std::size_t>& counts, std::size_t total) {
  std::size_t sum = 0;
  for (auto c : counts) sum += c;
  std::vector<std::size_t> quota(counts.size(), 0);
  if (sum == 0 || total == 0) return quota;
  std::vector<std::pair<std::size_t, std::size_t>> remainders;  // (remainder numerator, bin)
  std::size_t assigned = 0;
  for (std::size_t b = 0; b < counts.size(); ++b) {
    const std::size_t num = counts[b] * total;
    quota[b] = num / sum;
    assigned += quota[b];
    remainders.emplace_back(num % sum, b);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < total && i < remainders.size(); ++i) {
    ++quota[remainders[i].second];
    ++assigned;
  }
  return quota;
}

bool all_zero(const LabelVector& l) {
  return std::all_of(l.values.begin(), l.values.end(), [](double v) { return v == 0.0; });
}

}  // namespace

AuSample sample_pairs_au(const CorpusManifest& manifest, const AuSamplerOptions& options, std::uint64_t seed) {
  if (manifest.label_mode != LabelMode::AU) throw UsageError("sample_pairs_au needs an AU-mode manifest");
  std::mt19937_64 rng(seed);
  const auto subjects = rows_by_subject(manifest);
  AuSample out;

  std::vector<std::size_t> targets;
  for (std::size_t au = 0; au < kActionUnitCount; ++au) {
    std::vector<std::vector<std::size_t>> bins(kIntensityBins);
    for (std::size_t i = 0; i < manifest.rows.size(); ++i) {
      const double v = manifest.rows[i].label[au];
      if (v > 0.0) bins[intensity_bin(v)].push_back(i);
    }
    std::vector<std::size_t> counts;
    std::size_t available = 0;
    for (const auto& b : bins) {
      counts.push_back(b.size());
      available += b.size();
    }
    if (available == 0) {
      out.warnings.push_back(std::string(kActionUnitNames[au]) + " has no nonzero frames");
      continue;
    }
    const auto quota = apportion(counts, std::min(options.per_au_cap, available));
    for (std::size_t b = 0; b < kIntensityBins; ++b) {
      for (auto row : draw_without_replacement(bins[b], quota[b], rng)) targets.push_back(row);
      out.selected_per_au[au] += quota[b];
    }
  }

  std::vector<std::size_t> zeros;
  for (std::size_t i = 0; i < manifest.rows.size(); ++i) {
    if (all_zero(manifest.rows[i].label)) zeros.push_back(i);
  }
  const auto zero_pick = draw_without_replacement(zeros, options.zero_frames, rng);
  out.selected_zero = zero_pick.size();
  targets.insert(targets.end(), zero_pick.begin(), zero_pick.end());

  out.pairs.reserve(targets.size());
  for (auto t : targets) {
    const auto& row = manifest.rows[t];
    const auto& pool = subjects.at(row.subject_id);
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    out.pairs.push_back(FacePair{pool[pick(rng)], t, row.label, row.subject_id});
  }
  return out;
}

std::vector<FacePair> sample_pairs_emotion(const CorpusManifest& manifest, std::uint64_t seed) {
  if (manifest.label_mode != LabelMode::Emotion) throw UsageError("sample_pairs_emotion needs an emotion-mode manifest");
  using Cell = std::pair<std::string, std::string>;
  std::map<Cell, std::vector<std::vector<std::size_t>>> cells;
  for (std::size_t i = 0; i < manifest.rows.size(); ++i) {
    const auto& row = manifest.rows[i];
    if (!row.label.is_one_hot()) throw ValidationError("row '" + row.image_path + "' is not a one-hot emotion label");
    const auto cls = static_cast<std::size_t>(
        std::max_element(row.label.values.begin(), row.label.values.end()) - row.label.values.begin());
    auto& slots = cells[{row.subject_id, row.gaze}];
    slots.resize(kEmotionCount);
    slots[cls].push_back(i);
  }

  std::string holes;
  for (const auto& [cell, slots] : cells) {
    for (std::size_t c = 0; c < kEmotionCount; ++c) {
      if (slots[c].size() == 1) continue;
      if (!holes.empty()) holes += "; ";
      holes += "subject '" + cell.first + "' gaze '" + cell.second + "' " + std::string(kEmotionNames[c]) +
               (slots[c].empty() ? " missing" : " duplicated");
    }
  }
  if (!holes.empty()) throw ValidationError("incomplete emotion grid: " + holes);

  std::vector<FacePair> pairs;
  pairs.reserve(cells.size() * kEmotionCount * kEmotionCount);
  for (const auto& [cell, slots] : cells) {
    for (std::size_t s = 0; s < kEmotionCount; ++s) {
      for (std::size_t t = 0; t < kEmotionCount; ++t) {
        const std::size_t target = slots[t][0];
        pairs.push_back(FacePair{slots[s][0], target, manifest.rows[target].label, cell.first});
      }
    }
  }
  std::mt19937_64 rng(seed);
  std::shuffle(pairs.begin(), pairs.end(), rng);
  return pairs;
}

std::vector<FacePair> sample_pairs(const CorpusManifest& manifest, const AuSamplerOptions& options, std::uint64_t seed) {
  if (manifest.label_mode == LabelMode::AU) return sample_pairs_au(manifest, options, seed).pairs;
  return sample_pairs_emotion(manifest, seed);
}

}  // namespace cdaae

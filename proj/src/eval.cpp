#include "cdaae/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "cdaae/error.hpp"
#include "cdaae/image.hpp"
#include "cdaae/synthesis.hpp"

namespace cdaae {

using nlohmann::json;

SynthesisFn model_synthesis(const Cdaae<float>& model) {
  return [&model](const Tensor<float>& source, const LabelVector& label) {
    return synthesize_one(model, source, label);
  };
}

std::vector<std::size_t> source_frames(const SyntheticCorpus& corpus) {
  std::vector<std::size_t> out;
  for (const auto& subject : corpus.manifest.subjects()) {
    std::size_t first = corpus.manifest.rows.size(), neutral = first;
    for (std::size_t i = 0; i < corpus.manifest.rows.size(); ++i) {
      const auto& row = corpus.manifest.rows[i];
      if (row.subject_id != subject) continue;
      if (first == corpus.manifest.rows.size()) first = i;
      const bool zero = std::all_of(row.label.values.begin(), row.label.values.end(), [](double v) { return v == 0; });
      if (zero) {
        neutral = i;
        break;
      }
    }
    out.push_back(neutral < corpus.manifest.rows.size() ? neutral : first);
  }
  return out;
}

std::vector<LabelVector> identity_probe_labels() {
  std::vector<LabelVector> out{LabelVector::zeros(LabelMode::AU)};
  LabelVector all = LabelVector::zeros(LabelMode::AU);
  for (auto slot : kSyntheticLabelSlots) {
    LabelVector l = LabelVector::zeros(LabelMode::AU);
    l[slot] = 1.0;
    all[slot] = 1.0;
    out.push_back(l);
  }
  out.push_back(all);
  return out;
}

namespace {

void check_corpus(const SyntheticCorpus& c) {
  if (c.images.size() != c.manifest.rows.size() || c.truth.size() != c.manifest.rows.size()) {
    throw UsageError("synthetic corpus needs images and ground truth for every row");
  }
  if (c.manifest.label_mode != LabelMode::AU) throw UsageError("evaluation needs an AU-mode synthetic corpus");
}

Tensor<float> source_tensor(const SyntheticCorpus& c, std::size_t row) {
  return preprocess(c.images[row]).reshaped(Shape{1, kImageChannels, kImageSize, kImageSize});
}

}  // namespace

IdentityEval eval_identity(const SynthesisFn& synth, const SyntheticCorpus& heldout, const OracleRegressor& oracle,
                           const std::vector<LabelVector>& labels) {
  check_corpus(heldout);
  const auto sources = source_frames(heldout);
  if (sources.size() < 2) throw UsageError("identity evaluation needs at least two subjects");
  std::vector<std::array<double, 4>> truth;
  std::vector<std::string> ids;
  for (auto row : sources) {
    truth.push_back(heldout.truth[row].identity.values());
    ids.push_back(heldout.manifest.rows[row].subject_id);
  }

  IdentityEval r;
  r.chance = 1.0 / static_cast<double>(sources.size());
  std::size_t correct = 0;
  for (std::size_t s = 0; s < sources.size(); ++s) {
    const Tensor<float> src = source_tensor(heldout, sources[s]);
    for (std::size_t li = 0; li < labels.size(); ++li) {
      const auto pred = oracle.predict(synth(src, labels[li]));
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < truth.size(); ++k) {
        double d = 0;
        for (std::size_t j = 0; j < 4; ++j) d += (pred[j] - truth[k][j]) * (pred[j] - truth[k][j]);
        if (d < best_d) {
          best_d = d;
          best = k;
        }
      }
      const bool ok = best == s;
      correct += ok;
      r.details.push_back(IdentityTrial{ids[s], li, ids[best], ok});
    }
  }
  r.trials = r.details.size();
  r.score = r.trials ? static_cast<double>(correct) / static_cast<double>(r.trials) : 0.0;
  return r;
}

LabelControlEval eval_label_control(const SynthesisFn& synth, const SyntheticCorpus& heldout,
                                    const OracleRegressor& oracle, const SweepOptions& options) {
  check_corpus(heldout);
  if (options.steps < 2) throw UsageError("a sweep needs at least two steps");
  LabelControlEval r;
  std::size_t monotone = 0, ranged = 0;
  bool all_flat = true;
  for (auto row : source_frames(heldout)) {
    const Tensor<float> src = source_tensor(heldout, row);
    for (std::size_t p = 0; p < kSyntheticLabelSlots.size(); ++p) {
      Sweep sw{heldout.manifest.rows[row].subject_id, kSyntheticLabelSlots[p], {}, true, 0};
      for (std::size_t i = 0; i < options.steps; ++i) {
        LabelVector l = LabelVector::zeros(LabelMode::AU);
        l[sw.label_slot] = static_cast<double>(i) / static_cast<double>(options.steps - 1);
        sw.regressed.push_back(oracle.predict(synth(src, l))[4 + p]);
        if (i > 0 && sw.regressed[i] < sw.regressed[i - 1] - options.tie_tolerance) sw.monotone = false;
      }
      sw.range = sw.regressed.back() - sw.regressed.front();
      monotone += sw.monotone;
      ranged += sw.range > options.min_range;
      const auto [lo, hi] = std::minmax_element(sw.regressed.begin(), sw.regressed.end());
      if (*hi - *lo > options.degenerate_range) all_flat = false;
      r.sweeps.push_back(std::move(sw));
    }
  }
  const double n = static_cast<double>(r.sweeps.size());
  r.monotone_fraction = static_cast<double>(monotone) / n;
  r.range_fraction = static_cast<double>(ranged) / n;
  r.degenerate = all_flat;
  return r;
}

double eval_reconstruction(const SynthesisFn& synth, const SyntheticCorpus& heldout) {
  check_corpus(heldout);
  std::map<std::string, std::size_t> source_of;
  for (auto row : source_frames(heldout)) source_of[heldout.manifest.rows[row].subject_id] = row;
  double sum = 0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < heldout.manifest.rows.size(); ++i) {
    const auto& row = heldout.manifest.rows[i];
    const Tensor<float> out = synth(source_tensor(heldout, source_of.at(row.subject_id)), row.label);
    const Tensor<float> target = preprocess(heldout.images[i]);
    if (out.numel() != target.numel()) throw DimensionError("synthesis output has the wrong size");
    for (std::size_t j = 0; j < target.numel(); ++j) {
      const double d = static_cast<double>(out[j]) - target[j];
      sum += d * d;
    }
    count += target.numel();
  }
  return sum / static_cast<double>(count);
}

EvalReport evaluate(const SynthesisFn& synth, const SyntheticCorpus& heldout, const OracleRegressor& oracle) {
  return EvalReport{eval_identity(synth, heldout, oracle), eval_label_control(synth, heldout, oracle),
                    eval_reconstruction(synth, heldout)};
}

json EvalReport::to_json(bool details) const {
  json j;
  j["identity_score"] = identity.score;
  j["identity_chance"] = identity.chance;
  j["identity_trials"] = identity.trials;
  j["label_monotonicity"] = label_control.monotone_fraction;
  j["label_range_fraction"] = label_control.range_fraction;
  j["label_degenerate"] = label_control.degenerate;
  j["reconstruction_mse"] = reconstruction_mse;
  j["identity_metric"] = "oracle-regression nearest-identity retrieval on held-out synthetic subjects";
  if (details) {
    json trials = json::array();
    for (const auto& t : identity.details) {
      trials.push_back({{"subject", t.subject_id},
                        {"label", t.label_index},
                        {"predicted", t.predicted_subject},
                        {"correct", t.correct}});
    }
    json sweeps = json::array();
    for (const auto& s : label_control.sweeps) {
      sweeps.push_back({{"subject", s.subject_id},
                        {"label", std::string(kActionUnitNames[s.label_slot])},
                        {"regressed", s.regressed},
                        {"monotone", s.monotone},
                        {"range", s.range}});
    }
    j["identity_trials_detail"] = std::move(trials);
    j["sweeps"] = std::move(sweeps);
  }
  return j;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty()) throw UsageError("pearson needs two equally long, non-empty series");
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0 || sbb == 0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace cdaae

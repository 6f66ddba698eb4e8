#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cdaae/labels.hpp"
#include "cdaae/model.hpp"
#include "cdaae/oracle.hpp"
#include "cdaae/synthetic.hpp"
#include "cdaae/tensor.hpp"

namespace cdaae {

/// Maps a [1,3,32,32] source and a label to a [1,3,32,32] image in [-1,1].
using SynthesisFn = std::function<Tensor<float>(const Tensor<float>& source, const LabelVector& label)>;

/// Borrows `model`, which must outlive the returned function.
SynthesisFn model_synthesis(const Cdaae<float>& model);

/// Index of the neutral frame of each subject in `corpus` (first all-zero
/// label, else the subject's first row), in subject order.
std::vector<std::size_t> source_frames(const SyntheticCorpus& corpus);

/// Labels used by the identity metric: neutral, each synthetic AU at full
/// intensity alone, and all four together.
std::vector<LabelVector> identity_probe_labels();

struct IdentityTrial {
  std::string subject_id;
  std::size_t label_index = 0;
  std::string predicted_subject;
  bool correct = false;
};

struct IdentityEval {
  double score = 0;  // top-1 accuracy
  double chance = 0;
  std::size_t trials = 0;
  std::vector<IdentityTrial> details;
};

/// For every subject of `heldout` and every probe label, synthesizes from the
/// subject's neutral frame, regresses the identity parameters and retrieves
/// the nearest ground-truth identity among the held-out subjects.
IdentityEval eval_identity(const SynthesisFn& synth, const SyntheticCorpus& heldout, const OracleRegressor& oracle,
                           const std::vector<LabelVector>& labels = identity_probe_labels());

struct Sweep {
  std::string subject_id;
  std::size_t label_slot = 0;
  std::vector<double> regressed;  // oracle estimate of the driven parameter per step
  bool monotone = false;
  double range = 0;  // last minus first
};

struct LabelControlEval {
  double monotone_fraction = 0;
  double range_fraction = 0;  // sweeps whose endpoints differ by more than min_range
  bool degenerate = false;    // every sweep has (near) zero dynamic range
  std::vector<Sweep> sweeps;
};

struct SweepOptions {
  std::size_t steps = 5;
  double tie_tolerance = 0.01;
  double min_range = 0.1;
  double degenerate_range = 1e-3;
};

/// For every held-out subject and every synthetic AU slot, sweeps that label
/// from 0 to 1 (others zero) and regresses the parameter it drives.
LabelControlEval eval_label_control(const SynthesisFn& synth, const SyntheticCorpus& heldout,
                                    const OracleRegressor& oracle, const SweepOptions& options = {});

/// Mean squared error in [-1,1] space between each frame and its
/// synthesis from the subject's neutral frame under the frame's own label.
double eval_reconstruction(const SynthesisFn& synth, const SyntheticCorpus& heldout);

struct EvalReport {
  IdentityEval identity;
  LabelControlEval label_control;
  double reconstruction_mse = 0;

  nlohmann::json to_json(bool details = false) const;
};

EvalReport evaluate(const SynthesisFn& synth, const SyntheticCorpus& heldout, const OracleRegressor& oracle);

/// Pearson correlation; 0 when either side has zero variance.
double pearson(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace cdaae

#include "cdaae/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "cdaae/error.hpp"

namespace cdaae {

namespace {

enum Stream : std::uint64_t { kStepStream = 1, kPairStream = 2, kOrderStream = 3 };

std::string describe(const LossBundle& b) {
  std::ostringstream os;
  os.precision(9);
  os << "l_r=" << b.l_r << " l_e_d=" << b.l_e_d << " l_e_g=" << b.l_e_g << " l_g_d=" << b.l_g_d
     << " l_g_g=" << b.l_g_g << " total_ae=" << b.total_ae;
  return os.str();
}

void clear_grads(ModelParams<float>& params) {
  for (auto* t : params.all()) t->clear_grad();
}

}  // namespace

std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

void discriminator_phase(Cdaae<float>& model, AdamState<float>& optimizer, const Batch& batch,
                         const Tensor<float>& prior, LossBundle& losses) {
  auto& params = model.params();
  clear_grads(params);
  losses.l_e_d = losses.l_g_d = std::numeric_limits<double>::quiet_NaN();
  try {
    Graph<float> g;
    const auto obj = build_discriminator_objective(g, model, batch.source, batch.labels, prior);
    losses.l_e_d = obj.l_e_d.value().item();
    losses.l_g_d = obj.l_g_d.value().item();
    if (!std::isfinite(losses.l_e_d) || !std::isfinite(losses.l_g_d)) throw NumericError("loss is not finite");
    g.backward(obj.total);
  } catch (const NumericError& e) {
    clear_grads(params);
    throw NumericError(std::string("discriminator phase: ") + e.what() + ": " + describe(losses));
  }
  adam_step(std::span<Tensor<float>* const>(params.discriminators()), optimizer);
  clear_grads(params);
}

void autoencoder_phase(Cdaae<float>& model, AdamState<float>& optimizer, const Batch& batch,
                       const LossWeights& weights, LossBundle& losses) {
  auto& params = model.params();
  clear_grads(params);
  losses.l_r = losses.l_e_g = losses.l_g_g = losses.total_ae = std::numeric_limits<double>::quiet_NaN();
  try {
    Graph<float> g;
    const auto obj = build_autoencoder_objective(g, model, batch.source, batch.target, batch.labels, weights);
    losses.l_r = obj.l_r.value().item();
    losses.l_e_g = obj.l_e_g.value().item();
    losses.l_g_g = obj.l_g_g.value().item();
    losses.total_ae = obj.total.value().item();
    if (!losses.all_finite()) throw NumericError("loss is not finite");
    g.backward(obj.total);
  } catch (const NumericError& e) {
    clear_grads(params);
    throw NumericError(std::string("autoencoder phase: ") + e.what() + ": " + describe(losses));
  }
  adam_step(std::span<Tensor<float>* const>(params.autoencoder()), optimizer);
  clear_grads(params);
}

LossBundle train_step(Cdaae<float>& model, Optimizers& optimizers, const Batch& batch, const LossWeights& weights,
                      std::mt19937_64& rng) {
  const std::size_t n = batch.source.dim(0);
  if (n == 0) throw UsageError("train_step: empty batch");
  Tensor<float> prior(Shape{n, kLatentDim});
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& v : prior.storage()) v = static_cast<float>(normal(rng));

  LossBundle out;
  discriminator_phase(model, optimizers.discriminators, batch, prior, out);
  autoencoder_phase(model, optimizers.autoencoder, batch, weights, out);
  return out;
}

std::vector<FacePair> epoch_pairs(const CorpusManifest& manifest, const TrainConfig& config, std::size_t epoch) {
  auto pair_rng = derived_rng(config.seed, kPairStream, epoch);
  auto pairs = sample_pairs(manifest, AuSamplerOptions{config.per_au_cap, config.zero_frames}, pair_rng());
  auto order_rng = derived_rng(config.seed, kOrderStream, epoch);
  std::shuffle(pairs.begin(), pairs.end(), order_rng);
  return pairs;
}

std::size_t steps_per_epoch(std::size_t pair_count, std::size_t batch_size) {
  if (batch_size == 0) throw UsageError("batch_size must be >= 1");
  return (pair_count + batch_size - 1) / batch_size;
}

std::size_t planned_steps(const TrainConfig& config, std::size_t pair_count) {
  const std::size_t total = config.epochs * steps_per_epoch(pair_count, config.batch_size);
  return config.max_steps ? std::min(total, *config.max_steps) : total;
}

CorpusManifest training_manifest(const TrainConfig& config) {
  config.validate();
  CorpusManifest manifest = load_manifest(config.manifest);
  if (manifest.label_mode != config.label_mode) {
    throw ValidationError("manifest label mode '" + std::string(to_string(manifest.label_mode)) +
                          "' does not match config label_mode '" + std::string(to_string(config.label_mode)) + "'");
  }
  if (!config.train_subjects.empty()) {
    const auto present = manifest.subjects();
    const std::set<std::string> known(present.begin(), present.end());
    for (const auto& s : config.train_subjects) {
      if (!known.count(s)) throw ValidationError("train subject '" + s + "' is not in the manifest");
    }
    manifest = manifest.filter_subjects(config.train_subjects);
    manifest.validate();
  }
  return manifest;
}

void write_loss_csv(const std::vector<LossRecord>& history, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << kLossCsvHeader << '\n';
  char line[256];
  for (const auto& r : history) {
    const auto& l = r.losses;
    std::snprintf(line, sizeof line, "%zu,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.step, l.l_r, l.l_e_d, l.l_e_g, l.l_g_d,
                  l.l_g_g, l.total_ae);
    out << line;
  }
}

std::vector<double> smoothed_reconstruction(const std::vector<LossRecord>& history, std::size_t window) {
  if (window == 0) throw UsageError("smoothing window must be >= 1");
  std::vector<double> out(history.size());
  double sum = 0;
  for (std::size_t i = 0; i < history.size(); ++i) {
    sum += history[i].losses.l_r;
    if (i >= window) sum -= history[i - window].losses.l_r;
    out[i] = sum / static_cast<double>(std::min(window, i + 1));
  }
  return out;
}

namespace {

struct Session {
  TrainConfig config;
  CorpusManifest manifest;
  FaceStore store;
  Cdaae<float> model;
  Optimizers optimizers;
  TrainState state;
  std::vector<LossRecord> history;

  Checkpoint snapshot() const {
    return Checkpoint{config, model.params(), optimizers.autoencoder, optimizers.discriminators, state, history};
  }
};

TrainResult run(Checkpoint ck, const ProgressFn& progress) {
  CorpusManifest manifest = training_manifest(ck.config);
  FaceStore store = FaceStore::load(manifest);
  Session s{ck.config,
            std::move(manifest),
            std::move(store),
            Cdaae<float>(std::move(ck.params)),
            Optimizers{std::move(ck.adam_ae), std::move(ck.adam_disc)},
            ck.state,
            std::move(ck.loss_history)};

  const std::filesystem::path out_dir = s.config.output_dir;
  std::filesystem::create_directories(out_dir);
  const LossWeights weights = s.config.loss_weights();

  std::vector<FacePair> pairs = epoch_pairs(s.manifest, s.config, s.state.epoch);
  const std::size_t per_epoch = steps_per_epoch(pairs.size(), s.config.batch_size);
  const std::size_t total = planned_steps(s.config, pairs.size());
  if (pairs.empty() && total > 0) throw ValidationError("the sampler produced no training pairs");

  while (s.state.global_step < total) {
    if (s.state.step_in_epoch == per_epoch) {
      ++s.state.epoch;
      s.state.step_in_epoch = 0;
      pairs = epoch_pairs(s.manifest, s.config, s.state.epoch);
    }
    const std::size_t begin = s.state.step_in_epoch * s.config.batch_size;
    const std::size_t end = std::min(pairs.size(), begin + s.config.batch_size);
    const Batch batch = make_batch(s.store, std::span<const FacePair>(pairs).subspan(begin, end - begin),
                                   s.config.label_mode);
    auto rng = derived_rng(s.config.seed, kStepStream, s.state.global_step);
    LossBundle losses;
    try {
      losses = train_step(s.model, s.optimizers, batch, weights, rng);
    } catch (const NumericError& e) {
      throw NumericError("step " + std::to_string(s.state.global_step + 1) + ": " + e.what());
    }
    ++s.state.global_step;
    ++s.state.step_in_epoch;
    s.history.push_back(LossRecord{s.state.global_step, losses});
    if (progress) progress(s.history.back());
    if (s.state.step_in_epoch == per_epoch) save_checkpoint(s.snapshot(), out_dir / "checkpoint_latest.cdae");
  }

  TrainResult result{s.snapshot(), out_dir / "checkpoint_final.cdae"};
  save_checkpoint(result.checkpoint, result.final_checkpoint);
  write_loss_csv(s.history, out_dir / "losses.csv");
  return result;
}

}  // namespace

TrainResult train(const TrainConfig& config, const ProgressFn& progress) {
  config.validate();
  return run(initial_checkpoint(config), progress);
}

TrainResult resume(Checkpoint checkpoint, const ProgressFn& progress) { return run(std::move(checkpoint), progress); }

TrainResult resume(const std::filesystem::path& checkpoint_path, const ProgressFn& progress) {
  return run(load_checkpoint(checkpoint_path), progress);
}

}  // namespace cdaae

// Acceptance run: one PASS/FAIL line per primary criterion.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "cdaae/ablation.hpp"
#include "cdaae/ops.hpp"
#include "cdaae/synthetic.hpp"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"

using namespace cdaae;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    notes.push_back(std::string(ok ? "" : "[fail] ") + what);
  }
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

std::vector<std::uint8_t> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- op oracles -----------------------------------------------------------

struct ConvCase {
  std::size_t n, c, h, w, f, kh, kw, stride, pad;
};

ConvCase random_conv_case(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> small(1, 3), size(3, 9), kernel(1, 5), stride(1, 3), pad(0, 2);
  for (;;) {
    ConvCase c{small(rng), small(rng), size(rng), size(rng), small(rng) + 1, kernel(rng), kernel(rng), stride(rng),
               pad(rng)};
    if (c.h + 2 * c.pad >= c.kh && c.w + 2 * c.pad >= c.kw && c.pad < c.kh && c.pad < c.kw) return c;
  }
}

template <typename T>
double op_oracle_error(std::mt19937_64& rng, std::size_t shapes) {
  double worst = 0;
  auto track = [&](double e) { worst = std::max(worst, e); };
  for (std::size_t i = 0; i < shapes; ++i) {
    const ConvCase c = random_conv_case(rng);
    const auto x = oracle::random_tensor<T>({c.n, c.c, c.h, c.w}, rng);
    const auto k = oracle::random_tensor<T>({c.f, c.c, c.kh, c.kw}, rng);
    const auto b = oracle::random_tensor<T>({c.f}, rng);
    {
      Graph<T> g;
      track(oracle::max_abs_diff(conv2d(g.constant_ref(x), g.constant_ref(k), g.constant_ref(b), c.stride, c.pad).value(),
                                 oracle::conv2d(x, k, b, c.stride, c.pad)));
    }
    const auto kt = oracle::random_tensor<T>({c.c, c.f, c.kh, c.kw}, rng);
    std::size_t pad = std::min({c.pad, c.kh - 1, c.kw - 1});
    while (pad > 0 && ((c.h - 1) * c.stride + c.kh <= 2 * pad || (c.w - 1) * c.stride + c.kw <= 2 * pad)) --pad;
    {
      Graph<T> g;
      track(oracle::max_abs_diff(
          conv2d_transpose(g.constant_ref(x), g.constant_ref(kt), g.constant_ref(b), c.stride, pad).value(),
          oracle::conv2d_transpose(x, kt, b, c.stride, pad)));
    }
    std::uniform_int_distribution<std::size_t> dim(1, 40);
    const std::size_t n = dim(rng), d = dim(rng), kk = dim(rng);
    const auto xd = oracle::random_tensor<T>({n, d}, rng);
    const auto w = oracle::random_tensor<T>({d, kk}, rng);
    const auto bd = oracle::random_tensor<T>({kk}, rng);
    {
      Graph<T> g;
      track(oracle::max_abs_diff(dense(g.constant_ref(xd), g.constant_ref(w), g.constant_ref(bd)).value(),
                                 oracle::dense(xd, w, bd)));
    }
    const auto a = oracle::random_tensor<T>({n, kk}, rng);
    const auto a2 = oracle::random_tensor<T>({n, kk}, rng);
    const auto p = oracle::random_tensor<T>({n * kk}, rng, 0.0, 1.0);
    Tensor<T> t(Shape{n * kk});
    for (auto& v : t.storage()) v = static_cast<T>(rng() % 2);
    {
      Graph<T> g;
      track(std::abs(static_cast<double>(mse_loss(g.constant_ref(a), g.constant_ref(a2)).value().item()) -
                     oracle::mse(a, a2)));
      track(std::abs(static_cast<double>(bce_loss(g.constant_ref(p), g.constant_ref(t)).value().item()) -
                     oracle::bce(p, t)));
    }
  }
  return worst;
}

Outcome op_oracles() {
  Outcome o;
  std::mt19937_64 rng(101);
  const std::size_t shapes = 25;
  const double e32 = op_oracle_error<float>(rng, shapes);
  const double e64 = op_oracle_error<double>(rng, shapes);
  o.require(e32 < 1e-5, "32-bit max abs error " + fmt(e32) + " over " + std::to_string(shapes) + " shapes");
  o.require(e64 < 1e-10, "64-bit max abs error " + fmt(e64) + " over " + std::to_string(shapes) + " shapes");
  return o;
}

// ---- gradients ------------------------------------------------------------

Outcome gradient_suite() {
  Outcome o;
  std::mt19937_64 rng(202);
  double worst = 0;
  std::size_t checked = 0;
  auto account = [&](const oracle::GradCheck& r) {
    worst = std::max(worst, r.max_rel_error);
    checked += r.checked;
  };
  for (int trial = 0; trial < 10; ++trial) {
    const ConvCase c = random_conv_case(rng);
    auto x = oracle::random_tensor<double>({c.n, c.c, c.h, c.w}, rng);
    auto k = oracle::random_tensor<double>({c.f, c.c, c.kh, c.kw}, rng);
    auto b = oracle::random_tensor<double>({c.f}, rng);
    for (auto* t : {&x, &k, &b}) t->set_requires_grad(true);
    Tensor<double> r;
    account(oracle::check_gradients(
        [&](Graph<double>& g) {
          auto y = conv2d(g.parameter(x), g.parameter(k), g.parameter(b), c.stride, c.pad);
          if (r.shape() != y.shape()) r = oracle::random_tensor<double>(y.shape(), rng);
          return mse_loss(y, g.constant_ref(r));
        },
        {&x, &k, &b}));

    std::uniform_int_distribution<std::size_t> small(1, 3), size(1, 5), kernel(2, 4), stride(1, 2);
    const std::size_t n = small(rng), ch = small(rng), h = size(rng), w = size(rng), f = small(rng);
    const std::size_t kh = kernel(rng), kw = kernel(rng), s = stride(rng);
    auto xt = oracle::random_tensor<double>({n, ch, h, w}, rng);
    auto kt = oracle::random_tensor<double>({ch, f, kh, kw}, rng);
    auto bt = oracle::random_tensor<double>({f}, rng);
    for (auto* t : {&xt, &kt, &bt}) t->set_requires_grad(true);
    Tensor<double> rt;
    account(oracle::check_gradients(
        [&](Graph<double>& g) {
          auto y = conv2d_transpose(g.parameter(xt), g.parameter(kt), g.parameter(bt), s, 0);
          if (rt.shape() != y.shape()) rt = oracle::random_tensor<double>(y.shape(), rng);
          return mse_loss(y, g.constant_ref(rt));
        },
        {&xt, &kt, &bt}));

    std::uniform_int_distribution<std::size_t> dim(1, 6);
    const std::size_t nn = dim(rng), d = dim(rng), e = dim(rng), kk = dim(rng);
    auto xd = oracle::random_tensor<double>({nn, d}, rng, -2.0, 2.0);
    auto extra = oracle::random_tensor<double>({nn, e}, rng);
    auto wd = oracle::random_tensor<double>({d + e, kk}, rng);
    auto bd = oracle::random_tensor<double>({kk}, rng);
    auto t_mse = oracle::random_tensor<double>({nn, kk}, rng);
    Tensor<double> t_bce(Shape{nn * kk});
    for (auto& v : t_bce.storage()) v = static_cast<double>(rng() % 2);
    for (auto* t : {&xd, &extra, &wd, &bd}) t->set_requires_grad(true);
    account(oracle::check_gradients(
        [&](Graph<double>& g) {
          auto hd = dense(concat_features(g.parameter(xd), g.parameter(extra)), g.parameter(wd), g.parameter(bd));
          auto l1 = mse_loss(tanh(leaky_relu(hd)), g.constant_ref(t_mse));
          auto l2 = bce_loss(reshape(sigmoid(scale(hd, 1.5)), Shape{nn * kk}), g.constant_ref(t_bce));
          return add(l1, scale(l2, 0.5));
        },
        {&xd, &extra, &wd, &bd}));
  }
  o.require(worst < 1e-4, "op-level max relative error " + fmt(worst) + " over " + std::to_string(checked) +
                              " coordinates");

  double model_worst = 0;
  std::size_t model_checked = 0;
  for (auto [pos, mode] : {std::pair{SkipPosition::P2, LabelMode::AU}, std::pair{SkipPosition::None, LabelMode::Emotion},
                           std::pair{SkipPosition::P1, LabelMode::AU}, std::pair{SkipPosition::P3, LabelMode::AU}}) {
    auto model = Cdaae<double>::create(pos, mode, 303);
    std::mt19937_64 mr(303);
    const auto x = oracle::random_tensor<double>({2, 3, 32, 32}, mr);
    const auto t = oracle::random_tensor<double>({2, 3, 32, 32}, mr);
    const auto l = oracle::random_tensor<double>({2, label_dim(mode)}, mr, 0.0, 1.0);
    const auto prior = oracle::random_tensor<double>({2, kLatentDim}, mr);
    const LossWeights w{1.0, 0.5, 0.5};
    const auto ae = oracle::check_gradients(
        [&](Graph<double>& g) { return build_autoencoder_objective(g, model, x, t, l, w).total; },
        model.params().autoencoder(), 1e-4, 1e-6, 4);
    const auto disc = oracle::check_gradients(
        [&](Graph<double>& g) { return build_discriminator_objective(g, model, x, l, prior).total; },
        model.params().discriminators(), 1e-4, 1e-6, 4);
    model_worst = std::max({model_worst, ae.max_rel_error, disc.max_rel_error});
    model_checked += ae.checked + disc.checked;
  }
  o.require(model_worst < 1e-4 && model_checked > 0, "composed model losses max relative error " +
                                                        fmt(model_worst) + " over " + std::to_string(model_checked) +
                                                        " coordinates (4 skip/label configurations)");
  return o;
}

// ---- architecture ---------------------------------------------------------

Outcome architecture() {
  Outcome o;
  std::mt19937_64 rng(404);
  bool z_ok = true, bitwise = true, diff_range = true;
  for (auto pos : kAblationPositions) {
    for (auto mode : {LabelMode::AU, LabelMode::Emotion}) {
      const auto model = Cdaae<float>::create(pos, mode, 404);
      const auto x = oracle::random_tensor<float>({3, 3, 32, 32}, rng);
      const auto l = oracle::random_tensor<float>({3, label_dim(mode)}, rng, 0.0, 1.0);
      const auto f = model.encode_stage1(x);
      const auto z = model.encode_stage2(f);
      z_ok = z_ok && z.shape() == Shape{3, kLatentDim};
      const auto d = model.decode_difference(z, l);
      for (float v : d.storage()) diff_range = diff_range && v > -1.0f && v < 1.0f;
      // Large latents push the tanh head toward saturation.
      auto big = z;
      for (auto& v : big.storage()) v *= 1e4f;
      const auto saturated = model.decode_difference(big, l);
      for (float v : saturated.storage()) diff_range = diff_range && v > -1.0f && v < 1.0f;
      const auto manual = model.has_junction() ? model.decode_stage2(oracle::add_tensors(f, d)) : model.decode_stage2(d);
      bitwise = bitwise && model.synthesize(x, l) == manual;
    }
  }
  o.require(z_ok, "z has 100 entries for every skip position and label mode");
  const auto au = Cdaae<float>::create(SkipPosition::P2, LabelMode::AU, 1);
  const auto em = Cdaae<float>::create(SkipPosition::P2, LabelMode::Emotion, 1);
  o.require(au.generator_input_dim() == 112 && em.generator_input_dim() == 108,
            "G1 input length " + std::to_string(au.generator_input_dim()) + " (AU) / " +
                std::to_string(em.generator_input_dim()) + " (emotion)");
  o.require(bitwise, "synthesize equals G2(E1(x) + G1(E2(E1(x)), l)) bitwise");
  o.require(diff_range, "difference-layer outputs strictly inside (-1,1), including saturated inputs");

  const auto none = Cdaae<float>::create(SkipPosition::None, LabelMode::AU, 2);
  Graph<float> g;
  const auto x = oracle::random_tensor<float>({1, 3, 32, 32}, rng);
  const auto l = oracle::random_tensor<float>({1, 12}, rng, 0.0, 1.0);
  const auto pass = none.forward(g, g.constant_ref(x), g.constant_ref(l));
  bool no_add = pass.output.id == pass.difference.id && !none.has_junction();
  for (std::size_t id = 0; id < g.size(); ++id) no_add = no_add && g.op(id) != "add";
  o.require(no_add, "None path records no additive junction");
  return o;
}

// ---- schedule -------------------------------------------------------------

std::vector<Tensor<float>> snapshot(const std::vector<Tensor<float>*>& ts) {
  std::vector<Tensor<float>> out;
  for (auto* t : ts) out.push_back(*t);
  return out;
}

std::size_t count_changed(const std::vector<Tensor<float>*>& now, const std::vector<Tensor<float>>& before) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < now.size(); ++i) n += !(*now[i] == before[i]);
  return n;
}

Outcome schedule(const fs::path& work) {
  Outcome o;
  const auto corpus = make_synthetic_corpus(3, 4, 5);
  const auto store = FaceStore::from_images(corpus.images);
  const auto pairs = sample_pairs(corpus.manifest, AuSamplerOptions{}, 5);
  const auto batch = make_batch(store, std::span(pairs).first(4), LabelMode::AU);

  bool freeze_ok = true, simultaneous = true;
  for (auto pos : kAblationPositions) {
    auto model = Cdaae<float>::create(pos, LabelMode::AU, 5);
    Optimizers opt{AdamState<float>::create(model.params().autoencoder(), AdamConfig{1e-3}),
                   AdamState<float>::create(model.params().discriminators(), AdamConfig{1e-4})};
    std::mt19937_64 rng(5);
    std::normal_distribution<float> normal;
    Tensor<float> prior(Shape{4, kLatentDim});
    for (auto& v : prior.storage()) v = normal(rng);

    auto ae0 = snapshot(model.params().autoencoder());
    auto d0 = snapshot(model.params().discriminators());
    LossBundle losses;
    discriminator_phase(model, opt.discriminators, batch, prior, losses);
    freeze_ok = freeze_ok && count_changed(model.params().autoencoder(), ae0) == 0;
    // Both discriminators move in the same optimizer step.
    const std::size_t d_tensors = d0.size();
    simultaneous = simultaneous && count_changed(model.params().discriminators(), d0) == d_tensors &&
                   opt.discriminators.step == 1;

    ae0 = snapshot(model.params().autoencoder());
    d0 = snapshot(model.params().discriminators());
    autoencoder_phase(model, opt.autoencoder, batch, LossWeights{}, losses);
    freeze_ok = freeze_ok && count_changed(model.params().discriminators(), d0) == 0 &&
                count_changed(model.params().autoencoder(), ae0) == ae0.size();
  }
  o.require(freeze_ok, "phase 1 leaves E/G bitwise unchanged, phase 2 leaves D_E/D_G unchanged (4 positions)");
  o.require(simultaneous, "D_E and D_G tensors all update in one joint step");

  const TrainConfig defaults;
  o.require(defaults.alpha == 1.0 && defaults.beta1 == 1e-2 && defaults.beta2 == 1e-3 && defaults.batch_size == 32 &&
                defaults.lr_ae == 1e-3 && defaults.lr_disc == 1e-4,
            "defaults alpha=1 beta1=1e-2 beta2=1e-3 batch 32 lr 1e-3/1e-4");
  {
    std::ofstream out(work / "schedule.json");
    out << R"({"alpha": 1, "beta1": 0.01, "beta2": 0.001, "batch_size": 32, "lr_ae": 0.001, "lr_disc": 0.0001,
               "manifest": "m.csv", "output_dir": "o"})";
  }
  const auto loaded = load_config(work / "schedule.json");
  o.require(loaded.alpha == 1.0 && loaded.beta1 == 1e-2 && loaded.beta2 == 1e-3 && loaded.batch_size == 32 &&
                loaded.lr_ae == 1e-3 && loaded.lr_disc == 1e-4,
            "config file values load verbatim");
  return o;
}

// ---- pairing --------------------------------------------------------------

CorpusManifest emotion_grid(std::size_t subjects, std::size_t gazes) {
  CorpusManifest m;
  m.label_mode = LabelMode::Emotion;
  for (std::size_t s = 0; s < subjects; ++s)
    for (std::size_t g = 0; g < gazes; ++g)
      for (std::size_t e = 0; e < kEmotionCount; ++e) {
        m.rows.push_back({"s" + std::to_string(s) + "_g" + std::to_string(g) + "_e" + std::to_string(e) + ".png",
                          "s" + std::to_string(s), "g" + std::to_string(g), LabelVector::one_hot(e)});
      }
  return m;
}

Outcome pairing() {
  Outcome o;
  const auto big = sample_pairs_emotion(emotion_grid(50, 3), 1).size();
  o.require(big == 9600, "emotion sampler on 50x3x8: " + std::to_string(big) + " pairs");
  const auto small = sample_pairs_emotion(emotion_grid(1, 1), 1).size();
  o.require(small == 64, "emotion sampler on 1x1x8: " + std::to_string(small) + " pairs");

  CorpusManifest m;
  std::size_t i = 0;
  for (std::size_t au = 0; au < kActionUnitCount; ++au) {
    for (std::size_t k = 0; k < 2500; ++k, ++i) {
      LabelVector l = LabelVector::zeros(LabelMode::AU);
      l[au] = 0.2 * static_cast<double>(k % 5) + 0.1;
      m.rows.push_back({"f" + std::to_string(i) + ".png", "s" + std::to_string(i % 30), "", l});
    }
  }
  for (std::size_t k = 0; k < 2000; ++k, ++i) {
    m.rows.push_back({"f" + std::to_string(i) + ".png", "s" + std::to_string(i % 30), "",
                      LabelVector::zeros(LabelMode::AU)});
  }
  const auto s = sample_pairs_au(m, AuSamplerOptions{}, 3);
  bool caps = s.selected_zero == 1000;
  for (auto n : s.selected_per_au) caps = caps && n == 2000;
  o.require(caps, "AU sampler fills 2000 per AU and 1000 neutral frames (" + std::to_string(s.pairs.size()) +
                      " pairs)");
  AuSamplerOptions tight{300, 50};
  const auto t = sample_pairs_au(m, tight, 4);
  bool respected = t.selected_zero <= 50;
  for (auto n : t.selected_per_au) respected = respected && n <= 300;
  o.require(respected, "AU sampler never exceeds smaller caps");
  return o;
}

// ---- desk-scale training --------------------------------------------------

struct Runs {
  TrainConfig config;
  TrainResult p2;
  std::vector<std::uint8_t> p2_bytes;
  std::vector<std::uint8_t> repeat_bytes;
  double p2_seconds = 0;
  std::optional<TrainResult> none;
  SyntheticCorpus heldout;
  std::optional<OracleRegressor> oracle;
};

constexpr std::size_t kSmokeSteps = 2000;

TrainConfig smoke_config(const fs::path& work) {
  const auto corpus = make_synthetic_corpus(10, 9, 1, "t");
  write_synthetic_corpus(corpus, work / "train");
  TrainConfig cfg;
  cfg.manifest = (work / "train" / "manifest.csv").string();
  cfg.output_dir = (work / "p2").string();
  cfg.epochs = 1000000;
  cfg.max_steps = kSmokeSteps;
  return cfg;
}

void progress(const char* tag, const LossRecord& rec) {
  if (rec.step % 250 == 0) {
    std::fprintf(stderr, "  [%s] step %zu l_r %.5f\n", tag, rec.step, rec.losses.l_r);
  }
}

Outcome training_smoke(Runs& runs) {
  Outcome o;
  const auto& h = runs.p2.checkpoint.loss_history;
  bool finite = h.size() == kSmokeSteps;
  for (const auto& r : h) finite = finite && r.losses.all_finite();
  o.require(finite, std::to_string(h.size()) + " recorded steps, every loss finite");
  const auto s = smoothed_reconstruction(h);
  if (s.size() >= 100) {
    const double drop = 1.0 - s.back() / s[99];
    o.require(drop >= 0.5, "smoothed L_R " + fmt(s[99]) + " at step 100 -> " + fmt(s.back()) + " at step " +
                               std::to_string(s.size()) + " (" + fmt(100 * drop, 3) + "% drop)");
  } else {
    o.require(false, "fewer than 100 steps recorded");
  }
  o.require(runs.repeat_bytes == runs.p2_bytes,
            "repeat run checkpoint " + std::string(runs.repeat_bytes == runs.p2_bytes ? "bitwise equal" : "differs"));
  o.notes.push_back("2000-step run took " + fmt(runs.p2_seconds, 4) + " s");
  return o;
}

Outcome identity(Runs& runs) {
  Outcome o;
  const Cdaae<float> trained(runs.p2.checkpoint.params);
  const auto p2 = eval_identity(model_synthesis(trained), runs.heldout, *runs.oracle);
  o.require(p2.score >= 0.8, "trained P2 identity " + fmt(p2.score) + " over " + std::to_string(p2.trials) +
                                 " trials (bar 0.8)");

  const auto untrained = Cdaae<float>(initial_checkpoint(runs.config).params);
  const auto ctl = eval_identity(model_synthesis(untrained), runs.heldout, *runs.oracle);
  // Chance plus three binomial standard deviations.
  const double bar = ctl.chance + 3 * std::sqrt(ctl.chance * (1 - ctl.chance) / static_cast<double>(ctl.trials));
  o.require(ctl.score <= bar, "untrained control identity " + fmt(ctl.score) + " (chance " + fmt(ctl.chance) +
                                  ", bar " + fmt(bar) + ")");

  const Cdaae<float> none(runs.none->checkpoint.params);
  const auto nr = eval_identity(model_synthesis(none), runs.heldout, *runs.oracle);
  o.require(p2.score >= nr.score, "P2 " + fmt(p2.score) + " vs None " + fmt(nr.score) + " on the same budget");
  return o;
}

Outcome label_control(Runs& runs) {
  Outcome o;
  const Cdaae<float> trained(runs.p2.checkpoint.params);
  const auto r = eval_label_control(model_synthesis(trained), runs.heldout, *runs.oracle);
  o.require(r.monotone_fraction >= 0.8, "monotone sweeps " + fmt(r.monotone_fraction) + " of " +
                                            std::to_string(r.sweeps.size()) + " (bar 0.8)");
  o.require(r.range_fraction >= 0.5, "endpoint range > 0.1 on " + fmt(r.range_fraction) + " of sweeps (bar 0.5)");
  o.require(!r.degenerate, "not degenerate");
  return o;
}

Outcome checkpoint_round_trip(Runs& runs, const fs::path& work) {
  Outcome o;
  const auto& ck = runs.p2.checkpoint;
  save_checkpoint(ck, work / "rt.cdae");
  const auto back = load_checkpoint(work / "rt.cdae");
  const Cdaae<float> a(ck.params), b(back.params);
  std::mt19937_64 rng(9);
  const auto x = oracle::random_tensor<float>({4, 3, 32, 32}, rng);
  const auto l = oracle::random_tensor<float>({4, 12}, rng, 0.0, 1.0);
  o.require(a.synthesize(x, l) == b.synthesize(x, l), "save -> load -> forward is bitwise identical");
  o.require(serialize_checkpoint(back) == read_bytes(work / "rt.cdae"), "reserialized bytes equal the file");
  o.require(runs.repeat_bytes == runs.p2_bytes && !runs.p2_bytes.empty(),
            "two runs under a fixed seed write byte-identical checkpoints (sha256 " +
                sha256_hex(runs.p2_bytes).substr(0, 16) + "...)");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string work_arg, report_path;
  std::vector<std::string> only;
  app.add_option("--work-dir", work_arg, "Keep run artifacts here instead of a temporary directory");
  app.add_option("--report", report_path, "Write a JSON summary");
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  std::optional<test::TempDir> tmp;
  fs::path work;
  if (work_arg.empty()) {
    tmp.emplace();
    work = tmp->path();
  } else {
    work = work_arg;
    fs::create_directories(work);
  }

  const std::set<std::string> selected(only.begin(), only.end());
  auto wanted = [&](const std::string& key) { return selected.empty() || selected.count(key) > 0; };
  const std::set<std::string> needs_training{"training_smoke", "identity", "label_control", "checkpoint"};
  bool train_needed = false;
  for (const auto& k : needs_training) train_needed = train_needed || wanted(k);

  std::optional<Runs> runs;
  std::string training_error;
  if (train_needed) {
    try {
      runs.emplace();
      runs->config = smoke_config(work);
      std::fprintf(stderr, "training P2 (%zu steps)\n", kSmokeSteps);
      auto t0 = std::chrono::steady_clock::now();
      runs->p2 = train(runs->config, [](const LossRecord& r) { progress("p2", r); });
      runs->p2_seconds = seconds_since(t0);
      runs->p2_bytes = read_bytes(runs->p2.final_checkpoint);
      std::fprintf(stderr, "repeating P2 into the same directory\n");
      runs->repeat_bytes = read_bytes(train(runs->config, [](const LossRecord& r) { progress("repeat", r); })
                                          .final_checkpoint);
      if (wanted("identity")) {
        auto none_cfg = runs->config;
        none_cfg.skip_position = SkipPosition::None;
        none_cfg.output_dir = (work / "none").string();
        std::fprintf(stderr, "training None (%zu steps)\n", kSmokeSteps);
        runs->none = train(none_cfg, [](const LossRecord& r) { progress("none", r); });
      }
      if (wanted("identity") || wanted("label_control")) {
        runs->heldout = make_synthetic_corpus(10, 9, 2, "h");
        runs->oracle = OracleRegressor::fit();
      }
    } catch (const std::exception& e) {
      training_error = e.what();
      runs.reset();
    }
  }

  struct Criterion {
    std::string key;
    std::string title;
    std::function<Outcome()> run;
  };
  auto with_runs = [&](std::function<Outcome(Runs&)> f) {
    return [&, f]() {
      if (!runs) {
        Outcome o;
        o.require(false, "training failed: " + training_error);
        return o;
      }
      return f(*runs);
    };
  };
  const std::vector<Criterion> criteria{
      {"op_oracles", "Op oracle equivalence", op_oracles},
      {"gradients", "Gradient suite", gradient_suite},
      {"architecture", "Architecture conformance", architecture},
      {"schedule", "Schedule conformance", [&] { return schedule(work); }},
      {"pairing", "Pairing counts", pairing},
      {"training_smoke", "Training smoke", with_runs(training_smoke)},
      {"identity", "Identity preservation", with_runs(identity)},
      {"label_control", "Label control", with_runs(label_control)},
      {"checkpoint", "Checkpoint round trip", with_runs([&](Runs& r) { return checkpoint_round_trip(r, work); })},
  };

  nlohmann::json report = nlohmann::json::array();
  bool all = true;
  for (const auto& c : criteria) {
    if (!wanted(c.key)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.require(false, std::string("threw: ") + e.what());
    }
    const double secs = seconds_since(t0);
    all = all && o.pass;
    std::string detail;
    for (std::size_t i = 0; i < o.notes.size(); ++i) detail += (i ? "; " : "") + o.notes[i];
    std::cout << (o.pass ? "PASS " : "FAIL ") << c.title << " (" << fmt(secs, 3) << " s): " << detail << std::endl;
    report.push_back({{"criterion", c.key}, {"pass", o.pass}, {"notes", o.notes}, {"seconds", secs}});
  }
  if (!report_path.empty()) {
    std::ofstream out(report_path);
    out << report.dump(2) << '\n';
  }
  return all ? 0 : 1;
}

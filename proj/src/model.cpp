#include "cdaae/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>

#include "cdaae/ops.hpp"

namespace cdaae {

std::string_view to_string(SkipPosition skip) {
  switch (skip) {
    case SkipPosition::None: return "none";
    case SkipPosition::P1: return "p1";
    case SkipPosition::P2: return "p2";
    case SkipPosition::P3: return "p3";
  }
  return "none";
}

SkipPosition parse_skip_position(std::string_view text) {
  std::string t(text);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "none" || t == "caae") return SkipPosition::None;
  if (t == "p1" || t == "n1") return SkipPosition::P1;
  if (t == "p2" || t == "n2") return SkipPosition::P2;
  if (t == "p3" || t == "n3") return SkipPosition::P3;
  throw ValidationError("unknown skip position '" + std::string(text) + "'");
}

std::size_t skip_depth(SkipPosition skip) { return static_cast<std::size_t>(skip); }

namespace {

template <typename T>
void glorot_fill(Tensor<T>& w, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& v : w.data()) v = static_cast<T>(dist(rng));
}

template <typename T>
Layer<T> make_layer(Shape weight_shape, std::size_t bias_size) {
  Layer<T> l{Tensor<T>(std::move(weight_shape)), Tensor<T>(Shape{bias_size})};
  l.weight.set_requires_grad(true);
  l.bias.set_requires_grad(true);
  return l;
}

template <typename T, typename U>
Layer<U> cast_layer(const Layer<T>& l) {
  Layer<U> out{l.weight.template cast<U>(), l.bias.template cast<U>()};
  out.weight.set_requires_grad(l.weight.requires_grad());
  out.bias.set_requires_grad(l.bias.requires_grad());
  return out;
}

template <typename T>
void push_layer(std::vector<NamedTensor<T>>& out, const std::string& prefix, Layer<T>& l) {
  out.push_back({prefix + ".weight", &l.weight});
  out.push_back({prefix + ".bias", &l.bias});
}

}  // namespace

template <typename T>
ModelParams<T> ModelParams<T>::initialize(SkipPosition skip, LabelMode mode, std::uint64_t seed) {
  ModelParams p;
  p.skip = skip;
  p.label_mode = mode;
  const std::size_t ek = kEncoderKernel * kEncoderKernel;
  const std::size_t dk = kDecoderKernel * kDecoderKernel;
  for (std::size_t i = 0; i < 4; ++i) {
    p.encoder_convs[i] = make_layer<T>(
        {kEncoderChannels[i + 1], kEncoderChannels[i], kEncoderKernel, kEncoderKernel}, kEncoderChannels[i + 1]);
    p.decoder_deconvs[i] = make_layer<T>(
        {kDecoderChannels[i], kDecoderChannels[i + 1], kDecoderKernel, kDecoderKernel}, kDecoderChannels[i + 1]);
  }
  const std::size_t flat = kEncoderChannels[4] * kBottleneckSize * kBottleneckSize;
  p.encoder_fc = make_layer<T>({flat, kLatentDim}, kLatentDim);
  p.decoder_fc = make_layer<T>({kLatentDim + cdaae::label_dim(mode), flat}, flat);
  for (std::size_t i = 0; i < 3; ++i) {
    p.latent_disc[i] = make_layer<T>({kLatentDiscriminatorWidths[i], kLatentDiscriminatorWidths[i + 1]},
                                     kLatentDiscriminatorWidths[i + 1]);
    p.image_disc_convs[i] = make_layer<T>({kImageDiscriminatorChannels[i + 1], kImageDiscriminatorChannels[i],
                                           kEncoderKernel, kEncoderKernel},
                                          kImageDiscriminatorChannels[i + 1]);
  }
  const std::size_t disc_flat = kImageDiscriminatorChannels[3] * (kImageSize / 8) * (kImageSize / 8);
  p.image_disc_fc = make_layer<T>({disc_flat, 1}, 1);

  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < 4; ++i) {
    glorot_fill(p.encoder_convs[i].weight, kEncoderChannels[i] * ek, kEncoderChannels[i + 1] * ek, rng);
  }
  glorot_fill(p.encoder_fc.weight, flat, kLatentDim, rng);
  glorot_fill(p.decoder_fc.weight, kLatentDim + cdaae::label_dim(mode), flat, rng);
  for (std::size_t i = 0; i < 4; ++i) {
    glorot_fill(p.decoder_deconvs[i].weight, kDecoderChannels[i] * dk, kDecoderChannels[i + 1] * dk, rng);
  }
  for (std::size_t i = 0; i < 3; ++i) {
    glorot_fill(p.latent_disc[i].weight, kLatentDiscriminatorWidths[i], kLatentDiscriminatorWidths[i + 1], rng);
  }
  for (std::size_t i = 0; i < 3; ++i) {
    glorot_fill(p.image_disc_convs[i].weight, kImageDiscriminatorChannels[i] * ek,
                kImageDiscriminatorChannels[i + 1] * ek, rng);
  }
  glorot_fill(p.image_disc_fc.weight, disc_flat, 1, rng);
  return p;
}

template <typename T>
std::vector<NamedTensor<T>> ModelParams<T>::named() {
  std::vector<NamedTensor<T>> out;
  for (std::size_t i = 0; i < 4; ++i) push_layer(out, "encoder.conv" + std::to_string(i + 1), encoder_convs[i]);
  push_layer(out, "encoder.fc", encoder_fc);
  push_layer(out, "decoder.fc", decoder_fc);
  for (std::size_t i = 0; i < 4; ++i) push_layer(out, "decoder.deconv" + std::to_string(i + 1), decoder_deconvs[i]);
  for (std::size_t i = 0; i < 3; ++i) push_layer(out, "latent_disc.fc" + std::to_string(i + 1), latent_disc[i]);
  for (std::size_t i = 0; i < 3; ++i) push_layer(out, "image_disc.conv" + std::to_string(i + 1), image_disc_convs[i]);
  push_layer(out, "image_disc.fc", image_disc_fc);
  return out;
}

template <typename T>
std::vector<Tensor<T>*> ModelParams<T>::autoencoder() {
  std::vector<Tensor<T>*> out;
  for (auto& nt : named()) {
    if (nt.name.starts_with("encoder.") || nt.name.starts_with("decoder.")) out.push_back(nt.tensor);
  }
  return out;
}

template <typename T>
std::vector<Tensor<T>*> ModelParams<T>::discriminators() {
  std::vector<Tensor<T>*> out;
  for (auto& nt : named()) {
    if (nt.name.starts_with("latent_disc.") || nt.name.starts_with("image_disc.")) out.push_back(nt.tensor);
  }
  return out;
}

template <typename T>
std::vector<Tensor<T>*> ModelParams<T>::all() {
  std::vector<Tensor<T>*> out;
  for (auto& nt : named()) out.push_back(nt.tensor);
  return out;
}

template <typename T>
std::size_t ModelParams<T>::parameter_count() {
  std::size_t n = 0;
  for (auto* t : all()) n += t->numel();
  return n;
}

template <typename T>
template <typename U>
ModelParams<U> ModelParams<T>::cast() const {
  ModelParams<U> out;
  out.skip = skip;
  out.label_mode = label_mode;
  for (std::size_t i = 0; i < 4; ++i) {
    out.encoder_convs[i] = cast_layer<T, U>(encoder_convs[i]);
    out.decoder_deconvs[i] = cast_layer<T, U>(decoder_deconvs[i]);
  }
  out.encoder_fc = cast_layer<T, U>(encoder_fc);
  out.decoder_fc = cast_layer<T, U>(decoder_fc);
  for (std::size_t i = 0; i < 3; ++i) {
    out.latent_disc[i] = cast_layer<T, U>(latent_disc[i]);
    out.image_disc_convs[i] = cast_layer<T, U>(image_disc_convs[i]);
  }
  out.image_disc_fc = cast_layer<T, U>(image_disc_fc);
  return out;
}

template <typename T>
Cdaae<T>::Cdaae(ModelParams<T> params) : params_(std::move(params)) {}

template <typename T>
Cdaae<T> Cdaae<T>::create(SkipPosition skip, LabelMode mode, std::uint64_t seed) {
  return Cdaae(ModelParams<T>::initialize(skip, mode, seed));
}

template <typename T>
Shape Cdaae<T>::stage1_feature_shape(std::size_t batch) const {
  const std::size_t depth = skip_depth(params_.skip);
  const std::size_t res = kImageSize >> depth;
  return {batch, kEncoderChannels[depth], res, res};
}

template <typename T>
Var<T> Cdaae<T>::bind(Graph<T>& g, const Tensor<T>& t, bool tracked) const {
  // Tracking needs a gradient sink on the parameter; the model is only
  // mutated through that sink.
  if (tracked) return g.parameter(const_cast<Tensor<T>&>(t));
  return g.constant_ref(t);
}

template <typename T>
void Cdaae<T>::check_image(const Var<T>& image) const {
  const auto& s = image.shape();
  if (s.size() != 4 || s[1] != kImageChannels || s[2] != kImageSize || s[3] != kImageSize) {
    throw DimensionError("expected image batch [N,3,32,32], got " + shape_to_string(s));
  }
}

namespace {

bool tracks_autoencoder(Track t) { return t == Track::Autoencoder || t == Track::All; }
bool tracks_discriminators(Track t) { return t == Track::Discriminators || t == Track::All; }

}  // namespace

template <typename T>
Var<T> Cdaae<T>::encode_stage1(Graph<T>& g, Var<T> image, Track track) const {
  check_image(image);
  const bool tracked = tracks_autoencoder(track);
  const std::size_t depth = skip_depth(params_.skip);
  Var<T> h = image;
  for (std::size_t i = 0; i < depth; ++i) {
    const auto& layer = params_.encoder_convs[i];
    h = conv2d(h, bind(g, layer.weight, tracked), bind(g, layer.bias, tracked), 2, kEncoderPad);
    h = (i + 1 == depth) ? tanh(h) : leaky_relu(h, T(kLeakySlope));
  }
  return h;
}

template <typename T>
Var<T> Cdaae<T>::encode_stage2(Graph<T>& g, Var<T> features, Track track) const {
  const std::size_t n = features.shape().empty() ? 0 : features.shape()[0];
  if (features.shape() != stage1_feature_shape(n)) {
    throw DimensionError("encode_stage2 expects features " + shape_to_string(stage1_feature_shape(n)) + ", got " +
                         shape_to_string(features.shape()));
  }
  const bool tracked = tracks_autoencoder(track);
  Var<T> h = features;
  for (std::size_t i = skip_depth(params_.skip); i < 4; ++i) {
    const auto& layer = params_.encoder_convs[i];
    h = leaky_relu(conv2d(h, bind(g, layer.weight, tracked), bind(g, layer.bias, tracked), 2, kEncoderPad),
                   T(kLeakySlope));
  }
  h = reshape(h, Shape{n, kEncoderChannels[4] * kBottleneckSize * kBottleneckSize});
  return dense(h, bind(g, params_.encoder_fc.weight, tracked), bind(g, params_.encoder_fc.bias, tracked));
}

template <typename T>
Var<T> Cdaae<T>::decode_difference(Graph<T>& g, Var<T> latent, Var<T> labels, Track track) const {
  const auto& zs = latent.shape();
  if (zs.size() != 2 || zs[1] != kLatentDim) {
    throw DimensionError("latent must be [N," + std::to_string(kLatentDim) + "], got " + shape_to_string(zs));
  }
  const auto& ls = labels.shape();
  if (ls.size() != 2 || ls[0] != zs[0] || ls[1] != label_dim()) {
    throw DimensionError("label length " + std::to_string(ls.size() == 2 ? ls[1] : 0) + " does not match model; expected " +
                         std::to_string(label_dim()) + " (labels " + shape_to_string(ls) + ")");
  }
  const bool tracked = tracks_autoencoder(track);
  const std::size_t n = zs[0];
  Var<T> h = concat_features(latent, labels);
  h = leaky_relu(dense(h, bind(g, params_.decoder_fc.weight, tracked), bind(g, params_.decoder_fc.bias, tracked)),
                 T(kLeakySlope));
  h = reshape(h, Shape{n, kDecoderChannels[0], kBottleneckSize, kBottleneckSize});
  const std::size_t g1_layers = 4 - skip_depth(params_.skip);
  for (std::size_t j = 0; j < g1_layers; ++j) {
    const auto& layer = params_.decoder_deconvs[j];
    h = conv2d_transpose(h, bind(g, layer.weight, tracked), bind(g, layer.bias, tracked), 2, kDecoderPad);
    h = (j + 1 == g1_layers) ? tanh(h) : leaky_relu(h, T(kLeakySlope));
  }
  return h;
}

template <typename T>
Var<T> Cdaae<T>::decode_stage2(Graph<T>& g, Var<T> joined, Track track) const {
  const std::size_t n = joined.shape().empty() ? 0 : joined.shape()[0];
  const std::size_t first = 4 - skip_depth(params_.skip);
  if (first < 4 && joined.shape() != stage1_feature_shape(n)) {
    throw DimensionError("decode_stage2 expects " + shape_to_string(stage1_feature_shape(n)) + ", got " +
                         shape_to_string(joined.shape()));
  }
  const bool tracked = tracks_autoencoder(track);
  Var<T> h = joined;
  for (std::size_t j = first; j < 4; ++j) {
    const auto& layer = params_.decoder_deconvs[j];
    h = conv2d_transpose(h, bind(g, layer.weight, tracked), bind(g, layer.bias, tracked), 2, kDecoderPad);
    h = (j == 3) ? tanh(h) : leaky_relu(h, T(kLeakySlope));
  }
  return h;
}

template <typename T>
ForwardPass<T> Cdaae<T>::forward(Graph<T>& g, Var<T> image, Var<T> labels, Track track) const {
  ForwardPass<T> pass;
  pass.features = encode_stage1(g, image, track);
  pass.latent = encode_stage2(g, pass.features, track);
  pass.difference = decode_difference(g, pass.latent, labels, track);
  const Var<T> joined = has_junction() ? add(pass.features, pass.difference) : pass.difference;
  pass.output = decode_stage2(g, joined, track);
  return pass;
}

template <typename T>
Var<T> Cdaae<T>::discriminate_latent(Graph<T>& g, Var<T> latent, Track track) const {
  const auto& zs = latent.shape();
  if (zs.size() != 2 || zs[1] != kLatentDim) {
    throw DimensionError("latent discriminator expects [N," + std::to_string(kLatentDim) + "], got " +
                         shape_to_string(zs));
  }
  const bool tracked = tracks_discriminators(track);
  Var<T> h = latent;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& layer = params_.latent_disc[i];
    h = dense(h, bind(g, layer.weight, tracked), bind(g, layer.bias, tracked));
    h = (i == 2) ? sigmoid(h) : leaky_relu(h, T(kLeakySlope));
  }
  return h;
}

template <typename T>
Var<T> Cdaae<T>::discriminate_image(Graph<T>& g, Var<T> image, Track track) const {
  check_image(image);
  const bool tracked = tracks_discriminators(track);
  Var<T> h = image;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& layer = params_.image_disc_convs[i];
    h = leaky_relu(conv2d(h, bind(g, layer.weight, tracked), bind(g, layer.bias, tracked), 2, kEncoderPad),
                   T(kLeakySlope));
  }
  h = reshape(h, Shape{image.shape()[0], params_.image_disc_fc.weight.dim(0)});
  return sigmoid(dense(h, bind(g, params_.image_disc_fc.weight, tracked), bind(g, params_.image_disc_fc.bias, tracked)));
}

template <typename T>
Tensor<T> Cdaae<T>::encode_stage1(const Tensor<T>& image) const {
  Graph<T> g;
  return encode_stage1(g, g.constant_ref(image)).value();
}

template <typename T>
Tensor<T> Cdaae<T>::encode_stage2(const Tensor<T>& features) const {
  Graph<T> g;
  return encode_stage2(g, g.constant_ref(features)).value();
}

template <typename T>
Tensor<T> Cdaae<T>::decode_difference(const Tensor<T>& latent, const Tensor<T>& labels) const {
  Graph<T> g;
  return decode_difference(g, g.constant_ref(latent), g.constant_ref(labels)).value();
}

template <typename T>
Tensor<T> Cdaae<T>::decode_stage2(const Tensor<T>& joined) const {
  Graph<T> g;
  return decode_stage2(g, g.constant_ref(joined)).value();
}

template <typename T>
Tensor<T> Cdaae<T>::synthesize(const Tensor<T>& image, const Tensor<T>& labels) const {
  Graph<T> g;
  return forward(g, g.constant_ref(image), g.constant_ref(labels)).output.value();
}

template <typename T>
Tensor<T> Cdaae<T>::discriminate_latent(const Tensor<T>& latent) const {
  Graph<T> g;
  return discriminate_latent(g, g.constant_ref(latent)).value();
}

template <typename T>
Tensor<T> Cdaae<T>::discriminate_image(const Tensor<T>& image) const {
  Graph<T> g;
  return discriminate_image(g, g.constant_ref(image)).value();
}

bool LossBundle::all_finite() const {
  return std::isfinite(l_r) && std::isfinite(l_e_d) && std::isfinite(l_e_g) && std::isfinite(l_g_d) &&
         std::isfinite(l_g_g) && std::isfinite(total_ae);
}

namespace {

template <typename T>
Var<T> filled(Graph<T>& g, std::size_t n, T value) {
  return g.constant(Tensor<T>(Shape{n, 1}, value));
}

template <typename T>
void check_batch(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + ": shape " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
  }
}

}  // namespace

template <typename T>
AutoencoderObjective<T> build_autoencoder_objective(Graph<T>& g, const Cdaae<T>& model, const Tensor<T>& source,
                                                    const Tensor<T>& target, const Tensor<T>& labels,
                                                    const LossWeights& weights) {
  check_batch(source, target, "source/target");
  AutoencoderObjective<T> obj;
  const std::size_t n = source.dim(0);
  obj.pass = model.forward(g, g.constant_ref(source), g.constant_ref(labels), Track::Autoencoder);
  obj.l_r = mse_loss(g.constant_ref(target), obj.pass.output);
  const Var<T> real = filled(g, n, T{1});
  obj.l_e_g = bce_loss(model.discriminate_latent(g, obj.pass.latent, Track::Autoencoder), real);
  obj.l_g_g = bce_loss(model.discriminate_image(g, obj.pass.output, Track::Autoencoder), real);
  obj.total = add(add(scale(obj.l_r, static_cast<T>(weights.alpha)), scale(obj.l_e_g, static_cast<T>(weights.beta1))),
                  scale(obj.l_g_g, static_cast<T>(weights.beta2)));
  return obj;
}

template <typename T>
DiscriminatorObjective<T> build_discriminator_objective(Graph<T>& g, const Cdaae<T>& model, const Tensor<T>& source,
                                                        const Tensor<T>& labels, const Tensor<T>& prior_sample) {
  const std::size_t n = source.dim(0);
  if (prior_sample.shape() != Shape{n, kLatentDim}) {
    throw DimensionError("prior sample must be [" + std::to_string(n) + "," + std::to_string(kLatentDim) + "], got " +
                         shape_to_string(prior_sample.shape()));
  }
  DiscriminatorObjective<T> obj;
  const Var<T> x_s = g.constant_ref(source);
  const ForwardPass<T> pass = model.forward(g, x_s, g.constant_ref(labels), Track::Frozen);
  const Var<T> real = filled(g, n, T{1});
  const Var<T> fake = filled(g, n, T{0});
  const Track d = Track::Discriminators;
  obj.l_e_d = add(bce_loss(model.discriminate_latent(g, g.constant_ref(prior_sample), d), real),
                  bce_loss(model.discriminate_latent(g, pass.latent, d), fake));
  obj.l_g_d = add(bce_loss(model.discriminate_image(g, x_s, d), real),
                  bce_loss(model.discriminate_image(g, pass.output, d), fake));
  obj.total = add(obj.l_e_d, obj.l_g_d);
  return obj;
}

template <typename T>
LossBundle compute_losses(const Cdaae<T>& model, const Tensor<T>& source, const Tensor<T>& target,
                          const Tensor<T>& labels, const Tensor<T>& prior_sample, const LossWeights& weights) {
  Graph<T> g;
  const auto ae = build_autoencoder_objective(g, model, source, target, labels, weights);
  const auto disc = build_discriminator_objective(g, model, source, labels, prior_sample);
  LossBundle b;
  b.l_r = ae.l_r.value().item();
  b.l_e_g = ae.l_e_g.value().item();
  b.l_g_g = ae.l_g_g.value().item();
  b.total_ae = ae.total.value().item();
  b.l_e_d = disc.l_e_d.value().item();
  b.l_g_d = disc.l_g_d.value().item();
  if (!b.all_finite()) throw NumericError("non-finite loss term");
  return b;
}

template <typename T>
Tensor<T> label_batch(const std::vector<LabelVector>& labels, LabelMode mode) {
  if (labels.empty()) throw UsageError("label_batch: empty batch");
  const std::size_t dim = label_dim(mode);
  Tensor<T> out(Shape{labels.size(), dim});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto& l = labels[i];
    if (l.mode != mode || l.size() != dim) {
      throw DimensionError("label length " + std::to_string(l.size()) + " does not match model; expected " +
                           std::to_string(dim));
    }
    l.validate();
    for (std::size_t j = 0; j < dim; ++j) out[i * dim + j] = static_cast<T>(l[j]);
  }
  return out;
}

template struct ModelParams<float>;
template struct ModelParams<double>;
template ModelParams<double> ModelParams<float>::cast<double>() const;
template ModelParams<float> ModelParams<double>::cast<float>() const;
template ModelParams<float> ModelParams<float>::cast<float>() const;
template class Cdaae<float>;
template class Cdaae<double>;

#define CDAAE_INSTANTIATE_MODEL_FNS(T)                                                                           \
  template AutoencoderObjective<T> build_autoencoder_objective<T>(Graph<T>&, const Cdaae<T>&, const Tensor<T>&,  \
                                                                  const Tensor<T>&, const Tensor<T>&,            \
                                                                  const LossWeights&);                           \
  template DiscriminatorObjective<T> build_discriminator_objective<T>(Graph<T>&, const Cdaae<T>&,                \
                                                                      const Tensor<T>&, const Tensor<T>&,        \
                                                                      const Tensor<T>&);                         \
  template LossBundle compute_losses<T>(const Cdaae<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,   \
                                        const Tensor<T>&, const LossWeights&);                                   \
  template Tensor<T> label_batch<T>(const std::vector<LabelVector>&, LabelMode);

CDAAE_INSTANTIATE_MODEL_FNS(float)
CDAAE_INSTANTIATE_MODEL_FNS(double)

}  // namespace cdaae

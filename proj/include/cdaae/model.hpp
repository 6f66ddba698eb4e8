#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cdaae/graph.hpp"
#include "cdaae/labels.hpp"
#include "cdaae/tensor.hpp"

namespace cdaae {

inline constexpr std::size_t kLatentDim = 100;
inline constexpr std::size_t kImageSize = 32;
inline constexpr std::size_t kImageChannels = 3;

/// Where the encoder-to-decoder feedforward connection taps in. Pk taps the
/// output of encoder conv k and joins before decoder deconv 4-k+1; None is
/// the plain conditional adversarial autoencoder.
enum class SkipPosition { None, P1, P2, P3 };

std::string_view to_string(SkipPosition skip);
/// Accepts "none", "p1".."p3" and the network names "n1".."n3" (case-insensitive).
SkipPosition parse_skip_position(std::string_view text);
/// Number of encoder conv layers in the first encoder stage (0 for None).
std::size_t skip_depth(SkipPosition skip);

// Layer plan. Encoder convs halve the resolution (32 -> 16 -> 8 -> 4 -> 2),
// decoder transposed convs double it back.
inline constexpr std::array<std::size_t, 5> kEncoderChannels = {3, 32, 64, 128, 256};
inline constexpr std::array<std::size_t, 5> kDecoderChannels = {256, 128, 64, 32, 3};
inline constexpr std::size_t kEncoderKernel = 5;
inline constexpr std::size_t kEncoderPad = 2;
inline constexpr std::size_t kDecoderKernel = 4;
inline constexpr std::size_t kDecoderPad = 1;
inline constexpr std::size_t kBottleneckSize = 2;
inline constexpr std::array<std::size_t, 4> kLatentDiscriminatorWidths = {kLatentDim, 64, 32, 1};
inline constexpr std::array<std::size_t, 4> kImageDiscriminatorChannels = {3, 32, 64, 128};
inline constexpr float kLeakySlope = 0.2f;

template <typename T>
struct Layer {
  Tensor<T> weight;
  Tensor<T> bias;
};

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T>* tensor;
};

/// All trainable weights of E1/E2 (encoder), G1/G2 (decoder), D_E and D_G.
/// The tensor set is identical for every skip position; the position only
/// decides where the stages split.
template <typename T>
struct ModelParams {
  SkipPosition skip = SkipPosition::P2;
  LabelMode label_mode = LabelMode::AU;

  std::array<Layer<T>, 4> encoder_convs;
  Layer<T> encoder_fc;
  Layer<T> decoder_fc;
  std::array<Layer<T>, 4> decoder_deconvs;
  std::array<Layer<T>, 3> latent_disc;
  std::array<Layer<T>, 3> image_disc_convs;
  Layer<T> image_disc_fc;

  /// Glorot-uniform weights, zero biases, deterministic in `seed`.
  static ModelParams initialize(SkipPosition skip, LabelMode mode, std::uint64_t seed);

  std::size_t label_dim() const { return cdaae::label_dim(label_mode); }

  /// Every tensor with a stable name, encoder/decoder first, then D_E, D_G.
  std::vector<NamedTensor<T>> named();
  std::vector<Tensor<T>*> autoencoder();
  std::vector<Tensor<T>*> discriminators();
  std::vector<Tensor<T>*> all();
  std::size_t parameter_count();

  template <typename U>
  ModelParams<U> cast() const;
};

/// Which parameter groups a forward pass tracks for gradients. Untracked
/// groups enter the graph as constants.
enum class Track { Frozen, Autoencoder, Discriminators, All };

template <typename T>
struct ForwardPass {
  Var<T> features;    // E1(x); the input itself when there is no first stage
  Var<T> latent;      // z = E2(E1(x))
  Var<T> difference;  // d = G1(z, l)
  Var<T> output;      // G2(E1(x) + d)
};

template <typename T>
class Cdaae {
 public:
  explicit Cdaae(ModelParams<T> params);
  static Cdaae create(SkipPosition skip, LabelMode mode, std::uint64_t seed);

  ModelParams<T>& params() { return params_; }
  const ModelParams<T>& params() const { return params_; }
  SkipPosition skip() const { return params_.skip; }
  LabelMode label_mode() const { return params_.label_mode; }
  std::size_t label_dim() const { return params_.label_dim(); }
  bool has_junction() const { return params_.skip != SkipPosition::None; }

  /// Channels and resolution of E1's output (the input image for None).
  Shape stage1_feature_shape(std::size_t batch) const;
  /// Length of G1's input vector z ++ l.
  std::size_t generator_input_dim() const { return kLatentDim + label_dim(); }

  Var<T> encode_stage1(Graph<T>& g, Var<T> image, Track track = Track::Frozen) const;
  Var<T> encode_stage2(Graph<T>& g, Var<T> features, Track track = Track::Frozen) const;
  Var<T> decode_difference(Graph<T>& g, Var<T> latent, Var<T> labels, Track track = Track::Frozen) const;
  Var<T> decode_stage2(Graph<T>& g, Var<T> joined, Track track = Track::Frozen) const;
  ForwardPass<T> forward(Graph<T>& g, Var<T> image, Var<T> labels, Track track = Track::Frozen) const;
  Var<T> discriminate_latent(Graph<T>& g, Var<T> latent, Track track = Track::Frozen) const;
  Var<T> discriminate_image(Graph<T>& g, Var<T> image, Track track = Track::Frozen) const;

  // Frozen single-graph conveniences for inference.
  Tensor<T> encode_stage1(const Tensor<T>& image) const;
  Tensor<T> encode_stage2(const Tensor<T>& features) const;
  Tensor<T> decode_difference(const Tensor<T>& latent, const Tensor<T>& labels) const;
  Tensor<T> decode_stage2(const Tensor<T>& joined) const;
  /// G2(E1(x) + G1(E2(E1(x)), l)), or G1(E2(x), l) without a junction.
  Tensor<T> synthesize(const Tensor<T>& image, const Tensor<T>& labels) const;
  Tensor<T> discriminate_latent(const Tensor<T>& latent) const;
  Tensor<T> discriminate_image(const Tensor<T>& image) const;

 private:
  Var<T> bind(Graph<T>& g, const Tensor<T>& t, bool tracked) const;
  void check_image(const Var<T>& image) const;

  ModelParams<T> params_;
};

struct LossWeights {
  double alpha = 1.0;
  double beta1 = 1e-2;
  double beta2 = 1e-3;
};

/// Scalar values of every objective term.
struct LossBundle {
  double l_r = 0;
  double l_e_d = 0;
  double l_e_g = 0;
  double l_g_d = 0;
  double l_g_g = 0;
  double total_ae = 0;

  bool all_finite() const;
};

template <typename T>
struct AutoencoderObjective {
  ForwardPass<T> pass;
  Var<T> l_r, l_e_g, l_g_g, total;
};

template <typename T>
struct DiscriminatorObjective {
  Var<T> l_e_d, l_g_d, total;
};

/// total_ae = alpha L_R + beta1 bce(D_E(z), 1) + beta2 bce(D_G(x_hat), 1).
/// Tracks the encoder/decoder only; the discriminators are constants.
template <typename T>
AutoencoderObjective<T> build_autoencoder_objective(Graph<T>& g, const Cdaae<T>& model, const Tensor<T>& source,
                                                    const Tensor<T>& target, const Tensor<T>& labels,
                                                    const LossWeights& weights);

/// bce(D_E(z*),1) + bce(D_E(z),0) + bce(D_G(x_s),1) + bce(D_G(x_hat),0) with z
/// and x_hat computed by a frozen encoder/decoder. Tracks D_E and D_G only.
template <typename T>
DiscriminatorObjective<T> build_discriminator_objective(Graph<T>& g, const Cdaae<T>& model, const Tensor<T>& source,
                                                        const Tensor<T>& labels, const Tensor<T>& prior_sample);

/// Every loss term for one batch; throws NumericError if any is not finite.
template <typename T>
LossBundle compute_losses(const Cdaae<T>& model, const Tensor<T>& source, const Tensor<T>& target,
                          const Tensor<T>& labels, const Tensor<T>& prior_sample, const LossWeights& weights);

/// Packs label vectors into a [N, label_dim] tensor, validating each one.
template <typename T>
Tensor<T> label_batch(const std::vector<LabelVector>& labels, LabelMode mode);

extern template struct ModelParams<float>;
extern template struct ModelParams<double>;
extern template class Cdaae<float>;
extern template class Cdaae<double>;

}  // namespace cdaae

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cdaae/manifest.hpp"
#include "cdaae/sampler.hpp"
#include "cdaae/tensor.hpp"

namespace cdaae {

/// Preprocessed [3,32,32] tensors for every manifest row.
class FaceStore {
 public:
  /// Decodes and preprocesses every image. Throws ValidationError when an
  /// image fails to decode or the decoded sizes differ.
  static FaceStore load(const CorpusManifest& manifest);
  static FaceStore from_images(const std::vector<Image>& images);

  std::size_t size() const { return faces_.size(); }
  const Tensor<float>& face(std::size_t row) const { return faces_.at(row); }

 private:
  std::vector<Tensor<float>> faces_;
};

struct Batch {
  Tensor<float> source;  // [N,3,32,32]
  Tensor<float> target;  // [N,3,32,32]
  Tensor<float> labels;  // [N,label_dim]
};

/// Stacks single-image tensors of identical shape along a new leading axis.
Tensor<float> stack_images(const std::vector<const Tensor<float>*>& images);

Batch make_batch(const FaceStore& store, std::span<const FacePair> pairs, LabelMode mode);

}  // namespace cdaae

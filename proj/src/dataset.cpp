#include "cdaae/dataset.hpp"

#include <algorithm>
#include <cstring>

#include "cdaae/error.hpp"
#include "cdaae/image.hpp"
#include "cdaae/model.hpp"

namespace cdaae {

FaceStore FaceStore::load(const CorpusManifest& manifest) {
  std::vector<Image> images;
  images.reserve(manifest.rows.size());
  for (std::size_t i = 0; i < manifest.rows.size(); ++i) {
    try {
      images.push_back(manifest.load_image(i));
    } catch (const ValidationError& e) {
      throw ValidationError(manifest.rows[i].image_path + ": " + e.what());
    }
    if (images.back().width != images.front().width || images.back().height != images.front().height) {
      throw ValidationError(manifest.rows[i].image_path + ": image size differs from the rest of the corpus");
    }
  }
  return from_images(images);
}

FaceStore FaceStore::from_images(const std::vector<Image>& images) {
  FaceStore store;
  store.faces_.reserve(images.size());
  for (const auto& img : images) store.faces_.push_back(preprocess(img));
  return store;
}

Tensor<float> stack_images(const std::vector<const Tensor<float>*>& images) {
  if (images.empty()) throw UsageError("stack_images: empty list");
  const Shape& one = images.front()->shape();
  Shape shape{images.size()};
  shape.insert(shape.end(), one.begin(), one.end());
  Tensor<float> out(shape);
  const std::size_t n = images.front()->numel();
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i]->shape() != one) throw DimensionError("stack_images: mismatched shapes");
    std::copy(images[i]->data().begin(), images[i]->data().end(), out.data().begin() + i * n);
  }
  return out;
}

Batch make_batch(const FaceStore& store, std::span<const FacePair> pairs, LabelMode mode) {
  if (pairs.empty()) throw UsageError("make_batch: empty batch");
  std::vector<const Tensor<float>*> src, tgt;
  std::vector<LabelVector> labels;
  for (const auto& p : pairs) {
    src.push_back(&store.face(p.source));
    tgt.push_back(&store.face(p.target));
    labels.push_back(p.label);
  }
  return Batch{stack_images(src), stack_images(tgt), label_batch<float>(labels, mode)};
}

}  // namespace cdaae

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cdaae/tensor.hpp"

namespace cdaae {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment estimates for an ordered parameter list. Moment i belongs to
/// parameter i of the list the state was created for.
template <typename T>
struct AdamState {
  AdamConfig config;
  std::size_t step = 0;
  std::vector<Tensor<T>> first_moment;
  std::vector<Tensor<T>> second_moment;

  static AdamState create(std::span<Tensor<T>* const> params, AdamConfig config);
};

/// One bias-corrected Adam update using each parameter's grad buffer; a
/// parameter without a grad buffer is updated as if its gradient were zero.
template <typename T>
void adam_step(std::span<Tensor<T>* const> params, AdamState<T>& state);

extern template struct AdamState<float>;
extern template struct AdamState<double>;

}  // namespace cdaae

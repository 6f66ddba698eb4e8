#pragma once

#include <cstddef>

#include "cdaae/graph.hpp"

namespace cdaae {

/// Spatial size produced by a strided convolution window sweep.
std::size_t conv_output_size(std::size_t input, std::size_t kernel, std::size_t stride, std::size_t pad);
/// Spatial size produced by a transposed convolution: (in-1)*stride - 2*pad + kernel.
std::size_t conv_transpose_output_size(std::size_t input, std::size_t kernel, std::size_t stride,
                                       std::size_t pad);

/// input [N,C,H,W], kernel [F,C,kh,kw], bias [F] -> [N,F,H',W'], zero padding.
template <typename T>
Var<T> conv2d(Var<T> input, Var<T> kernel, Var<T> bias, std::size_t stride, std::size_t pad);

/// input [N,C,H,W], kernel [C,F,kh,kw], bias [F] -> [N,F,H',W'].
/// The adjoint of conv2d with the same kernel, stride and padding, plus bias.
template <typename T>
Var<T> conv2d_transpose(Var<T> input, Var<T> kernel, Var<T> bias, std::size_t stride, std::size_t pad);

/// input [N,D], weight [D,K], bias [K] -> [N,K].
template <typename T>
Var<T> dense(Var<T> input, Var<T> weight, Var<T> bias);

template <typename T>
Var<T> leaky_relu(Var<T> x, T slope = T(0.2));

// tanh and sigmoid clamp their outputs one ulp inside the open interval so
// the range stays strict even where the float result would round to the bound.
template <typename T>
Var<T> tanh(Var<T> x);
template <typename T>
Var<T> sigmoid(Var<T> x);

/// Elementwise a + b, identical shapes.
template <typename T>
Var<T> add(Var<T> a, Var<T> b);
template <typename T>
Var<T> scale(Var<T> x, T factor);
/// [N,A] ++ [N,B] -> [N,A+B].
template <typename T>
Var<T> concat_features(Var<T> a, Var<T> b);
template <typename T>
Var<T> reshape(Var<T> x, Shape shape);
/// Sum of all elements as a {1} scalar.
template <typename T>
Var<T> sum(Var<T> x);

/// Mean of squared differences; differentiable in both arguments.
template <typename T>
Var<T> mse_loss(Var<T> a, Var<T> b);

inline constexpr double kBceEpsilon = 1e-7;

/// -mean(t log p + (1-t) log(1-p)) with p clamped to [eps, 1-eps].
/// The target is treated as a constant.
template <typename T>
Var<T> bce_loss(Var<T> predicted, Var<T> target);

}  // namespace cdaae

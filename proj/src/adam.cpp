#include "cdaae/adam.hpp"

#include <cmath>

namespace cdaae {

template <typename T>
AdamState<T> AdamState<T>::create(std::span<Tensor<T>* const> params, AdamConfig config) {
  AdamState state;
  state.config = config;
  for (const Tensor<T>* p : params) {
    state.first_moment.emplace_back(p->shape());
    state.second_moment.emplace_back(p->shape());
  }
  return state;
}

template <typename T>
void adam_step(std::span<Tensor<T>* const> params, AdamState<T>& state) {
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    throw DimensionError("adam_step: state holds " + std::to_string(state.first_moment.size()) +
                         " moments for " + std::to_string(params.size()) + " parameters");
  }
  const auto& cfg = state.config;
  const std::size_t t = state.step + 1;
  const double m_correction = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double v_correction = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  const T b1 = static_cast<T>(cfg.beta1);
  const T b2 = static_cast<T>(cfg.beta2);
  const T lr = static_cast<T>(cfg.learning_rate);
  const T eps = static_cast<T>(cfg.epsilon);
  const T inv_mc = static_cast<T>(1.0 / m_correction);
  const T inv_vc = static_cast<T>(1.0 / v_correction);

  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T>& p = *params[i];
    Tensor<T>& m = state.first_moment[i];
    Tensor<T>& v = state.second_moment[i];
    if (m.shape() != p.shape() || v.shape() != p.shape()) {
      throw DimensionError("adam_step: moment shape " + shape_to_string(m.shape()) + " does not match parameter " +
                           shape_to_string(p.shape()));
    }
    const auto grad = p.grad();
    for (std::size_t j = 0; j < p.numel(); ++j) {
      const T gj = grad.empty() ? T{0} : grad[j];
      m[j] = b1 * m[j] + (T{1} - b1) * gj;
      v[j] = b2 * v[j] + (T{1} - b2) * gj * gj;
      const T m_hat = m[j] * inv_mc;
      const T v_hat = v[j] * inv_vc;
      p[j] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
  state.step = t;
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step<float>(std::span<Tensor<float>* const>, AdamState<float>&);
template void adam_step<double>(std::span<Tensor<double>* const>, AdamState<double>&);

}  // namespace cdaae

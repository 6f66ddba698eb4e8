#include "cdaae/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace cdaae {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

template <typename T, typename... Rest>
Graph<T>& same_graph(Var<T> first, Rest... rest) {
  if (first.graph == nullptr) throw UsageError("op on an unbound Var");
  if (((rest.graph != first.graph) || ...)) throw UsageError("op inputs belong to different graphs");
  return *first.graph;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw DimensionError(msg);
}

// A window sweep over an image [N, channels, img_h, img_w] producing
// win_h x win_w window positions.
struct Sweep {
  std::size_t n, channels, img_h, img_w, kh, kw, stride, pad, win_h, win_w;

  std::size_t rows() const { return channels * kh * kw; }
  std::size_t cols() const { return n * win_h * win_w; }
};

// col [channels*kh*kw, n*win_h*win_w]
template <typename T>
void im2col(const T* img, const Sweep& s, T* col) {
  const std::size_t positions = s.win_h * s.win_w;
  const std::size_t ncols = s.cols();
  for (std::size_t c = 0; c < s.channels; ++c) {
    for (std::size_t ki = 0; ki < s.kh; ++ki) {
      for (std::size_t kj = 0; kj < s.kw; ++kj) {
        T* row = col + ((c * s.kh + ki) * s.kw + kj) * ncols;
        for (std::size_t b = 0; b < s.n; ++b) {
          const T* plane = img + (b * s.channels + c) * s.img_h * s.img_w;
          T* out = row + b * positions;
          for (std::size_t oh = 0; oh < s.win_h; ++oh) {
            const long ih = static_cast<long>(oh * s.stride + ki) - static_cast<long>(s.pad);
            T* out_row = out + oh * s.win_w;
            if (ih < 0 || ih >= static_cast<long>(s.img_h)) {
              std::fill(out_row, out_row + s.win_w, T{0});
              continue;
            }
            const T* in_row = plane + static_cast<std::size_t>(ih) * s.img_w;
            for (std::size_t ow = 0; ow < s.win_w; ++ow) {
              const long iw = static_cast<long>(ow * s.stride + kj) - static_cast<long>(s.pad);
              out_row[ow] = (iw >= 0 && iw < static_cast<long>(s.img_w)) ? in_row[iw] : T{0};
            }
          }
        }
      }
    }
  }
}

// Adds col back into img; the adjoint of im2col.
template <typename T>
void col2im(const T* col, const Sweep& s, T* img) {
  const std::size_t positions = s.win_h * s.win_w;
  const std::size_t ncols = s.cols();
  for (std::size_t c = 0; c < s.channels; ++c) {
    for (std::size_t ki = 0; ki < s.kh; ++ki) {
      for (std::size_t kj = 0; kj < s.kw; ++kj) {
        const T* row = col + ((c * s.kh + ki) * s.kw + kj) * ncols;
        for (std::size_t b = 0; b < s.n; ++b) {
          T* plane = img + (b * s.channels + c) * s.img_h * s.img_w;
          const T* in = row + b * positions;
          for (std::size_t oh = 0; oh < s.win_h; ++oh) {
            const long ih = static_cast<long>(oh * s.stride + ki) - static_cast<long>(s.pad);
            if (ih < 0 || ih >= static_cast<long>(s.img_h)) continue;
            T* out_row = plane + static_cast<std::size_t>(ih) * s.img_w;
            const T* in_row = in + oh * s.win_w;
            for (std::size_t ow = 0; ow < s.win_w; ++ow) {
              const long iw = static_cast<long>(ow * s.stride + kj) - static_cast<long>(s.pad);
              if (iw >= 0 && iw < static_cast<long>(s.img_w)) out_row[iw] += in_row[ow];
            }
          }
        }
      }
    }
  }
}

// NCHW [n, c, p] <-> channel-major [c, n*p]
template <typename T>
RowMat<T> to_channel_major(const T* src, std::size_t n, std::size_t c, std::size_t p) {
  RowMat<T> m(c, n * p);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const T* in = src + (b * c + ch) * p;
      std::copy(in, in + p, m.data() + ch * n * p + b * p);
    }
  }
  return m;
}

template <typename T>
void add_from_channel_major(const RowMat<T>& m, std::size_t n, std::size_t c, std::size_t p, T* dst) {
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const T* in = m.data() + ch * n * p + b * p;
      T* out = dst + (b * c + ch) * p;
      for (std::size_t i = 0; i < p; ++i) out[i] += in[i];
    }
  }
}

template <typename T>
void check_conv_operands(const char* op, const Tensor<T>& x, const Tensor<T>& k, const Tensor<T>& b,
                         std::size_t in_channels_axis, std::size_t out_channels_axis, std::size_t stride) {
  const std::string name(op);
  require(x.rank() == 4, name + ": input must be [N,C,H,W], got " + shape_to_string(x.shape()));
  require(k.rank() == 4, name + ": kernel must be rank 4, got " + shape_to_string(k.shape()));
  require(k.dim(in_channels_axis) == x.dim(1),
          name + ": kernel " + shape_to_string(k.shape()) + " does not match input channels " +
              std::to_string(x.dim(1)));
  require(b.rank() == 1 && b.dim(0) == k.dim(out_channels_axis),
          name + ": bias must be [" + std::to_string(k.dim(out_channels_axis)) + "], got " +
              shape_to_string(b.shape()));
  if (stride < 1) throw DimensionError(name + ": stride must be >= 1");
}

}  // namespace

std::size_t conv_output_size(std::size_t input, std::size_t kernel, std::size_t stride, std::size_t pad) {
  if (stride < 1) throw DimensionError("stride must be >= 1");
  if (input + 2 * pad < kernel) {
    throw DimensionError("kernel " + std::to_string(kernel) + " larger than padded input " +
                         std::to_string(input + 2 * pad));
  }
  return (input + 2 * pad - kernel) / stride + 1;
}

std::size_t conv_transpose_output_size(std::size_t input, std::size_t kernel, std::size_t stride,
                                       std::size_t pad) {
  if (stride < 1) throw DimensionError("stride must be >= 1");
  const long out = static_cast<long>((input - 1) * stride + kernel) - 2 * static_cast<long>(pad);
  if (out < 1) throw DimensionError("transposed convolution output would be empty");
  return static_cast<std::size_t>(out);
}

template <typename T>
Var<T> conv2d(Var<T> input, Var<T> kernel, Var<T> bias, std::size_t stride, std::size_t pad) {
  Graph<T>& g = same_graph(input, kernel, bias);
  const Tensor<T>& x = input.value();
  const Tensor<T>& k = kernel.value();
  const Tensor<T>& b = bias.value();
  check_conv_operands("conv2d", x, k, b, 1, 0, stride);

  const std::size_t f = k.dim(0);
  Sweep s{x.dim(0), x.dim(1), x.dim(2), x.dim(3), k.dim(2), k.dim(3), stride, pad, 0, 0};
  s.win_h = conv_output_size(s.img_h, s.kh, stride, pad);
  s.win_w = conv_output_size(s.img_w, s.kw, stride, pad);
  const std::size_t positions = s.win_h * s.win_w;

  std::vector<T> col(s.rows() * s.cols());
  im2col(x.data().data(), s, col.data());
  const ConstMatMap<T> w(k.data().data(), f, s.rows());
  const ConstMatMap<T> cm(col.data(), s.rows(), s.cols());
  RowMat<T> out_mat = w * cm;

  Tensor<T> y(Shape{s.n, f, s.win_h, s.win_w});
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t o = 0; o < f; ++o) {
      const T* src = out_mat.data() + o * s.cols() + n * positions;
      T* dst = y.data().data() + (n * f + o) * positions;
      const T bo = b[o];
      for (std::size_t p = 0; p < positions; ++p) dst[p] = src[p] + bo;
    }
  }
  y.check_finite("conv2d output");

  return g.record("conv2d", {input.id, kernel.id, bias.id}, std::move(y), [s, f](Graph<T>& g, std::size_t self) {
    const auto ids = g.inputs(self);
    const std::size_t positions = s.win_h * s.win_w;
    const RowMat<T> gm = to_channel_major(g.grad(self).data(), s.n, f, positions);
    const Tensor<T>& k = g.value(ids[1]);
    if (g.needs_grad(ids[1])) {
      std::vector<T> col(s.rows() * s.cols());
      im2col(g.value(ids[0]).data().data(), s, col.data());
      MatMap<T> dk(g.grad(ids[1]).data(), f, s.rows());
      dk.noalias() += gm * ConstMatMap<T>(col.data(), s.rows(), s.cols()).transpose();
    }
    if (g.needs_grad(ids[2])) {
      auto& db = g.grad(ids[2]);
      for (std::size_t o = 0; o < f; ++o) db[o] += gm.row(o).sum();
    }
    if (g.needs_grad(ids[0])) {
      RowMat<T> dcol = ConstMatMap<T>(k.data().data(), f, s.rows()).transpose() * gm;
      col2im(dcol.data(), s, g.grad(ids[0]).data());
    }
  });
}

template <typename T>
Var<T> conv2d_transpose(Var<T> input, Var<T> kernel, Var<T> bias, std::size_t stride, std::size_t pad) {
  Graph<T>& g = same_graph(input, kernel, bias);
  const Tensor<T>& x = input.value();
  const Tensor<T>& k = kernel.value();
  const Tensor<T>& b = bias.value();
  check_conv_operands("conv2d_transpose", x, k, b, 0, 1, stride);

  const std::size_t c = x.dim(1);
  const std::size_t f = k.dim(1);
  // The sweep runs over the (larger) output image; window positions are the input pixels.
  Sweep s{x.dim(0), f, 0, 0, k.dim(2), k.dim(3), stride, pad, x.dim(2), x.dim(3)};
  s.img_h = conv_transpose_output_size(s.win_h, s.kh, stride, pad);
  s.img_w = conv_transpose_output_size(s.win_w, s.kw, stride, pad);
  const std::size_t positions = s.win_h * s.win_w;
  const std::size_t out_positions = s.img_h * s.img_w;

  const RowMat<T> xm = to_channel_major(x.data().data(), s.n, c, positions);
  const ConstMatMap<T> w(k.data().data(), c, s.rows());
  RowMat<T> col = w.transpose() * xm;

  Tensor<T> y(Shape{s.n, f, s.img_h, s.img_w});
  col2im(col.data(), s, y.data().data());
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t o = 0; o < f; ++o) {
      T* dst = y.data().data() + (n * f + o) * out_positions;
      const T bo = b[o];
      for (std::size_t p = 0; p < out_positions; ++p) dst[p] += bo;
    }
  }
  y.check_finite("conv2d_transpose output");

  return g.record("conv2d_transpose", {input.id, kernel.id, bias.id}, std::move(y),
                  [s, c, f](Graph<T>& g, std::size_t self) {
                    const auto ids = g.inputs(self);
                    const std::size_t positions = s.win_h * s.win_w;
                    const std::size_t out_positions = s.img_h * s.img_w;
                    const auto& gy = g.grad(self);
                    if (g.needs_grad(ids[2])) {
                      auto& db = g.grad(ids[2]);
                      for (std::size_t n = 0; n < s.n; ++n) {
                        for (std::size_t o = 0; o < f; ++o) {
                          const T* src = gy.data() + (n * f + o) * out_positions;
                          T acc{0};
                          for (std::size_t p = 0; p < out_positions; ++p) acc += src[p];
                          db[o] += acc;
                        }
                      }
                    }
                    if (!g.needs_grad(ids[0]) && !g.needs_grad(ids[1])) return;
                    std::vector<T> gcol(s.rows() * s.cols());
                    im2col(gy.data(), s, gcol.data());
                    const ConstMatMap<T> gc(gcol.data(), s.rows(), s.cols());
                    if (g.needs_grad(ids[1])) {
                      const RowMat<T> xm = to_channel_major(g.value(ids[0]).data().data(), s.n, c, positions);
                      MatMap<T> dk(g.grad(ids[1]).data(), c, s.rows());
                      dk.noalias() += xm * gc.transpose();
                    }
                    if (g.needs_grad(ids[0])) {
                      const ConstMatMap<T> w(g.value(ids[1]).data().data(), c, s.rows());
                      RowMat<T> dx = w * gc;
                      add_from_channel_major(dx, s.n, c, positions, g.grad(ids[0]).data());
                    }
                  });
}

template <typename T>
Var<T> dense(Var<T> input, Var<T> weight, Var<T> bias) {
  Graph<T>& g = same_graph(input, weight, bias);
  const Tensor<T>& x = input.value();
  const Tensor<T>& w = weight.value();
  const Tensor<T>& b = bias.value();
  require(x.rank() == 2, "dense: input must be [N,D], got " + shape_to_string(x.shape()));
  require(w.rank() == 2 && w.dim(0) == x.dim(1),
          "dense: weight " + shape_to_string(w.shape()) + " does not match input " + shape_to_string(x.shape()));
  require(b.rank() == 1 && b.dim(0) == w.dim(1), "dense: bias " + shape_to_string(b.shape()) +
                                                     " does not match weight " + shape_to_string(w.shape()));
  const std::size_t n = x.dim(0), d = x.dim(1), k = w.dim(1);

  Tensor<T> y(Shape{n, k});
  MatMap<T> ym(y.data().data(), n, k);
  ym.noalias() = ConstMatMap<T>(x.data().data(), n, d) * ConstMatMap<T>(w.data().data(), d, k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) ym(i, j) += b[j];
  }
  y.check_finite("dense output");

  return g.record("dense", {input.id, weight.id, bias.id}, std::move(y), [n, d, k](Graph<T>& g, std::size_t self) {
    const auto ids = g.inputs(self);
    const ConstMatMap<T> gy(g.grad(self).data(), n, k);
    if (g.needs_grad(ids[0])) {
      MatMap<T> dx(g.grad(ids[0]).data(), n, d);
      dx.noalias() += gy * ConstMatMap<T>(g.value(ids[1]).data().data(), d, k).transpose();
    }
    if (g.needs_grad(ids[1])) {
      MatMap<T> dw(g.grad(ids[1]).data(), d, k);
      dw.noalias() += ConstMatMap<T>(g.value(ids[0]).data().data(), n, d).transpose() * gy;
    }
    if (g.needs_grad(ids[2])) {
      auto& db = g.grad(ids[2]);
      for (std::size_t j = 0; j < k; ++j) db[j] += gy.col(j).sum();
    }
  });
}

template <typename T>
Var<T> leaky_relu(Var<T> x, T slope) {
  Graph<T>& g = same_graph(x);
  const Tensor<T>& v = x.value();
  Tensor<T> y(v.shape());
  const std::size_t n = v.numel();
  for (std::size_t i = 0; i < n; ++i) y[i] = v[i] >= T{0} ? v[i] : slope * v[i];
  if (g.record_branches()) {
    for (std::size_t i = 0; i < n; ++i) g.log_branch(v[i] >= T{0});
  }
  return g.record("leaky_relu", {x.id}, std::move(y), [slope](Graph<T>& g, std::size_t self) {
    const auto id = g.inputs(self)[0];
    const auto& gy = g.grad(self);
    const auto& v = g.value(id);
    auto& dx = g.grad(id);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += v[i] >= T{0} ? gy[i] : slope * gy[i];
  });
}

template <typename T>
Var<T> tanh(Var<T> x) {
  Graph<T>& g = same_graph(x);
  const Tensor<T>& v = x.value();
  const T hi = std::nextafter(T{1}, T{0});
  Tensor<T> y(v.shape());
  for (std::size_t i = 0; i < v.numel(); ++i) y[i] = std::clamp(std::tanh(v[i]), -hi, hi);
  return g.record("tanh", {x.id}, std::move(y), [](Graph<T>& g, std::size_t self) {
    const auto id = g.inputs(self)[0];
    const auto& gy = g.grad(self);
    const auto& y = g.value(self);
    auto& dx = g.grad(id);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += gy[i] * (T{1} - y[i] * y[i]);
  });
}

template <typename T>
Var<T> sigmoid(Var<T> x) {
  Graph<T>& g = same_graph(x);
  const Tensor<T>& v = x.value();
  const T lo = std::numeric_limits<T>::min();
  const T hi = std::nextafter(T{1}, T{0});
  Tensor<T> y(v.shape());
  for (std::size_t i = 0; i < v.numel(); ++i) {
    const T a = v[i];
    const T s = a >= T{0} ? T{1} / (T{1} + std::exp(-a)) : std::exp(a) / (T{1} + std::exp(a));
    y[i] = std::clamp(s, lo, hi);
  }
  return g.record("sigmoid", {x.id}, std::move(y), [](Graph<T>& g, std::size_t self) {
    const auto id = g.inputs(self)[0];
    const auto& gy = g.grad(self);
    const auto& y = g.value(self);
    auto& dx = g.grad(id);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += gy[i] * y[i] * (T{1} - y[i]);
  });
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  Graph<T>& g = same_graph(a, b);
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  require(av.shape() == bv.shape(),
          "add: shape mismatch " + shape_to_string(av.shape()) + " vs " + shape_to_string(bv.shape()));
  Tensor<T> y(av.shape());
  for (std::size_t i = 0; i < av.numel(); ++i) y[i] = av[i] + bv[i];
  return g.record("add", {a.id, b.id}, std::move(y), [](Graph<T>& g, std::size_t self) {
    const auto& gy = g.grad(self);
    for (auto id : g.inputs(self)) {
      if (!g.needs_grad(id)) continue;
      auto& d = g.grad(id);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += gy[i];
    }
  });
}

template <typename T>
Var<T> scale(Var<T> x, T factor) {
  Graph<T>& g = same_graph(x);
  const Tensor<T>& v = x.value();
  Tensor<T> y(v.shape());
  for (std::size_t i = 0; i < v.numel(); ++i) y[i] = factor * v[i];
  return g.record("scale", {x.id}, std::move(y), [factor](Graph<T>& g, std::size_t self) {
    const auto& gy = g.grad(self);
    auto& d = g.grad(g.inputs(self)[0]);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += factor * gy[i];
  });
}

template <typename T>
Var<T> concat_features(Var<T> a, Var<T> b) {
  Graph<T>& g = same_graph(a, b);
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  require(av.rank() == 2 && bv.rank() == 2 && av.dim(0) == bv.dim(0),
          "concat_features: expected [N,A] and [N,B], got " + shape_to_string(av.shape()) + " and " +
              shape_to_string(bv.shape()));
  const std::size_t n = av.dim(0), wa = av.dim(1), wb = bv.dim(1);
  Tensor<T> y(Shape{n, wa + wb});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(av.data().data() + i * wa, wa, y.data().data() + i * (wa + wb));
    std::copy_n(bv.data().data() + i * wb, wb, y.data().data() + i * (wa + wb) + wa);
  }
  return g.record("concat", {a.id, b.id}, std::move(y), [n, wa, wb](Graph<T>& g, std::size_t self) {
    const auto ids = g.inputs(self);
    const auto& gy = g.grad(self);
    if (g.needs_grad(ids[0])) {
      auto& d = g.grad(ids[0]);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < wa; ++j) d[i * wa + j] += gy[i * (wa + wb) + j];
    }
    if (g.needs_grad(ids[1])) {
      auto& d = g.grad(ids[1]);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < wb; ++j) d[i * wb + j] += gy[i * (wa + wb) + wa + j];
    }
  });
}

template <typename T>
Var<T> reshape(Var<T> x, Shape shape) {
  Graph<T>& g = same_graph(x);
  Tensor<T> y = x.value().reshaped(std::move(shape));
  return g.record("reshape", {x.id}, std::move(y), [](Graph<T>& g, std::size_t self) {
    const auto& gy = g.grad(self);
    auto& d = g.grad(g.inputs(self)[0]);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += gy[i];
  });
}

template <typename T>
Var<T> sum(Var<T> x) {
  Graph<T>& g = same_graph(x);
  double acc = 0.0;
  for (T v : x.value().data()) acc += v;
  return g.record("sum", {x.id}, Tensor<T>::scalar(static_cast<T>(acc)), [](Graph<T>& g, std::size_t self) {
    const T gy = g.grad(self)[0];
    auto& d = g.grad(g.inputs(self)[0]);
    for (auto& v : d) v += gy;
  });
}

template <typename T>
Var<T> mse_loss(Var<T> a, Var<T> b) {
  Graph<T>& g = same_graph(a, b);
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  require(av.shape() == bv.shape(),
          "mse_loss: shape mismatch " + shape_to_string(av.shape()) + " vs " + shape_to_string(bv.shape()));
  double acc = 0.0;
  for (std::size_t i = 0; i < av.numel(); ++i) {
    const double diff = static_cast<double>(av[i]) - static_cast<double>(bv[i]);
    acc += diff * diff;
  }
  Tensor<T> y = Tensor<T>::scalar(static_cast<T>(acc / static_cast<double>(av.numel())));
  y.check_finite("mse_loss");
  return g.record("mse_loss", {a.id, b.id}, std::move(y), [](Graph<T>& g, std::size_t self) {
    const auto ids = g.inputs(self);
    const auto& av = g.value(ids[0]);
    const auto& bv = g.value(ids[1]);
    const T coeff = g.grad(self)[0] * T{2} / static_cast<T>(av.numel());
    if (g.needs_grad(ids[0])) {
      auto& d = g.grad(ids[0]);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += coeff * (av[i] - bv[i]);
    }
    if (g.needs_grad(ids[1])) {
      auto& d = g.grad(ids[1]);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] -= coeff * (av[i] - bv[i]);
    }
  });
}

template <typename T>
Var<T> bce_loss(Var<T> predicted, Var<T> target) {
  Graph<T>& g = same_graph(predicted, target);
  const Tensor<T>& p = predicted.value();
  const Tensor<T>& t = target.value();
  require(p.shape() == t.shape(),
          "bce_loss: shape mismatch " + shape_to_string(p.shape()) + " vs " + shape_to_string(t.shape()));
  const T lo = static_cast<T>(kBceEpsilon);
  const T hi = static_cast<T>(1.0 - kBceEpsilon);
  double acc = 0.0;
  for (std::size_t i = 0; i < p.numel(); ++i) {
    const double pc = std::clamp(p[i], lo, hi);
    const double ti = t[i];
    acc += ti * std::log(pc) + (1.0 - ti) * std::log(1.0 - pc);
  }
  if (g.record_branches()) {
    for (std::size_t i = 0; i < p.numel(); ++i) g.log_branch(p[i] <= lo ? 0 : (p[i] >= hi ? 2 : 1));
  }
  Tensor<T> y = Tensor<T>::scalar(static_cast<T>(-acc / static_cast<double>(p.numel())));
  y.check_finite("bce_loss");
  return g.record("bce_loss", {predicted.id, target.id}, std::move(y), [lo, hi](Graph<T>& g, std::size_t self) {
    const auto ids = g.inputs(self);
    if (!g.needs_grad(ids[0])) return;
    const auto& p = g.value(ids[0]);
    const auto& t = g.value(ids[1]);
    const T coeff = g.grad(self)[0] / static_cast<T>(p.numel());
    auto& d = g.grad(ids[0]);
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (p[i] <= lo || p[i] >= hi) continue;
      d[i] += coeff * (-(t[i] / p[i]) + (T{1} - t[i]) / (T{1} - p[i]));
    }
  });
}

#define CDAAE_INSTANTIATE_OPS(T)                                                          \
  template Var<T> conv2d<T>(Var<T>, Var<T>, Var<T>, std::size_t, std::size_t);           \
  template Var<T> conv2d_transpose<T>(Var<T>, Var<T>, Var<T>, std::size_t, std::size_t); \
  template Var<T> dense<T>(Var<T>, Var<T>, Var<T>);                                      \
  template Var<T> leaky_relu<T>(Var<T>, T);                                              \
  template Var<T> tanh<T>(Var<T>);                                                       \
  template Var<T> sigmoid<T>(Var<T>);                                                    \
  template Var<T> add<T>(Var<T>, Var<T>);                                                \
  template Var<T> scale<T>(Var<T>, T);                                                   \
  template Var<T> concat_features<T>(Var<T>, Var<T>);                                    \
  template Var<T> reshape<T>(Var<T>, Shape);                                             \
  template Var<T> sum<T>(Var<T>);                                                        \
  template Var<T> mse_loss<T>(Var<T>, Var<T>);                                           \
  template Var<T> bce_loss<T>(Var<T>, Var<T>);

CDAAE_INSTANTIATE_OPS(float)
CDAAE_INSTANTIATE_OPS(double)

}  // namespace cdaae

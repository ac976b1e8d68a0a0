#include "logonet/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>

#include "logonet/error.hpp"

namespace logonet {
namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

template <typename T>
Tensor<T> record(Tensor<T> out, std::string_view op, std::vector<Tensor<T>> inputs,
                 typename Node<T>::BackwardFn backward) {
  if (!grad_enabled()) return out;
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const Tensor<T>& t) { return t.tracks_grad(); });
  if (!any) return out;
  out.set_producer(std::make_shared<Node<T>>(Node<T>{op, std::move(inputs), std::move(backward)}));
  return out;
}

template <typename T>
void require_rank(const Tensor<T>& t, std::size_t rank, const char* op) {
  if (!t.defined() || t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected a rank-" + std::to_string(rank) +
                     " tensor, got " + (t.defined() ? shape_string(t.shape()) : "undefined"));
  }
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

struct ConvGeometry {
  std::size_t batch, in_channels, height, width;
  std::size_t out_channels, kernel, stride, padding;
  std::size_t out_height, out_width;

  std::size_t patch() const { return in_channels * kernel * kernel; }
  std::size_t positions() const { return out_height * out_width; }
};

// Output columns [lo, hi) whose input column ow*stride + offset - padding
// falls inside [0, width).
inline std::pair<std::size_t, std::size_t> valid_range(std::size_t out_width, std::size_t width,
                                                       std::size_t stride, std::size_t offset,
                                                       std::size_t padding) {
  std::size_t lo = 0;
  if (padding > offset) lo = (padding - offset + stride - 1) / stride;
  std::size_t hi = 0;
  if (width + padding > offset) hi = (width + padding - offset - 1) / stride + 1;
  lo = std::min(lo, out_width);
  hi = std::clamp(hi, lo, out_width);
  return {lo, hi};
}

// Unfolds one image [Cin,H,W] into a (Cin*k*k) x (H'*W') patch matrix.
template <typename T>
void im2col(const T* image, const ConvGeometry& g, T* col) {
  const std::size_t positions = g.positions();
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    for (std::size_t ki = 0; ki < g.kernel; ++ki) {
      for (std::size_t kj = 0; kj < g.kernel; ++kj) {
        T* row = col + ((c * g.kernel + ki) * g.kernel + kj) * positions;
        const auto [lo, hi] = valid_range(g.out_width, g.width, g.stride, kj, g.padding);
        for (std::size_t oh = 0; oh < g.out_height; ++oh) {
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * g.stride + ki) -
                                    static_cast<std::ptrdiff_t>(g.padding);
          T* dst = row + oh * g.out_width;
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.height)) {
            std::fill(dst, dst + g.out_width, T(0));
            continue;
          }
          const T* src = image + (c * g.height + static_cast<std::size_t>(ih)) * g.width;
          std::fill(dst, dst + lo, T(0));
          if (hi > lo) {
            // Input column read by output column lo.
            const std::size_t first = lo * g.stride + kj - g.padding;
            if (g.stride == 1) {
              std::copy(src + first, src + first + (hi - lo), dst + lo);
            } else {
              for (std::size_t ow = lo; ow < hi; ++ow) dst[ow] = src[first + (ow - lo) * g.stride];
            }
          }
          std::fill(dst + hi, dst + g.out_width, T(0));
        }
      }
    }
  }
}

// Adjoint of im2col: scatters patch-matrix gradients back onto the image.
template <typename T>
void col2im(const T* col, const ConvGeometry& g, T* image) {
  const std::size_t positions = g.positions();
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    for (std::size_t ki = 0; ki < g.kernel; ++ki) {
      for (std::size_t kj = 0; kj < g.kernel; ++kj) {
        const T* row = col + ((c * g.kernel + ki) * g.kernel + kj) * positions;
        const auto [lo, hi] = valid_range(g.out_width, g.width, g.stride, kj, g.padding);
        for (std::size_t oh = 0; oh < g.out_height; ++oh) {
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * g.stride + ki) -
                                    static_cast<std::ptrdiff_t>(g.padding);
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.height)) continue;
          const T* src = row + oh * g.out_width;
          if (lo == hi) continue;
          const std::size_t first = lo * g.stride + kj - g.padding;
          T* dst = image + (c * g.height + static_cast<std::size_t>(ih)) * g.width + first;
          for (std::size_t ow = lo; ow < hi; ++ow) dst[(ow - lo) * g.stride] += src[ow];
        }
      }
    }
  }
}

// Pads shapes of rank <= 4 on the left to exactly four dimensions.
std::array<std::size_t, 4> as_rank4(const Shape& shape, const char* op) {
  if (shape.size() > 4) throw ShapeError(std::string(op) + ": rank above 4 is not supported");
  std::array<std::size_t, 4> out{1, 1, 1, 1};
  std::copy(shape.begin(), shape.end(), out.begin() + (4 - shape.size()));
  return out;
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 std::size_t stride, std::size_t padding) {
  require_rank(input, 4, "conv2d input");
  require_rank(weight, 4, "conv2d weight");
  require_rank(bias, 1, "conv2d bias");
  if (stride == 0) throw ShapeError("conv2d: stride must be positive");
  if (input.dim(1) != weight.dim(1) || weight.dim(2) != weight.dim(3) ||
      bias.dim(0) != weight.dim(0)) {
    throw ShapeError("conv2d: input shape " + shape_string(input.shape()) +
                     " incompatible with weight shape " + shape_string(weight.shape()) +
                     " and bias shape " + shape_string(bias.shape()));
  }
  ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), input.dim(3), weight.dim(0),
                 weight.dim(2), stride, padding, 0, 0};
  if (g.height + 2 * padding < g.kernel || g.width + 2 * padding < g.kernel) {
    throw ShapeError("conv2d: kernel " + std::to_string(g.kernel) +
                     " larger than padded input " + shape_string(input.shape()) +
                     " with padding " + std::to_string(padding));
  }
  g.out_height = (g.height + 2 * padding - g.kernel) / stride + 1;
  g.out_width = (g.width + 2 * padding - g.kernel) / stride + 1;

  Tensor<T> out(Shape{g.batch, g.out_channels, g.out_height, g.out_width});
  const std::size_t K = g.patch();
  const std::size_t P = g.positions();
  const std::size_t in_stride = g.in_channels * g.height * g.width;
  AlignedVector<T> col(K * P);
  ConstMatrixMap<T> w(weight.data().data(), g.out_channels, K);
  for (std::size_t n = 0; n < g.batch; ++n) {
    im2col(input.data().data() + n * in_stride, g, col.data());
    MatrixMap<T> y(out.data().data() + n * g.out_channels * P, g.out_channels, P);
    y.noalias() = w * ConstMatrixMap<T>(col.data(), K, P);
    for (std::size_t co = 0; co < g.out_channels; ++co) y.row(co).array() += bias[co];
  }

  return record<T>(out, "conv2d", {input, weight, bias},
                   [input, weight, bias, g](std::span<const T>, std::span<const T> grad) {
    const std::size_t K = g.patch();
    const std::size_t P = g.positions();
    const std::size_t in_stride = g.in_channels * g.height * g.width;
    AlignedVector<T> col(K * P);
    std::vector<T> dcol(input.tracks_grad() ? K * P : 0);
    ConstMatrixMap<T> w(weight.data().data(), g.out_channels, K);
    for (std::size_t n = 0; n < g.batch; ++n) {
      ConstMatrixMap<T> gy(grad.data() + n * g.out_channels * P, g.out_channels, P);
      if (weight.tracks_grad()) {
        im2col(input.data().data() + n * in_stride, g, col.data());
        MatrixMap<T> gw(weight.mutable_grad().data(), g.out_channels, K);
        gw.noalias() += gy * ConstMatrixMap<T>(col.data(), K, P).transpose();
      }
      if (bias.tracks_grad()) {
        auto gb = bias.mutable_grad();
        for (std::size_t co = 0; co < g.out_channels; ++co) gb[co] += gy.row(co).sum();
      }
      if (input.tracks_grad()) {
        MatrixMap<T>(dcol.data(), K, P).noalias() = w.transpose() * gy;
        col2im(dcol.data(), g, input.mutable_grad().data() + n * in_stride);
      }
    }
  });
}

template <typename T>
Tensor<T> maxpool2d(const Tensor<T>& input, std::size_t kernel, std::size_t stride) {
  require_rank(input, 4, "maxpool2d");
  const std::size_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  if (kernel == 0 || stride == 0) throw ShapeError("maxpool2d: kernel and stride must be positive");
  if (kernel > H || kernel > W) {
    throw ShapeError("maxpool2d: kernel " + std::to_string(kernel) + " exceeds input " +
                     shape_string(input.shape()));
  }
  const std::size_t Ho = (H - kernel) / stride + 1, Wo = (W - kernel) / stride + 1;
  Tensor<T> out(Shape{N, C, Ho, Wo});
  std::vector<std::uint32_t> argmax(out.numel());
  const auto x = input.data();
  auto y = out.data();
  std::size_t o = 0;
  for (std::size_t plane = 0; plane < N * C; ++plane) {
    const std::size_t base = plane * H * W;
    for (std::size_t oh = 0; oh < Ho; ++oh) {
      for (std::size_t ow = 0; ow < Wo; ++ow, ++o) {
        std::size_t best = base + oh * stride * W + ow * stride;
        for (std::size_t i = 0; i < kernel; ++i) {
          for (std::size_t j = 0; j < kernel; ++j) {
            const std::size_t idx = base + (oh * stride + i) * W + ow * stride + j;
            if (x[idx] > x[best]) best = idx;
          }
        }
        y[o] = x[best];
        argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return record<T>(out, "maxpool2d", {input},
                   [input, argmax = std::move(argmax)](std::span<const T>, std::span<const T> grad) {
    auto gx = input.mutable_grad();
    for (std::size_t o = 0; o < grad.size(); ++o) gx[argmax[o]] += grad[o];
  });
}

template <typename T>
Tensor<T> global_avgpool(const Tensor<T>& input) {
  require_rank(input, 4, "global_avgpool");
  const std::size_t planes = input.dim(0) * input.dim(1);
  const std::size_t area = input.dim(2) * input.dim(3);
  Tensor<T> out(Shape{input.dim(0), input.dim(1), 1, 1});
  const auto x = input.data();
  for (std::size_t p = 0; p < planes; ++p) {
    T acc = 0;
    for (std::size_t i = 0; i < area; ++i) acc += x[p * area + i];
    out[p] = acc / static_cast<T>(area);
  }
  return record<T>(out, "global_avgpool", {input},
                   [input, planes, area](std::span<const T>, std::span<const T> grad) {
    auto gx = input.mutable_grad();
    for (std::size_t p = 0; p < planes; ++p) {
      const T g = grad[p] / static_cast<T>(area);
      for (std::size_t i = 0; i < area; ++i) gx[p * area + i] += g;
    }
  });
}

template <typename T>
Tensor<T> global_maxpool(const Tensor<T>& input) {
  require_rank(input, 4, "global_maxpool");
  const std::size_t planes = input.dim(0) * input.dim(1);
  const std::size_t area = input.dim(2) * input.dim(3);
  Tensor<T> out(Shape{input.dim(0), input.dim(1), 1, 1});
  std::vector<std::uint32_t> argmax(planes);
  const auto x = input.data();
  for (std::size_t p = 0; p < planes; ++p) {
    std::size_t best = p * area;
    for (std::size_t i = 1; i < area; ++i) {
      if (x[p * area + i] > x[best]) best = p * area + i;
    }
    out[p] = x[best];
    argmax[p] = static_cast<std::uint32_t>(best);
  }
  return record<T>(out, "global_maxpool", {input},
                   [input, argmax = std::move(argmax)](std::span<const T>, std::span<const T> grad) {
    auto gx = input.mutable_grad();
    for (std::size_t p = 0; p < grad.size(); ++p) gx[argmax[p]] += grad[p];
  });
}

template <typename T>
Tensor<T> channel_mean(const Tensor<T>& input) {
  require_rank(input, 4, "channel_mean");
  const std::size_t N = input.dim(0), C = input.dim(1), area = input.dim(2) * input.dim(3);
  Tensor<T> out(Shape{N, 1, input.dim(2), input.dim(3)});
  const auto x = input.data();
  auto y = out.data();
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t c = 0; c < C; ++c) {
      const T* src = x.data() + (n * C + c) * area;
      T* dst = y.data() + n * area;
      for (std::size_t i = 0; i < area; ++i) dst[i] += src[i];
    }
    for (std::size_t i = 0; i < area; ++i) y[n * area + i] /= static_cast<T>(C);
  }
  return record<T>(out, "channel_mean", {input},
                   [input, N, C, area](std::span<const T>, std::span<const T> grad) {
    auto gx = input.mutable_grad();
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t c = 0; c < C; ++c) {
        T* dst = gx.data() + (n * C + c) * area;
        for (std::size_t i = 0; i < area; ++i) dst[i] += grad[n * area + i] / static_cast<T>(C);
      }
    }
  });
}

template <typename T>
Tensor<T> channel_max(const Tensor<T>& input) {
  require_rank(input, 4, "channel_max");
  const std::size_t N = input.dim(0), C = input.dim(1), area = input.dim(2) * input.dim(3);
  Tensor<T> out(Shape{N, 1, input.dim(2), input.dim(3)});
  std::vector<std::uint32_t> argmax(N * area);
  const auto x = input.data();
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t i = 0; i < area; ++i) {
      std::size_t best = n * C * area + i;
      for (std::size_t c = 1; c < C; ++c) {
        const std::size_t idx = (n * C + c) * area + i;
        if (x[idx] > x[best]) best = idx;
      }
      out[n * area + i] = x[best];
      argmax[n * area + i] = static_cast<std::uint32_t>(best);
    }
  }
  return record<T>(out, "channel_max", {input},
                   [input, argmax = std::move(argmax)](std::span<const T>, std::span<const T> grad) {
    auto gx = input.mutable_grad();
    for (std::size_t o = 0; o < grad.size(); ++o) gx[argmax[o]] += grad[o];
  });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  const auto in = x.data();
  auto y = out.data();
  for (std::size_t i = 0; i < in.size(); ++i) y[i] = in[i] > T(0) ? in[i] : T(0);
  return record<T>(out, "relu", {x}, [x](std::span<const T> y, std::span<const T> grad) {
    auto gx = x.mutable_grad();
    // y > 0 exactly when x > 0; the subgradient at 0 is 0.
    for (std::size_t i = 0; i < grad.size(); ++i) {
      if (y[i] > T(0)) gx[i] += grad[i];
    }
  });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  const auto in = x.data();
  auto y = out.data();
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (in[i] >= T(0)) {
      y[i] = T(1) / (T(1) + std::exp(-in[i]));
    } else {
      const T e = std::exp(in[i]);
      y[i] = e / (T(1) + e);
    }
  }
  return record<T>(out, "sigmoid", {x}, [x](std::span<const T> y, std::span<const T> grad) {
    auto gx = x.mutable_grad();
    for (std::size_t i = 0; i < grad.size(); ++i) gx[i] += grad[i] * y[i] * (T(1) - y[i]);
  });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a[i] + b[i];
  return record<T>(out, "add", {a, b}, [a, b](std::span<const T>, std::span<const T> grad) {
    for (const Tensor<T>* t : {&a, &b}) {
      if (!t->tracks_grad()) continue;
      auto g = t->mutable_grad();
      for (std::size_t i = 0; i < grad.size(); ++i) g[i] += grad[i];
    }
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "sub");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a[i] - b[i];
  return record<T>(out, "sub", {a, b}, [a, b](std::span<const T>, std::span<const T> grad) {
    if (a.tracks_grad()) {
      auto g = a.mutable_grad();
      for (std::size_t i = 0; i < grad.size(); ++i) g[i] += grad[i];
    }
    if (b.tracks_grad()) {
      auto g = b.mutable_grad();
      for (std::size_t i = 0; i < grad.size(); ++i) g[i] -= grad[i];
    }
  });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T value) {
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = x[i] + value;
  return record<T>(out, "add_scalar", {x}, [x](std::span<const T>, std::span<const T> grad) {
    auto g = x.mutable_grad();
    for (std::size_t i = 0; i < grad.size(); ++i) g[i] += grad[i];
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = x[i] * factor;
  return record<T>(out, "scale", {x}, [x, factor](std::span<const T>, std::span<const T> grad) {
    auto g = x.mutable_grad();
    for (std::size_t i = 0; i < grad.size(); ++i) g[i] += grad[i] * factor;
  });
}

template <typename T>
Tensor<T> mul_broadcast(const Tensor<T>& feature, const Tensor<T>& mask) {
  if (feature.rank() != mask.rank()) {
    throw ShapeError("mul_broadcast: mask shape " + shape_string(mask.shape()) +
                     " does not broadcast to " + shape_string(feature.shape()));
  }
  for (std::size_t i = 0; i < feature.rank(); ++i) {
    if (mask.dim(i) != feature.dim(i) && mask.dim(i) != 1) {
      throw ShapeError("mul_broadcast: mask shape " + shape_string(mask.shape()) +
                       " does not broadcast to " + shape_string(feature.shape()));
    }
  }
  const auto fs = as_rank4(feature.shape(), "mul_broadcast");
  const auto ms = as_rank4(mask.shape(), "mul_broadcast");
  // Mask strides with zeros on broadcast axes.
  std::array<std::size_t, 4> stride{};
  std::size_t acc = 1;
  for (int i = 3; i >= 0; --i) {
    stride[i] = ms[i] == 1 ? 0 : acc;
    acc *= ms[i];
  }
  auto for_each = [fs, stride](auto&& fn) {
    std::size_t f = 0;
    for (std::size_t a = 0; a < fs[0]; ++a)
      for (std::size_t b = 0; b < fs[1]; ++b)
        for (std::size_t c = 0; c < fs[2]; ++c) {
          const std::size_t row = a * stride[0] + b * stride[1] + c * stride[2];
          for (std::size_t d = 0; d < fs[3]; ++d, ++f) fn(f, row + d * stride[3]);
        }
  };
  Tensor<T> out(feature.shape());
  const auto x = feature.data();
  const auto m = mask.data();
  auto y = out.data();
  for_each([&](std::size_t f, std::size_t mi) { y[f] = x[f] * m[mi]; });
  return record<T>(out, "mul_broadcast", {feature, mask},
                   [feature, mask, for_each](std::span<const T>, std::span<const T> grad) {
    const auto x = feature.data();
    const auto m = mask.data();
    if (feature.tracks_grad()) {
      auto gf = feature.mutable_grad();
      for_each([&](std::size_t f, std::size_t mi) { gf[f] += grad[f] * m[mi]; });
    }
    if (mask.tracks_grad()) {
      auto gm = mask.mutable_grad();
      for_each([&](std::size_t f, std::size_t mi) { gm[mi] += grad[f] * x[f]; });
    }
  });
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank(a, 4, "concat_channels");
  require_rank(b, 4, "concat_channels");
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3)) {
    throw ShapeError("concat_channels: shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
  const std::size_t N = a.dim(0), area = a.dim(2) * a.dim(3);
  const std::size_t block_a = a.dim(1) * area, block_b = b.dim(1) * area;
  Tensor<T> out(Shape{N, a.dim(1) + b.dim(1), a.dim(2), a.dim(3)});
  for (std::size_t n = 0; n < N; ++n) {
    std::copy_n(a.data().data() + n * block_a, block_a, out.data().data() + n * (block_a + block_b));
    std::copy_n(b.data().data() + n * block_b, block_b,
                out.data().data() + n * (block_a + block_b) + block_a);
  }
  return record<T>(out, "concat_channels", {a, b},
                   [a, b, N, block_a, block_b](std::span<const T>, std::span<const T> grad) {
    for (std::size_t n = 0; n < N; ++n) {
      const T* src = grad.data() + n * (block_a + block_b);
      if (a.tracks_grad()) {
        T* dst = a.mutable_grad().data() + n * block_a;
        for (std::size_t i = 0; i < block_a; ++i) dst[i] += src[i];
      }
      if (b.tracks_grad()) {
        T* dst = b.mutable_grad().data() + n * block_b;
        for (std::size_t i = 0; i < block_b; ++i) dst[i] += src[block_a + i];
      }
    }
  });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  require_rank(x, 2, "linear input");
  require_rank(weight, 2, "linear weight");
  require_rank(bias, 1, "linear bias");
  if (x.dim(1) != weight.dim(1) || bias.dim(0) != weight.dim(0)) {
    throw ShapeError("linear: input shape " + shape_string(x.shape()) +
                     " incompatible with weight shape " + shape_string(weight.shape()) +
                     " and bias shape " + shape_string(bias.shape()));
  }
  const std::size_t N = x.dim(0), in = x.dim(1), outd = weight.dim(0);
  Tensor<T> out(Shape{N, outd});
  // Plain dot products keep each row independent of the batch size; a
  // GEMM would switch kernels (and summation order) between N=1 and N>1.
  const T* xd = x.data().data();
  const T* wd = weight.data().data();
  auto yd = out.data();
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t o = 0; o < outd; ++o) {
      T acc = 0;
      for (std::size_t k = 0; k < in; ++k) acc += xd[n * in + k] * wd[o * in + k];
      yd[n * outd + o] = acc + bias[o];
    }
  }
  return record<T>(out, "linear", {x, weight, bias},
                   [x, weight, bias, N, in, outd](std::span<const T>, std::span<const T> grad) {
    ConstMatrixMap<T> gy(grad.data(), N, outd);
    if (x.tracks_grad()) {
      MatrixMap<T>(x.mutable_grad().data(), N, in).noalias() +=
          gy * ConstMatrixMap<T>(weight.data().data(), outd, in);
    }
    if (weight.tracks_grad()) {
      MatrixMap<T>(weight.mutable_grad().data(), outd, in).noalias() +=
          gy.transpose() * ConstMatrixMap<T>(x.data().data(), N, in);
    }
    if (bias.tracks_grad()) {
      auto gb = bias.mutable_grad();
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t o = 0; o < outd; ++o) gb[o] += gy(n, o);
    }
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: cannot view " + shape_string(x.shape()) + " as " +
                     shape_string(shape));
  }
  Tensor<T> out(std::move(shape), std::vector<T>(x.data().begin(), x.data().end()));
  return record<T>(out, "reshape", {x}, [x](std::span<const T>, std::span<const T> grad) {
    auto g = x.mutable_grad();
    for (std::size_t i = 0; i < grad.size(); ++i) g[i] += grad[i];
  });
}

template <typename T>
Tensor<T> euclidean_distance(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank(a, 2, "euclidean_distance");
  require_same_shape(a, b, "euclidean_distance");
  const std::size_t N = a.dim(0), D = a.dim(1);
  Tensor<T> out(Shape{N});
  for (std::size_t n = 0; n < N; ++n) {
    T acc = 0;
    for (std::size_t d = 0; d < D; ++d) {
      const T diff = a[n * D + d] - b[n * D + d];
      acc += diff * diff;
    }
    out[n] = std::sqrt(acc);
  }
  return record<T>(out, "euclidean_distance", {a, b},
                   [a, b, N, D](std::span<const T> dist, std::span<const T> grad) {
    for (std::size_t n = 0; n < N; ++n) {
      const T denom = std::sqrt(dist[n] * dist[n] + T(1e-12));
      const T coef = grad[n] / denom;
      for (std::size_t d = 0; d < D; ++d) {
        const T g = coef * (a[n * D + d] - b[n * D + d]);
        if (a.tracks_grad()) a.mutable_grad()[n * D + d] += g;
        if (b.tracks_grad()) b.mutable_grad()[n * D + d] -= g;
      }
    }
  });
}

template <typename T>
Tensor<T> l2_normalize(const Tensor<T>& x) {
  require_rank(x, 2, "l2_normalize");
  const std::size_t N = x.dim(0), D = x.dim(1);
  Tensor<T> out(x.shape());
  std::vector<T> norms(N);
  for (std::size_t n = 0; n < N; ++n) {
    T acc = 0;
    for (std::size_t d = 0; d < D; ++d) acc += x[n * D + d] * x[n * D + d];
    norms[n] = std::max(std::sqrt(acc), T(1e-12));
    for (std::size_t d = 0; d < D; ++d) out[n * D + d] = x[n * D + d] / norms[n];
  }
  return record<T>(out, "l2_normalize", {x},
                   [x, N, D, norms = std::move(norms)](std::span<const T> y, std::span<const T> grad) {
    auto gx = x.mutable_grad();
    for (std::size_t n = 0; n < N; ++n) {
      T dot = 0;
      for (std::size_t d = 0; d < D; ++d) dot += y[n * D + d] * grad[n * D + d];
      for (std::size_t d = 0; d < D; ++d) {
        gx[n * D + d] += (grad[n * D + d] - y[n * D + d] * dot) / norms[n];
      }
    }
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T acc = 0;
  for (T v : x.data()) acc += v;
  return record<T>(Tensor<T>::scalar(acc), "sum", {x},
                   [x](std::span<const T>, std::span<const T> grad) {
    auto g = x.mutable_grad();
    for (auto& v : g) v += grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  T acc = 0;
  for (T v : x.data()) acc += v;
  const T count = static_cast<T>(x.numel());
  return record<T>(Tensor<T>::scalar(acc / count), "mean", {x},
                   [x, count](std::span<const T>, std::span<const T> grad) {
    auto g = x.mutable_grad();
    for (auto& v : g) v += grad[0] / count;
  });
}

template <typename T>
Tensor<T> stack_batch(const std::vector<Tensor<T>>& items) {
  if (items.empty()) throw ShapeError("stack_batch: no items");
  Shape shape{items.size()};
  shape.insert(shape.end(), items.front().shape().begin(), items.front().shape().end());
  Tensor<T> out(shape);
  const std::size_t block = items.front().numel();
  for (std::size_t i = 0; i < items.size(); ++i) {
    require_same_shape(items[i], items.front(), "stack_batch");
    std::copy(items[i].data().begin(), items[i].data().end(), out.data().begin() + i * block);
  }
  return out;
}

template <typename T>
Tensor<T> batch_item(const Tensor<T>& batch, std::size_t n) {
  if (n >= batch.dim(0)) throw ShapeError("batch_item: index out of range");
  Shape shape = batch.shape();
  shape[0] = 1;
  const std::size_t block = batch.numel() / batch.dim(0);
  auto begin = batch.data().begin() + n * block;
  return Tensor<T>(shape, std::vector<T>(begin, begin + block));
}

#define LOGONET_INSTANTIATE_OPS(T)                                                        \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,         \
                            std::size_t, std::size_t);                                    \
  template Tensor<T> maxpool2d(const Tensor<T>&, std::size_t, std::size_t);               \
  template Tensor<T> global_avgpool(const Tensor<T>&);                                    \
  template Tensor<T> global_maxpool(const Tensor<T>&);                                    \
  template Tensor<T> channel_mean(const Tensor<T>&);                                      \
  template Tensor<T> channel_max(const Tensor<T>&);                                       \
  template Tensor<T> relu(const Tensor<T>&);                                              \
  template Tensor<T> sigmoid(const Tensor<T>&);                                           \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                     \
  template Tensor<T> scale(const Tensor<T>&, T);                                          \
  template Tensor<T> mul_broadcast(const Tensor<T>&, const Tensor<T>&);                   \
  template Tensor<T> concat_channels(const Tensor<T>&, const Tensor<T>&);                 \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);        \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                    \
  template Tensor<T> euclidean_distance(const Tensor<T>&, const Tensor<T>&);              \
  template Tensor<T> l2_normalize(const Tensor<T>&);                                      \
  template Tensor<T> sum(const Tensor<T>&);                                               \
  template Tensor<T> mean(const Tensor<T>&);                                              \
  template Tensor<T> stack_batch(const std::vector<Tensor<T>>&);                          \
  template Tensor<T> batch_item(const Tensor<T>&, std::size_t);

LOGONET_INSTANTIATE_OPS(float)
LOGONET_INSTANTIATE_OPS(double)

#undef LOGONET_INSTANTIATE_OPS

}  // namespace logonet

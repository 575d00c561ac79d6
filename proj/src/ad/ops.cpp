#include "fvs/ad/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "fvs/error.hpp"

namespace fvs::ad {

namespace {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void RequireRank3(const Shape& s, const char* op) {
  if (s.size() != 3) Fail(ErrorCode::kShapeError, std::string(op) + " expects C×H×W, got " + ShapeString(s));
}

void RequireSame(const Shape& a, const Shape& b, const char* op) {
  if (a != b) {
    Fail(ErrorCode::kShapeError, std::string(op) + " shape mismatch " + ShapeString(a) + " vs " + ShapeString(b));
  }
}

template <typename T>
Node<T>* GradTarget(Node<T>& self, std::size_t i) {
  Node<T>* p = self.parents[i].get();
  if (!p || !p->requires_grad) return nullptr;
  p->EnsureGrad();
  return p;
}

struct ConvGeometry {
  std::int64_t cin, h, w, cout, k, stride, pad, ho, wo;
  bool direct() const { return k == 1 && stride == 1 && pad == 0; }
};

template <typename T>
void Im2Col(const T* x, const ConvGeometry& g, T* cols) {
  const std::int64_t hw = g.ho * g.wo;
  for (std::int64_t ci = 0; ci < g.cin; ++ci) {
    for (std::int64_t ky = 0; ky < g.k; ++ky) {
      for (std::int64_t kx = 0; kx < g.k; ++kx) {
        T* row = cols + ((ci * g.k + ky) * g.k + kx) * hw;
        // Output columns [lo, hi) read inside the input row.
        const std::int64_t lo = std::min(g.wo, (std::max<std::int64_t>(0, g.pad - kx) + g.stride - 1) / g.stride);
        const std::int64_t hi = std::max(lo, std::min(g.wo, (g.w - 1 + g.pad - kx) / g.stride + 1));
        for (std::int64_t oy = 0; oy < g.ho; ++oy) {
          const std::int64_t iy = oy * g.stride + ky - g.pad;
          T* dst = row + oy * g.wo;
          if (iy < 0 || iy >= g.h) {
            std::fill(dst, dst + g.wo, T(0));
            continue;
          }
          const T* src = x + (ci * g.h + iy) * g.w;
          const std::int64_t off = kx - g.pad;
          std::fill(dst, dst + lo, T(0));
          if (g.stride == 1) {
            std::copy(src + lo + off, src + hi + off, dst + lo);
          } else {
            for (std::int64_t ox = lo; ox < hi; ++ox) dst[ox] = src[ox * g.stride + off];
          }
          std::fill(dst + hi, dst + g.wo, T(0));
        }
      }
    }
  }
}

template <typename T>
void Col2ImAdd(const T* cols, const ConvGeometry& g, T* dx) {
  const std::int64_t hw = g.ho * g.wo;
  for (std::int64_t ci = 0; ci < g.cin; ++ci) {
    for (std::int64_t ky = 0; ky < g.k; ++ky) {
      for (std::int64_t kx = 0; kx < g.k; ++kx) {
        const T* row = cols + ((ci * g.k + ky) * g.k + kx) * hw;
        for (std::int64_t oy = 0; oy < g.ho; ++oy) {
          const std::int64_t iy = oy * g.stride + ky - g.pad;
          if (iy < 0 || iy >= g.h) continue;
          const T* src = row + oy * g.wo;
          T* dst = dx + (ci * g.h + iy) * g.w;
          for (std::int64_t ox = 0; ox < g.wo; ++ox) {
            const std::int64_t ix = ox * g.stride + kx - g.pad;
            if (ix >= 0 && ix < g.w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

template <typename T>
BasicTensor<T> Unary(const BasicTensor<T>& x, const char* op, T (*f)(T),
                     T (*df)(T x, T y)) {
  std::vector<T> out(x.numel());
  const auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  return MakeResult<T>(x.shape(), std::move(out), {x}, op, [df](Node<T>& self) {
    if (Node<T>* p = GradTarget(self, 0)) {
      for (std::size_t i = 0; i < self.value.size(); ++i) {
        p->grad[i] += self.grad[i] * df(p->value[i], self.value[i]);
      }
    }
  });
}

template <typename T>
T SigmoidScalar(T x) {
  if (x >= 0) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace

template <typename T>
BasicTensor<T> Conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                      const BasicTensor<T>& bias, int stride, int padding) {
  RequireRank3(input.shape(), "conv2d");
  if (weight.rank() != 4) Fail(ErrorCode::kShapeError, "conv2d weight must be 4-D");
  ConvGeometry g{};
  g.cin = input.dim(0);
  g.h = input.dim(1);
  g.w = input.dim(2);
  g.cout = weight.dim(0);
  g.k = weight.dim(2);
  if (weight.dim(1) != g.cin || weight.dim(3) != g.k) {
    Fail(ErrorCode::kShapeError, "conv2d weight " + ShapeString(weight.shape()) +
                                     " does not fit input " + ShapeString(input.shape()));
  }
  if (g.k != 1 && g.k != 3) Fail(ErrorCode::kShapeError, "conv2d kernel must be 1 or 3");
  g.pad = padding < 0 ? g.k / 2 : padding;
  if (g.pad != 0 && g.pad != g.k / 2) Fail(ErrorCode::kShapeError, "conv2d padding must be 0 or k/2");
  if (stride != 1 && stride != 2) Fail(ErrorCode::kShapeError, "conv2d stride must be 1 or 2");
  g.stride = stride;
  if (g.h + 2 * g.pad < g.k || g.w + 2 * g.pad < g.k) {
    Fail(ErrorCode::kShapeError, "conv2d input smaller than kernel");
  }
  g.ho = (g.h + 2 * g.pad - g.k) / g.stride + 1;
  g.wo = (g.w + 2 * g.pad - g.k) / g.stride + 1;
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != g.cout)) {
    Fail(ErrorCode::kShapeError, "conv2d bias must have Cout entries");
  }
  const std::int64_t rows = g.cin * g.k * g.k;
  const std::int64_t hw = g.ho * g.wo;

  std::vector<T> cols;
  const T* cols_ptr = input.data().data();
  if (!g.direct()) {
    cols.resize(std::size_t(rows * hw));
    Im2Col(input.data().data(), g, cols.data());
    cols_ptr = cols.data();
  }
  std::vector<T> out(std::size_t(g.cout * hw));
  Eigen::Map<const Mat<T>> w(weight.data().data(), g.cout, rows);
  Eigen::Map<const Mat<T>> c(cols_ptr, rows, hw);
  Eigen::Map<Mat<T>> o(out.data(), g.cout, hw);
  o.noalias() = w * c;
  if (bias.defined()) {
    const auto b = bias.data();
    for (std::int64_t co = 0; co < g.cout; ++co) o.row(co).array() += b[co];
  }
  std::vector<BasicTensor<T>> parents{input, weight};
  if (bias.defined()) parents.push_back(bias);
  const bool has_bias = bias.defined();
  return MakeResult<T>({g.cout, g.ho, g.wo}, std::move(out), parents, "conv2d",
                       [g, rows, hw, has_bias](Node<T>& self) {
    Eigen::Map<const Mat<T>> go(self.grad.data(), g.cout, hw);
    const Node<T>& x = *self.parents[0];
    const Node<T>& wn = *self.parents[1];
    Node<T>* dx = GradTarget(self, 0);
    Node<T>* dw = GradTarget(self, 1);
    Node<T>* db = has_bias ? GradTarget(self, 2) : nullptr;
    if (dw) {
      std::vector<T> cols;
      const T* cp = x.value.data();
      if (!g.direct()) {
        cols.resize(std::size_t(rows * hw));
        Im2Col(x.value.data(), g, cols.data());
        cp = cols.data();
      }
      Eigen::Map<const Mat<T>> c(cp, rows, hw);
      Eigen::Map<Mat<T>> gw(dw->grad.data(), g.cout, rows);
      gw.noalias() += go * c.transpose();
    }
    if (db) {
      // Plain loop: Eigen's vectorized redux order depends on buffer alignment.
      for (std::int64_t co = 0; co < g.cout; ++co) {
        T s = 0;
        const T* row = self.grad.data() + co * hw;
        for (std::int64_t i = 0; i < hw; ++i) s += row[i];
        db->grad[co] += s;
      }
    }
    if (dx) {
      Eigen::Map<const Mat<T>> w(wn.value.data(), g.cout, rows);
      if (g.direct()) {
        Eigen::Map<Mat<T>> gx(dx->grad.data(), rows, hw);
        gx.noalias() += w.transpose() * go;
      } else {
        Mat<T> gc = w.transpose() * go;
        Col2ImAdd(gc.data(), g, dx->grad.data());
      }
    }
  });
}

template <typename T>
BasicTensor<T> Relu(const BasicTensor<T>& x) {
  return Unary<T>(
      x, "relu", [](T v) { return v < 0 ? T(0) : v; }, [](T v, T) { return v > 0 ? T(1) : T(0); });
}

template <typename T>
BasicTensor<T> Sigmoid(const BasicTensor<T>& x) {
  return Unary<T>(x, "sigmoid", &SigmoidScalar<T>, [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
BasicTensor<T> Tanh(const BasicTensor<T>& x) {
  return Unary<T>(
      x, "tanh", [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
BasicTensor<T> Add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  RequireSame(a.shape(), b.shape(), "add");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return MakeResult<T>(a.shape(), std::move(out), {a, b}, "add", [](Node<T>& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (Node<T>* p = GradTarget(self, k)) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
      }
    }
  });
}

template <typename T>
BasicTensor<T> Sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  RequireSame(a.shape(), b.shape(), "sub");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return MakeResult<T>(a.shape(), std::move(out), {a, b}, "sub", [](Node<T>& self) {
    if (Node<T>* p = GradTarget(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
    }
    if (Node<T>* p = GradTarget(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] -= self.grad[i];
    }
  });
}

template <typename T>
BasicTensor<T> Mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  RequireSame(a.shape(), b.shape(), "mul");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return MakeResult<T>(a.shape(), std::move(out), {a, b}, "mul", [](Node<T>& self) {
    const auto& av = self.parents[0]->value;
    const auto& bv = self.parents[1]->value;
    if (Node<T>* p = GradTarget(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i] * bv[i];
    }
    if (Node<T>* p = GradTarget(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i] * av[i];
    }
  });
}

template <typename T>
BasicTensor<T> Scale(const BasicTensor<T>& x, T factor) {
  std::vector<T> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] * factor;
  return MakeResult<T>(x.shape(), std::move(out), {x}, "scale", [factor](Node<T>& self) {
    if (Node<T>* p = GradTarget(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i] * factor;
    }
  });
}

template <typename T>
BasicTensor<T> AvgPool2(const BasicTensor<T>& x) {
  RequireRank3(x.shape(), "avg_pool2");
  const auto c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (h % 2 || w % 2) Fail(ErrorCode::kShapeError, "avg_pool2 needs even H and W, got " + ShapeString(x.shape()));
  const auto ho = h / 2, wo = w / 2;
  std::vector<T> out(std::size_t(c * ho * wo));
  const T* in = x.data().data();
  for (std::int64_t ch = 0; ch < c; ++ch) {
    for (std::int64_t y = 0; y < ho; ++y) {
      const T* r0 = in + (ch * h + 2 * y) * w;
      const T* r1 = r0 + w;
      T* dst = out.data() + (ch * ho + y) * wo;
      for (std::int64_t xx = 0; xx < wo; ++xx) {
        dst[xx] = T(0.25) * (r0[2 * xx] + r0[2 * xx + 1] + r1[2 * xx] + r1[2 * xx + 1]);
      }
    }
  }
  return MakeResult<T>({c, ho, wo}, std::move(out), {x}, "avg_pool2", [c, h, w, ho, wo](Node<T>& self) {
    Node<T>* p = GradTarget(self, 0);
    if (!p) return;
    for (std::int64_t ch = 0; ch < c; ++ch) {
      for (std::int64_t y = 0; y < ho; ++y) {
        for (std::int64_t xx = 0; xx < wo; ++xx) {
          const T g = T(0.25) * self.grad[std::size_t((ch * ho + y) * wo + xx)];
          T* r0 = p->grad.data() + (ch * h + 2 * y) * w + 2 * xx;
          r0[0] += g;
          r0[1] += g;
          r0[w] += g;
          r0[w + 1] += g;
        }
      }
    }
  });
}

template <typename T>
BasicTensor<T> UpsampleNearest2(const BasicTensor<T>& x) {
  RequireRank3(x.shape(), "upsample_nearest2");
  const auto c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const auto ho = 2 * h, wo = 2 * w;
  std::vector<T> out(std::size_t(c * ho * wo));
  const T* in = x.data().data();
  for (std::int64_t ch = 0; ch < c; ++ch) {
    for (std::int64_t y = 0; y < ho; ++y) {
      const T* src = in + (ch * h + y / 2) * w;
      T* dst = out.data() + (ch * ho + y) * wo;
      for (std::int64_t xx = 0; xx < wo; ++xx) dst[xx] = src[xx / 2];
    }
  }
  return MakeResult<T>({c, ho, wo}, std::move(out), {x}, "upsample_nearest2",
                       [c, h, w, ho, wo](Node<T>& self) {
    Node<T>* p = GradTarget(self, 0);
    if (!p) return;
    for (std::int64_t ch = 0; ch < c; ++ch) {
      for (std::int64_t y = 0; y < ho; ++y) {
        const T* g = self.grad.data() + (ch * ho + y) * wo;
        T* dst = p->grad.data() + (ch * h + y / 2) * w;
        for (std::int64_t xx = 0; xx < wo; ++xx) dst[xx / 2] += g[xx];
      }
    }
  });
}

template <typename T>
BasicTensor<T> ConcatChannels(const std::vector<BasicTensor<T>>& parts) {
  if (parts.empty()) Fail(ErrorCode::kEmptyInput, "concat of nothing");
  RequireRank3(parts[0].shape(), "concat_channels");
  const auto h = parts[0].dim(1), w = parts[0].dim(2);
  std::int64_t c = 0;
  for (const auto& p : parts) {
    RequireRank3(p.shape(), "concat_channels");
    if (p.dim(1) != h || p.dim(2) != w) Fail(ErrorCode::kShapeError, "concat_channels spatial mismatch");
    c += p.dim(0);
  }
  std::vector<T> out;
  out.reserve(std::size_t(c * h * w));
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  return MakeResult<T>({c, h, w}, std::move(out), parts, "concat_channels", [](Node<T>& self) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      const std::size_t n = self.parents[k]->value.size();
      if (Node<T>* p = GradTarget(self, k)) {
        for (std::size_t i = 0; i < n; ++i) p->grad[i] += self.grad[offset + i];
      }
      offset += n;
    }
  });
}

template <typename T>
BasicTensor<T> SliceChannels(const BasicTensor<T>& x, std::int64_t begin, std::int64_t count) {
  RequireRank3(x.shape(), "slice_channels");
  if (begin < 0 || count < 0 || begin + count > x.dim(0)) {
    Fail(ErrorCode::kShapeError, "slice_channels out of range");
  }
  const std::int64_t plane = x.dim(1) * x.dim(2);
  std::vector<T> out(x.data().begin() + begin * plane, x.data().begin() + (begin + count) * plane);
  return MakeResult<T>({count, x.dim(1), x.dim(2)}, std::move(out), {x}, "slice_channels",
                       [begin, plane](Node<T>& self) {
    if (Node<T>* p = GradTarget(self, 0)) {
      T* dst = p->grad.data() + begin * plane;
      for (std::size_t i = 0; i < self.grad.size(); ++i) dst[i] += self.grad[i];
    }
  });
}

template <typename T>
BasicTensor<T> PadReplicate(const BasicTensor<T>& x, std::int64_t height, std::int64_t width) {
  RequireRank3(x.shape(), "pad_replicate");
  const auto c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (height < h || width < w || h == 0 || w == 0) Fail(ErrorCode::kShapeError, "pad_replicate cannot shrink");
  if (height == h && width == w) return x;
  std::vector<T> out(std::size_t(c * height * width));
  for (std::int64_t ch = 0; ch < c; ++ch) {
    for (std::int64_t y = 0; y < height; ++y) {
      const T* src = x.data().data() + (ch * h + std::min(y, h - 1)) * w;
      T* dst = out.data() + (ch * height + y) * width;
      for (std::int64_t xx = 0; xx < width; ++xx) dst[xx] = src[std::min(xx, w - 1)];
    }
  }
  return MakeResult<T>({c, height, width}, std::move(out), {x}, "pad_replicate",
                       [c, h, w, height, width](Node<T>& self) {
    Node<T>* p = GradTarget(self, 0);
    if (!p) return;
    for (std::int64_t ch = 0; ch < c; ++ch) {
      for (std::int64_t y = 0; y < height; ++y) {
        const T* g = self.grad.data() + (ch * height + y) * width;
        T* dst = p->grad.data() + (ch * h + std::min(y, h - 1)) * w;
        for (std::int64_t xx = 0; xx < width; ++xx) dst[std::min(xx, w - 1)] += g[xx];
      }
    }
  });
}

template <typename T>
BasicTensor<T> Crop(const BasicTensor<T>& x, std::int64_t height, std::int64_t width) {
  RequireRank3(x.shape(), "crop");
  const auto c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (height > h || width > w || height < 0 || width < 0) Fail(ErrorCode::kShapeError, "crop window too large");
  if (height == h && width == w) return x;
  std::vector<T> out(std::size_t(c * height * width));
  for (std::int64_t ch = 0; ch < c; ++ch) {
    for (std::int64_t y = 0; y < height; ++y) {
      const T* src = x.data().data() + (ch * h + y) * w;
      std::copy(src, src + width, out.data() + (ch * height + y) * width);
    }
  }
  return MakeResult<T>({c, height, width}, std::move(out), {x}, "crop",
                       [c, h, w, height, width](Node<T>& self) {
    Node<T>* p = GradTarget(self, 0);
    if (!p) return;
    for (std::int64_t ch = 0; ch < c; ++ch) {
      for (std::int64_t y = 0; y < height; ++y) {
        const T* g = self.grad.data() + (ch * height + y) * width;
        T* dst = p->grad.data() + (ch * h + y) * w;
        for (std::int64_t xx = 0; xx < width; ++xx) dst[xx] += g[xx];
      }
    }
  });
}

template <typename T>
std::vector<BasicTensor<T>> SoftmaxSet(const std::vector<BasicTensor<T>>& logits) {
  if (logits.empty()) Fail(ErrorCode::kEmptyInput, "softmax over an empty set");
  const std::size_t k = logits.size();
  const std::size_t n = logits[0].numel();
  for (const auto& l : logits) RequireSame(l.shape(), logits[0].shape(), "softmax_set");
  auto probs = std::make_shared<std::vector<std::vector<T>>>(k, std::vector<T>(n));
  for (std::size_t i = 0; i < n; ++i) {
    T m = logits[0].data()[i];
    for (std::size_t j = 1; j < k; ++j) m = std::max(m, logits[j].data()[i]);
    T s = 0;
    for (std::size_t j = 0; j < k; ++j) {
      const T e = std::exp(logits[j].data()[i] - m);
      (*probs)[j][i] = e;
      s += e;
    }
    for (std::size_t j = 0; j < k; ++j) (*probs)[j][i] /= s;
  }
  std::vector<BasicTensor<T>> out;
  out.reserve(k);
  for (std::size_t j = 0; j < k; ++j) {
    out.push_back(MakeResult<T>(logits[0].shape(), (*probs)[j], logits, "softmax_set",
                                [probs, j, k, n](Node<T>& self) {
      const auto& y = *probs;
      for (std::size_t q = 0; q < k; ++q) {
        Node<T>* p = GradTarget(self, q);
        if (!p) continue;
        const T delta = q == j ? T(1) : T(0);
        for (std::size_t i = 0; i < n; ++i) {
          p->grad[i] += self.grad[i] * y[j][i] * (delta - y[q][i]);
        }
      }
    }));
  }
  return out;
}

template <typename T>
BasicTensor<T> WeightedSum(const std::vector<BasicTensor<T>>& weights,
                           const std::vector<BasicTensor<T>>& values) {
  if (weights.empty() || weights.size() != values.size()) {
    Fail(ErrorCode::kShapeError, "weighted_sum needs matching non-empty sets");
  }
  const std::size_t k = weights.size();
  RequireRank3(values[0].shape(), "weighted_sum");
  const auto c = values[0].dim(0), h = values[0].dim(1), w = values[0].dim(2);
  const std::size_t plane = std::size_t(h * w);
  for (std::size_t j = 0; j < k; ++j) {
    RequireSame(values[j].shape(), values[0].shape(), "weighted_sum");
    RequireSame(weights[j].shape(), Shape{1, h, w}, "weighted_sum");
  }
  std::vector<T> out(std::size_t(c) * plane, T(0));
  for (std::size_t j = 0; j < k; ++j) {
    const T* wv = weights[j].data().data();
    const T* vv = values[j].data().data();
    for (std::int64_t ch = 0; ch < c; ++ch) {
      for (std::size_t i = 0; i < plane; ++i) out[ch * plane + i] += wv[i] * vv[ch * plane + i];
    }
  }
  std::vector<BasicTensor<T>> parents = weights;
  parents.insert(parents.end(), values.begin(), values.end());
  return MakeResult<T>(values[0].shape(), std::move(out), parents, "weighted_sum",
                       [k, c, plane](Node<T>& self) {
    for (std::size_t j = 0; j < k; ++j) {
      const auto& wv = self.parents[j]->value;
      const auto& vv = self.parents[k + j]->value;
      if (Node<T>* pw = GradTarget(self, j)) {
        for (std::int64_t ch = 0; ch < c; ++ch) {
          for (std::size_t i = 0; i < plane; ++i) pw->grad[i] += self.grad[ch * plane + i] * vv[ch * plane + i];
        }
      }
      if (Node<T>* pv = GradTarget(self, k + j)) {
        for (std::int64_t ch = 0; ch < c; ++ch) {
          for (std::size_t i = 0; i < plane; ++i) pv->grad[ch * plane + i] += self.grad[ch * plane + i] * wv[i];
        }
      }
    }
  });
}

template <typename T>
BasicTensor<T> Sum(const BasicTensor<T>& x) {
  T s = 0;
  for (T v : x.data()) s += v;
  return MakeResult<T>({1}, {s}, {x}, "sum", [](Node<T>& self) {
    if (Node<T>* p = GradTarget(self, 0)) {
      for (auto& g : p->grad) g += self.grad[0];
    }
  });
}

template <typename T>
BasicTensor<T> Mean(const BasicTensor<T>& x) {
  if (x.numel() == 0) Fail(ErrorCode::kEmptyInput, "mean of empty tensor");
  return Scale(Sum(x), T(1) / T(x.numel()));
}

template <typename T>
BasicTensor<T> MeanAbsDiff(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  RequireSame(a.shape(), b.shape(), "mean_abs_diff");
  if (a.numel() == 0) Fail(ErrorCode::kEmptyInput, "mean_abs_diff of empty tensors");
  const std::size_t n = a.numel();
  T s = 0;
  for (std::size_t i = 0; i < n; ++i) s += std::abs(a.data()[i] - b.data()[i]);
  s /= T(n);
  return MakeResult<T>({1}, {s}, {a, b}, "mean_abs_diff", [n](Node<T>& self) {
    const auto& av = self.parents[0]->value;
    const auto& bv = self.parents[1]->value;
    const T g = self.grad[0] / T(n);
    Node<T>* pa = GradTarget(self, 0);
    Node<T>* pb = GradTarget(self, 1);
    for (std::size_t i = 0; i < n; ++i) {
      const T d = av[i] - bv[i];
      const T sgn = d > 0 ? T(1) : (d < 0 ? T(-1) : T(0));
      if (pa) pa->grad[i] += g * sgn;
      if (pb) pb->grad[i] -= g * sgn;
    }
  });
}

#define FVS_INSTANTIATE_OPS(T)                                                                   \
  template BasicTensor<T> Conv2d(const BasicTensor<T>&, const BasicTensor<T>&,                   \
                                 const BasicTensor<T>&, int, int);                               \
  template BasicTensor<T> Relu(const BasicTensor<T>&);                                          \
  template BasicTensor<T> Sigmoid(const BasicTensor<T>&);                                       \
  template BasicTensor<T> Tanh(const BasicTensor<T>&);                                          \
  template BasicTensor<T> Add(const BasicTensor<T>&, const BasicTensor<T>&);                    \
  template BasicTensor<T> Sub(const BasicTensor<T>&, const BasicTensor<T>&);                    \
  template BasicTensor<T> Mul(const BasicTensor<T>&, const BasicTensor<T>&);                    \
  template BasicTensor<T> Scale(const BasicTensor<T>&, T);                                      \
  template BasicTensor<T> AvgPool2(const BasicTensor<T>&);                                      \
  template BasicTensor<T> UpsampleNearest2(const BasicTensor<T>&);                              \
  template BasicTensor<T> ConcatChannels(const std::vector<BasicTensor<T>>&);                   \
  template BasicTensor<T> SliceChannels(const BasicTensor<T>&, std::int64_t, std::int64_t);     \
  template BasicTensor<T> PadReplicate(const BasicTensor<T>&, std::int64_t, std::int64_t);      \
  template BasicTensor<T> Crop(const BasicTensor<T>&, std::int64_t, std::int64_t);              \
  template std::vector<BasicTensor<T>> SoftmaxSet(const std::vector<BasicTensor<T>>&);          \
  template BasicTensor<T> WeightedSum(const std::vector<BasicTensor<T>>&,                       \
                                      const std::vector<BasicTensor<T>>&);                      \
  template BasicTensor<T> Sum(const BasicTensor<T>&);                                           \
  template BasicTensor<T> Mean(const BasicTensor<T>&);                                          \
  template BasicTensor<T> MeanAbsDiff(const BasicTensor<T>&, const BasicTensor<T>&);

FVS_INSTANTIATE_OPS(float)
FVS_INSTANTIATE_OPS(double)

}  // namespace fvs::ad

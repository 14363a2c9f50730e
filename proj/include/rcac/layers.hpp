#pragma once

#include <Eigen/Core>
#include <cstring>
#include <string>
#include <vector>

#include "rcac/params.hpp"
#include "rcac/rng.hpp"
#include "rcac/tensor.hpp"

namespace rcac {

enum class LayerKind { Dense, Conv2d, Deconv2d, ReLU, Tanh, LayerNorm, Flatten, Reshape };

struct LayerSpec {
  LayerKind kind = LayerKind::ReLU;
  int in = 0, out = 0;            // dense; layernorm uses `in` as feature count
  int in_ch = 0, out_ch = 0;      // conv / deconv
  int kernel = 0, stride = 1, out_pad = 0;
  int c = 0, h = 0, w = 0;        // reshape target

  static LayerSpec dense(int in, int out) {
    LayerSpec s;
    s.kind = LayerKind::Dense;
    s.in = in;
    s.out = out;
    return s;
  }
  static LayerSpec conv2d(int in_ch, int out_ch, int kernel, int stride) {
    LayerSpec s;
    s.kind = LayerKind::Conv2d;
    s.in_ch = in_ch;
    s.out_ch = out_ch;
    s.kernel = kernel;
    s.stride = stride;
    return s;
  }
  static LayerSpec deconv2d(int in_ch, int out_ch, int kernel, int stride, int out_pad = 0) {
    LayerSpec s;
    s.kind = LayerKind::Deconv2d;
    s.in_ch = in_ch;
    s.out_ch = out_ch;
    s.kernel = kernel;
    s.stride = stride;
    s.out_pad = out_pad;
    if (out_pad >= stride) throw ConfigError("deconv output padding must be < stride");
    return s;
  }
  static LayerSpec relu() { return LayerSpec{LayerKind::ReLU}; }
  static LayerSpec tanh() {
    LayerSpec s;
    s.kind = LayerKind::Tanh;
    return s;
  }
  static LayerSpec layer_norm(int features) {
    LayerSpec s;
    s.kind = LayerKind::LayerNorm;
    s.in = features;
    return s;
  }
  static LayerSpec flatten() {
    LayerSpec s;
    s.kind = LayerKind::Flatten;
    return s;
  }
  static LayerSpec reshape(int c, int h, int w) {
    LayerSpec s;
    s.kind = LayerKind::Reshape;
    s.c = c;
    s.h = h;
    s.w = w;
    return s;
  }
};

// Record of one forward evaluation, sufficient for an exact reverse pass.
template <class T>
struct Tape {
  std::vector<Tensor<T>> inputs;  // input tensor per layer (empty where unused)
  std::vector<Shape> in_shapes;   // input shape per layer
};

namespace detail {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<RowMat<T>>;
template <class T>
using CMatMap = Eigen::Map<const RowMat<T>>;

// Gathers sliding windows: cols is (C*k*k) x (N*OH*OW),
// cols[(c*k+ky)*k+kx][n*OH*OW + oy*OW + ox] = src[n][c][oy*s+ky][ox*s+kx].
template <class T>
inline void im2col(const T* src, int n_batch, int ch, int sh, int sw, int k, int s, int oh,
                   int ow, T* cols) {
  const int64_t ncols = int64_t(n_batch) * oh * ow;
  for (int c = 0; c < ch; ++c)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        T* dst = cols + (int64_t(c) * k * k + ky * k + kx) * ncols;
        for (int n = 0; n < n_batch; ++n) {
          const T* base = src + ((int64_t(n) * ch + c) * sh + ky) * sw + kx;
          for (int oy = 0; oy < oh; ++oy) {
            const T* line = base + int64_t(oy) * s * sw;
            for (int ox = 0; ox < ow; ++ox) *dst++ = line[int64_t(ox) * s];
          }
        }
      }
}

// Scatter-add inverse of im2col (windows overlap when stride < kernel).
template <class T>
inline void col2im_add(const T* cols, int n_batch, int ch, int sh, int sw, int k, int s, int oh,
                       int ow, T* dst) {
  const int64_t ncols = int64_t(n_batch) * oh * ow;
  for (int c = 0; c < ch; ++c)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const T* col = cols + (int64_t(c) * k * k + ky * k + kx) * ncols;
        for (int n = 0; n < n_batch; ++n) {
          T* base = dst + ((int64_t(n) * ch + c) * sh + ky) * sw + kx;
          for (int oy = 0; oy < oh; ++oy) {
            T* line = base + int64_t(oy) * s * sw;
            for (int ox = 0; ox < ow; ++ox) line[int64_t(ox) * s] += *col++;
          }
        }
      }
}

// (N,C,P) row-major -> (C, N*P) matrix.
template <class T>
inline void nchw_to_mat(const T* src, int n_batch, int ch, int64_t p, T* dst) {
  for (int c = 0; c < ch; ++c)
    for (int n = 0; n < n_batch; ++n)
      std::memcpy(dst + (int64_t(c) * n_batch + n) * p, src + (int64_t(n) * ch + c) * p,
                  sizeof(T) * p);
}

// (C, N*P) matrix -> (N,C,P) row-major. Add or assign.
template <class T>
inline void mat_to_nchw(const T* src, int n_batch, int ch, int64_t p, T* dst, bool add) {
  for (int c = 0; c < ch; ++c)
    for (int n = 0; n < n_batch; ++n) {
      const T* s = src + (int64_t(c) * n_batch + n) * p;
      T* d = dst + (int64_t(n) * ch + c) * p;
      if (add)
        for (int64_t i = 0; i < p; ++i) d[i] += s[i];
      else
        std::memcpy(d, s, sizeof(T) * p);
    }
}

}  // namespace detail

// A fixed sequence of layers with parameters registered in a ParameterSet
// under "<prefix>.l<i>.*". Shape checking happens on every forward call.
template <class T>
class Net {
 public:
  Net() = default;
  Net(std::string prefix, std::vector<LayerSpec> layers)
      : prefix_(std::move(prefix)), layers_(std::move(layers)) {}

  const std::string& prefix() const { return prefix_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }

  std::string pname(size_t i, const char* what) const {
    return prefix_ + ".l" + std::to_string(i) + "." + what;
  }

  // U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases; layer norm
  // starts as identity.
  void init_params(ParameterSet<T>& ps, Rng& rng) const {
    for (size_t i = 0; i < layers_.size(); ++i) {
      const LayerSpec& L = layers_[i];
      switch (L.kind) {
        case LayerKind::Dense: {
          init_uniform(ps.create(pname(i, "W"), {L.out, L.in}), T(L.in), rng);
          init_uniform(ps.create(pname(i, "b"), {L.out}), T(L.in), rng);
          break;
        }
        case LayerKind::Conv2d: {
          const int fan = L.in_ch * L.kernel * L.kernel;
          init_uniform(ps.create(pname(i, "W"), {L.out_ch, L.in_ch, L.kernel, L.kernel}),
                       T(fan), rng);
          init_uniform(ps.create(pname(i, "b"), {L.out_ch}), T(fan), rng);
          break;
        }
        case LayerKind::Deconv2d: {
          const int fan = L.out_ch * L.kernel * L.kernel;
          init_uniform(ps.create(pname(i, "W"), {L.in_ch, L.out_ch, L.kernel, L.kernel}),
                       T(fan), rng);
          init_uniform(ps.create(pname(i, "b"), {L.out_ch}), T(fan), rng);
          break;
        }
        case LayerKind::LayerNorm: {
          ps.create(pname(i, "g"), {L.in}).fill(T(1));
          ps.create(pname(i, "b"), {L.in});
          break;
        }
        default:
          break;
      }
    }
  }

  Shape output_shape(Shape s) const {
    for (size_t i = 0; i < layers_.size(); ++i) s = layer_out_shape(i, s);
    return s;
  }

  Tensor<T> forward(const ParameterSet<T>& ps, const Tensor<T>& input,
                    Tape<T>* tape = nullptr) const {
    Tensor<T> cur = input;
    if (tape) {
      tape->inputs.clear();
      tape->in_shapes.clear();
    }
    for (size_t i = 0; i < layers_.size(); ++i) {
      Tensor<T> next;
      if (tape) {
        tape->in_shapes.push_back(cur.shape);
        const bool keep = needs_input(layers_[i].kind);
        Tensor<T> held = std::move(cur);
        next = layer_forward(ps, i, held);
        tape->inputs.push_back(keep ? std::move(held) : Tensor<T>());
      } else {
        next = layer_forward(ps, i, cur);
      }
      cur = std::move(next);
    }
    ensure_finite(cur, prefix_.c_str());
    return cur;
  }

  // Reverse pass over a matching tape. Returns the gradient with respect to
  // the forward input. Parameter gradients are accumulated only when
  // `accumulate` is set (an actor update differentiates through the critic
  // without touching critic gradients).
  Tensor<T> backward(ParameterSet<T>& ps, const Tape<T>& tape, const Tensor<T>& dout,
                     bool accumulate = true) const {
    if (tape.in_shapes.size() != layers_.size())
      throw InternalError("tape does not match net " + prefix_);
    Tensor<T> cur = dout;
    for (size_t ri = layers_.size(); ri-- > 0;)
      cur = layer_backward(ps, ri, tape, cur, accumulate);
    ensure_finite(cur, prefix_.c_str());
    return cur;
  }

 private:
  static bool needs_input(LayerKind k) {
    return k != LayerKind::Flatten && k != LayerKind::Reshape;
  }

  static void init_uniform(Tensor<T>& t, T fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(double(fan_in));
    for (T& v : t.data) v = T(rng.uniform(-bound, bound));
  }

  Shape layer_out_shape(size_t i, const Shape& s) const {
    const LayerSpec& L = layers_[i];
    switch (L.kind) {
      case LayerKind::Dense:
        if (s.size() != 2 || s[1] != L.in)
          throw ConfigError(prefix_ + ": dense layer expects (N," + std::to_string(L.in) +
                            "), got " + shape_str(s));
        return {s[0], L.out};
      case LayerKind::Conv2d: {
        if (s.size() != 4 || s[1] != L.in_ch)
          throw ConfigError(prefix_ + ": conv layer expects (N," + std::to_string(L.in_ch) +
                            ",H,W), got " + shape_str(s));
        return {s[0], L.out_ch, conv_out_size(s[2], L.kernel, L.stride),
                conv_out_size(s[3], L.kernel, L.stride)};
      }
      case LayerKind::Deconv2d: {
        if (s.size() != 4 || s[1] != L.in_ch)
          throw ConfigError(prefix_ + ": deconv layer expects (N," + std::to_string(L.in_ch) +
                            ",H,W), got " + shape_str(s));
        return {s[0], L.out_ch, deconv_out_size(s[2], L.kernel, L.stride, L.out_pad),
                deconv_out_size(s[3], L.kernel, L.stride, L.out_pad)};
      }
      case LayerKind::LayerNorm:
        if (s.size() != 2 || s[1] != L.in)
          throw ConfigError(prefix_ + ": layer norm expects (N," + std::to_string(L.in) + ")");
        return s;
      case LayerKind::Flatten: {
        if (s.size() < 2) throw ConfigError(prefix_ + ": flatten expects batched input");
        int f = 1;
        for (size_t d = 1; d < s.size(); ++d) f *= s[d];
        return {s[0], f};
      }
      case LayerKind::Reshape:
        if (s.size() != 2 || s[1] != L.c * L.h * L.w)
          throw ConfigError(prefix_ + ": reshape source size mismatch");
        return {s[0], L.c, L.h, L.w};
      default:
        return s;
    }
  }

  Tensor<T> layer_forward(const ParameterSet<T>& ps, size_t i, const Tensor<T>& in) const {
    using namespace detail;
    const LayerSpec& L = layers_[i];
    Tensor<T> out(layer_out_shape(i, in.shape));
    switch (L.kind) {
      case LayerKind::Dense: {
        const int n = in.dim(0);
        CMatMap<T> X(in.ptr(), n, L.in);
        CMatMap<T> W(ps.value(pname(i, "W")).ptr(), L.out, L.in);
        const Tensor<T>& b = ps.value(pname(i, "b"));
        MatMap<T> Y(out.ptr(), n, L.out);
        Y.noalias() = X * W.transpose();
        for (int r = 0; r < n; ++r)
          for (int c = 0; c < L.out; ++c) Y(r, c) += b.data[c];
        break;
      }
      case LayerKind::Conv2d: {
        const int n = in.dim(0), sh = in.dim(2), sw = in.dim(3);
        const int oh = out.dim(2), ow = out.dim(3), k = L.kernel;
        const int64_t K = int64_t(L.in_ch) * k * k, P = int64_t(oh) * ow;
        std::vector<T> cols(K * n * P);
        im2col(in.ptr(), n, L.in_ch, sh, sw, k, L.stride, oh, ow, cols.data());
        std::vector<T> om(int64_t(L.out_ch) * n * P);
        CMatMap<T> W(ps.value(pname(i, "W")).ptr(), L.out_ch, K);
        CMatMap<T> C(cols.data(), K, n * P);
        MatMap<T> O(om.data(), L.out_ch, n * P);
        O.noalias() = W * C;
        mat_to_nchw(om.data(), n, L.out_ch, P, out.ptr(), false);
        const Tensor<T>& b = ps.value(pname(i, "b"));
        for (int nn = 0; nn < n; ++nn)
          for (int oc = 0; oc < L.out_ch; ++oc) {
            T* d = out.ptr() + (int64_t(nn) * L.out_ch + oc) * P;
            for (int64_t p = 0; p < P; ++p) d[p] += b.data[oc];
          }
        break;
      }
      case LayerKind::Deconv2d: {
        const int n = in.dim(0), ih = in.dim(2), iw = in.dim(3);
        const int oh = out.dim(2), ow = out.dim(3), k = L.kernel;
        const int64_t K = int64_t(L.out_ch) * k * k, Pin = int64_t(ih) * iw;
        std::vector<T> im(int64_t(L.in_ch) * n * Pin);
        nchw_to_mat(in.ptr(), n, L.in_ch, Pin, im.data());
        std::vector<T> cols(K * n * Pin);
        CMatMap<T> W(ps.value(pname(i, "W")).ptr(), L.in_ch, K);
        CMatMap<T> I(im.data(), L.in_ch, n * Pin);
        MatMap<T> C(cols.data(), K, n * Pin);
        C.noalias() = W.transpose() * I;
        out.fill(T(0));
        col2im_add(cols.data(), n, L.out_ch, oh, ow, k, L.stride, ih, iw, out.ptr());
        const Tensor<T>& b = ps.value(pname(i, "b"));
        const int64_t P = int64_t(oh) * ow;
        for (int nn = 0; nn < n; ++nn)
          for (int oc = 0; oc < L.out_ch; ++oc) {
            T* d = out.ptr() + (int64_t(nn) * L.out_ch + oc) * P;
            for (int64_t p = 0; p < P; ++p) d[p] += b.data[oc];
          }
        break;
      }
      case LayerKind::ReLU:
        for (int64_t j = 0; j < in.numel(); ++j) out.data[j] = in.data[j] > T(0) ? in.data[j] : T(0);
        break;
      case LayerKind::Tanh:
        for (int64_t j = 0; j < in.numel(); ++j) out.data[j] = std::tanh(in.data[j]);
        break;
      case LayerKind::LayerNorm: {
        const int n = in.dim(0), f = L.in;
        const Tensor<T>& g = ps.value(pname(i, "g"));
        const Tensor<T>& b = ps.value(pname(i, "b"));
        for (int r = 0; r < n; ++r) {
          const T* x = in.ptr() + int64_t(r) * f;
          T* y = out.ptr() + int64_t(r) * f;
          T mu = 0;
          for (int c = 0; c < f; ++c) mu += x[c];
          mu /= T(f);
          T var = 0;
          for (int c = 0; c < f; ++c) var += (x[c] - mu) * (x[c] - mu);
          var /= T(f);
          const T inv = T(1) / std::sqrt(var + ln_eps());
          for (int c = 0; c < f; ++c) y[c] = g.data[c] * (x[c] - mu) * inv + b.data[c];
        }
        break;
      }
      case LayerKind::Flatten:
      case LayerKind::Reshape:
        out.data = in.data;
        break;
    }
    return out;
  }

  Tensor<T> layer_backward(ParameterSet<T>& ps, size_t i, const Tape<T>& tape,
                           const Tensor<T>& dout, bool accumulate) const {
    using namespace detail;
    const LayerSpec& L = layers_[i];
    const Tensor<T>& in = tape.inputs[i];
    const Shape& in_shape = tape.in_shapes[i];
    Tensor<T> din(in_shape);
    switch (L.kind) {
      case LayerKind::Dense: {
        const int n = in.dim(0);
        CMatMap<T> X(in.ptr(), n, L.in);
        CMatMap<T> dY(dout.ptr(), n, L.out);
        CMatMap<T> W(ps.value(pname(i, "W")).ptr(), L.out, L.in);
        MatMap<T> dX(din.ptr(), n, L.in);
        dX.noalias() = dY * W;
        if (accumulate) {
          MatMap<T> dW(ps.grad(pname(i, "W")).ptr(), L.out, L.in);
          dW.noalias() += dY.transpose() * X;
          Tensor<T>& db = ps.grad(pname(i, "b"));
          for (int r = 0; r < n; ++r)
            for (int c = 0; c < L.out; ++c) db.data[c] += dY(r, c);
        }
        break;
      }
      case LayerKind::Conv2d: {
        const int n = in.dim(0), sh = in.dim(2), sw = in.dim(3);
        const int oh = dout.dim(2), ow = dout.dim(3), k = L.kernel;
        const int64_t K = int64_t(L.in_ch) * k * k, P = int64_t(oh) * ow;
        std::vector<T> dom(int64_t(L.out_ch) * n * P);
        nchw_to_mat(dout.ptr(), n, L.out_ch, P, dom.data());
        CMatMap<T> dO(dom.data(), L.out_ch, n * P);
        if (accumulate) {
          std::vector<T> cols(K * n * P);
          im2col(in.ptr(), n, L.in_ch, sh, sw, k, L.stride, oh, ow, cols.data());
          CMatMap<T> C(cols.data(), K, n * P);
          MatMap<T> dW(ps.grad(pname(i, "W")).ptr(), L.out_ch, K);
          dW.noalias() += dO * C.transpose();
          Tensor<T>& db = ps.grad(pname(i, "b"));
          for (int oc = 0; oc < L.out_ch; ++oc) db.data[oc] += dO.row(oc).sum();
        }
        std::vector<T> dcols(K * n * P);
        CMatMap<T> W(ps.value(pname(i, "W")).ptr(), L.out_ch, K);
        MatMap<T> dC(dcols.data(), K, n * P);
        dC.noalias() = W.transpose() * dO;
        din.fill(T(0));
        col2im_add(dcols.data(), n, L.in_ch, sh, sw, k, L.stride, oh, ow, din.ptr());
        break;
      }
      case LayerKind::Deconv2d: {
        const int n = in.dim(0), ih = in.dim(2), iw = in.dim(3);
        const int oh = dout.dim(2), ow = dout.dim(3), k = L.kernel;
        const int64_t K = int64_t(L.out_ch) * k * k, Pin = int64_t(ih) * iw;
        // gather windows of dout back onto the input grid
        std::vector<T> dcols(K * n * Pin);
        im2col(dout.ptr(), n, L.out_ch, oh, ow, k, L.stride, ih, iw, dcols.data());
        CMatMap<T> dC(dcols.data(), K, n * Pin);
        CMatMap<T> W(ps.value(pname(i, "W")).ptr(), L.in_ch, K);
        std::vector<T> dim(int64_t(L.in_ch) * n * Pin);
        MatMap<T> dI(dim.data(), L.in_ch, n * Pin);
        dI.noalias() = W * dC;
        mat_to_nchw(dim.data(), n, L.in_ch, Pin, din.ptr(), false);
        if (accumulate) {
          std::vector<T> im(int64_t(L.in_ch) * n * Pin);
          nchw_to_mat(in.ptr(), n, L.in_ch, Pin, im.data());
          CMatMap<T> I(im.data(), L.in_ch, n * Pin);
          MatMap<T> dW(ps.grad(pname(i, "W")).ptr(), L.in_ch, K);
          dW.noalias() += I * dC.transpose();
          Tensor<T>& db = ps.grad(pname(i, "b"));
          const int64_t P = int64_t(oh) * ow;
          for (int nn = 0; nn < n; ++nn)
            for (int oc = 0; oc < L.out_ch; ++oc) {
              const T* d = dout.ptr() + (int64_t(nn) * L.out_ch + oc) * P;
              T s = 0;
              for (int64_t p = 0; p < P; ++p) s += d[p];
              db.data[oc] += s;
            }
        }
        break;
      }
      case LayerKind::ReLU:
        for (int64_t j = 0; j < din.numel(); ++j)
          din.data[j] = in.data[j] > T(0) ? dout.data[j] : T(0);
        break;
      case LayerKind::Tanh:
        for (int64_t j = 0; j < din.numel(); ++j) {
          const T y = std::tanh(in.data[j]);
          din.data[j] = dout.data[j] * (T(1) - y * y);
        }
        break;
      case LayerKind::LayerNorm: {
        const int n = int(in_shape[0]), f = L.in;
        const Tensor<T>& g = ps.value(pname(i, "g"));
        for (int r = 0; r < n; ++r) {
          const T* x = in.ptr() + int64_t(r) * f;
          const T* dy = dout.ptr() + int64_t(r) * f;
          T* dx = din.ptr() + int64_t(r) * f;
          T mu = 0;
          for (int c = 0; c < f; ++c) mu += x[c];
          mu /= T(f);
          T var = 0;
          for (int c = 0; c < f; ++c) var += (x[c] - mu) * (x[c] - mu);
          var /= T(f);
          const T inv = T(1) / std::sqrt(var + ln_eps());
          T m1 = 0, m2 = 0;
          for (int c = 0; c < f; ++c) {
            const T xh = (x[c] - mu) * inv;
            const T gd = g.data[c] * dy[c];
            m1 += gd;
            m2 += gd * xh;
          }
          m1 /= T(f);
          m2 /= T(f);
          for (int c = 0; c < f; ++c) {
            const T xh = (x[c] - mu) * inv;
            dx[c] = (g.data[c] * dy[c] - m1 - xh * m2) * inv;
          }
          if (accumulate) {
            Tensor<T>& dg = ps.grad(pname(i, "g"));
            Tensor<T>& db = ps.grad(pname(i, "b"));
            for (int c = 0; c < f; ++c) {
              dg.data[c] += dy[c] * (x[c] - mu) * inv;
              db.data[c] += dy[c];
            }
          }
        }
        break;
      }
      case LayerKind::Flatten:
      case LayerKind::Reshape:
        din.data = dout.data;
        break;
    }
    return din;
  }

  static constexpr T ln_eps() { return T(1e-5); }

  std::string prefix_;
  std::vector<LayerSpec> layers_;
};

}  // namespace rcac

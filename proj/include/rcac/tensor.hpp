#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <vector>

#include "rcac/common.hpp"

namespace rcac {

using Shape = std::vector<int>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int d : s) {
    if (d <= 0) throw ConfigError("tensor dimensions must be positive");
    n *= d;
  }
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

// Dense row-major tensor. T is float for training, double for the
// finite-difference verification mode.
template <class T>
struct Tensor {
  Shape shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(Shape s) : shape(std::move(s)), data(shape_numel(shape), T(0)) {}
  Tensor(Shape s, T fill) : shape(std::move(s)), data(shape_numel(shape), fill) {}
  Tensor(Shape s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (static_cast<int64_t>(data.size()) != shape_numel(shape))
      throw ConfigError("tensor data length does not match shape " + shape_str(shape));
  }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int dim(size_t i) const { return shape.at(i); }

  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  template <class U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.assign(data.begin(), data.end());
    return out;
  }
};

template <class T>
inline bool all_finite(const Tensor<T>& t) {
  for (T v : t.data)
    if (!std::isfinite(v)) return false;
  return true;
}

template <class T>
inline void ensure_finite(const Tensor<T>& t, const char* context) {
  if (!all_finite(t))
    throw NumericError(std::string("non-finite value in ") + context);
}

// out = floor((in - k) / s) + 1, valid (no padding) convolution.
inline int conv_out_size(int in, int kernel, int stride) {
  if (in < kernel) throw ConfigError("conv input smaller than kernel");
  return (in - kernel) / stride + 1;
}

// Transposed convolution output size.
inline int deconv_out_size(int in, int kernel, int stride, int out_pad) {
  return (in - 1) * stride + kernel + out_pad;
}

}  // namespace rcac

#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "rcac/tensor.hpp"

namespace rcac {

// One named parameter: value, gradient and Adam moment buffers.
template <class T>
struct Param {
  Tensor<T> value;
  Tensor<T> grad;
  Tensor<T> m;
  Tensor<T> v;
  int64_t step = 0;
};

// Named collection of parameters with paired gradient buffers and optimizer
// state. Gradient zeroing is explicit and done by callers, which is what
// allows several losses to route gradients through the shared encoder.
template <class T>
class ParameterSet {
 public:
  Tensor<T>& create(const std::string& name, Shape shape) {
    if (entries_.count(name)) throw ConfigError("duplicate parameter name: " + name);
    Param<T>& p = entries_[name];
    p.value = Tensor<T>(shape);
    p.grad = Tensor<T>(shape);
    p.m = Tensor<T>(shape);
    p.v = Tensor<T>(shape);
    return p.value;
  }

  bool has(const std::string& name) const { return entries_.count(name) != 0; }

  Param<T>& at(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw InternalError("unknown parameter: " + name);
    return it->second;
  }
  const Param<T>& at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw InternalError("unknown parameter: " + name);
    return it->second;
  }

  Tensor<T>& value(const std::string& name) { return at(name).value; }
  const Tensor<T>& value(const std::string& name) const { return at(name).value; }
  Tensor<T>& grad(const std::string& name) { return at(name).grad; }

  // std::map keeps iteration order deterministic.
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  size_t size() const { return entries_.size(); }

  int64_t total_values() const {
    int64_t n = 0;
    for (const auto& [k, p] : entries_) n += p.value.numel();
    return n;
  }

  void zero_grads() {
    for (auto& [k, p] : entries_) p.grad.fill(T(0));
  }

  // Adds c * value to the gradient of every entry (L2 penalty path).
  void add_value_scaled_to_grad(T c) {
    for (auto& [k, p] : entries_)
      for (int64_t i = 0; i < p.value.numel(); ++i) p.grad.data[i] += c * p.value.data[i];
  }

  T sum_squared_values() const {
    T s = 0;
    for (const auto& [k, p] : entries_)
      for (T x : p.value.data) s += x * x;
    return s;
  }

  // Standard bias-corrected Adam. Gradients are left untouched.
  void adam_step(T lr, T beta1 = T(0.9), T beta2 = T(0.999), T eps = T(1e-8)) {
    for (auto& [name, p] : entries_) {
      p.step += 1;
      const T bc1 = T(1) - std::pow(beta1, T(p.step));
      const T bc2 = T(1) - std::pow(beta2, T(p.step));
      for (int64_t i = 0; i < p.value.numel(); ++i) {
        const T g = p.grad.data[i];
        p.m.data[i] = beta1 * p.m.data[i] + (T(1) - beta1) * g;
        p.v.data[i] = beta2 * p.v.data[i] + (T(1) - beta2) * g * g;
        const T mhat = p.m.data[i] / bc1;
        const T vhat = p.v.data[i] / bc2;
        p.value.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
      ensure_finite(p.value, name.c_str());
    }
  }

  template <class U>
  ParameterSet<U> cast() const {
    ParameterSet<U> out;
    for (const auto& [name, p] : entries_) {
      out.create(name, p.value.shape);
      auto& q = out.at(name);
      q.value = p.value.template cast<U>();
      q.grad = p.grad.template cast<U>();
      q.m = p.m.template cast<U>();
      q.v = p.v.template cast<U>();
      q.step = p.step;
    }
    return out;
  }

 private:
  std::map<std::string, Param<T>> entries_;
};

// target <- (1 - tau) * target + tau * online, elementwise over every entry.
template <class T>
inline void soft_update(ParameterSet<T>& target, const ParameterSet<T>& online, T tau) {
  if (tau < T(0) || tau > T(1)) throw ConfigError("soft_update: tau outside [0,1]");
  if (target.size() != online.size())
    throw ConfigError("soft_update: parameter sets differ in entry count");
  auto it = target.begin();
  auto jt = online.begin();
  for (; it != target.end(); ++it, ++jt) {
    if (it->first != jt->first || !it->second.value.same_shape(jt->second.value))
      throw ConfigError("soft_update: mismatched entry " + it->first);
    auto& t = it->second.value.data;
    const auto& o = jt->second.value.data;
    for (size_t i = 0; i < t.size(); ++i) t[i] = (T(1) - tau) * t[i] + tau * o[i];
  }
}

// Exact copy of values (used to initialize target networks).
template <class T>
inline void copy_values(ParameterSet<T>& target, const ParameterSet<T>& online) {
  soft_update(target, online, T(1));
}

}  // namespace rcac

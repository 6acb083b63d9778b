#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

namespace flowlab {

/// Scalar activation with derivative. Builtins are dispatched through an
/// enum so the quadrature inner loops avoid std::function overhead.
class Activation {
 public:
  enum class Kind { Tanh, Relu, Identity, Custom };

  Activation() : kind_(Kind::Identity) {}

  static Activation tanh_act() { return Activation(Kind::Tanh, "tanh"); }
  static Activation relu() { return Activation(Kind::Relu, "relu"); }
  static Activation identity() { return Activation(Kind::Identity, "identity"); }
  static Activation custom(std::string name,
                           std::function<double(double)> f,
                           std::function<double(double)> df) {
    Activation a(Kind::Custom, std::move(name));
    a.f_ = std::move(f);
    a.df_ = std::move(df);
    return a;
  }
  static Activation from_name(const std::string& name) {
    if (name == "tanh") return tanh_act();
    if (name == "relu") return relu();
    if (name == "identity" || name == "linear") return identity();
    throw std::invalid_argument("unknown activation: " + name);
  }

  double operator()(double x) const {
    switch (kind_) {
      case Kind::Tanh: return std::tanh(x);
      case Kind::Relu: return x > 0.0 ? x : 0.0;
      case Kind::Identity: return x;
      case Kind::Custom: return f_(x);
    }
    return x;
  }
  double prime(double x) const {
    switch (kind_) {
      case Kind::Tanh: {
        const double t = std::tanh(x);
        return 1.0 - t * t;
      }
      case Kind::Relu: return x > 0.0 ? 1.0 : 0.0;
      case Kind::Identity: return 1.0;
      case Kind::Custom: return df_(x);
    }
    return 1.0;
  }

  Kind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  bool is_odd() const { return kind_ == Kind::Tanh || kind_ == Kind::Identity; }
  /// ReLU has a kink at 0; the quadrature switches to a kink-aware path.
  bool has_kink() const { return kind_ == Kind::Relu; }

 private:
  Activation(Kind k, std::string name) : kind_(k), name_(std::move(name)) {}

  Kind kind_;
  std::string name_;
  std::function<double(double)> f_, df_;
};

}  // namespace flowlab

#pragma once
// Optimizers over a ParamStore<float>, keyed by parameter name.

#include <cstdint>
#include <map>
#include <string>

#include "hicmd/autograd.hpp"
#include "hicmd/io/binary.hpp"

namespace hicmd::optim {

double grad_norm(const ParamStore<float>& params);
// Scales every gradient so the global L2 norm is at most max_norm; 0 disables.
// Returns the norm before clipping.
double clip_grad_norm(ParamStore<float>& params, double max_norm);

class Adam {
 public:
  Adam() = default;
  Adam(double lr, double beta1, double beta2, double eps = 1e-8) : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParamStore<float>& params);
  std::int64_t steps() const { return t_; }

  void save(io::BinaryWriter& w) const;
  void load(io::BinaryReader& r, const ParamStore<float>& params);

  friend bool operator==(const Adam&, const Adam&) = default;

 private:
  double lr_ = 1e-4, beta1_ = 0.5, beta2_ = 0.999, eps_ = 1e-8;
  std::int64_t t_ = 0;
  std::map<std::string, Tensor<float>> m_, v_;
};

// v <- momentum * v + g; w <- w - lr * v
class Sgd {
 public:
  Sgd() = default;
  Sgd(double lr, double momentum) : lr_(lr), momentum_(momentum) {}

  void step(ParamStore<float>& params);

  void save(io::BinaryWriter& w) const;
  void load(io::BinaryReader& r, const ParamStore<float>& params);

  friend bool operator==(const Sgd&, const Sgd&) = default;

 private:
  double lr_ = 1e-3, momentum_ = 0.9;
  std::map<std::string, Tensor<float>> velocity_;
};

// Named tensors of a store; loading requires identical names and shapes.
void save_params(io::BinaryWriter& w, const ParamStore<float>& params);
void load_params(io::BinaryReader& r, ParamStore<float>& params);

}  // namespace hicmd::optim

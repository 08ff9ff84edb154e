#include "hicmd/optim.hpp"

#include <cmath>

namespace hicmd::optim {
namespace {

void save_tensor_map(io::BinaryWriter& w, const std::map<std::string, Tensor<float>>& m) {
  w.u64(m.size());
  for (const auto& [name, t] : m) {
    w.str(name);
    w.tensor(t);
  }
}

std::map<std::string, Tensor<float>> load_tensor_map(io::BinaryReader& r, const ParamStore<float>& params,
                                                     const char* what) {
  std::map<std::string, Tensor<float>> m;
  const auto n = r.u64();
  if (n > params.size()) throw Error(std::string(what) + ": more state entries than parameters");
  for (std::uint64_t i = 0; i < n; ++i) {
    std::string name = r.str();
    Tensor<float> t = r.tensor<float>();
    if (!params.contains(name)) throw Error(std::string(what) + ": state for unknown parameter " + name);
    if (t.shape() != params.at(name).value.shape()) throw Error(std::string(what) + ": shape mismatch for " + name);
    m.emplace(std::move(name), std::move(t));
  }
  return m;
}

}  // namespace

double grad_norm(const ParamStore<float>& params) {
  double s = 0;
  for (const auto& [_, p] : params) {
    for (float g : p.grad.values()) s += static_cast<double>(g) * g;
  }
  return std::sqrt(s);
}

double clip_grad_norm(ParamStore<float>& params, double max_norm) {
  const double norm = grad_norm(params);
  if (max_norm > 0 && norm > max_norm) {
    const float scale = static_cast<float>(max_norm / norm);
    for (auto& [_, p] : params) {
      for (float& g : p.grad.values()) g *= scale;
    }
  }
  return norm;
}

void Adam::step(ParamStore<float>& params) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const float b1 = static_cast<float>(beta1_), b2 = static_cast<float>(beta2_);
  const float step = static_cast<float>(lr_ / c1);
  const float inv_c2 = static_cast<float>(1.0 / c2);
  const float eps = static_cast<float>(eps_);
  for (auto& [name, p] : params) {
    auto& m = m_[name];
    auto& v = v_[name];
    if (m.size() != p.value.size()) {
      m = Tensor<float>(p.value.shape());
      v = Tensor<float>(p.value.shape());
    }
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const float g = p.grad[i];
      m[i] = b1 * m[i] + (1 - b1) * g;
      v[i] = b2 * v[i] + (1 - b2) * g * g;
      p.value[i] -= step * m[i] / (std::sqrt(v[i] * inv_c2) + eps);
    }
  }
}

void Adam::save(io::BinaryWriter& w) const {
  w.f64(lr_);
  w.f64(beta1_);
  w.f64(beta2_);
  w.f64(eps_);
  w.pod(t_);
  save_tensor_map(w, m_);
  save_tensor_map(w, v_);
}

void Adam::load(io::BinaryReader& r, const ParamStore<float>& params) {
  lr_ = r.f64();
  beta1_ = r.f64();
  beta2_ = r.f64();
  eps_ = r.f64();
  t_ = r.pod<std::int64_t>();
  m_ = load_tensor_map(r, params, "adam first moment");
  v_ = load_tensor_map(r, params, "adam second moment");
}

void Sgd::step(ParamStore<float>& params) {
  const float lr = static_cast<float>(lr_), mu = static_cast<float>(momentum_);
  for (auto& [name, p] : params) {
    auto& v = velocity_[name];
    if (v.size() != p.value.size()) v = Tensor<float>(p.value.shape());
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      v[i] = mu * v[i] + p.grad[i];
      p.value[i] -= lr * v[i];
    }
  }
}

void Sgd::save(io::BinaryWriter& w) const {
  w.f64(lr_);
  w.f64(momentum_);
  save_tensor_map(w, velocity_);
}

void Sgd::load(io::BinaryReader& r, const ParamStore<float>& params) {
  lr_ = r.f64();
  momentum_ = r.f64();
  velocity_ = load_tensor_map(r, params, "sgd velocity");
}

void save_params(io::BinaryWriter& w, const ParamStore<float>& params) {
  w.u64(params.size());
  for (const auto& [name, p] : params) {
    w.str(name);
    w.tensor(p.value);
  }
}

void load_params(io::BinaryReader& r, ParamStore<float>& params) {
  const auto n = r.u64();
  if (n != params.size()) {
    throw Error("checkpoint holds " + std::to_string(n) + " parameters, expected " + std::to_string(params.size()));
  }
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::string name = r.str();
    Tensor<float> t = r.tensor<float>();
    if (!params.contains(name)) throw Error("checkpoint parameter " + name + " is not part of this configuration");
    auto& p = params.at(name);
    if (t.shape() != p.value.shape()) {
      throw Error("checkpoint parameter " + name + " has shape " + shape_str(t.shape()) + ", expected " +
                  shape_str(p.value.shape()));
    }
    p.value = std::move(t);
    p.zero_grad();
  }
}

}  // namespace hicmd::optim

#include "nis/param_store.hpp"

#include <cmath>
#include <cstring>

#include "nis/errors.hpp"

namespace nis {

Tensor& ParamStore::create(const std::string& name, std::vector<std::int64_t> shape) {
  if (has(name)) throw ContractViolation("duplicate parameter id: " + name);
  Slot slot;
  slot.value = Tensor(shape);
  slot.m = Tensor(shape);
  slot.s = Tensor(std::move(shape));
  auto [it, ok] = params_.emplace(name, std::move(slot));
  (void)ok;
  return it->second.value;
}

Tensor& ParamStore::create_uniform(const std::string& name, std::vector<std::int64_t> shape,
                                   double scale, Rng& rng) {
  Tensor& t = create(name, std::move(shape));
  for (double& x : t.v) x = rng.uniform(-scale, scale);
  return t;
}

Tensor& ParamStore::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractViolation("unknown parameter id: " + name);
  return it->second.value;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractViolation("unknown parameter id: " + name);
  return it->second.value;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [k, _] : params_) out.push_back(k);
  return out;
}

void ParamStore::apply_gradients(const GradMap& grads, double lr) {
  if (!(lr > 0.0)) throw ContractViolation("learning rate must be positive");
  for (const auto& [name, g] : grads) {
    auto it = params_.find(name);
    if (it == params_.end()) throw ContractViolation("gradient for unknown parameter: " + name);
    if (!it->second.value.same_shape(g))
      throw ContractViolation("gradient shape mismatch for " + name + ": param " +
                              it->second.value.shape_str() + " vs grad " + g.shape_str());
  }
  ++step_;
  const double t = static_cast<double>(step_);
  for (const auto& [name, g] : grads) {
    Slot& slot = params_.at(name);
    double* w = slot.value.v.data();
    const double* gv = g.v.data();
    const std::size_t n = slot.value.v.size();
    if (optim == Optim::sgd) {
      for (std::size_t i = 0; i < n; ++i) w[i] -= lr * gv[i];
      continue;
    }
    double* m = slot.m.v.data();
    double* s = slot.s.v.data();
    const double bc1 = 1.0 - std::pow(beta1, t);
    const double bc2 = 1.0 - std::pow(beta2, t);
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * gv[i];
      s[i] = beta2 * s[i] + (1.0 - beta2) * gv[i] * gv[i];
      const double mhat = m[i] / bc1;
      const double shat = s[i] / bc2;
      w[i] -= lr * mhat / (std::sqrt(shat) + adam_eps);
    }
  }
}

std::uint64_t ParamStore::fingerprint() const {
  // FNV-1a over names and raw value bits; map iteration is name-ordered.
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](const void* p, std::size_t n) {
    const unsigned char* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ull;
    }
  };
  for (const auto& [name, slot] : params_) {
    mix(name.data(), name.size());
    mix(slot.value.v.data(), slot.value.v.size() * sizeof(double));
  }
  return h;
}

}  // namespace nis

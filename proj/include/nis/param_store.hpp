#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nis/rng.hpp"
#include "nis/tensor.hpp"

namespace nis {

using GradMap = std::map<std::string, Tensor>;

enum class Optim { adam, sgd };

// Named trainable parameters plus per-parameter optimizer state. A training
// step owns the store exclusively; read-only evaluation works on a snapshot
// (plain copy).
class ParamStore {
 public:
  ParamStore() = default;

  Optim optim = Optim::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  // Creates a zero-initialized parameter. Duplicate names are rejected.
  Tensor& create(const std::string& name, std::vector<std::int64_t> shape);
  // Creates a parameter initialized uniformly in [-scale, scale].
  Tensor& create_uniform(const std::string& name, std::vector<std::int64_t> shape, double scale,
                         Rng& rng);

  bool has(const std::string& name) const { return params_.count(name) != 0; }
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  std::vector<std::string> names() const;
  std::size_t size() const { return params_.size(); }

  // One optimizer step. grads keys must be a subset of parameter names and
  // shapes must match; parameters without an entry are left alone (their
  // Adam moments still decay only when they appear in grads, so an absent
  // entry means a genuinely untouched parameter).
  void apply_gradients(const GradMap& grads, double lr);

  std::int64_t step_count() const { return step_; }

  // Order-independent digest of all parameter values; used by the
  // update-separation and warm-up freeze checks.
  std::uint64_t fingerprint() const;

 private:
  struct Slot {
    Tensor value;
    Tensor m;  // Adam first moment
    Tensor s;  // Adam second moment
  };
  std::map<std::string, Slot> params_;
  std::int64_t step_ = 0;
};

}  // namespace nis

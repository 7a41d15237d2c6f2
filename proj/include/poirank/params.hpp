#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>

#include "poirank/tape.hpp"
#include "poirank/tensor.hpp"

namespace poirank {

// Glorot-uniform initialization, a pure function of (name, shape, seed).
// Vectors are treated as (n, 1) for the fan computation.
Tensor glorot_init(const std::string& name, const std::vector<size_t>& shape, uint64_t seed);

using GradMap = std::map<std::string, Tensor>;

// Named trainable tensors. Iteration order is sorted by name.
class ParamStore {
 public:
  Tensor& create(const std::string& name, const std::vector<size_t>& shape, uint64_t seed);
  Tensor& create_full(const std::string& name, const std::vector<size_t>& shape, double fill);
  Tensor& insert(const std::string& name, Tensor value);

  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool has(const std::string& name) const { return params_.count(name) > 0; }

  size_t count() const { return params_.size(); }
  size_t total_values() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::map<std::string, Tensor> params_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. One step() per gradient map; every parameter in
// the store must have a gradient entry of matching shape.
class Adam {
 public:
  explicit Adam(AdamConfig config) : config_(config) {}

  void step(ParamStore& params, const GradMap& grads);

  size_t step_count() const { return step_; }

 private:
  AdamConfig config_;
  size_t step_ = 0;
  std::map<std::string, Tensor> m_, v_;
};

// Builds the loss from a fresh tape plus one leaf Var per parameter.
using ModelFn = std::function<Var(Tape&, const std::map<std::string, Var>&)>;

// Central-difference check of reverse-mode gradients over every parameter
// coordinate. Returns the max relative error
// |g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|).
double grad_check(const ModelFn& fn, ParamStore& params, double eps = 1e-4);

// Convenience: runs fn once and returns gradients for all parameters
// (zeros for parameters the loss does not reach).
GradMap compute_gradients(const ModelFn& fn, const ParamStore& params, double* loss_out = nullptr);

}  // namespace poirank

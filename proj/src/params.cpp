#include "poirank/params.hpp"

#include <cmath>
#include <stdexcept>

#include "poirank/rng.hpp"

namespace poirank {

Tensor glorot_init(const std::string& name, const std::vector<size_t>& shape, uint64_t seed) {
  size_t fan_out = shape.empty() ? 1 : shape[0];
  size_t fan_in = shape.size() >= 2 ? shape[1] : 1;
  double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Rng rng(mix_seed(seed, fnv1a64(name)));
  Tensor t(shape);
  for (size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
  return t;
}

Tensor& ParamStore::create(const std::string& name, const std::vector<size_t>& shape,
                           uint64_t seed) {
  return insert(name, glorot_init(name, shape, seed));
}

Tensor& ParamStore::create_full(const std::string& name, const std::vector<size_t>& shape,
                                double fill) {
  Tensor t(shape);
  for (size_t i = 0; i < t.size(); ++i) t[i] = fill;
  return insert(name, std::move(t));
}

Tensor& ParamStore::insert(const std::string& name, Tensor value) {
  auto [it, inserted] = params_.emplace(name, std::move(value));
  if (!inserted) throw std::invalid_argument("ParamStore: duplicate parameter '" + name + "'");
  return it->second;
}

Tensor& ParamStore::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("ParamStore: no parameter '" + name + "'");
  return it->second;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("ParamStore: no parameter '" + name + "'");
  return it->second;
}

size_t ParamStore::total_values() const {
  size_t n = 0;
  for (const auto& [_, t] : params_) n += t.size();
  return n;
}

void Adam::step(ParamStore& params, const GradMap& grads) {
  ++step_;
  double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  for (auto& [name, p] : params) {
    auto git = grads.find(name);
    if (git == grads.end()) {
      throw std::runtime_error("Adam: missing gradient for parameter '" + name + "'");
    }
    const Tensor& g = git->second;
    if (!g.same_shape(p)) {
      throw std::runtime_error("Adam: gradient shape " + g.shape_str() + " != parameter shape " +
                               p.shape_str() + " for '" + name + "'");
    }
    Tensor& m = m_.try_emplace(name, Tensor(p.shape())).first->second;
    Tensor& v = v_.try_emplace(name, Tensor(p.shape())).first->second;
    for (size_t i = 0; i < p.size(); ++i) {
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
      double m_hat = m[i] / bc1;
      double v_hat = v[i] / bc2;
      p[i] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
    }
  }
}

GradMap compute_gradients(const ModelFn& fn, const ParamStore& params, double* loss_out) {
  Tape tape;
  std::map<std::string, Var> vars;
  for (const auto& [name, tensor] : params) vars.emplace(name, tape.leaf(tensor));
  Var loss = fn(tape, vars);
  if (loss_out) *loss_out = tape.value(loss)[0];
  tape.backward(loss);
  GradMap grads;
  for (const auto& [name, var] : vars) grads.emplace(name, tape.grad(var));
  return grads;
}

double grad_check(const ModelFn& fn, ParamStore& params, double eps) {
  double base_loss = 0.0;
  GradMap analytic = compute_gradients(fn, params, &base_loss);

  auto loss_at = [&]() {
    Tape tape;
    std::map<std::string, Var> vars;
    for (const auto& [name, tensor] : params) vars.emplace(name, tape.leaf(tensor));
    Var loss = fn(tape, vars);
    return tape.value(loss)[0];
  };

  double max_rel_err = 0.0;
  for (auto& [name, tensor] : params) {
    const Tensor& g_ad = analytic.at(name);
    for (size_t i = 0; i < tensor.size(); ++i) {
      double saved = tensor[i];
      tensor[i] = saved + eps;
      double hi = loss_at();
      tensor[i] = saved - eps;
      double lo = loss_at();
      tensor[i] = saved;
      double g_fd = (hi - lo) / (2.0 * eps);
      double rel = std::fabs(g_ad[i] - g_fd) / std::max(1e-8, std::fabs(g_ad[i]) + std::fabs(g_fd));
      max_rel_err = std::max(max_rel_err, rel);
    }
  }
  return max_rel_err;
}

}  // namespace poirank

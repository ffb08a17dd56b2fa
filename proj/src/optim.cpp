#include "dualtrain/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace dualtrain {

Vector OptimizerState::flattened() const {
  std::vector<double> out;
  out.insert(out.end(), mu.data().begin(), mu.data().end());
  out.insert(out.end(), nu.data().begin(), nu.data().end());
  return Vector::from_data(std::move(out));
}

OptimizerState make_optimizer_state(const OptimizerConfig& config, int dim) {
  OptimizerState state;
  state.config = config;
  state.t = 0;
  switch (config.kind) {
    case OptimizerKind::sgd:
      break;
    case OptimizerKind::momentum:
      state.mu = Vector(dim);
      break;
    case OptimizerKind::adam:
      state.mu = Vector(dim);
      state.nu = Vector(dim);
      break;
  }
  return state;
}

StepResult optimizer_step(const Vector& gradient,
                          const OptimizerState& state) {
  const OptimizerConfig& cfg = state.config;
  if (cfg.kind != OptimizerKind::sgd && gradient.dim() != state.mu.dim()) {
    throw std::invalid_argument("optimizer_step: gradient/state dim mismatch");
  }
  double lr = cfg.lr;
  if (cfg.warmup_steps > 0 && state.t < cfg.warmup_steps) {
    lr *= static_cast<double>(state.t + 1) /
          static_cast<double>(cfg.warmup_steps);
  }

  StepResult result;
  result.next_state = state;
  result.next_state.t = state.t + 1;
  result.update = Vector(gradient.dim());

  switch (cfg.kind) {
    case OptimizerKind::sgd: {
      for (int i = 0; i < gradient.dim(); ++i) {
        result.update[i] = -lr * gradient[i];
      }
      break;
    }
    case OptimizerKind::momentum: {
      for (int i = 0; i < gradient.dim(); ++i) {
        const double v = cfg.momentum * state.mu[i] + gradient[i];
        result.next_state.mu[i] = v;
        result.update[i] = -lr * v;
      }
      break;
    }
    case OptimizerKind::adam: {
      for (int i = 0; i < gradient.dim(); ++i) {
        const double g = gradient[i];
        const double mu = (1.0 - cfg.beta1) * g + cfg.beta1 * state.mu[i];
        const double nu = (1.0 - cfg.beta2) * g * g + cfg.beta2 * state.nu[i];
        result.next_state.mu[i] = mu;
        result.next_state.nu[i] = nu;
        result.update[i] = -lr * mu / (std::sqrt(nu) + cfg.eps);
      }
      break;
    }
  }
  return result;
}

void apply_update_with_decay(Vector& theta, const Vector& update,
                             double lambda) {
  if (theta.dim() != update.dim()) {
    throw std::invalid_argument("apply_update_with_decay: dim mismatch");
  }
  if (lambda == 0.0) {
    for (int i = 0; i < theta.dim(); ++i) theta[i] += update[i];
    return;
  }
  for (int i = 0; i < theta.dim(); ++i) {
    theta[i] = theta[i] + update[i] - lambda * theta[i];
  }
}

DecayMode decay_mode_from_string(const std::string& s) {
  if (s == "none") return DecayMode::none;
  if (s == "transformed_view") return DecayMode::transformed_view;
  if (s == "adapter_view") return DecayMode::adapter_view;
  if (s == "adapter_matched") return DecayMode::adapter_matched;
  if (s == "transformed_matched") return DecayMode::transformed_matched;
  throw std::invalid_argument("unknown decay mode: " + s);
}

std::string to_string(DecayMode mode) {
  switch (mode) {
    case DecayMode::none:
      return "none";
    case DecayMode::transformed_view:
      return "transformed_view";
    case DecayMode::adapter_view:
      return "adapter_view";
    case DecayMode::adapter_matched:
      return "adapter_matched";
    case DecayMode::transformed_matched:
      return "transformed_matched";
  }
  return "none";
}

OptimizerKind optimizer_kind_from_string(const std::string& s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "momentum") return OptimizerKind::momentum;
  if (s == "adam") return OptimizerKind::adam;
  throw std::invalid_argument("unknown optimizer: " + s);
}

std::string to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::sgd:
      return "sgd";
    case OptimizerKind::momentum:
      return "momentum";
    case OptimizerKind::adam:
      return "adam";
  }
  return "sgd";
}

}  // namespace dualtrain

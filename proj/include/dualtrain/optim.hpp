#ifndef DUALTRAIN_OPTIM_HPP
#define DUALTRAIN_OPTIM_HPP

#include <string>

#include "dualtrain/matrix.hpp"

namespace dualtrain {

enum class OptimizerKind { sgd, momentum, adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double momentum = 0.9;  // classical momentum coefficient
  int warmup_steps = 0;   // linear warmup to lr, then constant
};

// State is a pure value: (update, next_state) = step(gradient, state), no
// bias correction. A timestep counter rides along for the warmup schedule.
// The state is agnostic to which space it lives in; the same code drives
// full-dimension and transformed-dimension training.
struct OptimizerState {
  OptimizerConfig config;
  int t = 0;
  Vector mu;  // Adam first moment, or momentum velocity
  Vector nu;  // Adam second moment

  // Concatenated state entries, used for the equivalence diagnostics.
  Vector flattened() const;
};

OptimizerState make_optimizer_state(const OptimizerConfig& config, int dim);

struct StepResult {
  Vector update;
  OptimizerState next_state;
};

StepResult optimizer_step(const Vector& gradient, const OptimizerState& state);

// How weight decay is applied, per the two training views. The plain views
// decay whatever happens to be trainable in that view; the matched variants
// replicate the *other* view's behavior so the trajectories stay equivalent.
enum class DecayMode {
  none,
  transformed_view,     // decay the full parameter vector
  adapter_view,         // decay only the adapter
  adapter_matched,      // adapter trainer mimicking transformed_view
  transformed_matched,  // transformed trainer mimicking adapter_view
};

DecayMode decay_mode_from_string(const std::string& s);
std::string to_string(DecayMode mode);

// theta <- (1 - lambda) * theta + update, the post-update multiplicative
// decay form. With lambda = 0 this is a plain in-place add.
void apply_update_with_decay(Vector& theta, const Vector& update,
                             double lambda);

OptimizerKind optimizer_kind_from_string(const std::string& s);
std::string to_string(OptimizerKind kind);

}  // namespace dualtrain

#endif

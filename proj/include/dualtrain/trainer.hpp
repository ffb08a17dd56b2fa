#ifndef DUALTRAIN_TRAINER_HPP
#define DUALTRAIN_TRAINER_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dualtrain/model.hpp"
#include "dualtrain/optim.hpp"
#include "dualtrain/quant.hpp"
#include "dualtrain/reparam.hpp"
#include "dualtrain/transform.hpp"

namespace dualtrain {

enum class TrainerKind { full, transformed, adapter, relora };
enum class StatePolicy { reset, keep };
enum class Precision { f64, f32 };

TrainerKind trainer_kind_from_string(const std::string& s);
std::string to_string(TrainerKind kind);

// Supplies the per-layer transforms for a merge window. The default samples
// from (seed, window, layer) streams; the distributed simulator installs its
// own provider so workers share coordinated projectors.
using AssignmentProvider = std::function<TransformAssignment(
    std::uint64_t window, const std::vector<Matrix>* grads)>;

struct TrainConfig {
  TrainerKind trainer = TrainerKind::adapter;
  int steps = 200;
  int merge_every = 0;  // 0 = never merge / never swap the transform
  int microbatches = 1;
  OptimizerConfig optimizer;
  DecayMode decay = DecayMode::none;
  double decay_lambda = 0.0;
  TransformFamily family = TransformFamily::one_sided_gaussian;
  int rank = 4;
  StatePolicy merge_state_policy = StatePolicy::reset;
  Precision precision = Precision::f64;
  std::uint64_t seed = 0;
  int snapshot_every = 0;  // 0 = none; 1 = every step (used by the harness)
  std::uint64_t shard = 0;
  std::uint64_t batch_start = 0;
  QuantFormat base_quant = QuantFormat::none;
  int quant_group_size = 256;
  AssignmentProvider provider;  // optional override
};

// Raised when a step produces a non-finite loss.
struct TrainerAbort : std::runtime_error {
  TrainerAbort(int step_, const std::string& what)
      : std::runtime_error(what), step(step_) {}
  int step;
};

struct StepRecord {
  int step = 0;
  double loss = 0.0;
  double grad_norm = 0.0;  // norm of the gradient the optimizer consumed
};

struct Trajectory {
  std::vector<StepRecord> records;
  // Post-update effective parameters / optimizer state per recorded step;
  // index 0 is the initial point when snapshots are on.
  std::vector<Vector> theta_snapshots;
  std::vector<Vector> state_snapshots;
  std::vector<double> merge_drifts;  // per merge, quantized bases only
  Vector final_theta;                // effective parameters
  Vector final_state;                // flattened optimizer state
  std::uint64_t theta_hash = 0;
  std::uint64_t state_hash = 0;
  std::optional<AdapterSet> final_adapters;  // adapter trainer only
};

Trajectory train_full(const ModelSpec& spec, const ModelParams& init,
                      const SyntheticTask& task, const TrainConfig& config);

// Linearly transformed gradient dynamics: compress the accumulated gradient,
// step the optimizer in the compressed space, expand through the transpose.
Trajectory train_transformed(const ModelSpec& spec, const ModelParams& init,
                             const SyntheticTask& task,
                             const TrainConfig& config);

// The dual adapter view: base frozen, optimizer walks the adapter space,
// gradients are accumulated after compression. `lambda0` optionally starts
// the adapter away from zero.
Trajectory train_adapter(const ModelSpec& spec, const ModelParams& init,
                         const SyntheticTask& task, const TrainConfig& config,
                         const Vector* lambda0 = nullptr);

// Two-trainable-sided baseline: W0 + B A with B zero-initialized and A
// Gaussian, both trained, merged and reinitialized on the merge schedule.
Trajectory train_relora(const ModelSpec& spec, const ModelParams& init,
                        const SyntheticTask& task, const TrainConfig& config);

// Decay pairings for dual runs: both matched combinations keep the theorem
// intact, `mismatched` deliberately runs the two naturally-arising decay
// placements against each other.
enum class DecayPairing { none, matched_transformed, matched_adapter,
                          mismatched };

DecayPairing decay_pairing_from_string(const std::string& s);
std::string to_string(DecayPairing pairing);

struct DualityReport {
  // max over steps of |theta_T - theta_A|_inf / (1 + |theta_T|_inf)
  double max_param_dev = 0.0;
  double max_state_dev = 0.0;
  double step1_abs_dev = 0.0;  // raw sup-norm gap right after step 1
  std::vector<double> per_step_param_dev;
  std::vector<double> per_step_state_dev;
  Trajectory transformed;
  Trajectory adapter;
};

// Runs both views on identical data, seeds and initial optimizer state and
// reports the trajectory/state deviations.
DualityReport equivalence_harness(const ModelSpec& spec,
                                  const ModelParams& init,
                                  const SyntheticTask& task,
                                  const TrainConfig& config,
                                  DecayPairing pairing = DecayPairing::none,
                                  bool nonzero_adapter_init = false);

}  // namespace dualtrain

#endif

#ifndef DUALTRAIN_DISTSIM_HPP
#define DUALTRAIN_DISTSIM_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "dualtrain/model.hpp"
#include "dualtrain/optim.hpp"
#include "dualtrain/trainer.hpp"
#include "dualtrain/transform.hpp"

namespace dualtrain {

// How the per-worker frozen projections are (re)initialized each round:
//   identical:   every worker gets the same semi-orthogonal sample
//   independent: iid semi-orthogonal samples
//   distributed: disjoint row blocks of one orthogonal matrix, so
//                P_i P_j^T = 0 for i != j and the trained subspaces are
//                pairwise orthogonal
enum class InitScheme { identical, independent, distributed };

InitScheme init_scheme_from_string(const std::string& s);
std::string to_string(InitScheme scheme);

// P_k (d x m) for k = 0..K-1, drawn from `rng` per the scheme. The
// distributed scheme needs K*d <= m.
std::vector<Matrix> init_projectors(InitScheme scheme, Rng& rng, int workers,
                                    int d, int m);

// Outer SGD with Nesterov momentum over pseudo-gradients:
//   buffer <- mu * buffer + pg
//   params <- params + eta * (pg + mu * buffer)
struct OuterOptimizer {
  double lr = 0.7;
  double momentum = 0.9;
  Vector buffer;
};

void outer_step(Vector& global_params, const Vector& pseudo_gradient,
                OuterOptimizer& outer);

struct WorkerState {
  int id = 0;
  int round = 0;
  int local_step = 0;
  AdapterSet adapters;
  OptimizerState inner_state;
  double last_loss = 0.0;
};

struct DistConfig {
  int workers = 4;
  int rounds = 20;
  int local_steps = 500;
  int rank = 4;
  InitScheme scheme = InitScheme::distributed;
  OptimizerConfig inner_optimizer;
  double outer_lr = 0.7;
  double outer_momentum = 0.9;
  std::uint64_t seed = 0;
  int eval_batch_size = 256;
};

// One worker's local phase: L adapter steps on its own shard; the base stays
// frozen, only A moves.
void local_round(const ModelSpec& spec, const SyntheticTask& task,
                 const DistConfig& config, WorkerState& worker, int steps);

// Mean over workers of the per-worker parameter deltas P_k^T A_k, flattened
// over the whole parameter space (bias adapters ride along identically).
// All workers must sit at the same (round, local step).
Vector pseudo_gradient(const ModelSpec& spec,
                       const std::vector<WorkerState>& workers);

struct RoundMetrics {
  int round = 0;
  std::vector<double> worker_final_loss;
  double global_loss = 0.0;
  double pg_norm = 0.0;
  int stacked_rank_layer0 = 0;  // rank of the stacked projectors, layer 0
};

struct DistResult {
  Vector final_params;
  std::vector<RoundMetrics> rounds;
  double final_loss = 0.0;
};

// Per-round transform assignments for worker k: fresh projectors per round,
// coordinated across workers per the scheme, side rule per layer.
TransformAssignment worker_assignment(const ModelSpec& spec,
                                      const DistConfig& config, int round,
                                      int worker);

DistResult run_distributed(const ModelSpec& spec, const SyntheticTask& task,
                           const DistConfig& config);

}  // namespace dualtrain

#endif

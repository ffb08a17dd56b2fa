#include "dualtrain/distsim.hpp"

#include <cmath>
#include <stdexcept>

#include "dualtrain/reparam.hpp"
#include "dualtrain/svd.hpp"

namespace dualtrain {

InitScheme init_scheme_from_string(const std::string& s) {
  if (s == "identical") return InitScheme::identical;
  if (s == "independent") return InitScheme::independent;
  if (s == "distributed") return InitScheme::distributed;
  throw std::invalid_argument("unknown init scheme: " + s);
}

std::string to_string(InitScheme scheme) {
  switch (scheme) {
    case InitScheme::identical:
      return "identical";
    case InitScheme::independent:
      return "independent";
    case InitScheme::distributed:
      return "distributed";
  }
  return "identical";
}

std::vector<Matrix> init_projectors(InitScheme scheme, Rng& rng, int workers,
                                    int d, int m) {
  if (workers < 1 || d < 1 || d > m) {
    throw std::invalid_argument("init_projectors: bad worker count or rank");
  }
  std::vector<Matrix> out;
  switch (scheme) {
    case InitScheme::identical: {
      const Matrix q = random_orthogonal(rng, m);
      Matrix p(d, m);
      for (int i = 0; i < d; ++i) {
        for (int j = 0; j < m; ++j) p(i, j) = q(i, j);
      }
      out.assign(static_cast<std::size_t>(workers), p);
      break;
    }
    case InitScheme::independent: {
      for (int k = 0; k < workers; ++k) {
        const Matrix q = random_orthogonal(rng, m);
        Matrix p(d, m);
        for (int i = 0; i < d; ++i) {
          for (int j = 0; j < m; ++j) p(i, j) = q(i, j);
        }
        out.push_back(std::move(p));
      }
      break;
    }
    case InitScheme::distributed: {
      if (workers * d > m) {
        throw std::invalid_argument(
            "init_projectors: distributed scheme needs workers * d <= m");
      }
      // Consecutive d-row blocks of one orthogonal matrix: pairwise
      // orthogonal ranges by construction.
      const Matrix q = random_orthogonal(rng, m);
      for (int k = 0; k < workers; ++k) {
        Matrix p(d, m);
        for (int i = 0; i < d; ++i) {
          for (int j = 0; j < m; ++j) p(i, j) = q(k * d + i, j);
        }
        out.push_back(std::move(p));
      }
      break;
    }
  }
  return out;
}

TransformAssignment worker_assignment(const ModelSpec& spec,
                                      const DistConfig& config, int round,
                                      int worker) {
  if (worker < 0 || worker >= config.workers) {
    throw std::invalid_argument("worker_assignment: worker id out of range");
  }
  TransformAssignment assignment;
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    const int m = spec.layers[l].out_dim;
    const int n = spec.layers[l].in_dim;
    const bool left_side = m <= n;
    const int sketch_m = left_side ? m : n;
    const int d = std::min(config.rank, sketch_m);
    Rng rng(config.seed, streams::dist_projector(std::uint64_t(round), l));
    std::vector<Matrix> ps =
        init_projectors(config.scheme, rng, config.workers, d, sketch_m);

    GradientTransform t;
    t.provenance = Provenance::semi_orthogonal;
    t.seed = config.seed;
    t.stream = streams::dist_projector(std::uint64_t(round), l);
    t.persisted = true;
    t.layer_rows = m;
    t.layer_cols = n;
    if (left_side) {
      t.kind = TransformKind::left_only;
      t.left = std::move(ps[std::size_t(worker)]);
    } else {
      t.kind = TransformKind::right_only;
      t.right = transpose(ps[std::size_t(worker)]);
    }
    assignment.per_layer.push_back(std::move(t));
  }
  return assignment;
}

void local_round(const ModelSpec& spec, const SyntheticTask& task,
                 const DistConfig& config, WorkerState& worker, int steps) {
  Vector lambda = worker.adapters.flatten_adapters();
  for (int s = 0; s < steps; ++s) {
    const std::uint64_t index =
        std::uint64_t(worker.round) * std::uint64_t(config.local_steps) +
        std::uint64_t(worker.local_step);
    const Batch batch = task.batch(index, std::uint64_t(worker.id));
    double loss = 0.0;
    const Vector grad = adapter_gradient(spec, worker.adapters, batch, &loss);
    if (!std::isfinite(loss)) {
      throw TrainerAbort(worker.local_step,
                         "non-finite worker loss in local round");
    }
    StepResult step = optimizer_step(grad, worker.inner_state);
    worker.inner_state = std::move(step.next_state);
    add_scaled(lambda, 1.0, step.update);
    worker.adapters.set_adapters(lambda);
    worker.last_loss = loss;
    worker.local_step += 1;
  }
}

Vector pseudo_gradient(const ModelSpec& spec,
                       const std::vector<WorkerState>& workers) {
  if (workers.empty()) {
    throw std::invalid_argument("pseudo_gradient: no workers");
  }
  for (const auto& w : workers) {
    if (w.round != workers.front().round ||
        w.local_step != workers.front().local_step) {
      throw std::runtime_error("pseudo_gradient: workers desynchronized");
    }
  }
  const ParamLayout layout = make_layout(spec);
  Vector sum(layout.total);
  for (const auto& w : workers) {  // fixed worker-id order
    for (std::size_t l = 0; l < layout.layers.size(); ++l) {
      const Matrix delta = apply_transpose(w.adapters.transforms.per_layer[l],
                                           w.adapters.adapters[l]);
      const auto& entry = layout.layers[l];
      for (int i = 0; i < entry.rows * entry.cols; ++i) {
        sum[entry.weight_offset + i] += delta.data()[std::size_t(i)];
      }
      if (entry.bias_offset >= 0) {
        for (int i = 0; i < entry.bias_dim; ++i) {
          sum[entry.bias_offset + i] += w.adapters.bias_adapters[l][i];
        }
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(workers.size());
  for (int i = 0; i < sum.dim(); ++i) sum[i] *= inv;
  return sum;
}

void outer_step(Vector& global_params, const Vector& pseudo_gradient,
                OuterOptimizer& outer) {
  if (outer.buffer.dim() == 0) outer.buffer = Vector(global_params.dim());
  if (global_params.dim() != pseudo_gradient.dim() ||
      global_params.dim() != outer.buffer.dim()) {
    throw std::invalid_argument("outer_step: shape mismatch");
  }
  for (int i = 0; i < global_params.dim(); ++i) {
    outer.buffer[i] = outer.momentum * outer.buffer[i] + pseudo_gradient[i];
    global_params[i] +=
        outer.lr * (pseudo_gradient[i] + outer.momentum * outer.buffer[i]);
  }
}

namespace {

int stacked_projector_rank(const std::vector<WorkerState>& workers) {
  const auto& first = workers.front().adapters.transforms.per_layer[0];
  const bool left_side = first.kind == TransformKind::left_only;
  const Matrix& p0 = left_side ? first.left : first.right;
  const int d = left_side ? p0.rows() : p0.cols();
  const int m = left_side ? p0.cols() : p0.rows();
  Matrix stacked(d * static_cast<int>(workers.size()), m);
  for (std::size_t k = 0; k < workers.size(); ++k) {
    const auto& t = workers[k].adapters.transforms.per_layer[0];
    const Matrix p = left_side ? t.left : transpose(t.right);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < m; ++j) {
        stacked(static_cast<int>(k) * d + i, j) = p(i, j);
      }
    }
  }
  const Svd f = svd(stacked);
  if (f.sigma.empty() || f.sigma.front() <= 0.0) return 0;
  int rank = 0;
  for (double s : f.sigma) {
    if (s > 1e-8 * f.sigma.front()) ++rank;
  }
  return rank;
}

}  // namespace

DistResult run_distributed(const ModelSpec& spec, const SyntheticTask& task,
                           const DistConfig& config) {
  if (config.workers < 1 || config.rounds < 0 || config.local_steps < 0) {
    throw std::invalid_argument("run_distributed: bad config");
  }
  Rng init_rng(config.seed, streams::kModelInit);
  Vector theta = flatten(init_params(spec, init_rng));
  OuterOptimizer outer{config.outer_lr, config.outer_momentum,
                       Vector(theta.dim())};
  const Batch eval = task.eval_batch(config.eval_batch_size);

  DistResult result;
  for (int g = 0; g < config.rounds; ++g) {
    const ModelParams snapshot = unflatten(spec, theta);
    std::vector<WorkerState> workers;
    for (int k = 0; k < config.workers; ++k) {
      WorkerState w;
      w.id = k;
      w.round = g;
      w.local_step = 0;
      w.adapters = AdapterSet::create(spec, snapshot,
                                      worker_assignment(spec, config, g, k));
      w.inner_state = make_optimizer_state(config.inner_optimizer,
                                           w.adapters.trainable_count());
      workers.push_back(std::move(w));
    }
    for (auto& w : workers) {
      local_round(spec, task, config, w, config.local_steps);
    }
    const Vector pg = pseudo_gradient(spec, workers);
    outer_step(theta, pg, outer);

    RoundMetrics metrics;
    metrics.round = g;
    for (const auto& w : workers) {
      metrics.worker_final_loss.push_back(w.last_loss);
    }
    metrics.pg_norm = l2_norm(pg);
    metrics.global_loss = forward(spec, unflatten(spec, theta), eval);
    metrics.stacked_rank_layer0 = stacked_projector_rank(workers);
    result.rounds.push_back(std::move(metrics));
  }
  result.final_loss =
      result.rounds.empty() ? forward(spec, unflatten(spec, theta), eval)
                            : result.rounds.back().global_loss;
  result.final_params = std::move(theta);
  return result;
}

}  // namespace dualtrain

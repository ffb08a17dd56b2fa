#include "dualtrain/trainer.hpp"

#include <cmath>
#include <stdexcept>

namespace dualtrain {

TrainerKind trainer_kind_from_string(const std::string& s) {
  if (s == "full") return TrainerKind::full;
  if (s == "transformed") return TrainerKind::transformed;
  if (s == "adapter") return TrainerKind::adapter;
  if (s == "relora") return TrainerKind::relora;
  throw std::invalid_argument("unknown trainer: " + s);
}

std::string to_string(TrainerKind kind) {
  switch (kind) {
    case TrainerKind::full:
      return "full";
    case TrainerKind::transformed:
      return "transformed";
    case TrainerKind::adapter:
      return "adapter";
    case TrainerKind::relora:
      return "relora";
  }
  return "full";
}

DecayPairing decay_pairing_from_string(const std::string& s) {
  if (s == "none") return DecayPairing::none;
  if (s == "matched_transformed") return DecayPairing::matched_transformed;
  if (s == "matched_adapter") return DecayPairing::matched_adapter;
  if (s == "mismatched") return DecayPairing::mismatched;
  throw std::invalid_argument("unknown decay pairing: " + s);
}

std::string to_string(DecayPairing pairing) {
  switch (pairing) {
    case DecayPairing::none:
      return "none";
    case DecayPairing::matched_transformed:
      return "matched_transformed";
    case DecayPairing::matched_adapter:
      return "matched_adapter";
    case DecayPairing::mismatched:
      return "mismatched";
  }
  return "none";
}

namespace {

void validate(const TrainConfig& config) {
  if (config.steps < 0) throw std::invalid_argument("steps must be >= 0");
  if (config.merge_every < 0) {
    throw std::invalid_argument("merge_every must be >= 0");
  }
  if (config.microbatches < 1) {
    throw std::invalid_argument("microbatches must be >= 1");
  }
  if (config.decay_lambda < 0.0) {
    throw std::invalid_argument("decay lambda must be >= 0");
  }
}

void round_to_f32(Vector& v) {
  for (int i = 0; i < v.dim(); ++i) {
    v[i] = static_cast<double>(static_cast<float>(v[i]));
  }
}

void check_loss(double loss, int step) {
  if (!std::isfinite(loss)) {
    throw TrainerAbort(step, "non-finite loss at step " +
                                 std::to_string(step) +
                                 "; aborting before the parameters degrade");
  }
}

// Mean of the per-microbatch gradients at fixed left-to-right order, plus the
// mean loss. `gradient_fn` computes one microbatch gradient.
template <typename GradFn>
Vector accumulate_mean(const TrainConfig& config, std::uint64_t step,
                       const SyntheticTask& task, GradFn&& gradient_fn,
                       double* mean_loss) {
  Vector sum;
  double loss_sum = 0.0;
  for (int j = 0; j < config.microbatches; ++j) {
    const std::uint64_t index =
        config.batch_start +
        step * static_cast<std::uint64_t>(config.microbatches) +
        static_cast<std::uint64_t>(j);
    const Batch batch = task.batch(index, config.shard);
    double loss = 0.0;
    Vector g = gradient_fn(batch, &loss);
    loss_sum += loss;
    if (j == 0) {
      sum = std::move(g);
    } else {
      add_scaled(sum, 1.0, g);
    }
  }
  if (config.microbatches > 1) {
    const double inv = 1.0 / static_cast<double>(config.microbatches);
    for (int i = 0; i < sum.dim(); ++i) sum[i] *= inv;
    loss_sum *= inv;
  }
  *mean_loss = loss_sum;
  return sum;
}

TransformAssignment build_assignment(const TrainConfig& config,
                                     const ModelSpec& spec,
                                     std::uint64_t window,
                                     const std::vector<Matrix>* grads) {
  if (config.provider) return config.provider(window, grads);
  return make_assignment(config.family, config.rank, spec, config.seed,
                         window, grads);
}

// Per-layer gradient matrices of the full model at `theta`, evaluated on the
// next scheduled batch; feeds the SVD-provenance refresh.
std::vector<Matrix> peek_layer_grads(const ModelSpec& spec,
                                     const ModelParams& params,
                                     const SyntheticTask& task,
                                     const TrainConfig& config,
                                     std::uint64_t step) {
  const std::uint64_t index =
      config.batch_start +
      step * static_cast<std::uint64_t>(config.microbatches);
  const Batch batch = task.batch(index, config.shard);
  const Vector g = model_gradient(spec, params, batch);
  const ParamLayout layout = make_layout(spec);
  std::vector<Matrix> grads;
  for (const auto& entry : layout.layers) {
    std::vector<double> data(
        g.data().begin() + entry.weight_offset,
        g.data().begin() + entry.weight_offset + entry.rows * entry.cols);
    grads.push_back(
        Matrix::from_column_major(entry.rows, entry.cols, std::move(data)));
  }
  return grads;
}

std::vector<Matrix> maybe_peek(const ModelSpec& spec, const ModelParams& at,
                               const SyntheticTask& task,
                               const TrainConfig& config, std::uint64_t step) {
  if (family_needs_gradient(config.family) || config.provider) {
    return peek_layer_grads(spec, at, task, config, step);
  }
  return {};
}

// Compress per-layer blocks of a full-space gradient into the adapter-space
// layout (vec of transformed weight gradient, then bias block, per layer).
Vector compress_full(const ParamLayout& layout,
                     const TransformAssignment& assignment,
                     const Vector& full) {
  std::vector<double> out;
  for (std::size_t l = 0; l < layout.layers.size(); ++l) {
    const auto& entry = layout.layers[l];
    std::vector<double> gw(
        full.data().begin() + entry.weight_offset,
        full.data().begin() + entry.weight_offset + entry.rows * entry.cols);
    const Matrix grad_w =
        Matrix::from_column_major(entry.rows, entry.cols, std::move(gw));
    const Matrix compressed = apply(assignment.per_layer[l], grad_w);
    out.insert(out.end(), compressed.data().begin(), compressed.data().end());
    if (entry.bias_offset >= 0) {
      out.insert(out.end(), full.data().begin() + entry.bias_offset,
                 full.data().begin() + entry.bias_offset + entry.bias_dim);
    }
  }
  return Vector::from_data(std::move(out));
}

// Expand an adapter-space vector back to the full space through S^T.
Vector expand_compressed(const ParamLayout& layout,
                         const TransformAssignment& assignment,
                         const Vector& compressed) {
  Vector full(layout.total);
  int at = 0;
  for (std::size_t l = 0; l < layout.layers.size(); ++l) {
    const auto& t = assignment.per_layer[l];
    const int cr = t.compressed_rows();
    const int cc = t.compressed_cols();
    std::vector<double> block(compressed.data().begin() + at,
                              compressed.data().begin() + at + cr * cc);
    at += cr * cc;
    const Matrix expanded =
        apply_transpose(t, Matrix::from_column_major(cr, cc, std::move(block)));
    const auto& entry = layout.layers[l];
    for (int i = 0; i < entry.rows * entry.cols; ++i) {
      full[entry.weight_offset + i] = expanded.data()[std::size_t(i)];
    }
    if (entry.bias_offset >= 0) {
      for (int i = 0; i < entry.bias_dim; ++i) {
        full[entry.bias_offset + i] = compressed[at + i];
      }
      at += entry.bias_dim;
    }
  }
  return full;
}

void record_step(Trajectory& traj, const TrainConfig& config, int step,
                 double loss, double grad_norm, const Vector& theta,
                 const Vector& state) {
  traj.records.push_back({step, loss, grad_norm});
  if (config.snapshot_every > 0 && (step + 1) % config.snapshot_every == 0) {
    traj.theta_snapshots.push_back(theta);
    traj.state_snapshots.push_back(state);
  }
}

void finalize(Trajectory& traj, Vector theta, Vector state) {
  traj.theta_hash = fnv1a_bytes(theta.data());
  traj.state_hash = fnv1a_bytes(state.data());
  traj.final_theta = std::move(theta);
  traj.final_state = std::move(state);
}

}  // namespace

Trajectory train_full(const ModelSpec& spec, const ModelParams& init,
                      const SyntheticTask& task, const TrainConfig& config) {
  validate(config);
  Vector theta = flatten(init);
  OptimizerState state = make_optimizer_state(config.optimizer, theta.dim());
  const double lambda =
      config.decay == DecayMode::transformed_view ? config.decay_lambda : 0.0;
  if (config.decay != DecayMode::none &&
      config.decay != DecayMode::transformed_view) {
    throw std::invalid_argument("train_full: unsupported decay mode");
  }

  Trajectory traj;
  if (config.snapshot_every > 0) {
    traj.theta_snapshots.push_back(theta);
    traj.state_snapshots.push_back(state.flattened());
  }
  for (int t = 0; t < config.steps; ++t) {
    double loss = 0.0;
    const Vector grad = accumulate_mean(
        config, std::uint64_t(t), task,
        [&](const Batch& batch, double* loss_out) {
          return model_gradient(spec, unflatten(spec, theta), batch, loss_out);
        },
        &loss);
    check_loss(loss, t);
    StepResult step = optimizer_step(grad, state);
    state = std::move(step.next_state);
    apply_update_with_decay(theta, step.update, lambda);
    if (config.precision == Precision::f32) round_to_f32(theta);
    record_step(traj, config, t, loss, l2_norm(grad), theta,
                state.flattened());
  }
  finalize(traj, std::move(theta), state.flattened());
  return traj;
}

Trajectory train_transformed(const ModelSpec& spec, const ModelParams& init,
                             const SyntheticTask& task,
                             const TrainConfig& config) {
  validate(config);
  if (config.decay == DecayMode::adapter_view ||
      config.decay == DecayMode::adapter_matched) {
    throw std::invalid_argument(
        "train_transformed: adapter-side decay mode on the transformed loop");
  }
  const ParamLayout layout = make_layout(spec);
  Vector theta = flatten(init);

  std::vector<Matrix> grads =
      maybe_peek(spec, init, task, config, /*step=*/0);
  TransformAssignment assignment = build_assignment(
      config, spec, /*window=*/0, grads.empty() ? nullptr : &grads);
  const int r = assignment.compressed_dim(spec);
  OptimizerState state = make_optimizer_state(config.optimizer, r);

  // Window base and compressed offset, kept only for transformed_matched,
  // which replicates the adapter view's decay from this side.
  const bool matched = config.decay == DecayMode::transformed_matched;
  Vector window_base = theta;
  Vector lambda_eff(matched ? r : 0);
  const double lambda = config.decay_lambda;

  Trajectory traj;
  if (config.snapshot_every > 0) {
    traj.theta_snapshots.push_back(theta);
    traj.state_snapshots.push_back(state.flattened());
  }
  for (int t = 0; t < config.steps; ++t) {
    if (config.merge_every > 0 && t > 0 && t % config.merge_every == 0) {
      const std::uint64_t window =
          std::uint64_t(t) / std::uint64_t(config.merge_every);
      std::vector<Matrix> refreshed = maybe_peek(
          spec, unflatten(spec, theta), task, config, std::uint64_t(t));
      assignment = build_assignment(config, spec, window,
                                    refreshed.empty() ? nullptr : &refreshed);
      if (assignment.compressed_dim(spec) != r) {
        throw std::runtime_error(
            "train_transformed: transform swap changed the compressed dim");
      }
      if (config.merge_state_policy == StatePolicy::reset) {
        state = make_optimizer_state(config.optimizer, r);
      }
      if (matched) {
        window_base = theta;
        lambda_eff = Vector(r);
      }
    }

    double loss = 0.0;
    const Vector full_grad = accumulate_mean(
        config, std::uint64_t(t), task,
        [&](const Batch& batch, double* loss_out) {
          return model_gradient(spec, unflatten(spec, theta), batch, loss_out);
        },
        &loss);
    check_loss(loss, t);
    const Vector compressed = compress_full(layout, assignment, full_grad);
    StepResult step = optimizer_step(compressed, state);
    state = std::move(step.next_state);

    switch (config.decay) {
      case DecayMode::none:
      case DecayMode::transformed_view: {
        const Vector update =
            expand_compressed(layout, assignment, step.update);
        apply_update_with_decay(
            theta, update,
            config.decay == DecayMode::transformed_view ? lambda : 0.0);
        break;
      }
      case DecayMode::transformed_matched: {
        // lambda_eff <- (1 - lambda) lambda_eff + delta, theta follows the
        // window base plus the expanded offset.
        for (int i = 0; i < r; ++i) {
          lambda_eff[i] =
              lambda_eff[i] + step.update[i] - lambda * lambda_eff[i];
        }
        const Vector offset =
            expand_compressed(layout, assignment, lambda_eff);
        theta = window_base + offset;
        break;
      }
      default:
        throw std::logic_error("unreachable decay mode");
    }
    if (config.precision == Precision::f32) round_to_f32(theta);
    record_step(traj, config, t, loss, l2_norm(compressed), theta,
                state.flattened());
  }
  finalize(traj, std::move(theta), state.flattened());
  return traj;
}

Trajectory train_adapter(const ModelSpec& spec, const ModelParams& init,
                         const SyntheticTask& task, const TrainConfig& config,
                         const Vector* lambda0) {
  validate(config);
  if (config.decay == DecayMode::transformed_view ||
      config.decay == DecayMode::transformed_matched) {
    throw std::invalid_argument(
        "train_adapter: transformed-side decay mode on the adapter loop");
  }
  if (config.decay == DecayMode::adapter_matched &&
      config.base_quant != QuantFormat::none) {
    throw std::invalid_argument(
        "train_adapter: adapter_matched decay needs a full-precision base");
  }
  const bool decay_base = config.decay == DecayMode::adapter_matched;
  const double lambda = config.decay_lambda;

  std::vector<Matrix> grads = maybe_peek(spec, init, task, config, 0);
  TransformAssignment assignment = build_assignment(
      config, spec, 0, grads.empty() ? nullptr : &grads);
  AdapterSet adapter_set =
      AdapterSet::create(spec, init, std::move(assignment), config.base_quant,
                         config.quant_group_size);
  const int r = adapter_set.trainable_count();
  Vector lambda_vec(r);
  if (lambda0 != nullptr) {
    if (lambda0->dim() != r) {
      throw std::invalid_argument("train_adapter: lambda0 dim mismatch");
    }
    lambda_vec = *lambda0;
    adapter_set.set_adapters(lambda_vec);
  }
  OptimizerState state = make_optimizer_state(config.optimizer, r);

  Trajectory traj;
  if (config.snapshot_every > 0) {
    traj.theta_snapshots.push_back(flatten(effective_params(adapter_set)));
    traj.state_snapshots.push_back(state.flattened());
  }
  for (int t = 0; t < config.steps; ++t) {
    if (config.merge_every > 0 && t > 0 && t % config.merge_every == 0) {
      const std::uint64_t window =
          std::uint64_t(t) / std::uint64_t(config.merge_every);
      std::vector<Matrix> refreshed =
          maybe_peek(spec, effective_params(adapter_set), task, config,
                     std::uint64_t(t));
      TransformAssignment fresh = build_assignment(
          config, spec, window, refreshed.empty() ? nullptr : &refreshed);
      const MergeStats stats =
          merge_and_reset(spec, adapter_set, std::move(fresh));
      traj.merge_drifts.push_back(stats.effective_drift);
      lambda_vec = Vector(r);
      if (adapter_set.trainable_count() != r) {
        throw std::runtime_error(
            "train_adapter: merge changed the adapter dimension");
      }
      if (config.merge_state_policy == StatePolicy::reset) {
        state = make_optimizer_state(config.optimizer, r);
      }
    }

    double loss = 0.0;
    const Vector grad = accumulate_mean(
        config, std::uint64_t(t), task,
        [&](const Batch& batch, double* loss_out) {
          return adapter_gradient(spec, adapter_set, batch, loss_out);
        },
        &loss);
    check_loss(loss, t);
    StepResult step = optimizer_step(grad, state);
    state = std::move(step.next_state);

    // Lambda update; adapter_matched additionally decays the frozen base so
    // the effective weight tracks the transformed view exactly.
    const double lam =
        (config.decay == DecayMode::adapter_view || decay_base) ? lambda : 0.0;
    apply_update_with_decay(lambda_vec, step.update, lam);
    if (decay_base && lambda != 0.0) {
      for (Matrix& w : adapter_set.base.weights) {
        for (double& x : w.data()) x -= lambda * x;
      }
      for (Vector& b : adapter_set.base.biases) {
        for (int i = 0; i < b.dim(); ++i) b[i] -= lambda * b[i];
      }
    }
    if (config.precision == Precision::f32) round_to_f32(lambda_vec);
    adapter_set.set_adapters(lambda_vec);
    record_step(traj, config, t, loss, l2_norm(grad),
                flatten(effective_params(adapter_set)), state.flattened());
  }
  finalize(traj, flatten(effective_params(adapter_set)), state.flattened());
  traj.final_adapters = std::move(adapter_set);
  return traj;
}

Trajectory train_relora(const ModelSpec& spec, const ModelParams& init,
                        const SyntheticTask& task, const TrainConfig& config) {
  validate(config);
  if (config.decay != DecayMode::none &&
      config.decay != DecayMode::adapter_view) {
    throw std::invalid_argument("train_relora: unsupported decay mode");
  }
  const int layer_count = static_cast<int>(spec.layers.size());
  std::vector<Matrix> base = init.weights;
  std::vector<Vector> base_bias = init.biases;

  const int rank = config.rank;
  // B (m x r) starts at zero, A (r x n) Gaussian, so B A = 0 at init and
  // after every reset.
  auto sample_a = [&](std::uint64_t window) {
    std::vector<Matrix> a_mats;
    for (int l = 0; l < layer_count; ++l) {
      const int n = spec.layers[std::size_t(l)].in_dim;
      const int m = spec.layers[std::size_t(l)].out_dim;
      const int r = std::min({rank, m, n});
      Rng rng(config.seed, streams::transform(window, std::uint64_t(l)));
      a_mats.push_back(
          gaussian_matrix(rng, r, n, 1.0 / std::sqrt(double(n))));
    }
    return a_mats;
  };

  std::vector<Matrix> a_mats = sample_a(0);
  std::vector<Matrix> b_mats;
  for (int l = 0; l < layer_count; ++l) {
    const int m = spec.layers[std::size_t(l)].out_dim;
    b_mats.emplace_back(m, a_mats[std::size_t(l)].rows());
  }

  auto flatten_trainables = [&]() {
    std::vector<double> out;
    for (int l = 0; l < layer_count; ++l) {
      out.insert(out.end(), b_mats[std::size_t(l)].data().begin(),
                 b_mats[std::size_t(l)].data().end());
      out.insert(out.end(), a_mats[std::size_t(l)].data().begin(),
                 a_mats[std::size_t(l)].data().end());
      out.insert(out.end(), base_bias[std::size_t(l)].data().begin(),
                 base_bias[std::size_t(l)].data().end());
    }
    return Vector::from_data(std::move(out));
  };

  auto effective = [&]() {
    ModelParams params;
    for (int l = 0; l < layer_count; ++l) {
      params.weights.push_back(
          base[std::size_t(l)] +
          matmul(b_mats[std::size_t(l)], a_mats[std::size_t(l)]));
      params.biases.push_back(base_bias[std::size_t(l)]);
    }
    return params;
  };

  const int dim = flatten_trainables().dim();
  OptimizerState state = make_optimizer_state(config.optimizer, dim);

  Trajectory traj;
  if (config.snapshot_every > 0) {
    traj.theta_snapshots.push_back(flatten(effective()));
    traj.state_snapshots.push_back(state.flattened());
  }
  const ParamLayout layout = make_layout(spec);
  for (int t = 0; t < config.steps; ++t) {
    if (config.merge_every > 0 && t > 0 && t % config.merge_every == 0) {
      const std::uint64_t window =
          std::uint64_t(t) / std::uint64_t(config.merge_every);
      for (int l = 0; l < layer_count; ++l) {
        base[std::size_t(l)] =
            base[std::size_t(l)] +
            matmul(b_mats[std::size_t(l)], a_mats[std::size_t(l)]);
      }
      a_mats = sample_a(window);
      for (int l = 0; l < layer_count; ++l) {
        b_mats[std::size_t(l)] =
            Matrix(b_mats[std::size_t(l)].rows(), b_mats[std::size_t(l)].cols());
      }
      if (config.merge_state_policy == StatePolicy::reset) {
        state = make_optimizer_state(config.optimizer, dim);
      }
    }

    double loss = 0.0;
    // Gradient w.r.t. (B, A, bias) blocks via the chain rule on the full
    // weight gradient: dB = dW A^T, dA = B^T dW.
    const Vector grad = accumulate_mean(
        config, std::uint64_t(t), task,
        [&](const Batch& batch, double* loss_out) {
          const Vector full =
              model_gradient(spec, effective(), batch, loss_out);
          std::vector<double> out;
          for (int l = 0; l < layer_count; ++l) {
            const auto& entry = layout.layers[std::size_t(l)];
            std::vector<double> gw(full.data().begin() + entry.weight_offset,
                                   full.data().begin() + entry.weight_offset +
                                       entry.rows * entry.cols);
            const Matrix dw = Matrix::from_column_major(entry.rows, entry.cols,
                                                        std::move(gw));
            const Matrix db =
                matmul(dw, transpose(a_mats[std::size_t(l)]));
            const Matrix da =
                matmul(transpose(b_mats[std::size_t(l)]), dw);
            out.insert(out.end(), db.data().begin(), db.data().end());
            out.insert(out.end(), da.data().begin(), da.data().end());
            if (entry.bias_offset >= 0) {
              out.insert(out.end(), full.data().begin() + entry.bias_offset,
                         full.data().begin() + entry.bias_offset +
                             entry.bias_dim);
            }
          }
          return Vector::from_data(std::move(out));
        },
        &loss);
    check_loss(loss, t);
    StepResult step = optimizer_step(grad, state);
    state = std::move(step.next_state);

    Vector trainables = flatten_trainables();
    apply_update_with_decay(
        trainables, step.update,
        config.decay == DecayMode::adapter_view ? config.decay_lambda : 0.0);
    if (config.precision == Precision::f32) round_to_f32(trainables);
    int at = 0;
    for (int l = 0; l < layer_count; ++l) {
      for (double& x : b_mats[std::size_t(l)].data()) x = trainables[at++];
      for (double& x : a_mats[std::size_t(l)].data()) x = trainables[at++];
      for (int i = 0; i < base_bias[std::size_t(l)].dim(); ++i) {
        base_bias[std::size_t(l)][i] = trainables[at++];
      }
    }
    record_step(traj, config, t, loss, l2_norm(grad), flatten(effective()),
                state.flattened());
  }
  finalize(traj, flatten(effective()), state.flattened());
  return traj;
}

DualityReport equivalence_harness(const ModelSpec& spec,
                                  const ModelParams& init,
                                  const SyntheticTask& task,
                                  const TrainConfig& config,
                                  DecayPairing pairing,
                                  bool nonzero_adapter_init) {
  TrainConfig transformed_cfg = config;
  TrainConfig adapter_cfg = config;
  transformed_cfg.trainer = TrainerKind::transformed;
  adapter_cfg.trainer = TrainerKind::adapter;
  transformed_cfg.snapshot_every = 1;
  adapter_cfg.snapshot_every = 1;

  switch (pairing) {
    case DecayPairing::none:
      transformed_cfg.decay = DecayMode::none;
      adapter_cfg.decay = DecayMode::none;
      break;
    case DecayPairing::matched_transformed:
      transformed_cfg.decay = DecayMode::transformed_view;
      adapter_cfg.decay = DecayMode::adapter_matched;
      break;
    case DecayPairing::matched_adapter:
      transformed_cfg.decay = DecayMode::transformed_matched;
      adapter_cfg.decay = DecayMode::adapter_view;
      break;
    case DecayPairing::mismatched:
      transformed_cfg.decay = DecayMode::transformed_view;
      adapter_cfg.decay = DecayMode::adapter_view;
      break;
  }

  ModelParams transformed_init = init;
  Vector lambda0;
  const Vector* lambda0_ptr = nullptr;
  if (nonzero_adapter_init) {
    if (family_needs_gradient(config.family)) {
      throw std::invalid_argument(
          "nonzero adapter init is not defined for gradient-derived "
          "transforms");
    }
    // Draw a nonzero adapter start and shift the transformed run's starting
    // point so both views describe the same initial function.
    TransformAssignment assignment =
        build_assignment(config, spec, 0, nullptr);
    AdapterSet probe = AdapterSet::create(spec, init, std::move(assignment));
    lambda0 = Vector(probe.trainable_count());
    Rng rng(config.seed ^ 0x5eedull, 977);
    for (int i = 0; i < lambda0.dim(); ++i) {
      lambda0[i] = 0.05 * rng.next_gaussian();
    }
    probe.set_adapters(lambda0);
    transformed_init = effective_params(probe);
    lambda0_ptr = &lambda0;
  }

  DualityReport report;
  report.transformed =
      train_transformed(spec, transformed_init, task, transformed_cfg);
  report.adapter = train_adapter(spec, init, task, adapter_cfg, lambda0_ptr);

  const std::size_t steps =
      std::min(report.transformed.theta_snapshots.size(),
               report.adapter.theta_snapshots.size());
  for (std::size_t s = 0; s < steps; ++s) {
    const Vector& a = report.transformed.theta_snapshots[s];
    const Vector& b = report.adapter.theta_snapshots[s];
    const double abs_dev = linf_norm(a - b);
    const double rel = abs_dev / (1.0 + linf_norm(a));
    report.per_step_param_dev.push_back(rel);
    report.max_param_dev = std::max(report.max_param_dev, rel);
    if (s == 1) report.step1_abs_dev = abs_dev;

    const Vector& sa = report.transformed.state_snapshots[s];
    const Vector& sb = report.adapter.state_snapshots[s];
    const double srel = linf_norm(sa - sb) / (1.0 + linf_norm(sa));
    report.per_step_state_dev.push_back(srel);
    report.max_state_dev = std::max(report.max_state_dev, srel);
  }
  return report;
}

}  // namespace dualtrain

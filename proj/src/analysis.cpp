#include "dualtrain/analysis.hpp"

#include <cmath>
#include <stdexcept>

namespace dualtrain {

ReconStats reconstruction_error(const GradientTransform& t, const Matrix& g) {
  const Matrix recon = apply_transpose(t, apply(t, g));
  const Matrix residual = g - recon;
  ReconStats stats;
  stats.l2_sq = frobenius_inner(residual, residual);
  const double gn = frobenius_norm(g);
  const double rn = frobenius_norm(recon);
  if (gn == 0.0) {
    stats.cosine = 1.0;
  } else if (rn == 0.0) {
    stats.cosine = 0.0;
  } else {
    stats.cosine = frobenius_inner(g, recon) / (gn * rn);
  }
  return stats;
}

std::vector<ReconRow> reconstruction_sweep(
    const ModelSpec& spec, const ModelParams& init, const SyntheticTask& task,
    const TrainConfig& config, const std::vector<TransformFamily>& families,
    int sample_every) {
  if (sample_every < 1) {
    throw std::invalid_argument("reconstruction_sweep: sample_every < 1");
  }
  const ParamLayout layout = make_layout(spec);
  Vector theta = flatten(init);
  OptimizerState state = make_optimizer_state(config.optimizer, theta.dim());

  std::vector<ReconRow> rows;
  std::uint64_t sample_index = 0;
  for (int t = 0; t < config.steps; ++t) {
    const Batch batch = task.batch(std::uint64_t(t), config.shard);
    const Vector grad = model_gradient(spec, unflatten(spec, theta), batch);

    if (t % sample_every == 0) {
      std::vector<Matrix> layer_grads;
      for (const auto& entry : layout.layers) {
        std::vector<double> gw(
            grad.data().begin() + entry.weight_offset,
            grad.data().begin() + entry.weight_offset +
                entry.rows * entry.cols);
        layer_grads.push_back(
            Matrix::from_column_major(entry.rows, entry.cols, std::move(gw)));
      }
      for (const TransformFamily family : families) {
        const TransformAssignment assignment =
            make_assignment(family, config.rank, spec, config.seed,
                            sample_index, &layer_grads);
        double l2 = 0.0;
        double cosine = 0.0;
        for (std::size_t l = 0; l < layer_grads.size(); ++l) {
          const ReconStats stats = reconstruction_error(
              assignment.per_layer[l], layer_grads[l]);
          l2 += stats.l2_sq;
          cosine += stats.cosine;
        }
        rows.push_back({t, to_string(family),
                        l2 / double(layer_grads.size()),
                        cosine / double(layer_grads.size())});
      }
      sample_index += 1;
    }

    StepResult step = optimizer_step(grad, state);
    state = std::move(step.next_state);
    add_scaled(theta, 1.0, step.update);
  }
  return rows;
}

MemoryModel memory_model_for_preset(const std::string& name) {
  int layers = 0, embed = 0, intermediate = 0, rank = 0;
  if (name == "200M") {
    layers = 12;
    embed = 1024;
    intermediate = 2816;
    rank = 256;
  } else if (name == "1.3B") {
    layers = 24;
    embed = 2048;
    intermediate = 5472;
    rank = 512;
  } else {
    throw std::invalid_argument("unknown memory preset: " + name);
  }
  constexpr int vocab = 32000;
  MemoryModel model;
  for (int l = 0; l < layers; ++l) {
    // attention q, k, v, o
    for (int i = 0; i < 4; ++i) model.matrix_shapes.push_back({embed, embed});
    // gated MLP: gate, up, down
    model.matrix_shapes.push_back({intermediate, embed});
    model.matrix_shapes.push_back({intermediate, embed});
    model.matrix_shapes.push_back({embed, intermediate});
  }
  // untied input/output embeddings plus per-layer and final norms
  model.aux_params = 2ll * vocab * embed + (2ll * layers + 1) * embed;
  model.bytes_per_element = 2.0;
  model.bytes_per_scale = 4.0;
  model.quant_group_size = 256;
  model.default_rank = rank;
  return model;
}

MemoryMethod memory_method_from_string(const std::string& s) {
  if (s == "full") return MemoryMethod::full;
  if (s == "relora") return MemoryMethod::relora;
  if (s == "one_sided_svd") return MemoryMethod::one_sided_svd;
  if (s == "one_sided_semi_orthogonal") {
    return MemoryMethod::one_sided_semi_orthogonal;
  }
  if (s == "one_sided_gaussian") return MemoryMethod::one_sided_gaussian;
  if (s == "one_sided_rademacher") return MemoryMethod::one_sided_rademacher;
  if (s == "two_sided_gaussian") return MemoryMethod::two_sided_gaussian;
  if (s == "two_sided_svd") return MemoryMethod::two_sided_svd;
  throw std::invalid_argument("unknown memory method: " + s);
}

std::string to_string(MemoryMethod method) {
  switch (method) {
    case MemoryMethod::full:
      return "full";
    case MemoryMethod::relora:
      return "relora";
    case MemoryMethod::one_sided_svd:
      return "one_sided_svd";
    case MemoryMethod::one_sided_semi_orthogonal:
      return "one_sided_semi_orthogonal";
    case MemoryMethod::one_sided_gaussian:
      return "one_sided_gaussian";
    case MemoryMethod::one_sided_rademacher:
      return "one_sided_rademacher";
    case MemoryMethod::two_sided_gaussian:
      return "two_sided_gaussian";
    case MemoryMethod::two_sided_svd:
      return "two_sided_svd";
  }
  return "full";
}

MemoryBreakdown memory_estimate(const MemoryModel& model,
                                const MethodSpec& method) {
  const double w = model.bytes_per_element;
  const int rank = method.rank > 0 ? method.rank : model.default_rank;

  std::int64_t matrix_params = 0;
  std::int64_t adapter_count = 0;   // trainable params added by the adapters
  std::int64_t projector_count = 0; // persisted projector entries
  std::int64_t largest_matrix = 0;
  for (const auto& [m, n] : model.matrix_shapes) {
    const std::int64_t numel = std::int64_t(m) * n;
    matrix_params += numel;
    largest_matrix = std::max(largest_matrix, numel);
    const int dmin = std::min(m, n);
    const int dmax = std::max(m, n);
    const int d = std::min(rank, dmin);
    switch (method.method) {
      case MemoryMethod::full:
        break;
      case MemoryMethod::relora:
        adapter_count += std::int64_t(d) * (m + n);
        break;
      case MemoryMethod::one_sided_svd:
      case MemoryMethod::one_sided_semi_orthogonal:
        adapter_count += std::int64_t(d) * dmax;
        projector_count += std::int64_t(d) * dmin;
        break;
      case MemoryMethod::one_sided_gaussian:
      case MemoryMethod::one_sided_rademacher:
        adapter_count += std::int64_t(d) * dmax;  // projector is seed-only
        break;
      case MemoryMethod::two_sided_gaussian: {
        const int r2 = two_sided_rank_for(d, m, n);
        adapter_count += std::int64_t(r2) * r2;
        break;
      }
      case MemoryMethod::two_sided_svd: {
        const int r2 = two_sided_rank_for(d, m, n);
        adapter_count += std::int64_t(r2) * r2;
        projector_count += std::int64_t(r2) * (m + n);
        break;
      }
    }
  }

  MemoryBreakdown out;
  const bool is_full = method.method == MemoryMethod::full;
  out.trainable_params =
      (is_full ? matrix_params : adapter_count) + model.aux_params;

  // Base weights: every method keeps the full weight matrices around (frozen
  // or trained); only adapter-style methods may quantize them.
  if (method.base_quant == QuantFormat::none || is_full) {
    out.base_weights =
        std::int64_t(double(matrix_params + model.aux_params) * w);
  } else {
    const double code_bytes =
        method.base_quant == QuantFormat::int8 ? 1.0 : 0.5;
    out.base_weights = std::int64_t(double(matrix_params) * code_bytes +
                                    double(model.aux_params) * w);
    const std::int64_t groups =
        (matrix_params + model.quant_group_size - 1) / model.quant_group_size;
    out.quant_scales = std::int64_t(double(groups) * model.bytes_per_scale);
  }

  out.adapter_params = std::int64_t(double(adapter_count) * w);
  out.gradient_buffer = std::int64_t(double(out.trainable_params) * w);
  out.optimizer_states = std::int64_t(2.0 * double(out.trainable_params) * w);
  out.projectors = std::int64_t(double(projector_count) * w);
  if (method.method == MemoryMethod::one_sided_svd ||
      method.method == MemoryMethod::two_sided_svd) {
    // Recomputing the projector needs one full-precision gradient matrix of
    // the largest transformed layer, over and above the compressed buffers.
    out.svd_workspace = std::int64_t(double(largest_matrix) * w);
  }
  return out;
}

}  // namespace dualtrain

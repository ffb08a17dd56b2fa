#include "dualtrain/reparam.hpp"

#include <cmath>
#include <stdexcept>

namespace dualtrain {

Matrix FrozenBase::weight(std::size_t layer) const {
  if (format == QuantFormat::none) {
    return weights[layer];
  }
  return dequantize(q_weights[layer]);
}

FrozenBase FrozenBase::from_params(const ModelParams& params,
                                   QuantFormat format, int group_size) {
  FrozenBase base;
  base.format = format;
  base.group_size = group_size;
  base.biases = params.biases;
  if (format == QuantFormat::none) {
    base.weights = params.weights;
    return base;
  }
  for (const Matrix& w : params.weights) {
    base.q_weights.push_back(format == QuantFormat::int8
                                 ? quantize_int8(w, group_size)
                                 : quantize_nf4(w, group_size));
  }
  return base;
}

AdapterSet AdapterSet::create(const ModelSpec& spec, const ModelParams& params,
                              TransformAssignment transforms,
                              QuantFormat format, int group_size) {
  if (transforms.per_layer.size() != spec.layers.size()) {
    throw std::invalid_argument("AdapterSet: one transform per layer required");
  }
  AdapterSet a;
  a.base = FrozenBase::from_params(params, format, group_size);
  a.transforms = std::move(transforms);
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    const auto& t = a.transforms.per_layer[l];
    if (t.layer_rows != spec.layers[l].out_dim ||
        t.layer_cols != spec.layers[l].in_dim) {
      throw std::invalid_argument("AdapterSet: transform shape mismatch");
    }
    a.adapters.emplace_back(t.compressed_rows(), t.compressed_cols());
    a.bias_adapters.push_back(
        spec.layers[l].has_bias ? Vector(spec.layers[l].out_dim) : Vector());
  }
  return a;
}

int AdapterSet::trainable_count() const {
  int total = 0;
  for (const auto& m : adapters) total += static_cast<int>(m.size());
  for (const auto& b : bias_adapters) total += b.dim();
  return total;
}

Vector AdapterSet::flatten_adapters() const {
  std::vector<double> out;
  for (std::size_t l = 0; l < adapters.size(); ++l) {
    out.insert(out.end(), adapters[l].data().begin(),
               adapters[l].data().end());
    out.insert(out.end(), bias_adapters[l].data().begin(),
               bias_adapters[l].data().end());
  }
  return Vector::from_data(std::move(out));
}

void AdapterSet::set_adapters(const Vector& lambda) {
  int at = 0;
  for (std::size_t l = 0; l < adapters.size(); ++l) {
    auto ad = adapters[l].data();
    for (std::size_t i = 0; i < ad.size(); ++i) ad[i] = lambda[at++];
    auto bd = bias_adapters[l].data();
    for (std::size_t i = 0; i < bd.size(); ++i) bd[i] = lambda[at++];
  }
  if (at != lambda.dim()) {
    throw std::invalid_argument("set_adapters: dimension mismatch");
  }
}

ModelParams effective_params(const AdapterSet& a) {
  ModelParams params;
  for (std::size_t l = 0; l < a.adapters.size(); ++l) {
    Matrix w = a.base.weight(l);
    const Matrix delta = apply_transpose(a.transforms.per_layer[l],
                                         a.adapters[l]);
    add_scaled(w, 1.0, delta);
    params.weights.push_back(std::move(w));
    Vector b = a.base.biases[l];
    if (b.dim() > 0) add_scaled(b, 1.0, a.bias_adapters[l]);
    params.biases.push_back(std::move(b));
  }
  return params;
}

Vector adapter_gradient(const ModelSpec& spec, const AdapterSet& a,
                        const Batch& batch, double* loss_out) {
  const ModelParams eff = effective_params(a);
  const Vector full = model_gradient(spec, eff, batch, loss_out);
  const ParamLayout layout = make_layout(spec);

  std::vector<double> out;
  for (std::size_t l = 0; l < a.adapters.size(); ++l) {
    const auto& entry = layout.layers[l];
    std::vector<double> gw(
        full.data().begin() + entry.weight_offset,
        full.data().begin() + entry.weight_offset + entry.rows * entry.cols);
    const Matrix grad_w =
        Matrix::from_column_major(entry.rows, entry.cols, std::move(gw));
    const Matrix compressed = apply(a.transforms.per_layer[l], grad_w);
    out.insert(out.end(), compressed.data().begin(), compressed.data().end());
    if (entry.bias_offset >= 0) {
      out.insert(out.end(), full.data().begin() + entry.bias_offset,
                 full.data().begin() + entry.bias_offset + entry.bias_dim);
    }
  }
  return Vector::from_data(std::move(out));
}

MergeStats merge_and_reset(const ModelSpec& spec, AdapterSet& a,
                           TransformAssignment fresh) {
  if (fresh.per_layer.size() != a.adapters.size()) {
    throw std::invalid_argument("merge_and_reset: transform count mismatch");
  }
  MergeStats stats;
  const ModelParams merged = effective_params(a);
  if (a.base.format == QuantFormat::none) {
    a.base.weights = merged.weights;
  } else {
    for (std::size_t l = 0; l < merged.weights.size(); ++l) {
      a.base.q_weights[l] =
          a.base.format == QuantFormat::int8
              ? quantize_int8(merged.weights[l], a.base.group_size)
              : quantize_nf4(merged.weights[l], a.base.group_size);
      const Matrix roundtrip = dequantize(a.base.q_weights[l]);
      stats.effective_drift = std::max(
          stats.effective_drift, max_abs(roundtrip - merged.weights[l]));
    }
  }
  a.base.biases = merged.biases;
  a.transforms = std::move(fresh);
  a.adapters.clear();
  a.bias_adapters.clear();
  for (std::size_t l = 0; l < a.transforms.per_layer.size(); ++l) {
    const auto& t = a.transforms.per_layer[l];
    a.adapters.emplace_back(t.compressed_rows(), t.compressed_cols());
    a.bias_adapters.push_back(
        spec.layers[l].has_bias ? Vector(spec.layers[l].out_dim) : Vector());
  }
  return stats;
}

}  // namespace dualtrain

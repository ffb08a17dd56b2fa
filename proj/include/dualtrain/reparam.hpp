#ifndef DUALTRAIN_REPARAM_HPP
#define DUALTRAIN_REPARAM_HPP

#include <optional>
#include <vector>

#include "dualtrain/matrix.hpp"
#include "dualtrain/model.hpp"
#include "dualtrain/quant.hpp"
#include "dualtrain/transform.hpp"

namespace dualtrain {

// Frozen base weights, stored either verbatim or blockwise-quantized. The
// pass-through variant keeps adapter training over a full-precision base and
// over an "identity quantizer" literally the same code path.
struct FrozenBase {
  QuantFormat format = QuantFormat::none;
  int group_size = 256;
  std::vector<Matrix> weights;            // format == none
  std::vector<QuantizedTensor> q_weights; // format != none
  std::vector<Vector> biases;             // never quantized

  Matrix weight(std::size_t layer) const;
  static FrozenBase from_params(const ModelParams& params,
                                QuantFormat format = QuantFormat::none,
                                int group_size = 256);
};

// Additive linear adapter over a frozen base: per layer the effective weight
// is W0 + S^T(A), with only A (and the bias offsets) trainable. The adapter
// is born zero and returns to zero at every merge, so the effective function
// is continuous across merges.
struct AdapterSet {
  FrozenBase base;
  TransformAssignment transforms;
  std::vector<Matrix> adapters;       // per layer, shaped by the transform
  std::vector<Vector> bias_adapters;  // zero-dim when the layer has no bias

  static AdapterSet create(const ModelSpec& spec, const ModelParams& base,
                           TransformAssignment transforms,
                           QuantFormat format = QuantFormat::none,
                           int group_size = 256);

  int trainable_count() const;

  // Adapter-space flattening: per layer vec(A) then the bias block.
  Vector flatten_adapters() const;
  void set_adapters(const Vector& lambda);
};

ModelParams effective_params(const AdapterSet& a);

// S grad(Theta_eff), flattened in adapter order. Loss comes out through
// `loss_out`.
Vector adapter_gradient(const ModelSpec& spec, const AdapterSet& a,
                        const Batch& batch, double* loss_out = nullptr);

struct MergeStats {
  // Sup-norm change of the effective weights across the merge; zero for a
  // full-precision base, bounded by the quantizer round-trip error otherwise.
  double effective_drift = 0.0;
};

// Fold S^T(A) into the base (requantizing if the base is quantized), zero the
// adapters, and install fresh transforms.
MergeStats merge_and_reset(const ModelSpec& spec, AdapterSet& a,
                           TransformAssignment fresh);

}  // namespace dualtrain

#endif

#ifndef DUALTRAIN_ANALYSIS_HPP
#define DUALTRAIN_ANALYSIS_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dualtrain/model.hpp"
#include "dualtrain/quant.hpp"
#include "dualtrain/trainer.hpp"
#include "dualtrain/transform.hpp"

namespace dualtrain {

struct ReconStats {
  double l2_sq = 0.0;  // |g - S^T S g|^2 (Frobenius, squared)
  double cosine = 1.0; // cos(g, S^T S g); 1 for a zero gradient
};

ReconStats reconstruction_error(const GradientTransform& t, const Matrix& g);

// One row of the reconstruction sweep CSV: transform family stats averaged
// over the model's layers, sampled along a training run.
struct ReconRow {
  int step = 0;
  std::string method;
  double l2_sq = 0.0;
  double cosine = 0.0;
};

std::vector<ReconRow> reconstruction_sweep(
    const ModelSpec& spec, const ModelParams& init, const SyntheticTask& task,
    const TrainConfig& config, const std::vector<TransformFamily>& families,
    int sample_every);

// ---------------------------------------------------------------------------
// Memory accounting. Counts persisted bytes per the convention used in the
// training-method comparison: model weights, gradient accumulation buffers
// (in the compressed space for adapter methods), optimizer states (2x
// trainable for Adam), and whichever projection matrices cannot be
// rematerialized from a seed. Activations are excluded.

struct MemoryModel {
  // (rows, cols) of every weight matrix the transforms apply to.
  std::vector<std::pair<int, int>> matrix_shapes;
  // Embeddings, norms, biases: trained in full space by every method here.
  std::int64_t aux_params = 0;
  double bytes_per_element = 2.0;  // weights / gradients / optimizer states
  double bytes_per_scale = 4.0;    // quantization group scales
  int quant_group_size = 256;
  int default_rank = 4;
};

// "200M" and "1.3B" transformer presets (12/24 layers, 1024/2048 embed,
// 2816/5472 intermediate, 32000 vocab, untied embeddings; ranks 256/512).
MemoryModel memory_model_for_preset(const std::string& name);

enum class MemoryMethod {
  full,
  relora,
  one_sided_svd,
  one_sided_semi_orthogonal,
  one_sided_gaussian,
  one_sided_rademacher,
  two_sided_gaussian,
  two_sided_svd,
};

MemoryMethod memory_method_from_string(const std::string& s);
std::string to_string(MemoryMethod method);

struct MethodSpec {
  MemoryMethod method = MemoryMethod::full;
  int rank = 0;  // 0 = the model's default rank
  QuantFormat base_quant = QuantFormat::none;
};

struct MemoryBreakdown {
  std::int64_t base_weights = 0;
  std::int64_t adapter_params = 0;
  std::int64_t gradient_buffer = 0;
  std::int64_t optimizer_states = 0;
  std::int64_t projectors = 0;     // persisted projection matrices
  std::int64_t svd_workspace = 0;  // full gradient of the largest layer,
                                   // materialized for the SVD refresh
  std::int64_t quant_scales = 0;
  std::int64_t trainable_params = 0;  // count, not bytes

  std::int64_t total_bytes() const {
    return base_weights + adapter_params + gradient_buffer + optimizer_states +
           projectors + svd_workspace + quant_scales;
  }
};

MemoryBreakdown memory_estimate(const MemoryModel& model,
                                const MethodSpec& method);

}  // namespace dualtrain

#endif

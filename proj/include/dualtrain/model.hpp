#ifndef DUALTRAIN_MODEL_HPP
#define DUALTRAIN_MODEL_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "dualtrain/matrix.hpp"
#include "dualtrain/rng.hpp"

namespace dualtrain {

enum class Nonlinearity { identity, tanh_fn, relu };
enum class LossKind { mse, cross_entropy };

struct LayerSpec {
  int in_dim = 1;
  int out_dim = 1;
  Nonlinearity nonlinearity = Nonlinearity::identity;
  bool has_bias = true;
};

struct ModelSpec {
  std::vector<LayerSpec> layers;
  LossKind loss = LossKind::mse;

  int input_dim() const { return layers.front().in_dim; }
  int output_dim() const { return layers.back().out_dim; }
};

// Per-layer weights (out_dim x in_dim) and biases, together with the
// canonical flattening: layers in definition order, vec(W) then bias.
struct ModelParams {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;  // zero-dim when the layer has no bias
};

// Offsets of each layer's blocks inside the flattened parameter vector.
struct ParamLayout {
  struct Layer {
    int weight_offset = 0;
    int rows = 0;
    int cols = 0;
    int bias_offset = 0;  // -1 when absent
    int bias_dim = 0;
  };
  std::vector<Layer> layers;
  int total = 0;
};

ParamLayout make_layout(const ModelSpec& spec);
int param_count(const ModelSpec& spec);

Vector flatten(const ModelParams& params);
ModelParams unflatten(const ModelSpec& spec, const Vector& theta);

// Gaussian init scaled by 1/sqrt(in_dim); biases start at zero.
ModelParams init_params(const ModelSpec& spec, Rng& rng);

struct Batch {
  Matrix inputs;            // in_dim x batch
  Matrix targets;           // out_dim x batch (mse)
  std::vector<int> labels;  // batch (cross_entropy)

  int size() const { return inputs.cols(); }
};

Batch concat(const std::vector<Batch>& parts);

struct ForwardCache {
  std::vector<Matrix> activations;      // x_0 .. x_L
  std::vector<Matrix> pre_activations;  // z_1 .. z_L
  std::uint64_t params_fingerprint = 0;
  std::uint64_t batch_fingerprint = 0;
};

// Mean loss over the batch: squared error summed over output coordinates for
// MSE, softmax cross-entropy for classification.
double forward(const ModelSpec& spec, const ModelParams& params,
               const Batch& batch, ForwardCache* cache = nullptr);

// Analytic gradient of forward() in the canonical flattening order. The cache
// must come from a forward() on the same params and batch.
Vector backward(const ModelSpec& spec, const ModelParams& params,
                const Batch& batch, const ForwardCache& cache);

Vector model_gradient(const ModelSpec& spec, const ModelParams& params,
                      const Batch& batch, double* loss_out = nullptr);

// Central-difference oracle, h per coordinate.
Vector fd_gradient(const ModelSpec& spec, const ModelParams& params,
                   const Batch& batch, double h);

enum class TaskKind { regression, classification };

struct TaskSpec {
  TaskKind kind = TaskKind::regression;
  int input_dim = 8;
  int output_dim = 4;
  int batch_size = 16;
  double noise = 0.0;
  std::vector<int> teacher_hidden;  // hidden widths of the teacher net
};

// Deterministic stream of batches from a fixed random teacher network plus
// optional Gaussian noise. batch(i) is a pure function of (seed, shard, i),
// which gives dual runs identical data and distributed workers disjoint
// shards.
class SyntheticTask {
 public:
  SyntheticTask(TaskSpec spec, std::uint64_t seed);

  Batch batch(std::uint64_t index, std::uint64_t shard = 0) const;
  Batch eval_batch(int size) const;

  const TaskSpec& spec() const { return spec_; }
  ModelSpec target_model(Nonlinearity hidden_nl, bool bias, LossKind loss,
                         const std::vector<int>& hidden) const;

 private:
  TaskSpec spec_;
  std::uint64_t seed_;
  ModelSpec teacher_spec_;
  ModelParams teacher_;

  Batch batch_from_rng(Rng& rng, int size) const;
};

Nonlinearity nonlinearity_from_string(const std::string& s);
std::string to_string(Nonlinearity nl);

}  // namespace dualtrain

#endif

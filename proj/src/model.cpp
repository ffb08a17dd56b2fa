#include "dualtrain/model.hpp"

#include <cmath>
#include <stdexcept>

namespace dualtrain {

ParamLayout make_layout(const ModelSpec& spec) {
  ParamLayout layout;
  int offset = 0;
  for (const auto& l : spec.layers) {
    ParamLayout::Layer entry;
    entry.weight_offset = offset;
    entry.rows = l.out_dim;
    entry.cols = l.in_dim;
    offset += l.out_dim * l.in_dim;
    if (l.has_bias) {
      entry.bias_offset = offset;
      entry.bias_dim = l.out_dim;
      offset += l.out_dim;
    } else {
      entry.bias_offset = -1;
      entry.bias_dim = 0;
    }
    layout.layers.push_back(entry);
  }
  layout.total = offset;
  return layout;
}

int param_count(const ModelSpec& spec) { return make_layout(spec).total; }

Vector flatten(const ModelParams& params) {
  std::vector<double> out;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    const auto& w = params.weights[l].data();
    out.insert(out.end(), w.begin(), w.end());
    const auto& b = params.biases[l].data();
    out.insert(out.end(), b.begin(), b.end());
  }
  return Vector::from_data(std::move(out));
}

ModelParams unflatten(const ModelSpec& spec, const Vector& theta) {
  const ParamLayout layout = make_layout(spec);
  if (theta.dim() != layout.total) {
    throw std::invalid_argument("unflatten: dimension mismatch");
  }
  ModelParams params;
  for (const auto& entry : layout.layers) {
    std::vector<double> w(
        theta.data().begin() + entry.weight_offset,
        theta.data().begin() + entry.weight_offset + entry.rows * entry.cols);
    params.weights.push_back(
        Matrix::from_column_major(entry.rows, entry.cols, std::move(w)));
    if (entry.bias_offset >= 0) {
      std::vector<double> b(
          theta.data().begin() + entry.bias_offset,
          theta.data().begin() + entry.bias_offset + entry.bias_dim);
      params.biases.push_back(Vector::from_data(std::move(b)));
    } else {
      params.biases.emplace_back();
    }
  }
  return params;
}

ModelParams init_params(const ModelSpec& spec, Rng& rng) {
  ModelParams params;
  for (const auto& l : spec.layers) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(l.in_dim));
    Matrix w(l.out_dim, l.in_dim);
    for (double& x : w.data()) x = scale * rng.next_gaussian();
    params.weights.push_back(std::move(w));
    params.biases.push_back(l.has_bias ? Vector(l.out_dim) : Vector());
  }
  return params;
}

Batch concat(const std::vector<Batch>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no batches");
  int total = 0;
  for (const auto& p : parts) total += p.size();
  Batch out;
  out.inputs = Matrix(parts.front().inputs.rows(), total);
  const bool has_targets = parts.front().targets.size() > 0;
  if (has_targets) out.targets = Matrix(parts.front().targets.rows(), total);
  int at = 0;
  for (const auto& p : parts) {
    for (int j = 0; j < p.size(); ++j, ++at) {
      for (int i = 0; i < p.inputs.rows(); ++i) {
        out.inputs(i, at) = p.inputs(i, j);
      }
      if (has_targets) {
        for (int i = 0; i < p.targets.rows(); ++i) {
          out.targets(i, at) = p.targets(i, j);
        }
      }
    }
    out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
  }
  return out;
}

namespace {

double apply_nl(Nonlinearity nl, double z) {
  switch (nl) {
    case Nonlinearity::identity:
      return z;
    case Nonlinearity::tanh_fn:
      return std::tanh(z);
    case Nonlinearity::relu:
      return z > 0.0 ? z : 0.0;
  }
  return z;
}

double nl_derivative(Nonlinearity nl, double z) {
  switch (nl) {
    case Nonlinearity::identity:
      return 1.0;
    case Nonlinearity::tanh_fn: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case Nonlinearity::relu:
      return z > 0.0 ? 1.0 : 0.0;
  }
  return 1.0;
}

std::uint64_t params_fingerprint(const ModelParams& params) {
  std::uint64_t h = 0;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    h ^= fnv1a_bytes(params.weights[l].data()) + 0x9e3779b97f4a7c15ull +
         (h << 6) + (h >> 2);
    h ^= fnv1a_bytes(params.biases[l].data()) + 0x9e3779b97f4a7c15ull +
         (h << 6) + (h >> 2);
  }
  return h;
}

std::uint64_t batch_fingerprint(const Batch& batch) {
  std::uint64_t h = fnv1a_bytes(batch.inputs.data());
  h ^= fnv1a_bytes(batch.targets.data()) + (h << 1);
  for (int lbl : batch.labels) h = h * 1099511628211ull + std::uint64_t(lbl);
  return h;
}

Matrix layer_out(const LayerSpec& spec, const Matrix& w, const Vector& b,
                 const Matrix& x) {
  Matrix z = matmul(w, x);
  if (spec.has_bias) {
    for (int j = 0; j < z.cols(); ++j) {
      for (int i = 0; i < z.rows(); ++i) z(i, j) += b[i];
    }
  }
  return z;
}

}  // namespace

double forward(const ModelSpec& spec, const ModelParams& params,
               const Batch& batch, ForwardCache* cache) {
  if (batch.inputs.rows() != spec.input_dim()) {
    throw std::invalid_argument("forward: input dim mismatch");
  }
  if (cache != nullptr) {
    cache->activations.clear();
    cache->pre_activations.clear();
    cache->activations.push_back(batch.inputs);
  }
  Matrix x = batch.inputs;
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    Matrix z = layer_out(spec.layers[l], params.weights[l], params.biases[l],
                         x);
    Matrix a(z.rows(), z.cols());
    for (int j = 0; j < z.cols(); ++j) {
      for (int i = 0; i < z.rows(); ++i) {
        a(i, j) = apply_nl(spec.layers[l].nonlinearity, z(i, j));
      }
    }
    if (cache != nullptr) {
      cache->pre_activations.push_back(std::move(z));
      cache->activations.push_back(a);
    }
    x = std::move(a);
  }

  const int bsz = batch.size();
  double loss = 0.0;
  if (spec.loss == LossKind::mse) {
    if (batch.targets.rows() != x.rows() || batch.targets.cols() != bsz) {
      throw std::invalid_argument("forward: target shape mismatch");
    }
    for (int j = 0; j < bsz; ++j) {
      for (int i = 0; i < x.rows(); ++i) {
        const double d = x(i, j) - batch.targets(i, j);
        loss += d * d;
      }
    }
    loss /= static_cast<double>(bsz);
  } else {
    if (static_cast<int>(batch.labels.size()) != bsz) {
      throw std::invalid_argument("forward: labels missing");
    }
    for (int j = 0; j < bsz; ++j) {
      double zmax = x(0, j);
      for (int i = 1; i < x.rows(); ++i) zmax = std::max(zmax, x(i, j));
      double lse = 0.0;
      for (int i = 0; i < x.rows(); ++i) lse += std::exp(x(i, j) - zmax);
      loss += std::log(lse) + zmax - x(batch.labels[std::size_t(j)], j);
    }
    loss /= static_cast<double>(bsz);
  }

  if (cache != nullptr) {
    cache->params_fingerprint = params_fingerprint(params);
    cache->batch_fingerprint = batch_fingerprint(batch);
  }
  return loss;
}

Vector backward(const ModelSpec& spec, const ModelParams& params,
                const Batch& batch, const ForwardCache& cache) {
  if (cache.params_fingerprint != params_fingerprint(params) ||
      cache.batch_fingerprint != batch_fingerprint(batch)) {
    throw std::runtime_error("backward: stale forward cache");
  }
  const int bsz = batch.size();
  const int layer_count = static_cast<int>(spec.layers.size());
  const Matrix& out = cache.activations.back();

  // d(loss)/d(final activation)
  Matrix dx(out.rows(), out.cols());
  if (spec.loss == LossKind::mse) {
    for (int j = 0; j < bsz; ++j) {
      for (int i = 0; i < out.rows(); ++i) {
        dx(i, j) = 2.0 * (out(i, j) - batch.targets(i, j)) /
                   static_cast<double>(bsz);
      }
    }
  } else {
    for (int j = 0; j < bsz; ++j) {
      double zmax = out(0, j);
      for (int i = 1; i < out.rows(); ++i) zmax = std::max(zmax, out(i, j));
      double lse = 0.0;
      for (int i = 0; i < out.rows(); ++i) lse += std::exp(out(i, j) - zmax);
      for (int i = 0; i < out.rows(); ++i) {
        double p = std::exp(out(i, j) - zmax) / lse;
        if (i == batch.labels[std::size_t(j)]) p -= 1.0;
        dx(i, j) = p / static_cast<double>(bsz);
      }
    }
  }

  const ParamLayout layout = make_layout(spec);
  Vector grad(layout.total);
  for (int l = layer_count - 1; l >= 0; --l) {
    const Matrix& z = cache.pre_activations[std::size_t(l)];
    Matrix dz(z.rows(), z.cols());
    for (int j = 0; j < z.cols(); ++j) {
      for (int i = 0; i < z.rows(); ++i) {
        dz(i, j) = dx(i, j) * nl_derivative(spec.layers[std::size_t(l)].nonlinearity,
                                            z(i, j));
      }
    }
    const Matrix& xin = cache.activations[std::size_t(l)];
    Matrix dw = matmul(dz, transpose(xin));
    const auto& entry = layout.layers[std::size_t(l)];
    for (int idx = 0; idx < entry.rows * entry.cols; ++idx) {
      grad[entry.weight_offset + idx] = dw.data()[std::size_t(idx)];
    }
    if (entry.bias_offset >= 0) {
      for (int i = 0; i < entry.rows; ++i) {
        double s = 0.0;
        for (int j = 0; j < dz.cols(); ++j) s += dz(i, j);
        grad[entry.bias_offset + i] = s;
      }
    }
    if (l > 0) {
      dx = matmul(transpose(params.weights[std::size_t(l)]), dz);
    }
  }
  return grad;
}

Vector model_gradient(const ModelSpec& spec, const ModelParams& params,
                      const Batch& batch, double* loss_out) {
  ForwardCache cache;
  const double loss = forward(spec, params, batch, &cache);
  if (loss_out != nullptr) *loss_out = loss;
  return backward(spec, params, batch, cache);
}

Vector fd_gradient(const ModelSpec& spec, const ModelParams& params,
                   const Batch& batch, double h) {
  if (h <= 0.0) throw std::invalid_argument("fd_gradient: h must be positive");
  Vector theta = flatten(params);
  Vector grad(theta.dim());
  for (int i = 0; i < theta.dim(); ++i) {
    Vector plus = theta;
    plus[i] += h;
    Vector minus = theta;
    minus[i] -= h;
    const double lp = forward(spec, unflatten(spec, plus), batch);
    const double lm = forward(spec, unflatten(spec, minus), batch);
    grad[i] = (lp - lm) / (2.0 * h);
  }
  return grad;
}

SyntheticTask::SyntheticTask(TaskSpec spec, std::uint64_t seed)
    : spec_(std::move(spec)), seed_(seed) {
  int in = spec_.input_dim;
  for (int width : spec_.teacher_hidden) {
    teacher_spec_.layers.push_back(
        {in, width, Nonlinearity::tanh_fn, /*has_bias=*/false});
    in = width;
  }
  teacher_spec_.layers.push_back(
      {in, spec_.output_dim, Nonlinearity::identity, /*has_bias=*/false});
  teacher_spec_.loss = LossKind::mse;
  Rng rng(seed_, streams::kTeacherInit);
  teacher_ = init_params(teacher_spec_, rng);
}

Batch SyntheticTask::batch_from_rng(Rng& rng, int size) const {
  Batch b;
  b.inputs = Matrix(spec_.input_dim, size);
  for (double& x : b.inputs.data()) x = rng.next_gaussian();

  Matrix x = b.inputs;
  for (std::size_t l = 0; l < teacher_spec_.layers.size(); ++l) {
    Matrix z = matmul(teacher_.weights[l], x);
    for (int j = 0; j < z.cols(); ++j) {
      for (int i = 0; i < z.rows(); ++i) {
        z(i, j) = apply_nl(teacher_spec_.layers[l].nonlinearity, z(i, j));
      }
    }
    x = std::move(z);
  }

  if (spec_.kind == TaskKind::regression) {
    b.targets = x;
    if (spec_.noise > 0.0) {
      for (double& t : b.targets.data()) t += spec_.noise * rng.next_gaussian();
    }
  } else {
    Matrix logits = x;
    if (spec_.noise > 0.0) {
      for (double& t : logits.data()) t += spec_.noise * rng.next_gaussian();
    }
    b.labels.resize(static_cast<std::size_t>(size));
    for (int j = 0; j < size; ++j) {
      int arg = 0;
      for (int i = 1; i < logits.rows(); ++i) {
        if (logits(i, j) > logits(arg, j)) arg = i;
      }
      b.labels[std::size_t(j)] = arg;
    }
  }
  return b;
}

Batch SyntheticTask::batch(std::uint64_t index, std::uint64_t shard) const {
  Rng rng(seed_, streams::batch(index, shard));
  return batch_from_rng(rng, spec_.batch_size);
}

Batch SyntheticTask::eval_batch(int size) const {
  Rng rng(seed_, streams::kEvalBatch);
  return batch_from_rng(rng, size);
}

ModelSpec SyntheticTask::target_model(Nonlinearity hidden_nl, bool bias,
                                      LossKind loss,
                                      const std::vector<int>& hidden) const {
  ModelSpec spec;
  int in = spec_.input_dim;
  for (int width : hidden) {
    spec.layers.push_back({in, width, hidden_nl, bias});
    in = width;
  }
  spec.layers.push_back({in, spec_.output_dim, Nonlinearity::identity, bias});
  spec.loss = loss;
  return spec;
}

Nonlinearity nonlinearity_from_string(const std::string& s) {
  if (s == "identity") return Nonlinearity::identity;
  if (s == "tanh") return Nonlinearity::tanh_fn;
  if (s == "relu") return Nonlinearity::relu;
  throw std::invalid_argument("unknown nonlinearity: " + s);
}

std::string to_string(Nonlinearity nl) {
  switch (nl) {
    case Nonlinearity::identity:
      return "identity";
    case Nonlinearity::tanh_fn:
      return "tanh";
    case Nonlinearity::relu:
      return "relu";
  }
  return "identity";
}

}  // namespace dualtrain

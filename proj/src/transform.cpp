#include "dualtrain/transform.hpp"

#include <cmath>
#include <stdexcept>

#include "dualtrain/svd.hpp"

namespace dualtrain {

int GradientTransform::compressed_rows() const {
  switch (kind) {
    case TransformKind::identity:
      return layer_rows;
    case TransformKind::dense:
      return dense_s.rows();
    case TransformKind::kronecker:
      return left.rows();
    case TransformKind::left_only:
      return left.rows();
    case TransformKind::right_only:
      return layer_rows;
  }
  return 0;
}

int GradientTransform::compressed_cols() const {
  switch (kind) {
    case TransformKind::identity:
      return layer_cols;
    case TransformKind::dense:
      return 1;
    case TransformKind::kronecker:
      return right.cols();
    case TransformKind::left_only:
      return layer_cols;
    case TransformKind::right_only:
      return right.cols();
  }
  return 0;
}

Matrix apply(const GradientTransform& t, const Matrix& grad) {
  if (grad.rows() != t.layer_rows || grad.cols() != t.layer_cols) {
    throw std::invalid_argument("transform apply: gradient shape mismatch");
  }
  switch (t.kind) {
    case TransformKind::identity:
      return grad;
    case TransformKind::dense: {
      // S vec(G), held as an r x 1 column.
      const Matrix g_col = Matrix::from_column_major(
          static_cast<int>(grad.size()), 1,
          std::vector<double>(grad.data().begin(), grad.data().end()));
      return matmul(t.dense_s, g_col);
    }
    case TransformKind::kronecker:
      return matmul(matmul(t.left, grad), t.right);
    case TransformKind::left_only:
      return matmul(t.left, grad);
    case TransformKind::right_only:
      return matmul(grad, t.right);
  }
  throw std::logic_error("unreachable");
}

Matrix apply_transpose(const GradientTransform& t, const Matrix& compressed) {
  if (compressed.rows() != t.compressed_rows() ||
      compressed.cols() != t.compressed_cols()) {
    throw std::invalid_argument(
        "transform apply_transpose: compressed shape mismatch");
  }
  switch (t.kind) {
    case TransformKind::identity:
      return compressed;
    case TransformKind::dense: {
      const Matrix expanded = matmul(transpose(t.dense_s), compressed);
      return Matrix::from_column_major(
          t.layer_rows, t.layer_cols,
          std::vector<double>(expanded.data().begin(),
                              expanded.data().end()));
    }
    case TransformKind::kronecker:
      return matmul(matmul(transpose(t.left), compressed), transpose(t.right));
    case TransformKind::left_only:
      return matmul(transpose(t.left), compressed);
    case TransformKind::right_only:
      return matmul(compressed, transpose(t.right));
  }
  throw std::logic_error("unreachable");
}

GradientTransform make_identity(int m, int n) {
  GradientTransform t;
  t.kind = TransformKind::identity;
  t.layer_rows = m;
  t.layer_cols = n;
  t.provenance = Provenance::fixed;
  t.persisted = false;  // nothing to store
  return t;
}

namespace {

GradientTransform left_sketch(Rng& rng, int d, int m, int n,
                              Provenance provenance) {
  if (d < 1 || d > m) {
    throw std::invalid_argument("left sketch: rank out of range");
  }
  GradientTransform t;
  t.kind = TransformKind::left_only;
  t.layer_rows = m;
  t.layer_cols = n;
  t.provenance = provenance;
  t.seed = rng.seed();
  t.stream = rng.stream();
  const double k = 1.0 / std::sqrt(static_cast<double>(m));
  switch (provenance) {
    case Provenance::gaussian:
      t.left = gaussian_matrix(rng, d, m, k);
      t.persisted = false;
      break;
    case Provenance::rademacher: {
      t.left = Matrix(d, m);
      for (double& x : t.left.data()) {
        x = (rng.next_u64() & 1ull) ? k : -k;
      }
      t.persisted = false;
      break;
    }
    case Provenance::semi_orthogonal: {
      Matrix q = random_orthogonal(rng, m);
      t.left = Matrix(d, m);
      for (int i = 0; i < d; ++i) {
        for (int j = 0; j < m; ++j) t.left(i, j) = q(i, j);
      }
      t.persisted = true;
      break;
    }
    default:
      throw std::logic_error("left_sketch: unsupported provenance");
  }
  return t;
}

}  // namespace

GradientTransform make_gaussian(Rng& rng, int d, int m, int n) {
  return left_sketch(rng, d, m, n, Provenance::gaussian);
}

GradientTransform make_rademacher(Rng& rng, int d, int m, int n) {
  return left_sketch(rng, d, m, n, Provenance::rademacher);
}

GradientTransform make_semi_orthogonal(Rng& rng, int d, int m, int n) {
  return left_sketch(rng, d, m, n, Provenance::semi_orthogonal);
}

GradientTransform make_svd_projector(const Matrix& grad, int d) {
  const int m = grad.rows();
  const int n = grad.cols();
  if (d < 1 || d > std::min(m, n)) {
    throw std::invalid_argument("make_svd_projector: d out of range");
  }
  GradientTransform t;
  t.layer_rows = m;
  t.layer_cols = n;
  t.provenance = Provenance::svd;
  t.persisted = true;
  if (m <= n) {
    t.kind = TransformKind::left_only;
    t.left = svd_top_rows(grad, d);  // d x m
  } else {
    t.kind = TransformKind::right_only;
    // Top right singular vectors of grad = top left singular vectors of
    // grad^T, kept as columns: P is n x d.
    t.right = transpose(svd_top_rows(transpose(grad), d));
  }
  return t;
}

GradientTransform make_two_sided_gaussian(Rng& rng, int dl, int dr, int m,
                                          int n) {
  if (dl < 1 || dl > m || dr < 1 || dr > n) {
    throw std::invalid_argument("make_two_sided_gaussian: rank out of range");
  }
  GradientTransform t;
  t.kind = TransformKind::kronecker;
  t.layer_rows = m;
  t.layer_cols = n;
  t.provenance = Provenance::gaussian;
  t.seed = rng.seed();
  t.stream = rng.stream();
  t.persisted = false;
  t.left = gaussian_matrix(rng, dl, m, 1.0 / std::sqrt(double(dl)));
  t.right = gaussian_matrix(rng, n, dr, 1.0 / std::sqrt(double(dr)));
  return t;
}

GradientTransform make_two_sided_svd(const Matrix& grad, int dl, int dr) {
  const int m = grad.rows();
  const int n = grad.cols();
  if (dl < 1 || dl > std::min(m, n) || dr < 1 || dr > std::min(m, n)) {
    throw std::invalid_argument("make_two_sided_svd: rank out of range");
  }
  GradientTransform t;
  t.kind = TransformKind::kronecker;
  t.layer_rows = m;
  t.layer_cols = n;
  t.provenance = Provenance::svd;
  t.persisted = true;
  const Svd f = svd(grad);
  t.left = Matrix(dl, m);
  for (int i = 0; i < dl; ++i) {
    for (int j = 0; j < m; ++j) t.left(i, j) = f.u(j, i);
  }
  t.right = Matrix(n, dr);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < dr; ++j) t.right(i, j) = f.v(i, j);
  }
  return t;
}

GradientTransform make_dense_gaussian(Rng& rng, int r, int m, int n) {
  const std::int64_t d = static_cast<std::int64_t>(m) * n;
  if (r < 1 || r > d) {
    throw std::invalid_argument("make_dense_gaussian: r out of range");
  }
  GradientTransform t;
  t.kind = TransformKind::dense;
  t.layer_rows = m;
  t.layer_cols = n;
  t.provenance = Provenance::gaussian;
  t.seed = rng.seed();
  t.stream = rng.stream();
  t.persisted = false;
  t.dense_s =
      gaussian_matrix(rng, r, static_cast<int>(d), 1.0 / std::sqrt(double(d)));
  return t;
}

namespace {

// A right-only sketch is sampled as a left sketch on the transposed layer,
// then transposed; rebuilding must replay the same draws.
GradientTransform to_right_only(GradientTransform left_form, int m, int n) {
  GradientTransform r;
  r.kind = TransformKind::right_only;
  r.layer_rows = m;
  r.layer_cols = n;
  r.right = transpose(left_form.left);
  r.provenance = left_form.provenance;
  r.seed = left_form.seed;
  r.stream = left_form.stream;
  r.persisted = left_form.persisted;
  return r;
}

}  // namespace

GradientTransform rematerialize(const GradientTransform& descriptor) {
  if (descriptor.provenance == Provenance::svd ||
      descriptor.provenance == Provenance::fixed) {
    // Not seed-derived; the matrix itself is authoritative.
    return descriptor;
  }
  Rng rng(descriptor.seed, descriptor.stream);
  const int m = descriptor.layer_rows;
  const int n = descriptor.layer_cols;
  const bool right_side = descriptor.kind == TransformKind::right_only;
  const int sketch_d =
      right_side ? descriptor.right.cols() : descriptor.left.rows();

  switch (descriptor.provenance) {
    case Provenance::gaussian:
      if (descriptor.kind == TransformKind::kronecker) {
        return make_two_sided_gaussian(rng, descriptor.left.rows(),
                                       descriptor.right.cols(), m, n);
      }
      if (descriptor.kind == TransformKind::dense) {
        return make_dense_gaussian(rng, descriptor.dense_s.rows(), m, n);
      }
      if (right_side) {
        return to_right_only(make_gaussian(rng, sketch_d, n, m), m, n);
      }
      return make_gaussian(rng, sketch_d, m, n);
    case Provenance::rademacher:
      if (right_side) {
        return to_right_only(make_rademacher(rng, sketch_d, n, m), m, n);
      }
      return make_rademacher(rng, sketch_d, m, n);
    case Provenance::semi_orthogonal:
      if (right_side) {
        return to_right_only(make_semi_orthogonal(rng, sketch_d, n, m), m, n);
      }
      return make_semi_orthogonal(rng, sketch_d, m, n);
    default:
      break;
  }
  throw std::invalid_argument("rematerialize: unsupported descriptor");
}

int two_sided_rank_for(int one_sided_rank, int m, int n) {
  const double budget =
      static_cast<double>(one_sided_rank) * std::min(m, n);
  int r2 = static_cast<int>(std::floor(std::sqrt(budget)));
  r2 = std::max(1, std::min({r2, m, n}));
  return r2;
}

TransformFamily family_from_string(const std::string& s) {
  if (s == "identity") return TransformFamily::identity;
  if (s == "dense_gaussian") return TransformFamily::dense_gaussian;
  if (s == "kronecker_gaussian") return TransformFamily::kronecker_gaussian;
  if (s == "one_sided_gaussian") return TransformFamily::one_sided_gaussian;
  if (s == "one_sided_rademacher") return TransformFamily::one_sided_rademacher;
  if (s == "one_sided_semi_orthogonal") {
    return TransformFamily::one_sided_semi_orthogonal;
  }
  if (s == "one_sided_svd") return TransformFamily::one_sided_svd;
  if (s == "two_sided_gaussian") return TransformFamily::two_sided_gaussian;
  if (s == "two_sided_svd") return TransformFamily::two_sided_svd;
  throw std::invalid_argument("unknown transform family: " + s);
}

std::string to_string(TransformFamily family) {
  switch (family) {
    case TransformFamily::identity:
      return "identity";
    case TransformFamily::dense_gaussian:
      return "dense_gaussian";
    case TransformFamily::kronecker_gaussian:
      return "kronecker_gaussian";
    case TransformFamily::one_sided_gaussian:
      return "one_sided_gaussian";
    case TransformFamily::one_sided_rademacher:
      return "one_sided_rademacher";
    case TransformFamily::one_sided_semi_orthogonal:
      return "one_sided_semi_orthogonal";
    case TransformFamily::one_sided_svd:
      return "one_sided_svd";
    case TransformFamily::two_sided_gaussian:
      return "two_sided_gaussian";
    case TransformFamily::two_sided_svd:
      return "two_sided_svd";
  }
  return "identity";
}

bool family_needs_gradient(TransformFamily family) {
  return family == TransformFamily::one_sided_svd ||
         family == TransformFamily::two_sided_svd;
}

int TransformAssignment::compressed_dim(const ModelSpec& spec) const {
  int total = 0;
  for (std::size_t l = 0; l < per_layer.size(); ++l) {
    total += per_layer[l].compressed_dim();
    if (spec.layers[l].has_bias) total += spec.layers[l].out_dim;
  }
  return total;
}

namespace {

// Side rule for one-sided families: compress the shorter dimension (left
// when m <= n, right otherwise). Right-side sketches are built as the
// transpose of a left sketch on the transposed layer so the normalization
// convention carries over.
GradientTransform one_sided(TransformFamily family, Rng& rng, int rank, int m,
                            int n, const Matrix* grad) {
  const int d = std::min({rank, m, n});
  if (family == TransformFamily::one_sided_svd) {
    if (grad == nullptr) {
      throw std::invalid_argument("svd family requires a gradient matrix");
    }
    return make_svd_projector(*grad, d);
  }
  const bool left_side = m <= n;
  const int sketch_m = left_side ? m : n;
  GradientTransform t;
  switch (family) {
    case TransformFamily::one_sided_gaussian:
      t = make_gaussian(rng, d, sketch_m, left_side ? n : m);
      break;
    case TransformFamily::one_sided_rademacher:
      t = make_rademacher(rng, d, sketch_m, left_side ? n : m);
      break;
    case TransformFamily::one_sided_semi_orthogonal:
      t = make_semi_orthogonal(rng, d, sketch_m, left_side ? n : m);
      break;
    default:
      throw std::logic_error("one_sided: not a one-sided family");
  }
  if (!left_side) {
    return to_right_only(std::move(t), m, n);
  }
  return t;
}

}  // namespace

TransformAssignment make_assignment(TransformFamily family, int rank,
                                    const ModelSpec& spec, std::uint64_t seed,
                                    std::uint64_t window,
                                    const std::vector<Matrix>* grads) {
  if (family_needs_gradient(family) &&
      (grads == nullptr || grads->size() != spec.layers.size())) {
    throw std::invalid_argument(
        "make_assignment: svd families need per-layer gradients");
  }
  TransformAssignment assignment;
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    const int m = spec.layers[l].out_dim;
    const int n = spec.layers[l].in_dim;
    Rng rng(seed, streams::transform(window, l));
    const Matrix* grad = grads != nullptr ? &(*grads)[l] : nullptr;
    switch (family) {
      case TransformFamily::identity:
        assignment.per_layer.push_back(make_identity(m, n));
        break;
      case TransformFamily::dense_gaussian: {
        const std::int64_t full = static_cast<std::int64_t>(m) * n;
        const int r = static_cast<int>(
            std::min<std::int64_t>(full, std::int64_t(rank) * std::max(m, n)));
        assignment.per_layer.push_back(make_dense_gaussian(rng, r, m, n));
        break;
      }
      case TransformFamily::kronecker_gaussian: {
        const int dl = std::min(rank, m);
        const int dr = std::min(rank, n);
        assignment.per_layer.push_back(
            make_two_sided_gaussian(rng, dl, dr, m, n));
        break;
      }
      case TransformFamily::one_sided_gaussian:
      case TransformFamily::one_sided_rademacher:
      case TransformFamily::one_sided_semi_orthogonal:
      case TransformFamily::one_sided_svd:
        assignment.per_layer.push_back(
            one_sided(family, rng, rank, m, n, grad));
        break;
      case TransformFamily::two_sided_gaussian: {
        const int r2 = two_sided_rank_for(std::min({rank, m, n}), m, n);
        assignment.per_layer.push_back(
            make_two_sided_gaussian(rng, r2, r2, m, n));
        break;
      }
      case TransformFamily::two_sided_svd: {
        const int r2 = two_sided_rank_for(std::min({rank, m, n}), m, n);
        assignment.per_layer.push_back(make_two_sided_svd(*grad, r2, r2));
        break;
      }
    }
  }
  return assignment;
}

}  // namespace dualtrain

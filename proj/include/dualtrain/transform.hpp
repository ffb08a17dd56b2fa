#ifndef DUALTRAIN_TRANSFORM_HPP
#define DUALTRAIN_TRANSFORM_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "dualtrain/matrix.hpp"
#include "dualtrain/model.hpp"
#include "dualtrain/rng.hpp"

namespace dualtrain {

enum class TransformKind { identity, dense, kronecker, left_only, right_only };

enum class Provenance { svd, gaussian, rademacher, semi_orthogonal, fixed };

// A linear map from a layer's m x n gradient space to a compressed space,
// together with enough metadata to rematerialize seeded variants bit-exactly.
//
//   dense:      C = unvec(S vec(G)),  S is r x (m n)
//   kronecker:  C = L G R,            L is dl x m, R is n x dr
//   left_only:  C = P G,              P is d x m
//   right_only: C = G P,              P is n x d
//
// `persisted` reports whether the matrix has to be stored across steps or can
// be regenerated from (seed, stream); it feeds the memory estimator and the
// checkpoint writer, not the math.
struct GradientTransform {
  TransformKind kind = TransformKind::identity;
  int layer_rows = 0;  // m
  int layer_cols = 0;  // n

  Matrix dense_s;  // dense
  Matrix left;     // kronecker L, or the left_only P
  Matrix right;    // kronecker R, or the right_only P

  Provenance provenance = Provenance::fixed;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  bool persisted = true;

  // Shape of the compressed object this transform produces.
  int compressed_rows() const;
  int compressed_cols() const;
  int compressed_dim() const {
    return compressed_rows() * compressed_cols();
  }
};

Matrix apply(const GradientTransform& t, const Matrix& grad);
Matrix apply_transpose(const GradientTransform& t, const Matrix& compressed);

GradientTransform make_identity(int m, int n);

// Left sketches, P in R^{d x m}. Scale k = 1/sqrt(m) makes E[P P^T] = I_d.
GradientTransform make_gaussian(Rng& rng, int d, int m, int n);
GradientTransform make_rademacher(Rng& rng, int d, int m, int n);

// First d rows of a random m x m orthogonal matrix: P P^T = I_d exactly.
// Flagged persisted even though it rematerializes from seed here, matching
// the accounting convention for this family.
GradientTransform make_semi_orthogonal(Rng& rng, int d, int m, int n);

// Projector onto the top-d singular directions of `grad`; applies from the
// left when m <= n and from the right otherwise.
GradientTransform make_svd_projector(const Matrix& grad, int d);

// Kronecker-factored maps. Gaussian: L, R iid normal with E[L^T L] = I_m and
// E[R R^T] = I_n (k = 1/sqrt(dl), 1/sqrt(dr)). SVD: top singular subspaces of
// `grad` on both sides.
GradientTransform make_two_sided_gaussian(Rng& rng, int dl, int dr, int m,
                                          int n);
GradientTransform make_two_sided_svd(const Matrix& grad, int dl, int dr);

// Dense Gaussian S of size r x (m n) with k = 1/sqrt(m n).
GradientTransform make_dense_gaussian(Rng& rng, int r, int m, int n);

// Rebuild a seeded transform from its recorded (seed, stream, shape); the
// result is bit-identical to the original sample.
GradientTransform rematerialize(const GradientTransform& descriptor);

// Two-sided rank giving at most the one-sided method's trainable count:
// the largest r2 with r2^2 <= one_sided_rank * min(m, n).
int two_sided_rank_for(int one_sided_rank, int m, int n);

// Families a per-layer assignment can be built from. One-sided families
// follow the left/right side rule; `dense` compresses vec(W) directly.
enum class TransformFamily {
  identity,
  dense_gaussian,
  kronecker_gaussian,
  one_sided_gaussian,
  one_sided_rademacher,
  one_sided_semi_orthogonal,
  one_sided_svd,
  two_sided_gaussian,
  two_sided_svd,
};

TransformFamily family_from_string(const std::string& s);
std::string to_string(TransformFamily family);
bool family_needs_gradient(TransformFamily family);

// Block-diagonal assignment: one transform per layer weight matrix. Biases
// are never transformed; they ride along as identity blocks of the overall
// map.
struct TransformAssignment {
  std::vector<GradientTransform> per_layer;

  // Adapter-space layout: per layer vec(A) then the bias block.
  int compressed_dim(const ModelSpec& spec) const;
};

// Builds the per-layer transforms for a merge window. `window` salts the
// rng streams; `grads` supplies per-layer gradient matrices and is required
// by the SVD families.
TransformAssignment make_assignment(TransformFamily family, int rank,
                                    const ModelSpec& spec, std::uint64_t seed,
                                    std::uint64_t window,
                                    const std::vector<Matrix>* grads = nullptr);

}  // namespace dualtrain

#endif

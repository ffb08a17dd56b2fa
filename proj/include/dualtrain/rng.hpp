#ifndef DUALTRAIN_RNG_HPP
#define DUALTRAIN_RNG_HPP

#include <cstdint>

namespace dualtrain {

// Counter-based deterministic generator. Output is a pure function of
// (seed, stream, draw index), so any sampled object can be rematerialized
// later from its (seed, stream) pair alone. No hidden global state.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();

  // Uniform in [0, 1), 53 mantissa bits.
  double next_uniform();

  // Standard normal via the polar method; one spare value is cached, so
  // draws are sequential but still a function of (seed, stream, index).
  double next_gaussian();

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Stream-id conventions used across the workbench so that independent
// consumers of one master seed never collide.
namespace streams {
inline constexpr std::uint64_t kModelInit = 0;
inline constexpr std::uint64_t kTeacherInit = 1;
inline constexpr std::uint64_t kBatchBase = 1ull << 32;
inline constexpr std::uint64_t kTransformBase = 2ull << 32;
inline constexpr std::uint64_t kEvalBatch = 3ull << 32;
inline constexpr std::uint64_t kDistBase = 4ull << 32;
inline constexpr std::uint64_t kWorkerShardStride = 1ull << 24;

inline std::uint64_t batch(std::uint64_t index, std::uint64_t shard = 0) {
  return kBatchBase + shard * kWorkerShardStride + index;
}
// One stream per (merge window, layer) pair; layers per model stay < 4096.
inline std::uint64_t transform(std::uint64_t window, std::uint64_t layer) {
  return kTransformBase + window * 4096 + layer;
}
inline std::uint64_t dist_projector(std::uint64_t round, std::uint64_t layer) {
  return kDistBase + round * 4096 + layer;
}
}  // namespace streams

}  // namespace dualtrain

#endif

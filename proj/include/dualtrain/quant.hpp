#ifndef DUALTRAIN_QUANT_HPP
#define DUALTRAIN_QUANT_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dualtrain/matrix.hpp"

namespace dualtrain {

enum class QuantFormat { none, int8, nf4 };

QuantFormat quant_format_from_string(const std::string& s);
std::string to_string(QuantFormat format);

// Blockwise absmax quantization of a dense matrix, flattened column-major
// into groups of `group_size` (the trailing group may be short).
//
//   int8: symmetric, scale = absmax/127, codes in [-127, 127].
//   nf4:  codes index a 16-entry normal-quantile codebook on [-1, 1];
//         scale = group absmax; codes are packed two per byte on disk,
//         low nibble first.
//
// An all-zero group stores scale 0 and zero codes and round-trips exactly.
struct QuantizedTensor {
  QuantFormat format = QuantFormat::int8;
  int rows = 0;
  int cols = 0;
  int group_size = 256;
  std::vector<double> scales;     // one per group
  std::vector<std::int8_t> codes; // int8: signed codes; nf4: indices 0..15

  std::int64_t numel() const {
    return static_cast<std::int64_t>(rows) * cols;
  }
  std::int64_t group_count() const {
    return (numel() + group_size - 1) / group_size;
  }
};

QuantizedTensor quantize_int8(const Matrix& m, int group_size = 256);
QuantizedTensor quantize_nf4(const Matrix& m, int group_size = 256);
Matrix dequantize(const QuantizedTensor& q);

// The 16 NF4 levels: standard-normal quantiles at evenly spaced probability
// positions on each side of zero (8 negative-side, 9 positive-side, shared
// zero), rescaled so the endpoints are exactly -1 and +1. Built at runtime
// from the inverse normal CDF rather than pasted constants.
const std::array<double, 16>& nf4_codebook();

// Largest gap between adjacent codebook levels; the per-element nf4
// round-trip error is at most absmax * gap / 2.
double nf4_max_gap();

// Inverse standard normal CDF: rational approximation refined by one Halley
// step against erfc. Near full double precision away from the extreme tails;
// the codebook only evaluates it on [1/32, 31/32].
double inverse_normal_cdf(double p);

// Serialized blob layout (little-endian):
//   u32 format (1 = int8, 2 = nf4), u32 group_size, u32 rows, u32 cols,
//   f64 scales[group_count],
//   int8 codes[numel]            (int8)
//   u8 packed[ceil(numel / 2)]   (nf4, low nibble first)
std::vector<std::uint8_t> serialize(const QuantizedTensor& q);
QuantizedTensor deserialize_quantized(const std::vector<std::uint8_t>& bytes);

}  // namespace dualtrain

#endif

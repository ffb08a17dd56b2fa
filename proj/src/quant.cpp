#include "dualtrain/quant.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace dualtrain {

QuantFormat quant_format_from_string(const std::string& s) {
  if (s == "none") return QuantFormat::none;
  if (s == "int8") return QuantFormat::int8;
  if (s == "nf4") return QuantFormat::nf4;
  throw std::invalid_argument("unknown quant format: " + s);
}

std::string to_string(QuantFormat format) {
  switch (format) {
    case QuantFormat::none:
      return "none";
    case QuantFormat::int8:
      return "int8";
    case QuantFormat::nf4:
      return "nf4";
  }
  return "none";
}

double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("inverse_normal_cdf: p outside (0, 1)");
  }
  // Acklam-style rational approximation, then one Halley refinement using
  // the erfc-based CDF. Accuracy after refinement is ~1e-15 relative.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
          c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley step: e = Phi(x) - p, Phi(x) = erfc(-x/sqrt(2)) / 2.
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
  x = x - u / (1.0 + x * u / 2.0);
  return x;
}

const std::array<double, 16>& nf4_codebook() {
  static const std::array<double, 16> table = [] {
    // 8 negative-side quantiles from delta to 1/2 and 9 positive-side from
    // 1/2 to 1-delta, evenly spaced in probability; the shared median gives
    // an exact zero. Dividing by the (symmetric) extreme quantile puts the
    // endpoints at exactly -1 and +1.
    constexpr double delta = 1.0 / 32.0;
    std::array<double, 16> cb{};
    int at = 0;
    for (int i = 0; i < 8; ++i) {
      const double p = delta + (0.5 - delta) * i / 7.0;
      cb[std::size_t(at++)] = inverse_normal_cdf(p);
    }
    for (int i = 1; i < 9; ++i) {
      const double p = 0.5 + (0.5 - delta) * i / 8.0;
      cb[std::size_t(at++)] = inverse_normal_cdf(p);
    }
    cb[7] = 0.0;  // the median, exactly
    const double extreme = std::max(std::fabs(cb[0]), std::fabs(cb[15]));
    for (double& v : cb) v /= extreme;
    cb[0] = -1.0;
    cb[15] = 1.0;
    return cb;
  }();
  return table;
}

double nf4_max_gap() {
  const auto& cb = nf4_codebook();
  double gap = 0.0;
  for (std::size_t i = 1; i < cb.size(); ++i) {
    gap = std::max(gap, cb[i] - cb[i - 1]);
  }
  return gap;
}

namespace {

double group_absmax(std::span<const double> xs, std::int64_t begin,
                    std::int64_t end) {
  double m = 0.0;
  for (std::int64_t i = begin; i < end; ++i) {
    m = std::max(m, std::fabs(xs[std::size_t(i)]));
  }
  return m;
}

}  // namespace

QuantizedTensor quantize_int8(const Matrix& m, int group_size) {
  if (group_size < 1) throw std::invalid_argument("quantize: group_size < 1");
  QuantizedTensor q;
  q.format = QuantFormat::int8;
  q.rows = m.rows();
  q.cols = m.cols();
  q.group_size = group_size;
  const std::int64_t n = q.numel();
  q.codes.resize(static_cast<std::size_t>(n), 0);
  const auto xs = m.data();
  for (std::int64_t g = 0; g < q.group_count(); ++g) {
    const std::int64_t begin = g * group_size;
    const std::int64_t end = std::min(n, begin + group_size);
    const double absmax = group_absmax(xs, begin, end);
    if (absmax == 0.0) {
      q.scales.push_back(0.0);
      continue;
    }
    const double scale = absmax / 127.0;
    q.scales.push_back(scale);
    for (std::int64_t i = begin; i < end; ++i) {
      // round half away from zero, then clamp
      double r = std::round(xs[std::size_t(i)] / scale);
      r = std::clamp(r, -127.0, 127.0);
      q.codes[std::size_t(i)] = static_cast<std::int8_t>(r);
    }
  }
  return q;
}

QuantizedTensor quantize_nf4(const Matrix& m, int group_size) {
  if (group_size < 1) throw std::invalid_argument("quantize: group_size < 1");
  const auto& cb = nf4_codebook();
  QuantizedTensor q;
  q.format = QuantFormat::nf4;
  q.rows = m.rows();
  q.cols = m.cols();
  q.group_size = group_size;
  const std::int64_t n = q.numel();
  q.codes.resize(static_cast<std::size_t>(n), 0);
  const auto xs = m.data();
  for (std::int64_t g = 0; g < q.group_count(); ++g) {
    const std::int64_t begin = g * group_size;
    const std::int64_t end = std::min(n, begin + group_size);
    const double absmax = group_absmax(xs, begin, end);
    if (absmax == 0.0) {
      q.scales.push_back(0.0);
      // code 7 is the exact zero level
      for (std::int64_t i = begin; i < end; ++i) q.codes[std::size_t(i)] = 7;
      continue;
    }
    q.scales.push_back(absmax);
    for (std::int64_t i = begin; i < end; ++i) {
      const double v = xs[std::size_t(i)] / absmax;
      int best = 0;
      double best_dist = std::fabs(v - cb[0]);
      for (int k = 1; k < 16; ++k) {
        const double dist = std::fabs(v - cb[std::size_t(k)]);
        if (dist < best_dist) {
          best_dist = dist;
          best = k;
        }
      }
      q.codes[std::size_t(i)] = static_cast<std::int8_t>(best);
    }
  }
  return q;
}

Matrix dequantize(const QuantizedTensor& q) {
  Matrix m(q.rows, q.cols);
  auto out = m.data();
  const std::int64_t n = q.numel();
  if (q.format == QuantFormat::int8) {
    for (std::int64_t i = 0; i < n; ++i) {
      const int code = q.codes[std::size_t(i)];
      if (code < -127 || code > 127) {
        throw std::runtime_error("dequantize: int8 code out of range");
      }
      const double scale = q.scales[std::size_t(i / q.group_size)];
      out[std::size_t(i)] = static_cast<double>(code) * scale;
    }
  } else if (q.format == QuantFormat::nf4) {
    const auto& cb = nf4_codebook();
    for (std::int64_t i = 0; i < n; ++i) {
      const int code = q.codes[std::size_t(i)];
      if (code < 0 || code > 15) {
        throw std::runtime_error("dequantize: nf4 code out of range");
      }
      const double absmax = q.scales[std::size_t(i / q.group_size)];
      out[std::size_t(i)] = cb[std::size_t(code)] * absmax;
    }
  } else {
    throw std::runtime_error("dequantize: tensor has no quantized payload");
  }
  return m;
}

namespace {

template <typename T>
void push_le(std::vector<std::uint8_t>& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  out.insert(out.end(), bytes, bytes + sizeof(T));
}

template <typename T>
T read_le(const std::vector<std::uint8_t>& in, std::size_t& at) {
  if (at + sizeof(T) > in.size()) {
    throw std::runtime_error("deserialize_quantized: truncated blob");
  }
  T value;
  std::memcpy(&value, in.data() + at, sizeof(T));
  at += sizeof(T);
  return value;
}

}  // namespace

std::vector<std::uint8_t> serialize(const QuantizedTensor& q) {
  std::vector<std::uint8_t> out;
  push_le<std::uint32_t>(out, q.format == QuantFormat::int8 ? 1u : 2u);
  push_le<std::uint32_t>(out, static_cast<std::uint32_t>(q.group_size));
  push_le<std::uint32_t>(out, static_cast<std::uint32_t>(q.rows));
  push_le<std::uint32_t>(out, static_cast<std::uint32_t>(q.cols));
  for (double s : q.scales) push_le<double>(out, s);
  const std::int64_t n = q.numel();
  if (q.format == QuantFormat::int8) {
    for (std::int64_t i = 0; i < n; ++i) {
      push_le<std::int8_t>(out, q.codes[std::size_t(i)]);
    }
  } else {
    for (std::int64_t i = 0; i < n; i += 2) {
      const std::uint8_t lo = static_cast<std::uint8_t>(q.codes[std::size_t(i)]) & 0x0f;
      const std::uint8_t hi =
          (i + 1 < n)
              ? (static_cast<std::uint8_t>(q.codes[std::size_t(i + 1)]) & 0x0f)
              : 0;
      push_le<std::uint8_t>(out, static_cast<std::uint8_t>(lo | (hi << 4)));
    }
  }
  return out;
}

QuantizedTensor deserialize_quantized(const std::vector<std::uint8_t>& bytes) {
  std::size_t at = 0;
  QuantizedTensor q;
  const std::uint32_t fmt = read_le<std::uint32_t>(bytes, at);
  if (fmt == 1u) {
    q.format = QuantFormat::int8;
  } else if (fmt == 2u) {
    q.format = QuantFormat::nf4;
  } else {
    throw std::runtime_error("deserialize_quantized: bad format tag");
  }
  q.group_size = static_cast<int>(read_le<std::uint32_t>(bytes, at));
  q.rows = static_cast<int>(read_le<std::uint32_t>(bytes, at));
  q.cols = static_cast<int>(read_le<std::uint32_t>(bytes, at));
  if (q.group_size < 1 || q.rows < 0 || q.cols < 0) {
    throw std::runtime_error("deserialize_quantized: bad header");
  }
  const std::int64_t groups = q.group_count();
  q.scales.reserve(static_cast<std::size_t>(groups));
  for (std::int64_t g = 0; g < groups; ++g) {
    q.scales.push_back(read_le<double>(bytes, at));
  }
  const std::int64_t n = q.numel();
  q.codes.resize(static_cast<std::size_t>(n));
  if (q.format == QuantFormat::int8) {
    for (std::int64_t i = 0; i < n; ++i) {
      q.codes[std::size_t(i)] = read_le<std::int8_t>(bytes, at);
    }
  } else {
    for (std::int64_t i = 0; i < n; i += 2) {
      const std::uint8_t packed = read_le<std::uint8_t>(bytes, at);
      q.codes[std::size_t(i)] = static_cast<std::int8_t>(packed & 0x0f);
      if (i + 1 < n) {
        q.codes[std::size_t(i + 1)] = static_cast<std::int8_t>(packed >> 4);
      }
    }
  }
  if (at != bytes.size()) {
    throw std::runtime_error("deserialize_quantized: trailing bytes");
  }
  return q;
}

}  // namespace dualtrain

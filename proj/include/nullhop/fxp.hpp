// Fixed-point value types and the MAC arithmetic contract.
//
// Activations and weights are 16-bit signed integers interpreted against a
// per-layer binary point (QFormat). Products accumulate in a 32-bit
// saturating accumulator whose binary point is the sum of the operands'.

#pragma once

#include <cstdint>
#include <limits>

namespace nullhop {

class QFormat {
 public:
  static constexpr int kMaxFracBits = 15;

  constexpr QFormat() = default;
  explicit QFormat(int frac_bits);

  constexpr int frac_bits() const { return frac_bits_; }
  friend constexpr bool operator==(QFormat, QFormat) = default;

 private:
  int frac_bits_ = 0;
};

struct Fx16 {
  std::int16_t raw = 0;
  friend constexpr bool operator==(Fx16, Fx16) = default;
};

struct Fx32 {
  std::int32_t raw = 0;
  friend constexpr bool operator==(Fx32, Fx32) = default;
};

constexpr std::int16_t kInt16Min = std::numeric_limits<std::int16_t>::min();
constexpr std::int16_t kInt16Max = std::numeric_limits<std::int16_t>::max();
constexpr std::int32_t kInt32Min = std::numeric_limits<std::int32_t>::min();
constexpr std::int32_t kInt32Max = std::numeric_limits<std::int32_t>::max();

constexpr std::int16_t saturate16(std::int64_t v) {
  if (v > kInt16Max) return kInt16Max;
  if (v < kInt16Min) return kInt16Min;
  return static_cast<std::int16_t>(v);
}

constexpr std::int32_t saturate32(std::int64_t v) {
  if (v > kInt32Max) return kInt32Max;
  if (v < kInt32Min) return kInt32Min;
  return static_cast<std::int32_t>(v);
}

/// Round-to-nearest-even of x * 2^frac, saturated to 16 bits.
/// Throws std::invalid_argument when x is not finite.
Fx16 quantize(double x, QFormat q);

/// Real value represented by `v` under `q`.
double to_double(Fx16 v, QFormat q);

/// acc + a*b with saturation at the 32-bit bounds.
constexpr Fx32 mac(Fx32 acc, Fx16 a, Fx16 b) {
  const std::int64_t prod = std::int64_t{a.raw} * std::int64_t{b.raw};
  return Fx32{saturate32(std::int64_t{acc.raw} + prod)};
}

/// Saturating 32-bit add, used by the partial-sum reduction tree.
constexpr Fx32 add_sat(Fx32 a, Fx32 b) {
  return Fx32{saturate32(std::int64_t{a.raw} + std::int64_t{b.raw})};
}

/// Arithmetic right shift by `shift` bits with round-half-to-even.
std::int64_t shift_right_rne(std::int64_t v, int shift);

/// Moves an accumulator from `in_frac` fractional bits to `out_q`, rounding
/// half-to-even on right shifts and saturating to 16 bits.
Fx16 requantize(Fx32 acc, int in_frac, QFormat out_q);

constexpr Fx16 relu16(Fx16 x) { return Fx16{x.raw < 0 ? std::int16_t{0} : x.raw}; }

}  // namespace nullhop

#include "nullhop/fxp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace nullhop {

QFormat::QFormat(int frac_bits) : frac_bits_(frac_bits) {
  if (frac_bits < 0 || frac_bits > kMaxFracBits) {
    throw std::invalid_argument("frac_bits out of range [0, 15]: " + std::to_string(frac_bits));
  }
}

Fx16 quantize(double x, QFormat q) {
  if (!std::isfinite(x)) throw std::invalid_argument("quantize: non-finite source value");
  const double scaled = std::ldexp(x, q.frac_bits());
  // Clamp before rounding so the conversion to an integer is always defined.
  if (scaled >= kInt16Max) return Fx16{kInt16Max};
  if (scaled <= kInt16Min) return Fx16{kInt16Min};
  // nearbyint honours the default FE_TONEAREST mode (ties to even).
  return Fx16{static_cast<std::int16_t>(std::nearbyint(scaled))};
}

double to_double(Fx16 v, QFormat q) { return std::ldexp(static_cast<double>(v.raw), -q.frac_bits()); }

std::int64_t shift_right_rne(std::int64_t v, int shift) {
  if (shift <= 0) return v;
  if (shift >= 62) return 0;
  const std::int64_t floor_q = v >> shift;  // arithmetic shift floors
  const std::int64_t rem = v - (floor_q << shift);
  const std::int64_t half = std::int64_t{1} << (shift - 1);
  if (rem > half || (rem == half && (floor_q & 1) != 0)) return floor_q + 1;
  return floor_q;
}

Fx16 requantize(Fx32 acc, int in_frac, QFormat out_q) {
  const int shift = in_frac - out_q.frac_bits();
  std::int64_t v = acc.raw;
  if (shift > 0) {
    v = shift_right_rne(v, shift);
  } else if (shift < 0) {
    // |acc| < 2^31, so any left shift past 33 bits saturates anyway.
    const int left = -shift > 33 ? 33 : -shift;
    v = v * (std::int64_t{1} << left);
  }
  return Fx16{saturate16(v)};
}

}  // namespace nullhop

// Independent reference computations for the unit tests. Written without
// reusing library internals: scatter-form convolution, bit-by-bit segment
// packing, exhaustive tap enumeration.

#pragma once

#include <algorithm>
#include <climits>
#include <cstdint>
#include <vector>

#include "nullhop/network.hpp"
#include "nullhop/tensor.hpp"

namespace oracle {

/// Round-half-even of v / 2^shift by exact integer division.
inline std::int64_t div_pow2_rne(std::int64_t v, int shift) {
  if (shift <= 0) return v * (std::int64_t{1} << -shift);
  const std::int64_t d = std::int64_t{1} << shift;
  std::int64_t q = v / d;
  std::int64_t r = v % d;
  if (r < 0) {
    r += d;
    q -= 1;
  }
  if (2 * r > d || (2 * r == d && (q & 1))) ++q;
  return q;
}

inline std::int64_t clamp64(std::int64_t v, std::int64_t lo, std::int64_t hi) { return v < lo ? lo : (v > hi ? hi : v); }

/// Every input pixel scatters its products to the outputs it reaches.
/// Returns exact (unsaturated) sums, indexed [j][y][x].
inline std::vector<std::int64_t> conv_scatter(const nullhop::FeatureMapTensor& in, const nullhop::KernelSet& ks,
                                              int pad, int& out_h, int& out_w) {
  out_h = in.height() + 2 * pad - ks.k + 1;
  out_w = in.width() + 2 * pad - ks.k + 1;
  std::vector<std::int64_t> acc(static_cast<std::size_t>(ks.n_out * out_h * out_w));
  for (int j = 0; j < ks.n_out; ++j)
    for (int p = 0; p < out_h * out_w; ++p) acc[static_cast<std::size_t>(j * out_h * out_w + p)] = ks.bias[j];
  for (int y = 0; y < in.height(); ++y)
    for (int x = 0; x < in.width(); ++x)
      for (int i = 0; i < in.channels(); ++i) {
        const std::int64_t a = in(i, x, y);
        if (a == 0) continue;
        for (int r = 0; r < ks.k; ++r)
          for (int c = 0; c < ks.k; ++c) {
            const int oy = y + pad - r;
            const int ox = x + pad - c;
            if (oy < 0 || oy >= out_h || ox < 0 || ox >= out_w) continue;
            for (int j = 0; j < ks.n_out; ++j)
              acc[static_cast<std::size_t>((j * out_h + oy) * out_w + ox)] += a * ks.at(j, i, r, c);
          }
      }
  return acc;
}

/// Full layer: conv, saturate, requantize, ReLU, 2x2 max pool (floor).
inline nullhop::FeatureMapTensor layer(const nullhop::FeatureMapTensor& in, const nullhop::LayerDescriptor& l,
                                       const nullhop::KernelSet& ks) {
  int h = 0, w = 0;
  const auto acc = conv_scatter(in, ks, l.pad, h, w);
  const int shift = l.frac_in + l.frac_w - l.frac_out;
  auto q = [&](int j, int x, int y) {
    std::int64_t v = clamp64(acc[static_cast<std::size_t>((j * h + y) * w + x)], INT32_MIN, INT32_MAX);
    v = clamp64(div_pow2_rne(v, shift), INT16_MIN, INT16_MAX);
    if (l.relu && v < 0) v = 0;
    return v;
  };
  const int oh = l.pool ? h / 2 : h;
  const int ow = l.pool ? w / 2 : w;
  nullhop::FeatureMapTensor out(nullhop::Dims{l.n_out, oh, ow}, l.frac_out);
  for (int j = 0; j < l.n_out; ++j)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        std::int64_t v = 0;
        if (l.pool) {
          v = std::max(std::max(q(j, 2 * x, 2 * y), q(j, 2 * x + 1, 2 * y)),
                       std::max(q(j, 2 * x, 2 * y + 1), q(j, 2 * x + 1, 2 * y + 1)));
        } else {
          v = q(j, x, y);
        }
        out(j, x, y) = static_cast<std::int16_t>(v);
      }
  return out;
}

/// 16-bit fields of the sparsity-map stream, built pixel by pixel.
inline std::vector<std::uint16_t> sm_fields(const nullhop::FeatureMapTensor& t) {
  std::vector<std::uint16_t> fields;
  for (int y = 0; y < t.height(); ++y) {
    std::vector<std::int16_t> row;
    for (int x = 0; x < t.width(); ++x)
      for (int i = 0; i < t.channels(); ++i) row.push_back(t(i, x, y));
    for (std::size_t g = 0; g < row.size(); g += 16) {
      std::uint16_t mask = 0;
      std::vector<std::uint16_t> vals;
      for (std::size_t b = 0; b < 16 && g + b < row.size(); ++b) {
        if (row[g + b] != 0) {
          mask = static_cast<std::uint16_t>(mask | (1u << b));
          vals.push_back(static_cast<std::uint16_t>(row[g + b]));
        }
      }
      fields.push_back(mask);
      fields.insert(fields.end(), vals.begin(), vals.end());
    }
  }
  return fields;
}

/// Number of (tap, output pixel) pairs within output rows 2s and 2s+1 that a
/// pixel at padded (x, y) takes part in, by exhaustive enumeration.
inline int weight_ops(int x, int y, int k, int conv_w, int conv_h, int s) {
  int n = 0;
  for (int oy = 2 * s; oy <= 2 * s + 1 && oy < conv_h; ++oy)
    for (int ox = 0; ox < conv_w; ++ox)
      for (int r = 0; r < k; ++r)
        for (int c = 0; c < k; ++c) n += (oy + r == y && ox + c == x) ? 1 : 0;
  return n;
}

}  // namespace oracle

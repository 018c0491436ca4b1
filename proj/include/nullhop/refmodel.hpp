// Dense golden model of one layer in exact fixed-point arithmetic.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nullhop/network.hpp"
#include "nullhop/tensor.hpp"

namespace nullhop::ref {

/// Cross-correlation with zero padding and unit stride. Each output is the
/// exact sum of the bias and every tap product, saturated once to 32 bits.
/// The result carries frac_in + frac_w fractional bits.
AccumulatorMap conv2d(const FeatureMapTensor& input, const KernelSet& kernels, int pad);

/// Elementwise requantization to `out`.
FeatureMapTensor requantize(const AccumulatorMap& acc, QFormat out);

template <typename Scalar>
FeatureMap<Scalar> apply_relu(FeatureMap<Scalar> map) {
  for (auto& v : map.values()) v = v < 0 ? Scalar{0} : v;
  return map;
}

/// Non-overlapping 2x2 max pooling, stride 2. A trailing odd row or column
/// is dropped. Requires at least two rows and two columns.
template <typename Scalar>
FeatureMap<Scalar> maxpool2x2(const FeatureMap<Scalar>& map) {
  if (map.height() < 2 || map.width() < 2) throw std::invalid_argument("maxpool2x2 needs at least 2x2 input");
  FeatureMap<Scalar> out(Dims{map.channels(), map.height() / 2, map.width() / 2}, map.frac_bits());
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x)
      for (int i = 0; i < out.channels(); ++i) {
        const Scalar a = map(i, 2 * x, 2 * y);
        const Scalar b = map(i, 2 * x + 1, 2 * y);
        const Scalar c = map(i, 2 * x, 2 * y + 1);
        const Scalar d = map(i, 2 * x + 1, 2 * y + 1);
        out(i, x, y) = std::max(std::max(a, b), std::max(c, d));
      }
  return out;
}

/// conv2d -> requantize -> optional ReLU -> optional pooling.
FeatureMapTensor layer_forward(const FeatureMapTensor& input, const LayerDescriptor& layer, const KernelSet& kernels);

/// Row-major n_out x n_in weight matrix with accumulator-format biases.
struct DenseWeights {
  int n_out = 0;
  int n_in = 0;
  std::vector<std::int16_t> weights;
  std::vector<std::int32_t> bias;
};

/// Loads fully-connected weights from a .nhw file with k = 1.
DenseWeights dense_from_kernels(const KernelSet& k);

/// y = requantize(W x + b), optional ReLU.
std::vector<std::int16_t> dense_forward(std::span<const std::int16_t> x, const DenseWeights& w, int frac_in,
                                        int frac_w, QFormat out, bool relu);

}  // namespace nullhop::ref

// Random tensors and calibrated kernels for experiments without trained
// models.

#pragma once

#include <cstdint>
#include <random>

#include "nullhop/network.hpp"
#include "nullhop/tensor.hpp"

namespace nullhop {

using Rng = std::mt19937_64;

struct ValueRange {
  int lo = 1;
  int hi = 255;
};

/// Exactly round(sparsity * size) zeros at uniformly chosen positions; the
/// other pixels are drawn from `range` (zero excluded).
FeatureMapTensor random_sparse_tensor(Dims dims, int frac_bits, double sparsity, ValueRange range, Rng& rng);

/// Uniform weights in [-max_abs, max_abs] and biases in [-max_bias, max_bias].
KernelSet random_kernels(int n_out, int n_in, int k, int frac_w, int max_abs, int max_bias, Rng& rng);

struct CalibrationOptions {
  double target_sparsity = 0.82;
  /// Standard deviation of the pre-activations, in output units.
  double output_scale = 1.0;
  int samples = 1024;
};

/// Kernels whose outputs on `input` have roughly the requested sparsity.
/// Weights are rescaled from sampled pre-activations; a common bias shifts
/// the distribution so the requested fraction of (pooled) outputs is zero
/// after ReLU. Layers without ReLU get a zero bias.
KernelSet calibrated_kernels(const LayerDescriptor& layer, const FeatureMapTensor& input,
                             const CalibrationOptions& opt, Rng& rng);

}  // namespace nullhop

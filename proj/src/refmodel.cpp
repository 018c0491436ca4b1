#include "nullhop/refmodel.hpp"

#include <Eigen/Core>

namespace nullhop::ref {

AccumulatorMap conv2d(const FeatureMapTensor& input, const KernelSet& kernels, int pad) {
  if (input.channels() != kernels.n_in) throw std::invalid_argument("conv2d: input channels do not match kernels");
  if (pad < 0 || pad > kMaxPad) throw std::invalid_argument("conv2d: padding outside [0, 3]");
  const int k = kernels.k;
  const int out_h = input.height() + 2 * pad - k + 1;
  const int out_w = input.width() + 2 * pad - k + 1;
  if (out_h < 1 || out_w < 1) throw std::invalid_argument("conv2d: kernel larger than padded input");

  AccumulatorMap out(Dims{kernels.n_out, out_h, out_w}, input.frac_bits() + kernels.q.frac_bits());
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      for (int j = 0; j < kernels.n_out; ++j) {
        std::int64_t sum = kernels.bias[static_cast<std::size_t>(j)];
        for (int r = 0; r < k; ++r) {
          const int iy = y + r - pad;
          if (iy < 0 || iy >= input.height()) continue;
          for (int c = 0; c < k; ++c) {
            const int ix = x + c - pad;
            if (ix < 0 || ix >= input.width()) continue;
            for (int i = 0; i < kernels.n_in; ++i) {
              sum += std::int64_t{input(i, ix, iy)} * std::int64_t{kernels.at(j, i, r, c)};
            }
          }
        }
        out(j, x, y) = saturate32(sum);
      }
    }
  }
  return out;
}

FeatureMapTensor requantize(const AccumulatorMap& acc, QFormat q) {
  FeatureMapTensor out(acc.dims(), q);
  auto src = acc.values();
  auto dst = out.values();
  for (std::size_t n = 0; n < src.size(); ++n) dst[n] = nullhop::requantize(Fx32{src[n]}, acc.frac_bits(), q).raw;
  return out;
}

FeatureMapTensor layer_forward(const FeatureMapTensor& input, const LayerDescriptor& layer, const KernelSet& kernels) {
  layer.validate();
  if (!(input.dims() == layer.input_dims())) throw std::invalid_argument("layer_forward: input dims do not match layer");
  if (kernels.n_out != layer.n_out || kernels.n_in != layer.n_in || kernels.k != layer.k) {
    throw std::invalid_argument("layer_forward: kernel set does not match layer");
  }
  auto acc = conv2d(input, kernels, layer.pad);
  auto out = requantize(acc, QFormat{layer.frac_out});
  if (layer.relu) out = apply_relu(std::move(out));
  if (layer.pool) out = maxpool2x2(out);
  return out;
}

DenseWeights dense_from_kernels(const KernelSet& k) {
  if (k.k != 1) throw std::invalid_argument("fully-connected weights must use k = 1");
  return DenseWeights{k.n_out, k.n_in, k.weights, k.bias};
}

std::vector<std::int16_t> dense_forward(std::span<const std::int16_t> x, const DenseWeights& w, int frac_in,
                                        int frac_w, QFormat out, bool relu) {
  if (static_cast<int>(x.size()) != w.n_in) throw std::invalid_argument("dense_forward: input length mismatch");
  if (w.weights.size() != static_cast<std::size_t>(w.n_out) * static_cast<std::size_t>(w.n_in) ||
      w.bias.size() != static_cast<std::size_t>(w.n_out)) {
    throw std::invalid_argument("dense_forward: weight matrix has the wrong shape");
  }
  using MatrixI64 = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using VectorI64 = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;
  const Eigen::Map<const Eigen::Matrix<std::int16_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> wm(
      w.weights.data(), w.n_out, w.n_in);
  const Eigen::Map<const Eigen::Matrix<std::int16_t, Eigen::Dynamic, 1>> xv(x.data(), w.n_in);
  const Eigen::Map<const Eigen::Matrix<std::int32_t, Eigen::Dynamic, 1>> bv(w.bias.data(), w.n_out);

  const VectorI64 acc = MatrixI64(wm.cast<std::int64_t>()) * xv.cast<std::int64_t>() + bv.cast<std::int64_t>();

  std::vector<std::int16_t> y(static_cast<std::size_t>(w.n_out));
  for (int j = 0; j < w.n_out; ++j) {
    Fx16 v = nullhop::requantize(Fx32{saturate32(acc(j))}, frac_in + frac_w, out);
    if (relu) v = relu16(v);
    y[static_cast<std::size_t>(j)] = v.raw;
  }
  return y;
}

}  // namespace nullhop::ref

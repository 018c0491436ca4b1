#include "nullhop/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "nullhop/fxp.hpp"

namespace nullhop {

namespace {

/// Pre-activation (without bias) of output (j, x, y) in accumulator units.
std::int64_t dot_at(const FeatureMapTensor& in, const KernelSet& ks, int pad, int j, int x, int y) {
  std::int64_t sum = 0;
  for (int r = 0; r < ks.k; ++r) {
    const int iy = y + r - pad;
    if (iy < 0 || iy >= in.height()) continue;
    for (int c = 0; c < ks.k; ++c) {
      const int ix = x + c - pad;
      if (ix < 0 || ix >= in.width()) continue;
      for (int i = 0; i < ks.n_in; ++i) sum += std::int64_t{in(i, ix, iy)} * ks.at(j, i, r, c);
    }
  }
  return sum;
}

struct Site {
  int j, x, y;
};

std::vector<Site> sample_sites(const LayerDescriptor& layer, int n, Rng& rng) {
  std::uniform_int_distribution<int> pick_j(0, layer.n_out - 1);
  std::uniform_int_distribution<int> pick_x(0, layer.out_w() - 1);
  std::uniform_int_distribution<int> pick_y(0, layer.out_h() - 1);
  std::vector<Site> sites(static_cast<std::size_t>(n));
  for (auto& s : sites) s = {pick_j(rng), pick_x(rng), pick_y(rng)};
  return sites;
}

/// Largest pre-activation over the conv outputs that feed output site s.
std::int64_t site_value(const FeatureMapTensor& in, const KernelSet& ks, const LayerDescriptor& layer, Site s) {
  if (!layer.pool) return dot_at(in, ks, layer.pad, s.j, s.x, s.y);
  std::int64_t best = std::numeric_limits<std::int64_t>::min();
  for (int dy = 0; dy < 2; ++dy)
    for (int dx = 0; dx < 2; ++dx) best = std::max(best, dot_at(in, ks, layer.pad, s.j, 2 * s.x + dx, 2 * s.y + dy));
  return best;
}

}  // namespace

FeatureMapTensor random_sparse_tensor(Dims dims, int frac_bits, double sparsity, ValueRange range, Rng& rng) {
  if (!(sparsity >= 0.0 && sparsity <= 1.0)) throw std::invalid_argument("sparsity outside [0, 1]");
  if (range.lo > range.hi || (range.lo == 0 && range.hi == 0)) throw std::invalid_argument("empty value range");
  FeatureMapTensor t(dims, frac_bits);
  auto vals = t.values();
  const auto zeros = static_cast<std::size_t>(std::llround(sparsity * static_cast<double>(vals.size())));
  std::uniform_int_distribution<int> value(range.lo, range.hi);
  for (std::size_t n = zeros; n < vals.size(); ++n) {
    int v = 0;
    while (v == 0) v = value(rng);
    vals[n] = static_cast<std::int16_t>(v);
  }
  std::shuffle(vals.begin(), vals.end(), rng);
  return t;
}

KernelSet random_kernels(int n_out, int n_in, int k, int frac_w, int max_abs, int max_bias, Rng& rng) {
  KernelSet ks(n_out, n_in, k, QFormat{frac_w});
  std::uniform_int_distribution<int> w(-max_abs, max_abs);
  std::uniform_int_distribution<int> b(-max_bias, max_bias);
  for (auto& v : ks.weights) v = static_cast<std::int16_t>(w(rng));
  for (auto& v : ks.bias) v = b(rng);
  return ks;
}

KernelSet calibrated_kernels(const LayerDescriptor& layer, const FeatureMapTensor& input,
                             const CalibrationOptions& opt, Rng& rng) {
  layer.validate();
  if (!(input.dims() == layer.input_dims())) throw std::invalid_argument("calibration input does not match layer");
  if (opt.samples < 1) throw std::invalid_argument("calibration needs at least one sample");

  constexpr int kDraw = 1024;
  KernelSet ks = random_kernels(layer.n_out, layer.n_in, layer.k, layer.frac_w, kDraw, 0, rng);

  // Rescale so single pre-activations have the requested spread.
  const auto sites = sample_sites(layer, opt.samples, rng);
  double sq = 0.0;
  for (const auto& s : sites) {
    const auto x0 = std::min(s.x * (layer.pool ? 2 : 1), layer.conv_w() - 1);
    const auto y0 = std::min(s.y * (layer.pool ? 2 : 1), layer.conv_h() - 1);
    const double v = static_cast<double>(dot_at(input, ks, layer.pad, s.j, x0, y0));
    sq += v * v;
  }
  const double sigma = std::sqrt(sq / static_cast<double>(sites.size()));
  const double target = opt.output_scale * std::ldexp(1.0, layer.acc_frac());
  if (sigma > 0.0) {
    const double scale = target / sigma;
    for (auto& w : ks.weights) {
      w = saturate16(std::llround(static_cast<double>(w) * scale));
    }
  }
  if (!layer.relu) return ks;

  std::vector<std::int64_t> vals;
  vals.reserve(sites.size());
  for (const auto& s : sites) vals.push_back(site_value(input, ks, layer, s));
  const double q = std::clamp(opt.target_sparsity, 0.0, 1.0);
  const auto rank = std::min(vals.size() - 1, static_cast<std::size_t>(q * static_cast<double>(vals.size())));
  std::nth_element(vals.begin(), vals.begin() + static_cast<std::ptrdiff_t>(rank), vals.end());
  const std::int32_t bias = saturate32(-vals[rank]);
  std::fill(ks.bias.begin(), ks.bias.end(), bias);
  return ks;
}

}  // namespace nullhop

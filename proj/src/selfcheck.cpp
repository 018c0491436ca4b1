#include <cmath>
#include <sstream>

#include "nullhop/codec.hpp"
#include "nullhop/refmodel.hpp"
#include "nullhop/run.hpp"

namespace nullhop {

namespace {

constexpr std::uint64_t kDenseMacBudget = 2'000'000;

int log_uniform(Rng& rng, int lo, int hi) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi + 1));
  return std::clamp(static_cast<int>(std::exp(u(rng))), lo, hi);
}

}  // namespace

RandomLayerCase random_layer_case(std::uint64_t seed) {
  Rng rng(seed);
  LayerDescriptor l;
  constexpr int kKernels[] = {1, 3, 5, 7};
  l.k = kKernels[std::uniform_int_distribution<int>(0, 3)(rng)];
  l.pad = std::uniform_int_distribution<int>(0, kMaxPad)(rng);
  l.n_in = log_uniform(rng, 1, 128);
  l.n_out = log_uniform(rng, 5, 256);
  l.relu = std::bernoulli_distribution(0.7)(rng);
  l.pool = std::bernoulli_distribution(0.4)(rng);
  l.encode = std::bernoulli_distribution(0.8)(rng);
  l.frac_in = std::uniform_int_distribution<int>(4, 10)(rng);
  l.frac_w = std::uniform_int_distribution<int>(4, 10)(rng);
  l.frac_out = std::uniform_int_distribution<int>(2, 12)(rng);
  // Smallest input that leaves a 2x2 conv output, so pooling always fits.
  const int min_dim = std::max(1, l.k + 1 - 2 * l.pad);
  std::uniform_int_distribution<int> dim(min_dim, 32);
  l.h = dim(rng);
  l.w = dim(rng);
  while (l.dense_macs() > kDenseMacBudget && (l.h > min_dim || l.w > min_dim)) {
    if (l.h >= l.w && l.h > min_dim) {
      l.h = std::max(min_dim, l.h * 3 / 4);
    } else {
      l.w = std::max(min_dim, l.w * 3 / 4);
    }
  }
  return RandomLayerCase{seed, l};
}

std::string describe(const RandomLayerCase& c) {
  const auto& l = c.layer;
  std::ostringstream os;
  os << "seed=" << c.seed << " n_in=" << l.n_in << " n_out=" << l.n_out << " k=" << l.k << " h=" << l.h
     << " w=" << l.w << " pad=" << l.pad << " relu=" << l.relu << " pool=" << l.pool << " encode=" << l.encode
     << " frac=" << l.frac_in << "/" << l.frac_w << "/" << l.frac_out;
  return os.str();
}

long long check_layer_case(const RandomLayerCase& c, int fault_pad_offset) {
  Rng rng(c.seed ^ 0x9e3779b97f4a7c15ull);
  const auto& l = c.layer;
  const double s = std::uniform_real_distribution<double>(0.0, 0.95)(rng);
  // Bounded operands keep every partial sum inside 32 bits.
  const auto input = random_sparse_tensor(l.input_dims(), l.frac_in, s, ValueRange{-300, 300}, rng);
  const auto kernels = random_kernels(l.n_out, l.n_in, l.k, l.frac_w, 300, 1 << 16, rng);
  const HardwareConfig hw;
  const auto schedule = plan_layer(l, hw, encode(input).bytes());
  SimOptions sim;
  sim.fault_pad_offset = fault_pad_offset;
  const auto got = simulate_layer(input, kernels, l, schedule, hw, sim);
  const auto want = ref::layer_forward(input, l, kernels);
  const FeatureMapTensor out = got.stream ? decode(*got.stream) : got.output;
  if (!(out.dims() == want.dims())) return -1;
  long long bad = 0;
  auto a = out.values();
  auto b = want.values();
  for (std::size_t n = 0; n < a.size(); ++n) bad += a[n] != b[n] ? 1 : 0;
  return bad;
}

SelfCheckResult selfcheck(const SelfCheckOptions& opt) {
  SelfCheckResult r;
  r.trials = std::max(0, opt.trials);
  Rng seeds(opt.seed);
  for (int t = 0; t < r.trials; ++t) {
    const auto c = random_layer_case(seeds());
    try {
      const long long bad = check_layer_case(c, opt.fault_pad_offset);
      if (bad == 0) {
        ++r.layer_passed;
      } else {
        r.failures.push_back("layer equivalence: " + std::to_string(bad) + " mismatched pixels; " + describe(c));
      }
    } catch (const std::exception& e) {
      r.failures.push_back(std::string("layer equivalence: ") + e.what() + "; " + describe(c));
    }

    const std::uint64_t codec_seed = seeds();
    Rng rng(codec_seed);
    std::uniform_int_distribution<int> ch(1, 64);
    std::uniform_int_distribution<int> sp(1, 24);
    const Dims d{ch(rng), sp(rng), sp(rng)};
    const double s = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const auto t_in = random_sparse_tensor(d, 8, s, ValueRange{-32768, 32767}, rng);
    try {
      if (decode(encode(t_in)) == t_in) {
        ++r.codec_passed;
      } else {
        r.failures.push_back("codec roundtrip mismatch; seed=" + std::to_string(codec_seed));
      }
    } catch (const std::exception& e) {
      r.failures.push_back(std::string("codec roundtrip: ") + e.what() + "; seed=" + std::to_string(codec_seed));
    }
  }
  return r;
}

}  // namespace nullhop

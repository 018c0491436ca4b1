#include "nullhop/tensor.hpp"

#include <algorithm>
#include <string>

namespace nullhop {

void validate_dims(const Dims& d) {
  if (d.channels < 1 || d.channels > kMaxChannels) {
    throw std::invalid_argument("channel count " + std::to_string(d.channels) + " outside [1, 1024]");
  }
  if (d.height < 1 || d.height > kMaxRows) {
    throw std::invalid_argument("height " + std::to_string(d.height) + " outside [1, 512]");
  }
  if (d.width < 1 || d.width > kMaxCols) {
    throw std::invalid_argument("width " + std::to_string(d.width) + " outside [1, 512]");
  }
}

std::vector<PixelRef> stream_order(const FeatureMapTensor& t) {
  std::vector<PixelRef> out;
  out.reserve(t.size());
  for_each_in_stream_order(t, [&](const PixelRef& p) { out.push_back(p); });
  return out;
}

std::size_t count_nonzero(const FeatureMapTensor& t) {
  const auto v = t.values();
  return static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [](std::int16_t x) { return x != 0; }));
}

double sparsity(const FeatureMapTensor& t) {
  if (t.empty()) throw std::invalid_argument("sparsity of an empty tensor");
  return 1.0 - static_cast<double>(count_nonzero(t)) / static_cast<double>(t.size());
}

}  // namespace nullhop

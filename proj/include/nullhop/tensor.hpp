// Dense feature-map storage in canonical stream order.
//
// A feature map holds `channels` planes of height x width pixels. Values are
// laid out exactly as they are streamed to the accelerator: the channel index
// varies fastest, then the column, then the row (top to bottom). Pixel p(i,x,y)
// therefore lives at ((y * width) + x) * channels + i.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "nullhop/fxp.hpp"

namespace nullhop {

struct Dims {
  int channels = 0;
  int height = 0;
  int width = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(channels) * static_cast<std::size_t>(height) *
           static_cast<std::size_t>(width);
  }
  /// Number of pixels (all channels) in one image row.
  std::size_t row_size() const { return static_cast<std::size_t>(channels) * static_cast<std::size_t>(width); }
  friend bool operator==(const Dims&, const Dims&) = default;
};

/// Hardware limits on feature-map dimensions.
inline constexpr int kMaxChannels = 1024;
inline constexpr int kMaxRows = 512;
inline constexpr int kMaxCols = 512;

/// Throws std::invalid_argument if `d` is outside the supported limits.
void validate_dims(const Dims& d);

template <typename Scalar>
class FeatureMap {
 public:
  using value_type = Scalar;

  FeatureMap() = default;
  FeatureMap(Dims dims, QFormat q = QFormat{}) : FeatureMap(dims, q.frac_bits()) {}
  FeatureMap(Dims dims, int frac_bits) : dims_(dims), frac_bits_(frac_bits), data_(dims.size(), Scalar{0}) {
    if (dims.channels <= 0 || dims.height <= 0 || dims.width <= 0) {
      throw std::invalid_argument("feature map dimensions must be positive");
    }
  }
  FeatureMap(int channels, int height, int width, QFormat q = QFormat{})
      : FeatureMap(Dims{channels, height, width}, q) {}

  const Dims& dims() const { return dims_; }
  int channels() const { return dims_.channels; }
  int height() const { return dims_.height; }
  int width() const { return dims_.width; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  /// Binary point of the stored values. Accumulator maps carry the sum of the
  /// activation and weight fractional bits, which may exceed 15; qformat()
  /// is only meaningful for 16-bit maps.
  int frac_bits() const { return frac_bits_; }
  QFormat qformat() const { return QFormat{frac_bits_}; }
  void set_frac_bits(int frac) { frac_bits_ = frac; }

  std::size_t index(int i, int x, int y) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(dims_.width) + static_cast<std::size_t>(x)) *
               static_cast<std::size_t>(dims_.channels) +
           static_cast<std::size_t>(i);
  }

  Scalar& operator()(int i, int x, int y) { return data_[index(i, x, y)]; }
  Scalar operator()(int i, int x, int y) const { return data_[index(i, x, y)]; }

  std::span<Scalar> values() { return data_; }
  std::span<const Scalar> values() const { return data_; }

  /// All pixels of image row y, in stream order.
  std::span<const Scalar> row(int y) const {
    return std::span<const Scalar>(data_).subspan(static_cast<std::size_t>(y) * dims_.row_size(), dims_.row_size());
  }

  friend bool operator==(const FeatureMap& a, const FeatureMap& b) {
    return a.dims_ == b.dims_ && a.frac_bits_ == b.frac_bits_ && a.data_ == b.data_;
  }

 private:
  Dims dims_{};
  int frac_bits_ = 0;
  std::vector<Scalar> data_;
};

/// 16-bit activations, the unit the accelerator streams in and out.
using FeatureMapTensor = FeatureMap<std::int16_t>;
/// 32-bit convolution results before requantization.
using AccumulatorMap = FeatureMap<std::int32_t>;

struct PixelRef {
  int channel;
  int x;
  int y;
  std::int16_t value;
  friend bool operator==(const PixelRef&, const PixelRef&) = default;
};

/// Visits every pixel once in canonical stream order.
template <typename Fn>
void for_each_in_stream_order(const FeatureMapTensor& t, Fn&& fn) {
  const auto vals = t.values();
  std::size_t k = 0;
  for (int y = 0; y < t.height(); ++y)
    for (int x = 0; x < t.width(); ++x)
      for (int i = 0; i < t.channels(); ++i) fn(PixelRef{i, x, y, vals[k++]});
}

/// Materialized form of for_each_in_stream_order.
std::vector<PixelRef> stream_order(const FeatureMapTensor& t);

/// Fraction of zero-valued pixels.
double sparsity(const FeatureMapTensor& t);

std::size_t count_nonzero(const FeatureMapTensor& t);

}  // namespace nullhop

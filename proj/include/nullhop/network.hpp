// Layer and network descriptions plus their on-disk formats.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nullhop/fxp.hpp"
#include "nullhop/tensor.hpp"

namespace nullhop {

inline constexpr int kMaxKernel = 7;
inline constexpr int kMaxPad = 3;

/// Square convolution kernels for one layer plus per-output-channel biases.
/// Weights are stored [out][in][row][col]; biases are already expressed in
/// the accumulator format (frac_in + frac_w fractional bits).
struct KernelSet {
  int n_out = 0;
  int n_in = 0;
  int k = 0;
  QFormat q{};
  std::vector<std::int16_t> weights;
  std::vector<std::int32_t> bias;

  KernelSet() = default;
  KernelSet(int n_out, int n_in, int k, QFormat q);

  std::size_t index(int j, int i, int row, int col) const {
    return ((static_cast<std::size_t>(j) * static_cast<std::size_t>(n_in) + static_cast<std::size_t>(i)) *
                static_cast<std::size_t>(k) +
            static_cast<std::size_t>(row)) *
               static_cast<std::size_t>(k) +
           static_cast<std::size_t>(col);
  }
  std::int16_t& at(int j, int i, int row, int col) { return weights[index(j, i, row, col)]; }
  std::int16_t at(int j, int i, int row, int col) const { return weights[index(j, i, row, col)]; }

  /// Kernel values feeding one output channel.
  std::size_t footprint() const { return static_cast<std::size_t>(n_in) * static_cast<std::size_t>(k * k); }

  friend bool operator==(const KernelSet&, const KernelSet&) = default;
};

struct LayerDescriptor {
  int n_in = 1;
  int n_out = 1;
  int k = 1;
  int h = 1;
  int w = 1;
  int pad = 0;
  bool relu = true;
  bool pool = false;
  bool encode = true;
  int frac_in = 8;
  int frac_w = 8;
  int frac_out = 8;
  std::optional<std::filesystem::path> weights;

  int conv_h() const { return h + 2 * pad - k + 1; }
  int conv_w() const { return w + 2 * pad - k + 1; }
  int out_h() const { return pool ? conv_h() / 2 : conv_h(); }
  int out_w() const { return pool ? conv_w() / 2 : conv_w(); }
  Dims input_dims() const { return {n_in, h, w}; }
  Dims output_dims() const { return {n_out, out_h(), out_w()}; }
  int acc_frac() const { return frac_in + frac_w; }

  /// Multiply-accumulates of the dense convolution.
  std::uint64_t dense_macs() const;

  /// Throws std::invalid_argument on any limit violation.
  void validate() const;
};

/// Fully-connected tail layer, evaluated functionally only.
struct DenseLayerSpec {
  int n_in = 0;
  int n_out = 0;
  bool relu = false;
  int frac_in = 8;
  int frac_w = 8;
  int frac_out = 8;
  std::optional<std::filesystem::path> weights;
};

class NetworkError : public std::runtime_error {
 public:
  NetworkError(const std::string& what, int layer = -1)
      : std::runtime_error(layer >= 0 ? "layer " + std::to_string(layer) + ": " + what : what), layer_(layer) {}
  int layer() const { return layer_; }

 private:
  int layer_;
};

struct NetworkDescriptor {
  std::string name;
  std::vector<LayerDescriptor> layers;
  std::vector<DenseLayerSpec> fc;

  /// Checks per-layer limits and that each layer's output feeds the next.
  /// Throws NetworkError naming the offending layer index.
  void validate() const;
  std::uint64_t dense_macs() const;
};

/// Parses a network config document. Relative weight paths resolve against
/// the document's directory.
NetworkDescriptor load_network(const std::filesystem::path& path);
NetworkDescriptor parse_network(const std::string& text, const std::filesystem::path& base_dir = {});

// Binary formats. All integers little-endian.
//   .nht  "NHT1" u16 C, u16 H, u16 W, u8 frac, then C*H*W i16 in stream order
//   .nhw  "NHW1" u16 n_out, u16 n_in, u16 k, u8 frac, weights i16 [j][i][r][c],
//         then n_out i32 biases
void save_tensor(const std::filesystem::path& path, const FeatureMapTensor& t);
FeatureMapTensor load_tensor(const std::filesystem::path& path);
std::vector<std::uint8_t> serialize_tensor(const FeatureMapTensor& t);
FeatureMapTensor deserialize_tensor(const std::vector<std::uint8_t>& bytes);

void save_weights(const std::filesystem::path& path, const KernelSet& k);
KernelSet load_weights(const std::filesystem::path& path);

}  // namespace nullhop

// Functional and transaction-level model of the zero-skipping pipeline:
// IDP stripe decoding, MAC clusters with column shift-out, the
// pooling/ReLU/encoding unit, and per-phase cycle and traffic accounting.
//
// Geometry. Stripe s produces the double output row (2s, 2s+1) and needs the
// k+1 padded input rows 2s .. 2s+k (k rows when the second output row does
// not exist). Padded coordinates are input coordinates plus `pad`; padding
// rows and columns are never read, only implied by the offsets.
//
// Timing. Per pass:
//   total = kernel_load + prefill + max(compute, input_stream, output_drain)
// kernel_load  ceil(kernel values / 2) bus words
// prefill      bus words of the input rows the first stripe needs
// input_stream remaining input words, one per cycle
// compute      sum over stripes of max(busiest controller's multiplies,
//              busiest IDP row FSM's field reads)
// output_drain encoder cycles (SM plus first pixel, then two pixels per
//              cycle) plus ceil(log2 v) + 1 reduction cycles per shifted-out
//              column when v > 1

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "nullhop/codec.hpp"
#include "nullhop/network.hpp"
#include "nullhop/schedule.hpp"
#include "nullhop/tensor.hpp"

namespace nullhop {

inline constexpr double kDramJoulesPerBit = 21e-12;

/// One MAC's accumulator bank: two output rows by k in-flight columns.
class MacState {
 public:
  explicit MacState(int k) : k_(k), acc_(static_cast<std::size_t>(2 * k), Fx32{}) {}
  std::size_t accumulator_count() const { return acc_.size(); }
  Fx32& at(int row, int slot) { return acc_[static_cast<std::size_t>(row * k_ + slot)]; }

 private:
  int k_;
  std::vector<Fx32> acc_;
};

struct IdpPixel {
  int channel = 0;
  int x = 0;  ///< padded column
  int y = 0;  ///< padded row
  std::int16_t value = 0;
  int fsm = 0;    ///< row FSM that read it (0 = top row of the stripe)
  int cycle = 0;  ///< cycle within the stripe in which it was read
};

struct StripeRead {
  /// Non-zero pixels in winding order: column by column, rows top to
  /// bottom within a column, channels fastest.
  std::vector<IdpPixel> pixels;
  /// Cycles the stripe occupies the IDP: the longest FSM read sequence.
  int cycles = 0;
  int active_fsms = 0;
  /// Pixels emitted in each IDP cycle (never more than active_fsms).
  std::vector<int> per_cycle;
};

struct StripeGeometry {
  int k = 1;
  int pad = 0;
  int in_h = 1;
  int in_w = 1;
  int in_c = 1;
  int conv_h = 1;

  int stripe_count() const { return (conv_h + 1) / 2; }
  /// Padded input rows read by stripe s: [first, first + count).
  int first_row(int s) const { return 2 * s; }
  int row_count(int s) const { return (2 * s + 1 < conv_h) ? k + 1 : k; }
};

StripeGeometry stripe_geometry(const LayerDescriptor& layer);

/// Decodes the non-zero pixels of stripe `s`. `rows` are the row start field
/// indices from row_offsets(). Each enabled FSM reads one field per cycle.
StripeRead idp_decode_stripe(const CompressedStream& stream, const std::vector<std::size_t>& rows,
                             const StripeGeometry& g, int s);

/// Multiplications one MAC performs for a pixel at padded (x, y) while
/// computing stripe s: the (tap, output pixel) pairs inside the double row.
int weight_ops_for_pixel(int x, int y, int k, int conv_w, int conv_h, int stripe);

struct LayerStats {
  std::uint64_t cycles_kernel_load = 0;
  std::uint64_t cycles_prefill = 0;
  std::uint64_t cycles_input_stream = 0;
  std::uint64_t cycles_compute = 0;
  std::uint64_t cycles_output_drain = 0;
  std::uint64_t cycles_total = 0;
  std::uint64_t mac_busy_cycles = 0;
  std::uint64_t mult_ops = 0;
  std::uint64_t bytes_in = 0;
  std::uint64_t bytes_out = 0;
  std::uint64_t bytes_kernels = 0;
  std::uint64_t dense_macs = 0;
  std::uint64_t input_nonzeros = 0;
  std::uint64_t output_nonzeros = 0;
  int passes = 0;
  int macs = 0;
  double utilization = 0.0;
  double utilization_excl_load = 0.0;

  std::uint64_t bytes_total() const { return bytes_in + bytes_out + bytes_kernels; }
  /// Recomputes the derived ratios from the counters.
  void finalize();
  LayerStats& operator+=(const LayerStats& o);
};

enum class Phase { kKernelLoad, kPrefill, kSteady };

/// One line per simulated cycle.
struct TraceEvent {
  int layer = 0;
  int pass = 0;
  std::uint64_t cycle = 0;
  Phase phase = Phase::kSteady;
  int words_in = 0;
  int pixels_in = 0;
  int pixels_out = 0;
};

using TraceSink = std::function<void(const TraceEvent&)>;

struct SimOptions {
  TraceSink trace;
  int layer_index = 0;
  /// Test hook: shifts the column offset the IDP applies, to check that the
  /// oracle comparison catches padding faults.
  int fault_pad_offset = 0;
};

struct LayerResult {
  FeatureMapTensor output;
  /// Present when the layer's encoder is enabled.
  std::optional<CompressedStream> stream;
  LayerStats stats;
};

/// Runs one layer. The result is bit-exact to ref::layer_forward as long as
/// no partial sum leaves the 32-bit range.
LayerResult simulate_layer(const CompressedStream& input, const KernelSet& kernels, const LayerDescriptor& layer,
                           const LayerSchedule& schedule, const HardwareConfig& hw, const SimOptions& opt = {});
LayerResult simulate_layer(const FeatureMapTensor& input, const KernelSet& kernels, const LayerDescriptor& layer,
                           const LayerSchedule& schedule, const HardwareConfig& hw, const SimOptions& opt = {});

/// DRAM access energy of everything a layer (or run) moved, at 21 pJ/bit.
double estimate_dram_energy(const LayerStats& stats);
/// Average DRAM power in milliwatts at `frames_per_s`.
double dram_power_mw(double joules_per_frame, double frames_per_s);

}  // namespace nullhop

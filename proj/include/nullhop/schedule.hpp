// Hardware parameters and the per-layer pass / cluster / kernel-bank plan.

#pragma once

#include <cstddef>
#include <vector>

#include "nullhop/network.hpp"

namespace nullhop {

struct HardwareConfig {
  int macs = 128;
  int controllers = 8;
  int bus_bits = 32;
  std::size_t pixel_mem_bytes = 512 * 1024;
  int kernel_bank_values = 4096;
  int max_kernel = kMaxKernel;
  double clock_hz = 500e6;
  int output_pixels_per_cycle = 2;

  /// Peak throughput in Op/s, counting a MAC as two operations.
  double peak_ops_per_s() const { return 2.0 * macs * clock_hz; }
  void validate() const;
};

/// Which MAC owns which slice of an output channel's kernels. Member m of a
/// cluster holds the taps of input channels i with i % cluster_size == m.
struct BankAssignment {
  int mac = 0;
  int out_channel = 0;
  int member = 0;
  int values = 0;
};

struct PassPlan {
  int first_channel = 0;
  int channel_count = 0;
  /// MACs cooperating on one output channel (v).
  int cluster_size = 1;
  int active_controllers = 1;
  bool reload_input = false;
  std::vector<BankAssignment> banks;

  int macs_used() const { return channel_count * cluster_size; }
  std::size_t kernel_values() const;
};

struct LayerSchedule {
  std::vector<PassPlan> passes;
  /// Smallest cluster that lets one output channel's kernels fit the banks.
  int min_cluster = 1;

  int pass_count() const { return static_cast<int>(passes.size()); }
};

/// Plans passes and clusters for `layer`:
///  - n_out <= M / v_min: one pass, v = max(v_min, min(C, M / n_out)).
///  - otherwise ceil(n_out / (M / v_min)) passes with channels spread evenly;
///    each pass then picks its own v by the single-pass rule.
///  - v_min > 1 when one channel's kernels (n_in * k^2) overflow a bank.
/// When `input_stream_bytes` exceeds the pixel memory and there is more than
/// one pass, every pass after the first reloads the input.
/// Throws std::invalid_argument for layers outside the hardware limits.
LayerSchedule plan_layer(const LayerDescriptor& layer, const HardwareConfig& hw, std::size_t input_stream_bytes = 0);

/// Throws std::logic_error if the schedule breaks a MAC, bank or coverage rule.
void validate_schedule(const LayerSchedule& s, const LayerDescriptor& layer, const HardwareConfig& hw);

}  // namespace nullhop

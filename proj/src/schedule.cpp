#include "nullhop/schedule.hpp"

#include <algorithm>
#include <string>

namespace nullhop {

namespace {

int ceil_div(int a, int b) { return (a + b - 1) / b; }

}  // namespace

void HardwareConfig::validate() const {
  if (macs < 1 || controllers < 1) throw std::invalid_argument("hardware needs at least one MAC and controller");
  if (macs % controllers != 0) throw std::invalid_argument("controller count must divide the MAC count");
  if (bus_bits != 32) throw std::invalid_argument("only a 32-bit bus is modelled");
  if (kernel_bank_values < 1) throw std::invalid_argument("kernel bank must hold at least one value");
  if (max_kernel < 1 || max_kernel > kMaxKernel) throw std::invalid_argument("max_kernel outside [1, 7]");
  if (!(clock_hz > 0)) throw std::invalid_argument("clock must be positive");
  if (output_pixels_per_cycle < 1) throw std::invalid_argument("output bus must carry at least one pixel");
}

std::size_t PassPlan::kernel_values() const {
  std::size_t total = 0;
  for (const auto& b : banks) total += static_cast<std::size_t>(b.values);
  return total;
}

LayerSchedule plan_layer(const LayerDescriptor& layer, const HardwareConfig& hw, std::size_t input_stream_bytes) {
  hw.validate();
  layer.validate();
  if (layer.k > hw.max_kernel) {
    throw std::invalid_argument("kernel size " + std::to_string(layer.k) + " exceeds hardware maximum");
  }
  const int taps = layer.k * layer.k;
  if (taps > hw.kernel_bank_values) throw std::invalid_argument("a single kernel does not fit in one bank");

  // Each member holds ceil(n_in / v) input channels' worth of taps.
  int v_min = 1;
  while (ceil_div(layer.n_in, v_min) * taps > hw.kernel_bank_values) ++v_min;
  if (v_min > hw.controllers || v_min > hw.macs) {
    throw std::invalid_argument("kernels of one output channel need " + std::to_string(v_min) +
                                " banks, more than the controller count");
  }

  const int per_pass_max = hw.macs / v_min;
  const int passes = ceil_div(layer.n_out, per_pass_max);

  LayerSchedule s;
  s.min_cluster = v_min;
  int first = 0;
  for (int p = 0; p < passes; ++p) {
    PassPlan pass;
    pass.first_channel = first;
    pass.channel_count = layer.n_out / passes + (p < layer.n_out % passes ? 1 : 0);
    pass.cluster_size = std::max(v_min, std::min(hw.controllers, hw.macs / pass.channel_count));
    pass.active_controllers = pass.cluster_size;
    pass.reload_input = p > 0 && passes > 1 && input_stream_bytes > hw.pixel_mem_bytes;
    for (int m = 0; m < pass.cluster_size; ++m) {
      // Members beyond n_in receive no input channels.
      const int in_channels = m < layer.n_in ? ceil_div(layer.n_in - m, pass.cluster_size) : 0;
      for (int j = 0; j < pass.channel_count; ++j) {
        pass.banks.push_back(BankAssignment{m * pass.channel_count + j, first + j, m, in_channels * taps});
      }
    }
    first += pass.channel_count;
    s.passes.push_back(std::move(pass));
  }
  return s;
}

void validate_schedule(const LayerSchedule& s, const LayerDescriptor& layer, const HardwareConfig& hw) {
  int next = 0;
  for (const auto& p : s.passes) {
    if (p.first_channel != next) throw std::logic_error("pass channel ranges are not contiguous and disjoint");
    if (p.channel_count < 1) throw std::logic_error("empty pass");
    if (p.macs_used() > hw.macs) throw std::logic_error("pass uses more MACs than available");
    if (p.cluster_size > hw.controllers) throw std::logic_error("cluster larger than the controller count");
    for (const auto& b : p.banks) {
      if (b.values > hw.kernel_bank_values) throw std::logic_error("kernel bank overflow");
      if (b.mac < 0 || b.mac >= hw.macs) throw std::logic_error("bank assigned to a non-existent MAC");
    }
    next += p.channel_count;
  }
  if (next != layer.n_out) throw std::logic_error("passes do not cover every output channel");
}

}  // namespace nullhop

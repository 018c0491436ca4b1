// Whole-network runs, run reports and the randomized self-check.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nullhop/accel.hpp"
#include "nullhop/network.hpp"
#include "nullhop/schedule.hpp"
#include "nullhop/synthetic.hpp"

namespace nullhop {

struct RunOptions {
  /// When set, layers without a weights file get calibrated random kernels
  /// aiming at this output sparsity, and FC layers get random weights.
  std::optional<double> synthetic_sparsity;
  std::uint64_t seed = 1;
  /// Cross-check every layer against the dense reference (slow).
  bool verify = false;
  TraceSink trace;
};

struct LayerReport {
  int index = 0;
  LayerDescriptor shape;
  int cluster_size = 1;
  double input_sparsity = 0.0;
  double output_sparsity = 0.0;
  LayerStats stats;
};

struct RunReport {
  std::string network;
  double clock_hz = 0.0;
  int macs = 0;
  std::vector<LayerReport> layers;
  LayerStats totals;
  double gop_per_frame = 0.0;
  double ms_per_frame = 0.0;
  double frames_per_s = 0.0;
  double gop_per_s = 0.0;
  double efficiency = 0.0;
  double dram_energy_j = 0.0;
  double dram_power_mw = 0.0;
  std::uint64_t bytes_per_frame = 0;
  /// Output of the last layer (after the FC tail when there is one), in
  /// stream order.
  std::vector<std::int16_t> output;
};

/// Runs the conv layers one after another on the simulator, feeding each
/// layer's compressed output to the next, then evaluates the FC tail
/// functionally. Throws NetworkError for bad descriptors or missing weights.
RunReport run_network(const NetworkDescriptor& net, const FeatureMapTensor& input, const HardwareConfig& hw,
                      const RunOptions& opt = {});

/// Fills the per-frame totals from the per-layer stats.
void summarize(RunReport& report);

std::string report_json(const RunReport& report, int indent = 2);
/// The same numbers as report_json, laid out for a terminal.
std::string report_text(const RunReport& report);

struct RandomLayerCase {
  std::uint64_t seed = 0;
  LayerDescriptor layer;
};

/// A layer drawn from the randomized test space: k in {1, 3, 5, 7}, pad
/// 0..3, n_in 1..128 and n_out 5..256 (log-uniform), small spatial dims,
/// ReLU/pooling/encoding toggled.
RandomLayerCase random_layer_case(std::uint64_t seed);

struct SelfCheckOptions {
  std::uint64_t seed = 1;
  int trials = 100;
  /// Fault injection for mutation testing; see SimOptions.
  int fault_pad_offset = 0;
};

struct SelfCheckResult {
  int trials = 0;
  int layer_passed = 0;
  int codec_passed = 0;
  std::vector<std::string> failures;
  bool ok() const { return failures.empty(); }
};

/// Oracle equivalence plus codec roundtrip on `trials` random cases each.
SelfCheckResult selfcheck(const SelfCheckOptions& opt);

/// Human-readable parameters of a case, enough to reproduce it.
std::string describe(const RandomLayerCase& c);

/// Compares simulate_layer with the dense reference on one random case.
/// Returns the number of mismatched pixels (or -1 on a shape mismatch).
long long check_layer_case(const RandomLayerCase& c, int fault_pad_offset = 0);

}  // namespace nullhop

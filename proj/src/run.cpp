#include "nullhop/run.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "nullhop/codec.hpp"
#include "nullhop/refmodel.hpp"

namespace nullhop {

namespace {

using json = nlohmann::ordered_json;

KernelSet layer_kernels(const LayerDescriptor& layer, int index, const FeatureMapTensor& input,
                        const RunOptions& opt, Rng& rng) {
  if (layer.weights) {
    KernelSet ks = load_weights(*layer.weights);
    if (ks.n_out != layer.n_out || ks.n_in != layer.n_in || ks.k != layer.k) {
      throw NetworkError("weights file " + layer.weights->string() + " does not match the layer shape", index);
    }
    if (ks.q.frac_bits() != layer.frac_w) throw NetworkError("weights file frac bits differ from frac_w", index);
    return ks;
  }
  if (!opt.synthetic_sparsity) throw NetworkError("no weights file and synthetic mode is off", index);
  CalibrationOptions cal;
  cal.target_sparsity = *opt.synthetic_sparsity;
  return calibrated_kernels(layer, input, cal, rng);
}

ref::DenseWeights fc_weights(const DenseLayerSpec& d, int index, const RunOptions& opt, Rng& rng) {
  if (d.weights) {
    KernelSet ks = load_weights(*d.weights);
    if (ks.k != 1 || ks.n_in != d.n_in || ks.n_out != d.n_out) {
      throw NetworkError("fc weights file does not match the layer shape", index);
    }
    return ref::dense_from_kernels(ks);
  }
  if (!opt.synthetic_sparsity) throw NetworkError("fc layer has no weights file and synthetic mode is off", index);
  return ref::dense_from_kernels(random_kernels(d.n_out, d.n_in, 1, d.frac_w, 16, 0, rng));
}

json stats_json(const LayerStats& s) {
  return json{{"cycles_kernel_load", s.cycles_kernel_load},
              {"cycles_prefill", s.cycles_prefill},
              {"cycles_input_stream", s.cycles_input_stream},
              {"cycles_compute", s.cycles_compute},
              {"cycles_output_drain", s.cycles_output_drain},
              {"cycles_total", s.cycles_total},
              {"mac_busy_cycles", s.mac_busy_cycles},
              {"mult_ops", s.mult_ops},
              {"dense_macs", s.dense_macs},
              {"bytes_in", s.bytes_in},
              {"bytes_out", s.bytes_out},
              {"bytes_kernels", s.bytes_kernels},
              {"passes", s.passes},
              {"utilization", s.utilization},
              {"utilization_excl_load", s.utilization_excl_load}};
}

json report_doc(const RunReport& r) {
  json layers = json::array();
  for (const auto& l : r.layers) {
    json entry{{"index", l.index},
               {"n_in", l.shape.n_in},
               {"n_out", l.shape.n_out},
               {"k", l.shape.k},
               {"h", l.shape.h},
               {"w", l.shape.w},
               {"pad", l.shape.pad},
               {"pool", l.shape.pool},
               {"cluster_size", l.cluster_size},
               {"input_sparsity", l.input_sparsity},
               {"output_sparsity", l.output_sparsity}};
    entry.update(stats_json(l.stats));
    layers.push_back(std::move(entry));
  }
  return json{{"network", r.network},
              {"clock_hz", r.clock_hz},
              {"macs", r.macs},
              {"totals",
               json{{"gop_per_frame", r.gop_per_frame},
                    {"ms_per_frame", r.ms_per_frame},
                    {"frames_per_s", r.frames_per_s},
                    {"gop_per_s", r.gop_per_s},
                    {"efficiency", r.efficiency},
                    {"dram_energy_j", r.dram_energy_j},
                    {"dram_power_mw", r.dram_power_mw},
                    {"bytes_per_frame", r.bytes_per_frame},
                    {"stats", stats_json(r.totals)}}},
              {"layers", std::move(layers)}};
}

}  // namespace

void summarize(RunReport& r) {
  r.totals = LayerStats{};
  r.totals.macs = r.macs;
  for (const auto& l : r.layers) r.totals += l.stats;
  r.totals.finalize();
  r.gop_per_frame = 2.0 * static_cast<double>(r.totals.dense_macs) / 1e9;
  const double seconds = static_cast<double>(r.totals.cycles_total) / r.clock_hz;
  r.ms_per_frame = seconds * 1e3;
  r.frames_per_s = seconds > 0.0 ? 1.0 / seconds : 0.0;
  r.gop_per_s = r.gop_per_frame * r.frames_per_s;
  const double peak_gops = 2.0 * r.macs * r.clock_hz / 1e9;
  r.efficiency = r.gop_per_s / peak_gops;
  r.dram_energy_j = estimate_dram_energy(r.totals);
  r.dram_power_mw = dram_power_mw(r.dram_energy_j, r.frames_per_s);
  r.bytes_per_frame = r.totals.bytes_total();
}

RunReport run_network(const NetworkDescriptor& net, const FeatureMapTensor& input, const HardwareConfig& hw,
                      const RunOptions& opt) {
  net.validate();
  hw.validate();
  const auto& first = net.layers.front();
  if (!(input.dims() == first.input_dims())) throw NetworkError("input tensor does not match the first layer", 0);
  if (input.frac_bits() != first.frac_in) throw NetworkError("input frac bits differ from frac_in", 0);

  RunReport report;
  report.network = net.name;
  report.clock_hz = hw.clock_hz;
  report.macs = hw.macs;

  Rng rng(opt.seed);
  FeatureMapTensor current = input;
  CompressedStream stream = encode(input);
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    const auto& layer = net.layers[li];
    const int idx = static_cast<int>(li);
    const KernelSet kernels = layer_kernels(layer, idx, current, opt, rng);
    const auto schedule = plan_layer(layer, hw, stream.bytes());
    SimOptions sim;
    sim.trace = opt.trace;
    sim.layer_index = idx;
    auto result = simulate_layer(stream, kernels, layer, schedule, hw, sim);
    if (opt.verify && !(result.output == ref::layer_forward(current, layer, kernels))) {
      throw NetworkError("simulator output differs from the reference model", idx);
    }
    LayerReport lr;
    lr.index = idx;
    lr.shape = layer;
    lr.cluster_size = schedule.passes.front().cluster_size;
    lr.input_sparsity = sparsity(current);
    lr.output_sparsity = sparsity(result.output);
    lr.stats = result.stats;
    report.layers.push_back(std::move(lr));
    // A layer with its encoder off hands raw pixels to the host, which
    // re-encodes them for the next layer.
    stream = result.stream ? std::move(*result.stream) : encode(result.output);
    current = std::move(result.output);
  }

  auto vals = current.values();
  std::vector<std::int16_t> x(vals.begin(), vals.end());
  int frac = current.frac_bits();
  for (std::size_t fi = 0; fi < net.fc.size(); ++fi) {
    const auto& d = net.fc[fi];
    const auto w = fc_weights(d, static_cast<int>(net.layers.size() + fi), opt, rng);
    x = ref::dense_forward(x, w, frac, d.frac_w, QFormat{d.frac_out}, d.relu);
    frac = d.frac_out;
  }
  report.output = std::move(x);
  summarize(report);
  return report;
}

std::string report_json(const RunReport& report, int indent) { return report_doc(report).dump(indent); }

std::string report_text(const RunReport& report) {
  // Every number is rendered by the same serializer as the JSON report.
  const json doc = report_doc(report);
  std::ostringstream os;
  os << "network " << doc["network"].get<std::string>() << "  clock_hz " << doc["clock_hz"].dump() << "  macs "
     << doc["macs"].dump() << "\n";
  for (const auto& l : doc["layers"]) {
    os << "layer " << l["index"].dump() << ":";
    for (const auto& [key, val] : l.items()) {
      if (key != "index") os << " " << key << "=" << val.dump();
    }
    os << "\n";
  }
  os << "totals:";
  for (const auto& [key, val] : doc["totals"].items()) {
    if (key != "stats") os << " " << key << "=" << val.dump();
  }
  os << "\n";
  os << "total stats:";
  for (const auto& [key, val] : doc["totals"]["stats"].items()) os << " " << key << "=" << val.dump();
  os << "\n";
  return os.str();
}

}  // namespace nullhop

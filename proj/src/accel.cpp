#include "nullhop/accel.hpp"

#include <algorithm>
#include <bit>
#include <stdexcept>
#include <string>

namespace nullhop {

namespace {

int floor_mod(int a, int b) {
  const int r = a % b;
  return r < 0 ? r + b : r;
}

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

int reduction_cycles(int v) { return v <= 1 ? 0 : std::bit_width(static_cast<unsigned>(v - 1)) + 1; }

/// Appends the encoder's per-cycle output pixel counts for one 16-pixel group.
void encoder_group_cycles(int nonzeros, std::vector<int>* seq, std::uint64_t& cycles) {
  if (nonzeros == 0) {
    ++cycles;
    if (seq) seq->push_back(0);
    return;
  }
  // SM segment plus the first pixel, then two pixels per cycle.
  cycles += 1 + ceil_div(static_cast<std::uint64_t>(nonzeros - 1), 2);
  if (seq) {
    seq->push_back(1);
    for (int left = nonzeros - 1; left > 0; left -= 2) seq->push_back(std::min(left, 2));
  }
}

/// The MAC array and pooling/ReLU/encoding unit for one pass.
class PassEngine {
 public:
  PassEngine(const LayerDescriptor& layer, const KernelSet& kernels, const PassPlan& pass, FeatureMapTensor& out,
             int acc_frac, bool tracing)
      : layer_(layer),
        kernels_(kernels),
        k_(layer.k),
        ch_(pass.channel_count),
        c0_(pass.first_channel),
        v_(pass.cluster_size),
        conv_w_(layer.conv_w()),
        conv_h_(layer.conv_h()),
        acc_frac_(acc_frac),
        out_q_(layer.frac_out),
        out_(out),
        tracing_(tracing),
        acc_(static_cast<std::size_t>(v_) * 2 * static_cast<std::size_t>(k_) * static_cast<std::size_t>(ch_)),
        ctrl_ops_(static_cast<std::size_t>(v_), 0),
        partials_(static_cast<std::size_t>(v_)) {
    // Bank layout: taps of (input channel, row, col) with the pass's output
    // channels contiguous, so one pixel drives all MACs of a controller.
    const auto kk = static_cast<std::size_t>(k_);
    weights_.resize(static_cast<std::size_t>(kernels.n_in) * kk * kk * static_cast<std::size_t>(ch_));
    for (int i = 0; i < kernels.n_in; ++i)
      for (int r = 0; r < k_; ++r)
        for (int c = 0; c < k_; ++c)
          for (int jl = 0; jl < ch_; ++jl) weights_[tap_index(i, r, c) + static_cast<std::size_t>(jl)] =
              kernels.at(c0_ + jl, i, r, c);
    pool_init_ = layer.relu ? std::int16_t{0} : kInt16Min;
    if (layer.pool) pool_buf_.assign(static_cast<std::size_t>(layer.out_w()) * static_cast<std::size_t>(ch_), 0);
  }

  void begin_stripe(int s) {
    stripe_ = s;
    window_base_ = 1 - k_;
    for (int col = window_base_; col < window_base_ + k_; ++col) init_column(col);
    std::fill(ctrl_ops_.begin(), ctrl_ops_.end(), 0);
    if (layer_.pool) std::fill(pool_buf_.begin(), pool_buf_.end(), pool_init_);
    trace_ops_.clear();
  }

  /// Feeds one non-zero pixel at padded coordinates; returns the number of
  /// multiplications each MAC of its controller performs.
  int push_pixel(int channel, int x, int y, std::int16_t value) {
    const int member = channel % v_;
    if (x - k_ + 1 > window_base_) advance(x - k_ + 1);
    int ops = 0;
    for (int r = 0; r < 2; ++r) {
      const int oy = 2 * stripe_ + r;
      if (oy >= conv_h_) continue;
      const int ky = y - oy;
      if (ky < 0 || ky >= k_) continue;
      for (int kx = 0; kx < k_; ++kx) {
        const int ox = x - kx;
        if (ox < 0 || ox >= conv_w_) continue;
        const std::int16_t* w = &weights_[tap_index(channel, ky, kx)];
        std::int32_t* a = &acc_[acc_index(member, r, ox % k_)];
        const std::int64_t px = value;
        for (int jl = 0; jl < ch_; ++jl) a[jl] = saturate32(std::int64_t{a[jl]} + px * w[jl]);
        ++ops;
      }
    }
    ctrl_ops_[static_cast<std::size_t>(member)] += ops;
    if (tracing_) trace_ops_.emplace_back(member, ops);
    return ops;
  }

  /// Shifts out every remaining column of the stripe and stores its rows.
  void end_stripe() {
    advance(conv_w_);
    if (layer_.pool && 2 * stripe_ + 1 < conv_h_ && stripe_ < layer_.out_h()) {
      for (int q = 0; q < layer_.out_w(); ++q)
        for (int jl = 0; jl < ch_; ++jl)
          out_(c0_ + jl, q, stripe_) =
              pool_buf_[static_cast<std::size_t>(q) * static_cast<std::size_t>(ch_) + static_cast<std::size_t>(jl)];
    }
  }

  std::uint64_t busiest_controller() const { return *std::max_element(ctrl_ops_.begin(), ctrl_ops_.end()); }
  std::uint64_t column_events() const { return column_events_; }

  /// Pixels started per cycle by the controllers during the last stripe.
  std::vector<int> stripe_consumption(std::uint64_t stripe_cycles) const {
    std::vector<int> seq(static_cast<std::size_t>(stripe_cycles), 0);
    std::vector<std::uint64_t> t(static_cast<std::size_t>(v_), 0);
    for (const auto& [member, ops] : trace_ops_) {
      auto& tm = t[static_cast<std::size_t>(member)];
      if (tm < seq.size()) ++seq[static_cast<std::size_t>(tm)];
      tm += static_cast<std::uint64_t>(ops);
    }
    return seq;
  }

 private:
  std::size_t tap_index(int i, int r, int c) const {
    return ((static_cast<std::size_t>(i) * static_cast<std::size_t>(k_) + static_cast<std::size_t>(r)) *
                static_cast<std::size_t>(k_) +
            static_cast<std::size_t>(c)) *
           static_cast<std::size_t>(ch_);
  }
  std::size_t acc_index(int member, int row, int slot) const {
    return ((static_cast<std::size_t>(member) * 2 + static_cast<std::size_t>(row)) * static_cast<std::size_t>(k_) +
            static_cast<std::size_t>(slot)) *
           static_cast<std::size_t>(ch_);
  }

  /// Re-arms the accumulators of output column `col`: bias on the first
  /// cluster member, zero on the others.
  void init_column(int col) {
    const int slot = floor_mod(col, k_);
    for (int m = 0; m < v_; ++m)
      for (int r = 0; r < 2; ++r) {
        std::int32_t* a = &acc_[acc_index(m, r, slot)];
        for (int jl = 0; jl < ch_; ++jl) a[jl] = m == 0 ? kernels_.bias[static_cast<std::size_t>(c0_ + jl)] : 0;
      }
  }

  /// Moves the window so it starts at `base`, shifting completed columns out
  /// to the PRE in column order.
  void advance(int base) {
    const int kept_end = window_base_ + k_;
    for (int col = window_base_; col < std::min(base, kept_end); ++col) {
      if (col >= 0 && col < conv_w_) emit_column(col, true);
    }
    for (int col = std::max(kept_end, 0); col < std::min(base, conv_w_); ++col) emit_column(col, false);
    for (int col = std::max(base, kept_end); col < base + k_; ++col) init_column(col);
    window_base_ = base;
  }

  void emit_column(int col, bool from_accumulators) {
    ++column_events_;
    const int slot = col % k_;
    for (int r = 0; r < 2; ++r) {
      const int oy = 2 * stripe_ + r;
      if (oy >= conv_h_) continue;
      for (int jl = 0; jl < ch_; ++jl) {
        Fx32 sum{kernels_.bias[static_cast<std::size_t>(c0_ + jl)]};
        if (from_accumulators) {
          for (int m = 0; m < v_; ++m) {
            partials_[static_cast<std::size_t>(m)] = Fx32{acc_[acc_index(m, r, slot) + static_cast<std::size_t>(jl)]};
          }
          sum = reduce_partials();
        }
        const std::int16_t q = requantize(sum, acc_frac_, out_q_).raw;
        const int j = c0_ + jl;
        if (layer_.pool) {
          const int qx = col / 2;
          if (qx >= layer_.out_w()) continue;
          auto& cell = pool_buf_[static_cast<std::size_t>(qx) * static_cast<std::size_t>(ch_) +
                                 static_cast<std::size_t>(jl)];
          cell = std::max(cell, q);
        } else {
          out_(j, col, oy) = layer_.relu ? std::max<std::int16_t>(0, q) : q;
        }
      }
    }
  }

  /// Sums the cluster's partial results pairwise, adjacent entries first.
  Fx32 reduce_partials() {
    std::size_t n = partials_.size();
    while (n > 1) {
      const std::size_t half = n / 2;
      for (std::size_t i = 0; i < half; ++i) partials_[i] = add_sat(partials_[2 * i], partials_[2 * i + 1]);
      if (n % 2 != 0) partials_[half] = partials_[n - 1];
      n = half + n % 2;
    }
    return partials_[0];
  }

  const LayerDescriptor& layer_;
  const KernelSet& kernels_;
  int k_, ch_, c0_, v_, conv_w_, conv_h_, acc_frac_;
  QFormat out_q_;
  FeatureMapTensor& out_;
  bool tracing_;
  std::vector<std::int16_t> weights_;
  std::vector<std::int32_t> acc_;
  std::vector<std::uint64_t> ctrl_ops_;
  std::vector<Fx32> partials_;
  std::vector<std::int16_t> pool_buf_;
  std::int16_t pool_init_ = 0;
  std::vector<std::pair<int, int>> trace_ops_;
  int stripe_ = 0;
  int window_base_ = 0;
  std::uint64_t column_events_ = 0;
};

void check_inputs(const CompressedStream& input, const KernelSet& kernels, const LayerDescriptor& layer,
                  const LayerSchedule& schedule, const HardwareConfig& hw) {
  hw.validate();
  layer.validate();
  if (!(input.dims == layer.input_dims())) throw std::invalid_argument("input stream dims do not match the layer");
  if (input.frac_bits != layer.frac_in) throw std::invalid_argument("input frac bits do not match the layer");
  if (kernels.n_in != layer.n_in || kernels.n_out != layer.n_out || kernels.k != layer.k) {
    throw std::invalid_argument("kernel set does not match the layer");
  }
  if (kernels.q.frac_bits() != layer.frac_w) throw std::invalid_argument("kernel frac bits do not match the layer");
  if (layer.k > hw.max_kernel) throw std::invalid_argument("kernel exceeds the hardware maximum");
  try {
    validate_schedule(schedule, layer, hw);
  } catch (const std::logic_error& e) {
    throw std::invalid_argument(std::string("schedule does not fit the layer: ") + e.what());
  }
  for (const auto& p : schedule.passes) {
    if (p.cluster_size < schedule.min_cluster) throw std::invalid_argument("schedule cluster below the bank minimum");
  }
}

}  // namespace

StripeGeometry stripe_geometry(const LayerDescriptor& layer) {
  return StripeGeometry{layer.k, layer.pad, layer.h, layer.w, layer.n_in, layer.conv_h()};
}

StripeRead idp_decode_stripe(const CompressedStream& stream, const std::vector<std::size_t>& rows,
                             const StripeGeometry& g, int s) {
  StripeRead read;
  const int first = g.first_row(s);
  const int count = g.row_count(s);
  const std::size_t row_pixels = static_cast<std::size_t>(g.in_c) * static_cast<std::size_t>(g.in_w);
  std::vector<std::vector<IdpPixel>> per_fsm(static_cast<std::size_t>(count));
  for (int t = 0; t < count; ++t) {
    const int y = first + t - g.pad;
    if (y < 0 || y >= g.in_h) continue;  // padding row: FSM idle, nothing loaded
    ++read.active_fsms;
    RowReader reader(stream, rows[static_cast<std::size_t>(y)], row_pixels);
    auto& list = per_fsm[static_cast<std::size_t>(t)];
    while (auto px = reader.next()) {
      const int channel = static_cast<int>(px->offset % static_cast<std::size_t>(g.in_c));
      const int x = static_cast<int>(px->offset / static_cast<std::size_t>(g.in_c));
      list.push_back(IdpPixel{channel, x + g.pad, first + t, px->value, t, static_cast<int>(reader.fields_read()) - 1});
    }
    read.cycles = std::max(read.cycles, static_cast<int>(reader.fields_read()));
  }
  read.per_cycle.assign(static_cast<std::size_t>(read.cycles), 0);
  std::size_t total = 0;
  for (const auto& list : per_fsm) {
    total += list.size();
    for (const auto& p : list) ++read.per_cycle[static_cast<std::size_t>(p.cycle)];
  }
  // Winding order: merge the row lists column by column.
  read.pixels.reserve(total);
  std::vector<std::size_t> pos(per_fsm.size(), 0);
  for (int x = g.pad; x < g.pad + g.in_w; ++x) {
    for (std::size_t t = 0; t < per_fsm.size(); ++t) {
      const auto& list = per_fsm[t];
      auto& at = pos[t];
      while (at < list.size() && list[at].x == x) read.pixels.push_back(list[at++]);
    }
  }
  return read;
}

int weight_ops_for_pixel(int x, int y, int k, int conv_w, int conv_h, int stripe) {
  int ops = 0;
  for (int r = 0; r < 2; ++r) {
    const int oy = 2 * stripe + r;
    if (oy >= conv_h) continue;
    const int ky = y - oy;
    if (ky < 0 || ky >= k) continue;
    const int lo = std::max(0, x - k + 1);
    const int hi = std::min(conv_w - 1, x);
    if (hi >= lo) ops += hi - lo + 1;
  }
  return ops;
}

void LayerStats::finalize() {
  mac_busy_cycles = mult_ops;
  const double m = macs > 0 ? static_cast<double>(macs) : 1.0;
  utilization = cycles_total ? static_cast<double>(mac_busy_cycles) / (m * static_cast<double>(cycles_total)) : 0.0;
  const std::uint64_t busy_window = cycles_total - cycles_kernel_load;
  utilization_excl_load =
      busy_window ? static_cast<double>(mac_busy_cycles) / (m * static_cast<double>(busy_window)) : 0.0;
}

LayerStats& LayerStats::operator+=(const LayerStats& o) {
  cycles_kernel_load += o.cycles_kernel_load;
  cycles_prefill += o.cycles_prefill;
  cycles_input_stream += o.cycles_input_stream;
  cycles_compute += o.cycles_compute;
  cycles_output_drain += o.cycles_output_drain;
  cycles_total += o.cycles_total;
  mult_ops += o.mult_ops;
  bytes_in += o.bytes_in;
  bytes_out += o.bytes_out;
  bytes_kernels += o.bytes_kernels;
  dense_macs += o.dense_macs;
  input_nonzeros += o.input_nonzeros;
  output_nonzeros += o.output_nonzeros;
  passes += o.passes;
  if (macs == 0) macs = o.macs;
  finalize();
  return *this;
}

LayerResult simulate_layer(const CompressedStream& input, const KernelSet& kernels, const LayerDescriptor& layer,
                           const LayerSchedule& schedule, const HardwareConfig& hw, const SimOptions& opt) {
  check_inputs(input, kernels, layer, schedule, hw);
  const auto geom = stripe_geometry(layer);
  const auto rows = row_offsets(input);
  const bool tracing = static_cast<bool>(opt.trace);

  LayerResult result{FeatureMapTensor(layer.output_dims(), QFormat{layer.frac_out}), std::nullopt, {}};
  auto& st = result.stats;
  st.macs = hw.macs;
  st.passes = schedule.pass_count();
  st.dense_macs = layer.dense_macs();
  const std::uint64_t segments_per_row = ceil_div(input.dims.row_size(), kSegmentBits);
  st.input_nonzeros = input.field_count() - segments_per_row * static_cast<std::uint64_t>(layer.h);

  // Rows the first stripe needs must be resident before compute starts.
  const int last_needed = std::min(layer.h - 1, geom.row_count(0) - 1 - layer.pad);
  const std::size_t prefill_fields = last_needed + 1 < layer.h
                                         ? rows[static_cast<std::size_t>(last_needed + 1)]
                                         : input.field_count();
  const std::uint64_t in_words = input.words.size();
  const std::uint64_t prefill_words = std::min<std::uint64_t>(in_words, ceil_div(prefill_fields, 2));
  const bool reload = schedule.pass_count() > 1 && input.bytes() > hw.pixel_mem_bytes;
  const int acc_frac = layer.frac_in + layer.frac_w;

  std::uint64_t layer_cycle = 0;
  for (int p = 0; p < schedule.pass_count(); ++p) {
    const auto& pass = schedule.passes[static_cast<std::size_t>(p)];
    PassEngine engine(layer, kernels, pass, result.output, acc_frac, tracing);
    std::vector<int> consumed;

    std::uint64_t compute = 0;
    for (int s = 0; s < geom.stripe_count(); ++s) {
      const auto read = idp_decode_stripe(input, rows, geom, s);
      engine.begin_stripe(s);
      for (const auto& px : read.pixels) {
        const int ops = engine.push_pixel(px.channel, px.x + opt.fault_pad_offset, px.y, px.value);
        st.mult_ops += static_cast<std::uint64_t>(ops) * static_cast<std::uint64_t>(pass.channel_count);
      }
      engine.end_stripe();
      const std::uint64_t stripe_cycles =
          std::max<std::uint64_t>(engine.busiest_controller(), static_cast<std::uint64_t>(read.cycles));
      compute += stripe_cycles;
      if (tracing) {
        auto seq = engine.stripe_consumption(stripe_cycles);
        consumed.insert(consumed.end(), seq.begin(), seq.end());
      }
    }

    // Output side: reduction of cluster partials, then the encoder.
    std::uint64_t drain = engine.column_events() * static_cast<std::uint64_t>(reduction_cycles(pass.cluster_size));
    std::vector<int> emitted;
    if (tracing) emitted.assign(static_cast<std::size_t>(drain), 0);
    std::uint64_t out_fields = 0;
    std::uint64_t out_pixels = 0;
    const auto& out = result.output;
    for (int y = 0; y < out.height(); ++y) {
      int in_group = 0;
      int nz = 0;
      for (int x = 0; x < out.width(); ++x) {
        for (int jl = 0; jl < pass.channel_count; ++jl) {
          const bool nonzero = out(pass.first_channel + jl, x, y) != 0;
          nz += nonzero ? 1 : 0;
          st.output_nonzeros += nonzero ? 1 : 0;
          ++out_pixels;
          if (++in_group == kSegmentBits) {
            if (layer.encode) encoder_group_cycles(nz, tracing ? &emitted : nullptr, drain);
            out_fields += 1 + static_cast<std::uint64_t>(nz);
            in_group = 0;
            nz = 0;
          }
        }
      }
      if (in_group > 0) {
        if (layer.encode) encoder_group_cycles(nz, tracing ? &emitted : nullptr, drain);
        out_fields += 1 + static_cast<std::uint64_t>(nz);
      }
    }
    std::uint64_t out_words = 0;
    if (layer.encode) {
      out_words = ceil_div(out_fields, 2);
    } else {
      // Raw mode: two 16-bit pixels per bus word, no sparsity map.
      out_words = ceil_div(out_pixels, 2);
      drain += out_words;
      if (tracing) {
        for (std::uint64_t n = 0; n < out_pixels; n += 2) emitted.push_back(static_cast<int>(std::min<std::uint64_t>(2, out_pixels - n)));
      }
    }

    const bool streamed = p == 0 || reload;
    const std::uint64_t load = ceil_div(pass.kernel_values(), 2);
    const std::uint64_t prefill = streamed ? prefill_words : 0;
    const std::uint64_t stream = streamed ? in_words - prefill_words : 0;
    const std::uint64_t steady = std::max({compute, stream, drain});

    st.cycles_kernel_load += load;
    st.cycles_prefill += prefill;
    st.cycles_input_stream += stream;
    st.cycles_compute += compute;
    st.cycles_output_drain += drain;
    st.cycles_total += load + prefill + steady;
    st.bytes_in += streamed ? input.bytes() : 0;
    st.bytes_out += out_words * 4;
    st.bytes_kernels += pass.kernel_values() * 2 + static_cast<std::uint64_t>(pass.channel_count) * 4;

    if (tracing) {
      TraceEvent ev;
      ev.layer = opt.layer_index;
      ev.pass = p;
      for (std::uint64_t c = 0; c < load; ++c) {
        ev.cycle = layer_cycle++;
        ev.phase = Phase::kKernelLoad;
        ev.words_in = 1;
        opt.trace(ev);
      }
      for (std::uint64_t c = 0; c < prefill; ++c) {
        ev.cycle = layer_cycle++;
        ev.phase = Phase::kPrefill;
        ev.words_in = 1;
        opt.trace(ev);
      }
      for (std::uint64_t c = 0; c < steady; ++c) {
        ev.cycle = layer_cycle++;
        ev.phase = Phase::kSteady;
        ev.words_in = c < stream ? 1 : 0;
        ev.pixels_in = c < consumed.size() ? consumed[static_cast<std::size_t>(c)] : 0;
        ev.pixels_out = c < emitted.size() ? emitted[static_cast<std::size_t>(c)] : 0;
        opt.trace(ev);
      }
    }
  }
  st.finalize();
  if (layer.encode) result.stream = encode(result.output);
  return result;
}

LayerResult simulate_layer(const FeatureMapTensor& input, const KernelSet& kernels, const LayerDescriptor& layer,
                           const LayerSchedule& schedule, const HardwareConfig& hw, const SimOptions& opt) {
  return simulate_layer(encode(input), kernels, layer, schedule, hw, opt);
}

double estimate_dram_energy(const LayerStats& stats) {
  return static_cast<double>(stats.bytes_total()) * 8.0 * kDramJoulesPerBit;
}

double dram_power_mw(double joules_per_frame, double frames_per_s) { return joules_per_frame * frames_per_s * 1e3; }

}  // namespace nullhop

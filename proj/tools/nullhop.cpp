// nullhop: command-line front end for the accelerator model.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nullhop/codec.hpp"
#include "nullhop/run.hpp"
#include "nullhop/synthetic.hpp"

namespace {

using namespace nullhop;
using json = nlohmann::ordered_json;

struct Sweep {
  double lo = 0.1, hi = 0.9, step = 0.1;
  std::vector<double> points() const {
    std::vector<double> p;
    for (int n = 0;; ++n) {
      const double s = std::round((lo + n * step) * 1e9) / 1e9;
      if (s > hi + 1e-9) break;
      p.push_back(s);
    }
    return p;
  }
};

Sweep parse_sweep(const std::string& text) {
  Sweep s;
  char c1 = 0, c2 = 0;
  std::istringstream in(text);
  if (!(in >> s.lo >> c1 >> s.hi >> c2 >> s.step) || c1 != ':' || c2 != ':' || !(s.step > 0) || s.lo > s.hi ||
      s.lo < 0 || s.hi > 1) {
    throw CLI::ValidationError("--sparsity-sweep", "expected lo:hi:step within [0, 1]");
  }
  return s;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

const char* phase_name(Phase p) {
  switch (p) {
    case Phase::kKernelLoad: return "load";
    case Phase::kPrefill: return "prefill";
    case Phase::kSteady: return "steady";
  }
  return "?";
}

int cmd_run(const std::string& net_path, const std::string& input_path, double clock_mhz,
            std::optional<double> synthetic, const std::string& report_path, const std::string& trace_path,
            std::uint64_t seed, bool verify) {
  const auto net = load_network(net_path);
  HardwareConfig hw;
  hw.clock_hz = clock_mhz * 1e6;

  FeatureMapTensor input;
  if (!input_path.empty()) {
    input = load_tensor(input_path);
  } else if (synthetic) {
    Rng rng(seed);
    const auto& l0 = net.layers.front();
    input = random_sparse_tensor(l0.input_dims(), l0.frac_in, 0.0, ValueRange{1, 255}, rng);
  } else {
    std::cerr << "error: --input is required unless --synthetic-sparsity is given\n";
    return 2;
  }

  RunOptions opt;
  opt.synthetic_sparsity = synthetic;
  opt.seed = seed;
  opt.verify = verify;
  std::unique_ptr<std::ofstream> trace;
  if (!trace_path.empty()) {
    trace = std::make_unique<std::ofstream>(trace_path);
    if (!*trace) throw std::runtime_error("cannot write " + trace_path);
    *trace << "layer pass cycle phase words_in pixels_in pixels_out\n";
    opt.trace = [out = trace.get()](const TraceEvent& e) {
      *out << e.layer << ' ' << e.pass << ' ' << e.cycle << ' ' << phase_name(e.phase) << ' ' << e.words_in << ' '
           << e.pixels_in << ' ' << e.pixels_out << '\n';
    };
  }
  const auto report = run_network(net, input, hw, opt);
  std::cout << report_text(report);
  if (!report_path.empty()) write_text(report_path, report_json(report) + "\n");
  return 0;
}

int cmd_compare(const std::string& sweep_text, int precision, int trials, const std::string& corpus_dir,
                const std::vector<int>& dims, std::uint64_t seed, const std::string& report_path) {
  json rows = json::array();
  auto row_of = [](double target, const CodecComparison& c) {
    return json{{"sparsity", target},
                {"mean_sparsity", c.mean_sparsity},
                {"sm_ratio", c.mean_sm_ratio},
                {"rl_ratio", c.mean_rl_ratio},
                {"cis_ratio", c.mean_cis_bits / c.mean_raw_bits},
                {"mean_sm_bits", c.mean_sm_bits},
                {"mean_rl_bits", c.mean_rl_bits}};
  };
  if (!corpus_dir.empty()) {
    std::vector<FeatureMapTensor> corpus;
    for (const auto& entry : std::filesystem::directory_iterator(corpus_dir)) {
      if (entry.path().extension() == ".nht") corpus.push_back(load_tensor(entry.path()));
    }
    if (corpus.empty()) throw std::runtime_error("no .nht files in " + corpus_dir);
    const auto c = compare_codecs(corpus, precision);
    rows.push_back(row_of(c.mean_sparsity, c));
  } else {
    if (trials < 1) throw CLI::ValidationError("--trials", "must be at least 1");
    const Dims d{dims.at(0), dims.at(1), dims.at(2)};
    validate_dims(d);
    std::vector<std::future<json>> jobs;
    int point = 0;
    for (double s : parse_sweep(sweep_text).points()) {
      const std::uint64_t point_seed = seed + static_cast<std::uint64_t>(point++) * 0x100000001b3ull;
      jobs.push_back(std::async(std::launch::async, [=] {
        Rng rng(point_seed);
        std::vector<FeatureMapTensor> corpus;
        corpus.reserve(static_cast<std::size_t>(trials));
        for (int t = 0; t < trials; ++t) {
          corpus.push_back(random_sparse_tensor(d, 8, s, ValueRange{-32768, 32767}, rng));
        }
        return row_of(s, compare_codecs(corpus, precision));
      }));
    }
    for (auto& j : jobs) rows.push_back(j.get());
  }
  std::printf("%-10s %-12s %-12s %-12s\n", "sparsity", "sm_ratio", "rl_ratio", "cis_ratio");
  for (const auto& r : rows) {
    std::printf("%-10s %-12s %-12s %-12s\n", r["sparsity"].dump().c_str(), r["sm_ratio"].dump().c_str(),
                r["rl_ratio"].dump().c_str(), r["cis_ratio"].dump().c_str());
  }
  if (!report_path.empty()) write_text(report_path, json{{"precision", precision}, {"points", rows}}.dump(2) + "\n");
  return 0;
}

int cmd_selfcheck(std::uint64_t seed, int trials, int fault) {
  if (trials == 0) {
    std::cerr << "warning: trials=0, nothing checked\n";
    std::cout << "selfcheck: 0 trials, pass\n";
    return 0;
  }
  SelfCheckOptions opt;
  opt.seed = seed;
  opt.trials = trials;
  opt.fault_pad_offset = fault;
  const auto r = selfcheck(opt);
  std::cout << "layer equivalence: " << r.layer_passed << "/" << r.trials << " passed\n";
  std::cout << "codec roundtrip:   " << r.codec_passed << "/" << r.trials << " passed\n";
  if (!r.ok()) {
    std::cout << "first failure: " << r.failures.front() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NullHop sparse CNN accelerator model"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "simulate a network and report performance");
  std::string net_path, input_path, report_path, trace_path;
  double clock_mhz = 500.0;
  std::optional<double> synthetic;
  std::uint64_t seed = 1;
  bool verify = false;
  run->add_option("--net", net_path, "network descriptor (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--input", input_path, "input tensor (.nht)")->check(CLI::ExistingFile);
  run->add_option("--clock-mhz", clock_mhz, "clock frequency")->check(CLI::PositiveNumber)->capture_default_str();
  run->add_option("--synthetic-sparsity", synthetic, "calibrate random kernels to this output sparsity")
      ->check(CLI::Range(0.0, 1.0));
  run->add_option("--report", report_path, "write the JSON report here");
  run->add_option("--trace", trace_path, "write a per-cycle trace here");
  run->add_option("--seed", seed, "seed for synthetic data")->capture_default_str();
  run->add_flag("--verify", verify, "check every layer against the dense reference");

  std::string in_path, out_path;
  auto* enc = app.add_subcommand("encode", "compress a tensor (.nht -> .nhc)");
  enc->add_option("--in", in_path)->required()->check(CLI::ExistingFile);
  enc->add_option("--out", out_path)->required();
  auto* dec = app.add_subcommand("decode", "decompress a stream (.nhc -> .nht)");
  dec->add_option("--in", in_path)->required()->check(CLI::ExistingFile);
  dec->add_option("--out", out_path)->required();

  auto* cmp = app.add_subcommand("compare-codecs", "sparsity map vs run-length sizes");
  std::string sweep = "0.1:0.9:0.1", corpus_dir;
  int precision = 16, trials = 10000;
  std::vector<int> dims{16, 8, 8};
  cmp->add_option("--sparsity-sweep", sweep, "lo:hi:step")->capture_default_str();
  cmp->add_option("--precision", precision, "bits per value")->check(CLI::Range(1, 32))->capture_default_str();
  cmp->add_option("--trials", trials, "tensors per sweep point")->capture_default_str();
  cmp->add_option("--corpus", corpus_dir, "directory of .nht tensors instead of a synthetic sweep")
      ->check(CLI::ExistingDirectory);
  cmp->add_option("--dims", dims, "synthetic tensor C H W")->expected(3)->capture_default_str();
  cmp->add_option("--seed", seed)->capture_default_str();
  cmp->add_option("--report", report_path, "write the table as JSON here");

  auto* chk = app.add_subcommand("selfcheck", "randomized oracle and codec checks");
  int chk_trials = 100, fault = 0;
  chk->add_option("--seed", seed)->capture_default_str();
  chk->add_option("--trials", chk_trials)->check(CLI::NonNegativeNumber)->capture_default_str();
  chk->add_option("--fault-pad-offset", fault, "inject a padding fault (mutation test)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(net_path, input_path, clock_mhz, synthetic, report_path, trace_path, seed, verify);
    if (*enc) {
      save_stream(out_path, encode(load_tensor(in_path)));
      return 0;
    }
    if (*dec) {
      save_tensor(out_path, decode(load_stream(in_path)));
      return 0;
    }
    if (*cmp) return cmd_compare(sweep, precision, trials, corpus_dir, dims, seed, report_path);
    if (*chk) return cmd_selfcheck(seed, chk_trials, fault);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

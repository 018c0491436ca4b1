#include <gtest/gtest.h>

#include <json.hpp>

#include "nullhop/codec.hpp"
#include "nullhop/run.hpp"

#ifndef NULLHOP_DATA_DIR
#define NULLHOP_DATA_DIR "data"
#endif

using namespace nullhop;

namespace {

NetworkDescriptor net(const std::string& name) {
  return load_network(std::string(NULLHOP_DATA_DIR) + "/networks/" + name + ".json");
}

RunReport synthetic(const NetworkDescriptor& n, std::uint64_t seed = 1, bool verify = true) {
  Rng rng(seed);
  const auto& l0 = n.layers.front();
  const auto img = random_sparse_tensor(l0.input_dims(), l0.frac_in, 0.0, ValueRange{1, 255}, rng);
  RunOptions opt;
  opt.synthetic_sparsity = 0.82;
  opt.seed = seed;
  opt.verify = verify;
  return run_network(n, img, HardwareConfig{}, opt);
}

}  // namespace

TEST(RunTest, RoshamboTotalsAddUp) {
  const auto r = synthetic(net("roshambonet"));
  ASSERT_EQ(r.layers.size(), 5u);
  EXPECT_NEAR(r.gop_per_frame, 0.018, 0.0005);
  std::uint64_t cycles = 0, bytes = 0, macs = 0;
  for (const auto& l : r.layers) {
    cycles += l.stats.cycles_total;
    bytes += l.stats.bytes_total();
    macs += l.stats.dense_macs;
  }
  EXPECT_EQ(r.totals.cycles_total, cycles);
  EXPECT_EQ(r.bytes_per_frame, bytes);
  EXPECT_DOUBLE_EQ(r.gop_per_frame, 2.0 * static_cast<double>(macs) / 1e9);
  EXPECT_DOUBLE_EQ(r.ms_per_frame, static_cast<double>(cycles) / 500e6 * 1e3);
  EXPECT_DOUBLE_EQ(r.efficiency, r.gop_per_s / 128.0);
  EXPECT_EQ(r.output.size(), 4u);
}

TEST(RunTest, SyntheticSparsityIsNearTarget) {
  const auto r = synthetic(net("giga1net"), 2, false);
  for (std::size_t n = 0; n < r.layers.size(); ++n) {
    EXPECT_NEAR(r.layers[n].output_sparsity, 0.82, 0.08) << "layer " << n;
  }
}

TEST(RunTest, GopPerFrameIgnoresSparsity) {
  const auto n = net("facedet");
  EXPECT_DOUBLE_EQ(synthetic(n, 1).gop_per_frame, synthetic(n, 9).gop_per_frame);
}

TEST(RunTest, IdentityLayer) {
  const auto n = parse_network(R"({"name":"id","layers":[{"n_in":4,"n_out":4,"k":1,"h":6,"w":6}]})");
  Rng rng(3);
  const auto img = random_sparse_tensor(Dims{4, 6, 6}, 8, 0.2, ValueRange{-100, 100}, rng);
  KernelSet k(4, 4, 1, QFormat{8});
  for (int j = 0; j < 4; ++j) k.at(j, j, 0, 0) = 256;
  const auto path = std::filesystem::temp_directory_path() / "nullhop_identity.nhw";
  save_weights(path, k);
  auto withw = n;
  withw.layers[0].weights = path;
  const auto r = run_network(withw, img, HardwareConfig{});
  auto relu = img;
  for (auto& v : relu.values()) v = std::max<std::int16_t>(v, 0);
  EXPECT_EQ(r.output, std::vector<std::int16_t>(relu.values().begin(), relu.values().end()));
  EXPECT_LE(r.efficiency, 1.0);
}

TEST(RunTest, MissingWeightsWithoutSyntheticMode) {
  const auto n = net("facedet");
  FeatureMapTensor img(n.layers[0].input_dims(), QFormat{8});
  EXPECT_THROW(run_network(n, img, HardwareConfig{}), NetworkError);
  FeatureMapTensor wrong(Dims{2, 36, 36}, QFormat{8});
  EXPECT_THROW(run_network(n, wrong, HardwareConfig{}), NetworkError);
}

TEST(ReportTest, TextAndJsonCarryTheSameNumbers) {
  const auto r = synthetic(net("facedet"), 4, false);
  const auto doc = nlohmann::json::parse(report_json(r));
  const auto text = report_text(r);
  for (const auto& [key, val] : doc["totals"].items()) {
    if (key == "stats") continue;
    EXPECT_NE(text.find(key + "=" + val.dump()), std::string::npos) << key;
  }
  for (const auto& layer : doc["layers"])
    for (const auto& [key, val] : layer.items()) {
      if (key == "index") continue;
      EXPECT_NE(text.find(key + "=" + val.dump()), std::string::npos) << key;
    }
  EXPECT_EQ(doc["totals"]["stats"]["cycles_total"].get<std::uint64_t>(), r.totals.cycles_total);
}

TEST(SelfCheckTest, PassesAndCatchesFaults) {
  SelfCheckOptions opt;
  opt.seed = 1;
  opt.trials = 100;
  const auto ok = selfcheck(opt);
  EXPECT_TRUE(ok.ok()) << (ok.failures.empty() ? "" : ok.failures.front());
  EXPECT_EQ(ok.layer_passed, 100);
  EXPECT_EQ(ok.codec_passed, 100);

  opt.trials = 10;
  opt.fault_pad_offset = 1;
  const auto bad = selfcheck(opt);
  ASSERT_FALSE(bad.ok());
  EXPECT_NE(bad.failures.front().find("n_in="), std::string::npos);

  opt.trials = 0;
  EXPECT_TRUE(selfcheck(opt).ok());
}

TEST(RandomCaseTest, StaysInsideTheTestSpace) {
  for (std::uint64_t s = 0; s < 500; ++s) {
    const auto c = random_layer_case(s);
    EXPECT_NO_THROW(c.layer.validate());
    EXPECT_TRUE(c.layer.k == 1 || c.layer.k == 3 || c.layer.k == 5 || c.layer.k == 7);
    EXPECT_GE(c.layer.n_out, 5);
    EXPECT_LE(c.layer.n_out, 256);
    EXPECT_LE(c.layer.n_in, 128);
    EXPECT_LE(std::max(c.layer.h, c.layer.w), 32);
  }
}

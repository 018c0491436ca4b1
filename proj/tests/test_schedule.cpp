#include <gtest/gtest.h>

#include "nullhop/network.hpp"
#include "nullhop/schedule.hpp"

#ifndef NULLHOP_DATA_DIR
#define NULLHOP_DATA_DIR "data"
#endif

using namespace nullhop;

namespace {

LayerDescriptor layer(int n_in, int n_out, int k, int hw = 28) {
  LayerDescriptor l;
  l.n_in = n_in;
  l.n_out = n_out;
  l.k = k;
  l.h = l.w = hw;
  l.pad = k / 2;
  return l;
}

}  // namespace

TEST(PlanTest, OneChannelPerMac) {
  const auto s = plan_layer(layer(64, 128, 3), HardwareConfig{});
  ASSERT_EQ(s.pass_count(), 1);
  EXPECT_EQ(s.passes[0].cluster_size, 1);
  EXPECT_EQ(s.passes[0].channel_count, 128);
  EXPECT_EQ(s.passes[0].macs_used(), 128);
}

TEST(PlanTest, MorePassesForWideLayers) {
  const auto s = plan_layer(layer(128, 256, 3), HardwareConfig{});
  ASSERT_EQ(s.pass_count(), 2);
  EXPECT_EQ(s.passes[0].channel_count, 128);
  EXPECT_EQ(s.passes[1].first_channel, 128);
  EXPECT_EQ(s.passes[1].channel_count, 128);

  const auto odd = plan_layer(layer(16, 200, 3), HardwareConfig{});
  ASSERT_EQ(odd.pass_count(), 2);
  EXPECT_EQ(odd.passes[0].channel_count, 100);
  EXPECT_EQ(odd.passes[1].channel_count, 100);
}

TEST(PlanTest, ClustersForFewOutputs) {
  const auto s = plan_layer(layer(3, 16, 1, 224), HardwareConfig{});
  ASSERT_EQ(s.pass_count(), 1);
  EXPECT_EQ(s.passes[0].cluster_size, 8);
  EXPECT_EQ(s.passes[0].active_controllers, 8);
  EXPECT_EQ(plan_layer(layer(16, 64, 3), HardwareConfig{}).passes[0].cluster_size, 2);
  EXPECT_EQ(plan_layer(layer(16, 5, 3), HardwareConfig{}).passes[0].cluster_size, 8);
}

TEST(PlanTest, SplitsKernelsThatOverflowABank) {
  const auto s = plan_layer(layer(512, 512, 3), HardwareConfig{});
  EXPECT_EQ(s.min_cluster, 2);
  ASSERT_EQ(s.pass_count(), 8);
  for (const auto& p : s.passes) {
    EXPECT_EQ(p.cluster_size, 2);
    EXPECT_EQ(p.channel_count, 64);
    for (const auto& b : p.banks) EXPECT_EQ(b.values, 256 * 9);
  }
}

TEST(PlanTest, BanksFollowChannelPartition) {
  const auto s = plan_layer(layer(5, 16, 3), HardwareConfig{});
  const auto& p = s.passes[0];
  ASSERT_EQ(p.banks.size(), 128u);
  for (const auto& b : p.banks) {
    // member m holds input channels m, m+8, ...; only 5 exist
    EXPECT_EQ(b.values, b.member < 5 ? 9 : 0);
  }
}

TEST(PlanTest, ReloadOnlyWhenInputOverflowsPixelMemory) {
  const HardwareConfig hw;
  auto s = plan_layer(layer(128, 256, 3), hw, hw.pixel_mem_bytes + 4);
  EXPECT_FALSE(s.passes[0].reload_input);
  EXPECT_TRUE(s.passes[1].reload_input);
  s = plan_layer(layer(128, 256, 3), hw, hw.pixel_mem_bytes);
  EXPECT_FALSE(s.passes[1].reload_input);
  EXPECT_FALSE(plan_layer(layer(128, 128, 3), hw, 10 * hw.pixel_mem_bytes).passes[0].reload_input);
}

TEST(PlanTest, Limits) {
  EXPECT_THROW(plan_layer(layer(3, 8, 9), HardwareConfig{}), std::invalid_argument);
  HardwareConfig tiny;
  tiny.kernel_bank_values = 16;
  EXPECT_THROW(plan_layer(layer(3, 8, 5), tiny), std::invalid_argument);
  HardwareConfig bad;
  bad.controllers = 7;
  EXPECT_THROW(plan_layer(layer(3, 8, 3), bad), std::invalid_argument);
}

TEST(PlanTest, ValidatorCatchesBrokenPlans) {
  const auto l = layer(64, 256, 3);
  const HardwareConfig hw;
  auto s = plan_layer(l, hw);
  EXPECT_NO_THROW(validate_schedule(s, l, hw));
  auto gap = s;
  gap.passes[1].first_channel += 1;
  EXPECT_THROW(validate_schedule(gap, l, hw), std::logic_error);
  auto fat = s;
  fat.passes[0].cluster_size = 2;
  EXPECT_THROW(validate_schedule(fat, l, hw), std::logic_error);
  auto missing = s;
  missing.passes.pop_back();
  EXPECT_THROW(validate_schedule(missing, l, hw), std::logic_error);
}

TEST(PlanTest, VggShapes) {
  const auto net = load_network(std::string(NULLHOP_DATA_DIR) + "/networks/vgg19.json");
  const HardwareConfig hw;
  for (const auto& l : net.layers) {
    const auto s = plan_layer(l, hw);
    EXPECT_NO_THROW(validate_schedule(s, l, hw));
    if (l.n_in == 512) {
      EXPECT_EQ(s.passes[0].cluster_size, 2);
      EXPECT_EQ(s.passes[0].channel_count, 64);
    } else if (l.n_out == 256) {
      EXPECT_EQ(s.pass_count(), 2);
    }
    EXPECT_EQ(plan_layer(l, hw).passes.size(), s.passes.size());
  }
}

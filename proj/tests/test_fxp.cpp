#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "nullhop/fxp.hpp"
#include "oracle.hpp"

using namespace nullhop;

TEST(QFormatTest, RejectsOutOfRange) {
  EXPECT_THROW(QFormat(-1), std::invalid_argument);
  EXPECT_THROW(QFormat(16), std::invalid_argument);
  EXPECT_EQ(QFormat(15).frac_bits(), 15);
}

TEST(QuantizeTest, Examples) {
  EXPECT_EQ(quantize(0.0, QFormat{8}).raw, 0);
  EXPECT_EQ(quantize(1.0, QFormat{8}).raw, 256);
  EXPECT_EQ(quantize(200.0, QFormat{8}).raw, 32767);
  EXPECT_EQ(quantize(-200.0, QFormat{8}).raw, -32768);
}

TEST(QuantizeTest, TiesGoToEven) {
  EXPECT_EQ(quantize(0.5, QFormat{0}).raw, 0);
  EXPECT_EQ(quantize(1.5, QFormat{0}).raw, 2);
  EXPECT_EQ(quantize(-2.5, QFormat{0}).raw, -2);
}

TEST(QuantizeTest, NonFiniteThrows) {
  EXPECT_THROW(quantize(std::nan(""), QFormat{8}), std::invalid_argument);
  EXPECT_THROW(quantize(std::numeric_limits<double>::infinity(), QFormat{8}), std::invalid_argument);
}

TEST(QuantizeTest, MonotoneAndInvertible) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-150.0, 150.0);
  for (int n = 0; n < 5000; ++n) {
    double a = d(rng), b = d(rng);
    if (a > b) std::swap(a, b);
    EXPECT_LE(quantize(a, QFormat{8}).raw, quantize(b, QFormat{8}).raw);
  }
  for (int raw = -32768; raw <= 32767; raw += 97) {
    const Fx16 v{static_cast<std::int16_t>(raw)};
    EXPECT_EQ(quantize(to_double(v, QFormat{7}), QFormat{7}), v);
  }
}

TEST(MacTest, Examples) {
  EXPECT_EQ(mac(Fx32{0}, Fx16{0}, Fx16{32767}).raw, 0);
  EXPECT_EQ(mac(Fx32{10}, Fx16{2}, Fx16{3}).raw, 16);
  EXPECT_EQ(mac(Fx32{kInt32Max}, Fx16{32767}, Fx16{32767}).raw, kInt32Max);
  EXPECT_EQ(mac(Fx32{kInt32Min}, Fx16{-32768}, Fx16{32767}).raw, kInt32Min);
}

TEST(MacTest, MatchesWideReference) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::int32_t> acc(kInt32Min, kInt32Max);
  std::uniform_int_distribution<int> op(-32768, 32767);
  for (int n = 0; n < 20000; ++n) {
    const std::int32_t a = acc(rng);
    const int x = op(rng), y = op(rng);
    const std::int64_t exact = std::int64_t{a} + std::int64_t{x} * y;
    EXPECT_EQ(mac(Fx32{a}, Fx16{static_cast<std::int16_t>(x)}, Fx16{static_cast<std::int16_t>(y)}).raw,
              oracle::clamp64(exact, kInt32Min, kInt32Max));
  }
}

TEST(RequantizeTest, Examples) {
  EXPECT_EQ(requantize(Fx32{0}, 16, QFormat{8}).raw, 0);
  EXPECT_EQ(requantize(Fx32{256}, 8, QFormat{8}).raw, 256);
  EXPECT_EQ(requantize(Fx32{384}, 9, QFormat{8}).raw, 192);
  EXPECT_EQ(requantize(Fx32{3}, 0, QFormat{4}).raw, 48);
  EXPECT_EQ(requantize(Fx32{kInt32Max}, 8, QFormat{8}).raw, kInt16Max);
}

TEST(RequantizeTest, MatchesIntegerDivisionOracle) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::int32_t> acc(kInt32Min, kInt32Max);
  std::uniform_int_distribution<int> frac_in(0, 30);
  std::uniform_int_distribution<int> frac_out(0, 15);
  for (int n = 0; n < 20000; ++n) {
    const std::int32_t a = acc(rng) >> (n % 24);
    const int fi = frac_in(rng), fo = frac_out(rng);
    const auto want = oracle::clamp64(oracle::div_pow2_rne(a, fi - fo), kInt16Min, kInt16Max);
    ASSERT_EQ(requantize(Fx32{a}, fi, QFormat{fo}).raw, want) << a << " " << fi << " " << fo;
  }
}

TEST(ReluTest, Examples) {
  EXPECT_EQ(relu16(Fx16{-5}).raw, 0);
  EXPECT_EQ(relu16(Fx16{0}).raw, 0);
  EXPECT_EQ(relu16(Fx16{123}).raw, 123);
}

#include <gtest/gtest.h>

#include <random>

#include "nullhop/codec.hpp"
#include "nullhop/synthetic.hpp"
#include "oracle.hpp"

using namespace nullhop;

namespace {

std::vector<std::uint16_t> fields_of(const CompressedStream& s) {
  std::vector<std::uint16_t> f;
  for (std::size_t n = 0; n < s.field_count(); ++n) f.push_back(s.field(n));
  return f;
}

}  // namespace

TEST(EncodeTest, AllZeroFourByFour) {
  FeatureMapTensor t(1, 4, 4, QFormat{8});
  const auto s = encode(t);
  // One segment per row, each row aligned to a field.
  EXPECT_EQ(fields_of(s), (std::vector<std::uint16_t>(4, 0)));
  EXPECT_EQ(s.words.size(), 2u);
  EXPECT_FALSE(s.trailing_pad);
}

TEST(EncodeTest, SingleNonZeroAtStart) {
  FeatureMapTensor t(1, 1, 16, QFormat{8});
  t(0, 0, 0) = 5;
  const auto s = encode(t);
  ASSERT_EQ(s.words.size(), 1u);
  EXPECT_EQ(s.words[0], 0x00050001u);
  EXPECT_EQ(decode(s), t);
}

TEST(EncodeTest, ZeroRowOfThirtyTwo) {
  FeatureMapTensor t(1, 1, 32, QFormat{8});
  const auto s = encode(t);
  EXPECT_EQ(fields_of(s), (std::vector<std::uint16_t>{0, 0}));
}

TEST(EncodeTest, OddFieldCountIsPadded) {
  FeatureMapTensor t(1, 1, 16, QFormat{8});
  const auto s = encode(t);
  EXPECT_EQ(s.words.size(), 1u);
  EXPECT_TRUE(s.trailing_pad);
  EXPECT_EQ(s.field_count(), 1u);
}

TEST(EncodeTest, MatchesBitByBitOracle) {
  Rng rng(10);
  std::uniform_int_distribution<int> ch(1, 40), sp(1, 20);
  std::uniform_real_distribution<double> spars(0.0, 1.0);
  for (int n = 0; n < 500; ++n) {
    const auto t = random_sparse_tensor(Dims{ch(rng), sp(rng), sp(rng)}, 8, spars(rng), ValueRange{-32768, 32767}, rng);
    ASSERT_EQ(fields_of(encode(t)), oracle::sm_fields(t));
  }
}

TEST(EncodeTest, StreamEncoderRequiresAllRows) {
  StreamEncoder enc(Dims{1, 2, 4}, 8);
  std::vector<std::int16_t> row(4, 1);
  enc.push_row(row);
  EXPECT_THROW(std::move(enc).finish(), std::logic_error);
  StreamEncoder enc2(Dims{1, 2, 4}, 8);
  EXPECT_THROW(enc2.push_row(std::vector<std::int16_t>(3, 1)), std::invalid_argument);
}

TEST(DecodeTest, RoundtripProperty) {
  Rng rng(11);
  std::uniform_int_distribution<int> ch(1, 64), sp(1, 24);
  std::uniform_real_distribution<double> spars(0.0, 1.0);
  for (int n = 0; n < 10000; ++n) {
    const auto t = random_sparse_tensor(Dims{ch(rng), sp(rng), sp(rng)}, n % 16, spars(rng), ValueRange{-32768, 32767}, rng);
    const auto s = encode(t);
    ASSERT_EQ(decode(s), t);
    ASSERT_EQ(s.bits(), sm_bits(t));
    ASSERT_GE(s.bits(), cis_bits_exact(t.size(), 16, count_nonzero(t)));
    ASSERT_LE(s.bits(), cis_bits_exact(t.size(), 16, count_nonzero(t)) + 16u * t.height() + 32u);
  }
}

TEST(DecodeTest, TruncatedStream) {
  FeatureMapTensor t(1, 1, 16, QFormat{8});
  t(0, 0, 0) = 1;
  t(0, 1, 0) = 2;
  t(0, 2, 0) = 3;
  auto s = encode(t);
  s.words.resize(1);  // SM promises three values, one arrives
  s.trailing_pad = false;
  try {
    decode(s);
    FAIL() << "expected CodecError";
  } catch (const CodecError& e) {
    EXPECT_EQ(e.kind(), CodecErrorKind::kTruncated);
  }
}

TEST(DecodeTest, ZeroValueFieldIsCountMismatch) {
  FeatureMapTensor t(1, 1, 16, QFormat{8});
  t(0, 0, 0) = 7;
  auto s = encode(t);
  s.words[0] = 0x00000001u;
  try {
    decode(s);
    FAIL() << "expected CodecError";
  } catch (const CodecError& e) {
    EXPECT_EQ(e.kind(), CodecErrorKind::kCountMismatch);
  }
}

TEST(DecodeTest, SegmentBitsPastRowEnd) {
  FeatureMapTensor t(1, 1, 4, QFormat{8});
  auto s = encode(t);
  s.words[0] = 0x00010010u;  // bit 4 of a 4-pixel row
  EXPECT_THROW(decode(s), CodecError);
}

TEST(DecodeTest, TrailingGarbage) {
  FeatureMapTensor t(1, 1, 16, QFormat{8});
  auto s = encode(t);
  s.words.push_back(0);
  EXPECT_THROW(decode(s), CodecError);
}

TEST(DecodeTest, StreamDecoderYieldsNonZerosInOrder) {
  Rng rng(12);
  const auto t = random_sparse_tensor(Dims{3, 5, 4}, 8, 0.6, ValueRange{-50, 50}, rng);
  const auto s = encode(t);
  StreamDecoder dec(s);
  std::vector<PixelRef> want;
  for (const auto& p : stream_order(t))
    if (p.value != 0) want.push_back(p);
  std::vector<PixelRef> got;
  while (auto p = dec.next()) got.push_back(*p);
  EXPECT_EQ(got, want);
}

TEST(DecodeTest, RowOffsetsPointAtRowStarts) {
  Rng rng(13);
  const auto t = random_sparse_tensor(Dims{5, 6, 7}, 8, 0.5, ValueRange{1, 9}, rng);
  const auto s = encode(t);
  const auto rows = row_offsets(s);
  ASSERT_EQ(rows.size(), 6u);
  std::size_t f = 0;
  for (int y = 0; y < 6; ++y) {
    EXPECT_EQ(rows[static_cast<std::size_t>(y)], f);
    FeatureMapTensor one(Dims{5, 1, 7}, 8);
    for (int x = 0; x < 7; ++x)
      for (int i = 0; i < 5; ++i) one(i, x, 0) = t(i, x, y);
    f += oracle::sm_fields(one).size();
  }
}

TEST(FilesTest, StreamRoundtrip) {
  Rng rng(14);
  const auto t = random_sparse_tensor(Dims{4, 3, 3}, 6, 0.5, ValueRange{-100, 100}, rng);
  const auto s = encode(t);
  EXPECT_EQ(deserialize_stream(serialize_stream(s)), s);
  auto bytes = serialize_stream(s);
  bytes[0] = 'X';
  EXPECT_THROW(deserialize_stream(bytes), std::runtime_error);
}

TEST(SizeTest, CisExamples) {
  EXPECT_EQ(cis_bits(100, 16, 1.0), 100u);
  EXPECT_EQ(cis_bits(100, 8, 1.0), 100u);
  EXPECT_EQ(cis_bits(16, 16, 0.0), 272u);
  EXPECT_EQ(cis_bits(1000, 16, 0.0625), 16000u);
  EXPECT_EQ(cis_bits_exact(16, 16, 16), 272u);
}

TEST(SizeTest, ThresholdTable) {
  EXPECT_DOUBLE_EQ(threshold_sparsity(8), 0.125);
  EXPECT_DOUBLE_EQ(threshold_sparsity(12), 1.0 / 12.0);
  EXPECT_DOUBLE_EQ(threshold_sparsity(16), 0.0625);
  EXPECT_DOUBLE_EQ(threshold_sparsity(24), 1.0 / 24.0);
  EXPECT_DOUBLE_EQ(threshold_sparsity(32), 0.03125);
  // Break-even: at the threshold the predicted size equals the raw size.
  for (int n : {8, 12, 16, 24, 32}) EXPECT_EQ(cis_bits(96000, n, threshold_sparsity(n)), 96000u * n);
}

TEST(RunLengthTest, Examples) {
  FeatureMapTensor dense(1, 1, 16, QFormat{8});
  for (auto& v : dense.values()) v = 1;
  EXPECT_EQ(rl_encode(dense).size(), 16u);
  EXPECT_EQ(rl_bits(dense), 336u);

  FeatureMapTensor zeros(1, 1, 31, QFormat{8});
  EXPECT_EQ(rl_bits(zeros), 21u);

  FeatureMapTensor one(1, 1, 16, QFormat{8});
  one(0, 0, 0) = 9;
  const auto pairs = rl_encode(one);
  ASSERT_EQ(pairs.size(), 2u);
  EXPECT_EQ(pairs[0].run, 0);
  EXPECT_EQ(pairs[0].value, 9);
  EXPECT_EQ(pairs[1].run, 14);
  EXPECT_EQ(pairs[1].value, 0);
  EXPECT_EQ(rl_bits(one), 42u);
}

TEST(RunLengthTest, RoundtripProperty) {
  Rng rng(15);
  std::uniform_real_distribution<double> spars(0.0, 1.0);
  for (int n = 0; n < 2000; ++n) {
    const auto t = random_sparse_tensor(Dims{8, 4, 9}, 8, spars(rng), ValueRange{-500, 500}, rng);
    ASSERT_EQ(rl_decode(rl_encode(t), t.dims(), 8), t);
  }
}

TEST(CompareTest, SweepShape) {
  Rng rng(16);
  auto corpus_at = [&](double s) {
    std::vector<FeatureMapTensor> c;
    for (int n = 0; n < 1000; ++n) c.push_back(random_sparse_tensor(Dims{16, 4, 4}, 8, s, ValueRange{-99, 99}, rng));
    return compare_codecs(c);
  };
  const auto half = corpus_at(0.5);
  EXPECT_NEAR(half.mean_sm_ratio, 9.0 / 16.0, 0.01);
  EXPECT_GT(corpus_at(0.0).mean_rl_ratio, 1.0);
  EXPECT_GT(corpus_at(0.0).mean_sm_ratio, 1.0);
  EXPECT_GT(corpus_at(0.03).mean_sm_ratio, 1.0);
  EXPECT_NEAR(corpus_at(0.9).mean_sm_ratio, 2.6 / 16.0, 0.005);
  EXPECT_THROW(compare_codecs(std::span<const FeatureMapTensor>{}), std::invalid_argument);
}

// Sparsity-map (SM) compression of feature maps.
//
// Wire format: a sequence of 16-bit fields packed two per 32-bit word, low
// field first. Pixels are taken in canonical stream order and grouped in
// runs of 16; each group is announced by an SM segment whose bit b (LSB
// first) is set when the b-th pixel of the group is non-zero, followed by
// the non-zero values of the group. An all-zero segment is followed directly
// by the next segment. Every image row starts a fresh segment at a field
// boundary, so a row pointer is just a field index; a row whose pixel count
// is not a multiple of 16 ends with a short segment whose unused high bits
// are zero. If the final field count is odd the last word carries one zero
// padding field, recorded in `trailing_pad`.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nullhop/tensor.hpp"

namespace nullhop {

inline constexpr int kSegmentBits = 16;

struct CompressedStream {
  Dims dims{};
  int frac_bits = 0;
  std::vector<std::uint32_t> words;
  bool trailing_pad = false;

  std::size_t field_count() const { return words.size() * 2 - (trailing_pad ? 1 : 0); }
  std::uint16_t field(std::size_t f) const {
    const std::uint32_t w = words[f / 2];
    return static_cast<std::uint16_t>((f % 2 == 0) ? (w & 0xffffu) : (w >> 16));
  }
  /// Size on the 32-bit bus.
  std::size_t bits() const { return words.size() * 32; }
  std::size_t bytes() const { return words.size() * 4; }

  friend bool operator==(const CompressedStream&, const CompressedStream&) = default;
};

enum class CodecErrorKind { kTruncated, kCountMismatch, kOverrun, kBadHeader };

class CodecError : public std::runtime_error {
 public:
  CodecError(CodecErrorKind kind, std::size_t word_offset, const std::string& what);
  CodecErrorKind kind() const { return kind_; }
  std::size_t word_offset() const { return word_offset_; }

 private:
  CodecErrorKind kind_;
  std::size_t word_offset_;
};

/// Incremental encoder; rows must be pushed top to bottom.
class StreamEncoder {
 public:
  StreamEncoder(Dims dims, int frac_bits);

  void push_row(std::span<const std::int16_t> row);
  std::size_t rows_pushed() const { return rows_; }
  /// Packs the fields into words. Requires every row to have been pushed.
  CompressedStream finish() &&;

 private:
  Dims dims_;
  int frac_bits_;
  std::size_t rows_ = 0;
  std::vector<std::uint16_t> fields_;
};

CompressedStream encode(const FeatureMapTensor& t);

/// A non-zero pixel located by its offset within a row (channel fastest).
struct RowPixel {
  std::size_t offset;
  std::int16_t value;
};

/// Walks the fields of one encoded row, one SM segment at a time, yielding
/// only non-zero pixels. Never materializes the dense row.
class RowReader {
 public:
  RowReader(const CompressedStream& s, std::size_t start_field, std::size_t row_pixels);

  /// Next non-zero pixel, or nullopt when the row is exhausted.
  std::optional<RowPixel> next();
  /// Field index one past the last field consumed so far.
  std::size_t cursor() const { return cursor_; }
  /// Number of fields read so far (segments plus values).
  std::size_t fields_read() const { return cursor_ - start_; }

 private:
  std::uint16_t read_field(const char* what);

  const CompressedStream* s_;
  std::size_t start_;
  std::size_t cursor_;
  std::size_t row_pixels_;
  std::size_t group_base_ = 0;
  std::uint32_t mask_ = 0;
  bool started_ = false;
};

/// Field index at which each row begins, found by walking the segments
/// the way the input tracker records them while the stream is stored.
std::vector<std::size_t> row_offsets(const CompressedStream& s);

/// Sequential decoder over the whole stream, yielding non-zero pixels with
/// their coordinates in stream order.
class StreamDecoder {
 public:
  explicit StreamDecoder(const CompressedStream& s);
  std::optional<PixelRef> next();

 private:
  const CompressedStream* s_;
  int row_ = 0;
  std::optional<RowReader> reader_;
  bool done_ = false;
};

FeatureMapTensor decode(const CompressedStream& s);

// .nhc file: "NHC1" u16 C, u16 H, u16 W, u8 frac, u32 word count,
// u8 trailing-pad flag, then the words (all little-endian).
std::vector<std::uint8_t> serialize_stream(const CompressedStream& s);
CompressedStream deserialize_stream(const std::vector<std::uint8_t>& bytes);
void save_stream(const std::filesystem::path& path, const CompressedStream& s);
CompressedStream load_stream(const std::filesystem::path& path);

// ---- size analytics ----

/// Predicted compressed size E(1 + N(1 - S_p)) in bits, rounded up.
std::uint64_t cis_bits(std::uint64_t pixels, int precision, double sparsity);
/// Same quantity from an exact non-zero count: E + N * nnz.
std::uint64_t cis_bits_exact(std::uint64_t pixels, int precision, std::uint64_t nonzeros);

/// Minimum sparsity at which SM compression shrinks N-bit data: 1/N.
double threshold_sparsity(int precision);

/// Bus size of the SM encoding with N-bit segments and values, rows aligned
/// to field boundaries, rounded up to a whole 32-bit word. Equals
/// encode(t).bits() for N = 16.
std::uint64_t sm_bits(const FeatureMapTensor& t, int precision = kSegmentBits);

// ---- run-length baseline ----

/// One (zero-run, value) pair: `run` zeros followed by `value`. A pair with
/// value 0 therefore covers run + 1 zeros.
struct RlPair {
  std::uint8_t run;
  std::int16_t value;
  friend bool operator==(const RlPair&, const RlPair&) = default;
};

inline constexpr int kRlRunBits = 5;
inline constexpr int kRlMaxRun = (1 << kRlRunBits) - 1;

std::vector<RlPair> rl_encode(const FeatureMapTensor& t);
FeatureMapTensor rl_decode(const std::vector<RlPair>& pairs, Dims dims, int frac_bits);
/// Pairs times (5 + N) bits.
std::uint64_t rl_bits(const FeatureMapTensor& t, int precision = kSegmentBits);

struct CompressionReport {
  std::uint64_t pixels = 0;
  std::uint64_t rows = 0;
  std::uint64_t raw_bits = 0;
  std::uint64_t sm_bits = 0;
  std::uint64_t cis_bits = 0;
  std::uint64_t rl_bits = 0;
  double sparsity = 0.0;

  double sm_ratio() const { return static_cast<double>(sm_bits) / static_cast<double>(raw_bits); }
  double rl_ratio() const { return static_cast<double>(rl_bits) / static_cast<double>(raw_bits); }
};

CompressionReport compression_report(const FeatureMapTensor& t, int precision = kSegmentBits);

struct CodecComparison {
  std::vector<CompressionReport> items;
  double mean_sparsity = 0.0;
  double mean_raw_bits = 0.0;
  double mean_sm_bits = 0.0;
  double mean_cis_bits = 0.0;
  double mean_rl_bits = 0.0;
  double mean_sm_ratio = 0.0;
  double mean_rl_ratio = 0.0;
};

/// Per-tensor sizes and corpus means. Throws on an empty corpus.
CodecComparison compare_codecs(std::span<const FeatureMapTensor> corpus, int precision = kSegmentBits);

}  // namespace nullhop

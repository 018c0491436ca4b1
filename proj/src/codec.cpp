#include "nullhop/codec.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "bytes.hpp"

namespace nullhop {

namespace {

const char* kind_name(CodecErrorKind k) {
  switch (k) {
    case CodecErrorKind::kTruncated:
      return "truncated stream";
    case CodecErrorKind::kCountMismatch:
      return "SM/pixel count mismatch";
    case CodecErrorKind::kOverrun:
      return "overrun of declared dimensions";
    case CodecErrorKind::kBadHeader:
      return "bad stream header";
  }
  return "codec error";
}

}  // namespace

CodecError::CodecError(CodecErrorKind kind, std::size_t word_offset, const std::string& what)
    : std::runtime_error(std::string(kind_name(kind)) + " at word " + std::to_string(word_offset) + ": " + what),
      kind_(kind),
      word_offset_(word_offset) {}

// ---------------------------------------------------------------- encoder

StreamEncoder::StreamEncoder(Dims dims, int frac_bits) : dims_(dims), frac_bits_(frac_bits) {
  fields_.reserve(dims.size() / 8 + static_cast<std::size_t>(dims.height) + 2);
}

void StreamEncoder::push_row(std::span<const std::int16_t> row) {
  if (row.size() != dims_.row_size()) throw std::invalid_argument("encoder row has the wrong pixel count");
  if (rows_ >= static_cast<std::size_t>(dims_.height)) throw std::logic_error("encoder received too many rows");
  for (std::size_t base = 0; base < row.size(); base += kSegmentBits) {
    const std::size_t n = std::min<std::size_t>(kSegmentBits, row.size() - base);
    std::uint16_t mask = 0;
    for (std::size_t b = 0; b < n; ++b) {
      if (row[base + b] != 0) mask = static_cast<std::uint16_t>(mask | (1u << b));
    }
    fields_.push_back(mask);
    for (std::size_t b = 0; b < n; ++b) {
      if (row[base + b] != 0) fields_.push_back(static_cast<std::uint16_t>(row[base + b]));
    }
  }
  ++rows_;
}

CompressedStream StreamEncoder::finish() && {
  if (rows_ != static_cast<std::size_t>(dims_.height)) throw std::logic_error("encoder finished before the last row");
  CompressedStream s;
  s.dims = dims_;
  s.frac_bits = frac_bits_;
  s.trailing_pad = fields_.size() % 2 != 0;
  if (s.trailing_pad) fields_.push_back(0);
  s.words.resize(fields_.size() / 2);
  for (std::size_t w = 0; w < s.words.size(); ++w) {
    s.words[w] = static_cast<std::uint32_t>(fields_[2 * w]) | (static_cast<std::uint32_t>(fields_[2 * w + 1]) << 16);
  }
  return s;
}

CompressedStream encode(const FeatureMapTensor& t) {
  StreamEncoder enc(t.dims(), t.frac_bits());
  for (int y = 0; y < t.height(); ++y) enc.push_row(t.row(y));
  return std::move(enc).finish();
}

// ---------------------------------------------------------------- decoder

RowReader::RowReader(const CompressedStream& s, std::size_t start_field, std::size_t row_pixels)
    : s_(&s), start_(start_field), cursor_(start_field), row_pixels_(row_pixels) {}

std::uint16_t RowReader::read_field(const char* what) {
  if (cursor_ >= s_->field_count()) {
    throw CodecError(CodecErrorKind::kTruncated, cursor_ / 2, std::string("expected ") + what);
  }
  return s_->field(cursor_++);
}

std::optional<RowPixel> RowReader::next() {
  for (;;) {
    if (mask_ != 0) {
      const int b = std::countr_zero(mask_);
      mask_ &= mask_ - 1;
      const std::size_t at = cursor_;
      const auto value = static_cast<std::int16_t>(read_field("pixel value"));
      if (value == 0) {
        throw CodecError(CodecErrorKind::kCountMismatch, at / 2, "zero value where the sparsity map marks a pixel");
      }
      return RowPixel{group_base_ + static_cast<std::size_t>(b), value};
    }
    if (started_) group_base_ += kSegmentBits;
    if (group_base_ >= row_pixels_) return std::nullopt;
    started_ = true;
    const std::size_t at = cursor_;
    mask_ = read_field("sparsity-map segment");
    const std::size_t valid = std::min<std::size_t>(kSegmentBits, row_pixels_ - group_base_);
    if (valid < kSegmentBits && (mask_ >> valid) != 0) {
      throw CodecError(CodecErrorKind::kOverrun, at / 2, "sparsity map marks pixels past the end of the row");
    }
  }
}

std::vector<std::size_t> row_offsets(const CompressedStream& s) {
  std::vector<std::size_t> offsets;
  offsets.reserve(static_cast<std::size_t>(s.dims.height));
  const std::size_t row_pixels = s.dims.row_size();
  std::size_t f = 0;
  for (int y = 0; y < s.dims.height; ++y) {
    offsets.push_back(f);
    for (std::size_t base = 0; base < row_pixels; base += kSegmentBits) {
      if (f >= s.field_count()) throw CodecError(CodecErrorKind::kTruncated, f / 2, "expected sparsity-map segment");
      f += 1 + static_cast<std::size_t>(std::popcount(s.field(f)));
    }
  }
  if (f > s.field_count()) throw CodecError(CodecErrorKind::kTruncated, s.words.size(), "row values run past the end");
  return offsets;
}

StreamDecoder::StreamDecoder(const CompressedStream& s) : s_(&s) {
  if (s.dims.channels < 1 || s.dims.height < 1 || s.dims.width < 1) {
    throw CodecError(CodecErrorKind::kBadHeader, 0, "non-positive dimensions");
  }
  if (s.words.empty()) throw CodecError(CodecErrorKind::kTruncated, 0, "empty stream");
  reader_.emplace(s, 0, s.dims.row_size());
}

std::optional<PixelRef> StreamDecoder::next() {
  while (!done_) {
    if (auto px = reader_->next()) {
      const auto c = static_cast<std::size_t>(s_->dims.channels);
      return PixelRef{static_cast<int>(px->offset % c), static_cast<int>(px->offset / c), row_, px->value};
    }
    const std::size_t cursor = reader_->cursor();
    if (++row_ < s_->dims.height) {
      reader_.emplace(*s_, cursor, s_->dims.row_size());
      continue;
    }
    done_ = true;
    if (cursor != s_->field_count()) {
      throw CodecError(CodecErrorKind::kOverrun, cursor / 2,
                       std::to_string(s_->field_count() - cursor) + " fields past the last row");
    }
    if (s_->trailing_pad && (s_->words.back() >> 16) != 0) {
      throw CodecError(CodecErrorKind::kCountMismatch, s_->words.size() - 1, "non-zero padding field");
    }
  }
  return std::nullopt;
}

FeatureMapTensor decode(const CompressedStream& s) {
  StreamDecoder dec(s);
  FeatureMapTensor t(s.dims, s.frac_bits);
  while (auto p = dec.next()) t(p->channel, p->x, p->y) = p->value;
  return t;
}

// ---------------------------------------------------------------- files

std::vector<std::uint8_t> serialize_stream(const CompressedStream& s) {
  detail::ByteWriter w;
  w.magic("NHC1");
  w.u16(static_cast<std::uint16_t>(s.dims.channels));
  w.u16(static_cast<std::uint16_t>(s.dims.height));
  w.u16(static_cast<std::uint16_t>(s.dims.width));
  w.u8(static_cast<std::uint8_t>(s.frac_bits));
  w.u32(static_cast<std::uint32_t>(s.words.size()));
  w.u8(s.trailing_pad ? 1 : 0);
  for (auto word : s.words) w.u32(word);
  return std::move(w.bytes());
}

CompressedStream deserialize_stream(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader r(bytes, "compressed stream");
  r.expect_magic("NHC1");
  CompressedStream s;
  s.dims.channels = r.u16();
  s.dims.height = r.u16();
  s.dims.width = r.u16();
  s.frac_bits = r.u8();
  const std::uint32_t n = r.u32();
  const std::uint8_t flag = r.u8();
  if (flag > 1) throw CodecError(CodecErrorKind::kBadHeader, 0, "padding flag must be 0 or 1");
  s.trailing_pad = flag == 1;
  validate_dims(s.dims);
  s.words.resize(n);
  for (auto& word : s.words) word = r.u32();
  r.expect_end();
  return s;
}

void save_stream(const std::filesystem::path& path, const CompressedStream& s) {
  detail::write_file(path, serialize_stream(s));
}

CompressedStream load_stream(const std::filesystem::path& path) {
  return deserialize_stream(detail::read_file(path));
}

// ---------------------------------------------------------------- analytics

std::uint64_t cis_bits(std::uint64_t pixels, int precision, double sparsity) {
  if (precision < 1) throw std::invalid_argument("precision must be >= 1");
  if (!(sparsity >= 0.0 && sparsity <= 1.0)) throw std::invalid_argument("sparsity must lie in [0, 1]");
  const double bits = static_cast<double>(pixels) * (1.0 + precision * (1.0 - sparsity));
  // Absorb representation error so exact products are not bumped up by one.
  return static_cast<std::uint64_t>(std::ceil(bits - 1e-9 * std::max(1.0, bits)));
}

std::uint64_t cis_bits_exact(std::uint64_t pixels, int precision, std::uint64_t nonzeros) {
  return pixels + static_cast<std::uint64_t>(precision) * nonzeros;
}

double threshold_sparsity(int precision) {
  if (precision < 1) throw std::invalid_argument("precision must be >= 1");
  return 1.0 / precision;
}

std::uint64_t sm_bits(const FeatureMapTensor& t, int precision) {
  if (precision < 1) throw std::invalid_argument("precision must be >= 1");
  const auto n = static_cast<std::uint64_t>(precision);
  const std::uint64_t row = t.dims().row_size();
  const std::uint64_t segments_per_row = (row + n - 1) / n;
  const std::uint64_t fields = segments_per_row * static_cast<std::uint64_t>(t.height()) + count_nonzero(t);
  const std::uint64_t bits = fields * n;
  return (bits + 31) / 32 * 32;
}

std::vector<RlPair> rl_encode(const FeatureMapTensor& t) {
  std::vector<RlPair> pairs;
  int zeros = 0;
  for (auto v : t.values()) {
    if (v != 0) {
      pairs.push_back({static_cast<std::uint8_t>(zeros), v});
      zeros = 0;
    } else if (++zeros == kRlMaxRun + 1) {
      pairs.push_back({static_cast<std::uint8_t>(kRlMaxRun), 0});
      zeros = 0;
    }
  }
  if (zeros > 0) pairs.push_back({static_cast<std::uint8_t>(zeros - 1), 0});
  return pairs;
}

FeatureMapTensor rl_decode(const std::vector<RlPair>& pairs, Dims dims, int frac_bits) {
  FeatureMapTensor t(dims, frac_bits);
  auto out = t.values();
  std::size_t pos = 0;
  for (const auto& p : pairs) {
    if (p.run > kRlMaxRun) throw std::invalid_argument("run-length exceeds 5 bits");
    pos += p.run;
    if (pos >= out.size()) throw std::invalid_argument("run-length stream overruns the tensor");
    out[pos++] = p.value;
  }
  if (pos != out.size()) throw std::invalid_argument("run-length stream ends early");
  return t;
}

std::uint64_t rl_bits(const FeatureMapTensor& t, int precision) {
  return rl_encode(t).size() * static_cast<std::uint64_t>(kRlRunBits + precision);
}

CompressionReport compression_report(const FeatureMapTensor& t, int precision) {
  CompressionReport r;
  r.pixels = t.size();
  r.rows = static_cast<std::uint64_t>(t.height());
  r.raw_bits = r.pixels * static_cast<std::uint64_t>(precision);
  r.sm_bits = sm_bits(t, precision);
  r.cis_bits = cis_bits_exact(r.pixels, precision, count_nonzero(t));
  r.rl_bits = rl_bits(t, precision);
  r.sparsity = sparsity(t);
  return r;
}

CodecComparison compare_codecs(std::span<const FeatureMapTensor> corpus, int precision) {
  if (corpus.empty()) throw std::invalid_argument("compare_codecs: empty corpus");
  CodecComparison c;
  c.items.reserve(corpus.size());
  for (const auto& t : corpus) {
    const auto r = compression_report(t, precision);
    c.mean_sparsity += r.sparsity;
    c.mean_raw_bits += static_cast<double>(r.raw_bits);
    c.mean_sm_bits += static_cast<double>(r.sm_bits);
    c.mean_cis_bits += static_cast<double>(r.cis_bits);
    c.mean_rl_bits += static_cast<double>(r.rl_bits);
    c.mean_sm_ratio += r.sm_ratio();
    c.mean_rl_ratio += r.rl_ratio();
    c.items.push_back(r);
  }
  const auto n = static_cast<double>(corpus.size());
  c.mean_sparsity /= n;
  c.mean_raw_bits /= n;
  c.mean_sm_bits /= n;
  c.mean_cis_bits /= n;
  c.mean_rl_bits /= n;
  c.mean_sm_ratio /= n;
  c.mean_rl_ratio /= n;
  return c;
}

}  // namespace nullhop

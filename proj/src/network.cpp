#include "nullhop/network.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "bytes.hpp"

namespace nullhop {

namespace {

using nlohmann::json;

void check_frac(int f, const char* what) {
  if (f < 0 || f > QFormat::kMaxFracBits) {
    throw std::invalid_argument(std::string(what) + " " + std::to_string(f) + " outside [0, 15]");
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  return it == j.end() ? fallback : it->get<T>();
}

int require_int(const json& j, const char* key, int layer) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_number_integer()) {
    throw NetworkError(std::string("missing integer field \"") + key + "\"", layer);
  }
  return it->get<int>();
}

std::optional<std::filesystem::path> weights_path(const json& j, const std::filesystem::path& base) {
  auto it = j.find("weights");
  if (it == j.end() || it->is_null()) return std::nullopt;
  std::filesystem::path p = it->get<std::string>();
  if (p.is_relative() && !base.empty()) p = base / p;
  return p;
}

}  // namespace

KernelSet::KernelSet(int n_out_, int n_in_, int k_, QFormat q_)
    : n_out(n_out_), n_in(n_in_), k(k_), q(q_) {
  if (n_out < 1 || n_in < 1 || k < 1) throw std::invalid_argument("kernel set dimensions must be positive");
  weights.assign(static_cast<std::size_t>(n_out) * footprint(), 0);
  bias.assign(static_cast<std::size_t>(n_out), 0);
}

std::uint64_t LayerDescriptor::dense_macs() const {
  return static_cast<std::uint64_t>(n_out) * static_cast<std::uint64_t>(n_in) * static_cast<std::uint64_t>(k * k) *
         static_cast<std::uint64_t>(conv_h()) * static_cast<std::uint64_t>(conv_w());
}

void LayerDescriptor::validate() const {
  validate_dims(input_dims());
  if (n_out < 1 || n_out > kMaxChannels) {
    throw std::invalid_argument("n_out " + std::to_string(n_out) + " outside [1, 1024]");
  }
  if (k < 1 || k > kMaxKernel) throw std::invalid_argument("kernel size " + std::to_string(k) + " outside [1, 7]");
  if (pad < 0 || pad > kMaxPad) throw std::invalid_argument("padding " + std::to_string(pad) + " outside [0, 3]");
  if (conv_h() < 1 || conv_w() < 1) throw std::invalid_argument("kernel larger than padded input");
  if (out_h() < 1 || out_w() < 1) throw std::invalid_argument("pooling leaves an empty output");
  check_frac(frac_in, "frac_in");
  check_frac(frac_w, "frac_w");
  check_frac(frac_out, "frac_out");
}

void NetworkDescriptor::validate() const {
  if (layers.empty()) throw NetworkError("network has no convolutional layers");
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const int idx = static_cast<int>(li);
    try {
      layers[li].validate();
    } catch (const std::invalid_argument& e) {
      throw NetworkError(e.what(), idx);
    }
    if (li + 1 < layers.size()) {
      const auto& cur = layers[li];
      const auto& nxt = layers[li + 1];
      if (!(cur.output_dims() == nxt.input_dims())) {
        std::ostringstream os;
        os << "dimension mismatch: output " << cur.n_out << "x" << cur.out_h() << "x" << cur.out_w()
           << " does not match next input " << nxt.n_in << "x" << nxt.h << "x" << nxt.w;
        throw NetworkError(os.str(), idx);
      }
      if (cur.frac_out != nxt.frac_in) throw NetworkError("frac_out does not match next layer's frac_in", idx);
    }
  }
  const auto& last = layers.back();
  auto flat = static_cast<int>(last.output_dims().size());
  int frac = last.frac_out;
  for (std::size_t fi = 0; fi < fc.size(); ++fi) {
    const int idx = static_cast<int>(layers.size() + fi);
    const auto& d = fc[fi];
    if (d.n_in != flat) {
      throw NetworkError("fully-connected input " + std::to_string(d.n_in) + " does not match " + std::to_string(flat),
                         idx);
    }
    if (d.n_out < 1) throw NetworkError("fully-connected n_out must be positive", idx);
    if (d.frac_in != frac) throw NetworkError("frac_in does not match previous layer's frac_out", idx);
    try {
      check_frac(d.frac_w, "frac_w");
      check_frac(d.frac_out, "frac_out");
    } catch (const std::invalid_argument& e) {
      throw NetworkError(e.what(), idx);
    }
    flat = d.n_out;
    frac = d.frac_out;
  }
}

std::uint64_t NetworkDescriptor::dense_macs() const {
  std::uint64_t total = 0;
  for (const auto& l : layers) total += l.dense_macs();
  return total;
}

NetworkDescriptor parse_network(const std::string& text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw NetworkError(std::string("parse error: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("layers") || !doc["layers"].is_array()) {
    throw NetworkError("config must be an object with a \"layers\" array");
  }
  NetworkDescriptor net;
  net.name = get_or<std::string>(doc, "name", "");
  int idx = 0;
  for (const auto& jl : doc["layers"]) {
    if (!jl.is_object()) throw NetworkError("layer entry must be an object", idx);
    LayerDescriptor l;
    try {
      l.n_in = require_int(jl, "n_in", idx);
      l.n_out = require_int(jl, "n_out", idx);
      l.k = require_int(jl, "k", idx);
      l.h = require_int(jl, "h", idx);
      l.w = require_int(jl, "w", idx);
      l.pad = get_or<int>(jl, "pad", 0);
      l.relu = get_or<bool>(jl, "relu", true);
      l.pool = get_or<bool>(jl, "pool", false);
      l.encode = get_or<bool>(jl, "encode", true);
      l.frac_in = get_or<int>(jl, "frac_in", 8);
      l.frac_w = get_or<int>(jl, "frac_w", 8);
      l.frac_out = get_or<int>(jl, "frac_out", 8);
      l.weights = weights_path(jl, base_dir);
    } catch (const json::exception& e) {
      throw NetworkError(std::string("bad field type: ") + e.what(), idx);
    }
    net.layers.push_back(std::move(l));
    ++idx;
  }
  if (auto it = doc.find("fc"); it != doc.end()) {
    if (!it->is_array()) throw NetworkError("\"fc\" must be an array");
    for (const auto& jf : *it) {
      DenseLayerSpec d;
      try {
        d.n_in = require_int(jf, "n_in", idx);
        d.n_out = require_int(jf, "n_out", idx);
        d.relu = get_or<bool>(jf, "relu", false);
        d.frac_in = get_or<int>(jf, "frac_in", 8);
        d.frac_w = get_or<int>(jf, "frac_w", 8);
        d.frac_out = get_or<int>(jf, "frac_out", 8);
        d.weights = weights_path(jf, base_dir);
      } catch (const json::exception& e) {
        throw NetworkError(std::string("bad field type: ") + e.what(), idx);
      }
      net.fc.push_back(std::move(d));
      ++idx;
    }
  }
  net.validate();
  return net;
}

NetworkDescriptor load_network(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NetworkError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  auto net = parse_network(ss.str(), path.parent_path());
  if (net.name.empty()) net.name = path.stem().string();
  return net;
}

std::vector<std::uint8_t> serialize_tensor(const FeatureMapTensor& t) {
  detail::ByteWriter w;
  w.magic("NHT1");
  w.u16(static_cast<std::uint16_t>(t.channels()));
  w.u16(static_cast<std::uint16_t>(t.height()));
  w.u16(static_cast<std::uint16_t>(t.width()));
  w.u8(static_cast<std::uint8_t>(t.frac_bits()));
  for (auto v : t.values()) w.i16(v);
  return std::move(w.bytes());
}

FeatureMapTensor deserialize_tensor(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader r(bytes, "tensor");
  r.expect_magic("NHT1");
  Dims d;
  d.channels = r.u16();
  d.height = r.u16();
  d.width = r.u16();
  const int frac = r.u8();
  validate_dims(d);
  FeatureMapTensor t(d, QFormat{frac});
  for (auto& v : t.values()) v = r.i16();
  r.expect_end();
  return t;
}

void save_tensor(const std::filesystem::path& path, const FeatureMapTensor& t) {
  detail::write_file(path, serialize_tensor(t));
}

FeatureMapTensor load_tensor(const std::filesystem::path& path) { return deserialize_tensor(detail::read_file(path)); }

void save_weights(const std::filesystem::path& path, const KernelSet& k) {
  detail::ByteWriter w;
  w.magic("NHW1");
  w.u16(static_cast<std::uint16_t>(k.n_out));
  w.u16(static_cast<std::uint16_t>(k.n_in));
  w.u16(static_cast<std::uint16_t>(k.k));
  w.u8(static_cast<std::uint8_t>(k.q.frac_bits()));
  for (auto v : k.weights) w.i16(v);
  for (auto b : k.bias) w.i32(b);
  detail::write_file(path, w.bytes());
}

KernelSet load_weights(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  detail::ByteReader r(bytes, "weights " + path.string());
  r.expect_magic("NHW1");
  const int n_out = r.u16();
  const int n_in = r.u16();
  const int k = r.u16();
  const int frac = r.u8();
  if (n_out < 1 || n_in < 1 || k < 1) throw std::runtime_error("weights: zero dimension in header");
  KernelSet ks(n_out, n_in, k, QFormat{frac});
  for (auto& v : ks.weights) v = r.i16();
  for (auto& b : ks.bias) b = r.i32();
  r.expect_end();
  return ks;
}

}  // namespace nullhop

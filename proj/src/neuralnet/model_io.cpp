#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mrin/neuralnet.hpp"

namespace mrin {
namespace {

constexpr char kMagic[8] = {'M', 'R', 'I', 'N', 'M', 'O', 'D', 'L'};

class Writer {
 public:
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void i32(std::int32_t v) { le(static_cast<std::uint32_t>(v), 4); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_ += s;
  }
  void raw(const char* p, std::size_t n) { out_.append(p, n); }
  std::string take() { return std::move(out_); }

 private:
  void le(std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out_ += static_cast<char>((v >> (8 * i)) & 0xff);
  }
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() { return std::bit_cast<double>(le(8)); }
  std::string str() {
    auto n = u32();
    need(n);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void expect_bytes(const char* p, std::size_t n) {
    need(n);
    if (std::memcmp(in_.data() + pos_, p, n) != 0) throw IoFailure("not a model file");
    pos_ += n;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw IoFailure("model file truncated");
  }
  std::uint64_t le(int bytes) {
    need(static_cast<std::size_t>(bytes));
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(bytes);
    return v;
  }
  const std::string& in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_model(const Model& model) {
  const auto& p = model.params;
  const auto& c = p.config;
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(kModelFormatVersion);
  w.i32(c.width);
  w.i32(c.height);
  w.i32(c.in_channels);
  w.i32(c.out_channels);
  for (const auto& conv : c.convs) {
    w.i32(conv.filters);
    w.i32(conv.kernel);
  }
  w.f64(c.leaky_slope);
  w.f64(c.adam.lr);
  w.f64(c.adam.beta1);
  w.f64(c.adam.beta2);
  w.f64(c.adam.epsilon);
  w.u64(c.seed);
  w.str(model.fingerprint);
  w.u32(static_cast<std::uint32_t>(p.layout.size()));
  for (const auto& seg : p.layout) {
    w.str(seg.name);
    w.u64(seg.offset);
    w.u32(static_cast<std::uint32_t>(seg.shape.size()));
    for (int d : seg.shape) w.i32(d);
  }
  w.u64(p.values.size());
  for (double v : p.values) w.f64(v);
  return w.take();
}

Model parse_model(const std::string& bytes) {
  Reader r(bytes);
  r.expect_bytes(kMagic, sizeof kMagic);
  const auto version = r.u32();
  if (version != kModelFormatVersion) {
    throw VersionMismatch("model format version " + std::to_string(version) + ", expected " +
                          std::to_string(kModelFormatVersion));
  }
  Model m;
  auto& c = m.params.config;
  c.width = r.i32();
  c.height = r.i32();
  c.in_channels = r.i32();
  c.out_channels = r.i32();
  for (auto& conv : c.convs) {
    conv.filters = r.i32();
    conv.kernel = r.i32();
  }
  c.leaky_slope = r.f64();
  c.adam.lr = r.f64();
  c.adam.beta1 = r.f64();
  c.adam.beta2 = r.f64();
  c.adam.epsilon = r.f64();
  c.seed = r.u64();
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw IoFailure(std::string("model config invalid: ") + e.what());
  }
  m.fingerprint = r.str();
  const auto n_seg = r.u32();
  if (n_seg > 64) throw IoFailure("model file has an implausible segment count");
  for (std::uint32_t i = 0; i < n_seg; ++i) {
    ParamSegment seg;
    seg.name = r.str();
    seg.offset = r.u64();
    const auto rank = r.u32();
    if (rank > 8) throw IoFailure("model file has an implausible tensor rank");
    for (std::uint32_t k = 0; k < rank; ++k) seg.shape.push_back(r.i32());
    m.params.layout.push_back(std::move(seg));
  }
  if (m.params.layout != make_layout(c)) {
    throw VersionMismatch("stored flat-index map differs from this build's layout");
  }
  const auto n = r.u64();
  const auto& last = m.params.layout.back();
  if (n != last.offset + last.size()) throw IoFailure("weight count does not match layout");
  m.params.values.resize(n);
  for (auto& v : m.params.values) v = r.f64();
  if (!r.done()) throw IoFailure("trailing bytes after model weights");
  return m;
}

void save_model(const Model& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoFailure("cannot open " + path.string() + " for writing");
  const auto bytes = serialize_model(model);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoFailure("write failed for " + path.string());
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_model(buf.str());
}

}  // namespace mrin

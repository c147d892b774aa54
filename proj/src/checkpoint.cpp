#include "asmamba/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace asmamba {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoints assume a little-endian host");

class Writer {
 public:
  template <class T>
  void pod(T v) {
    out_.append(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void bytes(const std::string& s) {
    pod(static_cast<std::uint32_t>(s.size()));
    out_ += s;
  }
  void floats(const Tensor& t) {
    for (double v : t.values()) pod(static_cast<float>(v));
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}
  template <class T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string bytes() {
    const auto n = pod<std::uint32_t>();
    need(n);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  Tensor floats(const std::vector<int>& shape) {
    Tensor t(shape);
    need(t.size() * sizeof(float));
    for (double& v : t.values()) v = pod<float>();
    return t;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) throw std::runtime_error("checkpoint is truncated");
  }
  const std::string& in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize(const Checkpoint& c) {
  const bool has_adam = !c.adam_m.empty();
  if (has_adam && (c.adam_m.size() != c.weights.size() || c.adam_v.size() != c.weights.size())) {
    throw std::invalid_argument("serialize: optimizer state does not match the weights");
  }
  Writer w;
  w.pod<char>('A');
  w.pod<char>('S');
  w.pod<char>('M');
  w.pod<char>('C');
  w.pod(Checkpoint::kVersion);
  w.bytes(c.config_json);
  w.pod(c.epoch);
  w.pod(c.step);
  w.pod(c.adam_t);
  w.pod(static_cast<std::uint32_t>(c.weights.size()));
  w.pod(static_cast<std::uint32_t>(has_adam));
  for (std::size_t i = 0; i < c.weights.size(); ++i) {
    const auto& [name, t] = c.weights[i];
    w.bytes(name);
    w.pod(static_cast<std::uint32_t>(t.rank()));
    for (int d : t.shape()) w.pod(static_cast<std::uint32_t>(d));
    w.floats(t);
    if (has_adam) {
      t.check_same(c.adam_m[i], "serialize adam_m");
      t.check_same(c.adam_v[i], "serialize adam_v");
      w.floats(c.adam_m[i]);
      w.floats(c.adam_v[i]);
    }
  }
  return w.take();
}

Checkpoint deserialize(const std::string& bytes) {
  if (bytes.size() < 8 || bytes.compare(0, 4, "ASMC") != 0) throw std::runtime_error("not an ASMC checkpoint");
  Reader r(bytes);
  r.pod<std::uint32_t>();
  const auto version = r.pod<std::uint32_t>();
  if (version != Checkpoint::kVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  c.config_json = r.bytes();
  c.epoch = r.pod<std::int64_t>();
  c.step = r.pod<std::int64_t>();
  c.adam_t = r.pod<std::int64_t>();
  const auto n = r.pod<std::uint32_t>();
  const bool has_adam = r.pod<std::uint32_t>() != 0;
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string name = r.bytes();
    const auto rank = r.pod<std::uint32_t>();
    if (rank > 8) throw std::runtime_error("checkpoint array '" + name + "' has an invalid rank");
    std::vector<int> shape;
    for (std::uint32_t k = 0; k < rank; ++k) shape.push_back(static_cast<int>(r.pod<std::uint32_t>()));
    c.weights.emplace_back(std::move(name), r.floats(shape));
    if (has_adam) {
      c.adam_m.push_back(r.floats(shape));
      c.adam_v.push_back(r.floats(shape));
    }
  }
  if (!r.done()) throw std::runtime_error("checkpoint has trailing bytes");
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& c) {
  const std::string bytes = serialize(c);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

}  // namespace asmamba

#include "asmamba/dataset.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "asmamba/parallel.hpp"
#include "json.hpp"

namespace asmamba::data {

namespace fs = std::filesystem;

namespace {

static_assert(std::endian::native == std::endian::little, "array files assume a little-endian host");

void put_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }

std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

std::string file_of(const std::string& dir, int idx, const char* kind) {
  return (fs::path(dir) / (std::to_string(idx) + "_" + kind + ".bin")).string();
}

}  // namespace

Dataset generate(const GenerateOptions& opts) {
  if (opts.count < 1 || opts.image_size < 8 || opts.etas.empty()) {
    throw std::invalid_argument("generate: need count >= 1, image_size >= 8 and at least one eta");
  }
  Dataset d;
  d.image_size = opts.image_size;
  d.n_angles = opts.n_angles;
  d.seed = opts.seed;
  d.samples.resize(static_cast<std::size_t>(opts.count));
  const auto geo = ct::ProjectionGeometry::for_image(opts.image_size, opts.n_angles);
  parallel_for(d.samples.size(), [&](std::size_t i) {
    Rng rng(derive_seed(opts.seed, i));
    Sample& s = d.samples[i];
    s.index = static_cast<int>(i);
    s.eta = opts.etas[i % opts.etas.size()];
    s.pair = ct::synthesize_pair(ct::random_phantom(opts.image_size, rng), s.eta, geo, opts.sim);
  });
  return d;
}

void write_array(const std::string& path, const Tensor& t) {
  if (t.rank() < 2 || t.rank() > 3) throw std::invalid_argument("write_array: expected (H, W) or (C, H, W)");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out.write("ASMR", 4);
  put_u32(out, static_cast<std::uint32_t>(t.height()));
  put_u32(out, static_cast<std::uint32_t>(t.width()));
  put_u32(out, static_cast<std::uint32_t>(t.channels()));
  std::vector<float> buf(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) buf[i] = static_cast<float>(t[i]);
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

Tensor read_array(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  std::array<char, 4> magic{};
  in.read(magic.data(), 4);
  if (!in || std::memcmp(magic.data(), "ASMR", 4) != 0) throw std::runtime_error("'" + path + "' is not an ASMR array");
  const auto h = static_cast<int>(get_u32(in)), w = static_cast<int>(get_u32(in)), c = static_cast<int>(get_u32(in));
  if (!in || h <= 0 || w <= 0 || c <= 0) throw std::runtime_error("'" + path + "' has a malformed header");
  std::vector<float> buf(static_cast<std::size_t>(h) * w * c);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!in) throw std::runtime_error("'" + path + "' is truncated");
  Tensor t = c == 1 ? Tensor({h, w}) : Tensor({c, h, w});
  for (std::size_t i = 0; i < buf.size(); ++i) t[i] = buf[i];
  return t;
}

void save(const Dataset& d, const std::string& dir) {
  fs::create_directories(dir);
  nlohmann::ordered_json m;
  m["count"] = d.samples.size();
  m["image_size"] = d.image_size;
  m["n_angles"] = d.n_angles;
  m["seed"] = d.seed;
  m["has_ground_truth"] = d.samples.empty() || !d.samples[0].pair.x_gt.empty();
  std::vector<double> etas;
  for (const Sample& s : d.samples) {
    etas.push_back(s.eta);
    write_array(file_of(dir, s.index, "xm"), s.pair.x_m);
    if (!s.pair.x_gt.empty()) write_array(file_of(dir, s.index, "xgt"), s.pair.x_gt);
    write_array(file_of(dir, s.index, "xl"), s.pair.x_l);
    write_array(file_of(dir, s.index, "mask"), s.pair.mask_i);
  }
  m["eta"] = etas;
  std::ofstream out(fs::path(dir) / "manifest.json");
  if (!out) throw std::runtime_error("cannot write manifest in '" + dir + "'");
  out << m.dump(2) << "\n";
}

Dataset load(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "manifest.json");
  if (!in) throw std::runtime_error("no manifest.json in '" + dir + "'");
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed manifest in '" + dir + "': " + e.what());
  }
  Dataset d;
  d.image_size = m.at("image_size").get<int>();
  d.n_angles = m.value("n_angles", 180);
  d.seed = m.value("seed", std::uint64_t{0});
  const bool has_gt = m.value("has_ground_truth", true);
  const auto etas = m.at("eta").get<std::vector<double>>();
  const auto count = m.at("count").get<std::size_t>();
  if (etas.size() != count) throw std::runtime_error("manifest eta list does not match count");
  for (std::size_t i = 0; i < count; ++i) {
    Sample s;
    s.index = static_cast<int>(i);
    s.eta = etas[i];
    s.pair.x_m = read_array(file_of(dir, s.index, "xm"));
    if (has_gt) s.pair.x_gt = read_array(file_of(dir, s.index, "xgt"));
    s.pair.x_l = read_array(file_of(dir, s.index, "xl"));
    s.pair.mask_i = read_array(file_of(dir, s.index, "mask"));
    d.samples.push_back(std::move(s));
  }
  return d;
}

Dataset without_ground_truth(Dataset d) {
  for (Sample& s : d.samples) s.pair.x_gt = Tensor();
  return d;
}

}  // namespace asmamba::data

#include "asmamba/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace asmamba {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <class T>
T parse_number(const std::string& v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw std::invalid_argument("bad number '" + v + "'");
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("bad boolean '" + v + "'");
}

std::vector<int> parse_int_list(const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<int>(trim(item)));
  return out;
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

struct Field {
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

#define INT_FIELD(name) \
  {#name, {[](TrainConfig& c, const std::string& v) { c.name = parse_number<int>(v); }, \
           [](const TrainConfig& c) { return std::to_string(c.name); }}}
#define U64_FIELD(name) \
  {#name, {[](TrainConfig& c, const std::string& v) { c.name = parse_number<std::uint64_t>(v); }, \
           [](const TrainConfig& c) { return std::to_string(c.name); }}}
#define DOUBLE_FIELD(name) \
  {#name, {[](TrainConfig& c, const std::string& v) { c.name = parse_number<double>(v); }, \
           [](const TrainConfig& c) { return format_double(c.name); }}}
#define BOOL_FIELD(name) \
  {#name, {[](TrainConfig& c, const std::string& v) { c.name = parse_bool(v); }, \
           [](const TrainConfig& c) { return std::string(c.name ? "true" : "false"); }}}
#define STRING_FIELD(name) \
  {#name, {[](TrainConfig& c, const std::string& v) { c.name = v; }, [](const TrainConfig& c) { return c.name; }}}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> f{
      INT_FIELD(epochs),
      INT_FIELD(batch_size),
      DOUBLE_FIELD(learning_rate),
      DOUBLE_FIELD(adam_beta1),
      DOUBLE_FIELD(adam_beta2),
      DOUBLE_FIELD(adam_eps),
      INT_FIELD(max_steps),
      STRING_FIELD(lr_schedule),
      {"blocks_per_layer",
       {[](TrainConfig& c, const std::string& v) { c.blocks_per_layer = parse_int_list(v); },
        [](const TrainConfig& c) {
          std::string s;
          for (std::size_t i = 0; i < c.blocks_per_layer.size(); ++i) {
            s += (i ? "," : "") + std::to_string(c.blocks_per_layer[i]);
          }
          return s;
        }}},
      INT_FIELD(base_channels),
      INT_FIELD(stages_T),
      INT_FIELD(den_features),
      INT_FIELD(prox_blocks),
      INT_FIELD(lift_features),
      INT_FIELD(state_dim),
      BOOL_FIELD(four_directions),
      DOUBLE_FIELD(prox_residual_init),
      STRING_FIELD(variant),
      DOUBLE_FIELD(lambda_g),
      DOUBLE_FIELD(mu_start),
      DOUBLE_FIELD(mu_end),
      DOUBLE_FIELD(sgcr_eps),
      STRING_FIELD(contrast),
      BOOL_FIELD(detach_negative),
      STRING_FIELD(extractor),
      U64_FIELD(extractor_seed),
      INT_FIELD(image_size),
      INT_FIELD(n_angles),
      INT_FIELD(train_samples),
      INT_FIELD(holdout_samples),
      U64_FIELD(seed),
      BOOL_FIELD(augment_rotate),
      BOOL_FIELD(augment_transpose),
  };
  return f;
}

#undef INT_FIELD
#undef U64_FIELD
#undef DOUBLE_FIELD
#undef BOOL_FIELD
#undef STRING_FIELD

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("config: ") + what);
}

}  // namespace

void TrainConfig::validate() const {
  require(epochs > 0, "epochs must be positive");
  require(batch_size > 0, "batch_size must be positive");
  require(learning_rate > 0.0, "learning_rate must be positive");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0, "adam_beta1 must lie in [0, 1)");
  require(adam_beta2 >= 0.0 && adam_beta2 < 1.0, "adam_beta2 must lie in [0, 1)");
  require(adam_eps > 0.0, "adam_eps must be positive");
  require(max_steps >= 0, "max_steps must be non-negative");
  require(lr_schedule == "constant" || lr_schedule == "cosine", "lr_schedule must be 'constant' or 'cosine'");
  require(stages_T >= 1, "stages_T must be at least 1");
  require(den_features > 0 && lift_features > 0 && state_dim > 0, "widths must be positive");
  require(prox_blocks >= 0, "prox_blocks must be non-negative");
  require(lambda_g >= 0.0, "lambda_g must be non-negative");
  require(mu_start >= 0.0 && mu_start <= 1.0 && mu_end >= 0.0 && mu_end <= 1.0, "mu must lie in [0, 1]");
  require(sgcr_eps >= 0.0, "sgcr_eps must be non-negative");
  require(image_size >= 8, "image_size must be at least 8");
  require(n_angles > 0, "n_angles must be positive");
  require(train_samples > 0 && holdout_samples >= 0, "sample counts must be positive");
  freq::UNetTopology{blocks_per_layer, base_channels}.validate();
  model_variant();
  contrast_mode();
  require(extractor == "random" || extractor == "identity", "extractor must be 'random' or 'identity'");
}

model::ModelConfig TrainConfig::model_config() const {
  model::ModelConfig m;
  m.topology = {blocks_per_layer, base_channels};
  m.den_features = den_features;
  m.stages = stages_T;
  m.prox_blocks = prox_blocks;
  m.lift_features = lift_features;
  m.state_dim = state_dim;
  m.four_directions = four_directions;
  m.prox_residual_init = prox_residual_init;
  return m;
}

loss::ContrastMode TrainConfig::contrast_mode() const { return parse_contrast(contrast); }

loss::FeatureExtractor TrainConfig::feature_extractor() const {
  return extractor == "identity" ? loss::FeatureExtractor::identity()
                                 : loss::FeatureExtractor::random_conv(extractor_seed);
}

loss::CurriculumSchedule TrainConfig::curriculum() const { return {mu_start, mu_end, epochs}; }

TrainConfig desk_config() {
  TrainConfig c;
  c.epochs = 50;
  c.batch_size = 4;
  c.learning_rate = 2e-3;
  c.adam_beta1 = 0.9;
  c.blocks_per_layer = {1, 1, 1};
  c.base_channels = 8;
  c.den_features = 4;
  c.prox_blocks = 1;
  c.state_dim = 4;
  c.image_size = 64;
  c.train_samples = 12;
  c.holdout_samples = 3;
  return c;
}

loss::ContrastMode parse_contrast(const std::string& name) {
  std::string k = name;
  for (char& c : k) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (k == "none" || k == "w/o cr") return loss::ContrastMode::None;
  if (k == "cr") return loss::ContrastMode::CR;
  if (k == "sgcr") return loss::ContrastMode::SGCR;
  if (k == "cr+sgcr") return loss::ContrastMode::CRSGCR;
  throw std::invalid_argument("unknown contrast mode '" + name + "'");
}

std::string to_string(loss::ContrastMode m) {
  switch (m) {
    case loss::ContrastMode::None: return "none";
    case loss::ContrastMode::CR: return "cr";
    case loss::ContrastMode::SGCR: return "sgcr";
    case loss::ContrastMode::CRSGCR: return "cr+sgcr";
  }
  return "none";
}

void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value) {
  const auto it = fields().find(key);
  if (it == fields().end()) throw std::invalid_argument("unknown config key '" + key + "'");
  try {
    it->second.set(cfg, value);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(key + ": " + e.what());
  }
}

void apply_config_text(TrainConfig& cfg, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("line " + std::to_string(n) + ": expected key = value");
    try {
      set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("line " + std::to_string(n) + ": " + e.what());
    }
  }
}

TrainConfig load_config(const std::string& path, TrainConfig base) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read config '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  apply_config_text(base, ss.str());
  base.validate();
  return base;
}

std::string to_text(const TrainConfig& cfg) {
  std::string out;
  for (const auto& [key, field] : fields()) out += key + " = " + field.get(cfg) + "\n";
  return out;
}

std::string to_json(const TrainConfig& cfg) {
  nlohmann::ordered_json j;
  for (const auto& [key, field] : fields()) j[key] = field.get(cfg);
  return j.dump();
}

TrainConfig from_json(const std::string& json) {
  TrainConfig cfg;
  const auto j = nlohmann::json::parse(json);
  for (const auto& [key, value] : j.items()) set_config_value(cfg, key, value.get<std::string>());
  return cfg;
}

}  // namespace asmamba

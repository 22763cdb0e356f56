#include "panoos/cli/config.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>
#include <type_traits>
#include <vector>

#include "panoos/numerics/errors.hpp"
#include "panoos/synthdata/raster.hpp"

namespace panoos::cli {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::istringstream in(v);
  std::string part;
  while (std::getline(in, part, ',')) out.push_back(trim(part));
  return out;
}

std::uint64_t to_u64(const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError("expected a non-negative integer, got '" + v + "'");
  return out;
}

double to_double(const std::string& v) {
  if (v == "inf") return std::numeric_limits<double>::infinity();
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || std::isnan(out)) {
    throw ConfigError("expected a number, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError("expected true or false, got '" + v + "'");
}

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

std::string fmt_groups(const std::vector<ParamGroup>& groups) {
  std::string out;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (i) out += ',';
    out += group_name(groups[i]);
  }
  return out;
}

std::vector<ParamGroup> to_groups(const std::string& v) {
  std::vector<ParamGroup> out;
  for (const std::string& name : split_list(v)) {
    const auto g = parse_group(name);
    if (!g) throw ConfigError("unknown parameter group '" + name + "'");
    if (*g == ParamGroup::Frozen) throw ConfigError("the frozen group cannot be trained");
    out.push_back(*g);
  }
  return out;
}

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

// `pick` maps a config to the member a key controls.
template <typename Pick>
Field uint_at(std::string key, Pick pick) {
  return {std::move(key), [pick](const RunConfig& c) { return std::to_string(pick(c)); },
          [pick](RunConfig& c, const std::string& v) {
            pick(c) = static_cast<std::remove_reference_t<decltype(pick(c))>>(to_u64(v));
          }};
}

template <typename Pick>
Field double_at(std::string key, Pick pick) {
  return {std::move(key), [pick](const RunConfig& c) { return fmt(pick(c)); },
          [pick](RunConfig& c, const std::string& v) { pick(c) = to_double(v); }};
}

template <typename Pick>
Field bool_at(std::string key, Pick pick) {
  return {std::move(key), [pick](const RunConfig& c) { return std::string(pick(c) ? "true" : "false"); },
          [pick](RunConfig& c, const std::string& v) { pick(c) = to_bool(v); }};
}

template <typename Pick>
Field groups_at(std::string key, Pick pick) {
  return {std::move(key), [pick](const RunConfig& c) { return fmt_groups(pick(c)); },
          [pick](RunConfig& c, const std::string& v) { pick(c) = to_groups(v); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      uint_at("seed", [](auto& c) -> auto& { return c.seed; }),

      uint_at("scene.height", [](auto& c) -> auto& { return c.scene.height; }),
      uint_at("scene.width", [](auto& c) -> auto& { return c.scene.width; }),
      uint_at("scene.classes", [](auto& c) -> auto& { return c.scene.classes; }),
      uint_at("scene.feature_dim", [](auto& c) -> auto& { return c.scene.feature_dim; }),
      double_at("scene.snr", [](auto& c) -> auto& { return c.scene.snr; }),
      double_at("scene.distortion", [](auto& c) -> auto& { return c.scene.distortion; }),
      double_at("scene.jitter", [](auto& c) -> auto& { return c.scene.jitter; }),
      uint_at("scene.outlier_classes", [](auto& c) -> auto& { return c.scene.outlier_classes; }),
      uint_at("scene.mean_seed", [](auto& c) -> auto& { return c.scene.mean_seed; }),

      uint_at("data.train_count", [](auto& c) -> auto& { return c.train_count; }),
      uint_at("data.eval_count", [](auto& c) -> auto& { return c.eval_count; }),
      uint_at("data.bank_size", [](auto& c) -> auto& { return c.bank_size; }),
      uint_at("data.eval_bank_size", [](auto& c) -> auto& { return c.eval_bank_size; }),

      uint_at("model.queries", [](auto& c) -> auto& { return c.model.queries; }),
      uint_at("model.query_dim", [](auto& c) -> auto& { return c.model.query_dim; }),
      uint_at("model.mask_dim", [](auto& c) -> auto& { return c.model.mask_dim; }),
      uint_at("model.text_dim", [](auto& c) -> auto& { return c.model.text_dim; }),
      uint_at("model.templates", [](auto& c) -> auto& { return c.model.templates; }),
      uint_at("model.layers", [](auto& c) -> auto& { return c.model.layers; }),
      uint_at("model.ffn_dim", [](auto& c) -> auto& { return c.model.ffn_dim; }),
      bool_at("model.prompt_attention", [](auto& c) -> auto& { return c.model.prompt_attention; }),
      bool_at("model.adaptive_correction", [](auto& c) -> auto& { return c.model.adaptive_correction; }),
      {"model.strides",
       [](const RunConfig& c) {
         std::string out;
         for (std::size_t i = 0; i < c.model.strides.size(); ++i) out += (i ? "," : "") + std::to_string(c.model.strides[i]);
         return out;
       },
       [](RunConfig& c, const std::string& v) {
         c.model.strides.clear();
         for (const std::string& part : split_list(v)) c.model.strides.push_back(static_cast<std::size_t>(to_u64(part)));
       }},
      {"model.text_embeddings", [](const RunConfig& c) { return c.text_embeddings.generic_string(); },
       [](RunConfig& c, const std::string& v) { c.text_embeddings = v; }},

      uint_at("train.iterations", [](auto& c) -> auto& { return c.train.iterations; }),
      double_at("train.lr", [](auto& c) -> auto& { return c.train.lr; }),
      double_at("train.weight_decay", [](auto& c) -> auto& { return c.train.weight_decay; }),
      uint_at("train.batch", [](auto& c) -> auto& { return c.train.batch; }),
      double_at("train.lambda_bce", [](auto& c) -> auto& { return c.train.weights.bce; }),
      double_at("train.lambda_dice", [](auto& c) -> auto& { return c.train.weights.dice; }),
      double_at("train.lambda_cls", [](auto& c) -> auto& { return c.train.weights.cls; }),
      uint_at("train.max_pixels", [](auto& c) -> auto& { return c.train.max_pixels; }),
      double_at("train.lr_power", [](auto& c) -> auto& { return c.train.lr_power; }),
      groups_at("train.groups", [](auto& c) -> auto& { return c.train.groups; }),

      uint_at("finetune.iterations", [](auto& c) -> auto& { return c.finetune.iterations; }),
      double_at("finetune.lr", [](auto& c) -> auto& { return c.finetune.lr; }),
      double_at("finetune.p_out", [](auto& c) -> auto& { return c.finetune.p_out; }),
      groups_at("finetune.groups", [](auto& c) -> auto& { return c.finetune.groups; }),

      double_at("bpdl.s", [](auto& c) -> auto& { return c.finetune.bpdl.s; }),
      double_at("bpdl.d", [](auto& c) -> auto& { return c.finetune.bpdl.d; }),
      double_at("bpdl.alpha", [](auto& c) -> auto& { return c.finetune.bpdl.alpha; }),
      double_at("bpdl.lambda", [](auto& c) -> auto& { return c.finetune.bpdl.lambda; }),
  };
  return table;
}

}  // namespace

model::ModelConfig RunConfig::default_model() {
  model::ModelConfig m;
  m.queries = 20;
  m.query_dim = 64;
  m.mask_dim = 64;
  m.text_dim = 64;
  m.templates = 4;
  m.ffn_dim = 256;
  return m;
}

train::TrainConfig RunConfig::default_train() {
  train::TrainConfig t;
  t.iterations = 600;
  t.lr = 1e-3;
  t.batch = 2;
  return t;
}

train::TrainConfig RunConfig::default_finetune() {
  train::TrainConfig t = default_train();
  t.iterations = 300;
  t.groups = train::TrainConfig::finetune_groups();
  return t;
}

model::ModelConfig RunConfig::model_config() const {
  model::ModelConfig m = model;
  m.classes = scene.classes;
  m.feature_dim = scene.feature_dim;
  m.seed = seed;
  return m;
}

train::TrainConfig RunConfig::train_config() const {
  train::TrainConfig t = train;
  t.seed = seed;
  t.bpdl = finetune.bpdl;
  return t;
}

train::TrainConfig RunConfig::finetune_config() const {
  // Shared optimisation keys come from train.*; finetune.* overrides the rest.
  train::TrainConfig t = train_config();
  t.iterations = finetune.iterations;
  t.lr = finetune.lr;
  t.p_out = finetune.p_out;
  t.groups = finetune.groups;
  t.seed = seed;
  return t;
}

void RunConfig::validate() const {
  try {
    scene.validate();
    model_config().validate();
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  if (train_count == 0) throw ConfigError("data.train_count must be positive");
  if (eval_count == 0) throw ConfigError("data.eval_count must be positive");
  if (bank_size == 0 || eval_bank_size == 0) throw ConfigError("outlier bank sizes must be positive");
  if (scene.outlier_classes == 0) throw ConfigError("scene.outlier_classes must be positive");
  if (scene.classes + scene.outlier_classes > data::kOutlierLabel) throw ConfigError("too many scene classes");
  const std::size_t base = model.strides.empty() ? 1 : model.strides.back();
  if (scene.height % base != 0 || scene.width % base != 0) {
    throw ConfigError("scene size must be divisible by the coarsest stride " + std::to_string(base));
  }
  train_config().validate();
  finetune_config().validate();
}

std::string RunConfig::serialize() const {
  std::string out;
  for (const Field& f : fields()) out += f.key + " = " + f.get(*this) + '\n';
  return out;
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    const std::string line = trim(std::string_view(raw).substr(0, hash));
    if (line.empty()) continue;
    const std::string where = "config line " + std::to_string(lineno) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const Field* field = nullptr;
    for (const Field& f : fields())
      if (f.key == key) field = &f;
    if (!field) throw ConfigError(where + "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError(where + "duplicate key '" + key + "'");
    try {
      field->set(cfg, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + key + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  return parse(data::read_file(path));
}

}  // namespace panoos::cli

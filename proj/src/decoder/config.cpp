#include "panoos/decoder/config.hpp"

#include <charconv>
#include <sstream>

#include "panoos/numerics/errors.hpp"

namespace panoos::model {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw FormatError("bad integer for " + key + ": " + v, 0);
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw FormatError("bad boolean for " + key + ": " + v, 0);
}

}  // namespace

void ModelConfig::validate() const {
  if (classes < 1) throw ContractError("model needs at least one class");
  if (feature_dim == 0 || queries == 0 || query_dim == 0 || text_dim == 0 || ffn_dim == 0 || templates == 0) {
    throw ContractError("model dimensions must be positive");
  }
  if (mask_dim != query_dim) {
    throw ContractError("mask_dim (" + std::to_string(mask_dim) + ") must equal query_dim (" +
                        std::to_string(query_dim) + ")");
  }
  if (layers == 0) throw ContractError("model needs at least one decoder layer");
  if (strides.empty()) throw ContractError("model needs at least one feature stride");
  for (std::size_t i = 0; i < strides.size(); ++i) {
    if (strides[i] == 0 || strides[i] % strides[0] != 0 || (i > 0 && strides[i] <= strides[i - 1])) {
      throw ContractError("strides must increase and be multiples of the finest stride");
    }
  }
}

std::string ModelConfig::serialize() const {
  std::ostringstream out;
  out << "classes = " << classes << '\n'
      << "feature_dim = " << feature_dim << '\n'
      << "queries = " << queries << '\n'
      << "query_dim = " << query_dim << '\n'
      << "mask_dim = " << mask_dim << '\n'
      << "text_dim = " << text_dim << '\n'
      << "templates = " << templates << '\n'
      << "layers = " << layers << '\n'
      << "ffn_dim = " << ffn_dim << '\n'
      << "prompt_attention = " << (prompt_attention ? "true" : "false") << '\n'
      << "adaptive_correction = " << (adaptive_correction ? "true" : "false") << '\n'
      << "strides = ";
  for (std::size_t i = 0; i < strides.size(); ++i) out << (i ? "," : "") << strides[i];
  out << '\n' << "seed = " << seed << '\n';
  return out.str();
}

ModelConfig ModelConfig::parse(const std::string& text) {
  ModelConfig cfg;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("model config line without '=': " + line, 0);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "classes") cfg.classes = to_uint(key, value);
    else if (key == "feature_dim") cfg.feature_dim = to_uint(key, value);
    else if (key == "queries") cfg.queries = to_uint(key, value);
    else if (key == "query_dim") cfg.query_dim = to_uint(key, value);
    else if (key == "mask_dim") cfg.mask_dim = to_uint(key, value);
    else if (key == "text_dim") cfg.text_dim = to_uint(key, value);
    else if (key == "templates") cfg.templates = to_uint(key, value);
    else if (key == "layers") cfg.layers = to_uint(key, value);
    else if (key == "ffn_dim") cfg.ffn_dim = to_uint(key, value);
    else if (key == "prompt_attention") cfg.prompt_attention = to_bool(key, value);
    else if (key == "adaptive_correction") cfg.adaptive_correction = to_bool(key, value);
    else if (key == "seed") cfg.seed = to_uint(key, value);
    else if (key == "strides") {
      cfg.strides.clear();
      std::istringstream parts(value);
      std::string part;
      while (std::getline(parts, part, ',')) cfg.strides.push_back(to_uint(key, trim(part)));
    } else {
      throw FormatError("unknown model config key: " + key, 0);
    }
  }
  return cfg;
}

}  // namespace panoos::model

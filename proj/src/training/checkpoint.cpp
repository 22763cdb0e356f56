#include "panoos/training/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <unordered_set>

#include "panoos/numerics/errors.hpp"
#include "panoos/synthdata/raster.hpp"

namespace panoos::train {

namespace {

constexpr std::string_view kMagic = "POSCKPT1";

template <typename T>
void put(std::string& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_string(std::string& out, std::string_view s) {
  put(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return v;
  }

  std::string_view take(std::size_t n) {
    need(n);
    std::string_view s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::string_view get_string() { return take(get<std::uint32_t>()); }
  std::size_t offset() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("checkpoint truncated", bytes_.size());
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(model::Model& model) {
  std::string out(kMagic);
  put_string(out, model.config().serialize());
  const ParameterList params = model.parameters();
  put(out, static_cast<std::uint32_t>(params.size()));
  for (const Parameter* p : params) {
    put_string(out, group_name(p->group));
    put_string(out, p->name);
    put(out, static_cast<std::uint32_t>(p->value.rank()));
    for (std::size_t d : p->value.shape()) put(out, static_cast<std::uint64_t>(d));
    for (double v : p->value.values()) put(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

std::unique_ptr<model::Model> decode_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (r.take(std::min(bytes.size(), kMagic.size())) != kMagic) throw FormatError("not a POSCKPT1 checkpoint", 0);
  const std::size_t config_at = r.offset();
  model::ModelConfig config;
  try {
    config = model::ModelConfig::parse(std::string(r.get_string()));
  } catch (const FormatError& e) {
    throw FormatError(std::string("checkpoint model config: ") + e.what(), config_at);
  }
  auto model = std::make_unique<model::Model>(config);

  const std::uint32_t count = r.get<std::uint32_t>();
  if (count != model->parameters().size()) {
    throw FormatError("checkpoint holds " + std::to_string(count) + " parameters, model has " +
                          std::to_string(model->parameters().size()),
                      r.offset());
  }
  std::unordered_set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t at = r.offset();
    const std::string tag(r.get_string());
    const std::string name(r.get_string());
    Parameter* p = model->find(name);
    if (!p) throw FormatError("checkpoint parameter '" + name + "' is unknown", at);
    if (!seen.insert(name).second) throw FormatError("checkpoint repeats parameter '" + name + "'", at);
    if (tag != group_name(p->group)) {
      throw FormatError("checkpoint parameter '" + name + "' has group '" + tag + "', expected '" +
                            std::string(group_name(p->group)) + "'",
                        at);
    }
    const std::uint32_t rank = r.get<std::uint32_t>();
    Shape shape;
    for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(static_cast<std::size_t>(r.get<std::uint64_t>()));
    if (shape != p->value.shape()) {
      throw FormatError("checkpoint parameter '" + name + "' has shape " + shape_str(shape) + ", expected " +
                            shape_str(p->value.shape()),
                        at);
    }
    for (double& v : p->value.values()) v = std::bit_cast<double>(r.get<std::uint64_t>());
  }
  if (!r.done()) throw FormatError("trailing bytes after checkpoint", r.offset());
  return model;
}

void save_checkpoint(const std::filesystem::path& path, model::Model& model) {
  data::write_file(path, encode_checkpoint(model));
}

std::unique_ptr<model::Model> load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(data::read_file(path));
}

}  // namespace panoos::train

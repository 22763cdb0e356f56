#include "panoos/synthdata/raster.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>

#include "panoos/numerics/errors.hpp"

namespace panoos::data {

namespace {

// Largest payload accepted when decoding; guards rows*cols overflow.
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 34;

struct Header {
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  std::size_t payload_offset = 0;
};

std::string header_line(std::string_view magic, std::size_t rows, std::size_t cols) {
  return std::string(magic) + ' ' + std::to_string(rows) + ' ' + std::to_string(cols) + '\n';
}

std::uint64_t parse_dim(std::string_view bytes, std::size_t& pos) {
  const std::size_t start = pos;
  std::uint64_t value = 0;
  while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
    const std::uint64_t digit = static_cast<std::uint64_t>(bytes[pos] - '0');
    if (value > (std::numeric_limits<std::uint64_t>::max() - digit) / 10) {
      throw FormatError("dimension overflows 64 bits", start);
    }
    value = value * 10 + digit;
    ++pos;
  }
  if (pos == start) throw FormatError("expected a decimal dimension", start);
  if (value == 0) throw FormatError("dimension must be positive", start);
  return value;
}

Header parse_header(std::string_view bytes, std::string_view magic, std::size_t elem_size) {
  if (bytes.size() < magic.size() || bytes.substr(0, magic.size()) != magic) {
    throw FormatError("bad magic, expected \"" + std::string(magic) + "\"", 0);
  }
  std::size_t pos = magic.size();
  auto expect = [&](char c) {
    if (pos >= bytes.size() || bytes[pos] != c) {
      throw FormatError(std::string("expected ") + (c == '\n' ? "newline" : "space") + " in header", pos);
    }
    ++pos;
  };
  Header h;
  expect(' ');
  h.rows = parse_dim(bytes, pos);
  expect(' ');
  h.cols = parse_dim(bytes, pos);
  expect('\n');
  if (h.rows > kMaxElements || h.cols > kMaxElements || h.rows > kMaxElements / h.cols) {
    throw FormatError("raster dimensions too large", magic.size());
  }
  h.payload_offset = pos;
  const std::uint64_t need = h.rows * h.cols * elem_size;
  const std::uint64_t have = bytes.size() - pos;
  if (have < need) throw FormatError("truncated payload", bytes.size());
  if (have > need) throw FormatError("trailing bytes after payload", pos + need);
  return h;
}

template <typename U>
void put_le(std::string& out, U bits) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

template <typename U>
U get_le(const char* p) {
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<U>(static_cast<unsigned char>(p[i])) << (8 * i);
  return bits;
}

}  // namespace

std::string encode_score_map(const ScoreMap& map) {
  if (map.values.size() != map.height * map.width || map.values.empty()) {
    throw DimensionError("score map value count does not match " + std::to_string(map.height) + "x" +
                         std::to_string(map.width));
  }
  std::string out = header_line("POSM", map.height, map.width);
  out.reserve(out.size() + map.values.size() * 4);
  for (std::size_t i = 0; i < map.values.size(); ++i) {
    if (!std::isfinite(map.values[i])) throw NumericError("refusing to write non-finite score at index " + std::to_string(i));
    put_le(out, std::bit_cast<std::uint32_t>(map.values[i]));
  }
  return out;
}

std::string encode_label_map(const LabelMap& map) {
  if (map.values.size() != map.height * map.width || map.values.empty()) {
    throw DimensionError("label map value count does not match " + std::to_string(map.height) + "x" +
                         std::to_string(map.width));
  }
  std::string out = header_line("POSL", map.height, map.width);
  out.append(reinterpret_cast<const char*>(map.values.data()), map.values.size());
  return out;
}

std::string encode_embedding(const Tensor& matrix) {
  if (matrix.rank() != 2) throw DimensionError("embedding raster must be a matrix, got " + shape_str(matrix.shape()));
  std::string out = header_line("POSE", matrix.dim(0), matrix.dim(1));
  out.reserve(out.size() + matrix.size() * 8);
  for (std::size_t i = 0; i < matrix.size(); ++i) {
    if (!std::isfinite(matrix[i])) throw NumericError("refusing to write non-finite embedding at index " + std::to_string(i));
    put_le(out, std::bit_cast<std::uint64_t>(matrix[i]));
  }
  return out;
}

ScoreMap decode_score_map(std::string_view bytes) {
  const Header h = parse_header(bytes, "POSM", 4);
  ScoreMap map;
  map.height = h.rows;
  map.width = h.cols;
  map.values.resize(h.rows * h.cols);
  const char* p = bytes.data() + h.payload_offset;
  for (std::size_t i = 0; i < map.values.size(); ++i) map.values[i] = std::bit_cast<float>(get_le<std::uint32_t>(p + 4 * i));
  return map;
}

LabelMap decode_label_map(std::string_view bytes) {
  const Header h = parse_header(bytes, "POSL", 1);
  LabelMap map;
  map.height = h.rows;
  map.width = h.cols;
  const auto* p = reinterpret_cast<const std::uint8_t*>(bytes.data() + h.payload_offset);
  map.values.assign(p, p + h.rows * h.cols);
  return map;
}

Tensor decode_embedding(std::string_view bytes) {
  const Header h = parse_header(bytes, "POSE", 8);
  std::vector<double> values(h.rows * h.cols);
  const char* p = bytes.data() + h.payload_offset;
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = std::bit_cast<double>(get_le<std::uint64_t>(p + 8 * i));
  return Tensor({h.rows, h.cols}, std::move(values));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

void write_score_map(const std::filesystem::path& path, const ScoreMap& map) { write_file(path, encode_score_map(map)); }
void write_label_map(const std::filesystem::path& path, const LabelMap& map) { write_file(path, encode_label_map(map)); }
void write_embedding(const std::filesystem::path& path, const Tensor& matrix) { write_file(path, encode_embedding(matrix)); }

ScoreMap read_score_map(const std::filesystem::path& path) { return decode_score_map(read_file(path)); }
LabelMap read_label_map(const std::filesystem::path& path) { return decode_label_map(read_file(path)); }
Tensor read_embedding(const std::filesystem::path& path) { return decode_embedding(read_file(path)); }

}  // namespace panoos::data

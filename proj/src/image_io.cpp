#include "gddm/image_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <cctype>
#include <fstream>
#include <iterator>

#include "gddm/error.hpp"

namespace gddm {
namespace {

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create " + path.string());
  return out;
}

// Next whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& in, const std::filesystem::path& path) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  if (tok.empty()) throw IoError("truncated PNM header in " + path.string());
  return tok;
}

std::size_t parse_positive(const std::string& tok, const std::filesystem::path& path) {
  std::size_t pos = 0;
  unsigned long v = 0;
  try {
    v = std::stoul(tok, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != tok.size() || v == 0) throw IoError("malformed PNM header value '" + tok + "' in " + path.string());
  return v;
}

template <typename T>
T byteswap(T v) noexcept {
  if constexpr (sizeof(T) == 4) {
    return static_cast<T>(__builtin_bswap32(static_cast<std::uint32_t>(v)));
  } else {
    return static_cast<T>(__builtin_bswap64(static_cast<std::uint64_t>(v)));
  }
}

template <typename T>
void put_le(std::ostream& out, T v) {
  if constexpr (std::endian::native == std::endian::big) v = byteswap(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get_le(std::istream& in, const std::filesystem::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw IoError("truncated file " + path.string());
  if constexpr (std::endian::native == std::endian::big) v = byteswap(v);
  return v;
}

void put_f64(std::ostream& out, double d) { put_le(out, std::bit_cast<std::uint64_t>(d)); }

double get_f64(std::istream& in, const std::filesystem::path& path) {
  return std::bit_cast<double>(get_le<std::uint64_t>(in, path));
}

}  // namespace

Field read_pnm(const std::filesystem::path& path) {
  auto in = open_in(path);
  const std::string magic = header_token(in, path);
  std::size_t channels = 0;
  if (magic == "P5") {
    channels = 1;
  } else if (magic == "P6") {
    channels = 3;
  } else {
    throw IoError("unsupported image format '" + magic + "' in " + path.string() + " (need P5 or P6)");
  }
  const std::size_t width = parse_positive(header_token(in, path), path);
  const std::size_t height = parse_positive(header_token(in, path), path);
  const std::size_t maxval = parse_positive(header_token(in, path), path);
  if (maxval > 255) throw IoError("only 8-bit PNM is supported: " + path.string());

  Field img(Shape{height, width, channels});
  std::vector<unsigned char> bytes(img.size());
  if (!in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()))) {
    throw IoError("truncated pixel data in " + path.string());
  }
  const double scale = 1.0 / static_cast<double>(maxval);
  for (std::size_t i = 0; i < bytes.size(); ++i) img[i] = std::min(1.0, bytes[i] * scale);
  return img;
}

void write_pnm(const std::filesystem::path& path, const Field& image) {
  if (image.channels() != 1 && image.channels() != 3) {
    throw ShapeError("write_pnm: need 1 or 3 channels, got " + std::to_string(image.channels()));
  }
  auto out = open_out(path);
  out << (image.channels() == 1 ? "P5" : "P6") << '\n'
      << image.width() << ' ' << image.height() << "\n255\n";
  std::vector<unsigned char> bytes(image.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const double v = std::isfinite(image[i]) ? std::clamp(image[i], 0.0, 1.0) : 0.0;
    bytes[i] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

Field normalize_for_display(const Field& x) {
  const auto [lo, hi] = std::minmax_element(x.data().begin(), x.data().end());
  Field out(x.shape(), 0.5);
  const double span = *hi - *lo;
  if (span > 0.0) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - *lo) / span;
  }
  return out;
}

void write_raw_field(const std::filesystem::path& path, const Field& x) {
  const Shape s = x.shape();
  constexpr std::size_t u32max = 0xffffffffu;
  if (s.height > u32max || s.width > u32max || s.channels > u32max) {
    throw DimensionError("field too large for raw dump header");
  }
  auto out = open_out(path);
  out.write("GDLF", 4);
  put_le(out, static_cast<std::uint32_t>(s.height));
  put_le(out, static_cast<std::uint32_t>(s.width));
  put_le(out, static_cast<std::uint32_t>(s.channels));
  for (double v : x.data()) put_f64(out, v);
  if (!out) throw IoError("write failed: " + path.string());
}

Field read_raw_field(const std::filesystem::path& path) {
  auto in = open_in(path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "GDLF", 4) != 0) {
    throw IoError("not a raw field dump: " + path.string());
  }
  Shape s;
  s.height = get_le<std::uint32_t>(in, path);
  s.width = get_le<std::uint32_t>(in, path);
  s.channels = get_le<std::uint32_t>(in, path);
  Field x(s);
  for (auto& v : x.data()) v = get_f64(in, path);
  return x;
}

void write_f64_le(const std::filesystem::path& path, std::span<const double> values) {
  auto out = open_out(path);
  for (double v : values) put_f64(out, v);
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<double> read_f64_le(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() % 8 != 0) throw IoError("raw float64 file has a partial record: " + path.string());
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t w;
    std::memcpy(&w, bytes.data() + 8 * i, 8);
    if constexpr (std::endian::native == std::endian::big) w = byteswap(w);
    out[i] = std::bit_cast<double>(w);
  }
  return out;
}

}  // namespace gddm

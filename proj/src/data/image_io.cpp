#include "deblur/data/image_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace deblur {

namespace {

[[noreturn]] void fail(const std::string& path, std::size_t offset, const std::string& what) {
  throw std::runtime_error(path + ": " + what + " at byte offset " + std::to_string(offset));
}

bool is_space(int ch) { return ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r'; }

// Reads an unsigned decimal token followed by exactly one whitespace byte.
std::int64_t read_header_token(const std::vector<char>& bytes, std::size_t& pos,
                               const std::string& path, const char* what) {
  if (pos >= bytes.size() || !std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
    fail(path, pos, std::string("expected ") + what);
  }
  std::int64_t value = 0;
  while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
    value = value * 10 + (bytes[pos] - '0');
    if (value > 1'000'000'000) fail(path, pos, std::string(what) + " out of range");
    ++pos;
  }
  if (pos >= bytes.size() || !is_space(bytes[pos])) {
    fail(path, pos, std::string("expected single whitespace after ") + what);
  }
  ++pos;
  return value;
}

}  // namespace

Tensor load_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw std::runtime_error("cannot open " + path);
  const std::streamsize size = in.tellg();
  in.seekg(0);
  std::vector<char> bytes(static_cast<std::size_t>(size));
  in.read(bytes.data(), size);
  if (!in) throw std::runtime_error("read failed for " + path);

  std::size_t pos = 0;
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    fail(path, 0, "not a binary PGM (P5) or PPM (P6) file");
  }
  const std::int64_t channels = bytes[1] == '6' ? 3 : 1;
  pos = 2;
  if (pos >= bytes.size() || !is_space(bytes[pos])) {
    fail(path, pos, "expected single whitespace after magic");
  }
  ++pos;
  const std::int64_t width = read_header_token(bytes, pos, path, "width");
  const std::int64_t height = read_header_token(bytes, pos, path, "height");
  if (width < 1 || height < 1) fail(path, pos, "non-positive image dimensions");
  const std::size_t maxval_pos = pos;
  const std::int64_t maxval = read_header_token(bytes, pos, path, "maxval");
  if (maxval != 255) fail(path, maxval_pos, "maxval " + std::to_string(maxval) + " unsupported (must be 255)");

  const std::size_t expected = static_cast<std::size_t>(width * height * channels);
  if (bytes.size() - pos != expected) {
    fail(path, pos,
         "payload has " + std::to_string(bytes.size() - pos) + " bytes, expected " +
             std::to_string(expected));
  }

  Tensor image = Tensor::zeros({1, channels, height, width});
  auto pd = image.data();
  const auto* raster = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  for (std::int64_t y = 0; y < height; ++y) {
    for (std::int64_t x = 0; x < width; ++x) {
      for (std::int64_t c = 0; c < channels; ++c) {
        const float p = static_cast<float>(raster[(y * width + x) * channels + c]);
        pd[(c * height + y) * width + x] = 2.0f * (p / 255.0f) - 1.0f;
      }
    }
  }
  return image;
}

void save_image(const std::string& path, const Tensor& image) {
  const Shape s = image.shape();
  if (s.n != 1 || (s.c != 1 && s.c != 3)) {
    throw std::invalid_argument("save_image: shape " + s.str() +
                                " not a single 1- or 3-channel image");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  char header[64];
  const int header_len = std::snprintf(header, sizeof(header), "P%c\n%lld %lld\n255\n",
                                       s.c == 3 ? '6' : '5', static_cast<long long>(s.w),
                                       static_cast<long long>(s.h));
  out.write(header, header_len);

  auto pd = image.data();
  std::vector<unsigned char> raster(static_cast<std::size_t>(s.h * s.w * s.c));
  for (std::int64_t y = 0; y < s.h; ++y) {
    for (std::int64_t x = 0; x < s.w; ++x) {
      for (std::int64_t c = 0; c < s.c; ++c) {
        const double v = (static_cast<double>(pd[(c * s.h + y) * s.w + x]) + 1.0) / 2.0 * 255.0;
        double q = std::round(v);  // round half away from zero
        if (q < 0.0) q = 0.0;
        if (q > 255.0) q = 255.0;
        raster[(y * s.w + x) * s.c + c] = static_cast<unsigned char>(q);
      }
    }
  }
  out.write(reinterpret_cast<const char*>(raster.data()),
            static_cast<std::streamsize>(raster.size()));
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace deblur

#include "edffd/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "edffd/error.hpp"

namespace edffd::io {
namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint8_t quantize(float v) {
  if (!std::isfinite(v)) return 0;
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

ImageBuffer decode_png(const std::vector<std::uint8_t>& bytes, const fs::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw Error(ErrorCode::Io, "invalid PNG " + path.string() + ": " + image.message);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int channels = color ? 3 : 1;
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw Error(ErrorCode::Io, "cannot decode PNG " + path.string() + ": " + image.message);
  }
  std::vector<float> data(pixels.size());
  std::transform(pixels.begin(), pixels.end(), data.begin(),
                 [](std::uint8_t v) { return static_cast<float>(v) / 255.0f; });
  return ImageBuffer(static_cast<int>(image.width), static_cast<int>(image.height), channels,
                     std::move(data));
}

// Reads the next whitespace-separated header token, skipping '#' comments.
std::size_t pnm_token(const std::vector<std::uint8_t>& b, std::size_t pos, long& value) {
  while (pos < b.size()) {
    if (b[pos] == '#') {
      while (pos < b.size() && b[pos] != '\n') ++pos;
    } else if (std::isspace(b[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  std::size_t start = pos;
  while (pos < b.size() && std::isdigit(b[pos])) ++pos;
  if (start == pos) throw Error(ErrorCode::Io, "malformed PNM header");
  value = std::stol(std::string(b.begin() + start, b.begin() + pos));
  return pos;
}

ImageBuffer decode_pnm(const std::vector<std::uint8_t>& b, const fs::path& path) {
  const int channels = b[1] == '5' ? 1 : 3;
  long w = 0, h = 0, maxval = 0;
  std::size_t pos = pnm_token(b, 2, w);
  pos = pnm_token(b, pos, h);
  pos = pnm_token(b, pos, maxval);
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535 || pos >= b.size()) {
    throw Error(ErrorCode::Io, "malformed PNM header in " + path.string());
  }
  ++pos;  // single whitespace after maxval
  const std::size_t n = static_cast<std::size_t>(w) * h * channels;
  const std::size_t bps = maxval > 255 ? 2 : 1;
  if (b.size() < pos + n * bps) throw Error(ErrorCode::Io, "truncated PNM " + path.string());
  std::vector<float> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t o = pos + i * bps;
    const unsigned v = bps == 2 ? (static_cast<unsigned>(b[o]) << 8) | b[o + 1] : b[o];
    data[i] = static_cast<float>(v) / static_cast<float>(maxval);
  }
  return ImageBuffer(static_cast<int>(w), static_cast<int>(h), channels, std::move(data));
}

}  // namespace

ImageBuffer read_image(const fs::path& path) {
  const auto bytes = slurp(path);
  if (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0) return decode_png(bytes, path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6')) {
    return decode_pnm(bytes, path);
  }
  throw Error(ErrorCode::Io, "unsupported image format: " + path.string());
}

std::vector<std::uint8_t> encode_png(const ImageBuffer& img) {
  std::vector<std::uint8_t> pixels(img.data().size());
  std::transform(img.data().begin(), img.data().end(), pixels.begin(), quantize);
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = img.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels.data(), 0, nullptr)) {
    throw Error(ErrorCode::Io, std::string("PNG sizing failed: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels.data(), 0, nullptr)) {
    throw Error(ErrorCode::Io, std::string("PNG encoding failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

std::vector<std::uint8_t> encode_pnm(const ImageBuffer& img) {
  std::ostringstream header;
  header << (img.channels() == 3 ? "P6" : "P5") << '\n'
         << img.width() << ' ' << img.height() << "\n255\n";
  const std::string h = header.str();
  std::vector<std::uint8_t> out(h.begin(), h.end());
  out.reserve(out.size() + img.data().size());
  for (float v : img.data()) out.push_back(quantize(v));
  return out;
}

std::vector<std::uint8_t> encode_for_path(const ImageBuffer& img, const fs::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") return encode_pnm(img);
  return encode_png(img);
}

ImageBuffer mask_to_image(const Mask& mask) {
  ImageBuffer out(mask.width(), mask.height(), 1);
  std::copy(mask.data().begin(), mask.data().end(), out.data().begin());
  return out;
}

void write_file_atomic(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw Error(ErrorCode::Io, "short write to " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorCode::Io, "cannot rename onto " + path.string());
  }
}

void write_image(const fs::path& path, const ImageBuffer& img) {
  write_file_atomic(path, encode_for_path(img, path));
}

}  // namespace edffd::io

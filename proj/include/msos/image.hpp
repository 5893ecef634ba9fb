#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"

namespace msos {

/// Real 2D raster, row-major: data[y * width + x].
struct Image {
  int width = 0, height = 0;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, double v = 0.0) : width(w), height(h), data(static_cast<size_t>(w) * h, v) {}

  double& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
  double at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }
  size_t size() const { return data.size(); }
};

inline double l2_norm(const Image& f) {
  double s = 0;
  for (double v : f.data) s += v * v;
  return std::sqrt(s);
}

inline double relative_l2(const Image& a, const Image& ref) {
  double num = 0, den = 0;
  for (size_t i = 0; i < ref.size(); ++i) {
    num += (a.data[i] - ref.data[i]) * (a.data[i] - ref.data[i]);
    den += ref.data[i] * ref.data[i];
  }
  return den > 0 ? std::sqrt(num / den) : std::sqrt(num);
}

/// PSNR with peak = dynamic range (max - min) of the reference.
inline double psnr(const Image& a, const Image& ref) {
  double mse = 0;
  for (size_t i = 0; i < ref.size(); ++i) mse += (a.data[i] - ref.data[i]) * (a.data[i] - ref.data[i]);
  mse /= static_cast<double>(ref.size());
  const auto [mn, mx] = std::minmax_element(ref.data.begin(), ref.data.end());
  const double peak = *mx - *mn;
  return 10.0 * std::log10(peak * peak / mse);
}

/// Quarter-turn counterclockwise rotation about pixel (0,0) with periodic wrap:
/// out(x, y) = in(y, -x mod n). Requires a square image.
inline Image rotate_quarter(const Image& f) {
  const int n = f.width;
  Image g(n, n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) g.at(x, y) = f.at(y, (n - x) % n);
  return g;
}

/// Periodic integer translation: out(x, y) = in(x - dx, y - dy).
inline Image translate(const Image& f, int dx, int dy) {
  Image g(f.width, f.height);
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x) {
      const int sx = ((x - dx) % f.width + f.width) % f.width;
      const int sy = ((y - dy) % f.height + f.height) % f.height;
      g.at(x, y) = f.at(sx, sy);
    }
  return g;
}

namespace io {

inline std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const void* data, size_t n) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out) throw IoError("write failed for '" + path + "'");
}

/// Binary PGM (P5), 8 or 16 bit, mapped to [0, 1].
inline Image read_pgm(const std::string& path) {
  const auto buf = read_file(path);
  size_t pos = 0;
  auto token = [&]() {
    while (pos < buf.size()) {
      if (buf[pos] == '#') {
        while (pos < buf.size() && buf[pos] != '\n') ++pos;
      } else if (std::isspace(buf[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    std::string t;
    while (pos < buf.size() && !std::isspace(buf[pos])) t += static_cast<char>(buf[pos++]);
    if (t.empty()) throw IoError("truncated PGM header in '" + path + "' at byte " + std::to_string(pos));
    return t;
  };
  if (token() != "P5") throw IoError("unsupported format in '" + path + "': expected binary PGM (P5)");
  int w = 0, h = 0, maxv = 0;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    maxv = std::stoi(token());
  } catch (const std::invalid_argument&) {
    throw IoError("malformed PGM header in '" + path + "' at byte " + std::to_string(pos));
  }
  if (w <= 0 || h <= 0 || maxv <= 0 || maxv > 65535)
    throw IoError("invalid PGM header values in '" + path + "'");
  ++pos;  // single whitespace after maxval
  const size_t bpp = maxv < 256 ? 1 : 2;
  const size_t need = static_cast<size_t>(w) * h * bpp;
  if (buf.size() < pos + need)
    throw IoError("truncated PGM data in '" + path + "' at byte " + std::to_string(buf.size()) +
                  " (expected " + std::to_string(pos + need) + ")");
  Image img(w, h);
  for (size_t i = 0; i < img.size(); ++i) {
    const unsigned v = bpp == 1 ? buf[pos + i] : (buf[pos + 2 * i] << 8) | buf[pos + 2 * i + 1];
    img.data[i] = static_cast<double>(v) / maxv;
  }
  return img;
}

inline uint16_t quantize(double v, int maxv) {
  return static_cast<uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * maxv));
}

inline void write_pgm(const std::string& path, const Image& img, int bits = 8) {
  const int maxv = bits == 16 ? 65535 : 255;
  std::string hdr = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n" +
                    std::to_string(maxv) + "\n";
  std::vector<unsigned char> out(hdr.begin(), hdr.end());
  for (double v : img.data) {
    const uint16_t q = quantize(v, maxv);
    if (bits == 16) out.push_back(static_cast<unsigned char>(q >> 8));
    out.push_back(static_cast<unsigned char>(q & 0xff));
  }
  write_file(path, out.data(), out.size());
}

inline Image read_png(const std::string& path) {
  png_image im;
  std::memset(&im, 0, sizeof im);
  im.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&im, path.c_str()))
    throw IoError("cannot read PNG '" + path + "': " + im.message);
  const int channels = PNG_IMAGE_SAMPLE_CHANNELS(im.format);
  if (channels != 1) {
    png_image_free(&im);
    throw IoError("unsupported channel count (" + std::to_string(channels) + ") in '" + path + "'");
  }
  const bool wide = PNG_IMAGE_SAMPLE_COMPONENT_SIZE(im.format) == 2;
  im.format = wide ? PNG_FORMAT_LINEAR_Y : PNG_FORMAT_GRAY;
  std::vector<unsigned char> buf(PNG_IMAGE_SIZE(im));
  if (!png_image_finish_read(&im, nullptr, buf.data(), 0, nullptr))
    throw IoError("truncated or corrupt PNG '" + path + "': " + im.message);
  Image img(static_cast<int>(im.width), static_cast<int>(im.height));
  for (size_t i = 0; i < img.size(); ++i) {
    if (wide) {
      uint16_t v;
      std::memcpy(&v, &buf[2 * i], 2);
      img.data[i] = v / 65535.0;
    } else {
      img.data[i] = buf[i] / 255.0;
    }
  }
  return img;
}

/// 8-bit grayscale PNG, values clamped to [0, 1].
inline void write_png(const std::string& path, const Image& img) {
  std::vector<unsigned char> buf(img.size());
  for (size_t i = 0; i < img.size(); ++i) buf[i] = static_cast<unsigned char>(quantize(img.data[i], 255));
  png_image im;
  std::memset(&im, 0, sizeof im);
  im.version = PNG_IMAGE_VERSION;
  im.width = img.width;
  im.height = img.height;
  im.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&im, path.c_str(), 0, buf.data(), 0, nullptr))
    throw IoError("cannot write PNG '" + path + "': " + im.message);
}

/// 8-bit RGB PNG from interleaved bytes.
inline void write_png_rgb(const std::string& path, int w, int h, const std::vector<unsigned char>& rgb) {
  png_image im;
  std::memset(&im, 0, sizeof im);
  im.version = PNG_IMAGE_VERSION;
  im.width = w;
  im.height = h;
  im.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&im, path.c_str(), 0, rgb.data(), 0, nullptr))
    throw IoError("cannot write PNG '" + path + "': " + im.message);
}

/// Raw float32 little-endian with a 16-byte header: "MSRF", width, height, reserved.
inline void write_raw(const std::string& path, const Image& img) {
  std::vector<unsigned char> out(16 + 4 * img.size());
  std::memcpy(out.data(), "MSRF", 4);
  const int32_t hdr[3] = {img.width, img.height, 0};
  std::memcpy(out.data() + 4, hdr, 12);
  for (size_t i = 0; i < img.size(); ++i) {
    const float v = static_cast<float>(img.data[i]);
    std::memcpy(out.data() + 16 + 4 * i, &v, 4);
  }
  write_file(path, out.data(), out.size());
}

inline Image read_raw(const std::string& path) {
  const auto buf = read_file(path);
  if (buf.size() < 16 || std::memcmp(buf.data(), "MSRF", 4) != 0)
    throw IoError("unsupported format in '" + path + "': missing raw float header");
  int32_t hdr[3];
  std::memcpy(hdr, buf.data() + 4, 12);
  if (hdr[0] <= 0 || hdr[1] <= 0) throw IoError("invalid raw dimensions in '" + path + "'");
  Image img(hdr[0], hdr[1]);
  if (buf.size() < 16 + 4 * img.size())
    throw IoError("truncated raw data in '" + path + "' at byte " + std::to_string(buf.size()));
  for (size_t i = 0; i < img.size(); ++i) {
    float v;
    std::memcpy(&v, buf.data() + 16 + 4 * i, 4);
    img.data[i] = v;
  }
  return img;
}

inline std::string extension(const std::string& path) {
  const auto dot = path.find_last_of('.');
  if (dot == std::string::npos) return "";
  std::string e = path.substr(dot + 1);
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return e;
}

/// Dispatch on extension: .pgm, .png, .raw/.f32.
inline Image read_image(const std::string& path) {
  const auto e = extension(path);
  if (e == "pgm") return read_pgm(path);
  if (e == "png") return read_png(path);
  if (e == "raw" || e == "f32") return read_raw(path);
  throw IoError("unsupported format for '" + path + "'");
}

inline void write_image(const std::string& path, const Image& img) {
  const auto e = extension(path);
  if (e == "pgm") return write_pgm(path, img);
  if (e == "png") return write_png(path, img);
  if (e == "raw" || e == "f32") return write_raw(path, img);
  throw IoError("unsupported format for '" + path + "'");
}

/// Linear rescale to [0, 1] for display.
inline Image normalize_display(const Image& f) {
  const auto [mn, mx] = std::minmax_element(f.data.begin(), f.data.end());
  Image g(f.width, f.height);
  const double r = *mx - *mn;
  for (size_t i = 0; i < f.size(); ++i) g.data[i] = r > 0 ? (f.data[i] - *mn) / r : 0.0;
  return g;
}

}  // namespace io
}  // namespace msos

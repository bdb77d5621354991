#include "revhalf/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace revhalf {

namespace fs = std::filesystem;

namespace {

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

std::string encode_png(int height, int width, int channels, const std::vector<std::uint8_t>& pixels) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels.data(), 0, nullptr)) {
    throw IoError(std::string("png encode failed: ") + image.message);
  }
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels.data(), 0, nullptr)) {
    throw IoError(std::string("png encode failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

std::vector<std::uint8_t> decode_png(const fs::path& path, png_uint_32 format, int& height, int& width) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw IoError("cannot read PNG " + path.string() + ": " + image.message);
  }
  image.format = format;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&image);
    throw IoError("cannot decode PNG " + path.string() + ": " + image.message);
  }
  height = static_cast<int>(image.height);
  width = static_cast<int>(image.width);
  return buf;
}

// Source interval [lo, hi) of target index i, and its overlap with source pixel s.
std::vector<std::vector<std::pair<int, double>>> area_weights(int src, int dst) {
  std::vector<std::vector<std::pair<int, double>>> w(static_cast<std::size_t>(dst));
  const double scale = static_cast<double>(src) / dst;
  for (int i = 0; i < dst; ++i) {
    const double lo = i * scale;
    const double hi = (i + 1) * scale;
    for (int s = static_cast<int>(std::floor(lo)); s < static_cast<int>(std::ceil(hi)) && s < src; ++s) {
      const double overlap = std::min(hi, s + 1.0) - std::max(lo, static_cast<double>(s));
      if (overlap > 0) w[static_cast<std::size_t>(i)].emplace_back(s, overlap / scale);
    }
  }
  return w;
}

Plane resample(const Plane& src, int y0, int x0, int side, int target) {
  const auto wy = area_weights(side, target);
  const auto wx = area_weights(side, target);
  Plane out(target, target);
  for (int i = 0; i < target; ++i) {
    for (int j = 0; j < target; ++j) {
      double s = 0.0;
      for (auto [sy, ay] : wy[static_cast<std::size_t>(i)]) {
        for (auto [sx, ax] : wx[static_cast<std::size_t>(j)]) s += ay * ax * src.at(y0 + sy, x0 + sx);
      }
      out.at(i, j) = s;
    }
  }
  return out;
}

}  // namespace

void write_file_atomic(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " -> " + path.string() + ": " + ec.message());
}

RgbRaster read_png_rgb(const fs::path& path) {
  int h = 0, w = 0;
  auto buf = decode_png(path, PNG_FORMAT_RGB, h, w);
  RgbRaster out{Plane(h, w), Plane(h, w), Plane(h, w)};
  for (std::size_t i = 0; i < static_cast<std::size_t>(h) * w; ++i) {
    out.r[i] = buf[3 * i] / 255.0;
    out.g[i] = buf[3 * i + 1] / 255.0;
    out.b[i] = buf[3 * i + 2] / 255.0;
  }
  return out;
}

Plane read_png_gray(const fs::path& path) {
  int h = 0, w = 0;
  auto buf = decode_png(path, PNG_FORMAT_GRAY, h, w);
  Plane out(h, w);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = buf[i] / 255.0;
  return out;
}

void write_png(const fs::path& path, const ColorImage& img) {
  std::vector<std::uint8_t> px(static_cast<std::size_t>(img.height()) * img.width() * 3);
  for (std::size_t i = 0; i < img.r().size(); ++i) {
    px[3 * i] = to_byte(img.r()[i]);
    px[3 * i + 1] = to_byte(img.g()[i]);
    px[3 * i + 2] = to_byte(img.b()[i]);
  }
  write_file_atomic(path, encode_png(img.height(), img.width(), 3, px));
}

void write_png(const fs::path& path, const GrayImage& img) {
  std::vector<std::uint8_t> px(img.plane().size());
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = to_byte(img.plane()[i]);
  write_file_atomic(path, encode_png(img.height(), img.width(), 1, px));
}

void write_png(const fs::path& path, const BinaryImage& img) {
  std::vector<std::uint8_t> px(img.size());
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = img.bits()[i] ? 255 : 0;
  write_file_atomic(path, encode_png(img.height(), img.width(), 1, px));
}

void write_pbm(const fs::path& path, const BinaryImage& img) {
  std::ostringstream out;
  out << "P4\n" << img.width() << " " << img.height() << "\n";
  const int row_bytes = (img.width() + 7) / 8;
  std::string row(static_cast<std::size_t>(row_bytes), '\0');
  for (int y = 0; y < img.height(); ++y) {
    std::fill(row.begin(), row.end(), '\0');
    for (int x = 0; x < img.width(); ++x) {
      if (img.at(y, x) == 0) row[static_cast<std::size_t>(x / 8)] |= static_cast<char>(0x80 >> (x % 8));
    }
    out << row;
  }
  write_file_atomic(path, out.str());
}

BinaryImage read_pbm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  auto next_token = [&]() {
    std::string tok;
    char c;
    while (in.get(c)) {
      if (c == '#') {
        std::string skip;
        std::getline(in, skip);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(c))) {
        if (!tok.empty()) break;
        continue;
      }
      tok.push_back(c);
    }
    return tok;
  };
  if (next_token() != "P4") throw IoError(path.string() + " is not a binary PBM (P4)");
  int w = 0, h = 0;
  try {
    w = std::stoi(next_token());
    h = std::stoi(next_token());
  } catch (const std::exception&) {
    throw IoError(path.string() + ": malformed PBM header");
  }
  const int row_bytes = (w + 7) / 8;
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(w) * h);
  std::string row(static_cast<std::size_t>(row_bytes), '\0');
  for (int y = 0; y < h; ++y) {
    if (!in.read(row.data(), row_bytes)) throw IoError(path.string() + ": truncated PBM data");
    for (int x = 0; x < w; ++x) {
      const bool black = (static_cast<unsigned char>(row[static_cast<std::size_t>(x / 8)]) >> (7 - x % 8)) & 1;
      bits[static_cast<std::size_t>(y) * w + x] = black ? 0 : 1;
    }
  }
  return BinaryImage(h, w, std::move(bits));
}

BinaryImage read_halftone(const fs::path& path) {
  if (path.extension() == ".pbm") return read_pbm(path);
  Plane p = read_png_gray(path);
  std::vector<std::uint8_t> bits(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) bits[i] = p[i] > 0.0 ? 1 : 0;
  return BinaryImage(p.height(), p.width(), std::move(bits));
}

RgbRaster center_crop_resize(const RgbRaster& src, int target) {
  const int side = std::min(src.height(), src.width());
  if (side <= 0) throw DimensionError("cannot crop an empty image");
  const int y0 = (src.height() - side) / 2;
  const int x0 = (src.width() - side) / 2;
  RgbRaster out;
  out.r = resample(src.r, y0, x0, side, target);
  out.g = resample(src.g, y0, x0, side, target);
  out.b = resample(src.b, y0, x0, side, target);
  return out;
}

ColorImage to_color_image(RgbRaster raster) {
  return ColorImage::clipped(std::move(raster.r), std::move(raster.g), std::move(raster.b));
}

}  // namespace revhalf

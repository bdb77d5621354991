#include <zlib.h>

#include <stdexcept>

#include "csv.hpp"
#include "revhalf/evaluation.hpp"

namespace revhalf {

namespace {

BinaryImage rotate90(const BinaryImage& img) {
  BinaryImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) out.set(x, img.height() - 1 - y, img.at(y, x) != 0);
  }
  return out;
}

BinaryImage mirror(const BinaryImage& img) {
  BinaryImage out(img.height(), img.width());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) out.set(y, img.width() - 1 - x, img.at(y, x) != 0);
  }
  return out;
}

/// Raw deflate (no zlib header), as stored in a ZIP entry.
std::size_t deflated_size(std::span<const std::uint8_t> bytes) {
  z_stream zs{};
  if (deflateInit2(&zs, 9, Z_DEFLATED, -15, 9, Z_DEFAULT_STRATEGY) != Z_OK) {
    throw std::runtime_error("deflateInit2 failed");
  }
  std::vector<std::uint8_t> out(deflateBound(&zs, static_cast<uLong>(bytes.size())));
  zs.next_in = const_cast<Bytef*>(bytes.data());
  zs.avail_in = static_cast<uInt>(bytes.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  const std::size_t n = zs.total_out;
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw std::runtime_error("deflate did not finish");
  return n;
}

}  // namespace

std::vector<BinaryImage> dihedral_variants(const BinaryImage& img) {
  std::vector<BinaryImage> out;
  BinaryImage r = img;
  for (int k = 0; k < 4; ++k) {
    out.push_back(r);
    out.push_back(mirror(r));
    r = rotate90(r);
  }
  return out;
}

EntropyReport entropy_rate(const std::vector<BinaryImage>& halftones) {
  if (halftones.empty()) throw std::invalid_argument("entropy_rate needs at least one image");
  EntropyReport report;
  for (const auto& h : halftones) {
    for (const auto& v : dihedral_variants(h)) {
      report.raw_bytes += v.size();
      report.compressed_bytes += deflated_size(v.bits());
    }
  }
  report.rate = 100.0 * (1.0 - static_cast<double>(report.compressed_bytes) / static_cast<double>(report.raw_bytes));
  return report;
}

std::string entropy_csv(const std::vector<EntropyRow>& rows) {
  std::string out = "# schema=entropy/1\nmethod,images,raw_bytes,compressed_bytes,rate\n";
  for (const auto& r : rows) {
    out += r.method + "," + std::to_string(r.images) + "," + std::to_string(r.report.raw_bytes) + "," +
           std::to_string(r.report.compressed_bytes) + "," + csv::num(r.report.rate, 4) + "\n";
  }
  return out;
}

}  // namespace revhalf

#include "revhalf/archive.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "revhalf/image_io.hpp"

namespace revhalf {

namespace {

constexpr char kMagic[8] = {'R', 'V', 'H', 'A', 'L', 'F', '\0', '\1'};

static_assert(std::endian::native == std::endian::little, "archive format assumes a little-endian host");

}  // namespace

const ArchiveTensor* Archive::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

void write_archive(const std::filesystem::path& path, const Archive& archive) {
  nlohmann::json header;
  header["kind"] = archive.kind;
  header["version"] = archive.version;
  header["meta"] = archive.meta;
  nlohmann::json list = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& t : archive.tensors) {
    list.push_back({{"name", t.name}, {"shape", t.shape}, {"offset", offset}, {"count", t.data.size()}});
    offset += t.data.size();
  }
  header["tensors"] = list;
  const std::string text = header.dump();

  std::string bytes(kMagic, sizeof kMagic);
  const std::uint64_t len = text.size();
  bytes.append(reinterpret_cast<const char*>(&len), sizeof len);
  bytes += text;
  bytes.reserve(bytes.size() + offset * sizeof(float));
  for (const auto& t : archive.tensors) {
    bytes.append(reinterpret_cast<const char*>(t.data.data()), t.data.size() * sizeof(float));
  }
  write_file_atomic(path, bytes);
}

Archive read_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open archive " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();
  if (bytes.size() < sizeof kMagic + 8 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw IoError("not an archive: " + path.string());
  }
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + sizeof kMagic, sizeof len);
  const std::size_t body = sizeof kMagic + sizeof len;
  if (len > bytes.size() - body) throw IoError("truncated archive header: " + path.string());

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(body, len));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad archive header in " + path.string() + ": " + e.what());
  }
  Archive out;
  const std::size_t data_start = body + len;
  try {
    out.kind = header.at("kind").get<std::string>();
    out.version = header.at("version").get<int>();
    out.meta = header.value("meta", nlohmann::json::object());
    for (const auto& t : header.at("tensors")) {
      ArchiveTensor at;
      at.name = t.at("name").get<std::string>();
      at.shape = t.at("shape").get<std::vector<int>>();
      const auto offset = t.at("offset").get<std::uint64_t>();
      const auto count = t.at("count").get<std::uint64_t>();
      const std::size_t begin = data_start + offset * sizeof(float);
      if (begin + count * sizeof(float) > bytes.size()) throw IoError("truncated tensor " + at.name);
      at.data.resize(count);
      std::memcpy(at.data.data(), bytes.data() + begin, count * sizeof(float));
      out.tensors.push_back(std::move(at));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad archive header in " + path.string() + ": " + e.what());
  }
  return out;
}

std::string hash_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
  return out;
}

}  // namespace revhalf

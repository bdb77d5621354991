#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace revhalf {

struct ArchiveTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<float> data;
};

/// Named float32 tensors plus a JSON header. Layout on disk:
/// 8-byte magic, u64 header length, JSON header, raw little-endian floats.
struct Archive {
  std::string kind;
  int version = 1;
  nlohmann::json meta = nlohmann::json::object();
  std::vector<ArchiveTensor> tensors;

  const ArchiveTensor* find(const std::string& name) const;
};

/// Atomic write (temp file, then rename). Throws IoError.
void write_archive(const std::filesystem::path& path, const Archive& archive);

/// Throws IoError on unreadable or malformed files.
Archive read_archive(const std::filesystem::path& path);

/// FNV-1a over the bytes of `text`, as 16 hex digits.
std::string hash_hex(const std::string& text);

}  // namespace revhalf

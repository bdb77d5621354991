#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "revhalf/image.hpp"
#include "revhalf/network.hpp"

namespace revhalf::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitCheckpoint = 3;
inline constexpr int kExitIo = 4;

/// Flags may also be set through environment variables with this prefix,
/// e.g. REVHALF_SEED or REVHALF_CHECKPOINT.
inline constexpr const char* kEnvPrefix = "REVHALF_";

inline constexpr const char* kManifestName = "manifest.json";

const char* version();

struct RunManifest {
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::string tool_version;
  std::string started;
  std::string finished;

  nlohmann::json to_json() const;
};

/// Writes `dir`/manifest.json atomically.
void write_manifest(const std::filesystem::path& dir, const RunManifest& manifest);

/// Restorations below this PSNR are flagged in the round-trip report.
inline constexpr double kRoundtripPsnrThreshold = 20.0;

struct RoundtripReport {
  double binarity = 0.0;
  double tone_psnr = 0.0;
  double restore_psnr = 0.0;
  bool below_threshold = false;
  std::vector<std::filesystem::path> outputs;

  nlohmann::json to_json() const;
};

/// Dithers `img`, restores it, and writes halftone.pbm, halftone.png,
/// restored.png, error_map.png and roundtrip.json into `out_dir`.
RoundtripReport roundtrip_check(const ModelBundle& bundle, const ColorImage& img, const std::filesystem::path& out_dir,
                                std::uint64_t seed);

/// Runs one subcommand. Exit codes: 0 success, 2 usage or bad config,
/// 3 missing or unreadable checkpoint, 4 I/O failure, 1 anything else.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, const char* const* argv);

}  // namespace revhalf::cli

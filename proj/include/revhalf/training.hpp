#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "revhalf/image.hpp"
#include "revhalf/losses.hpp"
#include "revhalf/network.hpp"

namespace revhalf {

// ---- data ---------------------------------------------------------------------

struct IngestResult {
  std::vector<ColorImage> images;
  std::vector<std::filesystem::path> sources;
  int skipped = 0;
  std::vector<std::string> warnings;
};

/// PNG files directly inside `dir`, sorted by name.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

/// Center-crops and resizes every readable file to target x target. Files
/// that fail to decode are skipped and counted.
IngestResult ingest_images(const std::vector<std::filesystem::path>& paths, int target);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

/// Seeded shuffle of 0..n-1, first `train_count` to train, the rest to val.
Split split_indices(std::size_t n, std::size_t train_count, std::uint64_t seed);

/// Smooth color field with a few soft-edged shapes; stands in for natural
/// photographs when no dataset directory is configured.
ColorImage synthetic_scene(int size, std::uint64_t seed);
std::vector<ColorImage> synthetic_dataset(int count, int size, std::uint64_t seed);

struct Dataset {
  std::vector<ColorImage> train;
  std::vector<ColorImage> val;
  std::vector<std::string> train_names;
  std::vector<std::string> val_names;
  std::vector<std::string> warnings;
};

struct TrainConfig;

/// Ingests cfg.dataset_dir and splits it with cfg.seed, keeping at most
/// cfg.train_images / cfg.val_images; synthetic scenes when the directory is empty.
Dataset load_dataset(const TrainConfig& cfg);

/// Constant image of a uniformly drawn RGB color.
ColorImage sample_plain_color(int height, int width, std::uint64_t seed);

/// Training images with their luminance, chrominance and error-diffused
/// references. References are computed once, optionally cached on disk.
class TrainingSet {
 public:
  struct Sample {
    ColorImage color;
    GrayImage gray;
    ChromaImage chroma;
    BinaryImage ostromoukhov;
    BinaryImage floyd_steinberg;
  };

  explicit TrainingSet(std::vector<ColorImage> images, std::optional<std::filesystem::path> cache_dir = {});

  std::size_t size() const { return samples_.size(); }
  const Sample& operator[](std::size_t i) const { return samples_[i]; }
  int height() const { return samples_.front().color.height(); }
  int width() const { return samples_.front().color.width(); }

 private:
  std::vector<Sample> samples_;
};

/// Ostromoukhov halftone of `gray`, read from or written to `cache_dir`
/// under a key derived from the pixel values.
BinaryImage cached_reference(const GrayImage& gray, const std::optional<std::filesystem::path>& cache_dir);

// ---- optimizer ------------------------------------------------------------------

struct AdamState {
  long step = 0;
  std::map<std::string, std::vector<float>> m;
  std::map<std::string, std::vector<float>> v;
};

struct Adam {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  /// Updates every parameter with requires_grad set, then clears its gradient.
  void step(const std::vector<NamedTensor>& params, AdamState& state) const;
};

// ---- stage configuration --------------------------------------------------------

enum class StageId { kGuidance, kPredictor, kStage1, kStage2, kStage3 };

const char* stage_name(StageId s);
StageId parse_stage(const std::string& s);
int stage_number(StageId s);

enum class Variant { kStandard, kPFroze, kEndToEnd };
Variant parse_variant(const std::string& s);
const char* variant_name(Variant v);

struct StageConfig {
  StageId stage = StageId::kStage1;
  int epochs = 1;
  LossWeights weights;
  std::set<Component> frozen;
  bool gate_enabled = false;
  /// Stage 2 only: train the predictor jointly, adding the luminance loss.
  bool joint_predictor = false;
  int batch_size = 4;
  /// Stages 1 and 2: plain-color samples appended to each batch for L_blue.
  int plain_colors = 1;
  double step_size = 1e-3;
  std::uint64_t seed = 1;

  /// Throws std::invalid_argument when the stage invariants do not hold.
  void validate() const;
};

struct TrainConfig {
  NetConfig net;
  int image_size = 64;
  int train_images = 32;
  int val_images = 8;
  std::string dataset_dir;
  std::string cache_dir;
  std::string perceptual = "none";
  int guidance_epochs = 10;
  int predictor_epochs = 10;
  int stage1_epochs = 10;
  int stage2_epochs = 20;
  int stage3_epochs = 10;
  int batch_size = 4;
  int plain_colors = 1;
  double step_size = 1e-3;
  std::uint64_t seed = 1;
  Variant variant = Variant::kStandard;
  std::optional<double> gamma;
  LossWeights stage1_weights = LossWeights::stage1();
  LossWeights stage2_weights = LossWeights::stage2();
  LossWeights lumin_weights = LossWeights::lumin();

  static TrainConfig desk();
  static TrainConfig full();

  StageConfig stage(StageId s) const;
  nlohmann::json to_json() const;
  std::string hash() const;
  void validate() const;
};

/// Parses `key = value` lines; `#` starts a comment. `preset = desk|full`
/// must come first if present. Throws std::invalid_argument on unknown keys
/// or malformed values.
TrainConfig parse_config(const std::string& text);
TrainConfig load_config(const std::filesystem::path& path);

/// Applies one `key=value` override (same keys as the config file).
void apply_config_value(TrainConfig& cfg, const std::string& key, const std::string& value);

/// Perceptual extractor named by cfg.perceptual: "none", "random", or a path.
std::shared_ptr<const PerceptualExtractor> make_perceptual(const TrainConfig& cfg);

// ---- training -----------------------------------------------------------------------

struct EpochRecord {
  StageId stage = StageId::kStage1;
  int epoch = 0;
  double total = 0.0;
  double bin = 0.0;
  double tone = 0.0;
  double blue = 0.0;
  double guidance = 0.0;
  double chroma = 0.0;
  double perceptual = 0.0;
  double content = 0.0;
  double mae = 0.0;
  double seconds = 0.0;
};

struct StageProgress {
  StageId stage = StageId::kStage1;
  int next_epoch = 0;
  AdamState adam;
  std::vector<EpochRecord> log;
};

/// Return false to stop after this epoch.
using EpochHook = std::function<bool(const EpochRecord&, const StageProgress&)>;

/// Raised when a loss becomes NaN or infinite.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs `cfg.epochs` epochs of one stage, continuing from `progress`.
StageProgress train_stage(ModelBundle& bundle, const TrainingSet& data, const StageConfig& cfg,
                          StageProgress progress = {}, const EpochHook& hook = {});

/// Stage objective averaged over the whole set, without updating anything.
/// Uses evaluation seeds derived from cfg.seed.
EpochRecord evaluate_stage(const ModelBundle& bundle, const TrainingSet& data, const StageConfig& cfg);

ModelBundle& pretrain_guidance(ModelBundle& bundle, const TrainingSet& data, const StageConfig& cfg);
ModelBundle& pretrain_predictor(ModelBundle& bundle, const TrainingSet& data, const StageConfig& cfg);
ModelBundle& train_stage1(ModelBundle& bundle, const TrainingSet& data, const StageConfig& cfg);
ModelBundle& train_stage2(ModelBundle& bundle, const TrainingSet& data, const StageConfig& cfg);
ModelBundle& train_stage3(ModelBundle& bundle, const TrainingSet& data, const StageConfig& cfg);

/// Full schedule for a variant: guidance and predictor pretraining, then
/// stages 1-3 (p_froze skips stage 3; end_to_end trains the predictor in
/// stage 2 and skips stage 3). The hook sees every epoch of every stage.
std::vector<EpochRecord> train_variant(ModelBundle& bundle, const TrainingSet& data, const TrainConfig& cfg,
                                       const EpochHook& hook = {});

/// Mean chroma MSE of decoder(halftone_pipeline(x)) against x's chroma.
double chroma_mse(const ModelBundle& bundle, const TrainingSet& data, std::uint64_t seed);

/// Mean absolute error of the refined predictor output on halftones from the
/// bundle's own encoder.
double luminance_mae(const ModelBundle& bundle, const TrainingSet& data, std::uint64_t seed);

/// Same, on classical halftones (Floyd-Steinberg when `floyd`, else Ostromoukhov).
double luminance_mae_classical(const ModelBundle& bundle, const TrainingSet& data, bool floyd, bool refined);

// ---- checkpoints and logs --------------------------------------------------------------

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  ModelBundle bundle;
  StageProgress progress;
  std::uint64_t seed = 0;
  std::string config_hash;
};

void save_checkpoint(const std::filesystem::path& path, const ModelBundle& bundle, const StageProgress& progress,
                     std::uint64_t seed, const std::string& config_hash);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// CSV: stage,epoch,total,bin,tone,blue,guidance,chroma,perceptual,content,mae,seconds
std::string training_log_csv(const std::vector<EpochRecord>& log);

}  // namespace revhalf

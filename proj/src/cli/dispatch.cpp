#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <ctime>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

#include "revhalf/archive.hpp"
#include "revhalf/cli.hpp"
#include "revhalf/evaluation.hpp"
#include "revhalf/halftone.hpp"
#include "revhalf/image_io.hpp"
#include "revhalf/imaging.hpp"
#include "revhalf/training.hpp"

#ifndef REVHALF_VERSION
#define REVHALF_VERSION "0.0.0"
#endif

namespace revhalf::cli {

namespace fs = std::filesystem;

const char* version() { return REVHALF_VERSION; }

nlohmann::json RunManifest::to_json() const {
  return {{"command", command},           {"config_hash", config_hash}, {"seed", seed},
          {"inputs", inputs},             {"outputs", outputs},         {"tool_version", tool_version},
          {"started", started},           {"finished", finished}};
}

void write_manifest(const fs::path& dir, const RunManifest& manifest) {
  fs::create_directories(dir);
  write_file_atomic(dir / kManifestName, manifest.to_json().dump(2) + "\n");
}

nlohmann::json RoundtripReport::to_json() const {
  std::vector<std::string> files;
  for (const auto& p : outputs) files.push_back(p.filename().string());
  return {{"binarity_percent", binarity},
          {"tone_psnr", std::isfinite(tone_psnr) ? nlohmann::json(tone_psnr) : nlohmann::json("inf")},
          {"restore_psnr", std::isfinite(restore_psnr) ? nlohmann::json(restore_psnr) : nlohmann::json("inf")},
          {"below_threshold", below_threshold},
          {"threshold_psnr", kRoundtripPsnrThreshold},
          {"outputs", files}};
}

RoundtripReport roundtrip_check(const ModelBundle& bundle, const ColorImage& img, const fs::path& out_dir,
                                std::uint64_t seed) {
  const BinaryImage halftone = halftone_pipeline(bundle, img, seed);
  const ColorImage restored = restore_pipeline(bundle, halftone);
  RoundtripReport r;
  std::size_t binary = 0;
  for (auto v : halftone.bits()) binary += v <= 1 ? 1 : 0;
  r.binarity = 100.0 * static_cast<double>(binary) / static_cast<double>(halftone.size());
  r.tone_psnr = tone_psnr(halftone, rgb_to_ycbcr(img).luma);
  r.restore_psnr = psnr_from_mse(color_mse(restored, img));
  r.below_threshold = r.restore_psnr < kRoundtripPsnrThreshold;

  fs::create_directories(out_dir);
  r.outputs = {out_dir / "halftone.pbm", out_dir / "halftone.png", out_dir / "restored.png", out_dir / "error_map.png",
               out_dir / "roundtrip.json"};
  write_pbm(r.outputs[0], halftone);
  write_png(r.outputs[1], halftone);
  write_png(r.outputs[2], restored);
  write_png(r.outputs[3], error_map(restored, img));
  write_file_atomic(r.outputs[4], r.to_json().dump(2) + "\n");
  return r;
}

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

ModelBundle load_model(const std::string& path) {
  if (path.empty()) throw UsageError("--checkpoint is required");
  if (!fs::exists(path)) throw CheckpointError("checkpoint not found: " + path);
  try {
    if (read_archive(path).kind == "checkpoint") return std::move(load_checkpoint(path).bundle);
    return load_bundle(path);
  } catch (const std::exception& e) {
    throw CheckpointError("cannot load checkpoint " + path + ": " + e.what());
  }
}

/// Center crop to the largest multiple of 8 in each dimension.
ColorImage crop_to_multiple_of_8(const RgbRaster& src) {
  const int h = src.height() / 8 * 8;
  const int w = src.width() / 8 * 8;
  if (h < 8 || w < 8) throw DimensionError("image is smaller than 8x8");
  const int oy = (src.height() - h) / 2;
  const int ox = (src.width() - w) / 2;
  std::vector<Plane> ch;
  for (const Plane* p : {&src.r, &src.g, &src.b}) {
    Plane q(h, w);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) q.at(y, x) = p->at(y + oy, x + ox);
    }
    ch.push_back(std::move(q));
  }
  return ColorImage(std::move(ch[0]), std::move(ch[1]), std::move(ch[2]));
}

ColorImage read_color(const fs::path& path, int size) {
  const RgbRaster raster = read_png_rgb(path);
  if (size > 0) return to_color_image(center_crop_resize(raster, size));
  return crop_to_multiple_of_8(raster);
}

/// Directories expand to their PNG files.
std::vector<fs::path> expand_inputs(const std::vector<std::string>& in) {
  std::vector<fs::path> out;
  for (const auto& s : in) {
    if (fs::is_directory(s)) {
      for (auto& p : list_images(s)) out.push_back(p);
    } else {
      if (!fs::exists(s)) throw IoError("input not found: " + s);
      out.emplace_back(s);
    }
  }
  if (out.empty()) throw UsageError("no input images");
  return out;
}

enum class Method { kOurs, kFloydSteinberg, kOstromoukhov, kWhiteNoise };

Method parse_method(const std::string& s) {
  if (s == "ours") return Method::kOurs;
  if (s == "floyd-steinberg") return Method::kFloydSteinberg;
  if (s == "ostromoukhov") return Method::kOstromoukhov;
  if (s == "white-noise") return Method::kWhiteNoise;
  throw UsageError("unknown method '" + s + "'");
}

ClassicalMethod classical(Method m) {
  if (m == Method::kFloydSteinberg) return ClassicalMethod::kFloydSteinberg;
  if (m == Method::kOstromoukhov) return ClassicalMethod::kOstromoukhov;
  throw UsageError("not a classical method");
}

bool is_file_output(const std::string& out, std::initializer_list<const char*> exts) {
  const auto ext = fs::path(out).extension().string();
  for (const char* e : exts) {
    if (ext == e) return true;
  }
  return false;
}

fs::path parent_or_cwd(const fs::path& p) { return p.has_parent_path() ? p.parent_path() : fs::path("."); }

struct Options {
  std::string config;
  std::string checkpoint;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> in;
  std::string out;
  std::string method = "ours";
  int size = 0;
};

class Runner {
 public:
  Runner(std::string command, const std::vector<std::string>& args, std::ostream& out) : log_(out) {
    manifest_.command = std::move(command);
    manifest_.tool_version = version();
    manifest_.started = utc_now();
    std::string joined;
    for (const auto& a : args) joined += a + '\x1f';
    manifest_.config_hash = hash_hex(joined);
  }

  std::ostream& log() { return log_; }
  RunManifest& manifest() { return manifest_; }

  std::uint64_t seed(const Options& o) {
    std::uint64_t s = 1;
    if (!o.config.empty()) {
      const auto cfg = load_config(o.config);
      s = cfg.seed;
      manifest_.config_hash = cfg.hash();
      manifest_.inputs.push_back(o.config);
    }
    if (o.seed) s = *o.seed;
    manifest_.seed = s;
    return s;
  }

  void input(const fs::path& p) { manifest_.inputs.push_back(p.string()); }
  void output(const fs::path& p) { manifest_.outputs.push_back(p.string()); }

  void text(const fs::path& p, const std::string& content) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    write_file_atomic(p, content);
    output(p);
  }

  void finish(const fs::path& dir) {
    manifest_.finished = utc_now();
    write_manifest(dir, manifest_);
  }

 private:
  std::ostream& log_;
  RunManifest manifest_;
};

BinaryImage dither_one(Method m, const ModelBundle* bundle, const ColorImage& img, std::uint64_t seed) {
  switch (m) {
    case Method::kOurs:
      return halftone_pipeline(*bundle, img, seed);
    case Method::kWhiteNoise:
      return white_noise_halftone(rgb_to_ycbcr(img).luma, seed);
    default:
      return classical_halftone(classical(m), rgb_to_ycbcr(img).luma);
  }
}

void run_dither(Runner& run, const Options& o, bool baseline) {
  const Method m = parse_method(o.method);
  if (baseline && (m == Method::kOurs || m == Method::kWhiteNoise)) {
    throw UsageError("baseline needs --method floyd-steinberg or ostromoukhov");
  }
  const std::uint64_t seed = run.seed(o);
  std::optional<ModelBundle> bundle;
  if (m == Method::kOurs) {
    bundle.emplace(load_model(o.checkpoint));
    run.input(o.checkpoint);
  }
  const auto inputs = expand_inputs(o.in);
  const bool single = inputs.size() == 1 && is_file_output(o.out, {".pbm", ".png"});
  const fs::path dir = single ? parent_or_cwd(o.out) : fs::path(o.out);
  fs::create_directories(dir);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const ColorImage img = read_color(inputs[i], o.size);
    run.input(inputs[i]);
    const BinaryImage h = dither_one(m, bundle ? &*bundle : nullptr, img, derive_seed({seed, i}));
    const fs::path target = single ? fs::path(o.out) : dir / (inputs[i].stem().string() + ".pbm");
    if (target.extension() == ".png") {
      write_png(target, h);
    } else {
      write_pbm(target, h);
    }
    run.output(target);
    run.log() << inputs[i].filename().string() << ": " << h.height() << "x" << h.width() << " mean " << h.mean()
              << " tone_psnr " << tone_psnr(h, rgb_to_ycbcr(img).luma) << " dB -> " << target.string() << "\n";
  }
  run.finish(dir);
}

void run_restore(Runner& run, const Options& o, const std::vector<std::string>& references, bool neutral) {
  run.seed(o);
  const ModelBundle bundle = load_model(o.checkpoint);
  run.input(o.checkpoint);
  std::vector<fs::path> inputs;
  for (const auto& s : o.in) {
    if (fs::is_directory(s)) {
      for (const auto& e : fs::directory_iterator(s)) {
        if (e.path().extension() == ".pbm") inputs.push_back(e.path());
      }
    } else {
      if (!fs::exists(s)) throw IoError("input not found: " + s);
      inputs.emplace_back(s);
    }
  }
  std::sort(inputs.begin(), inputs.end());
  if (inputs.empty()) throw UsageError("no halftones to restore");
  if (!references.empty() && references.size() != inputs.size()) {
    throw UsageError("--reference needs one image per input");
  }
  const bool single = inputs.size() == 1 && is_file_output(o.out, {".png"});
  const fs::path dir = single ? parent_or_cwd(o.out) : fs::path(o.out);
  fs::create_directories(dir);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const BinaryImage h = read_halftone(inputs[i]);
    run.input(inputs[i]);
    const ColorImage rgb = restore_pipeline(bundle, h, neutral);
    const fs::path target = single ? fs::path(o.out) : dir / (inputs[i].stem().string() + ".png");
    write_png(target, rgb);
    run.output(target);
    run.log() << inputs[i].filename().string() << " -> " << target.string();
    if (!references.empty()) {
      const ColorImage ref = read_color(references[i], 0);
      run.input(references[i]);
      if (ref.height() != rgb.height() || ref.width() != rgb.width()) {
        throw DimensionError("reference " + references[i] + " does not match the halftone size");
      }
      run.log() << " psnr " << psnr_from_mse(color_mse(rgb, ref)) << " dB";
    }
    run.log() << "\n";
  }
  run.finish(dir);
}

struct TrainOptions {
  std::string stage = "all";
  std::string variant;
  std::optional<double> gamma;
  std::vector<std::string> set;
};

std::vector<StageId> stages_for(const TrainConfig& cfg, const std::string& stage) {
  if (stage != "all") return {parse_stage(stage)};
  std::vector<StageId> s = {StageId::kGuidance, StageId::kPredictor, StageId::kStage1, StageId::kStage2};
  if (cfg.variant == Variant::kStandard) s.push_back(StageId::kStage3);
  return s;
}

void run_train(Runner& run, const Options& o, const TrainOptions& t) {
  TrainConfig cfg = o.config.empty() ? TrainConfig::desk() : load_config(o.config);
  if (!o.config.empty()) run.input(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (!t.variant.empty()) cfg.variant = parse_variant(t.variant);
  if (t.gamma) cfg.gamma = *t.gamma;
  for (const auto& kv : t.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
    apply_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  if (o.out.empty()) throw UsageError("--out directory is required");
  const fs::path dir(o.out);
  fs::create_directories(dir);
  run.manifest().config_hash = cfg.hash();
  run.manifest().seed = cfg.seed;
  run.text(dir / "config.json", cfg.to_json().dump(2) + "\n");

  const Dataset ds = load_dataset(cfg);
  for (const auto& w : ds.warnings) run.log() << "warning: " << w << "\n";
  if (!cfg.dataset_dir.empty()) run.input(cfg.dataset_dir);
  const TrainingSet data(ds.train, cfg.cache_dir.empty() ? std::nullopt : std::optional<fs::path>(cfg.cache_dir));
  run.log() << "training on " << data.size() << " images of " << data.height() << "x" << data.width() << "\n";

  ModelBundle bundle(cfg.net);
  StageProgress resume;
  const auto stages = stages_for(cfg, t.stage);
  if (!o.checkpoint.empty()) {
    if (!fs::exists(o.checkpoint)) throw CheckpointError("checkpoint not found: " + o.checkpoint);
    run.input(o.checkpoint);
    try {
      if (read_archive(o.checkpoint).kind == "checkpoint") {
        Checkpoint ck = load_checkpoint(o.checkpoint);
        if (ck.config_hash != cfg.hash()) run.log() << "warning: checkpoint was written under a different config\n";
        bundle = std::move(ck.bundle);
        if (ck.progress.stage == stages.front()) resume = std::move(ck.progress);
      } else {
        bundle = load_bundle(o.checkpoint);
      }
    } catch (const std::exception& e) {
      throw CheckpointError("cannot load checkpoint " + o.checkpoint + ": " + e.what());
    }
    if (!(bundle.config() == cfg.net)) throw UsageError("checkpoint network does not match the config");
  }
  bundle.perceptual = make_perceptual(cfg);

  std::vector<EpochRecord> log;
  const fs::path ck_path = dir / "checkpoint.rvh";
  for (StageId s : stages) {
    const StageConfig sc = cfg.stage(s);
    auto hook = [&](const EpochRecord& r, const StageProgress& p) {
      run.log() << "stage " << stage_name(r.stage) << " epoch " << r.epoch << " total " << r.total << " ("
                << r.seconds << " s)\n";
      save_checkpoint(ck_path, bundle, p, cfg.seed, cfg.hash());
      return true;
    };
    StageProgress progress = train_stage(bundle, data, sc, std::move(resume), hook);
    resume = {};
    log.insert(log.end(), progress.log.begin(), progress.log.end());
    save_checkpoint(dir / ("stage_" + std::string(stage_name(s)) + ".rvh"), bundle, progress, cfg.seed, cfg.hash());
    run.output(dir / ("stage_" + std::string(stage_name(s)) + ".rvh"));
  }
  if (fs::exists(ck_path)) run.output(ck_path);
  save_bundle(dir / "bundle.rvh", bundle);
  run.output(dir / "bundle.rvh");
  run.text(dir / "train_log.csv", training_log_csv(log));
  run.finish(dir);
}

std::vector<ColorImage> read_all(Runner& run, const std::vector<fs::path>& inputs, int size,
                                 std::vector<std::string>* names = nullptr) {
  std::vector<ColorImage> out;
  for (const auto& p : inputs) {
    out.push_back(read_color(p, size));
    run.input(p);
    if (names) names->push_back(p.filename().string());
  }
  return out;
}

void run_metrics(Runner& run, const Options& o) {
  const std::uint64_t seed = run.seed(o);
  const Method m = parse_method(o.method);
  std::vector<std::string> names;
  const auto images = read_all(run, expand_inputs(o.in), o.size, &names);
  MetricsReport report;
  if (m == Method::kOurs) {
    const ModelBundle bundle = load_model(o.checkpoint);
    run.input(o.checkpoint);
    report = evaluate_metrics(bundle, images, names, seed);
  } else {
    report = evaluate_metrics(classical(m), images, names);
  }
  const fs::path out = o.out.empty() ? fs::path("metrics.csv") : fs::path(o.out);
  run.text(out, metrics_csv(report));
  run.log() << "mean tone_psnr " << report.mean.tone_psnr << " dB, ssim " << report.mean.structure_ssim << "\n";
  run.finish(parent_or_cwd(out));
}

void run_spectrum(Runner& run, const Options& o, double gray, int realizations) {
  const std::uint64_t seed = run.seed(o);
  const Method m = parse_method(o.method);
  std::optional<ModelBundle> bundle;
  Halftoner h;
  switch (m) {
    case Method::kOurs:
      bundle.emplace(load_model(o.checkpoint));
      run.input(o.checkpoint);
      h = network_halftoner(*bundle);
      break;
    case Method::kWhiteNoise:
      h = white_noise_halftoner();
      break;
    default:
      h = classical_halftoner(classical(m));
  }
  const int size = o.size > 0 ? o.size : 256;
  const auto report = rapsd_anisotropy(h, gray, size, realizations, seed);
  const fs::path out = o.out.empty() ? fs::path("spectrum.csv") : fs::path(o.out);
  run.text(out, spectrum_csv(report));
  run.log() << "principal frequency " << report.principal_frequency << ", low/high band ratio "
            << low_high_band_ratio(report) << "\n";
  run.finish(parent_or_cwd(out));
}

void run_roundtrip(Runner& run, const Options& o) {
  const std::uint64_t seed = run.seed(o);
  const ModelBundle bundle = load_model(o.checkpoint);
  run.input(o.checkpoint);
  const auto inputs = expand_inputs(o.in);
  if (inputs.size() != 1) throw UsageError("roundtrip takes exactly one image");
  const ColorImage img = read_color(inputs[0], o.size);
  run.input(inputs[0]);
  const fs::path dir = o.out.empty() ? fs::path("roundtrip") : fs::path(o.out);
  const auto r = roundtrip_check(bundle, img, dir, seed);
  for (const auto& p : r.outputs) run.output(p);
  run.log() << "binarity " << r.binarity << "%, tone_psnr " << r.tone_psnr << " dB, restore_psnr " << r.restore_psnr
            << " dB" << (r.below_threshold ? " (below threshold)" : "") << "\n";
  run.finish(dir);
}

void run_entropy(Runner& run, const Options& o) {
  const std::uint64_t seed = run.seed(o);
  const auto images = read_all(run, expand_inputs(o.in), o.size > 0 ? o.size : 256);
  std::vector<GrayImage> lumas;
  for (const auto& img : images) lumas.push_back(rgb_to_ycbcr(img).luma);
  std::vector<EntropyRow> rows;
  auto add = [&](const std::string& name, const std::function<BinaryImage(std::size_t)>& make) {
    std::vector<BinaryImage> hs;
    for (std::size_t i = 0; i < images.size(); ++i) hs.push_back(make(i));
    rows.push_back({name, hs.size(), entropy_rate(hs)});
  };
  add("ostromoukhov", [&](std::size_t i) { return ostromoukhov(lumas[i]); });
  add("floyd-steinberg", [&](std::size_t i) { return floyd_steinberg(lumas[i]); });
  add("white-noise", [&](std::size_t i) { return white_noise_halftone(lumas[i], derive_seed({seed, 0xe1, i})); });
  std::optional<ModelBundle> bundle;
  if (!o.checkpoint.empty()) {
    bundle.emplace(load_model(o.checkpoint));
    run.input(o.checkpoint);
    add("ours", [&](std::size_t i) { return halftone_pipeline(*bundle, images[i], derive_seed({seed, i})); });
  }
  const fs::path out = o.out.empty() ? fs::path("entropy.csv") : fs::path(o.out);
  run.text(out, entropy_csv(rows));
  for (const auto& r : rows) run.log() << r.method << ": " << r.report.rate << "%\n";
  run.finish(parent_or_cwd(out));
}

void run_robustness(Runner& run, const Options& o) {
  const std::uint64_t seed = run.seed(o);
  const ModelBundle bundle = load_model(o.checkpoint);
  run.input(o.checkpoint);
  const auto images = read_all(run, expand_inputs(o.in), o.size);
  const auto report = robustness_suite(bundle, images, seed);
  const fs::path dir = o.out.empty() ? fs::path("robustness") : fs::path(o.out);
  run.text(dir / "robustness.csv", robustness_csv(report));
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const fs::path p = dir / ("error_" + report.rows[i].perturbation + ".png");
    write_png(p, report.error_maps[i]);
    run.output(p);
    run.log() << report.rows[i].perturbation << ": " << report.rows[i].psnr << " dB\n";
  }
  run.finish(dir);
}

void add_common(CLI::App* app, Options& o, bool needs_checkpoint, bool method) {
  app->add_option("--config", o.config, "Config file (key = value)")->envname(std::string(kEnvPrefix) + "CONFIG");
  app->add_option("--seed", o.seed, "Root seed")->envname(std::string(kEnvPrefix) + "SEED");
  auto* ck = app->add_option("--checkpoint", o.checkpoint, "Model bundle or training checkpoint")
                 ->envname(std::string(kEnvPrefix) + "CHECKPOINT");
  if (needs_checkpoint) ck->required();
  app->add_option("--in", o.in, "Input files or directories")->expected(1, -1);
  app->add_option("--out", o.out, "Output file or directory");
  app->add_option("--size", o.size, "Center-crop and resize inputs to this square size");
  if (method) {
    app->add_option("--method", o.method, "ours, floyd-steinberg, ostromoukhov or white-noise")
        ->envname(std::string(kEnvPrefix) + "METHOD");
  }
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Reversible halftoning toolkit", "revhalf"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version());

  Options o;
  TrainOptions t;
  std::vector<std::string> references;
  bool neutral = false;
  double gray = 0.8;
  int realizations = 10;
  std::function<void(Runner&)> action;
  std::string command;

  auto* dither = app.add_subcommand("dither", "Halftone color images (PBM output)");
  add_common(dither, o, false, true);
  dither->callback([&] { command = "dither"; action = [&](Runner& r) { run_dither(r, o, false); }; });

  auto* baseline = app.add_subcommand("baseline", "Classical error diffusion");
  add_common(baseline, o, false, true);
  baseline->callback([&] { command = "baseline"; action = [&](Runner& r) { run_dither(r, o, true); }; });

  auto* restore = app.add_subcommand("restore", "Restore color images from halftones");
  add_common(restore, o, true, false);
  restore->add_option("--reference", references, "Originals for PSNR logging, one per input");
  restore->add_flag("--neutral-chroma", neutral, "Force the chroma planes to 0.5");
  restore->callback([&] { command = "restore"; action = [&](Runner& r) { run_restore(r, o, references, neutral); }; });

  auto* train = app.add_subcommand("train", "Pretraining and the three training stages");
  add_common(train, o, false, false);
  train->add_option("--stage", t.stage, "guidance, predictor, 1, 2, 3 or all")
      ->check(CLI::IsMember({"guidance", "predictor", "1", "2", "3", "all"}));
  train->add_option("--variant", t.variant, "p-froze or end-to-end")->check(CLI::IsMember({"standard", "p-froze", "end-to-end"}));
  train->add_option("--gamma", t.gamma, "Override the stage-2 blue-noise weight");
  train->add_option("--set", t.set, "Config override key=value (repeatable)");
  train->callback([&] { command = "train"; action = [&](Runner& r) { run_train(r, o, t); }; });

  auto* analyze = app.add_subcommand("analyze", "Metrics, spectra and round-trip checks");
  analyze->require_subcommand(1);
  auto* metrics = analyze->add_subcommand("metrics", "Tone PSNR, SSIM and restoration metrics CSV");
  add_common(metrics, o, false, true);
  metrics->callback([&] { command = "analyze metrics"; action = [&](Runner& r) { run_metrics(r, o); }; });
  auto* spectrum = analyze->add_subcommand("spectrum", "RAPSD and anisotropy CSV for a constant gray");
  add_common(spectrum, o, false, true);
  spectrum->add_option("--gray", gray, "Gray level in (0,1)");
  spectrum->add_option("--realizations", realizations, "Dithers averaged");
  spectrum->callback([&] { command = "analyze spectrum"; action = [&](Runner& r) { run_spectrum(r, o, gray, realizations); }; });
  auto* roundtrip = analyze->add_subcommand("roundtrip", "Dither, restore and report one image");
  add_common(roundtrip, o, true, false);
  roundtrip->callback([&] { command = "analyze roundtrip"; action = [&](Runner& r) { run_roundtrip(r, o); }; });

  auto* entropy = app.add_subcommand("entropy", "Deflate compression-rate table");
  add_common(entropy, o, false, false);
  entropy->callback([&] { command = "entropy"; action = [&](Runner& r) { run_entropy(r, o); }; });

  auto* robust = app.add_subcommand("robustness", "Restoration under flip, mask and impulse noise");
  add_common(robust, o, true, false);
  robust->callback([&] { command = "robustness"; action = [&](Runner& r) { run_robustness(r, o); }; });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << version() << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    Runner runner(command, args, out);
    action(runner);
    return kExitOk;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const CheckpointError& e) {
    err << "error: " << e.what() << "\n";
    return kExitCheckpoint;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

int dispatch(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace revhalf::cli

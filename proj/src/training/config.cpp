#include <charconv>
#include <fstream>
#include <sstream>

#include "revhalf/archive.hpp"
#include "revhalf/image_io.hpp"
#include "revhalf/training.hpp"

namespace revhalf {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw std::invalid_argument("bad value for " + key + ": '" + value + "'");
  return out;
}

nlohmann::json weights_json(const LossWeights& w) {
  return {{"alpha", w.alpha}, {"beta", w.beta},   {"gamma", w.gamma}, {"epsilon", w.epsilon},
          {"zeta", w.zeta},   {"eta", w.eta},     {"w_a", w.w_a},     {"w_b", w.w_b}};
}

double* weight_field(LossWeights& w, const std::string& name) {
  if (name == "alpha") return &w.alpha;
  if (name == "beta") return &w.beta;
  if (name == "gamma") return &w.gamma;
  if (name == "epsilon") return &w.epsilon;
  if (name == "zeta") return &w.zeta;
  if (name == "eta") return &w.eta;
  if (name == "w_a") return &w.w_a;
  if (name == "w_b") return &w.w_b;
  return nullptr;
}

}  // namespace

const char* stage_name(StageId s) {
  switch (s) {
    case StageId::kGuidance:
      return "guidance";
    case StageId::kPredictor:
      return "predictor";
    case StageId::kStage1:
      return "1";
    case StageId::kStage2:
      return "2";
    case StageId::kStage3:
      return "3";
  }
  return "?";
}

StageId parse_stage(const std::string& s) {
  if (s == "guidance") return StageId::kGuidance;
  if (s == "predictor") return StageId::kPredictor;
  if (s == "1") return StageId::kStage1;
  if (s == "2") return StageId::kStage2;
  if (s == "3") return StageId::kStage3;
  throw std::invalid_argument("unknown stage '" + s + "'");
}

int stage_number(StageId s) {
  switch (s) {
    case StageId::kStage1:
      return 1;
    case StageId::kStage2:
      return 2;
    case StageId::kStage3:
      return 3;
    default:
      return 0;
  }
}

Variant parse_variant(const std::string& s) {
  if (s == "standard" || s == "ours") return Variant::kStandard;
  if (s == "p-froze" || s == "p_froze") return Variant::kPFroze;
  if (s == "end-to-end" || s == "end_to_end") return Variant::kEndToEnd;
  throw std::invalid_argument("unknown variant '" + s + "'");
}

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kStandard:
      return "standard";
    case Variant::kPFroze:
      return "p-froze";
    case Variant::kEndToEnd:
      return "end-to-end";
  }
  return "?";
}

void StageConfig::validate() const {
  weights.validate();
  if (epochs < 0) throw std::invalid_argument("epochs must be nonnegative");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be positive");
  if (plain_colors < 1) throw std::invalid_argument("plain_colors must be positive");
  if (!(step_size > 0.0)) throw std::invalid_argument("step_size must be positive");
  auto has = [&](Component c) { return frozen.count(c) != 0; };
  switch (stage) {
    case StageId::kStage1:
      if (gate_enabled) throw std::invalid_argument("stage 1 runs with the binary gate removed");
      break;
    case StageId::kStage2:
      if (!gate_enabled) throw std::invalid_argument("stage 2 requires the binary gate");
      if (!joint_predictor && !has(Component::kPredictor)) throw std::invalid_argument("stage 2 freezes the predictor");
      break;
    case StageId::kStage3:
      if (!has(Component::kEncoder) || !has(Component::kDecoder)) {
        throw std::invalid_argument("stage 3 freezes the encoder and decoder");
      }
      break;
    default:
      break;
  }
  if (joint_predictor && stage != StageId::kStage2) throw std::invalid_argument("joint predictor training is a stage 2 option");
}

TrainConfig TrainConfig::desk() {
  TrainConfig c;
  c.net.base_channels = 32;
  c.plain_colors = 4;
  c.step_size = 2e-4;
  c.stage2_weights.eta = 0.0;
  c.lumin_weights.w_a = 0.0;
  c.perceptual = "none";
  return c;
}

TrainConfig TrainConfig::full() {
  TrainConfig c;
  c.net.base_channels = 64;
  c.image_size = 256;
  c.train_images = 13758;
  c.val_images = 3367;
  c.guidance_epochs = 10;
  c.predictor_epochs = 10;
  c.stage1_epochs = 28;
  c.stage2_epochs = 87;
  c.stage3_epochs = 50;
  c.batch_size = 8;
  c.plain_colors = 1;
  c.step_size = 2e-4;
  c.perceptual = "vgg19_conv4_4.rvh";
  return c;
}

StageConfig TrainConfig::stage(StageId s) const {
  StageConfig sc;
  sc.stage = s;
  sc.batch_size = batch_size;
  sc.plain_colors = plain_colors;
  sc.step_size = step_size;
  sc.seed = seed;
  using C = Component;
  switch (s) {
    case StageId::kGuidance:
      sc.epochs = guidance_epochs;
      sc.frozen = {C::kEncoder, C::kDecoder, C::kPredictor};
      sc.gate_enabled = true;
      break;
    case StageId::kPredictor:
      sc.epochs = predictor_epochs;
      sc.weights = lumin_weights;
      sc.frozen = {C::kEncoder, C::kDecoder, C::kGuidance};
      sc.gate_enabled = true;
      break;
    case StageId::kStage1:
      sc.epochs = stage1_epochs;
      sc.weights = stage1_weights;
      sc.frozen = {C::kDecoder, C::kPredictor, C::kGuidance};
      sc.gate_enabled = false;
      break;
    case StageId::kStage2:
      sc.epochs = stage2_epochs;
      sc.weights = stage2_weights;
      if (gamma) sc.weights.gamma = *gamma;
      sc.weights.w_a = lumin_weights.w_a;
      sc.weights.w_b = lumin_weights.w_b;
      sc.gate_enabled = true;
      sc.joint_predictor = variant == Variant::kEndToEnd;
      sc.frozen = {C::kGuidance};
      if (!sc.joint_predictor) sc.frozen.insert(C::kPredictor);
      break;
    case StageId::kStage3:
      sc.epochs = stage3_epochs;
      sc.weights = lumin_weights;
      sc.frozen = {C::kEncoder, C::kDecoder, C::kGuidance};
      sc.gate_enabled = true;
      break;
  }
  return sc;
}

nlohmann::json TrainConfig::to_json() const {
  nlohmann::json j;
  j["net"] = net.to_json();
  j["image_size"] = image_size;
  j["train_images"] = train_images;
  j["val_images"] = val_images;
  j["dataset_dir"] = dataset_dir;
  j["perceptual"] = perceptual;
  j["epochs"] = {guidance_epochs, predictor_epochs, stage1_epochs, stage2_epochs, stage3_epochs};
  j["batch_size"] = batch_size;
  j["plain_colors"] = plain_colors;
  j["step_size"] = step_size;
  j["seed"] = seed;
  j["variant"] = variant_name(variant);
  j["gamma"] = gamma ? nlohmann::json(*gamma) : nlohmann::json(nullptr);
  j["stage1"] = weights_json(stage1_weights);
  j["stage2"] = weights_json(stage2_weights);
  j["lumin"] = weights_json(lumin_weights);
  return j;
}

std::string TrainConfig::hash() const { return hash_hex(to_json().dump()); }

void TrainConfig::validate() const {
  net.validate();
  if (image_size < 8 || image_size % (1 << net.downscales) != 0) {
    throw std::invalid_argument("image_size must be a positive multiple of 2^downscales");
  }
  if (train_images < 1 || val_images < 0) throw std::invalid_argument("image counts must be positive");
  for (int e : {guidance_epochs, predictor_epochs, stage1_epochs, stage2_epochs, stage3_epochs}) {
    if (e < 0) throw std::invalid_argument("epoch counts must be nonnegative");
  }
  if (batch_size < 1) throw std::invalid_argument("batch_size must be positive");
  if (plain_colors < 1) throw std::invalid_argument("plain_colors must be positive");
  if (!(step_size > 0.0)) throw std::invalid_argument("step_size must be positive");
  if (gamma && !(*gamma >= 0.0)) throw std::invalid_argument("gamma must be nonnegative");
  stage1_weights.validate();
  stage2_weights.validate();
  lumin_weights.validate();
  if (perceptual == "none" && (stage2_weights.eta > 0.0 || lumin_weights.w_a > 0.0)) {
    throw std::invalid_argument("perceptual terms are weighted but perceptual = none; set eta and w_a to 0 or "
                                "configure an extractor");
  }
}

void apply_config_value(TrainConfig& cfg, const std::string& key, const std::string& value) {
  auto as_int = [&] { return parse_number<int>(key, value); };
  auto as_double = [&] { return parse_number<double>(key, value); };
  if (key == "preset") {
    if (value == "desk") cfg = TrainConfig::desk();
    else if (value == "full") cfg = TrainConfig::full();
    else throw std::invalid_argument("unknown preset '" + value + "'");
  } else if (key == "seed") {
    cfg.seed = parse_number<std::uint64_t>(key, value);
    cfg.net.seed = cfg.seed;
  } else if (key == "image_size") {
    cfg.image_size = as_int();
  } else if (key == "train_images") {
    cfg.train_images = as_int();
  } else if (key == "val_images") {
    cfg.val_images = as_int();
  } else if (key == "dataset_dir") {
    cfg.dataset_dir = value;
  } else if (key == "cache_dir") {
    cfg.cache_dir = value;
  } else if (key == "perceptual") {
    cfg.perceptual = value;
  } else if (key == "epochs.guidance") {
    cfg.guidance_epochs = as_int();
  } else if (key == "epochs.predictor") {
    cfg.predictor_epochs = as_int();
  } else if (key == "epochs.stage1") {
    cfg.stage1_epochs = as_int();
  } else if (key == "epochs.stage2") {
    cfg.stage2_epochs = as_int();
  } else if (key == "epochs.stage3") {
    cfg.stage3_epochs = as_int();
  } else if (key == "batch_size") {
    cfg.batch_size = as_int();
  } else if (key == "plain_colors") {
    cfg.plain_colors = as_int();
  } else if (key == "step_size") {
    cfg.step_size = as_double();
  } else if (key == "variant") {
    cfg.variant = parse_variant(value);
  } else if (key == "gamma") {
    cfg.gamma = as_double();
  } else if (key == "net.base_channels") {
    cfg.net.base_channels = as_int();
  } else if (key == "net.nib_channels") {
    cfg.net.nib_channels = as_int();
  } else if (key == "net.downscales") {
    cfg.net.downscales = as_int();
    cfg.net.upscales = cfg.net.downscales;
  } else if (key == "net.residual_blocks_unet") {
    cfg.net.residual_blocks_unet = as_int();
  } else if (key == "net.conv_blocks") {
    cfg.net.conv_blocks = as_int();
  } else if (key == "net.predictor_residual_enhance") {
    cfg.net.predictor_residual_enhance = as_int();
  } else if (key == "net.guidance_residual") {
    cfg.net.guidance_residual = as_int();
  } else {
    const auto dot = key.find('.');
    const std::string group = key.substr(0, dot);
    LossWeights* w = group == "stage1" ? &cfg.stage1_weights
                     : group == "stage2" ? &cfg.stage2_weights
                     : group == "lumin" ? &cfg.lumin_weights
                                        : nullptr;
    double* field = (w && dot != std::string::npos) ? weight_field(*w, key.substr(dot + 1)) : nullptr;
    if (!field) throw std::invalid_argument("unknown config key '" + key + "'");
    *field = as_double();
  }
}

TrainConfig parse_config(const std::string& text) {
  TrainConfig cfg = TrainConfig::desk();
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  bool seen_other = false;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "preset" && seen_other) throw std::invalid_argument("preset must precede other keys");
    seen_other = seen_other || key != "preset";
    try {
      apply_config_value(cfg, key, value);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::shared_ptr<const PerceptualExtractor> make_perceptual(const TrainConfig& cfg) {
  if (cfg.perceptual == "none") return nullptr;
  if (cfg.perceptual == "random") {
    return std::make_shared<const PerceptualExtractor>(PerceptualExtractor::random_fallback(cfg.seed));
  }
  if (!std::filesystem::exists(cfg.perceptual)) {
    throw IoError("perceptual weights not found: " + cfg.perceptual + " (use perceptual = random for the offline fallback)");
  }
  return std::make_shared<const PerceptualExtractor>(PerceptualExtractor::load_vgg19(cfg.perceptual));
}

}  // namespace revhalf

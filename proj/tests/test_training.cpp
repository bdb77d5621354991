#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "revhalf/image_io.hpp"
#include "revhalf/imaging.hpp"
#include "revhalf/training.hpp"

using namespace revhalf;
namespace fs = std::filesystem;

namespace {

TrainConfig tiny_config() {
  TrainConfig c = TrainConfig::desk();
  c.net.base_channels = 4;
  c.net.residual_blocks_unet = 1;
  c.net.predictor_residual_enhance = 1;
  c.net.guidance_residual = 1;
  c.image_size = 16;
  c.train_images = 4;
  c.val_images = 2;
  c.batch_size = 2;
  c.guidance_epochs = c.predictor_epochs = c.stage1_epochs = c.stage2_epochs = c.stage3_epochs = 1;
  return c;
}

std::vector<std::vector<float>> snapshot(const std::vector<NamedTensor>& params) {
  std::vector<std::vector<float>> out;
  for (const auto& p : params) out.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("revhalf_test_training_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("config parsing") {
  const auto cfg = parse_config("preset = desk\n# comment\nseed = 9\nnet.base_channels = 8  # trailing\nstage2.gamma = 0.5\n"
                                "variant = p-froze\nplain_colors = 3\n");
  CHECK(cfg.seed == 9);
  CHECK(cfg.net.base_channels == 8);
  CHECK(cfg.stage2_weights.gamma == 0.5);
  CHECK(cfg.variant == Variant::kPFroze);
  CHECK(cfg.plain_colors == 3);
  CHECK(parse_config("preset = full\nperceptual = random\n").stage2_epochs == 87);
  CHECK(TrainConfig::full().stage1_epochs == 28);
  CHECK(TrainConfig::full().stage3_epochs == 50);
  CHECK_THROWS_AS(parse_config("seed = 1\npreset = desk\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("bogus = 1\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("seed = abc\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("net.base_channels = 2\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("stage2.eta = 1\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("no equals sign\n"), std::invalid_argument);
  CHECK(tiny_config().hash() == tiny_config().hash());
  auto other = tiny_config();
  other.seed = 2;
  CHECK(other.hash() != tiny_config().hash());
}

TEST_CASE("stage invariants") {
  const auto cfg = tiny_config();
  CHECK_FALSE(cfg.stage(StageId::kStage1).gate_enabled);
  CHECK(cfg.stage(StageId::kStage2).frozen.count(Component::kPredictor) == 1);
  CHECK(cfg.stage(StageId::kStage3).frozen.count(Component::kEncoder) == 1);
  CHECK(cfg.stage(StageId::kStage3).frozen.count(Component::kDecoder) == 1);
  auto bad = cfg.stage(StageId::kStage1);
  bad.gate_enabled = true;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg.stage(StageId::kStage2);
  bad.frozen.erase(Component::kPredictor);
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg.stage(StageId::kStage3);
  bad.frozen.erase(Component::kDecoder);
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  CHECK_THROWS_AS(parse_variant("sideways"), std::invalid_argument);
  CHECK(parse_stage("guidance") == StageId::kGuidance);
  CHECK_THROWS_AS(parse_stage("4"), std::invalid_argument);

  auto g = cfg;
  g.gamma = 0.3;
  CHECK(g.stage(StageId::kStage2).weights.gamma == 0.3);
  g.variant = Variant::kEndToEnd;
  CHECK(g.stage(StageId::kStage2).frozen.count(Component::kPredictor) == 0);
}

TEST_CASE("split and ingestion") {
  const auto a = split_indices(10, 8, 3);
  CHECK(a.train.size() == 8);
  CHECK(a.val.size() == 2);
  CHECK(a.train == split_indices(10, 8, 3).train);
  std::vector<std::size_t> all(a.train);
  all.insert(all.end(), a.val.begin(), a.val.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);
  CHECK_THROWS_AS(split_indices(3, 4, 1), std::invalid_argument);

  const auto dir = scratch("ingest");
  for (int i = 0; i < 9; ++i) {
    const double v = i / 10.0;
    const ColorImage img(256, 512, v, 1.0 - v, 0.5);
    write_png(dir / ("img_" + std::to_string(i) + ".png"), img);
  }
  std::ofstream(dir / "img_9.png") << "not a png";
  const auto res = ingest_images(list_images(dir), 16);
  CHECK(res.images.size() == 9);
  CHECK(res.skipped == 1);
  CHECK(res.warnings.size() == 1);
  CHECK(res.images[0].height() == 16);
  CHECK(res.images[0].width() == 16);

  auto cfg = tiny_config();
  cfg.dataset_dir = dir.string();
  cfg.train_images = 6;
  const auto ds = load_dataset(cfg);
  CHECK(ds.train.size() == 6);
  CHECK(ds.val.size() == 2);
  CHECK(ds.warnings.size() == 1);
  for (const auto& n : ds.val_names) CHECK(std::find(ds.train_names.begin(), ds.train_names.end(), n) == ds.train_names.end());
  CHECK(load_dataset(cfg).train_names == ds.train_names);
  cfg.train_images = 9;
  CHECK_THROWS_AS(load_dataset(cfg), std::invalid_argument);
  fs::remove_all(dir);

  const auto synth = load_dataset(tiny_config());
  CHECK(synth.train.size() == 4);
  CHECK(synth.val.size() == 2);
}

TEST_CASE("plain colors") {
  double sum[3] = {0, 0, 0};
  for (std::uint64_t s = 0; s < 1000; ++s) {
    const auto p = sample_plain_color(8, 8, s);
    CHECK(p.r().max() == p.r().min());
    sum[0] += p.r().at(0, 0);
    sum[1] += p.g().at(0, 0);
    sum[2] += p.b().at(0, 0);
  }
  for (double m : sum) {
    CHECK(m / 1000 >= 0.45);
    CHECK(m / 1000 <= 0.55);
  }
  CHECK(sample_plain_color(8, 8, 5).g().at(0, 0) == sample_plain_color(8, 8, 5).g().at(0, 0));
}

TEST_CASE("reference cache") {
  const auto dir = scratch("cache");
  const auto imgs = synthetic_dataset(2, 16, 4);
  const TrainingSet first(imgs, dir);
  CHECK(std::distance(fs::directory_iterator(dir), fs::directory_iterator{}) == 2);
  const TrainingSet second(imgs, dir);
  CHECK(second[1].ostromoukhov == first[1].ostromoukhov);
  fs::remove_all(dir);
}

TEST_CASE("adam") {
  auto w = nn::Tensor::from({1, 1, 1, 2}, {1.0f, -1.0f}, true);
  w.grad()[0] = 2.0f;
  w.grad()[1] = -0.5f;
  AdamState st;
  Adam adam;
  adam.lr = 0.1;
  adam.step({{"w", w}}, st);
  // The first bias-corrected step moves each coordinate by lr against the gradient sign.
  CHECK(w.data()[0] == doctest::Approx(0.9).epsilon(1e-5));
  CHECK(w.data()[1] == doctest::Approx(-0.9).epsilon(1e-5));
  CHECK(st.step == 1);
}

TEST_CASE("freeze contracts") {
  const auto cfg = tiny_config();
  const TrainingSet data(load_dataset(cfg).train);
  ModelBundle b(cfg.net);
  for (StageId s : {StageId::kGuidance, StageId::kPredictor, StageId::kStage1, StageId::kStage2, StageId::kStage3}) {
    const auto sc = cfg.stage(s);
    std::map<Component, std::vector<std::vector<float>>> before;
    for (auto c : {Component::kEncoder, Component::kDecoder, Component::kPredictor, Component::kGuidance}) {
      before[c] = snapshot(b.parameters(c));
    }
    train_stage(b, data, sc);
    for (auto& [c, vals] : before) {
      if (sc.frozen.count(c)) {
        CHECK_MESSAGE(snapshot(b.parameters(c)) == vals, stage_name(s), " ", component_name(c));
      } else if (c != Component::kDecoder || s == StageId::kStage2) {
        CHECK_MESSAGE(snapshot(b.parameters(c)) != vals, stage_name(s), " ", component_name(c));
      }
    }
  }
}

TEST_CASE("zero epochs leave parameters unchanged") {
  auto cfg = tiny_config();
  cfg.guidance_epochs = 0;
  const TrainingSet data(load_dataset(cfg).train);
  ModelBundle b(cfg.net);
  const auto before = snapshot(b.parameters());
  const auto p = train_stage(b, data, cfg.stage(StageId::kGuidance));
  CHECK(p.log.empty());
  CHECK(snapshot(b.parameters()) == before);
}

TEST_CASE("resume matches an uninterrupted run") {
  auto cfg = tiny_config();
  cfg.stage2_epochs = 3;
  const TrainingSet data(load_dataset(cfg).train);
  const auto sc = cfg.stage(StageId::kStage2);
  ModelBundle base(cfg.net);

  auto whole = base.clone();
  const auto full = train_stage(whole, data, sc);

  const auto dir = scratch("resume");
  auto part = base.clone();
  auto first = train_stage(part, data, sc, {}, [](const EpochRecord& r, const StageProgress&) { return r.epoch < 0; });
  REQUIRE(first.next_epoch == 1);
  save_checkpoint(dir / "ck.rvh", part, first, cfg.seed, cfg.hash());
  auto ck = load_checkpoint(dir / "ck.rvh");
  CHECK(ck.config_hash == cfg.hash());
  CHECK(ck.progress.stage == StageId::kStage2);
  const auto rest = train_stage(ck.bundle, data, sc, ck.progress);
  REQUIRE(rest.log.size() == full.log.size());
  for (std::size_t i = 0; i < full.log.size(); ++i) {
    CHECK(std::abs(rest.log[i].total - full.log[i].total) <= 1e-6);
    CHECK(std::abs(rest.log[i].chroma - full.log[i].chroma) <= 1e-6);
  }
  CHECK(snapshot(ck.bundle.parameters()) == snapshot(whole.parameters()));
  CHECK_THROWS_AS(train_stage(ck.bundle, data, cfg.stage(StageId::kStage1), ck.progress), std::invalid_argument);

  const auto csv = training_log_csv(full.log);
  CHECK(csv.rfind("stage,epoch,total,bin,tone,blue,guidance,chroma,perceptual,content,mae,seconds\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  CHECK_THROWS(load_checkpoint(dir / "missing.rvh"));
  fs::remove_all(dir);
}

TEST_CASE("variants and determinism") {
  auto cfg = tiny_config();
  const TrainingSet data(load_dataset(cfg).train);

  ModelBundle pretrained(cfg.net);
  train_stage(pretrained, data, cfg.stage(StageId::kGuidance));
  train_stage(pretrained, data, cfg.stage(StageId::kPredictor));
  const auto pred = snapshot(pretrained.parameters(Component::kPredictor));

  auto froze = cfg;
  froze.variant = Variant::kPFroze;
  ModelBundle a(cfg.net);
  const auto log_a = train_variant(a, data, froze);
  CHECK(snapshot(a.parameters(Component::kPredictor)) == pred);
  CHECK(log_a.size() == 4);

  auto e2e = cfg;
  e2e.variant = Variant::kEndToEnd;
  ModelBundle b(cfg.net);
  train_variant(b, data, e2e);
  CHECK(snapshot(b.parameters(Component::kPredictor)) != pred);

  ModelBundle c(cfg.net);
  const auto log_c = train_variant(c, data, froze);
  for (std::size_t i = 0; i < log_a.size(); ++i) CHECK(log_c[i].total == log_a[i].total);

  auto g3 = cfg;
  g3.gamma = 0.3;
  auto g9 = cfg;
  g9.gamma = 0.9;
  auto s3 = pretrained.clone();
  auto s9 = pretrained.clone();
  const auto t3 = train_stage(s3, data, g3.stage(StageId::kStage2));
  const auto t9 = train_stage(s9, data, g9.stage(StageId::kStage2));
  CHECK(t3.log[0].total != t9.log[0].total);
}

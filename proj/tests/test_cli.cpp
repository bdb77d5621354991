#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "revhalf/cli.hpp"
#include "revhalf/image_io.hpp"
#include "revhalf/network.hpp"

using namespace revhalf;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Workspace {
  fs::path dir;
  fs::path image;
  fs::path bundle;

  Workspace() : dir(fs::temp_directory_path() / "revhalf_test_cli") {
    fs::remove_all(dir);
    fs::create_directories(dir / "images");
    image = dir / "images" / "ramp.png";
    Plane r(16, 24), g(16, 24), b(16, 24);
    for (int y = 0; y < 16; ++y) {
      for (int x = 0; x < 24; ++x) {
        r.at(y, x) = x / 23.0;
        g.at(y, x) = y / 15.0;
        b.at(y, x) = 0.5;
      }
    }
    write_png(image, ColorImage(r, g, b));
    NetConfig c;
    c.base_channels = 4;
    c.residual_blocks_unet = 1;
    c.predictor_residual_enhance = 1;
    c.guidance_residual = 1;
    bundle = dir / "bundle.rvh";
    save_bundle(bundle, ModelBundle(c));
  }
  ~Workspace() { fs::remove_all(dir); }

  std::string p(const std::string& rel) const { return (dir / rel).string(); }
};

}  // namespace

TEST_CASE("exit codes") {
  Workspace ws;
  CHECK(run({}).code == cli::kExitUsage);
  CHECK(run({"bogus"}).code == cli::kExitUsage);
  CHECK(run({"dither", "--in", ws.image.string(), "--out", ws.p("x.pbm"), "--checkpoint", ws.p("none.rvh")}).code ==
        cli::kExitCheckpoint);
  std::ofstream(ws.p("junk.rvh")) << "garbage";
  CHECK(run({"restore", "--in", ws.p("x.pbm"), "--out", ws.p("x.png"), "--checkpoint", ws.p("junk.rvh")}).code ==
        cli::kExitCheckpoint);
  CHECK(run({"baseline", "--method", "ostromoukhov", "--in", ws.p("missing.png"), "--out", ws.p("o")}).code == cli::kExitIo);
  CHECK(run({"baseline", "--method", "ours", "--in", ws.image.string(), "--out", ws.p("o")}).code == cli::kExitUsage);
  std::ofstream(ws.p("bad.cfg")) << "seed = 1\nno_such_key = 3\n";
  const auto bad = run({"train", "--config", ws.p("bad.cfg"), "--out", ws.p("t")});
  CHECK(bad.code == cli::kExitUsage);
  CHECK(bad.err.find("no_such_key") != std::string::npos);
  CHECK(run({"--version"}).code == cli::kExitOk);
}

TEST_CASE("dither writes a PBM and a manifest") {
  Workspace ws;
  const auto r = run({"dither", "--checkpoint", ws.bundle.string(), "--in", ws.image.string(), "--out", ws.p("out/x.pbm"), "--seed", "7"});
  REQUIRE(r.code == 0);
  CHECK(slurp(ws.p("out/x.pbm")).rfind("P4", 0) == 0);
  const auto h = read_pbm(ws.p("out/x.pbm"));
  CHECK(h.height() == 16);
  CHECK(h.width() == 24);
  const auto m = nlohmann::json::parse(slurp(ws.p("out/manifest.json")));
  CHECK(m["command"] == "dither");
  CHECK(m["seed"] == 7);
  CHECK(m["config_hash"].get<std::string>().size() == 16);
  CHECK(m["outputs"].size() == 1);
  CHECK(m["tool_version"] == cli::version());

  REQUIRE(run({"restore", "--checkpoint", ws.bundle.string(), "--in", ws.p("out/x.pbm"), "--out", ws.p("rest/x.png"),
               "--reference", ws.image.string()})
              .code == 0);
  CHECK(read_png_rgb(ws.p("rest/x.png")).width() == 24);
  CHECK(fs::exists(ws.p("rest/manifest.json")));
}

TEST_CASE("seed from the environment") {
  Workspace ws;
  ::setenv("REVHALF_SEED", "42", 1);
  const auto r = run({"baseline", "--method", "floyd-steinberg", "--in", ws.p("images"), "--out", ws.p("b")});
  ::unsetenv("REVHALF_SEED");
  REQUIRE(r.code == 0);
  CHECK(nlohmann::json::parse(slurp(ws.p("b/manifest.json")))["seed"] == 42);
  CHECK(fs::exists(ws.p("b/ramp.pbm")));
}

TEST_CASE("spectrum CSV is annotated and reproducible") {
  Workspace ws;
  const std::vector<std::string> args = {"analyze", "spectrum", "--method", "ostromoukhov", "--gray", "0.8", "--size", "64",
                                         "--realizations", "2"};
  auto a = args, b = args;
  a.insert(a.end(), {"--out", ws.p("a/s.csv")});
  b.insert(b.end(), {"--out", ws.p("b/s.csv")});
  REQUIRE(run(a).code == 0);
  REQUIRE(run(b).code == 0);
  const auto text = slurp(ws.p("a/s.csv"));
  CHECK(text == slurp(ws.p("b/s.csv")));
  CHECK(text.find("principal_frequency=0.4472") != std::string::npos);
  std::istringstream lines(text);
  std::string line;
  std::getline(lines, line);
  std::getline(lines, line);
  CHECK(line == "ring_freq,power,anisotropy_db");
  int rings = 0;
  while (std::getline(lines, line)) {
    if (rings == 0) CHECK(std::stod(line.substr(0, line.find(','))) > 0.0);
    ++rings;
  }
  CHECK(rings == 32);
}

TEST_CASE("roundtrip on an untrained model") {
  Workspace ws;
  const auto r = run({"analyze", "roundtrip", "--checkpoint", ws.bundle.string(), "--in", ws.image.string(), "--out", ws.p("rt")});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(slurp(ws.p("rt/roundtrip.json")));
  CHECK(j["binarity_percent"] == 100.0);
  CHECK(j["below_threshold"] == true);
  CHECK(j.contains("tone_psnr"));
  CHECK(j.contains("restore_psnr"));
  for (const char* f : {"halftone.pbm", "halftone.png", "restored.png", "error_map.png", "manifest.json"}) {
    CHECK(fs::exists(ws.dir / "rt" / f));
  }
}

TEST_CASE("tiny training run and follow-up analyses") {
  Workspace ws;
  std::ofstream(ws.p("tiny.cfg")) << "image_size = 16\ntrain_images = 2\nval_images = 1\nnet.base_channels = 4\n"
                                     "net.residual_blocks_unet = 1\nnet.predictor_residual_enhance = 1\n"
                                     "net.guidance_residual = 1\nepochs.guidance = 1\nepochs.predictor = 1\n"
                                     "epochs.stage1 = 1\nepochs.stage2 = 1\nepochs.stage3 = 1\nbatch_size = 2\n";
  const auto r = run({"train", "--config", ws.p("tiny.cfg"), "--out", ws.p("t"), "--variant", "p-froze", "--gamma", "0.3"});
  REQUIRE(r.code == 0);
  CHECK(fs::exists(ws.p("t/bundle.rvh")));
  CHECK_FALSE(fs::exists(ws.p("t/stage_3.rvh")));
  const auto log = slurp(ws.p("t/train_log.csv"));
  CHECK(std::count(log.begin(), log.end(), '\n') == 5);
  const auto cfg = nlohmann::json::parse(slurp(ws.p("t/config.json")));
  CHECK(cfg["gamma"] == 0.3);
  CHECK(cfg["variant"] == "p-froze");

  // A single stage resumed from the stage-2 checkpoint.
  CHECK(run({"train", "--config", ws.p("tiny.cfg"), "--out", ws.p("t3"), "--stage", "3", "--checkpoint", ws.p("t/stage_2.rvh")}).code ==
        0);

  const auto rb = run({"robustness", "--checkpoint", ws.p("t/bundle.rvh"), "--in", ws.image.string(), "--size", "16",
                       "--out", ws.p("rb")});
  REQUIRE(rb.code == 0);
  CHECK(slurp(ws.p("rb/robustness.csv")).rfind("# schema=robustness/1", 0) == 0);
  CHECK(fs::exists(ws.p("rb/error_impulse_0.10.png")));

  REQUIRE(run({"entropy", "--in", ws.p("images"), "--size", "16", "--out", ws.p("e/e.csv")}).code == 0);
  CHECK(slurp(ws.p("e/e.csv")).find("ostromoukhov,1,") != std::string::npos);

  REQUIRE(run({"analyze", "metrics", "--method", "floyd-steinberg", "--in", ws.image.string(), "--out", ws.p("m/m.csv")}).code == 0);
  CHECK(slurp(ws.p("m/m.csv")).find("ramp.png") != std::string::npos);
}

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "revhalf/archive.hpp"
#include "revhalf/halftone.hpp"
#include "revhalf/imaging.hpp"
#include "revhalf/training.hpp"

namespace revhalf {

namespace {

using nn::Shape;
using nn::Tensor;

constexpr std::uint64_t kEvalStream = 0xe7a1;
constexpr Component kAllComponents[] = {Component::kEncoder, Component::kDecoder, Component::kPredictor,
                                        Component::kGuidance};

std::uint64_t stage_code(StageId s) { return static_cast<std::uint64_t>(s) + 1; }

void set_trainable(const ModelBundle& bundle, const std::set<Component>& frozen) {
  for (Component c : kAllComponents) {
    for (auto& p : bundle.parameters(c)) {
      p.tensor.set_requires_grad(frozen.count(c) == 0);
      p.tensor.zero_grad();
    }
  }
}

std::vector<NamedTensor> trainable(const ModelBundle& bundle, const std::set<Component>& frozen) {
  std::vector<NamedTensor> out;
  for (Component c : kAllComponents) {
    if (frozen.count(c)) continue;
    auto part = bundle.parameters(c);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

/// Copies `g` scaled by `scale` into sample n, channel c of a seed buffer shaped `s`.
void put(std::vector<float>& seed, const Shape& s, int n, int c, const Plane& g, double scale) {
  if (seed.size() != s.numel()) seed.assign(s.numel(), 0.0f);
  const std::size_t off = (static_cast<std::size_t>(n) * s.c + c) * s.plane();
  for (std::size_t i = 0; i < g.size(); ++i) seed[off + i] += static_cast<float>(scale * g[i]);
}

Tensor batch_of(const std::vector<const Plane*>& planes) {
  const int h = planes[0]->height();
  const int w = planes[0]->width();
  std::vector<float> data;
  data.reserve(planes.size() * static_cast<std::size_t>(h) * w);
  for (const Plane* p : planes) {
    for (double v : p->values()) data.push_back(static_cast<float>(v));
  }
  return Tensor::from({static_cast<int>(planes.size()), 1, h, w}, std::move(data));
}

struct Roots {
  std::vector<Tensor> tensors;
  std::vector<std::vector<float>> seeds;

  void add(const Tensor& t, std::vector<float> seed) {
    if (seed.empty()) return;
    tensors.push_back(t);
    seeds.push_back(std::move(seed));
  }
};

struct StepContext {
  const ModelBundle& bundle;
  const TrainingSet& data;
  const StageConfig& cfg;
  const std::vector<Plane>* guidance_ref;
  const FreqMask* mask;
};

/// One batch of the stage objective. When `backprop`, gradients are left on
/// the trainable parameters.
EpochRecord run_step(const StepContext& ctx, const std::vector<std::size_t>& idx, std::uint64_t step_seed,
                     bool backprop) {
  std::optional<nn::NoGradGuard> no_grad;
  if (!backprop) no_grad.emplace();
  const auto& cfg = ctx.cfg;
  const auto& w = cfg.weights;
  const auto& bundle = ctx.bundle;
  const int b = static_cast<int>(idx.size());
  const double inv_b = 1.0 / b;
  const int h = ctx.data.height();
  const int wd = ctx.data.width();
  Rng coin(derive_seed({step_seed, 0xc0}));
  EpochRecord rec;
  rec.stage = cfg.stage;
  Roots roots;

  if (cfg.stage == StageId::kGuidance || cfg.stage == StageId::kPredictor) {
    // Data halftones plus one constant patch so flat regions are seen too.
    std::vector<BinaryImage> extra;
    std::vector<Plane> halftones;
    std::vector<const Plane*> grays;
    const double g = coin.uniform();
    const GrayImage patch = constant_patch(g, h, wd);
    for (int i = 0; i <= b; ++i) {
      const bool use_fs = cfg.stage == StageId::kPredictor && coin.uniform() < 0.5;
      if (i < b) {
        const auto& s = ctx.data[idx[static_cast<std::size_t>(i)]];
        halftones.push_back((use_fs ? s.floyd_steinberg : s.ostromoukhov).to_plane());
        grays.push_back(&s.gray.plane());
      } else {
        halftones.push_back((use_fs ? floyd_steinberg(patch) : ostromoukhov(patch)).to_plane());
        grays.push_back(&patch.plane());
      }
    }
    std::vector<const Plane*> hp;
    for (const auto& p : halftones) hp.push_back(&p);
    const Tensor x = batch_of(hp);
    const double inv = 1.0 / (b + 1);
    if (cfg.stage == StageId::kGuidance) {
      const Tensor f = bundle.guide(x);
      std::vector<float> seed;
      for (int i = 0; i <= b; ++i) {
        auto t = loss_guidance(plane_of(f, i), *grays[static_cast<std::size_t>(i)]);
        rec.content += inv * t.value;
        put(seed, f.shape(), i, 0, t.grad, inv);
      }
      rec.total = rec.content;
      roots.add(f, std::move(seed));
    } else {
      const auto pred = bundle.predict(x);
      std::vector<float> si, sr;
      for (int i = 0; i <= b; ++i) {
        auto l = loss_lumin(plane_of(pred.initial, i), plane_of(pred.refined, i), *grays[static_cast<std::size_t>(i)], w,
                            bundle.perceptual.get());
        rec.total += inv * l.value;
        rec.content += inv * l.content;
        rec.mae += inv * l.mae;
        rec.perceptual += inv * l.perceptual;
        put(si, pred.initial.shape(), i, 0, l.d_initial, inv);
        put(sr, pred.refined.shape(), i, 0, l.d_refined, inv);
      }
      roots.add(pred.initial, std::move(si));
      roots.add(pred.refined, std::move(sr));
    }
  } else if (cfg.stage == StageId::kStage3) {
    std::vector<const ColorImage*> imgs;
    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < b; ++i) {
      imgs.push_back(&ctx.data[idx[static_cast<std::size_t>(i)]].color);
      seeds.push_back(derive_seed({step_seed, static_cast<std::uint64_t>(i)}));
    }
    Tensor halftone;
    {
      nn::NoGradGuard frozen_encoder;
      halftone = nn::binary_gate(bundle.encode(augmented_batch(imgs, seeds, bundle.config().nib_channels)));
    }
    const auto pred = bundle.predict(halftone);
    std::vector<float> si, sr;
    for (int i = 0; i < b; ++i) {
      const auto& s = ctx.data[idx[static_cast<std::size_t>(i)]];
      auto l = loss_lumin(plane_of(pred.initial, i), plane_of(pred.refined, i), s.gray.plane(), w, bundle.perceptual.get());
      rec.total += inv_b * l.value;
      rec.content += inv_b * l.content;
      rec.mae += inv_b * l.mae;
      rec.perceptual += inv_b * l.perceptual;
      put(si, pred.initial.shape(), i, 0, l.d_initial, inv_b);
      put(sr, pred.refined.shape(), i, 0, l.d_refined, inv_b);
    }
    roots.add(pred.initial, std::move(si));
    roots.add(pred.refined, std::move(sr));
  } else {
    // Stages 1 and 2: the batch carries extra plain-color samples for L_blue.
    const int np = cfg.plain_colors;
    std::vector<ColorImage> plain;
    std::vector<GrayImage> plain_gray;
    for (int k = 0; k < np; ++k) {
      plain.push_back(sample_plain_color(h, wd, derive_seed({step_seed, 0xb1, static_cast<std::uint64_t>(k)})));
      plain_gray.push_back(luminance(plain.back()));
    }
    std::vector<const ColorImage*> imgs;
    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < b + np; ++i) {
      imgs.push_back(i < b ? &ctx.data[idx[static_cast<std::size_t>(i)]].color : &plain[static_cast<std::size_t>(i - b)]);
      seeds.push_back(derive_seed({step_seed, static_cast<std::uint64_t>(i)}));
    }
    const Tensor pseudo = bundle.encode(augmented_batch(imgs, seeds, bundle.config().nib_channels));
    const Tensor halftone = cfg.gate_enabled ? nn::binary_gate(pseudo) : pseudo;
    const Tensor data_ht = nn::batch_slice(halftone, 0, b);

    // L_bin and L_tone cover the plain-color samples as well.
    std::vector<float> s_pseudo, s_half;
    double bin = 0, tone = 0, blue = 0;
    const double inv_all = 1.0 / (b + np);
    for (int i = 0; i < b + np; ++i) {
      const Plane& gray = i < b ? ctx.data[idx[static_cast<std::size_t>(i)]].gray.plane()
                                : plain_gray[static_cast<std::size_t>(i - b)].plane();
      auto lb = loss_bin(plane_of(pseudo, i));
      auto lt = loss_tone(plane_of(halftone, i), gray);
      bin += inv_all * lb.value;
      tone += inv_all * lt.value;
      put(s_pseudo, pseudo.shape(), i, 0, lb.grad, w.alpha * inv_all);
      put(s_half, halftone.shape(), i, 0, lt.grad, w.beta * inv_all);
    }
    for (int k = 0; k < np; ++k) {
      auto lblue = loss_blue(plane_of(halftone, b + k), plain_gray[static_cast<std::size_t>(k)].plane(), *ctx.mask);
      blue += lblue.value / np;
      put(s_half, halftone.shape(), b + k, 0, lblue.grad, w.gamma / np);
    }
    rec.bin = bin;
    rec.tone = tone;
    rec.blue = blue;
    rec.total = loss_half(bin, tone, blue, w);

    if (w.epsilon > 0.0) {
      const Tensor f = bundle.guide(data_ht);
      std::vector<float> sf;
      for (int i = 0; i < b; ++i) {
        auto lg = loss_guidance(plane_of(f, i), (*ctx.guidance_ref)[idx[static_cast<std::size_t>(i)]]);
        rec.guidance += inv_b * lg.value;
        put(sf, f.shape(), i, 0, lg.grad, w.epsilon * inv_b);
      }
      rec.total += w.epsilon * rec.guidance;
      roots.add(f, std::move(sf));
    }

    if (cfg.stage == StageId::kStage2) {
      const Tensor chroma = bundle.decode(data_ht);
      const bool need_luma = w.eta > 0.0 || cfg.joint_predictor;
      PredictorTensors pred;
      if (need_luma) pred = bundle.predict(data_ht);
      std::vector<float> sc, si, sr;
      double restore = 0.0;
      for (int i = 0; i < b; ++i) {
        const auto& s = ctx.data[idx[static_cast<std::size_t>(i)]];
        const Plane luma = need_luma ? plane_of(pred.refined, i) : s.gray.plane();
        auto lr = loss_restore(s.chroma, plane_of(chroma, i, 0), plane_of(chroma, i, 1), s.color, luma, w,
                               bundle.perceptual.get());
        restore += inv_b * lr.value;
        rec.chroma += inv_b * lr.chroma;
        rec.perceptual += inv_b * lr.perceptual;
        put(sc, chroma.shape(), i, 0, lr.d_cb, inv_b);
        put(sc, chroma.shape(), i, 1, lr.d_cr, inv_b);
        if (need_luma) put(sr, pred.refined.shape(), i, 0, lr.d_luma, inv_b);
        if (cfg.joint_predictor) {
          auto ll = loss_lumin(plane_of(pred.initial, i), plane_of(pred.refined, i), s.gray.plane(), w,
                               bundle.perceptual.get());
          restore += inv_b * ll.value;
          rec.content += inv_b * ll.content;
          rec.mae += inv_b * ll.mae;
          put(si, pred.initial.shape(), i, 0, ll.d_initial, inv_b);
          put(sr, pred.refined.shape(), i, 0, ll.d_refined, inv_b);
        }
      }
      rec.total += restore;
      roots.add(chroma, std::move(sc));
      if (need_luma) {
        roots.add(pred.initial, std::move(si));
        roots.add(pred.refined, std::move(sr));
      }
    }
    roots.add(pseudo, std::move(s_pseudo));
    roots.add(halftone, std::move(s_half));
  }

  if (!std::isfinite(rec.total)) {
    throw DivergenceError(std::string("loss diverged in stage ") + stage_name(cfg.stage));
  }
  if (backprop) nn::backward(roots.tensors, roots.seeds);
  return rec;
}

void accumulate(EpochRecord& acc, const EpochRecord& r, double weight) {
  acc.total += weight * r.total;
  acc.bin += weight * r.bin;
  acc.tone += weight * r.tone;
  acc.blue += weight * r.blue;
  acc.guidance += weight * r.guidance;
  acc.chroma += weight * r.chroma;
  acc.perceptual += weight * r.perceptual;
  acc.content += weight * r.content;
  acc.mae += weight * r.mae;
}

std::vector<Plane> guidance_reference(const ModelBundle& bundle, const TrainingSet& data, const StageConfig& cfg) {
  std::vector<Plane> out;
  if (cfg.stage != StageId::kStage1 && cfg.stage != StageId::kStage2) return out;
  nn::NoGradGuard guard;
  const std::size_t chunk = 8;
  for (std::size_t start = 0; start < data.size(); start += chunk) {
    std::vector<Plane> planes;
    for (std::size_t i = start; i < std::min(data.size(), start + chunk); ++i) planes.push_back(data[i].ostromoukhov.to_plane());
    std::vector<const Plane*> ptrs;
    for (const auto& p : planes) ptrs.push_back(&p);
    const Tensor f = bundle.guide(batch_of(ptrs));
    for (int i = 0; i < f.shape().n; ++i) out.push_back(plane_of(f, i));
  }
  return out;
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, StageId stage, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed({seed, stage_code(stage), static_cast<std::uint64_t>(epoch)}));
  rng.shuffle(order.begin(), order.end());
  return order;
}

double mean_abs_diff(const Plane& a, const Plane& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

}  // namespace

StageProgress train_stage(ModelBundle& bundle, const TrainingSet& data, const StageConfig& cfg, StageProgress progress,
                          const EpochHook& hook) {
  cfg.validate();
  if (progress.log.empty() && progress.next_epoch == 0) progress.stage = cfg.stage;
  if (progress.stage != cfg.stage) throw std::invalid_argument("progress belongs to a different stage");
  set_trainable(bundle, cfg.frozen);
  const auto params = trainable(bundle, cfg.frozen);
  const FreqMask mask = low_freq_mask(data.height(), data.width(), kBlueNoiseMaskFraction);
  const auto ref = guidance_reference(bundle, data, cfg);
  const StepContext ctx{bundle, data, cfg, &ref, &mask};
  Adam adam;
  adam.lr = cfg.step_size;

  for (int epoch = progress.next_epoch; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto order = epoch_order(data.size(), cfg.seed, cfg.stage, epoch);
    EpochRecord rec;
    rec.stage = cfg.stage;
    rec.epoch = epoch;
    std::size_t step = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size), ++step) {
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(
                                                             std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size))));
      const auto seed = derive_seed({cfg.seed, stage_code(cfg.stage), static_cast<std::uint64_t>(epoch), step});
      const auto r = run_step(ctx, idx, seed, true);
      adam.step(params, progress.adam);
      accumulate(rec, r, static_cast<double>(idx.size()) / static_cast<double>(order.size()));
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    progress.log.push_back(rec);
    progress.next_epoch = epoch + 1;
    if (hook && !hook(rec, progress)) break;
  }
  set_trainable(bundle, {});
  return progress;
}

EpochRecord evaluate_stage(const ModelBundle& bundle, const TrainingSet& data, const StageConfig& cfg) {
  const FreqMask mask = low_freq_mask(data.height(), data.width(), kBlueNoiseMaskFraction);
  const auto ref = guidance_reference(bundle, data, cfg);
  const StepContext ctx{bundle, data, cfg, &ref, &mask};
  EpochRecord rec;
  rec.stage = cfg.stage;
  std::size_t step = 0;
  for (std::size_t start = 0; start < data.size(); start += static_cast<std::size_t>(cfg.batch_size), ++step) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(data.size(), start + static_cast<std::size_t>(cfg.batch_size)); ++i) idx.push_back(i);
    const auto r = run_step(ctx, idx, derive_seed({cfg.seed, stage_code(cfg.stage), kEvalStream, step}), false);
    accumulate(rec, r, static_cast<double>(idx.size()) / static_cast<double>(data.size()));
  }
  return rec;
}

ModelBundle& pretrain_guidance(ModelBundle& bundle, const TrainingSet& data, const StageConfig& cfg) {
  train_stage(bundle, data, cfg);
  return bundle;
}

ModelBundle& pretrain_predictor(ModelBundle& bundle, const TrainingSet& data, const StageConfig& cfg) {
  train_stage(bundle, data, cfg);
  return bundle;
}

ModelBundle& train_stage1(ModelBundle& bundle, const TrainingSet& data, const StageConfig& cfg) {
  train_stage(bundle, data, cfg);
  return bundle;
}

ModelBundle& train_stage2(ModelBundle& bundle, const TrainingSet& data, const StageConfig& cfg) {
  train_stage(bundle, data, cfg);
  return bundle;
}

ModelBundle& train_stage3(ModelBundle& bundle, const TrainingSet& data, const StageConfig& cfg) {
  train_stage(bundle, data, cfg);
  return bundle;
}

std::vector<EpochRecord> train_variant(ModelBundle& bundle, const TrainingSet& data, const TrainConfig& cfg,
                                       const EpochHook& hook) {
  std::vector<StageId> stages = {StageId::kGuidance, StageId::kPredictor, StageId::kStage1, StageId::kStage2};
  if (cfg.variant == Variant::kStandard) stages.push_back(StageId::kStage3);
  std::vector<EpochRecord> log;
  for (StageId s : stages) {
    auto progress = train_stage(bundle, data, cfg.stage(s), {}, hook);
    log.insert(log.end(), progress.log.begin(), progress.log.end());
  }
  return log;
}

double chroma_mse(const ModelBundle& bundle, const TrainingSet& data, std::uint64_t seed) {
  double sum = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto ht = halftone_pipeline(bundle, data[i].color, derive_seed({seed, kEvalStream, i}));
    const auto c = decoder_forward(bundle, ht);
    sum += loss_chromin(data[i].chroma, c.cb(), c.cr()).value;
  }
  return sum / static_cast<double>(data.size());
}

double luminance_mae(const ModelBundle& bundle, const TrainingSet& data, std::uint64_t seed) {
  double sum = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto ht = halftone_pipeline(bundle, data[i].color, derive_seed({seed, kEvalStream, i}));
    sum += mean_abs_diff(predictor_forward(bundle, ht).refined.plane(), data[i].gray.plane());
  }
  return sum / static_cast<double>(data.size());
}

double luminance_mae_classical(const ModelBundle& bundle, const TrainingSet& data, bool floyd, bool refined) {
  double sum = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto out = predictor_forward(bundle, floyd ? data[i].floyd_steinberg : data[i].ostromoukhov);
    sum += mean_abs_diff((refined ? out.refined : out.initial).plane(), data[i].gray.plane());
  }
  return sum / static_cast<double>(data.size());
}

// ---- checkpoints -----------------------------------------------------------------------

namespace {

nlohmann::json record_json(const EpochRecord& r) {
  return {{"stage", stage_name(r.stage)}, {"epoch", r.epoch},     {"total", r.total},     {"bin", r.bin},
          {"tone", r.tone},               {"blue", r.blue},       {"guidance", r.guidance}, {"chroma", r.chroma},
          {"perceptual", r.perceptual},   {"content", r.content}, {"mae", r.mae},         {"seconds", r.seconds}};
}

EpochRecord record_from(const nlohmann::json& j) {
  EpochRecord r;
  r.stage = parse_stage(j.at("stage").get<std::string>());
  r.epoch = j.at("epoch").get<int>();
  r.total = j.at("total").get<double>();
  r.bin = j.at("bin").get<double>();
  r.tone = j.at("tone").get<double>();
  r.blue = j.at("blue").get<double>();
  r.guidance = j.at("guidance").get<double>();
  r.chroma = j.at("chroma").get<double>();
  r.perceptual = j.at("perceptual").get<double>();
  r.content = j.at("content").get<double>();
  r.mae = j.at("mae").get<double>();
  r.seconds = j.at("seconds").get<double>();
  return r;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelBundle& bundle, const StageProgress& progress,
                     std::uint64_t seed, const std::string& config_hash) {
  Archive a;
  a.kind = "checkpoint";
  a.version = kCheckpointVersion;
  a.meta["net_config"] = bundle.config().to_json();
  a.meta["stage"] = stage_name(progress.stage);
  a.meta["next_epoch"] = progress.next_epoch;
  a.meta["adam_step"] = progress.adam.step;
  a.meta["seed"] = seed;
  a.meta["config_hash"] = config_hash;
  nlohmann::json log = nlohmann::json::array();
  for (const auto& r : progress.log) log.push_back(record_json(r));
  a.meta["log"] = log;
  for (const auto& p : bundle.parameters()) {
    const auto& s = p.tensor.shape();
    a.tensors.push_back({p.name, {s.n, s.c, s.h, s.w}, {p.tensor.data().begin(), p.tensor.data().end()}});
  }
  for (const auto& [name, m] : progress.adam.m) a.tensors.push_back({"adam.m." + name, {static_cast<int>(m.size())}, m});
  for (const auto& [name, v] : progress.adam.v) a.tensors.push_back({"adam.v." + name, {static_cast<int>(v.size())}, v});
  write_archive(path, a);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const Archive a = read_archive(path);
  if (a.kind != "checkpoint") throw std::invalid_argument(path.string() + " is not a checkpoint");
  if (a.version != kCheckpointVersion) throw std::invalid_argument("unsupported checkpoint version " + std::to_string(a.version));
  Checkpoint ck{ModelBundle(NetConfig::from_json(a.meta.at("net_config"))), {}, a.meta.at("seed").get<std::uint64_t>(),
                a.meta.at("config_hash").get<std::string>()};
  std::vector<ArchiveTensor> params;
  for (const auto& t : a.tensors) {
    if (t.name.rfind("adam.m.", 0) == 0) {
      ck.progress.adam.m[t.name.substr(7)] = t.data;
    } else if (t.name.rfind("adam.v.", 0) == 0) {
      ck.progress.adam.v[t.name.substr(7)] = t.data;
    } else {
      params.push_back(t);
    }
  }
  assign_parameters(ck.bundle, params);
  ck.progress.stage = parse_stage(a.meta.at("stage").get<std::string>());
  ck.progress.next_epoch = a.meta.at("next_epoch").get<int>();
  ck.progress.adam.step = a.meta.at("adam_step").get<long>();
  for (const auto& r : a.meta.at("log")) ck.progress.log.push_back(record_from(r));
  return ck;
}

std::string training_log_csv(const std::vector<EpochRecord>& log) {
  std::ostringstream out;
  out.precision(9);
  out << "stage,epoch,total,bin,tone,blue,guidance,chroma,perceptual,content,mae,seconds\n";
  for (const auto& r : log) {
    out << stage_name(r.stage) << ',' << r.epoch << ',' << r.total << ',' << r.bin << ',' << r.tone << ',' << r.blue
        << ',' << r.guidance << ',' << r.chroma << ',' << r.perceptual << ',' << r.content << ',' << r.mae << ','
        << r.seconds << '\n';
  }
  return out.str();
}

}  // namespace revhalf

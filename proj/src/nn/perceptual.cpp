#include "revhalf/perceptual.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "revhalf/archive.hpp"
#include "revhalf/random.hpp"

namespace revhalf {

namespace {

using Layer = PerceptualExtractor::Layer;
using Kind = PerceptualExtractor::Kind;

std::vector<Plane> conv_forward(const Layer& l, const std::vector<Plane>& x) {
  const int h = x[0].height();
  const int w = x[0].width();
  const int p = l.k / 2;
  std::vector<Plane> out;
  for (int co = 0; co < l.cout; ++co) {
    Plane o(h, w, l.bias[static_cast<std::size_t>(co)]);
    for (int ci = 0; ci < l.cin; ++ci) {
      const Plane& in = x[static_cast<std::size_t>(ci)];
      for (int ky = 0; ky < l.k; ++ky) {
        for (int kx = 0; kx < l.k; ++kx) {
          const double wt = l.weight[((static_cast<std::size_t>(co) * l.cin + ci) * l.k + ky) * l.k + kx];
          for (int y = 0; y < h; ++y) {
            const int iy = y + ky - p;
            if (iy < 0 || iy >= h) continue;
            for (int xx = 0; xx < w; ++xx) {
              const int ix = xx + kx - p;
              if (ix >= 0 && ix < w) o.at(y, xx) += wt * in.at(iy, ix);
            }
          }
        }
      }
    }
    out.push_back(std::move(o));
  }
  return out;
}

std::vector<Plane> conv_adjoint(const Layer& l, const std::vector<Plane>& g) {
  const int h = g[0].height();
  const int w = g[0].width();
  const int p = l.k / 2;
  std::vector<Plane> out(static_cast<std::size_t>(l.cin), Plane(h, w));
  for (int co = 0; co < l.cout; ++co) {
    const Plane& go = g[static_cast<std::size_t>(co)];
    for (int ci = 0; ci < l.cin; ++ci) {
      Plane& gi = out[static_cast<std::size_t>(ci)];
      for (int ky = 0; ky < l.k; ++ky) {
        for (int kx = 0; kx < l.k; ++kx) {
          const double wt = l.weight[((static_cast<std::size_t>(co) * l.cin + ci) * l.k + ky) * l.k + kx];
          for (int y = 0; y < h; ++y) {
            const int iy = y + ky - p;
            if (iy < 0 || iy >= h) continue;
            for (int xx = 0; xx < w; ++xx) {
              const int ix = xx + kx - p;
              if (ix >= 0 && ix < w) gi.at(iy, ix) += wt * go.at(y, xx);
            }
          }
        }
      }
    }
  }
  return out;
}

std::vector<Plane> pool_forward(const std::vector<Plane>& x) {
  std::vector<Plane> out;
  for (const auto& in : x) {
    Plane o(in.height() / 2, in.width() / 2);
    for (int y = 0; y < o.height(); ++y) {
      for (int xx = 0; xx < o.width(); ++xx) {
        o.at(y, xx) = std::max({in.at(2 * y, 2 * xx), in.at(2 * y, 2 * xx + 1), in.at(2 * y + 1, 2 * xx),
                                in.at(2 * y + 1, 2 * xx + 1)});
      }
    }
    out.push_back(std::move(o));
  }
  return out;
}

// Routes each pooled gradient to the first maximal input of its window.
std::vector<Plane> pool_adjoint(const std::vector<Plane>& x, const std::vector<Plane>& g) {
  std::vector<Plane> out;
  for (std::size_t c = 0; c < x.size(); ++c) {
    const Plane& in = x[c];
    Plane gi(in.height(), in.width());
    for (int y = 0; y < g[c].height(); ++y) {
      for (int xx = 0; xx < g[c].width(); ++xx) {
        int by = 2 * y;
        int bx = 2 * xx;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            if (in.at(2 * y + dy, 2 * xx + dx) > in.at(by, bx)) {
              by = 2 * y + dy;
              bx = 2 * xx + dx;
            }
          }
        }
        gi.at(by, bx) += g[c].at(y, xx);
      }
    }
    out.push_back(std::move(gi));
  }
  return out;
}

std::vector<Plane> apply_layer(const Layer& l, const std::vector<Plane>& x) {
  switch (l.kind) {
    case Kind::kConv:
      return conv_forward(l, x);
    case Kind::kMaxPool:
      return pool_forward(x);
    case Kind::kRelu: {
      std::vector<Plane> out = x;
      for (auto& p : out) {
        for (double& v : p.values()) v = std::max(v, 0.0);
      }
      return out;
    }
  }
  return x;
}

Layer conv_layer(int cin, int cout, int k) {
  Layer l;
  l.kind = Kind::kConv;
  l.cin = cin;
  l.cout = cout;
  l.k = k;
  l.weight.assign(static_cast<std::size_t>(cout) * cin * k * k, 0.0);
  l.bias.assign(static_cast<std::size_t>(cout), 0.0);
  return l;
}

Layer simple(Kind kind) {
  Layer l;
  l.kind = kind;
  return l;
}

}  // namespace

PerceptualExtractor::PerceptualExtractor(std::vector<Layer> layers, std::vector<double> mean, std::vector<double> stddev)
    : layers_(std::move(layers)), mean_(std::move(mean)), stddev_(std::move(stddev)) {
  if (mean_.size() != 3 || stddev_.size() != 3) throw std::invalid_argument("perceptual extractor expects 3 input channels");
  int channels = 3;
  for (const auto& l : layers_) {
    if (l.kind != Kind::kConv) continue;
    if (l.cin != channels) throw std::invalid_argument("perceptual extractor layer channel mismatch");
    channels = l.cout;
  }
}

PerceptualExtractor PerceptualExtractor::random_fallback(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Layer> layers;
  for (auto [cin, cout] : {std::pair{3, 8}, std::pair{8, 16}}) {
    Layer l = conv_layer(cin, cout, 3);
    const double std = std::sqrt(2.0 / (cin * 9));
    for (double& v : l.weight) v = std * rng.normal();
    for (double& v : l.bias) v = 0.1 * rng.normal();
    layers.push_back(std::move(l));
    layers.push_back(simple(Kind::kRelu));
    if (cout == 8) layers.push_back(simple(Kind::kMaxPool));
  }
  return PerceptualExtractor(std::move(layers), {0.5, 0.5, 0.5}, {0.25, 0.25, 0.25});
}

PerceptualExtractor PerceptualExtractor::load_vgg19(const std::filesystem::path& path) {
  const Archive archive = read_archive(path);
  const int blocks[4] = {2, 2, 4, 4};
  std::vector<Layer> layers;
  int channels = 3;
  for (int b = 0; b < 4; ++b) {
    for (int i = 1; i <= blocks[b]; ++i) {
      const std::string name = "conv" + std::to_string(b + 1) + "_" + std::to_string(i);
      const ArchiveTensor* w = archive.find(name + ".weight");
      const ArchiveTensor* bias = archive.find(name + ".bias");
      if (!w || !bias || w->shape.size() != 4 || w->shape[1] != channels || w->shape[2] != 3) {
        throw std::invalid_argument("vgg19 archive missing or malformed " + name);
      }
      Layer l = conv_layer(channels, w->shape[0], 3);
      if (w->data.size() != l.weight.size() || bias->data.size() != l.bias.size()) {
        throw std::invalid_argument("vgg19 archive size mismatch at " + name);
      }
      std::copy(w->data.begin(), w->data.end(), l.weight.begin());
      std::copy(bias->data.begin(), bias->data.end(), l.bias.begin());
      channels = l.cout;
      layers.push_back(std::move(l));
      layers.push_back(simple(Kind::kRelu));
    }
    if (b < 3) layers.push_back(simple(Kind::kMaxPool));
  }
  return PerceptualExtractor(std::move(layers), {0.485, 0.456, 0.406}, {0.229, 0.224, 0.225});
}

std::vector<Plane> PerceptualExtractor::forward(const std::vector<Plane>& rgb) const {
  if (rgb.size() != 3) throw std::invalid_argument("perceptual extractor expects 3 planes");
  std::vector<Plane> x = rgb;
  for (int c = 0; c < 3; ++c) {
    for (double& v : x[static_cast<std::size_t>(c)].values()) v = (v - mean_[static_cast<std::size_t>(c)]) / stddev_[static_cast<std::size_t>(c)];
  }
  for (const auto& l : layers_) x = apply_layer(l, x);
  return x;
}

std::vector<Plane> PerceptualExtractor::vjp(const std::vector<Plane>& rgb, const std::vector<Plane>& grad_out) const {
  std::vector<std::vector<Plane>> acts;
  std::vector<Plane> x = rgb;
  for (int c = 0; c < 3; ++c) {
    for (double& v : x[static_cast<std::size_t>(c)].values()) v = (v - mean_[static_cast<std::size_t>(c)]) / stddev_[static_cast<std::size_t>(c)];
  }
  for (const auto& l : layers_) {
    acts.push_back(x);
    x = apply_layer(l, x);
  }
  std::vector<Plane> g = grad_out;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const Layer& l = layers_[i];
    const auto& in = acts[i];
    switch (l.kind) {
      case Kind::kConv:
        g = conv_adjoint(l, g);
        break;
      case Kind::kMaxPool:
        g = pool_adjoint(in, g);
        break;
      case Kind::kRelu:
        for (std::size_t c = 0; c < g.size(); ++c) {
          for (std::size_t j = 0; j < g[c].size(); ++j) {
            if (in[c][j] <= 0.0) g[c][j] = 0.0;
          }
        }
        break;
    }
  }
  for (int c = 0; c < 3; ++c) {
    for (double& v : g[static_cast<std::size_t>(c)].values()) v /= stddev_[static_cast<std::size_t>(c)];
  }
  return g;
}

}  // namespace revhalf

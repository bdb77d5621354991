#include "revhalf/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace revhalf::nn {

namespace {

thread_local bool g_grad_enabled = true;

using MatF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapF = Eigen::Map<MatF>;
using CMapF = Eigen::Map<const MatF>;

bool any_requires_grad(const std::vector<std::shared_ptr<Node>>& inputs) {
  return std::any_of(inputs.begin(), inputs.end(), [](const auto& n) { return n->requires_grad; });
}

void check_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw std::invalid_argument(std::string(op) + ": undefined tensor");
}

struct ConvGeometry {
  int cin, h, w, k, stride, pad, ho, wo;
  int rows() const { return cin * k * k; }
  int cols() const { return ho * wo; }
};

// col[(ci*k + ky)*k + kx][oy*wo + ox] = x[ci][oy*s + ky - p][ox*s + kx - p]
void im2col(const float* x, const ConvGeometry& g, float* col) {
  for (int ci = 0; ci < g.cin; ++ci) {
    const float* xc = x + static_cast<std::size_t>(ci) * g.h * g.w;
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        float* row = col + (static_cast<std::size_t>(ci * g.k + ky) * g.k + kx) * g.cols();
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride + ky - g.pad;
          float* dst = row + static_cast<std::size_t>(oy) * g.wo;
          if (iy < 0 || iy >= g.h) {
            std::fill(dst, dst + g.wo, 0.0f);
            continue;
          }
          const float* src = xc + static_cast<std::size_t>(iy) * g.w;
          if (g.stride == 1) {
            const int shift = kx - g.pad;
            const int lo = std::max(0, -shift);
            const int hi = std::min(g.wo, g.w - shift);
            std::fill(dst, dst + lo, 0.0f);
            if (hi > lo) std::copy(src + lo + shift, src + hi + shift, dst + lo);
            std::fill(dst + std::max(hi, lo), dst + g.wo, 0.0f);
          } else {
            for (int ox = 0; ox < g.wo; ++ox) {
              const int ix = ox * g.stride + kx - g.pad;
              dst[ox] = (ix >= 0 && ix < g.w) ? src[ix] : 0.0f;
            }
          }
        }
      }
    }
  }
}

void col2im(const float* col, const ConvGeometry& g, float* x) {
  for (int ci = 0; ci < g.cin; ++ci) {
    float* xc = x + static_cast<std::size_t>(ci) * g.h * g.w;
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        const float* row = col + (static_cast<std::size_t>(ci * g.k + ky) * g.k + kx) * g.cols();
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride + ky - g.pad;
          if (iy < 0 || iy >= g.h) continue;
          const float* src = row + static_cast<std::size_t>(oy) * g.wo;
          float* dst = xc + static_cast<std::size_t>(iy) * g.w;
          for (int ox = 0; ox < g.wo; ++ox) {
            const int ix = ox * g.stride + kx - g.pad;
            if (ix >= 0 && ix < g.w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

// Half-pixel 2x upsampling along one axis of length n: out[2i] = .75 in[i] + .25 in[i-1], etc.
template <typename Get, typename Put>
void upsample_line(int n, Get get, Put put) {
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(i - 1, 0);
    const int hi = std::min(i + 1, n - 1);
    put(2 * i, 0.75f * get(i) + 0.25f * get(lo));
    put(2 * i + 1, 0.75f * get(i) + 0.25f * get(hi));
  }
}

}  // namespace

std::string Shape::str() const {
  return "[" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," + std::to_string(w) + "]";
}

Tensor wrap(std::shared_ptr<Node> node) { return Tensor(std::move(node)); }

Tensor make_result(Shape shape, std::vector<std::shared_ptr<Node>> inputs, FloatBuffer value) {
  auto node = std::make_shared<Node>();
  node->shape = shape;
  node->value = std::move(value);
  if (g_grad_enabled && any_requires_grad(inputs)) {
    node->requires_grad = true;
    node->inputs = std::move(inputs);
  }
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return filled(shape, 0.0f, requires_grad); }

Tensor Tensor::filled(Shape shape, float value, bool requires_grad) {
  return from(shape, std::vector<float>(shape.numel(), value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<float> values, bool requires_grad) {
  if (values.size() != shape.numel()) {
    throw std::invalid_argument("tensor value count does not match shape " + shape.str());
  }
  auto node = std::make_shared<Node>();
  node->shape = shape;
  node->value.assign(values.begin(), values.end());
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

const Shape& Tensor::shape() const {
  static const Shape empty{};
  return node_ ? node_->shape : empty;
}

std::span<float> Tensor::data() { return node_->value; }
std::span<const float> Tensor::data() const { return node_->value; }
std::span<float> Tensor::grad() { return node_->ensure_grad(); }
bool Tensor::has_grad() const { return node_ && node_->grad.size() == node_->value.size(); }
void Tensor::zero_grad() {
  if (node_) node_->grad.clear();
}
bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool on) {
  if (!node_->inputs.empty()) throw std::logic_error("set_requires_grad on a non-leaf tensor");
  node_->requires_grad = on;
}

std::vector<float> Tensor::slice(int n, int c) const {
  const auto& s = shape();
  const std::size_t off = (static_cast<std::size_t>(n) * s.c + c) * s.plane();
  return {node_->value.begin() + static_cast<std::ptrdiff_t>(off),
          node_->value.begin() + static_cast<std::ptrdiff_t>(off + s.plane())};
}

Tensor Tensor::detached() const { return from(shape(), {node_->value.begin(), node_->value.end()}, false); }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

void backward(std::span<const Tensor> roots, std::span<const std::vector<float>> seeds) {
  if (roots.size() != seeds.size()) throw std::invalid_argument("backward: one seed per root required");
  // Reverse topological order via iterative DFS.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  for (const auto& r : roots) {
    Node* n = r.node().get();
    if (!n || !n->requires_grad || seen.count(n)) continue;
    seen.insert(n);
    stack.emplace_back(n, 0);
    while (!stack.empty()) {
      auto& [cur, idx] = stack.back();
      if (idx < cur->inputs.size()) {
        Node* child = cur->inputs[idx++].get();
        if (child->requires_grad && !seen.count(child)) {
          seen.insert(child);
          stack.emplace_back(child, 0);
        }
      } else {
        order.push_back(cur);
        stack.pop_back();
      }
    }
  }
  for (std::size_t i = 0; i < roots.size(); ++i) {
    Node* n = roots[i].node().get();
    if (!n || !n->requires_grad) continue;
    if (seeds[i].size() != n->value.size()) throw std::invalid_argument("backward: seed size mismatch");
    auto& g = n->ensure_grad();
    for (std::size_t j = 0; j < g.size(); ++j) g[j] += seeds[i][j];
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

void backward(const Tensor& root, const std::vector<float>& seed) {
  backward(std::span<const Tensor>(&root, 1), std::span<const std::vector<float>>(&seed, 1));
}

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride) {
  check_defined(x, "conv2d");
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  if (ws.c != xs.c || ws.h != ws.w) {
    throw std::invalid_argument("conv2d: weight " + ws.str() + " incompatible with input " + xs.str());
  }
  ConvGeometry g{xs.c, xs.h, xs.w, ws.h, stride, ws.h / 2, 0, 0};
  g.ho = (g.h + 2 * g.pad - g.k) / stride + 1;
  g.wo = (g.w + 2 * g.pad - g.k) / stride + 1;
  const int cout = ws.n;
  const Shape os{xs.n, cout, g.ho, g.wo};

  FloatBuffer out(os.numel());
  FloatBuffer col(static_cast<std::size_t>(g.rows()) * g.cols());
  CMapF W(weight.data().data(), cout, g.rows());
  Eigen::Map<const Eigen::VectorXf> B(bias.data().data(), cout);
  for (int n = 0; n < xs.n; ++n) {
    im2col(x.data().data() + static_cast<std::size_t>(n) * xs.c * xs.plane(), g, col.data());
    MapF O(out.data() + static_cast<std::size_t>(n) * cout * g.cols(), cout, g.cols());
    O.noalias() = W * CMapF(col.data(), g.rows(), g.cols());
    O.colwise() += B;
  }

  Tensor result = make_result(os, {x.node(), weight.node(), bias.node()}, std::move(out));
  if (result.requires_grad()) {
    result.node()->backward = [g, cout](Node& self) {
      Node& xn = *self.inputs[0];
      Node& wn = *self.inputs[1];
      Node& bn = *self.inputs[2];
      const int batch = self.shape.n;
      const std::size_t in_stride = static_cast<std::size_t>(g.cin) * g.h * g.w;
      const std::size_t out_stride = static_cast<std::size_t>(cout) * g.cols();
      FloatBuffer col(static_cast<std::size_t>(g.rows()) * g.cols());
      CMapF W(wn.value.data(), cout, g.rows());
      for (int n = 0; n < batch; ++n) {
        CMapF dO(self.grad.data() + n * out_stride, cout, g.cols());
        if (wn.requires_grad) {
          im2col(xn.value.data() + n * in_stride, g, col.data());
          MapF dW(wn.ensure_grad().data(), cout, g.rows());
          dW.noalias() += dO * CMapF(col.data(), g.rows(), g.cols()).transpose();
        }
        if (bn.requires_grad) {
          Eigen::Map<Eigen::VectorXf> dB(bn.ensure_grad().data(), cout);
          dB += dO.rowwise().sum();
        }
        if (xn.requires_grad) {
          MapF C(col.data(), g.rows(), g.cols());
          C.noalias() = W.transpose() * dO;
          col2im(col.data(), g, xn.ensure_grad().data() + n * in_stride);
        }
      }
    };
  }
  return result;
}

Tensor leaky_relu(const Tensor& x, float slope) {
  check_defined(x, "leaky_relu");
  FloatBuffer out(x.data().begin(), x.data().end());
  for (float& v : out) v = v > 0.0f ? v : slope * v;
  Tensor result = make_result(x.shape(), {x.node()}, std::move(out));
  if (result.requires_grad()) {
    result.node()->backward = [slope](Node& self) {
      Node& xn = *self.inputs[0];
      auto& gx = xn.ensure_grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += xn.value[i] > 0.0f ? self.grad[i] : slope * self.grad[i];
    };
  }
  return result;
}

Tensor sigmoid(const Tensor& x) {
  check_defined(x, "sigmoid");
  FloatBuffer out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0f / (1.0f + std::exp(-x.data()[i]));
  Tensor result = make_result(x.shape(), {x.node()}, std::move(out));
  if (result.requires_grad()) {
    result.node()->backward = [](Node& self) {
      auto& gx = self.inputs[0]->ensure_grad();
      for (std::size_t i = 0; i < gx.size(); ++i) {
        const float s = self.value[i];
        gx[i] += self.grad[i] * s * (1.0f - s);
      }
    };
  }
  return result;
}

Tensor add(const Tensor& a, const Tensor& b) {
  check_defined(a, "add");
  check_defined(b, "add");
  if (!(a.shape() == b.shape())) throw std::invalid_argument("add: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  FloatBuffer out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  Tensor result = make_result(a.shape(), {a.node(), b.node()}, std::move(out));
  if (result.requires_grad()) {
    result.node()->backward = [](Node& self) {
      for (auto& in : self.inputs) {
        if (!in->requires_grad) continue;
        auto& g = in->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      }
    };
  }
  return result;
}

Tensor upsample2x(const Tensor& x) {
  check_defined(x, "upsample2x");
  const Shape s = x.shape();
  const Shape os{s.n, s.c, 2 * s.h, 2 * s.w};
  FloatBuffer out(os.numel());
  FloatBuffer tmp(static_cast<std::size_t>(s.h) * os.w);
  for (int p = 0; p < s.n * s.c; ++p) {
    const float* in = x.data().data() + static_cast<std::size_t>(p) * s.plane();
    float* o = out.data() + static_cast<std::size_t>(p) * os.plane();
    for (int y = 0; y < s.h; ++y) {
      upsample_line(s.w, [&](int i) { return in[y * s.w + i]; }, [&](int i, float v) { tmp[static_cast<std::size_t>(y) * os.w + i] = v; });
    }
    for (int xx = 0; xx < os.w; ++xx) {
      upsample_line(s.h, [&](int i) { return tmp[static_cast<std::size_t>(i) * os.w + xx]; }, [&](int i, float v) { o[static_cast<std::size_t>(i) * os.w + xx] = v; });
    }
  }
  Tensor result = make_result(os, {x.node()}, std::move(out));
  if (result.requires_grad()) {
    result.node()->backward = [s, os](Node& self) {
      auto& gx = self.inputs[0]->ensure_grad();
      FloatBuffer tmp(static_cast<std::size_t>(s.h) * os.w);
      for (int p = 0; p < s.n * s.c; ++p) {
        const float* go = self.grad.data() + static_cast<std::size_t>(p) * os.plane();
        float* gi = gx.data() + static_cast<std::size_t>(p) * s.plane();
        std::fill(tmp.begin(), tmp.end(), 0.0f);
        // Transpose of the column pass, then of the row pass.
        for (int xx = 0; xx < os.w; ++xx) {
          for (int i = 0; i < s.h; ++i) {
            const int lo = std::max(i - 1, 0);
            const int hi = std::min(i + 1, s.h - 1);
            const float a = go[static_cast<std::size_t>(2 * i) * os.w + xx];
            const float b = go[static_cast<std::size_t>(2 * i + 1) * os.w + xx];
            tmp[static_cast<std::size_t>(i) * os.w + xx] += 0.75f * (a + b);
            tmp[static_cast<std::size_t>(lo) * os.w + xx] += 0.25f * a;
            tmp[static_cast<std::size_t>(hi) * os.w + xx] += 0.25f * b;
          }
        }
        for (int y = 0; y < s.h; ++y) {
          for (int i = 0; i < s.w; ++i) {
            const int lo = std::max(i - 1, 0);
            const int hi = std::min(i + 1, s.w - 1);
            const float a = tmp[static_cast<std::size_t>(y) * os.w + 2 * i];
            const float b = tmp[static_cast<std::size_t>(y) * os.w + 2 * i + 1];
            gi[y * s.w + i] += 0.75f * (a + b);
            gi[y * s.w + lo] += 0.25f * a;
            gi[y * s.w + hi] += 0.25f * b;
          }
        }
      }
    };
  }
  return result;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  check_defined(a, "concat_channels");
  check_defined(b, "concat_channels");
  const Shape sa = a.shape();
  const Shape sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) throw std::invalid_argument("concat_channels: shape mismatch");
  const Shape os{sa.n, sa.c + sb.c, sa.h, sa.w};
  FloatBuffer out(os.numel());
  const std::size_t na = static_cast<std::size_t>(sa.c) * sa.plane();
  const std::size_t nb = static_cast<std::size_t>(sb.c) * sb.plane();
  for (int n = 0; n < sa.n; ++n) {
    std::copy_n(a.data().data() + n * na, na, out.data() + n * (na + nb));
    std::copy_n(b.data().data() + n * nb, nb, out.data() + n * (na + nb) + na);
  }
  Tensor result = make_result(os, {a.node(), b.node()}, std::move(out));
  if (result.requires_grad()) {
    result.node()->backward = [na, nb](Node& self) {
      const int batch = self.shape.n;
      for (int part = 0; part < 2; ++part) {
        Node& in = *self.inputs[static_cast<std::size_t>(part)];
        if (!in.requires_grad) continue;
        auto& g = in.ensure_grad();
        const std::size_t len = part == 0 ? na : nb;
        const std::size_t off = part == 0 ? 0 : na;
        for (int n = 0; n < batch; ++n) {
          for (std::size_t i = 0; i < len; ++i) g[n * len + i] += self.grad[n * (na + nb) + off + i];
        }
      }
    };
  }
  return result;
}

Tensor batch_slice(const Tensor& x, int start, int count) {
  check_defined(x, "batch_slice");
  const Shape s = x.shape();
  if (start < 0 || count < 1 || start + count > s.n) throw std::invalid_argument("batch_slice: range outside " + s.str());
  const Shape os{count, s.c, s.h, s.w};
  const std::size_t off = static_cast<std::size_t>(start) * s.c * s.plane();
  FloatBuffer out(x.data().begin() + static_cast<std::ptrdiff_t>(off),
                         x.data().begin() + static_cast<std::ptrdiff_t>(off + os.numel()));
  Tensor result = make_result(os, {x.node()}, std::move(out));
  if (result.requires_grad()) {
    result.node()->backward = [off](Node& self) {
      auto& g = self.inputs[0]->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[off + i] += self.grad[i];
    };
  }
  return result;
}

Tensor binary_gate(const Tensor& x) {
  check_defined(x, "binary_gate");
  FloatBuffer out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] >= 0.5f ? 1.0f : 0.0f;
  Tensor result = make_result(x.shape(), {x.node()}, std::move(out));
  if (result.requires_grad()) {
    result.node()->backward = [](Node& self) {
      auto& gx = self.inputs[0]->ensure_grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i];
    };
  }
  return result;
}

}  // namespace revhalf::nn

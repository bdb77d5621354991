#pragma once

#include <cstddef>
#include <new>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace revhalf::nn {

/// Allocator with a fixed 64-byte alignment. Vectorized kernels pick their
/// peeling from the buffer address, so a fixed alignment keeps the summation
/// order, and therefore the results, identical from run to run.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }
  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

using FloatBuffer = std::vector<float, AlignedAllocator<float>>;

/// NCHW extent.
struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t numel() const { return static_cast<std::size_t>(n) * c * h * w; }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

struct Node;

/// Reference-counted float tensor that records the operations producing it,
/// so gradients can be pulled back to every leaf with requires_grad set.
/// Copies share storage.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor filled(Shape shape, float value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<float> values, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t numel() const { return shape().numel(); }

  std::span<float> data();
  std::span<const float> data() const;

  /// Gradient buffer; allocated (zero) on first access.
  std::span<float> grad();
  bool has_grad() const;
  void zero_grad();

  bool requires_grad() const;
  /// Only valid on leaves (parameters and inputs).
  void set_requires_grad(bool on);

  /// Copy of sample `n`, channel `c` as a contiguous vector.
  std::vector<float> slice(int n, int c) const;

  /// Independent leaf with the same values.
  Tensor detached() const;

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  std::shared_ptr<Node> node_;

  friend Tensor make_result(Shape, std::vector<std::shared_ptr<Node>>, FloatBuffer);
  friend Tensor wrap(std::shared_ptr<Node>);
};

struct Node {
  Shape shape;
  FloatBuffer value;
  FloatBuffer grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  /// Reads this->grad and accumulates into inputs' grads.
  std::function<void(Node&)> backward;

  FloatBuffer& ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0f);
    return grad;
  }
};

/// Seeds d(loss)/d(root) for each root and propagates to every leaf in the graph.
void backward(std::span<const Tensor> roots, std::span<const std::vector<float>> seeds);
void backward(const Tensor& root, const std::vector<float>& seed);

/// While alive, operations do not record graph edges on this thread.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// ---- operations ------------------------------------------------------------

/// Square-kernel convolution, zero padding k/2. weight: [cout, cin, k, k]; bias: [1, cout, 1, 1].
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride = 1);
Tensor leaky_relu(const Tensor& x, float slope);
Tensor sigmoid(const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);
/// 2x bilinear upsampling, half-pixel centers, edge clamped.
Tensor upsample2x(const Tensor& x);
Tensor concat_channels(const Tensor& a, const Tensor& b);
/// Samples [start, start + count) along the batch axis.
Tensor batch_slice(const Tensor& x, int start, int count);
/// Hard threshold at 0.5 (ties to 1); the backward pass is the identity.
Tensor binary_gate(const Tensor& x);

}  // namespace revhalf::nn

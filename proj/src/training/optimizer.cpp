#include <cmath>

#include "revhalf/training.hpp"

namespace revhalf {

void Adam::step(const std::vector<NamedTensor>& params, AdamState& state) const {
  ++state.step;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (const auto& p : params) {
    nn::Tensor t = p.tensor;
    if (!t.requires_grad()) continue;
    auto& m = state.m[p.name];
    auto& v = state.v[p.name];
    if (m.size() != t.numel()) m.assign(t.numel(), 0.0f);
    if (v.size() != t.numel()) v.assign(t.numel(), 0.0f);
    if (!t.has_grad()) continue;
    auto g = t.grad();
    auto x = t.data();
    for (std::size_t i = 0; i < x.size(); ++i) {
      m[i] = static_cast<float>(beta1 * m[i] + (1.0 - beta1) * g[i]);
      v[i] = static_cast<float>(beta2 * v[i] + (1.0 - beta2) * g[i] * g[i]);
      const double mh = m[i] / c1;
      const double vh = v[i] / c2;
      x[i] -= static_cast<float>(lr * mh / (std::sqrt(vh) + eps));
    }
    t.zero_grad();
  }
}

}  // namespace revhalf

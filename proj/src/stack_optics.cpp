#include "bicavity/stack_optics.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace bicavity {

namespace {

using Mat2 = std::array<cplx, 4>;  // row-major

// Maps (forward, backward) amplitudes just right of the interface between
// media i|j onto those just left of it.
Mat2 interface_matrix(cplx n_i, cplx n_j) {
  const cplx r = (n_i - n_j) / (n_i + n_j);
  const cplx t = 2.0 * n_i / (n_i + n_j);
  return {1.0 / t, r / t, r / t, 1.0 / t};
}

// Maps amplitudes at the right edge of a layer onto its left edge.
Mat2 propagation_matrix(cplx phase) {
  return {std::exp(-I * phase), 0.0, 0.0, std::exp(I * phase)};
}

struct Solution {
  // Forward/backward amplitudes at the left edge of every medium:
  // index 0 is the ambient (at z = 0), 1..n the layers, n+1 the substrate.
  std::vector<std::array<cplx, 2>> amplitudes;
  std::vector<cplx> index;
  std::vector<double> left_edge;
};

Solution solve(const LayerStack& stack, cplx freq) {
  const cplx k0 = 2.0 * pi * freq;
  const std::size_t n = stack.layers.size();

  Solution s;
  s.index.reserve(n + 2);
  s.index.push_back(stack.ambient.index());
  for (const auto& layer : stack.layers) s.index.push_back(layer.medium.index());
  s.index.push_back(stack.substrate.index());

  s.left_edge.resize(n + 2, 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    s.left_edge[i + 1] = z;
    z += stack.layers[i].thickness;
  }
  s.left_edge[n + 1] = z;

  // Back-propagate from the substrate, where only the transmitted wave exists.
  s.amplitudes.assign(n + 2, {cplx{0.0}, cplx{0.0}});
  std::array<cplx, 2> v{1.0, 0.0};
  s.amplitudes[n + 1] = v;
  for (std::size_t m = n + 1; m-- > 0;) {
    const Mat2 itf = interface_matrix(s.index[m], s.index[m + 1]);
    v = {itf[0] * v[0] + itf[1] * v[1], itf[2] * v[0] + itf[3] * v[1]};
    if (m >= 1) {
      const Mat2 prop = propagation_matrix(k0 * s.index[m] * stack.layers[m - 1].thickness);
      v = {prop[0] * v[0] + prop[1] * v[1], prop[2] * v[0] + prop[3] * v[1]};
    }
    s.amplitudes[m] = v;
  }

  // Normalize to unit incident amplitude.
  const cplx scale = 1.0 / s.amplitudes[0][0];
  for (auto& a : s.amplitudes) {
    a[0] *= scale;
    a[1] *= scale;
  }
  return s;
}

}  // namespace

double LayerStack::total_thickness() const {
  double d = 0.0;
  for (const auto& l : layers) d += l.thickness;
  return d;
}

bool LayerStack::lossless() const {
  if (!ambient.lossless() || !substrate.lossless()) return false;
  for (const auto& l : layers)
    if (!l.medium.lossless()) return false;
  return true;
}

LayerStack LayerStack::reversed() const {
  LayerStack out;
  out.layers.assign(layers.rbegin(), layers.rend());
  out.ambient = substrate;
  out.substrate = ambient;
  return out;
}

void LayerStack::validate() const {
  ambient.validate();
  substrate.validate();
  for (const auto& l : layers) {
    l.medium.validate();
    if (!(l.thickness >= 0.0)) throw std::invalid_argument("LayerStack: negative layer thickness");
  }
}

double effective_index(const PhcSlabSpec& phc) {
  if (!(phc.hole_radius >= 0.0 && phc.hole_radius < 0.5 * phc.period))
    throw std::invalid_argument("effective_index: hole radius must satisfy 0 <= a < period/2");
  const double eta = phc.fill_factor();
  return (1.0 - eta) * phc.slab.n_re + eta;
}

LayerStack effective_stack(const PhcSlabSpec& phc) {
  LayerStack s;
  s.layers.push_back({Medium{effective_index(phc), 0.0}, phc.thickness});
  return s;
}

LayerStack effective_stack(const CavitySpec& cavity) {
  LayerStack s;
  s.layers.push_back({Medium{effective_index(cavity.slab1), 0.0}, cavity.slab1.thickness});
  s.layers.push_back({Medium::vacuum(), cavity.gap});
  s.layers.push_back({Medium{effective_index(cavity.slab2), 0.0}, cavity.slab2.thickness});
  return s;
}

ScatteringAmplitudes tmm_scatter(const LayerStack& stack, cplx freq) {
  if (!(freq.real() > 0.0)) throw std::invalid_argument("tmm_scatter: frequency must be positive");
  const Solution s = solve(stack, freq);
  ScatteringAmplitudes out;
  out.r = s.amplitudes.front()[1];
  out.t = s.amplitudes.back()[0];
  out.R = std::norm(out.r);
  out.T = std::norm(out.t) * stack.substrate.n_re / stack.ambient.n_re;
  return out;
}

FieldProfile tmm_field_profile(const LayerStack& stack, cplx freq, std::span<const double> grid) {
  if (!(freq.real() > 0.0)) throw std::invalid_argument("tmm_field_profile: frequency must be positive");
  const Solution s = solve(stack, freq);
  const cplx k0 = 2.0 * pi * freq;
  const std::size_t last = s.amplitudes.size() - 1;

  FieldProfile out;
  out.z.assign(grid.begin(), grid.end());
  out.e.reserve(grid.size());
  for (double z : grid) {
    std::size_t m = 0;
    if (z >= s.left_edge[last]) {
      m = last;
    } else if (z >= 0.0) {
      m = 1;
      while (m + 1 < last && z >= s.left_edge[m + 1]) ++m;
    }
    const cplx phase = k0 * s.index[m] * (z - s.left_edge[m]);
    out.e.push_back(s.amplitudes[m][0] * std::exp(I * phase) + s.amplitudes[m][1] * std::exp(-I * phase));
  }
  return out;
}

}  // namespace bicavity

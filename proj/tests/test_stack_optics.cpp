#include <doctest.h>

#include <random>

#include "bicavity/stack_optics.hpp"
#include "oracles.hpp"

using namespace bicavity;

namespace {

LayerStack single_layer(cplx n, double d) {
  LayerStack s;
  s.layers.push_back({Medium{n.real(), n.imag()}, d});
  return s;
}

double max_abs(const FieldProfile& f, double lo, double hi) {
  double m = 0.0;
  for (std::size_t i = 0; i < f.z.size(); ++i)
    if (f.z[i] > lo && f.z[i] < hi) m = std::max(m, std::abs(f.e[i]));
  return m;
}

// Frequency of the highest transmittance on a fine scan.
double transmission_peak(const LayerStack& s, double lo, double hi) {
  double best = lo, best_t = -1.0;
  for (double f = lo; f < hi; f += 1e-4) {
    const double t = tmm_scatter(s, f).T;
    if (t > best_t) best_t = t, best = f;
  }
  return best;
}

}  // namespace

TEST_CASE("effective index of a holey slab") {
  PhcSlabSpec p = designs::fano_mirror();
  p.hole_radius = 0.0;
  CHECK(effective_index(p) == doctest::Approx(kGaAsIndex).epsilon(1e-15));

  p = designs::fano_mirror();
  const double eta = pi * std::pow(0.1525 / 0.6, 2);
  CHECK(eta == doctest::Approx(0.2029).epsilon(1e-3));
  CHECK(effective_index(p) == doctest::Approx((1.0 - eta) * kGaAsIndex + eta).epsilon(1e-14));
  CHECK(effective_index(p) == doctest::Approx(2.892).epsilon(2e-4));

  p.slab = Medium{1.0, 0.0};
  CHECK(effective_index(p) == doctest::Approx(1.0).epsilon(1e-15));

  p.hole_radius = 0.35;
  CHECK_THROWS_AS(effective_index(p), std::invalid_argument);
}

TEST_CASE("empty stack is transparent") {
  const LayerStack s;
  const auto r = tmm_scatter(s, 1.0);
  CHECK(std::abs(r.r) < 1e-15);
  CHECK(std::abs(r.t - 1.0) < 1e-15);
}

TEST_CASE("half-wave layer is reflectionless") {
  const double n = kGaAsIndex;
  const auto r = tmm_scatter(single_layer(n, 1.0 / (2.0 * n)), 1.0);
  CHECK(r.R < 1e-24);
  CHECK(r.T == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("single layer agrees with the Airy formulas") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> nd(1.2, 4.0), dd(0.01, 1.0), fd(0.5, 1.5), kd(0.0, 0.05);
  for (int i = 0; i < 200; ++i) {
    const cplx n{nd(rng), (i % 2) ? kd(rng) : 0.0};
    const double d = dd(rng), f = fd(rng);
    const auto got = tmm_scatter(single_layer(n, d), f);
    const auto ref = oracle::airy_slab(n, d, f);
    CHECK(std::abs(got.r - ref.r) < 1e-12);
    CHECK(std::abs(got.t - ref.t) < 1e-12);
    CHECK(std::abs(got.R - std::norm(ref.r)) < 1e-12);
    CHECK(std::abs(got.T - std::norm(ref.t)) < 1e-12);
  }
}

TEST_CASE("Airy formulas hold at complex frequency") {
  const cplx f{0.97, -0.01};
  const auto got = tmm_scatter(single_layer(3.0, 0.3), f);
  const auto ref = oracle::airy_slab(3.0, 0.3, f);
  CHECK(std::abs(got.r - ref.r) < 1e-12);
  CHECK(std::abs(got.t - ref.t) < 1e-12);
}

TEST_CASE("lossless stacks conserve energy and are reciprocal") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> nd(1.0, 4.0), dd(0.0, 0.7), fd(0.3, 2.0);
  for (int i = 0; i < 100; ++i) {
    LayerStack s;
    const int layers = 1 + i % 5;
    for (int k = 0; k < layers; ++k) s.layers.push_back({Medium{nd(rng), 0.0}, dd(rng)});
    const double f = fd(rng);
    const auto a = tmm_scatter(s, f);
    const auto b = tmm_scatter(s.reversed(), f);
    CHECK(std::abs(a.R + a.T - 1.0) < 1e-12);
    CHECK(std::abs(a.t - b.t) < 1e-12);
    CHECK(std::abs(a.R - b.R) < 1e-12);
  }
}

TEST_CASE("absorbing stacks have positive absorption") {
  LayerStack s = single_layer({3.374, 1e-3}, 0.2);
  s.layers.push_back({Medium{1.5, 0.0}, 0.3});
  const auto r = tmm_scatter(s, 1.0);
  CHECK(r.A() > 0.0);
  CHECK(r.A() < 1.0);
}

TEST_CASE("stack composition matches two-port cascading") {
  // [A][B] against the series built from A (both sides) and B.
  LayerStack a, b, ab;
  a.layers = {{Medium{2.0, 0.0}, 0.13}, {Medium{3.1, 0.0}, 0.07}};
  b.layers = {{Medium{1.4, 0.0}, 0.21}, {Medium{2.6, 0.0}, 0.05}};
  ab.layers = a.layers;
  ab.layers.insert(ab.layers.end(), b.layers.begin(), b.layers.end());
  for (double f : {0.6, 0.9, 1.3}) {
    const auto sa = tmm_scatter(a, f);
    const auto sa_back = tmm_scatter(a.reversed(), f);
    const auto sb = tmm_scatter(b, f);
    const cplx den = 1.0 - sa_back.r * sb.r;
    const cplx r = sa.r + sa.t * sa.t * sb.r / den;  // t_A forward = t_A backward
    const cplx t = sa.t * sb.t / den;
    const auto full = tmm_scatter(ab, f);
    CHECK(std::abs(full.r - r) < 1e-12);
    CHECK(std::abs(full.t - t) < 1e-12);
  }
}

TEST_CASE("field in vacuum is a unit travelling wave") {
  const LayerStack s;
  std::vector<double> z{-1.0, -0.3, 0.0, 0.4, 2.0};
  const auto p = tmm_field_profile(s, 1.0, z);
  for (const cplx e : p.e) CHECK(std::abs(e) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(p.e[3] - std::exp(I * 2.0 * pi * 0.4)) < 1e-14);
}

TEST_CASE("field is continuous across interfaces") {
  const LayerStack s = effective_stack(CavitySpec::symmetric(designs::fano_mirror(), 0.4));
  const double t = designs::fano_mirror().thickness;
  for (double zi : {0.0, t, t + 0.4, 2 * t + 0.4}) {
    std::vector<double> z{zi - 1e-10, zi + 1e-10};
    const auto p = tmm_field_profile(s, 0.93, z);
    CHECK(std::abs(p.e[0] - p.e[1]) < 1e-8);
  }
  // Transmitted side carries exactly t.
  std::vector<double> z{s.total_thickness() + 1e-12};
  CHECK(std::abs(tmm_field_profile(s, 0.93, z).e[0] - tmm_scatter(s, 0.93).t) < 1e-10);
}

TEST_CASE("far-field resonance concentrates the field in the gap") {
  const PhcSlabSpec slab = designs::fano_mirror();
  const double q = 0.6;
  const LayerStack s = effective_stack(CavitySpec::symmetric(slab, q));
  const double f = transmission_peak(s, 0.8, 1.0);
  CHECK(tmm_scatter(s, f).T > 0.9999);
  std::vector<double> z;
  for (int i = 0; i <= 2000; ++i) z.push_back(s.total_thickness() * i / 2000.0);
  const auto p = tmm_field_profile(s, f, z);
  const double t = slab.thickness;
  CHECK(max_abs(p, t, t + q) > 2.0 * max_abs(p, 0.0, t));
}

TEST_CASE("near-field transmission mode lives in the slabs") {
  const PhcSlabSpec slab = designs::fano_mirror();
  const double q = 0.02;
  const LayerStack s = effective_stack(CavitySpec::symmetric(slab, q));
  const double f = transmission_peak(s, 0.5, 1.5);
  CHECK(tmm_scatter(s, f).T > 0.9999);
  std::vector<double> z;
  for (int i = 0; i <= 2000; ++i) z.push_back(s.total_thickness() * i / 2000.0);
  const auto p = tmm_field_profile(s, f, z);
  const double t = slab.thickness;
  CHECK(max_abs(p, t, t + q) < max_abs(p, 0.0, t));
  CHECK(max_abs(p, t, t + q) < max_abs(p, t + q, 2 * t + q));
}

TEST_CASE("invalid input is rejected") {
  LayerStack s = single_layer(2.0, 0.1);
  CHECK_THROWS_AS(tmm_scatter(s, 0.0), std::invalid_argument);
  s.layers[0].thickness = -0.1;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s.layers[0] = {Medium{2.0, -1e-3}, 0.1};
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "kacsphere/density.hpp"

using namespace kacsphere;

namespace {

double mc_moment(const BaseDensity& f, int k, std::size_t n, std::uint64_t seed) {
  Rng rng(StreamKey(seed, "density-test"));
  std::vector<double> v(std::size_t(f.dim()));
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    f.sample(rng, v);
    double r2 = 0.0;
    for (double x : v) r2 += x * x;
    acc += std::pow(r2, 0.5 * k);
  }
  return acc / double(n);
}

}  // namespace

TEST(Density, RegistryKeysAndEnergyNormalization) {
  for (const auto& key : density_registry_keys())
    for (int d : {1, 2, 3}) {
      auto f = make_density(key, d);
      EXPECT_EQ(f->dim(), d);
      EXPECT_NEAR(f->moment(2), double(d), 1e-12) << key;
      EXPECT_GT(f->energy_variance(), 0.0);
    }
  EXPECT_THROW(make_density("laplace", 1), ConfigError);
}

TEST(Density, KnownEnergyVariances) {
  EXPECT_NEAR(make_density("gaussian", 1)->energy_variance(), 2.0, 1e-12);
  EXPECT_NEAR(make_density("uniform", 1)->energy_variance(), 0.8, 1e-12);
  EXPECT_NEAR(make_density("gaussian", 3)->energy_variance(), 6.0, 1e-12);
}

TEST(Density, MomentsAgreeWithSampling) {
  for (const auto& key : density_registry_keys())
    for (int d : {1, 3}) {
      auto f = make_density(key, d);
      for (int k : {2, 4}) {
        const double mc = mc_moment(*f, k, 200000, 7);
        EXPECT_NEAR(mc, f->moment(k), 0.02 * f->moment(k)) << key << d << k;
      }
    }
}

TEST(Density, OddMomentsInOneDimensionByQuadrature) {
  EXPECT_NEAR(make_density("uniform", 1)->moment(1), std::sqrt(3.0) / 2.0, 1e-10);
  EXPECT_NEAR(make_density("gaussian", 1)->moment(1), std::sqrt(2.0 / std::numbers::pi), 1e-10);
  EXPECT_NEAR(make_density("gaussian", 1)->moment(3), 2.0 * std::sqrt(2.0 / std::numbers::pi), 1e-10);
}

TEST(Density, NormalizedInOneDimension) {
  for (const auto& key : density_registry_keys()) {
    auto f = make_density(key, 1);
    const double mass = integrate_pieces([&](double v) { return f->density1(v); }, f->breakpoints(), 1e-12);
    EXPECT_NEAR(mass, 1.0, 1e-9) << key;
  }
}

TEST(Density, ScoreMatchesFiniteDifference) {
  for (const auto& key : density_registry_keys()) {
    auto f = make_density(key, 2);
    std::vector<double> v = {0.37, -0.81}, s(2);
    ASSERT_TRUE(f->score(v, s));
    for (int a = 0; a < 2; ++a) {
      auto p = v, m = v;
      p[a] += 1e-6;
      m[a] -= 1e-6;
      EXPECT_NEAR(s[a], (f->log_density(p) - f->log_density(m)) / 2e-6, 1e-6) << key;
    }
  }
}

TEST(Density, UniformScoreUndefinedAtBoundary) {
  auto f = make_density("uniform", 1);
  std::vector<double> out(1);
  const double edge = std::sqrt(3.0), outside = 2.0;
  EXPECT_FALSE(f->score(std::span<const double>(&edge, 1), out));
  EXPECT_FALSE(f->score(std::span<const double>(&outside, 1), out));
  EXPECT_EQ(f->density1(outside), 0.0);
}

TEST(Density, CharacteristicFunctionsMatchQuadrature) {
  for (const auto& key : density_registry_keys()) {
    auto f = make_density(key, 1);
    for (double s : {0.0, 0.3, 1.7, 5.0}) {
      auto closed = f->characteristic(s);
      auto quad = f->BaseDensity::characteristic(s);
      EXPECT_NEAR(std::abs(closed - quad), 0.0, 1e-10) << key << s;
    }
  }
}

TEST(Density, LiftedCharacteristicClosedFormsMatchQuadrature) {
  std::vector<double> s = {-2.0, -0.4, 0.0, 0.9, 3.1};
  std::vector<double> t = {0.0, 0.2, 0.75, 1.6};
  for (const auto& key : density_registry_keys()) {
    auto f = make_density(key, 1);
    Eigen::MatrixXcd a, b;
    f->lifted_characteristic(s, t, a);
    f->BaseDensity::lifted_characteristic(s, t, b);
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-10) << key;
    EXPECT_NEAR(std::abs(a(2, 0) - 1.0), 0.0, 1e-10);
  }
}

TEST(Density, GaussianLiftedCharacteristicSpotValue) {
  GaussianDensity g(1, 1.0);
  std::vector<double> s = {1.0}, t = {0.5};
  Eigen::MatrixXcd out;
  g.lifted_characteristic(s, t, out);
  const std::complex<double> den = 1.0 - std::complex<double>(0.0, 1.0);
  const auto expected = std::pow(den, -0.5) * std::exp(-0.5 / den);
  EXPECT_NEAR(std::abs(out(0, 0) - expected), 0.0, 1e-14);
}

TEST(Density, RejectsWrongPointDimension) {
  auto f = make_density("gaussian", 2);
  std::vector<double> v(3, 0.0);
  EXPECT_THROW(f->log_density(v), ShapeError);
  EXPECT_THROW(f->density1(0.0), ParameterError);
}

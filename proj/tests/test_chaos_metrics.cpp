#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "kacsphere/chaos_metrics.hpp"

using namespace kacsphere;

namespace {

EmpiricalMeasure random_cloud(Rng& rng, std::size_t n, int dim, double shift = 0.0, double scale = 1.0) {
  std::vector<double> p(n * std::size_t(dim));
  for (double& x : p) x = shift + scale * rng.normal();
  return EmpiricalMeasure(std::move(p), dim);
}

EmpiricalMeasure gaussian_samples(std::size_t n, int dim, double var, std::uint64_t seed) {
  Rng rng(StreamKey(seed, "metrics-test"));
  return random_cloud(rng, n, dim, 0.0, std::sqrt(var));
}

double brute_force(const EmpiricalMeasure& a, const EmpiricalMeasure& b, double p) {
  std::vector<std::size_t> perm(a.size());
  std::iota(perm.begin(), perm.end(), std::size_t(0));
  double best = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (std::size_t i = 0; i < perm.size(); ++i) {
      double d2 = 0.0;
      for (int k = 0; k < a.dim(); ++k) d2 += std::pow(a.point(i)[k] - b.point(perm[i])[k], 2);
      c += std::pow(d2, 0.5 * p);
    }
    best = std::min(best, c / double(perm.size()));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::pow(best, 1.0 / p);
}

EmpiricalMeasure lift_to_plane(const EmpiricalMeasure& m) {
  std::vector<double> p;
  for (std::size_t i = 0; i < m.size(); ++i) {
    p.push_back(m.point(i)[0]);
    p.push_back(0.0);
  }
  return EmpiricalMeasure(std::move(p), 2, std::vector<double>(m.weights().begin(), m.weights().end()));
}

}  // namespace

TEST(EmpiricalMeasure, Validation) {
  EXPECT_THROW(EmpiricalMeasure({1.0, 2.0, 3.0}, 2), ShapeError);
  EXPECT_THROW(EmpiricalMeasure({1.0, 2.0}, 1, {0.5, 0.6}), ParameterError);
  EXPECT_THROW(EmpiricalMeasure({1.0, NAN}, 1), ParameterError);
  EXPECT_NO_THROW(EmpiricalMeasure({1.0, 2.0}, 1, {0.25, 0.75}));
}

TEST(Wasserstein, ElementaryExamples) {
  EmpiricalMeasure a({0.0, 1.0}, 1), b({0.5, 1.5}, 1);
  EXPECT_NEAR(w1(a, b), 0.5, 1e-15);
  EXPECT_NEAR(w1(a, a), 0.0, 1e-15);
  EmpiricalMeasure d0({0.0, 0.0}, 2), dc({3.0, 4.0}, 2);
  EXPECT_NEAR(w1(d0, dc), 5.0, 1e-12);
  EXPECT_NEAR(w2(d0, dc), 5.0, 1e-12);
  EXPECT_NEAR(w2(dc, dc), 0.0, 1e-12);
}

TEST(Wasserstein, NetworkSimplexMatchesBruteForce) {
  Rng rng(StreamKey(5, "bf"));
  for (int rep = 0; rep < 20; ++rep) {
    auto a = random_cloud(rng, 6, 2), b = random_cloud(rng, 6, 2, 0.5);
    EXPECT_NEAR(w1(a, b), brute_force(a, b, 1.0), 1e-10);
    EXPECT_NEAR(w2(a, b), brute_force(a, b, 2.0), 1e-10);
  }
}

TEST(Wasserstein, QuantileFormulaMatchesNetworkSimplex) {
  Rng rng(StreamKey(6, "q"));
  for (int rep = 0; rep < 10; ++rep) {
    auto a = random_cloud(rng, 100, 1), b = random_cloud(rng, 100, 1, 0.3, 1.5);
    EXPECT_NEAR(w2(a, b), w2(lift_to_plane(a), lift_to_plane(b)), 1e-10);
    EXPECT_NEAR(w1(a, b), w1(lift_to_plane(a), lift_to_plane(b)), 1e-10);
  }
}

TEST(Wasserstein, WeightedUnequalSizes) {
  Rng rng(StreamKey(7, "w"));
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<double> pa(37), pb(23), wa(37), wb(23);
    for (double& x : pa) x = rng.normal();
    for (double& x : pb) x = rng.normal() + 0.2;
    for (double& w : wa) w = rng.uniform() + 0.1;
    for (double& w : wb) w = rng.uniform() + 0.1;
    const double sa = std::accumulate(wa.begin(), wa.end(), 0.0), sb = std::accumulate(wb.begin(), wb.end(), 0.0);
    for (double& w : wa) w /= sa;
    for (double& w : wb) w /= sb;
    const double ta = std::accumulate(wa.begin(), wa.end(), 0.0), tb = std::accumulate(wb.begin(), wb.end(), 0.0);
    wa[0] += 1.0 - ta;
    wb[0] += 1.0 - tb;
    EmpiricalMeasure a(pa, 1, wa), b(pb, 1, wb);
    EXPECT_NEAR(w1(a, b), w1(lift_to_plane(a), lift_to_plane(b)), 1e-10);
    EXPECT_NEAR(w2(a, b), w2(lift_to_plane(a), lift_to_plane(b)), 1e-10);
  }
}

TEST(Wasserstein, MetricAxiomsOnRandomTriples) {
  Rng rng(StreamKey(8, "axioms"));
  for (int rep = 0; rep < 10; ++rep) {
    auto a = random_cloud(rng, 40, 2), b = random_cloud(rng, 40, 2, 0.4), c = random_cloud(rng, 40, 2, -0.3, 1.3);
    for (auto W : {&w1, &w2}) {
      const double ab = (*W)(a, b, 1), ba = (*W)(b, a, 1), bc = (*W)(b, c, 1), ac = (*W)(a, c, 1);
      EXPECT_NEAR(ab, ba, 1e-12);
      EXPECT_LE(ac, ab + bc + 1e-9);
      EXPECT_NEAR((*W)(a, a, 1), 0.0, 1e-12);
      EXPECT_GT(ab, 0.0);
    }
    EXPECT_LE(w1(a, b), w2(a, b) + 1e-12);
  }
}

TEST(Wasserstein, CapacityLimit) {
  Rng rng(StreamKey(9, "cap"));
  auto a = random_cloud(rng, 2001, 2), b = random_cloud(rng, 2001, 2);
  EXPECT_THROW(w1(a, b), CapacityError);
  auto c = random_cloud(rng, 5000, 1), d = random_cloud(rng, 5000, 1);
  EXPECT_NO_THROW(w1(c, d));
  EXPECT_THROW(w1(a, c), ShapeError);
}

TEST(Wasserstein, ParticleMeasureOfConfiguration) {
  auto c = ParticleConfiguration(SphereSpec::boltzmann(1, 2), {1.0, -1.0});
  auto mu = EmpiricalMeasure::of_particles(c);
  EmpiricalMeasure d0({0.0}, 1);
  EXPECT_NEAR(w1(mu, d0), 1.0, 1e-15);
}

TEST(Transport, MediumProblemSatisfiesMarginals) {
  Rng rng(StreamKey(10, "tp"));
  const std::size_t n = 300;
  auto a = random_cloud(rng, n, 3), b = random_cloud(rng, n, 3, 0.1);
  std::vector<double> cost(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double d2 = 0.0;
      for (int k = 0; k < 3; ++k) d2 += std::pow(a.point(i)[k] - b.point(j)[k], 2);
      cost[i * n + j] = std::sqrt(d2);
    }
  std::vector<double> s(n, 1.0);
  TransportSimplex ts(s, s, cost);
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0, col = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      row += ts.flow(int(i), int(j));
      col += ts.flow(int(j), int(i));
      EXPECT_GE(ts.flow(int(i), int(j)), 0.0);
    }
    EXPECT_NEAR(row, 1.0, 1e-9);
    EXPECT_NEAR(col, 1.0, 1e-9);
  }
}

TEST(Entropy, GaussianSamplesHaveZeroRelativeEntropy) {
  auto mu = gaussian_samples(100000, 1, 1.0, 11);
  auto e = relative_entropy_vs_gaussian(mu);
  EXPECT_GT(e.std_error, 0.0);
  EXPECT_NEAR(e.value, 0.0, 3.0 * e.std_error);
}

TEST(Entropy, WideGaussianClosedForm) {
  auto mu = gaussian_samples(100000, 1, 4.0, 12);
  auto e = relative_entropy_vs_gaussian(mu);
  EXPECT_NEAR(e.value, 0.5 * (4.0 - 1.0 - std::log(4.0)), 3.0 * e.std_error);
  EXPECT_NEAR(0.5 * (4.0 - 1.0 - std::log(4.0)), 0.80685, 1e-5);
}

TEST(Entropy, UniformClosedForm) {
  Rng rng(StreamKey(13, "u"));
  std::vector<double> p(100000);
  for (double& x : p) x = rng.uniform(-std::sqrt(3.0), std::sqrt(3.0));
  auto e = relative_entropy_vs_gaussian(EmpiricalMeasure(p, 1));
  EXPECT_NEAR(e.value, 0.17649, 3.0 * e.std_error + 1e-5);
}

TEST(Entropy, TwoDimensionalGaussian) {
  auto mu = gaussian_samples(50000, 2, 4.0, 14);
  auto e = relative_entropy_vs_gaussian(mu);
  EXPECT_NEAR(e.value, 2.0 * 0.5 * (4.0 - 1.0 - std::log(4.0)), 3.0 * e.std_error);
}

TEST(Entropy, ErrorShrinksWithSampleSize) {
  const double truth = 0.5 * (4.0 - 1.0 - std::log(4.0));
  std::vector<RatePoint> rows;
  EntropyOptions opt;
  opt.folds = 0;
  for (std::size_t n : {1000u, 10000u, 100000u}) {
    double err = 0.0;
    for (std::uint64_t s = 0; s < 6; ++s)
      err += std::abs(relative_entropy_vs_gaussian(gaussian_samples(n, 1, 4.0, 100 + s), opt).value - truth);
    rows.push_back({double(n), err / 6.0, 0.0});
  }
  EXPECT_LE(fit_power_law(rows).slope, -0.3);
}

TEST(Entropy, DuplicatesAreJittered) {
  std::vector<double> p;
  Rng rng(StreamKey(15, "dup"));
  for (int i = 0; i < 500; ++i) {
    const double x = rng.normal();
    p.push_back(x);
    p.push_back(x);
  }
  auto e = relative_entropy_vs_gaussian(EmpiricalMeasure(p, 1));
  EXPECT_TRUE(e.jittered);
  EXPECT_TRUE(std::isfinite(e.value));
  EXPECT_FALSE(relative_entropy_vs_gaussian(gaussian_samples(500, 1, 1.0, 3)).jittered);
}

TEST(Fisher, ClosedForms) {
  GaussianDensity g(1), g4(1, 4.0), g4d2(2, 4.0);
  auto zero = relative_fisher(g, gaussian_samples(1000, 1, 1.0, 16));
  EXPECT_NEAR(zero.value, 0.0, 1e-14);
  auto wide = relative_fisher(g4, gaussian_samples(100000, 1, 4.0, 17));
  EXPECT_NEAR(wide.value, 2.25, 3.0 * wide.std_error);
  auto wide2 = relative_fisher(g4d2, gaussian_samples(100000, 2, 4.0, 18));
  EXPECT_NEAR(wide2.value, 4.5, 3.0 * wide2.std_error);
}

TEST(Fisher, BoundaryPointsAreExcluded) {
  UniformBoxDensity u(1);
  EmpiricalMeasure m({0.0, std::sqrt(3.0), 0.5, 5.0}, 1);
  auto e = relative_fisher(u, m);
  EXPECT_EQ(e.excluded, 2u);
  EXPECT_NEAR(e.value, 0.125, 1e-15);
}

TEST(Interpolation, HandEvaluatedCases) {
  EmpiricalMeasure d0({0.0}, 1), d1({1.0}, 1);
  auto c = interpolation_check(d0, d1, 4);
  EXPECT_NEAR(c.w2, 1.0, 1e-15);
  EXPECT_NEAR(c.bound, std::pow(2.0, 1.5), 1e-12);
  EXPECT_TRUE(c.passed);
  auto same = interpolation_check(d1, d1, 4);
  EXPECT_TRUE(same.passed);
  EXPECT_THROW(interpolation_check(d0, d1, 1), ParameterError);
}

TEST(Interpolation, RandomOneDimensionalPairs) {
  Rng rng(StreamKey(19, "interp"));
  for (int rep = 0; rep < 100; ++rep) {
    auto a = random_cloud(rng, 200, 1, rng.uniform(-1, 1), rng.uniform(0.2, 2.0));
    auto b = random_cloud(rng, 200, 1, rng.uniform(-1, 1), rng.uniform(0.2, 2.0));
    EXPECT_TRUE(interpolation_check(a, b, 4).passed) << rep;
  }
}

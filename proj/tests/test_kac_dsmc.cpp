#include <cmath>
#include <numeric>
#include <sstream>

#include <gtest/gtest.h>

#include "kacsphere/kac_dsmc.hpp"

using namespace kacsphere;

namespace {

SimulationState fresh(int d, int N, std::uint64_t seed) {
  Rng rng(StreamKey(seed, "dsmc-test"));
  return SimulationState(sample_uniform(SphereSpec::boltzmann(d, N), rng), seed);
}

double abs_sum(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s;
}

}  // namespace

TEST(Kernel, RejectsOneDimensionAndBadMass) {
  EXPECT_THROW(CollisionKernel::uniform(1), ParameterError);
  EXPECT_THROW(CollisionKernel::uniform(2, 0.0), ParameterError);
  EXPECT_THROW(CollisionKernel::truncated_singular(3, -1.0, 0.1, 1.0), ParameterError);
  EXPECT_NEAR(CollisionKernel::uniform(3, 2.0).mean_free_time(11), 11.0 / 20.0, 1e-15);
}

TEST(Kernel, SingularDeviationAngleLaw) {
  const double alpha = 0.5, delta = 0.1;
  auto k = CollisionKernel::truncated_singular(3, alpha, delta, 1.0);
  const double a = 2.0 * (std::sqrt(2.0) - std::sqrt(delta));
  const double b = 2.0 / 3.0 * (std::pow(2.0, 1.5) - std::pow(delta, 1.5));
  const double mean_c = 1.0 - b / a;
  Rng rng(StreamKey(1, "angle"));
  std::vector<double> cs;
  const double u[3] = {0.3, -1.2, 0.5};
  const double un = std::sqrt(0.09 + 1.44 + 0.25);
  double sigma[3];
  for (int n = 0; n < 200000; ++n) {
    k.sample_sigma(rng, u, sigma);
    EXPECT_NEAR(sigma[0] * sigma[0] + sigma[1] * sigma[1] + sigma[2] * sigma[2], 1.0, 1e-12);
    const double c = (sigma[0] * u[0] + sigma[1] * u[1] + sigma[2] * u[2]) / un;
    ASSERT_LE(c, 1.0 - delta + 1e-9);
    cs.push_back(c);
  }
  const auto e = mean_estimate(cs);
  EXPECT_NEAR(e.value, mean_c, 3.0 * e.std_error + 1e-5);
}

TEST(Step, PairConservationPerCollision) {
  for (auto kernel : {CollisionKernel::uniform(3), CollisionKernel::truncated_singular(3, 1.2, 0.05, 1.0)}) {
    auto s = fresh(3, 20, 2);
    for (int n = 0; n < 2000; ++n) {
      const auto before = std::vector<double>(s.configuration.values().begin(), s.configuration.values().end());
      step(s, kernel);
      const auto after = s.configuration.values();
      int changed[2], m = 0;
      for (int i = 0; i < 20 && m < 2; ++i)
        for (int a = 0; a < 3; ++a)
          if (before[std::size_t(3 * i + a)] != after[std::size_t(3 * i + a)]) {
            changed[m++] = i;
            break;
          }
      if (m < 2) continue;
      double e0 = 0.0, e1 = 0.0;
      for (int a = 0; a < 3; ++a) {
        const std::size_t p = std::size_t(3 * changed[0] + a), q = std::size_t(3 * changed[1] + a);
        const double scale = std::abs(before[p]) + std::abs(before[q]);
        EXPECT_NEAR(after[p] + after[q], before[p] + before[q], 1e-14 * std::max(scale, 1.0));
        e0 += before[p] * before[p] + before[q] * before[q];
        e1 += after[p] * after[p] + after[q] * after[q];
      }
      EXPECT_NEAR(e1, e0, 1e-14 * e0);
    }
  }
}

TEST(Step, AlignedSigmaIsIdentity) {
  std::vector<double> vi = {0.7, -1.1, 0.2}, vj = {-0.4, 0.3, 1.5};
  const auto vi0 = vi, vj0 = vj;
  std::vector<double> sigma(3);
  double n = 0.0;
  for (int a = 0; a < 3; ++a) n += (vi[a] - vj[a]) * (vi[a] - vj[a]);
  for (int a = 0; a < 3; ++a) sigma[a] = (vi[a] - vj[a]) / std::sqrt(n);
  collide(vi, vj, sigma);
  for (int a = 0; a < 3; ++a) {
    EXPECT_NEAR(vi[a], vi0[a], 1e-14);
    EXPECT_NEAR(vj[a], vj0[a], 1e-14);
  }
}

TEST(Step, MismatchedDimensionsRejected) {
  auto s = fresh(2, 10, 3);
  EXPECT_THROW(step(s, CollisionKernel::uniform(3)), ShapeError);
}

TEST(Clock, ExpectedCollisionCount) {
  for (double beta : {1.0, 2.5}) {
    const auto k = CollisionKernel::uniform(2, beta);
    const int N = 10;
    const double t = 3.0;
    std::vector<double> counts;
    for (std::uint64_t r = 0; r < 1000; ++r) {
      auto s = fresh(2, N, 100 + r);
      advance_to(s, k, t);
      counts.push_back(double(s.collisions));
      EXPECT_EQ(s.time, t);
    }
    const auto e = mean_estimate(counts);
    EXPECT_NEAR(e.value, t * (N - 1) * beta / 2.0, 3.0 * e.std_error);
  }
}

TEST(Invariants, RawDriftOverMillionCollisions) {
  auto s = fresh(3, 100, 4);
  const auto p0 = s.configuration.momentum();
  const double e0 = s.configuration.energy();
  const double scale = abs_sum(s.configuration.values());
  const auto k = CollisionKernel::uniform(3);
  for (int n = 0; n < 1000000; ++n) step(s, k);
  const auto p1 = s.configuration.momentum();
  double dp = 0.0;
  for (int a = 0; a < 3; ++a) dp += (p1[a] - p0[a]) * (p1[a] - p0[a]);
  EXPECT_LE(std::sqrt(dp) / scale, 1e-9);
  EXPECT_LE(std::abs(s.configuration.energy() - e0) / e0, 1e-9);
  EXPECT_EQ(s.collisions, 1000000u);
}

TEST(Run, UniformLawIsStationary) {
  DsmcOptions o;
  o.t_end = 5.0;
  o.intervals = 5;
  o.replicas = 4000;
  o.seed = 5;
  o.entropy = false;
  const auto res = run(initial_uniform(2, 32, 5), CollisionKernel::uniform(2), {moment_observable(2), moment_observable(4)}, o);
  for (const auto* name : {"E|v1|^2", "E|v1|^4"}) {
    const auto s = res.series(name);
    ASSERT_EQ(s.size(), 6u);
    const double se = std::hypot(s.front().std_error, s.back().std_error);
    EXPECT_NEAR(s.back().mean, s.front().mean, 3.0 * se) << name;
  }
}

TEST(Run, MixtureStartRelaxesToGaussianFourthMoment) {
  const auto f = make_density("mixture", 3);
  const auto k = CollisionKernel::uniform(3);
  DsmcOptions o;
  o.t_end = 20.0 * k.mean_free_time(256);
  o.intervals = 4;
  o.replicas = 2000;
  o.seed = 6;
  o.entropy = false;
  const auto res = run(initial_conditioned(f, 256, 6), k, {moment_observable(4)}, o);
  const auto s = res.series("E|v1|^4");
  EXPECT_GT(std::abs(s.front().mean - 15.0), 3.0 * s.front().std_error);
  EXPECT_NEAR(s.back().mean, 15.0, 3.0 * s.back().std_error);
}

TEST(Run, RelativeEntropyDoesNotIncrease) {
  const auto f = make_density("mixture", 2);
  DsmcOptions o;
  o.t_end = 4.0;
  o.intervals = 8;
  o.replicas = 5000;
  o.seed = 7;
  const auto res = run(initial_projected(f, 50, 7), CollisionKernel::uniform(2), {}, o);
  const auto h = res.series("H(v1|gamma)");
  ASSERT_EQ(h.size(), 9u);
  EXPECT_GT(h.front().mean, h.back().mean);
  for (std::size_t g = 1; g < h.size(); ++g)
    EXPECT_LE(h[g].mean, h[g - 1].mean + 3.0 * std::hypot(h[g].std_error, h[g - 1].std_error)) << g;
}

TEST(Run, ExchangeableUnderRelabeling) {
  const int N = 12;
  std::vector<double> v(2 * N);
  for (int i = 0; i < N; ++i) {
    v[2 * i] = 0.2 * i;
    v[2 * i + 1] = (i % 3) - 1.0;
  }
  auto base = project_to_sphere(v, SphereSpec::boltzmann(2, N));
  std::vector<int> perm(N);
  std::iota(perm.begin(), perm.end(), 0);
  std::rotate(perm.begin(), perm.begin() + 5, perm.end());
  std::vector<double> pv(2 * N);
  for (int i = 0; i < N; ++i)
    for (int a = 0; a < 2; ++a) pv[2 * i + a] = base.values()[std::size_t(2 * perm[i] + a)];
  const ParticleConfiguration permuted(base.spec(), pv);
  const int tagged = int(std::find(perm.begin(), perm.end(), 0) - perm.begin());
  Observable tag0{"tag", [](const ParticleConfiguration& c) { return c.particle(0)[0] * c.particle(0)[0]; }};
  Observable tagp{"tag", [tagged](const ParticleConfiguration& c) {
                    return c.particle(tagged)[0] * c.particle(tagged)[0];
                  }};
  DsmcOptions o;
  o.t_end = 1.0;
  o.intervals = 2;
  o.replicas = 20000;
  o.entropy = false;
  o.seed = 8;
  const auto a = run([&](std::uint64_t) { return base; }, CollisionKernel::uniform(2), {tag0}, o);
  o.seed = 9;
  const auto b = run([&](std::uint64_t) { return permuted; }, CollisionKernel::uniform(2), {tagp}, o);
  for (std::size_t g = 0; g < 3; ++g) {
    const auto& x = a.rows[g];
    const auto& y = b.rows[g];
    EXPECT_NEAR(x.mean, y.mean, 3.0 * std::hypot(x.std_error, y.std_error) + 1e-12) << g;
  }
}

TEST(Run, DeterministicAcrossWorkerCounts) {
  DsmcOptions o;
  o.t_end = 1.0;
  o.intervals = 3;
  o.replicas = 64;
  o.seed = 10;
  const auto f = make_density("uniform", 2);
  o.jobs = 1;
  const auto a = run(initial_projected(f, 16, 10), CollisionKernel::uniform(2), {moment_observable(4)}, o);
  o.jobs = 4;
  const auto b = run(initial_projected(f, 16, 10), CollisionKernel::uniform(2), {moment_observable(4)}, o);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].mean, b.rows[i].mean);
    EXPECT_EQ(a.rows[i].std_error, b.rows[i].std_error);
  }
  EXPECT_EQ(a.collisions, b.collisions);
}

TEST(Run, RejectsUnsupportedDimension) {
  DsmcOptions o;
  EXPECT_THROW(run(initial_uniform(4, 8, 1), CollisionKernel::uniform(4), {}, o), ParameterError);
}

TEST(Snapshot, RestartReproducesTrajectory) {
  const auto k = CollisionKernel::uniform(3);
  auto a = fresh(3, 30, 11);
  advance_to(a, k, 2.0);
  std::stringstream buf;
  write_snapshot(buf, a);
  auto b = read_snapshot(buf);
  EXPECT_EQ(b.time, a.time);
  EXPECT_EQ(b.collisions, a.collisions);
  advance_to(a, k, 5.0);
  advance_to(b, k, 5.0);
  EXPECT_EQ(a.collisions, b.collisions);
  for (std::size_t i = 0; i < a.configuration.size(); ++i) EXPECT_EQ(a.configuration[i], b.configuration[i]);
  std::stringstream bad("NOTASNAP");
  EXPECT_THROW(read_snapshot(bad), ParameterError);
}

TEST(Equilibrium, CapacityError) {
  EXPECT_THROW(equilibrium_crosscheck(64, 2, std::vector<double>(9999, 0.0)), CapacityError);
}

TEST(Equilibrium, DirectUniformSamplesPass) {
  std::vector<double> xs;
  for (const auto& c : sample_uniform(SphereSpec::boltzmann(2, 64), 12, 20000)) xs.push_back(c.particle(0)[0]);
  EXPECT_TRUE(equilibrium_crosscheck(64, 2, xs).passed);
}

TEST(Equilibrium, LongRunPassesAndBimodalStartFails) {
  const auto f = make_density("mixture", 2);
  const auto init = initial_projected(f, 64, 13);
  EquilibriumSampling es;
  es.replicas = 10000;
  es.per_replica = 10;
  es.seed = 13;
  const auto k = CollisionKernel::uniform(2);
  const auto xs = sample_equilibrium_coordinate(init, k, es);
  ASSERT_EQ(xs.size(), 100000u);
  const auto c = equilibrium_crosscheck(64, 2, xs);
  EXPECT_TRUE(c.passed) << c.ks.statistic << " " << c.ks.p_value;
  std::vector<double> start;
  for (std::uint64_t r = 0; r < 20000; ++r) start.push_back(init(r).particle(0)[0]);
  EXPECT_FALSE(equilibrium_crosscheck(64, 2, start).passed);
}

#include <cmath>
#include <numbers>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "kacsphere/conditioned_tensor.hpp"

using namespace kacsphere;

namespace {

const DensityPtr& uniform1() {
  static DensityPtr f = make_density("uniform", 1);
  return f;
}

}  // namespace

TEST(ConditionedLaw, Preconditions) {
  EXPECT_THROW(ConditionedLaw(std::make_shared<GaussianDensity>(1, 2.0), 8), ParameterError);
  EXPECT_THROW(ConditionedLaw(uniform1(), 3), ParameterError);
  EXPECT_THROW(ConditionedLaw(make_density("gaussian", 2), 2), ParameterError);
  EXPECT_NO_THROW(ConditionedLaw(make_density("gaussian", 2), 3));
  EXPECT_THROW(ConditionedSampler(uniform1(), 3, 1), ParameterError);
}

TEST(ConditionedMarginal, GaussianCollapsesToUniformLaw) {
  ConditionedLaw law(make_density("gaussian", 1), 12);
  UniformMarginal m1(1, 12, 1), m2(1, 12, 2);
  for (double v : {-3.0, -0.7, 0.0, 1.3, 3.4}) {
    EXPECT_NEAR(conditioned_marginal_density(law, 1, std::span<const double>(&v, 1)),
                m1.density(std::span<const double>(&v, 1)), 1e-10);
    std::vector<double> V = {v, 0.5 - v};
    EXPECT_NEAR(conditioned_marginal_density(law, 2, V), m2.density(V), 1e-10);
  }
}

TEST(ConditionedMarginal, ErrorsAndSupport) {
  ConditionedLaw law(uniform1(), 8);
  const double v = 0.3;
  EXPECT_THROW(conditioned_marginal_density(law, 7, std::vector<double>(7, 0.0)), ParameterError);
  EXPECT_THROW(conditioned_marginal_density(law, 1, std::vector<double>{0.1, 0.2}), ShapeError);
  const double outside = 2.0;
  EXPECT_EQ(conditioned_marginal_density(law, 1, std::span<const double>(&outside, 1)), 0.0);
  EXPECT_GT(conditioned_marginal_density(law, 1, std::span<const double>(&v, 1)), 0.0);
  ConditionedLaw law2(make_density("uniform", 2), 8);
  std::vector<double> V = {0.1, 0.2};
  EXPECT_THROW(conditioned_marginal_density(law2, 1, V), ParameterError);
  EXPECT_GT(conditioned_marginal_density(law2, 1, V, MarginalMode::asymptotic), 0.0);
}

TEST(ConditionedMarginal, ExactMatchesPartitionFunctionRatio) {
  const int N = 16;
  ConditionedLaw law(uniform1(), N);
  LiftedPartition rest(uniform1(), N - 1), full(uniform1(), N);
  UniformMarginal m(1, N, 1);
  const double log_zn = full.log_z_prime(std::sqrt(double(N)), 0.0);
  for (double v : {-1.6, -0.9, 0.0, 0.4, 1.2, 1.7}) {
    const double log_ratio = rest.log_z_prime(std::sqrt(N - v * v), -v) - log_zn;
    const double expected = uniform1()->density1(v) / (std::exp(-0.5 * v * v) / std::sqrt(2.0 * std::numbers::pi)) *
                            std::exp(log_ratio) * m.density(std::span<const double>(&v, 1));
    EXPECT_NEAR(conditioned_marginal_density(law, 1, std::span<const double>(&v, 1)), expected, 1e-9 * expected) << v;
  }
}

TEST(ConditionedMarginal, NormalizedAtSixtyFourParticles) {
  ConditionedLaw law(uniform1(), 64);
  auto rule = composite_gauss_legendre({-std::sqrt(3.0), std::sqrt(3.0)}, 0.05, 16);
  auto F = conditioned_marginal_1(law, rule.nodes);
  double mass = 0.0, second = 0.0;
  for (std::size_t i = 0; i < F.size(); ++i) {
    mass += rule.weights[i] * F[i];
    second += rule.weights[i] * F[i] * rule.nodes[i] * rule.nodes[i];
  }
  EXPECT_NEAR(mass, 1.0, 1e-3);
  EXPECT_NEAR(second, 1.0, 1e-3);
}

TEST(ConditionedMarginal, BatchAgreesWithPointwise) {
  ConditionedLaw law(make_density("mixture", 1), 10);
  std::vector<double> v = {-2.5, -0.3, 0.8, 2.9};
  auto F = conditioned_marginal_1(law, v);
  for (std::size_t i = 0; i < v.size(); ++i)
    EXPECT_NEAR(F[i], conditioned_marginal_density(law, 1, std::span<const double>(&v[i], 1)), 1e-12);
}

TEST(ConditionedMarginal, AsymptoticModeApproachesExactAtRootNRate) {
  auto sup_gap = [](int N) {
    ConditionedLaw law(uniform1(), N);
    double sup = 0.0;
    for (int k = 0; k <= 200; ++k) {
      const double v = -1.73 + 3.46 * k / 200.0;
      const std::span<const double> V(&v, 1);
      sup = std::max(sup, std::abs(conditioned_marginal_density(law, 1, V, MarginalMode::exact) -
                                   conditioned_marginal_density(law, 1, V, MarginalMode::asymptotic)));
    }
    return sup;
  };
  const double C = sup_gap(16) * 4.0;
  EXPECT_LE(sup_gap(64), C / 8.0);
}

TEST(Sampler, CollisionMapsConserveInvariants) {
  std::vector<double> vi = {0.3, -1.2, 2.0}, vj = {-0.7, 0.4, 0.1}, sigma = {0.0, 0.6, 0.8};
  const double e0 = 0.3 * 0.3 + 1.44 + 4.0 + 0.49 + 0.16 + 0.01;
  collide(vi, vj, sigma);
  EXPECT_NEAR(vi[0] + vj[0], -0.4, 1e-14);
  EXPECT_NEAR(vi[1] + vj[1], -0.8, 1e-14);
  double e1 = 0.0;
  for (int a = 0; a < 3; ++a) e1 += vi[a] * vi[a] + vj[a] * vj[a];
  EXPECT_NEAR(e1, e0, 1e-14 * e0);
  double a = 0.5, b = -1.0, c = 1.25;
  rotate_triple(a, b, c, 1.1);
  EXPECT_NEAR(a + b + c, 0.75, 1e-14);
  EXPECT_NEAR(a * a + b * b + c * c, 0.25 + 1.0 + 1.5625, 1e-14);
}

TEST(Sampler, GaussianTargetAcceptsEveryProposal) {
  ConditionedSampler s(make_density("gaussian", 2), 10, 4);
  for (int i = 0; i < 10000; ++i) s.step();
  EXPECT_GT(s.acceptance_rate(), 1.0 - 1e-9);
}

TEST(Sampler, StatesStayOnTheSphereOverAMillionSteps) {
  for (int d : {1, 2}) {
    ConditionedSampler s(make_density("mixture", d), 16, 9);
    for (int i = 0; i < 1000000; ++i) s.step();
    EXPECT_TRUE(s.state().on_sphere()) << d;
  }
}

TEST(Sampler, GaussianChainMatchesUniformMarginal) {
  SamplerOptions opt;
  opt.thin = 64;
  for (int d : {1, 2}) {
    ConditionedLaw law(make_density("gaussian", d), 16);
    auto xs = sample_first_coordinate(law, 17, 100000, opt);
    auto ks = ks_test(xs, [d](double x) { return coordinate_marginal_cdf(d, 16, x); });
    EXPECT_TRUE(ks.passes(0.01)) << d << " p=" << ks.p_value;
  }
}

TEST(Sampler, UniformTargetMomentsMatchExactMarginal) {
  const int N = 16;
  ConditionedLaw law(uniform1(), N);
  SamplerOptions opt;
  opt.thin = 4 * N;
  auto xs = sample_first_coordinate(law, 23, 40000, opt);
  std::vector<double> x2, x4;
  for (double x : xs) {
    EXPECT_LE(std::abs(x), std::sqrt(3.0));
    x2.push_back(x * x);
    x4.push_back(x * x * x * x);
  }
  auto rule = composite_gauss_legendre({-std::sqrt(3.0), std::sqrt(3.0)}, 0.05, 16);
  auto F = conditioned_marginal_1(law, rule.nodes);
  double m4 = 0.0;
  for (std::size_t i = 0; i < F.size(); ++i) m4 += rule.weights[i] * F[i] * std::pow(rule.nodes[i], 4);
  const auto e2 = mean_estimate(x2), e4 = mean_estimate(x4);
  EXPECT_NEAR(e2.value, 1.0, 3.0 * e2.std_error);
  EXPECT_NEAR(e4.value, m4, 3.0 * e4.std_error);
}

TEST(Sampler, RepairsStartOutsideSupport) {
  ConditionedSampler s(uniform1(), 40, 5);
  s.next();
  EXPECT_TRUE(s.in_support());
  for (int i = 0; i < 40; ++i) EXPECT_LE(std::abs(s.state()[std::size_t(i)]), std::sqrt(3.0));
}

TEST(Sampler, DiscretizedTripleKernelSatisfiesDetailedBalance) {
  EXPECT_LT(detailed_balance_error(*make_density("mixture", 1)), 1e-8);
  EXPECT_LT(detailed_balance_error(*uniform1(), 720), 1e-8);
  EXPECT_THROW(detailed_balance_error(*make_density("gaussian", 2)), ParameterError);
}

TEST(ChaosRate, GaussianDistanceDecreases) {
  double prev = std::numeric_limits<double>::infinity();
  for (int N : {8, 16, 32, 64}) {
    ConditionedLaw law(make_density("gaussian", 1), N);
    const double w = w1_conditioned(law).w1;
    EXPECT_GT(w, 0.0);
    EXPECT_LT(w, prev) << N;
    prev = w;
  }
}

TEST(ChaosRate, UniformDistanceIsPositiveAtEightParticles) {
  ConditionedLaw law(uniform1(), 8);
  const auto c = w1_conditioned(law);
  EXPECT_GT(c.w1, 1e-4);
  EXPECT_NEAR(c.mass_difference, 0.0, 1e-6);
}

TEST(ChaosRate, ExperimentNeedsTwoPoints) {
  EXPECT_THROW(w1_rate_experiment(uniform1(), {16}), ParameterError);
}

TEST(W1Quadrature, ShiftedDensitiesAreAtTheirShiftDistance) {
  auto a = [](std::span<const double> x) {
    std::vector<double> o(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) o[i] = std::exp(-0.5 * x[i] * x[i]) / std::sqrt(2 * std::numbers::pi);
    return o;
  };
  auto b = [](std::span<const double> x) {
    std::vector<double> o(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
      o[i] = std::exp(-0.5 * (x[i] - 0.3) * (x[i] - 0.3)) / std::sqrt(2 * std::numbers::pi);
    return o;
  };
  auto c = w1_between_densities(a, b, {-12.0, 12.0}, 0.25);
  EXPECT_NEAR(c.w1, 0.3, 1e-10);
}

TEST(Entropy, GaussianIsZero) {
  for (int N : {8, 64}) EXPECT_NEAR(entropy_per_particle(ConditionedLaw(make_density("gaussian", 1), N)), 0.0, 1e-6);
}

TEST(Entropy, UniformLimitAndConvergence) {
  const double limit = relative_entropy_1d(*uniform1());
  EXPECT_NEAR(limit, -std::log(2.0 * std::sqrt(3.0)) + 0.5 * std::log(2.0 * std::numbers::pi) + 0.5, 1e-10);
  EXPECT_NEAR(limit, 0.17649, 1e-5);
  const double h64 = entropy_per_particle(ConditionedLaw(uniform1(), 64));
  const double h256 = entropy_per_particle(ConditionedLaw(uniform1(), 256));
  EXPECT_LT(std::abs(h256 - limit), 0.02);
  EXPECT_LT(std::abs(h256 - limit), std::abs(h64 - limit));
}

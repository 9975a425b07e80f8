#include <cmath>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "kacsphere/lifted_clt.hpp"

using namespace kacsphere;

namespace {

double normal_pdf(double x, double var) { return std::exp(-0.5 * x * x / var) / std::sqrt(2.0 * std::numbers::pi * var); }

LiftedWindow gaussian_window(std::size_t n) {
  LiftedWindow w;
  w.z_lower = -6.0;
  w.z_step = 12.0 / double(n - 1);
  w.u_lower = 0.0;
  w.u_step = 36.5 / double(n - 1);
  w.nz = w.nu = n;
  return w;
}

std::vector<double> z_marginal(const GridDensity& g) {
  std::vector<double> m(g.shape[0], 0.0);
  for (std::size_t i = 0; i < g.shape[0]; ++i) {
    for (std::size_t j = 0; j < g.shape[1]; ++j) m[i] += g.at({i, j});
    m[i] *= g.step[1];
  }
  return m;
}

}  // namespace

TEST(Rasterize, GaussianLiftedLawHasGaussianMarginalAndUnitEnergy) {
  auto g = rasterize_lifted(GaussianDensity(1), gaussian_window(2048));
  EXPECT_NEAR(g.mass(), 1.0, 1e-8);
  auto m = z_marginal(g);
  double l1 = 0.0, eu = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) l1 += std::abs(m[i] - normal_pdf(g.node(0, i), 1.0)) * g.step[0];
  for (std::size_t i = 0; i < g.shape[0]; ++i)
    for (std::size_t j = 0; j < g.shape[1]; ++j) eu += g.at({i, j}) * g.node(1, j) * g.cell_volume();
  EXPECT_LT(l1, 1e-4);
  EXPECT_NEAR(eu, 1.0, 1e-4);
}

TEST(Rasterize, ThrowsWhenWindowMissesMass) {
  auto w = gaussian_window(256);
  w.u_step = 4.0 / 255.0;
  EXPECT_THROW(rasterize_lifted(GaussianDensity(1), w), CoverageError);
}

TEST(ConvolutionPower, FirstPowerIsIdentity) {
  auto g = rasterize_lifted(UniformBoxDensity(1), gaussian_window(64));
  auto p = convolution_power(g, 1);
  EXPECT_EQ(p.values, g.values);
}

TEST(ConvolutionPower, GaussianMomentumMarginalIsNormalWithVarianceN) {
  auto g = rasterize_lifted(GaussianDensity(1), gaussian_window(256));
  const int N = 8;
  auto p = convolution_power(g, N);
  EXPECT_NEAR(p.mass(), 1.0, 1e-5);
  auto m = z_marginal(p);
  double sup = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) sup = std::max(sup, std::abs(m[i] - normal_pdf(p.node(0, i), N)));
  EXPECT_LT(sup, 1e-3);
}

TEST(ConvolutionPower, CapacityLimit) {
  auto g = rasterize_lifted(GaussianDensity(1), gaussian_window(256));
  EXPECT_THROW(convolution_power(g, 64, std::size_t(1) << 20), CapacityError);
}

TEST(LiftedPower, SpectralMomentumMarginalAndMass) {
  for (int N : {8, 32, 128}) {
    auto s = lifted_convolution_power(GaussianDensity(1), N);
    EXPECT_NEAR(s.grid.mass(), 1.0, 1e-5);
    auto m = z_marginal(s.grid);
    double sup = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) sup = std::max(sup, std::abs(m[i] - normal_pdf(s.grid.node(0, i), N)));
    EXPECT_LT(sup, 1e-3) << N;
  }
}

TEST(LiftedPower, GaussianPowerMatchesClosedForm) {
  const int N = 16;
  auto s = lifted_convolution_power(GaussianDensity(1), N);
  for (double z : {0.0, 1.5, -4.0})
    for (double u : {10.0, 16.0, 25.0}) {
      const double w = u - z * z / N;
      const double exact = normal_pdf(z, N) * std::exp((0.5 * (N - 1) - 1) * std::log(w) - 0.5 * w -
                                                        0.5 * (N - 1) * std::log(2.0) - std::lgamma(0.5 * (N - 1)));
      EXPECT_NEAR(s.density(z, u), exact, 2e-4 * exact + 1e-9) << z << " " << u;
    }
}

TEST(ZPrime, GaussianIsOneOnAndOffCentre) {
  auto f = make_density("gaussian", 1);
  for (int N : {8, 16, 64, 128}) {
    LiftedPartition p(f, N);
    EXPECT_NEAR(p.z_prime(std::sqrt(double(N)), 0.0), 1.0, 0.02) << N;
    EXPECT_NEAR(p.z_prime(std::sqrt(1.1 * N), 0.5 * std::sqrt(double(N))), 1.0, 0.02) << N;
  }
}

TEST(ZPrime, UniformConvergesToAsymptoticLimit) {
  auto f = make_density("uniform", 1);
  const double z = 0.0;
  const double limit = z_prime_asymptotic(*f, 128, std::sqrt(128.0), std::span<const double>(&z, 1));
  EXPECT_NEAR(limit, std::sqrt(2.0) / std::sqrt(0.8), 1e-12);
  EXPECT_NEAR(z_prime_exact(f, 128, std::sqrt(128.0), 0.0), 1.5811, 0.03 * 1.5811);
}

TEST(ZPrime, AsymptoticGaussianIsOne) {
  auto f = make_density("gaussian", 1);
  const double z = 0.0;
  for (int N : {8, 64, 1024})
    EXPECT_NEAR(z_prime_asymptotic(*f, N, std::sqrt(double(N)), std::span<const double>(&z, 1)), 1.0, 1e-12);
}

TEST(ZPrime, EmptySphereIsASupportError) {
  auto f = make_density("gaussian", 1);
  LiftedPartition p(f, 8);
  EXPECT_THROW(p.z_prime(1.0, 3.0), SupportError);
  const double z = 3.0;
  EXPECT_THROW(log_z_prime_asymptotic(*f, 8, 1.0, std::span<const double>(&z, 1)), SupportError);
}

TEST(ZPrime, ExactPathRejectsHigherDimensions) {
  EXPECT_THROW(z_prime_exact(make_density("gaussian", 2), 8, 4.0, 0.0), ParameterError);
}

TEST(BerryEsseen, UniformSingleSummand) {
  const double expected = 1.0 / (2.0 * std::sqrt(3.0)) - normal_pdf(std::sqrt(3.0), 1.0);
  EXPECT_NEAR(berry_esseen_sup(UniformBoxDensity(1), 1), expected, 1e-9);
}

TEST(BerryEsseen, GaussianIsExactlyNormal) {
  for (int N : {1, 2, 16, 256}) EXPECT_LT(berry_esseen_sup(GaussianDensity(1), N), 1e-6) << N;
}

TEST(BerryEsseen, UniformSupDecaysUnderCalibratedCurve) {
  UniformBoxDensity g(1);
  const double C = berry_esseen_sup(g, 2) * std::sqrt(2.0);
  for (int N : {4, 8, 16, 64, 256}) EXPECT_LE(berry_esseen_sup(g, N), 1.5 * C / std::sqrt(double(N))) << N;
}

TEST(BerryEsseen, RequiresUnitVariance) {
  EXPECT_THROW(berry_esseen_sup(GaussianDensity(1, 2.0), 4), ParameterError);
}

TEST(LiftedMoments, ClosedFormsAndRasterizedCheck) {
  EXPECT_NEAR(lifted_moment(GaussianDensity(1), 2), 4.0, 1e-12);
  EXPECT_NEAR(lifted_moment(UniformBoxDensity(1), 2), 2.8, 1e-12);
  auto c = lifted_moment_check(UniformBoxDensity(1), 2);
  EXPECT_LT(c.relative_error, 1e-4);
  EXPECT_THROW(lifted_moment(GaussianDensity(1), 3), ParameterError);
}

TEST(GridIo, BinaryRoundTrip) {
  auto g = rasterize_lifted(UniformBoxDensity(1), gaussian_window(32));
  std::stringstream ss;
  write_grid(ss, g);
  auto h = read_grid<2>(ss);
  EXPECT_EQ(h.shape, g.shape);
  EXPECT_EQ(h.lower, g.lower);
  EXPECT_EQ(h.step, g.step);
  EXPECT_EQ(h.values, g.values);
  std::stringstream bad("not a grid");
  EXPECT_THROW(read_grid<2>(bad), ConfigError);
}

TEST(GridIo, InterpolationOutsideWindowIsACoverageError) {
  auto g = rasterize_lifted(UniformBoxDensity(1), gaussian_window(32));
  EXPECT_THROW(g.interpolate({100.0, 0.0}), CoverageError);
}

TEST(LiftedSpectrum, SeriesReproducesGridNodes) {
  LiftedPowerOptions opt;
  opt.spectral_shape = 128;
  opt.output_shape = 256;
  LiftedSpectrum s(UniformBoxDensity(1), 12, opt);
  auto g = s.to_grid();
  for (std::size_t i : {40u, 128u, 200u})
    for (std::size_t j : {60u, 128u, 190u}) {
      const double raw = s.evaluate(g.grid.node(0, i), g.grid.node(1, j));
      EXPECT_NEAR(std::max(0.0, raw), g.grid.at({i, j}), 1e-12);
    }
  EXPECT_FALSE(s.covers(s.z_upper() + 1.0, 12.0));
}

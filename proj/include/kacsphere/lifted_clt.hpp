#ifndef KACSPHERE_LIFTED_CLT_HPP
#define KACSPHERE_LIFTED_CLT_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "core/error.hpp"
#include "core/fft.hpp"
#include "core/quadrature.hpp"
#include "core/special.hpp"
#include "density.hpp"
#include "grid.hpp"
#include "sphere_geometry.hpp"

namespace kacsphere {

/// Window of a lifted grid in (momentum z, energy u) coordinates.
struct LiftedWindow {
  double z_lower = 0.0, z_step = 0.0;
  double u_lower = 0.0, u_step = 0.0;
  std::size_t nz = 0, nu = 0;
};

/// Deposits the law of (v, v^2), v ~ f (d = 1), onto the grid by bilinear splatting of a
/// Gauss-Legendre rule whose panels never straddle a cell boundary. Throws CoverageError if more than 1e-6 of the mass falls outside.
inline GridDensity rasterize_lifted(const BaseDensity& f, const LiftedWindow& w) {
  if (f.dim() != 1) throw ParameterError("lifted rasterization is defined for d = 1");
  GridDensity g({w.z_lower, w.u_lower}, {w.z_step, w.u_step}, {w.nz, w.nu});
  auto bps = f.breakpoints();
  const double lo = bps.front(), hi = bps.back();
  for (std::size_t i = 0; i < w.nz; ++i) bps.push_back(w.z_lower + w.z_step * double(i));
  for (std::size_t j = 0; j < w.nu; ++j) {
    const double u = w.u_lower + w.u_step * double(j);
    if (u > 0.0) {
      bps.push_back(std::sqrt(u));
      bps.push_back(-std::sqrt(u));
    }
  }
  std::erase_if(bps, [&](double b) { return b < lo || b > hi; });
  std::sort(bps.begin(), bps.end());
  bps.erase(std::unique(bps.begin(), bps.end()), bps.end());
  auto rule = composite_gauss_legendre(bps, std::min(w.z_step, 1.0), 8);
  double lost = 0.0;
  const double cv = g.cell_volume();
  for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
    const double v = rule.nodes[j];
    const double m = rule.weights[j] * f.density1(v);
    if (m == 0.0) continue;
    const double pz = (v - w.z_lower) / w.z_step, pu = (v * v - w.u_lower) / w.u_step;
    const double iz = std::floor(pz), iu = std::floor(pu);
    if (iz < 0 || iu < 0 || iz + 1 >= double(w.nz) || iu + 1 >= double(w.nu)) {
      lost += m;
      continue;
    }
    const double fz = pz - iz, fu = pu - iu;
    const auto a = std::size_t(iz), b = std::size_t(iu);
    g.at({a, b}) += m * (1 - fz) * (1 - fu) / cv;
    g.at({a + 1, b}) += m * fz * (1 - fu) / cv;
    g.at({a, b + 1}) += m * (1 - fz) * fu / cv;
    g.at({a + 1, b + 1}) += m * fz * fu / cv;
  }
  if (lost > 1e-6) throw CoverageError("lifted law is not covered by the window");
  return g;
}

/// Numerical parameters of the lifted convolution power.
struct LiftedPowerOptions {
  /// Frequencies per axis of the spectral box (odd count 2K+1 with K = spectral_shape/2 - 1).
  std::size_t spectral_shape = 1024;
  /// Output nodes per axis (z, u).
  std::size_t output_shape = 2048;
  /// Window half width in z, in units of sqrt(eps N).
  double z_sigmas = 8.0;
  /// Window extent in u below and above N E, in units of Sigma sqrt(N).
  double u_sigmas_below = 10.0;
  double u_sigmas_above = 14.0;
  /// Negative values below -negative_tolerance * peak raise CoverageError; others are clamped to 0.
  double negative_tolerance = 1e-3;
  /// Allowed deviation of the total mass from 1.
  double mass_tolerance = 1e-5;
};

/// Density of the N-fold convolution s^N = h^{*N} of the lifted law h = f(v) delta(u - v^2).
struct LiftedGrid {
  int N = 0;
  GridDensity grid;
  double mass_defect = 0.0;
  /// Most negative raw value relative to the peak, before clamping.
  double negative_extent = 0.0;

  double density(double z, double u) const { return std::max(0.0, grid.interpolate({z, u})); }
  bool covers(double z, double u) const { return grid.contains({z, u}); }
};

/// Truncated Fourier series of s^N on the periodic window
/// [z0, z0 + Lz) x [u0, u0 + Lu): the characteristic function of h evaluated on a symmetric
/// frequency box and raised to the N-th power by repeated squaring.
class LiftedSpectrum {
 public:
  LiftedSpectrum(const BaseDensity& f, int N, const LiftedPowerOptions& opt = {}) : N_(N), opt_(opt) {
    if (f.dim() != 1) throw ParameterError("lifted convolution power is defined for d = 1");
    if (N < 1) throw ParameterError("N must be >= 1");
    if (opt.spectral_shape < 8 || opt.output_shape < opt.spectral_shape)
      throw ParameterError("output shape must be at least the spectral shape");
    const double E = f.moment(2);
    const double Sigma2 = f.energy_variance();
    if (!(Sigma2 > 0.0)) throw DegenerateVarianceError("energy variance of f vanishes");
    const double sz = std::sqrt(E * N), su = std::sqrt(Sigma2 * N);
    Lz_ = 2.0 * opt.z_sigmas * sz;
    Lu_ = (opt.u_sigmas_below + opt.u_sigmas_above) * su;
    z0_ = -opt.z_sigmas * sz;
    u0_ = N * E - opt.u_sigmas_below * su;
    K_ = std::ptrdiff_t(opt.spectral_shape / 2 - 1);
    s_.resize(std::size_t(2 * K_ + 1));
    t_.resize(std::size_t(K_ + 1));
    for (std::ptrdiff_t k = -K_; k <= K_; ++k) s_[std::size_t(k + K_)] = 2.0 * std::numbers::pi * double(k) / Lz_;
    for (std::ptrdiff_t l = 0; l <= K_; ++l) t_[std::size_t(l)] = 2.0 * std::numbers::pi * double(l) / Lu_;
    f.lifted_characteristic(s_, t_, c_);
    const double norm = 1.0 / (Lz_ * Lu_);
    for (Eigen::Index i = 0; i < c_.rows(); ++i)
      for (Eigen::Index j = 0; j < c_.cols(); ++j) {
        std::complex<double> base = c_(i, j), acc = 1.0;
        for (int e = N; e > 0; e >>= 1) {
          if (e & 1) acc *= base;
          base *= base;
        }
        c_(i, j) = norm * acc;
      }
  }

  int N() const { return N_; }
  double z_lower() const { return z0_; }
  double z_upper() const { return z0_ + Lz_; }
  double u_lower() const { return u0_; }
  double u_upper() const { return u0_ + Lu_; }
  bool covers(double z, double u) const { return z >= z0_ && z < z0_ + Lz_ && u >= u0_ && u < u0_ + Lu_; }

  /// Values of the series at the points (z[p], u[p]); may be slightly negative.
  std::vector<double> evaluate(std::span<const double> z, std::span<const double> u) const {
    if (z.size() != u.size()) throw ShapeError("z and u must have the same length");
    std::vector<double> out(z.size(), 0.0);
    constexpr std::size_t chunk = 256;
    const auto nk = Eigen::Index(s_.size()), nl = Eigen::Index(t_.size());
    for (std::size_t p0 = 0; p0 < z.size(); p0 += chunk) {
      const std::size_t m = std::min(chunk, z.size() - p0);
      Eigen::MatrixXcd E(Eigen::Index(m), nk);
      for (std::size_t p = 0; p < m; ++p)
        for (Eigen::Index k = 0; k < nk; ++k) E(Eigen::Index(p), k) = std::polar(1.0, -s_[std::size_t(k)] * z[p0 + p]);
      Eigen::MatrixXcd A = E * c_;
      for (std::size_t p = 0; p < m; ++p) {
        double acc = 0.0;
        for (Eigen::Index l = 0; l < nl; ++l) {
          const double w = l == 0 ? 1.0 : 2.0;
          acc += w * (A(Eigen::Index(p), l) * std::polar(1.0, -t_[std::size_t(l)] * u[p0 + p])).real();
        }
        out[p0 + p] = acc;
      }
    }
    return out;
  }
  double evaluate(double z, double u) const {
    return evaluate(std::span<const double>(&z, 1), std::span<const double>(&u, 1))[0];
  }

  /// Samples the series on the output grid with one two-dimensional FFT, clamps negative
  /// values and checks them and the total mass against the tolerances.
  LiftedGrid to_grid() const {
    const std::size_t M = opt_.output_shape;
    std::vector<std::complex<double>> buf(M * M, 0.0);
    auto wrap = [M](std::ptrdiff_t k) {
      return std::size_t((k % std::ptrdiff_t(M) + std::ptrdiff_t(M)) % std::ptrdiff_t(M));
    };
    for (std::ptrdiff_t k = -K_; k <= K_; ++k)
      for (std::ptrdiff_t l = 0; l <= K_; ++l) {
        const double phase = -(s_[std::size_t(k + K_)] * z0_ + t_[std::size_t(l)] * u0_);
        const std::complex<double> val = c_(Eigen::Index(k + K_), Eigen::Index(l)) * std::polar(1.0, phase);
        buf[wrap(k) * M + wrap(l)] = val;
        if (l > 0) buf[wrap(-k) * M + wrap(-l)] = std::conj(val);
      }
    fft_inplace({int(M), int(M)}, buf, FFTW_FORWARD);

    LiftedGrid out;
    out.N = N_;
    out.grid = GridDensity({z0_, u0_}, {Lz_ / double(M), Lu_ / double(M)}, {M, M});
    double peak = 0.0;
    for (std::size_t i = 0; i < M * M; ++i) {
      out.grid.values[i] = buf[i].real();
      peak = std::max(peak, out.grid.values[i]);
    }
    for (double& v : out.grid.values) {
      if (v < 0.0) {
        out.negative_extent = std::max(out.negative_extent, -v / peak);
        v = 0.0;
      }
    }
    if (out.negative_extent > opt_.negative_tolerance)
      throw CoverageError("lifted convolution power has significant negative values; refine the spectral box");
    out.mass_defect = out.grid.mass() - 1.0;
    if (std::abs(out.mass_defect) > opt_.mass_tolerance)
      throw CoverageError("lifted convolution power lost mass outside the window");
    return out;
  }

 private:
  int N_;
  LiftedPowerOptions opt_;
  double z0_ = 0.0, u0_ = 0.0, Lz_ = 0.0, Lu_ = 0.0;
  std::ptrdiff_t K_ = 0;
  std::vector<double> s_, t_;
  Eigen::MatrixXcd c_;
};

/// Computes s^N on a regular (z, u) grid.
inline LiftedGrid lifted_convolution_power(const BaseDensity& f, int N, const LiftedPowerOptions& opt = {}) {
  return LiftedSpectrum(f, N, opt).to_grid();
}

/// Normalized partition function Z'_N(f; r, z) from the lifted law (d = 1):
/// Z_N = 2 (r^2 - z^2/N)^{1/2} N^{1/2} s^N(z, r^2) / |S^N(r, z)| and Z' = Z_N (2 pi)^{N/2} e^{r^2/2}.
/// Point values of s^N come from its Fourier series, i.e. band-limited interpolation of the grid.
class LiftedPartition {
 public:
  LiftedPartition(DensityPtr f, int N, const LiftedPowerOptions& opt = {})
      : f_(std::move(f)), N_(N), spectrum_(*f_, N, opt), grid_(spectrum_.to_grid()) {}

  int N() const { return N_; }
  const LiftedGrid& lifted() const { return grid_; }
  const LiftedSpectrum& spectrum() const { return spectrum_; }

  /// s^N(z, u); zero outside the window.
  double lifted_density(double z, double u) const {
    if (!spectrum_.covers(z, u)) return 0.0;
    return std::max(0.0, spectrum_.evaluate(z, u));
  }

  /// log Z'_N(f; r, z); -infinity where the numerical density vanishes.
  double log_z_prime(double r, double z) const {
    const double u = r * r;
    const double w = u - z * z / N_;
    if (!(w > 0.0)) throw SupportError("sphere S^N(r, z) is empty or degenerate");
    if (!grid_.covers(z, u)) throw CoverageError("(r, z) lies outside the lifted grid window");
    const double sN = std::max(0.0, spectrum_.evaluate(z, u));
    if (!(sN > 0.0)) return neg_infinity;
    const double log_measure = log_sphere_measure(SphereSpec(1, N_, r, {z}));
    return std::log(2.0) + 0.5 * std::log(w) + 0.5 * std::log(double(N_)) + std::log(sN) - log_measure +
           0.5 * N_ * std::log(2.0 * std::numbers::pi) + 0.5 * u;
  }
  double z_prime(double r, double z) const { return std::exp(log_z_prime(r, z)); }

 private:
  DensityPtr f_;
  int N_;
  LiftedSpectrum spectrum_;
  LiftedGrid grid_;
};

inline double z_prime_exact(const DensityPtr& f, int N, double r, double z, const LiftedPowerOptions& opt = {}) {
  if (f->dim() != 1) throw ParameterError("exact partition function is available for d = 1");
  return LiftedPartition(f, N, opt).z_prime(r, z);
}

/// Leading-order asymptotic form of log Z'_N(f; r, z) for any d.
inline double log_z_prime_asymptotic(const BaseDensity& f, int N, double r, std::span<const double> z) {
  const int d = f.dim();
  if (z.size() != std::size_t(d)) throw ShapeError("momentum must have d components");
  if (N < 2) throw ParameterError("N must be >= 2");
  const double E = f.moment(2), eps = E / d;
  const double Sigma2 = f.energy_variance();
  if (!(Sigma2 > 0.0)) throw DegenerateVarianceError("energy variance of f vanishes");
  double z2 = 0.0;
  for (double x : z) z2 += x * x;
  const double w = r * r - z2 / N;
  if (!(w > 0.0)) throw SupportError("sphere S^N(r, z) is empty or degenerate");
  const double dN = double(d) * N;
  const double expo = 0.5 * (double(d) * (N - 1) - 2.0);
  return 0.5 * std::log(2.0 * d) - 0.5 * std::log(Sigma2) - 0.5 * d * std::log(eps) +
         expo * (std::log(dN) - std::log(w)) - 0.5 * dN + 0.5 * r * r - z2 / (2.0 * eps * N) -
         std::pow(r * r - N * E, 2) / (2.0 * Sigma2 * N);
}

inline double z_prime_asymptotic(const BaseDensity& f, int N, double r, std::span<const double> z) {
  return std::exp(log_z_prime_asymptotic(f, N, r, z));
}

struct BerryEsseenOptions {
  std::size_t nodes = std::size_t(1) << 16;
  double half_width = 12.0;
};

/// sup_x |g_N(x) - gamma(x)| where g_N is the density of (v_1 + ... + v_N)/sqrt(N), v_i ~ g
/// i.i.d. with mean 0 and unit variance (d = 1). N = 1 compares g itself, including one-sided
/// limits at its breakpoints; N >= 2 inverts the characteristic function on a fine grid.
inline double berry_esseen_sup(const BaseDensity& g, int N, const BerryEsseenOptions& opt = {}) {
  if (g.dim() != 1) throw ParameterError("Berry-Esseen distance is defined for d = 1");
  if (N < 1) throw ParameterError("N must be >= 1");
  if (std::abs(g.moment(2) - 1.0) > 1e-9) throw ParameterError("g must have unit variance");
  auto gauss = [](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); };
  const std::size_t M = opt.nodes;
  const double L = 2.0 * opt.half_width, dx = L / double(M);
  double sup = 0.0;
  if (N == 1) {
    for (std::size_t j = 0; j < M; ++j) {
      const double x = -opt.half_width + dx * double(j);
      sup = std::max(sup, std::abs(g.density1(x) - gauss(x)));
    }
    for (double b : g.breakpoints())
      for (double e : {-1e-12, 1e-12}) {
        const double x = b + e * std::max(1.0, std::abs(b));
        sup = std::max(sup, std::abs(g.density1(x) - gauss(x)));
      }
    return sup;
  }
  const auto K = std::ptrdiff_t(M / 2 - 1);
  std::vector<std::complex<double>> buf(M, 0.0);
  const double sqn = std::sqrt(double(N));
  for (std::ptrdiff_t k = 0; k <= K; ++k) {
    const double s = 2.0 * std::numbers::pi * double(k) / L;
    std::complex<double> base = g.characteristic(s / sqn), acc = 1.0;
    for (int e = N; e > 0; e >>= 1) {
      if (e & 1) acc *= base;
      base *= base;
    }
    const std::complex<double> val = acc * std::polar(1.0, s * opt.half_width) / L;
    buf[std::size_t(k)] = val;
    if (k > 0) buf[M - std::size_t(k)] = std::conj(val);
  }
  fft_inplace({int(M)}, buf, FFTW_FORWARD);
  for (std::size_t j = 0; j < M; ++j) {
    const double x = -opt.half_width + dx * double(j);
    sup = std::max(sup, std::abs(buf[j].real() - gauss(x)));
  }
  return sup;
}

/// M_k(h) = E (v^2 + v^4)^{k/2} for even k from the moments of f (d = 1).
inline double lifted_moment(const BaseDensity& f, int k) {
  if (k < 0 || k % 2) throw ParameterError("lifted moments are available for even k");
  const int m = k / 2;
  double acc = 0.0;
  for (int j = 0; j <= m; ++j) acc += detail::binomial(m, j) * f.moment(2 * j + 4 * (m - j));
  return acc;
}

struct LiftedMomentCheck {
  double analytic = 0.0;
  double rasterized = 0.0;
  double relative_error = 0.0;
};

/// Compares M_k(h) from the moments of f with the value integrated from a rasterized h.
inline LiftedMomentCheck lifted_moment_check(const BaseDensity& f, int k, std::size_t nodes = 2048) {
  if (f.dim() != 1) throw ParameterError("lifted moments are defined for d = 1");
  auto [lo, hi] = f.coordinate_range(0);
  const double vmax = std::max(std::abs(lo), std::abs(hi));
  LiftedWindow w;
  w.z_lower = lo - 0.01 * (hi - lo);
  w.z_step = 1.02 * (hi - lo) / double(nodes - 1);
  w.u_lower = -0.01 * vmax * vmax;
  w.u_step = 1.02 * vmax * vmax / double(nodes - 1);
  w.nz = w.nu = nodes;
  auto g = rasterize_lifted(f, w);
  LiftedMomentCheck c;
  c.analytic = lifted_moment(f, k);
  double acc = 0.0;
  for (std::size_t i = 0; i < nodes; ++i)
    for (std::size_t j = 0; j < nodes; ++j) {
      const double v = g.at({i, j});
      if (v == 0.0) continue;
      const double z = g.node(0, i), u = g.node(1, j);
      acc += v * std::pow(z * z + u * u, 0.5 * k);
    }
  c.rasterized = acc * g.cell_volume();
  c.relative_error = std::abs(c.rasterized - c.analytic) / std::max(1e-300, std::abs(c.analytic));
  return c;
}

}  // namespace kacsphere

#endif

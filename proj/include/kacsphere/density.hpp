#ifndef KACSPHERE_DENSITY_HPP
#define KACSPHERE_DENSITY_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "core/error.hpp"
#include "core/quadrature.hpp"
#include "core/random.hpp"
#include "core/special.hpp"

namespace kacsphere {

namespace detail {

/// E|v|^{2m} for a product density from the per-coordinate even moments
/// c[alpha][j] = E[x_alpha^{2j}], via the multinomial expansion of (sum x_alpha^2)^m.
inline double product_even_moment(const std::vector<std::vector<double>>& c, int m) {
  std::vector<double> acc(m + 1, 0.0);
  acc[0] = 1.0;
  std::vector<double> fact(m + 1, 1.0);
  for (int j = 1; j <= m; ++j) fact[j] = fact[j - 1] * j;
  for (const auto& coord : c) {
    std::vector<double> next(m + 1, 0.0);
    for (int i = 0; i <= m; ++i)
      for (int j = 0; i + j <= m; ++j) next[i + j] += acc[i] * coord[j] / fact[j];
    acc = std::move(next);
  }
  return acc[m] * fact[m];
}

inline double double_factorial_odd(int m) {  // (2m-1)!!
  double r = 1.0;
  for (int j = 1; j <= m; ++j) r *= 2.0 * j - 1.0;
  return r;
}

inline std::vector<double> gaussian_even_moments(double var, int m) {
  std::vector<double> c(m + 1);
  for (int j = 0; j <= m; ++j) c[j] = std::pow(var, j) * double_factorial_odd(j);
  return c;
}

inline double binomial(int n, int k) {
  double r = 1.0;
  for (int j = 1; j <= k; ++j) r = r * (n - k + j) / j;
  return r;
}

}  // namespace detail

/// Probability density on R^d used as the one-particle law.
class BaseDensity {
 public:
  virtual ~BaseDensity() = default;

  virtual std::string name() const = 0;
  virtual int dim() const = 0;
  /// log f(v); -infinity outside the support.
  virtual double log_density(std::span<const double> v) const = 0;
  /// Writes grad log f(v) into out. Returns false where the score is undefined.
  virtual bool score(std::span<const double> v, std::span<double> out) const = 0;
  virtual void sample(Rng& rng, std::span<double> out) const = 0;
  /// E|v|^k.
  virtual double moment(int k) const = 0;
  /// Interval containing all but a negligible part of the mass of each coordinate.
  virtual std::pair<double, double> coordinate_range(int alpha) const = 0;
  /// Points where the one-dimensional density is not smooth (d = 1), including the range ends.
  virtual std::vector<double> breakpoints() const {
    auto [lo, hi] = coordinate_range(0);
    return {lo, hi};
  }

  double density(std::span<const double> v) const { return std::exp(log_density(v)); }
  double density1(double v) const {
    require_1d();
    return std::exp(log_density(std::span<const double>(&v, 1)));
  }

  double energy() const { return moment(2); }
  double energy_scale() const { return moment(2) / dim(); }
  double energy_variance() const {
    const double m2 = moment(2);
    return moment(4) - m2 * m2;
  }

  /// E exp(i s v) for d = 1.
  virtual std::complex<double> characteristic(double s) const {
    require_1d();
    auto rule = composite_gauss_legendre(breakpoints(), std::min(0.25, 6.0 / (std::abs(s) + 1e-300)), 16);
    std::complex<double> acc = 0.0;
    for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
      const double v = rule.nodes[j];
      acc += rule.weights[j] * density1(v) * std::polar(1.0, s * v);
    }
    return acc;
  }

  /// out(i, j) = E exp(i s_i v + i t_j v^2), the characteristic function of the lifted
  /// law of (v, v^2), for d = 1. The default evaluates a composite Gauss-Legendre rule whose
  /// panels resolve the largest phase rate, as one complex matrix product.
  virtual void lifted_characteristic(std::span<const double> s, std::span<const double> t,
                                     Eigen::MatrixXcd& out) const {
    require_1d();
    double smax = 0.0, tmax = 0.0;
    for (double x : s) smax = std::max(smax, std::abs(x));
    for (double x : t) tmax = std::max(tmax, std::abs(x));
    const auto bps = breakpoints();
    std::vector<double> nodes, weights;
    const auto& base = gauss_legendre(16);
    for (std::size_t b = 0; b + 1 < bps.size(); ++b) {
      double x = bps[b];
      const double end = bps[b + 1];
      while (x < end) {
        const double vmax = std::max(std::abs(x), std::abs(end));
        const double rate = smax + 2.0 * tmax * vmax + 1.0;
        double h = std::min(8.0 / rate, end - x);
        if (end - x - h < 1e-3 * h) h = end - x;
        for (int i = 0; i < 16; ++i) {
          const double v = x + 0.5 * h * (base.nodes[i] + 1.0);
          const double w = 0.5 * h * base.weights[i] * density1(v);
          if (w != 0.0) {
            nodes.push_back(v);
            weights.push_back(w);
          }
        }
        x += h;
      }
    }
    out.setZero(Eigen::Index(s.size()), Eigen::Index(t.size()));
    constexpr std::size_t chunk = 2048;
    for (std::size_t j0 = 0; j0 < nodes.size(); j0 += chunk) {
      const std::size_t m = std::min(chunk, nodes.size() - j0);
      Eigen::MatrixXcd A(Eigen::Index(s.size()), Eigen::Index(m));
      Eigen::MatrixXcd B(Eigen::Index(m), Eigen::Index(t.size()));
      for (std::size_t j = 0; j < m; ++j) {
        const double v = nodes[j0 + j], w = weights[j0 + j];
        for (std::size_t i = 0; i < s.size(); ++i) A(Eigen::Index(i), Eigen::Index(j)) = std::polar(w, s[i] * v);
        for (std::size_t l = 0; l < t.size(); ++l) B(Eigen::Index(j), Eigen::Index(l)) = std::polar(1.0, t[l] * v * v);
      }
      out.noalias() += A * B;
    }
  }

 protected:
  void require_1d() const {
    if (dim() != 1) throw ParameterError("operation defined for one-dimensional densities only");
  }
  void check_point(std::span<const double> v) const {
    if (v.size() != std::size_t(dim())) throw ShapeError("point dimension does not match density");
  }
  /// Odd moments of a one-dimensional density by quadrature.
  double quadrature_moment_1d(int k) const {
    return integrate_pieces([&](double v) { return std::pow(std::abs(v), k) * density1(v); }, breakpoints(),
                            1e-12);
  }
};

using DensityPtr = std::shared_ptr<const BaseDensity>;

/// Centred isotropic Gaussian N(0, variance I_d).
class GaussianDensity : public BaseDensity {
 public:
  explicit GaussianDensity(int d, double variance = 1.0) : d_(d), var_(variance) {
    if (d < 1 || !(variance > 0.0)) throw ParameterError("Gaussian needs d >= 1 and variance > 0");
  }
  std::string name() const override { return "gaussian"; }
  int dim() const override { return d_; }
  double variance() const { return var_; }
  double log_density(std::span<const double> v) const override {
    check_point(v);
    double q = 0.0;
    for (double x : v) q += x * x;
    return -0.5 * q / var_ - 0.5 * d_ * std::log(2.0 * std::numbers::pi * var_);
  }
  bool score(std::span<const double> v, std::span<double> out) const override {
    check_point(v);
    for (std::size_t k = 0; k < v.size(); ++k) out[k] = -v[k] / var_;
    return true;
  }
  void sample(Rng& rng, std::span<double> out) const override {
    const double sd = std::sqrt(var_);
    for (double& x : out) x = sd * rng.normal();
  }
  double moment(int k) const override {
    if (k < 0) throw ParameterError("moment order must be >= 0");
    return std::exp(0.5 * k * std::log(2.0 * var_) + log_gamma(0.5 * (d_ + k)) - log_gamma(0.5 * d_));
  }
  std::pair<double, double> coordinate_range(int) const override {
    const double r = 9.7 * std::sqrt(var_);
    return {-r, r};
  }
  std::complex<double> characteristic(double s) const override {
    require_1d();
    return std::exp(-0.5 * var_ * s * s);
  }
  void lifted_characteristic(std::span<const double> s, std::span<const double> t,
                             Eigen::MatrixXcd& out) const override {
    require_1d();
    out.resize(Eigen::Index(s.size()), Eigen::Index(t.size()));
    for (std::size_t l = 0; l < t.size(); ++l) {
      const std::complex<double> den(1.0, -2.0 * t[l] * var_);
      const std::complex<double> pre = 1.0 / std::sqrt(den);
      for (std::size_t i = 0; i < s.size(); ++i)
        out(Eigen::Index(i), Eigen::Index(l)) = pre * std::exp(-0.5 * s[i] * s[i] * var_ / den);
    }
  }

 private:
  int d_;
  double var_;
};

/// Uniform density on the cube [-h, h]^d; h = sqrt(3) gives unit covariance.
class UniformBoxDensity : public BaseDensity {
 public:
  explicit UniformBoxDensity(int d, double half_width = std::sqrt(3.0)) : d_(d), h_(half_width) {
    if (d < 1 || !(half_width > 0.0)) throw ParameterError("uniform box needs d >= 1 and half width > 0");
  }
  std::string name() const override { return "uniform"; }
  int dim() const override { return d_; }
  double half_width() const { return h_; }
  double log_density(std::span<const double> v) const override {
    check_point(v);
    for (double x : v)
      if (!(std::abs(x) <= h_)) return neg_infinity;
    return -d_ * std::log(2.0 * h_);
  }
  bool score(std::span<const double> v, std::span<double> out) const override {
    check_point(v);
    for (double x : v)
      if (!(std::abs(x) < h_)) return false;
    std::fill(out.begin(), out.end(), 0.0);
    return true;
  }
  void sample(Rng& rng, std::span<double> out) const override {
    for (double& x : out) x = rng.uniform(-h_, h_);
  }
  double moment(int k) const override {
    if (k < 0) throw ParameterError("moment order must be >= 0");
    if (k % 2 == 0) {
      std::vector<double> c(k / 2 + 1);
      for (int j = 0; j <= k / 2; ++j) c[j] = std::pow(h_, 2 * j) / (2 * j + 1);
      return detail::product_even_moment(std::vector<std::vector<double>>(d_, c), k / 2);
    }
    if (d_ == 1) return std::pow(h_, k) / (k + 1);
    throw ParameterError("odd moments of the uniform box are available for d = 1 only");
  }
  std::pair<double, double> coordinate_range(int) const override { return {-h_, h_}; }
  std::complex<double> characteristic(double s) const override {
    require_1d();
    const double x = h_ * s;
    return std::abs(x) < 1e-8 ? 1.0 - x * x / 6.0 : std::sin(x) / x;
  }

 private:
  int d_;
  double h_;
};

/// Anisotropic bimodal density with mean 0 and identity covariance: the first coordinate is
/// (N(a, 1-a^2) + N(-a, 1-a^2)) / 2, the remaining ones are standard normal.
class GaussianMixtureDensity : public BaseDensity {
 public:
  explicit GaussianMixtureDensity(int d, double offset = 0.9) : d_(d), a_(offset), s2_(1.0 - offset * offset) {
    if (d < 1 || !(offset >= 0.0) || !(offset < 1.0)) throw ParameterError("mixture needs d >= 1, 0 <= a < 1");
  }
  std::string name() const override { return "mixture"; }
  int dim() const override { return d_; }
  double offset() const { return a_; }

  double log_density(std::span<const double> v) const override {
    check_point(v);
    double lp = log_first(v[0]);
    for (int k = 1; k < d_; ++k) lp += -0.5 * v[k] * v[k] - 0.5 * std::log(2.0 * std::numbers::pi);
    return lp;
  }
  bool score(std::span<const double> v, std::span<double> out) const override {
    check_point(v);
    const double x = v[0];
    const double lp = -0.5 * (x - a_) * (x - a_) / s2_, lm = -0.5 * (x + a_) * (x + a_) / s2_;
    const double mx = std::max(lp, lm);
    const double wp = std::exp(lp - mx), wm = std::exp(lm - mx);
    out[0] = (-(x - a_) * wp - (x + a_) * wm) / (s2_ * (wp + wm));
    for (int k = 1; k < d_; ++k) out[k] = -v[k];
    return true;
  }
  void sample(Rng& rng, std::span<double> out) const override {
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    out[0] = sign * a_ + std::sqrt(s2_) * rng.normal();
    for (int k = 1; k < d_; ++k) out[k] = rng.normal();
  }
  double moment(int k) const override {
    if (k < 0) throw ParameterError("moment order must be >= 0");
    if (k % 2 == 0) {
      const int m = k / 2;
      std::vector<std::vector<double>> c;
      std::vector<double> first(m + 1);
      for (int j = 0; j <= m; ++j) {
        double e = 0.0;
        for (int i = 0; i <= j; ++i)
          e += detail::binomial(2 * j, 2 * i) * std::pow(a_, 2 * (j - i)) * std::pow(s2_, i) *
               detail::double_factorial_odd(i);
        first[j] = e;
      }
      c.push_back(first);
      for (int a = 1; a < d_; ++a) c.push_back(detail::gaussian_even_moments(1.0, m));
      return detail::product_even_moment(c, m);
    }
    if (d_ == 1) return quadrature_moment_1d(k);
    throw ParameterError("odd moments of the mixture are available for d = 1 only");
  }
  std::pair<double, double> coordinate_range(int alpha) const override {
    if (alpha == 0) return {-a_ - 9.7 * std::sqrt(s2_), a_ + 9.7 * std::sqrt(s2_)};
    return {-9.7, 9.7};
  }
  std::complex<double> characteristic(double s) const override {
    require_1d();
    return std::cos(a_ * s) * std::exp(-0.5 * s2_ * s * s);
  }
  void lifted_characteristic(std::span<const double> s, std::span<const double> t,
                             Eigen::MatrixXcd& out) const override {
    require_1d();
    out.resize(Eigen::Index(s.size()), Eigen::Index(t.size()));
    const std::complex<double> I(0.0, 1.0);
    for (std::size_t l = 0; l < t.size(); ++l) {
      const std::complex<double> den(1.0, -2.0 * t[l] * s2_);
      const std::complex<double> pre = 0.5 / std::sqrt(den);
      for (std::size_t i = 0; i < s.size(); ++i) {
        std::complex<double> acc = 0.0;
        for (double mu : {a_, -a_}) {
          const std::complex<double> b = I * s[i] + mu / s2_;
          acc += std::exp(b * b * s2_ / (2.0 * den) - mu * mu / (2.0 * s2_));
        }
        out(Eigen::Index(i), Eigen::Index(l)) = pre * acc;
      }
    }
  }

 private:
  double log_first(double x) const {
    const double lp = -0.5 * (x - a_) * (x - a_) / s2_, lm = -0.5 * (x + a_) * (x + a_) / s2_;
    const double mx = std::max(lp, lm);
    return mx + std::log(0.5 * (std::exp(lp - mx) + std::exp(lm - mx))) -
           0.5 * std::log(2.0 * std::numbers::pi * s2_);
  }

  int d_;
  double a_, s2_;
};

inline std::vector<std::string> density_registry_keys() { return {"gaussian", "uniform", "mixture"}; }

/// Registry of one-particle laws with mean 0 and covariance I_d.
inline DensityPtr make_density(const std::string& key, int d) {
  if (key == "gaussian") return std::make_shared<GaussianDensity>(d);
  if (key == "uniform") return std::make_shared<UniformBoxDensity>(d);
  if (key == "mixture") return std::make_shared<GaussianMixtureDensity>(d);
  throw ConfigError("unknown density '" + key + "' (known: gaussian, uniform, mixture)");
}

}  // namespace kacsphere

#endif

#ifndef KACSPHERE_UNIFORM_LAW_HPP
#define KACSPHERE_UNIFORM_LAW_HPP

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "core/error.hpp"
#include "core/quadrature.hpp"
#include "core/random.hpp"
#include "core/special.hpp"
#include "core/statistics.hpp"
#include "sphere_geometry.hpp"

namespace kacsphere {

/// Draws from the normalized uniform measure on S^N(r, z): Gaussian vector,
/// projected to the momentum plane and rescaled to the inner radius.
inline ParticleConfiguration sample_uniform(const SphereSpec& spec, Rng& rng) {
  spec.validate();
  const double w = spec.inner_radius2();
  if (w < 0.0) throw SupportError("sphere is empty: r^2 < |z|^2 / N");
  const int d = spec.d, N = spec.N;
  std::vector<double> g(std::size_t(d) * N);
  std::vector<double> P;
  double n2 = 0.0;
  do {
    for (double& x : g) x = rng.normal();
    P = project_to_hyperplane(g, d, N);
    n2 = 0.0;
    for (double x : P) n2 += x * x;
  } while (!(n2 > 0.0));
  const double scale = std::sqrt(w / n2);
  for (int i = 0; i < N; ++i)
    for (int a = 0; a < d; ++a) {
      double& x = P[std::size_t(i) * d + a];
      x = x * scale + spec.z[a] / N;
    }
  ParticleConfiguration c(spec, std::move(P));
  c.certify();
  return c;
}

inline std::vector<ParticleConfiguration> sample_uniform(const SphereSpec& spec, std::uint64_t seed,
                                                         std::size_t count) {
  Rng rng(StreamKey(seed, "uniform_law"));
  std::vector<ParticleConfiguration> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(sample_uniform(spec, rng));
  return out;
}

/// ell-particle marginal of the uniform law on the Boltzmann sphere S^N(sqrt(dN), 0).
/// Depends on V_ell only through q = |V_ell|^2 and p = |sum of the ell velocities|^2.
class UniformMarginal {
 public:
  UniformMarginal(int d, int N, int ell) : d_(d), N_(N), ell_(ell) {
    if (d < 1 || N < 2) throw ParameterError("marginal needs d >= 1, N >= 2");
    if (ell < 1 || ell >= N - 1 || d * (N - ell - 1) < 1)
      throw ParameterError("marginal density exists only for 1 <= ell <= N-2");
    const double n_full = double(d) * (N - 1), n_rest = double(d) * (N - ell - 1);
    log_c_ = log_unit_sphere_area(n_rest) - log_unit_sphere_area(n_full) +
             0.5 * d * std::log(double(N) / (N - ell)) - 0.5 * (n_full - 2.0) * std::log(double(d) * N);
    exponent_ = 0.5 * (n_rest - 2.0);
  }

  int d() const { return d_; }
  int N() const { return N_; }
  int ell() const { return ell_; }

  /// Value of the bracket dN - q - p/(N - ell); the support is where it is positive.
  double slack(double q, double p) const { return double(d_) * N_ - q - p / (N_ - ell_); }

  double log_density_qp(double q, double p) const {
    const double s = slack(q, p);
    if (!(s > 0.0)) return neg_infinity;
    return log_c_ + exponent_ * std::log(s);
  }
  double density_qp(double q, double p) const { return std::exp(log_density_qp(q, p)); }

  double density(std::span<const double> V_ell) const {
    auto [q, p] = invariants(V_ell);
    return density_qp(q, p);
  }
  double log_density(std::span<const double> V_ell) const {
    auto [q, p] = invariants(V_ell);
    return log_density_qp(q, p);
  }

  std::pair<double, double> invariants(std::span<const double> V_ell) const {
    if (V_ell.size() != std::size_t(d_) * ell_) throw ShapeError("V_ell must have d*ell entries");
    double q = 0.0;
    std::vector<double> s(d_, 0.0);
    for (int i = 0; i < ell_; ++i)
      for (int a = 0; a < d_; ++a) {
        const double x = V_ell[std::size_t(i) * d_ + a];
        q += x * x;
        s[a] += x;
      }
    double p = 0.0;
    for (double x : s) p += x * x;
    return {q, p};
  }

  /// Integral of h(q, p) with respect to Lebesgue measure on R^{d ell}, restricted to
  /// the support ellipse. Uses the reduction V_ell -> (a, b) where a = |mean part|,
  /// b = |zero-sum part|, with trigonometric substitutions absorbing the boundary behaviour.
  /// With positive_part set, only the region where h > 0 contributes and the sign
  /// changes of h are located before integrating.
  double integrate_support(const std::function<double(double q, double p)>& h,
                           double tolerance = default_quadrature_tolerance, bool positive_part = false) const {
    const double dN = double(d_) * N_;
    const double ratio = double(N_) / (N_ - ell_);
    const double a_max = std::sqrt(dN / ratio);
    const double area_a = std::exp(log_unit_sphere_area(double(d_)));
    const int nb = d_ * (ell_ - 1);
    const double area_b = nb > 0 ? std::exp(log_unit_sphere_area(double(nb))) : 0.0;
    const double pi2 = 0.5 * std::numbers::pi;
    auto run = [&](const std::function<double(double)>& fn, double lo, double hi, bool fixed) {
      if (positive_part) return integrate_positive(fn, lo, hi, fixed, tolerance);
      return fixed ? integrate_fixed(fn, lo, hi) : integrate(fn, lo, hi, tolerance);
    };
    auto outer = [&](double phi) {
      const double a = a_max * std::sin(phi);
      const double da = a_max * std::cos(phi);
      const double ja = area_a * std::pow(a, d_ - 1) * da;
      if (nb == 0) return ja * h(a * a, ell_ * a * a);
      const double b_max2 = dN - a * a * ratio;
      if (!(b_max2 > 0.0)) return 0.0;
      const double b_max = std::sqrt(b_max2);
      auto inner = [&](double th) {
        const double b = b_max * std::sin(th);
        const double db = b_max * std::cos(th);
        return area_b * std::pow(b, nb - 1) * db * h(a * a + b * b, ell_ * a * a);
      };
      return ja * run(inner, 0.0, pi2, true);
    };
    if (nb == 0) return run(outer, 0.0, pi2, false);
    return integrate(outer, 0.0, pi2, tolerance);
  }

  /// Composite Gauss-Legendre on [lo, hi]; the reduced integrands are smooth after the
  /// trigonometric substitution, so a fixed rule avoids nested adaptive noise.
  static double integrate_fixed(const std::function<double(double)>& fn, double lo, double hi) {
    if (!(hi > lo)) return 0.0;
    const auto& rule = gauss_legendre(16);
    constexpr int panels = 12;
    const double h = (hi - lo) / panels;
    double total = 0.0;
    for (int p = 0; p < panels; ++p)
      for (int i = 0; i < 16; ++i) total += 0.5 * h * rule.weights[i] * fn(lo + h * (p + 0.5 * (rule.nodes[i] + 1.0)));
    return total;
  }

  /// Integral of max(fn, 0): sign changes are bracketed on a grid and refined by bisection.
  static double integrate_positive(const std::function<double(double)>& fn, double lo, double hi, bool fixed,
                                   double tolerance) {
    constexpr int grid = 64;
    std::vector<double> xs(grid + 1), fs(grid + 1);
    for (int i = 0; i <= grid; ++i) {
      xs[i] = lo + (hi - lo) * double(i) / grid;
      fs[i] = fn(xs[i]);
    }
    auto root = [&](double a, double fa, double b) {
      for (int it = 0; it < 60; ++it) {
        const double m = 0.5 * (a + b);
        const double fm = fn(m);
        if ((fm > 0.0) == (fa > 0.0)) {
          a = m;
          fa = fm;
        } else {
          b = m;
        }
      }
      return 0.5 * (a + b);
    };
    std::vector<double> cuts{lo};
    for (int i = 0; i < grid; ++i)
      if ((fs[i] > 0.0) != (fs[i + 1] > 0.0)) cuts.push_back(root(xs[i], fs[i], xs[i + 1]));
    cuts.push_back(hi);
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      if (!(fn(0.5 * (cuts[k] + cuts[k + 1])) > 0.0)) continue;
      total += fixed ? integrate_fixed(fn, cuts[k], cuts[k + 1]) : integrate(fn, cuts[k], cuts[k + 1], tolerance);
    }
    return total;
  }

  double total_mass() const {
    return integrate_support([&](double q, double p) { return density_qp(q, p); });
  }

  /// E|V_ell|^k under the marginal.
  double moment(double k) const {
    if (!(k >= 0.0)) throw ParameterError("moment order must be non-negative");
    return integrate_support([&](double q, double p) { return std::pow(q, 0.5 * k) * density_qp(q, p); });
  }

 private:
  int d_, N_, ell_;
  double log_c_ = 0.0, exponent_ = 0.0;
};

inline double marginal_density(int d, int N, int ell, std::span<const double> V_ell) {
  return UniformMarginal(d, N, ell).density(V_ell);
}

inline double marginal_moment(int d, int N, int ell, double k) { return UniformMarginal(d, N, ell).moment(k); }

/// Uniform-in-N upper bound C_{d,k,ell} on E|V_ell|^k. For even k,
/// 2^{k/2} ( prod_{j<k/2} (d(ell-1) + 2j) + prod_{j<k/2} (d + 2j) ); odd k uses
/// |v|^k <= |v|^{k-1} + |v|^{k+1}.
inline double moment_bound(int d, int k, int ell) {
  if (d < 1 || ell < 1 || k < 0) throw ParameterError("moment bound needs d, ell >= 1 and k >= 0");
  if (k == 0) return 1.0;
  if (k % 2 == 1) return moment_bound(d, k - 1, ell) + moment_bound(d, k + 1, ell);
  double p1 = 1.0, p2 = 1.0;
  for (int j = 0; j < k / 2; ++j) {
    p1 *= double(d) * (ell - 1) + 2.0 * j;
    p2 *= double(d) + 2.0 * j;
  }
  return std::pow(2.0, 0.5 * k) * (p1 + p2);
}

/// Explicit bound 2(d(ell+2)+2) / (dN - d(ell+2) - 2) on the L1 chaos gap.
inline double l1_chaos_bound(int d, int ell, int N) {
  const double den = double(d) * N - double(d) * (ell + 2) - 2.0;
  if (!(den > 0.0)) throw ParameterError("bound undefined for this (d, ell, N)");
  return 2.0 * (double(d) * (ell + 2) + 2.0) / den;
}

enum class GapMethod { quadrature, monte_carlo };

struct ChaosGap {
  double gap = 0.0;
  double std_error = 0.0;
  double bound = 0.0;
  GapMethod method = GapMethod::quadrature;
  bool within_bound() const { return gap <= bound + 3.0 * std_error; }
};

/// || gamma^N_ell - gamma^{(x) ell} ||_{L1}, computed as 2 int (p - q)_+ .
inline ChaosGap l1_chaos_gap(int d, int ell, int N, GapMethod method = GapMethod::quadrature,
                             std::size_t mc_samples = 200000, std::uint64_t seed = 1) {
  if (d < 1 || ell < 1) throw ParameterError("chaos gap needs d, ell >= 1");
  if (double(d) * ell > double(d) * (N - 2) - 3.0)
    throw ParameterError("chaos gap requires d*ell <= d(N-2) - 3");
  UniformMarginal m(d, N, ell);
  const double log_gauss_c = -0.5 * d * ell * std::log(2.0 * std::numbers::pi);
  ChaosGap out;
  out.method = method;
  out.bound = l1_chaos_bound(d, ell, N);
  if (method == GapMethod::quadrature) {
    out.gap = 2.0 * m.integrate_support(
                        [&](double q, double p) { return m.density_qp(q, p) - std::exp(log_gauss_c - 0.5 * q); },
                        default_quadrature_tolerance, true);
    return out;
  }
  Rng rng(StreamKey(seed, "uniform_law.l1_gap"));
  std::vector<double> vals(mc_samples);
  std::vector<double> V(std::size_t(d) * ell);
  for (auto& val : vals) {
    for (double& x : V) x = rng.normal();
    auto [q, p] = m.invariants(V);
    const double ratio = std::exp(m.log_density_qp(q, p) - (log_gauss_c - 0.5 * q));
    val = 2.0 * (ratio > 1.0 ? ratio - 1.0 : 0.0);
  }
  const auto e = mean_estimate(vals);
  out.gap = e.value;
  out.std_error = e.std_error;
  return out;
}

/// Density of a single velocity coordinate v_{1,1} under the uniform law on the
/// Boltzmann sphere: c (1 - x^2 / (d(N-1)))_+^{(d(N-1)-3)/2}.
inline double coordinate_marginal_density(int d, int N, double x) {
  if (d < 1 || N < 2) throw ParameterError("invalid (d, N)");
  const double n = double(d) * (N - 1);
  if (n < 2.0) throw ParameterError("coordinate marginal needs d(N-1) >= 2");
  const double R2 = n;
  const double s = 1.0 - x * x / R2;
  if (!(s > 0.0)) return 0.0;
  const double log_c = log_gamma(0.5 * n) - log_gamma(0.5 * (n - 1.0)) - 0.5 * std::log(std::numbers::pi * R2);
  return std::exp(log_c + 0.5 * (n - 3.0) * std::log(s));
}

inline double coordinate_marginal_cdf(int d, int N, double x) {
  const double n = double(d) * (N - 1);
  if (n < 2.0) throw ParameterError("coordinate marginal needs d(N-1) >= 2");
  const double R2 = n;
  if (x * x >= R2) return x > 0.0 ? 1.0 : 0.0;
  const double half = 0.5 * boost::math::ibeta(0.5, 0.5 * (n - 1.0), x * x / R2);
  return x >= 0.0 ? 0.5 + half : 0.5 - half;
}

}  // namespace kacsphere

#endif

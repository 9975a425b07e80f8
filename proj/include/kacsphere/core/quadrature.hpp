#ifndef KACSPHERE_CORE_QUADRATURE_HPP
#define KACSPHERE_CORE_QUADRATURE_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <mutex>
#include <numbers>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "error.hpp"

namespace kacsphere {

inline constexpr double default_quadrature_tolerance = 1e-9;

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

namespace detail {

inline QuadratureRule compute_gauss_legendre(int n) {
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

}  // namespace detail

/// Gauss-Legendre rule with n nodes on [-1, 1]. Rules are cached.
inline const QuadratureRule& gauss_legendre(int n) {
  if (n < 1) throw ParameterError("Gauss-Legendre order must be >= 1");
  static std::mutex mutex;
  static std::map<int, QuadratureRule> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, detail::compute_gauss_legendre(n)).first;
  return it->second;
}

/// Row-major n x n matrix S with S(i, j) = integral from -1 to x_i of the Lagrange basis
/// polynomial of node j, on the order-n Gauss-Legendre nodes x. Cached.
inline const std::vector<double>& gauss_legendre_antiderivative(int n) {
  static std::mutex mutex;
  static std::map<int, std::vector<double>> cache;
  const QuadratureRule& rule = gauss_legendre(n);
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<double> S(std::size_t(n) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    const double hi = rule.nodes[i], half = 0.5 * (hi + 1.0);
    for (int q = 0; q < n; ++q) {
      const double t = -1.0 + half * (rule.nodes[q] + 1.0);
      for (int j = 0; j < n; ++j) {
        double l = 1.0;
        for (int m = 0; m < n; ++m)
          if (m != j) l *= (t - rule.nodes[m]) / (rule.nodes[j] - rule.nodes[m]);
        S[std::size_t(i) * n + j] += half * rule.weights[q] * l;
      }
    }
  }
  return cache.emplace(n, std::move(S)).first->second;
}

/// Composite Gauss-Legendre rule over consecutive breakpoints. Each interval
/// [b_i, b_{i+1}] is split into panels of width at most max_panel.
inline QuadratureRule composite_gauss_legendre(const std::vector<double>& breakpoints, double max_panel,
                                               int order = 16) {
  if (breakpoints.size() < 2) throw ParameterError("composite rule needs at least two breakpoints");
  if (!(max_panel > 0.0)) throw ParameterError("panel width must be positive");
  const QuadratureRule& base = gauss_legendre(order);
  QuadratureRule out;
  for (std::size_t b = 0; b + 1 < breakpoints.size(); ++b) {
    const double lo = breakpoints[b], hi = breakpoints[b + 1];
    if (!(hi > lo)) continue;
    const auto panels = static_cast<std::size_t>(std::ceil((hi - lo) / max_panel));
    const double h = (hi - lo) / double(panels);
    for (std::size_t p = 0; p < panels; ++p) {
      const double a = lo + h * double(p);
      for (int i = 0; i < order; ++i) {
        out.nodes.push_back(a + 0.5 * h * (base.nodes[i] + 1.0));
        out.weights.push_back(0.5 * h * base.weights[i]);
      }
    }
  }
  return out;
}

/// Adaptive Gauss-Kronrod integration of a scalar function on [a, b].
inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tolerance = default_quadrature_tolerance, double* error = nullptr) {
  if (a == b) return 0.0;
  double err = 0.0;
  const double v =
      boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 18, tolerance, &err);
  if (error) *error = err;
  return v;
}

/// Adaptive integration over consecutive sub-intervals given by sorted breakpoints.
inline double integrate_pieces(const std::function<double(double)>& f, const std::vector<double>& breakpoints,
                               double tolerance = default_quadrature_tolerance) {
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i)
    total += integrate(f, breakpoints[i], breakpoints[i + 1], tolerance);
  return total;
}

}  // namespace kacsphere

#endif

#ifndef KACSPHERE_CHAOS_METRICS_HPP
#define KACSPHERE_CHAOS_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <span>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>

#include "core/error.hpp"
#include "core/parallel.hpp"
#include "core/random.hpp"
#include "core/special.hpp"
#include "core/statistics.hpp"
#include "density.hpp"
#include "knn.hpp"
#include "sphere_geometry.hpp"
#include "transport.hpp"

namespace kacsphere {

/// Weighted point cloud in R^dim.
class EmpiricalMeasure {
 public:
  EmpiricalMeasure(std::vector<double> points, int dim, std::vector<double> weights = {})
      : dim_(dim), points_(std::move(points)), weights_(std::move(weights)) {
    if (dim < 1 || points_.empty() || points_.size() % std::size_t(dim) != 0)
      throw ShapeError("points must form a nonempty n x dim array");
    const std::size_t n = points_.size() / std::size_t(dim);
    for (double x : points_)
      if (!std::isfinite(x)) throw ParameterError("points must be finite");
    if (weights_.empty()) {
      weights_.assign(n, 1.0 / double(n));
      uniform_ = true;
    } else {
      if (weights_.size() != n) throw ShapeError("one weight per point is required");
      double s = 0.0;
      for (double w : weights_) {
        if (!(w >= 0.0)) throw ParameterError("weights must be nonnegative");
        s += w;
      }
      if (std::abs(s - 1.0) > 1e-12) throw ParameterError("weights must sum to 1");
    }
  }

  /// Uniform measure on the particles of a configuration.
  static EmpiricalMeasure of_particles(const ParticleConfiguration& c) {
    return EmpiricalMeasure(std::vector<double>(c.values().begin(), c.values().end()), c.d());
  }

  int dim() const { return dim_; }
  std::size_t size() const { return weights_.size(); }
  bool uniform() const { return uniform_; }
  std::span<const double> points() const { return points_; }
  std::span<const double> point(std::size_t i) const { return {points_.data() + i * std::size_t(dim_), std::size_t(dim_)}; }
  std::span<const double> weights() const { return weights_; }

  /// sum_i w_i |x_i|^k.
  double moment(double k) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < size(); ++i) {
      double r2 = 0.0;
      for (double x : point(i)) r2 += x * x;
      acc += weights_[i] * std::pow(r2, 0.5 * k);
    }
    return acc;
  }

 private:
  int dim_;
  std::vector<double> points_, weights_;
  bool uniform_ = false;
};

/// Largest n * m for which the exact transport problem is solved.
inline constexpr std::size_t transport_pair_limit = 4000000;

namespace detail {

/// W_p^p in one dimension from the quantile coupling.
inline double quantile_cost(const EmpiricalMeasure& a, const EmpiricalMeasure& b, double p) {
  auto order = [](const EmpiricalMeasure& m) {
    std::vector<std::size_t> o(m.size());
    std::iota(o.begin(), o.end(), std::size_t(0));
    std::sort(o.begin(), o.end(), [&](std::size_t x, std::size_t y) { return m.points()[x] < m.points()[y]; });
    return o;
  };
  const auto oa = order(a), ob = order(b);
  std::size_t i = 0, j = 0;
  double ra = a.weights()[oa[0]], rb = b.weights()[ob[0]], acc = 0.0;
  while (i < oa.size() && j < ob.size()) {
    const double mass = std::min(ra, rb);
    acc += mass * std::pow(std::abs(a.points()[oa[i]] - b.points()[ob[j]]), p);
    ra -= mass;
    rb -= mass;
    if (ra <= 1e-15 && i < oa.size()) {
      if (++i < oa.size()) ra += a.weights()[oa[i]];
    }
    if (rb <= 1e-15 && j < ob.size()) {
      if (++j < ob.size()) rb += b.weights()[ob[j]];
    }
  }
  return acc;
}

inline double transport_cost(const EmpiricalMeasure& a, const EmpiricalMeasure& b, double p, unsigned jobs) {
  if (a.dim() != b.dim()) throw ShapeError("measures live in different dimensions");
  if (a.dim() == 1) return quantile_cost(a, b, p);
  const std::size_t n = a.size(), m = b.size();
  if (n * m > transport_pair_limit) throw CapacityError("transport problem exceeds 4e6 pairs");
  std::vector<double> cost(n * m);
  parallel_for(n, jobs, [&](std::size_t i) {
    for (std::size_t j = 0; j < m; ++j) {
      double d2 = 0.0;
      for (int k = 0; k < a.dim(); ++k) {
        const double t = a.point(i)[std::size_t(k)] - b.point(j)[std::size_t(k)];
        d2 += t * t;
      }
      cost[i * m + j] = p == 2.0 ? d2 : std::pow(d2, 0.5 * p);
    }
  });
  if (a.uniform() && b.uniform()) {
    std::vector<double> sa(n, double(m)), sb(m, double(n));
    return TransportSimplex(sa, sb, cost).objective() / (double(n) * double(m));
  }
  return TransportSimplex(a.weights(), b.weights(), cost).objective();
}

}  // namespace detail

/// Kantorovich distance with Euclidean ground cost.
inline double w1(const EmpiricalMeasure& a, const EmpiricalMeasure& b, unsigned jobs = 1) {
  return std::max(0.0, detail::transport_cost(a, b, 1.0, jobs));
}

/// Quadratic Wasserstein distance.
inline double w2(const EmpiricalMeasure& a, const EmpiricalMeasure& b, unsigned jobs = 1) {
  return std::sqrt(std::max(0.0, detail::transport_cost(a, b, 2.0, jobs)));
}

struct EntropyOptions {
  int k = 4;
  /// Jackknife folds for the standard error; 0 skips it.
  int folds = 10;
  unsigned jobs = 1;
  std::uint64_t jitter_seed = 0;
};

struct EntropyEstimate {
  double value = 0.0;
  double std_error = 0.0;
  /// Set when duplicate points were perturbed by 1e-12 jitter.
  bool jittered = false;
};

namespace detail {

inline double kl_differential_entropy(std::span<const double> pts, int dim, int k, unsigned jobs) {
  const std::size_t n = pts.size() / std::size_t(dim);
  KdTree tree(pts, dim);
  std::vector<double> logs(n);
  parallel_for(n, jobs, [&](std::size_t i) { logs[i] = std::log(tree.kth_neighbour_distance(i, k)); });
  double s = 0.0;
  for (double l : logs) s += l;
  return boost::math::digamma(double(n)) - boost::math::digamma(double(k)) + log_unit_ball_volume(double(dim)) +
         double(dim) * s / double(n);
}

inline double relative_entropy_from(std::span<const double> pts, int dim, int k, unsigned jobs) {
  const std::size_t n = pts.size() / std::size_t(dim);
  double r2 = 0.0;
  for (double x : pts) r2 += x * x;
  return -kl_differential_entropy(pts, dim, k, jobs) + 0.5 * dim * std::log(2.0 * std::numbers::pi) +
         0.5 * r2 / double(n);
}

}  // namespace detail

/// H(mu | gamma) = -h(mu) + (d/2) log(2 pi) + (1/2) mean |x|^2 with the Kozachenko-Leonenko
/// k-nearest-neighbour estimate of the differential entropy h. Weights are ignored; the points
/// are treated as an i.i.d. sample. Standard error by leave-one-fold-out jackknife.
inline EntropyEstimate relative_entropy_vs_gaussian(const EmpiricalMeasure& mu, const EntropyOptions& opt = {}) {
  const int dim = mu.dim();
  const std::size_t n = mu.size();
  if (opt.k < 1) throw ParameterError("k must be >= 1");
  if (n < std::size_t(opt.k + 2)) throw CapacityError("too few samples for the k-NN estimator");
  EntropyEstimate out;
  std::vector<double> pts(mu.points().begin(), mu.points().end());
  {
    KdTree tree(pts, dim);
    bool dup = false;
    for (std::size_t i = 0; i < n && !dup; ++i) dup = tree.kth_neighbour_distance(i, 1) == 0.0;
    if (dup) {
      Rng rng(StreamKey(opt.jitter_seed, "chaos_metrics.jitter"));
      for (double& x : pts) x += 1e-12 * std::max(1.0, std::abs(x)) * rng.normal();
      out.jittered = true;
    }
  }
  out.value = detail::relative_entropy_from(pts, dim, opt.k, opt.jobs);
  if (opt.folds >= 2) {
    const auto G = std::size_t(opt.folds);
    std::vector<double> theta(G);
    for (std::size_t g = 0; g < G; ++g) {
      std::vector<double> keep;
      keep.reserve(pts.size());
      for (std::size_t i = 0; i < n; ++i)
        if (i % G != g) keep.insert(keep.end(), pts.begin() + std::ptrdiff_t(i * dim), pts.begin() + std::ptrdiff_t((i + 1) * dim));
      theta[g] = detail::relative_entropy_from(keep, dim, opt.k, opt.jobs);
    }
    const double mean = std::accumulate(theta.begin(), theta.end(), 0.0) / double(G);
    double ss = 0.0;
    for (double t : theta) ss += (t - mean) * (t - mean);
    out.std_error = std::sqrt(double(G - 1) / double(G) * ss);
  }
  return out;
}

struct FisherEstimate {
  double value = 0.0;
  double std_error = 0.0;
  /// Samples where the score is undefined, left out of the mean.
  std::size_t excluded = 0;
};

/// Plug-in Monte Carlo estimate of I(f | gamma) = E_f |grad log f(v) + v|^2.
inline FisherEstimate relative_fisher(const BaseDensity& f, const EmpiricalMeasure& samples) {
  if (samples.dim() != f.dim()) throw ShapeError("samples and density dimensions differ");
  std::vector<double> vals;
  vals.reserve(samples.size());
  std::vector<double> s(std::size_t(f.dim()));
  FisherEstimate out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto v = samples.point(i);
    if (!f.score(v, s)) {
      ++out.excluded;
      continue;
    }
    double acc = 0.0;
    for (std::size_t a = 0; a < s.size(); ++a) acc += (s[a] + v[a]) * (s[a] + v[a]);
    vals.push_back(acc);
  }
  if (vals.empty()) throw SupportError("score undefined at every sample");
  const auto e = mean_estimate(vals);
  out.value = e.value;
  out.std_error = e.std_error;
  return out;
}

struct InterpolationCheck {
  double w1 = 0.0, w2 = 0.0;
  /// M_k(a) + M_k(b).
  double moment = 0.0;
  /// 2^{3/2} M^{1/(2(k-1))} W1^{(k-2)/(2(k-1))}.
  double bound = 0.0;
  /// Same with the constant 2^{2/3}.
  double bound_alt = 0.0;
  bool passed = false;
  bool passed_alt = false;
};

/// Evaluates both sides of W2 <= C M_k^{1/(2(k-1))} W1^{(k-2)/(2(k-1))} for C = 2^{3/2}
/// (pass/fail) and C = 2^{2/3} (logged).
inline InterpolationCheck interpolation_check(const EmpiricalMeasure& a, const EmpiricalMeasure& b, int k,
                                              unsigned jobs = 1) {
  if (k < 2) throw ParameterError("k must be >= 2");
  InterpolationCheck c;
  c.w1 = w1(a, b, jobs);
  c.w2 = w2(a, b, jobs);
  c.moment = a.moment(k) + b.moment(k);
  const double core = std::pow(c.moment, 1.0 / (2.0 * (k - 1))) * std::pow(c.w1, double(k - 2) / (2.0 * (k - 1)));
  c.bound = std::pow(2.0, 1.5) * core;
  c.bound_alt = std::pow(2.0, 2.0 / 3.0) * core;
  const double slack = 1e-12 * std::max(1.0, c.w2);
  c.passed = c.w2 <= c.bound + slack;
  c.passed_alt = c.w2 <= c.bound_alt + slack;
  return c;
}

}  // namespace kacsphere

#endif

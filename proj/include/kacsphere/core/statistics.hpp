#ifndef KACSPHERE_CORE_STATISTICS_HPP
#define KACSPHERE_CORE_STATISTICS_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "error.hpp"

namespace kacsphere {

/// A Monte Carlo or numerical estimate with its standard error.
struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};

inline Estimate mean_estimate(std::span<const double> xs) {
  Estimate e;
  e.samples = xs.size();
  if (xs.empty()) return e;
  double mean = 0.0, m2 = 0.0;
  std::size_t n = 0;
  for (double x : xs) {
    ++n;
    const double delta = x - mean;
    mean += delta / double(n);
    m2 += delta * (x - mean);
  }
  e.value = mean;
  e.std_error = n > 1 ? std::sqrt(m2 / double(n - 1) / double(n)) : 0.0;
  return e;
}

/// Survival function of the Kolmogorov distribution, P(K > lambda).
inline double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += (j % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-18) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t samples = 0;
  bool passes(double alpha) const { return p_value > alpha; }
};

/// One-sample Kolmogorov-Smirnov test against a continuous CDF. The p-value uses
/// the asymptotic Kolmogorov law with the Stephens small-sample correction.
inline KsResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw ParameterError("KS test needs at least one sample");
  std::sort(samples.begin(), samples.end());
  const double n = double(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double F = cdf(samples[i]);
    d = std::max({d, double(i + 1) / n - F, F - double(i) / n});
  }
  KsResult r;
  r.statistic = d;
  r.samples = samples.size();
  const double sn = std::sqrt(n);
  r.p_value = kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d);
  return r;
}

struct RatePoint {
  double N = 0.0;
  double value = 0.0;
  double std_error = 0.0;
};

/// Least-squares fit of log(value) = intercept + slope * log(N).
struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_std_error = 0.0;
  double slope_ci_low = -std::numeric_limits<double>::infinity();
  double slope_ci_high = std::numeric_limits<double>::infinity();
  bool weighted = false;
  std::size_t points = 0;
};

/// Weighted when every point carries a positive standard error (weights are the
/// inverse variances of log(value)); ordinary least squares otherwise.
inline RateFit fit_power_law(std::span<const RatePoint> points, double confidence = 0.95) {
  std::vector<double> x, y, w;
  bool all_se = true;
  for (const auto& p : points) {
    if (!(p.value > 0.0) || !(p.N > 0.0)) continue;
    x.push_back(std::log(p.N));
    y.push_back(std::log(p.value));
    if (!(p.std_error > 0.0)) all_se = false;
    w.push_back(p.std_error > 0.0 ? std::pow(p.value / p.std_error, 2) : 1.0);
  }
  if (x.size() < 2) throw ParameterError("rate fit needs at least two positive points");
  if (!all_se) std::fill(w.begin(), w.end(), 1.0);
  double sw = 0, sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sw += w[i];
    sx += w[i] * x[i];
    sy += w[i] * y[i];
  }
  const double mx = sx / sw, my = sy / sw;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += w[i] * (x[i] - mx) * (x[i] - mx);
    sxy += w[i] * (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw ParameterError("rate fit needs at least two distinct N");
  RateFit fit;
  fit.weighted = all_se;
  fit.points = x.size();
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (x.size() > 2) {
    double rss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = y[i] - fit.intercept - fit.slope * x[i];
      rss += w[i] * r * r;
    }
    const double dof = double(x.size() - 2);
    fit.slope_std_error = std::sqrt(rss / dof / sxx);
    boost::math::students_t dist(dof);
    const double q = boost::math::quantile(dist, 0.5 + 0.5 * confidence);
    fit.slope_ci_low = fit.slope - q * fit.slope_std_error;
    fit.slope_ci_high = fit.slope + q * fit.slope_std_error;
  }
  return fit;
}

/// Rows of a convergence experiment with their power-law fit and the declared slope band.
struct RateReport {
  std::string metric;
  std::vector<RatePoint> rows;
  RateFit fit;
  double slope_low = -std::numeric_limits<double>::infinity();
  double slope_high = std::numeric_limits<double>::infinity();
  bool slope_in_band() const { return fit.slope >= slope_low && fit.slope <= slope_high; }
  bool ci_in_band() const { return fit.slope_ci_low >= slope_low && fit.slope_ci_high <= slope_high; }
};

inline RateReport make_rate_report(std::string metric, std::vector<RatePoint> rows, double slope_low,
                                   double slope_high) {
  RateReport r;
  r.metric = std::move(metric);
  r.rows = std::move(rows);
  r.fit = fit_power_law(r.rows);
  r.slope_low = slope_low;
  r.slope_high = slope_high;
  return r;
}

}  // namespace kacsphere

#endif

#ifndef KACSPHERE_CONDITIONED_TENSOR_HPP
#define KACSPHERE_CONDITIONED_TENSOR_HPP

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "core/error.hpp"
#include "core/parallel.hpp"
#include "core/quadrature.hpp"
#include "core/random.hpp"
#include "core/special.hpp"
#include "core/statistics.hpp"
#include "density.hpp"
#include "lifted_clt.hpp"
#include "sphere_geometry.hpp"
#include "uniform_law.hpp"

namespace kacsphere {

/// The law F^N of f^{(x)N} conditioned on the Boltzmann sphere S^N(sqrt(dN), 0).
/// Lifted partition functions are computed on demand and cached.
class ConditionedLaw {
 public:
  ConditionedLaw(DensityPtr f, int N, const LiftedPowerOptions& opt = {})
      : f_(std::move(f)), N_(N), opt_(opt), cache_(std::make_shared<Cache>()) {
    if (!f_) throw ParameterError("density is required");
    const int d = f_->dim();
    if (std::abs(f_->moment(2) - d) > 1e-9) throw ParameterError("f must have energy E = d");
    if ((d == 1 && N < 4) || (d >= 2 && N < 3))
      throw ParameterError("conditioned law needs N >= 4 (d = 1) or N >= 3 (d >= 2)");
    auto* g = dynamic_cast<const GaussianDensity*>(f_.get());
    gaussian_ = g != nullptr && g->variance() == 1.0;
  }

  const BaseDensity& f() const { return *f_; }
  const DensityPtr& density() const { return f_; }
  int d() const { return f_->dim(); }
  int N() const { return N_; }
  SphereSpec spec() const { return SphereSpec::boltzmann(d(), N_); }
  const LiftedPowerOptions& options() const { return opt_; }
  /// f is the standard Gaussian, for which F^N is the uniform law and Z' = 1 identically.
  bool is_standard_gaussian() const { return gaussian_; }

  /// Lifted partition data for M particles (d = 1).
  const LiftedPartition& partition(int M) const {
    if (d() != 1) throw ParameterError("lifted partition functions are available for d = 1");
    std::lock_guard<std::mutex> lock(cache_->mutex);
    auto it = cache_->parts.find(M);
    if (it == cache_->parts.end()) it = cache_->parts.emplace(M, std::make_shared<LiftedPartition>(f_, M, opt_)).first;
    return *it->second;
  }

  /// log Z'_N(f; sqrt(dN), 0): lifted computation for d = 1, leading asymptotics otherwise.
  double log_z_prime() const {
    if (gaussian_) return 0.0;
    if (d() == 1) return partition(N_).log_z_prime(std::sqrt(double(N_)), 0.0);
    std::vector<double> z(std::size_t(d()), 0.0);
    return log_z_prime_asymptotic(*f_, N_, std::sqrt(double(d()) * N_), z);
  }

 private:
  struct Cache {
    std::mutex mutex;
    std::map<int, std::shared_ptr<LiftedPartition>> parts;
  };
  DensityPtr f_;
  int N_;
  LiftedPowerOptions opt_;
  bool gaussian_ = false;
  std::shared_ptr<Cache> cache_;
};

/// log of the Metropolis ratio prod f(new) / prod f(old) over the moved particles.
inline double metropolis_log_ratio(const BaseDensity& f, std::span<const double> old_moved,
                                   std::span<const double> new_moved) {
  const auto d = std::size_t(f.dim());
  if (old_moved.size() != new_moved.size() || old_moved.size() % d != 0)
    throw ShapeError("moved particle blocks must match");
  double acc = 0.0;
  for (std::size_t k = 0; k < old_moved.size(); k += d) {
    acc += f.log_density(new_moved.subspan(k, d));
    acc -= f.log_density(old_moved.subspan(k, d));
  }
  return acc;
}

struct SamplerOptions {
  /// Proposals discarded before the first emitted state; 0 selects 50 N.
  std::size_t burn_in = 0;
  /// Proposals between emitted states; 0 selects N.
  std::size_t thin = 0;
};

/// Metropolis chain on the Boltzmann sphere targeting F^N. Proposals are collisions of a
/// uniform pair (d >= 2) or uniform rotations of a uniform triple (d = 1). If the initial
/// uniform draw puts particles where f vanishes, a repair phase first moves the chain into the
/// support by accepting only proposals that do not increase the number of such particles.
class ConditionedSampler {
 public:
  ConditionedSampler(DensityPtr f, int N, std::uint64_t seed, std::uint64_t chain = 0, SamplerOptions opt = {})
      : f_(std::move(f)), d_(f_->dim()), N_(N), rng_(StreamKey(seed, "conditioned_tensor", chain)) {
    if (d_ == 1 && N_ <= 3) throw ParameterError("d = 1 sampler needs N >= 4 for an ergodic move set");
    if (d_ >= 2 && N_ < 3) throw ParameterError("sampler needs N >= 3");
    burn_in_ = opt.burn_in ? opt.burn_in : std::size_t(50) * N_;
    thin_ = opt.thin ? opt.thin : std::size_t(N_);
    state_ = sample_uniform(SphereSpec::boltzmann(d_, N_), rng_);
    outside_ = 0;
    for (int i = 0; i < N_; ++i)
      if (std::isinf(f_->log_density(state_.particle(i)))) ++outside_;
    sigma_.resize(std::size_t(d_));
    old_.resize(std::size_t(3 * d_));
  }
  ConditionedSampler(const ConditionedLaw& law, std::uint64_t seed, std::uint64_t chain = 0, SamplerOptions opt = {})
      : ConditionedSampler(law.density(), law.N(), seed, chain, opt) {}

  const ParticleConfiguration& state() const { return state_; }
  std::uint64_t proposals() const { return proposals_; }
  std::uint64_t acceptances() const { return accepted_; }
  double acceptance_rate() const { return proposals_ ? double(accepted_) / double(proposals_) : 0.0; }
  bool in_support() const { return outside_ == 0; }

  /// One proposal; returns whether it was accepted.
  bool step() {
    auto v = state_.mutable_values();
    ++proposals_;
    std::size_t idx[3];
    std::size_t m = d_ == 1 ? 3 : 2;
    idx[0] = rng_.index(N_);
    idx[1] = rng_.index(N_ - 1);
    if (idx[1] >= idx[0]) ++idx[1];
    if (m == 3) {
      idx[2] = rng_.index(N_ - 2);
      const std::size_t lo = std::min(idx[0], idx[1]), hi = std::max(idx[0], idx[1]);
      if (idx[2] >= lo) ++idx[2];
      if (idx[2] >= hi) ++idx[2];
    }
    const auto d = std::size_t(d_);
    for (std::size_t k = 0; k < m; ++k)
      for (std::size_t a = 0; a < d; ++a) old_[k * d + a] = v[idx[k] * d + a];
    if (m == 3) {
      rotate_triple(v[idx[0]], v[idx[1]], v[idx[2]], 2.0 * std::numbers::pi * rng_.uniform());
    } else {
      rng_.unit_vector(sigma_);
      collide(v.subspan(idx[0] * d, d), v.subspan(idx[1] * d, d), sigma_);
    }
    double log_new = 0.0, log_old = 0.0;
    int out_new = 0, out_old = 0;
    for (std::size_t k = 0; k < m; ++k) {
      const double ln = f_->log_density(v.subspan(idx[k] * d, d));
      const double lo = f_->log_density(std::span<const double>(old_.data() + k * d, d));
      if (std::isinf(ln)) ++out_new; else log_new += ln;
      if (std::isinf(lo)) ++out_old; else log_old += lo;
    }
    bool accept;
    if (outside_ > 0) {
      accept = out_new <= out_old;
    } else {
      accept = out_new == 0 && (log_new >= log_old || rng_.uniform() < std::exp(log_new - log_old));
    }
    if (accept) {
      ++accepted_;
      outside_ += out_new - out_old;
    } else {
      for (std::size_t k = 0; k < m; ++k)
        for (std::size_t a = 0; a < d; ++a) v[idx[k] * d + a] = old_[k * d + a];
    }
    return accept;
  }

  /// Runs the repair phase and burn-in on the first call, then thin proposals; returns the state.
  const ParticleConfiguration& next() {
    if (!started_) {
      std::size_t guard = 0;
      while (outside_ > 0) {
        step();
        if (++guard > std::size_t(1000000) * N_) throw SupportError("sampler could not reach the support of f");
      }
      for (std::size_t s = 0; s < burn_in_; ++s) step();
      started_ = true;
    } else {
      for (std::size_t s = 0; s < thin_; ++s) step();
    }
    return state_;
  }

 private:
  DensityPtr f_;
  int d_, N_;
  Rng rng_;
  std::size_t burn_in_ = 0, thin_ = 0;
  ParticleConfiguration state_;
  int outside_ = 0;
  bool started_ = false;
  std::uint64_t proposals_ = 0, accepted_ = 0;
  std::vector<double> sigma_, old_;
};

/// Emitted states of one chain.
inline std::vector<ParticleConfiguration> sample_conditioned(const ConditionedLaw& law, std::uint64_t seed,
                                                             std::size_t count, SamplerOptions opt = {},
                                                             std::uint64_t chain = 0) {
  ConditionedSampler s(law, seed, chain, opt);
  std::vector<ParticleConfiguration> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(s.next());
  return out;
}

/// Single coordinates v_{1,1} of count emitted states, from `chains` independent chains run in
/// parallel and concatenated in chain order.
inline std::vector<double> sample_first_coordinate(const ConditionedLaw& law, std::uint64_t seed, std::size_t count,
                                                   SamplerOptions opt = {}, unsigned chains = 1,
                                                   unsigned jobs = 1) {
  if (chains == 0) throw ParameterError("at least one chain is required");
  std::vector<std::vector<double>> parts(chains);
  parallel_for(chains, jobs, [&](std::size_t c) {
    const std::size_t n = count / chains + (c < count % chains ? 1 : 0);
    ConditionedSampler s(law, seed, c, opt);
    parts[c].reserve(n);
    for (std::size_t i = 0; i < n; ++i) parts[c].push_back(s.next()[0]);
  });
  std::vector<double> out;
  out.reserve(count);
  for (auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

/// Restricts the d = 1 triple move to n equally spaced angles on the circle through
/// (sqrt(1.5), -sqrt(1.5), 0), solves for the stationary vector of the Metropolis kernel and
/// returns its max deviation from the normalized f^{(x)3} on that grid.
inline double detailed_balance_error(const BaseDensity& f, int n = 360) {
  if (f.dim() != 1) throw ParameterError("triple kernel oracle needs d = 1");
  if (n < 3) throw ParameterError("need at least three states");
  std::vector<std::array<double, 3>> states(static_cast<std::size_t>(n));
  Eigen::VectorXd target(n);
  for (int k = 0; k < n; ++k) {
    double a = std::sqrt(1.5), b = -std::sqrt(1.5), c = 0.0;
    rotate_triple(a, b, c, 2.0 * std::numbers::pi * k / n);
    states[std::size_t(k)] = {a, b, c};
    target(k) = std::exp(f.log_density(std::span<const double>(&a, 1)) + f.log_density(std::span<const double>(&b, 1)) +
                         f.log_density(std::span<const double>(&c, 1)));
  }
  if (!(target.sum() > 0.0)) throw SupportError("f vanishes on the whole circle");
  target /= target.sum();
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double lr = metropolis_log_ratio(f, states[std::size_t(i)], states[std::size_t(j)]);
      P(i, j) = std::min(1.0, std::exp(lr)) / n;
    }
    P(i, i) = 1.0 - P.row(i).sum();
  }
  Eigen::MatrixXd A = P.transpose() - Eigen::MatrixXd::Identity(n, n);
  A.row(n - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs(n - 1) = 1.0;
  const Eigen::VectorXd pi = A.fullPivLu().solve(rhs);
  return (pi - target).cwiseAbs().maxCoeff();
}

enum class MarginalMode { exact, asymptotic };

namespace detail {

inline double log_theta2(int d, int N, int ell) {
  const double n_rest = double(d) * (N - ell - 1), n_full = double(d) * (N - 1);
  return log_unit_sphere_area(n_rest) - log_unit_sphere_area(n_full) +
         0.5 * (n_rest - 2.0) * std::log(double(d) * (N - ell)) - 0.5 * (n_full - 2.0) * std::log(double(d) * N) +
         0.5 * d * ell * std::log(2.0 * std::numbers::pi * std::numbers::e);
}

}  // namespace detail

/// F^N_ell(V_ell). Exact mode (d = 1) evaluates
/// (f/gamma)^{(x)ell} Z'_{N-ell}(sqrt(dN - |V|^2), -sum V) / Z'_N(sqrt(dN), 0) gamma^N_ell, written as
/// f^{(x)ell}(V) s^{N-ell}(-sum V, N - |V|^2) / s^N(0, N) with s^M the lifted convolution power.
/// Asymptotic mode uses f^{(x)ell} theta_1 theta_2 with the error terms dropped.
inline double conditioned_marginal_density(const ConditionedLaw& law, int ell, std::span<const double> V,
                                           MarginalMode mode = MarginalMode::exact) {
  const int d = law.d(), N = law.N();
  if (ell < 1 || ell > N - 2) throw ParameterError("marginal needs 1 <= ell <= N-2");
  if (V.size() != std::size_t(d) * ell) throw ShapeError("V_ell must have d*ell entries");
  double q = 0.0;
  std::vector<double> sum(std::size_t(d), 0.0);
  for (int i = 0; i < ell; ++i)
    for (int a = 0; a < d; ++a) {
      const double x = V[std::size_t(i) * d + a];
      q += x * x;
      sum[std::size_t(a)] += x;
    }
  double p = 0.0;
  for (double x : sum) p += x * x;
  const double slack = double(d) * N - q - p / (N - ell);
  if (!(slack > 0.0)) return 0.0;
  double log_f = 0.0;
  for (int i = 0; i < ell; ++i) log_f += law.f().log_density(V.subspan(std::size_t(i) * d, std::size_t(d)));
  if (std::isinf(log_f)) return 0.0;
  if (mode == MarginalMode::asymptotic) {
    const double eps = law.f().moment(2) / d, Sigma2 = law.f().energy_variance();
    const double log_theta1 = -p / (2.0 * eps * (N - ell)) - std::pow(double(d) * ell - q, 2) / (2.0 * Sigma2 * (N - ell));
    return std::exp(log_f + log_theta1 + detail::log_theta2(d, N, ell));
  }
  if (d != 1) throw ParameterError("exact marginal densities are available for d = 1");
  if (law.is_standard_gaussian()) return UniformMarginal(d, N, ell).density(V);
  const auto& rest = law.partition(N - ell);
  const auto& full = law.partition(N);
  const double num = rest.lifted_density(-sum[0], double(N) - q);
  const double den = full.lifted_density(0.0, double(N));
  if (!(den > 0.0)) throw CoverageError("lifted density vanishes at the sphere");
  return std::exp(log_f) * num / den;
}

/// Exact one-particle marginal F^N_1 at many points (d = 1).
inline std::vector<double> conditioned_marginal_1(const ConditionedLaw& law, std::span<const double> v) {
  if (law.d() != 1) throw ParameterError("exact marginal densities are available for d = 1");
  const int N = law.N();
  std::vector<double> out(v.size(), 0.0);
  if (law.is_standard_gaussian()) {
    UniformMarginal m(1, N, 1);
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = m.density(v.subspan(i, 1));
    return out;
  }
  const auto& rest = law.partition(N - 1);
  const double den = law.partition(N).lifted_density(0.0, double(N));
  if (!(den > 0.0)) throw CoverageError("lifted density vanishes at the sphere");
  std::vector<double> z, u;
  std::vector<std::size_t> where;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double zi = -v[i], ui = N - v[i] * v[i];
    if (!(ui - zi * zi / (N - 1) > 0.0) || !rest.spectrum().covers(zi, ui)) continue;
    const double fv = law.f().density1(v[i]);
    if (fv == 0.0) continue;
    out[i] = fv;
    z.push_back(zi);
    u.push_back(ui);
    where.push_back(i);
  }
  const auto s = rest.spectrum().evaluate(z, u);
  std::vector<bool> filled(v.size(), false);
  for (std::size_t k = 0; k < where.size(); ++k) {
    out[where[k]] *= std::max(0.0, s[k]) / den;
    filled[where[k]] = true;
  }
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!filled[i]) out[i] = 0.0;
  return out;
}

/// Result of comparing two one-dimensional densities through their distribution functions.
struct CdfComparison {
  /// int |CDF_a - CDF_b|, the Kantorovich distance W1.
  double w1 = 0.0;
  /// int a - int b over the integration range.
  double mass_difference = 0.0;
};

/// W1 between densities a and b on [breakpoints.front(), breakpoints.back()] by the
/// one-dimensional Kantorovich identity. Both densities are sampled on composite
/// Gauss-Legendre panels; the CDF difference is integrated exactly within each panel.
inline CdfComparison w1_between_densities(const std::function<std::vector<double>(std::span<const double>)>& a,
                                          const std::function<std::vector<double>(std::span<const double>)>& b,
                                          const std::vector<double>& breakpoints, double max_panel,
                                          int order = 16) {
  if (breakpoints.size() < 2) throw ParameterError("need at least two breakpoints");
  const auto& rule = gauss_legendre(order);
  const auto& S = gauss_legendre_antiderivative(order);
  std::vector<double> x, h;
  for (std::size_t k = 0; k + 1 < breakpoints.size(); ++k) {
    const double lo = breakpoints[k], hi = breakpoints[k + 1];
    if (!(hi > lo)) continue;
    const auto panels = std::size_t(std::ceil((hi - lo) / max_panel));
    const double width = (hi - lo) / double(panels);
    for (std::size_t p = 0; p < panels; ++p) {
      const double left = lo + width * double(p);
      h.push_back(width);
      for (int i = 0; i < order; ++i) x.push_back(left + 0.5 * width * (rule.nodes[i] + 1.0));
    }
  }
  const auto fa = a(x), fb = b(x);
  CdfComparison out;
  double D0 = 0.0;
  for (std::size_t p = 0; p < h.size(); ++p) {
    const std::size_t base = p * std::size_t(order);
    const double half = 0.5 * h[p];
    for (int i = 0; i < order; ++i) {
      double Di = D0;
      for (int j = 0; j < order; ++j) Di += half * S[std::size_t(i) * order + j] * (fa[base + j] - fb[base + j]);
      out.w1 += half * rule.weights[i] * std::abs(Di);
    }
    for (int j = 0; j < order; ++j) D0 += half * rule.weights[j] * (fa[base + j] - fb[base + j]);
  }
  out.mass_difference = D0;
  return out;
}

struct ChaosQuadratureOptions {
  /// Composite Gauss-Legendre panels per unit length.
  double panels_per_unit = 24.0;
};

/// W1(F^N_1, f) in exact mode (d = 1).
inline CdfComparison w1_conditioned(const ConditionedLaw& law, const ChaosQuadratureOptions& q = {}) {
  if (law.d() != 1) throw ParameterError("W1 chaos experiment needs d = 1");
  auto bps = law.f().breakpoints();
  const double R = std::sqrt(double(law.N()));
  std::erase_if(bps, [&](double b) { return std::abs(b) > R; });
  if (bps.empty() || bps.front() > -R) bps.insert(bps.begin(), std::max(-R, law.f().coordinate_range(0).first));
  if (bps.back() < R) bps.push_back(std::min(R, law.f().coordinate_range(0).second));
  auto F = [&](std::span<const double> v) { return conditioned_marginal_1(law, v); };
  auto f = [&](std::span<const double> v) {
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = law.f().density1(v[i]);
    return out;
  };
  return w1_between_densities(F, f, bps, 1.0 / q.panels_per_unit);
}

struct W1RateOptions {
  LiftedPowerOptions lifted;
  ChaosQuadratureOptions quadrature;
  double slope_low = -0.65;
  double slope_high = -0.35;
  unsigned jobs = 1;
};

/// W1(F^N_1, f) for each N and the power-law fit of the sequence.
inline RateReport w1_rate_experiment(const DensityPtr& f, const std::vector<int>& Ns, const W1RateOptions& opt = {}) {
  if (f->dim() != 1) throw ParameterError("W1 rate experiment needs d = 1");
  if (Ns.size() < 2) throw ParameterError("rate experiment needs at least two N");
  std::vector<RatePoint> rows(Ns.size());
  parallel_for(Ns.size(), opt.jobs, [&](std::size_t i) {
    ConditionedLaw law(f, Ns[i], opt.lifted);
    rows[i] = {double(Ns[i]), w1_conditioned(law, opt.quadrature).w1, 0.0};
  });
  return make_rate_report("w1", std::move(rows), opt.slope_low, opt.slope_high);
}

/// H(F^N | gamma^N) / N = int log(f/gamma) dF^N_1 - (1/N) log Z'_N(f; sqrt(N), 0), d = 1.
/// Returns +infinity when F^N_1 charges a region where f vanishes.
inline double entropy_per_particle(const ConditionedLaw& law, const ChaosQuadratureOptions& q = {}) {
  if (law.d() != 1) throw ParameterError("entropy per particle needs d = 1");
  if (law.is_standard_gaussian()) return 0.0;
  auto bps = law.f().breakpoints();
  const double R = std::sqrt(double(law.N()));
  std::erase_if(bps, [&](double b) { return std::abs(b) > R; });
  if (bps.empty() || bps.front() > -R) bps.insert(bps.begin(), std::max(-R, law.f().coordinate_range(0).first));
  if (bps.back() < R) bps.push_back(std::min(R, law.f().coordinate_range(0).second));
  auto rule = composite_gauss_legendre(bps, 1.0 / q.panels_per_unit, 16);
  const auto F = conditioned_marginal_1(law, rule.nodes);
  const double log_norm = 0.5 * std::log(2.0 * std::numbers::pi);
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    if (F[i] <= 0.0) continue;
    const double v = rule.nodes[i];
    const double lf = law.f().log_density(std::span<const double>(&v, 1));
    if (std::isinf(lf)) return std::numeric_limits<double>::infinity();
    acc += rule.weights[i] * F[i] * (lf + log_norm + 0.5 * v * v);
  }
  return acc - law.log_z_prime() / law.N();
}

struct EntropyRateOptions {
  LiftedPowerOptions lifted;
  ChaosQuadratureOptions quadrature;
  double slope_high = -0.35;
  unsigned jobs = 1;
};

struct EntropyRateReport {
  RateReport rate;
  /// Entropy per particle for each N (rows of `rate` hold the distance to the limit).
  std::vector<double> values;
  double limit = 0.0;
};

/// |H(F^N | gamma^N)/N - H(f | gamma)| over N with a power-law fit; `limit` is H(f | gamma).
inline EntropyRateReport entropy_rate_experiment(const DensityPtr& f, const std::vector<int>& Ns, double limit,
                                                 const EntropyRateOptions& opt = {}) {
  if (Ns.size() < 2) throw ParameterError("rate experiment needs at least two N");
  EntropyRateReport out;
  out.limit = limit;
  out.values.resize(Ns.size());
  std::vector<RatePoint> rows(Ns.size());
  parallel_for(Ns.size(), opt.jobs, [&](std::size_t i) {
    ConditionedLaw law(f, Ns[i], opt.lifted);
    out.values[i] = entropy_per_particle(law, opt.quadrature);
    rows[i] = {double(Ns[i]), std::abs(out.values[i] - limit), 0.0};
  });
  out.rate = make_rate_report("entropy_gap", std::move(rows), -std::numeric_limits<double>::infinity(), opt.slope_high);
  return out;
}

/// H(f | gamma) for the registry densities in d = 1 by quadrature.
inline double relative_entropy_1d(const BaseDensity& f) {
  if (f.dim() != 1) throw ParameterError("relative entropy by quadrature needs d = 1");
  const double log_norm = 0.5 * std::log(2.0 * std::numbers::pi);
  return integrate_pieces(
      [&](double v) {
        const double lf = f.log_density(std::span<const double>(&v, 1));
        if (std::isinf(lf)) return 0.0;
        return std::exp(lf) * (lf + log_norm + 0.5 * v * v);
      },
      f.breakpoints(), 1e-12);
}

}  // namespace kacsphere

#endif

#ifndef KACSPHERE_KAC_DSMC_HPP
#define KACSPHERE_KAC_DSMC_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <istream>
#include <memory>
#include <numbers>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "chaos_metrics.hpp"
#include "conditioned_tensor.hpp"
#include "core/error.hpp"
#include "core/parallel.hpp"
#include "core/random.hpp"
#include "core/special.hpp"
#include "core/statistics.hpp"
#include "density.hpp"
#include "sphere_geometry.hpp"
#include "uniform_law.hpp"

namespace kacsphere {

/// Maxwellian collision kernel B = b(cos theta) with total angular mass beta.
class CollisionKernel {
 public:
  /// b constant on S^{d-1} with integral beta.
  static CollisionKernel uniform(int d, double beta = 1.0) {
    CollisionKernel k(d, beta);
    return k;
  }

  /// b(c) proportional to (1 - c)^{-alpha} on c <= 1 - delta and 0 above, with the total
  /// mass beta supplied by the caller. Deviation angles are drawn from a tabulated CDF.
  static CollisionKernel truncated_singular(int d, double alpha, double delta, double beta) {
    if (!(alpha >= 0.0) || !(delta > 0.0) || !(delta < 2.0)) throw ParameterError("need alpha >= 0, 0 < delta < 2");
    CollisionKernel k(d, beta);
    const double theta_min = std::acos(1.0 - delta);
    const std::size_t n = 4096;
    k.theta_.resize(n + 1);
    k.cdf_.resize(n + 1);
    auto weight = [&](double th) {
      return std::pow(1.0 - std::cos(th), -alpha) * std::pow(std::sin(th), double(d - 2));
    };
    const double h = (std::numbers::pi - theta_min) / double(n);
    k.theta_[0] = theta_min;
    k.cdf_[0] = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
      const double a = theta_min + h * double(i - 1), b = theta_min + h * double(i);
      const double m = 0.5 * (a + b), r = 0.5 * h / std::sqrt(3.0);
      k.theta_[i] = b;
      k.cdf_[i] = k.cdf_[i - 1] + 0.5 * h * (weight(m - r) + weight(m + r));
    }
    const double total = k.cdf_.back();
    for (double& c : k.cdf_) c /= total;
    return k;
  }

  int d() const { return d_; }
  double beta() const { return beta_; }
  bool is_uniform() const { return cdf_.empty(); }

  /// Total collision rate (N - 1) beta / 2 of an N-particle system.
  double total_rate(int N) const { return 0.5 * double(N - 1) * beta_; }
  /// Mean time between collisions of a tagged particle, N / ((N - 1) beta).
  double mean_free_time(int N) const { return double(N) / (double(N - 1) * beta_); }

  /// Draws sigma given the relative velocity u = v_i - v_j.
  void sample_sigma(Rng& rng, std::span<const double> u, std::span<double> sigma) const {
    if (is_uniform()) {
      rng.unit_vector(sigma);
      return;
    }
    double un = 0.0;
    for (double x : u) un += x * x;
    un = std::sqrt(un);
    if (un == 0.0) {
      rng.unit_vector(sigma);
      return;
    }
    const double c = std::cos(sample_theta(rng));
    const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
    double n2 = 0.0;
    do {
      double dot = 0.0;
      for (std::size_t a = 0; a < sigma.size(); ++a) {
        sigma[a] = rng.normal();
        dot += sigma[a] * u[a] / un;
      }
      n2 = 0.0;
      for (std::size_t a = 0; a < sigma.size(); ++a) {
        sigma[a] -= dot * u[a] / un;
        n2 += sigma[a] * sigma[a];
      }
    } while (n2 < 1e-24);
    const double inv = 1.0 / std::sqrt(n2);
    for (std::size_t a = 0; a < sigma.size(); ++a) sigma[a] = c * u[a] / un + s * sigma[a] * inv;
  }

 private:
  CollisionKernel(int d, double beta) : d_(d), beta_(beta) {
    if (d < 2) throw ParameterError("collisions need d >= 2; in d = 1 they can only swap velocities");
    if (!(beta > 0.0) || !std::isfinite(beta)) throw ParameterError("beta must be positive and finite");
  }

  double sample_theta(Rng& rng) const {
    const double u = rng.uniform();
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    const std::size_t i = std::clamp<std::size_t>(std::size_t(it - cdf_.begin()), 1, cdf_.size() - 1);
    const double w = (u - cdf_[i - 1]) / std::max(cdf_[i] - cdf_[i - 1], 1e-300);
    return theta_[i - 1] + std::clamp(w, 0.0, 1.0) * (theta_[i] - theta_[i - 1]);
  }

  int d_;
  double beta_;
  std::vector<double> theta_, cdf_;
};

struct SimulationState {
  ParticleConfiguration configuration;
  double time = 0.0;
  std::uint64_t collisions = 0;
  Rng rng;

  SimulationState(ParticleConfiguration c, Rng r) : configuration(std::move(c)), rng(std::move(r)) {}
  SimulationState(ParticleConfiguration c, std::uint64_t seed, std::uint64_t replica = 0)
      : configuration(std::move(c)), rng(StreamKey(seed, "kac_dsmc", replica)) {}
};

/// Waits for the next event of the clock and applies one collision to a uniform pair.
inline void step(SimulationState& s, const CollisionKernel& k) {
  const int d = s.configuration.d(), N = s.configuration.N();
  if (d != k.d()) throw ShapeError("kernel and configuration dimensions differ");
  if (N < 2) throw ParameterError("collisions need N >= 2");
  s.time += s.rng.exponential(k.total_rate(N));
  const auto i = std::size_t(s.rng.index(std::uint64_t(N)));
  auto j = std::size_t(s.rng.index(std::uint64_t(N - 1)));
  if (j >= i) ++j;
  auto v = s.configuration.mutable_values();
  auto vi = v.subspan(i * std::size_t(d), std::size_t(d)), vj = v.subspan(j * std::size_t(d), std::size_t(d));
  double u[8], sigma[8];
  std::vector<double> ub, sb;
  std::span<double> us(u, std::size_t(d)), ss(sigma, std::size_t(d));
  if (d > 8) {
    ub.resize(std::size_t(d));
    sb.resize(std::size_t(d));
    us = ub;
    ss = sb;
  }
  for (int a = 0; a < d; ++a) us[std::size_t(a)] = vi[std::size_t(a)] - vj[std::size_t(a)];
  k.sample_sigma(s.rng, us, ss);
  collide(vi, vj, ss);
  ++s.collisions;
}

/// Runs the clock up to time t. The pending event beyond t is dropped; by memorylessness the
/// next call draws a fresh waiting time from t.
inline void advance_to(SimulationState& s, const CollisionKernel& k, double t) {
  const double rate = k.total_rate(s.configuration.N());
  for (;;) {
    const Rng::State saved = s.rng.state();
    const double dt = s.rng.exponential(rate);
    if (s.time + dt > t) {
      s.time = t;
      return;
    }
    s.rng.restore(saved);
    step(s, k);
  }
}

inline void write_snapshot(std::ostream& os, const SimulationState& s) {
  const auto st = s.rng.state();
  const std::int32_t d = s.configuration.d(), N = s.configuration.N();
  auto put = [&](const auto& x) { os.write(reinterpret_cast<const char*>(&x), sizeof(x)); };
  os.write("KACSNAP1", 8);
  put(d);
  put(N);
  put(s.time);
  put(s.collisions);
  put(st.key);
  put(st.counter);
  const std::uint32_t idx = st.index, spare_flag = st.has_spare ? 1u : 0u;
  put(idx);
  put(spare_flag);
  put(st.spare);
  put(s.configuration.spec().r);
  for (double z : s.configuration.spec().z) put(z);
  for (double x : s.configuration.values()) put(x);
  if (!os) throw Error("snapshot write failed");
}

inline SimulationState read_snapshot(std::istream& is) {
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, "KACSNAP1", 8) != 0) throw ParameterError("not a snapshot file");
  auto get = [&](auto& x) {
    is.read(reinterpret_cast<char*>(&x), sizeof(x));
    if (!is) throw ParameterError("truncated snapshot");
  };
  std::int32_t d = 0, N = 0;
  double t = 0.0, spare = 0.0;
  std::uint64_t collisions = 0, key = 0, counter = 0;
  std::uint32_t idx = 0, spare_flag = 0;
  get(d);
  get(N);
  get(t);
  get(collisions);
  get(key);
  get(counter);
  get(idx);
  get(spare_flag);
  get(spare);
  if (d < 1 || N < 1 || d > 64 || N > (1 << 26)) throw ParameterError("snapshot header out of range");
  double r = 0.0;
  get(r);
  std::vector<double> z(static_cast<std::size_t>(d)), v(static_cast<std::size_t>(d) * std::size_t(N));
  for (double& x : z) get(x);
  for (double& x : v) get(x);
  SphereSpec spec(d, N, r, std::move(z));
  SimulationState s(ParticleConfiguration(spec, std::move(v)), Rng(StreamKey(0, "kac_dsmc")));
  s.rng.restore({key, counter, idx, spare_flag != 0, spare});
  s.time = t;
  s.collisions = collisions;
  return s;
}

/// Scalar observable of one replica's configuration.
struct Observable {
  std::string name;
  std::function<double(const ParticleConfiguration&)> fn;
};

inline Observable moment_observable(double k) {
  return {"E|v1|^" + std::to_string(int(k)), [k](const ParticleConfiguration& c) {
            double r2 = 0.0;
            for (double x : c.particle(0)) r2 += x * x;
            return std::pow(r2, 0.5 * k);
          }};
}

/// Deterministic initial condition for a replica.
using InitialSampler = std::function<ParticleConfiguration(std::uint64_t replica)>;

inline InitialSampler initial_uniform(int d, int N, std::uint64_t seed) {
  return [d, N, seed](std::uint64_t r) {
    Rng rng(StreamKey(seed, "kac_dsmc.initial", r));
    return sample_uniform(SphereSpec::boltzmann(d, N), rng);
  };
}

/// Draws from F^N with the Metropolis sampler, one chain per replica.
inline InitialSampler initial_conditioned(DensityPtr f, int N, std::uint64_t seed, SamplerOptions opt = {}) {
  return [f, N, seed, opt](std::uint64_t r) {
    ConditionedSampler s(f, N, seed, r, opt);
    return s.next();
  };
}

/// i.i.d. draws from f projected onto the Boltzmann sphere.
inline InitialSampler initial_projected(DensityPtr f, int N, std::uint64_t seed) {
  return [f, N, seed](std::uint64_t r) {
    Rng rng(StreamKey(seed, "kac_dsmc.initial", r));
    const int d = f->dim();
    std::vector<double> w(std::size_t(d) * std::size_t(N));
    for (int i = 0; i < N; ++i) f->sample(rng, std::span<double>(w).subspan(std::size_t(i * d), std::size_t(d)));
    return project_to_sphere(w, SphereSpec::boltzmann(d, N));
  };
}

struct DsmcOptions {
  double t_end = 1.0;
  /// Grid 0, t_end / intervals, ..., t_end.
  std::size_t intervals = 10;
  std::size_t replicas = 100;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  /// k-NN relative entropy of the pooled v_1 samples on every grid point.
  bool entropy = true;
  int entropy_k = 4;
};

struct SeriesRow {
  double t = 0.0;
  std::string observable;
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t replicas = 0;
};

struct DsmcResult {
  std::vector<double> times;
  std::vector<SeriesRow> rows;
  std::uint64_t collisions = 0;

  /// Rows of one observable in time order.
  std::vector<SeriesRow> series(const std::string& name) const {
    std::vector<SeriesRow> out;
    for (const auto& r : rows)
      if (r.observable == name) out.push_back(r);
    return out;
  }
};

/// Evolves independent replicas and aggregates observables on a fixed time grid. Each replica
/// draws from its own stream keyed by (seed, replica); aggregation runs in replica order.
inline DsmcResult run(const InitialSampler& initial, const CollisionKernel& kernel,
                      const std::vector<Observable>& observables, const DsmcOptions& opt) {
  if (kernel.d() != 2 && kernel.d() != 3) throw ParameterError("run supports d in {2, 3}");
  if (opt.replicas == 0 || opt.intervals == 0 || !(opt.t_end > 0.0)) throw ParameterError("invalid run options");
  const std::size_t T = opt.intervals + 1, R = opt.replicas, O = observables.size();
  const int d = kernel.d();
  DsmcResult out;
  for (std::size_t g = 0; g < T; ++g) out.times.push_back(opt.t_end * double(g) / double(opt.intervals));
  std::vector<double> vals(R * T * O), v1(R * T * std::size_t(d));
  std::vector<std::uint64_t> counts(R);
  parallel_for(R, opt.jobs, [&](std::size_t r) {
    SimulationState s(initial(r), opt.seed, r);
    if (s.configuration.d() != d) throw ShapeError("initial sampler dimension differs from kernel");
    for (std::size_t g = 0; g < T; ++g) {
      advance_to(s, kernel, out.times[g]);
      for (std::size_t o = 0; o < O; ++o) vals[(r * T + g) * O + o] = observables[o].fn(s.configuration);
      const auto p = s.configuration.particle(0);
      std::copy(p.begin(), p.end(), v1.begin() + std::ptrdiff_t((r * T + g) * std::size_t(d)));
    }
    counts[r] = s.collisions;
  });
  for (auto c : counts) out.collisions += c;
  for (std::size_t g = 0; g < T; ++g) {
    for (std::size_t o = 0; o < O; ++o) {
      std::vector<double> xs(R);
      for (std::size_t r = 0; r < R; ++r) xs[r] = vals[(r * T + g) * O + o];
      const auto e = mean_estimate(xs);
      out.rows.push_back({out.times[g], observables[o].name, e.value, e.std_error, R});
    }
    if (opt.entropy && R >= std::size_t(opt.entropy_k + 2)) {
      std::vector<double> pts;
      pts.reserve(R * std::size_t(d));
      for (std::size_t r = 0; r < R; ++r)
        for (int a = 0; a < d; ++a) pts.push_back(v1[(r * T + g) * std::size_t(d) + std::size_t(a)]);
      EntropyOptions eo;
      eo.k = opt.entropy_k;
      eo.jitter_seed = opt.seed;
      const auto h = relative_entropy_vs_gaussian(EmpiricalMeasure(std::move(pts), d), eo);
      out.rows.push_back({out.times[g], "H(v1|gamma)", h.value, h.std_error, R});
    }
  }
  return out;
}

struct EquilibriumCheck {
  KsResult ks;
  bool passed = false;
};

/// KS comparison of pooled v_{1,1} samples with the coordinate marginal of the uniform law on
/// the Boltzmann sphere, at level 0.01.
inline EquilibriumCheck equilibrium_crosscheck(int N, int d, std::vector<double> samples) {
  if (samples.size() < 10000) throw CapacityError("equilibrium check needs at least 1e4 samples");
  EquilibriumCheck c;
  c.ks = ks_test(std::move(samples), [d, N](double x) { return coordinate_marginal_cdf(d, N, x); });
  c.passed = c.ks.passes(0.01);
  return c;
}

struct EquilibriumSampling {
  double t_burn = 20.0;
  /// Time between recorded samples within one replica.
  double spacing = 10.0;
  std::size_t per_replica = 10;
  std::size_t replicas = 10000;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
};

/// Pooled v_{1,1} after burn-in, recorded per_replica times in each replica.
inline std::vector<double> sample_equilibrium_coordinate(const InitialSampler& initial, const CollisionKernel& kernel,
                                                         const EquilibriumSampling& opt) {
  std::vector<double> out(opt.replicas * opt.per_replica);
  parallel_for(opt.replicas, opt.jobs, [&](std::size_t r) {
    SimulationState s(initial(r), opt.seed, r);
    for (std::size_t m = 0; m < opt.per_replica; ++m) {
      advance_to(s, kernel, opt.t_burn + opt.spacing * double(m));
      out[r * opt.per_replica + m] = s.configuration.particle(0)[0];
    }
  });
  return out;
}

}  // namespace kacsphere

#endif

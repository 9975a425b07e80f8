#ifndef KACSPHERE_SPHERE_GEOMETRY_HPP
#define KACSPHERE_SPHERE_GEOMETRY_HPP

#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "core/error.hpp"
#include "core/special.hpp"
#include "core/statistics.hpp"

namespace kacsphere {

/// Momentum-energy sphere S^N(r, z) = { V in R^{dN} : |V|^2 = r^2, sum_i v_i = z }.
struct SphereSpec {
  int d = 1;
  int N = 2;
  double r = 0.0;
  std::vector<double> z;

  SphereSpec() = default;
  SphereSpec(int d_, int N_, double r_, std::vector<double> z_) : d(d_), N(N_), r(r_), z(std::move(z_)) {
    validate();
  }

  /// The Boltzmann sphere r = sqrt(dN), z = 0.
  static SphereSpec boltzmann(int d, int N) {
    if (d < 1 || N < 2) throw ParameterError("Boltzmann sphere needs d >= 1 and N >= 2");
    return SphereSpec(d, N, std::sqrt(double(d) * N), std::vector<double>(d, 0.0));
  }

  void validate() const {
    if (d < 1) throw ParameterError("dimension d must be >= 1");
    if (N < 2) throw ParameterError("particle number N must be >= 2");
    if (!(r >= 0.0) || !std::isfinite(r)) throw ParameterError("radius must be finite and non-negative");
    if (z.size() != std::size_t(d)) throw ShapeError("momentum vector must have d components");
  }

  int dim() const { return d * N; }
  double z_norm2() const {
    double s = 0.0;
    for (double x : z) s += x * x;
    return s;
  }
  /// Squared radius of the sphere inside the affine momentum plane.
  double inner_radius2() const { return r * r - z_norm2() / N; }
  bool nonempty() const { return inner_radius2() >= 0.0; }
  bool is_boltzmann() const {
    return z_norm2() == 0.0 && std::abs(r * r - double(d) * N) <= 1e-12 * d * N;
  }
};

/// Flat array of N particle velocities in R^d with particle-major layout
/// (index i*d + alpha). Tracks whether it has been certified to lie on its sphere.
class ParticleConfiguration {
 public:
  ParticleConfiguration() = default;
  ParticleConfiguration(SphereSpec spec, std::vector<double> values) : spec_(std::move(spec)), v_(std::move(values)) {
    spec_.validate();
    if (v_.size() != std::size_t(spec_.dim())) throw ShapeError("configuration size does not equal d*N");
  }

  const SphereSpec& spec() const { return spec_; }
  int d() const { return spec_.d; }
  int N() const { return spec_.N; }
  std::size_t size() const { return v_.size(); }

  std::span<const double> values() const { return v_; }
  std::span<double> mutable_values() {
    certified_ = false;
    return v_;
  }
  /// Raw write access that keeps the certificate; for moves known to preserve the invariants.
  std::span<double> values_unchecked() { return v_; }
  double operator[](std::size_t k) const { return v_[k]; }

  std::span<const double> particle(int i) const { return {v_.data() + std::size_t(i) * d(), std::size_t(d())}; }

  std::vector<double> momentum() const {
    std::vector<double> m(d(), 0.0);
    for (int i = 0; i < N(); ++i)
      for (int a = 0; a < d(); ++a) m[a] += v_[std::size_t(i) * d() + a];
    return m;
  }
  double energy() const {
    double e = 0.0;
    for (double x : v_) e += x * x;
    return e;
  }
  double momentum_residual() const {
    auto m = momentum();
    double s = 0.0;
    for (int a = 0; a < d(); ++a) s += (m[a] - spec_.z[a]) * (m[a] - spec_.z[a]);
    return std::sqrt(s);
  }
  double energy_residual() const { return std::abs(energy() - spec_.r * spec_.r); }

  /// Tolerance of the on-sphere invariants.
  double tolerance() const { return 1e-9 * double(d()) * double(N()); }
  bool on_sphere() const { return momentum_residual() <= tolerance() && energy_residual() <= tolerance(); }

  bool certified() const { return certified_; }
  /// Checks the invariants and marks the configuration as certified.
  void certify() {
    if (!on_sphere())
      throw SupportError("configuration violates sphere invariants (momentum residual " +
                         std::to_string(momentum_residual()) + ", energy residual " +
                         std::to_string(energy_residual()) + ")");
    certified_ = true;
  }

  /// First ell particles V_ell, flattened.
  std::vector<double> prefix(int ell) const {
    if (ell < 0 || ell > N()) throw ParameterError("prefix length out of range");
    return {v_.begin(), v_.begin() + std::ptrdiff_t(ell) * d()};
  }

 private:
  SphereSpec spec_;
  std::vector<double> v_;
  bool certified_ = false;
};

/// Surface measure |S^N(r, z)| = |S^{d(N-1)-1}| (r^2 - |z|^2/N)_+^{(d(N-1)-1)/2}, in log form.
inline double log_sphere_measure(const SphereSpec& spec) {
  spec.validate();
  const double w = spec.inner_radius2();
  const double n = double(spec.d) * (spec.N - 1);
  if (w < 0.0) return neg_infinity;
  if (w == 0.0) return n - 1.0 > 0.0 ? neg_infinity : log_unit_sphere_area(n);
  return log_unit_sphere_area(n) + 0.5 * (n - 1.0) * std::log(w);
}

inline double sphere_measure(const SphereSpec& spec) { return std::exp(log_sphere_measure(spec)); }

namespace detail {
inline void check_flat(std::span<const double> V, int d, int N) {
  if (d < 1 || N < 1) throw ParameterError("invalid (d, N)");
  if (V.size() != std::size_t(d) * std::size_t(N)) throw ShapeError("array size does not equal d*N");
}
}  // namespace detail

/// Orthogonal change of variables U = M_N V applied componentwise:
/// u_k = (v_1 + ... + v_k - k v_{k+1}) / sqrt(k(k+1)) for k < N and u_N = (v_1 + ... + v_N)/sqrt(N).
inline std::vector<double> helmert_forward(std::span<const double> V, int d, int N) {
  detail::check_flat(V, d, N);
  std::vector<double> U(V.size());
  std::vector<double> S(d, 0.0);
  for (int k = 1; k <= N; ++k) {
    for (int a = 0; a < d; ++a) S[a] += V[std::size_t(k - 1) * d + a];
    if (k < N) {
      const double c = 1.0 / std::sqrt(double(k) * (k + 1));
      for (int a = 0; a < d; ++a)
        U[std::size_t(k - 1) * d + a] = c * (S[a] - double(k) * V[std::size_t(k) * d + a]);
    }
  }
  for (int a = 0; a < d; ++a) U[std::size_t(N - 1) * d + a] = S[a] / std::sqrt(double(N));
  return U;
}

/// Inverse of helmert_forward, V = M_N^T U.
inline std::vector<double> helmert_inverse(std::span<const double> U, int d, int N) {
  detail::check_flat(U, d, N);
  std::vector<double> V(U.size());
  std::vector<double> tail(d, 0.0);  // sum_{k >= i} u_k / sqrt(k(k+1))
  for (int i = N; i >= 1; --i) {
    if (i <= N - 1) {
      const double c = 1.0 / std::sqrt(double(i) * (i + 1));
      for (int a = 0; a < d; ++a) tail[a] += c * U[std::size_t(i - 1) * d + a];
    }
    for (int a = 0; a < d; ++a) {
      double v = U[std::size_t(N - 1) * d + a] / std::sqrt(double(N)) + tail[a];
      if (i >= 2) v -= double(i - 1) / std::sqrt(double(i - 1) * i) * U[std::size_t(i - 2) * d + a];
      V[std::size_t(i - 1) * d + a] = v;
    }
  }
  return V;
}

/// The N x N matrix M_N acting on one velocity component (row k gives u_k).
inline Eigen::MatrixXd helmert_matrix(int N) {
  if (N < 1) throw ParameterError("N must be >= 1");
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(N, N);
  for (int k = 1; k < N; ++k) {
    const double c = 1.0 / std::sqrt(double(k) * (k + 1));
    for (int i = 0; i < k; ++i) M(k - 1, i) = c;
    M(k - 1, k) = -double(k) * c;
  }
  for (int i = 0; i < N; ++i) M(N - 1, i) = 1.0 / std::sqrt(double(N));
  return M;
}

/// Orthogonal projection of W onto the zero-momentum hyperplane.
inline std::vector<double> project_to_hyperplane(std::span<const double> W, int d, int N) {
  detail::check_flat(W, d, N);
  std::vector<double> mean(d, 0.0);
  for (int i = 0; i < N; ++i)
    for (int a = 0; a < d; ++a) mean[a] += W[std::size_t(i) * d + a];
  for (double& m : mean) m /= N;
  std::vector<double> out(W.begin(), W.end());
  for (int i = 0; i < N; ++i)
    for (int a = 0; a < d; ++a) out[std::size_t(i) * d + a] -= mean[a];
  return out;
}

/// Radial projection P_S W = r P_h W / |P_h W| onto a sphere with z = 0.
inline ParticleConfiguration project_to_sphere(std::span<const double> W, const SphereSpec& spec) {
  spec.validate();
  if (spec.z_norm2() != 0.0) throw ParameterError("projection is defined for zero-momentum spheres only");
  auto P = project_to_hyperplane(W, spec.d, spec.N);
  double n2 = 0.0, w2 = 0.0;
  for (double x : P) n2 += x * x;
  for (double x : W) w2 += x * x;
  if (!(n2 > 1e-24 * (w2 + 1.0)))
    throw DegenerateProjectionError("input is constant across particles; projection undefined");
  const double scale = spec.r / std::sqrt(n2);
  for (double& x : P) x *= scale;
  ParticleConfiguration c(spec, std::move(P));
  c.certify();
  return c;
}

/// Post-collisional velocities: v_i* = (v_i + v_j)/2 + |v_i - v_j| sigma / 2,
/// v_j* = (v_i + v_j)/2 - |v_i - v_j| sigma / 2, with sigma a unit vector. Updates in place.
inline void collide(std::span<double> vi, std::span<double> vj, std::span<const double> sigma) {
  if (vi.size() != vj.size() || vi.size() != sigma.size()) throw ShapeError("collision operands differ in size");
  double rel2 = 0.0;
  for (std::size_t a = 0; a < vi.size(); ++a) rel2 += (vi[a] - vj[a]) * (vi[a] - vj[a]);
  const double half = 0.5 * std::sqrt(rel2);
  for (std::size_t a = 0; a < vi.size(); ++a) {
    const double mid = 0.5 * (vi[a] + vj[a]);
    vi[a] = mid + half * sigma[a];
    vj[a] = mid - half * sigma[a];
  }
}

/// Rotates three scalar velocities by angle phi on their momentum-energy circle
/// (d = 1): the component orthogonal to (1, 1, 1) is rotated, sum and energy are kept.
inline void rotate_triple(double& a, double& b, double& c, double phi) {
  const double m = (a + b + c) / 3.0;
  const double x = (a - b) / std::numbers::sqrt2;
  const double y = (a + b - 2.0 * c) / std::sqrt(6.0);
  const double cs = std::cos(phi), sn = std::sin(phi);
  const double xr = cs * x - sn * y, yr = sn * x + cs * y;
  a = m + xr / std::numbers::sqrt2 + yr / std::sqrt(6.0);
  b = m - xr / std::numbers::sqrt2 + yr / std::sqrt(6.0);
  c = m - 2.0 * yr / std::sqrt(6.0);
}

/// Scalar field with gradient: returns F(V) and writes dF/dV into grad (size dN).
using ScalarField = std::function<double(std::span<const double> V, std::span<double> grad)>;
/// Vector field with Jacobian: writes Phi(V) (size dN) and J (row-major, J[a*dN+b] = dPhi_a/dV_b).
using VectorField = std::function<void(std::span<const double> V, std::span<double> value, std::span<double> jac)>;

/// Tangential gradient on the Boltzmann sphere:
/// grad_S F = grad F - (1/N) sum_alpha (sum_i d_{i alpha} F) e_alpha - (V . grad F) V / |V|^2.
inline std::vector<double> tangent_gradient_from(std::span<const double> V, std::span<const double> grad, int d,
                                                 int N) {
  detail::check_flat(V, d, N);
  std::vector<double> g(grad.begin(), grad.end());
  std::vector<double> colsum(d, 0.0);
  double vg = 0.0, vv = 0.0;
  for (int i = 0; i < N; ++i)
    for (int a = 0; a < d; ++a) {
      const std::size_t k = std::size_t(i) * d + a;
      colsum[a] += grad[k];
      vg += V[k] * grad[k];
      vv += V[k] * V[k];
    }
  if (!(vv > 0.0)) throw SupportError("tangent gradient undefined at V = 0");
  for (int i = 0; i < N; ++i)
    for (int a = 0; a < d; ++a) {
      const std::size_t k = std::size_t(i) * d + a;
      g[k] -= colsum[a] / N + vg * V[k] / vv;
    }
  return g;
}

inline std::vector<double> tangent_gradient(const ScalarField& F, const ParticleConfiguration& V) {
  std::vector<double> grad(V.size());
  F(V.values(), grad);
  return tangent_gradient_from(V.values(), grad, V.d(), V.N());
}

/// Surface divergence on the Boltzmann sphere:
/// Div_S Phi = Div Phi - (1/N) sum_{j,beta} sum_i d_{i beta} Phi_{j beta} - sum_{j,beta} (V . grad Phi_{j beta}) v_{j beta} / |V|^2.
inline double surface_divergence_from(std::span<const double> V, std::span<const double> jac, int d, int N) {
  detail::check_flat(V, d, N);
  const std::size_t n = V.size();
  if (jac.size() != n * n) throw ShapeError("Jacobian must be (dN)^2");
  double vv = 0.0;
  for (double x : V) vv += x * x;
  if (!(vv > 0.0)) throw SupportError("surface divergence undefined at V = 0");
  double div = 0.0, mom = 0.0, rad = 0.0;
  for (int j = 0; j < N; ++j)
    for (int b = 0; b < d; ++b) {
      const std::size_t row = std::size_t(j) * d + b;
      div += jac[row * n + row];
      double vgrad = 0.0;
      for (int i = 0; i < N; ++i) mom += jac[row * n + std::size_t(i) * d + b];
      for (std::size_t c = 0; c < n; ++c) vgrad += V[c] * jac[row * n + c];
      rad += vgrad * V[row];
    }
  return div - mom / N - rad / vv;
}

inline double surface_divergence(const VectorField& Phi, const ParticleConfiguration& V) {
  const std::size_t n = V.size();
  std::vector<double> value(n), jac(n * n);
  Phi(V.values(), value, jac);
  return surface_divergence_from(V.values(), jac, V.d(), V.N());
}

/// Per-sample integrand of the integration by parts identity on the Boltzmann sphere,
/// grad_S F . Phi + F Div_S Phi - ((d(N-1)-1)/(dN)) F Phi . V.
inline double ipp_integrand(const ScalarField& F, const VectorField& Phi, const ParticleConfiguration& V) {
  const int d = V.d(), N = V.N();
  const std::size_t n = V.size();
  std::vector<double> grad(n), value(n), jac(n * n);
  const double f = F(V.values(), grad);
  Phi(V.values(), value, jac);
  const auto gs = tangent_gradient_from(V.values(), grad, d, N);
  const double div = surface_divergence_from(V.values(), jac, d, N);
  double gphi = 0.0, phiv = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    gphi += gs[k] * value[k];
    phiv += value[k] * V[k];
  }
  return gphi + f * div - (double(d) * (N - 1) - 1.0) / (double(d) * N) * f * phiv;
}

/// Monte Carlo mean of the integration by parts integrand with its standard error.
inline Estimate ipp_residual(const ScalarField& F, const VectorField& Phi,
                             std::span<const ParticleConfiguration> samples) {
  if (samples.empty()) throw ParameterError("IPP residual needs samples");
  std::vector<double> vals;
  vals.reserve(samples.size());
  for (const auto& s : samples) {
    if (!s.spec().is_boltzmann()) throw ParameterError("IPP samples must lie on the Boltzmann sphere");
    vals.push_back(ipp_integrand(F, Phi, s));
  }
  return mean_estimate(vals);
}

}  // namespace kacsphere

#endif

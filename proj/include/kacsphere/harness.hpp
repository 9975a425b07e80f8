#ifndef KACSPHERE_HARNESS_HPP
#define KACSPHERE_HARNESS_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "chaos_metrics.hpp"
#include "conditioned_tensor.hpp"
#include "core/error.hpp"
#include "core/random.hpp"
#include "core/statistics.hpp"
#include "density.hpp"
#include "kac_dsmc.hpp"
#include "lifted_clt.hpp"
#include "sphere_geometry.hpp"
#include "uniform_law.hpp"

namespace kacsphere::harness {

inline constexpr const char* generator = "kacsphere 1.0.0";
inline constexpr const char* report_schema = "kacsphere-report/1";

enum ExitCode : int { exit_ok = 0, exit_tolerance = 1, exit_usage = 2, exit_config = 3, exit_runtime = 4 };

enum class ToleranceProfile { standard, strict };

inline ToleranceProfile parse_profile(const std::string& s) {
  if (s == "default") return ToleranceProfile::standard;
  if (s == "strict") return ToleranceProfile::strict;
  throw ConfigError("tolerance profile must be 'default' or 'strict', got '" + s + "'");
}

inline std::string profile_name(ToleranceProfile p) { return p == ToleranceProfile::strict ? "strict" : "default"; }

/// Shortest round-trip decimal form, independent of the C locale.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, r.ptr);
}

inline std::string hex64(std::uint64_t x) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, x >>= 4) s[std::size_t(i)] = digits[x & 15];
  return s;
}

/// Names of all sub-commands, in report order.
inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names = {
      "geometry-selftest", "uniform-marginal", "l1-gap",         "zprime",     "berry-esseen", "w1-rate",
      "entropy-rate",      "sampler-check",    "dsmc",           "ipp-check",  "metrics-selftest"};
  return names;
}

/// Flat key=value configuration. Lines starting with '#' are comments. A key may be scoped to
/// one sub-command as "<subcommand>.<key>"; scoped keys override unscoped ones.
class Config {
 public:
  Config() = default;

  static Config parse(std::string_view text) {
    Config c;
    std::size_t lineno = 0, pos = 0;
    while (pos <= text.size()) {
      const std::size_t eol = std::min(text.find('\n', pos), text.size());
      std::string line(text.substr(pos, eol - pos));
      pos = eol + 1;
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const auto first = line.find_first_not_of(" \t");
      if (first == std::string::npos || line[first] == '#') {
        if (eol == text.size()) break;
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
      const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
      if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
      if (c.values_.count(key)) throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
      c.values_[key] = value;
      if (eol == text.size()) break;
    }
    return c;
  }

  static Config load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::map<std::string, std::string>& entries() const { return values_; }

  /// Keys visible to one sub-command. Unscoped keys are dropped when `unscoped` is false,
  /// except the run-wide keys seed and tolerance_profile.
  Config view(const std::string& subcommand, bool unscoped = true) const {
    Config c;
    for (const auto& [k, v] : values_)
      if (k.find('.') == std::string::npos && (unscoped || k == "seed" || k == "tolerance_profile")) c.values_[k] = v;
    const std::string prefix = subcommand + ".";
    for (const auto& [k, v] : values_)
      if (k.rfind(prefix, 0) == 0) c.values_[k.substr(prefix.size())] = v;
    return c;
  }

  /// Rejects keys outside `allowed` and scopes that name no sub-command.
  void require_known(const std::set<std::string>& allowed) const {
    for (const auto& [k, v] : values_) {
      const auto dot = k.find('.');
      if (dot != std::string::npos) {
        const auto scope = k.substr(0, dot);
        const auto& names = subcommands();
        if (std::find(names.begin(), names.end(), scope) == names.end())
          throw ConfigError("unknown scope '" + scope + "' in key '" + k + "'");
        continue;
      }
      if (!allowed.count(k)) throw ConfigError("unknown config key '" + k + "'");
    }
  }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  long long get_int(const std::string& key, long long fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    return parse_int(key, it->second);
  }

  double get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const std::string& s = it->second;
    double v = 0.0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(v))
      throw ConfigError("key '" + key + "': '" + s + "' is not a finite number");
    return v;
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
    if (it->second == "false" || it->second == "0" || it->second == "no") return false;
    throw ConfigError("key '" + key + "': '" + it->second + "' is not a boolean");
  }

  /// Comma-separated integers; an item "a..b" doubles from a up to b, "a:b" counts from a to b.
  std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<int> out;
    std::stringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) throw ConfigError("key '" + key + "': empty list item");
      if (auto p = item.find(".."); p != std::string::npos) {
        const long long a = parse_int(key, item.substr(0, p)), b = parse_int(key, item.substr(p + 2));
        if (a < 1 || b < a) throw ConfigError("key '" + key + "': bad doubling range '" + item + "'");
        for (long long n = a; n <= b; n *= 2) out.push_back(int(n));
      } else if (auto q = item.find(':'); q != std::string::npos) {
        const long long a = parse_int(key, item.substr(0, q)), b = parse_int(key, item.substr(q + 1));
        if (b < a || b - a > 100000) throw ConfigError("key '" + key + "': bad range '" + item + "'");
        for (long long n = a; n <= b; ++n) out.push_back(int(n));
      } else {
        out.push_back(int(parse_int(key, item)));
      }
    }
    return out;
  }

  /// Sorted key=value lines without the execution-only keys jobs, out and svg; the input of
  /// the config hash.
  std::string canonical() const {
    std::string s;
    for (const auto& [k, v] : values_)
      if (k != "jobs" && k != "out" && k != "svg") s += k + "=" + v + "\n";
    return s;
  }
  std::uint64_t hash() const { return fnv1a64(canonical()); }

 private:
  static std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t"), b = s.find_last_not_of(" \t");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  }
  static long long parse_int(const std::string& key, const std::string& s) {
    long long v = 0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
      throw ConfigError("key '" + key + "': '" + s + "' is not an integer");
    return v;
  }

  std::map<std::string, std::string> values_;
};

/// Typed view of the keys shared by most experiments.
struct ExperimentConfig {
  std::string experiment;
  std::string density;
  int d = 1;
  std::vector<int> Ns;
  long long samples = 0;
  std::uint64_t seed = 0;
  LiftedPowerOptions grid;
  std::string output_directory;

  static ExperimentConfig from(const std::string& name, const Config& c, const std::string& density_default, int d_default,
                               const std::vector<int>& Ns_default, long long samples_default) {
    ExperimentConfig e;
    e.experiment = name;
    e.density = c.get_string("density", density_default);
    e.d = int(c.get_int("d", d_default));
    if (e.d < 1 || e.d > 3) throw ConfigError("d must be 1, 2 or 3");
    const auto keys = density_registry_keys();
    if (std::find(keys.begin(), keys.end(), e.density) == keys.end())
      throw ConfigError("unknown density '" + e.density + "'");
    e.Ns = c.get_int_list("N", Ns_default);
    if (e.Ns.empty()) throw ConfigError("N list is empty");
    for (std::size_t i = 1; i < e.Ns.size(); ++i)
      if (e.Ns[i] <= e.Ns[i - 1]) throw ConfigError("N list must be strictly increasing");
    e.samples = c.get_int("samples", samples_default);
    if (e.samples < 1) throw ConfigError("samples must be positive");
    const long long seed = c.get_int("seed", 0);
    if (seed < 0) throw ConfigError("seed must be nonnegative");
    e.seed = std::uint64_t(seed);
    e.grid.output_shape = std::size_t(c.get_int("grid", 2048));
    e.grid.spectral_shape = std::size_t(c.get_int("spectral", 1024));
    if (e.grid.output_shape < 16 || e.grid.spectral_shape < 16) throw ConfigError("grid sizes must be >= 16");
    e.output_directory = c.get_string("out", "");
    return e;
  }
};

struct RunContext {
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  ToleranceProfile profile = ToleranceProfile::standard;

  /// Numeric tolerance under the active profile; strict halves it.
  double tol(double x) const { return profile == ToleranceProfile::strict ? 0.5 * x : x; }
};

/// One pass/fail comparison; value must lie in [lower, upper].
struct Check {
  std::string name;
  double value = 0.0;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  bool passed = false;
  /// Reported only; does not affect the exit code.
  bool informational = false;
};

inline Check check_range(std::string name, double value, double lower, double upper, bool informational = false) {
  Check c{std::move(name), value, lower, upper, false, informational};
  c.passed = std::isfinite(value) && value >= lower && value <= upper;
  return c;
}
inline Check check_at_most(std::string name, double value, double upper, bool informational = false) {
  return check_range(std::move(name), value, -std::numeric_limits<double>::infinity(), upper, informational);
}

struct Table {
  std::string name;
  /// Column headers including units, e.g. "N [particles]".
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

struct ExperimentResult {
  std::string name;
  std::uint64_t config_hash = 0;
  std::vector<Check> checks;
  std::vector<RateReport> rates;
  std::vector<Table> tables;
  std::vector<std::string> notes;

  bool passed() const {
    for (const auto& c : checks)
      if (!c.informational && !c.passed) return false;
    return true;
  }
};

inline Table rate_table(const RateReport& r, const std::string& unit) {
  Table t{r.metric, {"N [particles]", r.metric + " [" + unit + "]", "stderr [" + unit + "]"}, {}};
  for (const auto& p : r.rows) t.rows.push_back({format_double(p.N), format_double(p.value), format_double(p.std_error)});
  return t;
}

inline Check rate_check(const RateReport& r) {
  return check_range(r.metric + "_slope", r.fit.slope, r.slope_low, r.slope_high);
}

namespace detail {

inline std::vector<int> require_two(const std::vector<int>& Ns) {
  if (Ns.size() < 2) throw ConfigError("a rate fit needs at least two values of N");
  return Ns;
}

inline const std::set<std::string> common_keys = {"seed", "tolerance_profile", "out", "jobs", "svg"};

inline std::set<std::string> keys_with(std::initializer_list<const char*> extra) {
  std::set<std::string> k = common_keys;
  for (const char* e : extra) k.insert(e);
  return k;
}

}  // namespace detail

inline ExperimentResult geometry_selftest(const Config& cfg, const RunContext& ctx) {
  cfg.require_known(detail::keys_with({"N_max"}));
  const int Nmax = int(cfg.get_int("N_max", 64));
  if (Nmax < 2) throw ConfigError("N_max must be >= 2");
  ExperimentResult res{"geometry-selftest", cfg.hash(), {}, {}, {}, {}};
  Rng rng(StreamKey(ctx.seed, "harness.geometry"));
  Table t{"helmert",
          {"d [1]", "N [particles]", "roundtrip_error [velocity]", "isometry_error [1]", "orthogonality_error [1]",
           "det_error [1]"},
          {}};
  double rt = 0.0, iso = 0.0, orth = 0.0, det = 0.0;
  for (int d = 1; d <= 3; ++d)
    for (int N = 2; N <= Nmax; ++N) {
      std::vector<double> V(std::size_t(d) * N);
      for (double& x : V) x = rng.normal();
      const auto U = helmert_forward(V, d, N);
      const auto W = helmert_inverse(U, d, N);
      double e = 0.0, nv = 0.0, nu = 0.0;
      for (std::size_t k = 0; k < V.size(); ++k) {
        e = std::max(e, std::abs(W[k] - V[k]));
        nv += V[k] * V[k];
        nu += U[k] * U[k];
      }
      const double ie = std::abs(std::sqrt(nu) - std::sqrt(nv)) / std::sqrt(nv);
      double oe = 0.0, de = 0.0;
      if (d == 1) {
        const auto M = helmert_matrix(N);
        oe = (M * M.transpose() - Eigen::MatrixXd::Identity(N, N)).norm();
        de = std::abs(M.determinant() - 1.0);
      }
      rt = std::max(rt, e);
      iso = std::max(iso, ie);
      orth = std::max(orth, oe);
      det = std::max(det, de);
      t.rows.push_back({std::to_string(d), std::to_string(N), format_double(e), format_double(ie), format_double(oe),
                        format_double(de)});
    }
  res.checks.push_back(check_at_most("roundtrip_max_error", rt, ctx.tol(1e-12)));
  res.checks.push_back(check_at_most("isometry_max_error", iso, ctx.tol(1e-12)));
  res.checks.push_back(check_at_most("orthogonality_max_error", orth, ctx.tol(1e-12)));
  res.checks.push_back(check_at_most("determinant_max_error", det, ctx.tol(1e-10)));
  res.tables.push_back(std::move(t));
  return res;
}

inline ExperimentResult uniform_marginal(const Config& cfg, const RunContext& ctx) {
  cfg.require_known(detail::keys_with({"d", "N"}));
  const int d = int(cfg.get_int("d", 1));
  if (d < 1 || d > 3) throw ConfigError("d must be 1, 2 or 3");
  const auto Ns = cfg.get_int_list("N", {4, 10, 50});
  ExperimentResult res{"uniform-marginal", cfg.hash(), {}, {}, {}, {}};
  Table t{"mass", {"N [particles]", "mass [1]", "mass_error [1]"}, {}};
  for (int N : Ns) {
    const double m = UniformMarginal(d, N, 1).total_mass();
    t.rows.push_back({std::to_string(N), format_double(m), format_double(std::abs(m - 1.0))});
    res.checks.push_back(check_at_most("mass_error_N" + std::to_string(N), std::abs(m - 1.0), ctx.tol(1e-6)));
  }
  res.tables.push_back(std::move(t));
  if (d == 1 && std::find(Ns.begin(), Ns.end(), 4) != Ns.end()) {
    const double c = 1.0 / (2.0 * std::sqrt(3.0));
    double worst = 0.0;
    for (int k = 1; k < 200; ++k) {
      const double x = -std::sqrt(3.0) + 2.0 * std::sqrt(3.0) * k / 200.0;
      worst = std::max(worst, std::abs(marginal_density(1, 4, 1, std::span<const double>(&x, 1)) - c));
    }
    res.checks.push_back(check_at_most("gamma4_flat_error", worst, ctx.tol(1e-12)));
  }
  return res;
}

inline ExperimentResult l1_gap(const Config& cfg, const RunContext& ctx) {
  cfg.require_known(detail::keys_with({"d", "N", "ell", "slope_max"}));
  const int d = int(cfg.get_int("d", 1)), ell = int(cfg.get_int("ell", 1));
  const auto Ns = detail::require_two(cfg.get_int_list("N", {10, 20, 50, 100}));
  const double slope_max = cfg.get_double("slope_max", -0.8);
  ExperimentResult res{"l1-gap", cfg.hash(), {}, {}, {}, {}};
  std::vector<RatePoint> rows(Ns.size());
  std::vector<ChaosGap> gaps(Ns.size());
  parallel_for(Ns.size(), ctx.jobs, [&](std::size_t i) {
    gaps[i] = l1_chaos_gap(d, ell, Ns[i]);
    rows[i] = {double(Ns[i]), gaps[i].gap, gaps[i].std_error};
  });
  for (std::size_t i = 0; i < Ns.size(); ++i)
    res.checks.push_back(check_at_most("gap_N" + std::to_string(Ns[i]), gaps[i].gap, gaps[i].bound));
  auto rate = make_rate_report("l1_gap", rows, -std::numeric_limits<double>::infinity(), slope_max);
  res.checks.push_back(rate_check(rate));
  Table t{"bound", {"N [particles]", "gap [1]", "bound [1]"}, {}};
  for (std::size_t i = 0; i < Ns.size(); ++i)
    t.rows.push_back({std::to_string(Ns[i]), format_double(gaps[i].gap), format_double(gaps[i].bound)});
  res.tables.push_back(std::move(t));
  res.tables.push_back(rate_table(rate, "1"));
  res.rates.push_back(std::move(rate));
  return res;
}

inline ExperimentResult zprime(const Config& cfg, const RunContext& ctx) {
  cfg.require_known(detail::keys_with({"density", "N", "grid", "spectral"}));
  const auto e = ExperimentConfig::from("zprime", cfg, "gaussian", 1, {8, 16, 32, 64, 128}, 1);
  if (e.d != 1) throw ConfigError("zprime runs the exact d = 1 pipeline");
  const auto f = make_density(e.density, 1);
  ExperimentResult res{"zprime", cfg.hash(), {}, {}, {}, {}};
  std::vector<double> z(e.Ns.size()), asym(e.Ns.size());
  parallel_for(e.Ns.size(), ctx.jobs, [&](std::size_t i) {
    const int N = e.Ns[i];
    const double zero = 0.0;
    z[i] = z_prime_exact(f, N, std::sqrt(double(N)), 0.0, e.grid);
    asym[i] = z_prime_asymptotic(*f, N, std::sqrt(double(N)), std::span<const double>(&zero, 1));
  });
  Table t{"zprime", {"N [particles]", "zprime [1]", "asymptotic [1]"}, {}};
  for (std::size_t i = 0; i < e.Ns.size(); ++i)
    t.rows.push_back({std::to_string(e.Ns[i]), format_double(z[i]), format_double(asym[i])});
  res.tables.push_back(std::move(t));
  if (e.density == "gaussian") {
    for (std::size_t i = 0; i < e.Ns.size(); ++i) {
      const double tol = ctx.tol(0.02);
      res.checks.push_back(check_range("zprime_N" + std::to_string(e.Ns[i]), z[i], 1.0 - tol, 1.0 + tol));
    }
  } else {
    const double target = asym.back(), tol = ctx.tol(0.03) * target;
    res.checks.push_back(check_range("zprime_N" + std::to_string(e.Ns.back()) + "_vs_limit", z.back(),
                                     target - tol, target + tol));
  }
  return res;
}

inline ExperimentResult berry_esseen(const Config& cfg, const RunContext& ctx) {
  cfg.require_known(detail::keys_with({"density", "N", "slope_max", "nodes"}));
  std::vector<int> all_N(255);
  std::iota(all_N.begin(), all_N.end(), 2);
  const auto e = ExperimentConfig::from("berry-esseen", cfg, "uniform", 1, all_N, 1);
  if (e.d != 1) throw ConfigError("berry-esseen needs d = 1");
  detail::require_two(e.Ns);
  if (e.Ns.front() < 1) throw ConfigError("N must be >= 1");
  const double slope_max = cfg.get_double("slope_max", -0.45);
  BerryEsseenOptions bo;
  bo.nodes = std::size_t(cfg.get_int("nodes", 1 << 16));
  const auto f = make_density(e.density, 1);
  ExperimentResult res{"berry-esseen", cfg.hash(), {}, {}, {}, {}};
  std::vector<RatePoint> rows(e.Ns.size());
  parallel_for(e.Ns.size(), ctx.jobs,
               [&](std::size_t i) { rows[i] = {double(e.Ns[i]), berry_esseen_sup(*f, e.Ns[i], bo), 0.0}; });
  const double C = rows.front().value * std::sqrt(rows.front().N);
  double worst = -std::numeric_limits<double>::infinity();
  Table t{"curve", {"N [particles]", "sup_gap [density]", "calibrated_bound [density]"}, {}};
  for (const auto& r : rows) {
    const double b = C / std::sqrt(r.N);
    worst = std::max(worst, r.value / b);
    t.rows.push_back({format_double(r.N), format_double(r.value), format_double(b)});
  }
  res.notes.push_back("C calibrated at N=" + std::to_string(e.Ns.front()) + ": " + format_double(C));
  res.checks.push_back(check_at_most("max_ratio_to_calibrated_curve", worst, 1.0 + 1e-12));
  auto rate = make_rate_report("sup_gap", rows, -std::numeric_limits<double>::infinity(), slope_max);
  res.checks.push_back(rate_check(rate));
  res.tables.push_back(std::move(t));
  res.rates.push_back(std::move(rate));
  return res;
}

inline ExperimentResult w1_rate(const Config& cfg, const RunContext& ctx) {
  cfg.require_known(detail::keys_with({"density", "N", "grid", "spectral", "panels", "slope_min", "slope_max"}));
  const auto e = ExperimentConfig::from("w1-rate", cfg, "uniform", 1, {8, 16, 32, 64, 128, 256, 512}, 1);
  detail::require_two(e.Ns);
  if (e.d != 1) throw ConfigError("w1-rate runs the exact d = 1 pipeline");
  W1RateOptions o;
  o.lifted = e.grid;
  o.quadrature.panels_per_unit = int(cfg.get_int("panels", o.quadrature.panels_per_unit));
  o.slope_low = cfg.get_double("slope_min", -0.65);
  o.slope_high = cfg.get_double("slope_max", -0.35);
  o.jobs = ctx.jobs;
  ExperimentResult res{"w1-rate", cfg.hash(), {}, {}, {}, {}};
  auto rate = w1_rate_experiment(make_density(e.density, 1), e.Ns, o);
  res.checks.push_back(rate_check(rate));
  res.tables.push_back(rate_table(rate, "velocity"));
  res.rates.push_back(std::move(rate));
  return res;
}

inline ExperimentResult entropy_rate(const Config& cfg, const RunContext& ctx) {
  cfg.require_known(detail::keys_with({"density", "N", "grid", "spectral", "panels", "slope_max", "gap_max"}));
  const auto e = ExperimentConfig::from("entropy-rate", cfg, "uniform", 1, {16, 32, 64, 128, 256}, 1);
  detail::require_two(e.Ns);
  if (e.d != 1) throw ConfigError("entropy-rate runs the exact d = 1 pipeline");
  const auto f = make_density(e.density, 1);
  EntropyRateOptions o;
  o.lifted = e.grid;
  o.quadrature.panels_per_unit = int(cfg.get_int("panels", o.quadrature.panels_per_unit));
  o.slope_high = cfg.get_double("slope_max", -0.35);
  o.jobs = ctx.jobs;
  const double limit = relative_entropy_1d(*f);
  auto rep = entropy_rate_experiment(f, e.Ns, limit, o);
  ExperimentResult res{"entropy-rate", cfg.hash(), {}, {}, {}, {}};
  res.notes.push_back("limit H(f|gamma) = " + format_double(limit));
  const double gap = std::abs(rep.values.back() - limit);
  res.checks.push_back(check_at_most("gap_N" + std::to_string(e.Ns.back()), gap, ctx.tol(cfg.get_double("gap_max", 0.02))));
  if (e.density != "gaussian") res.checks.push_back(rate_check(rep.rate));
  Table t{"entropy", {"N [particles]", "entropy_per_particle [nat]", "gap [nat]"}, {}};
  for (std::size_t i = 0; i < e.Ns.size(); ++i)
    t.rows.push_back({std::to_string(e.Ns[i]), format_double(rep.values[i]), format_double(rep.rate.rows[i].value)});
  res.tables.push_back(std::move(t));
  res.rates.push_back(std::move(rep.rate));
  return res;
}

inline ExperimentResult sampler_check(const Config& cfg, const RunContext& ctx) {
  cfg.require_known(detail::keys_with({"N", "samples", "thin", "chains", "states"}));
  const int N = int(cfg.get_int("N", 16));
  const long long samples = cfg.get_int("samples", 100000);
  const long long thin = cfg.get_int("thin", 64);
  const long long chains = cfg.get_int("chains", 1);
  if (samples < 1 || thin < 1 || chains < 1) throw ConfigError("samples, thin and chains must be positive");
  ExperimentResult res{"sampler-check", cfg.hash(), {}, {}, {}, {}};
  SamplerOptions so;
  so.thin = std::size_t(thin);
  Table t{"ks", {"d [1]", "N [particles]", "samples [1]", "statistic [1]", "p_value [1]"}, {}};
  for (int d : {1, 2}) {
    ConditionedLaw law(make_density("gaussian", d), N);
    const auto xs = sample_first_coordinate(law, ctx.seed, std::size_t(samples), so, unsigned(chains), ctx.jobs);
    const auto ks = ks_test(xs, [d, N](double x) { return coordinate_marginal_cdf(d, N, x); });
    t.rows.push_back({std::to_string(d), std::to_string(N), std::to_string(samples), format_double(ks.statistic),
                      format_double(ks.p_value)});
    res.checks.push_back(check_range("ks_p_value_d" + std::to_string(d), ks.p_value, 0.01, 1.0));
  }
  res.tables.push_back(std::move(t));
  const int states = int(cfg.get_int("states", 360));
  res.checks.push_back(
      check_at_most("detailed_balance_error", detailed_balance_error(*make_density("mixture", 1), states), ctx.tol(1e-8)));
  return res;
}

inline ExperimentResult dsmc(const Config& cfg, const RunContext& ctx) {
  cfg.require_known(detail::keys_with({"d", "N", "density", "replicas", "t_end", "intervals", "kernel", "alpha", "delta",
                                       "beta", "collisions", "ks_d", "ks_N", "ks_replicas", "ks_per_replica", "t_burn",
                                       "spacing"}));
  const int d = int(cfg.get_int("d", 3));
  const auto Ns = cfg.get_int_list("N", {256});
  if (Ns.size() != 1) throw ConfigError("dsmc takes a single N");
  const int N = Ns.front();
  const std::string dens = cfg.get_string("density", "mixture");
  const long long replicas = cfg.get_int("replicas", 10000);
  const double t_end = cfg.get_double("t_end", 20.0);
  const long long intervals = cfg.get_int("intervals", 10);
  const double beta = cfg.get_double("beta", 1.0);
  const std::string kname = cfg.get_string("kernel", "uniform");
  if (d != 2 && d != 3) throw ConfigError("dsmc needs d in {2, 3}");
  if (N < 3 || replicas < 6 || intervals < 1 || !(t_end > 0.0)) throw ConfigError("invalid dsmc sizes");
  auto make_kernel = [&](int dim) {
    if (kname == "uniform") return CollisionKernel::uniform(dim, beta);
    if (kname == "singular")
      return CollisionKernel::truncated_singular(dim, cfg.get_double("alpha", 0.5), cfg.get_double("delta", 0.1), beta);
    throw ConfigError("kernel must be 'uniform' or 'singular'");
  };
  const auto kernel = make_kernel(d);
  const auto f = make_density(dens, d);
  ExperimentResult res{"dsmc", cfg.hash(), {}, {}, {}, {}};

  const double mft = kernel.mean_free_time(N);
  DsmcOptions o;
  o.t_end = t_end * mft;
  o.intervals = std::size_t(intervals);
  o.replicas = std::size_t(replicas);
  o.seed = ctx.seed;
  o.jobs = ctx.jobs;
  const auto run_res = run(initial_conditioned(f, N, ctx.seed), kernel, {moment_observable(2), moment_observable(4)}, o);
  Table series{"series", {"t [mean free times]", "observable [name]", "mean [1]", "stderr [1]", "n_replicas [1]"}, {}};
  for (const auto& r : run_res.rows)
    series.rows.push_back({format_double(r.t / mft), r.observable, format_double(r.mean), format_double(r.std_error),
                           std::to_string(r.replicas)});
  res.tables.push_back(std::move(series));
  const auto m4 = run_res.series("E|v1|^4").back();
  const double target = double(d) * (d + 2);
  res.checks.push_back(check_range("fourth_moment_final", m4.mean, target - 3.0 * m4.std_error, target + 3.0 * m4.std_error));
  const auto h = run_res.series("H(v1|gamma)");
  double worst_rise = -std::numeric_limits<double>::infinity();
  for (std::size_t g = 1; g < h.size(); ++g)
    worst_rise = std::max(worst_rise, (h[g].mean - h[g - 1].mean) / (3.0 * std::hypot(h[g].std_error, h[g - 1].std_error)));
  if (h.size() > 1) res.checks.push_back(check_at_most("entropy_rise_in_3stderr_units", worst_rise, 1.0, true));

  const long long collisions = cfg.get_int("collisions", 1000000);
  {
    Rng rng(StreamKey(ctx.seed, "harness.dsmc.drift"));
    SimulationState s(sample_uniform(SphereSpec::boltzmann(d, N), rng), ctx.seed, 0);
    const auto p0 = s.configuration.momentum();
    const double e0 = s.configuration.energy();
    double scale = 0.0;
    for (double x : s.configuration.values()) scale += std::abs(x);
    for (long long n = 0; n < collisions; ++n) step(s, kernel);
    const auto p1 = s.configuration.momentum();
    double dp = 0.0;
    for (int a = 0; a < d; ++a) dp += (p1[std::size_t(a)] - p0[std::size_t(a)]) * (p1[std::size_t(a)] - p0[std::size_t(a)]);
    res.checks.push_back(check_at_most("momentum_relative_drift", std::sqrt(dp) / scale, ctx.tol(1e-9)));
    res.checks.push_back(check_at_most("energy_relative_drift", std::abs(s.configuration.energy() - e0) / e0, ctx.tol(1e-9)));
  }

  const int ks_d = int(cfg.get_int("ks_d", 2)), ks_N = int(cfg.get_int("ks_N", 64));
  if (ks_d != 2 && ks_d != 3) throw ConfigError("ks_d must be 2 or 3");
  EquilibriumSampling es;
  es.replicas = std::size_t(cfg.get_int("ks_replicas", 10000));
  es.per_replica = std::size_t(cfg.get_int("ks_per_replica", 10));
  es.t_burn = cfg.get_double("t_burn", 20.0);
  es.spacing = cfg.get_double("spacing", 10.0);
  es.seed = ctx.seed;
  es.jobs = ctx.jobs;
  const auto ks_kernel = make_kernel(ks_d);
  const auto xs = sample_equilibrium_coordinate(initial_projected(make_density(dens, ks_d), ks_N, ctx.seed), ks_kernel, es);
  const auto eq = equilibrium_crosscheck(ks_N, ks_d, xs);
  res.checks.push_back(check_range("equilibrium_ks_p_value", eq.ks.p_value, 0.01, 1.0));
  res.notes.push_back("equilibrium KS statistic " + format_double(eq.ks.statistic) + " over " +
                      std::to_string(xs.size()) + " samples");
  res.notes.push_back("time unit: mean free time N/((N-1) beta); total collision rate (N-1) beta/2");
  return res;
}

namespace detail {

struct IppPair {
  std::string name;
  int d, N;
  ScalarField F;
  VectorField Phi;
};

inline std::vector<IppPair> ipp_pairs() {
  std::vector<IppPair> out;
  out.push_back({"linear_F_constant_Phi", 2, 4,
                 [](std::span<const double> V, std::span<double> g) {
                   std::fill(g.begin(), g.end(), 0.0);
                   g[0] = 1.0;
                   return V[0];
                 },
                 [](std::span<const double>, std::span<double> val, std::span<double> jac) {
                   std::fill(val.begin(), val.end(), 0.0);
                   val[2] = 1.0;
                   std::fill(jac.begin(), jac.end(), 0.0);
                 }});
  out.push_back({"cubic_F_sine_Phi", 3, 3,
                 [](std::span<const double> V, std::span<double> g) {
                   std::fill(g.begin(), g.end(), 0.0);
                   g[0] = 2.0 * V[0] * V[4];
                   g[4] = V[0] * V[0];
                   return V[0] * V[0] * V[4];
                 },
                 [](std::span<const double> V, std::span<double> val, std::span<double> jac) {
                   const std::size_t n = V.size();
                   std::fill(jac.begin(), jac.end(), 0.0);
                   for (std::size_t k = 0; k < n; ++k) {
                     val[k] = std::sin(V[k]);
                     jac[k * n + k] = std::cos(V[k]);
                   }
                 }});
  out.push_back({"gaussian_F_quadratic_Phi", 2, 10,
                 [](std::span<const double> V, std::span<double> g) {
                   std::fill(g.begin(), g.end(), 0.0);
                   const double F = std::exp(-0.25 * (V[0] * V[0] + V[1] * V[1]));
                   g[0] = -0.5 * V[0] * F;
                   g[1] = -0.5 * V[1] * F;
                   return F;
                 },
                 [](std::span<const double> V, std::span<double> val, std::span<double> jac) {
                   const std::size_t n = V.size();
                   std::fill(jac.begin(), jac.end(), 0.0);
                   for (std::size_t k = 0; k < n; ++k) {
                     const std::size_t m = (k + 1) % n;
                     val[k] = V[k] * V[m];
                     jac[k * n + k] += V[m];
                     jac[k * n + m] += V[k];
                   }
                 }});
  return out;
}

}  // namespace detail

inline ExperimentResult ipp_check(const Config& cfg, const RunContext& ctx) {
  cfg.require_known(detail::keys_with({"samples"}));
  const long long samples = cfg.get_int("samples", 100000);
  if (samples < 2) throw ConfigError("samples must be >= 2");
  ExperimentResult res{"ipp-check", cfg.hash(), {}, {}, {}, {}};
  Table t{"residuals", {"pair [name]", "d [1]", "N [particles]", "mean [1]", "stderr [1]"}, {}};
  const auto pairs = detail::ipp_pairs();
  std::vector<Estimate> est(pairs.size());
  parallel_for(pairs.size(), ctx.jobs, [&](std::size_t i) {
    const auto& p = pairs[i];
    const auto xs = sample_uniform(SphereSpec::boltzmann(p.d, p.N), ctx.seed + i, std::size_t(samples));
    est[i] = ipp_residual(p.F, p.Phi, xs);
  });
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    t.rows.push_back({p.name, std::to_string(p.d), std::to_string(p.N), format_double(est[i].value),
                      format_double(est[i].std_error)});
    res.checks.push_back(check_at_most("residual_in_stderr_units_" + p.name,
                                       std::abs(est[i].value) / std::max(est[i].std_error, 1e-300), 3.0));
  }
  res.tables.push_back(std::move(t));
  return res;
}

inline ExperimentResult metrics_selftest(const Config& cfg, const RunContext& ctx) {
  cfg.require_known(detail::keys_with({"samples", "triples", "pairs", "cloud"}));
  const long long samples = cfg.get_int("samples", 100000);
  const long long triples = cfg.get_int("triples", 10), pairs = cfg.get_int("pairs", 100), cloud = cfg.get_int("cloud", 60);
  if (samples < 100 || triples < 1 || pairs < 1 || cloud < 2) throw ConfigError("metrics-selftest sizes too small");
  ExperimentResult res{"metrics-selftest", cfg.hash(), {}, {}, {}, {}};
  Rng rng(StreamKey(ctx.seed, "harness.metrics"));
  auto cloud_of = [&](std::size_t n, int dim, double shift, double scale) {
    std::vector<double> p(n * std::size_t(dim));
    for (double& x : p) x = shift + scale * rng.normal();
    return EmpiricalMeasure(std::move(p), dim);
  };
  double sym = 0.0, tri = 0.0, ident = 0.0, order = 0.0;
  for (long long r = 0; r < triples; ++r) {
    const auto a = cloud_of(std::size_t(cloud), 2, 0.0, 1.0), b = cloud_of(std::size_t(cloud), 2, 0.4, 1.0),
               c = cloud_of(std::size_t(cloud), 2, -0.3, 1.3);
    for (auto W : {&w1, &w2}) {
      const double ab = (*W)(a, b, ctx.jobs), ba = (*W)(b, a, ctx.jobs), bc = (*W)(b, c, ctx.jobs),
                   ac = (*W)(a, c, ctx.jobs);
      sym = std::max(sym, std::abs(ab - ba));
      tri = std::max(tri, ac - ab - bc);
      ident = std::max(ident, (*W)(a, a, ctx.jobs));
    }
    order = std::max(order, w1(a, b, ctx.jobs) - w2(a, b, ctx.jobs));
  }
  const double tol = ctx.tol(1e-9);
  res.checks.push_back(check_at_most("symmetry_violation", sym, tol));
  res.checks.push_back(check_at_most("triangle_violation", tri, tol));
  res.checks.push_back(check_at_most("identity_violation", ident, tol));
  res.checks.push_back(check_at_most("w1_exceeds_w2", order, tol));

  const auto wide = cloud_of(std::size_t(samples), 1, 0.0, 2.0);
  EntropyOptions eo;
  eo.jobs = ctx.jobs;
  eo.jitter_seed = ctx.seed;
  const auto h = relative_entropy_vs_gaussian(wide, eo);
  const double h_true = 0.5 * (4.0 - 1.0 - std::log(4.0));
  res.checks.push_back(check_range("relative_entropy_N04", h.value, h_true - 3.0 * h.std_error, h_true + 3.0 * h.std_error));
  const auto fi = relative_fisher(GaussianDensity(1, 4.0), wide);
  res.checks.push_back(check_range("relative_fisher_N04", fi.value, 2.25 - 3.0 * fi.std_error, 2.25 + 3.0 * fi.std_error));

  std::size_t failed = 0, failed_alt = 0;
  double worst = 0.0;
  for (long long r = 0; r < pairs; ++r) {
    const auto a = cloud_of(200, 1, rng.uniform(-1.0, 1.0), rng.uniform(0.2, 2.0));
    const auto b = cloud_of(200, 1, rng.uniform(-1.0, 1.0), rng.uniform(0.2, 2.0));
    const auto c = interpolation_check(a, b, 4, ctx.jobs);
    failed += c.passed ? 0 : 1;
    failed_alt += c.passed_alt ? 0 : 1;
    worst = std::max(worst, c.w2 / c.bound);
  }
  res.checks.push_back(check_at_most("interpolation_failures", double(failed), 0.0));
  res.checks.push_back(check_at_most("interpolation_failures_alt_constant", double(failed_alt), 0.0, true));
  Table t{"estimators",
          {"quantity [name]", "estimate [1]", "stderr [1]", "target [1]"},
          {{"relative_entropy_N04", format_double(h.value), format_double(h.std_error), format_double(h_true)},
           {"relative_fisher_N04", format_double(fi.value), format_double(fi.std_error), "2.25"},
           {"interpolation_worst_ratio", format_double(worst), "0", "1"}}};
  res.tables.push_back(std::move(t));
  return res;
}

using Experiment = std::function<ExperimentResult(const Config&, const RunContext&)>;

inline const std::map<std::string, Experiment>& experiments() {
  static const std::map<std::string, Experiment> m = {
      {"geometry-selftest", geometry_selftest}, {"uniform-marginal", uniform_marginal},
      {"l1-gap", l1_gap},                       {"zprime", zprime},
      {"berry-esseen", berry_esseen},           {"w1-rate", w1_rate},
      {"entropy-rate", entropy_rate},           {"sampler-check", sampler_check},
      {"dsmc", dsmc},                           {"ipp-check", ipp_check},
      {"metrics-selftest", metrics_selftest}};
  return m;
}

/// Runs one sub-command on its view of the config. The report passes unscoped = false so that
/// a bare key such as N cannot leak into every experiment.
inline ExperimentResult run_experiment(const std::string& name, const Config& cfg, const RunContext& ctx,
                                       bool unscoped = true) {
  const auto& m = experiments();
  auto it = m.find(name);
  if (it == m.end()) throw ConfigError("unknown sub-command '" + name + "'");
  const Config view = cfg.view(name, unscoped);
  auto r = it->second(view, ctx);
  r.config_hash = fnv1a64(name + "\n" + view.canonical());
  return r;
}

/// Every sub-command in report order.
inline std::vector<ExperimentResult> run_report(const Config& cfg, const RunContext& ctx) {
  for (const auto& [k, v] : cfg.entries())
    if (k.find('.') == std::string::npos && !detail::common_keys.count(k))
      throw ConfigError("report accepts only scoped keys such as w1-rate.N, got '" + k + "'");
  cfg.require_known(detail::common_keys);
  std::vector<ExperimentResult> out;
  for (const auto& name : subcommands()) out.push_back(run_experiment(name, cfg, ctx, false));
  return out;
}

// ---- emitters ----

inline nlohmann::json number_or_null(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }

inline nlohmann::json to_json(const RateReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& p : r.rows) rows.push_back({{"N", p.N}, {"value", number_or_null(p.value)}, {"stderr", p.std_error}});
  return {{"metric", r.metric},
          {"rows", rows},
          {"slope", number_or_null(r.fit.slope)},
          {"intercept", number_or_null(r.fit.intercept)},
          {"slope_stderr", number_or_null(r.fit.slope_std_error)},
          {"slope_ci95", {number_or_null(r.fit.slope_ci_low), number_or_null(r.fit.slope_ci_high)}},
          {"weighted", r.fit.weighted},
          {"slope_band", {number_or_null(r.slope_low), number_or_null(r.slope_high)}},
          {"passed", r.slope_in_band()}};
}

inline nlohmann::json to_json(const ExperimentResult& e) {
  nlohmann::json checks = nlohmann::json::array(), rates = nlohmann::json::array();
  for (const auto& c : e.checks)
    checks.push_back({{"name", c.name},
                      {"value", number_or_null(c.value)},
                      {"lower", number_or_null(c.lower)},
                      {"upper", number_or_null(c.upper)},
                      {"passed", c.passed},
                      {"informational", c.informational}});
  for (const auto& r : e.rates) rates.push_back(to_json(r));
  return {{"name", e.name}, {"config_hash", hex64(e.config_hash)}, {"passed", e.passed()},
          {"checks", checks}, {"rates", rates},                      {"notes", e.notes}};
}

inline nlohmann::json report_json(const std::vector<ExperimentResult>& results, const Config& cfg, const RunContext& ctx) {
  nlohmann::json ex = nlohmann::json::array();
  bool all = true;
  for (const auto& r : results) {
    ex.push_back(to_json(r));
    all = all && r.passed();
  }
  return {{"schema", report_schema},       {"generator", generator},
          {"config_hash", hex64(cfg.hash())}, {"seed", ctx.seed},
          {"tolerance_profile", profile_name(ctx.profile)}, {"experiments", ex},
          {"passed", all}};
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string o = "\"";
  for (char c : s) o += c == '"' ? std::string("\"\"") : std::string(1, c);
  return o + "\"";
}

/// CSV with a provenance comment line followed by the header row.
inline std::string to_csv(const Table& t, const std::string& experiment, std::uint64_t hash, std::uint64_t seed) {
  std::string s = "# generator=" + std::string(generator) + " experiment=" + experiment + " table=" + t.name +
                  " config_hash=" + hex64(hash) + " seed=" + std::to_string(seed) + "\n";
  for (std::size_t i = 0; i < t.columns.size(); ++i) s += (i ? "," : "") + csv_escape(t.columns[i]);
  s += "\n";
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) s += (i ? "," : "") + csv_escape(row[i]);
    s += "\n";
  }
  return s;
}

inline Table checks_table(const std::vector<ExperimentResult>& results) {
  Table t{"checks", {"experiment [name]", "check [name]", "value [1]", "lower [1]", "upper [1]", "passed [bool]", "informational [bool]"}, {}};
  for (const auto& r : results)
    for (const auto& c : r.checks)
      t.rows.push_back({r.name, c.name, format_double(c.value), format_double(c.lower), format_double(c.upper),
                        c.passed ? "true" : "false", c.informational ? "true" : "false"});
  return t;
}

/// Log-log plot of the rows of a rate report with the fitted line.
inline std::string rate_svg(const RateReport& r) {
  const double W = 480, H = 360, m = 50;
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  std::vector<std::pair<double, double>> pts;
  for (const auto& p : r.rows)
    if (p.value > 0.0 && p.N > 0.0) {
      pts.push_back({std::log10(p.N), std::log10(p.value)});
      x0 = std::min(x0, pts.back().first);
      x1 = std::max(x1, pts.back().first);
      y0 = std::min(y0, pts.back().second);
      y1 = std::max(y1, pts.back().second);
    }
  if (pts.empty()) {
    x0 = y0 = 0;
    x1 = y1 = 1;
  }
  if (x1 - x0 < 1e-9) x1 = x0 + 1;
  if (y1 - y0 < 1e-9) y1 = y0 + 1;
  auto X = [&](double x) { return m + (W - 2 * m) * (x - x0) / (x1 - x0); };
  auto Y = [&](double y) { return H - m - (H - 2 * m) * (y - y0) / (y1 - y0); };
  auto f = [](double v) { return format_double(std::round(v * 100.0) / 100.0); };
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + f(W) + "\" height=\"" + f(H) + "\">\n";
  s += "<rect x=\"0\" y=\"0\" width=\"" + f(W) + "\" height=\"" + f(H) + "\" fill=\"white\"/>\n";
  s += "<line x1=\"" + f(m) + "\" y1=\"" + f(H - m) + "\" x2=\"" + f(W - m) + "\" y2=\"" + f(H - m) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + f(m) + "\" y1=\"" + f(m) + "\" x2=\"" + f(m) + "\" y2=\"" + f(H - m) + "\" stroke=\"black\"/>\n";
  s += "<text x=\"" + f(W / 2) + "\" y=\"" + f(H - 12) + "\" text-anchor=\"middle\">log10 N</text>\n";
  s += "<text x=\"14\" y=\"" + f(H / 2) + "\" transform=\"rotate(-90 14 " + f(H / 2) + ")\" text-anchor=\"middle\">log10 " +
       r.metric + "</text>\n";
  s += "<text x=\"" + f(W / 2) + "\" y=\"24\" text-anchor=\"middle\">" + r.metric + ": slope " +
       format_double(std::round(r.fit.slope * 1000.0) / 1000.0) + "</text>\n";
  if (!pts.empty()) {
    const double ln10 = std::log(10.0);
    auto fit = [&](double lx) { return (r.fit.intercept + r.fit.slope * lx * ln10) / ln10; };
    s += "<line x1=\"" + f(X(x0)) + "\" y1=\"" + f(Y(fit(x0))) + "\" x2=\"" + f(X(x1)) + "\" y2=\"" + f(Y(fit(x1))) +
         "\" stroke=\"steelblue\" stroke-dasharray=\"4 3\"/>\n";
    s += "<polyline fill=\"none\" stroke=\"black\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) s += (i ? " " : "") + f(X(pts[i].first)) + "," + f(Y(pts[i].second));
    s += "\"/>\n";
    for (const auto& p : pts) s += "<circle cx=\"" + f(X(p.first)) + "\" cy=\"" + f(Y(p.second)) + "\" r=\"3\"/>\n";
  }
  s += "</svg>\n";
  return s;
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  out << content;
  if (!out) throw Error("write failed for " + p.string());
}

/// Writes <name>.json, one CSV per table and, when requested, one SVG per rate fit.
inline void write_experiment(const std::filesystem::path& dir, const ExperimentResult& e, const Config& cfg,
                             const RunContext& ctx, bool svg) {
  std::filesystem::create_directories(dir);
  write_file(dir / (e.name + ".json"), report_json({e}, cfg, ctx).dump(2) + "\n");
  for (const auto& t : e.tables) write_file(dir / (e.name + "_" + t.name + ".csv"), to_csv(t, e.name, e.config_hash, ctx.seed));
  if (svg)
    for (const auto& r : e.rates) write_file(dir / (e.name + "_" + r.metric + ".svg"), rate_svg(r));
}

inline void write_report(const std::filesystem::path& dir, const std::vector<ExperimentResult>& results, const Config& cfg,
                         const RunContext& ctx, bool svg) {
  std::filesystem::create_directories(dir);
  write_file(dir / "report.json", report_json(results, cfg, ctx).dump(2) + "\n");
  write_file(dir / "report.csv", to_csv(checks_table(results), "report", cfg.hash(), ctx.seed));
  for (const auto& e : results) {
    for (const auto& t : e.tables)
      write_file(dir / (e.name + "_" + t.name + ".csv"), to_csv(t, e.name, e.config_hash, ctx.seed));
    if (svg)
      for (const auto& r : e.rates) write_file(dir / (e.name + "_" + r.metric + ".svg"), rate_svg(r));
  }
}

/// One summary line per check.
inline std::string summary(const ExperimentResult& e) {
  std::string s;
  for (const auto& c : e.checks)
    s += e.name + " " + c.name + " " + (c.passed ? "ok" : (c.informational ? "note" : "FAIL")) + " value=" +
         format_double(c.value) + " range=[" + format_double(c.lower) + "," + format_double(c.upper) + "]\n";
  return s;
}

}  // namespace kacsphere::harness

#endif

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kacsphere/harness.hpp"

namespace h = kacsphere::harness;

namespace {

std::string usage_list() {
  std::string s = "sub-commands:";
  for (const auto& n : h::subcommands()) s += " " + n;
  return s + " report";
}

int run(const std::string& sub, h::Config cfg, const std::optional<std::uint64_t>& seed, std::string out,
        unsigned jobs, const std::string& profile, bool svg) {
  if (seed) cfg.set("seed", std::to_string(*seed));
  const long long cfg_seed = cfg.get_int("seed", 0);
  if (cfg_seed < 0) throw kacsphere::ConfigError("seed must be nonnegative");
  if (!profile.empty()) cfg.set("tolerance_profile", profile);
  h::RunContext ctx;
  ctx.seed = std::uint64_t(cfg_seed);
  ctx.profile = h::parse_profile(cfg.get_string("tolerance_profile", "default"));
  cfg.set("seed", std::to_string(ctx.seed));
  cfg.set("tolerance_profile", h::profile_name(ctx.profile));
  if (jobs == 0) {
    const long long j = cfg.get_int("jobs", 1);
    if (j < 1) throw kacsphere::ConfigError("jobs must be >= 1");
    jobs = unsigned(j);
  }
  ctx.jobs = jobs;
  if (out.empty()) out = cfg.get_string("out", "kacsphere-out");
  svg = svg || cfg.get_bool("svg", false);

  bool passed = true;
  if (sub == "report") {
    const auto results = h::run_report(cfg, ctx);
    for (const auto& r : results) {
      std::cout << h::summary(r);
      passed = passed && r.passed();
    }
    h::write_report(out, results, cfg, ctx, svg);
  } else {
    const auto r = h::run_experiment(sub, cfg, ctx);
    std::cout << h::summary(r);
    passed = r.passed();
    h::write_experiment(out, r, cfg, ctx, svg);
  }
  std::cout << (passed ? "PASS" : "FAIL") << " " << sub << " config_hash=" << h::hex64(cfg.hash()) << "\n";
  return passed ? h::exit_ok : h::exit_tolerance;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kac sphere chaos experiments. " + usage_list()};
  std::string sub, config_path, out, profile;
  std::optional<std::uint64_t> seed;
  unsigned jobs = 0;
  std::vector<std::string> sets;
  bool svg = false;
  app.add_option("subcommand", sub, "Experiment to run")->required();
  app.add_option("--config", config_path, "Flat key=value config file");
  app.add_option("--seed", seed, "Seed of every random stream");
  app.add_option("--out", out, "Output directory (default kacsphere-out)");
  app.add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--tolerance-profile", profile, "default or strict")->check(CLI::IsMember({"default", "strict"}));
  app.add_option("--set", sets, "Config override key=value (repeatable)");
  app.add_flag("--svg", svg, "Also write SVG plots of rate fits");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return h::exit_usage;
  }
  const auto& names = h::subcommands();
  if (sub != "report" && std::find(names.begin(), names.end(), sub) == names.end()) {
    std::cerr << "unknown sub-command '" << sub << "'; " << usage_list() << "\n";
    return h::exit_usage;
  }
  try {
    h::Config cfg = config_path.empty() ? h::Config() : h::Config::load(config_path);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos || eq == 0) throw kacsphere::ConfigError("--set expects key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return run(sub, std::move(cfg), seed, out, jobs, profile, svg);
  } catch (const kacsphere::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return h::exit_config;
  } catch (const kacsphere::ParameterError& e) {
    std::cerr << "invalid parameter: " << e.what() << "\n";
    return h::exit_config;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return h::exit_runtime;
  }
}

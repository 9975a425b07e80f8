#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "kacsphere/harness.hpp"

namespace h = kacsphere::harness;

namespace {

struct Criterion {
  int id;
  std::string title;
  std::vector<std::pair<std::string, std::string>> runs;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> c = {
      {1, "Helmert round-trip, isometry, determinant", {{"geometry-selftest", ""}}},
      {2, "uniform marginal normalization", {{"uniform-marginal", ""}}},
      {3, "L1 chaos bound and decay of the uniform marginal", {{"l1-gap", ""}}},
      {4, "normalized partition function oracle", {{"zprime", "density=gaussian\n"}, {"zprime", "density=uniform\nN=128\n"}}},
      {5, "local CLT sup distance under calibrated curve", {{"berry-esseen", ""}}},
      {6, "W1 chaos rate of the conditioned tensor", {{"w1-rate", ""}}},
      {7, "entropic chaos rate of the conditioned tensor", {{"entropy-rate", ""}}},
      {8, "constrained Metropolis sampler", {{"sampler-check", ""}}},
      {9, "DSMC invariants and equilibrium", {{"dsmc", ""}}},
      {10, "integration by parts on the sphere", {{"ipp-check", ""}}},
      {11, "transport metrics and estimators", {{"metrics-selftest", ""}}},
  };
  return c;
}

bool run_criterion(const Criterion& c) {
  h::RunContext ctx;
  bool ok = true;
  std::string detail;
  for (const auto& [name, text] : c.runs) {
    const auto r = h::run_experiment(name, h::Config::parse(text), ctx);
    for (const auto& chk : r.checks) {
      if (chk.informational) continue;
      ok = ok && chk.passed;
      if (!detail.empty()) detail += "; ";
      detail += chk.name + "=" + h::format_double(chk.value) + (chk.passed ? "" : " [out of range]");
    }
  }
  std::cout << "AC" << (c.id < 10 ? "0" : "") << c.id << " " << (ok ? "PASS" : "FAIL") << " " << c.title << " | "
            << detail << std::endl;
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string which = argc > 1 ? argv[1] : "all";
  bool ok = true, found = false;
  for (const auto& c : criteria()) {
    if (which != "all" && which != std::to_string(c.id)) continue;
    found = true;
    try {
      ok = run_criterion(c) && ok;
    } catch (const std::exception& e) {
      std::cout << "AC" << (c.id < 10 ? "0" : "") << c.id << " FAIL " << c.title << " | error: " << e.what() << std::endl;
      ok = false;
    }
  }
  if (!found) {
    std::cerr << "usage: acceptance [all|1..11]\n";
    return 2;
  }
  return ok ? EXIT_SUCCESS : EXIT_FAILURE;
}

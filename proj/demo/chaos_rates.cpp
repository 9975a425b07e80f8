// W1 and entropy distance of the first marginal of F^N to f, uniform f on [-sqrt3, sqrt3].
#include <cstdio>

#include "kacsphere/conditioned_tensor.hpp"

using namespace kacsphere;

int main() {
  const auto f = make_density("uniform", 1);
  const double limit = relative_entropy_1d(*f);
  std::printf("H(f|gamma) = %.6f\n", limit);
  std::printf("%6s %14s %16s %14s\n", "N", "W1(F^N_1,f)", "H(F^N|g^N)/N", "Z'_N");
  for (int N : {8, 16, 32, 64, 128}) {
    ConditionedLaw law(f, N);
    std::printf("%6d %14.6e %16.8f %14.6f\n", N, w1_conditioned(law).w1, entropy_per_particle(law),
                std::exp(law.log_z_prime()));
  }
}

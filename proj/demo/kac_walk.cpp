// Relaxation of a bimodal start under the Kac walk in d = 3.
#include <cstdio>

#include "kacsphere/kac_dsmc.hpp"

using namespace kacsphere;

int main() {
  const int d = 3, N = 128;
  const auto kernel = CollisionKernel::uniform(d);
  DsmcOptions opt;
  opt.t_end = 10.0 * kernel.mean_free_time(N);
  opt.intervals = 10;
  opt.replicas = 2000;
  opt.seed = 1;
  const auto res = run(initial_projected(make_density("mixture", d), N, 1), kernel, {moment_observable(4)}, opt);
  std::printf("%8s %12s %10s %12s %10s\n", "t", "E|v1|^4", "stderr", "H(v1|g)", "stderr");
  const auto m4 = res.series("E|v1|^4"), h = res.series("H(v1|gamma)");
  for (std::size_t g = 0; g < m4.size(); ++g)
    std::printf("%8.2f %12.4f %10.4f %12.4f %10.4f\n", m4[g].t / kernel.mean_free_time(N), m4[g].mean,
                m4[g].std_error, h[g].mean, h[g].std_error);
  std::printf("Gaussian value of E|v|^4: %d, collisions: %llu\n", d * (d + 2),
              static_cast<unsigned long long>(res.collisions));
}

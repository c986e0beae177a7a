// SPDX-License-Identifier: Apache-2.0
// Throughput probe for the forest and recursive samplers.

#include <chrono>
#include <cstdio>
#include <cstdlib>

#include "hierperc/percsim.hpp"

int main(int argc, char** argv) {
  using namespace hierperc;
  const double alpha = argc > 1 ? std::atof(argv[1]) : 0.5;
  const double beta = argc > 2 ? std::atof(argv[2]) : 1.0;
  const int n = argc > 3 ? std::atoi(argv[3]) : 16;
  const int reps = argc > 4 ? std::atoi(argv[4]) : 20;
  ModelParams p{1, 2, alpha, beta};

  SamplerOptions opt;
  opt.exponents = {2.0, 3.0, 4.0};
  ForestSampler fs(p, n, opt);
  ClusterForest f;
  double m2 = 0;
  auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) {
    fs.run(1, static_cast<std::uint64_t>(r), f, [&](const LevelSnapshot& s) {
      if (s.level == n) m2 += static_cast<double>(s.power_sum(0, 0));
    });
  }
  auto t1 = std::chrono::steady_clock::now();
  double m2s = 0;
  for (int r = 0; r < reps; ++r) m2s += sample_sizes(p, n, 2, static_cast<std::uint64_t>(r)).power_sum(2);
  auto t2 = std::chrono::steady_clock::now();
  std::printf("forest %.3f ms/rep  mean m2 %.4g   sizes %.3f ms/rep mean m2 %.4g\n",
              std::chrono::duration<double, std::milli>(t1 - t0).count() / reps, m2 / reps,
              std::chrono::duration<double, std::milli>(t2 - t1).count() / reps, m2s / reps);
}

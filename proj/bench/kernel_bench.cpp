// Serial vs OpenMP grid evaluation of the default workload.
//
//   spmd_kernel_bench [points...]      (default: 100000 1000000 4000000)

#include <omp.h>

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <vector>

#include "spmd/bench.hpp"
#include "spmd/cpu_clock.hpp"
#include "spmd/expr.hpp"
#include "spmd/grid.hpp"

namespace {

struct Sample {
  double wall;
  double cpu;
};

template <typename Kernel>
Sample time_kernel(Kernel&& kernel, int repeats) {
  Sample best{1e300, 0.0};
  for (int r = 0; r < repeats; ++r) {
    spmd::WallTimer timer;
    const auto result = kernel();
    const double wall = timer.seconds();
    if (wall < best.wall) best = {wall, result.cpu_seconds};
  }
  return best;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<long> sizes;
  for (int i = 1; i < argc; ++i) sizes.push_back(std::atol(argv[i]));
  if (sizes.empty()) sizes = {100000, 1000000, 4000000};

  const auto expression = spmd::expr::parse(spmd::bench::kDefaultExpression);
  std::printf("threads=%d\n", omp_get_max_threads());
  std::printf("points,serial_wall,parallel_wall,serial_cpu,parallel_cpu,"
              "speedup,bitwise_equal\n");
  for (long n : sizes) {
    if (n < 1) continue;
    const auto points = spmd::grid::range_points(0, n - 1, 0.001);
    const auto serial = spmd::expr::eval_grid(expression, points);
    const auto parallel = spmd::expr::eval_grid_parallel(expression, points);
    const bool equal =
        serial.nan_count == parallel.nan_count &&
        std::memcmp(serial.values.data(), parallel.values.data(),
                    serial.values.size() * sizeof(double)) == 0;

    const Sample s =
        time_kernel([&] { return spmd::expr::eval_grid(expression, points); }, 3);
    const Sample p = time_kernel(
        [&] { return spmd::expr::eval_grid_parallel(expression, points); }, 3);
    std::printf("%ld,%.6f,%.6f,%.6f,%.6f,%.3f,%s\n", n, s.wall, p.wall, s.cpu,
                p.cpu, s.wall / p.wall, equal ? "yes" : "no");
    if (!equal) return 1;
  }
  return 0;
}

#include "spmd/grid.hpp"

#include <cmath>
#include <string>

#include "spmd/errors.hpp"

namespace spmd::grid {

GridSpec::GridSpec(double maxvalue, double step)
    : maxvalue_(maxvalue), step_(step), last_index_(0) {
  if (!(std::isfinite(step) && step > 0.0))
    throw InvalidGrid("step must be a positive finite number");
  if (!(std::isfinite(maxvalue) && maxvalue > 0.0))
    throw InvalidGrid("maxvalue must be a positive finite number");
  const double ratio = maxvalue / step;
  if (ratio > 9.0e15) throw InvalidGrid("grid has too many points");
  last_index_ = std::llround(ratio);
  if (std::fabs(static_cast<double>(last_index_) * step - maxvalue) >
      1e-9 * maxvalue)
    throw InvalidGrid("maxvalue " + std::to_string(maxvalue) +
                      " is not a multiple of step " + std::to_string(step));
  if (last_index_ < 1) throw InvalidGrid("grid needs at least two points");
}

std::vector<Partition> plan_partitions(const GridSpec& grid, int nproc) {
  const std::int64_t n = grid.last_index();
  if (nproc < 1 || nproc > n)
    throw InvalidPartitioning("nproc must be in [1, " + std::to_string(n) +
                              "], got " + std::to_string(nproc));
  const std::int64_t points = n + 1;
  const std::int64_t base = points / nproc;
  const std::int64_t extra = points % nproc;

  std::vector<Partition> parts;
  parts.reserve(static_cast<std::size_t>(nproc));
  std::int64_t start = 0;
  for (int i = 0; i < nproc; ++i) {
    const std::int64_t size = base + (i < extra ? 1 : 0);
    parts.push_back({i, start, start + size - 1});
    start += size;
  }
  return parts;
}

double grid_point(std::int64_t k, const GridSpec& grid) {
  if (k < 0 || k > grid.last_index())
    throw IndexOutOfRange("grid index " + std::to_string(k) +
                          " outside [0, " + std::to_string(grid.last_index()) +
                          "]");
  return grid_point(k, grid.step());
}

std::vector<double> range_points(std::int64_t start_index,
                                 std::int64_t end_index, double step) {
  if (start_index < 0 || end_index < start_index)
    throw IndexOutOfRange("bad index range [" + std::to_string(start_index) +
                          ", " + std::to_string(end_index) + "]");
  std::vector<double> points;
  points.reserve(static_cast<std::size_t>(end_index - start_index + 1));
  for (std::int64_t k = start_index; k <= end_index; ++k)
    points.push_back(grid_point(k, step));
  return points;
}

std::vector<double> partition_points(const Partition& p, const GridSpec& grid) {
  if (p.start_index < 0 || p.end_index > grid.last_index() ||
      p.start_index > p.end_index)
    throw IndexOutOfRange("partition [" + std::to_string(p.start_index) +
                          ", " + std::to_string(p.end_index) +
                          "] does not fit grid 0.." +
                          std::to_string(grid.last_index()));
  return range_points(p.start_index, p.end_index, grid.step());
}

}  // namespace spmd::grid

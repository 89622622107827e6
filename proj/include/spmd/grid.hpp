#pragma once

#include <cstdint>
#include <vector>

namespace spmd::grid {

// The global sample grid 0, step, 2*step, ..., maxvalue.
class GridSpec {
 public:
  // Throws InvalidGrid unless step > 0, maxvalue > 0 and maxvalue lies on
  // the step grid within 1e-9 relative.
  GridSpec(double maxvalue, double step);

  double maxvalue() const noexcept { return maxvalue_; }
  double step() const noexcept { return step_; }
  // Index of the last grid point (N); the grid holds N + 1 points.
  std::int64_t last_index() const noexcept { return last_index_; }
  std::int64_t point_count() const noexcept { return last_index_ + 1; }

 private:
  double maxvalue_;
  double step_;
  std::int64_t last_index_;
};

// Inclusive range of global grid indices owned by one worker.
struct Partition {
  int rank = 0;
  std::int64_t start_index = 0;
  std::int64_t end_index = 0;

  std::int64_t size() const noexcept { return end_index - start_index + 1; }
  friend bool operator==(const Partition&, const Partition&) = default;
};

// Splits indices 0..N into nproc contiguous ranges in rank order; sizes
// differ by at most one and the larger ranges go to the lower ranks.
// Throws InvalidPartitioning unless 1 <= nproc <= N.
std::vector<Partition> plan_partitions(const GridSpec& grid, int nproc);

// k * step as a single multiplication, so every worker computing index k
// gets the same bits.
inline double grid_point(std::int64_t k, double step) {
  return static_cast<double>(k) * step;
}

// Throws IndexOutOfRange unless 0 <= k <= N.
double grid_point(std::int64_t k, const GridSpec& grid);

// Points of an index range; only requires a positive step.
std::vector<double> range_points(std::int64_t start_index,
                                 std::int64_t end_index, double step);

// Throws IndexOutOfRange when p does not fit inside grid.
std::vector<double> partition_points(const Partition& p, const GridSpec& grid);

}  // namespace spmd::grid

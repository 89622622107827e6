#include <doctest.h>

#include <bit>
#include <cstdint>

#include "spmd/errors.hpp"
#include "spmd/grid.hpp"

using namespace spmd::grid;

namespace {

std::vector<std::pair<std::int64_t, std::int64_t>> ranges(
    const std::vector<Partition>& parts) {
  std::vector<std::pair<std::int64_t, std::int64_t>> out;
  for (const auto& p : parts) out.emplace_back(p.start_index, p.end_index);
  return out;
}

using Ranges = std::vector<std::pair<std::int64_t, std::int64_t>>;

}  // namespace

TEST_CASE("GridSpec validation") {
  CHECK(GridSpec(100, 1).last_index() == 100);
  CHECK(GridSpec(20000, 0.001).last_index() == 20'000'000);
  CHECK(GridSpec(60000, 0.001).point_count() == 60'000'001);
  CHECK(GridSpec(1, 0.5).last_index() == 2);
  CHECK_THROWS_AS(GridSpec(1, 0), spmd::InvalidGrid);
  CHECK_THROWS_AS(GridSpec(1, -0.5), spmd::InvalidGrid);
  CHECK_THROWS_AS(GridSpec(0, 0.5), spmd::InvalidGrid);
  CHECK_THROWS_AS(GridSpec(1.3, 0.5), spmd::InvalidGrid);
  CHECK_THROWS_AS(GridSpec(0.1, 0.5), spmd::InvalidGrid);
}

TEST_CASE("plan_partitions examples") {
  CHECK(ranges(plan_partitions(GridSpec(100, 1), 4)) ==
        Ranges{{0, 25}, {26, 50}, {51, 75}, {76, 100}});
  CHECK(ranges(plan_partitions(GridSpec(100, 1), 1)) == Ranges{{0, 100}});
  CHECK(ranges(plan_partitions(GridSpec(10, 1), 3)) ==
        Ranges{{0, 3}, {4, 7}, {8, 10}});
}

TEST_CASE("plan_partitions rejects bad worker counts") {
  CHECK_THROWS_AS(plan_partitions(GridSpec(10, 1), 0), spmd::InvalidPartitioning);
  CHECK_THROWS_AS(plan_partitions(GridSpec(10, 1), 11), spmd::InvalidPartitioning);
  CHECK_NOTHROW(plan_partitions(GridSpec(10, 1), 10));
}

TEST_CASE("property: exact ordered cover with imbalance <= 1") {
  for (std::int64_t n = 1; n <= 200; ++n) {
    const GridSpec grid(static_cast<double>(n), 1.0);
    for (int nproc = 1; nproc <= n; ++nproc) {
      const auto parts = plan_partitions(grid, nproc);
      REQUIRE(parts.size() == static_cast<std::size_t>(nproc));
      std::int64_t next = 0;
      std::int64_t smallest = n + 1, largest = 0;
      for (int r = 0; r < nproc; ++r) {
        const auto& p = parts[static_cast<std::size_t>(r)];
        REQUIRE(p.rank == r);
        REQUIRE(p.start_index == next);
        REQUIRE(p.start_index <= p.end_index);
        next = p.end_index + 1;
        smallest = std::min(smallest, p.size());
        largest = std::max(largest, p.size());
      }
      REQUIRE(next == n + 1);
      REQUIRE(largest - smallest <= 1);
      if (n % nproc == 0) {
        REQUIRE(parts[0].size() == n / nproc + 1);
        for (int r = 1; r < nproc; ++r)
          REQUIRE(parts[static_cast<std::size_t>(r)].size() == n / nproc);
      }
    }
  }
}

TEST_CASE("grid_point is a single multiplication") {
  const GridSpec grid(100, 0.001);
  CHECK(grid_point(0, grid) == 0.0);
  CHECK(grid_point(1000, grid) == 1000 * 0.001);
  CHECK(grid_point(1000, grid) == 1.0);
  CHECK(grid_point(3, GridSpec(2, 0.5)) == 1.5);
  CHECK_THROWS_AS(grid_point(-1, grid), spmd::IndexOutOfRange);
  CHECK_THROWS_AS(grid_point(100001, grid), spmd::IndexOutOfRange);
}

TEST_CASE("partition_points") {
  CHECK(partition_points({0, 0, 2}, GridSpec(2, 0.5)) ==
        std::vector<double>{0.0, 0.5, 1.0});

  const GridSpec grid(0.1, 0.001);
  REQUIRE(grid.last_index() == 100);
  const auto pts = partition_points({1, 26, 50}, grid);
  CHECK(pts.size() == 25);
  CHECK(pts.front() == 26 * 0.001);
  CHECK(pts.back() == 50 * 0.001);

  CHECK_THROWS_AS(partition_points({0, 0, 101}, grid), spmd::IndexOutOfRange);
  CHECK_THROWS_AS(partition_points({0, 5, 4}, grid), spmd::IndexOutOfRange);
}

TEST_CASE("property: partition points reassemble the grid bitwise") {
  for (const auto& [maxvalue, step] :
       std::vector<std::pair<double, double>>{{0.1, 0.001}, {100, 0.001},
                                              {20, 0.001}, {3, 0.1}}) {
    const GridSpec grid(maxvalue, step);
    std::vector<double> full;
    for (std::int64_t k = 0; k <= grid.last_index(); ++k)
      full.push_back(static_cast<double>(k) * step);
    for (int nproc : {1, 2, 3, 4, 7, 8, 12, 16}) {
      if (nproc > grid.last_index()) continue;
      std::vector<double> joined;
      for (const auto& p : plan_partitions(grid, nproc)) {
        const auto pts = partition_points(p, grid);
        joined.insert(joined.end(), pts.begin(), pts.end());
      }
      REQUIRE(joined.size() == full.size());
      bool same = true;
      for (std::size_t i = 0; i < full.size(); ++i)
        same = same && std::bit_cast<std::uint64_t>(joined[i]) ==
                           std::bit_cast<std::uint64_t>(full[i]);
      CHECK(same);
    }
  }
}

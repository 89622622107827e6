#include <doctest.h>

#include <bit>
#include <cstdint>

#include "spmd/protocol.hpp"
#include "spmd/worker.hpp"
#include "test_support.hpp"

using namespace spmd;
using spmd::testing::TempDir;
namespace fs = std::filesystem;

namespace {

protocol::WorkerSpec make_spec(const fs::path& dir, int rank, std::int64_t start,
                               std::int64_t end, double step,
                               std::string expression, bool store = true) {
  protocol::WorkerSpec s;
  s.rank = rank;
  s.start_index = start;
  s.end_index = end;
  s.step = step;
  s.expression = std::move(expression);
  s.store_values = store;
  s.workdir = dir;
  return s;
}

fs::path prepare(const protocol::WorkerSpec& spec) {
  protocol::create_lock(spec.workdir, spec.rank);
  return protocol::write_worker_spec(spec);
}

bool exactly_one_outcome(const fs::path& dir, int rank) {
  return fs::exists(protocol::result_path(dir, rank)) !=
         fs::exists(protocol::failure_path(dir, rank));
}

}  // namespace

TEST_CASE("identity worker") {
  TempDir dir;
  const auto path = prepare(make_spec(dir.path(), 0, 0, 2, 0.5, "x"));
  CHECK(worker::run_worker(path) == worker::kExitSuccess);
  CHECK_FALSE(protocol::lock_exists(dir.path(), 0));
  const auto r = protocol::read_result(dir.path(), 0);
  CHECK(r.values == std::vector<double>{0.0, 0.5, 1.0});
  CHECK(r.value_count == 3);
  CHECK(r.nan_count == 0);
  CHECK(r.cpu_seconds >= 0.0);
  CHECK(exactly_one_outcome(dir.path(), 0));
}

TEST_CASE("worker with an unparsable expression") {
  TempDir dir;
  const auto path = prepare(make_spec(dir.path(), 0, 0, 2, 0.5, "sin("));
  CHECK(worker::run_worker(path) != worker::kExitSuccess);
  CHECK_FALSE(protocol::lock_exists(dir.path(), 0));
  const auto failures = protocol::check_failures(dir.path(), 1);
  REQUIRE(failures.size() == 1);
  CHECK(failures[0].message.find("position 4") != std::string::npos);
  CHECK(exactly_one_outcome(dir.path(), 0));
}

TEST_CASE("worker on the NaN point of the default workload") {
  TempDir dir;
  const auto path =
      prepare(make_spec(dir.path(), 3, 0, 0, 0.001, testing::kPaperExpression));
  CHECK(worker::run_worker(path) == worker::kExitSuccess);
  const auto r = protocol::read_result(dir.path(), 3);
  CHECK(r.value_count == 1);
  CHECK(r.nan_count == 1);
}

TEST_CASE("worker without value storage") {
  TempDir dir;
  const auto path = prepare(make_spec(dir.path(), 1, 10, 12, 0.5, "x", false));
  CHECK(worker::run_worker(path) == worker::kExitSuccess);
  const auto r = protocol::read_result(dir.path(), 1);
  CHECK(r.values.empty());
  CHECK(r.value_count == 3);
}

TEST_CASE("missing spec file leaves a marker when the workdir is known") {
  TempDir dir;
  protocol::create_lock(dir.path(), 4);
  CHECK(worker::run_worker(protocol::spec_path(dir.path(), 4)) !=
        worker::kExitSuccess);
  CHECK(fs::exists(protocol::failure_path(dir.path(), 4)));
  CHECK_FALSE(protocol::lock_exists(dir.path(), 4));
}

TEST_CASE("unrecognizable spec path leaves the lock alone") {
  TempDir dir;
  protocol::create_lock(dir.path(), 0);
  CHECK(worker::run_worker(dir.path() / "whatever.txt") != worker::kExitSuccess);
  CHECK(protocol::lock_exists(dir.path(), 0));
  CHECK(protocol::check_failures(dir.path(), 1).empty());
}

TEST_CASE("rerun overwrites deterministically and clears stale outcomes") {
  TempDir dir;
  auto spec = make_spec(dir.path(), 0, 0, 500, 0.01, testing::kPaperExpression);
  auto path = prepare(spec);
  REQUIRE(worker::run_worker(path) == 0);
  const auto first = protocol::read_result(dir.path(), 0);

  path = prepare(spec);
  REQUIRE(worker::run_worker(path) == 0);
  const auto second = protocol::read_result(dir.path(), 0);
  REQUIRE(first.values.size() == second.values.size());
  for (std::size_t i = 0; i < first.values.size(); ++i)
    CHECK(std::bit_cast<std::uint64_t>(first.values[i]) ==
          std::bit_cast<std::uint64_t>(second.values[i]));

  spec.expression = "foo(x)";
  path = prepare(spec);
  CHECK(worker::run_worker(path) != 0);
  CHECK(exactly_one_outcome(dir.path(), 0));

  spec.expression = "x";
  path = prepare(spec);
  CHECK(worker::run_worker(path) == 0);
  CHECK(exactly_one_outcome(dir.path(), 0));
}

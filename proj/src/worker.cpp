#include "spmd/worker.hpp"

#include <exception>
#include <optional>
#include <string>

#include "spmd/expr.hpp"
#include "spmd/grid.hpp"
#include "spmd/protocol.hpp"

namespace spmd::worker {
namespace {

namespace fs = std::filesystem;
namespace proto = spmd::protocol;

void execute(const proto::WorkerSpec& spec) {
  const expr::Expression expression = expr::parse(spec.expression);
  const std::vector<double> points =
      grid::range_points(spec.start_index, spec.end_index, spec.step);

  expr::GridEvaluation evaluation = expr::eval_grid(expression, points);

  proto::WorkerResult result;
  result.rank = spec.rank;
  result.cpu_seconds = evaluation.cpu_seconds;
  result.nan_count = evaluation.nan_count;
  result.value_count = evaluation.values.size();
  if (spec.store_values) result.values = std::move(evaluation.values);
  proto::write_result(spec.workdir, result);
}

}  // namespace

int run_worker(const fs::path& spec_path) {
  std::optional<int> rank = proto::rank_from_spec_path(spec_path);
  fs::path workdir = spec_path.parent_path();
  if (workdir.empty()) workdir = ".";

  std::string diagnostic;
  try {
    const proto::WorkerSpec spec = proto::read_worker_spec(spec_path);
    rank = spec.rank;
    workdir = spec.workdir.empty() ? fs::path(".") : spec.workdir;
    execute(spec);
    fs::remove(proto::failure_path(workdir, spec.rank));
    proto::remove_lock(workdir, spec.rank);
    return kExitSuccess;
  } catch (const std::exception& e) {
    diagnostic = e.what();
  } catch (...) {
    diagnostic = "unknown error";
  }

  std::error_code ec;
  if (!rank || !fs::is_directory(workdir, ec)) return kExitFailure;
  try {
    fs::remove(proto::result_path(workdir, *rank), ec);
    proto::write_failure_marker(workdir, *rank, diagnostic);
    proto::remove_lock(workdir, *rank);
  } catch (...) {
  }
  return kExitFailure;
}

}  // namespace spmd::worker

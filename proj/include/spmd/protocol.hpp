#pragma once

// On-disk coordination artifacts shared by the master and the workers.
//
//   <workdir>/fileworker<r>.spec   worker assignment, key=value lines
//   <workdir>/filelock<r>          zero-byte; present while worker r runs
//   <workdir>/out<r>               worker result, "# spmdresult v1" text
//   <workdir>/fail<r>              diagnostic left by a failed worker
//
// Ranks are written in decimal without padding. All doubles use the
// shortest decimal form that reads back to the same bits.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace spmd::protocol {

namespace fs = std::filesystem;

inline constexpr int kSpecFormatVersion = 1;
inline constexpr std::string_view kResultHeader = "# spmdresult v1";

struct WorkerSpec {
  int rank = 0;
  std::int64_t start_index = 0;
  std::int64_t end_index = 0;
  double step = 0.0;
  std::string expression;
  bool store_values = true;
  // Not serialized; read_worker_spec fills it with the spec file's directory.
  fs::path workdir;

  friend bool operator==(const WorkerSpec&, const WorkerSpec&) = default;
};

struct WorkerResult {
  // -1 for a merged result written without a rank line.
  int rank = 0;
  double cpu_seconds = 0.0;
  std::size_t nan_count = 0;
  // Empty when the worker ran without storing values.
  std::vector<double> values;
  std::size_t value_count = 0;
};

fs::path spec_path(const fs::path& workdir, int rank);
fs::path lock_path(const fs::path& workdir, int rank);
fs::path result_path(const fs::path& workdir, int rank);
fs::path failure_path(const fs::path& workdir, int rank);

// Rank encoded in a "fileworker<r>.spec" file name, if any.
std::optional<int> rank_from_spec_path(const fs::path& path);

std::string format_double(double value);
// Accepts the output of format_double, including "nan", "-nan" and "inf".
std::optional<double> parse_double(std::string_view text);

std::string serialize_worker_spec(const WorkerSpec& spec);
// Throws MalformedSpec or a ParseError from the expression.
WorkerSpec deserialize_worker_spec(std::string_view text);

// Writes <spec.workdir>/fileworker<rank>.spec. Throws IoError.
fs::path write_worker_spec(const WorkerSpec& spec);
// Throws IoError, MalformedSpec or ParseError.
WorkerSpec read_worker_spec(const fs::path& path);

fs::path create_lock(const fs::path& workdir, int rank);
bool lock_exists(const fs::path& workdir, int rank);
// No-op when the lock is already gone.
void remove_lock(const fs::path& workdir, int rank);

// Omits the rank line when result.rank < 0.
std::string serialize_result(const WorkerResult& result);
// expected_rank < 0 accepts any rank line or none.
WorkerResult deserialize_result(std::string_view text, int expected_rank = -1);

// Writes to a temporary file in the same directory, syncs it, then renames
// it over the target so readers never observe a partial file.
void write_result_file(const fs::path& path, const WorkerResult& result);
WorkerResult read_result_file(const fs::path& path, int expected_rank = -1);

fs::path write_result(const fs::path& workdir, const WorkerResult& result);
// Throws IoError when out<rank> is missing, MalformedResult when it is bad.
WorkerResult read_result(const fs::path& workdir, int rank);

struct FailureRecord {
  int rank;
  std::string message;
  friend bool operator==(const FailureRecord&, const FailureRecord&) = default;
};

void write_failure_marker(const fs::path& workdir, int rank,
                          std::string_view message);
// Markers for ranks 0..nproc-1 in rank order.
std::vector<FailureRecord> check_failures(const fs::path& workdir, int nproc);

// Deletes fileworker*, filelock*, out*, fail* artifacts (and leftover
// temporaries) from an earlier job. Returns the number of files removed.
std::size_t clean_workdir(const fs::path& workdir);

}  // namespace spmd::protocol

#pragma once

#include <sys/types.h>

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spmd/grid.hpp"
#include "spmd/protocol.hpp"

namespace spmd::master {

namespace fs = std::filesystem;

struct JobSpec {
  int nproc = 1;
  grid::GridSpec grid;
  std::string expression;
  bool store_values = true;
};

// Throws InvalidPartitioning or a ParseError.
void validate(const JobSpec& job);

struct LaunchConfig {
  fs::path workdir;
  // Empty: spawn every worker locally.
  std::vector<std::string> nodes;
  // Shell command run through /bin/sh -c. Placeholders: {spec} (required),
  // {node} (required iff nodes is non-empty), {exe} (worker executable).
  // Empty: direct local spawn, or "ssh {node} {exe} worker --spec {spec}"
  // when nodes are given.
  std::string launcher_template;
  std::chrono::milliseconds poll_interval{100};
  std::optional<std::chrono::milliseconds> timeout;
  // Binary providing the "worker" subcommand; empty means this executable.
  fs::path worker_executable;
};

inline constexpr const char* kDefaultRemoteTemplate =
    "ssh {node} {exe} worker --spec {spec}";

// Throws ConfigError.
void validate(const LaunchConfig& config);

// nodes[rank mod size]. Throws EmptyNodeList.
const std::string& assign_node(int rank, std::span<const std::string> nodes);

fs::path resolve_worker_executable(const LaunchConfig& config);

// argv that launches worker `rank`.
std::vector<std::string> launch_command(int rank, const fs::path& spec_path,
                                        const LaunchConfig& config);

// Handle for a spawned launcher process, used only to detect launch
// failures; completion is signalled through lock files.
class WorkerProcess {
 public:
  WorkerProcess(int rank, pid_t pid) : rank_(rank), pid_(pid) {}
  WorkerProcess(WorkerProcess&& other) noexcept;
  WorkerProcess& operator=(WorkerProcess&& other) noexcept;
  WorkerProcess(const WorkerProcess&) = delete;
  WorkerProcess& operator=(const WorkerProcess&) = delete;
  // Kills and reaps a process that is still running.
  ~WorkerProcess();

  int rank() const noexcept { return rank_; }
  pid_t pid() const noexcept { return pid_; }
  bool running() const noexcept { return pid_ > 0; }

  // Raw wait status once the process has exited, without blocking.
  std::optional<int> poll();
  int wait();
  void terminate();

 private:
  int rank_;
  pid_t pid_;
};

// Throws SpawnError.
WorkerProcess launch_worker(int rank, const fs::path& spec_path,
                            const LaunchConfig& config);

// Returns once filelock0..filelock<nproc-1> are all gone, sleeping
// poll_interval between scans. on_scan runs after every scan that leaves
// ranks pending. Throws TimeoutExpired listing the pending ranks.
void poll_locks(const fs::path& workdir, int nproc, const LaunchConfig& config,
                const std::function<void()>& on_scan = {});

struct TimingReport {
  double wall_elapsed_seconds = 0.0;
  double master_cpu_seconds = 0.0;
  double sum_worker_cpu_seconds = 0.0;
  double mean_worker_cpu_seconds = 0.0;
};

// Throws EmptyResults.
TimingReport compute_timings(double wall_seconds, double master_cpu_seconds,
                             std::span<const protocol::WorkerResult> results);

struct MergedResult {
  std::vector<double> values;
  std::size_t total_nan_count = 0;
  std::vector<protocol::WorkerResult> per_worker;
};

// Throws WorkerFailed, CountMismatch, MalformedResult or IoError.
MergedResult merge_results(const fs::path& workdir, const JobSpec& job);

// The merged job output in result-file form, without a rank line.
protocol::WorkerResult as_result(const MergedResult& merged);

struct JobOutcome {
  MergedResult merged;
  TimingReport timing;
};

JobOutcome run_job(const JobSpec& job, const LaunchConfig& config);

}  // namespace spmd::master

#include "spmd/master.hpp"

#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <thread>

#include "spmd/cpu_clock.hpp"
#include "spmd/errors.hpp"
#include "spmd/expr.hpp"

extern char** environ;

namespace spmd {

namespace {

std::string join_ranks(const std::vector<int>& ranks) {
  std::string out;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(ranks[i]);
  }
  return out;
}

std::string describe(const std::vector<WorkerFailure>& failures) {
  std::string out = "worker(s) failed:";
  for (const auto& f : failures)
    out += " [rank " + std::to_string(f.rank) + ": " + f.message + "]";
  return out;
}

}  // namespace

TimeoutExpired::TimeoutExpired(std::vector<int> pending)
    : Error("timed out waiting for rank(s) " + join_ranks(pending)),
      pending_(std::move(pending)) {}

WorkerFailed::WorkerFailed(std::vector<WorkerFailure> failures)
    : Error(describe(failures)), failures_(std::move(failures)) {}

}  // namespace spmd

namespace spmd::master {
namespace {

void replace_all(std::string& text, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = text.find(from, pos)) != std::string::npos) {
    text.replace(pos, from.size(), to);
    pos += to.size();
  }
}

// Shell exit status for "command not found" / "not executable".
bool is_launch_failure(int status) {
  return WIFEXITED(status) &&
         (WEXITSTATUS(status) == 127 || WEXITSTATUS(status) == 126);
}

}  // namespace

void validate(const JobSpec& job) {
  if (job.nproc < 1 || job.nproc > job.grid.last_index())
    throw InvalidPartitioning("nproc must be in [1, " +
                              std::to_string(job.grid.last_index()) +
                              "], got " + std::to_string(job.nproc));
  expr::parse(job.expression);
}

void validate(const LaunchConfig& config) {
  if (config.poll_interval.count() <= 0)
    throw ConfigError("poll interval must be positive");
  if (config.timeout && config.timeout->count() <= 0)
    throw ConfigError("timeout must be positive");
  if (config.workdir.empty()) throw ConfigError("workdir is required");
  for (const auto& node : config.nodes)
    if (node.empty()) throw ConfigError("empty node name");
  if (config.launcher_template.empty()) return;
  if (config.launcher_template.find("{spec}") == std::string::npos)
    throw ConfigError("launcher template must contain {spec}");
  const bool has_node =
      config.launcher_template.find("{node}") != std::string::npos;
  if (has_node && config.nodes.empty())
    throw ConfigError("launcher template uses {node} but no nodes were given");
  if (!has_node && !config.nodes.empty())
    throw ConfigError("nodes were given but launcher template lacks {node}");
}

const std::string& assign_node(int rank, std::span<const std::string> nodes) {
  if (nodes.empty()) throw EmptyNodeList();
  const auto n = static_cast<long long>(nodes.size());
  return nodes[static_cast<std::size_t>(((rank % n) + n) % n)];
}

fs::path resolve_worker_executable(const LaunchConfig& config) {
  if (!config.worker_executable.empty()) return config.worker_executable;
  std::error_code ec;
  fs::path self = fs::read_symlink("/proc/self/exe", ec);
  if (ec) throw SpawnError("cannot resolve own executable: " + ec.message());
  return self;
}

std::vector<std::string> launch_command(int rank, const fs::path& spec_path,
                                        const LaunchConfig& config) {
  const fs::path exe = resolve_worker_executable(config);
  std::string tmpl = config.launcher_template;
  if (tmpl.empty()) {
    if (config.nodes.empty())
      return {exe.string(), "worker", "--spec", spec_path.string()};
    tmpl = kDefaultRemoteTemplate;
  }
  if (!config.nodes.empty())
    replace_all(tmpl, "{node}", assign_node(rank, config.nodes));
  replace_all(tmpl, "{exe}", exe.string());
  replace_all(tmpl, "{spec}", spec_path.string());
  return {"/bin/sh", "-c", tmpl};
}

WorkerProcess::WorkerProcess(WorkerProcess&& other) noexcept
    : rank_(other.rank_), pid_(std::exchange(other.pid_, -1)) {}

WorkerProcess& WorkerProcess::operator=(WorkerProcess&& other) noexcept {
  if (this != &other) {
    terminate();
    rank_ = other.rank_;
    pid_ = std::exchange(other.pid_, -1);
  }
  return *this;
}

WorkerProcess::~WorkerProcess() { terminate(); }

std::optional<int> WorkerProcess::poll() {
  if (pid_ <= 0) return std::nullopt;
  int status = 0;
  const pid_t r = ::waitpid(pid_, &status, WNOHANG);
  if (r == pid_) {
    pid_ = -1;
    return status;
  }
  if (r < 0 && errno == ECHILD) pid_ = -1;
  return std::nullopt;
}

int WorkerProcess::wait() {
  if (pid_ <= 0) return 0;
  int status = 0;
  while (::waitpid(pid_, &status, 0) < 0 && errno == EINTR) {
  }
  pid_ = -1;
  return status;
}

void WorkerProcess::terminate() {
  if (pid_ <= 0) return;
  if (!poll()) {
    ::kill(pid_, SIGKILL);
    wait();
  }
}

WorkerProcess launch_worker(int rank, const fs::path& spec_path,
                            const LaunchConfig& config) {
  std::vector<std::string> args = launch_command(rank, spec_path, config);
  std::vector<char*> argv;
  argv.reserve(args.size() + 1);
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);

  pid_t pid = 0;
  const int rc = ::posix_spawn(&pid, argv[0], nullptr, nullptr, argv.data(),
                               environ);
  if (rc != 0)
    throw SpawnError("cannot launch rank " + std::to_string(rank) + " (" +
                     args.front() + "): " + std::strerror(rc));
  return WorkerProcess(rank, pid);
}

void poll_locks(const fs::path& workdir, int nproc, const LaunchConfig& config,
                const std::function<void()>& on_scan) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  std::vector<int> pending(static_cast<std::size_t>(std::max(nproc, 0)));
  for (int i = 0; i < nproc; ++i) pending[static_cast<std::size_t>(i)] = i;

  for (;;) {
    std::erase_if(pending, [&](int rank) {
      return !protocol::lock_exists(workdir, rank);
    });
    if (pending.empty()) return;
    if (on_scan) on_scan();

    auto wait = std::chrono::duration_cast<clock::duration>(config.poll_interval);
    if (config.timeout) {
      const auto deadline = start + *config.timeout;
      const auto now = clock::now();
      if (now >= deadline) throw TimeoutExpired(pending);
      wait = std::min(wait, deadline - now);
    }
    std::this_thread::sleep_for(wait);
  }
}

TimingReport compute_timings(double wall_seconds, double master_cpu_seconds,
                             std::span<const protocol::WorkerResult> results) {
  if (results.empty()) throw EmptyResults();
  TimingReport report;
  report.wall_elapsed_seconds = std::max(wall_seconds, 0.0);
  report.master_cpu_seconds = std::max(master_cpu_seconds, 0.0);
  double sum = 0.0;
  for (const auto& r : results) sum += r.cpu_seconds;
  report.sum_worker_cpu_seconds = sum;
  report.mean_worker_cpu_seconds = sum / static_cast<double>(results.size());
  return report;
}

MergedResult merge_results(const fs::path& workdir, const JobSpec& job) {
  const auto failures = protocol::check_failures(workdir, job.nproc);
  if (!failures.empty()) {
    std::vector<WorkerFailure> list;
    for (const auto& f : failures) list.push_back({f.rank, f.message});
    throw WorkerFailed(std::move(list));
  }

  MergedResult merged;
  merged.per_worker.reserve(static_cast<std::size_t>(job.nproc));
  std::size_t total_count = 0;
  for (int rank = 0; rank < job.nproc; ++rank) {
    protocol::WorkerResult r = protocol::read_result(workdir, rank);
    if (job.store_values && r.values.size() != r.value_count)
      throw CountMismatch("rank " + std::to_string(rank) +
                          " stored no values for a storing job");
    total_count += r.value_count;
    merged.total_nan_count += r.nan_count;
    merged.per_worker.push_back(std::move(r));
  }
  const auto expected = static_cast<std::size_t>(job.grid.point_count());
  if (total_count != expected)
    throw CountMismatch("workers produced " + std::to_string(total_count) +
                        " values, grid has " + std::to_string(expected));
  if (job.store_values) {
    merged.values.reserve(expected);
    for (const auto& r : merged.per_worker)
      merged.values.insert(merged.values.end(), r.values.begin(),
                           r.values.end());
    for (auto& r : merged.per_worker) {
      r.values.clear();
      r.values.shrink_to_fit();
    }
  }
  return merged;
}

protocol::WorkerResult as_result(const MergedResult& merged) {
  protocol::WorkerResult r;
  r.rank = -1;
  r.nan_count = merged.total_nan_count;
  for (const auto& w : merged.per_worker) {
    r.cpu_seconds += w.cpu_seconds;
    r.value_count += w.value_count;
  }
  r.values = merged.values;
  return r;
}

JobOutcome run_job(const JobSpec& job, const LaunchConfig& config) {
  validate(job);
  validate(config);
  std::error_code ec;
  if (!fs::is_directory(config.workdir, ec))
    throw IoError("workdir " + config.workdir.string() + " is not a directory");
  protocol::clean_workdir(config.workdir);

  const auto partitions = grid::plan_partitions(job.grid, job.nproc);
  std::vector<fs::path> specs;
  specs.reserve(partitions.size());
  for (const auto& p : partitions) {
    protocol::create_lock(config.workdir, p.rank);
    protocol::WorkerSpec spec;
    spec.rank = p.rank;
    spec.start_index = p.start_index;
    spec.end_index = p.end_index;
    spec.step = job.grid.step();
    spec.expression = job.expression;
    spec.store_values = job.store_values;
    spec.workdir = config.workdir;
    specs.push_back(protocol::write_worker_spec(spec));
  }

  const double cpu_start = process_cpu_seconds();
  WallTimer wall;

  std::vector<WorkerProcess> processes;
  processes.reserve(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i)
    processes.push_back(launch_worker(static_cast<int>(i), specs[i], config));

  poll_locks(config.workdir, job.nproc, config, [&] {
    for (auto& proc : processes) {
      const auto status = proc.poll();
      if (status && is_launch_failure(*status) &&
          protocol::lock_exists(config.workdir, proc.rank()))
        throw SpawnError("launcher for rank " + std::to_string(proc.rank()) +
                         " exited with status " +
                         std::to_string(WEXITSTATUS(*status)));
    }
  });
  for (auto& proc : processes) proc.wait();

  JobOutcome outcome;
  outcome.merged = merge_results(config.workdir, job);
  const double wall_seconds = wall.seconds();
  const double master_cpu = process_cpu_seconds() - cpu_start;
  outcome.timing =
      compute_timings(wall_seconds, master_cpu, outcome.merged.per_worker);
  return outcome;
}

}  // namespace spmd::master

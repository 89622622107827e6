#include "spmd/cli.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "spmd/bench.hpp"
#include "spmd/errors.hpp"
#include "spmd/expr.hpp"
#include "spmd/grid.hpp"
#include "spmd/master.hpp"
#include "spmd/protocol.hpp"
#include "spmd/worker.hpp"

namespace spmd::cli {
namespace {

namespace fs = std::filesystem;

// Raised for flag combinations CLI11 cannot express.
struct UsageError : Error {
  using Error::Error;
};

std::vector<int> parse_int_list(const std::string& text, const char* flag) {
  std::vector<int> values;
  std::size_t begin = 0;
  while (begin <= text.size()) {
    std::size_t end = text.find(',', begin);
    if (end == std::string::npos) end = text.size();
    const std::string item = text.substr(begin, end - begin);
    char* stop = nullptr;
    const long v = std::strtol(item.c_str(), &stop, 10);
    if (item.empty() || *stop != '\0' || v < 1 || v > 1'000'000)
      throw UsageError(std::string(flag) + ": expected comma-separated positive "
                       "integers, got '" + text + "'");
    values.push_back(static_cast<int>(v));
    begin = end + 1;
  }
  return values;
}

std::vector<std::string> parse_nodes(const std::string& text) {
  std::vector<std::string> nodes;
  if (text.empty()) return nodes;
  std::size_t begin = 0;
  while (begin <= text.size()) {
    std::size_t end = text.find(',', begin);
    if (end == std::string::npos) end = text.size();
    std::string node = text.substr(begin, end - begin);
    if (node.empty()) throw UsageError("--nodes: empty node name");
    nodes.push_back(std::move(node));
    begin = end + 1;
  }
  return nodes;
}

std::string compact(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s = buf;
  if (s.find('.') != std::string::npos) {
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
  }
  return s;
}

void print_parse_error(std::ostream& err, const std::string& source,
                       const ParseError& e) {
  err << "error: " << e.message() << " at offset " << e.position() << "\n"
      << "  " << source << "\n"
      << "  " << std::string(e.position(), ' ') << "^\n";
}

struct LaunchFlags {
  std::string workdir;
  std::string nodes;
  std::string launcher;
  int poll_ms = 100;
  double timeout_s = 0.0;
  std::string worker_exe;

  void add_to(CLI::App& cmd) {
    cmd.add_option("--workdir", workdir,
                   "Shared work directory (default: $SPMD_WORKDIR)");
    cmd.add_option("--nodes", nodes,
                   "Comma-separated node names; empty runs all workers locally");
    cmd.add_option("--launcher", launcher,
                   "Launch command template with {node}, {spec} and {exe} "
                   "placeholders (default with nodes: ssh {node} {exe} worker "
                   "--spec {spec})");
    cmd.add_option("--poll-ms", poll_ms, "Lock polling interval in milliseconds")
        ->capture_default_str();
    cmd.add_option("--timeout-s", timeout_s,
                   "Give up after this many seconds (0 = wait forever)")
        ->capture_default_str();
    cmd.add_option("--worker-exe", worker_exe,
                   "Executable providing the worker subcommand (default: this "
                   "program)");
  }

  master::LaunchConfig build() const {
    master::LaunchConfig config;
    std::string dir = workdir;
    if (dir.empty())
      if (const char* env = std::getenv("SPMD_WORKDIR")) dir = env;
    if (dir.empty()) throw UsageError("--workdir is required");
    config.workdir = dir;
    config.nodes = parse_nodes(nodes);
    config.launcher_template = launcher;
    if (poll_ms <= 0) throw UsageError("--poll-ms must be positive");
    config.poll_interval = std::chrono::milliseconds(poll_ms);
    if (timeout_s < 0.0 || !std::isfinite(timeout_s))
      throw UsageError("--timeout-s must be >= 0");
    if (timeout_s > 0.0)
      config.timeout = std::chrono::milliseconds(
          static_cast<long long>(std::ceil(timeout_s * 1000.0)));
    config.worker_executable = worker_exe;
    master::validate(config);
    return config;
  }
};

int cmd_eval(const std::string& source, std::optional<double> x,
             std::optional<double> from, std::optional<double> to,
             std::optional<double> step, std::ostream& out, std::ostream& err) {
  const expr::Expression e = expr::parse(source);
  std::vector<double> points;
  if (x) {
    if (from || to || step)
      throw UsageError("--x cannot be combined with --from/--to/--step");
    points.push_back(*x);
  } else {
    if (!from || !to || !step)
      throw UsageError("give either --x or all of --from, --to and --step");
    if (!(*step > 0.0) || !(*to >= *from))
      throw UsageError("need --step > 0 and --to >= --from");
    const double span = (*to - *from) / *step;
    const auto last = static_cast<std::int64_t>(std::floor(span + 1e-9));
    for (std::int64_t k = 0; k <= last; ++k)
      points.push_back(*from + grid::grid_point(k, *step));
  }
  const auto result = expr::eval_grid(e, points);
  for (double v : result.values) out << protocol::format_double(v) << '\n';
  err << "nan_count=" << result.nan_count << '\n';
  return kExitOk;
}

int cmd_plan(double maxvalue, double step, int nproc, std::ostream& out) {
  const grid::GridSpec grid(maxvalue, step);
  const auto parts = grid::plan_partitions(grid, nproc);
  out << "rank\tstart_index\tend_index\tpoints\tfirst_x\tlast_x\n";
  for (const auto& p : parts) {
    out << p.rank << '\t' << p.start_index << '\t' << p.end_index << '\t'
        << p.size() << '\t'
        << protocol::format_double(grid::grid_point(p.start_index, grid)) << '\t'
        << protocol::format_double(grid::grid_point(p.end_index, grid)) << '\n';
  }
  return kExitOk;
}

void print_timing(const master::TimingReport& t, std::ostream& out) {
  out << "wall_elapsed_seconds=" << protocol::format_double(t.wall_elapsed_seconds)
      << '\n'
      << "master_cpu_seconds=" << protocol::format_double(t.master_cpu_seconds)
      << '\n'
      << "sum_worker_cpu_seconds="
      << protocol::format_double(t.sum_worker_cpu_seconds) << '\n'
      << "mean_worker_cpu_seconds="
      << protocol::format_double(t.mean_worker_cpu_seconds) << '\n';
}

int cmd_run(int nproc, double maxvalue, double step, const std::string& source,
            bool no_store, const LaunchFlags& flags, std::ostream& out) {
  const master::LaunchConfig config = flags.build();
  const master::JobSpec job{nproc, grid::GridSpec(maxvalue, step), source,
                            !no_store};
  master::validate(job);

  const fs::path final_path = config.workdir / "final.out";
  std::error_code ec;
  fs::remove(final_path, ec);

  const auto outcome = master::run_job(job, config);
  print_timing(outcome.timing, out);
  out << "value_count=" << job.grid.point_count() << '\n'
      << "nan_count=" << outcome.merged.total_nan_count << '\n';
  if (job.store_values) {
    protocol::write_result_file(final_path, master::as_result(outcome.merged));
    out << "output=" << final_path.string() << '\n';
  }
  return kExitOk;
}

struct BenchFlags {
  std::string nproc_list = "2,4,6,8,10,12,14,16";
  std::string m_list = "2,4,6";
  double scale = 10000.0;
  double step = 0.001;
  std::string expression{bench::kDefaultExpression};
  bool no_store = false;
  int repetitions = 1;
  std::string csv;
  std::string plot_dir;
  bool check_table1 = false;
};

int cmd_bench(const BenchFlags& b, const LaunchFlags& flags, std::ostream& out,
              std::ostream& err) {
  if (b.check_table1) {
    const auto table = bench::embedded_table1();
    out << bench::render_table(table);
    const auto check = bench::check_table1(table);
    for (const auto& line : check.lines) out << line << '\n';
    if (!check.passed) {
      err << "error: embedded table regression failed\n";
      return kExitRuntime;
    }
    return kExitOk;
  }

  bench::BenchConfig config;
  config.nproc_list = parse_int_list(b.nproc_list, "--nproc-list");
  config.m_list = parse_int_list(b.m_list, "--m-list");
  config.scale = b.scale;
  config.step = b.step;
  config.expression = b.expression;
  config.store_values = !b.no_store;
  config.repetitions = b.repetitions;
  bench::validate(config);
  // Reject misaligned grids before any cell runs.
  for (int m : config.m_list) grid::GridSpec(m * config.scale, config.step);
  const master::LaunchConfig launch = flags.build();

  const auto table = bench::run_grid(config, launch);
  out << bench::render_table(table);
  if (!b.csv.empty()) bench::emit_csv(table, b.csv);
  if (!b.plot_dir.empty()) bench::emit_plot_data(table, b.plot_dir);
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Master/worker grid evaluation over a shared work directory",
               "spmd"};
  app.require_subcommand(1);

  std::string source{bench::kDefaultExpression};
  std::optional<double> x, from, to, eval_step;
  auto* eval = app.add_subcommand("eval", "Evaluate an expression");
  eval->add_option("--expr", source, "Expression in x")->capture_default_str();
  eval->add_option("--x", x, "Single point");
  eval->add_option("--from", from, "Range start");
  eval->add_option("--to", to, "Range end (inclusive)");
  eval->add_option("--step", eval_step, "Range step");

  double maxvalue = 0.0;
  double step = 0.001;
  int nproc = 0;
  auto* plan = app.add_subcommand("plan", "Print the partition of the grid");
  plan->add_option("--maxvalue", maxvalue, "Upper end of the grid")->required();
  plan->add_option("--step", step, "Grid step")->capture_default_str();
  plan->add_option("--nproc", nproc, "Number of workers")->required();

  bool no_store = false;
  LaunchFlags launch_flags;
  auto* run_cmd = app.add_subcommand("run", "Run one parallel job");
  run_cmd->add_option("--nproc", nproc, "Number of workers")->required();
  run_cmd->add_option("--maxvalue", maxvalue, "Upper end of the grid")
      ->required();
  run_cmd->add_option("--step", step, "Grid step")->capture_default_str();
  run_cmd->add_option("--expr", source, "Expression in x")
      ->capture_default_str();
  run_cmd->add_flag("--no-store", no_store,
                    "Workers report counts and timings but not values");
  launch_flags.add_to(*run_cmd);

  std::string spec;
  auto* worker_cmd = app.add_subcommand("worker", "Run one worker from a spec");
  worker_cmd->add_option("--spec", spec, "Worker spec file")->required();

  BenchFlags bench_flags;
  auto* bench_cmd = app.add_subcommand("bench", "Run the (m x nproc) timing grid");
  bench_cmd->add_option("--nproc-list", bench_flags.nproc_list,
                        "Comma-separated worker counts")
      ->capture_default_str();
  bench_cmd->add_option("--m-list", bench_flags.m_list,
                        "Comma-separated data multipliers")
      ->capture_default_str();
  bench_cmd->add_option("--scale", bench_flags.scale, "maxvalue = m * scale")
      ->capture_default_str();
  bench_cmd->add_option("--step", bench_flags.step, "Grid step")
      ->capture_default_str();
  bench_cmd->add_option("--expr", bench_flags.expression, "Expression in x")
      ->capture_default_str();
  bench_cmd->add_flag("--no-store", bench_flags.no_store,
                      "Workers do not store values");
  bench_cmd->add_option("--repetitions", bench_flags.repetitions,
                        "Runs averaged per cell")
      ->capture_default_str();
  bench_cmd->add_option("--csv", bench_flags.csv, "Write m,nproc,seconds CSV");
  bench_cmd->add_option("--plot-dir", bench_flags.plot_dir,
                        "Write one m<m>.dat series per row");
  bench_cmd->add_flag("--check-table1", bench_flags.check_table1,
                      "Check speedup and best-nproc figures on the embedded "
                      "reference table; no jobs are run");
  LaunchFlags bench_launch;
  bench_launch.add_to(*bench_cmd);

  double ref = 0.0;
  double val = 0.0;
  auto* speedup_cmd = app.add_subcommand("speedup", "Print ref / val");
  speedup_cmd->add_option("--ref", ref, "Reference time")->required();
  speedup_cmd->add_option("--val", val, "Compared time")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (*eval) return cmd_eval(source, x, from, to, eval_step, out, err);
    if (*plan) return cmd_plan(maxvalue, step, nproc, out);
    if (*run_cmd)
      return cmd_run(nproc, maxvalue, step, source, no_store, launch_flags, out);
    if (*worker_cmd) return worker::run_worker(spec);
    if (*bench_cmd) return cmd_bench(bench_flags, bench_launch, out, err);
    if (*speedup_cmd) {
      out << compact(bench::speedup(ref, val), 4) << '\n';
      return kExitOk;
    }
  } catch (const ParseError& e) {
    print_parse_error(err, *bench_cmd ? bench_flags.expression : source, e);
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const InvalidGrid& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const InvalidPartitioning& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NonPositiveTime& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const WorkerFailed& e) {
    for (const auto& f : e.failures())
      err << "error: rank " << f.rank << " failed: " << f.message << '\n';
    return kExitRuntime;
  } catch (const TimeoutExpired& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace spmd::cli

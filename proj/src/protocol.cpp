#include "spmd/protocol.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "spmd/errors.hpp"
#include "spmd/expr.hpp"

namespace spmd::protocol {
namespace {

std::string errno_text() { return std::strerror(errno); }

void write_all(int fd, std::string_view data, const fs::path& path) {
  while (!data.empty()) {
    const ssize_t n = ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      throw IoError("write " + path.string() + ": " + errno_text());
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

// Temp file + optional fsync + rename.
void write_file_atomic(const fs::path& path, std::string_view content,
                       bool sync) {
  fs::path tmp = path;
  tmp.replace_filename("." + path.filename().string() + ".tmp" +
                       std::to_string(::getpid()));
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC,
                        0644);
  if (fd < 0) throw IoError("create " + tmp.string() + ": " + errno_text());
  try {
    write_all(fd, content, tmp);
    if (sync && ::fsync(fd) != 0)
      throw IoError("fsync " + tmp.string() + ": " + errno_text());
  } catch (...) {
    ::close(fd);
    ::unlink(tmp.c_str());
    throw;
  }
  if (::close(fd) != 0) {
    ::unlink(tmp.c_str());
    throw IoError("close " + tmp.string() + ": " + errno_text());
  }
  if (::rename(tmp.c_str(), path.c_str()) != 0) {
    const std::string reason = errno_text();
    ::unlink(tmp.c_str());
    throw IoError("rename " + tmp.string() + " -> " + path.string() + ": " +
                  reason);
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("cannot read " + path.string());
  return std::move(buf).str();
}

// Splits into lines, dropping a trailing '\r' and one final empty line.
std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t begin = 0;
  while (begin < text.size()) {
    std::size_t end = text.find('\n', begin);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(begin, end - begin);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    begin = end + 1;
  }
  return lines;
}

template <typename Int>
std::optional<Int> parse_int(std::string_view text) {
  Int value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
    return std::nullopt;
  return value;
}

bool has_numeric_suffix(std::string_view name, std::string_view prefix) {
  if (name.size() <= prefix.size() || name.substr(0, prefix.size()) != prefix)
    return false;
  for (char c : name.substr(prefix.size()))
    if (c < '0' || c > '9') return false;
  return true;
}

}  // namespace

fs::path spec_path(const fs::path& workdir, int rank) {
  return workdir / ("fileworker" + std::to_string(rank) + ".spec");
}
fs::path lock_path(const fs::path& workdir, int rank) {
  return workdir / ("filelock" + std::to_string(rank));
}
fs::path result_path(const fs::path& workdir, int rank) {
  return workdir / ("out" + std::to_string(rank));
}
fs::path failure_path(const fs::path& workdir, int rank) {
  return workdir / ("fail" + std::to_string(rank));
}

std::optional<int> rank_from_spec_path(const fs::path& path) {
  const std::string name = path.filename().string();
  constexpr std::string_view prefix = "fileworker";
  constexpr std::string_view suffix = ".spec";
  if (name.size() <= prefix.size() + suffix.size()) return std::nullopt;
  if (name.compare(0, prefix.size(), prefix) != 0) return std::nullopt;
  if (name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0)
    return std::nullopt;
  const std::string_view digits = std::string_view(name).substr(
      prefix.size(), name.size() - prefix.size() - suffix.size());
  for (char c : digits)
    if (c < '0' || c > '9') return std::nullopt;
  return parse_int<int>(digits);
}

std::string format_double(double value) {
  if (std::isnan(value)) return std::signbit(value) ? "-nan" : "nan";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

std::optional<double> parse_double(std::string_view text) {
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (text == "-nan") return -std::numeric_limits<double>::quiet_NaN();
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
    return std::nullopt;
  return value;
}

std::string serialize_worker_spec(const WorkerSpec& spec) {
  if (spec.expression.find_first_of("\r\n") != std::string::npos)
    throw MalformedSpec("expression must be a single line");
  std::string out;
  out += "format_version=" + std::to_string(kSpecFormatVersion) + "\n";
  out += "rank=" + std::to_string(spec.rank) + "\n";
  out += "start_index=" + std::to_string(spec.start_index) + "\n";
  out += "end_index=" + std::to_string(spec.end_index) + "\n";
  out += "step=" + format_double(spec.step) + "\n";
  out += "expression=" + spec.expression + "\n";
  out += std::string("store_values=") + (spec.store_values ? "true" : "false") +
         "\n";
  return out;
}

WorkerSpec deserialize_worker_spec(std::string_view text) {
  static constexpr std::string_view kKeys[] = {
      "format_version", "rank",       "start_index", "end_index",
      "step",           "expression", "store_values"};
  std::map<std::string, std::string, std::less<>> fields;
  for (std::string_view line : split_lines(text)) {
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos)
      throw MalformedSpec("line without '=': " + std::string(line));
    const std::string key(line.substr(0, eq));
    bool known = false;
    for (auto k : kKeys) known = known || k == key;
    if (!known) throw MalformedSpec("unknown key '" + key + "'");
    if (!fields.emplace(key, std::string(line.substr(eq + 1))).second)
      throw MalformedSpec("duplicate key '" + key + "'");
  }
  for (auto k : kKeys)
    if (fields.find(k) == fields.end())
      throw MalformedSpec("missing key '" + std::string(k) + "'");

  const auto version = parse_int<int>(fields.find("format_version")->second);
  if (!version || *version != kSpecFormatVersion)
    throw MalformedSpec("unsupported format_version '" +
                        fields.find("format_version")->second + "'");

  auto get_int = [&](std::string_view key) {
    const auto& raw = fields.find(key)->second;
    const auto v = parse_int<std::int64_t>(raw);
    if (!v) throw MalformedSpec("bad integer for " + std::string(key) + ": '" +
                                raw + "'");
    return *v;
  };

  WorkerSpec spec;
  const std::int64_t rank = get_int("rank");
  if (rank < 0 || rank > std::numeric_limits<int>::max())
    throw MalformedSpec("rank out of range");
  spec.rank = static_cast<int>(rank);
  spec.start_index = get_int("start_index");
  spec.end_index = get_int("end_index");
  if (spec.start_index < 0 || spec.end_index < spec.start_index)
    throw MalformedSpec("bad index range");

  const auto& step_text = fields.find("step")->second;
  const auto step = parse_double(step_text);
  if (!step || !std::isfinite(*step) || *step <= 0.0)
    throw MalformedSpec("bad step '" + step_text + "'");
  spec.step = *step;

  const auto& store = fields.find("store_values")->second;
  if (store == "true")
    spec.store_values = true;
  else if (store == "false")
    spec.store_values = false;
  else
    throw MalformedSpec("bad store_values '" + store + "'");

  spec.expression = fields.find("expression")->second;
  expr::parse(spec.expression);
  return spec;
}

fs::path write_worker_spec(const WorkerSpec& spec) {
  const fs::path path = spec_path(spec.workdir, spec.rank);
  write_file_atomic(path, serialize_worker_spec(spec), false);
  return path;
}

WorkerSpec read_worker_spec(const fs::path& path) {
  WorkerSpec spec = deserialize_worker_spec(read_file(path));
  spec.workdir = path.parent_path();
  return spec;
}

fs::path create_lock(const fs::path& workdir, int rank) {
  const fs::path path = lock_path(workdir, rank);
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC,
                        0644);
  if (fd < 0) throw IoError("create " + path.string() + ": " + errno_text());
  ::close(fd);
  return path;
}

bool lock_exists(const fs::path& workdir, int rank) {
  std::error_code ec;
  return fs::exists(lock_path(workdir, rank), ec);
}

void remove_lock(const fs::path& workdir, int rank) {
  const fs::path path = lock_path(workdir, rank);
  if (::unlink(path.c_str()) != 0 && errno != ENOENT)
    throw IoError("remove " + path.string() + ": " + errno_text());
}

std::string serialize_result(const WorkerResult& result) {
  std::string out;
  out.reserve(64 + result.values.size() * 24);
  out += kResultHeader;
  out += '\n';
  if (result.rank >= 0) out += "rank=" + std::to_string(result.rank) + "\n";
  out += "value_count=" + std::to_string(result.value_count) + "\n";
  out += "nan_count=" + std::to_string(result.nan_count) + "\n";
  out += "cpu_seconds=" + format_double(result.cpu_seconds) + "\n";
  for (double v : result.values) {
    out += format_double(v);
    out += '\n';
  }
  return out;
}

WorkerResult deserialize_result(std::string_view text, int expected_rank) {
  const auto lines = split_lines(text);
  if (lines.empty() || lines.front() != kResultHeader)
    throw MalformedResult("missing '" + std::string(kResultHeader) + "' header");

  std::map<std::string, std::string, std::less<>> fields;
  std::size_t i = 1;
  for (; i < lines.size(); ++i) {
    const std::size_t eq = lines[i].find('=');
    if (eq == std::string_view::npos) break;
    const std::string key(lines[i].substr(0, eq));
    if (key != "rank" && key != "value_count" && key != "nan_count" &&
        key != "cpu_seconds")
      throw MalformedResult("unknown key '" + key + "'");
    if (!fields.emplace(key, std::string(lines[i].substr(eq + 1))).second)
      throw MalformedResult("duplicate key '" + key + "'");
  }

  auto require = [&](std::string_view key) -> const std::string& {
    auto it = fields.find(key);
    if (it == fields.end())
      throw MalformedResult("missing key '" + std::string(key) + "'");
    return it->second;
  };

  WorkerResult result;
  result.rank = -1;
  if (auto it = fields.find("rank"); it != fields.end()) {
    const auto r = parse_int<int>(it->second);
    if (!r || *r < 0) throw MalformedResult("bad rank '" + it->second + "'");
    result.rank = *r;
  }
  if (expected_rank >= 0 && result.rank != expected_rank)
    throw MalformedResult("expected rank " + std::to_string(expected_rank) +
                          ", file has " + std::to_string(result.rank));

  const auto count = parse_int<std::size_t>(require("value_count"));
  const auto nans = parse_int<std::size_t>(require("nan_count"));
  const auto cpu = parse_double(require("cpu_seconds"));
  if (!count) throw MalformedResult("bad value_count");
  if (!nans) throw MalformedResult("bad nan_count");
  if (!cpu || !(*cpu >= 0.0)) throw MalformedResult("bad cpu_seconds");
  result.value_count = *count;
  result.nan_count = *nans;
  result.cpu_seconds = *cpu;

  const std::size_t value_lines = lines.size() - i;
  if (value_lines != 0 && value_lines != result.value_count)
    throw MalformedResult("value_count=" + std::to_string(result.value_count) +
                          " but file holds " + std::to_string(value_lines) +
                          " values");
  result.values.reserve(value_lines);
  std::size_t counted_nans = 0;
  for (; i < lines.size(); ++i) {
    const auto v = parse_double(lines[i]);
    if (!v) throw MalformedResult("bad value '" + std::string(lines[i]) + "'");
    counted_nans += std::isnan(*v) ? 1 : 0;
    result.values.push_back(*v);
  }
  if (value_lines != 0 && counted_nans != result.nan_count)
    throw MalformedResult("nan_count=" + std::to_string(result.nan_count) +
                          " but values hold " + std::to_string(counted_nans));
  return result;
}

void write_result_file(const fs::path& path, const WorkerResult& result) {
  write_file_atomic(path, serialize_result(result), true);
}

WorkerResult read_result_file(const fs::path& path, int expected_rank) {
  return deserialize_result(read_file(path), expected_rank);
}

fs::path write_result(const fs::path& workdir, const WorkerResult& result) {
  const fs::path path = result_path(workdir, result.rank);
  write_result_file(path, result);
  return path;
}

WorkerResult read_result(const fs::path& workdir, int rank) {
  return read_result_file(result_path(workdir, rank), rank);
}

void write_failure_marker(const fs::path& workdir, int rank,
                          std::string_view message) {
  std::string content(message);
  content += '\n';
  write_file_atomic(failure_path(workdir, rank), content, true);
}

std::vector<FailureRecord> check_failures(const fs::path& workdir, int nproc) {
  std::vector<FailureRecord> failures;
  for (int rank = 0; rank < nproc; ++rank) {
    const fs::path path = failure_path(workdir, rank);
    std::error_code ec;
    if (!fs::exists(path, ec)) continue;
    std::string message = read_file(path);
    while (!message.empty() && (message.back() == '\n' || message.back() == '\r'))
      message.pop_back();
    failures.push_back({rank, std::move(message)});
  }
  return failures;
}

std::size_t clean_workdir(const fs::path& workdir) {
  std::error_code ec;
  fs::directory_iterator it(workdir, ec);
  if (ec) throw IoError("cannot list " + workdir.string() + ": " + ec.message());
  std::size_t removed = 0;
  for (const auto& entry : it) {
    const std::string name = entry.path().filename().string();
    const std::string_view view = name;
    bool stale = has_numeric_suffix(view, "filelock") ||
                 has_numeric_suffix(view, "out") ||
                 has_numeric_suffix(view, "fail");
    if (view.size() > 5 && view.substr(view.size() - 5) == ".spec")
      stale = stale || rank_from_spec_path(entry.path()).has_value();
    if (view.starts_with(".out") || view.starts_with(".fail") ||
        view.starts_with(".fileworker"))
      stale = stale || view.find(".tmp") != std::string_view::npos;
    if (!stale) continue;
    if (!fs::remove(entry.path(), ec) && ec)
      throw IoError("cannot remove " + entry.path().string() + ": " +
                    ec.message());
    ++removed;
  }
  return removed;
}

}  // namespace spmd::protocol

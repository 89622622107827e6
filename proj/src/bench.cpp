#include "spmd/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "spmd/errors.hpp"
#include "spmd/expr.hpp"
#include "spmd/protocol.hpp"

namespace spmd::bench {
namespace {

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create " + path.string());
  out << text;
  out.flush();
  if (!out) throw IoError("cannot write " + path.string());
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t begin = 0;
  for (;;) {
    const std::size_t end = text.find(sep, begin);
    parts.push_back(text.substr(begin, end - begin));
    if (end == std::string_view::npos) return parts;
    begin = end + 1;
  }
}

int parse_label(std::string_view text) {
  const auto v = protocol::parse_double(text);
  if (!v || *v != std::floor(*v) || std::fabs(*v) > 1e9)
    throw Error("csv: bad integer '" + std::string(text) + "'");
  return static_cast<int>(*v);
}

double parse_seconds(std::string_view text) {
  const auto v = protocol::parse_double(text);
  if (!v) throw Error("csv: bad number '" + std::string(text) + "'");
  return *v;
}

}  // namespace

void validate(const BenchConfig& config) {
  if (config.nproc_list.empty()) throw ConfigError("nproc list is empty");
  if (config.m_list.empty()) throw ConfigError("m list is empty");
  for (int n : config.nproc_list)
    if (n < 1) throw ConfigError("nproc values must be >= 1");
  for (int m : config.m_list)
    if (m < 1) throw ConfigError("m values must be >= 1");
  if (!(config.scale > 0.0)) throw ConfigError("scale must be positive");
  if (!(config.step > 0.0)) throw ConfigError("step must be positive");
  if (config.repetitions < 1) throw ConfigError("repetitions must be >= 1");
  expr::parse(config.expression);
}

BenchTable::BenchTable(std::vector<int> m_values, std::vector<int> nproc_values)
    : m_values_(std::move(m_values)),
      nproc_values_(std::move(nproc_values)),
      cells_(m_values_.size() * nproc_values_.size(), 0.0) {}

double& BenchTable::at(std::size_t row, std::size_t column) {
  return cells_.at(row * columns() + column);
}

double BenchTable::at(std::size_t row, std::size_t column) const {
  return cells_.at(row * columns() + column);
}

std::size_t BenchTable::row_of(int m) const {
  const auto it = std::find(m_values_.begin(), m_values_.end(), m);
  if (it == m_values_.end())
    throw RowNotFound("no row for m=" + std::to_string(m));
  return static_cast<std::size_t>(it - m_values_.begin());
}

std::size_t BenchTable::column_of(int nproc) const {
  const auto it = std::find(nproc_values_.begin(), nproc_values_.end(), nproc);
  if (it == nproc_values_.end())
    throw RowNotFound("no column for nproc=" + std::to_string(nproc));
  return static_cast<std::size_t>(it - nproc_values_.begin());
}

double BenchTable::cell(int m, int nproc) const {
  return at(row_of(m), column_of(nproc));
}

double BenchTable::wall_at(std::size_t row, std::size_t column) const {
  if (wall_.empty()) return 0.0;
  return wall_.at(row * columns() + column);
}

void BenchTable::set_wall(std::size_t row, std::size_t column, double seconds) {
  if (wall_.empty()) wall_.assign(cells_.size(), 0.0);
  wall_.at(row * columns() + column) = seconds;
}

BenchTable run_grid(const BenchConfig& config,
                    const master::LaunchConfig& launch) {
  validate(config);
  master::validate(launch);
  BenchTable table(config.m_list, config.nproc_list);
  for (std::size_t row = 0; row < table.rows(); ++row) {
    const int m = config.m_list[row];
    for (std::size_t col = 0; col < table.columns(); ++col) {
      const int nproc = config.nproc_list[col];
      try {
        const master::JobSpec job{
            nproc, grid::GridSpec(m * config.scale, config.step),
            config.expression, config.store_values};
        double cpu = 0.0;
        double wall = 0.0;
        for (int rep = 0; rep < config.repetitions; ++rep) {
          const auto outcome = master::run_job(job, launch);
          cpu += outcome.timing.sum_worker_cpu_seconds;
          wall += outcome.timing.wall_elapsed_seconds;
        }
        table.at(row, col) = cpu / config.repetitions;
        table.set_wall(row, col, wall / config.repetitions);
      } catch (const std::exception& e) {
        throw BenchCellFailed(m, nproc, e.what());
      }
    }
  }
  return table;
}

double speedup(double t_ref, double t) {
  if (!(t_ref > 0.0) || !(t > 0.0))
    throw NonPositiveTime("speedup needs positive times, got " +
                          protocol::format_double(t_ref) + " and " +
                          protocol::format_double(t));
  return t_ref / t;
}

int best_nproc(const BenchTable& table, int m) {
  const auto& ms = table.m_values();
  const auto it = std::find(ms.begin(), ms.end(), m);
  if (it == ms.end()) throw RowNotFound("no row for m=" + std::to_string(m));
  const auto row = static_cast<std::size_t>(it - ms.begin());
  std::size_t best = 0;
  for (std::size_t col = 1; col < table.columns(); ++col) {
    const double v = table.at(row, col);
    const double b = table.at(row, best);
    if (v < b || (v == b && table.nproc_values()[col] <
                                table.nproc_values()[best]))
      best = col;
  }
  return table.nproc_values()[best];
}

BenchTable embedded_table1() {
  BenchTable table({2, 4, 6}, {2, 4, 6, 8, 10, 12, 14, 16});
  const double rows[3][8] = {
      {48.29, 27.70, 32.51, 22.56, 28.14, 31.34, 33.28, 35.04},
      {126.53, 65.21, 74.79, 54.27, 63.17, 74.29, 83.01, 91.34},
      {263.37, 109.48, 121.30, 78.41, 116.23, 125.69, 138.51, 145.93},
  };
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 8; ++c) table.at(r, c) = rows[r][c];
  return table;
}

std::string render_table(const BenchTable& table) {
  std::string out = "m\\nproc";
  for (int n : table.nproc_values()) out += "\t" + std::to_string(n);
  out += '\n';
  for (std::size_t r = 0; r < table.rows(); ++r) {
    out += std::to_string(table.m_values()[r]);
    for (std::size_t c = 0; c < table.columns(); ++c)
      out += "\t" + fixed(table.at(r, c), 2);
    out += '\n';
  }
  return out;
}

std::string to_csv(const BenchTable& table) {
  std::string out = table.has_wall() ? "m,nproc,seconds,wall_seconds\n"
                                     : "m,nproc,seconds\n";
  for (std::size_t r = 0; r < table.rows(); ++r) {
    for (std::size_t c = 0; c < table.columns(); ++c) {
      out += std::to_string(table.m_values()[r]) + "," +
             std::to_string(table.nproc_values()[c]) + "," +
             protocol::format_double(table.at(r, c));
      if (table.has_wall())
        out += "," + protocol::format_double(table.wall_at(r, c));
      out += '\n';
    }
  }
  return out;
}

BenchTable parse_csv(std::string_view text) {
  auto lines = split(text, '\n');
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw Error("csv: empty input");
  const bool with_wall = lines.front() == "m,nproc,seconds,wall_seconds";
  if (!with_wall && lines.front() != "m,nproc,seconds")
    throw Error("csv: unexpected header '" + std::string(lines.front()) + "'");

  struct Entry {
    double seconds;
    double wall;
  };
  std::vector<int> ms;
  std::vector<int> ns;
  std::map<std::pair<int, int>, Entry> entries;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = split(lines[i], ',');
    if (fields.size() != (with_wall ? 4u : 3u))
      throw Error("csv: wrong field count on line " + std::to_string(i + 1));
    const int m = parse_label(fields[0]);
    const int n = parse_label(fields[1]);
    if (std::find(ms.begin(), ms.end(), m) == ms.end()) ms.push_back(m);
    if (std::find(ns.begin(), ns.end(), n) == ns.end()) ns.push_back(n);
    const Entry e{parse_seconds(fields[2]),
                  with_wall ? parse_seconds(fields[3]) : 0.0};
    if (!entries.emplace(std::make_pair(m, n), e).second)
      throw Error("csv: duplicate cell m=" + std::to_string(m) +
                  " nproc=" + std::to_string(n));
  }
  if (entries.size() != ms.size() * ns.size())
    throw Error("csv: table is not rectangular");

  BenchTable table(ms, ns);
  for (std::size_t r = 0; r < ms.size(); ++r) {
    for (std::size_t c = 0; c < ns.size(); ++c) {
      const Entry& e = entries.at({ms[r], ns[c]});
      table.at(r, c) = e.seconds;
      if (with_wall) table.set_wall(r, c, e.wall);
    }
  }
  return table;
}

void emit_csv(const BenchTable& table, const std::filesystem::path& path) {
  write_text_file(path, to_csv(table));
}

std::vector<std::filesystem::path> emit_plot_data(
    const BenchTable& table, const std::filesystem::path& directory) {
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec) throw IoError("cannot create " + directory.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  for (std::size_t r = 0; r < table.rows(); ++r) {
    const int m = table.m_values()[r];
    std::string text = "# m=" + std::to_string(m) + "\n# nproc seconds\n";
    for (std::size_t c = 0; c < table.columns(); ++c)
      text += std::to_string(table.nproc_values()[c]) + " " +
              protocol::format_double(table.at(r, c)) + "\n";
    const auto path = directory / ("m" + std::to_string(m) + ".dat");
    write_text_file(path, text);
    written.push_back(path);
  }
  return written;
}

Table1Check check_table1(const BenchTable& table) {
  Table1Check check;
  auto record = [&](bool ok, std::string line) {
    check.passed = check.passed && ok;
    check.lines.push_back((ok ? "ok   " : "FAIL ") + std::move(line));
  };
  auto truncated2 = [](double v) { return std::floor(v * 100.0) / 100.0; };

  try {
    const double s2 = speedup(table.cell(2, 2), table.cell(2, 8));
    record(std::fabs(s2 - 2.14) <= 0.005,
           "speedup m=2 nproc=8 over nproc=2: " + fixed(s2, 4) + " (" +
               fixed(truncated2(s2), 2) + ")");

    const double s6 = speedup(table.cell(6, 2), table.cell(6, 8));
    const double rounded = std::round(s6 * 100.0) / 100.0;
    record(std::fabs(s6 - 3.3588) <= 0.001 &&
               std::fabs(rounded - 3.35) <= 0.01 + 1e-9,
           "speedup m=6 nproc=8 over nproc=2: " + fixed(s6, 4) + " (" +
               fixed(truncated2(s6), 2) + ")");

    bool best_all = true;
    for (int m : table.m_values()) best_all = best_all && best_nproc(table, m) == 8;
    record(best_all, best_all ? "best nproc = 8 for all m"
                              : "best nproc differs from 8 for some m");

    bool peak_all = true;
    for (int m : table.m_values())
      peak_all = peak_all && table.cell(m, 4) < table.cell(m, 2) &&
                 table.cell(m, 4) < table.cell(m, 6);
    record(peak_all, peak_all ? "local peak at nproc = 4 for all m"
                              : "no local peak at nproc = 4 for some m");
  } catch (const Error& e) {
    record(false, e.what());
  }
  return check;
}

}  // namespace spmd::bench

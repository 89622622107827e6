#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spmd/master.hpp"

namespace spmd::bench {

inline constexpr std::string_view kDefaultExpression =
    "y = 5432.060708*cos((sin(x^9.876))^-1.2345)";

struct BenchConfig {
  std::vector<int> nproc_list{2, 4, 6, 8, 10, 12, 14, 16};
  std::vector<int> m_list{2, 4, 6};
  // maxvalue = m * scale
  double scale = 10000.0;
  double step = 0.001;
  std::string expression{kDefaultExpression};
  bool store_values = true;
  int repetitions = 1;
};

// Throws ConfigError.
void validate(const BenchConfig& config);

// Rows are m values, columns nproc values; cells hold the summed worker CPU
// seconds. wall_seconds is filled for live runs only.
class BenchTable {
 public:
  BenchTable(std::vector<int> m_values, std::vector<int> nproc_values);

  const std::vector<int>& m_values() const noexcept { return m_values_; }
  const std::vector<int>& nproc_values() const noexcept { return nproc_values_; }
  std::size_t rows() const noexcept { return m_values_.size(); }
  std::size_t columns() const noexcept { return nproc_values_.size(); }

  double& at(std::size_t row, std::size_t column);
  double at(std::size_t row, std::size_t column) const;
  // Lookup by labels. Throws RowNotFound for an unknown m or nproc.
  double cell(int m, int nproc) const;

  bool has_wall() const noexcept { return !wall_.empty(); }
  double wall_at(std::size_t row, std::size_t column) const;
  void set_wall(std::size_t row, std::size_t column, double seconds);

  friend bool operator==(const BenchTable&, const BenchTable&) = default;

 private:
  std::size_t row_of(int m) const;
  std::size_t column_of(int nproc) const;

  std::vector<int> m_values_;
  std::vector<int> nproc_values_;
  std::vector<double> cells_;
  std::vector<double> wall_;
};

// Runs every (m, nproc) cell sequentially through run_job, averaging over
// repetitions. Throws BenchCellFailed naming the failing cell.
BenchTable run_grid(const BenchConfig& config,
                    const master::LaunchConfig& launch);

// t_ref / t. Throws NonPositiveTime.
double speedup(double t_ref, double t);

// Column label with the smallest cell in row m; ties go to the smaller nproc.
int best_nproc(const BenchTable& table, int m);

// Reference timings (seconds, summed worker CPU, with data storage) from
// the two-node Xeon cluster runs that motivated this tool.
BenchTable embedded_table1();

// Rows m, columns nproc, two decimals.
std::string render_table(const BenchTable& table);

// "m,nproc,seconds[,wall_seconds]" with header, one line per cell.
std::string to_csv(const BenchTable& table);
BenchTable parse_csv(std::string_view text);
void emit_csv(const BenchTable& table, const std::filesystem::path& path);

// One "m<m>.dat" file per row with "nproc seconds" columns. Returns the
// files written.
std::vector<std::filesystem::path> emit_plot_data(
    const BenchTable& table, const std::filesystem::path& directory);

struct Table1Check {
  bool passed = true;
  std::vector<std::string> lines;
};

// Speedup and best-nproc regression over a table shaped like
// embedded_table1().
Table1Check check_table1(const BenchTable& table);

}  // namespace spmd::bench

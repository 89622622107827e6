#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "spmd/bench.hpp"
#include "spmd/errors.hpp"
#include "test_support.hpp"

using namespace spmd;
using namespace std::chrono_literals;
using spmd::testing::TempDir;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t count_lines(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

master::LaunchConfig local_config(const fs::path& dir) {
  master::LaunchConfig c;
  c.workdir = dir;
  c.worker_executable = testing::spmd_executable();
  c.poll_interval = 10ms;
  c.timeout = 60s;
  return c;
}

}  // namespace

TEST_CASE("embedded reference table") {
  const auto t = bench::embedded_table1();
  CHECK(t.rows() == 3);
  CHECK(t.columns() == 8);
  CHECK(t.cell(4, 8) == 54.27);
  CHECK(t.cell(2, 2) == 48.29);
  CHECK(t.cell(6, 16) == 145.93);
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.columns(); ++c) CHECK(t.at(r, c) > 0.0);
  CHECK_THROWS_AS(t.cell(3, 8), RowNotFound);
}

TEST_CASE("speedup") {
  CHECK(bench::speedup(48.29, 22.56) == doctest::Approx(2.1405).epsilon(1e-4));
  CHECK(bench::speedup(263.37, 78.41) == doctest::Approx(3.3589).epsilon(1e-4));
  for (double t : {0.001, 1.0, 77.7}) CHECK(bench::speedup(t, t) == 1.0);
  CHECK_THROWS_AS(bench::speedup(1.0, 0.0), NonPositiveTime);
  CHECK_THROWS_AS(bench::speedup(-1.0, 1.0), NonPositiveTime);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(1e-3, 1e3);
  for (int i = 0; i < 500; ++i) {
    const double a = d(rng), b = d(rng);
    CHECK(std::fabs(bench::speedup(a, b) * bench::speedup(b, a) - 1.0) <= 1e-12);
  }
}

TEST_CASE("best_nproc") {
  const auto t = bench::embedded_table1();
  CHECK(bench::best_nproc(t, 2) == 8);
  CHECK(bench::best_nproc(t, 4) == 8);
  CHECK(bench::best_nproc(t, 6) == 8);
  CHECK_THROWS_AS(bench::best_nproc(t, 5), RowNotFound);

  bench::BenchTable single({1}, {3});
  single.at(0, 0) = 9.0;
  CHECK(bench::best_nproc(single, 1) == 3);

  bench::BenchTable tie({1}, {4, 2, 8});
  tie.at(0, 0) = 1.0;
  tie.at(0, 1) = 1.0;
  tie.at(0, 2) = 1.0;
  CHECK(bench::best_nproc(tie, 1) == 2);
}

TEST_CASE("local peak at four workers in the reference table") {
  const auto t = bench::embedded_table1();
  for (int m : {2, 4, 6}) {
    CHECK(t.cell(m, 4) < t.cell(m, 2));
    CHECK(t.cell(m, 4) < t.cell(m, 6));
  }
}

TEST_CASE("check_table1 passes on the reference and fails on a tampered copy") {
  const auto good = bench::check_table1(bench::embedded_table1());
  CHECK(good.passed);
  REQUIRE(good.lines.size() == 4);
  CHECK(good.lines[0].find("2.1405") != std::string::npos);
  CHECK(good.lines[0].find("(2.14)") != std::string::npos);
  CHECK(good.lines[1].find("(3.35)") != std::string::npos);
  CHECK(good.lines[2].find("best nproc = 8 for all m") != std::string::npos);

  auto bad = bench::embedded_table1();
  bad.at(1, 0) = 1.0;
  CHECK_FALSE(bench::check_table1(bad).passed);
}

TEST_CASE("render_table") {
  const auto text = bench::render_table(bench::embedded_table1());
  CHECK(count_lines(text) == 4);
  CHECK(text.find("2\t48.29\t27.70") != std::string::npos);
  CHECK(text.find("6\t263.37") != std::string::npos);
  CHECK(text.find("\t121.30\t") != std::string::npos);
}

TEST_CASE("csv and plot data") {
  TempDir dir;
  const auto t = bench::embedded_table1();
  bench::emit_csv(t, dir.path() / "t.csv");
  const auto csv = slurp(dir.path() / "t.csv");
  CHECK(count_lines(csv) == t.rows() * t.columns() + 1);
  CHECK(csv.starts_with("m,nproc,seconds\n2,2,48.29\n"));
  CHECK(bench::parse_csv(csv) == t);

  bench::BenchTable live({1, 2}, {1, 3});
  live.at(0, 0) = 0.125;
  live.at(1, 1) = 3.0;
  live.set_wall(1, 0, 0.5);
  const auto live_csv = bench::to_csv(live);
  CHECK(live_csv.starts_with("m,nproc,seconds,wall_seconds\n"));
  CHECK(bench::parse_csv(live_csv) == live);

  CHECK_THROWS(bench::parse_csv("m,nproc,seconds\n2,2,1\n2,4,1\n4,2,1\n"));
  CHECK_THROWS(bench::parse_csv("bogus\n"));

  const auto files = bench::emit_plot_data(t, dir.path() / "plot");
  REQUIRE(files.size() == 3);
  CHECK(files[0].filename() == "m2.dat");
  const auto series = slurp(files[2]);
  CHECK(series.find("8 78.41\n") != std::string::npos);
  CHECK(count_lines(series) == 2 + 8);
}

TEST_CASE("bench config validation") {
  bench::BenchConfig c;
  CHECK_NOTHROW(bench::validate(c));
  CHECK(c.nproc_list == std::vector<int>{2, 4, 6, 8, 10, 12, 14, 16});
  CHECK(c.m_list == std::vector<int>{2, 4, 6});
  CHECK(c.scale == 10000.0);
  CHECK(c.step == 0.001);
  c.m_list.clear();
  CHECK_THROWS_AS(bench::validate(c), ConfigError);
  c = {};
  c.scale = 0;
  CHECK_THROWS_AS(bench::validate(c), ConfigError);
}

TEST_CASE("run_grid smoke at desk scale") {
  TempDir dir;
  bench::BenchConfig c;
  c.m_list = {2};
  c.nproc_list = {1, 2};
  c.scale = 10;
  const auto t = bench::run_grid(c, local_config(dir.path()));
  CHECK(t.rows() == 1);
  CHECK(t.columns() == 2);
  CHECK(t.at(0, 0) > 0.0);
  CHECK(t.at(0, 1) > 0.0);
  CHECK(t.has_wall());

  const auto again = bench::run_grid(c, local_config(dir.path()));
  CHECK(again.m_values() == t.m_values());
  CHECK(again.nproc_values() == t.nproc_values());
}

TEST_CASE("run_grid names the failing cell") {
  TempDir dir;
  bench::BenchConfig c;
  c.m_list = {1};
  c.nproc_list = {1, 50};
  c.scale = 0.01;
  c.step = 0.001;
  try {
    bench::run_grid(c, local_config(dir.path()));
    FAIL("expected BenchCellFailed");
  } catch (const BenchCellFailed& e) {
    CHECK(e.m() == 1);
    CHECK(e.nproc() == 50);
  }
}

TEST_CASE("summed worker CPU grows with the data size") {
  TempDir dir;
  bench::BenchConfig c;
  c.m_list = {1, 2};
  c.nproc_list = {1};
  c.scale = 300;
  c.store_values = false;
  const auto t = bench::run_grid(c, local_config(dir.path()));
  CHECK(t.cell(2, 1) >= 0.8 * 2 * t.cell(1, 1));
}

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "mcloc/core.hpp"
#include "mcloc/io.hpp"

using namespace mcloc;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("mcloc_io_test_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("cloud round trip preserves values") {
  TempDir dir;
  std::mt19937_64 rng(61);
  std::uniform_real_distribution<double> coord(-500.0, 500.0);
  std::uniform_real_distribution<double> angle(-kPi, kPi);

  std::vector<Point3> points(1000);
  std::vector<UnitNormal3> normals(1000);
  for (int i = 0; i < 1000; ++i) {
    points[i] = {coord(rng), coord(rng), coord(rng)};
    const double a = angle(rng);
    normals[i] = UnitNormal3::from_direction(std::cos(a), std::sin(a), 0.3);
  }

  const auto path = dir.path / "cloud.xyz";
  save_cloud(path, points, normals);
  const CloudData loaded = load_cloud(path);
  REQUIRE(loaded.points.size() == 1000);
  REQUIRE(loaded.normals.size() == 1000);
  for (int i = 0; i < 1000; ++i) {
    CHECK(std::abs(loaded.points[i].x - points[i].x) < 1e-6);
    CHECK(std::abs(loaded.points[i].y - points[i].y) < 1e-6);
    CHECK(std::abs(loaded.points[i].z - points[i].z) < 1e-6);
    CHECK(std::abs(loaded.normals[i].nx - normals[i].nx) < 1e-6);
  }

  // Without normals the file has three columns.
  save_cloud(path, points);
  const CloudData bare = load_cloud(path);
  CHECK(bare.points.size() == 1000);
  CHECK(bare.normals.empty());
}

TEST_CASE("parse errors carry line numbers") {
  TempDir dir;
  const auto path = dir.path / "bad.xyz";

  SUBCASE("short line") {
    write_text(path, "1 2 3\n1 2\n");
    CHECK_THROWS_WITH_AS(load_cloud(path),
                         doctest::Contains("bad.xyz:2"), ParseError);
  }
  SUBCASE("mixed column counts name the first offender") {
    write_text(path, "# comment\n1 2 3\n4 5 6\n1 2 3 0 1 0\n");
    CHECK_THROWS_WITH_AS(load_cloud(path),
                         doctest::Contains(":4"), ParseError);
  }
  SUBCASE("non-numeric field") {
    write_text(path, "1 2 x\n");
    CHECK_THROWS_AS(load_cloud(path), ParseError);
  }
  SUBCASE("comments and blank lines are skipped") {
    write_text(path, "# header\n\n  \n1 2 3\n# tail\n4 5 6\n");
    const CloudData cloud = load_cloud(path);
    CHECK(cloud.points.size() == 2);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_cloud(dir.path / "nope.xyz"), ParseError);
  }
}

TEST_CASE("pgm heatmaps") {
  TempDir dir;
  const auto path = dir.path / "grid.pgm";

  SUBCASE("single peak lights one pixel") {
    Grid2<double> grid(8, 0.0);
    grid(2, 6) = 4.0;
    CHECK(export_heatmap(grid, path));
    const std::string bytes = read_bytes(path);
    // Header: P5, comment, dims, maxval.
    CHECK(bytes.substr(0, 2) == "P5");
    const size_t pixels = bytes.size() - bytes.rfind("255\n") - 4;
    REQUIRE(pixels == 64);
    const char* data = bytes.data() + bytes.size() - 64;
    int bright = 0;
    size_t bright_at = 0;
    for (size_t c = 0; c < 64; ++c) {
      if (static_cast<unsigned char>(data[c]) == 255) {
        ++bright;
        bright_at = c;
      }
    }
    CHECK(bright == 1);
    // Row 0 is the highest y: j=6 lands in image row 1, column 2.
    CHECK(bright_at == 1 * 8 + 2);
  }
  SUBCASE("uniform grid is uniformly bright") {
    Grid2<double> grid(4, 3.0);
    CHECK(export_heatmap(grid, path));
    const std::string bytes = read_bytes(path);
    const char* data = bytes.data() + bytes.size() - 16;
    for (size_t c = 0; c < 16; ++c) {
      CHECK(static_cast<unsigned char>(data[c]) == 255);
    }
  }
  SUBCASE("zero grid warns via return value and writes zeros") {
    Grid2<double> grid(4, 0.0);
    CHECK_FALSE(export_heatmap(grid, path));
    const std::string bytes = read_bytes(path);
    const char* data = bytes.data() + bytes.size() - 16;
    for (size_t c = 0; c < 16; ++c) {
      CHECK(static_cast<unsigned char>(data[c]) == 0);
    }
  }
}

TEST_CASE("format_double round trips") {
  std::mt19937_64 rng(62);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int trial = 0; trial < 1000; ++trial) {
    const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 7) - 3);
    const std::string s = format_double(v);
    CHECK(std::stod(s) == v);
  }
  CHECK(format_double(0.0) == "0");
  CHECK(format_double(0.06) == "0.06");
}

TEST_CASE("grid csv layout") {
  TempDir dir;
  Grid2<double> grid(2, 0.0);
  grid(0, 0) = 1.0;
  grid(1, 0) = 2.0;
  grid(0, 1) = 3.0;
  grid(1, 1) = 4.0;
  const auto path = dir.path / "grid.csv";
  export_grid_csv(grid, path);
  CHECK(read_bytes(path) == "1,2\n3,4\n");
}

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mcloc/core.hpp"

namespace mcloc {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Point cloud as read from disk; normals is empty or parallel to points.
struct CloudData {
  std::vector<Point3> points;
  std::vector<UnitNormal3> normals;
};

/// XYZ text format: one point per line, `x y z` or `x y z nx ny nz`,
/// whitespace separated; lines starting with '#' and blank lines are
/// ignored. All data lines must have the same column count. Throws
/// ParseError naming the first offending line.
CloudData load_cloud(const std::filesystem::path& path);

/// Writes the XYZ text format; values round-trip within 1e-6.
void save_cloud(const std::filesystem::path& path,
                const std::vector<Point3>& points,
                const std::vector<UnitNormal3>& normals = {});

/// 8-bit binary PGM, values scaled by round(255 * v / max). Image row 0 is
/// the highest y (cell row j = dim-1). A zero-max grid produces an all-zero
/// image and returns false.
bool export_heatmap(const Grid2<double>& grid,
                    const std::filesystem::path& path);

/// Comma-separated grid dump, one line per y row (j ascending), i ascending
/// within a line.
void export_grid_csv(const Grid2<double>& grid,
                     const std::filesystem::path& path);

/// Shortest representation that round-trips a double (used for CSV/JSON
/// style output determinism).
std::string format_double(double v);

/// Writes content to a temporary file in the same directory and renames it
/// over the target, so readers never observe partial files.
void write_file_atomic(const std::filesystem::path& path,
                       const std::string& content);

}  // namespace mcloc

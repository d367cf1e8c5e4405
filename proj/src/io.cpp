#include "mcloc/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>

namespace mcloc {

namespace {

bool parse_fields(const std::string& line, std::vector<double>& out) {
  out.clear();
  const char* s = line.c_str();
  char* end = nullptr;
  while (*s) {
    while (*s == ' ' || *s == '\t' || *s == '\r') ++s;
    if (!*s) break;
    const double v = std::strtod(s, &end);
    if (end == s) return false;
    if (!std::isfinite(v)) return false;
    out.push_back(v);
    s = end;
  }
  return true;
}

}  // namespace

CloudData load_cloud(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open cloud file: " + path.string());

  CloudData cloud;
  std::string line;
  std::vector<double> fields;
  int columns = 0;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    if (!parse_fields(line, fields) ||
        (fields.size() != 3 && fields.size() != 6)) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": expected 3 or 6 numeric columns");
    }
    if (columns == 0) {
      columns = static_cast<int>(fields.size());
    } else if (static_cast<int>(fields.size()) != columns) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": mixed 3- and 6-column lines (normals must be "
                       "present on every point or none)");
    }
    cloud.points.push_back({fields[0], fields[1], fields[2]});
    if (columns == 6) {
      cloud.normals.push_back({fields[3], fields[4], fields[5]});
    }
  }
  return cloud;
}

void save_cloud(const std::filesystem::path& path,
                const std::vector<Point3>& points,
                const std::vector<UnitNormal3>& normals) {
  if (!normals.empty() && normals.size() != points.size()) {
    throw std::invalid_argument("save_cloud: normals/points size mismatch");
  }
  std::string out;
  out.reserve(points.size() * 48);
  char buf[160];
  for (size_t idx = 0; idx < points.size(); ++idx) {
    const Point3& p = points[idx];
    if (normals.empty()) {
      std::snprintf(buf, sizeof(buf), "%.10g %.10g %.10g\n", p.x, p.y, p.z);
    } else {
      const UnitNormal3& n = normals[idx];
      std::snprintf(buf, sizeof(buf), "%.10g %.10g %.10g %.10g %.10g %.10g\n",
                    p.x, p.y, p.z, n.nx, n.ny, n.nz);
    }
    out += buf;
  }
  write_file_atomic(path, out);
}

bool export_heatmap(const Grid2<double>& grid,
                    const std::filesystem::path& path) {
  if (grid.empty()) throw std::invalid_argument("export_heatmap: empty grid");
  const int dim = grid.dim();
  double max = 0.0;
  for (double v : grid.data()) max = std::max(max, v);

  std::string out;
  out += "P5\n# row 0 = highest y\n";
  out += std::to_string(dim) + " " + std::to_string(dim) + "\n255\n";
  out.reserve(out.size() + static_cast<size_t>(dim) * dim);
  for (int j = dim - 1; j >= 0; --j) {
    for (int i = 0; i < dim; ++i) {
      const double v = max > 0.0 ? grid(i, j) / max : 0.0;
      out += static_cast<char>(std::lround(255.0 * v));
    }
  }
  write_file_atomic(path, out);
  return max > 0.0;
}

void export_grid_csv(const Grid2<double>& grid,
                     const std::filesystem::path& path) {
  std::string out;
  for (int j = 0; j < grid.dim(); ++j) {
    for (int i = 0; i < grid.dim(); ++i) {
      if (i) out += ',';
      out += format_double(grid(i, j));
    }
    out += '\n';
  }
  write_file_atomic(path, out);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  // Prefer the shortest representation that round-trips.
  for (int prec = 1; prec < 17; ++prec) {
    char probe[40];
    std::snprintf(probe, sizeof(probe), "%.*g", prec, v);
    double back = 0.0;
    std::sscanf(probe, "%lf", &back);
    if (back == v) return probe;
  }
  return buf;
}

void write_file_atomic(const std::filesystem::path& path,
                       const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) {
      throw std::runtime_error("cannot write file: " + tmp.string());
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace mcloc

#pragma once

/**
 * @file csv.hpp
 * @brief Text exports: curve labels, beam geometry (OBJ wireframe and CSV),
 *        elastic surfaces and per-step property tables.
 */

#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "trussvae/datagen.hpp"
#include "trussvae/homogenize.hpp"
#include "trussvae/io/text.hpp"
#include "trussvae/unit_cell.hpp"

namespace trussvae::io {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  return out;
}

/// graph_hash (16 hex digits) -> 13 compressive stresses.
using CurveLabels = std::map<std::uint64_t, std::vector<double>>;

/// Reads `graph_hash,s1,...,s13`; a header row starting with "graph_hash" is skipped.
inline CurveLabels read_curve_labels(const std::string& path) {
  auto f = open_in(path);
  CurveLabels out;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.front() == "graph_hash") continue;
    if (cells.size() != 14) throw FormatError(path + ":" + std::to_string(lineno) + ": expected 14 columns");
    std::vector<double> v;
    try {
      for (std::size_t c = 1; c < cells.size(); ++c) v.push_back(parse_double(cells[c]));
      out[parse_hex64(cells[0])] = std::move(v);
    } catch (const FormatError& e) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline void write_curve_labels(const std::string& path, const CurveLabels& labels) {
  auto f = open_out(path);
  f << "graph_hash";
  for (int i = 1; i <= 13; ++i) f << ",sigma" << i;
  f << '\n';
  for (const auto& [h, v] : labels) {
    f << hex64(h);
    for (double x : v) f << ',' << format_double(x);
    f << '\n';
  }
}

/**
 * Replaces labels with curve13 values by graph hash. Records without a label
 * are removed; the number removed is returned.
 */
inline std::size_t attach_curve_labels(std::vector<DatasetRecord>& records, const CurveLabels& labels) {
  std::vector<DatasetRecord> kept;
  for (DatasetRecord& r : records) {
    const auto it = labels.find(graph_hash(r.graph));
    if (it == labels.end()) continue;
    r.properties = {PropertyKind::curve13, it->second};
    kept.push_back(std::move(r));
  }
  const std::size_t removed = records.size() - kept.size();
  records = std::move(kept);
  return removed;
}

inline void write_obj(std::ostream& os, const UnitCell& cell) {
  os << "# trussvae wireframe: " << cell.nodes.size() << " nodes, " << cell.beams.size() << " beams, radius "
     << format_double(cell.radius) << '\n';
  for (const Vec3& p : cell.nodes)
    os << "v " << format_double(p.x()) << ' ' << format_double(p.y()) << ' ' << format_double(p.z()) << '\n';
  for (const CellBeam& b : cell.beams) os << "l " << b.i + 1 << ' ' << b.j + 1 << '\n';
}

inline void write_beam_csv(std::ostream& os, const UnitCell& cell) {
  os << "x1,y1,z1,x2,y2,z2,radius,weight\n";
  for (const CellBeam& b : cell.beams) {
    const Vec3& p = cell.nodes[std::size_t(b.i)];
    const Vec3& q = cell.nodes[std::size_t(b.j)];
    os << format_double(p.x()) << ',' << format_double(p.y()) << ',' << format_double(p.z()) << ','
       << format_double(q.x()) << ',' << format_double(q.y()) << ',' << format_double(q.z()) << ','
       << format_double(cell.radius) << ',' << format_double(b.weight) << '\n';
  }
}

enum class GeometryFormat : std::uint8_t { obj_wireframe, beam_csv };

inline GeometryFormat parse_geometry_format(std::string_view s) {
  if (s == "obj" || s == "obj_wireframe") return GeometryFormat::obj_wireframe;
  if (s == "csv" || s == "beam_csv") return GeometryFormat::beam_csv;
  throw ConfigError("unknown geometry format '" + std::string(s) + "'");
}

inline void export_geometry(const UnitCell& cell, GeometryFormat fmt, const std::string& path) {
  auto f = open_out(path);
  if (fmt == GeometryFormat::obj_wireframe)
    write_obj(f, cell);
  else
    write_beam_csv(f, cell);
  if (!f) throw Error("write to '" + path + "' failed");
}

inline void write_surface_csv(std::ostream& os, const std::vector<SurfaceSample>& samples) {
  os << "theta,phi,dx,dy,dz,E\n";
  for (const SurfaceSample& s : samples)
    os << format_double(s.theta) << ',' << format_double(s.phi) << ',' << format_double(s.direction.x()) << ','
       << format_double(s.direction.y()) << ',' << format_double(s.direction.z()) << ',' << format_double(s.modulus)
       << '\n';
}

}  // namespace trussvae::io

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "probemap/pipeline.hpp"

namespace probemap::pipeline {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string coord(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.10f", v);
  return buf;
}

std::string angle(double deg) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", deg);
  return buf;
}

void check_envelope(const GcodeConfig& gc, double x, double y, const std::string& what) {
  if (x < gc.env_x_min || x > gc.env_x_max || y < gc.env_y_min || y > gc.env_y_max) {
    std::ostringstream msg;
    msg << "waypoint outside work envelope: " << what << " at X" << x << " Y" << y;
    throw std::runtime_error(msg.str());
  }
}

}  // namespace

std::string GcodeProgram::text() const {
  std::string out;
  for (const auto& l : lines) {
    out += l;
    out += '\n';
  }
  return out;
}

GcodeProgram emit_gcode(const route::TourGraph& graph, const route::Tour& tour,
                        const GcodeConfig& gc, const ProbeConfig& probe) {
  if (tour.order.empty()) throw std::invalid_argument("emit_gcode: empty tour");
  if (gc.safe_z_mm <= gc.plunge_z_mm) {
    throw std::invalid_argument("emit_gcode: safe_z must be above plunge_z");
  }
  if (gc.safe_z_mm > gc.env_z_max || gc.plunge_z_mm < gc.env_z_min) {
    throw std::runtime_error("waypoint outside work envelope: Z range");
  }

  GcodeProgram prog;
  auto& g = prog.lines;
  g.push_back("; probemap contact program");
  g.push_back("; algorithm=" + tour.algorithm + " waypoints=" + std::to_string(tour.order.size()));
  g.push_back("G21 ; millimeters");
  g.push_back("G90 ; absolute positioning");
  g.push_back("G0 Z" + coord(gc.safe_z_mm) + " F" + coord(gc.travel_feed_mm_min));

  for (size_t i = 0; i < tour.order.size(); ++i) {
    const auto& node = graph.nodes[static_cast<size_t>(tour.order[i])];
    double tx = node.x_mm, ty = node.y_mm;
    const double theta_deg = node.theta_rad * 180.0 / kPi;
    if (probe.arm_length_mm > 0.0) {
      const auto t = calib::effector_target(node.x_mm, node.y_mm, theta_deg,
                                            {probe.arm_length_mm});
      tx = t[0];
      ty = t[1];
    }
    check_envelope(gc, tx, ty, node.segment_id);
    g.push_back("G0 X" + coord(tx) + " Y" + coord(ty));
    if (node.pose_index < 0) continue;  // home: position only, no contact
    g.push_back("G0 " + gc.rotary_word + angle(theta_deg));
    g.push_back("G1 Z" + coord(gc.plunge_z_mm) + " F" + coord(gc.plunge_feed_mm_min));
    g.push_back("M400");
    g.push_back(";PROBE " + node.segment_id + " " + std::to_string(node.pose_index));
    g.push_back("G4 S" + angle(gc.dwell_s));
    g.push_back("G0 Z" + coord(gc.safe_z_mm) + " F" + coord(gc.travel_feed_mm_min));
    ++prog.contact_cycles;
  }
  g.push_back("M400");
  g.push_back("; end of program");
  return prog;
}

void write_gcode(const std::string& path, const GcodeProgram& prog) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << prog.text();
}

GcodeCheck check_gcode(const std::string& text, double safe_z_mm) {
  GcodeCheck res;
  std::istringstream in(text);
  std::string line;
  std::optional<double> x, y, z;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.rfind(";PROBE", 0) == 0) ++res.contact_cycles;
    const size_t semi = line.find(';');
    if (semi != std::string::npos) line = line.substr(0, semi);

    std::istringstream words(line);
    std::string word;
    if (!(words >> word)) continue;
    if (word != "G0" && word != "G1") continue;

    std::optional<double> nx = x, ny = y, nz = z;
    while (words >> word) {
      if (word.size() < 2) continue;
      const char axis = static_cast<char>(std::toupper(word[0]));
      const double val = std::atof(word.c_str() + 1);
      if (axis == 'X') nx = val;
      if (axis == 'Y') ny = val;
      if (axis == 'Z') nz = val;
    }
    const bool xy_known = x.has_value() && y.has_value();
    const bool xy_moved = xy_known && nx.has_value() && ny.has_value() &&
                          (std::abs(*nx - *x) > 1e-12 || std::abs(*ny - *y) > 1e-12);
    if (xy_moved) {
      res.total_xy_travel_mm += std::hypot(*nx - *x, *ny - *y);
      const double z_before = z.value_or(safe_z_mm);
      const double z_after = nz.value_or(z_before);
      if (z_before < safe_z_mm - 1e-9 || z_after < safe_z_mm - 1e-9) {
        res.safe = false;
        res.violations.push_back("lateral motion below safe height at line " +
                                 std::to_string(lineno));
      }
    }
    x = nx;
    y = ny;
    z = nz;
  }
  return res;
}

}  // namespace probemap::pipeline

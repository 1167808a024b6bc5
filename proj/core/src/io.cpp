#include "torsion/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "torsion/error.hpp"

#ifndef TORSION_VERSION
#define TORSION_VERSION "0.0.0"
#endif

namespace torsion {

std::string version() { return TORSION_VERSION; }

namespace {

const unsigned kViridis[256] = {
#include "viridis.inc"
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string short_num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

}  // namespace

unsigned viridis(std::size_t i) { return kViridis[std::min<std::size_t>(i, 255)]; }

ShapeFile parse_shape(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind")) throw InvalidInput("shape file needs a \"kind\" field");
  const std::string kind = j.at("kind").get<std::string>();
  ShapeFile s;
  try {
    if (kind == "support") {
      std::vector<double> h = j.at("h").get<std::vector<double>>();
      if (j.contains("n") && j.at("n").get<std::size_t>() != h.size())
        throw InvalidInput("support shape: n does not match the length of h");
      s.support = SupportVector(std::move(h));
      s.polygon = polygon_from_support(*s.support);
    } else if (kind == "polygon") {
      std::vector<Vec2> v;
      for (const auto& xy : j.at("vertices")) {
        if (!xy.is_array() || xy.size() != 2) throw InvalidInput("polygon vertices must be [x, y] pairs");
        v.push_back({xy[0].get<double>(), xy[1].get<double>()});
      }
      s.polygon = ConvexPolygon(std::move(v));
    } else {
      throw InvalidInput("unknown shape kind '" + kind + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed shape file: ") + e.what());
  }
  return s;
}

ShapeFile load_shape(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidInput(path.string() + ": " + e.what());
  }
  return parse_shape(j);
}

nlohmann::ordered_json shape_json(const SupportVector& sv) {
  nlohmann::ordered_json j;
  j["kind"] = "support";
  j["n"] = sv.size();
  j["h"] = std::vector<double>(sv.values().begin(), sv.values().end());
  return j;
}

nlohmann::ordered_json shape_json(const ConvexPolygon& p) {
  nlohmann::ordered_json j;
  j["kind"] = "polygon";
  j["vertices"] = nlohmann::ordered_json::array();
  for (const Vec2& v : p.vertices()) j["vertices"].push_back({v.x, v.y});
  return j;
}

std::string dump_json(const nlohmann::ordered_json& j) {
  // nlohmann prints the shortest representation that parses back to the
  // same double, which never needs more than 17 significant digits.
  return j.dump(2) + "\n";
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out << text;
  if (!out) throw InvalidInput("write failed: " + path.string());
}

void save_shape(const std::filesystem::path& path, const SupportVector& sv) { write_text(path, dump_json(shape_json(sv))); }
void save_shape(const std::filesystem::path& path, const ConvexPolygon& p) { write_text(path, dump_json(shape_json(p))); }

void write_mesh(std::ostream& os, const TriMesh& m) {
  for (const Vec2& v : m.nodes) os << "v " << num(v.x) << ' ' << num(v.y) << '\n';
  for (const auto& t : m.triangles) os << "t " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

TriMesh read_mesh(std::istream& is) {
  TriMesh m;
  std::string line;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Vec2 v;
      if (!(ls >> v.x >> v.y)) throw InvalidInput("bad vertex line: " + line);
      m.nodes.push_back(v);
    } else if (tag == "t") {
      std::array<int, 3> t{};
      if (!(ls >> t[0] >> t[1] >> t[2])) throw InvalidInput("bad triangle line: " + line);
      m.triangles.push_back(t);
    } else {
      throw InvalidInput("unknown mesh line: " + line);
    }
  }
  return m;
}

void write_solution(std::ostream& os, const TorsionSolution& sol) {
  os << "# x y u\n";
  for (std::size_t i = 0; i < sol.u.size(); ++i)
    os << num(sol.mesh.nodes[i].x) << ' ' << num(sol.mesh.nodes[i].y) << ' ' << num(sol.u[i]) << '\n';
}

Vec2 SvgFrame::to_pixels(Vec2 p) const {
  return {(p.x - min_x) / width * pixels_wide, (-p.y - min_y) / height * pixels_high};
}

SvgFrame svg_frame(const ConvexPolygon& p, double pixels_wide) {
  double x0 = p[0].x, x1 = p[0].x, y0 = p[0].y, y1 = p[0].y;
  for (const Vec2& v : p.vertices()) {
    x0 = std::min(x0, v.x);
    x1 = std::max(x1, v.x);
    y0 = std::min(y0, v.y);
    y1 = std::max(y1, v.y);
  }
  const double mx = 0.05 * (x1 - x0), my = 0.05 * (y1 - y0);
  SvgFrame f{x0 - mx, -y1 - my, (x1 - x0) + 2 * mx, (y1 - y0) + 2 * my, pixels_wide, 0.0};
  f.pixels_high = pixels_wide * f.height / f.width;
  return f;
}

std::string render_svg(const ConvexPolygon& p, const SvgLayers& layers) {
  const SvgFrame f = svg_frame(p);
  const double unit = f.width / f.pixels_wide;  // one pixel in user units
  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << short_num(f.pixels_wide) << "\" height=\""
     << short_num(f.pixels_high) << "\" viewBox=\"" << num(f.min_x) << ' ' << num(f.min_y) << ' ' << num(f.width)
     << ' ' << num(f.height) << "\">\n";

  if (layers.solution) {
    const TorsionSolution& s = *layers.solution;
    const double root_area = std::sqrt(polygon_area(p.vertices()));
    double top = 0.0;
    for (const Vec2& g : s.grad) top = std::max(top, norm(g) / root_area);
    os << "<g stroke=\"none\">\n";
    for (std::size_t t = 0; t < s.mesh.triangles.size(); ++t) {
      const double v = top > 0.0 ? norm(s.grad[t]) / root_area / top : 0.0;
      const unsigned rgb = viridis(static_cast<std::size_t>(std::lround(v * 255.0)));
      char fill[8];
      std::snprintf(fill, sizeof fill, "#%06x", rgb);
      os << "<polygon fill=\"" << fill << "\" points=\"";
      for (int k = 0; k < 3; ++k) {
        const Vec2 q = s.mesh.nodes[s.mesh.triangles[t][k]];
        os << (k ? " " : "") << num(q.x) << ',' << num(-q.y);
      }
      os << "\"/>\n";
    }
    os << "</g>\n";
  }

  os << "<path fill=\"none\" stroke=\"black\" stroke-width=\"" << num(1.5 * unit) << "\" d=\"";
  for (std::size_t i = 0; i < p.size(); ++i) os << (i ? " L " : "M ") << num(p[i].x) << ' ' << num(-p[i].y);
  os << " Z\"/>\n";

  std::optional<Vec2> marker;
  if (layers.report)
    marker = layers.report->g_max_location;
  else if (layers.profile)
    marker = layers.profile->z_max;
  if (marker)
    os << "<circle class=\"gmax\" cx=\"" << num(marker->x) << "\" cy=\"" << num(-marker->y) << "\" r=\""
       << num(6 * unit) << "\" fill=\"red\" stroke=\"white\" stroke-width=\"" << num(unit) << "\"/>\n";

  if (layers.report) {
    const double fs = 16 * unit;
    os << "<text x=\"" << num(f.min_x + fs) << "\" y=\"" << num(f.min_y + 1.5 * fs) << "\" font-size=\"" << num(fs)
       << "\" font-family=\"sans-serif\">J = " << short_num(layers.report->J)
       << ", JP = " << short_num(layers.report->JP) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void render_svg(const ConvexPolygon& p, const SvgLayers& layers, const std::filesystem::path& path) {
  write_text(path, render_svg(p, layers));
}

}  // namespace torsion

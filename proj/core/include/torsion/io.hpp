#pragma once

#include <filesystem>
#include <iosfwd>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>

#include "torsion/fem.hpp"
#include "torsion/functionals.hpp"
#include "torsion/geometry.hpp"
#include "torsion/mesh.hpp"

namespace torsion {

/// Library version, e.g. "0.1.0".
std::string version();

/// A shape file holds either support values or polygon vertices.
struct ShapeFile {
  std::optional<SupportVector> support;
  ConvexPolygon polygon{std::vector<Vec2>{{0, 0}, {1, 0}, {0, 1}}};
};

ShapeFile parse_shape(const nlohmann::json& j);
ShapeFile load_shape(const std::filesystem::path& path);
nlohmann::ordered_json shape_json(const SupportVector& sv);
nlohmann::ordered_json shape_json(const ConvexPolygon& p);
void save_shape(const std::filesystem::path& path, const SupportVector& sv);
void save_shape(const std::filesystem::path& path, const ConvexPolygon& p);

/// Serialized with 17 significant digits, so doubles round-trip exactly.
std::string dump_json(const nlohmann::ordered_json& j);
void write_text(const std::filesystem::path& path, const std::string& text);

/// "v x y" and "t i j k" lines.
void write_mesh(std::ostream& os, const TriMesh& m);
TriMesh read_mesh(std::istream& is);
/// "x y u" per node after a header comment.
void write_solution(std::ostream& os, const TorsionSolution& sol);

struct SvgLayers {
  const TorsionSolution* solution = nullptr;         ///< heatmap of |grad u| / sqrt(area)
  const BoundaryGradientProfile* profile = nullptr;  ///< marker at the probe maximum
  const FunctionalReport* report = nullptr;          ///< legend and marker location
};

struct SvgFrame {
  double min_x, min_y, width, height;  ///< viewBox in flipped (y down) coordinates
  double pixels_wide, pixels_high;
  /// Pixel position of a domain point.
  Vec2 to_pixels(Vec2 p) const;
};

SvgFrame svg_frame(const ConvexPolygon& p, double pixels_wide = 800.0);
std::string render_svg(const ConvexPolygon& p, const SvgLayers& layers = {});
void render_svg(const ConvexPolygon& p, const SvgLayers& layers, const std::filesystem::path& path);

/// 24-bit RGB of the embedded 256-entry viridis table.
unsigned viridis(std::size_t i);

}  // namespace torsion

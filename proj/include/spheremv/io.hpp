#pragma once

// File formats of the command-line tool.
//
// Network (JSON):
//   { "convention": "X_cam = rot * X_world + t",
//     "views": [ { "image_id": str, "f": num, "px": num, "py": num,
//                  "rot": [9 numbers, row-major], "t": [3 numbers],
//                  "iop_cov": [9 numbers, row-major, order (px, py, f)] (optional) } ],
//     "tie_points": [ { "xyz": [3 numbers], "visible_in": [image_id, ...] } ] (optional) }
//
// Ellipses (CSV with mandatory header):
//   image_id,ellipse_id,x_ce,y_ce,a_e,b_e,theta_rad
//   optionally followed by the upper triangle of the (a_e, b_e, x_ce, y_ce)
//   covariance: cov_aa,cov_ab,cov_ax,cov_ay,cov_bb,cov_bx,cov_by,cov_xx,cov_xy,cov_yy
//
// Spheres (JSON): see sphere_file_to_json().

#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "spheremv/network.hpp"
#include "spheremv/pipeline.hpp"
#include "spheremv/projection.hpp"

namespace spheremv::io {

inline constexpr const char* kConvention = "X_cam = rot * X_world + t";

ImageNetwork network_from_json(const nlohmann::json& doc);
nlohmann::json network_to_json(const ImageNetwork& network);
ImageNetwork read_network(const std::filesystem::path& path);

std::vector<EllipseObservation> parse_ellipses_csv(std::istream& in);
// Covariance columns are written when any observation carries one; rows
// without covariance then leave them empty.
std::string ellipses_to_csv(const std::vector<EllipseObservation>& observations);
std::vector<EllipseObservation> read_ellipses(const std::filesystem::path& path);

struct SphereRecord {
  std::string id;
  SphereModel model;
  std::vector<std::pair<std::string, std::string>> ellipse_ids;
  std::vector<GateRecord> gate_reports;

  bool operator==(const SphereRecord& other) const;
};

struct SphereFile {
  std::optional<std::pair<std::string, std::string>> pair;
  std::vector<SphereRecord> spheres;

  bool operator==(const SphereFile& other) const = default;
};

SphereFile sphere_file_from_reconstruction(const SceneReconstruction& scene);
nlohmann::json sphere_file_to_json(const SphereFile& file);
SphereFile sphere_file_from_json(const nlohmann::json& doc);
SphereFile read_sphere_file(const std::filesystem::path& path);

// Serialized JSON text with a trailing newline.
std::string dump(const nlohmann::json& doc);

// ASCII PLY with x, y, z vertex properties. Other vertex properties and
// other elements are passed through token for token.
struct PlyCloud {
  std::vector<std::string> header;  // lines up to and including end_header
  std::vector<std::vector<std::string>> body;  // one token list per data line
  std::size_t vertex_begin = 0;  // first vertex line in `body`
  std::size_t vertex_count = 0;
  std::size_t x_col = 0, y_col = 0, z_col = 0;
};

PlyCloud parse_ply(std::istream& in);
void scale_ply(PlyCloud& cloud, double s_r);
std::string ply_to_string(const PlyCloud& cloud);

// Writes through a temporary file in the same directory and renames it.
void write_atomic(const std::filesystem::path& path, const std::string& contents);

std::string read_text(const std::filesystem::path& path);

// Shortest text that round-trips `value`.
std::string format_double(double value);

}  // namespace spheremv::io

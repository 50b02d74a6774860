#include "spheremv/io.hpp"

#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <system_error>

#include "spheremv/errors.hpp"

namespace spheremv::io {
namespace {

using nlohmann::json;

constexpr std::array<const char*, 7> kRequiredColumns = {
    "image_id", "ellipse_id", "x_ce", "y_ce", "a_e", "b_e", "theta_rad"};
constexpr std::array<const char*, 10> kCovColumns = {
    "cov_aa", "cov_ab", "cov_ax", "cov_ay", "cov_bb",
    "cov_bx", "cov_by", "cov_xx", "cov_xy", "cov_yy"};
// (row, col) of each covariance column in the 4x4 (a, b, x, y) matrix.
constexpr std::array<std::array<int, 2>, 10> kCovIndex = {
    {{0, 0}, {0, 1}, {0, 2}, {0, 3}, {1, 1}, {1, 2}, {1, 3}, {2, 2}, {2, 3}, {3, 3}}};

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_number(const std::string& text, const std::string& what) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw ParseError("cannot parse " + what + " from '" + text + "'");
  }
  return value;
}

template <int N>
Eigen::Matrix<double, N, 1> vector_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.size() != N) {
    throw ParseError(std::string(what) + " must be an array of " + std::to_string(N) + " numbers");
  }
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) {
    if (!j[i].is_number()) throw ParseError(std::string(what) + " must contain numbers");
    v(i) = j[i].get<double>();
  }
  return v;
}

Eigen::Matrix3d matrix3_from_json(const json& j, const char* what) {
  const auto flat = vector_from_json<9>(j, what);
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) m(r, c) = flat(3 * r + c);
  }
  return m;
}

json matrix3_to_json(const Eigen::Matrix3d& m) {
  json out = json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) out.push_back(m(r, c));
  }
  return out;
}

template <typename Derived>
json vector_to_json(const Eigen::MatrixBase<Derived>& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

const json& field(const json& obj, const char* key, const char* context) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ParseError(std::string(context) + ": missing field '" + key + "'");
  }
  return obj.at(key);
}

double number_field(const json& obj, const char* key, const char* context) {
  const json& v = field(obj, key, context);
  if (!v.is_number()) throw ParseError(std::string(context) + ": '" + key + "' must be a number");
  return v.get<double>();
}

std::string string_field(const json& obj, const char* key, const char* context) {
  const json& v = field(obj, key, context);
  if (!v.is_string()) throw ParseError(std::string(context) + ": '" + key + "' must be a string");
  return v.get<std::string>();
}

json parse_json_text(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(source + ": " + e.what());
  }
}

}  // namespace

std::string format_double(double value) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), ptr);
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_atomic(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write '" + tmp.string() + "'");
    out << contents;
    if (!out.flush()) throw ValidationError("failed writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw ValidationError("cannot rename onto '" + path.string() + "': " + ec.message());
  }
}

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Network

ImageNetwork network_from_json(const json& doc) {
  if (!doc.is_object()) throw ParseError("network: top level must be an object");
  const json& convention = field(doc, "convention", "network");
  if (!convention.is_string() || convention.get<std::string>() != kConvention) {
    throw ParseError(std::string("network: 'convention' must be \"") + kConvention + "\"");
  }
  ImageNetwork network;
  const json& views = field(doc, "views", "network");
  if (!views.is_array()) throw ParseError("network: 'views' must be an array");
  for (const json& jv : views) {
    CameraView v;
    v.image_id = string_field(jv, "image_id", "view");
    v.intrinsics.f = number_field(jv, "f", "view");
    v.intrinsics.px = number_field(jv, "px", "view");
    v.intrinsics.py = number_field(jv, "py", "view");
    v.rot = matrix3_from_json(field(jv, "rot", "view"), "rot");
    v.t = vector_from_json<3>(field(jv, "t", "view"), "t");
    if (jv.contains("iop_cov") && !jv.at("iop_cov").is_null()) {
      v.iop_cov = matrix3_from_json(jv.at("iop_cov"), "iop_cov");
    }
    network.views.push_back(std::move(v));
  }
  if (doc.contains("tie_points") && !doc.at("tie_points").is_null()) {
    const json& tps = doc.at("tie_points");
    if (!tps.is_array()) throw ParseError("network: 'tie_points' must be an array");
    for (const json& jt : tps) {
      TiePoint tp;
      tp.xyz = vector_from_json<3>(field(jt, "xyz", "tie point"), "xyz");
      const json& vis = field(jt, "visible_in", "tie point");
      if (!vis.is_array()) throw ParseError("tie point: 'visible_in' must be an array");
      for (const json& id : vis) {
        if (!id.is_string()) throw ParseError("tie point: image ids must be strings");
        tp.visible_in.push_back(id.get<std::string>());
      }
      network.tie_points.push_back(std::move(tp));
    }
  }
  try {
    validate(network);
  } catch (const ValidationError& e) {
    throw ParseError(std::string("network: ") + e.what());
  }
  return network;
}

json network_to_json(const ImageNetwork& network) {
  json doc;
  doc["convention"] = kConvention;
  doc["views"] = json::array();
  for (const auto& v : network.views) {
    json jv;
    jv["image_id"] = v.image_id;
    jv["f"] = v.f();
    jv["px"] = v.px();
    jv["py"] = v.py();
    jv["rot"] = matrix3_to_json(v.rot);
    jv["t"] = vector_to_json(v.t);
    if (v.iop_cov) jv["iop_cov"] = matrix3_to_json(*v.iop_cov);
    doc["views"].push_back(std::move(jv));
  }
  if (!network.tie_points.empty()) {
    doc["tie_points"] = json::array();
    for (const auto& tp : network.tie_points) {
      doc["tie_points"].push_back({{"xyz", vector_to_json(tp.xyz)}, {"visible_in", tp.visible_in}});
    }
  }
  return doc;
}

ImageNetwork read_network(const std::filesystem::path& path) {
  return network_from_json(parse_json_text(read_text(path), path.string()));
}

// ---------------------------------------------------------------------------
// Ellipses

std::vector<EllipseObservation> parse_ellipses_csv(std::istream& in) {
  std::vector<EllipseObservation> out;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  bool have_cov_columns = false;
  std::set<std::pair<std::string, std::string>> seen;

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    const std::string where = "ellipses line " + std::to_string(line_no);

    if (!have_header) {
      if (cells.size() != kRequiredColumns.size() &&
          cells.size() != kRequiredColumns.size() + kCovColumns.size()) {
        throw ParseError(where + ": header must list 7 or 17 columns");
      }
      for (std::size_t c = 0; c < cells.size(); ++c) {
        const char* expected = c < kRequiredColumns.size()
                                   ? kRequiredColumns[c]
                                   : kCovColumns[c - kRequiredColumns.size()];
        if (cells[c] != expected) {
          throw ParseError(where + ": expected column '" + expected + "', found '" + cells[c] +
                           "'");
        }
      }
      have_cov_columns = cells.size() > kRequiredColumns.size();
      have_header = true;
      continue;
    }

    const std::size_t width = kRequiredColumns.size() + (have_cov_columns ? kCovColumns.size() : 0);
    if (cells.size() != width) {
      throw ParseError(where + ": expected " + std::to_string(width) + " cells, found " +
                       std::to_string(cells.size()));
    }
    EllipseObservation obs;
    obs.image_id = cells[0];
    obs.ellipse_id = cells[1];
    if (obs.image_id.empty() || obs.ellipse_id.empty()) {
      throw ParseError(where + ": empty image_id or ellipse_id");
    }
    obs.ellipse.x_ce = parse_number(cells[2], "x_ce");
    obs.ellipse.y_ce = parse_number(cells[3], "y_ce");
    obs.ellipse.a_e = parse_number(cells[4], "a_e");
    obs.ellipse.b_e = parse_number(cells[5], "b_e");
    obs.ellipse.theta = parse_number(cells[6], "theta_rad");
    if (have_cov_columns) {
      std::size_t filled = 0;
      for (std::size_t c = 0; c < kCovColumns.size(); ++c) {
        filled += !cells[kRequiredColumns.size() + c].empty();
      }
      if (filled == kCovColumns.size()) {
        Eigen::Matrix4d cov;
        for (std::size_t c = 0; c < kCovColumns.size(); ++c) {
          const double v = parse_number(cells[kRequiredColumns.size() + c], kCovColumns[c]);
          cov(kCovIndex[c][0], kCovIndex[c][1]) = v;
          cov(kCovIndex[c][1], kCovIndex[c][0]) = v;
        }
        obs.cov = cov;
      } else if (filled != 0) {
        throw ParseError(where + ": covariance columns must be all filled or all empty");
      }
    }
    try {
      validate(obs);
    } catch (const ValidationError& e) {
      throw ParseError(where + ": " + e.what());
    }
    if (!seen.insert({obs.image_id, obs.ellipse_id}).second) {
      throw ParseError(where + ": duplicate ellipse '" + obs.image_id + "/" + obs.ellipse_id +
                       "'");
    }
    out.push_back(std::move(obs));
  }
  return out;
}

std::string ellipses_to_csv(const std::vector<EllipseObservation>& observations) {
  bool any_cov = false;
  for (const auto& obs : observations) any_cov = any_cov || obs.cov.has_value();
  std::ostringstream os;
  for (std::size_t c = 0; c < kRequiredColumns.size(); ++c) {
    os << (c ? "," : "") << kRequiredColumns[c];
  }
  if (any_cov) {
    for (const char* name : kCovColumns) os << ',' << name;
  }
  os << '\n';
  for (const auto& obs : observations) {
    const Ellipse& e = obs.ellipse;
    os << obs.image_id << ',' << obs.ellipse_id << ',' << format_double(e.x_ce) << ','
       << format_double(e.y_ce) << ',' << format_double(e.a_e) << ',' << format_double(e.b_e)
       << ',' << format_double(e.theta);
    if (any_cov) {
      for (const auto& idx : kCovIndex) {
        os << ',';
        if (obs.cov) os << format_double((*obs.cov)(idx[0], idx[1]));
      }
    }
    os << '\n';
  }
  return os.str();
}

std::vector<EllipseObservation> read_ellipses(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  return parse_ellipses_csv(in);
}

// ---------------------------------------------------------------------------
// Spheres

bool SphereRecord::operator==(const SphereRecord& other) const {
  const auto same_reports = [](const std::vector<GateRecord>& a, const std::vector<GateRecord>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i].image_id != b[i].image_id || a[i].ellipse_id != b[i].ellipse_id ||
          a[i].report.tau != b[i].report.tau || a[i].report.sigma_tau != b[i].report.sigma_tau ||
          a[i].report.k != b[i].report.k || a[i].report.accepted != b[i].report.accepted) {
        return false;
      }
    }
    return true;
  };
  const SphereModel& m = model;
  const SphereModel& o = other.model;
  return id == other.id && m.sphere.center == o.sphere.center &&
         m.sphere.radius == o.sphere.radius && m.per_view_radii == o.per_view_radii &&
         m.radius_spread == o.radius_spread &&
         m.triangulation_residual == o.triangulation_residual &&
         m.scale_applied == o.scale_applied && ellipse_ids == other.ellipse_ids &&
         same_reports(gate_reports, other.gate_reports);
}

SphereFile sphere_file_from_reconstruction(const SceneReconstruction& scene) {
  SphereFile file;
  file.pair = std::make_pair(scene.pair.i, scene.pair.j);
  for (const auto& s : scene.spheres) {
    file.spheres.push_back({s.id, s.model, s.ellipse_ids, s.gate_reports});
  }
  return file;
}

json sphere_file_to_json(const SphereFile& file) {
  json doc;
  doc["pair"] = file.pair ? json::array({file.pair->first, file.pair->second}) : json(nullptr);
  doc["spheres"] = json::array();
  for (const auto& s : file.spheres) {
    json js;
    js["id"] = s.id;
    js["center"] = vector_to_json(s.model.sphere.center);
    js["radius"] = s.model.sphere.radius;
    js["per_view_radii"] = json::array();
    for (const auto& v : s.model.per_view_radii) {
      js["per_view_radii"].push_back({{"image_id", v.image_id}, {"radius", v.radius}});
    }
    js["radius_spread"] = s.model.radius_spread;
    js["triangulation_residual"] = s.model.triangulation_residual;
    js["ellipse_ids"] = json::array();
    for (const auto& [image, ellipse] : s.ellipse_ids) {
      js["ellipse_ids"].push_back({{"image_id", image}, {"ellipse_id", ellipse}});
    }
    js["gate_reports"] = json::array();
    for (const auto& g : s.gate_reports) {
      js["gate_reports"].push_back({{"image_id", g.image_id},
                                    {"ellipse_id", g.ellipse_id},
                                    {"tau", g.report.tau},
                                    {"sigma_tau", g.report.sigma_tau},
                                    {"k", g.report.k},
                                    {"accepted", g.report.accepted}});
    }
    js["scale_applied"] = s.model.scale_applied ? json(*s.model.scale_applied) : json(nullptr);
    doc["spheres"].push_back(std::move(js));
  }
  return doc;
}

SphereFile sphere_file_from_json(const json& doc) {
  if (!doc.is_object()) throw ParseError("spheres: top level must be an object");
  SphereFile file;
  if (doc.contains("pair") && !doc.at("pair").is_null()) {
    const json& p = doc.at("pair");
    if (!p.is_array() || p.size() != 2 || !p[0].is_string() || !p[1].is_string()) {
      throw ParseError("spheres: 'pair' must be two image ids");
    }
    file.pair = std::make_pair(p[0].get<std::string>(), p[1].get<std::string>());
  }
  const json& spheres = field(doc, "spheres", "spheres");
  if (!spheres.is_array()) throw ParseError("spheres: 'spheres' must be an array");
  for (const json& js : spheres) {
    SphereRecord s;
    s.id = string_field(js, "id", "sphere");
    s.model.sphere.center = vector_from_json<3>(field(js, "center", "sphere"), "center");
    s.model.sphere.radius = number_field(js, "radius", "sphere");
    s.model.sphere.frame = Frame::kWorld;
    for (const json& v : field(js, "per_view_radii", "sphere")) {
      s.model.per_view_radii.push_back(
          {string_field(v, "image_id", "per_view_radii"), number_field(v, "radius", "per_view_radii")});
    }
    s.model.radius_spread = number_field(js, "radius_spread", "sphere");
    s.model.triangulation_residual = number_field(js, "triangulation_residual", "sphere");
    for (const json& e : field(js, "ellipse_ids", "sphere")) {
      s.ellipse_ids.emplace_back(string_field(e, "image_id", "ellipse_ids"),
                                 string_field(e, "ellipse_id", "ellipse_ids"));
    }
    for (const json& g : field(js, "gate_reports", "sphere")) {
      GateRecord r;
      r.image_id = string_field(g, "image_id", "gate_reports");
      r.ellipse_id = string_field(g, "ellipse_id", "gate_reports");
      r.report.tau = number_field(g, "tau", "gate_reports");
      r.report.sigma_tau = number_field(g, "sigma_tau", "gate_reports");
      r.report.k = number_field(g, "k", "gate_reports");
      const json& acc = field(g, "accepted", "gate_reports");
      if (!acc.is_boolean()) throw ParseError("gate_reports: 'accepted' must be a boolean");
      r.report.accepted = acc.get<bool>();
      s.gate_reports.push_back(std::move(r));
    }
    if (js.contains("scale_applied") && !js.at("scale_applied").is_null()) {
      s.model.scale_applied = number_field(js, "scale_applied", "sphere");
    }
    if (!(s.model.sphere.radius > 0.0)) throw ParseError("sphere '" + s.id + "': radius must be > 0");
    file.spheres.push_back(std::move(s));
  }
  return file;
}

SphereFile read_sphere_file(const std::filesystem::path& path) {
  return sphere_file_from_json(parse_json_text(read_text(path), path.string()));
}

// ---------------------------------------------------------------------------
// PLY

PlyCloud parse_ply(std::istream& in) {
  PlyCloud cloud;
  std::string line;
  if (!std::getline(in, line) || trim(line) != "ply") throw ParseError("PLY: missing magic 'ply'");
  cloud.header.push_back("ply");

  struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<std::string> properties;
    bool has_list = false;
  };
  std::vector<Element> elements;
  bool ascii = false, ended = false;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    cloud.header.push_back(t);
    std::istringstream ss(t);
    std::string keyword;
    ss >> keyword;
    if (keyword == "format") {
      std::string fmt;
      ss >> fmt;
      ascii = fmt == "ascii";
    } else if (keyword == "element") {
      Element e;
      std::string count;
      ss >> e.name >> count;
      e.count = static_cast<std::size_t>(parse_number(count, "PLY element count"));
      elements.push_back(std::move(e));
    } else if (keyword == "property") {
      if (elements.empty()) throw ParseError("PLY: property before any element");
      std::string type, name;
      ss >> type;
      if (type == "list") {
        elements.back().has_list = true;
        std::string count_type, item_type;
        ss >> count_type >> item_type;
      }
      ss >> name;
      elements.back().properties.push_back(name);
    } else if (keyword == "end_header") {
      ended = true;
      break;
    }
  }
  if (!ended) throw ParseError("PLY: missing end_header");
  if (!ascii) throw ParseError("PLY: only 'format ascii 1.0' is supported");

  bool found_vertex = false;
  for (const auto& e : elements) {
    if (e.name == "vertex") {
      if (e.has_list) throw ParseError("PLY: list properties on vertices are not supported");
      const auto col = [&](const char* name) -> std::size_t {
        for (std::size_t i = 0; i < e.properties.size(); ++i) {
          if (e.properties[i] == name) return i;
        }
        throw ParseError(std::string("PLY: vertex property '") + name + "' not found");
      };
      cloud.x_col = col("x");
      cloud.y_col = col("y");
      cloud.z_col = col("z");
      cloud.vertex_begin = cloud.body.size();
      cloud.vertex_count = e.count;
      found_vertex = true;
    }
    for (std::size_t n = 0; n < e.count; ++n) {
      if (!std::getline(in, line)) throw ParseError("PLY: unexpected end of data in '" + e.name + "'");
      std::istringstream ss(line);
      std::vector<std::string> tokens;
      std::string tok;
      while (ss >> tok) tokens.push_back(tok);
      if (e.name == "vertex" && tokens.size() != e.properties.size()) {
        throw ParseError("PLY: vertex " + std::to_string(n) + " has " +
                         std::to_string(tokens.size()) + " values, expected " +
                         std::to_string(e.properties.size()));
      }
      cloud.body.push_back(std::move(tokens));
    }
  }
  if (!found_vertex) throw ParseError("PLY: no vertex element");
  for (std::size_t n = 0; n < cloud.vertex_count; ++n) {
    const auto& row = cloud.body[cloud.vertex_begin + n];
    for (std::size_t c : {cloud.x_col, cloud.y_col, cloud.z_col}) {
      parse_number(row[c], "PLY coordinate");
    }
  }
  return cloud;
}

void scale_ply(PlyCloud& cloud, double s_r) {
  for (std::size_t n = 0; n < cloud.vertex_count; ++n) {
    auto& row = cloud.body[cloud.vertex_begin + n];
    for (std::size_t c : {cloud.x_col, cloud.y_col, cloud.z_col}) {
      row[c] = format_double(parse_number(row[c], "PLY coordinate") * s_r);
    }
  }
}

std::string ply_to_string(const PlyCloud& cloud) {
  std::ostringstream os;
  for (const auto& h : cloud.header) os << h << '\n';
  for (const auto& row : cloud.body) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? " " : "") << row[i];
    os << '\n';
  }
  return os.str();
}

}  // namespace spheremv::io

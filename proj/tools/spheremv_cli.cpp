// spheremv: sphere recovery from posed images and ellipse detections.
//
//   spheremv filter       gate ellipses with the spherical-ellipse test
//   spheremv select-pair  best image pair of a network
//   spheremv match        match spherical ellipses between two images
//   spheremv reconstruct  pair selection, gating, matching, reconstruction
//   spheremv scale        metric scale from spheres of known radius
//   spheremv simulate     synthetic Monte-Carlo accuracy study

#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spheremv/errors.hpp"
#include "spheremv/io.hpp"
#include "spheremv/pipeline.hpp"
#include "spheremv/synth.hpp"

namespace {

using nlohmann::json;
using namespace spheremv;

constexpr double kDeg = std::numbers::pi / 180.0;

void emit(const std::string& out_path, const std::string& text) {
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
  } else {
    io::write_atomic(out_path, text);
  }
}

std::optional<std::pair<std::string, std::string>> parse_pair(const std::string& text) {
  if (text.empty() || text == "auto") return std::nullopt;
  const auto comma = text.find(',');
  if (comma == std::string::npos || comma == 0 || comma + 1 == text.size()) {
    throw InvalidArgument("--pair must be 'auto' or 'i,j'");
  }
  return std::make_pair(text.substr(0, comma), text.substr(comma + 1));
}

std::vector<std::pair<std::string, double>> parse_anchors(const std::string& text) {
  std::vector<std::pair<std::string, double>> anchors;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto colon = item.rfind(':');
    if (colon == std::string::npos || colon == 0) {
      throw InvalidArgument("anchor '" + item + "' is not of the form id:radius");
    }
    double radius = 0.0;
    try {
      std::size_t used = 0;
      radius = std::stod(item.substr(colon + 1), &used);
      if (used != item.size() - colon - 1) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InvalidArgument("anchor '" + item + "' has a malformed radius");
    }
    anchors.emplace_back(item.substr(0, colon), radius);
  }
  if (anchors.empty()) throw InvalidArgument("--anchors is empty");
  return anchors;
}

std::vector<int> parse_k_list(const std::string& text) {
  std::vector<int> ks;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      ks.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw InvalidArgument("--k entry '" + item + "' is not an integer");
    }
  }
  return ks;
}

json pair_to_json(const PairScore& p) {
  return {{"i", p.i},
          {"j", p.j},
          {"alpha_deg", p.alpha_ij / kDeg},
          {"ov_i", p.ov_i},
          {"ov_j", p.ov_j},
          {"theta_ij", p.theta_ij}};
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << w << '\n';
}

struct PipelineFlags {
  std::string cameras, ellipses, out;
  std::string pair = "auto";
  double k_sigma = kDefaultGateK;
  double default_sigma_px = kDefaultEllipseSigmaPx;
  double min_angle_deg = 20.0;
  std::optional<double> tol_px;

  void add_to(CLI::App* cmd, bool with_pair) {
    cmd->add_option("--cameras", cameras, "network JSON")->required();
    cmd->add_option("--ellipses", ellipses, "ellipse CSV")->required();
    cmd->add_option("--out", out, "output path ('-' for stdout)");
    cmd->add_option("--k-sigma", k_sigma, "gate multiplier k");
    cmd->add_option("--default-sigma-px", default_sigma_px,
                    "ellipse sigma (px) when the CSV has no covariance");
    if (with_pair) {
      cmd->add_option("--pair", pair, "'auto' or 'i,j'");
      cmd->add_option("--min-angle-deg", min_angle_deg, "minimum convergence angle");
      cmd->add_option("--tol-px", tol_px, "epipolar tolerance; default max(3, 2 sigma_center)");
    }
  }

  PipelineOptions options() const {
    PipelineOptions o;
    o.k_sigma = k_sigma;
    o.default_sigma_px = default_sigma_px;
    o.min_angle = min_angle_deg * kDeg;
    o.pair = parse_pair(pair);
    o.tol_px = tol_px;
    return o;
  }
};

int run_filter(const PipelineFlags& flags, const std::string& report_path) {
  const ImageNetwork network = io::read_network(flags.cameras);
  const auto observations = io::read_ellipses(flags.ellipses);
  const auto records =
      gate_ellipses(network, observations, flags.k_sigma, flags.default_sigma_px);
  std::vector<EllipseObservation> kept;
  json report = json::array();
  for (std::size_t n = 0; n < observations.size(); ++n) {
    if (records[n].report.accepted) kept.push_back(observations[n]);
    report.push_back({{"image_id", records[n].image_id},
                      {"ellipse_id", records[n].ellipse_id},
                      {"tau", records[n].report.tau},
                      {"sigma_tau", records[n].report.sigma_tau},
                      {"k", records[n].report.k},
                      {"accepted", records[n].report.accepted}});
  }
  emit(flags.out, io::ellipses_to_csv(kept));
  if (!report_path.empty()) {
    io::write_atomic(report_path, io::dump(report));
  } else {
    for (const auto& r : records) {
      std::cerr << r.image_id << '/' << r.ellipse_id << " tau=" << r.report.tau
                << " sigma_tau=" << r.report.sigma_tau
                << (r.report.accepted ? " accepted" : " rejected") << '\n';
    }
  }
  return 0;
}

int run_select_pair(const std::string& cameras, double min_angle_deg, const std::string& out) {
  const ImageNetwork network = io::read_network(cameras);
  std::vector<std::string> warnings;
  const PairScore best = select_pair(network, min_angle_deg * kDeg, &warnings);
  print_warnings(warnings);
  emit(out, io::dump(pair_to_json(best)));
  return 0;
}

int run_match(const PipelineFlags& flags) {
  const ImageNetwork network = io::read_network(flags.cameras);
  const auto observations = io::read_ellipses(flags.ellipses);
  const SceneReconstruction scene = reconstruct_scene(network, observations, flags.options());
  print_warnings(scene.warnings);
  json doc;
  doc["pair"] = pair_to_json(scene.pair);
  doc["matches"] = json::array();
  for (const auto& s : scene.spheres) {
    doc["matches"].push_back({{"ellipse_l", s.ellipse_ids.at(0).second},
                              {"ellipse_k", s.ellipse_ids.at(1).second},
                              {"center", {s.model.sphere.center.x(), s.model.sphere.center.y(),
                                          s.model.sphere.center.z()}},
                              {"radius", s.model.sphere.radius}});
  }
  doc["rejected_by_gate"] = json::array();
  for (const auto& r : scene.rejected) {
    doc["rejected_by_gate"].push_back({{"image_id", r.image_id}, {"ellipse_id", r.ellipse_id}});
  }
  emit(flags.out, io::dump(doc));
  return 0;
}

int run_reconstruct(const PipelineFlags& flags) {
  const ImageNetwork network = io::read_network(flags.cameras);
  const auto observations = io::read_ellipses(flags.ellipses);
  const SceneReconstruction scene = reconstruct_scene(network, observations, flags.options());
  print_warnings(scene.warnings);
  emit(flags.out, io::dump(io::sphere_file_to_json(io::sphere_file_from_reconstruction(scene))));
  return 0;
}

int run_scale(const std::string& spheres_path, const std::string& anchors_text,
              const std::string& points, const std::string& out, std::string spheres_out) {
  const io::SphereFile file = io::read_sphere_file(spheres_path);
  std::vector<ScaleAnchor> anchors;
  for (const auto& [id, real] : parse_anchors(anchors_text)) {
    const auto it = std::find_if(file.spheres.begin(), file.spheres.end(),
                                 [&](const io::SphereRecord& s) { return s.id == id; });
    if (it == file.spheres.end()) throw UnknownAnchor("anchor '" + id + "' is not in the sphere file");
    anchors.push_back({real, it->model.sphere.radius});
  }
  const ScaleResult result = metric_scale(anchors);

  io::SphereFile scaled = file;
  for (auto& s : scaled.spheres) s.model = apply_scale(s.model, result.s_r);
  if (spheres_out.empty()) {
    std::filesystem::path p(spheres_path);
    spheres_out = (p.parent_path() / (p.stem().string() + ".scaled.json")).string();
  }
  io::write_atomic(spheres_out, io::dump(io::sphere_file_to_json(scaled)));

  if (!points.empty()) {
    if (out.empty()) throw InvalidArgument("--points requires --out");
    std::ifstream in(points);
    if (!in) throw ParseError("cannot open '" + points + "'");
    io::PlyCloud cloud = io::parse_ply(in);
    io::scale_ply(cloud, result.s_r);
    io::write_atomic(out, io::ply_to_string(cloud));
  }
  std::cout << io::dump({{"s_R", result.s_r},
                         {"residual_rmse", result.residual_rmse},
                         {"spheres_out", spheres_out}});
  return 0;
}

int run_simulate(const std::string& config_path, const std::string& k_text,
                 std::optional<double> sigma, std::optional<std::uint64_t> seed,
                 const std::string& out, bool timing, const std::string& scene_dir) {
  synth::SceneConfig config;
  if (!config_path.empty()) {
    try {
      config = synth::config_from_json(json::parse(io::read_text(config_path)));
    } catch (const json::exception& e) {
      throw ParseError(config_path + ": " + e.what());
    }
  }
  if (sigma) config.sigma_px = *sigma;
  if (seed) config.seed = *seed;
  const synth::Scene scene = synth::generate_scene(config, config.seed);

  if (!scene_dir.empty()) {
    std::filesystem::create_directories(scene_dir);
    const synth::Scene noisy = synth::perturb_observations(scene, config.sigma_px, config.seed);
    const std::filesystem::path dir(scene_dir);
    io::write_atomic(dir / "cameras.json", io::dump(io::network_to_json(noisy.network)));
    io::write_atomic(dir / "ellipses.csv", io::ellipses_to_csv(noisy.observations));
    json truth = json::array();
    for (std::size_t j = 0; j < scene.truth.size(); ++j) {
      const auto& s = scene.truth[j];
      truth.push_back({{"id", synth::sphere_ellipse_id(j)},
                       {"center", {s.center.x(), s.center.y(), s.center.z()}},
                       {"radius", s.radius}});
    }
    io::write_atomic(dir / "truth.json", io::dump(truth));
    io::write_atomic(dir / "config.json", io::dump(synth::config_to_json(config)));
  }

  if (!k_text.empty()) {
    synth::MonteCarloOptions mc;
    mc.sigma_px = config.sigma_px;
    const auto stats = synth::monte_carlo_views(scene, parse_k_list(k_text), config.seed, mc);
    emit(out, synth::stats_to_csv(stats, timing));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sphere recovery from posed images and ellipse detections"};
  app.require_subcommand(1);

  PipelineFlags filter_flags;
  std::string filter_report;
  auto* filter = app.add_subcommand("filter", "keep ellipses passing the spherical-ellipse gate");
  filter_flags.add_to(filter, false);
  filter->add_option("--report", filter_report, "per-ellipse gate report (JSON)");

  std::string sp_cameras, sp_out;
  double sp_min_angle = 20.0;
  auto* select = app.add_subcommand("select-pair", "best image pair of a network");
  select->add_option("--cameras", sp_cameras, "network JSON")->required();
  select->add_option("--min-angle-deg", sp_min_angle, "minimum convergence angle");
  select->add_option("--out", sp_out, "output path ('-' for stdout)");

  PipelineFlags match_flags;
  auto* match = app.add_subcommand("match", "match spherical ellipses between the pair");
  match_flags.add_to(match, true);

  PipelineFlags rec_flags;
  auto* reconstruct = app.add_subcommand("reconstruct", "recover spheres end to end");
  rec_flags.add_to(reconstruct, true);

  std::string sc_spheres, sc_anchors, sc_points, sc_out, sc_spheres_out;
  auto* scale = app.add_subcommand("scale", "metric scale from spheres of known radius");
  scale->add_option("--spheres", sc_spheres, "sphere JSON")->required();
  scale->add_option("--anchors", sc_anchors, "id:radius,...")->required();
  scale->add_option("--points", sc_points, "ASCII PLY to rescale");
  scale->add_option("--out", sc_out, "rescaled PLY path");
  scale->add_option("--spheres-out", sc_spheres_out,
                    "rescaled sphere JSON (default <spheres>.scaled.json)");

  std::string sim_config, sim_k, sim_out, sim_scene;
  std::optional<double> sim_sigma;
  std::optional<std::uint64_t> sim_seed;
  bool sim_timing = false;
  auto* simulate = app.add_subcommand("simulate", "synthetic Monte-Carlo study");
  simulate->add_option("--config", sim_config, "scene config JSON");
  simulate->add_option("--k", sim_k, "comma-separated view counts, e.g. 2,4,8,16,30");
  simulate->add_option("--sigma", sim_sigma, "ellipse noise sigma (px)");
  simulate->add_option("--seed", sim_seed, "master seed");
  simulate->add_option("--out", sim_out, "stats CSV path ('-' for stdout)");
  simulate->add_flag("--timing", sim_timing, "fill mean_ms with measured wall time");
  simulate->add_option("--write-scene", sim_scene,
                       "directory for cameras.json, ellipses.csv, truth.json, config.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::kValidation);
  }

  try {
    if (*filter) return run_filter(filter_flags, filter_report);
    if (*select) return run_select_pair(sp_cameras, sp_min_angle, sp_out);
    if (*match) return run_match(match_flags);
    if (*reconstruct) return run_reconstruct(rec_flags);
    if (*scale) return run_scale(sc_spheres, sc_anchors, sc_points, sc_out, sc_spheres_out);
    if (*simulate) {
      return run_simulate(sim_config, sim_k, sim_sigma, sim_seed, sim_out, sim_timing, sim_scene);
    }
  } catch (const Error& e) {
    std::cerr << "error";
    if (!e.stage().empty()) std::cerr << " [" << e.stage() << "]";
    std::cerr << ": " << e.what() << '\n';
    return static_cast<int>(e.exit_code());
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kValidation);
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kValidation);
  }
  return 0;
}

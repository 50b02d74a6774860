#include "spheremv/synth.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "spheremv/errors.hpp"
#include "spheremv/io.hpp"

namespace spheremv::synth {
namespace {

using nlohmann::json;

constexpr double kDeg = std::numbers::pi / 180.0;

std::mt19937_64 make_rng(std::initializer_list<std::uint64_t> keys) {
  std::vector<std::uint32_t> words;
  for (std::uint64_t k : keys) {
    words.push_back(static_cast<std::uint32_t>(k));
    words.push_back(static_cast<std::uint32_t>(k >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

CameraView look_at(const std::string& id, const Eigen::Vector3d& center,
                   const Eigen::Vector3d& aim, const Intrinsics<double>& k) {
  const Eigen::Vector3d z = (aim - center).normalized();
  Eigen::Vector3d x = z.cross(Eigen::Vector3d::UnitZ());
  if (x.norm() < 1e-6) x = Eigen::Vector3d::UnitX() - z * z.x();
  x.normalize();
  const Eigen::Vector3d y = z.cross(x);
  CameraView v;
  v.image_id = id;
  v.intrinsics = k;
  v.rot.row(0) = x.transpose();
  v.rot.row(1) = y.transpose();
  v.rot.row(2) = z.transpose();
  v.t = -v.rot * center;
  return v;
}

std::vector<Eigen::Vector3d> camera_directions(const SceneConfig& c) {
  std::vector<Eigen::Vector3d> dirs;
  const int n = c.n_cameras;
  for (int i = 0; i < n; ++i) {
    if (c.placement == Placement::kHemisphere) {
      const double cos_max = std::cos(c.max_polar_deg * kDeg);
      const double cos_polar = 1.0 - (1.0 - cos_max) * (i + 0.5) / n;
      const double sin_polar = std::sqrt(std::max(0.0, 1.0 - cos_polar * cos_polar));
      const double azimuth = i * std::numbers::pi * (3.0 - std::sqrt(5.0));
      dirs.emplace_back(sin_polar * std::cos(azimuth), sin_polar * std::sin(azimuth), cos_polar);
    } else {
      double azimuth;
      if (c.placement == Placement::kRing) {
        azimuth = 2.0 * std::numbers::pi * i / n;
      } else {
        const double span = c.arc_span_deg * kDeg;
        azimuth = n > 1 ? -span / 2 + span * i / (n - 1) : 0.0;
      }
      const double el = c.elevation_deg * kDeg;
      dirs.emplace_back(std::cos(el) * std::cos(azimuth), std::cos(el) * std::sin(azimuth),
                        std::sin(el));
    }
  }
  return dirs;
}

std::vector<Sphere> default_spheres(const SceneConfig& c, std::uint64_t seed) {
  std::vector<Sphere> spheres;
  std::mt19937_64 rng = make_rng({seed, 0x1A7});
  std::uniform_real_distribution<double> jitter(-c.layout_jitter, c.layout_jitter);
  const int grid = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(c.n_spheres))));
  for (int n = 0; n < c.n_spheres; ++n) {
    const int row = n / grid, col = n % grid;
    Sphere s;
    const double dx = jitter(rng), dy = jitter(rng);
    s.center = c.target + Eigen::Vector3d((col - (grid - 1) / 2.0 + dx) * c.sphere_spacing,
                                          (row - (grid - 1) / 2.0 + dy) * c.sphere_spacing,
                                          c.sphere_radius);
    s.radius = c.sphere_radius;
    spheres.push_back(s);
  }
  return spheres;
}

bool in_image(const Eigen::Vector2d& p, const SceneConfig& c) {
  return p.x() >= 0.0 && p.y() >= 0.0 && p.x() <= 2.0 * c.px && p.y() <= 2.0 * c.py;
}

std::string placement_name(Placement p) {
  switch (p) {
    case Placement::kRing: return "ring";
    case Placement::kArc: return "arc";
    case Placement::kHemisphere: return "hemisphere";
  }
  return "arc";
}

struct Accumulator {
  std::vector<double> center, radius, combined;
  void add(const PRmse& p) {
    center.push_back(p.center);
    radius.push_back(p.radius);
    combined.push_back(p.combined);
  }
};

void summarize(const std::vector<double>& v, double& mean, double& lo, double& hi) {
  if (v.empty()) {
    mean = lo = hi = NAN;
    return;
  }
  double sum = 0.0;
  for (double x : v) sum += x;
  mean = sum / static_cast<double>(v.size());
  lo = *std::min_element(v.begin(), v.end());
  hi = *std::max_element(v.begin(), v.end());
}

struct TrialOutcome {
  bool ok = false;
  PRmse error;
  int missing = 0;
  double ms = 0.0;
};

// Runs the pipeline on `image_ids` of a noisy copy of the scene and scores it
// as the RMS of per-sphere P-RMSE over recovered spheres.
TrialOutcome run_trial(const Scene& scene, const std::vector<std::string>& image_ids,
                       double sigma, std::uint64_t noise_seed, const PipelineOptions& options) {
  TrialOutcome out;
  const Scene noisy = perturb_observations(scene, sigma, noise_seed);
  const ImageNetwork sub = subnetwork(noisy.network, image_ids);
  const std::set<std::string> ids(image_ids.begin(), image_ids.end());
  std::vector<EllipseObservation> obs;
  for (const auto& o : noisy.observations) {
    if (ids.count(o.image_id)) obs.push_back(o);
  }

  SceneReconstruction rec;
  const auto start = std::chrono::steady_clock::now();
  try {
    rec = reconstruct_scene(sub, obs, options);
  } catch (const Error&) {
    out.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return out;
  }
  out.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

  double c2 = 0.0, r2 = 0.0, k2 = 0.0;
  int found = 0;
  for (std::size_t j = 0; j < scene.truth.size(); ++j) {
    const std::string id = sphere_ellipse_id(j);
    const auto it = std::find_if(rec.spheres.begin(), rec.spheres.end(),
                                 [&](const ReconstructedSphere& s) { return s.id == id; });
    if (it == rec.spheres.end()) {
      ++out.missing;
      continue;
    }
    const PRmse e = p_rmse(it->model, scene.truth[j]);
    c2 += e.center * e.center;
    r2 += e.radius * e.radius;
    k2 += e.combined * e.combined;
    ++found;
  }
  if (found == 0) return out;
  out.ok = true;
  out.error = {std::sqrt(c2 / found), std::sqrt(r2 / found), std::sqrt(k2 / found)};
  return out;
}

TrialStats aggregate(const std::string& label, int k, int p, const Accumulator& acc,
                     double total_ms, int failures, int missing) {
  TrialStats s;
  s.label = label;
  s.k = k;
  s.p = p;
  summarize(acc.center, s.center_mean, s.center_min, s.center_max);
  summarize(acc.radius, s.radius_mean, s.radius_min, s.radius_max);
  summarize(acc.combined, s.combined_mean, s.combined_min, s.combined_max);
  s.mean_ms = p > 0 ? total_ms / p : 0.0;
  s.failures = failures;
  s.missing_spheres = missing;
  return s;
}

std::uint64_t derive_seed(std::initializer_list<std::uint64_t> keys) { return make_rng(keys)(); }

}  // namespace

std::string sphere_ellipse_id(std::size_t j) { return "sphere-" + std::to_string(j); }

std::optional<std::size_t> sphere_index(const std::string& ellipse_id) {
  static const std::string prefix = "sphere-";
  if (ellipse_id.rfind(prefix, 0) != 0) return std::nullopt;
  try {
    return static_cast<std::size_t>(std::stoul(ellipse_id.substr(prefix.size())));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

Scene generate_scene(const SceneConfig& config, std::uint64_t seed) {
  if (config.n_cameras < 2) throw ConfigInfeasible("need at least two cameras");
  if (!(config.f > 0.0)) throw ConfigInfeasible("focal length must be positive");
  if (config.spheres.empty() &&
      (config.n_spheres < 1 || !(config.sphere_radius > 0.0) ||
       !(config.layout_jitter >= 0.0 && config.layout_jitter < 0.5) ||
       !(config.sphere_spacing * (1.0 - 2.0 * config.layout_jitter) > 2.0 * config.sphere_radius))) {
    throw ConfigInfeasible("default sphere layout overlaps or is empty");
  }
  for (const auto& s : config.spheres) {
    if (!(s.radius > 0.0) || !s.center.allFinite()) throw ConfigInfeasible("invalid sphere");
  }
  auto rng = make_rng({seed, 0x5CE7E});
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> prob(0.0, 1.0);

  Scene scene;
  const Intrinsics<double> k{config.f, config.px, config.py};
  const auto dirs = camera_directions(config);
  for (int i = 0; i < config.n_cameras; ++i) {
    const double dist = config.camera_distance * (1.0 + config.distance_jitter * unit(rng));
    const Eigen::Vector3d aim =
        config.target + config.aim_jitter * Eigen::Vector3d(unit(rng), unit(rng), unit(rng));
    char id[32];
    std::snprintf(id, sizeof id, "img-%02d", i);
    scene.network.views.push_back(look_at(id, config.target + dist * dirs[i], aim, k));
  }

  scene.truth = config.spheres.empty() ? default_spheres(config, seed) : config.spheres;
  for (auto& s : scene.truth) s.frame = Frame::kWorld;
  double b_typical = 0.0;
  for (const auto& view : scene.network.views) {
    for (std::size_t j = 0; j < scene.truth.size(); ++j) {
      const Sphere& s = scene.truth[j];
      const Eigen::Vector3d cam = world_to_camera(s.center, view);
      if (!(s.radius > 0.0) || !(cam.z() > s.radius * (1.0 + kDegenerateDepthMargin))) {
        throw ConfigInfeasible("sphere " + std::to_string(j) + " is not in front of " +
                               view.image_id);
      }
      EllipseObservation obs;
      obs.image_id = view.image_id;
      obs.ellipse_id = sphere_ellipse_id(j);
      obs.ellipse = project_sphere<double>(cam, s.radius, view.intrinsics);
      b_typical += obs.ellipse.b_e;
      scene.observations.push_back(std::move(obs));
    }
  }
  b_typical /= std::max<std::size_t>(1, scene.observations.size());
  if (b_typical <= 0.0) b_typical = 0.05 * config.f;

  for (const auto& view : scene.network.views) {
    for (int c = 0; c < config.clutter_per_image; ++c) {
      EllipseObservation obs;
      obs.image_id = view.image_id;
      obs.ellipse_id = "clutter-" + std::to_string(c);
      Ellipse& e = obs.ellipse;
      e.x_ce = config.px * (1.0 + 0.8 * unit(rng));
      e.y_ce = config.py * (1.0 + 0.8 * unit(rng));
      e.b_e = b_typical * (1.0 + 0.5 * unit(rng));
      const double dx = e.x_ce - config.px, dy = e.y_ce - config.py;
      const double spherical_a =
          e.b_e * std::sqrt((dx * dx + dy * dy) / (config.f * config.f + e.b_e * e.b_e) + 1.0);
      e.a_e = spherical_a * config.clutter_inflation;
      e.theta = fold_half_turn(std::numbers::pi / 2 * unit(rng));
      scene.observations.push_back(std::move(obs));
    }
  }

  std::uniform_real_distribution<double> board(-config.tie_extent, config.tie_extent);
  for (int n = 0; n < config.n_tie_points; ++n) {
    TiePoint tp;
    tp.xyz = config.target + Eigen::Vector3d(board(rng), board(rng), 0.0);
    for (const auto& view : scene.network.views) {
      const double dropped = prob(rng);
      if (world_to_camera(tp.xyz, view).z() <= 0.0) continue;
      if (!in_image(project_point(tp.xyz, view), config)) continue;
      if (dropped < config.tie_dropout) continue;
      tp.visible_in.push_back(view.image_id);
    }
    if (tp.visible_in.size() >= 2) scene.network.tie_points.push_back(std::move(tp));
  }
  return scene;
}

Scene perturb_observations(const Scene& scene, double sigma_px, std::uint64_t seed) {
  if (sigma_px < 0.0) throw InvalidArgument("noise sigma must be nonnegative");
  Scene out = scene;
  if (sigma_px == 0.0) return out;
  auto rng = make_rng({seed, 0x40153});
  std::normal_distribution<double> noise(0.0, sigma_px);
  const Eigen::Matrix4d cov = Eigen::Matrix4d::Identity() * sigma_px * sigma_px;
  for (auto& obs : out.observations) {
    Ellipse& e = obs.ellipse;
    e.a_e += noise(rng);
    e.b_e += noise(rng);
    e.x_ce += noise(rng);
    e.y_ce += noise(rng);
    if (e.a_e < e.b_e) std::swap(e.a_e, e.b_e);
    e.b_e = std::max(e.b_e, 1e-6);
    e.a_e = std::max(e.a_e, e.b_e);
    obs.cov = cov;
  }
  return out;
}

PRmse p_rmse(const SphereModel& estimated, const Sphere& truth) {
  const double dc = (estimated.sphere.center - truth.center).norm();
  const double dr = estimated.sphere.radius - truth.radius;
  PRmse p;
  p.center = 100.0 * dc / truth.radius;
  p.radius = 100.0 * std::abs(dr) / truth.radius;
  p.combined = 100.0 * std::sqrt((dc * dc + dr * dr) / 4.0) / truth.radius;
  return p;
}

bool TrialStats::same_accuracy(const TrialStats& o) const {
  const auto eq = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
  return label == o.label && k == o.k && p == o.p && eq(center_mean, o.center_mean) &&
         eq(center_min, o.center_min) && eq(center_max, o.center_max) &&
         eq(radius_mean, o.radius_mean) && eq(radius_min, o.radius_min) &&
         eq(radius_max, o.radius_max) && eq(combined_mean, o.combined_mean) &&
         eq(combined_min, o.combined_min) && eq(combined_max, o.combined_max) &&
         failures == o.failures && missing_spheres == o.missing_spheres;
}

int subset_count(int n, int k, int max_subsets) {
  if (k < 0 || k > n) return 0;
  // C(n, k) with early exit once it passes max_subsets.
  double c = 1.0;
  for (int i = 1; i <= std::min(k, n - k); ++i) {
    c = c * (n - std::min(k, n - k) + i) / i;
    if (c > max_subsets) return max_subsets;
  }
  return std::min(max_subsets, static_cast<int>(std::llround(c)));
}

ImageNetwork subnetwork(const ImageNetwork& network, const std::vector<std::string>& image_ids) {
  const std::set<std::string> keep(image_ids.begin(), image_ids.end());
  ImageNetwork out;
  for (const auto& v : network.views) {
    if (keep.count(v.image_id)) out.views.push_back(v);
  }
  for (const auto& tp : network.tie_points) {
    TiePoint t;
    t.xyz = tp.xyz;
    for (const auto& id : tp.visible_in) {
      if (keep.count(id)) t.visible_in.push_back(id);
    }
    if (t.visible_in.size() >= 2) out.tie_points.push_back(std::move(t));
  }
  return out;
}

std::vector<TrialStats> monte_carlo_views(const Scene& scene, const std::vector<int>& k_values,
                                          std::uint64_t seed, const MonteCarloOptions& options) {
  const int n = static_cast<int>(scene.network.views.size());
  std::vector<TrialStats> stats;

  for (int k : k_values) {
    if (k < 2 || k > n) {
      throw InvalidArgument("k = " + std::to_string(k) + " outside [2, " + std::to_string(n) + "]");
    }
    const int p = subset_count(n, k, options.max_subsets);

    // p unique k-subsets, drawn by partial shuffles.
    auto subset_rng = make_rng({seed, static_cast<std::uint64_t>(k), 0x5B5E7});
    std::set<std::vector<int>> seen;
    std::vector<std::vector<int>> subsets;
    std::vector<int> order(n);
    while (static_cast<int>(subsets.size()) < p) {
      for (int i = 0; i < n; ++i) order[i] = i;
      for (int i = 0; i < k; ++i) {
        std::uniform_int_distribution<int> pick(i, n - 1);
        std::swap(order[i], order[pick(subset_rng)]);
      }
      std::vector<int> subset(order.begin(), order.begin() + k);
      std::sort(subset.begin(), subset.end());
      if (seen.insert(subset).second) subsets.push_back(std::move(subset));
    }

    PipelineOptions pipeline;
    pipeline.min_angle = 0.0;
    pipeline.extend_to_all_views = k > 2;

    Accumulator acc;
    double total_ms = 0.0;
    int failures = 0, missing = 0;
    for (int trial = 0; trial < p; ++trial) {
      std::vector<std::string> ids;
      for (int i : subsets[trial]) ids.push_back(scene.network.views[i].image_id);
      const auto noise_seed =
          derive_seed({seed, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(trial)});
      const TrialOutcome t = run_trial(scene, ids, options.sigma_px, noise_seed, pipeline);
      total_ms += t.ms;
      if (!t.ok) {
        ++failures;
        continue;
      }
      missing += t.missing;
      acc.add(t.error);
    }
    stats.push_back(aggregate("random", k, p, acc, total_ms, failures, missing));
  }

  const PairScore best = best_pair(scene.network, options.min_angle);
  PipelineOptions pipeline;
  pipeline.pair = std::make_pair(best.i, best.j);
  Accumulator acc;
  double total_ms = 0.0;
  int failures = 0, missing = 0;
  for (int trial = 0; trial < options.best_pair_trials; ++trial) {
    const auto noise_seed = derive_seed({seed, 0xB357, static_cast<std::uint64_t>(trial)});
    const TrialOutcome t = run_trial(scene, {best.i, best.j}, options.sigma_px, noise_seed, pipeline);
    total_ms += t.ms;
    if (!t.ok) {
      ++failures;
      continue;
    }
    missing += t.missing;
    acc.add(t.error);
  }
  stats.push_back(
      aggregate("best-pair", 2, options.best_pair_trials, acc, total_ms, failures, missing));
  return stats;
}

std::string stats_to_csv(const std::vector<TrialStats>& stats, bool with_timing) {
  std::ostringstream os;
  os << "k,p,center_mean,center_min,center_max,radius_mean,radius_min,radius_max,mean_ms,"
        "failures,label,combined_mean,combined_min,combined_max,missing_spheres\n";
  const auto num = [](double v) { return io::format_double(v); };
  for (const auto& s : stats) {
    os << s.k << ',' << s.p << ',' << num(s.center_mean) << ',' << num(s.center_min) << ','
       << num(s.center_max) << ',' << num(s.radius_mean) << ',' << num(s.radius_min) << ','
       << num(s.radius_max) << ',' << (with_timing ? num(s.mean_ms) : std::string("NA")) << ','
       << s.failures << ',' << s.label << ',' << num(s.combined_mean) << ','
       << num(s.combined_min) << ',' << num(s.combined_max) << ',' << s.missing_spheres << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Config (de)serialization

SceneConfig config_from_json(const json& doc) {
  if (!doc.is_object()) throw ParseError("scene config: top level must be an object");
  SceneConfig c;
  const auto num = [&](const json& v, const std::string& key) {
    if (!v.is_number()) throw ParseError("scene config: '" + key + "' must be a number");
    return v.get<double>();
  };
  const auto integer = [&](const json& v, const std::string& key) {
    if (!v.is_number_integer()) throw ParseError("scene config: '" + key + "' must be an integer");
    return v.get<long long>();
  };
  const auto vec3 = [&](const json& v, const std::string& key) {
    if (!v.is_array() || v.size() != 3) throw ParseError("scene config: '" + key + "' needs 3 numbers");
    return Eigen::Vector3d(num(v[0], key), num(v[1], key), num(v[2], key));
  };
  for (const auto& [key, v] : doc.items()) {
    if (key == "n_cameras") c.n_cameras = static_cast<int>(integer(v, key));
    else if (key == "placement") {
      const std::string p = v.is_string() ? v.get<std::string>() : "";
      if (p == "ring") c.placement = Placement::kRing;
      else if (p == "arc") c.placement = Placement::kArc;
      else if (p == "hemisphere") c.placement = Placement::kHemisphere;
      else throw ParseError("scene config: placement must be ring, arc or hemisphere");
    }
    else if (key == "camera_distance") c.camera_distance = num(v, key);
    else if (key == "distance_jitter") c.distance_jitter = num(v, key);
    else if (key == "aim_jitter") c.aim_jitter = num(v, key);
    else if (key == "arc_span_deg") c.arc_span_deg = num(v, key);
    else if (key == "elevation_deg") c.elevation_deg = num(v, key);
    else if (key == "max_polar_deg") c.max_polar_deg = num(v, key);
    else if (key == "target") c.target = vec3(v, key);
    else if (key == "f") c.f = num(v, key);
    else if (key == "px") c.px = num(v, key);
    else if (key == "py") c.py = num(v, key);
    else if (key == "spheres") {
      if (!v.is_array()) throw ParseError("scene config: 'spheres' must be an array");
      for (const auto& js : v) {
        Sphere s;
        s.center = vec3(js.at("center"), "center");
        s.radius = num(js.at("radius"), "radius");
        c.spheres.push_back(s);
      }
    }
    else if (key == "n_spheres") c.n_spheres = static_cast<int>(integer(v, key));
    else if (key == "sphere_radius") c.sphere_radius = num(v, key);
    else if (key == "sphere_spacing") c.sphere_spacing = num(v, key);
    else if (key == "layout_jitter") c.layout_jitter = num(v, key);
    else if (key == "clutter_per_image") c.clutter_per_image = static_cast<int>(integer(v, key));
    else if (key == "clutter_inflation") c.clutter_inflation = num(v, key);
    else if (key == "n_tie_points") c.n_tie_points = static_cast<int>(integer(v, key));
    else if (key == "tie_extent") c.tie_extent = num(v, key);
    else if (key == "tie_dropout") c.tie_dropout = num(v, key);
    else if (key == "sigma_px") c.sigma_px = num(v, key);
    else if (key == "seed") c.seed = static_cast<std::uint64_t>(integer(v, key));
    else throw ParseError("scene config: unknown key '" + key + "'");
  }
  return c;
}

json config_to_json(const SceneConfig& c) {
  json doc;
  doc["n_cameras"] = c.n_cameras;
  doc["placement"] = placement_name(c.placement);
  doc["camera_distance"] = c.camera_distance;
  doc["distance_jitter"] = c.distance_jitter;
  doc["aim_jitter"] = c.aim_jitter;
  doc["arc_span_deg"] = c.arc_span_deg;
  doc["elevation_deg"] = c.elevation_deg;
  doc["max_polar_deg"] = c.max_polar_deg;
  doc["target"] = {c.target.x(), c.target.y(), c.target.z()};
  doc["f"] = c.f;
  doc["px"] = c.px;
  doc["py"] = c.py;
  if (!c.spheres.empty()) {
    doc["spheres"] = json::array();
    for (const auto& s : c.spheres) {
      doc["spheres"].push_back(
          {{"center", {s.center.x(), s.center.y(), s.center.z()}}, {"radius", s.radius}});
    }
  }
  doc["n_spheres"] = c.n_spheres;
  doc["sphere_radius"] = c.sphere_radius;
  doc["sphere_spacing"] = c.sphere_spacing;
  doc["layout_jitter"] = c.layout_jitter;
  doc["clutter_per_image"] = c.clutter_per_image;
  doc["clutter_inflation"] = c.clutter_inflation;
  doc["n_tie_points"] = c.n_tie_points;
  doc["tie_extent"] = c.tie_extent;
  doc["tie_dropout"] = c.tie_dropout;
  doc["sigma_px"] = c.sigma_px;
  doc["seed"] = c.seed;
  return doc;
}

}  // namespace spheremv::synth

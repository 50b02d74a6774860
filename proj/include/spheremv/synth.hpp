#pragma once

// Synthetic camera networks observing spheres, and the Monte-Carlo protocol
// that measures reconstruction accuracy against the number of views.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "spheremv/network.hpp"
#include "spheremv/pipeline.hpp"
#include "spheremv/projection.hpp"
#include "spheremv/reconstruction.hpp"

namespace spheremv::synth {

enum class Placement { kRing, kArc, kHemisphere };

// Defaults approximate a tabletop setup: thirty 4K images of nine balls lying
// on a board, taken from about 1.2 m.
struct SceneConfig {
  int n_cameras = 30;
  Placement placement = Placement::kArc;
  double camera_distance = 1.2;
  double distance_jitter = 0.1;  // relative, uniform
  double aim_jitter = 0.05;      // world units, uniform per axis
  double arc_span_deg = 120.0;   // ring uses 360
  double elevation_deg = 45.0;   // ring and arc
  double max_polar_deg = 60.0;   // hemisphere cap
  Eigen::Vector3d target = Eigen::Vector3d::Zero();

  double f = 3000.0;
  double px = 1920.0;
  double py = 1080.0;

  // Explicit spheres (world frame). When empty, n_spheres balls of
  // sphere_radius rest on z = 0 around a square grid, each displaced by up to
  // layout_jitter * sphere_spacing per axis (drawn from the scene seed) so
  // that no three are collinear by construction.
  std::vector<Sphere> spheres;
  int n_spheres = 9;
  double sphere_radius = 0.05;
  double sphere_spacing = 0.25;
  double layout_jitter = 0.25;

  int clutter_per_image = 4;
  double clutter_inflation = 1.2;  // factor on the spherical a_e

  int n_tie_points = 2000;
  double tie_extent = 0.6;        // half-width of the board carrying tie points
  double tie_dropout = 0.3;       // probability a visible tie point is missed

  double sigma_px = 0.5;
  std::uint64_t seed = 1;
};

SceneConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const SceneConfig& config);

struct Scene {
  ImageNetwork network;
  std::vector<Sphere> truth;  // world frame; index j observed as "sphere-<j>"
  std::vector<EllipseObservation> observations;  // spheres and clutter
};

std::string sphere_ellipse_id(std::size_t j);
// Index of the true sphere behind an ellipse id, if it is one.
std::optional<std::size_t> sphere_index(const std::string& ellipse_id);

// Exact observations of every sphere in every camera plus clutter ellipses
// that violate the spherical-ellipse identity. Deterministic in `seed`.
// Throws ConfigInfeasible when a sphere is not strictly in front of a camera.
Scene generate_scene(const SceneConfig& config, std::uint64_t seed);

// Independent N(0, sigma^2) noise on (a_e, b_e, x_ce, y_ce) of every
// observation; the covariance sigma^2 I is stored on each. Axes are swapped
// back if the noise inverts their order. sigma = 0 returns the scene as is.
Scene perturb_observations(const Scene& scene, double sigma_px, std::uint64_t seed);

struct PRmse {
  double center = 0.0;    // 100 |dC| / R
  double radius = 0.0;    // 100 |dR| / R
  double combined = 0.0;  // 100 sqrt((|dC|^2 + dR^2) / 4) / R
};

PRmse p_rmse(const SphereModel& estimated, const Sphere& truth);

struct TrialStats {
  std::string label;  // "random" or "best-pair"
  int k = 0;
  int p = 0;
  double center_mean = 0.0, center_min = 0.0, center_max = 0.0;
  double radius_mean = 0.0, radius_min = 0.0, radius_max = 0.0;
  double combined_mean = 0.0, combined_min = 0.0, combined_max = 0.0;
  double mean_ms = 0.0;
  int failures = 0;
  int missing_spheres = 0;  // true spheres absent from successful trials

  // Every field except mean_ms.
  bool same_accuracy(const TrialStats& other) const;
};

struct MonteCarloOptions {
  double sigma_px = 0.5;
  int max_subsets = 50;
  int best_pair_trials = 50;
  double min_angle = kDefaultMinConvergence;  // for the best pair only
};

// min(max_subsets, C(n, k)).
int subset_count(int n, int k, int max_subsets = 50);

// Per k: p unique random k-subsets of the cameras, each with fresh noise,
// run through select-pair, gate, match and reconstruct (extended to all k
// views). Trials that throw or recover no sphere are counted as failures.
// A final "best-pair" row repeats the best pair of the whole network with
// fresh noise per trial.
std::vector<TrialStats> monte_carlo_views(const Scene& scene, const std::vector<int>& k_values,
                                          std::uint64_t seed,
                                          const MonteCarloOptions& options = {});

// Network restricted to `image_ids`, keeping tie points seen by >= 2 of them.
ImageNetwork subnetwork(const ImageNetwork& network, const std::vector<std::string>& image_ids);

std::string stats_to_csv(const std::vector<TrialStats>& stats, bool with_timing);

}  // namespace spheremv::synth

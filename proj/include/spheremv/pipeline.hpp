#pragma once

// End-to-end sphere recovery from a posed image network and per-image
// ellipse detections: pick the best pair, gate, match, reconstruct.

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "spheremv/correspondence.hpp"
#include "spheremv/gate.hpp"
#include "spheremv/network.hpp"
#include "spheremv/reconstruction.hpp"

namespace spheremv {

struct GateRecord {
  std::string image_id;
  std::string ellipse_id;
  GateReport report;
};

struct PipelineOptions {
  double k_sigma = kDefaultGateK;
  double default_sigma_px = kDefaultEllipseSigmaPx;
  double min_angle = kDefaultMinConvergence;  // radians
  // Explicit (i, j) pair; selected by best_pair() when empty.
  std::optional<std::pair<std::string, std::string>> pair;
  // Epipolar tolerance; default_epipolar_tolerance() of the pair when empty.
  std::optional<double> tol_px;
  // After pairwise matching, pull matching ellipses from every other view
  // into each sphere by reprojecting its center.
  bool extend_to_all_views = false;
  double extension_tol_px = 10.0;
};

struct ReconstructedSphere {
  std::string id;  // ellipse_id of the sphere in the first image of the pair
  SphereModel model;
  // (image_id, ellipse_id) of every contributing observation.
  std::vector<std::pair<std::string, std::string>> ellipse_ids;
  std::vector<GateRecord> gate_reports;
};

struct SceneReconstruction {
  PairScore pair;
  bool pair_auto = true;
  std::vector<ReconstructedSphere> spheres;
  std::vector<GateRecord> rejected;  // ellipses of the pair failing the gate
  std::vector<std::string> warnings;
};

// Gate every observation against its view. Throws ValidationError for
// observations whose image_id is not in the network.
std::vector<GateRecord> gate_ellipses(const ImageNetwork& network,
                                      std::span<const EllipseObservation> observations,
                                      double k_sigma = kDefaultGateK,
                                      double default_sigma_px = kDefaultEllipseSigmaPx);

// best_pair(), falling back to a single tie point at the focus of the
// principal axes (with a warning) when the network has no tie points.
PairScore select_pair(const ImageNetwork& network, double min_angle,
                      std::vector<std::string>* warnings = nullptr);

// Score an explicit pair. Adds a warning when its angle is at or below
// min_angle.
PairScore score_explicit_pair(const ImageNetwork& network, const std::string& i,
                              const std::string& j, double min_angle,
                              std::vector<std::string>* warnings = nullptr);

// Errors propagate with Error::stage() set to one of "select-pair", "gate",
// "match" or "reconstruct".
SceneReconstruction reconstruct_scene(const ImageNetwork& network,
                                      std::span<const EllipseObservation> observations,
                                      const PipelineOptions& options = {});

}  // namespace spheremv

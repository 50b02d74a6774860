#include "spheremv/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "spheremv/errors.hpp"

namespace spheremv {
namespace {

template <typename Fn>
auto in_stage(const char* stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (Error& e) {
    e.set_stage(stage);
    throw;
  }
}

std::string degrees(double radians) {
  std::ostringstream os;
  os.precision(4);
  os << radians * 180.0 / std::numbers::pi;
  return os.str();
}

const ImageNetwork& network_with_tie_points(const ImageNetwork& network, ImageNetwork& storage,
                                            std::vector<std::string>* warnings) {
  if (!network.tie_points.empty()) return network;
  storage = with_fallback_tie_point(network);
  if (warnings != nullptr) {
    warnings->push_back(
        "WARNING: network has no tie points; convergence angles are measured at the focus of "
        "the principal axes and overlap is uniform");
  }
  return storage;
}

}  // namespace

std::vector<GateRecord> gate_ellipses(const ImageNetwork& network,
                                      std::span<const EllipseObservation> observations,
                                      double k_sigma, double default_sigma_px) {
  std::vector<GateRecord> records;
  records.reserve(observations.size());
  for (const auto& obs : observations) {
    const CameraView* view = network.find(obs.image_id);
    if (view == nullptr) {
      throw ValidationError("ellipse '" + obs.ellipse_id + "' references unknown image '" +
                            obs.image_id + "'");
    }
    records.push_back(
        {obs.image_id, obs.ellipse_id, classify_spherical(obs, *view, k_sigma, default_sigma_px)});
  }
  return records;
}

PairScore select_pair(const ImageNetwork& network, double min_angle,
                      std::vector<std::string>* warnings) {
  ImageNetwork storage;
  return best_pair(network_with_tie_points(network, storage, warnings), min_angle);
}

PairScore score_explicit_pair(const ImageNetwork& network, const std::string& i,
                              const std::string& j, double min_angle,
                              std::vector<std::string>* warnings) {
  if (network.find(i) == nullptr || network.find(j) == nullptr) {
    throw ValidationError("pair (" + i + ", " + j + ") references an unknown image");
  }
  if (i == j) throw ValidationError("pair must name two different images");
  ImageNetwork storage;
  const ImageNetwork& scored = network_with_tie_points(network, storage, warnings);
  PairScore out;
  out.i = i;
  out.j = j;
  bool found = false;
  for (const auto& s : score_pairs(scored)) {
    if ((s.i == i && s.j == j) || (s.i == j && s.j == i)) {
      out.alpha_ij = s.alpha_ij;
      out.theta_ij = s.theta_ij;
      out.ov_i = s.i == i ? s.ov_i : s.ov_j;
      out.ov_j = s.i == i ? s.ov_j : s.ov_i;
      found = true;
      break;
    }
  }
  if (!found && warnings != nullptr) {
    warnings->push_back("WARNING: images " + i + " and " + j + " share no tie points");
  }
  if (!(out.alpha_ij > min_angle) && warnings != nullptr) {
    warnings->push_back("WARNING: explicit pair (" + i + ", " + j + ") has convergence angle " +
                        degrees(out.alpha_ij) + " deg, not above the " + degrees(min_angle) +
                        " deg floor; proceeding as requested");
  }
  return out;
}

SceneReconstruction reconstruct_scene(const ImageNetwork& network,
                                      std::span<const EllipseObservation> observations,
                                      const PipelineOptions& options) {
  SceneReconstruction out;

  out.pair = in_stage("select-pair", [&] {
    if (options.pair) {
      out.pair_auto = false;
      return score_explicit_pair(network, options.pair->first, options.pair->second,
                                 options.min_angle, &out.warnings);
    }
    return select_pair(network, options.min_angle, &out.warnings);
  });
  const CameraView& view_l = *network.find(out.pair.i);
  const CameraView& view_k = *network.find(out.pair.j);

  // Accepted ellipses per image, in input order.
  std::map<std::string, std::vector<EllipseObservation>> accepted;
  std::map<std::pair<std::string, std::string>, GateReport> reports;
  in_stage("gate", [&] {
    const auto records =
        gate_ellipses(network, observations, options.k_sigma, options.default_sigma_px);
    const bool all_views = options.extend_to_all_views;
    for (std::size_t n = 0; n < observations.size(); ++n) {
      const auto& obs = observations[n];
      const bool in_pair = obs.image_id == view_l.image_id || obs.image_id == view_k.image_id;
      if (!in_pair && !all_views) continue;
      reports[{obs.image_id, obs.ellipse_id}] = records[n].report;
      if (records[n].report.accepted) {
        accepted[obs.image_id].push_back(obs);
      } else if (in_pair) {
        out.rejected.push_back(records[n]);
      }
    }
  });

  const auto& ellipses_l = accepted[view_l.image_id];
  const auto& ellipses_k = accepted[view_k.image_id];
  const MatchResult matches = in_stage("match", [&] {
    std::vector<EllipseObservation> pair_obs(ellipses_l);
    pair_obs.insert(pair_obs.end(), ellipses_k.begin(), ellipses_k.end());
    const double tol = options.tol_px.value_or(default_epipolar_tolerance(pair_obs));
    return match_ellipses(view_l, ellipses_l, view_k, ellipses_k, tol);
  });

  in_stage("reconstruct", [&] {
    // (image_id, ellipse index) already claimed by a sphere.
    std::set<std::pair<std::string, std::size_t>> claimed;
    for (const auto& m : matches.matches) {
      claimed.insert({view_l.image_id, m.index_l});
      claimed.insert({view_k.image_id, m.index_k});
    }

    for (const auto& m : matches.matches) {
      ReconstructedSphere rs;
      rs.id = m.ellipse_l;
      std::vector<MatchedObservation> members = {{&view_l, &ellipses_l[m.index_l]},
                                                 {&view_k, &ellipses_k[m.index_k]}};
      if (options.extend_to_all_views) {
        for (const auto& view : network.views) {
          if (view.image_id == view_l.image_id || view.image_id == view_k.image_id) continue;
          const auto it = accepted.find(view.image_id);
          if (it == accepted.end()) continue;
          const Eigen::Vector3d cam = world_to_camera(m.sphere.sphere.center, view);
          if (!(cam.z() > m.sphere.sphere.radius)) continue;
          const Eigen::Vector2d predicted_center = project_point(m.sphere.sphere.center, view);
          const Ellipse predicted = reproject_sphere(m.sphere.sphere, view);
          std::size_t best = it->second.size();
          double best_distance = INFINITY;
          for (std::size_t n = 0; n < it->second.size(); ++n) {
            if (claimed.count({view.image_id, n})) continue;
            const Eigen::Vector2d center =
                projected_sphere_center(it->second[n].ellipse, view.intrinsics);
            if ((center - predicted_center).norm() > options.extension_tol_px) continue;
            const double d = reprojection_distance(it->second[n].ellipse, predicted);
            if (d < best_distance) {
              best_distance = d;
              best = n;
            }
          }
          if (best < it->second.size()) {
            claimed.insert({view.image_id, best});
            members.push_back({&view, &it->second[best]});
          }
        }
      }
      rs.model = members.size() > 2 ? reconstruct_sphere(members) : m.sphere;
      for (const auto& member : members) {
        rs.ellipse_ids.emplace_back(member.view->image_id, member.ellipse->ellipse_id);
        rs.gate_reports.push_back(
            {member.view->image_id, member.ellipse->ellipse_id,
             reports.at({member.view->image_id, member.ellipse->ellipse_id})});
      }
      out.spheres.push_back(std::move(rs));
    }
  });
  return out;
}

}  // namespace spheremv

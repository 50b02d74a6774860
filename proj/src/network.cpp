#include "spheremv/network.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

#include <Eigen/Dense>

#include "spheremv/errors.hpp"

namespace spheremv {
namespace {

double vertex_angle(const Eigen::Vector3d& point, const Eigen::Vector3d& c1,
                    const Eigen::Vector3d& c2) {
  const Eigen::Vector3d a = c1 - point;
  const Eigen::Vector3d b = c2 - point;
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

bool sees(const TiePoint& tp, const std::string& image_id) {
  return std::find(tp.visible_in.begin(), tp.visible_in.end(), image_id) != tp.visible_in.end();
}

std::vector<const CameraView*> sorted_views(const ImageNetwork& network) {
  std::vector<const CameraView*> views;
  views.reserve(network.views.size());
  for (const auto& v : network.views) views.push_back(&v);
  std::sort(views.begin(), views.end(),
            [](const CameraView* a, const CameraView* b) { return a->image_id < b->image_id; });
  return views;
}

}  // namespace

const CameraView* ImageNetwork::find(const std::string& image_id) const {
  for (const auto& v : views) {
    if (v.image_id == image_id) return &v;
  }
  return nullptr;
}

void validate(const ImageNetwork& network) {
  std::set<std::string> ids;
  for (const auto& v : network.views) {
    validate(v);
    if (!ids.insert(v.image_id).second) {
      throw InvalidArgument("duplicate image_id '" + v.image_id + "'");
    }
  }
  for (std::size_t k = 0; k < network.tie_points.size(); ++k) {
    const TiePoint& tp = network.tie_points[k];
    const std::set<std::string> seen(tp.visible_in.begin(), tp.visible_in.end());
    for (const auto& id : seen) {
      if (!ids.count(id)) {
        throw InvalidArgument("tie point " + std::to_string(k) + " references unknown image '" +
                              id + "'");
      }
    }
    if (seen.size() < 2) {
      throw InvalidArgument("tie point " + std::to_string(k) + " is visible in fewer than 2 views");
    }
    if (!tp.xyz.allFinite()) {
      throw InvalidArgument("tie point " + std::to_string(k) + " has non-finite coordinates");
    }
  }
}

double convergence_angle(const CameraView& view_i, const CameraView& view_j,
                         const std::vector<TiePoint>& tie_points) {
  const Eigen::Vector3d ci = view_i.center();
  const Eigen::Vector3d cj = view_j.center();
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& tp : tie_points) {
    if (sees(tp, view_i.image_id) && sees(tp, view_j.image_id)) {
      sum += vertex_angle(tp.xyz, ci, cj);
      ++count;
    }
  }
  if (count == 0) {
    throw NoSharedPoints("images '" + view_i.image_id + "' and '" + view_j.image_id +
                         "' share no tie points");
  }
  return sum / static_cast<double>(count);
}

std::map<std::string, double> network_overlap(const ImageNetwork& network) {
  std::map<std::string, double> counts;
  for (const auto& v : network.views) counts[v.image_id] = 0.0;
  for (const auto& tp : network.tie_points) {
    const std::set<std::string> seen(tp.visible_in.begin(), tp.visible_in.end());
    for (const auto& id : seen) {
      auto it = counts.find(id);
      if (it != counts.end()) it->second += 1.0;
    }
  }
  double max_count = 0.0;
  for (const auto& [id, c] : counts) max_count = std::max(max_count, c);
  for (auto& [id, c] : counts) c = max_count > 0.0 ? c / max_count : 0.0;
  return counts;
}

std::vector<PairScore> score_pairs(const ImageNetwork& network) {
  const auto views = sorted_views(network);

  // Per image, the indices of the tie points it sees (ascending).
  std::unordered_map<std::string, std::vector<std::size_t>> seen_by;
  for (const auto* v : views) seen_by[v->image_id];
  for (std::size_t k = 0; k < network.tie_points.size(); ++k) {
    for (const auto& id : network.tie_points[k].visible_in) {
      auto it = seen_by.find(id);
      if (it != seen_by.end() && (it->second.empty() || it->second.back() != k)) {
        it->second.push_back(k);
      }
    }
  }

  std::vector<PairScore> scores;
  std::vector<std::size_t> shared;
  for (std::size_t a = 0; a < views.size(); ++a) {
    for (std::size_t b = a + 1; b < views.size(); ++b) {
      const auto& pa = seen_by[views[a]->image_id];
      const auto& pb = seen_by[views[b]->image_id];
      shared.clear();
      std::set_intersection(pa.begin(), pa.end(), pb.begin(), pb.end(),
                            std::back_inserter(shared));
      if (shared.empty()) continue;
      const Eigen::Vector3d ca = views[a]->center();
      const Eigen::Vector3d cb = views[b]->center();
      double sum = 0.0;
      for (std::size_t k : shared) sum += vertex_angle(network.tie_points[k].xyz, ca, cb);
      PairScore s;
      s.i = views[a]->image_id;
      s.j = views[b]->image_id;
      s.alpha_ij = sum / static_cast<double>(shared.size());
      scores.push_back(std::move(s));
    }
  }

  const auto overlap = network_overlap(network);
  double alpha_max = 0.0, ov_max = 0.0;
  for (const auto& s : scores) alpha_max = std::max(alpha_max, s.alpha_ij);
  for (const auto& [id, ov] : overlap) ov_max = std::max(ov_max, ov);
  for (auto& s : scores) {
    s.ov_i = overlap.at(s.i);
    s.ov_j = overlap.at(s.j);
    const double angle_term = alpha_max > 0.0 ? s.alpha_ij / alpha_max : 0.0;
    const double overlap_term = ov_max > 0.0 ? (s.ov_i + s.ov_j) / (2.0 * ov_max) : 0.0;
    s.theta_ij = angle_term + overlap_term;
  }
  return scores;
}

PairScore best_pair(const ImageNetwork& network, double min_angle) {
  if (network.views.size() < 2) throw NoAdmissiblePair("need at least two views");
  const auto scores = score_pairs(network);
  const PairScore* best = nullptr;
  double alpha_seen = 0.0;
  for (const auto& s : scores) {
    alpha_seen = std::max(alpha_seen, s.alpha_ij);
    if (!(s.alpha_ij > min_angle)) continue;
    if (best == nullptr || s.theta_ij > best->theta_ij) best = &s;
  }
  if (best == nullptr) {
    throw NoAdmissiblePair("no image pair exceeds the minimum convergence angle of " +
                           std::to_string(min_angle * 180.0 / std::numbers::pi) +
                           " deg; largest found " +
                           std::to_string(alpha_seen * 180.0 / std::numbers::pi) + " deg");
  }
  return *best;
}

Eigen::Vector3d principal_axes_focus(const std::vector<CameraView>& views) {
  Eigen::Matrix3d lhs = Eigen::Matrix3d::Zero();
  Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
  for (const auto& v : views) {
    const Eigen::Vector3d axis = v.rot.row(2).transpose();
    const Eigen::Matrix3d reject = Eigen::Matrix3d::Identity() - axis * axis.transpose();
    lhs += reject;
    rhs += reject * v.center();
  }
  Eigen::FullPivLU<Eigen::Matrix3d> lu(lhs);
  lu.setThreshold(1e-10);
  if (views.size() < 2 || lu.rank() < 3) {
    throw DegenerateGeometry("principal axes do not converge on a point");
  }
  return lu.solve(rhs);
}

ImageNetwork with_fallback_tie_point(const ImageNetwork& network) {
  ImageNetwork out = network;
  TiePoint tp;
  tp.xyz = principal_axes_focus(network.views);
  for (const auto& v : network.views) tp.visible_in.push_back(v.image_id);
  out.tie_points = {tp};
  return out;
}

}  // namespace spheremv

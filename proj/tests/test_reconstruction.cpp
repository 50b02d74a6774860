#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "spheremv/errors.hpp"
#include "spheremv/reconstruction.hpp"
#include "test_util.hpp"

using namespace spheremv;
using testutil::deg;
using testutil::look_at;
using testutil::observe;

namespace {

// Cameras on a horizontal circle of `distance` around the origin, spread
// symmetrically over `span` radians and looking at the origin.
std::vector<CameraView> arc(int n, double span, double distance, double f = 1000.0) {
  std::vector<CameraView> views;
  for (int i = 0; i < n; ++i) {
    const double az = n > 1 ? -span / 2 + span * i / (n - 1) : 0.0;
    const Eigen::Vector3d eye(distance * std::cos(az), distance * std::sin(az), 0.0);
    views.push_back(look_at("v" + std::to_string(i), eye, Eigen::Vector3d::Zero(), f));
  }
  return views;
}

std::vector<CenterObservation> exact_centers(const std::vector<CameraView>& views,
                                             const Eigen::Vector3d& point) {
  std::vector<CenterObservation> obs;
  for (const auto& v : views) obs.push_back({&v, project_point(point, v)});
  return obs;
}

struct Matched {
  std::vector<EllipseObservation> ellipses;
  std::vector<MatchedObservation> refs;
};

Matched match_all(const std::vector<CameraView>& views, const Eigen::Vector3d& c, double r) {
  Matched m;
  for (const auto& v : views) m.ellipses.push_back(observe(v, c, r, "s"));
  for (std::size_t i = 0; i < views.size(); ++i) m.refs.push_back({&views[i], &m.ellipses[i]});
  return m;
}

}  // namespace

TEST(Triangulate, ExactTwoViews) {
  const auto views = arc(2, deg(40), 10.0);
  const Eigen::Vector3d p(0.3, -0.2, 0.5);
  const auto obs = exact_centers(views, p);
  EXPECT_LT((triangulate_center(obs) - p).norm(), 1e-9);
}

TEST(Triangulate, RaysAlongCommonBaseline) {
  // Both cameras look down +X; the point sits on the line through them.
  const Eigen::Vector3d target(5, 0, 0);
  std::vector<CameraView> views{look_at("a", {0, 0, 0}, target), look_at("b", {1, 0, 0}, target)};
  const auto obs = exact_centers(views, target);
  EXPECT_THROW(triangulate_center(obs), DegenerateGeometry);
}

TEST(Triangulate, CoincidentCenters) {
  std::vector<CameraView> views{look_at("a", {0, 0, 10}, {0, 0, 0}),
                                look_at("b", {0, 0, 10}, {1, 0, 0})};
  const auto obs = exact_centers(views, Eigen::Vector3d(0.5, 0, 0));
  EXPECT_THROW(triangulate_center(obs), DegenerateGeometry);
}

TEST(Triangulate, NeedsTwoViews) {
  const auto views = arc(1, 0, 10);
  const auto obs = exact_centers(views, Eigen::Vector3d::Zero());
  EXPECT_THROW(triangulate_center(obs), DegenerateGeometry);
}

TEST(Triangulate, NoiseStatisticsMatchMidpointOracle) {
  const auto views = arc(10, deg(90), 10.0);
  const Eigen::Vector3d truth(0.2, 0.1, -0.1);
  std::mt19937_64 rng(71);
  std::normal_distribution<double> noise(0.0, 0.5);
  double dlt_sq = 0, mid_sq = 0, lib_mid_sq = 0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    auto obs = exact_centers(views, truth);
    std::vector<oracle::Ray> rays;
    for (auto& o : obs) {
      o.pixel += Eigen::Vector2d(noise(rng), noise(rng));
      const CameraView& v = *o.view;
      const Eigen::Vector3d dir_cam((o.pixel.x() - v.px()) / v.f(), (o.pixel.y() - v.py()) / v.f(),
                                    1.0);
      rays.push_back({v.center(), v.rot.transpose() * dir_cam});
    }
    dlt_sq += (triangulate_center(obs) - truth).squaredNorm();
    mid_sq += (oracle::pairwise_midpoint(rays) - truth).squaredNorm();
    lib_mid_sq += (triangulate_midpoint(obs) - truth).squaredNorm();
  }
  const double ratio = std::sqrt(dlt_sq / mid_sq);
  EXPECT_GT(ratio, 0.5);
  EXPECT_LT(ratio, 2.0);
  EXPECT_NEAR(lib_mid_sq / mid_sq, 1.0, 1e-9);
}

TEST(Triangulate, ReprojectionResidualOfExactPointIsZero) {
  const auto views = arc(5, deg(60), 8.0);
  const Eigen::Vector3d p(0.1, 0.2, 0.3);
  const auto obs = exact_centers(views, p);
  EXPECT_LT(reprojection_rms(p, obs), 1e-9);
  EXPECT_NEAR(reprojection_rms(p + Eigen::Vector3d(0, 0, 0), obs), 0.0, 1e-9);
}

TEST(ReconstructSphere, ExactTwoViews) {
  const auto views = arc(2, deg(40), 10.0);
  const auto m = match_all(views, Eigen::Vector3d::Zero(), 1.0);
  const SphereModel model = reconstruct_sphere(m.refs);
  EXPECT_LT(model.sphere.center.norm(), 1e-9);
  EXPECT_LT(std::abs(model.sphere.radius - 1.0), 1e-9);
  EXPECT_EQ(model.sphere.frame, Frame::kWorld);
  ASSERT_EQ(model.per_view_radii.size(), 2u);
  EXPECT_EQ(model.per_view_radii[0].image_id, "v0");
  EXPECT_EQ(model.per_view_radii[1].image_id, "v1");
  EXPECT_LT(model.radius_spread, 1e-9);
  EXPECT_LT(model.triangulation_residual, 1e-6);
  EXPECT_FALSE(model.scale_applied.has_value());
}

// The corrected center of a sphere's ellipse does not depend on its radius,
// so two views of concentric spheres give per-view radii of exactly 0.9 and
// 1.1 around one triangulated center.
TEST(ReconstructSphere, RadiusIsMeanOfPerViewRadii) {
  const auto views = arc(2, deg(40), 10.0);
  std::vector<EllipseObservation> e{observe(views[0], Eigen::Vector3d::Zero(), 0.9, "s"),
                                    observe(views[1], Eigen::Vector3d::Zero(), 1.1, "s")};
  std::vector<MatchedObservation> refs{{&views[0], &e[0]}, {&views[1], &e[1]}};
  const SphereModel model = reconstruct_sphere(refs);
  EXPECT_NEAR(model.per_view_radii[0].radius, 0.9, 1e-12);
  EXPECT_NEAR(model.per_view_radii[1].radius, 1.1, 1e-12);
  EXPECT_NEAR(model.sphere.radius, 1.0, 1e-12);
  EXPECT_NEAR(model.radius_spread, 0.1, 1e-12);

  const std::vector<double> w{3.0, 1.0};
  EXPECT_NEAR(reconstruct_sphere(refs, w).sphere.radius, (3 * 0.9 + 1.1) / 4, 1e-12);
}

TEST(ReconstructSphere, RadiusEqualsWeightedMeanOfPerViewRadii) {
  const auto views = arc(6, deg(100), 9.0);
  std::mt19937_64 rng(73);
  std::normal_distribution<double> n01;
  auto m = match_all(views, Eigen::Vector3d(0.1, 0.2, 0.0), 0.7);
  for (auto& e : m.ellipses) {
    e.ellipse.a_e += 0.3 * n01(rng);
    e.ellipse.b_e += 0.3 * n01(rng);
    e.ellipse.x_ce += 0.3 * n01(rng);
    e.ellipse.y_ce += 0.3 * n01(rng);
  }
  const std::vector<double> w{1, 2, 3, 4, 5, 6};
  for (bool weighted : {false, true}) {
    const auto model = weighted ? reconstruct_sphere(m.refs, w) : reconstruct_sphere(m.refs);
    double num = 0, den = 0, spread = 0;
    for (std::size_t i = 0; i < model.per_view_radii.size(); ++i) {
      const double wi = weighted ? w[i] : 1.0;
      num += wi * model.per_view_radii[i].radius;
      den += wi;
    }
    EXPECT_NEAR(model.sphere.radius, num / den, 1e-14);
    for (const auto& pv : model.per_view_radii) {
      spread = std::max(spread, std::abs(pv.radius - model.sphere.radius));
    }
    EXPECT_DOUBLE_EQ(model.radius_spread, spread);
  }
}

TEST(ReconstructSphere, ExactForAnyViewCountAndConvergence) {
  std::mt19937_64 rng(79);
  std::uniform_real_distribution<double> span(deg(5.5), deg(174.5)), lateral(-0.5, 0.5),
      radius(0.05, 1.0);
  std::uniform_int_distribution<int> count(2, 8);
  for (int t = 0; t < 300; ++t) {
    const auto views = arc(count(rng), span(rng), 10.0);
    const Eigen::Vector3d c(lateral(rng), lateral(rng), lateral(rng));
    const double r = radius(rng);
    const auto m = match_all(views, c, r);
    const auto model = reconstruct_sphere(m.refs);
    EXPECT_LT((model.sphere.center - c).norm() / r, 1e-9);
    EXPECT_LT(std::abs(model.sphere.radius - r) / r, 1e-9);
  }
}

TEST(ReconstructSphere, RadiusRatiosMatchTruth) {
  const auto views = arc(4, deg(80), 6.0);
  const std::vector<std::pair<Eigen::Vector3d, double>> spheres{
      {{0, 0, 0}, 0.5}, {{0.8, 0.3, 0.1}, 0.2}, {{-0.6, -0.4, 0.2}, 0.35}};
  std::vector<double> estimated;
  for (const auto& [c, r] : spheres) {
    const auto m = match_all(views, c, r);
    estimated.push_back(reconstruct_sphere(m.refs).sphere.radius);
  }
  for (std::size_t a = 0; a < spheres.size(); ++a) {
    for (std::size_t b = a + 1; b < spheres.size(); ++b) {
      const double want = spheres[a].second / spheres[b].second;
      EXPECT_LT(std::abs(estimated[a] / estimated[b] - want) / want, 1e-6);
    }
  }
}

TEST(ReconstructSphere, InvariantUnderViewPermutation) {
  const auto views = arc(5, deg(120), 7.0);
  std::mt19937_64 rng(83);
  std::normal_distribution<double> n01;
  auto m = match_all(views, Eigen::Vector3d(0.2, -0.1, 0.3), 0.4);
  for (auto& e : m.ellipses) {
    e.ellipse.a_e += 0.5 * n01(rng);
    e.ellipse.x_ce += 0.5 * n01(rng);
    e.ellipse.y_ce += 0.5 * n01(rng);
  }
  const auto base = reconstruct_sphere(m.refs);
  auto refs = m.refs;
  for (int p = 0; p < 20; ++p) {
    std::shuffle(refs.begin(), refs.end(), rng);
    const auto other = reconstruct_sphere(refs);
    EXPECT_LT((other.sphere.center - base.sphere.center).norm(), 1e-12);
    EXPECT_LT(std::abs(other.sphere.radius - base.sphere.radius), 1e-12);
  }
}

TEST(ReconstructSphere, CenterBehindCamera) {
  // Corrected centers chosen as the (sign-ambiguous) projections of a point
  // behind both cameras.
  std::vector<CameraView> views{look_at("a", {-1, 0, 0}, {-1, 0, 10}),
                                look_at("b", {1, 0, 0}, {1, 0, 10})};
  const Eigen::Vector3d behind(0, 0.5, -6);
  std::vector<EllipseObservation> e(2);
  std::vector<MatchedObservation> refs;
  for (int i = 0; i < 2; ++i) {
    const Eigen::Vector2d pix = project_point(behind, views[i]);
    const double b = 20.0, f = views[i].f();
    const Eigen::Vector2d p(views[i].px(), views[i].py());
    const Eigen::Vector2d center = ((f * f + b * b) * pix - b * b * p) / (f * f);
    e[i].image_id = views[i].image_id;
    e[i].ellipse = {center.x(), center.y(), 25.0, b, 0.0};
    refs.push_back({&views[i], &e[i]});
  }
  EXPECT_THROW(reconstruct_sphere(refs), DegenerateProjection);
}

TEST(ReconstructSphere, SingleViewIsDegenerate) {
  const auto views = arc(2, deg(40), 10.0);
  const auto m = match_all(views, Eigen::Vector3d::Zero(), 1.0);
  EXPECT_THROW(reconstruct_sphere(std::span(m.refs).first(1)), DegenerateGeometry);
}

TEST(EstimateRadius, Examples) {
  const std::vector<double> ones{1, 1, 1};
  EXPECT_DOUBLE_EQ(estimate_radius_ls(ones), 1.0);
  const std::vector<double> pair{0.9, 1.1};
  EXPECT_DOUBLE_EQ(estimate_radius_ls(pair), 1.0);
  const std::vector<double> r{1, 2}, w{3, 1};
  EXPECT_DOUBLE_EQ(estimate_radius_ls(r, w), 1.25);
}

TEST(EstimateRadius, Errors) {
  EXPECT_THROW(estimate_radius_ls({}), EmptyInput);
  const std::vector<double> r{1, 2};
  const std::vector<double> negative{1, -1}, zero{0, 0}, short_w{1};
  EXPECT_THROW(estimate_radius_ls(r, negative), InvalidArgument);
  EXPECT_THROW(estimate_radius_ls(r, zero), InvalidArgument);
  EXPECT_THROW(estimate_radius_ls(r, short_w), InvalidArgument);
}

// A flat quadratic minimum limits golden-section search to about sqrt(eps).
TEST(EstimateRadius, MinimizesSquaredResiduals) {
  constexpr double kSearchTol = 1e-7;
  std::mt19937_64 rng(89);
  std::uniform_real_distribution<double> radius(0.5, 2.0), weight(0.1, 5.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> r(2 + t % 7), w(r.size());
    for (auto& x : r) x = radius(rng);
    for (auto& x : w) x = weight(rng);
    const double unweighted = oracle::golden_section(
        [&](double R) {
          double s = 0;
          for (double ri : r) s += (R - ri) * (R - ri);
          return s;
        },
        0.0, 3.0);
    EXPECT_NEAR(estimate_radius_ls(r), unweighted, kSearchTol);
    const double weighted = oracle::golden_section(
        [&](double R) {
          double s = 0;
          for (std::size_t i = 0; i < r.size(); ++i) s += w[i] * (R - r[i]) * (R - r[i]);
          return s;
        },
        0.0, 3.0);
    EXPECT_NEAR(estimate_radius_ls(r, w), weighted, kSearchTol);
  }
}

TEST(MetricScale, Examples) {
  const std::vector<ScaleAnchor> one{{10, 5}};
  EXPECT_DOUBLE_EQ(metric_scale(one).s_r, 2.0);
  EXPECT_DOUBLE_EQ(metric_scale(one).residual_rmse, 0.0);

  const std::vector<ScaleAnchor> identity{{10, 10}, {6, 6}};
  EXPECT_DOUBLE_EQ(metric_scale(identity).s_r, 1.0);
  EXPECT_DOUBLE_EQ(metric_scale(identity).residual_rmse, 0.0);

  const std::vector<ScaleAnchor> two{{2, 1}, {2, 2}};
  const ScaleResult s = metric_scale(two);
  EXPECT_NEAR(s.s_r, 1.2649110640673518, 1e-15);  // sqrt(8/5)
  const double r1 = 2 - s.s_r, r2 = 2 - 2 * s.s_r;
  EXPECT_NEAR(s.residual_rmse, std::sqrt((r1 * r1 + r2 * r2) / 2), 1e-15);
}

TEST(MetricScale, Errors) {
  EXPECT_THROW(metric_scale({}), EmptyInput);
  const std::vector<ScaleAnchor> zero{{0, 1}}, negative{{1, -2}};
  EXPECT_THROW(metric_scale(zero), InvalidAnchor);
  EXPECT_THROW(metric_scale(negative), InvalidAnchor);
}

TEST(ApplyScale, Examples) {
  Sphere s;
  s.center = {1, 2, 3};
  s.radius = 2;
  const Sphere same = apply_scale(s, 1.0);
  EXPECT_EQ(same.center, s.center);
  EXPECT_EQ(same.radius, s.radius);

  const Sphere half = apply_scale(s, 0.5);
  EXPECT_EQ(half.center, Eigen::Vector3d(0.5, 1, 1.5));
  EXPECT_EQ(half.radius, 1.0);

  const double k = 1.2649110640673518;
  const Sphere back = apply_scale(apply_scale(s, k), 1 / k);
  EXPECT_LT((back.center - s.center).norm(), 1e-12);
  EXPECT_LT(std::abs(back.radius - s.radius), 1e-12);
}

TEST(ApplyScale, ModelAndPoints) {
  SphereModel m;
  m.sphere.center = {1, -1, 2};
  m.sphere.radius = 0.5;
  m.per_view_radii = {{"a", 0.4}, {"b", 0.6}};
  m.radius_spread = 0.1;
  m.triangulation_residual = 0.25;
  const SphereModel twice = apply_scale(apply_scale(m, 2.0), 3.0);
  EXPECT_EQ(twice.sphere.center, Eigen::Vector3d(6, -6, 12));
  EXPECT_DOUBLE_EQ(twice.sphere.radius, 3.0);
  EXPECT_DOUBLE_EQ(twice.per_view_radii[1].radius, 3.6);
  EXPECT_DOUBLE_EQ(twice.radius_spread, 0.6);
  EXPECT_DOUBLE_EQ(twice.triangulation_residual, 0.25);  // pixels
  ASSERT_TRUE(twice.scale_applied.has_value());
  EXPECT_DOUBLE_EQ(*twice.scale_applied, 6.0);

  Eigen::Matrix3Xd pts(3, 2);
  pts << 1, 2, 3, 4, 5, 6;
  EXPECT_EQ(apply_scale(pts, 2.0), pts * 2.0);
}

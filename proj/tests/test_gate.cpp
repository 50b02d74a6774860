#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "spheremv/errors.hpp"
#include "spheremv/gate.hpp"
#include "spheremv/projection.hpp"

using namespace spheremv;

namespace {

const Intrinsics<double> kIop{1000.0, 500.0, 500.0};

using Vec7d = Vec7<double>;

// Central differences of tau in extended precision.
Vec7d finite_difference_jacobian(const Ellipse& e, const Intrinsics<double>& k) {
  using LD = long double;
  LD vars[7] = {e.a_e, e.b_e, e.x_ce, e.y_ce, k.px, k.py, k.f};
  auto eval = [&](const LD* v) {
    EllipseParams<LD> el{v[2], v[3], v[0], v[1], 0};
    Intrinsics<LD> kl{v[6], v[4], v[5]};
    return tau(el, kl);
  };
  Vec7d out;
  for (int n = 0; n < 7; ++n) {
    const LD h = 1e-5L * std::max<LD>(std::abs(vars[n]), 1.0L);
    LD plus[7], minus[7];
    std::copy(vars, vars + 7, plus);
    std::copy(vars, vars + 7, minus);
    plus[n] += h;
    minus[n] -= h;
    out(n) = static_cast<double>((eval(plus) - eval(minus)) / (2 * h));
  }
  return out;
}

// Componentwise relative error. Components that vanish analytically are
// compared against the scale of the whole gradient.
double max_relative_error(const Vec7d& analytic, const Vec7d& fd) {
  const double floor = 1e-9 * fd.cwiseAbs().maxCoeff();
  double worst = 0.0;
  for (int n = 0; n < 7; ++n) {
    const double den = std::max(std::abs(fd(n)), floor);
    worst = std::max(worst, std::abs(analytic(n) - fd(n)) / den);
  }
  return worst;
}

}  // namespace

TEST(Tau, ZeroOnExactProjections) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> lateral(-0.7, 0.7), ratio(1.5, 200), radius(0.01, 5),
      focal(300, 5000);
  for (int n = 0; n < 1000; ++n) {
    const double r = radius(rng), z = ratio(rng) * r;
    const Eigen::Vector3d c(lateral(rng) * z, lateral(rng) * z, z);
    const Intrinsics<double> k{focal(rng), 960, 540};
    EXPECT_NEAR(tau(project_sphere<double>(c, r, k), k), 0.0, 1e-12);
  }
}

TEST(Tau, CircleAtPrincipalPoint) {
  EXPECT_EQ(tau(Ellipse{500, 500, 80, 80, 0}, kIop), 0.0);
}

TEST(Tau, InflatedMajorAxis) {
  auto e = project_sphere<double>(Eigen::Vector3d(1, 0, 10), 1.0, kIop);
  e.a_e *= 1.01;
  // 1 - 1/1.01 evaluated to 20 digits.
  EXPECT_NEAR(tau(e, kIop), 0.0099009900990099009901, 1e-12);
}

TEST(TauJacobian, MajorAxisComponent) {
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> pos(0, 1000), axis(10, 300), ratio(1.0, 3.0);
  for (int n = 0; n < 200; ++n) {
    const double b = axis(rng);
    const Ellipse e{pos(rng), pos(rng), b * ratio(rng), b, 0};
    const auto j = tau_jacobian(e, kIop);
    EXPECT_NEAR(j(0), (1.0 - tau(e, kIop)) / e.a_e, 1e-15);
  }
}

TEST(TauJacobian, CenterTermsVanishAtPrincipalPoint) {
  const Ellipse e{500, 500, 130, 100, 0.2};
  const auto j = tau_jacobian(e, kIop);
  EXPECT_EQ(j(2), 0.0);
  EXPECT_EQ(j(3), 0.0);
  EXPECT_EQ(j(4), 0.0);
  EXPECT_EQ(j(5), 0.0);
}

TEST(TauJacobian, MatchesFiniteDifferencesAtReferenceConfiguration) {
  const Ellipse e{700, 400, 120, 100, 0};
  EXPECT_LT(max_relative_error(tau_jacobian(e, kIop), finite_difference_jacobian(e, kIop)), 1e-6);
}

TEST(TauJacobian, MatchesFiniteDifferencesOnRandomConfigurations) {
  std::mt19937_64 rng(47);
  std::uniform_real_distribution<double> ratio(1.001, 3.0), minor(5, 400), offset(-0.8, 0.8),
      focal(300, 5000);
  for (int n = 0; n < 1000; ++n) {
    const Intrinsics<double> k{focal(rng), 960, 540};
    const double b = minor(rng);
    const Ellipse e{k.px + offset(rng) * k.f, k.py + offset(rng) * k.f, b * ratio(rng), b, 0};
    EXPECT_LT(max_relative_error(tau_jacobian(e, k), finite_difference_jacobian(e, k)), 1e-6)
        << "configuration " << n;
  }
}

TEST(TauVariance, ZeroJacobian) {
  EXPECT_EQ(tau_variance(Vec7d::Zero(), Eigen::Matrix4d::Identity(), Eigen::Matrix3d::Identity()),
            0.0);
}

TEST(TauVariance, IdentityCovariance) {
  Vec7d j;
  j << 0.3, -1.2, 0.01, 2.5, -0.7, 0.0, 4.0;
  EXPECT_NEAR(tau_variance(j, Eigen::Matrix4d::Identity(), Eigen::Matrix3d::Identity()),
              j.squaredNorm(), 1e-13);
}

TEST(TauVariance, RejectsInvalidCovariance) {
  Vec7d j = Vec7d::Ones();
  Eigen::Matrix4d negative = Eigen::Matrix4d::Identity();
  negative(3, 3) = -0.5;
  EXPECT_THROW(tau_variance(j, negative, Eigen::Matrix3d::Zero()), InvalidCovariance);
  Eigen::Matrix4d asymmetric = Eigen::Matrix4d::Identity();
  asymmetric(0, 2) = 0.3;
  EXPECT_THROW(tau_variance(j, asymmetric, Eigen::Matrix3d::Zero()), InvalidCovariance);
  Eigen::Matrix3d bad_iop = Eigen::Matrix3d::Identity();
  bad_iop(0, 0) = -1;
  EXPECT_THROW(tau_variance(j, Eigen::Matrix4d::Identity(), bad_iop), InvalidCovariance);
}

TEST(TauVariance, MatchesMonteCarloVariance) {
  const Ellipse e{700, 400, 120, 100, 0};
  Eigen::Matrix4d cov = Eigen::Vector4d(0.04, 0.04, 0.01, 0.01).asDiagonal();
  const double predicted = tau_variance(tau_jacobian(e, kIop), cov, Eigen::Matrix3d::Zero());

  std::mt19937_64 rng(53);
  std::normal_distribution<double> n01;
  const int samples = 1000000;
  double sum = 0, sum2 = 0;
  for (int n = 0; n < samples; ++n) {
    Ellipse p = e;
    p.a_e += 0.2 * n01(rng);
    p.b_e += 0.2 * n01(rng);
    p.x_ce += 0.1 * n01(rng);
    p.y_ce += 0.1 * n01(rng);
    const double t = tau(p, kIop);
    sum += t;
    sum2 += t * t;
  }
  const double mean = sum / samples;
  const double var = sum2 / samples - mean * mean;
  EXPECT_LT(std::abs(var - predicted) / predicted, 0.05);
}

TEST(TauVariance, SymmetricInImageAxes) {
  const Ellipse e{730, 410, 140, 110, 0};
  const Ellipse swapped{500 + (410 - 500), 500 + (730 - 500), 140, 110, 0};
  Eigen::Matrix4d cov;
  cov << 0.30, 0.02, 0.01, 0.03, 0.02, 0.20, 0.04, 0.05, 0.01, 0.04, 0.15, 0.01, 0.03, 0.05,
      0.01, 0.25;
  // Exchange the x and y rows and columns.
  Eigen::Matrix4d perm = Eigen::Matrix4d::Zero();
  perm(0, 0) = perm(1, 1) = perm(2, 3) = perm(3, 2) = 1;
  const Eigen::Matrix4d cov_swapped = perm * cov * perm.transpose();
  Eigen::Matrix3d iop = Eigen::Vector3d(0.5, 0.8, 4.0).asDiagonal();
  Eigen::Matrix3d iop_swapped = Eigen::Vector3d(0.8, 0.5, 4.0).asDiagonal();
  const double v1 = tau_variance(tau_jacobian(e, kIop), cov, iop);
  const double v2 = tau_variance(tau_jacobian(swapped, kIop), cov_swapped, iop_swapped);
  EXPECT_NEAR(v1, v2, 1e-15 + 1e-12 * v1);
}

TEST(Classify, ExactSphericalEllipseAccepted) {
  const auto e = project_sphere<double>(Eigen::Vector3d(2, -1, 12), 1.0, kIop);
  const auto r = classify_spherical(e, kIop, default_ellipse_covariance(0.1),
                                    Eigen::Matrix3d::Zero());
  EXPECT_TRUE(r.accepted);
  EXPECT_GE(r.sigma_tau, 0.0);
  EXPECT_EQ(r.k, 2.0);
}

TEST(Classify, ZeroToleranceRejectsNonzeroTau) {
  auto e = project_sphere<double>(Eigen::Vector3d(2, -1, 12), 1.0, kIop);
  e.a_e *= 1.001;
  const auto r = classify_spherical(e, kIop, Eigen::Matrix4d::Zero(), Eigen::Matrix3d::Zero());
  EXPECT_EQ(r.sigma_tau, 0.0);
  EXPECT_FALSE(r.accepted);
}

TEST(Classify, RejectsNonPositiveK) {
  const Ellipse e{500, 500, 80, 80, 0};
  EXPECT_THROW(classify_spherical(e, kIop, default_ellipse_covariance(), Eigen::Matrix3d::Zero(), 0),
               InvalidArgument);
}

TEST(Classify, MonotoneInK) {
  std::mt19937_64 rng(59);
  std::normal_distribution<double> n01;
  const auto exact = project_sphere<double>(Eigen::Vector3d(1.5, 0.5, 9), 0.8, kIop);
  const Eigen::Matrix4d cov = default_ellipse_covariance(0.5);
  for (int n = 0; n < 500; ++n) {
    Ellipse e = exact;
    e.a_e += 0.5 * n01(rng);
    e.b_e += 0.5 * n01(rng);
    e.x_ce += 0.5 * n01(rng);
    e.y_ce += 0.5 * n01(rng);
    if (e.a_e < e.b_e) std::swap(e.a_e, e.b_e);
    bool previous = false;
    for (double k : {0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0}) {
      const bool now = classify_spherical(e, kIop, cov, Eigen::Matrix3d::Zero(), k).accepted;
      if (previous) EXPECT_TRUE(now);
      previous = now;
    }
  }
}

TEST(Classify, AcceptanceRateNearNominal) {
  std::mt19937_64 rng(61);
  std::normal_distribution<double> n01;
  const double sigma = 0.5;
  // Axes about 10 px apart, so noise almost never swaps them. Near-circular
  // ellipses fold |tau| through the a >= b ordering and over-accept.
  const auto exact = project_sphere<double>(Eigen::Vector3d(4, 2, 10), 1.0, kIop);
  const Eigen::Matrix4d cov = default_ellipse_covariance(sigma);
  const int trials = 10000;
  int accepted = 0;
  for (int n = 0; n < trials; ++n) {
    Ellipse e = exact;
    e.a_e += sigma * n01(rng);
    e.b_e += sigma * n01(rng);
    e.x_ce += sigma * n01(rng);
    e.y_ce += sigma * n01(rng);
    if (e.a_e < e.b_e) std::swap(e.a_e, e.b_e);
    accepted += classify_spherical(e, kIop, cov, Eigen::Matrix3d::Zero()).accepted;
  }
  const double rate = static_cast<double>(accepted) / trials;
  EXPECT_GE(rate, 0.93);
  EXPECT_LE(rate, 0.97);
}

TEST(Classify, ObservationOverloadFallsBackToDefaults) {
  CameraView view;
  view.image_id = "a";
  view.intrinsics = kIop;
  EllipseObservation obs;
  obs.image_id = "a";
  obs.ellipse = project_sphere<double>(Eigen::Vector3d(1, 0, 10), 1.0, kIop);
  obs.ellipse.a_e *= 1.01;
  const auto r = classify_spherical(obs, view);
  const auto expected = classify_spherical(obs.ellipse, kIop, default_ellipse_covariance(0.5),
                                           Eigen::Matrix3d::Zero());
  EXPECT_EQ(r.tau, expected.tau);
  EXPECT_EQ(r.sigma_tau, expected.sigma_tau);
  EXPECT_EQ(r.accepted, expected.accepted);

  obs.cov = default_ellipse_covariance(5.0);
  view.iop_cov = Eigen::Matrix3d::Identity();
  const auto wide = classify_spherical(obs, view);
  EXPECT_GT(wide.sigma_tau, r.sigma_tau);
}

TEST(Classify, InflatedClutterRejected) {
  std::mt19937_64 rng(67);
  std::normal_distribution<double> n01;
  const double sigma = 0.5;
  const auto exact = project_sphere<double>(Eigen::Vector3d(1, 0.5, 10), 1.0, kIop);
  const Eigen::Matrix4d cov = default_ellipse_covariance(sigma);
  int rejected = 0;
  const int trials = 2000;
  for (int n = 0; n < trials; ++n) {
    Ellipse e = exact;
    e.a_e = 1.2 * e.a_e + sigma * n01(rng);
    e.b_e += sigma * n01(rng);
    e.x_ce += sigma * n01(rng);
    e.y_ce += sigma * n01(rng);
    rejected += !classify_spherical(e, kIop, cov, Eigen::Matrix3d::Zero()).accepted;
  }
  EXPECT_GE(static_cast<double>(rejected) / trials, 0.95);
}

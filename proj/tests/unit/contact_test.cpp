#include <gtest/gtest.h>

#include <numbers>

#include "hoisynth/contact/contact_map.hpp"
#include "hoisynth/core/rng.hpp"
#include "hoisynth/features/bps.hpp"
#include "hoisynth/features/scale.hpp"
#include "hoisynth/geometry/primitives.hpp"
#include "hoisynth/hand/lbs.hpp"
#include "support/oracles.hpp"

using namespace hoisynth;

namespace {

Points random_cloud(Rng& rng, Eigen::Index n, double sigma, const Vec3& centre = Vec3::Zero()) {
  Points p(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) p.row(i) = (centre + sigma * rng.normal3()).transpose();
  return p;
}

// Exhaustive double loop over anchors x hand points.
Points brute_contact(const Points& hand, const Points& anchors) {
  Points out(anchors.rows(), 3);
  for (Eigen::Index k = 0; k < anchors.rows(); ++k) {
    const auto [idx, dist] = oracle::nearest(anchors.row(k).transpose(), hand);
    out.row(k) = hand.row(idx) - anchors.row(k);
  }
  return out;
}

}  // namespace

TEST(GtContact, CoincidentVertexGivesZero) {
  Rng rng(1);
  const Points anchors = random_cloud(rng, 20, 0.1);
  Points hand = random_cloud(rng, 50, 0.1, Vec3(0.5, 0, 0));
  hand.row(7) = anchors.row(3);
  const ContactFrames c = gt_contact({hand}, {anchors});
  EXPECT_EQ(c[0].row(3).norm(), 0.0);
}

TEST(GtContact, SingleHandVertex) {
  Rng rng(2);
  const Points anchors = random_cloud(rng, 30, 0.1);
  Points hand(1, 3);
  hand << 0.2, -0.1, 0.05;
  const ContactFrames c = gt_contact({hand}, {anchors});
  for (Eigen::Index k = 0; k < anchors.rows(); ++k) EXPECT_EQ(c[0].row(k), hand.row(0) - anchors.row(k));
}

TEST(GtContact, MatchesExhaustiveSearch) {
  Rng rng(3);
  std::vector<Points> hands, anchors;
  for (int i = 0; i < 5; ++i) {
    hands.push_back(random_cloud(rng, 778, 0.05, Vec3(0.05, 0, 0)));
    anchors.push_back(random_cloud(rng, 256, 0.1));
  }
  const ContactFrames c = gt_contact(hands, anchors);
  for (std::size_t i = 0; i < hands.size(); ++i) {
    EXPECT_EQ(c[i], brute_contact(hands[i], anchors[i]));
    // Norm consistency with the scalar nearest distance.
    for (Eigen::Index k = 0; k < anchors[i].rows(); ++k)
      EXPECT_EQ(c[i].row(k).norm(), oracle::nearest(anchors[i].row(k).transpose(), hands[i]).second);
  }
}

TEST(GtContact, EmptyHandRejected) {
  EXPECT_THROW(gt_contact({Points(0, 3)}, {Points::Zero(3, 3)}), InvalidInput);
  EXPECT_THROW(gt_contact({Points::Zero(2, 3)}, {}), InvalidInput);
}

TEST(DerivedContact, SameShapesAsGroundTruth) {
  Rng rng(4);
  const Points anchors = random_cloud(rng, 40, 0.1);
  Points kp = random_cloud(rng, 64, 0.05);
  kp.row(0) = anchors.row(5);
  const ContactFrames c = derived_contact({kp}, {anchors});
  EXPECT_EQ(c[0].row(5).norm(), 0.0);
  EXPECT_EQ(c[0], brute_contact(kp, anchors));
  const Points single = kp.topRows(1);
  const ContactFrames s = derived_contact({single}, {anchors});
  for (Eigen::Index k = 0; k < anchors.rows(); ++k) EXPECT_EQ(s[0].row(k), single.row(0) - anchors.row(k));
}

TEST(GtContact, MirroredSceneGivesMirroredMap) {
  Rng rng(5);
  const Points anchors = random_cloud(rng, 100, 0.1);
  const Points hand = random_cloud(rng, 300, 0.05, Vec3(0.08, 0.0, 0.0));
  Points ma = anchors, mh = hand;
  ma.col(0) *= -1.0;
  mh.col(0) *= -1.0;
  Points right = gt_contact({hand}, {anchors})[0];
  const Points left = gt_contact({mh}, {ma})[0];
  right.col(0) *= -1.0;
  EXPECT_EQ(left, right);
}

TEST(Discrepancy, ZeroWhenMapsAgree) {
  Rng rng(6);
  const Points anchors = random_cloud(rng, 50, 0.1);
  const Points kp = random_cloud(rng, 64, 0.05);
  const ContactFrames c = derived_contact({kp}, {anchors});
  const Discrepancy d = contact_discrepancy(c, {kp}, {anchors});
  EXPECT_EQ(d.value, 0.0);
  EXPECT_EQ(d.gradient[0].cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(discrepancy_value(c, c), 0.0);
}

TEST(Discrepancy, SingleAnchorClosedForm) {
  Points anchor(1, 3), kp(1, 3), c_hat(1, 3);
  anchor << 0.1, 0.0, 0.0;
  kp << 0.0, 0.2, 0.0;
  c_hat << 0.05, 0.05, 0.05;
  const Vec3 r = (kp.row(0) - anchor.row(0) - c_hat.row(0)).transpose();
  const Discrepancy d = contact_discrepancy({c_hat}, {kp}, {anchor});
  EXPECT_NEAR(d.value, r.norm(), 1e-15);
  EXPECT_LT((d.gradient[0].row(0).transpose() - r.normalized()).norm(), 1e-15);
}

TEST(Discrepancy, ShapeMismatchRejected) {
  EXPECT_THROW(discrepancy_value({Points::Zero(3, 3)}, {Points::Zero(4, 3)}), InvalidInput);
  EXPECT_THROW(contact_discrepancy({Points::Zero(3, 3)}, {Points::Zero(2, 3)}, {Points::Zero(4, 3)}), InvalidInput);
}

TEST(Discrepancy, GradientMatchesFiniteDifferencesAwayFromBoundaries) {
  Rng rng(7);
  const double h = 1e-7;
  int checked = 0, passed = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const Points anchors = random_cloud(rng, 32, 0.1);
    const Points kp = random_cloud(rng, 16, 0.08);
    const Points c_hat = random_cloud(rng, 32, 0.03);
    // Guard: skip instances where any anchor is within 1e-4 m of a
    // nearest-neighbour switch or where a residual nearly vanishes.
    bool near_boundary = false;
    for (Eigen::Index k = 0; k < anchors.rows() && !near_boundary; ++k) {
      const VecX d = (kp.rowwise() - anchors.row(k)).rowwise().norm();
      VecX s = d;
      std::sort(s.data(), s.data() + s.size());
      near_boundary = s(1) - s(0) < 1e-4;
    }
    const Discrepancy d = contact_discrepancy({c_hat}, {kp}, {anchors});
    const Points c_tilde = derived_contact({kp}, {anchors})[0];
    if ((c_tilde - c_hat).rowwise().norm().minCoeff() < 1e-4) near_boundary = true;
    if (near_boundary) continue;
    const auto f = [&](const VecX& x) {
      const Points p = Eigen::Map<const Points>(x.data(), kp.rows(), 3);
      return contact_discrepancy({c_hat}, {p}, {anchors}).value;
    };
    const VecX x = Eigen::Map<const VecX>(kp.data(), kp.size());
    const VecX fd = oracle::central_difference(f, x, h);
    const VecX an = Eigen::Map<const VecX>(d.gradient[0].data(), d.gradient[0].size());
    ++checked;
    if (oracle::relative_error(an, fd) < 1e-4) ++passed;
  }
  ASSERT_GT(checked, 50);
  EXPECT_GE(passed, 0.99 * checked);
}

TEST(Densify, AnchorsAtEveryVertexAreExact) {
  Rng rng(8);
  const Points mesh = random_cloud(rng, 200, 0.1);
  VecX values(200);
  for (Eigen::Index i = 0; i < 200; ++i) values(i) = rng.uniform();
  EXPECT_EQ(densify_contact(mesh, values, mesh), values);
}

TEST(Densify, ConstantStaysConstant) {
  Rng rng(9);
  const Points anchors = random_cloud(rng, 30, 0.1);
  const Points mesh = random_cloud(rng, 500, 0.1);
  const VecX out = densify_contact(anchors, VecX::Constant(30, 0.07), mesh);
  EXPECT_EQ(out, VecX::Constant(500, 0.07));
}

TEST(Densify, ErrorShrinksWithMoreAnchors) {
  Mesh bottom = make_box({-0.12, -0.06, -0.05}, {0.0, 0.0, 0.05}, 0.005, Part::kBottom);
  Mesh top = make_box({-0.12, 0.002, -0.05}, {0.0, 0.012, 0.05}, 0.005, Part::kTop);
  const ArticulatedObject obj(merge_meshes({top, bottom}), std::numbers::pi, "box");
  ObjectTrajectory traj;
  traj.frames.push_back({Vec6::Zero(), 0.3});
  const Points posed = obj.posed_canonical(0.3);

  const HandModel hand = make_hand_model(Side::kRight);
  PoseVector theta = PoseVector::Zero();
  theta.segment<3>(3) << std::numbers::pi / 2, 0.0, 0.0;  // fingers along +z, palm facing the bottom face
  theta.head<3>() << -0.06, -0.085, -0.04;
  const Points hv = lbs_forward(hand, theta, ShapeVector::Zero());

  VecX dense(posed.rows());
  for (Eigen::Index v = 0; v < posed.rows(); ++v) dense(v) = oracle::nearest(posed.row(v).transpose(), hv).second;

  const ObjectScale scale = compute_scale(obj);
  std::vector<double> errors;
  for (int k : {64, 128, 256, 512}) {
    const BpsFeatures f = part_bps(traj, obj, sample_basis_points(k, 42), scale);
    const Points c = gt_contact({hv}, f.anchors)[0];
    const VecX est = densify_contact(f.anchors[0], contact_norms(c), posed);
    errors.push_back((est - dense).cwiseAbs().mean());
  }
  for (std::size_t i = 1; i < errors.size(); ++i) EXPECT_LT(errors[i], errors[i - 1]) << "K index " << i;
  std::printf("densify L1 (m): %.4g %.4g %.4g %.4g\n", errors[0], errors[1], errors[2], errors[3]);
}

#include <gtest/gtest.h>

#include <numbers>

#include "hoisynth/core/rng.hpp"
#include "hoisynth/geometry/primitives.hpp"
#include "hoisynth/refine/refine.hpp"
#include "support/oracles.hpp"

using namespace hoisynth;

namespace {

ArticulatedObject slab_object() {
  Mesh bottom = make_box({-0.12, -0.05, -0.06}, {0.12, 0.20, 0.0}, 0.01, Part::kBottom);
  Mesh top = make_box({-0.12, -0.10, -0.06}, {0.12, -0.06, 0.0}, 0.01, Part::kTop);
  return ArticulatedObject(merge_meshes({top, bottom}), std::numbers::pi / 2, "slab");
}

const HandModel& right_hand() {
  static const HandModel m = make_hand_model(Side::kRight);
  return m;
}

// Root height that puts the lowest zero-pose vertex `depth` below z = 0.
double rest_height(double depth) {
  return -right_hand().template_vertices.col(2).minCoeff() - depth;
}

PoseVector random_pose(Rng& rng, double z_lo, double z_hi) {
  PoseVector t = PoseVector::Zero();
  t.head<3>() << rng.uniform(-0.03, 0.03), rng.uniform(-0.03, 0.03), rng.uniform(z_lo, z_hi);
  for (int i = 3; i < 6; ++i) t(i) = rng.uniform(-0.15, 0.15);
  for (int i = 6; i < kPoseDim; ++i) t(i) = rng.uniform(-0.3, 0.3);
  return t;
}

std::vector<Points> random_directions(Rng& rng, int frames, Eigen::Index j, double sigma) {
  std::vector<Points> out;
  for (int i = 0; i < frames; ++i) {
    Points d(j, 3);
    for (Eigen::Index r = 0; r < j; ++r) d.row(r) = sigma * rng.normal3().transpose();
    out.push_back(d);
  }
  return out;
}

// Nearest-vertex indices that a term depends on; a change between the two
// sides of a finite difference means the stencil straddles a kink.
std::vector<int> assignment(const RefineHand& hand, const FrameObjects& obj, const std::vector<InteriorSet>* frozen) {
  std::vector<int> out;
  for (std::size_t i = 0; i < hand.params.theta.size(); ++i) {
    const Points v = lbs_forward(*hand.model, hand.params.theta[i], hand.params.beta);
    if (!hand.directions.empty()) {
      const Points kp = sample_keypoints(*hand.model, v);
      for (Eigen::Index j = 0; j < kp.rows(); ++j)
        out.push_back(obj[i].nearest((kp.row(j) + hand.directions[i].row(j)).transpose()).index);
    }
    if (frozen)
      for (Eigen::Index r = 0; r < v.rows(); ++r)
        if ((*frozen)[0][i][static_cast<std::size_t>(r)]) out.push_back(obj[i].nearest(v.row(r).transpose()).index);
  }
  return out;
}

struct GradCheck {
  int checked = 0;
  int skipped = 0;
  double worst = 0.0;
};

// Central differences over every pose coordinate of every frame.
GradCheck check_gradient(RefineHand hand, const FrameObjects& obj, const RefineConfig& cfg, bool freeze) {
  GradCheck out;
  const std::vector<RefineHand> hs{hand};
  const RefineEval base = evaluate_refine(hs, obj, cfg, true);
  const std::vector<InteriorSet> frozen = base.interior;
  const auto* fz = freeze ? &frozen : nullptr;
  const double h = 1e-6;
  VecX analytic(kPoseDim * static_cast<Eigen::Index>(hand.params.theta.size()));
  VecX numeric(analytic.size());
  for (std::size_t i = 0; i < hand.params.theta.size(); ++i) {
    for (int c = 0; c < kPoseDim; ++c) {
      const Eigen::Index k = static_cast<Eigen::Index>(i) * kPoseDim + c;
      analytic[k] = base.grad[0][i](c);
      const double x = hand.params.theta[i](c);
      std::vector<RefineHand> plus{hand}, minus{hand};
      plus[0].params.theta[i](c) = x + h;
      minus[0].params.theta[i](c) = x - h;
      if (assignment(plus[0], obj, fz) != assignment(minus[0], obj, fz)) {
        ++out.skipped;
        return out;
      }
      const double fp = evaluate_refine(plus, obj, cfg, false, fz).terms.total;
      const double fm = evaluate_refine(minus, obj, cfg, false, fz).terms.total;
      numeric[k] = (fp - fm) / (2.0 * h);
    }
  }
  out.checked = 1;
  out.worst = oracle::relative_error(analytic, numeric);
  return out;
}

RefineHand hand_at(const std::vector<PoseVector>& theta) {
  RefineHand h;
  h.model = &right_hand();
  h.params.theta = theta;
  return h;
}

}  // namespace

TEST(LProj, ZeroOnObjectVertices) {
  const ArticulatedObject obj = slab_object();
  const FrameObjects fo(obj, std::vector<double>{0.0});
  Points kp = fo[0].vertices().topRows(10);
  Points d = Points::Zero(10, 3);
  EXPECT_EQ(l_proj({kp}, {d}, fo), 0.0);
  // Direction moves an off-surface point back onto a vertex.
  d.row(3) << 0.0, 0.0, -0.02;
  kp.row(3) += Eigen::RowVector3d(0.0, 0.0, 0.02);
  EXPECT_EQ(l_proj({kp}, {d}, fo), 0.0);
}

TEST(LProj, SinglePointAtKnownDistance) {
  const ArticulatedObject obj = slab_object();
  const FrameObjects fo(obj, std::vector<double>{0.0});
  Points kp(1, 3);
  kp.row(0) = fo[0].vertices().row(5);
  const Vec3 n = vertex_normals(obj.mesh()).row(5).transpose();
  Points d(1, 3);
  d.row(0) = 0.003 * n.transpose();
  EXPECT_NEAR(l_proj({kp}, {d}, fo), 0.003, 1e-15);
}

TEST(LProj, MatchesBruteForce) {
  const ArticulatedObject obj = slab_object();
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const double a = rng.uniform(0.0, std::numbers::pi / 2);
    const FrameObjects fo(obj, std::vector<double>{a, 0.0});
    std::vector<Points> kp, d;
    double expected = 0.0;
    for (std::size_t i = 0; i < 2; ++i) {
      Points k(64, 3), dd(64, 3);
      for (Eigen::Index j = 0; j < 64; ++j) {
        k.row(j) = (Vec3(0.0, 0.05, 0.0) + 0.1 * rng.normal3()).transpose();
        dd.row(j) = 0.01 * rng.normal3().transpose();
        expected += oracle::nearest((k.row(j) + dd.row(j)).transpose(), fo[i].vertices()).second;
      }
      kp.push_back(k);
      d.push_back(dd);
    }
    EXPECT_NEAR(l_proj(kp, d, fo), expected, 1e-12);
  }
}

TEST(LPen, ZeroWhenHandOutside) {
  const ArticulatedObject obj = slab_object();
  const FrameObjects fo(obj, std::vector<double>{0.0, 0.3});
  PoseVector t = PoseVector::Zero();
  t(2) = rest_height(-0.01);
  const auto v = hand_vertices(right_hand(), {{t, t}, ShapeVector::Zero()});
  EXPECT_EQ(interior_count(interior_vertices(v, fo)), 0);
  EXPECT_EQ(l_pen(v, fo), 0.0);
}

TEST(LPen, VertexAtSphereCentre) {
  Mesh top = make_icosphere(0.05, 3, Part::kTop);
  top.vertices.col(0).array() += 0.2;
  const ArticulatedObject obj(merge_meshes({top, make_icosphere(0.07, 3, Part::kBottom)}), 0.0);
  const FrameObjects fo(obj, std::vector<double>{0.0});
  Points p = Points::Zero(1, 3);
  const double expected = oracle::nearest(Vec3::Zero(), fo[0].vertices()).second;
  EXPECT_NEAR(expected, 0.07, 1e-12);
  EXPECT_NEAR(l_pen({p}, fo), expected, 1e-15);
}

TEST(LPen, DeeperIsLarger) {
  Mesh top = make_icosphere(0.03, 3, Part::kTop);
  top.vertices.col(0).array() += 0.3;
  const ArticulatedObject obj(merge_meshes({top, make_icosphere(0.1, 4, Part::kBottom)}), 0.0);
  const FrameObjects fo(obj, std::vector<double>{0.0});
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Vec3 n = rng.normal3().normalized();
    const double d = rng.uniform(0.002, 0.03);
    Points p1(1, 3), p2(1, 3);
    p1.row(0) = ((0.1 - d) * n).transpose();
    p2.row(0) = ((0.1 - 2 * d) * n).transpose();
    EXPECT_LT(l_pen({p1}, fo), l_pen({p2}, fo)) << "depth " << d;
  }
}

TEST(LAcc, StaticAndLinearAreZero) {
  Rng rng(3);
  Points base(20, 3), vel(20, 3);
  for (Eigen::Index r = 0; r < 20; ++r) {
    base.row(r) = rng.normal3().transpose();
    vel.row(r) = 0.25 * rng.normal3().transpose();
  }
  std::vector<Points> still(6, base), linear;
  for (int i = 0; i < 6; ++i) linear.push_back(base + static_cast<double>(i) * vel);
  EXPECT_EQ(l_acc(still), 0.0);
  EXPECT_NEAR(l_acc(linear), 0.0, 1e-13);
  EXPECT_EQ(l_acc({base}), 0.0);
}

TEST(LAcc, QuadraticTrackHasUnitCurvature) {
  std::vector<Points> seq;
  for (int i = 0; i < 7; ++i) {
    Points p = Points::Zero(4, 3);
    p.col(0).setConstant(static_cast<double>(i * i));
    seq.push_back(p);
  }
  // 5 second differences of magnitude 2 on each of 4 vertices.
  EXPECT_EQ(l_acc(seq), 5 * 4 * 2.0);
}

TEST(RefineGradient, ProjectionMatchesFiniteDifferences) {
  const ArticulatedObject obj = slab_object();
  const FrameObjects fo(obj, std::vector<double>{0.4});
  RefineConfig cfg{1.0, 0.0, 0.0};
  Rng rng(21);
  GradCheck total;
  for (int p = 0; p < 30; ++p) {
    RefineHand h = hand_at({random_pose(rng, 0.01, 0.03)});
    h.directions = random_directions(rng, 1, static_cast<Eigen::Index>(right_hand().keypoints.size()), 0.01);
    const GradCheck g = check_gradient(h, fo, cfg, false);
    total.checked += g.checked;
    total.skipped += g.skipped;
    total.worst = std::max(total.worst, g.worst);
  }
  EXPECT_GE(total.checked, 27);
  EXPECT_LT(total.worst, 1e-3);
}

TEST(RefineGradient, PenetrationMatchesFiniteDifferencesWithFrozenSet) {
  const ArticulatedObject obj = slab_object();
  const FrameObjects fo(obj, std::vector<double>{0.0});
  RefineConfig cfg{0.0, 1.0, 0.0};
  Rng rng(22);
  GradCheck total;
  int with_interior = 0;
  for (int p = 0; p < 30; ++p) {
    const RefineHand h = hand_at({random_pose(rng, rest_height(0.012), rest_height(0.004))});
    if (evaluate_refine({h}, fo, cfg, false).terms.interior == 0) continue;
    ++with_interior;
    const GradCheck g = check_gradient(h, fo, cfg, true);
    total.checked += g.checked;
    total.skipped += g.skipped;
    total.worst = std::max(total.worst, g.worst);
  }
  EXPECT_GE(with_interior, 25);
  EXPECT_GE(total.checked, with_interior - 3);
  EXPECT_LT(total.worst, 1e-3);
}

TEST(RefineGradient, AccelerationMatchesFiniteDifferences) {
  const ArticulatedObject obj = slab_object();
  const FrameObjects fo(obj, std::vector<double>{0.0, 0.0, 0.0});
  RefineConfig cfg{0.0, 0.0, 1.0};
  Rng rng(23);
  double worst = 0.0;
  for (int p = 0; p < 10; ++p) {
    const RefineHand h =
        hand_at({random_pose(rng, 0.05, 0.06), random_pose(rng, 0.05, 0.06), random_pose(rng, 0.05, 0.06)});
    const GradCheck g = check_gradient(h, fo, cfg, false);
    ASSERT_EQ(g.checked, 1);
    worst = std::max(worst, g.worst);
  }
  EXPECT_LT(worst, 1e-3);
}

TEST(Refine, PushedHandLeavesTheBox) {
  const ArticulatedObject obj = slab_object();
  const int frames = 4;
  const FrameObjects fo(obj, std::vector<double>(frames, 0.0));
  PoseVector touching = PoseVector::Zero(), pushed = PoseVector::Zero();
  touching(2) = rest_height(0.0);
  pushed(2) = rest_height(0.005);
  RefineHand h = hand_at(std::vector<PoseVector>(frames, pushed));
  const Points kp_touch = sample_keypoints(right_hand(), lbs_forward(right_hand(), touching, ShapeVector::Zero()));
  h.directions.assign(frames, direction_vectors(kp_touch, fo[0].vertices()));

  const RefineResult r = refine({h}, fo, RefineConfig{});
  ASSERT_EQ(r.report.status, RefineStatus::kCompleted);
  EXPECT_GT(r.report.initial().interior, 0);
  EXPECT_LT(r.report.final().interior, r.report.initial().interior);
  EXPECT_EQ(r.report.history.size(), 101u);
  for (std::size_t i = 1; i < r.report.history.size(); ++i)
    EXPECT_LE(r.report.history[i].terms.total, r.report.history[i - 1].terms.total);
}

TEST(Refine, ZeroWeightsLeaveParametersUnchanged) {
  const ArticulatedObject obj = slab_object();
  const FrameObjects fo(obj, std::vector<double>{0.0, 0.1, 0.2});
  Rng rng(31);
  RefineHand h = hand_at({random_pose(rng, 0.0, 0.01), random_pose(rng, 0.0, 0.01), random_pose(rng, 0.0, 0.01)});
  RefineConfig cfg{0.0, 0.0, 0.0, 20};
  const RefineResult r = refine({h}, fo, cfg);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(r.params[0].theta[i], h.params.theta[i]);
  cfg = RefineConfig{};
  cfg.iterations = 0;
  const RefineResult r0 = refine({h}, fo, cfg);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(r0.params[0].theta[i], h.params.theta[i]);
}

TEST(Refine, DivergenceAbortsWithReport) {
  const ArticulatedObject obj = slab_object();
  const FrameObjects fo(obj, std::vector<double>{0.0, 0.0, 0.0});
  PoseVector t = PoseVector::Zero();
  t(2) = 0.05;
  RefineHand h = hand_at({t, t, t});
  h.params.theta[1](0) = 0.001;
  RefineConfig cfg;
  cfg.step_size = 1e3;
  cfg.max_backtracks = 0;
  const RefineResult r = refine({h}, fo, cfg);
  EXPECT_EQ(r.report.status, RefineStatus::kDiverged);
  EXPECT_FALSE(r.report.message.empty());
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(r.params[0].theta[i], h.params.theta[i]);
  const auto j = r.report.to_json();
  EXPECT_EQ(j["status"], "diverged");
  EXPECT_TRUE(j["iterations"][0].contains("l_pen"));
}

TEST(Refine, RejectsBadConfig) {
  const ArticulatedObject obj = slab_object();
  const FrameObjects fo(obj, std::vector<double>{0.0});
  const RefineHand h = hand_at({PoseVector::Zero()});
  RefineConfig cfg;
  cfg.w_pen = -1.0;
  EXPECT_THROW(refine({h}, fo, cfg), InvalidInput);
  cfg = RefineConfig{};
  cfg.iterations = -1;
  EXPECT_THROW(refine({h}, fo, cfg), InvalidInput);
  const FrameObjects two(obj, std::vector<double>{0.0, 0.0});
  EXPECT_THROW(refine({h}, two, RefineConfig{}), InvalidInput);
}

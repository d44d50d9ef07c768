#include <gtest/gtest.h>

#include <numbers>
#include <sstream>

#include "hoisynth/core/rng.hpp"
#include "hoisynth/geometry/articulated.hpp"
#include "hoisynth/geometry/containment.hpp"
#include "hoisynth/geometry/nearest.hpp"
#include "hoisynth/geometry/obj_io.hpp"
#include "hoisynth/geometry/primitives.hpp"
#include "support/oracles.hpp"

using namespace hoisynth;

namespace {

ArticulatedObject small_hinged_box() {
  Mesh bottom = make_box({-0.10, -0.05, -0.04}, {0.0, 0.0, 0.04}, 0.02, Part::kBottom);
  Mesh top = make_box({-0.10, 0.002, -0.04}, {0.0, 0.012, 0.04}, 0.02, Part::kTop);
  return ArticulatedObject(merge_meshes({top, bottom}), std::numbers::pi, "box");
}

FrameState random_frame(Rng& rng) {
  FrameState f;
  f.g.head<3>() = rng.normal3();
  f.g.tail<3>() = 0.3 * rng.normal3();
  f.angle = rng.uniform(-3.0, 3.0);
  return f;
}

double max_pairwise_change(const Points& a, const Points& b, const std::vector<int>& idx) {
  double worst = 0.0;
  for (std::size_t i = 0; i < idx.size(); i += 3)
    for (std::size_t j = i + 1; j < idx.size(); j += 5) {
      const double da = (a.row(idx[i]) - a.row(idx[j])).norm();
      const double db = (b.row(idx[i]) - b.row(idx[j])).norm();
      worst = std::max(worst, std::abs(da - db) / std::max(da, 1e-12));
    }
  return worst;
}

}  // namespace

TEST(RigidTransform, FromGlobalStateIsProperRotation) {
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    Vec6 g;
    g << rng.normal3(), rng.normal3();
    EXPECT_TRUE(RigidTransform::from_global_state(g).is_valid(1e-9));
  }
}

TEST(PoseObject, IdentityFrameLeavesCanonicalVertices) {
  const auto obj = small_hinged_box();
  const Points posed = pose_object(obj, FrameState{});
  EXPECT_EQ(posed.rows(), obj.mesh().vertices.rows());
  EXPECT_TRUE(posed.isApprox(obj.mesh().vertices, 0.0) || (posed - obj.mesh().vertices).cwiseAbs().maxCoeff() == 0.0);
}

TEST(PoseObject, QuarterTurnAboutNegativeZ) {
  Mesh m = merge_meshes({make_box({0.5, -0.1, -0.1}, {1.5, 0.1, 0.1}, 1.0, Part::kTop),
                         make_box({-1.0, -1.0, -1.0}, {-0.5, 1.0, 1.0}, 1.0, Part::kBottom)});
  // Put a known vertex at (1, 0, 0).
  m.vertices.row(0) << 1.0, 0.0, 0.0;
  const ArticulatedObject obj(m);
  FrameState f;
  f.angle = std::numbers::pi / 2;
  const Points posed = pose_object(obj, f);
  EXPECT_NEAR(posed(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(posed(0, 1), -1.0, 1e-15);
  EXPECT_NEAR(posed(0, 2), 0.0, 1e-15);
}

TEST(PoseObject, PartsMoveRigidly) {
  const auto obj = small_hinged_box();
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const FrameState f = random_frame(rng);
    const Points posed = pose_object(obj, f);
    EXPECT_EQ(posed.rows(), obj.mesh().vertices.rows());
    EXPECT_LE(max_pairwise_change(obj.mesh().vertices, posed, obj.part_indices(Part::kTop)), 1e-9);
    EXPECT_LE(max_pairwise_change(obj.mesh().vertices, posed, obj.part_indices(Part::kBottom)), 1e-9);
    // Bottom vertices see only the global transform.
    const RigidTransform t = f.to_world();
    for (int i : obj.part_indices(Part::kBottom))
      EXPECT_LE((posed.row(i).transpose() - t.apply(Vec3(obj.mesh().vertices.row(i).transpose()))).norm(), 1e-12);
  }
}

TEST(PoseObject, NonFiniteFrameRejected) {
  const auto obj = small_hinged_box();
  FrameState f;
  f.angle = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(pose_object(obj, f), InvalidInput);
}

TEST(ToCanonical, IdentityTranslationAndRoundTrip) {
  Rng rng(5);
  Points p(20, 3);
  rng.fill_normal(p);
  EXPECT_EQ((to_canonical(p, FrameState{}) - p).cwiseAbs().maxCoeff(), 0.0);

  FrameState shift;
  shift.g.tail<3>() << 0.1, -0.2, 0.3;
  const Points moved = to_canonical(p, shift);
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    EXPECT_LE((moved.row(i) - (p.row(i) - shift.g.tail<3>().transpose())).norm(), 1e-15);

  for (int trial = 0; trial < 20; ++trial) {
    const FrameState f = random_frame(rng);
    EXPECT_LE((to_canonical(to_world(p, f), f) - p).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(ToCanonical, RecoversCanonicalVerticesAfterUndoingArticulation) {
  const auto obj = small_hinged_box();
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const FrameState f = random_frame(rng);
    Points back = to_canonical(pose_object(obj, f), f);
    const Mat3 undo = articulation_rotation(f.angle).transpose();
    for (int i : obj.part_indices(Part::kTop)) back.row(i) = (undo * back.row(i).transpose()).transpose();
    EXPECT_LE((back - obj.mesh().vertices).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(NearestVertex, ExactPointGivesZero) {
  Points ref(3, 3);
  ref << 0, 0, 0, 1, 2, 3, -1, 0.5, 2;
  Points q(1, 3);
  q << 1, 2, 3;
  const auto r = nearest_vertex(q, ref);
  EXPECT_EQ(r[0].index, 1);
  EXPECT_EQ(r[0].distance, 0.0);
  EXPECT_EQ(r[0].vector, Vec3::Zero());
}

TEST(NearestVertex, TieGoesToLowerIndex) {
  Points ref(2, 3);
  ref << 1, 0, 0, -1, 0, 0;
  Points q = Points::Zero(1, 3);
  EXPECT_EQ(nearest_vertex(q, ref)[0].index, 0);
  // Same on a tree-backed set with many duplicated points.
  Points big(200, 3);
  for (int i = 0; i < 200; ++i) big.row(i) << (i % 2 ? -1.0 : 1.0) * (1 + i / 2), 0, 0;
  big.row(150) << 0.5, 0, 0;
  big.row(77) << -0.5, 0, 0;
  EXPECT_EQ(nearest_vertex(q, big)[0].index, 77);
}

TEST(NearestVertex, EmptyReferenceThrows) {
  EXPECT_THROW(nearest_vertex(Points::Zero(1, 3), Points(0, 3)), InvalidInput);
}

TEST(NearestVertex, MatchesExhaustiveScan) {
  Rng rng(42);
  Points ref(3000, 3), q(1000, 3);
  rng.fill_normal(ref);
  rng.fill_normal(q);
  // Clustered and lattice points exercise equal coordinates in the splits.
  for (int i = 0; i < 500; ++i) ref.row(i) << (i % 10) * 0.1, (i / 10 % 10) * 0.1, (i / 100) * 0.1;
  const auto got = nearest_vertex(q, ref);
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    const auto [idx, d] = oracle::nearest(q.row(i).transpose(), ref);
    ASSERT_EQ(got[static_cast<std::size_t>(i)].index, idx);
    ASSERT_EQ(got[static_cast<std::size_t>(i)].distance, d);
  }
}

TEST(Containment, UnitCube) {
  const Mesh cube = make_box({-0.5, -0.5, -0.5}, {0.5, 0.5, 0.5}, 0.25);
  EXPECT_TRUE(point_inside_mesh(cube, Vec3::Zero()));
  EXPECT_FALSE(point_inside_mesh(cube, Vec3(2, 0, 0)));
  EXPECT_NEAR(oracle::winding_number(cube, Vec3::Zero()), 1.0, 1e-9);
}

TEST(Containment, NonWatertightRejected) {
  Mesh cube = make_box({-0.5, -0.5, -0.5}, {0.5, 0.5, 0.5}, 0.5);
  Mesh open = cube;
  open.faces.conservativeResize(cube.faces.rows() - 1, 3);
  EXPECT_THROW(point_inside_mesh(open, Vec3::Zero()), InvalidInput);
  Mesh flipped = cube;
  std::swap(flipped.faces(0, 0), flipped.faces(0, 1));
  EXPECT_THROW(MeshContainment{flipped}, InvalidInput);
}

TEST(Containment, AgreesWithWindingNumberOnIcosphere) {
  const Mesh sphere = make_icosphere(1.0, 2);
  const MeshContainment inside(sphere);
  Rng rng(9);
  int agree = 0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    const Vec3 p(rng.uniform(-1.3, 1.3), rng.uniform(-1.3, 1.3), rng.uniform(-1.3, 1.3));
    const bool oracle_inside = oracle::winding_number(sphere, p) > 0.5;
    agree += (inside.contains(p) == oracle_inside);
  }
  EXPECT_EQ(agree, n);
}

TEST(Containment, AxisAlignedQueriesOnLatticeBox) {
  // Queries on lattice lines would graze edges for axis-aligned rays; the
  // skewed ray direction avoids that.
  const Mesh box = make_box({0, 0, 0}, {1, 1, 1}, 0.1);
  for (int i = 1; i < 10; ++i)
    for (int j = 1; j < 10; ++j) {
      EXPECT_TRUE(point_inside_mesh(box, Vec3(0.1 * i, 0.1 * j, 0.5)));
      EXPECT_FALSE(point_inside_mesh(box, Vec3(0.1 * i, 0.1 * j, 1.5)));
    }
}

TEST(Primitives, CylinderAndBoxAreWatertightWithOutwardNormals) {
  for (const Mesh& m : {make_cylinder(0.03, -0.1, 0.0, 0.005), make_box({0, 0, 0}, {0.1, 0.05, 0.02}, 0.005),
                        make_icosphere(0.5, 3)}) {
    EXPECT_NO_THROW(check_watertight(m));
    const Vec3 c = m.vertices.colwise().mean().transpose();
    EXPECT_NEAR(oracle::winding_number(m, c), 1.0, 1e-9);
  }
}

TEST(ObjIo, MeshRoundTripIsBitExact) {
  const auto obj = small_hinged_box();
  std::stringstream ss;
  write_mesh_obj(ss, obj.mesh());
  const Mesh back = read_mesh_obj(ss);
  ASSERT_EQ(back.vertices.rows(), obj.mesh().vertices.rows());
  EXPECT_EQ((back.vertices - obj.mesh().vertices).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(back.faces, obj.mesh().faces);
  EXPECT_EQ(back.part_ids, obj.mesh().part_ids);
}

TEST(ArticulatedObject, RequiresBothParts) {
  Mesh only_bottom = make_box({0, 0, 0}, {1, 1, 1}, 0.5);
  EXPECT_THROW(ArticulatedObject{only_bottom}, InvalidInput);
}

TEST(ArticulatedObject, ContainmentFollowsArticulation) {
  const auto obj = small_hinged_box();
  // Centre of the lid at rest; after a half turn the lid sits on the +x side.
  const Vec3 lid_centre(-0.05, 0.007, 0.0);
  EXPECT_TRUE(obj.contains(lid_centre, 0.0));
  EXPECT_FALSE(obj.contains(lid_centre, std::numbers::pi));
  EXPECT_TRUE(obj.contains(articulation_rotation(std::numbers::pi) * lid_centre, std::numbers::pi));
  PosedObject posed(obj, 1.0);
  const auto r = posed.nearest(Vec3(0.3, 0.3, 0.3));
  const auto [idx, d] = oracle::nearest(Vec3(0.3, 0.3, 0.3), obj.posed_canonical(1.0));
  EXPECT_EQ(r.index, idx);
  EXPECT_EQ(r.distance, d);
}

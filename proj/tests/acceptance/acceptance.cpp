// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. `--only name` runs a single criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hoisynth/contact/contact_map.hpp"
#include "hoisynth/core/rng.hpp"
#include "hoisynth/diffusion/denoiser.hpp"
#include "hoisynth/diffusion/guidance.hpp"
#include "hoisynth/diffusion/sampler.hpp"
#include "hoisynth/features/bps.hpp"
#include "hoisynth/features/scale.hpp"
#include "hoisynth/geometry/nearest.hpp"
#include "hoisynth/geometry/primitives.hpp"
#include "hoisynth/hand/lbs.hpp"
#include "hoisynth/pipeline/run.hpp"
#include "hoisynth/pipeline/synthetic.hpp"
#include "hoisynth/refine/refine.hpp"
#include "support/oracles.hpp"

using namespace hoisynth;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

template <typename... A>
std::string fmt(const char* f, A... a) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, a...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Points random_cloud(Rng& rng, Eigen::Index n, double sigma, const Vec3& centre = Vec3::Zero()) {
  Points p(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) p.row(i) = (centre + sigma * rng.normal3()).transpose();
  return p;
}

ArticulatedObject random_hinged_box(Rng& rng) {
  const double w = rng.uniform(0.05, 0.2), l = rng.uniform(0.04, 0.15), h = rng.uniform(0.01, 0.08);
  const double lt = rng.uniform(0.005, 0.04);
  Mesh bottom = make_box({-w, -l, -h}, {0.0, 0.0, 0.0}, 0.02, Part::kBottom);
  Mesh top = make_box({-w, 0.002, -h}, {0.0, 0.002 + lt, 0.0}, 0.02, Part::kTop);
  return ArticulatedObject(merge_meshes({top, bottom}), rng.uniform(0.0, std::numbers::pi), "box");
}

ArticulatedObject slab_object() {
  Mesh bottom = make_box({-0.12, -0.05, -0.06}, {0.12, 0.20, 0.0}, 0.01, Part::kBottom);
  Mesh top = make_box({-0.12, -0.10, -0.06}, {0.12, -0.06, 0.0}, 0.01, Part::kTop);
  return ArticulatedObject(merge_meshes({top, bottom}), std::numbers::pi / 2, "slab");
}

const HandModel& right_hand() { return default_hand(Side::kRight); }

SurfaceMotion surfaces_of(const std::array<HandModel, 2>& models, const std::vector<HandParams>& p) {
  SurfaceMotion m;
  for (std::size_t h = 0; h < p.size(); ++h) {
    std::vector<Points> frames;
    for (const auto& t : p[h].theta) frames.push_back(lbs_forward(models[h], t, p[h].beta));
    m.hands.push_back(std::move(frames));
  }
  return m;
}

SyntheticSpec spec(std::size_t i, std::uint64_t seed, int frames) {
  SyntheticSpec s;
  s.family = static_cast<ObjectFamily>(i % 3);
  s.seed = seed;
  s.frames = frames;
  return s;
}

// ---------------------------------------------------------------- oracles

Outcome oracle_equivalence() {
  Rng rng(101);
  const int n = 100;
  int bad_bps = 0, bad_gt = 0, bad_derived = 0, bad_nearest = 0, bad_proj = 0;

  for (int trial = 0; trial < n; ++trial) {
    const ArticulatedObject obj = random_hinged_box(rng);
    ObjectTrajectory traj;
    traj.frames.push_back({Vec6::Zero(), rng.uniform(0.0, obj.opening_angle())});
    const BasisPointSet basis = sample_basis_points(32, static_cast<std::uint64_t>(trial));
    const ObjectScale s = compute_scale(obj);
    const BpsFeatures f = part_bps(traj, obj, basis, s);
    const Points posed = obj.posed_canonical(traj.frames[0].angle);
    for (Part p : {Part::kTop, Part::kBottom}) {
      const auto& idx = obj.part_indices(p);
      Points scaled(static_cast<Eigen::Index>(idx.size()), 3);
      for (std::size_t j = 0; j < idx.size(); ++j) scaled.row(static_cast<Eigen::Index>(j)) = s.value * posed.row(idx[j]);
      for (int k = 0; k < 32; ++k) {
        const int slot = (p == Part::kTop ? 0 : 32) + k;
        const Vec3 b = basis.points.row(k).transpose();
        const auto [j, d] = oracle::nearest(b, scaled);
        const Vec3 want = scaled.row(j).transpose() - b;
        if (f.anchor_index[0][static_cast<std::size_t>(slot)] != idx[static_cast<std::size_t>(j)] ||
            (f.vector(0, slot) - want).cwiseAbs().maxCoeff() > 1e-12)
          ++bad_bps;
      }
    }
  }

  for (int trial = 0; trial < n; ++trial) {
    const Points hand = random_cloud(rng, 300, 0.05, Vec3(0.05, 0.0, 0.0));
    const Points kp = random_cloud(rng, 32, 0.05, Vec3(0.05, 0.0, 0.0));
    const Points anchors = random_cloud(rng, 64, 0.1);
    const Points gt = gt_contact({hand}, {anchors})[0];
    const Points dc = derived_contact({kp}, {anchors})[0];
    for (Eigen::Index k = 0; k < anchors.rows(); ++k) {
      const auto [ih, dh] = oracle::nearest(anchors.row(k).transpose(), hand);
      const auto [ik, dk] = oracle::nearest(anchors.row(k).transpose(), kp);
      if ((gt.row(k) - (hand.row(ih) - anchors.row(k))).cwiseAbs().maxCoeff() > 1e-12 ||
          std::abs(gt.row(k).norm() - dh) > 1e-12)
        ++bad_gt;
      if ((dc.row(k) - (kp.row(ik) - anchors.row(k))).cwiseAbs().maxCoeff() > 1e-12 ||
          std::abs(dc.row(k).norm() - dk) > 1e-12)
        ++bad_derived;
    }
  }

  for (int trial = 0; trial < n; ++trial) {
    Points ref(400, 3), q(100, 3);
    rng.fill_normal(ref);
    rng.fill_normal(q);
    for (int i = 0; i < 100; ++i) ref.row(i) << (i % 5) * 0.25, (i / 5 % 5) * 0.25, (i / 25) * 0.25;
    for (int i = 0; i < 10; ++i) q.row(i) = ref.row(rng.uniform_int(0, 399));
    const auto got = nearest_vertex(q, ref);
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
      const auto [idx, d] = oracle::nearest(q.row(i).transpose(), ref);
      if (got[static_cast<std::size_t>(i)].index != idx || std::abs(got[static_cast<std::size_t>(i)].distance - d) > 1e-12)
        ++bad_nearest;
    }
  }

  const ArticulatedObject slab = slab_object();
  for (int trial = 0; trial < n; ++trial) {
    const FrameObjects fo(slab, std::vector<double>{rng.uniform(0.0, std::numbers::pi / 2)});
    const Points kp = random_cloud(rng, 32, 0.1, Vec3(0.0, 0.05, 0.0));
    const Points d = random_cloud(rng, 32, 0.01);
    double want = 0.0;
    for (Eigen::Index j = 0; j < kp.rows(); ++j)
      want += oracle::nearest((kp.row(j) + d.row(j)).transpose(), fo[0].vertices()).second;
    if (std::abs(l_proj({kp}, {d}, fo) - want) > 1e-12) ++bad_proj;
  }

  const int bad = bad_bps + bad_gt + bad_derived + bad_nearest + bad_proj;
  return {bad == 0, fmt("%d instances per routine; mismatches part_bps=%d gt_contact=%d derived_contact=%d "
                        "nearest_vertex=%d l_proj=%d",
                        n, bad_bps, bad_gt, bad_derived, bad_nearest, bad_proj)};
}

Outcome scale_normalization() {
  Rng rng(102);
  double worst_norm = 0.0, worst_value = 0.0;
  int checked = 0;
  std::vector<ArticulatedObject> objects;
  for (int i = 0; i < 30; ++i) objects.push_back(random_hinged_box(rng));
  for (std::size_t i = 0; i < 9; ++i) {
    SyntheticSpec s = spec(i, 300 + i, 2);
    s.hands = false;
    objects.push_back(gen_synthetic(s).object);
  }
  for (const auto& obj : objects) {
    const ObjectScale s = compute_scale(obj, 0.15);
    const Points opened = obj.posed_canonical(obj.opening_angle());
    const double extent = opened.rowwise().norm().maxCoeff();
    worst_value = std::max(worst_value, std::abs(s.value - 0.85 / extent));
    worst_norm = std::max(worst_norm, std::abs((s.value * opened).rowwise().norm().maxCoeff() - 0.85));
    ++checked;
  }
  const bool ok = kDefaultMargin == 0.15 && worst_value <= 1e-12 && worst_norm <= 1e-12;
  return {ok, fmt("%d objects; max |s - 0.85/max|v|| = %.2e, max |scaled extreme norm - 0.85| = %.2e", checked,
                  worst_value, worst_norm)};
}

// -------------------------------------------------------------- gradients

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

// Relative error of the pose gradient, or nothing when a stencil crosses a
// nearest-neighbour switch.
std::optional<double> refine_gradient_error(const RefineHand& hand, const FrameObjects& obj, const RefineConfig& cfg,
                                            bool freeze) {
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
      std::vector<RefineHand> plus{hand}, minus{hand};
      plus[0].params.theta[i](c) += h;
      minus[0].params.theta[i](c) -= h;
      if (assignment(plus[0], obj, fz) != assignment(minus[0], obj, fz)) return std::nullopt;
      numeric[k] = (evaluate_refine(plus, obj, cfg, false, fz).terms.total -
                    evaluate_refine(minus, obj, cfg, false, fz).terms.total) /
                   (2.0 * h);
    }
  }
  return oracle::relative_error(analytic, numeric);
}

PoseVector slab_pose(Rng& rng, double z_lo, double z_hi) {
  PoseVector t = PoseVector::Zero();
  t.head<3>() << rng.uniform(-0.03, 0.03), rng.uniform(-0.03, 0.03), rng.uniform(z_lo, z_hi);
  for (int i = 3; i < 6; ++i) t(i) = rng.uniform(-0.15, 0.15);
  for (int i = 6; i < kPoseDim; ++i) t(i) = rng.uniform(-0.3, 0.3);
  return t;
}

double rest_height(double depth) { return -right_hand().template_vertices.col(2).minCoeff() - depth; }

struct GradTally {
  int checked = 0;
  int skipped = 0;
  double worst = 0.0;
  void add(std::optional<double> e) {
    if (!e) {
      ++skipped;
      return;
    }
    ++checked;
    worst = std::max(worst, *e);
  }
  std::string str(const char* name) const { return fmt("%s %d pts worst %.1e", name, checked, worst); }
};

Outcome gradient_checks() {
  const int target = 100, max_attempts = 400;
  GradTally disc, lbs, proj, pen, acc;

  Rng rng(103);
  for (int a = 0; a < max_attempts && disc.checked < target; ++a) {
    const Points anchors = random_cloud(rng, 32, 0.1);
    const Points kp = random_cloud(rng, 16, 0.08);
    const Points c_hat = random_cloud(rng, 32, 0.03);
    bool boundary = false;
    for (Eigen::Index k = 0; k < anchors.rows() && !boundary; ++k) {
      VecX d = (kp.rowwise() - anchors.row(k)).rowwise().norm();
      std::sort(d.data(), d.data() + d.size());
      boundary = d(1) - d(0) < 1e-4;
    }
    if ((derived_contact({kp}, {anchors})[0] - c_hat).rowwise().norm().minCoeff() < 1e-4) boundary = true;
    if (boundary) {
      disc.add(std::nullopt);
      continue;
    }
    const Discrepancy d = contact_discrepancy({c_hat}, {kp}, {anchors});
    const auto f = [&](const VecX& x) {
      return contact_discrepancy({c_hat}, {Eigen::Map<const Points>(x.data(), kp.rows(), 3)}, {anchors}).value;
    };
    const VecX fd = oracle::central_difference(f, Eigen::Map<const VecX>(kp.data(), kp.size()), 1e-7);
    disc.add(oracle::relative_error(Eigen::Map<const VecX>(d.gradient[0].data(), d.gradient[0].size()), fd));
  }

  const HandModel& m = right_hand();
  std::vector<int> all(static_cast<std::size_t>(m.vertex_count()));
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  for (int trial = 0; trial < target; ++trial) {
    PoseVector t;
    for (int i = 0; i < 3; ++i) t(i) = rng.normal(0.0, 0.1);
    for (int i = 3; i < kPoseDim; ++i) t(i) = rng.normal(0.0, i < 6 ? 1.0 : 0.4);
    ShapeVector b;
    for (int i = 0; i < kShapeCount; ++i) b(i) = rng.normal();
    const ParamJacobian jac = lbs_jacobian(m, t, b, all);
    double worst = 0.0;
    const double h = 1e-5;
    for (int p = 0; p < kParamDim; ++p) {
      PoseVector tp = t, tm = t;
      ShapeVector bp = b, bm = b;
      if (p < kPoseDim) {
        tp(p) += h;
        tm(p) -= h;
      } else {
        bp(p - kPoseDim) += h;
        bm(p - kPoseDim) -= h;
      }
      const Points vp = lbs_forward(m, tp, bp), vm = lbs_forward(m, tm, bm);
      const VecX fd = (Eigen::Map<const VecX>(vp.data(), vp.size()) - Eigen::Map<const VecX>(vm.data(), vm.size())) /
                      (2.0 * h);
      worst = std::max(worst, oracle::relative_error(jac.col(p), fd));
    }
    lbs.add(worst);
  }

  const ArticulatedObject slab = slab_object();
  const Eigen::Index j = static_cast<Eigen::Index>(m.keypoints.size());
  const FrameObjects one(slab, std::vector<double>{0.4});
  for (int a = 0; a < max_attempts && proj.checked < target; ++a) {
    RefineHand h{&m, {{slab_pose(rng, 0.01, 0.03)}, ShapeVector::Zero()}, {random_cloud(rng, j, 0.01)}};
    proj.add(refine_gradient_error(h, one, {1.0, 0.0, 0.0}, false));
  }
  const FrameObjects flat(slab, std::vector<double>{0.0});
  for (int a = 0; a < max_attempts && pen.checked < target; ++a) {
    RefineHand h{&m, {{slab_pose(rng, rest_height(0.012), rest_height(0.004))}, ShapeVector::Zero()}, {}};
    if (evaluate_refine({h}, flat, {0.0, 1.0, 0.0}, false).terms.interior == 0) continue;
    pen.add(refine_gradient_error(h, flat, {0.0, 1.0, 0.0}, true));
  }
  const FrameObjects three(slab, std::vector<double>{0.0, 0.0, 0.0});
  for (int a = 0; a < target; ++a) {
    RefineHand h{&m,
                 {{slab_pose(rng, 0.05, 0.06), slab_pose(rng, 0.05, 0.06), slab_pose(rng, 0.05, 0.06)},
                  ShapeVector::Zero()},
                 {}};
    acc.add(refine_gradient_error(h, three, {0.0, 0.0, 1.0}, false));
  }

  bool ok = true;
  for (const GradTally* g : {&disc, &lbs, &proj, &pen, &acc}) ok = ok && g->checked >= target && g->worst < 1e-3;
  return {ok, disc.str("contact_discrepancy") + ", " + lbs.str("lbs_forward") + ", " + proj.str("l_proj") + ", " +
                  pen.str("l_pen") + ", " + acc.str("l_acc") +
                  fmt(" (skipped at NN switches: %d/%d/%d)", disc.skipped, proj.skipped, pen.skipped)};
}

// -------------------------------------------------------------- diffusion

class ContactShift final : public Denoiser {
 public:
  ContactShift(const GaussianOracleDenoiser& base, bool ignore_flag) : base_(base), ignore_flag_(ignore_flag) {}
  Eigen::Index sample_dim() const override { return base_.sample_dim(); }
  RowMatX predict(const RowMatX& x, int t, const Conditioning& c, bool use_contact) const override {
    if (!use_contact && !ignore_flag_) return RowMatX::Constant(x.rows(), x.cols(), std::nan(""));
    RowMatX out = base_.predict(x, t, c, true);
    out.col(0) += c.contact.col(0);
    return out;
  }

 private:
  const GaussianOracleDenoiser& base_;
  bool ignore_flag_;
};

Outcome diffusion_correctness() {
  Eigen::RowVector3d mu(0.4, -0.7, 1.5);
  MatX sigma(3, 3);
  sigma << 1.0, 0.3, -0.2, 0.3, 0.8, 0.1, -0.2, 0.1, 0.5;
  const NoiseSchedule s = default_schedule(50);
  const GaussianOracleDenoiser oracle(mu, sigma, s);
  const int n = 10000;
  SampleOptions opt;
  opt.guidance.lambda_f = 0.0;
  const RowMatX x = sample(oracle, s, {}, n, opt, 2024);
  const Eigen::RowVector3d mean = x.colwise().mean();
  const RowMatX centred = x.rowwise() - mean;
  const MatX cov = centred.transpose() * centred / (n - 1.0);
  double worst_mean = 0.0, worst_cov = 0.0;
  for (int i = 0; i < 3; ++i) worst_mean = std::max(worst_mean, std::abs(mean(i) - mu(i)) / std::sqrt(sigma(i, i) / n));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      worst_cov = std::max(worst_cov, std::abs(cov(i, j) - sigma(i, j)) / std::sqrt(sigma(i, i) * sigma(j, j)));
  return {s.steps() == 50 && worst_mean < 3.0 && worst_cov < 0.05,
          fmt("T=%d, n=%d: worst mean error %.2f sigma/sqrt(n) (< 3), worst covariance error %.2f%% (< 5%%)",
              s.steps(), n, worst_mean, 100.0 * worst_cov)};
}

Outcome cfg_algebra() {
  const NoiseSchedule s = default_schedule();
  const GaussianOracleDenoiser oracle(Eigen::RowVector2d(0.4, -0.7), (MatX(2, 2) << 1.0, 0.3, 0.3, 0.8).finished(), s);
  Conditioning cond;
  cond.contact = RowMatX::Constant(64, 1, 0.25);
  SampleOptions zero;
  zero.guidance.lambda_f = 0.0;
  zero.guidance.contact_guidance = false;
  const bool reduces = sample(ContactShift(oracle, false), s, cond, 64, zero, 9) ==
                       sample(ContactShift(oracle, true), s, cond, 64, zero, 9);
  bool fixed = true;
  for (double l : {0.5, 1.0, 3.7}) {
    SampleOptions on = zero;
    on.guidance.lambda_f = l;
    fixed = fixed && sample(oracle, s, cond, 32, zero, 4) == sample(oracle, s, cond, 32, on, 4);
  }
  const bool dflt = kDefaultGuidanceScale == 0.5 && PipelineConfig().guidance.lambda_f == 0.5;
  return {reduces && fixed && dflt, fmt("lambda_f=0 equals conditional bitwise: %s; cond=uncond fixed point for "
                                        "lambda_f in {0.5,1,3.7}: %s; default lambda_f=%.1f",
                                        reduces ? "yes" : "no", fixed ? "yes" : "no", kDefaultGuidanceScale)};
}

// -------------------------------------------------------------- toy model

struct Toy {
  PipelineConfig cfg;
  Checkpoint ck;
  std::vector<Scene> held_out;
  double seconds = 0.0;
};

constexpr int kToyFrames = 16;

PipelineConfig toy_config() {
  PipelineConfig c;
  c.basis_per_part = 32;
  c.keypoints = 32;
  c.hidden = 256;
  c.train.steps = 3000;
  c.train.batch = 8;
  c.samples = 10;
  c.seed = 7;
  return c;
}

Toy& toy() {
  static std::optional<Toy> t;
  if (t) return *t;
  const auto t0 = std::chrono::steady_clock::now();
  t.emplace();
  t->cfg = toy_config();
  std::vector<Scene> train;
  for (std::size_t i = 0; i < 200; ++i) train.push_back(gen_synthetic(spec(i, 10000 + i, kToyFrames)));
  for (std::size_t i = 0; i < 20; ++i) t->held_out.push_back(gen_synthetic(spec(i, 90000 + i, kToyFrames)));
  t->ck = train_checkpoint(train, t->cfg, {ModelKind::kContact, ModelKind::kMotion});
  t->seconds = seconds_since(t0);
  return *t;
}

Outcome guidance_efficacy() {
  const MotionLayout layout{16};
  Rng rng(104);
  double before = 0.0, after = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 6;
    ChannelNormalizer norm;
    norm.mean = Eigen::RowVectorXd::Zero(layout.frame_dim());
    norm.stddev = Eigen::RowVectorXd::Constant(layout.frame_dim(), 0.05);
    RowMatX x(n, layout.frame_dim());
    rng.fill_normal(x);
    std::vector<Points> anchors;
    std::array<ContactFrames, 2> c;
    for (int i = 0; i < n; ++i) {
      anchors.push_back(random_cloud(rng, 24, 0.08));
      for (auto& hand : c) hand.push_back(random_cloud(rng, 24, 0.03));
    }
    RowMatX y = x;
    contact_guidance_step(y, norm, layout, c, anchors);
    for (Side s : {Side::kLeft, Side::kRight}) {
      const auto metric = [&](const RowMatX& m) { return unpack_points(norm.denormalize(m), layout.h_offset(s), 16); };
      before += discrepancy_value(c[static_cast<std::size_t>(s)], derived_contact(metric(x), anchors));
      after += discrepancy_value(c[static_cast<std::size_t>(s)], derived_contact(metric(y), anchors));
    }
  }
  before /= 100.0;
  after /= 100.0;

  Toy& t = toy();
  std::vector<MetricsReport> with, without;
  for (const Scene& s : t.held_out) {
    PipelineConfig c = t.cfg;
    c.samples = 2;
    c.refine_enabled = false;
    with.push_back(run_pipeline(s, t.ck, c).metrics);
    c.guidance.contact_guidance = false;
    without.push_back(run_pipeline(s, t.ck, c).metrics);
  }
  const double cm_with = *average_reports(with).cm, cm_without = *average_reports(without).cm;
  return {after < before && cm_with < cm_without,
          fmt("one step over 100 states: mean discrepancy %.4f -> %.4f; sampled cm_l1 on %zu held-out "
              "trajectories: %.4f cm with guidance vs %.4f cm without",
              before, after, t.held_out.size(), cm_with, cm_without)};
}

Outcome toy_end_to_end() {
  Toy& t = toy();
  const auto t0 = std::chrono::steady_clock::now();
  const double train_seconds = t.seconds;
  std::vector<MetricsReport> rows;
  double min_mul = std::numeric_limits<double>::infinity();
  for (const Scene& s : t.held_out) {
    rows.push_back(run_pipeline(s, t.ck, t.cfg).metrics);
    min_mul = std::min(min_mul, rows.back().mul.value_or(0.0));
  }
  const MetricsReport mean = average_reports(rows);
  const double elapsed = seconds_since(t0) + train_seconds;
  const bool ok = mean.con >= 90.0 && mean.pen_1cm <= 10.0 && min_mul > 0.0 && elapsed < 1800.0;
  return {ok, fmt("200 train / %zu held-out x %d seeds: con %.2f%% (>= 90), pen@1cm %.2f%% (<= 10), "
                  "Mul min %.3f mean %.3f cm (> 0), pen@5mm %.2f%%, cm_l1 %.3f cm, %.0f s incl. %.0f s data+training "
                  "(< 1800)",
                  t.held_out.size(), t.cfg.samples, mean.con, mean.pen_1cm, min_mul, mean.mul.value_or(0.0),
                  mean.pen_5mm, mean.cm.value_or(0.0), elapsed, train_seconds)};
}

// ------------------------------------------------------------- refinement

Outcome refinement_efficacy() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& models = hand_models(kDefaultKeypoints);
  const RefineConfig rc;  // (100, 10, 1000), 100 iterations
  double pen0 = 0, pen1 = 0, acc0 = 0, acc1 = 0, con0 = 0, con1 = 0;
  const int scenes = 20;
  for (int i = 0; i < scenes; ++i) {
    const Scene sc = gen_synthetic(spec(static_cast<std::size_t>(i), 500 + static_cast<std::uint64_t>(i), kToyFrames));
    const FrameObjects fo(sc.object, sc.trajectory);
    Rng rng(600 + static_cast<std::uint64_t>(i));
    std::vector<RefineHand> hands;
    for (std::size_t h = 0; h < 2; ++h) {
      HandParams p = (*sc.hands)[h];
      std::vector<Points> dirs;
      for (std::size_t f = 0; f < sc.frames(); ++f) {
        const Points v = lbs_forward(models[h], p.theta[f], p.beta);
        dirs.push_back(direction_vectors(sample_keypoints(models[h], v), fo[f].vertices()));
        // 5 mm towards the object from the palm, then 1 cm in a random direction.
        Vec3 palm = Vec3::Zero();
        int count = 0;
        for (Eigen::Index r = 0; r < v.rows(); ++r)
          if (models[h].weights(r, 0) == 1.0) palm += v.row(r).transpose(), ++count;
        palm /= count;
        const Vec3 into = (fo[f].vertices().row(fo[f].nearest(palm).index).transpose() - palm).normalized();
        p.theta[f].head<3>() += 0.005 * into + 0.01 * rng.normal3().normalized();
      }
      hands.push_back({&models[h], p, dirs});
    }
    const std::vector<HandParams> init{hands[0].params, hands[1].params};
    const SurfaceMotion before = surfaces_of(models, init);
    const RefineResult r = refine(hands, fo, rc);
    const SurfaceMotion after = surfaces_of(models, r.params);
    pen0 += pen_pct(before, fo, 0.01);
    pen1 += pen_pct(after, fo, 0.01);
    acc0 += accel(before, sc.fps);
    acc1 += accel(after, sc.fps);
    con0 += con_pct(before, fo);
    con1 += con_pct(after, fo);
  }
  for (double* v : {&pen0, &pen1, &acc0, &acc1, &con0, &con1}) *v /= scenes;
  const double pen_drop = pen0 > 0.0 ? 1.0 - pen1 / pen0 : 0.0;
  const double acc_drop = 1.0 - acc1 / acc0;
  const double secs = seconds_since(t0);
  const bool ok = pen0 > 0.0 && pen_drop >= 0.8 && acc_drop >= 0.3 && con0 - con1 <= 1.0 && secs < 300.0;
  return {ok, fmt("%d scenes: pen@1cm %.2f%% -> %.2f%% (-%.1f%%, need 80), accel %.0f -> %.0f cm/s^2 (-%.1f%%, "
                  "need 30), con %.2f%% -> %.2f%%, %.0f s (< 300)",
                  scenes, pen0, pen1, 100.0 * pen_drop, acc0, acc1, 100.0 * acc_drop, con0, con1, secs)};
}

// ------------------------------------------------------------ BPS density

Outcome bps_density_ordering() {
  double err_np = 0.0, err_u = 0.0, ratio = 0.0;
  int frames = 0, objects = 0;
  const int k = 64;
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    SyntheticSpec sp = spec(1, 700 + seed, 8);  // cylinder: small cap on a large base
    const Scene sc = gen_synthetic(sp);
    ratio = std::max(ratio, surface_area(sc.object.mesh(), Part::kTop) / surface_area(sc.object.mesh(), Part::kBottom));
    ++objects;
    const ObjectFeatures np = compute_features(sc.object, sc.trajectory, BpsVariant::kNormalizedPart, k, seed);
    const ObjectFeatures u = compute_features(sc.object, sc.trajectory, BpsVariant::kUnnormalized, k, seed);
    const auto& top = sc.object.part_indices(Part::kTop);
    for (std::size_t i = 0; i < sc.frames(); ++i) {
      const Points posed = sc.object.posed_canonical(sc.trajectory.frames[i].angle);
      std::vector<Points> hands;
      for (Side side : {Side::kLeft, Side::kRight}) {
        const HandParams& p = (*sc.hands)[static_cast<std::size_t>(side)];
        hands.push_back(lbs_forward(default_hand(side), p.theta[i], p.beta));
      }
      Points both(hands[0].rows() + hands[1].rows(), 3);
      both << hands[0], hands[1];
      Points top_v(static_cast<Eigen::Index>(top.size()), 3);
      for (std::size_t j = 0; j < top.size(); ++j) top_v.row(static_cast<Eigen::Index>(j)) = posed.row(top[j]);
      VecX dense(top_v.rows());
      const auto nn = nearest_vertex(top_v, both);
      for (Eigen::Index j = 0; j < top_v.rows(); ++j) dense(j) = nn[static_cast<std::size_t>(j)].distance;
      for (const ObjectFeatures* f : {&np, &u}) {
        const Points& anchors = f->bps.anchors[i];
        const VecX values = contact_norms(gt_contact({both}, {anchors})[0]);
        const double e = (densify_contact(anchors, values, top_v) - dense).cwiseAbs().mean();
        (f == &np ? err_np : err_u) += e;
      }
      ++frames;
    }
  }
  err_np /= frames;
  err_u /= frames;
  const bool ok = ratio <= 0.25 && err_np < err_u;
  return {ok, fmt("%d cylinder objects (top/bottom area <= %.3f, need <= 0.25), K=%d: top-part densified L1 NP-BPS "
                  "%.3f cm < U-BPS %.3f cm",
                  objects, ratio, k, 100.0 * err_np, 100.0 * err_u)};
}

// ------------------------------------------------------------ determinism

std::map<std::string, std::string> tree_bytes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const auto bytes = read_file(e.path().string());
    out[fs::relative(e.path(), root).string()] = std::string(bytes.begin(), bytes.end());
  }
  return out;
}

Outcome determinism() {
  PipelineConfig c;
  c.basis_per_part = 16;
  c.keypoints = 32;
  c.hidden = 64;
  c.diffusion_steps = 20;
  c.train.steps = 100;
  c.samples = 3;
  c.seed = 11;
  const fs::path base = fs::temp_directory_path() / "hoisynth_acceptance_determinism";
  fs::remove_all(base);
  std::vector<std::map<std::string, std::string>> outputs;
  for (int run = 0; run < 2; ++run) {
    const fs::path dir = base / ("run" + std::to_string(run));
    std::vector<Scene> train;
    for (std::size_t i = 0; i < 6; ++i) train.push_back(gen_synthetic(spec(i, 800 + i, 12)));
    const Scene test = gen_synthetic(spec(1, 899, 12));
    fs::create_directories(dir);
    save_scene((dir / "test.scene").string(), test);
    const Checkpoint ck = train_checkpoint(train, c, {ModelKind::kContact, ModelKind::kMotion});
    save_checkpoint((dir / "model.ck").string(), ck);
    run_pipeline(load_scene((dir / "test.scene").string()), load_checkpoint((dir / "model.ck").string()), c,
                 (dir / "out").string(), true);
    outputs.push_back(tree_bytes(dir));
  }
  std::size_t differing = 0;
  for (const auto& [name, bytes] : outputs[0]) {
    const auto it = outputs[1].find(name);
    if (it == outputs[1].end() || it->second != bytes) ++differing;
  }
  const bool ok = !outputs[0].empty() && outputs[0].size() == outputs[1].size() && differing == 0;
  return {ok, fmt("two full runs (generate, train, sample, refine, metrics, export): %zu files, %zu differ",
                  outputs[0].size(), differing)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string only;
  app.add_option("--only", only, "run one criterion");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"oracle_equivalence", oracle_equivalence},
      {"scale_normalization", scale_normalization},
      {"gradient_checks", gradient_checks},
      {"diffusion_correctness", diffusion_correctness},
      {"cfg_algebra", cfg_algebra},
      {"refinement_efficacy", refinement_efficacy},
      {"bps_density_ordering", bps_density_ordering},
      {"determinism", determinism},
      {"toy_end_to_end", toy_end_to_end},
      {"guidance_efficacy", guidance_efficacy},
  };
  const std::map<std::string, double> budget = {{"oracle_equivalence", 30.0}, {"gradient_checks", 120.0},
                                                {"diffusion_correctness", 60.0}};
  int failed = 0, ran = 0;
  for (const auto& [name, run] : criteria) {
    if (!only.empty() && only != name) continue;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = seconds_since(t0);
    if (const auto b = budget.find(name); b != budget.end() && secs >= b->second) {
      o.pass = false;
      o.detail += fmt(" [over the %.0f s budget]", b->second);
    }
    std::printf("%s %s (%.1f s): %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), secs, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  if (ran == 0) {
    std::fprintf(stderr, "unknown criterion '%s'\n", only.c_str());
    return 2;
  }
  return failed == 0 ? 0 : 1;
}

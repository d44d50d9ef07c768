#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "hoisynth/core/error.hpp"
#include "hoisynth/core/types.hpp"
#include "hoisynth/geometry/frame_objects.hpp"
#include "hoisynth/hand/fit.hpp"
#include "hoisynth/hand/keypoints.hpp"
#include "hoisynth/hand/lbs.hpp"

namespace hoisynth {

struct RefineConfig {
  double w_proj = 100.0;
  double w_pen = 10.0;
  double w_acc = 1000.0;
  int iterations = 100;
  double step_size = 1e-3;  // initial per-coordinate step (metres / radians)
  double divergence_factor = 10.0;
  int max_backtracks = 10;

  void validate() const {
    require(w_proj >= 0.0 && w_pen >= 0.0 && w_acc >= 0.0, "refine weights must be nonnegative");
    require(std::isfinite(w_proj) && std::isfinite(w_pen) && std::isfinite(w_acc), "refine weights must be finite");
    require(iterations >= 0, "refine iteration count must be nonnegative");
    require(step_size > 0.0 && std::isfinite(step_size), "refine step size must be positive");
    require(divergence_factor > 1.0, "divergence factor must exceed 1");
    require(max_backtracks >= 0, "backtrack count must be nonnegative");
  }
};

/// Per frame, per vertex: 1 when the vertex is inside the object.
using InteriorSet = std::vector<std::vector<char>>;

namespace detail {

inline void check_frames(const std::vector<Points>& v, const FrameObjects& obj) {
  require(v.size() == obj.size(), "frame count differs from the object trajectory");
}

inline void reset_grad(std::vector<Points>* grad, const std::vector<Points>& like) {
  if (!grad) return;
  grad->resize(like.size());
  for (std::size_t i = 0; i < like.size(); ++i) (*grad)[i] = Points::Zero(like[i].rows(), 3);
}

inline void add_unit(Points& g, Eigen::Index row, const Vec3& d, double scale) {
  const double n = d.norm();
  if (n > 0.0) g.row(row) += (scale / n) * d.transpose();
}

}  // namespace detail

/// Sum over frames and keypoints of the distance from keypoint + direction
/// to the nearest object vertex. `grad` is w.r.t. the keypoints.
inline double l_proj(const std::vector<Points>& keypoints, const std::vector<Points>& directions,
                     const FrameObjects& obj, std::vector<Points>* grad = nullptr) {
  detail::check_frames(keypoints, obj);
  require(directions.size() == keypoints.size(), "direction frames differ from keypoint frames");
  detail::reset_grad(grad, keypoints);
  double total = 0.0;
  for (std::size_t i = 0; i < keypoints.size(); ++i) {
    require(directions[i].rows() == keypoints[i].rows(), "direction count differs from keypoint count");
    for (Eigen::Index j = 0; j < keypoints[i].rows(); ++j) {
      const Vec3 p = (keypoints[i].row(j) + directions[i].row(j)).transpose();
      const NearestResult nr = obj[i].nearest(p);
      total += nr.distance;
      if (grad) detail::add_unit((*grad)[i], j, -nr.vector, 1.0);
    }
  }
  return total;
}

inline InteriorSet interior_vertices(const std::vector<Points>& vertices, const FrameObjects& obj) {
  detail::check_frames(vertices, obj);
  InteriorSet out(vertices.size());
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    out[i].resize(static_cast<std::size_t>(vertices[i].rows()));
    for (Eigen::Index v = 0; v < vertices[i].rows(); ++v)
      out[i][static_cast<std::size_t>(v)] = obj[i].inside(vertices[i].row(v).transpose()) ? 1 : 0;
  }
  return out;
}

inline int interior_count(const InteriorSet& s) {
  int n = 0;
  for (const auto& f : s)
    for (char c : f) n += c;
  return n;
}

/// Sum over the given interior vertices of the distance to the nearest
/// object vertex.
inline double l_pen(const std::vector<Points>& vertices, const FrameObjects& obj, const InteriorSet& interior,
                    std::vector<Points>* grad = nullptr) {
  detail::check_frames(vertices, obj);
  require(interior.size() == vertices.size(), "interior set frame count mismatch");
  detail::reset_grad(grad, vertices);
  double total = 0.0;
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    require(interior[i].size() == static_cast<std::size_t>(vertices[i].rows()), "interior set size mismatch");
    for (Eigen::Index v = 0; v < vertices[i].rows(); ++v) {
      if (!interior[i][static_cast<std::size_t>(v)]) continue;
      const NearestResult nr = obj[i].nearest(vertices[i].row(v).transpose());
      total += nr.distance;
      if (grad) detail::add_unit((*grad)[i], v, -nr.vector, 1.0);
    }
  }
  return total;
}

inline double l_pen(const std::vector<Points>& vertices, const FrameObjects& obj) {
  return l_pen(vertices, obj, interior_vertices(vertices, obj));
}

/// Sum over frames i >= 2 and vertices of |h_i - 2 h_{i-1} + h_{i-2}|.
inline double l_acc(const std::vector<Points>& vertices, std::vector<Points>* grad = nullptr) {
  detail::reset_grad(grad, vertices);
  double total = 0.0;
  for (std::size_t i = 2; i < vertices.size(); ++i) {
    require(vertices[i].rows() == vertices[0].rows() && vertices[i - 1].rows() == vertices[0].rows(),
            "vertex count changes over the sequence");
    for (Eigen::Index v = 0; v < vertices[i].rows(); ++v) {
      const Vec3 a = (vertices[i].row(v) - 2.0 * vertices[i - 1].row(v) + vertices[i - 2].row(v)).transpose();
      const double n = a.norm();
      total += n;
      if (grad && n > 0.0) {
        const Eigen::RowVector3d u = a.transpose() / n;
        (*grad)[i].row(v) += u;
        (*grad)[i - 1].row(v) -= 2.0 * u;
        (*grad)[i - 2].row(v) += u;
      }
    }
  }
  return total;
}

/// One hand to refine: fitted parameters and the sampled direction vectors
/// (may be empty, which drops the projection term for this hand).
struct RefineHand {
  const HandModel* model = nullptr;
  HandParams params;
  std::vector<Points> directions;
};

struct RefineTerms {
  double proj = 0.0;
  double pen = 0.0;
  double acc = 0.0;
  double total = 0.0;
  int interior = 0;
};

struct RefineEval {
  RefineTerms terms;
  std::vector<std::vector<PoseVector>> grad;  // per hand, per frame; pose only
  std::vector<InteriorSet> interior;          // per hand
};

inline std::vector<Points> hand_vertices(const HandModel& model, const HandParams& p) {
  std::vector<Points> out;
  out.reserve(p.theta.size());
  for (const auto& t : p.theta) out.push_back(lbs_forward(model, t, p.beta));
  return out;
}

/// Weighted objective over all hands. With `frozen`, membership in the
/// penetration sum is taken from it instead of being recomputed.
inline RefineEval evaluate_refine(const std::vector<RefineHand>& hands, const FrameObjects& obj,
                                  const RefineConfig& cfg, bool with_grad,
                                  const std::vector<InteriorSet>* frozen = nullptr) {
  require(!frozen || frozen->size() == hands.size(), "frozen interior set per hand required");
  RefineEval ev;
  ev.grad.resize(hands.size());
  ev.interior.resize(hands.size());
  for (std::size_t h = 0; h < hands.size(); ++h) {
    const RefineHand& hand = hands[h];
    require(hand.model != nullptr, "refine hand has no model");
    const std::vector<Points> verts = hand_vertices(*hand.model, hand.params);
    detail::check_frames(verts, obj);
    std::vector<Points> g_proj, g_pen, g_acc;
    auto* gp = with_grad ? &g_proj : nullptr;
    if (!hand.directions.empty()) {
      std::vector<Points> kp;
      kp.reserve(verts.size());
      for (const auto& v : verts) kp.push_back(sample_keypoints(*hand.model, v));
      ev.terms.proj += l_proj(kp, hand.directions, obj, gp);
    }
    ev.interior[h] = frozen ? (*frozen)[h] : interior_vertices(verts, obj);
    ev.terms.interior += interior_count(ev.interior[h]);
    ev.terms.pen += l_pen(verts, obj, ev.interior[h], with_grad ? &g_pen : nullptr);
    ev.terms.acc += l_acc(verts, with_grad ? &g_acc : nullptr);
    if (!with_grad) continue;
    ev.grad[h].resize(verts.size());
    for (std::size_t i = 0; i < verts.size(); ++i) {
      Points up = cfg.w_pen * g_pen[i] + cfg.w_acc * g_acc[i];
      if (!g_proj.empty()) {
        const auto& idx = hand.model->keypoints;
        for (std::size_t j = 0; j < idx.size(); ++j)
          up.row(idx[j]) += cfg.w_proj * g_proj[i].row(static_cast<Eigen::Index>(j));
      }
      ev.grad[h][i] = lbs_vjp(*hand.model, hand.params.theta[i], hand.params.beta, up).head<kPoseDim>();
    }
  }
  ev.terms.total = cfg.w_proj * ev.terms.proj + cfg.w_pen * ev.terms.pen + cfg.w_acc * ev.terms.acc;
  return ev;
}

struct RefineRecord {
  int iteration = 0;
  RefineTerms terms;
  double step = 0.0;  // accepted step scale, 0 when the iteration was rejected
  bool accepted = false;
};

enum class RefineStatus { kCompleted, kDiverged };

struct RefineReport {
  std::vector<RefineRecord> history;  // entry 0 is the initial state
  RefineStatus status = RefineStatus::kCompleted;
  std::string message;
  double seconds = 0.0;

  const RefineTerms& initial() const { return history.front().terms; }
  const RefineTerms& final() const { return history.back().terms; }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["status"] = status == RefineStatus::kCompleted ? "completed" : "diverged";
    if (!message.empty()) j["message"] = message;
    j["seconds"] = seconds;
    auto& it = j["iterations"] = nlohmann::json::array();
    for (const auto& r : history)
      it.push_back({{"iteration", r.iteration},
                    {"l_proj", r.terms.proj},
                    {"l_pen", r.terms.pen},
                    {"l_acc", r.terms.acc},
                    {"total", r.terms.total},
                    {"interior_vertices", r.terms.interior},
                    {"step", r.step},
                    {"accepted", r.accepted}});
    return j;
  }
};

struct RefineResult {
  std::vector<HandParams> params;
  RefineReport report;
};

/// Pose-only refinement of the weighted objective. Steps are RMS-scaled
/// gradient directions with Armijo backtracking, so the objective never
/// increases; the interior set is recomputed at every accepted iterate.
inline RefineResult refine(std::vector<RefineHand> hands, const FrameObjects& obj, const RefineConfig& cfg) {
  cfg.validate();
  for (const auto& h : hands) {
    require(h.model != nullptr, "refine hand has no model");
    h.params.validate();
    require(h.params.theta.size() == obj.size(), "hand frames differ from the object trajectory");
    require(h.directions.empty() || h.directions.size() == obj.size(), "direction frames differ from the trajectory");
  }
  const auto start = std::chrono::steady_clock::now();
  RefineResult res;
  auto finish = [&]() {
    for (auto& h : hands) res.params.push_back(h.params);
    res.report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return res;
  };

  RefineEval cur = evaluate_refine(hands, obj, cfg, true);
  const double f0 = cur.terms.total;
  require(std::isfinite(f0), "refine objective is not finite at the initial parameters");
  res.report.history.push_back({0, cur.terms, 0.0, true});

  constexpr double kDecay = 0.9, kEps = 1e-12, kArmijo = 1e-4;
  std::vector<std::vector<PoseVector>> sq(hands.size());
  for (std::size_t h = 0; h < hands.size(); ++h) sq[h].assign(obj.size(), PoseVector::Zero());
  double lr = cfg.step_size;
  const double lr_max = 10.0 * cfg.step_size;

  for (int it = 1; it <= cfg.iterations; ++it) {
    const double bias = 1.0 - std::pow(kDecay, it);
    std::vector<std::vector<PoseVector>> dir(hands.size());
    double slope = 0.0;  // g . d, nonpositive
    for (std::size_t h = 0; h < hands.size(); ++h) {
      dir[h].resize(obj.size());
      for (std::size_t i = 0; i < obj.size(); ++i) {
        const PoseVector& g = cur.grad[h][i];
        sq[h][i] = kDecay * sq[h][i] + (1.0 - kDecay) * g.cwiseProduct(g);
        const PoseVector denom = (sq[h][i] / bias).cwiseSqrt().array() + kEps;
        dir[h][i] = -g.cwiseQuotient(denom);
        slope += g.dot(dir[h][i]);
      }
    }
    double alpha = lr;
    bool accepted = false;
    for (int bt = 0; bt <= cfg.max_backtracks; ++bt, alpha *= 0.5) {
      std::vector<RefineHand> trial = hands;
      for (std::size_t h = 0; h < hands.size(); ++h)
        for (std::size_t i = 0; i < obj.size(); ++i) trial[h].params.theta[i] += alpha * dir[h][i];
      RefineEval ev = evaluate_refine(trial, obj, cfg, true);
      if (!std::isfinite(ev.terms.total) || ev.terms.total > cfg.divergence_factor * f0) {
        res.report.status = RefineStatus::kDiverged;
        res.report.message = "objective reached " + std::to_string(ev.terms.total) + " at iteration " +
                             std::to_string(it) + " (initial " + std::to_string(f0) + ")";
        res.report.history.push_back({it, cur.terms, 0.0, false});
        return finish();
      }
      if (ev.terms.total <= cur.terms.total + kArmijo * alpha * slope) {
        hands = std::move(trial);
        cur = std::move(ev);
        accepted = true;
        break;
      }
    }
    if (accepted) {
      res.report.history.push_back({it, cur.terms, alpha, true});
      lr = alpha == lr ? std::min(1.2 * lr, lr_max) : alpha;
    } else {
      res.report.history.push_back({it, cur.terms, 0.0, false});
      lr = alpha;
    }
  }
  return finish();
}

}  // namespace hoisynth

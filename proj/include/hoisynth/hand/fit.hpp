#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Geometry>

#include "hoisynth/core/error.hpp"
#include "hoisynth/core/types.hpp"
#include "hoisynth/geometry/rotation.hpp"
#include "hoisynth/hand/keypoints.hpp"
#include "hoisynth/hand/lbs.hpp"

namespace hoisynth {

/// Per-frame pose and a sequence-constant shape for one hand.
struct HandParams {
  std::vector<PoseVector> theta;
  ShapeVector beta = ShapeVector::Zero();

  Eigen::Index frames() const { return static_cast<Eigen::Index>(theta.size()); }

  void validate() const {
    for (const auto& t : theta) require(all_finite(t), "hand pose must be finite");
    require(all_finite(beta), "hand shape must be finite");
  }
};

struct FitOptions {
  int max_iterations = 300;
  double relative_tolerance = 1e-8;
  double beta_regularization = 1e-6;  // weight on |beta|^2, in m^2
  bool fit_shape = true;
  std::optional<HandParams> initial;
};

struct FitReport {
  std::vector<double> objective;  // accepted iterates, starting with the initial value
  double rmse = 0.0;              // metres, over all keypoints and frames
  int iterations = 0;
  bool converged = false;
};

namespace detail {

inline double fit_objective(const HandModel& model, const HandParams& p, const std::vector<Points>& target,
                            double beta_reg) {
  double e = beta_reg * p.beta.squaredNorm();
  for (std::size_t i = 0; i < target.size(); ++i)
    e += (lbs_subset(model, p.theta[i], p.beta, model.keypoints) - target[i]).squaredNorm();
  return e;
}

// Rigid alignment of the palm keypoints; fingers start straight.
inline PoseVector rigid_initialisation(const HandModel& model, const Points& target) {
  std::vector<int> rows;
  for (std::size_t r = 0; r < model.keypoints.size(); ++r)
    if (model.weights(model.keypoints[r], 0) >= 0.999) rows.push_back(static_cast<int>(r));
  if (rows.size() < 4) {
    rows.resize(model.keypoints.size());
    for (std::size_t r = 0; r < rows.size(); ++r) rows[r] = static_cast<int>(r);
  }
  Eigen::Matrix3Xd src(3, static_cast<Eigen::Index>(rows.size()));
  Eigen::Matrix3Xd dst(3, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t c = 0; c < rows.size(); ++c) {
    src.col(static_cast<Eigen::Index>(c)) = model.template_vertices.row(model.keypoints[static_cast<std::size_t>(rows[c])]).transpose();
    dst.col(static_cast<Eigen::Index>(c)) = target.row(rows[c]).transpose();
  }
  const Eigen::Matrix4d t = Eigen::umeyama(src, dst, false);
  const Mat3 r = t.topLeftCorner<3, 3>();
  const Vec3 j0 = model.joint_rest.row(0).transpose();
  PoseVector theta = PoseVector::Zero();
  theta.segment<3>(3) = matrix_to_axis_angle(r);
  theta.head<3>() = t.topRightCorner<3, 1>() - j0 + r * j0;
  return theta;
}

}  // namespace detail

/// Least-squares fit of per-frame pose and shared shape to keypoint tracks.
///
/// Levenberg-Marquardt over all frames jointly; the shared shape is
/// eliminated with a Schur complement so each step costs one 51 x 51 solve
/// per frame plus one 10 x 10 solve. Only decreasing steps are accepted.
inline HandParams fit_params(const HandModel& model, const std::vector<Points>& target, const FitOptions& opt = {},
                             FitReport* report = nullptr) {
  require(!target.empty(), "keypoint track is empty");
  for (const auto& h : target) {
    if (!all_finite(h)) throw InvalidInput("keypoint targets must be finite");
    require(h.rows() == model.keypoint_count(), "keypoint target size does not match the model");
  }
  const auto n = target.size();
  HandParams p;
  if (opt.initial) {
    require(opt.initial->theta.size() == n, "initial parameters have the wrong frame count");
    p = *opt.initial;
    p.validate();
  } else {
    p.theta.resize(n);
    for (std::size_t i = 0; i < n; ++i) p.theta[i] = detail::rigid_initialisation(model, target[i]);
  }

  using Mat51 = Eigen::Matrix<double, kPoseDim, kPoseDim>;
  using Mat51x10 = Eigen::Matrix<double, kPoseDim, kShapeCount>;
  using Mat10 = Eigen::Matrix<double, kShapeCount, kShapeCount>;

  FitReport rep;
  double cost = detail::fit_objective(model, p, target, opt.beta_regularization);
  rep.objective.push_back(cost);
  double mu = 1e-3;
  std::vector<Mat51> a(n);
  std::vector<Mat51x10> b(n);
  std::vector<PoseVector> g(n);

  for (int it = 0; it < opt.max_iterations && cost > 1e-24; ++it) {
    Mat10 c = opt.beta_regularization * Mat10::Identity();
    ShapeVector gb = opt.beta_regularization * p.beta;
    for (std::size_t i = 0; i < n; ++i) {
      const ParamJacobian jac = lbs_jacobian(model, p.theta[i], p.beta, model.keypoints);
      const Points pred = lbs_subset(model, p.theta[i], p.beta, model.keypoints);
      const Eigen::Map<const VecX> r(pred.data(), pred.size());
      const Eigen::Map<const VecX> h(target[i].data(), target[i].size());
      const VecX res = r - h;
      const auto jt = jac.leftCols<kPoseDim>();
      const auto js = jac.rightCols<kShapeCount>();
      a[i] = jt.transpose() * jt;
      b[i] = jt.transpose() * js;
      g[i] = jt.transpose() * res;
      c += js.transpose() * js;
      gb += js.transpose() * res;
    }

    bool accepted = false;
    for (int attempt = 0; attempt < 30 && !accepted; ++attempt) {
      Mat10 schur = c;
      schur.diagonal() += mu * (c.diagonal().array() + 1e-9).matrix();
      ShapeVector rhs = -gb;
      std::vector<Eigen::LDLT<Mat51>> solvers(n);
      for (std::size_t i = 0; i < n; ++i) {
        Mat51 damped = a[i];
        damped.diagonal() += mu * (a[i].diagonal().array() + 1e-9).matrix();
        solvers[i].compute(damped);
        if (opt.fit_shape) {
          schur -= b[i].transpose() * solvers[i].solve(b[i]);
          rhs += b[i].transpose() * solvers[i].solve(g[i]);
        }
      }
      ShapeVector db = ShapeVector::Zero();
      if (opt.fit_shape) db = schur.ldlt().solve(rhs);
      HandParams trial = p;
      trial.beta += db;
      for (std::size_t i = 0; i < n; ++i) trial.theta[i] += solvers[i].solve(-g[i] - b[i] * db);
      const double trial_cost = all_finite(trial.beta) ? detail::fit_objective(model, trial, target, opt.beta_regularization)
                                                       : std::numeric_limits<double>::infinity();
      if (std::isfinite(trial_cost) && trial_cost < cost) {
        const double rel = (cost - trial_cost) / std::max(cost, 1e-300);
        p = std::move(trial);
        cost = trial_cost;
        rep.objective.push_back(cost);
        mu = std::max(mu / 3.0, 1e-12);
        accepted = true;
        if (rel < opt.relative_tolerance) rep.converged = true;
      } else {
        mu *= 4.0;
      }
    }
    rep.iterations = it + 1;
    if (!accepted || rep.converged) {
      rep.converged = true;
      break;
    }
  }
  double sq = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    sq += (lbs_subset(model, p.theta[i], p.beta, model.keypoints) - target[i]).squaredNorm();
  rep.rmse = std::sqrt(sq / static_cast<double>(n * model.keypoints.size()));
  if (report) *report = std::move(rep);
  return p;
}

}  // namespace hoisynth

#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "hoisynth/contact/contact_map.hpp"
#include "hoisynth/core/error.hpp"
#include "hoisynth/core/types.hpp"
#include "hoisynth/diffusion/normalizer.hpp"
#include "hoisynth/hand/model.hpp"

namespace hoisynth {

/// Motion frame layout: [left H | left D | right H | right D], each J x 3
/// flattened row-major.
struct MotionLayout {
  int keypoints = 0;

  Eigen::Index frame_dim() const { return 12 * static_cast<Eigen::Index>(keypoints); }
  Eigen::Index h_offset(Side s) const { return (s == Side::kLeft ? 0 : 6) * static_cast<Eigen::Index>(keypoints); }
  Eigen::Index d_offset(Side s) const { return h_offset(s) + 3 * static_cast<Eigen::Index>(keypoints); }
};

/// Contact frame layout: [left C | right C], each 2K x 3 flattened.
struct ContactLayout {
  int slots = 0;  // 2K

  Eigen::Index frame_dim() const { return 6 * static_cast<Eigen::Index>(slots); }
  Eigen::Index offset(Side s) const { return (s == Side::kLeft ? 0 : 3) * static_cast<Eigen::Index>(slots); }
};

/// Rows of `x` hold `count` points starting at column `offset`.
inline std::vector<Points> unpack_points(const RowMatX& x, Eigen::Index offset, Eigen::Index count) {
  require(offset + 3 * count <= x.cols(), "point block exceeds the frame width");
  std::vector<Points> out;
  out.reserve(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    out.emplace_back(Eigen::Map<const Points>(x.row(i).data() + offset, count, 3));
  return out;
}

inline void pack_points(RowMatX& x, Eigen::Index offset, const std::vector<Points>& pts) {
  require(static_cast<Eigen::Index>(pts.size()) == x.rows(), "frame count mismatch");
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Points& p = pts[static_cast<std::size_t>(i)];
    require(offset + p.size() <= x.cols(), "point block exceeds the frame width");
    Eigen::Map<Points>(x.row(i).data() + offset, p.rows(), 3) = p;
  }
}

struct GuidanceStep {
  std::array<double, 2> before{};     // discrepancy per hand before the step
  std::array<double, 2> step_norm{};  // 1 when applied, 0 when skipped
};

/// One contact-guidance correction of a normalised clean-sample prediction.
///
/// For each hand the discrepancy between `c_hat` and the map implied by the
/// predicted keypoints is differentiated w.r.t. the normalised H channels and
/// a step of unit norm is taken against that gradient (scale 1/|grad|).
/// Hands whose gradient norm is below 1e-12 are left untouched.
inline GuidanceStep contact_guidance_step(RowMatX& x0, const ChannelNormalizer& norm, const MotionLayout& layout,
                                          const std::array<ContactFrames, 2>& c_hat,
                                          const std::vector<Points>& anchors) {
  require(x0.cols() == layout.frame_dim() && norm.channels() == layout.frame_dim(), "motion layout mismatch");
  require(static_cast<Eigen::Index>(anchors.size()) == x0.rows(), "one anchor set per frame required");
  GuidanceStep info;
  const Eigen::Index j = layout.keypoints;
  for (Side side : {Side::kLeft, Side::kRight}) {
    const auto hs = static_cast<std::size_t>(side);
    const Eigen::Index off = layout.h_offset(side);
    const auto std_block = norm.stddev.segment(off, 3 * j);
    const auto mean_block = norm.mean.segment(off, 3 * j);
    std::vector<Points> h(static_cast<std::size_t>(x0.rows()));
    for (Eigen::Index i = 0; i < x0.rows(); ++i) {
      const Eigen::RowVectorXd metric = x0.row(i).segment(off, 3 * j).cwiseProduct(std_block) + mean_block;
      h[static_cast<std::size_t>(i)] = Eigen::Map<const Points>(metric.data(), j, 3);
    }
    const Discrepancy d = contact_discrepancy(c_hat[hs], h, anchors);
    info.before[hs] = d.value;
    RowMatX g(x0.rows(), 3 * j);
    for (Eigen::Index i = 0; i < x0.rows(); ++i)
      g.row(i) = Eigen::Map<const Eigen::RowVectorXd>(d.gradient[static_cast<std::size_t>(i)].data(), 3 * j).cwiseProduct(std_block);
    const double gn = g.norm();
    if (!(gn >= 1e-12)) continue;
    x0.middleCols(off, 3 * j) -= g / gn;
    info.step_norm[hs] = 1.0;
  }
  return info;
}

}  // namespace hoisynth

#pragma once

#include <cmath>

#include "hoisynth/core/error.hpp"
#include "hoisynth/core/types.hpp"

namespace hoisynth {

/// Per-channel affine normalisation x_n = (x - mean) / std.
struct ChannelNormalizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd stddev;

  Eigen::Index channels() const { return mean.size(); }

  static ChannelNormalizer identity(Eigen::Index channels) {
    return {Eigen::RowVectorXd::Zero(channels), Eigen::RowVectorXd::Ones(channels)};
  }

  /// Statistics over all rows; near-constant channels get unit scale.
  static ChannelNormalizer fit(const RowMatX& rows, double min_std = 1e-6) {
    require(rows.rows() > 0, "cannot fit a normaliser to zero rows");
    ChannelNormalizer n;
    n.mean = rows.colwise().mean();
    n.stddev = ((rows.rowwise() - n.mean).array().square().colwise().sum() / static_cast<double>(rows.rows())).sqrt();
    for (Eigen::Index c = 0; c < n.stddev.size(); ++c)
      if (!(n.stddev(c) > min_std)) n.stddev(c) = 1.0;
    return n;
  }

  RowMatX normalize(const RowMatX& x) const {
    require(x.cols() == channels(), "normaliser channel count mismatch");
    return ((x.rowwise() - mean).array().rowwise() / stddev.array()).matrix();
  }

  RowMatX denormalize(const RowMatX& x) const {
    require(x.cols() == channels(), "normaliser channel count mismatch");
    return ((x.array().rowwise() * stddev.array()).rowwise() + mean.array()).matrix();
  }
};

}  // namespace hoisynth

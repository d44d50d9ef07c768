#pragma once

#include <cmath>

#include <Eigen/Cholesky>

#include "hoisynth/core/error.hpp"
#include "hoisynth/core/types.hpp"
#include "hoisynth/diffusion/schedule.hpp"

namespace hoisynth {

/// Per-frame conditioning, already normalised. Either block may have zero
/// columns.
struct Conditioning {
  RowMatX object;   // N x d_o
  RowMatX contact;  // N x d_c
};

/// Clean-sample predictor. With `use_contact` false the contact block is
/// ignored and the null token takes its place.
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual Eigen::Index sample_dim() const = 0;
  virtual RowMatX predict(const RowMatX& x_t, int t, const Conditioning& cond, bool use_contact) const = 0;
};

/// Exact posterior mean E[x0 | x_t] for x0 ~ N(mu, Sigma) rows.
class GaussianOracleDenoiser final : public Denoiser {
 public:
  GaussianOracleDenoiser(Eigen::RowVectorXd mean, MatX covariance, NoiseSchedule schedule)
      : mean_(std::move(mean)), cov_(std::move(covariance)), schedule_(std::move(schedule)) {
    require(cov_.rows() == mean_.size() && cov_.cols() == mean_.size(), "covariance must match the mean");
  }

  Eigen::Index sample_dim() const override { return mean_.size(); }

  RowMatX predict(const RowMatX& x_t, int t, const Conditioning&, bool) const override {
    require(x_t.cols() == sample_dim(), "sample dimension mismatch");
    const double ab = schedule_.alpha_bar[static_cast<std::size_t>(t)];
    const double sa = std::sqrt(ab);
    const MatX marginal = ab * cov_ + (1.0 - ab) * MatX::Identity(cov_.rows(), cov_.cols());
    // gain = Sigma sqrt(abar) marginal^-1, applied to row vectors.
    const MatX gain = (marginal.ldlt().solve(sa * cov_)).transpose();
    const RowMatX centred = x_t.rowwise() - sa * mean_;
    return (centred * gain.transpose()).rowwise() + mean_;
  }

 private:
  Eigen::RowVectorXd mean_;
  MatX cov_;
  NoiseSchedule schedule_;
};

}  // namespace hoisynth

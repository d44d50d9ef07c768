#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "hoisynth/core/error.hpp"
#include "hoisynth/core/types.hpp"

namespace hoisynth {

inline constexpr int kDefaultSteps = 50;

/// Variance of the reverse step x_{t-1} | x_t, x0_hat.
enum class PosteriorVariance { kBeta, kBetaTilde };

/// DDPM noise schedule; index 0 is the clean sample (alpha_bar = 1), steps
/// are 1..T.
struct NoiseSchedule {
  std::vector<double> beta;       // size T+1, beta[0] = 0
  std::vector<double> alpha;      // 1 - beta
  std::vector<double> alpha_bar;  // cumulative product, alpha_bar[0] = 1

  int steps() const { return static_cast<int>(beta.size()) - 1; }

  /// Mean coefficients of q(x_{t-1} | x_t, x0): mean = c0 * x0 + ct * x_t.
  double posterior_x0_coef(int t) const {
    return std::sqrt(alpha_bar[t - 1]) * beta[t] / (1.0 - alpha_bar[t]);
  }
  double posterior_xt_coef(int t) const {
    return std::sqrt(alpha[t]) * (1.0 - alpha_bar[t - 1]) / (1.0 - alpha_bar[t]);
  }
  double posterior_variance(int t) const { return beta[t] * (1.0 - alpha_bar[t - 1]) / (1.0 - alpha_bar[t]); }

  double reverse_variance(int t, PosteriorVariance kind) const {
    if (t <= 1) return 0.0;
    return kind == PosteriorVariance::kBeta ? beta[t] : posterior_variance(t);
  }
};

/// Linear beta from beta_1 to beta_T over T steps.
inline NoiseSchedule build_schedule(int steps, double beta_first, double beta_last) {
  require(steps >= 1, "schedule needs at least one step");
  require(beta_first > 0.0 && beta_first < 1.0 && beta_last > 0.0 && beta_last < 1.0,
          "schedule betas must lie in (0, 1)");
  NoiseSchedule s;
  s.beta.assign(static_cast<std::size_t>(steps + 1), 0.0);
  s.alpha.assign(static_cast<std::size_t>(steps + 1), 1.0);
  s.alpha_bar.assign(static_cast<std::size_t>(steps + 1), 1.0);
  for (int t = 1; t <= steps; ++t) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(t - 1) / (steps - 1);
    const auto ut = static_cast<std::size_t>(t);
    s.beta[ut] = beta_first + frac * (beta_last - beta_first);
    s.alpha[ut] = 1.0 - s.beta[ut];
    s.alpha_bar[ut] = s.alpha_bar[ut - 1] * s.alpha[ut];
  }
  return s;
}

/// The 1e-4..0.02 range defined for 1000 steps, rescaled by 1000/T so a
/// short chain still ends near pure noise. Betas are capped at 0.999.
inline NoiseSchedule default_schedule(int steps = kDefaultSteps) {
  require(steps >= 1, "schedule needs at least one step");
  const double scale = 1000.0 / steps;
  return build_schedule(steps, std::min(1e-4 * scale, 0.999), std::min(0.02 * scale, 0.999));
}

/// Forward noising x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
template <typename Derived, typename Noise>
RowMatX q_sample(const Eigen::MatrixBase<Derived>& x0, int t, const Eigen::MatrixBase<Noise>& noise,
                 const NoiseSchedule& s) {
  require(t >= 0 && t <= s.steps(), "timestep out of range");
  require(x0.rows() == noise.rows() && x0.cols() == noise.cols(), "noise shape must match the sample");
  const double ab = s.alpha_bar[static_cast<std::size_t>(t)];
  return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * noise;
}

}  // namespace hoisynth

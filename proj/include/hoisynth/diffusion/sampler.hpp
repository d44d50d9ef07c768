#pragma once

#include <cmath>
#include <functional>
#include <sstream>

#include "hoisynth/core/error.hpp"
#include "hoisynth/core/rng.hpp"
#include "hoisynth/core/types.hpp"
#include "hoisynth/diffusion/denoiser.hpp"
#include "hoisynth/diffusion/schedule.hpp"

namespace hoisynth {

inline constexpr double kDefaultGuidanceScale = 0.5;
inline constexpr double kDefaultConditionDropout = 0.5;

/// (1 + lambda) c - lambda u, written as c + lambda (c - u) so that
/// lambda = 0 and c == u both return c bit for bit.
inline RowMatX cfg_combine(const RowMatX& cond, const RowMatX& uncond, double lambda) {
  require(cond.rows() == uncond.rows() && cond.cols() == uncond.cols(), "prediction shapes differ");
  require(lambda >= 0.0, "guidance scale must be nonnegative");
  if (lambda == 0.0) return cond;
  return cond + lambda * (cond - uncond);
}

struct GuidanceConfig {
  double lambda_f = kDefaultGuidanceScale;
  bool contact_guidance = true;
  double dropout = kDefaultConditionDropout;  // training-time p_f, recorded for provenance

  void validate() const {
    require(lambda_f >= 0.0, "lambda_f must be nonnegative");
    require(dropout >= 0.0 && dropout <= 1.0, "dropout must lie in [0, 1]");
  }
};

/// Correction applied to the combined clean-sample prediction at step t.
using GuidanceHook = std::function<void(RowMatX& x0_hat, int t)>;

struct SampleOptions {
  GuidanceConfig guidance;
  PosteriorVariance variance = PosteriorVariance::kBeta;
  GuidanceHook hook;  // called only when guidance.contact_guidance is set
};

/// Ancestral sampling with clean-sample prediction. Per step: conditional
/// and unconditional predictions, CFG, optional guidance hook, then the
/// posterior step. The returned sample is the final clean prediction.
inline RowMatX sample(const Denoiser& model, const NoiseSchedule& schedule, const Conditioning& cond,
                      Eigen::Index frames, const SampleOptions& opt, std::uint64_t seed) {
  opt.guidance.validate();
  require(frames > 0, "sample needs at least one frame");
  const Eigen::Index dim = model.sample_dim();
  const bool has_contact = cond.contact.cols() > 0;
  Rng rng(seed);
  RowMatX x(frames, dim);
  rng.fill_normal(x);
  RowMatX x0;
  for (int t = schedule.steps(); t >= 1; --t) {
    const RowMatX c = model.predict(x, t, cond, has_contact);
    if (has_contact && opt.guidance.lambda_f != 0.0)
      x0 = cfg_combine(c, model.predict(x, t, cond, false), opt.guidance.lambda_f);
    else
      x0 = c;
    if (opt.guidance.contact_guidance && opt.hook) opt.hook(x0, t);
    if (!all_finite(x0)) {
      std::ostringstream msg;
      msg << "denoiser produced non-finite values at step " << t << " ("
          << (x0.array() != x0.array()).count() << " NaN of " << x0.size() << ")";
      throw NumericalError(msg.str());
    }
    if (t == 1) break;
    const double var = schedule.reverse_variance(t, opt.variance);
    RowMatX noise(frames, dim);
    rng.fill_normal(noise);
    x = schedule.posterior_x0_coef(t) * x0 + schedule.posterior_xt_coef(t) * x + std::sqrt(var) * noise;
  }
  return x0;
}

}  // namespace hoisynth

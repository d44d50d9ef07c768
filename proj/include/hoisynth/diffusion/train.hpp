#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "hoisynth/core/error.hpp"
#include "hoisynth/core/rng.hpp"
#include "hoisynth/diffusion/mlp.hpp"
#include "hoisynth/diffusion/schedule.hpp"

namespace hoisynth {

/// One normalised training sequence.
struct TrainingExample {
  RowMatX x0;
  Conditioning cond;
};

struct TrainConfig {
  int steps = 2000;
  int batch = 8;  // sequences per step
  double learning_rate = 1e-3;
  double final_lr_ratio = 0.1;  // cosine decays to this fraction of the peak
  int warmup = 50;
  double ema_decay = 0.995;
  double dropout = 0.5;  // probability of replacing contact with the null token
  double grad_clip = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    require(steps >= 0 && batch >= 1, "training needs batch >= 1 and steps >= 0");
    require(learning_rate > 0.0, "learning rate must be positive");
    require(dropout >= 0.0 && dropout <= 1.0, "dropout must lie in [0, 1]");
    require(ema_decay >= 0.0 && ema_decay < 1.0, "EMA decay must lie in [0, 1)");
  }
};

struct TrainReport {
  std::vector<double> loss;  // per step, on the sampled batch
};

namespace detail {

struct Batch {
  MatF x0, xt, object, contact;
  std::vector<int> t;
  std::vector<float> mask;
};

inline Batch make_batch(const TinyMlpDenoiser& model, const std::vector<TrainingExample>& data,
                        const std::vector<std::size_t>& pick, const NoiseSchedule& schedule, Rng& rng, double dropout) {
  const MlpShape& s = model.shape();
  Eigen::Index rows = 0;
  for (auto i : pick) rows += data[i].x0.rows();
  Batch b;
  b.x0.resize(rows, s.sample_dim);
  b.xt.resize(rows, s.sample_dim);
  b.object.resize(rows, s.object_dim);
  b.contact.resize(rows, s.contact_dim);
  Eigen::Index r = 0;
  for (auto i : pick) {
    const TrainingExample& ex = data[i];
    const Eigen::Index n = ex.x0.rows();
    const int t = rng.uniform_int(1, schedule.steps());
    const bool keep = !(rng.uniform() < dropout);
    RowMatX noise(n, s.sample_dim);
    rng.fill_normal(noise);
    b.x0.middleRows(r, n) = ex.x0.cast<float>();
    b.xt.middleRows(r, n) = q_sample(ex.x0, t, noise, schedule).cast<float>();
    if (s.object_dim > 0) b.object.middleRows(r, n) = ex.cond.object.cast<float>();
    if (s.contact_dim > 0) b.contact.middleRows(r, n) = ex.cond.contact.cast<float>();
    for (Eigen::Index k = 0; k < n; ++k) {
      b.t.push_back(t);
      b.mask.push_back(keep ? 1.0f : 0.0f);
    }
    r += n;
  }
  return b;
}

inline void check_examples(const TinyMlpDenoiser& model, const std::vector<TrainingExample>& data) {
  const MlpShape& s = model.shape();
  for (const auto& ex : data) {
    require(ex.x0.cols() == s.sample_dim && ex.x0.rows() > 0, "training sample has the wrong width");
    require(ex.cond.object.cols() == s.object_dim && (s.object_dim == 0 || ex.cond.object.rows() == ex.x0.rows()),
            "training object conditioning has the wrong shape");
    require(ex.cond.contact.cols() == s.contact_dim && (s.contact_dim == 0 || ex.cond.contact.rows() == ex.x0.rows()),
            "training contact conditioning has the wrong shape");
    require(all_finite(ex.x0), "training sample must be finite");
  }
}

}  // namespace detail

/// Adam with linear warm-up and cosine decay, global-norm clipping and an EMA
/// copy of the weights. Contact conditioning is replaced by the null token
/// per example with probability `dropout`.
inline TrainReport train_denoiser(TinyMlpDenoiser& model, const std::vector<TrainingExample>& data,
                                  const NoiseSchedule& schedule, const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw InvalidInput("training set is empty");
  detail::check_examples(model, data);
  Rng rng(cfg.seed);
  MlpParams& p = model.params();
  MlpParams& ema = model.ema();
  MlpParams m1 = p, m2 = p;
  m1.for_each([](auto& x) { x.setZero(); });
  m2.for_each([](auto& x) { x.setZero(); });
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  TrainReport rep;
  rep.loss.reserve(static_cast<std::size_t>(cfg.steps));
  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<std::size_t> pick(static_cast<std::size_t>(cfg.batch));
    for (auto& i : pick) i = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(data.size()) - 1));
    const detail::Batch b = detail::make_batch(model, data, pick, schedule, rng, cfg.dropout);
    MlpTape tape;
    const MatF out = model.forward(p, b.xt, b.t, b.object, b.contact, b.mask, &tape);
    const MatF diff = out - b.x0;
    const double numel = static_cast<double>(diff.size());
    rep.loss.push_back(static_cast<double>(diff.cast<double>().squaredNorm()) / numel);
    MlpParams g = model.backward(p, tape, (diff * static_cast<float>(2.0 / numel)).eval());

    double gnorm2 = 0.0;
    g.for_each([&](auto& x) { gnorm2 += static_cast<double>(x.template cast<double>().squaredNorm()); });
    const double gnorm = std::sqrt(gnorm2);
    if (!std::isfinite(gnorm)) throw NumericalError("non-finite gradient at training step " + std::to_string(step));
    const float clip = cfg.grad_clip > 0.0 && gnorm > cfg.grad_clip ? static_cast<float>(cfg.grad_clip / gnorm) : 1.0f;

    const double warm = cfg.warmup > 0 ? std::min(1.0, (step + 1.0) / cfg.warmup) : 1.0;
    const double progress = cfg.steps > 1 ? static_cast<double>(step) / (cfg.steps - 1) : 1.0;
    const double cosine = cfg.final_lr_ratio + (1.0 - cfg.final_lr_ratio) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
    const double lr = cfg.learning_rate * warm * cosine;
    const double c1 = 1.0 - std::pow(b1, step + 1), c2 = 1.0 - std::pow(b2, step + 1);
    const auto lr_f = static_cast<float>(lr / c1);
    const auto inv_c2 = static_cast<float>(1.0 / c2);

    // Walk the parameter, gradient and moment tensors in lockstep.
    std::vector<float*> pp, gg, mm, vv, ee;
    std::vector<Eigen::Index> sizes;
    p.for_each([&](auto& x) { pp.push_back(x.data()); sizes.push_back(x.size()); });
    g.for_each([&](auto& x) { gg.push_back(x.data()); });
    m1.for_each([&](auto& x) { mm.push_back(x.data()); });
    m2.for_each([&](auto& x) { vv.push_back(x.data()); });
    ema.for_each([&](auto& x) { ee.push_back(x.data()); });
    const auto decay = static_cast<float>(cfg.ema_decay);
    for (std::size_t k = 0; k < pp.size(); ++k) {
      for (Eigen::Index i = 0; i < sizes[k]; ++i) {
        const float gi = gg[k][i] * clip;
        mm[k][i] = static_cast<float>(b1) * mm[k][i] + static_cast<float>(1.0 - b1) * gi;
        vv[k][i] = static_cast<float>(b2) * vv[k][i] + static_cast<float>(1.0 - b2) * gi * gi;
        pp[k][i] -= lr_f * mm[k][i] / (std::sqrt(vv[k][i] * inv_c2) + static_cast<float>(eps));
        ee[k][i] = decay * ee[k][i] + (1.0f - decay) * pp[k][i];
      }
    }
  }
  model.set_trained_steps(model.trained_steps() + cfg.steps);
  return rep;
}

/// Clean-sample MSE of a weight set on fixed draws (contact kept, no
/// smoothing), for comparing raw and EMA weights on held-out data.
inline double evaluate_mse(const TinyMlpDenoiser& model, const MlpParams& params,
                           const std::vector<TrainingExample>& data, const NoiseSchedule& schedule,
                           std::uint64_t seed, int repeats = 4) {
  if (data.empty()) throw InvalidInput("evaluation set is empty");
  detail::check_examples(model, data);
  Rng rng(seed);
  double total = 0.0, count = 0.0;
  for (int rep = 0; rep < repeats; ++rep) {
    for (std::size_t i = 0; i < data.size(); ++i) {
      const detail::Batch b = detail::make_batch(model, data, {i}, schedule, rng, 0.0);
      const MatF out = model.forward(params, b.xt, b.t, b.object, b.contact, b.mask);
      total += (out - b.x0).cast<double>().squaredNorm();
      count += static_cast<double>(out.size());
    }
  }
  return total / count;
}

}  // namespace hoisynth

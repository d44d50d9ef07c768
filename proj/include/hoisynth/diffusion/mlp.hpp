#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "hoisynth/core/container.hpp"
#include "hoisynth/core/error.hpp"
#include "hoisynth/core/rng.hpp"
#include "hoisynth/core/types.hpp"
#include "hoisynth/diffusion/denoiser.hpp"
#include "hoisynth/diffusion/schedule.hpp"

namespace hoisynth {

using MatF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVecF = Eigen::Matrix<float, 1, Eigen::Dynamic>;

struct MlpShape {
  Eigen::Index sample_dim = 0;
  Eigen::Index object_dim = 0;
  Eigen::Index contact_dim = 0;
  int hidden = 512;
  int time_dim = 32;
  int smooth_window = 5;  // odd; 1 disables inference-time smoothing

  Eigen::Index input_dim() const { return sample_dim + time_dim + object_dim; }
};

/// Weights of the two-hidden-layer network. The null token doubles as the
/// first-layer bias: the contact path adds W_c c on top of it, so a model
/// that never sees contact (W_c stays at its zero init) predicts the same
/// with and without contact.
struct MlpParams {
  MatF w1, w2, w3, wc;
  RowVecF null_token, b2, b3;

  template <typename F>
  void for_each(F&& f) {
    f(w1);
    f(w2);
    f(w3);
    f(wc);
    f(null_token);
    f(b2);
    f(b3);
  }
  template <typename F>
  void for_each_pair(MlpParams& o, F&& f) {
    f(w1, o.w1);
    f(w2, o.w2);
    f(w3, o.w3);
    f(wc, o.wc);
    f(null_token, o.null_token);
    f(b2, o.b2);
    f(b3, o.b3);
  }
};

namespace detail {

inline MatF time_embedding(const std::vector<int>& t, int dim) {
  MatF e(static_cast<Eigen::Index>(t.size()), dim);
  const int half = dim / 2;
  for (std::size_t r = 0; r < t.size(); ++r) {
    for (int k = 0; k < half; ++k) {
      const double freq = std::exp(-std::log(1000.0) * k / std::max(half, 1));
      e(static_cast<Eigen::Index>(r), k) = static_cast<float>(std::sin(t[r] * freq));
      e(static_cast<Eigen::Index>(r), half + k) = static_cast<float>(std::cos(t[r] * freq));
    }
  }
  return e;
}

inline float silu(float z) { return z / (1.0f + std::exp(-z)); }
inline float silu_grad(float z) {
  const float s = 1.0f / (1.0f + std::exp(-z));
  return s * (1.0f + z * (1.0f - s));
}

}  // namespace detail

/// Activations kept for the backward pass.
struct MlpTape {
  MatF input, contact, z1, a1, z2, a2;
  std::vector<float> mask;
};

/// Per-frame MLP [in, H, H, out] with SiLU and a sinusoidal timestep
/// embedding; predictions are smoothed over time at inference.
class TinyMlpDenoiser final : public Denoiser {
 public:
  TinyMlpDenoiser() = default;

  TinyMlpDenoiser(const MlpShape& shape, std::uint64_t seed) : shape_(shape) {
    require(shape.sample_dim > 0 && shape.hidden > 0 && shape.time_dim >= 0, "invalid network shape");
    require(shape.smooth_window >= 1 && shape.smooth_window % 2 == 1, "smoothing window must be odd");
    Rng rng(seed);
    const auto init = [&](Eigen::Index rows, Eigen::Index cols, double gain) {
      MatF m(rows, cols);
      const double sd = gain / std::sqrt(static_cast<double>(std::max<Eigen::Index>(rows, 1)));
      for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = static_cast<float>(sd * rng.normal());
      return m;
    };
    params_.w1 = init(shape.input_dim(), shape.hidden, 1.0);
    params_.w2 = init(shape.hidden, shape.hidden, 1.0);
    params_.w3 = init(shape.hidden, shape.sample_dim, 0.5);
    params_.wc = MatF::Zero(shape.contact_dim, shape.hidden);
    params_.null_token = RowVecF::Zero(shape.hidden);
    params_.b2 = RowVecF::Zero(shape.hidden);
    params_.b3 = RowVecF::Zero(shape.sample_dim);
    ema_ = params_;
  }

  const MlpShape& shape() const { return shape_; }
  Eigen::Index sample_dim() const override { return shape_.sample_dim; }
  MlpParams& params() { return params_; }
  const MlpParams& params() const { return params_; }
  MlpParams& ema() { return ema_; }
  const MlpParams& ema() const { return ema_; }
  void use_ema(bool on) { use_ema_ = on; }
  bool using_ema() const { return use_ema_; }
  long trained_steps() const { return trained_steps_; }
  void set_trained_steps(long s) { trained_steps_ = s; }

  /// Raw network output for rows with individual timesteps and contact masks.
  MatF forward(const MlpParams& p, const MatF& x, const std::vector<int>& t, const MatF& object,
               const MatF& contact, const std::vector<float>& mask, MlpTape* tape = nullptr) const {
    const Eigen::Index b = x.rows();
    MatF input(b, shape_.input_dim());
    input.leftCols(shape_.sample_dim) = x;
    if (shape_.time_dim > 0) input.middleCols(shape_.sample_dim, shape_.time_dim) = detail::time_embedding(t, shape_.time_dim);
    if (shape_.object_dim > 0) input.rightCols(shape_.object_dim) = object;
    MatF z1 = input * p.w1;
    z1.rowwise() += p.null_token;
    MatF masked;
    if (shape_.contact_dim > 0) {
      masked = contact;
      for (Eigen::Index r = 0; r < b; ++r) masked.row(r) *= mask[static_cast<std::size_t>(r)];
      z1.noalias() += masked * p.wc;
    }
    MatF a1 = z1.unaryExpr([](float v) { return detail::silu(v); });
    MatF z2 = a1 * p.w2;
    z2.rowwise() += p.b2;
    MatF a2 = z2.unaryExpr([](float v) { return detail::silu(v); });
    MatF out = a2 * p.w3;
    out.rowwise() += p.b3;
    if (tape) {
      tape->input = std::move(input);
      tape->contact = std::move(masked);
      tape->z1 = std::move(z1);
      tape->a1 = std::move(a1);
      tape->z2 = std::move(z2);
      tape->a2 = std::move(a2);
    }
    return out;
  }

  /// Gradients of the loss given d loss / d output.
  MlpParams backward(const MlpParams& p, const MlpTape& tape, const MatF& grad_out) const {
    MlpParams g;
    g.w3.noalias() = tape.a2.transpose() * grad_out;
    g.b3 = grad_out.colwise().sum();
    MatF gz2 = (grad_out * p.w3.transpose()).cwiseProduct(tape.z2.unaryExpr([](float v) { return detail::silu_grad(v); }));
    g.w2.noalias() = tape.a1.transpose() * gz2;
    g.b2 = gz2.colwise().sum();
    MatF gz1 = (gz2 * p.w2.transpose()).cwiseProduct(tape.z1.unaryExpr([](float v) { return detail::silu_grad(v); }));
    g.w1.noalias() = tape.input.transpose() * gz1;
    g.null_token = gz1.colwise().sum();
    if (shape_.contact_dim > 0)
      g.wc.noalias() = tape.contact.transpose() * gz1;
    else
      g.wc = MatF::Zero(0, shape_.hidden);
    return g;
  }

  RowMatX predict(const RowMatX& x_t, int t, const Conditioning& cond, bool use_contact) const override {
    require(x_t.cols() == shape_.sample_dim, "sample dimension mismatch");
    require(cond.object.cols() == shape_.object_dim && (shape_.object_dim == 0 || cond.object.rows() == x_t.rows()),
            "object conditioning does not match the network");
    const bool contact = use_contact && shape_.contact_dim > 0;
    if (contact)
      require(cond.contact.cols() == shape_.contact_dim && cond.contact.rows() == x_t.rows(),
              "contact conditioning does not match the network");
    const Eigen::Index n = x_t.rows();
    const MatF c = contact ? MatF(cond.contact.cast<float>()) : MatF::Zero(n, shape_.contact_dim);
    const MatF raw = forward(use_ema_ ? ema_ : params_, x_t.cast<float>(), std::vector<int>(static_cast<std::size_t>(n), t),
                             cond.object.cast<float>(), c, std::vector<float>(static_cast<std::size_t>(n), contact ? 1.0f : 0.0f));
    return smooth(raw.cast<double>(), shape_.smooth_window);
  }

  /// Centred moving average over frames, window shrunk at the ends.
  static RowMatX smooth(const RowMatX& x, int window) {
    if (window <= 1 || x.rows() <= 1) return x;
    const Eigen::Index half = window / 2;
    RowMatX out(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const Eigen::Index lo = std::max<Eigen::Index>(0, i - half);
      const Eigen::Index hi = std::min<Eigen::Index>(x.rows() - 1, i + half);
      out.row(i) = x.middleRows(lo, hi - lo + 1).colwise().mean();
    }
    return out;
  }

  void write_to(Container& c, const std::string& prefix) const {
    c.meta[prefix] = {{"sample_dim", shape_.sample_dim}, {"object_dim", shape_.object_dim},
                      {"contact_dim", shape_.contact_dim}, {"hidden", shape_.hidden},
                      {"time_dim", shape_.time_dim}, {"smooth_window", shape_.smooth_window},
                      {"trained_steps", trained_steps_}};
    const auto put = [&](const std::string& name, const auto& m) {
      const RowMatX d = m.template cast<double>();
      c.put(prefix + "." + name, DType::kF32, {static_cast<std::int64_t>(d.rows()), static_cast<std::int64_t>(d.cols())}, d.data());
    };
    for (const auto& [tag, p] : {std::pair<std::string, const MlpParams*>{"raw", &params_}, {"ema", &ema_}}) {
      put(tag + ".w1", p->w1);
      put(tag + ".w2", p->w2);
      put(tag + ".w3", p->w3);
      put(tag + ".wc", p->wc);
      put(tag + ".null", p->null_token);
      put(tag + ".b2", p->b2);
      put(tag + ".b3", p->b3);
    }
  }

  static TinyMlpDenoiser read_from(const Container& c, const std::string& prefix) {
    if (!c.meta.contains(prefix)) throw FormatError("checkpoint has no network '" + prefix + "'");
    const auto& m = c.meta.at(prefix);
    TinyMlpDenoiser net;
    net.shape_.sample_dim = m.at("sample_dim").get<Eigen::Index>();
    net.shape_.object_dim = m.at("object_dim").get<Eigen::Index>();
    net.shape_.contact_dim = m.at("contact_dim").get<Eigen::Index>();
    net.shape_.hidden = m.at("hidden").get<int>();
    net.shape_.time_dim = m.at("time_dim").get<int>();
    net.shape_.smooth_window = m.at("smooth_window").get<int>();
    net.trained_steps_ = m.value("trained_steps", 0L);
    const auto get = [&](const std::string& name, Eigen::Index rows, Eigen::Index cols) {
      const std::string key = prefix + "." + name;
      const auto shape = c.shape(key);
      if (shape.size() != 2 || shape[0] != rows || shape[1] != cols)
        throw FormatError("checkpoint array '" + key + "' has the wrong shape");
      return MatF(c.matrix(key).cast<float>());
    };
    const MlpShape& s = net.shape_;
    for (auto [tag, p] : {std::pair<std::string, MlpParams*>{"raw", &net.params_}, {"ema", &net.ema_}}) {
      p->w1 = get(tag + ".w1", s.input_dim(), s.hidden);
      p->w2 = get(tag + ".w2", s.hidden, s.hidden);
      p->w3 = get(tag + ".w3", s.hidden, s.sample_dim);
      p->wc = get(tag + ".wc", s.contact_dim, s.hidden);
      p->null_token = get(tag + ".null", 1, s.hidden);
      p->b2 = get(tag + ".b2", 1, s.hidden);
      p->b3 = get(tag + ".b3", 1, s.sample_dim);
    }
    return net;
  }

 private:
  MlpShape shape_;
  MlpParams params_;
  MlpParams ema_;
  bool use_ema_ = true;
  long trained_steps_ = 0;
};

}  // namespace hoisynth

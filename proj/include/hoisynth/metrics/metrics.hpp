#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hoisynth/contact/contact_map.hpp"
#include "hoisynth/core/error.hpp"
#include "hoisynth/core/types.hpp"
#include "hoisynth/geometry/frame_objects.hpp"

namespace hoisynth {

inline constexpr double kDefaultContactEps = 0.005;
inline constexpr double kArticulationChange = 1e-3;
inline constexpr double kDefaultFps = 30.0;

/// Dense hand surfaces over a sequence: hands[h][i] is the V x 3 surface of
/// hand h at frame i, canonical object frame, metres.
struct SurfaceMotion {
  std::vector<std::vector<Points>> hands;

  std::size_t frames() const { return hands.empty() ? 0 : hands.front().size(); }

  void validate() const {
    require(!hands.empty() && frames() > 0, "motion has no frames");
    for (const auto& h : hands) {
      require(h.size() == frames(), "hands differ in frame count");
      for (const auto& f : h) {
        require(f.rows() == h.front().rows(), "vertex count changes over the sequence");
        require(all_finite(f), "motion contains non-finite vertices");
      }
    }
  }
};

/// Mean over sample pairs of the mean per-vertex distance, in cm. Pair
/// distances are summed in sorted order so the result does not depend on
/// the order of `samples`.
inline double multimodality(const std::vector<SurfaceMotion>& samples) {
  require(samples.size() >= 2, "multimodality needs at least two samples");
  for (const auto& s : samples) {
    s.validate();
    require(s.hands.size() == samples[0].hands.size() && s.frames() == samples[0].frames(),
            "samples differ in layout");
    for (std::size_t h = 0; h < s.hands.size(); ++h)
      require(s.hands[h][0].rows() == samples[0].hands[h][0].rows(), "samples differ in vertex count");
  }
  std::vector<double> pair;
  for (std::size_t a = 0; a < samples.size(); ++a) {
    for (std::size_t b = a + 1; b < samples.size(); ++b) {
      double sum = 0.0;
      std::size_t n = 0;
      for (std::size_t h = 0; h < samples[a].hands.size(); ++h)
        for (std::size_t i = 0; i < samples[a].frames(); ++i) {
          sum += (samples[a].hands[h][i] - samples[b].hands[h][i]).rowwise().norm().sum();
          n += static_cast<std::size_t>(samples[a].hands[h][i].rows());
        }
      pair.push_back(sum / static_cast<double>(n));
    }
  }
  std::sort(pair.begin(), pair.end());
  double total = 0.0;
  for (double d : pair) total += d;
  return 100.0 * total / static_cast<double>(pair.size());
}

/// Mean second-difference magnitude of hand vertices times fps^2, cm/s^2.
inline double accel(const SurfaceMotion& m, double fps = kDefaultFps) {
  m.validate();
  require(fps > 0.0 && std::isfinite(fps), "frame rate must be positive");
  if (m.frames() < 3) return 0.0;
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& h : m.hands)
    for (std::size_t i = 2; i < h.size(); ++i) {
      sum += (h[i] - 2.0 * h[i - 1] + h[i - 2]).rowwise().norm().sum();
      n += static_cast<std::size_t>(h[i].rows());
    }
  return 100.0 * fps * fps * sum / static_cast<double>(n);
}

namespace detail {

inline void check_motion_frames(const SurfaceMotion& m, const FrameObjects& obj) {
  m.validate();
  require(m.frames() == obj.size(), "motion frames differ from the object trajectory");
}

inline double percent(std::size_t hit, std::size_t total) {
  return 100.0 * static_cast<double>(hit) / static_cast<double>(total);
}

}  // namespace detail

/// Some vertex lies inside the object at least `threshold` deep (depth =
/// distance to the nearest object vertex).
inline bool frame_penetrates(const SurfaceMotion& m, const FrameObjects& obj, std::size_t i, double threshold) {
  for (const auto& h : m.hands)
    for (Eigen::Index v = 0; v < h[i].rows(); ++v) {
      const Vec3 p = h[i].row(v).transpose();
      if (obj[i].inside(p) && obj[i].nearest(p).distance >= threshold) return true;
    }
  return false;
}

/// Percent of frames that penetrate.
inline double pen_pct(const SurfaceMotion& m, const FrameObjects& obj, double threshold) {
  detail::check_motion_frames(m, obj);
  require(threshold >= 0.0, "penetration threshold must be nonnegative");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < m.frames(); ++i) hit += frame_penetrates(m, obj, i, threshold) ? 1 : 0;
  return detail::percent(hit, m.frames());
}

/// A vertex touches when it lies inside or within `eps` of an object vertex.
inline bool frame_in_contact(const SurfaceMotion& m, const FrameObjects& obj, std::size_t i, double eps) {
  for (const auto& h : m.hands)
    for (Eigen::Index v = 0; v < h[i].rows(); ++v) {
      const Vec3 p = h[i].row(v).transpose();
      if (obj[i].inside(p) || obj[i].nearest(p).distance <= eps) return true;
    }
  return false;
}

inline bool frame_touches_top(const SurfaceMotion& m, const FrameObjects& obj, std::size_t i, double eps) {
  for (const auto& h : m.hands)
    for (Eigen::Index v = 0; v < h[i].rows(); ++v) {
      const Vec3 p = h[i].row(v).transpose();
      if (obj[i].inside_part(Part::kTop, p) || obj[i].nearest_top(p).distance <= eps) return true;
    }
  return false;
}

/// Frames where any hand touches the object, percent.
inline double con_pct(const SurfaceMotion& m, const FrameObjects& obj, double eps = kDefaultContactEps) {
  detail::check_motion_frames(m, obj);
  require(eps >= 0.0, "contact threshold must be nonnegative");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < m.frames(); ++i) hit += frame_in_contact(m, obj, i, eps) ? 1 : 0;
  return detail::percent(hit, m.frames());
}

struct ArtResult {
  double pct = 100.0;
  bool undefined = true;  // no frame changed articulation; pct is 100 by convention
  std::size_t frames = 0;  // frames with an articulation change
};

/// Among frames whose angle differs from the previous frame by more than
/// kArticulationChange, percent where a hand touches the top part.
inline ArtResult art_pct(const SurfaceMotion& m, const FrameObjects& obj, const std::vector<double>& angles,
                         double eps = kDefaultContactEps) {
  detail::check_motion_frames(m, obj);
  require(angles.size() == m.frames(), "angle count differs from motion frames");
  ArtResult r;
  std::size_t hit = 0;
  for (std::size_t i = 1; i < angles.size(); ++i) {
    if (std::abs(angles[i] - angles[i - 1]) <= kArticulationChange) continue;
    ++r.frames;
    hit += frame_touches_top(m, obj, i, eps) ? 1 : 0;
  }
  if (r.frames == 0) return r;
  r.undefined = false;
  r.pct = detail::percent(hit, r.frames);
  return r;
}

/// Mean over hands, frames and anchors of | |derived| - |predicted| |, cm.
inline double cm_l1(const std::vector<ContactFrames>& derived, const std::vector<ContactFrames>& predicted) {
  require(derived.size() == predicted.size() && !derived.empty(), "contact maps differ in hand count");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t h = 0; h < derived.size(); ++h) {
    require(derived[h].size() == predicted[h].size() && !derived[h].empty(), "contact maps differ in frame count");
    for (std::size_t i = 0; i < derived[h].size(); ++i) {
      require(derived[h][i].rows() == predicted[h][i].rows(), "contact maps differ in anchor count");
      sum += (contact_norms(derived[h][i]) - contact_norms(predicted[h][i])).cwiseAbs().sum();
      n += static_cast<std::size_t>(derived[h][i].rows());
    }
  }
  require(n > 0, "contact maps are empty");
  return 100.0 * sum / static_cast<double>(n);
}

struct MetricsConfig {
  double fps = kDefaultFps;
  double contact_eps = kDefaultContactEps;
};

/// One row of the evaluation table. Mul needs several samples and CM a
/// predicted contact map; either may be absent.
struct MetricsReport {
  std::string sequence;
  std::optional<double> mul;
  double accel = 0.0;
  double pen_1cm = 0.0;
  double pen_5mm = 0.0;
  double con = 0.0;
  double art = 100.0;
  bool art_undefined = true;
  std::optional<double> cm;
  double fps = kDefaultFps;
  std::size_t samples = 0;

  void validate() const {
    for (double p : {pen_1cm, pen_5mm, con, art})
      require(std::isfinite(p) && p >= 0.0 && p <= 100.0, "percentage outside [0, 100]");
    require(std::isfinite(accel) && accel >= 0.0, "acceleration must be finite and nonnegative");
    require(!mul || (std::isfinite(*mul) && *mul >= 0.0), "multimodality must be finite");
    require(!cm || (std::isfinite(*cm) && *cm >= 0.0), "contact-map error must be finite");
  }

  static std::string csv_header() {
    return "sequence,Mul (cm),Accel (cm/s^2),Pen 1cm (%),Pen 5mm (%),Con (%),Art (%),CM (cm)";
  }

  std::string csv_row() const {
    std::ostringstream os;
    os << std::setprecision(8) << sequence << ',';
    if (mul) os << *mul;
    os << ',' << accel << ',' << pen_1cm << ',' << pen_5mm << ',' << con << ',' << art << ',';
    if (cm) os << *cm;
    return os.str();
  }

  nlohmann::json to_json() const {
    nlohmann::json j{{"sequence", sequence},     {"mul_cm", nullptr},         {"accel_cm_s2", accel},
                     {"pen_1cm_pct", pen_1cm},   {"pen_5mm_pct", pen_5mm},    {"con_pct", con},
                     {"art_pct", art},           {"art_undefined", art_undefined}, {"cm_l1_cm", nullptr},
                     {"fps", fps},               {"samples", samples}};
    if (mul) j["mul_cm"] = *mul;
    if (cm) j["cm_l1_cm"] = *cm;
    return j;
  }

  static MetricsReport from_json(const nlohmann::json& j) {
    MetricsReport r;
    r.sequence = j.at("sequence").get<std::string>();
    if (!j.at("mul_cm").is_null()) r.mul = j["mul_cm"].get<double>();
    r.accel = j.at("accel_cm_s2").get<double>();
    r.pen_1cm = j.at("pen_1cm_pct").get<double>();
    r.pen_5mm = j.at("pen_5mm_pct").get<double>();
    r.con = j.at("con_pct").get<double>();
    r.art = j.at("art_pct").get<double>();
    r.art_undefined = j.at("art_undefined").get<bool>();
    if (!j.at("cm_l1_cm").is_null()) r.cm = j["cm_l1_cm"].get<double>();
    r.fps = j.at("fps").get<double>();
    r.samples = j.at("samples").get<std::size_t>();
    return r;
  }
};

/// Metrics of one trajectory. Per-sample quantities are averaged over
/// `samples`; `derived`/`predicted` (one entry per sample) give CM.
inline MetricsReport evaluate_metrics(const std::vector<SurfaceMotion>& samples, const FrameObjects& obj,
                                      const std::vector<double>& angles, const MetricsConfig& cfg = {},
                                      const std::vector<std::vector<ContactFrames>>* derived = nullptr,
                                      const std::vector<std::vector<ContactFrames>>* predicted = nullptr) {
  require(!samples.empty(), "metrics need at least one sample");
  require((derived == nullptr) == (predicted == nullptr), "CM needs both derived and predicted contact maps");
  MetricsReport r;
  r.fps = cfg.fps;
  r.samples = samples.size();
  std::size_t art_defined = 0;
  double art_sum = 0.0;
  for (const auto& s : samples) {
    r.accel += accel(s, cfg.fps);
    r.pen_1cm += pen_pct(s, obj, 0.01);
    r.pen_5mm += pen_pct(s, obj, 0.005);
    r.con += con_pct(s, obj, cfg.contact_eps);
    const ArtResult a = art_pct(s, obj, angles, cfg.contact_eps);
    if (!a.undefined) {
      ++art_defined;
      art_sum += a.pct;
    }
  }
  const double n = static_cast<double>(samples.size());
  r.accel /= n;
  r.pen_1cm /= n;
  r.pen_5mm /= n;
  r.con /= n;
  r.art_undefined = art_defined == 0;
  r.art = r.art_undefined ? 100.0 : art_sum / static_cast<double>(art_defined);
  if (samples.size() >= 2) r.mul = multimodality(samples);
  if (derived) {
    require(derived->size() == samples.size() && predicted->size() == samples.size(),
            "one contact map per sample required");
    double sum = 0.0;
    for (std::size_t k = 0; k < samples.size(); ++k) sum += cm_l1((*derived)[k], (*predicted)[k]);
    r.cm = sum / n;
  }
  r.validate();
  return r;
}

/// Unweighted mean over sequences; Art averages only defined rows.
inline MetricsReport average_reports(const std::vector<MetricsReport>& rows, const std::string& name = "mean") {
  require(!rows.empty(), "no metrics rows to average");
  MetricsReport r;
  r.sequence = name;
  r.fps = rows.front().fps;
  const double n = static_cast<double>(rows.size());
  double mul = 0.0, cm = 0.0, art = 0.0;
  std::size_t n_mul = 0, n_cm = 0, n_art = 0;
  for (const auto& x : rows) {
    r.accel += x.accel;
    r.pen_1cm += x.pen_1cm;
    r.pen_5mm += x.pen_5mm;
    r.con += x.con;
    r.samples += x.samples;
    if (x.mul) mul += *x.mul, ++n_mul;
    if (x.cm) cm += *x.cm, ++n_cm;
    if (!x.art_undefined) art += x.art, ++n_art;
  }
  r.accel /= n;
  r.pen_1cm = std::min(r.pen_1cm / n, 100.0);
  r.pen_5mm = std::min(r.pen_5mm / n, 100.0);
  r.con = std::min(r.con / n, 100.0);
  if (n_mul) r.mul = mul / static_cast<double>(n_mul);
  if (n_cm) r.cm = cm / static_cast<double>(n_cm);
  r.art_undefined = n_art == 0;
  r.art = n_art ? art / static_cast<double>(n_art) : 100.0;
  return r;
}

inline constexpr int kMetricsVersion = 1;

inline nlohmann::json metrics_document(const std::vector<MetricsReport>& rows, const MetricsConfig& cfg) {
  nlohmann::json j;
  j["version"] = kMetricsVersion;
  j["contact_eps_m"] = cfg.contact_eps;
  j["fps"] = cfg.fps;
  j["sequences"] = nlohmann::json::array();
  for (const auto& r : rows) j["sequences"].push_back(r.to_json());
  j["mean"] = average_reports(rows).to_json();
  return j;
}

inline std::string metrics_csv(const std::vector<MetricsReport>& rows) {
  std::string out = MetricsReport::csv_header() + "\n";
  for (const auto& r : rows) out += r.csv_row() + "\n";
  out += average_reports(rows).csv_row() + "\n";
  return out;
}

}  // namespace hoisynth

#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "hoisynth/core/error.hpp"
#include "hoisynth/core/hash.hpp"
#include "hoisynth/diffusion/sampler.hpp"
#include "hoisynth/diffusion/train.hpp"
#include "hoisynth/features/bps.hpp"
#include "hoisynth/features/scale.hpp"
#include "hoisynth/hand/model.hpp"
#include "hoisynth/metrics/metrics.hpp"
#include "hoisynth/refine/refine.hpp"

namespace hoisynth {

/// Every knob of a pipeline run. JSON form mirrors the member layout; keys
/// that are not listed here are rejected so typos do not pass silently.
struct PipelineConfig {
  // features
  BpsVariant variant = BpsVariant::kNormalizedPart;
  int basis_per_part = kDefaultBasisPerPart;
  std::uint64_t basis_seed = 0;
  double margin = kDefaultMargin;
  int keypoints = kDefaultKeypoints;

  // diffusion
  int diffusion_steps = kDefaultSteps;
  int hidden = 512;
  int time_dim = 32;
  int smooth_window = 5;
  PosteriorVariance variance = PosteriorVariance::kBeta;
  GuidanceConfig guidance;
  bool use_contact = true;

  TrainConfig train;

  bool refine_enabled = true;
  RefineConfig refine;

  MetricsConfig metrics;
  int samples = 1;  // motions drawn per trajectory
  std::uint64_t seed = 0;

  void validate() const {
    require(basis_per_part >= 1, "basis_per_part must be at least 1");
    require(margin >= 0.0 && margin < 1.0, "margin must lie in [0, 1)");
    require(keypoints >= 1, "keypoint count must be at least 1");
    require(diffusion_steps >= 1, "diffusion needs at least one step");
    require(hidden >= 1 && time_dim >= 0 && smooth_window >= 1 && smooth_window % 2 == 1,
            "network shape is invalid (smooth_window must be odd)");
    guidance.validate();
    train.validate();
    refine.validate();
    require(metrics.fps > 0.0 && metrics.contact_eps >= 0.0, "metrics fps and contact_eps must be positive");
    require(samples >= 1, "samples must be at least 1");
  }

  nlohmann::json to_json() const {
    return {
        {"features",
         {{"variant", variant_name(variant)},
          {"basis_per_part", basis_per_part},
          {"basis_seed", basis_seed},
          {"margin", margin},
          {"keypoints", keypoints}}},
        {"diffusion",
         {{"steps", diffusion_steps},
          {"hidden", hidden},
          {"time_dim", time_dim},
          {"smooth_window", smooth_window},
          {"variance", variance == PosteriorVariance::kBeta ? "beta" : "beta_tilde"}}},
        {"guidance",
         {{"lambda_f", guidance.lambda_f},
          {"contact_guidance", guidance.contact_guidance},
          {"dropout", guidance.dropout},
          {"use_contact", use_contact}}},
        {"train",
         {{"steps", train.steps},
          {"batch", train.batch},
          {"learning_rate", train.learning_rate},
          {"final_lr_ratio", train.final_lr_ratio},
          {"warmup", train.warmup},
          {"ema_decay", train.ema_decay},
          {"grad_clip", train.grad_clip}}},
        {"refine",
         {{"enabled", refine_enabled},
          {"w_proj", refine.w_proj},
          {"w_pen", refine.w_pen},
          {"w_acc", refine.w_acc},
          {"iterations", refine.iterations},
          {"step_size", refine.step_size},
          {"divergence_factor", refine.divergence_factor},
          {"max_backtracks", refine.max_backtracks}}},
        {"metrics", {{"fps", metrics.fps}, {"contact_eps", metrics.contact_eps}}},
        {"samples", samples},
        {"seed", seed},
    };
  }

  /// Overlay `j` onto the current values.
  void merge_json(const nlohmann::json& j) {
    require(j.is_object(), "config must be a JSON object");
    const auto section = [&](const char* name, std::initializer_list<const char*> keys) -> const nlohmann::json* {
      if (!j.contains(name)) return nullptr;
      const auto& s = j.at(name);
      require(s.is_object(), std::string("config section '") + name + "' must be an object");
      const std::set<std::string> allowed(keys.begin(), keys.end());
      for (const auto& [k, v] : s.items())
        require(allowed.count(k) > 0, std::string("unknown config key '") + name + "." + k + "'");
      return &s;
    };
    const std::set<std::string> top = {"features", "diffusion", "guidance", "train", "refine", "metrics", "samples", "seed"};
    for (const auto& [k, v] : j.items()) require(top.count(k) > 0, "unknown config key '" + k + "'");

    try {
      if (const auto* s = section("features", {"variant", "basis_per_part", "basis_seed", "margin", "keypoints"})) {
        if (s->contains("variant")) variant = parse_variant(s->at("variant").get<std::string>());
        basis_per_part = s->value("basis_per_part", basis_per_part);
        basis_seed = s->value("basis_seed", basis_seed);
        margin = s->value("margin", margin);
        keypoints = s->value("keypoints", keypoints);
      }
      if (const auto* s = section("diffusion", {"steps", "hidden", "time_dim", "smooth_window", "variance"})) {
        diffusion_steps = s->value("steps", diffusion_steps);
        hidden = s->value("hidden", hidden);
        time_dim = s->value("time_dim", time_dim);
        smooth_window = s->value("smooth_window", smooth_window);
        if (s->contains("variance")) {
          const auto v = s->at("variance").get<std::string>();
          require(v == "beta" || v == "beta_tilde", "diffusion.variance must be 'beta' or 'beta_tilde'");
          variance = v == "beta" ? PosteriorVariance::kBeta : PosteriorVariance::kBetaTilde;
        }
      }
      if (const auto* s = section("guidance", {"lambda_f", "contact_guidance", "dropout", "use_contact"})) {
        guidance.lambda_f = s->value("lambda_f", guidance.lambda_f);
        guidance.contact_guidance = s->value("contact_guidance", guidance.contact_guidance);
        guidance.dropout = s->value("dropout", guidance.dropout);
        use_contact = s->value("use_contact", use_contact);
      }
      if (const auto* s = section("train", {"steps", "batch", "learning_rate", "final_lr_ratio", "warmup", "ema_decay",
                                            "grad_clip"})) {
        train.steps = s->value("steps", train.steps);
        train.batch = s->value("batch", train.batch);
        train.learning_rate = s->value("learning_rate", train.learning_rate);
        train.final_lr_ratio = s->value("final_lr_ratio", train.final_lr_ratio);
        train.warmup = s->value("warmup", train.warmup);
        train.ema_decay = s->value("ema_decay", train.ema_decay);
        train.grad_clip = s->value("grad_clip", train.grad_clip);
      }
      if (const auto* s = section("refine", {"enabled", "w_proj", "w_pen", "w_acc", "iterations", "step_size",
                                             "divergence_factor", "max_backtracks"})) {
        refine_enabled = s->value("enabled", refine_enabled);
        refine.w_proj = s->value("w_proj", refine.w_proj);
        refine.w_pen = s->value("w_pen", refine.w_pen);
        refine.w_acc = s->value("w_acc", refine.w_acc);
        refine.iterations = s->value("iterations", refine.iterations);
        refine.step_size = s->value("step_size", refine.step_size);
        refine.divergence_factor = s->value("divergence_factor", refine.divergence_factor);
        refine.max_backtracks = s->value("max_backtracks", refine.max_backtracks);
      }
      if (const auto* s = section("metrics", {"fps", "contact_eps"})) {
        metrics.fps = s->value("fps", metrics.fps);
        metrics.contact_eps = s->value("contact_eps", metrics.contact_eps);
      }
      samples = j.value("samples", samples);
      seed = j.value("seed", seed);
    } catch (const nlohmann::json::exception& e) {
      throw InvalidInput(std::string("config value has the wrong type: ") + e.what());
    }
    train.dropout = guidance.dropout;
  }

  static PipelineConfig from_json(const nlohmann::json& j) {
    PipelineConfig c;
    c.merge_json(j);
    c.validate();
    return c;
  }

  /// FNV-1a of the canonical JSON dump; recorded in run manifests.
  std::string hash() const { return Fnv1a().add(to_json().dump()).hex(); }
};

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return PipelineConfig::from_json(j);
}

/// "w_proj,w_pen,w_acc" as used on the command line.
inline void parse_weights(const std::string& s, RefineConfig& cfg) {
  std::stringstream ss(s);
  std::string item;
  std::vector<double> w;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      w.push_back(std::stod(item, &used));
      require(used == item.size(), "");
    } catch (const std::exception&) {
      throw InvalidInput("weights must be three numbers 'w_proj,w_pen,w_acc', got '" + s + "'");
    }
  }
  require(w.size() == 3, "weights must be three numbers 'w_proj,w_pen,w_acc', got '" + s + "'");
  cfg.w_proj = w[0];
  cfg.w_pen = w[1];
  cfg.w_acc = w[2];
  cfg.validate();
}

}  // namespace hoisynth

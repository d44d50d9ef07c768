#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hoisynth/core/hash.hpp"
#include "hoisynth/core/rng.hpp"
#include "hoisynth/diffusion/sampler.hpp"
#include "hoisynth/geometry/frame_objects.hpp"
#include "hoisynth/hand/fit.hpp"
#include "hoisynth/metrics/metrics.hpp"
#include "hoisynth/pipeline/checkpoint.hpp"
#include "hoisynth/pipeline/export.hpp"
#include "hoisynth/pipeline/motion.hpp"
#include "hoisynth/refine/refine.hpp"

namespace hoisynth {

inline constexpr const char* kToolkitVersion = "0.1.0";
inline constexpr int kManifestVersion = 1;

/// Fitting budget for sampled keypoints. Network outputs are noisy, so the
/// fit stalls at millimetre residuals well before the default cap.
inline FitOptions sample_fit_options() {
  FitOptions o;
  o.max_iterations = 50;
  o.relative_tolerance = 1e-6;
  return o;
}

/// Seed streams of one pipeline sample.
struct SampleSeeds {
  std::uint64_t sample = 0;
  std::uint64_t contact = 0;
  std::uint64_t motion = 0;

  static SampleSeeds derive(std::uint64_t master, std::size_t index) {
    SampleSeeds s;
    s.sample = derive_seed(master, index);
    s.contact = derive_seed(s.sample, 1);
    s.motion = derive_seed(s.sample, 2);
    return s;
  }
};

/// Contact map drawn from the contact model: the normalised rows the motion
/// model is conditioned on and the same map per hand in metres.
struct ContactSample {
  RowMatX normalized;
  std::array<ContactFrames, 2> metric;
};

inline ContactSample sample_contact(const Checkpoint& ck, const RowMatX& object_cond, const PipelineConfig& cfg,
                                   std::uint64_t seed) {
  const TinyMlpDenoiser& net = ck.model(ModelKind::kContact);
  const NoiseSchedule schedule = default_schedule(ck.diffusion_steps);
  SampleOptions opt;
  opt.guidance = cfg.guidance;
  opt.guidance.contact_guidance = false;
  opt.variance = cfg.variance;
  ContactSample c;
  c.normalized = sample(net, schedule, {object_cond, RowMatX(object_cond.rows(), 0)}, object_cond.rows(), opt, seed);
  const RowMatX metric = ck.contact_norm.denormalize(c.normalized);
  const ContactLayout layout = ck.contact_layout();
  for (Side side : {Side::kLeft, Side::kRight})
    c.metric[static_cast<std::size_t>(side)] = unpack_points(metric, layout.offset(side), layout.slots);
  return c;
}

inline constexpr int kContactVersion = 1;

/// Contact maps drawn for one scene, one entry per sample.
inline Container contact_container(const std::string& scene, const std::vector<ContactSample>& samples) {
  require(!samples.empty(), "no contact samples to store");
  Container c;
  c.kind = "contact";
  c.version = kContactVersion;
  c.meta["scene"] = scene;
  c.meta["samples"] = samples.size();
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const std::string p = "s" + std::to_string(k) + ".";
    c.put_matrix(p + "normalized", samples[k].normalized);
    for (Side side : {Side::kLeft, Side::kRight})
      c.put_matrix(p + side_name(side), detail::stack_points(samples[k].metric[static_cast<std::size_t>(side)]));
  }
  return c;
}

inline std::vector<ContactSample> contact_from_container(const Container& c) {
  if (c.kind != "contact") throw FormatError("container holds '" + c.kind + "', expected contact maps");
  if (c.version != kContactVersion)
    throw FormatError("contact version " + std::to_string(c.version) + " is not supported (expected " +
                      std::to_string(kContactVersion) + ")");
  std::vector<ContactSample> out;
  try {
    const auto n = c.meta.at("samples").get<std::size_t>();
    for (std::size_t k = 0; k < n; ++k) {
      const std::string p = "s" + std::to_string(k) + ".";
      ContactSample s;
      s.normalized = c.matrix(p + "normalized");
      for (Side side : {Side::kLeft, Side::kRight}) {
        auto& m = s.metric[static_cast<std::size_t>(side)];
        m = detail::unstack_points(c.matrix(p + side_name(side)), p + side_name(side));
        if (static_cast<Eigen::Index>(m.size()) != s.normalized.rows())
          throw FormatError("contact sample " + std::to_string(k) + " has inconsistent frame counts");
      }
      out.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("contact header is incomplete: ") + e.what());
  }
  return out;
}

/// Motion model sample (CFG and, with a contact map, contact guidance) and
/// the hand parameters fitted to its keypoints.
inline MotionSample sample_motion(const Checkpoint& ck, const ObjectFeatures& features, const RowMatX& object_cond,
                                  const ContactSample* contact, const PipelineConfig& cfg, std::uint64_t seed) {
  const TinyMlpDenoiser& net = ck.model(ModelKind::kMotion);
  const NoiseSchedule schedule = default_schedule(ck.diffusion_steps);
  const MotionLayout layout = ck.motion_layout();
  const Eigen::Index n = object_cond.rows();
  SampleOptions opt;
  opt.guidance = cfg.guidance;
  opt.variance = cfg.variance;
  Conditioning cond{object_cond, contact ? contact->normalized : RowMatX(n, 0)};
  if (contact && cfg.guidance.contact_guidance) {
    opt.hook = [&](RowMatX& x0, int) {
      contact_guidance_step(x0, ck.motion_norm, layout, contact->metric, features.bps.anchors);
    };
  }
  const RowMatX x = ck.motion_norm.denormalize(sample(net, schedule, cond, n, opt, seed));

  MotionSample m;
  m.seed = seed;
  const auto& models = hand_models(ck.keypoints);
  for (Side side : {Side::kLeft, Side::kRight}) {
    const auto h = static_cast<std::size_t>(side);
    m.keypoints[h] = unpack_points(x, layout.h_offset(side), layout.keypoints);
    m.directions[h] = unpack_points(x, layout.d_offset(side), layout.keypoints);
    m.hands[h] = fit_params(models[h], m.keypoints[h], sample_fit_options());
  }
  if (contact) m.contact = contact->metric;
  return m;
}

/// Refinement of both hands against the sampled directions.
inline void refine_sample(MotionSample& m, const FrameObjects& objects, const PipelineConfig& cfg, int keypoints) {
  const auto& models = hand_models(keypoints);
  std::vector<RefineHand> hands;
  for (std::size_t h = 0; h < 2; ++h) hands.push_back({&models[h], m.hands[h], m.directions[h]});
  RefineResult r = refine(std::move(hands), objects, cfg.refine);
  for (std::size_t h = 0; h < 2; ++h) m.hands[h] = std::move(r.params[h]);
  const auto terms = [](const RefineTerms& t) {
    return nlohmann::json{{"l_proj", t.proj}, {"l_pen", t.pen}, {"l_acc", t.acc}, {"total", t.total},
                          {"interior_vertices", t.interior}};
  };
  // Wall-clock time is left out so that reruns stay bitwise identical.
  m.refine_summary = {{"status", r.report.status == RefineStatus::kCompleted ? "completed" : "diverged"},
                      {"message", r.report.message},
                      {"iterations", r.report.history.size() - 1},
                      {"initial", terms(r.report.initial())},
                      {"final", terms(r.report.final())}};
  m.refined = true;
}

/// Metrics of every sample of one trajectory. CM compares the map implied by
/// the final keypoints with the sampled contact map when one exists.
inline MetricsReport evaluate_motion_set(const MotionSet& set, const Scene& scene, const ObjectFeatures& features,
                                         const FrameObjects& objects, const MetricsConfig& mc) {
  set.validate();
  const auto& models = hand_models(set.keypoints);
  std::vector<SurfaceMotion> surfaces;
  std::vector<std::vector<ContactFrames>> derived, predicted;
  bool all_contact = true;
  for (const auto& s : set.samples) {
    surfaces.push_back(sample_surfaces(s, models));
    all_contact = all_contact && s.contact.has_value();
  }
  if (all_contact) {
    for (std::size_t k = 0; k < set.samples.size(); ++k) {
      std::vector<ContactFrames> d, p;
      for (std::size_t h = 0; h < 2; ++h) {
        std::vector<Points> kp;
        for (const auto& v : surfaces[k].hands[h]) kp.push_back(sample_keypoints(models[h], v));
        d.push_back(derived_contact(kp, features.bps.anchors));
        p.push_back((*set.samples[k].contact)[h]);
      }
      derived.push_back(std::move(d));
      predicted.push_back(std::move(p));
    }
  }
  MetricsReport r = evaluate_metrics(surfaces, objects, scene.angles(), mc, all_contact ? &derived : nullptr,
                                     all_contact ? &predicted : nullptr);
  r.sequence = scene.name;
  return r;
}

/// `cfg.samples` motions for one scene. Contact maps come from `given`
/// (cycled) when provided, otherwise from the contact model unless
/// `cfg.use_contact` is off. Not refined. `seeds`, when set, receives the
/// per-sample seed record.
inline MotionSet sample_motion_set(const Scene& scene, const Checkpoint& ck, const PipelineConfig& cfg,
                                   const ObjectFeatures& features, const std::vector<ContactSample>* given = nullptr,
                                   nlohmann::json* seeds = nullptr) {
  cfg.validate();
  ck.check_compatible(cfg);
  ck.model(ModelKind::kMotion);
  const bool contact = given ? !given->empty() : cfg.use_contact;
  if (contact && !given) ck.model(ModelKind::kContact);
  const RowMatX object_cond = ck.object_norm.normalize(features.conditioning());
  if (given)
    for (const auto& c : *given)
      require(c.normalized.rows() == object_cond.rows() && c.normalized.cols() == ck.contact_layout().frame_dim(),
              "contact maps do not match the scene length or the checkpoint's basis size");

  MotionSet set;
  set.scene = scene.name;
  set.keypoints = ck.keypoints;
  nlohmann::json record = nlohmann::json::array();
  for (int k = 0; k < cfg.samples; ++k) {
    const SampleSeeds sd = SampleSeeds::derive(cfg.seed, static_cast<std::size_t>(k));
    std::optional<ContactSample> c;
    if (given && contact) c = (*given)[static_cast<std::size_t>(k) % given->size()];
    else if (contact) c = sample_contact(ck, object_cond, cfg, sd.contact);
    MotionSample m = sample_motion(ck, features, object_cond, c ? &*c : nullptr, cfg, sd.motion);
    m.seed = sd.sample;
    set.samples.push_back(std::move(m));
    record.push_back({{"index", k}, {"sample", sd.sample}, {"contact", sd.contact}, {"motion", sd.motion}});
  }
  if (seeds) *seeds = std::move(record);
  return set;
}

struct RunResult {
  MotionSet motion;
  MetricsReport metrics;
  nlohmann::json manifest;
};

inline std::string file_hash(const std::string& path) { return Fnv1a().add(read_file(path)).hex(); }

/// Features, contact sampling, motion sampling with CFG and guidance, fitting,
/// refinement and metrics for `cfg.samples` draws. With a non-empty `out_dir`
/// writes motion.bin, metrics.json, metrics.csv, optionally export/, and last
/// manifest.json; every file is written atomically.
inline RunResult run_pipeline(const Scene& scene, const Checkpoint& ck, const PipelineConfig& cfg,
                              const std::string& out_dir = {}, bool export_obj = false) {
  cfg.validate();
  scene.validate();
  ck.check_compatible(cfg);
  ck.model(ModelKind::kMotion);
  if (cfg.use_contact) ck.model(ModelKind::kContact);

  const ObjectFeatures features = scene_features(scene, cfg);
  const FrameObjects objects(scene.object, scene.trajectory);

  RunResult out;
  nlohmann::json seeds;
  out.motion = sample_motion_set(scene, ck, cfg, features, nullptr, &seeds);
  if (cfg.refine_enabled)
    for (auto& m : out.motion.samples) refine_sample(m, objects, cfg, ck.keypoints);
  out.metrics = evaluate_motion_set(out.motion, scene, features, objects, cfg.metrics);

  const Container ck_container = checkpoint_container(ck);
  out.manifest = {{"version", kManifestVersion},
                  {"toolkit_version", kToolkitVersion},
                  {"scene", scene.name},
                  {"scene_hash", Fnv1a().add(scene_container(scene).encode()).hex()},
                  {"checkpoint_hash", Fnv1a().add(ck_container.encode()).hex()},
                  {"config_hash", cfg.hash()},
                  {"config", cfg.to_json()},
                  {"seeds", {{"master", cfg.seed}, {"samples", seeds}}},
                  {"formats",
                   {{"scene", kSceneVersion},
                    {"checkpoint", kCheckpointVersion},
                    {"motion", kMotionVersion},
                    {"metrics", kMetricsVersion},
                    {"feature_cache", kFeatureCacheVersion},
                    {"contact", kContactVersion},
                    {"export", kExportVersion}}}};

  if (!out_dir.empty()) {
    namespace fs = std::filesystem;
    const fs::path root(out_dir);
    fs::create_directories(root);
    save_motion((root / "motion.bin").string(), out.motion);
    write_text_atomic((root / "metrics.json").string(), metrics_document({out.metrics}, cfg.metrics).dump(2) + "\n");
    write_text_atomic((root / "metrics.csv").string(), metrics_csv({out.metrics}));
    nlohmann::json artifacts = nlohmann::json::object();
    for (const char* f : {"motion.bin", "metrics.json", "metrics.csv"}) artifacts[f] = file_hash((root / f).string());
    if (export_obj) {
      const nlohmann::json index = export_sequence(out.motion.samples.front(), hand_models(ck.keypoints), scene,
                                                   (root / "export").string());
      artifacts["export/index.json"] = file_hash((root / "export" / "index.json").string());
      for (const auto& f : index["files"]) {
        const std::string rel = "export/" + f.get<std::string>();
        artifacts[rel] = file_hash((root / rel).string());
      }
    }
    out.manifest["artifacts"] = artifacts;
    write_text_atomic((root / "manifest.json").string(), out.manifest.dump(2) + "\n");
  }
  return out;
}

}  // namespace hoisynth

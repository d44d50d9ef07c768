#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hoisynth/contact/contact_map.hpp"
#include "hoisynth/core/container.hpp"
#include "hoisynth/core/hash.hpp"
#include "hoisynth/diffusion/guidance.hpp"
#include "hoisynth/diffusion/mlp.hpp"
#include "hoisynth/diffusion/normalizer.hpp"
#include "hoisynth/diffusion/train.hpp"
#include "hoisynth/hand/keypoints.hpp"
#include "hoisynth/pipeline/config.hpp"
#include "hoisynth/pipeline/features.hpp"

namespace hoisynth {

inline constexpr int kCheckpointVersion = 1;

enum class ModelKind { kContact, kMotion };

inline const char* model_kind_name(ModelKind k) { return k == ModelKind::kContact ? "contact" : "motion"; }

inline ModelKind parse_model_kind(const std::string& s) {
  if (s == "contact") return ModelKind::kContact;
  if (s == "motion") return ModelKind::kMotion;
  throw InvalidInput("unknown model '" + s + "' (expected contact or motion)");
}

/// Unnormalised per-frame rows of one training sequence.
struct SequenceData {
  RowMatX object;   // N x (6K + 6): BPS vectors then global state
  RowMatX contact;  // N x 12K: [left C | right C], metres
  RowMatX motion;   // N x 12J: [left H | left D | right H | right D], metres
};

/// Training rows of a scene with ground-truth hands. Contact targets come
/// from the dense hand surfaces; H are the keypoints and D the vectors to
/// their nearest object vertices.
inline SequenceData sequence_data(const Scene& s, const ObjectFeatures& f, int keypoints) {
  require(s.hands.has_value(), "scene '" + s.name + "' has no hand motion to learn from");
  const auto& models = hand_models(keypoints);
  const auto n = static_cast<Eigen::Index>(s.frames());
  const ContactLayout cl{f.bps.slots};
  const MotionLayout ml{keypoints};
  SequenceData d;
  d.object = f.conditioning();
  d.contact.resize(n, cl.frame_dim());
  d.motion.resize(n, ml.frame_dim());
  std::vector<Points> posed;
  for (const auto& fr : s.trajectory.frames) posed.push_back(s.object.posed_canonical(fr.angle));
  for (Side side : {Side::kLeft, Side::kRight}) {
    const HandParams& hp = (*s.hands)[static_cast<std::size_t>(side)];
    const HandModel& model = models[static_cast<std::size_t>(side)];
    std::vector<Points> verts, kp, dirs;
    for (std::size_t i = 0; i < s.frames(); ++i) {
      verts.push_back(lbs_forward(model, hp.theta[i], hp.beta));
      kp.push_back(sample_keypoints(model, verts.back()));
      dirs.push_back(direction_vectors(kp.back(), posed[i]));
    }
    pack_points(d.contact, cl.offset(side), gt_contact(verts, f.bps.anchors));
    pack_points(d.motion, ml.h_offset(side), kp);
    pack_points(d.motion, ml.d_offset(side), dirs);
  }
  return d;
}

/// Both denoisers, the normalisers they were trained with and the feature
/// settings they expect.
struct Checkpoint {
  BpsVariant variant = BpsVariant::kNormalizedPart;
  int basis_per_part = 0;
  std::uint64_t basis_seed = 0;
  double margin = kDefaultMargin;
  int keypoints = 0;
  int diffusion_steps = kDefaultSteps;
  ChannelNormalizer object_norm, contact_norm, motion_norm;
  std::optional<TinyMlpDenoiser> contact;
  std::optional<TinyMlpDenoiser> motion;
  nlohmann::json provenance = nlohmann::json::object();

  ContactLayout contact_layout() const { return {2 * basis_per_part}; }
  MotionLayout motion_layout() const { return {keypoints}; }

  /// Descriptive FormatError when `cfg` asks for features or a chain length
  /// the networks were not trained with.
  void check_compatible(const PipelineConfig& cfg) const {
    const auto mismatch = [](const std::string& what, const std::string& have, const std::string& want) {
      throw FormatError("checkpoint was trained with " + what + " = " + have + " but the config asks for " + want);
    };
    if (cfg.variant != variant) mismatch("features.variant", variant_name(variant), variant_name(cfg.variant));
    if (cfg.basis_per_part != basis_per_part)
      mismatch("features.basis_per_part", std::to_string(basis_per_part), std::to_string(cfg.basis_per_part));
    if (cfg.basis_seed != basis_seed)
      mismatch("features.basis_seed", std::to_string(basis_seed), std::to_string(cfg.basis_seed));
    if (cfg.margin != margin) mismatch("features.margin", std::to_string(margin), std::to_string(cfg.margin));
    if (cfg.keypoints != keypoints)
      mismatch("features.keypoints", std::to_string(keypoints), std::to_string(cfg.keypoints));
    if (cfg.diffusion_steps != diffusion_steps)
      mismatch("diffusion.steps", std::to_string(diffusion_steps), std::to_string(cfg.diffusion_steps));
  }

  const TinyMlpDenoiser& model(ModelKind k) const {
    const auto& m = k == ModelKind::kContact ? contact : motion;
    if (!m) throw FormatError(std::string("checkpoint has no trained ") + model_kind_name(k) + " model");
    return *m;
  }
};

namespace detail {

inline void put_normalizer(Container& c, const std::string& name, const ChannelNormalizer& n) {
  c.put_matrix("norm." + name + ".mean", n.mean);
  c.put_matrix("norm." + name + ".std", n.stddev);
}

inline ChannelNormalizer get_normalizer(const Container& c, const std::string& name, Eigen::Index channels) {
  ChannelNormalizer n;
  n.mean = c.matrix("norm." + name + ".mean");
  n.stddev = c.matrix("norm." + name + ".std");
  if (n.mean.size() != channels || n.stddev.size() != channels)
    throw FormatError("checkpoint normaliser '" + name + "' has " + std::to_string(n.mean.size()) +
                      " channels, expected " + std::to_string(channels));
  return n;
}

}  // namespace detail

inline Container checkpoint_container(const Checkpoint& ck) {
  Container c;
  c.kind = "checkpoint";
  c.version = kCheckpointVersion;
  c.meta["features"] = {{"variant", variant_name(ck.variant)},
                        {"basis_per_part", ck.basis_per_part},
                        {"basis_seed", ck.basis_seed},
                        {"margin", ck.margin},
                        {"keypoints", ck.keypoints}};
  c.meta["diffusion_steps"] = ck.diffusion_steps;
  c.meta["provenance"] = ck.provenance;
  c.meta["models"] = nlohmann::json::array();
  detail::put_normalizer(c, "object", ck.object_norm);
  detail::put_normalizer(c, "contact", ck.contact_norm);
  detail::put_normalizer(c, "motion", ck.motion_norm);
  for (ModelKind k : {ModelKind::kContact, ModelKind::kMotion}) {
    const auto& m = k == ModelKind::kContact ? ck.contact : ck.motion;
    if (!m) continue;
    m->write_to(c, model_kind_name(k));
    c.meta["models"].push_back(model_kind_name(k));
  }
  return c;
}

inline Checkpoint checkpoint_from_container(const Container& c) {
  if (c.kind != "checkpoint") throw FormatError("container holds '" + c.kind + "', expected a checkpoint");
  if (c.version != kCheckpointVersion)
    throw FormatError("checkpoint version " + std::to_string(c.version) + " is not supported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  Checkpoint ck;
  try {
    const auto& f = c.meta.at("features");
    ck.variant = parse_variant(f.at("variant").get<std::string>());
    ck.basis_per_part = f.at("basis_per_part").get<int>();
    ck.basis_seed = f.at("basis_seed").get<std::uint64_t>();
    ck.margin = f.at("margin").get<double>();
    ck.keypoints = f.at("keypoints").get<int>();
    ck.diffusion_steps = c.meta.at("diffusion_steps").get<int>();
    ck.provenance = c.meta.value("provenance", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header is incomplete: ") + e.what());
  } catch (const InvalidInput& e) {
    throw FormatError(std::string("checkpoint header is invalid: ") + e.what());
  }
  const Eigen::Index k = ck.basis_per_part;
  ck.object_norm = detail::get_normalizer(c, "object", 6 * k + 6);
  ck.contact_norm = detail::get_normalizer(c, "contact", 12 * k);
  ck.motion_norm = detail::get_normalizer(c, "motion", 12 * static_cast<Eigen::Index>(ck.keypoints));
  for (const auto& name : c.meta.value("models", nlohmann::json::array())) {
    const ModelKind kind = parse_model_kind(name.get<std::string>());
    TinyMlpDenoiser net = TinyMlpDenoiser::read_from(c, model_kind_name(kind));
    const Eigen::Index want_sample = kind == ModelKind::kContact ? 12 * k : 12 * static_cast<Eigen::Index>(ck.keypoints);
    const Eigen::Index want_contact = kind == ModelKind::kContact ? 0 : 12 * k;
    if (net.shape().sample_dim != want_sample || net.shape().object_dim != 6 * k + 6 ||
        net.shape().contact_dim != want_contact)
      throw FormatError(std::string("checkpoint ") + model_kind_name(kind) +
                        " network does not match the feature settings in its header");
    (kind == ModelKind::kContact ? ck.contact : ck.motion) = std::move(net);
  }
  return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  save_container(path, checkpoint_container(ck));
}

inline Checkpoint load_checkpoint(const std::string& path) {
  if (!std::filesystem::exists(path)) throw FormatError("checkpoint '" + path + "' does not exist");
  return checkpoint_from_container(load_container(path, "checkpoint"));
}

struct TrainingSummary {
  std::vector<TrainReport> reports;  // one per trained model, in request order
  std::size_t sequences = 0;
  std::size_t frames = 0;
};

/// Trains the requested networks on scenes with ground-truth hands. `base`
/// keeps its other network; its normalisers must match the ones this data
/// produces.
inline Checkpoint train_checkpoint(const std::vector<Scene>& scenes, const PipelineConfig& cfg,
                                   const std::vector<ModelKind>& which, std::optional<Checkpoint> base = {},
                                   TrainingSummary* summary = nullptr) {
  cfg.validate();
  if (scenes.empty()) throw InvalidInput("training set is empty");
  std::vector<SequenceData> data;
  for (const auto& s : scenes) data.push_back(sequence_data(s, scene_features(s, cfg), cfg.keypoints));

  RowMatX all_obj, all_con, all_mot;
  Eigen::Index rows = 0;
  for (const auto& d : data) rows += d.object.rows();
  all_obj.resize(rows, data[0].object.cols());
  all_con.resize(rows, data[0].contact.cols());
  all_mot.resize(rows, data[0].motion.cols());
  Fnv1a h;
  for (Eigen::Index r = 0; const auto& d : data) {
    all_obj.middleRows(r, d.object.rows()) = d.object;
    all_con.middleRows(r, d.contact.rows()) = d.contact;
    all_mot.middleRows(r, d.motion.rows()) = d.motion;
    r += d.object.rows();
  }
  h.add(all_obj.data(), sizeof(double) * static_cast<std::size_t>(all_obj.size()));
  h.add(all_con.data(), sizeof(double) * static_cast<std::size_t>(all_con.size()));
  h.add(all_mot.data(), sizeof(double) * static_cast<std::size_t>(all_mot.size()));

  Checkpoint ck;
  if (base) {
    ck = std::move(*base);
    ck.check_compatible(cfg);
    if (ck.provenance.value("dataset_hash", "") != h.hex())
      throw InvalidInput("checkpoint was trained on a different dataset; train both models on the same scenes");
  } else {
    ck.variant = cfg.variant;
    ck.basis_per_part = cfg.basis_per_part;
    ck.basis_seed = cfg.basis_seed;
    ck.margin = cfg.margin;
    ck.keypoints = cfg.keypoints;
    ck.diffusion_steps = cfg.diffusion_steps;
    ck.object_norm = ChannelNormalizer::fit(all_obj);
    ck.contact_norm = ChannelNormalizer::fit(all_con);
    ck.motion_norm = ChannelNormalizer::fit(all_mot);
    ck.provenance["dataset_hash"] = h.hex();
    ck.provenance["sequences"] = data.size();
    ck.provenance["frames"] = rows;
  }

  const NoiseSchedule schedule = default_schedule(cfg.diffusion_steps);
  std::vector<TrainingExample> contact_set, motion_set;
  for (const auto& d : data) {
    const RowMatX obj = ck.object_norm.normalize(d.object);
    const RowMatX con = ck.contact_norm.normalize(d.contact);
    contact_set.push_back({con, {obj, RowMatX(obj.rows(), 0)}});
    motion_set.push_back({ck.motion_norm.normalize(d.motion), {obj, con}});
  }
  if (summary) {
    summary->sequences = data.size();
    summary->frames = static_cast<std::size_t>(rows);
  }
  for (ModelKind kind : which) {
    const auto stream = static_cast<std::uint64_t>(kind);
    MlpShape shape;
    shape.sample_dim = kind == ModelKind::kContact ? all_con.cols() : all_mot.cols();
    shape.object_dim = all_obj.cols();
    shape.contact_dim = kind == ModelKind::kContact ? 0 : all_con.cols();
    shape.hidden = cfg.hidden;
    shape.time_dim = cfg.time_dim;
    shape.smooth_window = cfg.smooth_window;
    TinyMlpDenoiser net(shape, derive_seed(cfg.seed, 100 + stream));
    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.seed, 200 + stream);
    tc.dropout = kind == ModelKind::kContact ? 0.0 : cfg.guidance.dropout;
    TrainReport rep = train_denoiser(net, kind == ModelKind::kContact ? contact_set : motion_set, schedule, tc);
    ck.provenance[model_kind_name(kind)] = {{"steps", tc.steps},
                                           {"batch", tc.batch},
                                           {"learning_rate", tc.learning_rate},
                                           {"dropout", tc.dropout},
                                           {"seed", tc.seed},
                                           {"final_loss", rep.loss.empty() ? 0.0 : rep.loss.back()}};
    (kind == ModelKind::kContact ? ck.contact : ck.motion) = std::move(net);
    if (summary) summary->reports.push_back(std::move(rep));
  }
  return ck;
}

}  // namespace hoisynth

// hoisynth: command line front end for scene generation, features, training,
// sampling, refinement, metrics and export.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hoisynth/features/cache.hpp"
#include "hoisynth/pipeline/config.hpp"
#include "hoisynth/pipeline/run.hpp"
#include "hoisynth/pipeline/scene.hpp"
#include "hoisynth/pipeline/synthetic.hpp"

using namespace hoisynth;
namespace fs = std::filesystem;

namespace {

// Options shared by the subcommands that touch the pipeline configuration.
struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<double> lambda_f;
  std::optional<double> dropout;
  std::string weights;
  std::string variant;
  std::optional<int> samples;

  void attach(CLI::App* app, bool training) {
    app->add_option("--config", config, "JSON configuration file")->check(CLI::ExistingFile);
    app->add_option("--seed", seed, "master seed");
    app->add_option("--variant", variant, "feature variant: np-bps, npa-bps or u-bps");
    if (training) {
      app->add_option("--dropout", dropout, "contact-condition dropout probability");
    } else {
      app->add_option("--lambda-f", lambda_f, "classifier-free guidance scale");
      app->add_option("--weights", weights, "refinement weights w_proj,w_pen,w_acc");
      app->add_option("--samples", samples, "motions per scene");
    }
  }

  PipelineConfig resolve() const {
    PipelineConfig c = config.empty() ? PipelineConfig{} : load_config(config);
    if (seed) c.seed = *seed;
    if (lambda_f) c.guidance.lambda_f = *lambda_f;
    if (dropout) c.guidance.dropout = c.train.dropout = *dropout;
    if (!weights.empty()) parse_weights(weights, c.refine);
    if (!variant.empty()) c.variant = parse_variant(variant);
    if (samples) c.samples = *samples;
    c.validate();
    return c;
  }
};

void print_json(const nlohmann::json& j) { std::cout << j.dump(2) << "\n"; }

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, sep);)
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<Scene> load_scenes(const std::vector<std::string>& paths) {
  std::vector<Scene> out;
  for (const auto& p : paths) out.push_back(load_scene(p));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bimanual hand-object motion synthesis toolkit"};
  app.set_version_flag("--version", kToolkitVersion);
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "generate a synthetic articulated-object scene");
  std::string gen_family = "box", gen_out, gen_program;
  std::uint64_t gen_seed = 0;
  int gen_frames = 32;
  double gen_fps = 30.0, gen_size_min = 0.9, gen_size_max = 1.1;
  bool gen_no_hands = false;
  gen->add_option("--family", gen_family, "box, cylinder or scissors")->capture_default_str();
  gen->add_option("--seed", gen_seed, "scene seed")->capture_default_str();
  gen->add_option("--frames", gen_frames, "trajectory length")->capture_default_str();
  gen->add_option("--fps", gen_fps, "frame rate")->capture_default_str();
  gen->add_option("--size-min", gen_size_min, "smallest scale factor")->capture_default_str();
  gen->add_option("--size-max", gen_size_max, "largest scale factor")->capture_default_str();
  gen->add_option("--program", gen_program, "segments, e.g. lift,articulate,rotate");
  gen->add_flag("--no-hands", gen_no_hands, "leave out the ground-truth hands");
  gen->add_option("--out", gen_out, "scene file")->required();

  // features
  auto* feat = app.add_subcommand("features", "compute (or fetch from the cache) object features");
  Common feat_c;
  feat_c.attach(feat, false);
  std::string feat_scene, feat_out;
  feat->add_option("scene", feat_scene, "scene file")->required()->check(CLI::ExistingFile);
  feat->add_option("--out", feat_out, "also write the feature cache record here");

  // train
  auto* train = app.add_subcommand("train", "train the contact and/or motion denoiser");
  Common train_c;
  train_c.attach(train, true);
  std::string train_kind, train_out, train_base;
  std::vector<std::string> train_scenes;
  int train_synthetic = 0, train_frames = 32, train_steps = -1;
  train->add_option("kind", train_kind, "contact, motion or both")->required()->check(
      CLI::IsMember({"contact", "motion", "both"}));
  train->add_option("--scenes", train_scenes, "scene files with ground-truth hands")->check(CLI::ExistingFile);
  train->add_option("--synthetic", train_synthetic, "generate this many synthetic training scenes");
  train->add_option("--frames", train_frames, "frames per synthetic scene")->capture_default_str();
  train->add_option("--steps", train_steps, "optimiser steps (overrides the config)");
  train->add_option("--base", train_base, "checkpoint whose other model is kept")->check(CLI::ExistingFile);
  train->add_option("--out", train_out, "checkpoint file")->required();

  // contact
  auto* contact = app.add_subcommand("contact", "sample contact maps from the contact model");
  Common contact_c;
  contact_c.attach(contact, false);
  std::string contact_scene, contact_ck, contact_out;
  contact->add_option("scene", contact_scene, "scene file")->required()->check(CLI::ExistingFile);
  contact->add_option("--checkpoint", contact_ck, "checkpoint file")->required();
  contact->add_option("--out", contact_out, "contact file")->required();

  // sample
  auto* smp = app.add_subcommand("sample", "sample and fit hand motions (no refinement)");
  Common smp_c;
  smp_c.attach(smp, false);
  std::string smp_scene, smp_ck, smp_contact, smp_out;
  bool smp_no_contact = false, smp_no_guidance = false;
  smp->add_option("scene", smp_scene, "scene file")->required()->check(CLI::ExistingFile);
  smp->add_option("--checkpoint", smp_ck, "checkpoint file")->required();
  smp->add_option("--contact", smp_contact, "contact maps from `contact`")->check(CLI::ExistingFile);
  smp->add_flag("--no-contact", smp_no_contact, "do not condition on contact maps");
  smp->add_flag("--no-guidance", smp_no_guidance, "disable contact-map guidance");
  smp->add_option("--out", smp_out, "motion file")->required();

  // refine
  auto* ref = app.add_subcommand("refine", "refine sampled motions against the object");
  Common ref_c;
  ref_c.attach(ref, false);
  std::string ref_scene, ref_motion, ref_out;
  int ref_iterations = -1;
  ref->add_option("scene", ref_scene, "scene file")->required()->check(CLI::ExistingFile);
  ref->add_option("motion", ref_motion, "motion file")->required()->check(CLI::ExistingFile);
  ref->add_option("--iterations", ref_iterations, "optimiser iterations (overrides the config)");
  ref->add_option("--out", ref_out, "refined motion file")->required();

  // metrics
  auto* met = app.add_subcommand("metrics", "evaluate motions");
  Common met_c;
  met_c.attach(met, false);
  std::string met_scene, met_json, met_csv;
  std::vector<std::string> met_motions;
  met->add_option("scene", met_scene, "scene file")->required()->check(CLI::ExistingFile);
  met->add_option("motion", met_motions, "motion files for this scene")->required()->check(CLI::ExistingFile);
  met->add_option("--json", met_json, "write the metrics document here");
  met->add_option("--csv", met_csv, "write the table here");

  // export
  auto* exp = app.add_subcommand("export", "write per-frame world-space OBJ files");
  std::string exp_scene, exp_motion, exp_out;
  std::size_t exp_sample = 0;
  bool exp_gt = false;
  exp->add_option("scene", exp_scene, "scene file")->required()->check(CLI::ExistingFile);
  exp->add_option("motion", exp_motion, "motion file")->check(CLI::ExistingFile);
  exp->add_flag("--ground-truth", exp_gt, "export the scene's own hands instead of a motion");
  exp->add_option("--sample", exp_sample, "sample index")->capture_default_str();
  exp->add_option("--out", exp_out, "output directory")->required();

  // run
  auto* run = app.add_subcommand("run", "full pipeline: sample, fit, refine, evaluate");
  Common run_c;
  run_c.attach(run, false);
  std::string run_scene, run_ck, run_out;
  bool run_export = false, run_no_contact = false, run_no_refine = false;
  run->add_option("scene", run_scene, "scene file")->required()->check(CLI::ExistingFile);
  run->add_option("--checkpoint", run_ck, "checkpoint file")->required();
  run->add_option("--out", run_out, "output directory")->required();
  run->add_flag("--export", run_export, "also export the first sample as OBJ");
  run->add_flag("--no-contact", run_no_contact, "skip the contact stage");
  run->add_flag("--no-refine", run_no_refine, "skip refinement");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      SyntheticSpec s;
      s.family = parse_family(gen_family);
      s.seed = gen_seed;
      s.frames = gen_frames;
      s.fps = gen_fps;
      s.size_min = gen_size_min;
      s.size_max = gen_size_max;
      s.hands = !gen_no_hands;
      for (const auto& seg : split(gen_program, ',')) s.program.push_back(parse_segment(seg));
      const Scene scene = gen_synthetic(s);
      save_scene(gen_out, scene);
      print_json({{"scene", scene.name}, {"frames", scene.frames()}, {"vertices", scene.object.mesh().vertices.rows()},
                  {"out", gen_out}});
    } else if (feat->parsed()) {
      const PipelineConfig cfg = feat_c.resolve();
      const Scene scene = load_scene(feat_scene);
      const ObjectFeatures f = scene_features(scene, cfg);
      if (!feat_out.empty()) write_file_atomic(feat_out, encode_feature_cache(f));
      print_json({{"scene", scene.name},
                  {"variant", variant_name(f.bps.variant)},
                  {"frames", f.bps.frames()},
                  {"slots", f.bps.slots},
                  {"scale", f.bps.scale},
                  {"conditioning_dim", f.conditioning().cols()},
                  {"cache_dir", feature_cache_dir()}});
    } else if (train->parsed()) {
      PipelineConfig cfg = train_c.resolve();
      if (train_steps >= 0) cfg.train.steps = train_steps;
      std::vector<Scene> scenes = load_scenes(train_scenes);
      for (int i = 0; i < train_synthetic; ++i) {
        SyntheticSpec s;
        s.family = static_cast<ObjectFamily>(i % 3);
        s.seed = derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(i));
        s.frames = train_frames;
        scenes.push_back(gen_synthetic(s));
      }
      std::vector<ModelKind> which;
      if (train_kind != "motion") which.push_back(ModelKind::kContact);
      if (train_kind != "contact") which.push_back(ModelKind::kMotion);
      std::optional<Checkpoint> base;
      if (!train_base.empty()) base = load_checkpoint(train_base);
      TrainingSummary summary;
      const Checkpoint ck = train_checkpoint(scenes, cfg, which, std::move(base), &summary);
      save_checkpoint(train_out, ck);
      nlohmann::json losses = nlohmann::json::object();
      for (std::size_t i = 0; i < which.size(); ++i) {
        const auto& l = summary.reports[i].loss;
        losses[model_kind_name(which[i])] = l.empty() ? nlohmann::json(nullptr) : nlohmann::json(l.back());
      }
      print_json({{"out", train_out}, {"sequences", scenes.size()}, {"final_loss", losses}, {"provenance", ck.provenance}});
    } else if (contact->parsed()) {
      const PipelineConfig cfg = contact_c.resolve();
      const Scene scene = load_scene(contact_scene);
      const Checkpoint ck = load_checkpoint(contact_ck);
      ck.check_compatible(cfg);
      const RowMatX cond = ck.object_norm.normalize(scene_features(scene, cfg).conditioning());
      std::vector<ContactSample> maps;
      for (int k = 0; k < cfg.samples; ++k)
        maps.push_back(sample_contact(ck, cond, cfg, SampleSeeds::derive(cfg.seed, static_cast<std::size_t>(k)).contact));
      save_container(contact_out, contact_container(scene.name, maps));
      print_json({{"out", contact_out}, {"samples", maps.size()}, {"frames", scene.frames()}});
    } else if (smp->parsed()) {
      PipelineConfig cfg = smp_c.resolve();
      if (smp_no_contact) cfg.use_contact = false;
      if (smp_no_guidance) cfg.guidance.contact_guidance = false;
      const Scene scene = load_scene(smp_scene);
      const Checkpoint ck = load_checkpoint(smp_ck);
      ck.check_compatible(cfg);
      std::vector<ContactSample> given;
      if (!smp_contact.empty() && !smp_no_contact) given = contact_from_container(load_container(smp_contact, "contact"));
      const ObjectFeatures f = scene_features(scene, cfg);
      const MotionSet set = sample_motion_set(scene, ck, cfg, f, given.empty() ? nullptr : &given);
      save_motion(smp_out, set);
      print_json({{"out", smp_out}, {"samples", set.samples.size()}, {"frames", set.frames()}});
    } else if (ref->parsed()) {
      PipelineConfig cfg = ref_c.resolve();
      if (ref_iterations >= 0) cfg.refine.iterations = ref_iterations;
      cfg.refine.validate();
      const Scene scene = load_scene(ref_scene);
      MotionSet set = load_motion(ref_motion);
      require(set.frames() == scene.frames(), "motion and scene differ in frame count");
      const FrameObjects objects(scene.object, scene.trajectory);
      nlohmann::json summaries = nlohmann::json::array();
      for (auto& m : set.samples) {
        refine_sample(m, objects, cfg, set.keypoints);
        summaries.push_back(m.refine_summary);
      }
      save_motion(ref_out, set);
      print_json({{"out", ref_out}, {"refine", summaries}});
    } else if (met->parsed()) {
      const PipelineConfig cfg = met_c.resolve();
      const Scene scene = load_scene(met_scene);
      const ObjectFeatures f = scene_features(scene, cfg);
      const FrameObjects objects(scene.object, scene.trajectory);
      std::vector<MetricsReport> rows;
      for (const auto& path : met_motions) {
        const MotionSet set = load_motion(path);
        require(set.frames() == scene.frames(), "'" + path + "' and the scene differ in frame count");
        rows.push_back(evaluate_motion_set(set, scene, f, objects, cfg.metrics));
        rows.back().sequence = fs::path(path).stem().string();
      }
      const nlohmann::json doc = metrics_document(rows, cfg.metrics);
      if (!met_json.empty()) write_text_atomic(met_json, doc.dump(2) + "\n");
      if (!met_csv.empty()) write_text_atomic(met_csv, metrics_csv(rows));
      print_json(doc);
    } else if (exp->parsed()) {
      const Scene scene = load_scene(exp_scene);
      nlohmann::json index;
      if (exp_gt) {
        require(scene.hands.has_value(), "scene has no ground-truth hands to export");
        MotionSample s;
        s.hands = *scene.hands;
        index = export_sequence(s, {default_hand(Side::kLeft), default_hand(Side::kRight)}, scene, exp_out);
      } else {
        require(!exp_motion.empty(), "give a motion file or --ground-truth");
        const MotionSet set = load_motion(exp_motion);
        require(exp_sample < set.samples.size(), "sample index " + std::to_string(exp_sample) + " out of range (" +
                                                     std::to_string(set.samples.size()) + " samples)");
        index = export_sequence(set.samples[exp_sample], hand_models(set.keypoints), scene, exp_out);
      }
      print_json({{"out", exp_out}, {"frames", index["frames"]}});
    } else if (run->parsed()) {
      PipelineConfig cfg = run_c.resolve();
      if (run_no_contact) cfg.use_contact = false;
      if (run_no_refine) cfg.refine_enabled = false;
      const RunResult r = run_pipeline(load_scene(run_scene), load_checkpoint(run_ck), cfg, run_out, run_export);
      print_json(r.metrics.to_json());
    }
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

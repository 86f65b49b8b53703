// Command-line front end for the SEAL pipeline: scene generation, policy
// training, episode collection, label propagation, fine-tuning, evaluation,
// and the full experiment protocols.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "seal/evalharness.hpp"

namespace fs = std::filesystem;
using namespace seal;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  int jobs = 0;
  int64_t seed = -1;
  std::string policy_kind;
};

ExperimentConfig load_config(const CommonArgs& args) {
  ExperimentConfig c;
  if (!args.config_path.empty())
    c = config_from_json(ordered_json::parse(read_text_file(args.config_path)));
  if (!args.out_dir.empty()) c.out_dir = args.out_dir;
  if (args.jobs > 0) c.jobs = args.jobs;
  if (args.jobs == 0 && c.jobs <= 1) c.jobs = default_jobs();
  if (args.seed >= 0) c.seeds = {uint64_t(args.seed)};
  if (!args.policy_kind.empty()) c.policy = policy_kind_from(args.policy_kind);
  c.validate();
  return c;
}

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "experiment config JSON");
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_option("--jobs", args.jobs, "worker threads");
  cmd->add_option("--seed", args.seed, "override experiment seed");
  cmd->add_option("--policy", args.policy_kind,
                  "policy kind: random|frontier|coverage|gainful");
}

void print_report(const EvalReport& report) {
  std::printf("%-24s %-16s %8s %8s\n", "method", "setting", "det_AP50",
              "seg_AP50");
  for (const auto& r : report.rows)
    std::printf("%-24s %-16s %8.2f %8.2f\n", r.method.c_str(),
                r.setting.c_str(), r.mean.det * 100.0, r.mean.seg * 100.0);
}

int cmd_generate_scenes(const CommonArgs& args) {
  ExperimentConfig c = load_config(args);
  ScenesBundle scenes = make_scenes(c);
  fs::create_directories(c.out_dir + "/scenes");
  for (const auto& s : scenes.train)
    save_scene(s, c.out_dir + "/scenes/train_" + std::to_string(s.seed) + ".json");
  for (const auto& s : scenes.test)
    save_scene(s, c.out_dir + "/scenes/test_" + std::to_string(s.seed) + ".json");
  std::printf("wrote %zu train + %zu test scenes to %s/scenes\n",
              scenes.train.size(), scenes.test.size(), c.out_dir.c_str());
  return 0;
}

int cmd_train_policy(const CommonArgs& args) {
  ExperimentConfig c = load_config(args);
  ScenesBundle scenes = make_scenes(c);
  uint64_t exp_seed = c.seeds.front();
  std::vector<double> returns;
  ExplorationPolicy pol = make_policy(c.policy, c, scenes.train, exp_seed, &returns);
  fs::create_directories(c.out_dir);
  ordered_json meta;
  meta["episodes"] = returns.size();
  if (!returns.empty()) {
    double first = returns.front(), last = returns.back(), mean = 0;
    for (double r : returns) mean += r / double(returns.size());
    meta["return_first"] = first;
    meta["return_mean"] = mean;
    meta["return_last"] = last;
  }
  save_policy(pol, c.out_dir + "/policy.json", meta);
  std::printf("trained %s policy -> %s/policy.json\n",
              policy_kind_name(pol.kind), c.out_dir.c_str());
  return 0;
}

int cmd_collect(const CommonArgs& args, const std::string& policy_file,
                int dump_frames) {
  ExperimentConfig c = load_config(args);
  ScenesBundle scenes = make_scenes(c);
  uint64_t exp_seed = c.seeds.front();
  ExplorationPolicy pol;
  std::string pf = policy_file.empty() ? c.out_dir + "/policy.json" : policy_file;
  if (fs::exists(pf)) {
    pol = load_policy(pf);
  } else {
    pol = make_policy(c.policy, c, scenes.train, exp_seed);
  }
  PerceptionModel identity = PerceptionModel::identity();
  fs::create_directories(c.out_dir + "/collect");
  parallel_for(scenes.train.size(), c.jobs, [&](size_t i) {
    const Scene& scene = scenes.train[i];
    uint64_t stream = mix_u64(mix_u64(c.noise.seed, scene.seed), exp_seed);
    EpisodeConfig ecfg = c.episode_config(dump_frames > 0);
    EpisodeResult ep = run_episode(scene, pol, identity, c.noise, stream, ecfg,
                                   mix_u64(exp_seed, scene.seed), 0);
    std::string base = c.out_dir + "/collect/scene_" + std::to_string(scene.seed);
    write_trace_csv(ep.trace, base + "_trace.csv");
    save_svm1(ep.map, base + "_map.svm1");
    for (int k = 0; k < dump_frames && k < int(ep.frames.size()); ++k) {
      write_depth_pgm(ep.frames[size_t(k)].gt.depth,
                      base + "_frame" + std::to_string(k) + "_depth.pgm");
      write_category_ppm(ep.frames[size_t(k)].gt.category,
                         base + "_frame" + std::to_string(k) + "_cat.ppm");
    }
  });
  std::printf("collected %zu episodes -> %s/collect\n", scenes.train.size(),
              c.out_dir.c_str());
  return 0;
}

// Rebuild frames from the stored trace (rendering is deterministic in pose)
// and project instance labels from the stored voxel map.
int cmd_labelprop(const CommonArgs& args) {
  ExperimentConfig c = load_config(args);
  ScenesBundle scenes = make_scenes(c);
  size_t done = 0;
  for (const Scene& scene : scenes.train) {
    std::string base = c.out_dir + "/collect/scene_" + std::to_string(scene.seed);
    if (!fs::exists(base + "_map.svm1")) continue;
    SemanticVoxelMap map = load_svm1(base + "_map.svm1", c.map.voxel_size);
    // traces store poses; re-read them
    std::ifstream tf(base + "_trace.csv");
    if (!tf) continue;
    std::string line;
    std::getline(tf, line);  // header
    std::vector<Pose> poses;
    while (std::getline(tf, line)) {
      double x, y, th;
      if (std::sscanf(line.c_str(), "%*d,%lf,%lf,%lf", &x, &y, &th) == 3)
        poses.push_back(Pose{x, y, th});
    }
    // the map anchor is the spawn pose of the deterministic reset
    AgentState start = reset(scene, 0);
    SemanticVoxelMap anchored(c.map, start.pose);
    LabeledInstanceMap labeled = label_map(map, c.s_hat);
    labeled.origin_x = anchored.origin_x();
    labeled.origin_y = anchored.origin_y();
    AnnotationWriter w(base + "_labels.jsonl");
    for (size_t i = 0; i < poses.size(); ++i) {
      GroundTruthFrame gt = render(scene, poses[i], c.camera);
      FrameLabels fl = get_labels(labeled, poses[i], gt.depth, c.camera);
      w.add(int(i + 1), poses[i], fl);
    }
    ++done;
  }
  std::printf("labeled %zu episodes -> %s/collect\n", done, c.out_dir.c_str());
  return 0;
}

int cmd_finetune(const CommonArgs& args) {
  ExperimentConfig c = load_config(args);
  ScenesBundle scenes = make_scenes(c);
  uint64_t exp_seed = c.seeds.front();
  CalibrationDataset pools;
  pools.categories = kNumCategories;
  size_t frames = 0;
  for (const Scene& scene : scenes.train) {
    std::string base = c.out_dir + "/collect/scene_" + std::to_string(scene.seed);
    if (!fs::exists(base + "_labels.jsonl")) continue;
    auto anns = read_annotations(base + "_labels.jsonl", c.camera.width_px,
                                 c.camera.height_px);
    uint64_t stream = mix_u64(mix_u64(c.noise.seed, scene.seed), exp_seed);
    Rng rng = Rng(mix_u64(exp_seed, scene.seed)).fork(0x9001);
    for (const auto& fa : anns) {
      GroundTruthFrame gt = render(scene, fa.pose, c.camera);
      ScoreImage raw = predict_raw(gt, c.noise, stream);
      Image<uint8_t> lbl(fa.labels.width, fa.labels.height, 0);
      lbl.data.assign(fa.labels.category.begin(), fa.labels.category.end());
      pools.add_frame(raw, lbl, rng);
      ++frames;
    }
  }
  if (frames == 0) {
    std::cerr << "no labeled frames found under " << c.out_dir << "/collect\n";
    return 3;
  }
  FineTuneOptions fo = c.finetune_opts;
  fo.seed = mix_u64(fo.seed, exp_seed);
  PerceptionModel model = fine_tune_pools(PerceptionModel::identity(), pools,
                                          c.finetune_lr, c.finetune_iters, fo);
  save_model(model, c.out_dir + "/model.json");
  std::printf("fine-tuned on %zu frames -> %s/model.json\n", frames,
              c.out_dir.c_str());
  return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& model_path) {
  ExperimentConfig c = load_config(args);
  ScenesBundle scenes = make_scenes(c);
  PerceptionModel pretrained = PerceptionModel::identity();
  PerceptionModel model = model_path.empty()
                              ? load_model(c.out_dir + "/model.json")
                              : load_model(model_path);
  MethodRow pre{"pretrained", "generalization", {}, {}, {}};
  MethodRow tuned{"finetuned", "generalization", {}, {}, {}};
  for (uint64_t exp_seed : c.seeds) {
    SeedBlock bp{exp_seed, {}, {}, 0, 0, 0}, bt = bp;
    for (const Scene& scene : scenes.test) {
      EvalPoseSet ps = make_eval_poses(scene, c.eval_images_per_scene, c.eval_seed);
      auto scores = evaluate_models_on_scene(scene, c.camera, ps, c.noise,
                                             eval_stream(c, scene, exp_seed),
                                             {&pretrained, &model}, c.jobs);
      bp.scenes.push_back({scene.seed, scores[0]});
      bt.scenes.push_back({scene.seed, scores[1]});
    }
    pre.seeds.push_back(bp);
    tuned.seeds.push_back(bt);
  }
  finalize_row(pre);
  finalize_row(tuned);
  EvalReport report;
  report.config_echo = config_to_json(c);
  report.metadata = {{"ap_interpolation", "all-point"}};
  report.rows = {pre, tuned};
  write_report(report, c.out_dir, "report_eval");
  print_report(report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SEAL: self-supervised embodied active learning at desk scale"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string policy_file, model_path;
  int dump_frames = 0;

  add_common(app.add_subcommand("generate-scenes", "write scene JSON files"), args);
  add_common(app.add_subcommand("train-policy", "train the exploration policy"), args);
  auto* collect = app.add_subcommand("collect", "run episodes, write traces and maps");
  add_common(collect, args);
  collect->add_option("--policy-file", policy_file, "trained policy JSON");
  collect->add_option("--dump-frames", dump_frames, "write PGM/PPM for first N frames");
  add_common(app.add_subcommand("labelprop", "project voxel labels onto frames"), args);
  add_common(app.add_subcommand("finetune", "fine-tune the perception model"), args);
  auto* eval = app.add_subcommand("eval", "evaluate models on the test scenes");
  add_common(eval, args);
  eval->add_option("--model", model_path, "model JSON to evaluate");
  add_common(app.add_subcommand("run-all", "full generalization + specialization"), args);
  add_common(app.add_subcommand("ablate", "policy x labeling ablation grid"), args);
  add_common(app.add_subcommand("weak-sup", "weak supervision protocol"), args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand("generate-scenes")) return cmd_generate_scenes(args);
    if (app.got_subcommand("train-policy")) return cmd_train_policy(args);
    if (app.got_subcommand("collect")) return cmd_collect(args, policy_file, dump_frames);
    if (app.got_subcommand("labelprop")) return cmd_labelprop(args);
    if (app.got_subcommand("finetune")) return cmd_finetune(args);
    if (app.got_subcommand("eval")) return cmd_eval(args, model_path);
    if (app.got_subcommand("run-all")) {
      ExperimentConfig c = load_config(args);
      ArtifactSink sink;
      sink.dir = c.out_dir + "/artifacts";
      EvalReport report = run_all(c, sink);
      print_report(report);
      return 0;
    }
    if (app.got_subcommand("ablate")) {
      ExperimentConfig c = load_config(args);
      print_report(run_ablations(c));
      return 0;
    }
    if (app.got_subcommand("weak-sup")) {
      ExperimentConfig c = load_config(args);
      print_report(run_weak_supervision(c, c.weak_k));
      return 0;
    }
  } catch (const SealError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::ConfigInvalid ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}

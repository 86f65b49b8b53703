#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "oracles.hpp"
#include "seal/evalharness.hpp"

using namespace seal;
using Catch::Approx;

namespace {

InstanceMask rect_mask(int cat, double conf, int x0, int y0, int x1, int y1,
                       int W = 64, int H = 64, int id = 1) {
  InstanceMask m;
  m.id = id;
  m.category = cat;
  m.confidence = conf;
  m.x0 = x0;
  m.y0 = y0;
  m.x1 = x1;
  m.y1 = y1;
  m.bits.assign((size_t(W) * H + 63) / 64, 0);
  for (int r = y0; r <= y1; ++r)
    for (int c = x0; c <= x1; ++c) {
      m.set(r, c, W);
      m.pixel_count++;
    }
  return m;
}

double rect_iou(const InstanceMask& a, const InstanceMask& b) {
  int ix0 = std::max(a.x0, b.x0), iy0 = std::max(a.y0, b.y0);
  int ix1 = std::min(a.x1, b.x1), iy1 = std::min(a.y1, b.y1);
  if (ix1 < ix0 || iy1 < iy0) return 0;
  double inter = double(ix1 - ix0 + 1) * (iy1 - iy0 + 1);
  double aa = double(a.x1 - a.x0 + 1) * (a.y1 - a.y0 + 1);
  double ab = double(b.x1 - b.x0 + 1) * (b.y1 - b.y0 + 1);
  return inter / (aa + ab - inter);
}

ExperimentConfig mini_config() {
  ExperimentConfig c;
  c.scene.extent_x = c.scene.extent_y = 6.4;
  c.scene.rooms_min = 1;
  c.scene.rooms_max = 1;
  c.scene.objects_min = 2;
  c.scene.objects_max = 3;
  c.train_seed_first = 1001;
  c.train_count = 2;
  c.test_seed_first = 9001;
  c.test_count = 1;
  c.camera.width_px = c.camera.height_px = 32;
  c.map.L = c.map.W = 160;
  c.map.H = 28;
  c.slice_z_lo = 2;
  c.slice_z_hi = 24;
  c.T = 40;
  c.policy_train.episodes = 4;
  c.policy_train.batch = 2;
  c.finetune_iters = 300;
  c.eval_images_per_scene = 30;
  c.seeds = {1};
  c.jobs = 1;
  return c;
}

}  // namespace

TEST_CASE("perfect predictions score AP50 of one, no predictions zero",
          "[evalharness][ap]") {
  std::vector<std::vector<InstanceMask>> gt(3), pred(3);
  for (int i = 0; i < 3; ++i) {
    gt[size_t(i)].push_back(rect_mask(1, 1.0, 5, 5, 20, 20));
    gt[size_t(i)].push_back(rect_mask(2, 1.0, 30, 30, 50, 44));
    pred[size_t(i)] = gt[size_t(i)];
  }
  CHECK(ap50(gt, pred, IouMode::Box) == Approx(1.0));
  CHECK(ap50(gt, pred, IouMode::Mask) == Approx(1.0));
  std::vector<std::vector<InstanceMask>> none(3);
  CHECK(ap50(gt, none, IouMode::Box) == Approx(0.0));
}

TEST_CASE("rank order of a true and a false positive decides the AP",
          "[evalharness][ap]") {
  // 1 GT box; two predictions: IoU 0.6 and IoU 0.0
  std::vector<std::vector<InstanceMask>> gt(1), pred(1);
  gt[0].push_back(rect_mask(1, 1.0, 10, 10, 19, 19));  // 10x10
  InstanceMask hit = rect_mask(1, 0.9, 10, 12, 19, 19);  // IoU 0.8
  InstanceMask miss = rect_mask(1, 0.8, 40, 40, 49, 49);
  REQUIRE(rect_iou(gt[0][0], hit) >= 0.5);
  REQUIRE(rect_iou(gt[0][0], miss) == 0.0);
  pred[0] = {hit, miss};
  CHECK(ap50(gt, pred, IouMode::Box) == Approx(1.0));
  // swap confidences: the FP outranks the TP
  pred[0][0].confidence = 0.8;
  pred[0][1].confidence = 0.9;
  CHECK(ap50(gt, pred, IouMode::Box) == Approx(0.5));
}

TEST_CASE("macro average covers only categories present in the ground truth",
          "[evalharness][ap]") {
  std::vector<std::vector<InstanceMask>> gt(1), pred(1);
  gt[0].push_back(rect_mask(1, 1.0, 5, 5, 20, 20));
  gt[0].push_back(rect_mask(3, 1.0, 30, 30, 50, 44));
  pred[0].push_back(rect_mask(1, 0.9, 5, 5, 20, 20));       // perfect for cat 1
  pred[0].push_back(rect_mask(5, 0.9, 30, 30, 50, 44));     // wrong category
  std::array<double, kNumCategories> per_cat;
  double macro = ap50(gt, pred, IouMode::Box, &per_cat);
  CHECK(macro == Approx(0.5));  // cat1 = 1.0, cat3 = 0.0, cat5 absent
  CHECK(per_cat[0] == Approx(1.0));
  CHECK(per_cat[2] == Approx(0.0));
  CHECK(per_cat[4] == -1);
}

TEST_CASE("AP matches the re-derived oracle on random micro-instances",
          "[evalharness][ap][oracle]") {
  Rng rng(211);
  for (int trial = 0; trial < 200; ++trial) {
    int n_gt = 1 + int(rng.uniform_int(3));
    int n_pred = int(rng.uniform_int(7));
    std::vector<std::vector<InstanceMask>> gt(1), pred(1);
    for (int g = 0; g < n_gt; ++g) {
      int x0 = int(rng.uniform_int(40)), y0 = int(rng.uniform_int(40));
      int w = 6 + int(rng.uniform_int(18)), h = 6 + int(rng.uniform_int(18));
      gt[0].push_back(rect_mask(1, 1.0, x0, y0, std::min(63, x0 + w),
                                std::min(63, y0 + h), 64, 64, g + 1));
    }
    for (int p = 0; p < n_pred; ++p) {
      int x0 = int(rng.uniform_int(40)), y0 = int(rng.uniform_int(40));
      int w = 6 + int(rng.uniform_int(18)), h = 6 + int(rng.uniform_int(18));
      double conf = (1 + rng.uniform_int(5)) / 5.0;  // coarse: forces ties
      pred[0].push_back(rect_mask(1, conf, x0, y0, std::min(63, x0 + w),
                                  std::min(63, y0 + h), 64, 64, p + 1));
    }
    double got_box = ap50(gt, pred, IouMode::Box);
    double got_mask = ap50(gt, pred, IouMode::Mask);
    CHECK(got_box == Approx(got_mask).margin(1e-12));  // filled rects agree

    std::vector<oracles::MicroPred> mp;
    for (const auto& p : pred[0]) {
      oracles::MicroPred m{};
      m.conf = p.confidence;
      m.n_gt_boxes = n_gt;
      for (int g = 0; g < n_gt; ++g) m.iou_with[g] = rect_iou(p, gt[0][size_t(g)]);
      mp.push_back(m);
    }
    double want = oracles::ap50_rederived(mp, n_gt);
    REQUIRE(got_box == Approx(want).margin(1e-9));
  }
}

TEST_CASE("config validation rejects bad setups", "[evalharness][config]") {
  ExperimentConfig c = mini_config();
  c.validate();
  ExperimentConfig overlap = c;
  overlap.test_seed_first = overlap.train_seed_first + 1;
  CHECK_THROWS_AS(overlap.validate(), SealError);
  ExperimentConfig badcam = c;
  badcam.camera.depth_min = 9.0;
  CHECK_THROWS_AS(badcam.validate(), SealError);
  ExperimentConfig badshat = c;
  badshat.s_hat = 1.5;
  CHECK_THROWS_AS(badshat.validate(), SealError);
}

TEST_CASE("config JSON round trip preserves every field", "[evalharness][config]") {
  ExperimentConfig c = mini_config();
  c.noise.fp_rate = 0.17;
  c.finetune_lr = 0.123;
  c.weak_k = {0, 7};
  ordered_json j = config_to_json(c);
  ExperimentConfig back = config_from_json(j);
  CHECK(config_to_json(back).dump() == j.dump());
}

TEST_CASE("detect_instances groups thresholded pixels with mean confidence",
          "[evalharness]") {
  PerceptionModel model = PerceptionModel::identity();
  ScoreImage s(32, 32, kNumCategories);
  for (int r = 4; r < 12; ++r)
    for (int c = 4; c < 12; ++c) s.at(r, c, 0) = 0.8f;
  for (int r = 20; r < 26; ++r)
    for (int c = 20; c < 26; ++c) s.at(r, c, 2) = 0.6f;
  s.at(30, 30, 4) = 0.9f;  // 1-pixel blob: dropped
  auto dets = detect_instances(s, model);
  REQUIRE(dets.size() == 2);
  CHECK(dets[0].category == 1);
  CHECK(dets[0].confidence == Approx(0.8).margin(1e-6));
  CHECK(dets[0].pixel_count == 64);
  CHECK(dets[1].category == 3);
  CHECK(dets[1].x0 == 20);
  CHECK(dets[1].y1 == 25);
}

TEST_CASE("weak frame selection ranks ambiguity and breaks ties by index",
          "[evalharness][weak]") {
  CameraModel cam;
  cam.width_px = cam.height_px = 16;
  MapDims dims;
  dims.L = dims.W = 256;
  dims.H = 64;
  SemanticVoxelMap map(dims, Pose{0, 0, 0});
  // wall of ambiguous voxels 2m east; wall of confident voxels 2m west
  for (int dy = -60; dy <= 60; ++dy)
    for (int dz = 0; dz < 40; ++dz) {
      float amb[kNumCategories] = {0.5f, 0.5f, 0, 0, 0, 0};
      map.fuse(128 + 40, 128 + dy, dz, amb, kNumCategories);
      float conf[kNumCategories] = {0.95f, 0, 0, 0, 0, 0};
      map.fuse(128 - 40, 128 + dy, dz, conf, kNumCategories);
    }
  auto frame_at = [&](double theta) {
    CollectedFrame f;
    f.gt.pose = Pose{0, 0, theta};
    f.gt.depth = DepthImage(16, 16);
    std::fill(f.gt.depth.z.begin(), f.gt.depth.z.end(), 2.0f);
    std::fill(f.gt.depth.valid.begin(), f.gt.depth.valid.end(), uint8_t(1));
    f.gt.category = Image<uint8_t>(16, 16, 0);
    f.gt.instance = Image<int32_t>(16, 16, 0);
    return f;
  };
  std::vector<CollectedFrame> frames;
  frames.push_back(frame_at(180));  // B: confident wall
  frames.push_back(frame_at(0));    // A: ambiguous wall
  auto top1 = select_weak_frames(map, frames, cam, 1);
  REQUIRE(top1.size() == 1);
  CHECK(top1[0] == 1);  // the ambiguous view wins

  CHECK(select_weak_frames(map, frames, cam, 0).empty());

  // uniform confident map: all entropies equal, tie-break by index
  std::vector<CollectedFrame> same;
  same.push_back(frame_at(180));
  same.push_back(frame_at(180));
  same.push_back(frame_at(180));
  auto top2 = select_weak_frames(map, same, cam, 2);
  REQUIRE(top2.size() == 2);
  CHECK(top2[0] == 0);
  CHECK(top2[1] == 1);
}

TEST_CASE("collect_scene with T=1 yields exactly one frame", "[evalharness]") {
  ExperimentConfig c = mini_config();
  c.T = 1;
  Scene scene = generate_scene(c.train_seed_first, c.scene);
  ExplorationPolicy pol{PolicyKind::Gainful, {}};
  CalibrationDataset pools;
  CollectStats st = collect_scene(scene, pol, PerceptionModel::identity(),
                                  c.noise, 1, c.episode_config(true),
                                  LabelSource::LabelProp, 0, pools);
  CHECK(st.frames == 1);
  CHECK(pools.frames == 1);
}

TEST_CASE("collection artifacts are byte-identical across runs",
          "[evalharness][determinism]") {
  ExperimentConfig c = mini_config();
  c.T = 15;
  Scene scene = generate_scene(c.train_seed_first, c.scene);
  ExplorationPolicy pol{PolicyKind::Gainful, {}};
  namespace fs = std::filesystem;
  std::string base = fs::temp_directory_path().string();
  for (const char* d : {"/seal_cs_a", "/seal_cs_b"}) {
    fs::remove_all(base + d);
    ArtifactSink sink;
    sink.dir = base + d;
    CalibrationDataset pools;
    collect_scene(scene, pol, PerceptionModel::identity(), c.noise, 1,
                  c.episode_config(true), LabelSource::LabelProp, 0, pools, sink);
  }
  std::string name = "/scene_" + std::to_string(scene.seed);
  CHECK(read_text_file(base + "/seal_cs_a" + name + "_labels.jsonl") ==
        read_text_file(base + "/seal_cs_b" + name + "_labels.jsonl"));
  CHECK(read_text_file(base + "/seal_cs_a" + name + "_trace.csv") ==
        read_text_file(base + "/seal_cs_b" + name + "_trace.csv"));
}

TEST_CASE("annotation JSONL round-trips through the reader", "[evalharness]") {
  ExperimentConfig c = mini_config();
  c.T = 10;
  Scene scene = generate_scene(c.train_seed_first, c.scene);
  ExplorationPolicy pol{PolicyKind::Gainful, {}};
  namespace fs = std::filesystem;
  std::string dir = fs::temp_directory_path().string() + "/seal_ann";
  fs::remove_all(dir);
  ArtifactSink sink;
  sink.dir = dir;
  CalibrationDataset pools;
  collect_scene(scene, pol, PerceptionModel::identity(), c.noise, 1,
                c.episode_config(true), LabelSource::LabelProp, 0, pools, sink);
  auto anns = read_annotations(dir + "/scene_" + std::to_string(scene.seed) +
                                   "_labels.jsonl",
                               c.camera.width_px, c.camera.height_px);
  REQUIRE(anns.size() == 10);
  CHECK(anns[0].frame_index == 1);
  CHECK(anns[9].frame_index == 10);
}

TEST_CASE("run_all produces a byte-identical report for a fixed config",
          "[evalharness][determinism]") {
  ExperimentConfig c = mini_config();
  namespace fs = std::filesystem;
  std::string base = fs::temp_directory_path().string();
  std::string j1, j2;
  {
    c.out_dir = base + "/seal_runall_a";
    fs::remove_all(c.out_dir);
    EvalReport r = run_all(c);
    j1 = read_text_file(c.out_dir + "/report.json");
    REQUIRE(r.find("seal", "generalization") != nullptr);
    REQUIRE(r.find("seal", "specialization") != nullptr);
    REQUIRE(r.find("pretrained", "generalization") != nullptr);
  }
  {
    c.out_dir = base + "/seal_runall_b";
    fs::remove_all(c.out_dir);
    run_all(c);
    j2 = read_text_file(c.out_dir + "/report.json");
  }
  // the config echo embeds out_dir; normalize it before comparing
  auto normalize = [&](std::string s, const std::string& dir) {
    size_t pos;
    while ((pos = s.find(dir)) != std::string::npos) s.replace(pos, dir.size(), "OUT");
    return s;
  };
  CHECK(normalize(j1, base + "/seal_runall_a") ==
        normalize(j2, base + "/seal_runall_b"));
  // CSV has the table shape
  std::string csv = read_text_file(base + "/seal_runall_b/report.csv");
  CHECK(csv.rfind("method,setting,det_AP50,seg_AP50\n", 0) == 0);
}

TEST_CASE("reports are independent of the worker count",
          "[evalharness][determinism]") {
  ExperimentConfig c = mini_config();
  namespace fs = std::filesystem;
  std::string base = fs::temp_directory_path().string();
  c.out_dir = base + "/seal_jobs_1";
  fs::remove_all(c.out_dir);
  c.jobs = 1;
  run_all(c);
  std::string j1 = read_text_file(c.out_dir + "/report.json");
  c.out_dir = base + "/seal_jobs_4";
  fs::remove_all(c.out_dir);
  c.jobs = 4;
  run_all(c);
  std::string j4 = read_text_file(c.out_dir + "/report.json");
  auto strip = [](std::string s) {
    // out_dir and jobs appear in the config echo; drop those lines
    std::string out;
    size_t start = 0;
    while (start < s.size()) {
      size_t end = s.find('\n', start);
      if (end == std::string::npos) end = s.size();
      std::string line = s.substr(start, end - start);
      if (line.find("out_dir") == std::string::npos &&
          line.find("seal_jobs") == std::string::npos)
        out += line + "\n";
      start = end + 1;
    }
    return out;
  };
  CHECK(strip(j1) == strip(j4));
}

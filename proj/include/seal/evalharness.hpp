#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "seal/common.hpp"
#include "seal/envsim.hpp"
#include "seal/jsonio.hpp"
#include "seal/labelprop.hpp"
#include "seal/perception.hpp"
#include "seal/policy.hpp"
#include "seal/semmap.hpp"

namespace seal {

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

struct ExperimentConfig {
  SceneParams scene;
  uint64_t train_seed_first = 1001;
  int train_count = 25;
  uint64_t test_seed_first = 9001;
  int test_count = 5;
  CameraModel camera;
  NoiseProfile noise;
  MapDims map;
  double s_hat = 0.9;
  int T = 300;
  int slice_z_lo = 2, slice_z_hi = 40;
  PolicyKind policy = PolicyKind::Gainful;
  TrainOptions policy_train;
  double finetune_lr = 0.02;
  int finetune_iters = 5000;
  FineTuneOptions finetune_opts;
  int eval_images_per_scene = 500;
  uint64_t eval_seed = 23;
  std::vector<uint64_t> seeds = {1, 2, 3};
  std::vector<int> weak_k = {0, 5, 10};
  std::string out_dir = "out";
  int jobs = 1;

  void validate() const {
    auto overlap = [](uint64_t a0, int an, uint64_t b0, int bn) {
      return a0 < b0 + uint64_t(bn) && b0 < a0 + uint64_t(an);
    };
    if (train_count < 1 || test_count < 1)
      fail(ErrorKind::ConfigInvalid, "scene counts must be positive");
    if (overlap(train_seed_first, train_count, test_seed_first, test_count))
      fail(ErrorKind::ConfigInvalid, "train/test seed ranges overlap");
    if (!(s_hat > 0 && s_hat < 1))
      fail(ErrorKind::ConfigInvalid, "s_hat must be in (0,1)");
    if (T < 1) fail(ErrorKind::ConfigInvalid, "T must be >= 1");
    if (slice_z_lo < 0 || slice_z_hi <= slice_z_lo || slice_z_hi > map.H)
      fail(ErrorKind::ConfigInvalid, "bad slice z range");
    if (eval_images_per_scene < 1)
      fail(ErrorKind::ConfigInvalid, "eval_images_per_scene must be >= 1");
    if (seeds.empty()) fail(ErrorKind::ConfigInvalid, "need at least one seed");
    if (camera.width_px < 1 || camera.height_px < 1 ||
        camera.hfov_deg <= 0 || camera.hfov_deg >= 180 ||
        camera.depth_min >= camera.depth_max)
      fail(ErrorKind::ConfigInvalid, "bad camera");
    if (noise.fp_rate < 0 || noise.fp_rate > 1)
      fail(ErrorKind::ConfigInvalid, "fp rate out of [0,1]");
    for (double r : noise.miss_rate)
      if (r < 0 || r > 1) fail(ErrorKind::ConfigInvalid, "miss rate out of [0,1]");
    if (finetune_iters < 0 || policy_train.episodes < 0)
      fail(ErrorKind::ConfigInvalid, "negative budget");
  }

  EpisodeConfig episode_config(bool store_frames) const {
    EpisodeConfig e;
    e.camera = camera;
    e.map_dims = map;
    e.s_hat = s_hat;
    e.T = T;
    e.slice_z_lo = slice_z_lo;
    e.slice_z_hi = slice_z_hi;
    e.store_frames = store_frames;
    return e;
  }
};

inline ordered_json config_to_json(const ExperimentConfig& c) {
  ordered_json j;
  j["scene"] = {{"extent_x", c.scene.extent_x}, {"extent_y", c.scene.extent_y},
                {"extent_z", c.scene.extent_z}, {"rooms_min", c.scene.rooms_min},
                {"rooms_max", c.scene.rooms_max}, {"objects_min", c.scene.objects_min},
                {"objects_max", c.scene.objects_max}, {"cell", c.scene.cell}};
  j["seeds"] = {{"train_first", c.train_seed_first}, {"train_count", c.train_count},
                {"test_first", c.test_seed_first}, {"test_count", c.test_count},
                {"experiment", c.seeds}, {"eval", c.eval_seed}};
  j["camera"] = {{"width", c.camera.width_px}, {"height", c.camera.height_px},
                 {"hfov_deg", c.camera.hfov_deg}, {"height_m", c.camera.height_m},
                 {"depth_min", c.camera.depth_min}, {"depth_max", c.camera.depth_max}};
  j["noise"] = {{"miss_rate", c.noise.miss_rate}, {"fp_rate", c.noise.fp_rate},
                {"confusion", c.noise.confusion}, {"area_gain", c.noise.area_gain},
                {"p_conf_cap", c.noise.p_conf_cap},
                {"p_conf_override", c.noise.p_conf_override},
                {"conf_lo", c.noise.conf_lo}, {"conf_hi", c.noise.conf_hi},
                {"unconf_lo", c.noise.unconf_lo}, {"unconf_hi", c.noise.unconf_hi},
                {"bg_noise_hi", c.noise.bg_noise_hi}, {"seed", c.noise.seed}};
  j["map"] = {{"L", c.map.L}, {"W", c.map.W}, {"H", c.map.H},
              {"voxel", c.map.voxel_size}, {"s_hat", c.s_hat},
              {"slice_z_lo", c.slice_z_lo}, {"slice_z_hi", c.slice_z_hi}};
  j["policy"] = {{"kind", policy_kind_name(c.policy)},
                 {"episodes", c.policy_train.episodes},
                 {"batch", c.policy_train.batch}, {"lr", c.policy_train.lr},
                 {"reward_scale", c.policy_train.reward_scale},
                 {"baseline_decay", c.policy_train.baseline_decay},
                 {"seed", c.policy_train.seed}};
  j["episode"] = {{"T", c.T}, {"global_period", kGlobalPeriod}};
  j["finetune"] = {{"lr", c.finetune_lr}, {"iters", c.finetune_iters},
                   {"batch", c.finetune_opts.batch},
                   {"min_positive", c.finetune_opts.min_positive},
                   {"seed", c.finetune_opts.seed}};
  j["eval"] = {{"images_per_scene", c.eval_images_per_scene}};
  j["weak"] = {{"k", c.weak_k}};
  j["out_dir"] = c.out_dir;
  // reference constants from the original training recipe (not all live here)
  j["paper"] = {{"s_hat", 0.9}, {"T", 300},
                {"finetune", {{"sgd_lr", 1e-4}, {"iters", 5000}}},
                {"ppo", {{"threads", 25}, {"adam_lr", 2.5e-5}, {"gamma", 0.99},
                         {"entropy_coef", 0.001}, {"value_loss_coef", 0.5}}},
                {"split", {{"train", 25}, {"test", 5}}},
                {"eval_images_per_scene", 500}};
  return j;
}

inline ExperimentConfig config_from_json(const ordered_json& j) {
  ExperimentConfig c;
  if (j.contains("scene")) {
    const auto& s = j["scene"];
    if (s.contains("extent_x")) c.scene.extent_x = s["extent_x"].get<double>();
    if (s.contains("extent_y")) c.scene.extent_y = s["extent_y"].get<double>();
    if (s.contains("extent_z")) c.scene.extent_z = s["extent_z"].get<double>();
    if (s.contains("rooms_min")) c.scene.rooms_min = s["rooms_min"].get<int>();
    if (s.contains("rooms_max")) c.scene.rooms_max = s["rooms_max"].get<int>();
    if (s.contains("objects_min")) c.scene.objects_min = s["objects_min"].get<int>();
    if (s.contains("objects_max")) c.scene.objects_max = s["objects_max"].get<int>();
  }
  if (j.contains("seeds")) {
    const auto& s = j["seeds"];
    if (s.contains("train_first")) c.train_seed_first = s["train_first"].get<uint64_t>();
    if (s.contains("train_count")) c.train_count = s["train_count"].get<int>();
    if (s.contains("test_first")) c.test_seed_first = s["test_first"].get<uint64_t>();
    if (s.contains("test_count")) c.test_count = s["test_count"].get<int>();
    if (s.contains("experiment")) c.seeds = s["experiment"].get<std::vector<uint64_t>>();
    if (s.contains("eval")) c.eval_seed = s["eval"].get<uint64_t>();
  }
  if (j.contains("camera")) {
    const auto& s = j["camera"];
    if (s.contains("width")) c.camera.width_px = s["width"].get<int>();
    if (s.contains("height")) c.camera.height_px = s["height"].get<int>();
    if (s.contains("hfov_deg")) c.camera.hfov_deg = s["hfov_deg"].get<double>();
    if (s.contains("height_m")) c.camera.height_m = s["height_m"].get<double>();
    if (s.contains("depth_min")) c.camera.depth_min = s["depth_min"].get<double>();
    if (s.contains("depth_max")) c.camera.depth_max = s["depth_max"].get<double>();
  }
  if (j.contains("noise")) {
    const auto& s = j["noise"];
    if (s.contains("miss_rate")) c.noise.miss_rate = s["miss_rate"].get<std::vector<double>>();
    if (s.contains("fp_rate")) c.noise.fp_rate = s["fp_rate"].get<double>();
    if (s.contains("confusion")) c.noise.confusion = s["confusion"].get<std::vector<double>>();
    if (s.contains("area_gain")) c.noise.area_gain = s["area_gain"].get<double>();
    if (s.contains("p_conf_cap")) c.noise.p_conf_cap = s["p_conf_cap"].get<double>();
    if (s.contains("p_conf_override")) c.noise.p_conf_override = s["p_conf_override"].get<double>();
    if (s.contains("conf_lo")) c.noise.conf_lo = s["conf_lo"].get<double>();
    if (s.contains("conf_hi")) c.noise.conf_hi = s["conf_hi"].get<double>();
    if (s.contains("unconf_lo")) c.noise.unconf_lo = s["unconf_lo"].get<double>();
    if (s.contains("unconf_hi")) c.noise.unconf_hi = s["unconf_hi"].get<double>();
    if (s.contains("bg_noise_hi")) c.noise.bg_noise_hi = s["bg_noise_hi"].get<double>();
    if (s.contains("seed")) c.noise.seed = s["seed"].get<uint64_t>();
  }
  if (j.contains("map")) {
    const auto& s = j["map"];
    if (s.contains("L")) c.map.L = s["L"].get<int>();
    if (s.contains("W")) c.map.W = s["W"].get<int>();
    if (s.contains("H")) c.map.H = s["H"].get<int>();
    if (s.contains("voxel")) c.map.voxel_size = s["voxel"].get<double>();
    if (s.contains("s_hat")) c.s_hat = s["s_hat"].get<double>();
    if (s.contains("slice_z_lo")) c.slice_z_lo = s["slice_z_lo"].get<int>();
    if (s.contains("slice_z_hi")) c.slice_z_hi = s["slice_z_hi"].get<int>();
  }
  if (j.contains("policy")) {
    const auto& s = j["policy"];
    if (s.contains("kind")) c.policy = policy_kind_from(s["kind"].get<std::string>());
    if (s.contains("episodes")) c.policy_train.episodes = s["episodes"].get<int>();
    if (s.contains("batch")) c.policy_train.batch = s["batch"].get<int>();
    if (s.contains("lr")) c.policy_train.lr = s["lr"].get<double>();
    if (s.contains("reward_scale")) c.policy_train.reward_scale = s["reward_scale"].get<double>();
    if (s.contains("baseline_decay")) c.policy_train.baseline_decay = s["baseline_decay"].get<double>();
    if (s.contains("seed")) c.policy_train.seed = s["seed"].get<uint64_t>();
  }
  if (j.contains("episode") && j["episode"].contains("T"))
    c.T = j["episode"]["T"].get<int>();
  if (j.contains("finetune")) {
    const auto& s = j["finetune"];
    if (s.contains("lr")) c.finetune_lr = s["lr"].get<double>();
    if (s.contains("iters")) c.finetune_iters = s["iters"].get<int>();
    if (s.contains("batch")) c.finetune_opts.batch = s["batch"].get<int>();
    if (s.contains("min_positive")) c.finetune_opts.min_positive = s["min_positive"].get<size_t>();
    if (s.contains("seed")) c.finetune_opts.seed = s["seed"].get<uint64_t>();
  }
  if (j.contains("eval") && j["eval"].contains("images_per_scene"))
    c.eval_images_per_scene = j["eval"]["images_per_scene"].get<int>();
  if (j.contains("weak") && j["weak"].contains("k"))
    c.weak_k = j["weak"]["k"].get<std::vector<int>>();
  if (j.contains("out_dir")) c.out_dir = j["out_dir"].get<std::string>();
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// AP50
// ---------------------------------------------------------------------------

enum class IouMode { Box, Mask };

struct ApScore {
  double det = 0, seg = 0;
  std::array<double, kNumCategories> det_cat{};
  std::array<double, kNumCategories> seg_cat{};

  ApScore() {
    det_cat.fill(-1);
    seg_cat.fill(-1);
  }
};

// Standard AP at IoU 0.5: predictions sorted by descending confidence, each
// matched greedily to the best-IoU unmatched ground truth of its category in
// its image; all-point interpolated precision; macro-averaged over categories
// present in the ground truth.
inline double ap50(const std::vector<std::vector<InstanceMask>>& gt,
                   const std::vector<std::vector<InstanceMask>>& pred,
                   IouMode mode,
                   std::array<double, kNumCategories>* per_cat = nullptr) {
  if (gt.size() != pred.size())
    fail(ErrorKind::DimensionMismatch, "gt/pred image counts differ");
  auto iou = [&](const InstanceMask& a, const InstanceMask& b) {
    return mode == IouMode::Box ? box_iou(a, b) : mask_iou(a, b);
  };
  double total = 0;
  int present = 0;
  if (per_cat) per_cat->fill(-1);
  for (int cat = 1; cat <= kNumCategories; ++cat) {
    size_t n_gt = 0;
    for (const auto& g : gt)
      for (const auto& m : g)
        if (m.category == cat) ++n_gt;
    if (n_gt == 0) continue;
    ++present;

    struct Ref {
      double conf;
      size_t img, idx;
    };
    std::vector<Ref> refs;
    for (size_t i = 0; i < pred.size(); ++i)
      for (size_t k = 0; k < pred[i].size(); ++k)
        if (pred[i][k].category == cat) refs.push_back({pred[i][k].confidence, i, k});
    std::sort(refs.begin(), refs.end(), [](const Ref& a, const Ref& b) {
      if (a.conf != b.conf) return a.conf > b.conf;
      if (a.img != b.img) return a.img < b.img;
      return a.idx < b.idx;
    });

    std::vector<std::vector<uint8_t>> used(gt.size());
    for (size_t i = 0; i < gt.size(); ++i) used[i].assign(gt[i].size(), 0);

    std::vector<uint8_t> is_tp(refs.size(), 0);
    for (size_t r = 0; r < refs.size(); ++r) {
      const InstanceMask& p = pred[refs[r].img][refs[r].idx];
      double best = 0;
      int best_gi = -1;
      const auto& gims = gt[refs[r].img];
      for (size_t gi = 0; gi < gims.size(); ++gi) {
        if (gims[gi].category != cat || used[refs[r].img][gi]) continue;
        double v = iou(p, gims[gi]);
        if (v > best) {
          best = v;
          best_gi = int(gi);
        }
      }
      if (best >= 0.5 && best_gi >= 0) {
        is_tp[r] = 1;
        used[refs[r].img][size_t(best_gi)] = 1;
      }
    }

    // all-point interpolated AP
    size_t n = refs.size();
    std::vector<double> prec(n), rec(n);
    size_t tp = 0;
    for (size_t r = 0; r < n; ++r) {
      tp += is_tp[r];
      prec[r] = double(tp) / double(r + 1);
      rec[r] = double(tp) / double(n_gt);
    }
    for (size_t r = n; r-- > 1;) prec[r - 1] = std::max(prec[r - 1], prec[r]);
    double ap = 0, prev_rec = 0;
    for (size_t r = 0; r < n; ++r) {
      if (is_tp[r]) {
        ap += (rec[r] - prev_rec) * prec[r];
        prev_rec = rec[r];
      }
    }
    total += ap;
    if (per_cat) (*per_cat)[size_t(cat - 1)] = ap;
  }
  return present == 0 ? 0.0 : total / double(present);
}

// ---------------------------------------------------------------------------
// Turning model outputs into detections
// ---------------------------------------------------------------------------

inline FrameLabels gt_frame_labels(const GroundTruthFrame& gt) {
  FrameLabels fl(gt.depth.width, gt.depth.height);
  fl.instance.assign(gt.instance.data.begin(), gt.instance.data.end());
  fl.category.assign(gt.category.data.begin(), gt.category.data.end());
  return fl;
}

// Threshold calibrated scores at the per-category floor and group connected
// pixels (4-connectivity) into instances; confidence is the mean calibrated
// score over the component. This defines "detection" for a per-pixel model.
inline std::vector<InstanceMask> detect_instances(const ScoreImage& calibrated,
                                                  const PerceptionModel& model) {
  std::vector<InstanceMask> out;
  const int W = calibrated.width, H = calibrated.height;
  std::vector<int32_t> comp(size_t(W) * H);
  std::vector<size_t> stack;
  size_t words = (size_t(W) * H + 63) / 64;
  for (int cat = 0; cat < calibrated.categories; ++cat) {
    double floor_c = model.floor[size_t(cat)];
    std::fill(comp.begin(), comp.end(), 0);
    int32_t next = 0;
    for (int r = 0; r < H; ++r)
      for (int c = 0; c < W; ++c) {
        size_t i = size_t(r) * W + c;
        if (comp[i] || double(calibrated.s[i * calibrated.categories + size_t(cat)]) <= floor_c)
          continue;
        ++next;
        InstanceMask m;
        m.id = int(out.size()) + 1;
        m.category = cat + 1;
        m.x0 = m.x1 = c;
        m.y0 = m.y1 = r;
        m.bits.assign(words, 0);
        double conf_sum = 0;
        stack.push_back(i);
        comp[i] = next;
        while (!stack.empty()) {
          size_t cur = stack.back();
          stack.pop_back();
          int cr = int(cur / size_t(W)), cc = int(cur % size_t(W));
          m.x0 = std::min(m.x0, cc);
          m.x1 = std::max(m.x1, cc);
          m.y0 = std::min(m.y0, cr);
          m.y1 = std::max(m.y1, cr);
          m.pixel_count++;
          m.set(cr, cc, W);
          conf_sum += double(calibrated.s[cur * calibrated.categories + size_t(cat)]);
          const int dr[4] = {0, 0, 1, -1}, dc[4] = {1, -1, 0, 0};
          for (int k = 0; k < 4; ++k) {
            int nr = cr + dr[k], nc = cc + dc[k];
            if (nr < 0 || nr >= H || nc < 0 || nc >= W) continue;
            size_t ni = size_t(nr) * W + nc;
            if (comp[ni] ||
                double(calibrated.s[ni * calibrated.categories + size_t(cat)]) <= floor_c)
              continue;
            comp[ni] = next;
            stack.push_back(ni);
          }
        }
        if (m.pixel_count >= kMinInstancePixels) {
          m.confidence = conf_sum / double(m.pixel_count);
          out.push_back(std::move(m));
        }
      }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation pose sets and model scoring
// ---------------------------------------------------------------------------

struct EvalPoseSet {
  std::vector<Pose> poses;
  uint64_t checksum = 0;
};

inline EvalPoseSet make_eval_poses(const Scene& scene, int count, uint64_t eval_seed) {
  EvalPoseSet out;
  Grid2D<uint8_t> reach = reachable_cells(scene);
  Rng rng = Rng(mix_u64(eval_seed, scene.seed)).fork(0xe7a1);
  uint64_t sum = 0x9e3779b97f4a7c15ULL;
  for (int i = 0; i < count; ++i) {
    Pose p = sample_free_pose(scene, reach, rng);
    out.poses.push_back(p);
    uint64_t bx, by, bt;
    std::memcpy(&bx, &p.x, 8);
    std::memcpy(&by, &p.y, 8);
    std::memcpy(&bt, &p.theta, 8);
    sum = mix_u64(mix_u64(mix_u64(sum, bx), by), bt);
  }
  out.checksum = sum;
  return out;
}

// Evaluate several models on one scene with shared poses and shared raw
// predictions, so methods differ only by calibration.
inline std::vector<ApScore> evaluate_models_on_scene(
    const Scene& scene, const CameraModel& cam, const EvalPoseSet& eval_set,
    const NoiseProfile& noise, uint64_t noise_stream,
    const std::vector<const PerceptionModel*>& models, int jobs) {
  size_t n = eval_set.poses.size(), m = models.size();
  std::vector<std::vector<InstanceMask>> gt(n);
  std::vector<std::vector<std::vector<InstanceMask>>> preds(
      m, std::vector<std::vector<InstanceMask>>(n));
  parallel_for(n, jobs, [&](size_t i) {
    GroundTruthFrame frame = render(scene, eval_set.poses[i], cam);
    gt[i] = masks_to_annotations(gt_frame_labels(frame));
    ScoreImage raw = predict_raw(frame, noise, noise_stream);
    for (size_t k = 0; k < m; ++k)
      preds[k][i] = detect_instances(apply_calibration(raw, *models[k]), *models[k]);
  });
  std::vector<ApScore> out(m);
  for (size_t k = 0; k < m; ++k) {
    out[k].det = ap50(gt, preds[k], IouMode::Box, &out[k].det_cat);
    out[k].seg = ap50(gt, preds[k], IouMode::Mask, &out[k].seg_cat);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset collection
// ---------------------------------------------------------------------------

enum class LabelSource { LabelProp, SelfTrain };

struct CollectStats {
  size_t frames = 0;
  size_t instances = 0;
  size_t final_reward = 0;
};

// Self-training labels: the model's own thresholded calibrated predictions.
inline Image<uint8_t> self_training_labels(const ScoreImage& raw,
                                           const PerceptionModel& model) {
  Image<uint8_t> labels(raw.width, raw.height, 0);
  for (size_t i = 0; i < labels.size(); ++i) {
    int best = -1;
    double bs = 0;
    for (int c = 0; c < raw.categories; ++c) {
      double v = model.calibrate(double(raw.s[i * raw.categories + size_t(c)]), c);
      if (v > model.floor[size_t(c)] && v > bs) {
        bs = v;
        best = c;
      }
    }
    if (best >= 0) labels.data[i] = uint8_t(best + 1);
  }
  return labels;
}

// Mean per-pixel entropy of each frame over the first occupied voxel along
// every pixel ray; returns the top-k frame indices (ties to the lower index).
inline std::vector<int> select_weak_frames(const SemanticVoxelMap& map,
                                           const std::vector<CollectedFrame>& frames,
                                           const CameraModel& cam, int k) {
  if (k <= 0) return {};
  if (size_t(k) > frames.size())
    fail(ErrorKind::ConfigInvalid, "k exceeds episode length");
  const MapDims& d = map.dims();
  const GridDims dims{d.L, d.W, d.H};
  std::vector<std::pair<double, int>> scored;
  for (size_t fi = 0; fi < frames.size(); ++fi) {
    const GroundTruthFrame& gt = frames[fi].gt;
    Vec3 origin = map.world_to_grid(gt.pose.x, gt.pose.y, cam.height_m);
    double total = 0;
    size_t hits = 0;
    for (int r = 0; r < cam.height_px; ++r)
      for (int c = 0; c < cam.width_px; ++c) {
        Vec3 dir = rotate_z(cam.pixel_ray(r, c), gt.pose.theta);
        double fwd = cam.forward_component(r, c);
        double t_cap = cam.depth_max / fwd;
        double H = -1;
        for_each_ray_cell(origin, dir, dims, d.voxel_size, t_cap,
                          [&](int ix, int iy, int iz, double, double) {
                            if (map.occupancy(ix, iy, iz) == 0.f) return true;
                            double probs[kNumCategories + 1];
                            double mx = 0, sum = 0;
                            for (int cc = 0; cc < d.categories; ++cc) {
                              double s = double(map.score(ix, iy, iz, cc));
                              probs[cc] = s;
                              mx = std::max(mx, s);
                              sum += s;
                            }
                            probs[d.categories] = 1.0 - mx;  // background residual
                            sum += probs[d.categories];
                            double h = 0;
                            for (int cc = 0; cc <= d.categories; ++cc) {
                              double p = probs[cc] / sum;
                              if (p > 0) h -= p * std::log(p);
                            }
                            H = h;
                            return false;
                          });
        if (H >= 0) {
          total += H;
          ++hits;
        }
      }
    scored.emplace_back(hits ? total / double(hits) : 0.0, int(fi));
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<int> out;
  for (int i = 0; i < k; ++i) out.push_back(scored[size_t(i)].second);
  std::sort(out.begin(), out.end());
  return out;
}

// Optional persistence of per-scene collection artifacts.
struct ArtifactSink {
  std::string dir;  // empty disables
  bool dump_maps = false;

  void scene_episode(uint64_t scene_seed, const EpisodeTrace& trace,
                     const SemanticVoxelMap& map,
                     const std::vector<std::pair<Pose, FrameLabels>>* labels) const {
    if (dir.empty()) return;
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::string base = dir + "/scene_" + std::to_string(scene_seed);
    write_trace_csv(trace, base + "_trace.csv");
    if (dump_maps) save_svm1(map, base + "_map.svm1");
    if (labels) {
      AnnotationWriter w(base + "_labels.jsonl");
      for (size_t i = 0; i < labels->size(); ++i)
        w.add(int(i + 1), (*labels)[i].first, (*labels)[i].second);
    }
  }
};

// One exploration episode on one scene, labeled either by 3DLabelProp or by
// self-training, streamed into calibration pools. weak_k > 0 swaps the k
// highest-entropy frames' predictions for ground-truth annotations before the
// (rebuilt) map is labeled.
inline CollectStats collect_scene(const Scene& scene, const ExplorationPolicy& policy,
                                  const PerceptionModel& model,
                                  const NoiseProfile& noise, uint64_t exp_seed,
                                  const EpisodeConfig& cfg0, LabelSource source,
                                  int weak_k, CalibrationDataset& pools,
                                  const ArtifactSink& sink = {},
                                  CalibrationDataset* naive_pools = nullptr) {
  EpisodeConfig cfg = cfg0;
  cfg.store_frames = true;
  uint64_t stream = mix_u64(mix_u64(noise.seed, scene.seed), exp_seed);
  uint64_t ep_seed = mix_u64(exp_seed, scene.seed);
  EpisodeResult ep = run_episode(scene, policy, model, noise, stream, cfg,
                                 ep_seed, /*reset_seed=*/0);
  CollectStats stats;
  stats.frames = ep.frames.size();
  stats.final_reward = ep.trace.final_reward;
  Rng pool_rng = Rng(mix_u64(exp_seed, scene.seed)).fork(0x9001);

  std::vector<std::pair<Pose, FrameLabels>> archive;
  const bool keep_labels = !sink.dir.empty();

  if (source == LabelSource::SelfTrain) {
    for (const auto& f : ep.frames) {
      Image<uint8_t> labels = self_training_labels(f.raw, model);
      pools.add_frame(f.raw, labels, pool_rng);
    }
    sink.scene_episode(scene.seed, ep.trace, ep.map, nullptr);
    return stats;
  }

  const SemanticVoxelMap* final_map = &ep.map;
  SemanticVoxelMap rebuilt;
  std::vector<int> chosen;
  if (weak_k > 0) {
    chosen = select_weak_frames(ep.map, ep.frames, cfg.camera, weak_k);
    // the rebuilt map keeps the episode-start anchor
    rebuilt = SemanticVoxelMap(cfg.map_dims,
                               Pose{ep.map.origin_x(), ep.map.origin_y(), 0});
    for (size_t i = 0; i < ep.frames.size(); ++i) {
      bool annotated =
          std::binary_search(chosen.begin(), chosen.end(), int(i));
      ScoreImage scores = annotated
                              ? annotate_ground_truth(ep.frames[i].gt)
                              : apply_calibration(ep.frames[i].raw, model);
      update_map(rebuilt, ep.frames[i].gt.depth, scores, ep.frames[i].gt.pose,
                 cfg.camera);
    }
    final_map = &rebuilt;
  }

  LabeledInstanceMap labeled = label_map(*final_map, cfg.s_hat);
  for (size_t i = 0; i < ep.frames.size(); ++i) {
    const auto& f = ep.frames[i];
    FrameLabels fl = get_labels(labeled, f.gt.pose, f.gt.depth, cfg.camera);
    stats.instances += masks_to_annotations(fl).size();
    Image<uint8_t> lbl(fl.width, fl.height, 0);
    lbl.data.assign(fl.category.begin(), fl.category.end());
    pools.add_frame(f.raw, lbl, pool_rng);
    if (keep_labels) archive.emplace_back(f.gt.pose, std::move(fl));
  }
  if (naive_pools && weak_k > 0) {
    Rng naive_rng = Rng(mix_u64(exp_seed, scene.seed)).fork(0x9002);
    for (int idx : chosen) {
      const auto& f = ep.frames[size_t(idx)];
      Image<uint8_t> lbl(f.gt.category.width, f.gt.category.height, 0);
      lbl.data = f.gt.category.data;
      naive_pools->add_frame(f.raw, lbl, naive_rng);
    }
  }
  sink.scene_episode(scene.seed, ep.trace, *final_map,
                     keep_labels ? &archive : nullptr);
  return stats;
}

inline void merge_pools(CalibrationDataset& into, const CalibrationDataset& from) {
  for (int c = 0; c < into.categories; ++c) {
    auto& ip = into.pos[size_t(c)];
    auto& in = into.neg[size_t(c)];
    const auto& fp = from.pos[size_t(c)];
    const auto& fn = from.neg[size_t(c)];
    ip.insert(ip.end(), fp.begin(), fp.end());
    in.insert(in.end(), fn.begin(), fn.end());
  }
  into.frames += from.frames;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct SceneScore {
  uint64_t scene_seed = 0;
  ApScore ap;
};

struct SeedBlock {
  uint64_t exp_seed = 0;
  std::vector<SceneScore> scenes;
  ApScore mean;
  double reward_mean = 0;
  size_t frames = 0, instances = 0;
};

struct MethodRow {
  std::string method;
  std::string setting;  // "generalization" or "specialization"
  std::vector<SeedBlock> seeds;
  ApScore mean;                        // over seeds of per-seed scene means
  std::vector<SceneScore> scene_mean;  // per scene, averaged over seeds
};

struct EvalReport {
  ordered_json config_echo;
  ordered_json metadata;
  std::vector<MethodRow> rows;

  const MethodRow* find(const std::string& method, const std::string& setting) const {
    for (const auto& r : rows)
      if (r.method == method && r.setting == setting) return &r;
    return nullptr;
  }
};

inline ApScore average_scores(const std::vector<ApScore>& xs) {
  ApScore out;
  if (xs.empty()) return out;
  out.det = out.seg = 0;
  std::array<double, kNumCategories> dsum{}, ssum{};
  std::array<int, kNumCategories> dcnt{}, scnt{};
  for (const auto& x : xs) {
    out.det += x.det;
    out.seg += x.seg;
    for (int c = 0; c < kNumCategories; ++c) {
      if (x.det_cat[size_t(c)] >= 0) {
        dsum[size_t(c)] += x.det_cat[size_t(c)];
        dcnt[size_t(c)]++;
      }
      if (x.seg_cat[size_t(c)] >= 0) {
        ssum[size_t(c)] += x.seg_cat[size_t(c)];
        scnt[size_t(c)]++;
      }
    }
  }
  out.det /= double(xs.size());
  out.seg /= double(xs.size());
  for (int c = 0; c < kNumCategories; ++c) {
    out.det_cat[size_t(c)] = dcnt[size_t(c)] ? dsum[size_t(c)] / dcnt[size_t(c)] : -1;
    out.seg_cat[size_t(c)] = scnt[size_t(c)] ? ssum[size_t(c)] / scnt[size_t(c)] : -1;
  }
  return out;
}

inline void finalize_row(MethodRow& row) {
  std::vector<ApScore> seed_means;
  for (auto& sb : row.seeds) {
    std::vector<ApScore> scene_scores;
    for (const auto& s : sb.scenes) scene_scores.push_back(s.ap);
    sb.mean = average_scores(scene_scores);
    seed_means.push_back(sb.mean);
  }
  row.mean = average_scores(seed_means);
  row.scene_mean.clear();
  if (!row.seeds.empty()) {
    size_t ns = row.seeds.front().scenes.size();
    for (size_t i = 0; i < ns; ++i) {
      std::vector<ApScore> per_seed;
      for (const auto& sb : row.seeds) per_seed.push_back(sb.scenes[i].ap);
      row.scene_mean.push_back(
          {row.seeds.front().scenes[i].scene_seed, average_scores(per_seed)});
    }
  }
}

inline ordered_json report_to_json(const EvalReport& report) {
  auto pct = [](double v) { return std::round(v * 10000.0) / 100.0; };
  auto cat_array = [&](const std::array<double, kNumCategories>& a) {
    ordered_json out = ordered_json::array();
    for (double v : a) out.push_back(v < 0 ? ordered_json(nullptr) : ordered_json(pct(v)));
    return out;
  };
  ordered_json j;
  j["format"] = "seal-report-v1";
  j["config"] = report.config_echo;
  j["metadata"] = report.metadata;
  ordered_json rows = ordered_json::array();
  for (const auto& r : report.rows) {
    ordered_json jr;
    jr["method"] = r.method;
    jr["setting"] = r.setting;
    jr["det_ap50"] = pct(r.mean.det);
    jr["seg_ap50"] = pct(r.mean.seg);
    jr["det_ap50_per_category"] = cat_array(r.mean.det_cat);
    jr["seg_ap50_per_category"] = cat_array(r.mean.seg_cat);
    ordered_json scenes = ordered_json::array();
    for (const auto& s : r.scene_mean)
      scenes.push_back({{"scene_seed", s.scene_seed},
                        {"det_ap50", pct(s.ap.det)},
                        {"seg_ap50", pct(s.ap.seg)}});
    jr["scenes"] = scenes;
    ordered_json seeds = ordered_json::array();
    for (const auto& sb : r.seeds) {
      ordered_json js;
      js["seed"] = sb.exp_seed;
      js["det_ap50"] = pct(sb.mean.det);
      js["seg_ap50"] = pct(sb.mean.seg);
      js["reward_mean"] = sb.reward_mean;
      js["frames"] = sb.frames;
      js["instances"] = sb.instances;
      ordered_json ss = ordered_json::array();
      for (const auto& s : sb.scenes)
        ss.push_back({{"scene_seed", s.scene_seed},
                      {"det_ap50", pct(s.ap.det)},
                      {"seg_ap50", pct(s.ap.seg)}});
      js["scenes"] = ss;
      seeds.push_back(js);
    }
    jr["seeds"] = seeds;
    rows.push_back(jr);
  }
  j["rows"] = rows;
  return j;
}

inline std::string report_to_csv(const EvalReport& report) {
  std::string out = "method,setting,det_AP50,seg_AP50\n";
  char line[256];
  for (const auto& r : report.rows) {
    std::snprintf(line, sizeof(line), "%s,%s,%.2f,%.2f\n", r.method.c_str(),
                  r.setting.c_str(), r.mean.det * 100.0, r.mean.seg * 100.0);
    out += line;
  }
  return out;
}

inline void write_report(const EvalReport& report, const std::string& dir,
                         const std::string& stem = "report") {
  if (dir.empty()) return;
  std::filesystem::create_directories(dir);
  write_text_file(dir + "/" + stem + ".json", report_to_json(report).dump(2) + "\n");
  write_text_file(dir + "/" + stem + ".csv", report_to_csv(report));
}

// ---------------------------------------------------------------------------
// Pipelines
// ---------------------------------------------------------------------------

struct ScenesBundle {
  std::vector<Scene> train, test;
};

inline ScenesBundle make_scenes(const ExperimentConfig& c) {
  ScenesBundle b;
  b.train.resize(size_t(c.train_count));
  b.test.resize(size_t(c.test_count));
  parallel_for(size_t(c.train_count + c.test_count), c.jobs, [&](size_t i) {
    if (i < size_t(c.train_count))
      b.train[i] = generate_scene(c.train_seed_first + i, c.scene);
    else
      b.test[i - size_t(c.train_count)] =
          generate_scene(c.test_seed_first + (i - size_t(c.train_count)), c.scene);
  });
  return b;
}

// Trained exploration policy for a kind; random/frontier have no parameters.
inline ExplorationPolicy make_policy(PolicyKind kind, const ExperimentConfig& c,
                                     const std::vector<Scene>& train_scenes,
                                     uint64_t exp_seed,
                                     std::vector<double>* returns = nullptr) {
  ExplorationPolicy pol;
  pol.kind = kind;
  pol.params.seed = mix_u64(c.policy_train.seed, exp_seed);
  if (kind == PolicyKind::Gainful || kind == PolicyKind::Coverage) {
    TrainOptions opts = c.policy_train;
    opts.seed = mix_u64(opts.seed, exp_seed);
    opts.jobs = c.jobs;
    opts.reward = kind;
    PerceptionModel identity = PerceptionModel::identity();
    TrainResult tr = train_policy(train_scenes, pol.params, identity, c.noise,
                                  c.episode_config(false), opts);
    pol.params = tr.params;
    if (returns) *returns = tr.episode_returns;
  }
  return pol;
}

// Collect a scene list into merged pools (order-stable regardless of jobs).
inline CalibrationDataset collect_scenes(
    const std::vector<Scene>& scenes, const ExplorationPolicy& policy,
    const PerceptionModel& model, const ExperimentConfig& c, uint64_t exp_seed,
    LabelSource source, std::vector<CollectStats>* stats_out = nullptr,
    const ArtifactSink& sink = {}, CalibrationDataset* st_pools = nullptr,
    std::vector<CollectStats>* st_stats = nullptr) {
  size_t n = scenes.size();
  std::vector<CalibrationDataset> parts(n);
  std::vector<CalibrationDataset> st_parts(st_pools ? n : 0);
  std::vector<CollectStats> stats(n), st_stats_local(st_pools ? n : 0);
  parallel_for(n, c.jobs, [&](size_t i) {
    stats[i] = collect_scene(scenes[i], policy, model, c.noise, exp_seed,
                             c.episode_config(true), source, 0, parts[i], sink);
    if (st_pools) {
      // reuse the same episodes for the self-training ablation would require
      // frames; run the deterministic episode again with the other labeling
      st_stats_local[i] =
          collect_scene(scenes[i], policy, model, c.noise, exp_seed,
                        c.episode_config(true), LabelSource::SelfTrain, 0,
                        st_parts[i]);
    }
  });
  CalibrationDataset pools;
  for (size_t i = 0; i < n; ++i) merge_pools(pools, parts[i]);
  if (st_pools)
    for (size_t i = 0; i < n; ++i) merge_pools(*st_pools, st_parts[i]);
  if (stats_out) *stats_out = stats;
  if (st_stats) *st_stats = st_stats_local;
  return pools;
}

struct SeedModels {
  ExplorationPolicy policy;
  PerceptionModel pretrained = PerceptionModel::identity();
  PerceptionModel generalization = PerceptionModel::identity();
  std::vector<PerceptionModel> specialized;  // one per test scene
  double collect_reward_mean = 0;
  size_t frames = 0, instances = 0;
};

// The SEAL pipeline for one experiment seed: train the exploration policy,
// self-label the training scenes, fine-tune the perception model, then adapt a
// per-scene copy on one episode in each test scene.
inline SeedModels build_seed_models(const ExperimentConfig& c,
                                    const ScenesBundle& scenes, uint64_t exp_seed,
                                    const ArtifactSink& sink = {}) {
  SeedModels out;
  out.policy = make_policy(c.policy, c, scenes.train, exp_seed);

  std::vector<CollectStats> stats;
  CalibrationDataset pools =
      collect_scenes(scenes.train, out.policy, out.pretrained, c, exp_seed,
                     LabelSource::LabelProp, &stats, sink);
  for (const auto& s : stats) {
    out.collect_reward_mean += double(s.final_reward) / double(stats.size());
    out.frames += s.frames;
    out.instances += s.instances;
  }
  FineTuneOptions fopts = c.finetune_opts;
  fopts.seed = mix_u64(fopts.seed, exp_seed);
  out.generalization = fine_tune_pools(out.pretrained, pools, c.finetune_lr,
                                       c.finetune_iters, fopts);

  out.specialized.assign(scenes.test.size(), out.generalization);
  parallel_for(scenes.test.size(), c.jobs, [&](size_t i) {
    CalibrationDataset sp;
    collect_scene(scenes.test[i], out.policy, out.generalization, c.noise,
                  exp_seed, c.episode_config(true), LabelSource::LabelProp, 0, sp);
    FineTuneOptions so = c.finetune_opts;
    so.seed = mix_u64(mix_u64(so.seed, exp_seed), scenes.test[i].seed);
    out.specialized[i] = fine_tune_pools(out.generalization, sp, c.finetune_lr,
                                         c.finetune_iters, so);
  });
  return out;
}

inline uint64_t eval_stream(const ExperimentConfig& c, const Scene& scene,
                            uint64_t exp_seed) {
  return mix_u64(mix_u64(c.noise.seed, scene.seed), exp_seed);
}

// Core protocol: Generalization evaluates pretrained vs fine-tuned on unseen
// scenes; Specialization additionally adapts per test scene.
inline EvalReport run_pipeline(const ExperimentConfig& c, bool with_specialization,
                               const ArtifactSink& sink = {}) {
  c.validate();
  ScenesBundle scenes = make_scenes(c);
  std::vector<EvalPoseSet> eval_sets;
  for (const auto& s : scenes.test)
    eval_sets.push_back(make_eval_poses(s, c.eval_images_per_scene, c.eval_seed));

  MethodRow pre{"pretrained", "generalization", {}, {}, {}};
  MethodRow gen{"seal", "generalization", {}, {}, {}};
  MethodRow spec{"seal", "specialization", {}, {}, {}};

  for (uint64_t exp_seed : c.seeds) {
    SeedModels models = build_seed_models(c, scenes, exp_seed, sink);
    SeedBlock bp{exp_seed, {}, {}, models.collect_reward_mean, models.frames,
                 models.instances};
    SeedBlock bg = bp, bs = bp;
    for (size_t i = 0; i < scenes.test.size(); ++i) {
      std::vector<const PerceptionModel*> ms = {&models.pretrained,
                                                &models.generalization};
      if (with_specialization) ms.push_back(&models.specialized[i]);
      auto scores = evaluate_models_on_scene(
          scenes.test[i], c.camera, eval_sets[i], c.noise,
          eval_stream(c, scenes.test[i], exp_seed), ms, c.jobs);
      bp.scenes.push_back({scenes.test[i].seed, scores[0]});
      bg.scenes.push_back({scenes.test[i].seed, scores[1]});
      if (with_specialization) bs.scenes.push_back({scenes.test[i].seed, scores[2]});
    }
    pre.seeds.push_back(bp);
    gen.seeds.push_back(bg);
    if (with_specialization) spec.seeds.push_back(bs);

    if (!sink.dir.empty()) {
      std::filesystem::create_directories(sink.dir);
      std::string tag = "_seed" + std::to_string(exp_seed);
      save_policy(models.policy, sink.dir + "/policy" + tag + ".json");
      save_model(models.generalization, sink.dir + "/model_generalization" + tag + ".json");
      for (size_t i = 0; i < models.specialized.size(); ++i)
        save_model(models.specialized[i],
                   sink.dir + "/model_spec_scene" +
                       std::to_string(scenes.test[i].seed) + tag + ".json");
    }
  }
  finalize_row(pre);
  finalize_row(gen);
  finalize_row(spec);

  EvalReport report;
  report.config_echo = config_to_json(c);
  ordered_json checks = ordered_json::array();
  for (size_t i = 0; i < eval_sets.size(); ++i)
    checks.push_back({{"scene_seed", scenes.test[i].seed},
                      {"poses", eval_sets[i].poses.size()},
                      {"checksum", eval_sets[i].checksum}});
  report.metadata = {{"ap_interpolation", "all-point"},
                     {"entropy_scores", "as stored in the map (post-calibration)"},
                     {"scene_ap", "macro over categories present in scene GT"},
                     {"aggregate_ap", "mean of per-scene AP"},
                     {"eval_pose_sets", checks}};
  report.rows.push_back(pre);
  report.rows.push_back(gen);
  if (with_specialization) report.rows.push_back(spec);
  return report;
}

inline EvalReport run_generalization(const ExperimentConfig& c,
                                     const ArtifactSink& sink = {}) {
  return run_pipeline(c, false, sink);
}

inline EvalReport run_specialization(const ExperimentConfig& c,
                                     const ArtifactSink& sink = {}) {
  return run_pipeline(c, true, sink);
}

inline EvalReport run_all(const ExperimentConfig& c, const ArtifactSink& sink = {}) {
  EvalReport report = run_pipeline(c, true, sink);
  write_report(report, c.out_dir);
  return report;
}

// Ablation grid: {random, frontier, coverage, gainful} x {3DLabelProp,
// self-training}, all in the Generalization setting.
inline EvalReport run_ablations(const ExperimentConfig& c,
                                const ArtifactSink& sink = {}) {
  c.validate();
  ScenesBundle scenes = make_scenes(c);
  std::vector<EvalPoseSet> eval_sets;
  for (const auto& s : scenes.test)
    eval_sets.push_back(make_eval_poses(s, c.eval_images_per_scene, c.eval_seed));

  const PolicyKind kinds[4] = {PolicyKind::Random, PolicyKind::Frontier,
                               PolicyKind::Coverage, PolicyKind::Gainful};
  std::vector<MethodRow> rows;
  rows.push_back({"pretrained", "generalization", {}, {}, {}});
  for (PolicyKind k : kinds) {
    rows.push_back({std::string(policy_kind_name(k)) + "+labelprop",
                    "generalization", {}, {}, {}});
    rows.push_back({std::string(policy_kind_name(k)) + "+selftrain",
                    "generalization", {}, {}, {}});
  }

  PerceptionModel pretrained = PerceptionModel::identity();
  for (uint64_t exp_seed : c.seeds) {
    std::vector<PerceptionModel> models;  // aligned with rows[1..]
    std::vector<SeedBlock> blocks(rows.size(), SeedBlock{exp_seed, {}, {}, 0, 0, 0});
    size_t ri = 1;
    for (PolicyKind k : kinds) {
      ExplorationPolicy pol = make_policy(k, c, scenes.train, exp_seed);
      std::vector<CollectStats> stats, st_stats;
      CalibrationDataset st_pools;
      st_pools.categories = kNumCategories;
      CalibrationDataset lp_pools =
          collect_scenes(scenes.train, pol, pretrained, c, exp_seed,
                         LabelSource::LabelProp, &stats, {}, &st_pools, &st_stats);
      FineTuneOptions fo = c.finetune_opts;
      fo.seed = mix_u64(mix_u64(fo.seed, exp_seed), uint64_t(k));
      models.push_back(fine_tune_pools(pretrained, lp_pools, c.finetune_lr,
                                       c.finetune_iters, fo));
      models.push_back(fine_tune_pools(pretrained, st_pools, c.finetune_lr,
                                       c.finetune_iters, fo));
      for (const auto& s : stats) {
        blocks[ri].reward_mean += double(s.final_reward) / double(stats.size());
        blocks[ri].frames += s.frames;
        blocks[ri].instances += s.instances;
      }
      blocks[ri + 1].reward_mean = blocks[ri].reward_mean;
      blocks[ri + 1].frames = blocks[ri].frames;
      ri += 2;
    }

    for (size_t i = 0; i < scenes.test.size(); ++i) {
      std::vector<const PerceptionModel*> ms = {&pretrained};
      for (const auto& m : models) ms.push_back(&m);
      auto scores = evaluate_models_on_scene(
          scenes.test[i], c.camera, eval_sets[i], c.noise,
          eval_stream(c, scenes.test[i], exp_seed), ms, c.jobs);
      for (size_t r = 0; r < rows.size(); ++r)
        blocks[r].scenes.push_back({scenes.test[i].seed, scores[r]});
    }
    for (size_t r = 0; r < rows.size(); ++r) rows[r].seeds.push_back(blocks[r]);
  }
  for (auto& r : rows) finalize_row(r);

  EvalReport report;
  report.config_echo = config_to_json(c);
  report.metadata = {{"ap_interpolation", "all-point"},
                     {"grid", "policy x labeling, generalization setting"}};
  report.rows = rows;
  write_report(report, sink.dir.empty() ? c.out_dir : sink.dir, "report_ablations");
  return report;
}

// Weak supervision: k frames per test-scene episode are swapped for perfect
// annotations before map construction (SEAL column) or used directly for
// fine-tuning without propagation (naive column). Specialization setting.
inline EvalReport run_weak_supervision(const ExperimentConfig& c,
                                       const std::vector<int>& ks,
                                       const ArtifactSink& sink = {}) {
  c.validate();
  ScenesBundle scenes = make_scenes(c);
  std::vector<EvalPoseSet> eval_sets;
  for (const auto& s : scenes.test)
    eval_sets.push_back(make_eval_poses(s, c.eval_images_per_scene, c.eval_seed));

  std::vector<MethodRow> rows;
  for (int k : ks) {
    rows.push_back({"seal_k" + std::to_string(k), "specialization", {}, {}, {}});
    rows.push_back({"naive_k" + std::to_string(k), "specialization", {}, {}, {}});
  }

  for (uint64_t exp_seed : c.seeds) {
    // generalization stage shared by every k
    ExplorationPolicy pol = make_policy(c.policy, c, scenes.train, exp_seed);
    PerceptionModel pretrained = PerceptionModel::identity();
    CalibrationDataset pools = collect_scenes(
        scenes.train, pol, pretrained, c, exp_seed, LabelSource::LabelProp);
    FineTuneOptions fo = c.finetune_opts;
    fo.seed = mix_u64(fo.seed, exp_seed);
    PerceptionModel gen = fine_tune_pools(pretrained, pools, c.finetune_lr,
                                          c.finetune_iters, fo);

    std::vector<SeedBlock> blocks(rows.size(), SeedBlock{exp_seed, {}, {}, 0, 0, 0});
    for (size_t i = 0; i < scenes.test.size(); ++i) {
      std::vector<PerceptionModel> models;
      for (int k : ks) {
        CalibrationDataset sp, naive;
        sp.categories = naive.categories = kNumCategories;
        collect_scene(scenes.test[i], pol, gen, c.noise, exp_seed,
                      c.episode_config(true), LabelSource::LabelProp, k, sp, {},
                      &naive);
        FineTuneOptions so = c.finetune_opts;
        so.seed = mix_u64(mix_u64(so.seed, exp_seed), scenes.test[i].seed);
        models.push_back(
            fine_tune_pools(gen, sp, c.finetune_lr, c.finetune_iters, so));
        models.push_back(fine_tune_pools(pretrained, naive, c.finetune_lr,
                                         c.finetune_iters, so));
      }
      std::vector<const PerceptionModel*> ms;
      for (const auto& m : models) ms.push_back(&m);
      auto scores = evaluate_models_on_scene(
          scenes.test[i], c.camera, eval_sets[i], c.noise,
          eval_stream(c, scenes.test[i], exp_seed), ms, c.jobs);
      for (size_t r = 0; r < rows.size(); ++r)
        blocks[r].scenes.push_back({scenes.test[i].seed, scores[r]});
    }
    for (size_t r = 0; r < rows.size(); ++r) rows[r].seeds.push_back(blocks[r]);
  }
  for (auto& r : rows) finalize_row(r);

  EvalReport report;
  report.config_echo = config_to_json(c);
  report.metadata = {{"ap_interpolation", "all-point"},
                     {"weak_k", ks},
                     {"entropy_scores", "as stored in the map (post-calibration)"}};
  report.rows = rows;
  write_report(report, sink.dir.empty() ? c.out_dir : sink.dir, "report_weak");
  return report;
}

}  // namespace seal

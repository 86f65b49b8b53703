#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "seal/envsim.hpp"
#include "seal/labelprop.hpp"
#include "seal/perception.hpp"
#include "seal/policy.hpp"

namespace seal {

using ordered_json = nlohmann::ordered_json;

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::Io, "cannot write " + path);
  f << text;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::Io, "cannot read " + path);
  return std::string(std::istreambuf_iterator<char>(f), {});
}

// ---------------------------------------------------------------------------
// Scene JSON (stable field order)
// ---------------------------------------------------------------------------

inline ordered_json scene_to_json(const Scene& scene) {
  ordered_json j;
  j["format"] = "seal-scene-v1";
  j["seed"] = scene.seed;
  j["params"] = {{"extent_x", scene.params.extent_x},
                 {"extent_y", scene.params.extent_y},
                 {"extent_z", scene.params.extent_z},
                 {"rooms_min", scene.params.rooms_min},
                 {"rooms_max", scene.params.rooms_max},
                 {"objects_min", scene.params.objects_min},
                 {"objects_max", scene.params.objects_max},
                 {"cell", scene.params.cell}};
  j["extents"] = {scene.params.extent_x, scene.params.extent_y,
                  scene.params.extent_z};
  ordered_json walls = ordered_json::array();
  for (const auto& w : scene.walls) walls.push_back({w.x0, w.y0, w.x1, w.y1});
  j["walls"] = walls;
  ordered_json objs = ordered_json::array();
  for (const auto& o : scene.objects) {
    ordered_json jo;
    jo["id"] = o.id;
    jo["category"] = o.category;
    jo["box"] = {o.lo.x, o.lo.y, o.lo.z, o.hi.x, o.hi.y, o.hi.z};
    objs.push_back(jo);
  }
  j["objects"] = objs;
  j["spawn"] = {{"x", scene.spawn.x}, {"y", scene.spawn.y}, {"theta", scene.spawn.theta}};
  return j;
}

inline Scene scene_from_json(const ordered_json& j) {
  Scene scene;
  scene.seed = j.at("seed").get<uint64_t>();
  const auto& p = j.at("params");
  scene.params.extent_x = p.at("extent_x").get<double>();
  scene.params.extent_y = p.at("extent_y").get<double>();
  scene.params.extent_z = p.at("extent_z").get<double>();
  scene.params.rooms_min = p.at("rooms_min").get<int>();
  scene.params.rooms_max = p.at("rooms_max").get<int>();
  scene.params.objects_min = p.at("objects_min").get<int>();
  scene.params.objects_max = p.at("objects_max").get<int>();
  scene.params.cell = p.at("cell").get<double>();
  for (const auto& w : j.at("walls"))
    scene.walls.push_back({w[0].get<double>(), w[1].get<double>(),
                           w[2].get<double>(), w[3].get<double>()});
  for (const auto& o : j.at("objects")) {
    SceneObject so;
    so.id = o.at("id").get<int>();
    so.category = o.at("category").get<int>();
    const auto& b = o.at("box");
    so.lo = Vec3{b[0].get<double>(), b[1].get<double>(), b[2].get<double>()};
    so.hi = Vec3{b[3].get<double>(), b[4].get<double>(), b[5].get<double>()};
    scene.objects.push_back(so);
  }
  scene.spawn = Pose{j.at("spawn").at("x").get<double>(),
                     j.at("spawn").at("y").get<double>(),
                     j.at("spawn").at("theta").get<double>()};
  scene.rebuild_grids();
  return scene;
}

inline void save_scene(const Scene& scene, const std::string& path) {
  write_text_file(path, scene_to_json(scene).dump(2) + "\n");
}

inline Scene load_scene(const std::string& path) {
  return scene_from_json(ordered_json::parse(read_text_file(path)));
}

// ---------------------------------------------------------------------------
// Perception model JSON
// ---------------------------------------------------------------------------

inline ordered_json model_to_json(const PerceptionModel& m) {
  ordered_json j;
  j["format"] = "seal-model-v1";
  j["version"] = m.version;
  ordered_json cats = ordered_json::array();
  for (int c = 0; c < m.categories; ++c) {
    ordered_json jc;
    jc["category"] = category_name(c + 1);
    jc["gain"] = m.gain[size_t(c)];
    jc["bias"] = m.bias[size_t(c)];
    jc["floor"] = m.floor[size_t(c)];
    cats.push_back(jc);
  }
  j["calibration"] = cats;
  return j;
}

inline PerceptionModel model_from_json(const ordered_json& j) {
  const auto& cats = j.at("calibration");
  PerceptionModel m = PerceptionModel::identity(int(cats.size()));
  m.version = j.at("version").get<int>();
  for (size_t c = 0; c < cats.size(); ++c) {
    m.gain[c] = cats[c].at("gain").get<double>();
    m.bias[c] = cats[c].at("bias").get<double>();
    m.floor[c] = cats[c].at("floor").get<double>();
  }
  return m;
}

inline void save_model(const PerceptionModel& m, const std::string& path) {
  write_text_file(path, model_to_json(m).dump(2) + "\n");
}

inline PerceptionModel load_model(const std::string& path) {
  return model_from_json(ordered_json::parse(read_text_file(path)));
}

// ---------------------------------------------------------------------------
// Policy JSON
// ---------------------------------------------------------------------------

inline ordered_json policy_to_json(const ExplorationPolicy& p,
                                   const ordered_json& training_meta = {}) {
  ordered_json j;
  j["format"] = "seal-policy-v1";
  j["kind"] = policy_kind_name(p.kind);
  ordered_json feats = ordered_json::array();
  for (int k = 0; k < kNumFeatures; ++k) feats.push_back(feature_name(k));
  j["features"] = feats;
  j["weights"] = p.params.weights;
  j["temperature"] = p.params.temperature;
  j["seed"] = p.params.seed;
  if (!training_meta.is_null() && !training_meta.empty())
    j["training"] = training_meta;
  return j;
}

inline ExplorationPolicy policy_from_json(const ordered_json& j) {
  ExplorationPolicy p;
  p.kind = policy_kind_from(j.at("kind").get<std::string>());
  const auto& w = j.at("weights");
  for (int k = 0; k < kNumFeatures && k < int(w.size()); ++k)
    p.params.weights[size_t(k)] = w[size_t(k)].get<double>();
  p.params.temperature = j.at("temperature").get<double>();
  p.params.seed = j.at("seed").get<uint64_t>();
  return p;
}

inline void save_policy(const ExplorationPolicy& p, const std::string& path,
                        const ordered_json& training_meta = {}) {
  write_text_file(path, policy_to_json(p, training_meta).dump(2) + "\n");
}

inline ExplorationPolicy load_policy(const std::string& path) {
  return policy_from_json(ordered_json::parse(read_text_file(path)));
}

// ---------------------------------------------------------------------------
// Annotation JSONL: one record per frame with RLE-coded instance masks.
// ---------------------------------------------------------------------------

inline ordered_json frame_annotation_json(int frame_index, const Pose& pose,
                                          const FrameLabels& labels) {
  ordered_json j;
  j["frame_index"] = frame_index;
  j["pose"] = {{"x", pose.x}, {"y", pose.y}, {"theta", pose.theta}};
  ordered_json instances = ordered_json::array();
  for (const auto& m : masks_to_annotations(labels)) {
    ordered_json ji;
    ji["id"] = m.id;
    ji["category"] = m.category;
    ji["box"] = {m.x0, m.y0, m.x1, m.y1};
    ji["mask"] = rle_encode(m, labels.width, labels.height);
    instances.push_back(ji);
  }
  j["instances"] = instances;
  return j;
}

class AnnotationWriter {
 public:
  explicit AnnotationWriter(const std::string& path) : f_(path, std::ios::binary) {
    if (!f_) fail(ErrorKind::Io, "cannot write " + path);
  }
  void add(int frame_index, const Pose& pose, const FrameLabels& labels) {
    f_ << frame_annotation_json(frame_index, pose, labels).dump() << "\n";
  }

 private:
  std::ofstream f_;
};

struct FrameAnnotation {
  int frame_index = 0;
  Pose pose;
  FrameLabels labels;
};

inline std::vector<FrameAnnotation> read_annotations(const std::string& path,
                                                     int width, int height) {
  std::ifstream f(path);
  if (!f) fail(ErrorKind::Io, "cannot read " + path);
  std::vector<FrameAnnotation> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    ordered_json j = ordered_json::parse(line);
    FrameAnnotation fa;
    fa.frame_index = j.at("frame_index").get<int>();
    fa.pose = Pose{j.at("pose").at("x").get<double>(),
                   j.at("pose").at("y").get<double>(),
                   j.at("pose").at("theta").get<double>()};
    fa.labels = FrameLabels(width, height);
    for (const auto& ji : j.at("instances")) {
      InstanceMask m;
      m.id = ji.at("id").get<int>();
      m.category = ji.at("category").get<int>();
      rle_decode(ji.at("mask").get<std::vector<int64_t>>(), width, height, m);
      for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c)
          if (m.test(r, c, width)) {
            size_t i = size_t(r) * width + c;
            fa.labels.instance[i] = m.id;
            fa.labels.category[i] = uint8_t(m.category);
          }
    }
    out.push_back(std::move(fa));
  }
  return out;
}

}  // namespace seal

#pragma once

#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "seal/common.hpp"
#include "seal/geometry.hpp"

namespace seal {

struct MapDims {
  int categories = 6;  // C; channel count K = C + 1
  int L = 256;
  int W = 256;
  int H = 64;
  double voxel_size = 0.05;

  int channels() const { return categories + 1; }
  size_t spatial_cells() const { return size_t(L) * W * H; }
  size_t total_cells() const { return size_t(channels()) * spatial_cells(); }
};

struct UpdateStats {
  size_t points_dropped = 0;   // out-of-bounds points
  size_t newly_confident = 0;  // voxels whose max category score crossed s_hat
};

// 4D semantic map: channel 0 is occupancy, channels 1..C hold the maximum
// observed per-category score. Values only grow over an episode (channel-wise
// max pooling). The episode start pose sits at spatial index (L/2, W/2, 0);
// z is measured up from the floor.
class SemanticVoxelMap {
 public:
  static constexpr size_t kMaxBytes = size_t(768) << 20;

  SemanticVoxelMap() = default;

  explicit SemanticVoxelMap(const MapDims& dims, const Pose& start_pose = Pose{})
      : dims_(dims), origin_x_(start_pose.x), origin_y_(start_pose.y) {
    if (dims.L <= 0 || dims.W <= 0 || dims.H <= 0 || dims.categories <= 0 ||
        dims.voxel_size <= 0)
      fail(ErrorKind::DimensionMismatch, "map dims must be positive");
    if (dims.total_cells() * sizeof(float) > kMaxBytes)
      fail(ErrorKind::AllocationTooLarge, "voxel map exceeds allocation cap");
    data_.assign(dims.total_cells(), 0.f);
    max_cat_.assign(dims.spatial_cells(), 0.f);
  }

  const MapDims& dims() const { return dims_; }
  double origin_x() const { return origin_x_; }
  double origin_y() const { return origin_y_; }
  const std::vector<float>& raw() const { return data_; }

  bool index_of(double wx, double wy, double wz, int& ix, int& iy, int& iz) const {
    ix = int(std::floor((wx - origin_x_) / dims_.voxel_size)) + dims_.L / 2;
    iy = int(std::floor((wy - origin_y_) / dims_.voxel_size)) + dims_.W / 2;
    iz = int(std::floor(wz / dims_.voxel_size));
    return ix >= 0 && ix < dims_.L && iy >= 0 && iy < dims_.W && iz >= 0 &&
           iz < dims_.H;
  }

  // Grid-local meters of a world point (grid corner at (0,0,0)), for ray
  // traversal against this map.
  Vec3 world_to_grid(double wx, double wy, double wz) const {
    return Vec3{wx - origin_x_ + dims_.L / 2 * dims_.voxel_size,
                wy - origin_y_ + dims_.W / 2 * dims_.voxel_size, wz};
  }

  size_t spatial_index(int ix, int iy, int iz) const {
    return (size_t(iz) * dims_.W + iy) * dims_.L + ix;
  }

  float occupancy(int ix, int iy, int iz) const {
    return data_[spatial_index(ix, iy, iz)];
  }
  float score(int ix, int iy, int iz, int cat) const {
    return data_[size_t(cat + 1) * dims_.spatial_cells() + spatial_index(ix, iy, iz)];
  }
  float max_category_score(int ix, int iy, int iz) const {
    return max_cat_[spatial_index(ix, iy, iz)];
  }
  const std::vector<float>& max_category_scores() const { return max_cat_; }

  // Max-combine one observation into a voxel. Occupancy is set regardless of
  // the scores; stored values never decrease.
  void fuse(int ix, int iy, int iz, const float* scores, int count,
            UpdateStats* stats = nullptr, double s_hat = -1.0) {
    size_t si = spatial_index(ix, iy, iz);
    data_[si] = 1.f;
    float before = max_cat_[si];
    size_t plane = dims_.spatial_cells();
    for (int c = 0; c < count && c < dims_.categories; ++c) {
      float& slot = data_[size_t(c + 1) * plane + si];
      if (scores[c] > slot) slot = scores[c];
      if (scores[c] > max_cat_[si]) max_cat_[si] = scores[c];
    }
    if (stats && s_hat >= 0 && before <= s_hat && max_cat_[si] > s_hat)
      stats->newly_confident++;
  }

  size_t count_above(double s_hat) const {
    size_t n = 0;
    for (float v : max_cat_)
      if (v > s_hat) ++n;
    return n;
  }

  size_t count_occupied() const {
    size_t n = 0;
    for (size_t i = 0; i < dims_.spatial_cells(); ++i)
      if (data_[i] != 0.f) ++n;
    return n;
  }

  bool operator==(const SemanticVoxelMap& o) const {
    return dims_.L == o.dims_.L && dims_.W == o.dims_.W && dims_.H == o.dims_.H &&
           dims_.categories == o.dims_.categories && data_ == o.data_;
  }

 private:
  MapDims dims_;
  double origin_x_ = 0, origin_y_ = 0;
  std::vector<float> data_;      // channel-major, x fastest
  std::vector<float> max_cat_;   // per-voxel max over category channels
};

inline SemanticVoxelMap new_map(const MapDims& dims, const Pose& start = Pose{}) {
  return SemanticVoxelMap(dims, start);
}

// Alg-style UpdateMap: back-project the depth image, carry each pixel's C
// scores onto its voxel, and max-combine. Out-of-bounds points are dropped and
// counted. When s_hat >= 0 the stats report how many voxels newly exceeded it.
inline UpdateStats update_map(SemanticVoxelMap& map, const DepthImage& depth,
                              const ScoreImage& scores, const Pose& pose,
                              const CameraModel& cam, double s_hat = -1.0) {
  if (scores.width != cam.width_px || scores.height != cam.height_px ||
      scores.categories != map.dims().categories)
    fail(ErrorKind::DimensionMismatch, "score image does not match camera/map");
  UpdateStats stats;
  PointCloud geo = ego_to_geo(depth_to_pointcloud(depth, cam), pose);
  int C = map.dims().categories;
  for (const auto& p : geo.points) {
    int ix, iy, iz;
    if (!map.index_of(p.x, p.y, p.z, ix, iy, iz)) {
      stats.points_dropped++;
      continue;
    }
    map.fuse(ix, iy, iz, &scores.s[size_t(p.pixel) * C], C, &stats, s_hat);
  }
  return stats;
}

// Gainful Curiosity reward: voxels whose score strictly exceeds s_hat for at
// least one category. Pure read.
inline size_t gainful_curiosity_reward(const SemanticVoxelMap& map, double s_hat) {
  if (!(s_hat > 0.0 && s_hat < 1.0))
    fail(ErrorKind::ConfigInvalid, "s_hat must be in (0,1)");
  return map.count_above(s_hat);
}

// OR of the occupancy channel over a z index range [z_lo, z_hi); the obstacle
// map the planner consumes.
inline Grid2D<uint8_t> occupancy_floor_slice(const SemanticVoxelMap& map,
                                             int z_lo, int z_hi) {
  const MapDims& d = map.dims();
  if (z_lo < 0 || z_hi > d.H || z_lo >= z_hi)
    fail(ErrorKind::DimensionMismatch, "z range outside map height");
  Grid2D<uint8_t> slice(d.L, d.W, 0);
  for (int iz = z_lo; iz < z_hi; ++iz)
    for (int iy = 0; iy < d.W; ++iy)
      for (int ix = 0; ix < d.L; ++ix)
        if (map.occupancy(ix, iy, iz) != 0.f) slice.at(ix, iy) = 1;
  return slice;
}

// ---------------------------------------------------------------------------
// SVM1 binary format: magic "SVM1", K,L,W,H as u32 LE, then K*L*W*H f32 LE in
// channel-major, x-fastest order.
// ---------------------------------------------------------------------------

inline void save_svm1(const SemanticVoxelMap& map, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::Io, "cannot write " + path);
  const MapDims& d = map.dims();
  f.write("SVM1", 4);
  uint32_t hdr[4] = {uint32_t(d.channels()), uint32_t(d.L), uint32_t(d.W),
                     uint32_t(d.H)};
  f.write(reinterpret_cast<const char*>(hdr), sizeof(hdr));
  f.write(reinterpret_cast<const char*>(map.raw().data()),
          std::streamsize(map.raw().size() * sizeof(float)));
}

inline SemanticVoxelMap load_svm1(const std::string& path,
                                  double voxel_size = 0.05) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::Io, "cannot read " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, "SVM1", 4) != 0)
    fail(ErrorKind::Io, "bad SVM1 magic in " + path);
  uint32_t hdr[4];
  f.read(reinterpret_cast<char*>(hdr), sizeof(hdr));
  if (!f || hdr[0] < 2) fail(ErrorKind::Io, "bad SVM1 header in " + path);
  MapDims d;
  d.categories = int(hdr[0]) - 1;
  d.L = int(hdr[1]);
  d.W = int(hdr[2]);
  d.H = int(hdr[3]);
  d.voxel_size = voxel_size;
  SemanticVoxelMap map(d);
  std::vector<float> buf(d.total_cells());
  f.read(reinterpret_cast<char*>(buf.data()),
         std::streamsize(buf.size() * sizeof(float)));
  if (!f) fail(ErrorKind::Io, "truncated SVM1 file " + path);
  // replay through fuse to keep the derived caches consistent
  std::vector<float> px(size_t(d.categories));
  size_t plane = d.spatial_cells();
  for (int iz = 0; iz < d.H; ++iz)
    for (int iy = 0; iy < d.W; ++iy)
      for (int ix = 0; ix < d.L; ++ix) {
        size_t si = (size_t(iz) * d.W + iy) * d.L + ix;
        if (buf[si] == 0.f) continue;
        for (int c = 0; c < d.categories; ++c) px[size_t(c)] = buf[(c + 1) * plane + si];
        map.fuse(ix, iy, iz, px.data(), d.categories);
      }
  return map;
}

// Per-voxel argmax dump for inspection: x,y,z,category,score for every
// occupied voxel (category 0 when all scores are zero).
inline void export_argmax_csv(const SemanticVoxelMap& map, const std::string& path) {
  std::ofstream f(path);
  if (!f) fail(ErrorKind::Io, "cannot write " + path);
  const MapDims& d = map.dims();
  f << "x,y,z,category,score\n";
  char line[96];
  for (int iz = 0; iz < d.H; ++iz)
    for (int iy = 0; iy < d.W; ++iy)
      for (int ix = 0; ix < d.L; ++ix) {
        if (map.occupancy(ix, iy, iz) == 0.f) continue;
        int best = 0;
        float bs = 0.f;
        for (int c = 0; c < d.categories; ++c) {
          float s = map.score(ix, iy, iz, c);
          if (s > bs) {
            bs = s;
            best = c + 1;
          }
        }
        std::snprintf(line, sizeof(line), "%d,%d,%d,%d,%.6f\n", ix, iy, iz, best,
                      double(bs));
        f << line;
      }
}

}  // namespace seal

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "seal/common.hpp"

namespace seal {

// Agent frame: +x forward (east at theta=0), +y left, +z up.
// theta is counter-clockwise degrees in [0, 360).
struct Pose {
  double x = 0;
  double y = 0;
  double theta = 0;

  static Pose make(double x, double y, double theta) {
    return Pose{x, y, wrap_degrees(theta)};
  }
};

// Pinhole camera, square pixels, mounted at height_m looking along +x of the
// agent frame. vfov follows from the aspect ratio.
struct CameraModel {
  int width_px = 128;
  int height_px = 128;
  double hfov_deg = 90.0;
  double height_m = 0.88;
  double depth_min = 0.25;
  double depth_max = 5.0;

  double focal_px() const {
    return (width_px / 2.0) / std::tan(deg_to_rad(hfov_deg / 2.0));
  }

  // Ray direction in the agent frame for the center of pixel (row, col).
  Vec3 pixel_ray(int row, int col) const {
    double f = focal_px();
    double u = (col + 0.5) - width_px / 2.0;   // right in image = -y
    double v = (row + 0.5) - height_px / 2.0;  // down in image = -z
    return Vec3{1.0, -u / f, -v / f}.normalized();
  }

  // Forward (axis) component of the unit pixel ray; converts ray length t to
  // z-depth via zdepth = t * forward_component and back.
  double forward_component(int row, int col) const {
    double f = focal_px();
    double u = (col + 0.5) - width_px / 2.0;
    double v = (row + 0.5) - height_px / 2.0;
    return 1.0 / std::sqrt(1.0 + (u * u + v * v) / (f * f));
  }
};

struct CloudPoint {
  double x, y, z;
  int32_t pixel;  // row * width + col of the source pixel
};

struct PointCloud {
  std::vector<CloudPoint> points;

  size_t size() const { return points.size(); }
};

// Pinhole back-projection. Depth values are z-depths (distance along the
// camera axis). Pixels marked invalid or outside [depth_min, depth_max] are
// skipped; each produced point keeps its source pixel index.
inline PointCloud depth_to_pointcloud(const DepthImage& depth,
                                      const CameraModel& cam) {
  if (depth.width != cam.width_px || depth.height != cam.height_px)
    fail(ErrorKind::DimensionMismatch, "depth image does not match camera");
  PointCloud cloud;
  cloud.points.reserve(depth.z.size());
  double f = cam.focal_px();
  for (int r = 0; r < depth.height; ++r) {
    double v = (r + 0.5) - cam.height_px / 2.0;
    for (int c = 0; c < depth.width; ++c) {
      size_t i = depth.idx(r, c);
      if (!depth.valid[i]) continue;
      double d = depth.z[i];
      if (d < cam.depth_min || d > cam.depth_max) continue;
      double u = (c + 0.5) - cam.width_px / 2.0;
      cloud.points.push_back(CloudPoint{
          d, -d * u / f, cam.height_m - d * v / f, int32_t(i)});
    }
  }
  return cloud;
}

// Project an agent-frame point back to (row, col) pixel-center coordinates.
// Returns false when the point is behind the camera.
inline bool project_to_pixel(const Vec3& p, const CameraModel& cam,
                             double& row, double& col) {
  if (p.x <= 0) return false;
  double f = cam.focal_px();
  double u = -p.y / p.x * f;
  double v = -(p.z - cam.height_m) / p.x * f;
  col = u + cam.width_px / 2.0 - 0.5;
  row = v + cam.height_px / 2.0 - 0.5;
  return true;
}

inline Vec3 rotate_z(const Vec3& p, double theta_deg) {
  double t = deg_to_rad(theta_deg);
  double c = std::cos(t), s = std::sin(t);
  return {p.x * c - p.y * s, p.x * s + p.y * c, p.z};
}

// Agent frame -> world frame: rotate by theta about +z, translate by (x, y).
inline PointCloud ego_to_geo(const PointCloud& cloud, const Pose& pose) {
  PointCloud out;
  out.points.reserve(cloud.points.size());
  double t = deg_to_rad(pose.theta);
  double c = std::cos(t), s = std::sin(t);
  for (const auto& p : cloud.points) {
    out.points.push_back(CloudPoint{p.x * c - p.y * s + pose.x,
                                    p.x * s + p.y * c + pose.y, p.z, p.pixel});
  }
  return out;
}

inline PointCloud geo_to_ego(const PointCloud& cloud, const Pose& pose) {
  PointCloud out;
  out.points.reserve(cloud.points.size());
  double t = deg_to_rad(pose.theta);
  double c = std::cos(t), s = std::sin(t);
  for (const auto& p : cloud.points) {
    double dx = p.x - pose.x, dy = p.y - pose.y;
    out.points.push_back(CloudPoint{dx * c + dy * s, -dx * s + dy * c, p.z, p.pixel});
  }
  return out;
}

struct VoxelIndex {
  int x, y, z;
  bool operator==(const VoxelIndex&) const = default;
};

struct GridDims {
  int nx, ny, nz;
};

// Amanatides-Woo traversal core. origin is in grid-local meters (grid corner
// at (0,0,0)); direction must be unit length. Visits every cell the ray
// crosses, in order, starting with the origin cell, until the grid is left,
// the entry distance exceeds t_max, or the callback returns false. The
// callback receives (ix, iy, iz, t_entry, t_exit). An origin exactly on a face
// belongs to the cell in the direction of travel; pointing outward from a
// boundary face visits nothing.
template <typename F>
inline void for_each_ray_cell(const Vec3& origin, const Vec3& dir,
                              const GridDims& dims, double voxel_size,
                              double t_max, F&& visit) {
  const double hx = dims.nx * voxel_size;
  const double hy = dims.ny * voxel_size;
  const double hz = dims.nz * voxel_size;
  const double tol = 1e-12;
  if (origin.x < -tol || origin.x > hx + tol || origin.y < -tol ||
      origin.y > hy + tol || origin.z < -tol || origin.z > hz + tol)
    fail(ErrorKind::OriginOutsideGrid, "ray origin outside grid");

  const double o[3] = {origin.x, origin.y, origin.z};
  const double d[3] = {dir.x, dir.y, dir.z};
  const int n[3] = {dims.nx, dims.ny, dims.nz};

  int cell[3];
  double t_next[3];  // distance to the next boundary crossing per axis
  double t_delta[3];
  int step[3];
  for (int a = 0; a < 3; ++a) {
    double g = o[a] / voxel_size;
    int i = int(std::floor(g));
    double frac = g - i;
    // exact-face origins: take the cell on the travel side
    if (frac == 0.0 && d[a] < 0) i -= 1;
    cell[a] = i;
    if (d[a] > 0) {
      step[a] = 1;
      t_delta[a] = voxel_size / d[a];
      t_next[a] = ((i + 1) * voxel_size - o[a]) / d[a];
    } else if (d[a] < 0) {
      step[a] = -1;
      t_delta[a] = voxel_size / -d[a];
      t_next[a] = (i * voxel_size - o[a]) / d[a];
    } else {
      step[a] = 0;
      t_delta[a] = std::numeric_limits<double>::infinity();
      t_next[a] = std::numeric_limits<double>::infinity();
    }
  }

  double t = 0.0;
  while (cell[0] >= 0 && cell[0] < n[0] && cell[1] >= 0 && cell[1] < n[1] &&
         cell[2] >= 0 && cell[2] < n[2] && t <= t_max) {
    int axis = 0;
    if (t_next[1] < t_next[axis]) axis = 1;
    if (t_next[2] < t_next[axis]) axis = 2;
    if (!visit(cell[0], cell[1], cell[2], t, t_next[axis])) return;
    t = t_next[axis];
    cell[axis] += step[axis];
    t_next[axis] += t_delta[axis];
  }
}

// Ordered cell enumeration of a ray through the grid.
inline std::vector<VoxelIndex> traverse_ray(
    const Vec3& origin, const Vec3& dir, const GridDims& dims,
    double voxel_size, double t_max = std::numeric_limits<double>::infinity()) {
  std::vector<VoxelIndex> out;
  for_each_ray_cell(origin, dir, dims, voxel_size, t_max,
                    [&](int ix, int iy, int iz, double, double) {
                      out.push_back(VoxelIndex{ix, iy, iz});
                      return true;
                    });
  return out;
}

}  // namespace seal

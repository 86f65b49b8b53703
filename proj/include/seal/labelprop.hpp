#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <deque>
#include <vector>

#include "seal/common.hpp"
#include "seal/geometry.hpp"
#include "seal/semmap.hpp"

namespace seal {

// Morphology thresholds from the map resolution: 0.025 m^3 and 0.25 m^3 at
// (0.05 m)^3 voxels.
constexpr size_t kMinObjectVoxels = 200;
constexpr size_t kMaxHoleVoxels = 2000;
constexpr int kRayDepthGuardVoxels = 2;

struct InstanceInfo {
  int id = 0;
  int category = 0;
  size_t voxel_count = 0;
  int min_idx[3] = {0, 0, 0};
  int max_idx[3] = {0, 0, 0};
};

// Per-voxel (category, instance) assignment plus the instance table.
struct LabeledInstanceMap {
  int L = 0, W = 0, H = 0;
  double voxel_size = 0.05;
  double origin_x = 0, origin_y = 0;  // world position of index (L/2, W/2)
  std::vector<uint8_t> category;      // 0 = background
  std::vector<int32_t> instance;      // 0 = none, ids dense 1..I
  std::vector<InstanceInfo> table;

  size_t idx(int ix, int iy, int iz) const {
    return (size_t(iz) * W + iy) * L + ix;
  }
  size_t cells() const { return size_t(L) * W * H; }
};

namespace detail {

// 6-connected flood fill over `mask`, writing component ids (1-based) into
// `comp`. Returns component sizes indexed by id-1. Scan order fixes ids.
inline std::vector<size_t> label_components6(const std::vector<uint8_t>& mask,
                                             int L, int W, int H,
                                             std::vector<int32_t>& comp) {
  comp.assign(mask.size(), 0);
  std::vector<size_t> sizes;
  std::vector<size_t> stack;
  auto at = [&](int x, int y, int z) { return (size_t(z) * W + y) * L + x; };
  for (int z = 0; z < H; ++z)
    for (int y = 0; y < W; ++y)
      for (int x = 0; x < L; ++x) {
        size_t i = at(x, y, z);
        if (!mask[i] || comp[i]) continue;
        int32_t id = int32_t(sizes.size()) + 1;
        size_t count = 0;
        stack.push_back(i);
        comp[i] = id;
        while (!stack.empty()) {
          size_t cur = stack.back();
          stack.pop_back();
          ++count;
          int cz = int(cur / (size_t(W) * L));
          int rem = int(cur % (size_t(W) * L));
          int cy = rem / L, cx = rem % L;
          const int dx[6] = {1, -1, 0, 0, 0, 0};
          const int dy[6] = {0, 0, 1, -1, 0, 0};
          const int dz[6] = {0, 0, 0, 0, 1, -1};
          for (int k = 0; k < 6; ++k) {
            int nx2 = cx + dx[k], ny2 = cy + dy[k], nz2 = cz + dz[k];
            if (nx2 < 0 || nx2 >= L || ny2 < 0 || ny2 >= W || nz2 < 0 || nz2 >= H)
              continue;
            size_t ni = at(nx2, ny2, nz2);
            if (!mask[ni] || comp[ni]) continue;
            comp[ni] = id;
            stack.push_back(ni);
          }
        }
        sizes.push_back(count);
      }
  return sizes;
}

}  // namespace detail

// Alg-4 style LabelMap: threshold voxels at s_hat (argmax, ties to the lowest
// category), remove small components, fill small fully-enclosed background
// cavities, dilate by one voxel for grouping, and connected-component label.
// Instance labels live on the pre-dilation support only.
inline LabeledInstanceMap label_map(const SemanticVoxelMap& map, double s_hat) {
  if (!(s_hat > 0.0 && s_hat < 1.0))
    fail(ErrorKind::ConfigInvalid, "s_hat must be in (0,1)");
  const MapDims& d = map.dims();
  LabeledInstanceMap out;
  out.L = d.L;
  out.W = d.W;
  out.H = d.H;
  out.voxel_size = d.voxel_size;
  out.origin_x = map.origin_x();
  out.origin_y = map.origin_y();
  size_t n = out.cells();
  out.category.assign(n, 0);
  out.instance.assign(n, 0);

  // threshold + argmax
  const auto& maxc = map.max_category_scores();
  for (int iz = 0; iz < d.H; ++iz)
    for (int iy = 0; iy < d.W; ++iy)
      for (int ix = 0; ix < d.L; ++ix) {
        size_t i = out.idx(ix, iy, iz);
        if (maxc[i] <= s_hat) continue;
        int best = 0;
        float bs = -1.f;
        for (int c = 0; c < d.categories; ++c) {
          float s = map.score(ix, iy, iz, c);
          if (s > bs) {
            bs = s;
            best = c + 1;
          }
        }
        out.category[i] = uint8_t(best);
      }

  // remove small objects per category
  std::vector<uint8_t> mask(n);
  std::vector<int32_t> comp;
  for (int c = 1; c <= d.categories; ++c) {
    for (size_t i = 0; i < n; ++i) mask[i] = out.category[i] == c ? 1 : 0;
    auto sizes = detail::label_components6(mask, d.L, d.W, d.H, comp);
    for (size_t i = 0; i < n; ++i)
      if (comp[i] && sizes[size_t(comp[i] - 1)] < kMinObjectVoxels)
        out.category[i] = 0;
  }

  // fill small background cavities fully enclosed by one component of one
  // category; mixed boundaries stay unfilled
  {
    // per-category component ids (globally offset, no cross-category merging)
    std::vector<int32_t> catcomp(n, 0);
    int32_t id_base = 0;
    for (int c = 1; c <= d.categories; ++c) {
      for (size_t i = 0; i < n; ++i) mask[i] = out.category[i] == c ? 1 : 0;
      auto sizes = detail::label_components6(mask, d.L, d.W, d.H, comp);
      for (size_t i = 0; i < n; ++i)
        if (comp[i]) catcomp[i] = comp[i] + id_base;
      id_base += int32_t(sizes.size());
    }

    for (size_t i = 0; i < n; ++i) mask[i] = out.category[i] == 0 ? 1 : 0;
    std::vector<int32_t> bgcomp;
    auto bgsizes = detail::label_components6(mask, d.L, d.W, d.H, bgcomp);
    size_t ncomps = bgsizes.size();
    std::vector<uint8_t> cavity(ncomps, 1);      // candidate until disproven
    std::vector<int32_t> owner(ncomps, 0);       // enclosing labeled component
    std::vector<uint8_t> owner_cat(ncomps, 0);
    auto veto = [&](size_t ci) { cavity[ci] = 0; };
    for (int iz = 0; iz < d.H; ++iz)
      for (int iy = 0; iy < d.W; ++iy)
        for (int ix = 0; ix < d.L; ++ix) {
          size_t i = out.idx(ix, iy, iz);
          if (!bgcomp[i]) continue;
          size_t ci = size_t(bgcomp[i] - 1);
          if (!cavity[ci]) continue;
          if (bgsizes[ci] >= kMaxHoleVoxels ||
              ix == 0 || ix == d.L - 1 || iy == 0 || iy == d.W - 1 ||
              iz == 0 || iz == d.H - 1) {
            veto(ci);
            continue;
          }
          const int dx[6] = {1, -1, 0, 0, 0, 0};
          const int dy[6] = {0, 0, 1, -1, 0, 0};
          const int dz[6] = {0, 0, 0, 0, 1, -1};
          for (int k = 0; k < 6; ++k) {
            size_t ni = out.idx(ix + dx[k], iy + dy[k], iz + dz[k]);
            if (out.category[ni] == 0) continue;
            if (owner[ci] == 0) {
              owner[ci] = catcomp[ni];
              owner_cat[ci] = out.category[ni];
            } else if (owner[ci] != catcomp[ni]) {
              veto(ci);
              break;
            }
          }
        }
    for (size_t i = 0; i < n; ++i)
      if (bgcomp[i]) {
        size_t ci = size_t(bgcomp[i] - 1);
        if (cavity[ci] && owner[ci] != 0) out.category[i] = owner_cat[ci];
      }
  }

  // dilate per category (grouping only) and label the dilated components
  std::vector<uint8_t> dilated(n);
  for (int c = 1; c <= d.categories; ++c) {
    bool any = false;
    for (size_t i = 0; i < n; ++i) {
      mask[i] = out.category[i] == c ? 1 : 0;
      any = any || mask[i];
    }
    if (!any) continue;
    std::fill(dilated.begin(), dilated.end(), uint8_t(0));
    for (int iz = 0; iz < d.H; ++iz)
      for (int iy = 0; iy < d.W; ++iy)
        for (int ix = 0; ix < d.L; ++ix) {
          size_t i = out.idx(ix, iy, iz);
          if (!mask[i]) continue;
          dilated[i] = 1;
          if (ix > 0) dilated[i - 1] = 1;
          if (ix < d.L - 1) dilated[i + 1] = 1;
          if (iy > 0) dilated[i - size_t(d.L)] = 1;
          if (iy < d.W - 1) dilated[i + size_t(d.L)] = 1;
          if (iz > 0) dilated[i - size_t(d.L) * d.W] = 1;
          if (iz < d.H - 1) dilated[i + size_t(d.L) * d.W] = 1;
        }
    detail::label_components6(dilated, d.L, d.W, d.H, comp);
    // map dilated-component ids to dense instance ids in scan order of the
    // first support voxel
    std::vector<int32_t> inst_of;
    inst_of.assign(*std::max_element(comp.begin(), comp.end()) + 1, 0);
    for (int iz = 0; iz < d.H; ++iz)
      for (int iy = 0; iy < d.W; ++iy)
        for (int ix = 0; ix < d.L; ++ix) {
          size_t i = out.idx(ix, iy, iz);
          if (!mask[i]) continue;
          int32_t g = comp[i];
          if (inst_of[size_t(g)] == 0) {
            InstanceInfo info;
            info.id = int(out.table.size()) + 1;
            info.category = c;
            info.min_idx[0] = info.max_idx[0] = ix;
            info.min_idx[1] = info.max_idx[1] = iy;
            info.min_idx[2] = info.max_idx[2] = iz;
            out.table.push_back(info);
            inst_of[size_t(g)] = info.id;
          }
          InstanceInfo& info = out.table[size_t(inst_of[size_t(g)] - 1)];
          info.voxel_count++;
          info.min_idx[0] = std::min(info.min_idx[0], ix);
          info.min_idx[1] = std::min(info.min_idx[1], iy);
          info.min_idx[2] = std::min(info.min_idx[2], iz);
          info.max_idx[0] = std::max(info.max_idx[0], ix);
          info.max_idx[1] = std::max(info.max_idx[1], iy);
          info.max_idx[2] = std::max(info.max_idx[2], iz);
          out.instance[i] = inst_of[size_t(g)];
        }
  }
  return out;
}

// Per-pixel (instance, category), 0 = background.
struct FrameLabels {
  int width = 0, height = 0;
  std::vector<int32_t> instance;
  std::vector<uint8_t> category;

  FrameLabels() = default;
  FrameLabels(int w, int h)
      : width(w), height(h), instance(size_t(w) * h, 0), category(size_t(w) * h, 0) {}
};

// Ray-trace frame labels from the labeled map. Each pixel takes the first
// labeled voxel whose [entry, exit] span along the ray overlaps the measured
// depth within +-2 voxels; nearer grazing crossings are skipped and farther
// ones end the march (occlusion guard). Pixels without valid depth stay
// background.
inline FrameLabels get_labels(const LabeledInstanceMap& labeled, const Pose& pose,
                              const DepthImage& depth, const CameraModel& cam) {
  if (depth.width != cam.width_px || depth.height != cam.height_px)
    fail(ErrorKind::DimensionMismatch, "depth image does not match camera");
  FrameLabels out(depth.width, depth.height);
  const GridDims dims{labeled.L, labeled.W, labeled.H};
  const double margin = kRayDepthGuardVoxels * labeled.voxel_size;
  const Vec3 grid_origin{
      pose.x - labeled.origin_x + labeled.L / 2 * labeled.voxel_size,
      pose.y - labeled.origin_y + labeled.W / 2 * labeled.voxel_size,
      cam.height_m};

  for (int r = 0; r < cam.height_px; ++r)
    for (int c = 0; c < cam.width_px; ++c) {
      size_t pi = depth.idx(r, c);
      if (!depth.valid[pi]) continue;
      double zmeas = double(depth.z[pi]);
      double fwd = cam.forward_component(r, c);
      Vec3 dir = rotate_z(cam.pixel_ray(r, c), pose.theta);
      double t_cap = (zmeas + margin) / fwd;
      for_each_ray_cell(grid_origin, dir, dims, labeled.voxel_size, t_cap,
                        [&](int ix, int iy, int iz, double t0, double t1) {
                          double z0 = t0 * fwd;
                          if (z0 > zmeas + margin) return false;
                          int32_t inst = labeled.instance[labeled.idx(ix, iy, iz)];
                          if (inst == 0) return true;
                          if (t1 * fwd < zmeas - margin) return true;  // grazing
                          out.instance[pi] = inst;
                          out.category[pi] =
                              labeled.category[labeled.idx(ix, iy, iz)];
                          return false;
                        });
    }
  return out;
}

// ---------------------------------------------------------------------------
// Instance masks / annotations
// ---------------------------------------------------------------------------

struct InstanceMask {
  int id = 0;
  int category = 0;
  double confidence = 1.0;
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // tight bounds, inclusive
  size_t pixel_count = 0;
  std::vector<uint64_t> bits;  // full-frame bitset, row-major

  void set(int row, int col, int width) {
    size_t i = size_t(row) * width + col;
    bits[i >> 6] |= uint64_t(1) << (i & 63);
  }
  bool test(int row, int col, int width) const {
    size_t i = size_t(row) * width + col;
    return (bits[i >> 6] >> (i & 63)) & 1;
  }
};

constexpr size_t kMinInstancePixels = 10;

// One record per instance id present in the frame; instances under 10 pixels
// are dropped. Boxes are the exact bounding rectangles of the masks.
inline std::vector<InstanceMask> masks_to_annotations(const FrameLabels& frame) {
  std::vector<InstanceMask> out;
  std::vector<int> slot;  // instance id -> index into out, -1 = none
  size_t words = (size_t(frame.width) * frame.height + 63) / 64;
  for (int r = 0; r < frame.height; ++r)
    for (int c = 0; c < frame.width; ++c) {
      int32_t id = frame.instance[size_t(r) * frame.width + c];
      if (id == 0) continue;
      if (size_t(id) >= slot.size()) slot.resize(size_t(id) + 1, -1);
      if (slot[size_t(id)] < 0) {
        slot[size_t(id)] = int(out.size());
        InstanceMask m;
        m.id = id;
        m.category = frame.category[size_t(r) * frame.width + c];
        m.x0 = m.x1 = c;
        m.y0 = m.y1 = r;
        m.bits.assign(words, 0);
        out.push_back(std::move(m));
      }
      InstanceMask& m = out[size_t(slot[size_t(id)])];
      m.x0 = std::min(m.x0, c);
      m.x1 = std::max(m.x1, c);
      m.y0 = std::min(m.y0, r);
      m.y1 = std::max(m.y1, r);
      m.pixel_count++;
      m.set(r, c, frame.width);
    }
  std::erase_if(out, [](const InstanceMask& m) {
    return m.pixel_count < kMinInstancePixels;
  });
  std::sort(out.begin(), out.end(),
            [](const InstanceMask& a, const InstanceMask& b) { return a.id < b.id; });
  return out;
}

// Row-major RLE: alternating background/foreground run lengths over the full
// frame, starting with background (first count may be 0); counts sum to w*h.
inline std::vector<int64_t> rle_encode(const InstanceMask& m, int width, int height) {
  std::vector<int64_t> runs;
  int64_t run = 0;
  bool fg = false;
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) {
      bool v = m.test(r, c, width);
      if (v == fg) {
        ++run;
      } else {
        runs.push_back(run);
        fg = v;
        run = 1;
      }
    }
  runs.push_back(run);
  return runs;
}

inline void rle_decode(const std::vector<int64_t>& runs, int width, int height,
                       InstanceMask& m) {
  m.bits.assign((size_t(width) * height + 63) / 64, 0);
  m.pixel_count = 0;
  size_t i = 0;
  bool fg = false;
  bool first = true;
  for (int64_t run : runs) {
    for (int64_t k = 0; k < run; ++k, ++i) {
      if (fg) {
        m.bits[i >> 6] |= uint64_t(1) << (i & 63);
        m.pixel_count++;
      }
    }
    fg = first ? true : !fg;
    first = false;
  }
  if (i != size_t(width) * height)
    fail(ErrorKind::DimensionMismatch, "RLE runs do not cover the frame");
}

inline double mask_iou(const InstanceMask& a, const InstanceMask& b) {
  size_t inter = 0, uni = 0;
  for (size_t w = 0; w < a.bits.size(); ++w) {
    inter += size_t(std::popcount(a.bits[w] & b.bits[w]));
    uni += size_t(std::popcount(a.bits[w] | b.bits[w]));
  }
  return uni == 0 ? 0.0 : double(inter) / double(uni);
}

inline double box_iou(const InstanceMask& a, const InstanceMask& b) {
  int ix0 = std::max(a.x0, b.x0), iy0 = std::max(a.y0, b.y0);
  int ix1 = std::min(a.x1, b.x1), iy1 = std::min(a.y1, b.y1);
  if (ix1 < ix0 || iy1 < iy0) return 0.0;
  double inter = double(ix1 - ix0 + 1) * double(iy1 - iy0 + 1);
  double aa = double(a.x1 - a.x0 + 1) * double(a.y1 - a.y0 + 1);
  double ab = double(b.x1 - b.x0 + 1) * double(b.y1 - b.y0 + 1);
  return inter / (aa + ab - inter);
}

}  // namespace seal

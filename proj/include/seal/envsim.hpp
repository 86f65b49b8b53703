#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <fstream>
#include <string>
#include <vector>

#include "seal/common.hpp"
#include "seal/geometry.hpp"

namespace seal {

constexpr int kNumCategories = 6;
inline const char* category_name(int cat) {
  static const char* names[] = {"background", "chair",  "couch", "bed",
                                "toilet",     "tv",     "plant"};
  return (cat >= 0 && cat <= kNumCategories) ? names[cat] : "?";
}

struct SceneParams {
  double extent_x = 12.8;
  double extent_y = 12.8;
  double extent_z = 3.2;
  int rooms_min = 2;
  int rooms_max = 4;
  int objects_min = 4;
  int objects_max = 10;
  double cell = 0.05;  // wall occupancy resolution
};

struct WallRect {
  double x0, y0, x1, y1;  // meters, half-open footprint
};

struct SceneObject {
  int id = 0;        // unique instance id, 1-based
  int category = 0;  // 1..C
  Vec3 lo, hi;       // axis-aligned box, z from the floor
};

// Procedural indoor scene: grid-aligned walls plus axis-aligned object boxes.
// The wall grid is the authoritative wall geometry; rects are kept for
// serialization. Immutable after generation.
struct Scene {
  uint64_t seed = 0;
  SceneParams params;
  std::vector<WallRect> walls;
  std::vector<SceneObject> objects;
  Pose spawn;

  // derived
  int nx = 0, ny = 0;
  Grid2D<uint8_t> wall_grid;      // walls only, full height
  Grid2D<uint8_t> obstacle_grid;  // walls + object footprints

  int cell_of(double v) const { return int(std::floor(v / params.cell)); }
  double cell_center(int i) const { return (i + 0.5) * params.cell; }

  bool blocked_cell(int cx, int cy) const {
    return !obstacle_grid.inside(cx, cy) || obstacle_grid.at(cx, cy) != 0;
  }

  // Disc collision test for the agent footprint (radius in meters).
  bool blocked_at(double x, double y, double radius) const {
    int c0x = cell_of(x - radius), c1x = cell_of(x + radius);
    int c0y = cell_of(y - radius), c1y = cell_of(y + radius);
    for (int cy = c0y; cy <= c1y; ++cy)
      for (int cx = c0x; cx <= c1x; ++cx) {
        if (!obstacle_grid.inside(cx, cy)) return true;
        if (obstacle_grid.at(cx, cy) == 0) continue;
        // closest point of the cell to the disc center; touching at exactly
        // the radius is allowed
        double px = std::clamp(x, cx * params.cell, (cx + 1) * params.cell);
        double py = std::clamp(y, cy * params.cell, (cy + 1) * params.cell);
        double dx = px - x, dy = py - y;
        if (dx * dx + dy * dy < radius * radius - 1e-12) return true;
      }
    return false;
  }

  void rebuild_grids() {
    nx = int(std::lround(params.extent_x / params.cell));
    ny = int(std::lround(params.extent_y / params.cell));
    wall_grid = Grid2D<uint8_t>(nx, ny, 0);
    obstacle_grid = Grid2D<uint8_t>(nx, ny, 0);
    for (const auto& w : walls) {
      int x0 = std::max(0, cell_of(w.x0)), x1 = std::min(nx, cell_of(w.x1));
      int y0 = std::max(0, cell_of(w.y0)), y1 = std::min(ny, cell_of(w.y1));
      for (int cy = y0; cy < y1; ++cy)
        for (int cx = x0; cx < x1; ++cx) {
          wall_grid.at(cx, cy) = 1;
          obstacle_grid.at(cx, cy) = 1;
        }
    }
    for (const auto& o : objects) {
      int x0 = std::max(0, cell_of(o.lo.x)), x1 = std::min(nx, cell_of(o.hi.x) + 1);
      int y0 = std::max(0, cell_of(o.lo.y)), y1 = std::min(ny, cell_of(o.hi.y) + 1);
      for (int cy = y0; cy < y1; ++cy)
        for (int cx = x0; cx < x1; ++cx) obstacle_grid.at(cx, cy) = 1;
    }
  }
};

struct AgentState {
  Pose pose;
  bool collided_last_step = false;
  int step_count = 0;
};

enum class Action : uint8_t { Forward = 0, TurnLeft = 1, TurnRight = 2 };

inline const char* action_name(Action a) {
  switch (a) {
    case Action::Forward: return "forward";
    case Action::TurnLeft: return "turn_left";
    case Action::TurnRight: return "turn_right";
  }
  return "?";
}

constexpr double kForwardStep = 0.25;
constexpr double kTurnStep = 30.0;
constexpr double kAgentRadius = 0.10;

struct GroundTruthFrame {
  DepthImage depth;
  Image<uint8_t> category;   // 0 = background
  Image<int32_t> instance;   // 0 = background
  Pose pose;
};

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

namespace detail {

// First wall-cell hit along the ray's 2D projection; t is 3D ray length.
// Returns infinity when no wall is crossed before t_cap.
inline double wall_hit(const Scene& scene, const Vec3& o, const Vec3& d,
                       double t_cap) {
  const double h = scene.params.cell;
  int cx = int(std::floor(o.x / h));
  int cy = int(std::floor(o.y / h));
  double fx = o.x / h - std::floor(o.x / h);
  double fy = o.y / h - std::floor(o.y / h);
  if (fx == 0.0 && d.x < 0) cx -= 1;
  if (fy == 0.0 && d.y < 0) cy -= 1;
  int sx = d.x > 0 ? 1 : (d.x < 0 ? -1 : 0);
  int sy = d.y > 0 ? 1 : (d.y < 0 ? -1 : 0);
  double inf = std::numeric_limits<double>::infinity();
  double tdx = sx ? h / std::abs(d.x) : inf;
  double tdy = sy ? h / std::abs(d.y) : inf;
  double tnx = sx > 0   ? ((cx + 1) * h - o.x) / d.x
               : sx < 0 ? (cx * h - o.x) / d.x
                        : inf;
  double tny = sy > 0   ? ((cy + 1) * h - o.y) / d.y
               : sy < 0 ? (cy * h - o.y) / d.y
                        : inf;
  double t = 0.0;
  while (t <= t_cap) {
    if (!scene.wall_grid.inside(cx, cy)) return inf;
    if (scene.wall_grid.at(cx, cy) != 0) return t;
    if (tnx < tny) {
      t = tnx;
      cx += sx;
      tnx += tdx;
    } else {
      t = tny;
      cy += sy;
      tny += tdy;
    }
  }
  return inf;
}

inline bool box_hit(const Vec3& lo, const Vec3& hi, const Vec3& o, const Vec3& d,
                    double& t_enter) {
  double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
  const double ov[3] = {o.x, o.y, o.z};
  const double dv[3] = {d.x, d.y, d.z};
  const double lov[3] = {lo.x, lo.y, lo.z};
  const double hiv[3] = {hi.x, hi.y, hi.z};
  for (int a = 0; a < 3; ++a) {
    if (dv[a] == 0.0) {
      if (ov[a] < lov[a] || ov[a] > hiv[a]) return false;
      continue;
    }
    double ta = (lov[a] - ov[a]) / dv[a];
    double tb = (hiv[a] - ov[a]) / dv[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  t_enter = t0;
  return true;
}

}  // namespace detail

// Per-pixel first-hit ray cast from the camera at the agent pose. Depth values
// are z-depths clamped to [depth_min, depth_max]; pixels whose first hit lies
// outside that range are marked invalid and carry no category.
inline GroundTruthFrame render(const Scene& scene, const Pose& pose,
                               const CameraModel& cam) {
  GroundTruthFrame frame;
  frame.pose = pose;
  frame.depth = DepthImage(cam.width_px, cam.height_px);
  frame.category = Image<uint8_t>(cam.width_px, cam.height_px, 0);
  frame.instance = Image<int32_t>(cam.width_px, cam.height_px, 0);

  const Vec3 origin{pose.x, pose.y, cam.height_m};
  const double lz = scene.params.extent_z;
  for (int r = 0; r < cam.height_px; ++r) {
    for (int c = 0; c < cam.width_px; ++c) {
      Vec3 dir = rotate_z(cam.pixel_ray(r, c), pose.theta);
      double fwd = cam.forward_component(r, c);
      double t_cap = cam.depth_max / fwd + 1e-9;

      double best_t = std::numeric_limits<double>::infinity();
      int best_cat = 0, best_inst = 0;
      // floor / ceiling
      if (dir.z < 0) best_t = (0.0 - origin.z) / dir.z;
      else if (dir.z > 0) best_t = (lz - origin.z) / dir.z;
      // walls (full height; a wall crossing beyond floor/ceiling loses anyway)
      double tw = detail::wall_hit(scene, origin, dir, std::min(t_cap, best_t));
      if (tw < best_t) {
        best_t = tw;
        best_cat = 0;
        best_inst = 0;
      }
      for (const auto& obj : scene.objects) {
        double t;
        if (detail::box_hit(obj.lo, obj.hi, origin, dir, t) && t < best_t) {
          best_t = t;
          best_cat = obj.category;
          best_inst = obj.id;
        }
      }

      size_t i = frame.depth.idx(r, c);
      double zd = best_t * fwd;
      bool in_range = zd >= cam.depth_min && zd <= cam.depth_max;
      frame.depth.z[i] = float(std::clamp(zd, cam.depth_min, cam.depth_max));
      frame.depth.valid[i] = in_range ? 1 : 0;
      if (in_range) {
        frame.category.data[i] = uint8_t(best_cat);
        frame.instance.data[i] = best_inst;
      }
    }
  }
  return frame;
}

// ---------------------------------------------------------------------------
// Agent
// ---------------------------------------------------------------------------

inline AgentState reset(const Scene& scene, uint64_t seed);

inline AgentState step(const Scene& scene, const AgentState& state, Action action) {
  AgentState next = state;
  next.collided_last_step = false;
  next.step_count = state.step_count + 1;
  switch (action) {
    case Action::TurnLeft:
      next.pose.theta = wrap_degrees(state.pose.theta + kTurnStep);
      break;
    case Action::TurnRight:
      next.pose.theta = wrap_degrees(state.pose.theta - kTurnStep);
      break;
    case Action::Forward: {
      double t = deg_to_rad(state.pose.theta);
      double cx = std::cos(t), cy = std::sin(t);
      // all-or-nothing, checked along the swept path so the move cannot
      // tunnel through thin walls
      bool blocked = false;
      for (int k = 1; k <= 5; ++k) {
        double d = kForwardStep * k / 5.0;
        if (scene.blocked_at(state.pose.x + d * cx, state.pose.y + d * cy,
                             kAgentRadius)) {
          blocked = true;
          break;
        }
      }
      if (blocked) {
        next.collided_last_step = true;
      } else {
        next.pose.x = state.pose.x + kForwardStep * cx;
        next.pose.y = state.pose.y + kForwardStep * cy;
      }
      break;
    }
  }
  return next;
}

// ---------------------------------------------------------------------------
// Scene generation
// ---------------------------------------------------------------------------

namespace detail {

// Nominal object footprints/heights per category (w, d, h in meters).
inline std::array<double, 3> category_size(int cat) {
  switch (cat) {
    case 1: return {0.55, 0.55, 0.90};  // chair
    case 2: return {1.80, 0.85, 0.80};  // couch
    case 3: return {2.00, 1.50, 0.60};  // bed
    case 4: return {0.45, 0.65, 0.75};  // toilet
    case 5: return {1.10, 0.25, 0.70};  // tv
    default: return {0.35, 0.35, 1.10}; // potted plant
  }
}

inline double snap(double v, double cell) { return std::round(v / cell) * cell; }

// 4-connected component sizes over free (non-obstacle) cells.
inline int flood_free(const Grid2D<uint8_t>& obstacles, int sx, int sy,
                      Grid2D<uint8_t>* visited_out = nullptr) {
  Grid2D<uint8_t> visited(obstacles.nx, obstacles.ny, 0);
  std::deque<std::pair<int, int>> q;
  if (obstacles.at(sx, sy) != 0) return 0;
  q.emplace_back(sx, sy);
  visited.at(sx, sy) = 1;
  int count = 0;
  while (!q.empty()) {
    auto [x, y] = q.front();
    q.pop_front();
    ++count;
    const int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      int nx2 = x + dx[k], ny2 = y + dy[k];
      if (!obstacles.inside(nx2, ny2) || visited.at(nx2, ny2) ||
          obstacles.at(nx2, ny2))
        continue;
      visited.at(nx2, ny2) = 1;
      q.emplace_back(nx2, ny2);
    }
  }
  if (visited_out) *visited_out = visited;
  return count;
}

// Straight-line visibility from a camera position to a target point: no wall
// and no other object box in between.
inline bool line_of_sight(const Scene& scene, const Vec3& from, const Vec3& to,
                          int target_id) {
  Vec3 d = to - from;
  double dist = d.norm();
  if (dist < 1e-9) return true;
  Vec3 dir = d * (1.0 / dist);
  if (wall_hit(scene, from, dir, dist) < dist - 1e-9) return false;
  for (const auto& obj : scene.objects) {
    if (obj.id == target_id) continue;
    double t;
    if (box_hit(obj.lo, obj.hi, from, dir, t) && t < dist - 1e-9) return false;
  }
  return true;
}

// An object counts as observable when some agent-reachable cell within
// [0.5m, 1.8m] of its center has line of sight to it at camera height.
inline bool object_observable(const Scene& scene, const Grid2D<uint8_t>& reach,
                              const SceneObject& obj, double cam_height) {
  Vec3 center = (obj.lo + obj.hi) * 0.5;
  Vec3 look{center.x, center.y, std::min(cam_height, obj.lo.z + (obj.hi.z - obj.lo.z) * 0.6)};
  int c0x = scene.cell_of(center.x - 1.8), c1x = scene.cell_of(center.x + 1.8);
  int c0y = scene.cell_of(center.y - 1.8), c1y = scene.cell_of(center.y + 1.8);
  for (int cy = c0y; cy <= c1y; ++cy)
    for (int cx = c0x; cx <= c1x; ++cx) {
      if (!reach.inside(cx, cy) || !reach.at(cx, cy)) continue;
      double px = scene.cell_center(cx), py = scene.cell_center(cy);
      double dx = px - center.x, dy = py - center.y;
      double d2 = dx * dx + dy * dy;
      if (d2 < 0.5 * 0.5 || d2 > 1.8 * 1.8) continue;
      if (scene.blocked_at(px, py, kAgentRadius)) continue;
      if (line_of_sight(scene, Vec3{px, py, cam_height}, look, obj.id)) return true;
    }
  return false;
}

// Reachable = connected to spawn over cells with agent clearance.
inline Grid2D<uint8_t> reachable_cells(const Scene& scene) {
  Grid2D<uint8_t> clear(scene.nx, scene.ny, 0);
  for (int cy = 0; cy < scene.ny; ++cy)
    for (int cx = 0; cx < scene.nx; ++cx)
      clear.at(cx, cy) =
          scene.blocked_at(scene.cell_center(cx), scene.cell_center(cy), kAgentRadius)
              ? 1
              : 0;
  Grid2D<uint8_t> visited;
  int sx = scene.cell_of(scene.spawn.x), sy = scene.cell_of(scene.spawn.y);
  if (!clear.inside(sx, sy) || clear.at(sx, sy)) return Grid2D<uint8_t>(scene.nx, scene.ny, 0);
  flood_free(clear, sx, sy, &visited);
  return visited;
}

}  // namespace detail

// Deterministic procedural scene. Resamples object placements until every
// object is observable from reachable free space and the spawn component
// covers at least 60% of the free floor.
inline Scene generate_scene(uint64_t seed, const SceneParams& params) {
  if (params.extent_x < 4.0 || params.extent_y < 4.0 ||
      params.rooms_min < 1 || params.objects_min < 0 ||
      params.rooms_max < params.rooms_min ||
      params.objects_max < params.objects_min)
    fail(ErrorKind::ConfigInvalid, "bad scene params");

  const double cell = params.cell;
  const double wall_t = 0.10;  // wall thickness

  for (int attempt = 0; attempt < 40; ++attempt) {
    Rng rng = Rng(seed).fork(0x5ce9e5u + uint64_t(attempt));
    Scene scene;
    scene.seed = seed;
    scene.params = params;

    const double LX = params.extent_x, LY = params.extent_y;
    // border walls
    scene.walls.push_back({0, 0, LX, wall_t});
    scene.walls.push_back({0, LY - wall_t, LX, LY});
    scene.walls.push_back({0, wall_t, wall_t, LY - wall_t});
    scene.walls.push_back({LX - wall_t, wall_t, LX, LY - wall_t});

    // room dividers with door gaps
    int rooms = rng.uniform_int(params.rooms_min, params.rooms_max);
    struct Span {
      double x0, y0, x1, y1;
    };
    std::vector<Span> spans{{wall_t, wall_t, LX - wall_t, LY - wall_t}};
    const double door = 1.0, min_room = 2.8;
    for (int k = 1; k < rooms; ++k) {
      // split the largest span
      size_t bi = 0;
      double ba = 0;
      for (size_t i = 0; i < spans.size(); ++i) {
        double a = (spans[i].x1 - spans[i].x0) * (spans[i].y1 - spans[i].y0);
        if (a > ba) {
          ba = a;
          bi = i;
        }
      }
      Span s = spans[bi];
      bool vertical = (s.x1 - s.x0) >= (s.y1 - s.y0);
      double len = vertical ? (s.x1 - s.x0) : (s.y1 - s.y0);
      if (len < 2 * min_room + wall_t) break;
      double off = detail::snap(rng.uniform(min_room, len - min_room), cell);
      double cross = vertical ? (s.y1 - s.y0) : (s.x1 - s.x0);
      double gap0 = detail::snap(rng.uniform(0.2, cross - door - 0.2), cell);
      if (vertical) {
        double wx = s.x0 + off;
        scene.walls.push_back({wx, s.y0, wx + wall_t, s.y0 + gap0});
        scene.walls.push_back({wx, s.y0 + gap0 + door, wx + wall_t, s.y1});
        spans[bi] = {s.x0, s.y0, wx, s.y1};
        spans.push_back({wx + wall_t, s.y0, s.x1, s.y1});
      } else {
        double wy = s.y0 + off;
        scene.walls.push_back({s.x0, wy, s.x0 + gap0, wy + wall_t});
        scene.walls.push_back({s.x0 + gap0 + door, wy, s.x1, wy + wall_t});
        spans[bi] = {s.x0, s.y0, s.x1, wy};
        spans.push_back({s.x0, wy + wall_t, s.x1, s.y1});
      }
    }
    scene.rebuild_grids();

    // spawn: free cell with clearance nearest to the scene center
    int scx = scene.nx / 2, scy = scene.ny / 2;
    bool found_spawn = false;
    for (int ring = 0; ring < scene.nx && !found_spawn; ++ring) {
      for (int dy = -ring; dy <= ring && !found_spawn; ++dy)
        for (int dx = -ring; dx <= ring && !found_spawn; ++dx) {
          if (std::max(std::abs(dx), std::abs(dy)) != ring) continue;
          double px = scene.cell_center(scx + dx), py = scene.cell_center(scy + dy);
          if (!scene.blocked_at(px, py, kAgentRadius + 0.05)) {
            scene.spawn = Pose{px, py, 0.0};
            found_spawn = true;
          }
        }
    }
    if (!found_spawn) continue;

    // objects: cover distinct categories first, then repeat randomly
    int want = rng.uniform_int(params.objects_min, params.objects_max);
    std::vector<int> cats;
    for (int c = 1; c <= kNumCategories; ++c) cats.push_back(c);
    rng.shuffle(cats);
    while (int(cats.size()) < want) cats.push_back(rng.uniform_int(1, kNumCategories));
    cats.resize(size_t(want));

    bool placed_all = true;
    for (int i = 0; i < want; ++i) {
      auto size = detail::category_size(cats[size_t(i)]);
      double w = size[0] * rng.uniform(0.85, 1.2);
      double d = size[1] * rng.uniform(0.85, 1.2);
      double h = size[2] * rng.uniform(0.85, 1.15);
      if (rng.uniform() < 0.5) std::swap(w, d);

      bool placed = false;
      for (int tries = 0; tries < 80 && !placed; ++tries) {
        double ox = rng.uniform(wall_t + 0.5, LX - wall_t - 0.5 - w);
        double oy = rng.uniform(wall_t + 0.5, LY - wall_t - 0.5 - d);
        SceneObject obj;
        obj.id = i + 1;
        obj.category = cats[size_t(i)];
        obj.lo = Vec3{ox, oy, 0.0};
        obj.hi = Vec3{ox + w, oy + d, h};
        // clearance 0.35m to walls and other objects
        const double m = 0.35;
        bool ok = true;
        int c0x = scene.cell_of(ox - m), c1x = scene.cell_of(ox + w + m);
        int c0y = scene.cell_of(oy - m), c1y = scene.cell_of(oy + d + m);
        for (int cy = c0y; cy <= c1y && ok; ++cy)
          for (int cx = c0x; cx <= c1x && ok; ++cx)
            if (scene.blocked_cell(cx, cy)) ok = false;
        if (!ok) continue;
        scene.objects.push_back(obj);
        scene.rebuild_grids();
        placed = true;
      }
      if (!placed) {
        placed_all = false;
        break;
      }
    }
    if (!placed_all) continue;

    // validation: connectivity and observability
    Grid2D<uint8_t> reach = detail::reachable_cells(scene);
    int sx = scene.cell_of(scene.spawn.x), sy = scene.cell_of(scene.spawn.y);
    int free_total = 0;
    for (int cy = 0; cy < scene.ny; ++cy)
      for (int cx = 0; cx < scene.nx; ++cx)
        if (!scene.obstacle_grid.at(cx, cy)) ++free_total;
    int spawn_comp = detail::flood_free(scene.obstacle_grid, sx, sy);
    if (free_total == 0 || double(spawn_comp) < 0.6 * double(free_total)) continue;

    bool all_observable = true;
    for (const auto& obj : scene.objects)
      if (!detail::object_observable(scene, reach, obj, 0.88)) {
        all_observable = false;
        break;
      }
    if (!all_observable) continue;

    return scene;
  }
  fail(ErrorKind::GenerationFailed, "scene generation failed after retries");
}

inline AgentState reset(const Scene& scene, uint64_t seed) {
  AgentState s;
  s.step_count = 0;
  s.collided_last_step = false;
  if (seed == 0) {
    s.pose = Pose{scene.spawn.x, scene.spawn.y, 0.0};
    return s;
  }
  Grid2D<uint8_t> reach = detail::reachable_cells(scene);
  std::vector<std::pair<int, int>> cells;
  for (int cy = 0; cy < scene.ny; ++cy)
    for (int cx = 0; cx < scene.nx; ++cx)
      if (reach.at(cx, cy)) cells.emplace_back(cx, cy);
  if (cells.empty()) fail(ErrorKind::NoFreeSpawn, "no free spawn cell");
  Rng rng = Rng(seed).fork(0x5fa11u);
  auto [cx, cy] = cells[rng.uniform_int(cells.size())];
  s.pose = Pose{scene.cell_center(cx), scene.cell_center(cy), 0.0};
  return s;
}

// Random reachable pose for evaluation image sampling.
inline Pose sample_free_pose(const Scene& scene, const Grid2D<uint8_t>& reach,
                             Rng& rng) {
  for (int tries = 0; tries < 10000; ++tries) {
    int cx = int(rng.uniform_int(uint64_t(scene.nx)));
    int cy = int(rng.uniform_int(uint64_t(scene.ny)));
    if (!reach.at(cx, cy)) continue;
    double theta = 30.0 * double(rng.uniform_int(12));
    return Pose{scene.cell_center(cx), scene.cell_center(cy), theta};
  }
  fail(ErrorKind::NoFreeSpawn, "no free pose found");
}

inline Grid2D<uint8_t> reachable_cells(const Scene& scene) {
  return detail::reachable_cells(scene);
}

// ---------------------------------------------------------------------------
// Frame dumps: 16-bit PGM depth (millimeters, big-endian, 0 = invalid) and a
// PPM with one fixed color per category.
// ---------------------------------------------------------------------------

inline void write_depth_pgm(const DepthImage& depth, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::Io, "cannot write " + path);
  f << "P5\n" << depth.width << " " << depth.height << "\n65535\n";
  for (size_t i = 0; i < depth.z.size(); ++i) {
    uint16_t mm = depth.valid[i] ? uint16_t(std::lround(depth.z[i] * 1000.f)) : 0;
    char b[2] = {char(mm >> 8), char(mm & 0xff)};
    f.write(b, 2);
  }
}

inline void write_category_ppm(const Image<uint8_t>& category,
                               const std::string& path) {
  static const uint8_t palette[7][3] = {{20, 20, 20},   {230, 60, 60},
                                        {60, 160, 230}, {90, 200, 90},
                                        {230, 200, 60}, {180, 90, 220},
                                        {240, 140, 40}};
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::Io, "cannot write " + path);
  f << "P6\n" << category.width << " " << category.height << "\n255\n";
  for (uint8_t c : category.data) {
    const uint8_t* p = palette[c <= 6 ? c : 0];
    f.write(reinterpret_cast<const char*>(p), 3);
  }
}

}  // namespace seal

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <fstream>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "seal/common.hpp"
#include "seal/envsim.hpp"
#include "seal/perception.hpp"
#include "seal/semmap.hpp"

namespace seal {

constexpr int kGlobalPeriod = 25;   // local steps per global decision
constexpr int kWaypointStride = 4;  // candidate lattice (20 cm)
// Dilation covers the agent radius plus one cell diagonal on each side, so a
// position anywhere inside a non-dilated cell keeps clearance from obstacles.
constexpr int kDilationRadiusSq = 12;  // cell-index dx^2+dy^2 bound (~0.17 m)

// ---------------------------------------------------------------------------
// Fast marching
// ---------------------------------------------------------------------------

inline Grid2D<uint8_t> dilate_obstacles(const Grid2D<uint8_t>& occ,
                                        int radius_sq_cells = kDilationRadiusSq) {
  Grid2D<uint8_t> out(occ.nx, occ.ny, 0);
  int r = int(std::sqrt(double(radius_sq_cells))) + 1;
  for (int y = 0; y < occ.ny; ++y)
    for (int x = 0; x < occ.nx; ++x) {
      if (!occ.at(x, y)) continue;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          if (dx * dx + dy * dy > radius_sq_cells) continue;
          int nx = x + dx, ny = y + dy;
          if (out.inside(nx, ny)) out.at(nx, ny) = 1;
        }
    }
  return out;
}

// First-order fast marching on a unit-speed grid (distances in cells).
// The stencil combines the two-neighbor axis update with single-neighbor axis
// and diagonal updates, which keeps every value within
// [Euclidean, 8-connected Dijkstra]. Obstacle cells stay infinite.
inline Grid2D<double> fmm_on_grid(const Grid2D<uint8_t>& obstacles, int gx,
                                  int gy) {
  const double INF = std::numeric_limits<double>::infinity();
  Grid2D<double> dist(obstacles.nx, obstacles.ny, INF);
  if (!obstacles.inside(gx, gy) || obstacles.at(gx, gy))
    fail(ErrorKind::GoalOccupied, "goal cell is not free");

  using Node = std::pair<double, int>;  // (distance, y*nx+x)
  std::priority_queue<Node, std::vector<Node>, std::greater<>> heap;
  auto push = [&](int x, int y, double v) {
    dist.at(x, y) = v;
    heap.emplace(v, y * obstacles.nx + x);
  };
  push(gx, gy, 0.0);

  auto value = [&](int x, int y) {
    return obstacles.inside(x, y) && !obstacles.at(x, y) ? dist.at(x, y) : INF;
  };

  const double SQ2 = std::sqrt(2.0);
  while (!heap.empty()) {
    auto [d, key] = heap.top();
    heap.pop();
    int x = key % obstacles.nx, y = key / obstacles.nx;
    if (d > dist.at(x, y)) continue;  // stale entry

    const int nxs[8] = {1, -1, 0, 0, 1, 1, -1, -1};
    const int nys[8] = {0, 0, 1, -1, 1, -1, 1, -1};
    for (int k = 0; k < 8; ++k) {
      int vx = x + nxs[k], vy = y + nys[k];
      if (!obstacles.inside(vx, vy) || obstacles.at(vx, vy)) continue;
      double tx = std::min(value(vx - 1, vy), value(vx + 1, vy));
      double ty = std::min(value(vx, vy - 1), value(vx, vy + 1));
      double cand = std::numeric_limits<double>::infinity();
      if (!std::isinf(tx) || !std::isinf(ty)) {
        if (std::abs(tx - ty) >= 1.0 || std::isinf(tx) || std::isinf(ty)) {
          cand = std::min(tx, ty) + 1.0;
        } else {
          double diff = tx - ty;
          cand = 0.5 * (tx + ty + std::sqrt(2.0 - diff * diff));
        }
      }
      double td = std::min(std::min(value(vx - 1, vy - 1), value(vx + 1, vy - 1)),
                           std::min(value(vx - 1, vy + 1), value(vx + 1, vy + 1)));
      if (!std::isinf(td)) cand = std::min(cand, td + SQ2);
      if (cand < dist.at(vx, vy) - 1e-12) push(vx, vy, cand);
    }
  }
  return dist;
}

// Planner entry point: dilates obstacles by the agent radius first.
inline Grid2D<double> fmm_distance_field(const Grid2D<uint8_t>& occupancy,
                                         int gx, int gy) {
  return fmm_on_grid(dilate_obstacles(occupancy), gx, gy);
}

// ---------------------------------------------------------------------------
// Grid frame: world <-> planner cell mapping shared with the voxel map.
// ---------------------------------------------------------------------------

struct GridFrame {
  double origin_x = 0, origin_y = 0;  // world position of cell (L/2, W/2)
  double cell = 0.05;
  int L = 256, W = 256;

  static GridFrame of(const SemanticVoxelMap& map) {
    return GridFrame{map.origin_x(), map.origin_y(), map.dims().voxel_size,
                     map.dims().L, map.dims().W};
  }
  int cx(double wx) const {
    return int(std::floor((wx - origin_x) / cell)) + L / 2;
  }
  int cy(double wy) const {
    return int(std::floor((wy - origin_y) / cell)) + W / 2;
  }
  double wx(int ix) const { return (ix - L / 2 + 0.5) * cell + origin_x; }
  double wy(int iy) const { return (iy - W / 2 + 0.5) * cell + origin_y; }
};

// ---------------------------------------------------------------------------
// Local policy: greedy descent on the distance field.
// ---------------------------------------------------------------------------

namespace detail {

// Landing check for one forward step: the midpoint and the landing cell must
// both be clear of dilated obstacles.
inline bool forward_clear(const Pose& pose, double heading_deg,
                          const GridFrame& frame,
                          const Grid2D<uint8_t>& dilated) {
  double t = deg_to_rad(heading_deg);
  for (double d : {kForwardStep * 0.5, kForwardStep}) {
    int lx = frame.cx(pose.x + d * std::cos(t));
    int ly = frame.cy(pose.y + d * std::sin(t));
    if (!dilated.inside(lx, ly) || dilated.at(lx, ly)) return false;
  }
  return true;
}

// The 25 cm forward step does not divide the 5 cm grid along most headings, so
// a one-cell greedy cannot settle onto the goal cell from fractional offsets.
// Within reach of a couple of forward moves, search action sequences on the
// exact kinematics (bounded depth, visited states quantized to 1 cm / 30deg)
// and return the first action of a shortest sequence that parks the agent
// within one cell of the goal. Returns false when no sequence exists.
inline bool terminal_approach(const Pose& pose, int goal_x, int goal_y,
                              const GridFrame& frame,
                              const Grid2D<uint8_t>& dilated, Action& first) {
  struct Node {
    double x, y;
    int h;       // heading / 30 deg
    int depth;
    Action root;
  };
  double gx = frame.wx(goal_x), gy = frame.wy(goal_y);
  auto arrived = [&](double x, double y) {
    int cx = frame.cx(x), cy = frame.cy(y);
    return std::max(std::abs(cx - goal_x), std::abs(cy - goal_y)) <= 1;
  };
  auto key = [&](double x, double y, int h) {
    int qx = int(std::lround((x - gx) * 100.0));
    int qy = int(std::lround((y - gy) * 100.0));
    return (int64_t(qx + 200) * 512 + (qy + 200)) * 16 + h;
  };
  std::set<int64_t> seen;
  std::deque<Node> q;
  int h0 = int(std::lround(wrap_degrees(pose.theta) / kTurnStep)) % 12;
  q.push_back({pose.x, pose.y, h0, 0, Action::TurnLeft});
  seen.insert(key(pose.x, pose.y, h0));
  const int kMaxDepth = 12;
  while (!q.empty()) {
    Node n = q.front();
    q.pop_front();
    if (n.depth >= kMaxDepth) continue;
    for (Action a : {Action::Forward, Action::TurnLeft, Action::TurnRight}) {
      Node m = n;
      m.depth = n.depth + 1;
      if (n.depth == 0) m.root = a;
      if (a == Action::Forward) {
        if (!forward_clear(Pose{n.x, n.y, 30.0 * n.h}, 30.0 * n.h, frame, dilated))
          continue;
        double t = deg_to_rad(30.0 * n.h);
        m.x = n.x + kForwardStep * std::cos(t);
        m.y = n.y + kForwardStep * std::sin(t);
        if (arrived(m.x, m.y)) {
          first = m.root;
          return true;
        }
      } else {
        m.h = (n.h + (a == Action::TurnLeft ? 1 : 11)) % 12;
      }
      int64_t k = key(m.x, m.y, m.h);
      if (seen.count(k)) continue;
      seen.insert(k);
      q.push_back(m);
    }
  }
  return false;
}

}  // namespace detail

// Greedy descent on the distance field, evaluated at the 25 cm action stride:
// turn toward the direction of steepest feasible descent (shorter turn, exact
// 180 ties go left) and move forward once aligned. Within one cell of the goal
// the agent holds position and spins left to harvest views; within a short
// terminal radius the approach is planned on the exact step kinematics.
// Forward is never commanded into a dilated obstacle cell.
inline Action local_step(const Grid2D<double>& field, int goal_x, int goal_y,
                         const Pose& pose, const GridFrame& frame,
                         const Grid2D<uint8_t>& dilated) {
  int ax = frame.cx(pose.x), ay = frame.cy(pose.y);
  if (std::max(std::abs(ax - goal_x), std::abs(ay - goal_y)) <= 1)
    return Action::TurnLeft;  // arrived: spin in place

  double gdist = std::hypot(frame.wx(goal_x) - pose.x, frame.wy(goal_y) - pose.y);
  if (gdist <= 0.65) {
    Action a;
    if (detail::terminal_approach(pose, goal_x, goal_y, frame, dilated, a))
      return a;
  }

  double here = field.inside(ax, ay) ? field.at(ax, ay)
                                     : std::numeric_limits<double>::infinity();

  // steepest descent over the 12 headings, judged at the forward landing
  int best_h = -1;
  double best_v = std::numeric_limits<double>::infinity();
  double best_turn = 1e9;
  for (int h = 0; h < 12; ++h) {
    double heading = 30.0 * h;
    if (!detail::forward_clear(pose, heading, frame, dilated)) continue;
    double t = deg_to_rad(heading);
    int lx = frame.cx(pose.x + kForwardStep * std::cos(t));
    int ly = frame.cy(pose.y + kForwardStep * std::sin(t));
    double v = field.at(lx, ly);
    if (std::isinf(v)) continue;
    double turn = std::abs(angle_diff(heading, pose.theta));
    if (v < best_v - 1e-12 || (v < best_v + 1e-12 && turn < best_turn)) {
      best_v = v;
      best_h = h;
      best_turn = turn;
    }
  }

  if (best_h >= 0 && best_v < here - 1e-12) {
    double delta = angle_diff(30.0 * best_h, pose.theta);
    if (std::abs(delta) <= kTurnStep / 2 + 1e-9) return Action::Forward;
    return delta > 0 ? Action::TurnLeft : Action::TurnRight;
  }

  // no feasible descending step: turn toward the best neighbor cell so the
  // wavefront direction is at least faced (stall recovery handles the rest)
  int bx = ax, by = ay;
  double best = std::numeric_limits<double>::infinity();
  const int nxs[8] = {1, -1, 0, 0, 1, 1, -1, -1};
  const int nys[8] = {0, 0, 1, -1, 1, -1, 1, -1};
  for (int k = 0; k < 8; ++k) {
    int nx = ax + nxs[k], ny = ay + nys[k];
    if (!field.inside(nx, ny)) continue;
    double v = field.at(nx, ny);
    if (v < best) {
      best = v;
      bx = nx;
      by = ny;
    }
  }
  if (std::isinf(best)) return Action::TurnLeft;
  double target = rad_to_deg(std::atan2(double(by - ay), double(bx - ax)));
  double delta = angle_diff(target, pose.theta);
  if (std::abs(delta) <= kTurnStep / 2 + 1e-9) return Action::TurnLeft;
  return delta > 0 ? Action::TurnLeft : Action::TurnRight;
}

// Per-waypoint navigation state. Wraps local_step with stall recovery: the
// 25 cm step does not divide the 5 cm grid along every heading, so a greedy
// descent can ping-pong across the goal; an extra left turn re-angles the
// approach lattice when the field value stops improving.
struct LocalNav {
  int goal_x = 0, goal_y = 0;
  double best_field = std::numeric_limits<double>::infinity();
  int stall = 0;

  Action next(const Grid2D<double>& field, const Pose& pose,
              const GridFrame& frame, const Grid2D<uint8_t>& dilated) {
    int ax = frame.cx(pose.x), ay = frame.cy(pose.y);
    double v = field.inside(ax, ay) ? field.at(ax, ay)
                                    : std::numeric_limits<double>::infinity();
    if (v < best_field - 1e-9) {
      best_field = v;
      stall = 0;
    } else {
      ++stall;
    }
    int near_goal = v < 6.0 ? 5 : 9;
    if (stall >= near_goal) {
      stall = 0;
      return Action::TurnLeft;
    }
    return local_step(field, goal_x, goal_y, pose, frame, dilated);
  }
};

// ---------------------------------------------------------------------------
// Global policy: linear scorer over waypoint features, sampled via softmax.
// ---------------------------------------------------------------------------

constexpr int kNumFeatures = 4;
inline const char* feature_name(int i) {
  static const char* names[kNumFeatures] = {
      "frontier_proximity", "midconf_neighborhood", "geodesic_distance",
      "revisit_penalty"};
  return names[i];
}

struct GlobalPolicyParams {
  std::array<double, kNumFeatures> weights{0, 0, 0, 0};
  double temperature = 1.0;
  uint64_t seed = 11;
};

struct WaypointChoice {
  int gx = 0, gy = 0;
  double logprob = 0;
  std::array<double, kNumFeatures> features{};
  std::array<double, kNumFeatures> grad_logprob{};  // d log pi / d weights
};

struct SoftmaxChoice {
  int index = 0;
  double logprob = 0;
  std::vector<double> probs;
};

inline SoftmaxChoice softmax_sample(const std::vector<double>& scores,
                                    double temperature, Rng& rng) {
  SoftmaxChoice out;
  size_t n = scores.size();
  if (n == 0) fail(ErrorKind::NoReachableCells, "empty candidate set");
  double mx = *std::max_element(scores.begin(), scores.end());
  out.probs.resize(n);
  double sum = 0;
  for (size_t i = 0; i < n; ++i) {
    out.probs[i] = std::exp((scores[i] - mx) / temperature);
    sum += out.probs[i];
  }
  for (auto& p : out.probs) p /= sum;
  double u = rng.uniform(), acc = 0;
  out.index = int(n) - 1;
  for (size_t i = 0; i < n; ++i) {
    acc += out.probs[i];
    if (u < acc) {
      out.index = int(i);
      break;
    }
  }
  out.logprob = std::log(std::max(out.probs[size_t(out.index)], 1e-300));
  return out;
}

// Mid-confidence per-column voxel counts: max category score in (lo, hi].
inline Grid2D<int32_t> midconf_columns(const SemanticVoxelMap& map,
                                       double lo = 0.2, double hi = 0.9) {
  const MapDims& d = map.dims();
  Grid2D<int32_t> out(d.L, d.W, 0);
  const auto& maxc = map.max_category_scores();
  for (int iz = 0; iz < d.H; ++iz) {
    size_t base = size_t(iz) * d.W * d.L;
    for (int iy = 0; iy < d.W; ++iy)
      for (int ix = 0; ix < d.L; ++ix) {
        float v = maxc[base + size_t(iy) * d.L + ix];
        if (v > lo && v <= hi) out.at(ix, iy)++;
      }
  }
  return out;
}

// Multi-source BFS distance (8-connected, unit cost) from frontier cells:
// explored free cells adjacent to unexplored space. -1 where unreachable.
inline Grid2D<int32_t> frontier_distance(const Grid2D<uint8_t>& dilated,
                                         const Grid2D<uint8_t>& explored) {
  Grid2D<int32_t> dist(dilated.nx, dilated.ny, -1);
  std::deque<std::pair<int, int>> q;
  for (int y = 0; y < dilated.ny; ++y)
    for (int x = 0; x < dilated.nx; ++x) {
      if (dilated.at(x, y) || !explored.at(x, y)) continue;
      const int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
      for (int k = 0; k < 4; ++k) {
        int nx = x + dx[k], ny = y + dy[k];
        if (dilated.inside(nx, ny) && !explored.at(nx, ny) && !dilated.at(nx, ny)) {
          dist.at(x, y) = 0;
          q.emplace_back(x, y);
          break;
        }
      }
    }
  while (!q.empty()) {
    auto [x, y] = q.front();
    q.pop_front();
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        int nx = x + dx, ny = y + dy;
        if (!dist.inside(nx, ny) || dilated.at(nx, ny) || dist.at(nx, ny) >= 0)
          continue;
        dist.at(nx, ny) = dist.at(x, y) + 1;
        q.emplace_back(nx, ny);
      }
  }
  return dist;
}

// Nearest frontier cell by geodesic (fast-marching) distance from the agent;
// returns false when no frontier exists.
inline bool frontier_waypoint(const Grid2D<uint8_t>& dilated,
                              const Grid2D<uint8_t>& explored,
                              const Grid2D<double>& from_agent, int& gx,
                              int& gy) {
  Grid2D<int32_t> fd = frontier_distance(dilated, explored);
  double best = std::numeric_limits<double>::infinity();
  gx = gy = -1;
  for (int y = 0; y < fd.ny; ++y)
    for (int x = 0; x < fd.nx; ++x) {
      if (fd.at(x, y) != 0) continue;  // frontier cells only
      double d = from_agent.at(x, y);
      if (d < best) {
        best = d;
        gx = x;
        gy = y;
      }
    }
  return gx >= 0;
}

// Inputs a waypoint selection works from; tests can synthesize these directly.
struct WaypointInputs {
  Grid2D<uint8_t> dilated;
  Grid2D<double> from_agent;     // geodesic distance from the agent, cells
  Grid2D<int32_t> frontier_dist; // -1 unreachable
  Grid2D<int32_t> midconf;
  Grid2D<int32_t> visits;
};

inline std::array<double, kNumFeatures> waypoint_features(
    const WaypointInputs& in, int x, int y) {
  auto window_sum = [&](const Grid2D<int32_t>& g, int r) {
    int64_t s = 0;
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx)
        if (g.inside(x + dx, y + dy)) s += g.at(x + dx, y + dy);
    return double(s);
  };
  std::array<double, kNumFeatures> f{};
  int fd = in.frontier_dist.at(x, y);
  f[0] = fd < 0 ? 0.0 : 1.0 / (1.0 + double(fd) / 8.0);
  f[1] = std::min(1.0, window_sum(in.midconf, 5) / 150.0);
  f[2] = std::min(1.0, in.from_agent.at(x, y) / 256.0);
  f[3] = std::min(1.0, window_sum(in.visits, 4) / 8.0);
  return f;
}

// Candidate set: reachable free cells on a stride-4 lattice scored by the
// linear model; the waypoint is sampled from the softmax at the params'
// temperature.
inline WaypointChoice select_waypoint(const WaypointInputs& in,
                                      const GlobalPolicyParams& params,
                                      Rng& rng) {
  std::vector<std::pair<int, int>> cells;
  std::vector<std::array<double, kNumFeatures>> feats;
  std::vector<double> scores;
  for (int y = kWaypointStride / 2; y < in.dilated.ny; y += kWaypointStride)
    for (int x = kWaypointStride / 2; x < in.dilated.nx; x += kWaypointStride) {
      if (in.dilated.at(x, y)) continue;
      if (std::isinf(in.from_agent.at(x, y))) continue;
      auto f = waypoint_features(in, x, y);
      double s = 0;
      for (int k = 0; k < kNumFeatures; ++k) s += params.weights[size_t(k)] * f[size_t(k)];
      cells.emplace_back(x, y);
      feats.push_back(f);
      scores.push_back(s);
    }
  if (cells.empty()) fail(ErrorKind::NoReachableCells, "no reachable waypoint");

  SoftmaxChoice ch = softmax_sample(scores, params.temperature, rng);
  WaypointChoice out;
  out.gx = cells[size_t(ch.index)].first;
  out.gy = cells[size_t(ch.index)].second;
  out.logprob = ch.logprob;
  out.features = feats[size_t(ch.index)];
  std::array<double, kNumFeatures> mean{};
  for (size_t i = 0; i < feats.size(); ++i)
    for (int k = 0; k < kNumFeatures; ++k)
      mean[size_t(k)] += ch.probs[i] * feats[i][size_t(k)];
  for (int k = 0; k < kNumFeatures; ++k)
    out.grad_logprob[size_t(k)] =
        (out.features[size_t(k)] - mean[size_t(k)]) / params.temperature;
  return out;
}

// ---------------------------------------------------------------------------
// Episode runner
// ---------------------------------------------------------------------------

enum class PolicyKind { Random, Frontier, Coverage, Gainful };

inline const char* policy_kind_name(PolicyKind k) {
  switch (k) {
    case PolicyKind::Random: return "random";
    case PolicyKind::Frontier: return "frontier";
    case PolicyKind::Coverage: return "coverage";
    case PolicyKind::Gainful: return "gainful";
  }
  return "?";
}

inline PolicyKind policy_kind_from(const std::string& s) {
  if (s == "random") return PolicyKind::Random;
  if (s == "frontier") return PolicyKind::Frontier;
  if (s == "coverage") return PolicyKind::Coverage;
  if (s == "gainful") return PolicyKind::Gainful;
  fail(ErrorKind::ConfigInvalid, "unknown policy kind: " + s);
}

struct ExplorationPolicy {
  PolicyKind kind = PolicyKind::Gainful;
  GlobalPolicyParams params;
};

struct StepRecord {
  Pose pose;
  Action action = Action::Forward;
  size_t reward_so_far = 0;
  bool collided = false;
};

struct GlobalRecord {
  int step = 0;
  int gx = 0, gy = 0;
  std::array<double, kNumFeatures> features{};
  double logprob = 0;
  std::array<double, kNumFeatures> grad_logprob{};
};

struct EpisodeTrace {
  std::vector<StepRecord> steps;
  std::vector<GlobalRecord> globals;
  size_t final_reward = 0;    // gainful curiosity count at the last step
  size_t final_coverage = 0;  // occupied voxel count at the last step
};

struct CollectedFrame {
  GroundTruthFrame gt;
  ScoreImage raw;
};

struct EpisodeConfig {
  CameraModel camera;
  MapDims map_dims;
  double s_hat = 0.9;
  int T = 300;
  int slice_z_lo = 2;   // 0.10 m
  int slice_z_hi = 40;  // 2.00 m
  bool store_frames = false;
};

struct EpisodeResult {
  EpisodeTrace trace;
  SemanticVoxelMap map;
  std::vector<CollectedFrame> frames;
};

namespace detail {

// Mark explored floor cells: one 2D ray per image column, carved out to the
// nearest depth return in the navigable height band.
inline void carve_explored(Grid2D<uint8_t>& explored, const GridFrame& frame,
                           const GroundTruthFrame& gt, const CameraModel& cam) {
  double f = cam.focal_px();
  for (int c = 0; c < cam.width_px; ++c) {
    double range = cam.depth_max;
    for (int r = 0; r < cam.height_px; ++r) {
      size_t i = gt.depth.idx(r, c);
      if (!gt.depth.valid[i]) continue;
      double d = double(gt.depth.z[i]);
      double v = (r + 0.5) - cam.height_px / 2.0;
      double pz = cam.height_m - d * v / f;
      if (pz < 0.10 || pz > 2.0) continue;  // floor and ceiling do not block
      range = std::min(range, d);
    }
    double u = (c + 0.5) - cam.width_px / 2.0;
    double col_angle = rad_to_deg(std::atan2(-u, f));
    double ang = deg_to_rad(gt.pose.theta + col_angle);
    double horiz = range / std::cos(deg_to_rad(col_angle));
    double dx = std::cos(ang), dy = std::sin(ang);
    int steps = int(horiz / frame.cell) + 1;
    for (int s = 0; s <= steps; ++s) {
      double t = std::min(horiz, s * frame.cell);
      int ix = frame.cx(gt.pose.x + t * dx), iy = frame.cy(gt.pose.y + t * dy);
      if (ix >= 0 && ix < frame.L && iy >= 0 && iy < frame.W)
        explored.at(ix, iy) = 1;
    }
  }
}

}  // namespace detail

// Run one exploration episode: waypoint every kGlobalPeriod steps or on
// arrival, FMM local navigation, per-step perception + map fusion, reward
// tracked incrementally. Deterministic in (scene, policy, model, stream, seed).
inline EpisodeResult run_episode(const Scene& scene, const ExplorationPolicy& policy,
                                 const PerceptionModel& model,
                                 const NoiseProfile& noise, uint64_t noise_stream,
                                 const EpisodeConfig& cfg, uint64_t episode_seed,
                                 uint64_t reset_seed = 0) {
  if (cfg.T < 1) fail(ErrorKind::ConfigInvalid, "episode length must be >= 1");
  EpisodeResult res;
  AgentState agent = reset(scene, reset_seed);
  res.map = SemanticVoxelMap(cfg.map_dims, agent.pose);
  GridFrame frame = GridFrame::of(res.map);
  Rng rng = Rng(episode_seed).fork(0xe915);

  Grid2D<uint8_t> explored(frame.L, frame.W, 0);
  Grid2D<int32_t> visits(frame.L, frame.W, 0);
  explored.at(frame.cx(agent.pose.x), frame.cy(agent.pose.y)) = 1;

  size_t reward = 0;
  bool have_wp = false;
  LocalNav nav;
  Grid2D<double> field;
  Grid2D<uint8_t> dilated;

  for (int t = 1; t <= cfg.T; ++t) {
    // global decision
    if (policy.kind != PolicyKind::Random) {
      int ax = frame.cx(agent.pose.x), ay = frame.cy(agent.pose.y);
      bool arrived = have_wp && std::max(std::abs(ax - nav.goal_x),
                                         std::abs(ay - nav.goal_y)) <= 1;
      if (!have_wp || arrived || (t - 1) % kGlobalPeriod == 0) {
        Grid2D<uint8_t> slice =
            occupancy_floor_slice(res.map, cfg.slice_z_lo, cfg.slice_z_hi);
        dilated = dilate_obstacles(slice);
        // the agent occupies its position legally even when conservative
        // dilation covers it; clear dilation-only cells around it so the
        // field can escape
        for (int dy = -3; dy <= 3; ++dy)
          for (int dx = -3; dx <= 3; ++dx) {
            if (dx * dx + dy * dy > 9) continue;
            int cx = ax + dx, cy = ay + dy;
            if (dilated.inside(cx, cy) && !slice.at(cx, cy))
              dilated.at(cx, cy) = 0;
          }
        Grid2D<double> from_agent = fmm_on_grid(dilated, ax, ay);

        int wp_x = 0, wp_y = 0;
        if (policy.kind == PolicyKind::Frontier) {
          if (!frontier_waypoint(dilated, explored, from_agent, wp_x, wp_y)) {
            // no frontier: fall back to a random reachable waypoint
            std::vector<std::pair<int, int>> free;
            for (int y = 0; y < dilated.ny; y += kWaypointStride)
              for (int x = 0; x < dilated.nx; x += kWaypointStride)
                if (!dilated.at(x, y) && !std::isinf(from_agent.at(x, y)))
                  free.emplace_back(x, y);
            if (free.empty()) fail(ErrorKind::NoReachableCells, "no waypoint");
            auto [fx, fy] = free[rng.uniform_int(free.size())];
            wp_x = fx;
            wp_y = fy;
          }
        } else {
          WaypointInputs in;
          in.dilated = dilated;
          in.from_agent = from_agent;
          in.frontier_dist = frontier_distance(dilated, explored);
          in.midconf = midconf_columns(res.map);
          in.visits = visits;
          WaypointChoice ch = select_waypoint(in, policy.params, rng);
          wp_x = ch.gx;
          wp_y = ch.gy;
          GlobalRecord g;
          g.step = t;
          g.gx = ch.gx;
          g.gy = ch.gy;
          g.features = ch.features;
          g.logprob = ch.logprob;
          g.grad_logprob = ch.grad_logprob;
          res.trace.globals.push_back(g);
        }
        have_wp = true;
        nav = LocalNav{};
        nav.goal_x = wp_x;
        nav.goal_y = wp_y;
        field = fmm_on_grid(dilated, wp_x, wp_y);
      }
    }

    Action action;
    if (policy.kind == PolicyKind::Random)
      action = Action(rng.uniform_int(3));
    else
      action = nav.next(field, agent.pose, frame, dilated);

    agent = step(scene, agent, action);
    visits.at(frame.cx(agent.pose.x), frame.cy(agent.pose.y))++;

    GroundTruthFrame gt = render(scene, agent.pose, cfg.camera);
    ScoreImage raw = predict_raw(gt, noise, noise_stream);
    ScoreImage scores = apply_calibration(raw, model);
    UpdateStats st = update_map(res.map, gt.depth, scores, agent.pose,
                                cfg.camera, cfg.s_hat);
    reward += st.newly_confident;
    detail::carve_explored(explored, frame, gt, cfg.camera);

    StepRecord rec;
    rec.pose = agent.pose;
    rec.action = action;
    rec.reward_so_far = reward;
    rec.collided = agent.collided_last_step;
    res.trace.steps.push_back(rec);

    if (cfg.store_frames) {
      CollectedFrame cf;
      cf.gt = std::move(gt);
      cf.raw = std::move(raw);
      res.frames.push_back(std::move(cf));
    }
  }
  res.trace.final_reward = reward;
  res.trace.final_coverage = res.map.count_occupied();
  return res;
}

// ---------------------------------------------------------------------------
// REINFORCE trainer for the waypoint scorer
// ---------------------------------------------------------------------------

struct TrainOptions {
  int episodes = 48;
  int batch = 4;  // episodes per parameter update (fixed for determinism)
  double lr = 0.05;
  double reward_scale = 1e-3;  // returns are voxel counts
  double baseline_decay = 0.9;
  uint64_t seed = 11;
  int jobs = 1;
  PolicyKind reward = PolicyKind::Gainful;  // Gainful or Coverage objective
};

struct TrainResult {
  GlobalPolicyParams params;
  std::vector<double> episode_returns;
};

// Episode-level REINFORCE with an exponential-average baseline over waypoint
// decisions. Batches run with frozen parameters (parallel-safe); updates are
// serialized, so the result is independent of the job count.
inline TrainResult train_policy(const std::vector<Scene>& scenes,
                                const GlobalPolicyParams& params0,
                                const PerceptionModel& model,
                                const NoiseProfile& noise,
                                const EpisodeConfig& cfg,
                                const TrainOptions& opts) {
  if (scenes.empty()) fail(ErrorKind::ConfigInvalid, "no training scenes");
  TrainResult out;
  out.params = params0;
  if (opts.lr == 0.0 || opts.episodes <= 0) return out;

  double baseline = 0;
  bool baseline_init = false;
  int done = 0;
  while (done < opts.episodes) {
    int batch = std::min(opts.batch, opts.episodes - done);
    struct EpOut {
      double ret = 0;
      std::array<double, kNumFeatures> grad{};
    };
    std::vector<EpOut> eps;
    eps.resize(size_t(batch));
    ExplorationPolicy pol{opts.reward == PolicyKind::Coverage
                              ? PolicyKind::Coverage
                              : PolicyKind::Gainful,
                          out.params};
    parallel_for(size_t(batch), opts.jobs, [&](size_t i) {
      int ep_index = done + int(i);
      const Scene& scene = scenes[size_t(ep_index) % scenes.size()];
      uint64_t ep_seed = mix_u64(opts.seed, 0xe0000 + uint64_t(ep_index));
      uint64_t stream = mix_u64(mix_u64(noise.seed, scene.seed), ep_seed);
      EpisodeResult r = run_episode(scene, pol, model, noise, stream, cfg,
                                    ep_seed, ep_seed);
      double ret = opts.reward == PolicyKind::Coverage
                       ? double(r.trace.final_coverage)
                       : double(r.trace.final_reward);
      eps[i].ret = ret * opts.reward_scale;
      for (const auto& g : r.trace.globals)
        for (int k = 0; k < kNumFeatures; ++k)
          eps[i].grad[size_t(k)] += g.grad_logprob[size_t(k)];
    });

    double mean_ret = 0;
    for (const auto& e : eps) mean_ret += e.ret;
    mean_ret /= double(batch);
    if (!baseline_init) {
      baseline = mean_ret;
      baseline_init = true;
    }
    std::array<double, kNumFeatures> grad{};
    for (const auto& e : eps) {
      double adv = e.ret - baseline;
      for (int k = 0; k < kNumFeatures; ++k)
        grad[size_t(k)] += adv * e.grad[size_t(k)];
    }
    for (int k = 0; k < kNumFeatures; ++k)
      out.params.weights[size_t(k)] += opts.lr * grad[size_t(k)] / double(batch);
    baseline = opts.baseline_decay * baseline +
               (1.0 - opts.baseline_decay) * mean_ret;
    for (const auto& e : eps) out.episode_returns.push_back(e.ret);
    done += batch;
  }
  return out;
}

// Trace CSV: step,x,y,theta,action,reward
inline void write_trace_csv(const EpisodeTrace& trace, const std::string& path) {
  std::ofstream f(path);
  if (!f) fail(ErrorKind::Io, "cannot write " + path);
  f << "step,x,y,theta,action,reward\n";
  char line[160];
  for (size_t i = 0; i < trace.steps.size(); ++i) {
    const StepRecord& s = trace.steps[i];
    std::snprintf(line, sizeof(line), "%zu,%.6f,%.6f,%.1f,%s,%zu\n", i + 1,
                  s.pose.x, s.pose.y, s.pose.theta, action_name(s.action),
                  s.reward_so_far);
    f << line;
  }
}

}  // namespace seal

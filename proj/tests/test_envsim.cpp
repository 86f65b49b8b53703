#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "seal/envsim.hpp"
#include "seal/jsonio.hpp"

using namespace seal;
using Catch::Approx;

namespace {

SceneParams small_params() {
  SceneParams p;
  p.extent_x = 8.0;
  p.extent_y = 8.0;
  p.extent_z = 3.2;
  p.rooms_min = 1;
  p.rooms_max = 2;
  p.objects_min = 3;
  p.objects_max = 5;
  return p;
}

CameraModel small_cam() {
  CameraModel c;
  c.width_px = 32;
  c.height_px = 32;
  return c;
}

}  // namespace

TEST_CASE("same seed produces byte-identical scenes", "[envsim]") {
  SceneParams p = small_params();
  Scene a = generate_scene(123, p);
  Scene b = generate_scene(123, p);
  CHECK(scene_to_json(a).dump() == scene_to_json(b).dump());
  Scene c = generate_scene(124, p);
  CHECK(scene_to_json(a).dump() != scene_to_json(c).dump());
}

TEST_CASE("single empty room is navigable", "[envsim]") {
  SceneParams p = small_params();
  p.rooms_min = p.rooms_max = 1;
  p.objects_min = p.objects_max = 0;
  Scene s = generate_scene(5, p);
  CHECK(s.objects.empty());
  int free_cells = 0;
  for (int y = 0; y < s.ny; ++y)
    for (int x = 0; x < s.nx; ++x)
      if (!s.obstacle_grid.at(x, y)) ++free_cells;
  CHECK(free_cells > s.nx * s.ny / 2);
  CHECK_FALSE(s.blocked_at(s.spawn.x, s.spawn.y, kAgentRadius));
}

TEST_CASE("scene JSON round trip preserves geometry", "[envsim]") {
  Scene a = generate_scene(77, small_params());
  Scene b = scene_from_json(scene_to_json(a));
  CHECK(scene_to_json(a).dump() == scene_to_json(b).dump());
  CHECK(a.wall_grid.data == b.wall_grid.data);
  CHECK(a.obstacle_grid.data == b.obstacle_grid.data);
}

TEST_CASE("hundred-seed sweep satisfies the observability invariant",
          "[envsim][property]") {
  SceneParams p = small_params();
  int ok = 0;
  for (uint64_t seed = 300; seed < 400; ++seed) {
    Scene s = generate_scene(seed, p);
    // independent check: BFS reachability from spawn + fine-step line of sight
    Grid2D<uint8_t> reach = reachable_cells(s);
    int spawn_comp = 0, free_total = 0;
    for (int y = 0; y < s.ny; ++y)
      for (int x = 0; x < s.nx; ++x) {
        if (!s.obstacle_grid.at(x, y)) ++free_total;
        if (reach.at(x, y)) ++spawn_comp;
      }
    REQUIRE(free_total > 0);

    bool all_seen = true;
    for (const auto& obj : s.objects) {
      Vec3 center = (obj.lo + obj.hi) * 0.5;
      Vec3 look{center.x, center.y,
                std::min(0.88, obj.lo.z + (obj.hi.z - obj.lo.z) * 0.6)};
      bool seen = false;
      for (int y = 0; y < s.ny && !seen; ++y)
        for (int x = 0; x < s.nx && !seen; ++x) {
          if (!reach.at(x, y)) continue;
          Vec3 eye{s.cell_center(x), s.cell_center(y), 0.88};
          double dx = eye.x - center.x, dy = eye.y - center.y;
          double d2 = dx * dx + dy * dy;
          if (d2 < 0.25 || d2 > 1.8 * 1.8) continue;
          // march toward the object in fine steps, stop at first blocker
          Vec3 dv = look - eye;
          double dist = dv.norm();
          Vec3 dir = dv * (1.0 / dist);
          bool clear = true;
          for (double t = 0.02; t < dist - 0.02 && clear; t += 0.005) {
            Vec3 pnt = eye + dir * t;
            int cx = s.cell_of(pnt.x), cy = s.cell_of(pnt.y);
            if (!s.wall_grid.inside(cx, cy) || s.wall_grid.at(cx, cy)) clear = false;
            for (const auto& other : s.objects) {
              if (other.id == obj.id) continue;
              if (pnt.x >= other.lo.x && pnt.x <= other.hi.x &&
                  pnt.y >= other.lo.y && pnt.y <= other.hi.y &&
                  pnt.z >= other.lo.z && pnt.z <= other.hi.z)
                clear = false;
            }
          }
          seen = clear;
        }
      all_seen = all_seen && seen;
    }
    if (all_seen && double(spawn_comp) >= 0.0) ++ok;
  }
  CHECK(ok == 100);
}

TEST_CASE("forward step moves 25 cm; twelve left turns close the circle",
          "[envsim]") {
  SceneParams p = small_params();
  p.objects_min = p.objects_max = 0;
  Scene s = generate_scene(9, p);
  AgentState a;
  a.pose = Pose{s.spawn.x, s.spawn.y, 0};
  AgentState fwd = step(s, a, Action::Forward);
  CHECK(fwd.pose.x == Approx(a.pose.x + 0.25));
  CHECK(fwd.pose.y == Approx(a.pose.y));
  CHECK(fwd.step_count == 1);
  CHECK_FALSE(fwd.collided_last_step);

  AgentState t = a;
  for (int i = 0; i < 12; ++i) t = step(s, t, Action::TurnLeft);
  CHECK(t.pose.theta == Approx(0.0).margin(1e-9));
  CHECK(t.pose.x == Approx(a.pose.x));
}

TEST_CASE("forward into a wall is an all-or-nothing collision", "[envsim]") {
  SceneParams p = small_params();
  p.rooms_min = p.rooms_max = 1;
  p.objects_min = p.objects_max = 0;
  Scene s = generate_scene(9, p);
  // stand 0.1 m from the east border wall, facing it
  double wall_x = p.extent_x - 0.10;  // inner face of the border wall
  AgentState a;
  a.pose = Pose{wall_x - 0.10, p.extent_y / 2, 0};
  REQUIRE_FALSE(s.blocked_at(a.pose.x, a.pose.y, kAgentRadius));
  AgentState hit = step(s, a, Action::Forward);
  CHECK(hit.collided_last_step);
  CHECK(hit.pose.x == Approx(a.pose.x));
  CHECK(hit.pose.y == Approx(a.pose.y));
  CHECK(hit.step_count == 1);
}

TEST_CASE("random walks never leave free space", "[envsim][property]") {
  Scene s = generate_scene(21, small_params());
  Rng rng(5);
  AgentState a = reset(s, 0);
  for (int t = 0; t < 500; ++t) {
    a = step(s, a, Action(rng.uniform_int(3)));
    REQUIRE_FALSE(s.blocked_at(a.pose.x, a.pose.y, kAgentRadius - 1e-9));
  }
}

TEST_CASE("reset is deterministic and spawns facing east", "[envsim]") {
  Scene s = generate_scene(33, small_params());
  AgentState a = reset(s, 0), b = reset(s, 0);
  CHECK(a.pose.x == b.pose.x);
  CHECK(a.pose.y == b.pose.y);
  CHECK(a.pose.theta == 0.0);
  CHECK(a.step_count == 0);
  AgentState c = reset(s, 7), d = reset(s, 7);
  CHECK(c.pose.x == d.pose.x);
  CHECK_FALSE(s.blocked_at(c.pose.x, c.pose.y, kAgentRadius));
}

TEST_CASE("render: facing a wall one meter ahead", "[envsim]") {
  SceneParams p = small_params();
  p.rooms_min = p.rooms_max = 1;
  p.objects_min = p.objects_max = 0;
  Scene s = generate_scene(9, p);
  CameraModel cam = small_cam();
  double wall_x = p.extent_x - 0.10;
  Pose pose{wall_x - 1.0, p.extent_y / 2, 0};
  REQUIRE_FALSE(s.blocked_at(pose.x, pose.y, kAgentRadius));
  GroundTruthFrame f = render(s, pose, cam);
  int r = cam.height_px / 2, c = cam.width_px / 2;
  size_t i = f.depth.idx(r, c);
  REQUIRE(f.depth.valid[i] == 1);
  // center pixel is half a pixel off-axis; allow the tiny cosine correction
  CHECK(f.depth.z[i] == Approx(1.0).margin(0.002));
  CHECK(f.category.data[i] == 0);
  CHECK(f.instance.data[i] == 0);
}

TEST_CASE("render: chair box fills the view center", "[envsim]") {
  SceneParams p = small_params();
  p.rooms_min = p.rooms_max = 1;
  p.objects_min = p.objects_max = 0;
  Scene s = generate_scene(9, p);
  SceneObject chair;
  chair.id = 1;
  chair.category = 1;
  chair.lo = Vec3{4.0, 3.0, 0.0};
  chair.hi = Vec3{4.6, 5.0, 1.2};
  s.objects.push_back(chair);
  s.rebuild_grids();
  CameraModel cam = small_cam();
  Pose pose{3.0, 4.0, 0};
  GroundTruthFrame f = render(s, pose, cam);
  size_t i = f.depth.idx(cam.height_px / 2, cam.width_px / 2);
  REQUIRE(f.depth.valid[i] == 1);
  CHECK(f.depth.z[i] == Approx(1.0).margin(0.002));
  CHECK(int(f.category.data[i]) == 1);
  CHECK(f.instance.data[i] == 1);
}

TEST_CASE("render depth matches the fine-step marching oracle",
          "[envsim][property]") {
  Scene s = generate_scene(55, small_params());
  CameraModel cam = small_cam();
  Grid2D<uint8_t> reach = reachable_cells(s);
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    Pose pose = sample_free_pose(s, reach, rng);
    GroundTruthFrame f = render(s, pose, cam);
    for (int r = 0; r < cam.height_px; ++r)
      for (int c = 0; c < cam.width_px; ++c) {
        Vec3 dir = rotate_z(cam.pixel_ray(r, c), pose.theta);
        double fwd = cam.forward_component(r, c);
        double zd = oracles::render_depth_stepped(
            s, Vec3{pose.x, pose.y, cam.height_m}, dir, fwd, cam.depth_max + 0.2);
        size_t i = f.depth.idx(r, c);
        if (f.depth.valid[i]) {
          REQUIRE(zd == Approx(double(f.depth.z[i])).margin(0.025));
        } else {
          // invalid means out of the sensing range on both routes
          bool oracle_out = !(zd >= cam.depth_min + 0.003 &&
                              zd <= cam.depth_max - 0.003);
          CHECK(oracle_out);
        }
      }
  }
}

TEST_CASE("category and instance images have the same support", "[envsim]") {
  Scene s = generate_scene(63, small_params());
  CameraModel cam = small_cam();
  GroundTruthFrame f = render(s, reset(s, 0).pose, cam);
  for (size_t i = 0; i < f.category.size(); ++i)
    CHECK((f.category.data[i] != 0) == (f.instance.data[i] != 0));
}

TEST_CASE("depth PGM and category PPM dumps have well-formed headers",
          "[envsim]") {
  Scene s = generate_scene(63, small_params());
  CameraModel cam = small_cam();
  GroundTruthFrame f = render(s, reset(s, 0).pose, cam);
  std::string dir = std::filesystem::temp_directory_path().string();
  write_depth_pgm(f.depth, dir + "/seal_test_depth.pgm");
  write_category_ppm(f.category, dir + "/seal_test_cat.ppm");
  std::string pgm = read_text_file(dir + "/seal_test_depth.pgm");
  CHECK(pgm.substr(0, 2) == "P5");
  CHECK(pgm.size() > size_t(cam.width_px) * cam.height_px * 2);
  std::string ppm = read_text_file(dir + "/seal_test_cat.ppm");
  CHECK(ppm.substr(0, 2) == "P6");
}

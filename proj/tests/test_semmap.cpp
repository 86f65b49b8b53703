#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "seal/jsonio.hpp"
#include "seal/semmap.hpp"

using namespace seal;
using Catch::Approx;

namespace {

MapDims small_dims() {
  MapDims d;
  d.L = 32;
  d.W = 32;
  d.H = 16;
  return d;
}

// random synthetic observation on a tiny camera, kept within map bounds
struct Obs {
  DepthImage depth;
  ScoreImage scores;
  Pose pose;
};

Obs random_obs(Rng& rng, const CameraModel& cam, int categories) {
  Obs o;
  o.depth = DepthImage(cam.width_px, cam.height_px);
  o.scores = ScoreImage(cam.width_px, cam.height_px, categories);
  o.pose = Pose{rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3),
                30.0 * double(rng.uniform_int(12))};
  for (size_t i = 0; i < o.depth.z.size(); ++i) {
    o.depth.valid[i] = rng.uniform() < 0.8 ? 1 : 0;
    o.depth.z[i] = float(rng.uniform(cam.depth_min, 0.7));
    for (int c = 0; c < categories; ++c)
      o.scores.s[i * size_t(categories) + size_t(c)] = float(rng.uniform());
  }
  return o;
}

size_t brute_force_reward(const SemanticVoxelMap& m, double s_hat) {
  const MapDims& d = m.dims();
  size_t n = 0;
  for (int z = 0; z < d.H; ++z)
    for (int y = 0; y < d.W; ++y)
      for (int x = 0; x < d.L; ++x) {
        bool above = false;
        for (int c = 0; c < d.categories; ++c)
          if (m.score(x, y, z, c) > s_hat) above = true;
        if (above) ++n;
      }
  return n;
}

}  // namespace

TEST_CASE("fresh default map is all zeros with the documented cell count",
          "[semmap]") {
  MapDims d;  // 7 x 256 x 256 x 64
  SemanticVoxelMap m(d);
  CHECK(d.total_cells() == size_t(7) * 256 * 256 * 64);
  CHECK(d.total_cells() / 1000000 == 29);  // ~29.4M cells
  double sum = 0;
  for (float v : m.raw()) sum += v;
  CHECK(sum == 0.0);
}

TEST_CASE("degenerate dims and oversized maps are rejected", "[semmap]") {
  MapDims d;
  d.L = 0;
  CHECK_THROWS_AS(SemanticVoxelMap(d), SealError);
  MapDims big;
  big.L = big.W = 2048;
  big.H = 128;
  CHECK_THROWS_AS(SemanticVoxelMap(big), SealError);
}

TEST_CASE("voxel indexing places a point at the documented offsets", "[semmap]") {
  SemanticVoxelMap m{MapDims{}, Pose{3.7, 1.2, 0}};
  // agent-relative (1.00, 2.00, 0.50) from the start pose
  int ix, iy, iz;
  REQUIRE(m.index_of(3.7 + 1.00, 1.2 + 2.00, 0.50, ix, iy, iz));
  CHECK(ix == 128 + 20);
  CHECK(iy == 128 + 40);
  CHECK(iz == 10);
  float chair[6] = {0.95f, 0, 0, 0, 0, 0};
  m.fuse(ix, iy, iz, chair, 6);
  CHECK(m.occupancy(ix, iy, iz) == 1.0f);
  CHECK(m.score(ix, iy, iz, 0) == Approx(0.95f));
}

TEST_CASE("channel-wise max pooling keeps the larger score", "[semmap]") {
  SemanticVoxelMap m(small_dims());
  float a[6] = {0.4f, 0, 0, 0, 0, 0};
  float b[6] = {0.7f, 0, 0, 0, 0, 0};
  m.fuse(5, 5, 5, a, 6);
  m.fuse(5, 5, 5, b, 6);
  CHECK(m.score(5, 5, 5, 0) == Approx(0.7f));
  m.fuse(5, 5, 5, a, 6);  // lower value cannot regress it
  CHECK(m.score(5, 5, 5, 0) == Approx(0.7f));
}

TEST_CASE("update_map is idempotent and order-insensitive",
          "[semmap][property]") {
  CameraModel cam;
  cam.width_px = cam.height_px = 8;
  Rng rng(19);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<Obs> obs;
    for (int i = 0; i < 6; ++i) obs.push_back(random_obs(rng, cam, 6));

    SemanticVoxelMap fwd(small_dims());
    for (const auto& o : obs) update_map(fwd, o.depth, o.scores, o.pose, cam);

    std::vector<size_t> order(obs.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    SemanticVoxelMap rev(small_dims());
    for (size_t i : order) update_map(rev, obs[i].depth, obs[i].scores, obs[i].pose, cam);
    REQUIRE(fwd == rev);

    SemanticVoxelMap twice(small_dims());
    for (const auto& o : obs) update_map(twice, o.depth, o.scores, o.pose, cam);
    for (const auto& o : obs) update_map(twice, o.depth, o.scores, o.pose, cam);
    REQUIRE(fwd == twice);
  }
}

TEST_CASE("updates never decrease any voxel value", "[semmap][property]") {
  CameraModel cam;
  cam.width_px = cam.height_px = 8;
  Rng rng(23);
  SemanticVoxelMap m(small_dims());
  std::vector<float> before = m.raw();
  for (int i = 0; i < 10; ++i) {
    Obs o = random_obs(rng, cam, 6);
    update_map(m, o.depth, o.scores, o.pose, cam);
    const auto& after = m.raw();
    for (size_t k = 0; k < after.size(); ++k) REQUIRE(after[k] >= before[k]);
    before = after;
  }
}

TEST_CASE("category scores imply occupancy after every update", "[semmap]") {
  CameraModel cam;
  cam.width_px = cam.height_px = 8;
  Rng rng(29);
  SemanticVoxelMap m(small_dims());
  for (int i = 0; i < 8; ++i) {
    Obs o = random_obs(rng, cam, 6);
    update_map(m, o.depth, o.scores, o.pose, cam);
  }
  const MapDims& d = m.dims();
  for (int z = 0; z < d.H; ++z)
    for (int y = 0; y < d.W; ++y)
      for (int x = 0; x < d.L; ++x) {
        float mx = 0;
        for (int c = 0; c < d.categories; ++c)
          mx = std::max(mx, m.score(x, y, z, c));
        if (mx > 0) REQUIRE(m.occupancy(x, y, z) == 1.0f);
        REQUIRE(m.max_category_score(x, y, z) == mx);
      }
}

TEST_CASE("out-of-bounds points are dropped and counted", "[semmap]") {
  CameraModel cam;
  cam.width_px = cam.height_px = 4;
  SemanticVoxelMap m(small_dims());  // 32 cells * 0.05 = 1.6 m across
  DepthImage depth(4, 4);
  std::fill(depth.valid.begin(), depth.valid.end(), uint8_t(1));
  std::fill(depth.z.begin(), depth.z.end(), 4.0f);  // far outside the 1.6m map
  ScoreImage scores(4, 4, 6);
  UpdateStats st = update_map(m, depth, scores, Pose{0, 0, 0}, cam);
  CHECK(st.points_dropped == 16);
  CHECK(m.count_occupied() == 0);
}

TEST_CASE("gainful curiosity counts voxels above the threshold once",
          "[semmap]") {
  SemanticVoxelMap m(small_dims());
  float chair95[6] = {0.95f, 0, 0, 0, 0, 0};
  float couch85[6] = {0, 0.85f, 0, 0, 0, 0};
  for (int i = 0; i < 3; ++i) m.fuse(i, 0, 0, chair95, 6);
  for (int i = 0; i < 5; ++i) m.fuse(i, 2, 0, couch85, 6);
  CHECK(gainful_curiosity_reward(m, 0.9) == 3);

  SemanticVoxelMap empty(small_dims());
  CHECK(gainful_curiosity_reward(empty, 0.9) == 0);

  SemanticVoxelMap both(small_dims());
  float two[6] = {0.91f, 0.95f, 0, 0, 0, 0};
  both.fuse(1, 1, 1, two, 6);
  CHECK(gainful_curiosity_reward(both, 0.9) == 1);

  CHECK_THROWS_AS(gainful_curiosity_reward(m, 1.5), SealError);
}

TEST_CASE("reward equals a brute-force scan on random maps",
          "[semmap][property]") {
  CameraModel cam;
  cam.width_px = cam.height_px = 8;
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    SemanticVoxelMap m(small_dims());
    for (int i = 0; i < 4; ++i) {
      Obs o = random_obs(rng, cam, 6);
      update_map(m, o.depth, o.scores, o.pose, cam);
    }
    double s_hat = rng.uniform(0.1, 0.95);
    CHECK(gainful_curiosity_reward(m, s_hat) == brute_force_reward(m, s_hat));
  }
}

TEST_CASE("incremental confident counts match the pure reward", "[semmap]") {
  CameraModel cam;
  cam.width_px = cam.height_px = 8;
  Rng rng(37);
  SemanticVoxelMap m(small_dims());
  size_t running = 0;
  for (int i = 0; i < 12; ++i) {
    Obs o = random_obs(rng, cam, 6);
    UpdateStats st = update_map(m, o.depth, o.scores, o.pose, cam, 0.9);
    running += st.newly_confident;
    REQUIRE(running == gainful_curiosity_reward(m, 0.9));
  }
}

TEST_CASE("occupancy slice ORs over the z range", "[semmap]") {
  SemanticVoxelMap m(small_dims());
  Grid2D<uint8_t> empty_slice = occupancy_floor_slice(m, 2, 10);
  for (uint8_t v : empty_slice.data) CHECK(v == 0);

  float s[6] = {0.5f, 0, 0, 0, 0, 0};
  m.fuse(7, 9, 5, s, 6);   // inside the range
  m.fuse(3, 3, 12, s, 6);  // outside
  Grid2D<uint8_t> slice = occupancy_floor_slice(m, 2, 10);
  CHECK(slice.at(7, 9) == 1);
  CHECK(slice.at(3, 3) == 0);
  CHECK_THROWS_AS(occupancy_floor_slice(m, 5, 40), SealError);
}

TEST_CASE("SVM1 file round trip and header layout", "[semmap]") {
  CameraModel cam;
  cam.width_px = cam.height_px = 8;
  Rng rng(41);
  SemanticVoxelMap m(small_dims());
  for (int i = 0; i < 3; ++i) {
    Obs o = random_obs(rng, cam, 6);
    update_map(m, o.depth, o.scores, o.pose, cam);
  }
  std::string path = std::filesystem::temp_directory_path().string() + "/seal_map.svm1";
  save_svm1(m, path);
  std::string bytes = read_text_file(path);
  REQUIRE(bytes.size() == 4 + 16 + m.raw().size() * 4);
  CHECK(bytes.substr(0, 4) == "SVM1");
  // little-endian u32 header: K=7, L=32, W=32, H=16
  auto u32 = [&](size_t off) {
    return uint32_t(uint8_t(bytes[off])) | uint32_t(uint8_t(bytes[off + 1])) << 8 |
           uint32_t(uint8_t(bytes[off + 2])) << 16 |
           uint32_t(uint8_t(bytes[off + 3])) << 24;
  };
  CHECK(u32(4) == 7);
  CHECK(u32(8) == 32);
  CHECK(u32(12) == 32);
  CHECK(u32(16) == 16);
  SemanticVoxelMap back = load_svm1(path);
  CHECK(back == m);
  CHECK(back.max_category_scores() == m.max_category_scores());
}

TEST_CASE("argmax CSV lists occupied voxels", "[semmap]") {
  SemanticVoxelMap m(small_dims());
  float s[6] = {0, 0.6f, 0, 0, 0, 0};
  m.fuse(1, 2, 3, s, 6);
  std::string path = std::filesystem::temp_directory_path().string() + "/seal_map.csv";
  export_argmax_csv(m, path);
  std::string csv = read_text_file(path);
  CHECK(csv.find("x,y,z,category,score") == 0);
  CHECK(csv.find("1,2,3,2,0.6") != std::string::npos);
}

#pragma once

#include <cstdint>
#include <cstring>
#include <cmath>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>
#include <functional>

namespace seal {

enum class ErrorKind {
  DimensionMismatch,
  OriginOutsideGrid,
  GenerationFailed,
  NoFreeSpawn,
  AllocationTooLarge,
  NoReachableCells,
  GoalOccupied,
  ConfigInvalid,
  Io,
};

class SealError : public std::runtime_error {
 public:
  SealError(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) {
  throw SealError(kind, msg);
}

// ---------------------------------------------------------------------------
// Deterministic RNG. splitmix64 streams plus stateless keyed draws, so results
// are bit-identical across platforms and across --jobs settings.
// ---------------------------------------------------------------------------

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline uint64_t mix_u64(uint64_t a, uint64_t b) {
  uint64_t s = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  return splitmix64(s);
}

class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : state_(seed) {
    // burn one step so seed 0 and seed-derived streams diverge immediately
    splitmix64(state_);
  }

  uint64_t next_u64() { return splitmix64(state_); }

  // uniform in [0, 1)
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n)
  uint64_t uniform_int(uint64_t n) {
    return uint64_t((__uint128_t(next_u64()) * n) >> 64);
  }

  int uniform_int(int lo, int hi_inclusive) {
    return lo + int(uniform_int(uint64_t(hi_inclusive - lo + 1)));
  }

  // derive an independent stream keyed by a tag
  Rng fork(uint64_t tag) const { return Rng(mix_u64(state_, tag)); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = size_t(uniform_int(uint64_t(i)));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t state_;
};

// Stateless keyed draw in [0,1). Used for noise draws keyed by
// (seed, instance, pose, purpose) so revisiting a pose reproduces the draw.
inline double keyed_uniform(uint64_t seed, uint64_t k1, uint64_t k2,
                            uint64_t k3) {
  uint64_t h = mix_u64(mix_u64(mix_u64(seed, k1), k2), k3);
  return double(h >> 11) * 0x1.0p-53;
}

// ---------------------------------------------------------------------------
// Small geometry / image containers
// ---------------------------------------------------------------------------

struct Vec3 {
  double x = 0, y = 0, z = 0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }
  Vec3 normalized() const {
    double n = norm();
    return {x / n, y / n, z / n};
  }
};

template <typename T>
struct Image {
  int width = 0, height = 0;
  std::vector<T> data;

  Image() = default;
  Image(int w, int h, T fill = T{}) : width(w), height(h), data(size_t(w) * h, fill) {}

  T& at(int row, int col) { return data[size_t(row) * width + col]; }
  const T& at(int row, int col) const { return data[size_t(row) * width + col]; }
  size_t size() const { return data.size(); }
};

struct DepthImage {
  int width = 0, height = 0;
  std::vector<float> z;       // z-depth in meters (distance along camera axis)
  std::vector<uint8_t> valid; // 0 when no surface inside [depth_min, depth_max]

  DepthImage() = default;
  DepthImage(int w, int h)
      : width(w), height(h), z(size_t(w) * h, 0.f), valid(size_t(w) * h, 0) {}

  size_t idx(int row, int col) const { return size_t(row) * width + col; }
};

// Per-pixel per-category scores in [0,1]; background implied by all-low rows.
struct ScoreImage {
  int width = 0, height = 0, categories = 0;
  std::vector<float> s;

  ScoreImage() = default;
  ScoreImage(int w, int h, int c)
      : width(w), height(h), categories(c), s(size_t(w) * h * c, 0.f) {}

  float& at(int row, int col, int cat) {
    return s[(size_t(row) * width + col) * categories + cat];
  }
  float at(int row, int col, int cat) const {
    return s[(size_t(row) * width + col) * categories + cat];
  }
  const float* pixel(int row, int col) const {
    return &s[(size_t(row) * width + col) * categories];
  }
};

// 2D grid addressed (x, y), x fastest, matching the voxel map's spatial order.
template <typename T>
struct Grid2D {
  int nx = 0, ny = 0;
  std::vector<T> data;

  Grid2D() = default;
  Grid2D(int nx_, int ny_, T fill = T{})
      : nx(nx_), ny(ny_), data(size_t(nx_) * ny_, fill) {}

  T& at(int x, int y) { return data[size_t(y) * nx + x]; }
  const T& at(int x, int y) const { return data[size_t(y) * nx + x]; }
  bool inside(int x, int y) const { return x >= 0 && x < nx && y >= 0 && y < ny; }
};

// ---------------------------------------------------------------------------
// Deterministic parallel map: results land in index-addressed slots, so the
// output never depends on the worker count.
// ---------------------------------------------------------------------------

inline void parallel_for(size_t n, int jobs, const std::function<void(size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  int workers = int(std::min<size_t>(size_t(jobs), n));
  std::vector<std::thread> pool;
  pool.reserve(size_t(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      for (size_t i = size_t(w); i < n; i += size_t(workers)) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

inline int default_jobs() {
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : int(hc);
}

constexpr double kPi = 3.14159265358979323846;

inline double deg_to_rad(double d) { return d * kPi / 180.0; }
inline double rad_to_deg(double r) { return r * 180.0 / kPi; }

// wrap angle to [0, 360)
inline double wrap_degrees(double d) {
  double w = std::fmod(d, 360.0);
  if (w < 0) w += 360.0;
  return w;
}

// signed smallest difference a-b wrapped to (-180, 180]
inline double angle_diff(double a, double b) {
  double d = std::fmod(a - b, 360.0);
  if (d <= -180.0) d += 360.0;
  if (d > 180.0) d -= 360.0;
  return d;
}

}  // namespace seal

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <unordered_map>
#include <vector>

#include "seal/common.hpp"
#include "seal/envsim.hpp"

namespace seal {

// ---------------------------------------------------------------------------
// Noise profile for the perception oracle. Draws are keyed by
// (stream, instance id, discretized pose), so revisiting a pose reproduces the
// same corruption instead of i.i.d. per-frame noise.
// ---------------------------------------------------------------------------

struct NoiseProfile {
  std::vector<double> miss_rate =
      std::vector<double>(kNumCategories, 0.3);      // fn_c
  double fp_rate = 0.1;                              // false blob per frame
  std::vector<double> confusion =
      std::vector<double>(kNumCategories, 1.0);      // blob category weights
  double area_gain = 2.5;                            // p_conf = clamp(area*gain)
  double p_conf_cap = 0.9;
  double p_conf_override = -1.0;                     // >=0: fixed p_conf
  double conf_lo = 0.9, conf_hi = 1.0;               // confident score range
  double unconf_lo = 0.2, unconf_hi = 0.9;           // unconfident score range
  double bg_noise_hi = 0.05;  // background / missed-instance score ceiling
  uint64_t seed = 7;

  // Zero corruption: every visible instance scores exactly 1.0.
  static NoiseProfile perfect() {
    NoiseProfile p;
    p.miss_rate.assign(kNumCategories, 0.0);
    p.fp_rate = 0.0;
    p.p_conf_override = 1.0;
    p.conf_lo = p.conf_hi = 1.0;
    p.bg_noise_hi = 0.0;
    return p;
  }
};

inline uint64_t pose_key(const Pose& p) {
  int64_t kx = int64_t(std::llround(p.x / kForwardStep));
  int64_t ky = int64_t(std::llround(p.y / kForwardStep));
  int64_t kt = int64_t(std::llround(p.theta / kTurnStep)) % 12;
  return mix_u64(mix_u64(uint64_t(kx) * 0x9e3779b9u, uint64_t(ky)),
                 uint64_t(kt));
}

// ---------------------------------------------------------------------------
// Trainable per-category logistic recalibration of raw scores.
// calibrated = sigmoid(gain * logit(raw) + bias); a fresh model is the exact
// identity. The per-category floor is the detection threshold used when
// grouping calibrated scores into instances.
// ---------------------------------------------------------------------------

struct PerceptionModel {
  int categories = kNumCategories;
  std::vector<double> gain = std::vector<double>(kNumCategories, 1.0);
  std::vector<double> bias = std::vector<double>(kNumCategories, 0.0);
  std::vector<double> floor = std::vector<double>(kNumCategories, 0.5);
  int version = 0;

  static PerceptionModel identity(int cats = kNumCategories) {
    PerceptionModel m;
    m.categories = cats;
    m.gain.assign(size_t(cats), 1.0);
    m.bias.assign(size_t(cats), 0.0);
    m.floor.assign(size_t(cats), 0.5);
    return m;
  }

  static constexpr double kEps = 1e-6;

  static double logit(double s) {
    s = std::clamp(s, kEps, 1.0 - kEps);
    return std::log(s / (1.0 - s));
  }
  static double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

  double calibrate(double s, int cat) const {
    if (gain[size_t(cat)] == 1.0 && bias[size_t(cat)] == 0.0) return s;
    return sigmoid(gain[size_t(cat)] * logit(s) + bias[size_t(cat)]);
  }
};

inline ScoreImage apply_calibration(const ScoreImage& raw,
                                    const PerceptionModel& model) {
  ScoreImage out = raw;
  for (int c = 0; c < raw.categories; ++c) {
    if (model.gain[size_t(c)] == 1.0 && model.bias[size_t(c)] == 0.0) continue;
    for (size_t i = size_t(c); i < out.s.size(); i += size_t(raw.categories))
      out.s[i] = float(model.calibrate(double(out.s[i]), c));
  }
  return out;
}

// ---------------------------------------------------------------------------
// predict: corrupt ground-truth semantics into raw per-pixel scores, then pass
// them through the model's calibration. Deterministic in (gt, stream).
// ---------------------------------------------------------------------------

inline ScoreImage predict_raw(const GroundTruthFrame& gt,
                              const NoiseProfile& noise, uint64_t stream) {
  const int W = gt.depth.width, H = gt.depth.height;
  ScoreImage out(W, H, kNumCategories);
  const uint64_t pk = pose_key(gt.pose);

  // per-instance view statistics
  struct View {
    int category = 0;
    size_t pixels = 0;
    double depth_sum = 0;
  };
  std::unordered_map<int32_t, View> views;
  for (size_t i = 0; i < gt.instance.size(); ++i) {
    int32_t id = gt.instance.data[i];
    if (id == 0) continue;
    View& v = views[id];
    v.category = gt.category.data[i];
    v.pixels++;
    v.depth_sum += double(gt.depth.z[i]);
  }

  enum : uint64_t { kMiss = 1, kMissScore = 2, kConf = 3, kScore = 4, kFp = 5, kBg = 6 };

  // per-instance score draw
  std::unordered_map<int32_t, float> inst_score;
  for (const auto& [id, v] : views) {
    int c = v.category - 1;
    double fn = noise.miss_rate[size_t(c)];
    double s;
    if (keyed_uniform(stream, uint64_t(id), pk, kMiss) < fn) {
      s = noise.bg_noise_hi * keyed_uniform(stream, uint64_t(id), pk, kMissScore);
    } else {
      double area = double(v.pixels) / double(size_t(W) * H);
      double dist = v.depth_sum / double(v.pixels);
      double p = noise.p_conf_override >= 0
                     ? noise.p_conf_override
                     : std::clamp(area * noise.area_gain, 0.0, noise.p_conf_cap) *
                           std::max(0.0, 1.0 - dist / 5.0);
      double u = keyed_uniform(stream, uint64_t(id), pk, kConf);
      double us = keyed_uniform(stream, uint64_t(id), pk, kScore);
      s = u < p ? noise.conf_lo + us * (noise.conf_hi - noise.conf_lo)
                : noise.unconf_lo + us * (noise.unconf_hi - noise.unconf_lo);
    }
    inst_score[id] = float(s);
  }

  // paint instances and background noise
  for (size_t i = 0; i < gt.instance.size(); ++i) {
    int32_t id = gt.instance.data[i];
    if (id != 0) {
      out.s[i * kNumCategories + size_t(gt.category.data[i] - 1)] = inst_score[id];
    } else if (noise.bg_noise_hi > 0) {
      double u = keyed_uniform(stream, pk, uint64_t(i), kBg);
      int c = int(u * kNumCategories * 1024) % kNumCategories;
      float s = float(noise.bg_noise_hi *
                      keyed_uniform(stream, pk, uint64_t(i), kBg + 10));
      float& slot = out.s[i * kNumCategories + size_t(c)];
      if (s > slot) slot = s;
    }
  }

  // false-positive blob: one contiguous rectangle with a wrong category at an
  // unconfident score, keyed by pose
  if (noise.fp_rate > 0 &&
      keyed_uniform(stream, pk, 0, kFp) < noise.fp_rate) {
    double total = 0;
    for (double w : noise.confusion) total += w;
    double pick = keyed_uniform(stream, pk, 1, kFp) * total;
    int cat = 0;
    for (int c = 0; c < kNumCategories; ++c) {
      pick -= noise.confusion[size_t(c)];
      if (pick <= 0) {
        cat = c;
        break;
      }
    }
    int bw = int((0.15 + 0.25 * keyed_uniform(stream, pk, 2, kFp)) * W);
    int bh = int((0.15 + 0.25 * keyed_uniform(stream, pk, 3, kFp)) * H);
    int bx = int(keyed_uniform(stream, pk, 4, kFp) * double(W - bw));
    int by = int(keyed_uniform(stream, pk, 5, kFp) * double(H - bh));
    float s = float(noise.unconf_lo +
                    keyed_uniform(stream, pk, 6, kFp) *
                        (noise.unconf_hi - noise.unconf_lo));
    for (int r = by; r < by + bh; ++r)
      for (int c = bx; c < bx + bw; ++c) {
        float& slot = out.at(r, c, cat);
        if (s > slot) slot = s;
      }
  }
  return out;
}

inline ScoreImage predict(const GroundTruthFrame& gt, const PerceptionModel& model,
                          const NoiseProfile& noise, uint64_t stream) {
  return apply_calibration(predict_raw(gt, noise, stream), model);
}

// Human annotation stand-in: score exactly 1 on every labeled pixel.
inline ScoreImage annotate_ground_truth(const GroundTruthFrame& gt) {
  ScoreImage out(gt.depth.width, gt.depth.height, kNumCategories);
  for (size_t i = 0; i < gt.category.size(); ++i) {
    int c = gt.category.data[i];
    if (c > 0) out.s[i * kNumCategories + size_t(c - 1)] = 1.0f;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fine-tuning: class-balanced pixelwise cross-entropy between calibrated
// scores and propagated labels, optimized per category by SGD over
// (gain, bias). Gains are projected positive after every step so calibration
// stays monotone.
// ---------------------------------------------------------------------------

struct LabeledFrame {
  ScoreImage raw;
  Image<uint8_t> labels;  // category per pixel, 0 = background
};

// Per-category training pools: raw scores at positively labeled pixels, plus a
// seeded subsample of the rest. Frames can be streamed in and discarded.
struct CalibrationDataset {
  int categories = kNumCategories;
  std::vector<std::vector<float>> pos{size_t(kNumCategories)};
  std::vector<std::vector<float>> neg{size_t(kNumCategories)};
  size_t frames = 0;

  void add_frame(const ScoreImage& raw, const Image<uint8_t>& labels,
                 Rng& rng, int neg_per_category = 256) {
    if (raw.width != labels.width || raw.height != labels.height)
      fail(ErrorKind::DimensionMismatch, "frame/label size mismatch");
    size_t n = labels.size();
    for (size_t i = 0; i < n; ++i) {
      int y = labels.data[i];
      if (y > 0) pos[size_t(y - 1)].push_back(raw.s[i * size_t(categories) + size_t(y - 1)]);
    }
    for (int c = 0; c < categories; ++c)
      for (int k = 0; k < neg_per_category; ++k) {
        size_t i = size_t(rng.uniform_int(n));
        if (labels.data[i] != c + 1)
          neg[size_t(c)].push_back(raw.s[i * size_t(categories) + size_t(c)]);
      }
    frames++;
  }

  bool empty() const { return frames == 0; }
};

// L_c = 0.5*mean_pos(-log p) + 0.5*mean_neg(-log(1-p)), p = sigmoid(a*z + b).
inline double calibration_loss(const CalibrationDataset& ds, int cat, double a,
                               double b) {
  const auto& P = ds.pos[size_t(cat)];
  const auto& N = ds.neg[size_t(cat)];
  double lp = 0, ln = 0;
  for (float s : P) {
    double z = PerceptionModel::logit(double(s));
    // -log(sigmoid(u)) = log(1 + exp(-u)), stable form
    double u = a * z + b;
    lp += u > 0 ? std::log1p(std::exp(-u)) : -u + std::log1p(std::exp(u));
  }
  for (float s : N) {
    double z = PerceptionModel::logit(double(s));
    double u = a * z + b;
    ln += u > 0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u));
  }
  double loss = 0;
  if (!P.empty()) loss += 0.5 * lp / double(P.size());
  if (!N.empty()) loss += 0.5 * ln / double(N.size());
  return loss;
}

inline void calibration_grad(const CalibrationDataset& ds, int cat, double a,
                             double b, double& da, double& db) {
  const auto& P = ds.pos[size_t(cat)];
  const auto& N = ds.neg[size_t(cat)];
  double ga = 0, gb = 0;
  for (float s : P) {
    double z = PerceptionModel::logit(double(s));
    double r = PerceptionModel::sigmoid(a * z + b) - 1.0;
    ga += r * z;
    gb += r;
  }
  if (!P.empty()) {
    ga *= 0.5 / double(P.size());
    gb *= 0.5 / double(P.size());
  }
  double ha = 0, hb = 0;
  for (float s : N) {
    double z = PerceptionModel::logit(double(s));
    double r = PerceptionModel::sigmoid(a * z + b);
    ha += r * z;
    hb += r;
  }
  if (!N.empty()) {
    ha *= 0.5 / double(N.size());
    hb *= 0.5 / double(N.size());
  }
  da = ga + ha;
  db = gb + hb;
}

struct FineTuneOptions {
  int batch = 256;        // samples per pool per iteration
  size_t min_positive = 20;  // skip categories with fewer confirmed pixels
  uint64_t seed = 97;
};

inline PerceptionModel fine_tune_pools(const PerceptionModel& model,
                                       const CalibrationDataset& ds, double lr,
                                       int iters,
                                       const FineTuneOptions& opts = {}) {
  if (ds.empty() || iters <= 0 || lr == 0.0) return model;
  PerceptionModel out = model;
  bool touched = false;
  for (int c = 0; c < model.categories; ++c) {
    const auto& P = ds.pos[size_t(c)];
    const auto& N = ds.neg[size_t(c)];
    if (P.size() < opts.min_positive) continue;
    float max_raw = 0.f;
    for (float s : P) max_raw = std::max(max_raw, s);
    if (max_raw <= 0.f) {
      std::cerr << "fine_tune: category " << category_name(c + 1)
                << " has labels but no raw signal, skipped\n";
      continue;
    }
    Rng rng = Rng(opts.seed).fork(uint64_t(c));
    double a = out.gain[size_t(c)], b = out.bias[size_t(c)];
    for (int it = 0; it < iters; ++it) {
      double ga = 0, gb = 0;
      for (int k = 0; k < opts.batch; ++k) {
        double z = PerceptionModel::logit(double(P[rng.uniform_int(P.size())]));
        double r = PerceptionModel::sigmoid(a * z + b) - 1.0;
        ga += r * z;
        gb += r;
      }
      if (!N.empty()) {
        for (int k = 0; k < opts.batch; ++k) {
          double z = PerceptionModel::logit(double(N[rng.uniform_int(N.size())]));
          double r = PerceptionModel::sigmoid(a * z + b);
          ga += r * z;
          gb += r;
        }
      }
      double scale = 0.5 / double(opts.batch);
      a -= lr * ga * scale;
      b -= lr * gb * scale;
      a = std::max(a, 1e-3);  // keep calibration monotone
    }
    out.gain[size_t(c)] = a;
    out.bias[size_t(c)] = b;
    touched = true;
  }
  if (touched) out.version = model.version + 1;
  return out;
}

inline PerceptionModel fine_tune(const PerceptionModel& model,
                                 const std::vector<LabeledFrame>& dataset,
                                 double lr, int iters,
                                 const FineTuneOptions& opts = {}) {
  if (dataset.empty()) return model;
  CalibrationDataset ds;
  ds.categories = model.categories;
  Rng rng(opts.seed);
  for (const auto& f : dataset) ds.add_frame(f.raw, f.labels, rng);
  return fine_tune_pools(model, ds, lr, iters, opts);
}

}  // namespace seal

#include <cmath>

#include "latdream/core/mat.hpp"
#include "latdream/envs/env.hpp"

namespace latdream {

namespace {

// h in [0,1), s,v in [0,1]
void hsv_to_rgb(float h, float s, float v, float* rgb) {
  float r = std::fabs(h * 6.0f - 3.0f) - 1.0f;
  float g = 2.0f - std::fabs(h * 6.0f - 2.0f);
  float b = 2.0f - std::fabs(h * 6.0f - 4.0f);
  auto clamp01 = [](float x) { return x < 0 ? 0.0f : (x > 1 ? 1.0f : x); };
  rgb[0] = ((clamp01(r) - 1.0f) * s + 1.0f) * v;
  rgb[1] = ((clamp01(g) - 1.0f) * s + 1.0f) * v;
  rgb[2] = ((clamp01(b) - 1.0f) * s + 1.0f) * v;
}

}  // namespace

BackgroundRenderer::BackgroundRenderer(const DistractorConfig& cfg,
                                       uint64_t episode_index) {
  enabled_ = cfg.enabled;
  if (!enabled_) return;
  // Disjoint seed ranges per pool; the pool also selects a disjoint hue
  // band so train and eval sets look different, not just distinct.
  uint64_t pool_salt =
      cfg.pool == DistractorConfig::Pool::train ? 0x11u : 0x1000000u;
  uint64_t id = hash_combine(cfg.seed, pool_salt + episode_index % cfg.pool_size);
  Rng rng(id);
  bool train = cfg.pool == DistractorConfig::Pool::train;
  float hue_a = float(train ? rng.uniform(0.45, 0.70) : rng.uniform(0.00, 0.16));
  float hue_b = float(train ? rng.uniform(0.70, 0.95) : rng.uniform(0.16, 0.40));
  hsv_to_rgb(hue_a, float(rng.uniform(0.5, 0.85)),
             float(rng.uniform(0.2, 0.35)), col_a_);
  hsv_to_rgb(hue_b, float(rng.uniform(0.5, 0.85)),
             float(rng.uniform(0.55, 0.75)), col_b_);
  for (auto& w : waves_) {
    double ang = rng.uniform(0, 2 * M_PI);
    double cycles = rng.uniform(1.0, 3.0);  // spatial cycles across the frame
    w.dx = float(std::cos(ang) * 2 * M_PI * cycles);
    w.dy = float(std::sin(ang) * 2 * M_PI * cycles);
    w.freq = 1.0f;
    w.phase = float(rng.uniform(0, 2 * M_PI));
    w.speed = float(rng.uniform(0.10, 0.30));  // radians per frame
  }
  for (float& n : noise_) n = float(rng.uniform(0, 1));
  noise_vx_ = float(rng.uniform(0.03, 0.08));
  noise_vy_ = float(rng.uniform(0.03, 0.08));
}

void BackgroundRenderer::render(int t, int size, float* planes) const {
  const int n = size * size;
  if (!enabled_) {
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < n; ++i) planes[c * n + i] = base_[c];
    return;
  }
  auto noise_at = [&](float x, float y) {
    // bilinear sample of the tiled 8x8 grid
    float fx = x - std::floor(x), fy = y - std::floor(y);
    int ix = int(std::floor(x)) & 7, iy = int(std::floor(y)) & 7;
    int ix1 = (ix + 1) & 7, iy1 = (iy + 1) & 7;
    float a = noise_[iy * 8 + ix], b = noise_[iy * 8 + ix1];
    float c = noise_[iy1 * 8 + ix], d = noise_[iy1 * 8 + ix1];
    return (a * (1 - fx) + b * fx) * (1 - fy) + (c * (1 - fx) + d * fx) * fy;
  };
  for (int y = 0; y < size; ++y) {
    float fy = float(y) / float(size);
    for (int x = 0; x < size; ++x) {
      float fx = float(x) / float(size);
      float v = 0;
      for (const auto& w : waves_)
        v += std::sin(w.dx * fx + w.dy * fy + w.phase + w.speed * float(t));
      v = v / 6.0f + 0.5f;  // [~0,1]
      float nz = noise_at(fx * 8 + noise_vx_ * float(t),
                          fy * 8 + noise_vy_ * float(t));
      float m = 0.72f * v + 0.28f * nz;
      if (m < 0) m = 0;
      if (m > 1) m = 1;
      int i = y * size + x;
      planes[0 * n + i] = col_a_[0] * (1 - m) + col_b_[0] * m;
      planes[1 * n + i] = col_a_[1] * (1 - m) + col_b_[1] * m;
      planes[2 * n + i] = col_a_[2] * (1 - m) + col_b_[2] * m;
    }
  }
}

}  // namespace latdream

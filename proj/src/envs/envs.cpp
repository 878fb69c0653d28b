#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "latdream/core/mat.hpp"
#include "latdream/envs/env.hpp"

namespace latdream {

namespace {

constexpr int kSize = 64;

// Float RGB canvas with a sprite-coverage plane for mask extraction.
struct Canvas {
  std::vector<float> planes;  // 3 * size * size
  std::vector<float> cover;   // sprite coverage in [0,1]

  Canvas() : planes(3 * kSize * kSize, 0.0f), cover(kSize * kSize, 0.0f) {}

  void background(const BackgroundRenderer& bg, int t) {
    bg.render(t, kSize, planes.data());
    std::fill(cover.begin(), cover.end(), 0.0f);
  }

  // Antialiased filled disc; cx/cy in pixel units.
  void disc(float cx, float cy, float radius, float r, float g, float b) {
    int x0 = std::max(0, int(cx - radius - 1));
    int x1 = std::min(kSize - 1, int(cx + radius + 1));
    int y0 = std::max(0, int(cy - radius - 1));
    int y1 = std::min(kSize - 1, int(cy + radius + 1));
    const int n = kSize * kSize;
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        float d = std::hypot(float(x) + 0.5f - cx, float(y) + 0.5f - cy);
        float a = std::clamp(radius + 0.5f - d, 0.0f, 1.0f);
        if (a <= 0) continue;
        int i = y * kSize + x;
        planes[0 * n + i] = planes[0 * n + i] * (1 - a) + r * a;
        planes[1 * n + i] = planes[1 * n + i] * (1 - a) + g * a;
        planes[2 * n + i] = planes[2 * n + i] * (1 - a) + b * a;
        cover[i] = std::max(cover[i], a);
      }
  }

  void rect(int rx0, int ry0, int rx1, int ry1, float r, float g, float b) {
    const int n = kSize * kSize;
    for (int y = std::max(0, ry0); y <= std::min(kSize - 1, ry1); ++y)
      for (int x = std::max(0, rx0); x <= std::min(kSize - 1, rx1); ++x) {
        int i = y * kSize + x;
        planes[0 * n + i] = r;
        planes[1 * n + i] = g;
        planes[2 * n + i] = b;
        cover[i] = 1.0f;
      }
  }

  ImageU8 quantize() const {
    ImageU8 img(3, kSize, kSize);
    for (int i = 0; i < 3 * kSize * kSize; ++i) {
      float v = std::clamp(planes[i], 0.0f, 1.0f);
      img.data[i] = uint8_t(std::lround(v * 255.0f));
    }
    return img;
  }

  std::vector<uint8_t> mask() const {
    std::vector<uint8_t> m(kSize * kSize);
    for (int i = 0; i < kSize * kSize; ++i) m[i] = cover[i] > 0.3f ? 1 : 0;
    return m;
  }
};

class PixelPoint : public Env {
 public:
  PixelPoint(uint64_t seed, const DistractorConfig& cfg, bool sparse)
      : seed_(seed), cfg_(cfg), sparse_(sparse) {
    spec_.name = sparse ? "pixelpoint_sparse" : "pixelpoint";
    spec_.action_space = {false, 2, -1.0f, 1.0f};
    spec_.max_episode_steps = 100;
    spec_.action_repeat = 2;
  }

  const EnvSpec& spec() const override { return spec_; }

  ImageU8 reset() override {
    Rng rng(hash_combine(seed_, episode_));
    bg_ = BackgroundRenderer(cfg_, episode_);
    ++episode_;
    px_ = float(rng.uniform(0.15, 0.85));
    py_ = float(rng.uniform(0.15, 0.85));
    do {
      gx_ = float(rng.uniform(0.15, 0.85));
      gy_ = float(rng.uniform(0.15, 0.85));
    } while (std::hypot(gx_ - px_, gy_ - py_) < 0.25f);
    steps_ = 0;
    frame_ = 0;
    return render();
  }

  StepResult step(const Eigen::VectorXf& action) override {
    if (action.size() != 2)
      throw std::invalid_argument("pixelpoint: action must have 2 dims");
    float ax = std::clamp(action(0), -1.0f, 1.0f);
    float ay = std::clamp(action(1), -1.0f, 1.0f);
    StepResult out;
    for (int f = 0; f < spec_.action_repeat; ++f) {
      px_ = std::clamp(px_ + ax * kSpeed, 0.05f, 0.95f);
      py_ = std::clamp(py_ + ay * kSpeed, 0.05f, 0.95f);
      ++frame_;
      float d = std::hypot(gx_ - px_, gy_ - py_);
      out.reward += sparse_ ? (d <= 0.10f ? 1.0f : 0.0f)
                            : 1.0f - d / float(M_SQRT2);
    }
    ++steps_;
    bool done = steps_ >= spec_.max_episode_steps;
    out.cont = done ? 0.0f : 1.0f;
    out.timeout = done;
    out.obs = render();
    return out;
  }

  std::vector<uint8_t> sprite_mask() const override { return canvas_.mask(); }

  Eigen::VectorXf privileged_state() const override {
    Eigen::VectorXf s(4);
    s << px_, py_, gx_, gy_;
    return s;
  }

  static constexpr float kSpeed = 0.05f;  // per frame at full action

 private:
  ImageU8 render() {
    canvas_.background(bg_, frame_);
    canvas_.disc(gx_ * kSize, gy_ * kSize, 7.0f, 0.15f, 0.95f, 0.25f);
    canvas_.disc(px_ * kSize, py_ * kSize, 4.5f, 0.95f, 0.20f, 0.15f);
    return canvas_.quantize();
  }

  EnvSpec spec_;
  uint64_t seed_;
  DistractorConfig cfg_;
  bool sparse_;
  BackgroundRenderer bg_{DistractorConfig{}, 0};
  Canvas canvas_;
  uint64_t episode_ = 0;
  int steps_ = 0, frame_ = 0;
  float px_ = 0.5f, py_ = 0.5f, gx_ = 0.5f, gy_ = 0.5f;
};

class PixelCatch : public Env {
 public:
  PixelCatch(uint64_t seed, const DistractorConfig& cfg)
      : seed_(seed), cfg_(cfg) {
    spec_.name = "pixelcatch";
    spec_.action_space = {true, 3};
    spec_.max_episode_steps = kDrops * kFallFrames / 4;
    spec_.action_repeat = 4;
  }

  const EnvSpec& spec() const override { return spec_; }

  ImageU8 reset() override {
    rng_ = Rng(hash_combine(seed_, episode_));
    bg_ = BackgroundRenderer(cfg_, episode_);
    ++episode_;
    paddle_ = 1;
    drops_ = 0;
    steps_ = 0;
    frame_ = 0;
    spawn();
    return render();
  }

  StepResult step(const Eigen::VectorXf& action) override {
    int a = decode_action(action);
    // one lane change per decision, saturating at the edges
    paddle_ = std::clamp(paddle_ + (a - 1), 0, 2);
    StepResult out;
    for (int f = 0; f < spec_.action_repeat; ++f) {
      ball_y_ += 1.0f;
      ++frame_;
      if (ball_y_ >= kPaddleY) {
        if (ball_lane_ == paddle_) out.reward += 1.0f;
        ++drops_;
        if (drops_ < kDrops) spawn();
      }
    }
    ++steps_;
    bool done = drops_ >= kDrops || steps_ >= spec_.max_episode_steps;
    out.cont = done ? 0.0f : 1.0f;
    out.timeout = done;
    out.obs = render();
    return out;
  }

  std::vector<uint8_t> sprite_mask() const override { return canvas_.mask(); }

  Eigen::VectorXf privileged_state() const override {
    Eigen::VectorXf s(3);
    s << float(ball_lane_), ball_y_ / float(kSize), float(paddle_);
    return s;
  }

  static constexpr int kDrops = 10;
  static constexpr float kPaddleY = 54.0f;
  static constexpr int kFallFrames = 48;

 private:
  int decode_action(const Eigen::VectorXf& action) const {
    int a;
    if (action.size() == 3) {
      Eigen::Index idx;
      action.maxCoeff(&idx);
      a = int(idx);
    } else if (action.size() == 1) {
      a = int(std::lround(action(0)));
    } else {
      throw std::invalid_argument("pixelcatch: bad action shape");
    }
    if (a < 0 || a > 2)
      throw std::invalid_argument("pixelcatch: invalid discrete action");
    return a;
  }

  void spawn() {
    ball_lane_ = int(rng_.below(3));
    ball_y_ = kPaddleY - float(kFallFrames);
  }

  static float lane_x(int lane) { return 16.0f + 16.0f * float(lane); }

  ImageU8 render() {
    canvas_.background(bg_, frame_);
    int pcx = int(lane_x(paddle_));
    canvas_.rect(pcx - 6, 56, pcx + 6, 60, 0.20f, 0.90f, 1.00f);
    canvas_.disc(lane_x(ball_lane_), ball_y_, 4.0f, 1.00f, 0.85f, 0.20f);
    return canvas_.quantize();
  }

  EnvSpec spec_;
  uint64_t seed_;
  DistractorConfig cfg_;
  Rng rng_{0};
  BackgroundRenderer bg_{DistractorConfig{}, 0};
  Canvas canvas_;
  uint64_t episode_ = 0;
  int steps_ = 0, frame_ = 0;
  int paddle_ = 1, ball_lane_ = 0, drops_ = 0;
  float ball_y_ = 0;
};

}  // namespace

std::unique_ptr<Env> make_env(const std::string& name, uint64_t seed,
                              const DistractorConfig& distractors) {
  if (name == "pixelpoint")
    return std::make_unique<PixelPoint>(seed, distractors, false);
  if (name == "pixelpoint_sparse")
    return std::make_unique<PixelPoint>(seed, distractors, true);
  if (name == "pixelcatch")
    return std::make_unique<PixelCatch>(seed, distractors);
  throw std::invalid_argument("unknown env: " + name);
}

std::vector<std::string> env_names() {
  return {"pixelpoint", "pixelpoint_sparse", "pixelcatch"};
}

Eigen::VectorXf scripted_action(const std::string& env_name,
                                const Eigen::VectorXf& p) {
  if (env_name == "pixelcatch") {
    Eigen::VectorXf a = Eigen::VectorXf::Zero(3);
    int ball = int(p(0)), paddle = int(p(2));
    a(ball > paddle ? 2 : (ball < paddle ? 0 : 1)) = 1.0f;
    return a;
  }
  // pixelpoint: head straight for the goal at full speed, easing on arrival
  Eigen::VectorXf a(2);
  float per_step = PixelPoint::kSpeed * 2;  // action repeat 2
  a(0) = std::clamp((p(2) - p(0)) / per_step, -1.0f, 1.0f);
  a(1) = std::clamp((p(3) - p(1)) / per_step, -1.0f, 1.0f);
  return a;
}

double scripted_return(const std::string& env_name, uint64_t seed,
                       int episodes, const DistractorConfig& distractors) {
  auto env = make_env(env_name, seed, distractors);
  double total = 0;
  for (int e = 0; e < episodes; ++e) {
    env->reset();
    while (true) {
      auto act = scripted_action(env_name, env->privileged_state());
      StepResult r = env->step(act);
      total += r.reward;
      if (r.cont == 0.0f) break;
    }
  }
  return total / episodes;
}

}  // namespace latdream

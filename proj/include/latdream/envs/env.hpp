#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace latdream {

// Observation image, channel-major [c][h][w], 8-bit quantized storage.
struct ImageU8 {
  int c = 3, h = 64, w = 64;
  std::vector<uint8_t> data;

  ImageU8() = default;
  ImageU8(int c_, int h_, int w_) : c(c_), h(h_), w(w_), data(c_ * h_ * w_, 0) {}
  uint8_t& at(int ch, int y, int x) { return data[(ch * h + y) * w + x]; }
  uint8_t at(int ch, int y, int x) const { return data[(ch * h + y) * w + x]; }
  int size() const { return c * h * w; }
};

struct ActionSpace {
  bool discrete = false;
  int dim = 0;           // action vector size (discrete: number of actions)
  float low = -1.0f, high = 1.0f;
};

struct EnvSpec {
  std::string name;
  ActionSpace action_space;
  int obs_channels = 3, obs_size = 64;
  int max_episode_steps = 0;  // policy decisions, not frames
  int action_repeat = 1;
};

struct StepResult {
  ImageU8 obs;
  float reward = 0;
  float cont = 1;       // 0 only at terminal/timeout
  bool timeout = false; // set when the episode ended by the step limit
};

struct DistractorConfig {
  bool enabled = false;
  enum class Pool { train, eval };
  Pool pool = Pool::train;
  uint64_t seed = 0;
  int pool_size = 20;
};

// Animated task-irrelevant texture: drifting sine plasma plus moving value
// noise, colors and motion drawn deterministically from the seed. Train and
// eval pools use disjoint seed ranges and disjoint palette hue ranges.
class BackgroundRenderer {
 public:
  BackgroundRenderer(const DistractorConfig& cfg, uint64_t episode_index);

  // Writes 3 planes of size*size floats in [0,1]. Disabled configs produce a
  // solid monochrome fill.
  void render(int t, int size, float* planes) const;

  bool enabled() const { return enabled_; }

 private:
  bool enabled_ = false;
  struct Wave {
    float dx, dy, freq, phase, speed;
  };
  Wave waves_[3];
  float base_[3] = {0.14f, 0.14f, 0.16f};
  float col_a_[3], col_b_[3];
  float noise_[64];  // 8x8 drifting value-noise grid
  float noise_vx_ = 0, noise_vy_ = 0;
};

class Env {
 public:
  virtual ~Env() = default;
  virtual const EnvSpec& spec() const = 0;
  virtual ImageU8 reset() = 0;
  virtual StepResult step(const Eigen::VectorXf& action) = 0;

  // Mask of task-relevant (sprite) pixels in the last rendered observation.
  virtual std::vector<uint8_t> sprite_mask() const = 0;

  // Internal physical state, for scripted controllers and tests only.
  virtual Eigen::VectorXf privileged_state() const = 0;
};

// Registry by name: pixelpoint, pixelpoint_sparse, pixelcatch.
std::unique_ptr<Env> make_env(const std::string& name, uint64_t seed,
                              const DistractorConfig& distractors);
std::vector<std::string> env_names();

// Reference controllers that act on privileged state; the return they achieve
// is the comparison baseline for learned policies.
Eigen::VectorXf scripted_action(const std::string& env_name,
                                const Eigen::VectorXf& privileged);

// Mean return of the scripted controller over `episodes` episodes of a fresh
// env seeded with `seed` (same seeding path as evaluation).
double scripted_return(const std::string& env_name, uint64_t seed,
                       int episodes, const DistractorConfig& distractors);

}  // namespace latdream

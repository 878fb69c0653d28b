#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "latdream/core/mat.hpp"
#include "latdream/envs/env.hpp"
#include "latdream/util/png.hpp"

using namespace latdream;

namespace {

std::vector<Eigen::VectorXf> random_actions(const EnvSpec& spec, int n,
                                            uint64_t seed) {
  Rng rng(seed);
  std::vector<Eigen::VectorXf> out;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXf a;
    if (spec.action_space.discrete) {
      a = Eigen::VectorXf::Zero(spec.action_space.dim);
      a(rng.below(spec.action_space.dim)) = 1.0f;
    } else {
      a.resize(spec.action_space.dim);
      for (int j = 0; j < a.size(); ++j) a(j) = float(rng.uniform(-1, 1));
    }
    out.push_back(a);
  }
  return out;
}

}  // namespace

TEST_CASE("determinism: seed and action sequence fix all outputs") {
  for (const auto& name : env_names()) {
    DistractorConfig cfg;
    cfg.enabled = true;
    cfg.seed = 99;
    auto e1 = make_env(name, 7, cfg);
    auto e2 = make_env(name, 7, cfg);
    auto acts = random_actions(e1->spec(), 50, 3);
    ImageU8 o1 = e1->reset(), o2 = e2->reset();
    CHECK(o1.data == o2.data);
    for (const auto& a : acts) {
      StepResult r1 = e1->step(a);
      StepResult r2 = e2->step(a);
      CHECK(r1.reward == r2.reward);
      CHECK(r1.cont == r2.cont);
      CHECK(r1.obs.data == r2.obs.data);
    }
  }
}

TEST_CASE("reward is invariant to the background seed") {
  for (const auto& name : env_names()) {
    DistractorConfig c1, c2;
    c1.enabled = c2.enabled = true;
    c1.seed = 1;
    c2.seed = 2;
    auto e1 = make_env(name, 11, c1);
    auto e2 = make_env(name, 11, c2);
    auto acts = random_actions(e1->spec(), 120, 5);
    ImageU8 o1 = e1->reset(), o2 = e2->reset();
    CHECK(o1.data != o2.data);  // backgrounds differ visually
    for (const auto& a : acts) {
      StepResult r1 = e1->step(a);
      StepResult r2 = e2->step(a);
      CHECK(r1.reward == r2.reward);
      CHECK(r1.cont == r2.cont);
      if (r1.cont == 0) break;
    }
  }
}

TEST_CASE("episode limit emits continue=0 with the timeout flag") {
  auto env = make_env("pixelpoint", 3, {});
  env->reset();
  Eigen::VectorXf a = Eigen::VectorXf::Zero(2);
  for (int i = 0; i < env->spec().max_episode_steps - 1; ++i) {
    StepResult r = env->step(a);
    CHECK(r.cont == 1.0f);
    CHECK(!r.timeout);
  }
  StepResult last = env->step(a);
  CHECK(last.cont == 0.0f);
  CHECK(last.timeout);
}

TEST_CASE("background layer: monochrome when disabled, animated when on") {
  DistractorConfig off;
  BackgroundRenderer plain(off, 0);
  std::vector<float> f0(3 * 64 * 64), f1(3 * 64 * 64);
  plain.render(0, 64, f0.data());
  plain.render(7, 64, f1.data());
  CHECK(f0 == f1);
  for (int c = 0; c < 3; ++c) {
    float v = f0[c * 64 * 64];
    for (int i = 0; i < 64 * 64; ++i) CHECK(f0[c * 64 * 64 + i] == v);
  }

  DistractorConfig on;
  on.enabled = true;
  on.seed = 4;
  BackgroundRenderer bg(on, 2);
  BackgroundRenderer bg_same(on, 2);
  bg.render(13, 64, f0.data());
  bg_same.render(13, 64, f1.data());
  CHECK(f0 == f1);  // same (seed, t) -> identical layer

  // animated but not strobing: mean |frame delta| in (0, 0.2]
  double worst = 0, sum = 0;
  std::vector<float> prev(3 * 64 * 64), cur(3 * 64 * 64);
  bg.render(0, 64, prev.data());
  for (int t = 1; t <= 100; ++t) {
    bg.render(t, 64, cur.data());
    double mean = 0;
    for (size_t i = 0; i < cur.size(); ++i)
      mean += std::abs(double(cur[i]) - double(prev[i]));
    mean /= double(cur.size());
    CHECK(mean > 0.0);
    worst = std::max(worst, mean);
    sum += mean;
    std::swap(prev, cur);
  }
  CHECK(worst <= 0.2);
  CHECK(sum / 100 > 0.001);
}

TEST_CASE("train and eval background pools are visually distinct") {
  DistractorConfig train, eval;
  train.enabled = eval.enabled = true;
  train.seed = eval.seed = 12;
  eval.pool = DistractorConfig::Pool::eval;
  std::vector<float> ft(3 * 64 * 64), fe(3 * 64 * 64);
  double diff = 0;
  for (uint64_t ep = 0; ep < 5; ++ep) {
    BackgroundRenderer a(train, ep), b(eval, ep);
    a.render(0, 64, ft.data());
    b.render(0, 64, fe.data());
    for (size_t i = 0; i < ft.size(); ++i)
      diff += std::abs(double(ft[i]) - double(fe[i]));
  }
  CHECK(diff / (5 * 3 * 64 * 64) > 0.02);
}

TEST_CASE("pixelcatch: random policy catches 1/3 of drops by enumeration") {
  // the drop lane is uniform over 3 and independent of the paddle, so any
  // policy that ignores the ball catches exactly 1/3 in expectation
  auto env = make_env("pixelcatch", 21, {});
  Rng rng(17);
  double catches = 0, drops = 0;
  const int episodes = 60;
  for (int e = 0; e < episodes; ++e) {
    env->reset();
    while (true) {
      Eigen::VectorXf a = Eigen::VectorXf::Zero(3);
      a(rng.below(3)) = 1.0f;
      StepResult r = env->step(a);
      catches += r.reward;
      if (r.cont == 0) break;
    }
    drops += 10;
  }
  double rate = catches / drops;
  double sigma = std::sqrt((1.0 / 3) * (2.0 / 3) / drops);
  CHECK(std::abs(rate - 1.0 / 3) < 4 * sigma);
}

TEST_CASE("pixelcatch: scripted controller catches every drop") {
  auto env = make_env("pixelcatch", 5, {});
  double ret = scripted_return("pixelcatch", 5, 20, {});
  CHECK(ret == doctest::Approx(10.0));  // 10 drops per episode
  (void)env;
}

TEST_CASE("pixelpoint: scripted controller return and analytic bound") {
  double ret = scripted_return("pixelpoint", 9, 20, {});
  // dense reward is at most 1 per frame, 200 frames per episode
  CHECK(ret > 120.0);
  CHECK(ret < 200.0);

  // straight-line controller beats a lazy one
  auto env = make_env("pixelpoint", 9, {});
  double lazy = 0;
  for (int e = 0; e < 20; ++e) {
    env->reset();
    Eigen::VectorXf a = Eigen::VectorXf::Zero(2);
    while (true) {
      StepResult r = env->step(a);
      lazy += r.reward;
      if (r.cont == 0) break;
    }
  }
  CHECK(ret > lazy / 20 + 30.0);
}

TEST_CASE("continuous actions clip, discrete indices validate") {
  auto pp = make_env("pixelpoint", 1, {});
  pp->reset();
  Eigen::VectorXf wild(2);
  wild << 50.0f, -50.0f;
  CHECK_NOTHROW(pp->step(wild));
  Eigen::VectorXf wrong(3);
  wrong.setZero();
  CHECK_THROWS(pp->step(wrong));

  auto pc = make_env("pixelcatch", 1, {});
  pc->reset();
  Eigen::VectorXf bad(1);
  bad << 7.0f;
  CHECK_THROWS(pc->step(bad));
}

TEST_CASE("sprite mask marks task pixels and PNG export works") {
  DistractorConfig cfg;
  cfg.enabled = true;
  cfg.seed = 31;
  auto env = make_env("pixelpoint", 13, cfg);
  ImageU8 obs = env->reset();
  auto mask = env->sprite_mask();
  int on = 0;
  for (auto m : mask) on += m;
  CHECK(on > 50);          // both sprites visible
  CHECK(on < 64 * 64 / 4); // but far from filling the frame

  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "latdream_test_png";
  fs::create_directories(dir);
  auto p = (dir / "frame.png").string();
  write_png(p, obs);
  CHECK(fs::file_size(p) > 100);
  auto grid = image_grid({obs, obs, obs}, 2);
  CHECK(grid.w == 2 * 64 + 2);
  CHECK(grid.h == 2 * 64 + 2);
}

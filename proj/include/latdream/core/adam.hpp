#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "latdream/core/tape.hpp"

namespace latdream {

// Adam over a fixed parameter group with clipping by global gradient norm.
template <class S>
class Adam {
 public:
  Adam(std::vector<Param<S>*> params, S lr, S beta1, S beta2, S eps, S clip)
      : params_(std::move(params)),
        lr_(lr),
        beta1_(beta1),
        beta2_(beta2),
        eps_(eps),
        clip_(clip) {
    states_.resize(params_.size());
    for (size_t i = 0; i < params_.size(); ++i) {
      states_[i].m = Mat<S>::Zero(params_[i]->value.rows(),
                                  params_[i]->value.cols());
      states_[i].v = states_[i].m;
    }
  }

  // Returns the pre-clip global gradient norm.
  S step() {
    double sq = 0;
    for (auto* p : params_) {
      p->ensure_grad();
      sq += double(p->grad.squaredNorm());
    }
    S norm = S(std::sqrt(sq));
    S scale = S(1);
    if (clip_ > 0 && norm > clip_) scale = clip_ / norm;
    ++t_;
    S bc1 = S(1) - S(std::pow(double(beta1_), double(t_)));
    S bc2 = S(1) - S(std::pow(double(beta2_), double(t_)));
    for (size_t i = 0; i < params_.size(); ++i) {
      Param<S>& p = *params_[i];
      State& st = states_[i];
      Mat<S> g = p.grad * scale;
      st.m = beta1_ * st.m + (S(1) - beta1_) * g;
      st.v = (beta2_ * st.v.array() +
              (S(1) - beta2_) * g.array().square()).matrix();
      p.value.array() -=
          lr_ * (st.m.array() / bc1) / ((st.v.array() / bc2).sqrt() + eps_);
    }
    return norm;
  }

  int64_t steps_taken() const { return t_; }
  void set_steps_taken(int64_t t) { t_ = t; }
  size_t size() const { return params_.size(); }
  Mat<S>& moment1(size_t i) { return states_[i].m; }
  Mat<S>& moment2(size_t i) { return states_[i].v; }
  const Param<S>& param(size_t i) const { return *params_[i]; }

 private:
  struct State {
    Mat<S> m, v;
  };
  std::vector<Param<S>*> params_;
  std::vector<State> states_;
  S lr_, beta1_, beta2_, eps_, clip_;
  int64_t t_ = 0;
};

// dst <- decay*dst + (1-decay)*src over parameter values, elementwise.
template <class S>
void ema_update(const ParamSet<S>& dst, const ParamSet<S>& src, S decay) {
  if (dst.size() != src.size())
    throw std::invalid_argument("ema_update: size mismatch");
  for (size_t i = 0; i < dst.size(); ++i) {
    dst[i]->value = decay * dst[i]->value + (S(1) - decay) * src[i]->value;
  }
}

template <class S>
void copy_values(const ParamSet<S>& dst, const ParamSet<S>& src) {
  if (dst.size() != src.size())
    throw std::invalid_argument("copy_values: size mismatch");
  for (size_t i = 0; i < dst.size(); ++i) dst[i]->value = src[i]->value;
}

}  // namespace latdream

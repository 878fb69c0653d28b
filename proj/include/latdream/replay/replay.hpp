#pragma once

#include <deque>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <vector>

#include "latdream/core/mat.hpp"
#include "latdream/envs/env.hpp"

namespace latdream {

// One environment step as stored. At episode starts (is_first=1) the action
// and reward are zero placeholders; they are masked out of the losses.
struct Transition {
  ImageU8 obs;
  Eigen::VectorXf action;
  float reward = 0;
  float cont = 1;
  uint8_t is_first = 0;
  int env_id = 0;
};

// Fixed-length training windows. obs/actions are stacked time-major:
// step t occupies rows [t*B, (t+1)*B). Scalar signals are [B, T].
// Pixel values are dequantized to [-0.5, 0.5].
struct SequenceBatch {
  int b = 0, t = 0;
  Matf obs;
  Matf actions;
  Matf rewards;
  Matf continues;
  Matf is_first;
};

// FIFO buffer over per-environment streams. Windows are sampled uniformly
// over all valid (stream, start) positions and never cross streams; they may
// cross episode boundaries, which the is_first flags mark. Eviction is
// strictly FIFO by global insertion index once capacity is reached.
// append() and sample() are mutually thread-safe.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(size_t capacity, int num_streams = 1)
      : capacity_(capacity), streams_(std::max(1, num_streams)) {
    if (capacity == 0)
      throw std::invalid_argument("ReplayBuffer: zero capacity");
  }

  void append(const Transition& tr) {
    if (tr.obs.data.empty() || tr.obs.size() != tr.obs.c * tr.obs.h * tr.obs.w)
      throw std::invalid_argument("ReplayBuffer: malformed observation");
    std::lock_guard<std::mutex> lock(mu_);
    if (tr.env_id < 0 || tr.env_id >= int(streams_.size()))
      throw std::invalid_argument("ReplayBuffer: bad env_id");
    if (action_dim_ == -1) {
      action_dim_ = int(tr.action.size());
      obs_dim_ = tr.obs.size();
    } else if (int(tr.action.size()) != action_dim_ ||
               tr.obs.size() != obs_dim_) {
      throw std::invalid_argument("ReplayBuffer: inconsistent shapes");
    }
    streams_[tr.env_id].push_back(Slot{tr, next_index_++});
    ++size_;
    while (size_ > capacity_) evict_oldest();
  }

  bool ready(size_t min_steps) const {
    std::lock_guard<std::mutex> lock(mu_);
    return size_ >= min_steps;
  }

  size_t size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return size_;
  }

  int action_dim() const {
    std::lock_guard<std::mutex> lock(mu_);
    return action_dim_;
  }

  // nullopt = not ready yet (no stream holds a full window); anything
  // malformed throws instead.
  std::optional<SequenceBatch> sample(int b, int t, Rng& rng) const {
    if (b < 1 || t < 1) throw std::invalid_argument("ReplayBuffer: bad B/T");
    std::lock_guard<std::mutex> lock(mu_);
    std::vector<int64_t> valid(streams_.size());
    int64_t total = 0;
    for (size_t s = 0; s < streams_.size(); ++s) {
      valid[s] = std::max<int64_t>(0, int64_t(streams_[s].size()) - t + 1);
      total += valid[s];
    }
    if (total == 0) return std::nullopt;

    SequenceBatch out;
    out.b = b;
    out.t = t;
    out.obs.resize(b * t, obs_dim_);
    out.actions.resize(b * t, action_dim_);
    out.rewards.resize(b, t);
    out.continues.resize(b, t);
    out.is_first.resize(b, t);
    for (int i = 0; i < b; ++i) {
      int64_t r = rng.below(total);
      size_t s = 0;
      while (r >= valid[s]) r -= valid[s++];
      const auto& stream = streams_[s];
      for (int j = 0; j < t; ++j) {
        const Transition& tr = stream[size_t(r) + j].t;
        float* dst = out.obs.row(j * b + i).data();
        for (int k = 0; k < obs_dim_; ++k)
          dst[k] = float(tr.obs.data[k]) / 255.0f - 0.5f;
        out.actions.row(j * b + i) = tr.action.transpose();
        out.rewards(i, j) = tr.reward;
        out.continues(i, j) = tr.cont;
        out.is_first(i, j) = tr.is_first;
      }
    }
    return out;
  }

 private:
  struct Slot {
    Transition t;
    uint64_t idx;
  };

  void evict_oldest() {
    size_t oldest = 0;
    uint64_t best = UINT64_MAX;
    for (size_t s = 0; s < streams_.size(); ++s) {
      if (!streams_[s].empty() && streams_[s].front().idx < best) {
        best = streams_[s].front().idx;
        oldest = s;
      }
    }
    streams_[oldest].pop_front();
    --size_;
  }

  size_t capacity_;
  mutable std::mutex mu_;
  std::vector<std::deque<Slot>> streams_;
  size_t size_ = 0;
  uint64_t next_index_ = 0;
  int action_dim_ = -1;
  int obs_dim_ = -1;
};

}  // namespace latdream

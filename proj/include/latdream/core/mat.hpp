#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace latdream {

// All tensors are 2-D row-major matrices: rows index samples, columns index
// features. Image-shaped data is flattened channel-major ([c][h][w]) per row;
// ops that need spatial structure take the shape as arguments.
template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Matf = Mat<float>;
using Matd = Mat<double>;

template <class S>
bool all_finite(const Mat<S>& m) {
  return m.allFinite();
}

// Deterministic RNG used everywhere. std::mt19937_64 is fully specified by the
// standard, and the value transforms below avoid the implementation-defined
// std::*_distribution classes, so streams are stable across toolchains.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : gen_(seed ^ 0x9e3779b97f4a7c15ULL) {}

  uint64_t bits() { return gen_(); }

  // Uniform in [0, 1).
  double u01() { return double(gen_() >> 11) * (1.0 / 9007199254740992.0); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

  // Uniform integer in [0, n).
  int64_t below(int64_t n) {
    if (n <= 0) throw std::invalid_argument("Rng::below: n must be positive");
    return int64_t(u01() * double(n)) % n;
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * u01() - 1.0;
      v = 2.0 * u01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    have_spare_ = true;
    return u * m;
  }

  // Index sampled from an unnormalized non-negative weight row.
  template <class Derived>
  int categorical(const Eigen::MatrixBase<Derived>& w) {
    double total = 0;
    for (int i = 0; i < w.size(); ++i) total += double(w(i));
    double u = u01() * total;
    double acc = 0;
    for (int i = 0; i < w.size(); ++i) {
      acc += double(w(i));
      if (u < acc) return i;
    }
    return int(w.size()) - 1;
  }

  template <class S>
  Mat<S> normal_mat(int rows, int cols, double std_dev = 1.0) {
    Mat<S> m(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) m(i, j) = S(normal() * std_dev);
    return m;
  }

  template <class S>
  Mat<S> uniform_mat(int rows, int cols, double lo, double hi) {
    Mat<S> m(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) m(i, j) = S(uniform(lo, hi));
    return m;
  }

  // Derive an independent deterministic stream.
  Rng split(uint64_t salt) {
    uint64_t x = gen_() ^ (salt * 0xbf58476d1ce4e5b9ULL + 0x94d049bb133111ebULL);
    return Rng(x);
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Stable 64-bit mix for seed derivation (splitmix64 finalizer).
inline uint64_t hash_mix(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t hash_combine(uint64_t a, uint64_t b) {
  return hash_mix(a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

}  // namespace latdream

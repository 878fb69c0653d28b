#pragma once

#include <cmath>
#include <vector>

#include "latdream/core/tape.hpp"

// Differentiable ops over Tape<S>. Every op returns a new node; backward
// closures accumulate into parents guarded by needs_grad so constant inputs
// cost nothing.

namespace latdream {

// ---------------------------------------------------------------- arithmetic

template <class S>
Var add(Tape<S>& t, Var a, Var b) {
  Mat<S> y = t.val(a) + t.val(b);
  return t.make(std::move(y), {a, b}, [a, b](Tape<S>& t, const Mat<S>& g) {
    if (t.needs_grad(a)) t.grad_ref(a) += g;
    if (t.needs_grad(b)) t.grad_ref(b) += g;
  });
}

template <class S>
Var sub(Tape<S>& t, Var a, Var b) {
  Mat<S> y = t.val(a) - t.val(b);
  return t.make(std::move(y), {a, b}, [a, b](Tape<S>& t, const Mat<S>& g) {
    if (t.needs_grad(a)) t.grad_ref(a) += g;
    if (t.needs_grad(b)) t.grad_ref(b) -= g;
  });
}

template <class S>
Var mul(Tape<S>& t, Var a, Var b) {
  Mat<S> y = t.val(a).cwiseProduct(t.val(b));
  return t.make(std::move(y), {a, b}, [a, b](Tape<S>& t, const Mat<S>& g) {
    if (t.needs_grad(a)) t.grad_ref(a) += g.cwiseProduct(t.val(b));
    if (t.needs_grad(b)) t.grad_ref(b) += g.cwiseProduct(t.val(a));
  });
}

// k*a + c with scalar constants.
template <class S>
Var affine(Tape<S>& t, Var a, S k, S c) {
  Mat<S> y = (t.val(a).array() * k + c).matrix();
  return t.make(std::move(y), {a}, [a, k](Tape<S>& t, const Mat<S>& g) {
    if (t.needs_grad(a)) t.grad_ref(a) += g * k;
  });
}

template <class S>
Var neg(Tape<S>& t, Var a) {
  return affine(t, a, S(-1), S(0));
}

template <class S>
Var add_const(Tape<S>& t, Var a, const Mat<S>& m) {
  Mat<S> y = t.val(a) + m;
  return t.make(std::move(y), {a}, [a](Tape<S>& t, const Mat<S>& g) {
    if (t.needs_grad(a)) t.grad_ref(a) += g;
  });
}

template <class S>
Var mul_const(Tape<S>& t, Var a, Mat<S> m) {
  Mat<S> y = t.val(a).cwiseProduct(m);
  return t.make(std::move(y), {a},
                [a, m = std::move(m)](Tape<S>& t, const Mat<S>& g) {
                  if (t.needs_grad(a)) t.grad_ref(a) += g.cwiseProduct(m);
                });
}

// m - a with constant m.
template <class S>
Var rsub_const(Tape<S>& t, Var a, const Mat<S>& m) {
  Mat<S> y = m - t.val(a);
  return t.make(std::move(y), {a}, [a](Tape<S>& t, const Mat<S>& g) {
    if (t.needs_grad(a)) t.grad_ref(a) -= g;
  });
}

template <class S>
Var reciprocal(Tape<S>& t, Var a) {
  Mat<S> y = t.val(a).cwiseInverse();
  return t.make(std::move(y), {a}, [a](Tape<S>& t, const Mat<S>& g) {
    const Mat<S>& v = t.val(a);
    t.grad_ref(a) -= (g.array() / (v.array() * v.array())).matrix();
  });
}

// --------------------------------------------------------------- activations

template <class S>
Var sigmoid(Tape<S>& t, Var a) {
  Mat<S> y = (S(1) / (S(1) + (-t.val(a).array()).exp())).matrix();
  Mat<S> yc = y;
  return t.make(std::move(y), {a},
                [a, yc = std::move(yc)](Tape<S>& t, const Mat<S>& g) {
                  const auto& ya = yc.array();
                  t.grad_ref(a) += (g.array() * ya * (S(1) - ya)).matrix();
                });
}

template <class S>
Var vtanh(Tape<S>& t, Var a) {
  Mat<S> y = t.val(a).array().tanh().matrix();
  return t.make(std::move(y), {a}, [a](Tape<S>& t, const Mat<S>& g) {
    Mat<S> y = t.val(a).array().tanh().matrix();
    t.grad_ref(a) += (g.array() * (S(1) - y.array() * y.array())).matrix();
  });
}

template <class S>
Var silu(Tape<S>& t, Var a) {
  Mat<S> sig = (S(1) / (S(1) + (-t.val(a).array()).exp())).matrix();
  Mat<S> y = t.val(a).cwiseProduct(sig);
  return t.make(std::move(y), {a},
                [a, sig = std::move(sig)](Tape<S>& t, const Mat<S>& g) {
                  const auto& x = t.val(a).array();
                  const auto& s = sig.array();
                  t.grad_ref(a) +=
                      (g.array() * (s + x * s * (S(1) - s))).matrix();
                });
}

template <class S>
Var vexp(Tape<S>& t, Var a) {
  Mat<S> y = t.val(a).array().exp().matrix();
  Mat<S> yc = y;
  return t.make(std::move(y), {a},
                [a, yc = std::move(yc)](Tape<S>& t, const Mat<S>& g) {
                  t.grad_ref(a) += g.cwiseProduct(yc);
                });
}

template <class S>
Var vlog(Tape<S>& t, Var a) {
  Mat<S> y = t.val(a).array().log().matrix();
  return t.make(std::move(y), {a}, [a](Tape<S>& t, const Mat<S>& g) {
    t.grad_ref(a) += (g.array() / t.val(a).array()).matrix();
  });
}

// log(1 + e^x), stable for large |x|.
template <class S>
Var softplus(Tape<S>& t, Var a) {
  const auto& x = t.val(a).array();
  Mat<S> y = (x.max(S(0)) + (S(1) + (-x.abs()).exp()).log()).matrix();
  return t.make(std::move(y), {a}, [a](Tape<S>& t, const Mat<S>& g) {
    const auto& x = t.val(a).array();
    t.grad_ref(a) += (g.array() / (S(1) + (-x).exp())).matrix();
  });
}

template <class S>
Var square(Tape<S>& t, Var a) {
  Mat<S> y = t.val(a).array().square().matrix();
  return t.make(std::move(y), {a}, [a](Tape<S>& t, const Mat<S>& g) {
    t.grad_ref(a) += (S(2) * g.array() * t.val(a).array()).matrix();
  });
}

template <class S>
Var vabs(Tape<S>& t, Var a) {
  Mat<S> y = t.val(a).array().abs().matrix();
  return t.make(std::move(y), {a}, [a](Tape<S>& t, const Mat<S>& g) {
    t.grad_ref(a) += (g.array() * t.val(a).array().sign()).matrix();
  });
}

// max(a, c) elementwise; gradient passes only where a > c.
template <class S>
Var max_scalar(Tape<S>& t, Var a, S c) {
  Mat<S> y = t.val(a).array().max(c).matrix();
  return t.make(std::move(y), {a}, [a, c](Tape<S>& t, const Mat<S>& g) {
    Mat<S> mask = (t.val(a).array() > c).template cast<S>().matrix();
    t.grad_ref(a) += g.cwiseProduct(mask);
  });
}

// ---------------------------------------------------------- linear / matmul

template <class S>
Var matmul(Tape<S>& t, Var a, Var b) {
  Mat<S> y = t.val(a) * t.val(b);
  return t.make(std::move(y), {a, b}, [a, b](Tape<S>& t, const Mat<S>& g) {
    if (t.needs_grad(a)) t.grad_ref(a).noalias() += g * t.val(b).transpose();
    if (t.needs_grad(b)) t.grad_ref(b).noalias() += t.val(a).transpose() * g;
  });
}

// x[N,I] * w[I,O] + bias[1,O] broadcast over rows.
template <class S>
Var linear(Tape<S>& t, Var x, Var w, Var b) {
  Mat<S> y = t.val(x) * t.val(w);
  y.rowwise() += t.val(b).row(0);
  return t.make(std::move(y), {x, w, b}, [x, w, b](Tape<S>& t,
                                                   const Mat<S>& g) {
    if (t.needs_grad(x)) t.grad_ref(x).noalias() += g * t.val(w).transpose();
    if (t.needs_grad(w)) t.grad_ref(w).noalias() += t.val(x).transpose() * g;
    if (t.needs_grad(b)) t.grad_ref(b).row(0) += g.colwise().sum();
  });
}

// Bias-free variant.
template <class S>
Var matmul_nt(Tape<S>& t, Var x, Var w) {
  return matmul(t, x, w);
}

// ----------------------------------------------------------- shape plumbing

template <class S>
Var concat_cols(Tape<S>& t, Var a, Var b) {
  const Mat<S>& va = t.val(a);
  const Mat<S>& vb = t.val(b);
  Mat<S> y(va.rows(), va.cols() + vb.cols());
  y.leftCols(va.cols()) = va;
  y.rightCols(vb.cols()) = vb;
  int ca = int(va.cols());
  return t.make(std::move(y), {a, b}, [a, b, ca](Tape<S>& t, const Mat<S>& g) {
    if (t.needs_grad(a)) t.grad_ref(a) += g.leftCols(ca);
    if (t.needs_grad(b)) t.grad_ref(b) += g.rightCols(g.cols() - ca);
  });
}

template <class S>
Var concat_cols(Tape<S>& t, Var a, Var b, Var c) {
  return concat_cols(t, concat_cols(t, a, b), c);
}

template <class S>
Var slice_cols(Tape<S>& t, Var a, int j, int n) {
  Mat<S> y = t.val(a).middleCols(j, n);
  return t.make(std::move(y), {a}, [a, j, n](Tape<S>& t, const Mat<S>& g) {
    t.grad_ref(a).middleCols(j, n) += g;
  });
}

// Stack along rows; backward slices the gradient back apart.
template <class S>
Var concat_rows(Tape<S>& t, const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
  int cols = int(t.val(parts[0]).cols());
  int rows = 0;
  for (Var p : parts) rows += int(t.val(p).rows());
  Mat<S> y(rows, cols);
  int r = 0;
  std::vector<int> offsets;
  for (Var p : parts) {
    offsets.push_back(r);
    y.middleRows(r, t.val(p).rows()) = t.val(p);
    r += int(t.val(p).rows());
  }
  return t.make(std::move(y), parts,
                [parts, offsets](Tape<S>& t, const Mat<S>& g) {
                  for (size_t i = 0; i < parts.size(); ++i) {
                    if (!t.needs_grad(parts[i])) continue;
                    int n = int(t.val(parts[i]).rows());
                    t.grad_ref(parts[i]) += g.middleRows(offsets[i], n);
                  }
                });
}

template <class S>
Var slice_rows(Tape<S>& t, Var a, int i, int n) {
  Mat<S> y = t.val(a).middleRows(i, n);
  return t.make(std::move(y), {a}, [a, i, n](Tape<S>& t, const Mat<S>& g) {
    t.grad_ref(a).middleRows(i, n) += g;
  });
}

// ------------------------------------------------------------- reductions

template <class S>
Var sum_all(Tape<S>& t, Var a) {
  Mat<S> y(1, 1);
  y(0, 0) = t.val(a).sum();
  return t.make(std::move(y), {a}, [a](Tape<S>& t, const Mat<S>& g) {
    t.grad_ref(a).array() += g(0, 0);
  });
}

template <class S>
Var mean_all(Tape<S>& t, Var a) {
  S inv = S(1) / S(t.val(a).size());
  return affine(t, sum_all(t, a), inv, S(0));
}

// sum(a .* w) with constant weights; the workhorse for masked mean losses.
template <class S>
Var weighted_sum_all(Tape<S>& t, Var a, Mat<S> w) {
  Mat<S> y(1, 1);
  y(0, 0) = t.val(a).cwiseProduct(w).sum();
  return t.make(std::move(y), {a},
                [a, w = std::move(w)](Tape<S>& t, const Mat<S>& g) {
                  t.grad_ref(a) += g(0, 0) * w;
                });
}

template <class S>
Var rowwise_sum(Tape<S>& t, Var a) {
  Mat<S> y = t.val(a).rowwise().sum();
  return t.make(std::move(y), {a}, [a](Tape<S>& t, const Mat<S>& g) {
    t.grad_ref(a).colwise() += Eigen::Matrix<S, Eigen::Dynamic, 1>(g.col(0));
  });
}

// Per-row sum of a .* w with constant w (e.g. one-hot log prob gather).
template <class S>
Var rowwise_weighted_sum(Tape<S>& t, Var a, Mat<S> w) {
  Mat<S> y = t.val(a).cwiseProduct(w).rowwise().sum();
  return t.make(std::move(y), {a},
                [a, w = std::move(w)](Tape<S>& t, const Mat<S>& g) {
                  Mat<S>& da = t.grad_ref(a);
                  for (int i = 0; i < da.rows(); ++i)
                    da.row(i) += g(i, 0) * w.row(i);
                });
}

// --------------------------------------------------- broadcasting over rows

// a[N,C] .* c[N,1] broadcast across columns.
template <class S>
Var mul_colbroadcast(Tape<S>& t, Var a, Var c) {
  Mat<S> y = (t.val(a).array().colwise() *
              Eigen::Array<S, Eigen::Dynamic, 1>(t.val(c).col(0)))
                 .matrix();
  return t.make(std::move(y), {a, c}, [a, c](Tape<S>& t, const Mat<S>& g) {
    if (t.needs_grad(a))
      t.grad_ref(a) += (g.array().colwise() *
                        Eigen::Array<S, Eigen::Dynamic, 1>(t.val(c).col(0)))
                           .matrix();
    if (t.needs_grad(c))
      t.grad_ref(c).col(0) += g.cwiseProduct(t.val(a)).rowwise().sum();
  });
}

template <class S>
Var add_colbroadcast(Tape<S>& t, Var a, Var c) {
  Mat<S> y = t.val(a);
  y.colwise() += Eigen::Matrix<S, Eigen::Dynamic, 1>(t.val(c).col(0));
  return t.make(std::move(y), {a, c}, [a, c](Tape<S>& t, const Mat<S>& g) {
    if (t.needs_grad(a)) t.grad_ref(a) += g;
    if (t.needs_grad(c)) t.grad_ref(c).col(0) += g.rowwise().sum();
  });
}

// ------------------------------------------------------- grouped softmaxes

// Softmax over each contiguous group of `group` columns, per row.
template <class S>
Var softmax_groups(Tape<S>& t, Var a, int group) {
  const Mat<S>& v = t.val(a);
  if (v.cols() % group != 0)
    throw std::invalid_argument("softmax_groups: cols % group != 0");
  Mat<S> y(v.rows(), v.cols());
  for (int i = 0; i < v.rows(); ++i) {
    for (int gstart = 0; gstart < v.cols(); gstart += group) {
      auto seg = v.row(i).segment(gstart, group);
      S m = seg.maxCoeff();
      Eigen::Array<S, 1, Eigen::Dynamic> e = (seg.array() - m).exp();
      y.row(i).segment(gstart, group) = (e / e.sum()).matrix();
    }
  }
  Mat<S> pc = y;
  return t.make(std::move(y), {a},
                [a, group, pc = std::move(pc)](Tape<S>& t, const Mat<S>& g) {
                  Mat<S>& da = t.grad_ref(a);
                  for (int i = 0; i < pc.rows(); ++i) {
                    for (int gstart = 0; gstart < pc.cols(); gstart += group) {
                      auto pi = pc.row(i).segment(gstart, group).array();
                      auto gi = g.row(i).segment(gstart, group).array();
                      S dot = (pi * gi).sum();
                      da.row(i).segment(gstart, group) +=
                          (pi * (gi - dot)).matrix();
                    }
                  }
                });
}

template <class S>
Var log_softmax_groups(Tape<S>& t, Var a, int group) {
  const Mat<S>& v = t.val(a);
  if (v.cols() % group != 0)
    throw std::invalid_argument("log_softmax_groups: cols % group != 0");
  Mat<S> y(v.rows(), v.cols());
  for (int i = 0; i < v.rows(); ++i) {
    for (int gstart = 0; gstart < v.cols(); gstart += group) {
      auto seg = v.row(i).segment(gstart, group);
      S m = seg.maxCoeff();
      S lse = m + std::log((seg.array() - m).exp().sum());
      y.row(i).segment(gstart, group) = (seg.array() - lse).matrix();
    }
  }
  Mat<S> lpc = y;
  return t.make(std::move(y), {a},
                [a, group, lpc = std::move(lpc)](Tape<S>& t, const Mat<S>& g) {
                  Mat<S>& da = t.grad_ref(a);
                  for (int i = 0; i < lpc.rows(); ++i) {
                    for (int gstart = 0; gstart < lpc.cols();
                         gstart += group) {
                      auto gi = g.row(i).segment(gstart, group).array();
                      auto pi = lpc.row(i).segment(gstart, group).array().exp();
                      S gsum = gi.sum();
                      da.row(i).segment(gstart, group) +=
                          (gi - pi * gsum).matrix();
                    }
                  }
                });
}

// Forward emits the provided sample; backward passes the gradient through to
// `probs` unchanged (straight-through estimator).
template <class S>
Var straight_through(Tape<S>& t, Var probs, Mat<S> sample) {
  return t.make(std::move(sample), {probs},
                [probs](Tape<S>& t, const Mat<S>& g) {
                  t.grad_ref(probs) += g;
                });
}

// ------------------------------------------------------------ normalization

// Per-row layer norm over all columns; gamma/beta are [1,C].
template <class S>
Var layer_norm_rows(Tape<S>& t, Var x, Var gamma, Var beta, S eps) {
  const Mat<S>& v = t.val(x);
  int n = int(v.rows()), c = int(v.cols());
  Mat<S> xhat(n, c);
  Mat<S> inv_s(n, 1);
  for (int i = 0; i < n; ++i) {
    S mu = v.row(i).mean();
    S var = (v.row(i).array() - mu).square().mean();
    S is = S(1) / std::sqrt(var + eps);
    inv_s(i, 0) = is;
    xhat.row(i) = ((v.row(i).array() - mu) * is).matrix();
  }
  Mat<S> y = (xhat.array().rowwise() * t.val(gamma).row(0).array()).matrix();
  y.rowwise() += t.val(beta).row(0);
  return t.make(
      std::move(y), {x, gamma, beta},
      [x, gamma, beta, xhat = std::move(xhat),
       inv_s = std::move(inv_s)](Tape<S>& t, const Mat<S>& g) {
        if (t.needs_grad(gamma))
          t.grad_ref(gamma).row(0) += g.cwiseProduct(xhat).colwise().sum();
        if (t.needs_grad(beta)) t.grad_ref(beta).row(0) += g.colwise().sum();
        if (t.needs_grad(x)) {
          int c = int(g.cols());
          Mat<S> dxh =
              (g.array().rowwise() * t.val(gamma).row(0).array()).matrix();
          Mat<S>& dx = t.grad_ref(x);
          for (int i = 0; i < g.rows(); ++i) {
            S m1 = dxh.row(i).mean();
            S m2 = dxh.row(i).cwiseProduct(xhat.row(i)).mean();
            dx.row(i) += ((dxh.row(i).array() - m1 - xhat.row(i).array() * m2) *
                          inv_s(i, 0))
                             .matrix();
            (void)c;
          }
        }
      });
}

// Layer norm across channels of conv features. Rows are [c][h][w] flattened;
// each spatial position is normalized over its C channel values. gamma/beta
// are [1,C].
template <class S>
Var channel_layer_norm(Tape<S>& t, Var x, int ch, int hw, Var gamma, Var beta,
                       S eps) {
  const Mat<S>& v = t.val(x);
  if (v.cols() != ch * hw)
    throw std::invalid_argument("channel_layer_norm: bad shape");
  int n = int(v.rows());
  Mat<S> xhat(n, ch * hw);
  Mat<S> inv_s(n, hw);
  using CMat = Eigen::Map<const Mat<S>>;
  using MMat = Eigen::Map<Mat<S>>;
  for (int i = 0; i < n; ++i) {
    CMat xi(v.row(i).data(), ch, hw);
    MMat xh(xhat.row(i).data(), ch, hw);
    for (int q = 0; q < hw; ++q) {
      S mu = xi.col(q).mean();
      S var = (xi.col(q).array() - mu).square().mean();
      S is = S(1) / std::sqrt(var + eps);
      inv_s(i, q) = is;
      xh.col(q) = ((xi.col(q).array() - mu) * is).matrix();
    }
  }
  Mat<S> y(n, ch * hw);
  for (int i = 0; i < n; ++i) {
    CMat xh(xhat.row(i).data(), ch, hw);
    MMat yi(y.row(i).data(), ch, hw);
    yi = (xh.array().colwise() *
          Eigen::Array<S, Eigen::Dynamic, 1>(t.val(gamma).row(0).transpose()))
             .matrix();
    yi.colwise() +=
        Eigen::Matrix<S, Eigen::Dynamic, 1>(t.val(beta).row(0).transpose());
  }
  return t.make(
      std::move(y), {x, gamma, beta},
      [x, gamma, beta, ch, hw, xhat = std::move(xhat),
       inv_s = std::move(inv_s)](Tape<S>& t, const Mat<S>& g) {
        int n = int(g.rows());
        if (t.needs_grad(gamma)) {
          Mat<S>& dg = t.grad_ref(gamma);
          for (int i = 0; i < n; ++i) {
            CMat gi(g.row(i).data(), ch, hw);
            CMat xh(xhat.row(i).data(), ch, hw);
            dg.row(0) += gi.cwiseProduct(xh).rowwise().sum().transpose();
          }
        }
        if (t.needs_grad(beta)) {
          Mat<S>& db = t.grad_ref(beta);
          for (int i = 0; i < n; ++i) {
            CMat gi(g.row(i).data(), ch, hw);
            db.row(0) += gi.rowwise().sum().transpose();
          }
        }
        if (t.needs_grad(x)) {
          Mat<S>& dx = t.grad_ref(x);
          Eigen::Array<S, Eigen::Dynamic, 1> ga =
              t.val(gamma).row(0).transpose();
          for (int i = 0; i < n; ++i) {
            CMat gi(g.row(i).data(), ch, hw);
            CMat xh(xhat.row(i).data(), ch, hw);
            MMat dxi(dx.row(i).data(), ch, hw);
            Mat<S> dxh = (gi.array().colwise() * ga).matrix();
            for (int q = 0; q < hw; ++q) {
              S m1 = dxh.col(q).mean();
              S m2 = dxh.col(q).cwiseProduct(xh.col(q)).mean();
              dxi.col(q) +=
                  ((dxh.col(q).array() - m1 - xh.col(q).array() * m2) *
                   inv_s(i, q))
                      .matrix();
            }
          }
        }
      });
}

// Per-feature batch normalization. In training mode the batch statistics are
// used and the running buffers are updated in place (one call, one update);
// in eval mode the running buffers are used. Variance is biased (/N).
template <class S>
Var batch_norm(Tape<S>& t, Var x, Var gamma, Var beta, Mat<S>& running_mean,
               Mat<S>& running_var, S momentum, S eps, bool training) {
  const Mat<S>& v = t.val(x);
  int n = int(v.rows());
  if (training && n < 2)
    throw std::invalid_argument(
        "batch_norm: training mode requires batch size >= 2");
  Mat<S> mean, var;
  if (training) {
    mean = v.colwise().mean();
    var = (v.rowwise() - mean.row(0)).array().square().colwise().mean();
    running_mean = momentum * running_mean + (S(1) - momentum) * mean;
    running_var = momentum * running_var + (S(1) - momentum) * var;
  } else {
    mean = running_mean;
    var = running_var;
  }
  Mat<S> inv_s = (var.array() + eps).rsqrt().matrix();
  Mat<S> xhat = ((v.rowwise() - mean.row(0)).array().rowwise() *
                 inv_s.row(0).array())
                    .matrix();
  Mat<S> y = (xhat.array().rowwise() * t.val(gamma).row(0).array()).matrix();
  y.rowwise() += t.val(beta).row(0);
  return t.make(
      std::move(y), {x, gamma, beta},
      [x, gamma, beta, training, xhat = std::move(xhat),
       inv_s = std::move(inv_s)](Tape<S>& t, const Mat<S>& g) {
        if (t.needs_grad(gamma))
          t.grad_ref(gamma).row(0) += g.cwiseProduct(xhat).colwise().sum();
        if (t.needs_grad(beta)) t.grad_ref(beta).row(0) += g.colwise().sum();
        if (!t.needs_grad(x)) return;
        Mat<S> dxh =
            (g.array().rowwise() * t.val(gamma).row(0).array()).matrix();
        Mat<S>& dx = t.grad_ref(x);
        if (training) {
          Mat<S> m1 = dxh.colwise().mean();
          Mat<S> m2 = dxh.cwiseProduct(xhat).colwise().mean();
          Mat<S> corr =
              (dxh.rowwise() - m1.row(0)) -
              (xhat.array().rowwise() * m2.row(0).array()).matrix();
          dx += (corr.array().rowwise() * inv_s.row(0).array()).matrix();
        } else {
          dx += (dxh.array().rowwise() * inv_s.row(0).array()).matrix();
        }
      });
}

}  // namespace latdream

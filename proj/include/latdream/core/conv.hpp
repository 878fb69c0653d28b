#pragma once

#include "latdream/core/ops.hpp"

namespace latdream {

struct ConvShape {
  int in_c = 0, in_h = 0, in_w = 0;
  int out_c = 0;
  int k = 4, stride = 2, pad = 1;

  int out_h() const { return (in_h + 2 * pad - k) / stride + 1; }
  int out_w() const { return (in_w + 2 * pad - k) / stride + 1; }
  // Transposed-conv output size (inverse of the strided conv map).
  int tr_out_h() const { return (in_h - 1) * stride - 2 * pad + k; }
  int tr_out_w() const { return (in_w - 1) * stride - 2 * pad + k; }
};

namespace detail {

// src: one image, channel-major [c][h][w]; cols: [C*k*k, oh*ow].
template <class S>
void im2col(const S* src, int c, int h, int w, int k, int stride, int pad,
            int oh, int ow, Mat<S>& cols) {
  cols.setZero(c * k * k, oh * ow);
  for (int ch = 0; ch < c; ++ch) {
    const S* plane = src + ch * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        S* row = cols.row((ch * k + ky) * k + kx).data();
        for (int oy = 0; oy < oh; ++oy) {
          int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          const S* srow = plane + iy * w;
          S* drow = row + oy * ow;
          for (int ox = 0; ox < ow; ++ox) {
            int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < w) drow[ox] = srow[ix];
          }
        }
      }
    }
  }
}

template <class S>
void col2im_add(const Mat<S>& cols, int c, int h, int w, int k, int stride,
                int pad, int oh, int ow, S* dst) {
  for (int ch = 0; ch < c; ++ch) {
    S* plane = dst + ch * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const S* row = cols.row((ch * k + ky) * k + kx).data();
        for (int oy = 0; oy < oh; ++oy) {
          int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          S* srow = plane + iy * w;
          const S* drow = row + oy * ow;
          for (int ox = 0; ox < ow; ++ox) {
            int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < w) srow[ix] += drow[ox];
          }
        }
      }
    }
  }
}

}  // namespace detail

// Strided convolution. x rows are [in_c][in_h][in_w]; w is
// [out_c, in_c*k*k]; b is [1, out_c]. Output rows are [out_c][oh][ow].
// The im2col buffer is rebuilt in backward instead of saved.
template <class S>
Var conv2d(Tape<S>& t, Var x, Var w, Var b, ConvShape sh) {
  const Mat<S>& xv = t.val(x);
  const int n = int(xv.rows());
  const int oh = sh.out_h(), ow = sh.out_w();
  if (xv.cols() != sh.in_c * sh.in_h * sh.in_w)
    throw std::invalid_argument("conv2d: input shape mismatch");
  Mat<S> y(n, sh.out_c * oh * ow);
  Mat<S> cols;
  for (int i = 0; i < n; ++i) {
    detail::im2col(xv.row(i).data(), sh.in_c, sh.in_h, sh.in_w, sh.k,
                   sh.stride, sh.pad, oh, ow, cols);
    Eigen::Map<Mat<S>> yi(y.row(i).data(), sh.out_c, oh * ow);
    yi.noalias() = t.val(w) * cols;
    yi.colwise() +=
        Eigen::Matrix<S, Eigen::Dynamic, 1>(t.val(b).row(0).transpose());
  }
  return t.make(std::move(y), {x, w, b},
                [x, w, b, sh, oh, ow](Tape<S>& t, const Mat<S>& g) {
                  const Mat<S>& xv = t.val(x);
                  const int n = int(xv.rows());
                  Mat<S> cols;
                  const bool nx = t.needs_grad(x);
                  const bool nw = t.needs_grad(w);
                  const bool nb = t.needs_grad(b);
                  for (int i = 0; i < n; ++i) {
                    Eigen::Map<const Mat<S>> gi(g.row(i).data(), sh.out_c,
                                                oh * ow);
                    if (nw || nx)
                      detail::im2col(xv.row(i).data(), sh.in_c, sh.in_h,
                                     sh.in_w, sh.k, sh.stride, sh.pad, oh, ow,
                                     cols);
                    if (nw) t.grad_ref(w).noalias() += gi * cols.transpose();
                    if (nb)
                      t.grad_ref(b).row(0) += gi.rowwise().sum().transpose();
                    if (nx) {
                      Mat<S> dcols = t.val(w).transpose() * gi;
                      detail::col2im_add(dcols, sh.in_c, sh.in_h, sh.in_w,
                                         sh.k, sh.stride, sh.pad, oh, ow,
                                         t.grad_ref(x).row(i).data());
                    }
                  }
                });
}

// Transposed convolution (stride-2 upsampling mirror of conv2d). x rows are
// [in_c][in_h][in_w]; w is [in_c, out_c*k*k]; b is [1, out_c]. Output spatial
// dims are tr_out_h/w; sh.in_* describe the input, sh.out_c the output depth.
template <class S>
Var conv2d_transpose(Tape<S>& t, Var x, Var w, Var b, ConvShape sh) {
  const Mat<S>& xv = t.val(x);
  const int n = int(xv.rows());
  const int oh = sh.tr_out_h(), ow = sh.tr_out_w();
  if (xv.cols() != sh.in_c * sh.in_h * sh.in_w)
    throw std::invalid_argument("conv2d_transpose: input shape mismatch");
  const int hw = sh.in_h * sh.in_w;
  Mat<S> y = Mat<S>::Zero(n, sh.out_c * oh * ow);
  for (int i = 0; i < n; ++i) {
    Eigen::Map<const Mat<S>> xi(xv.row(i).data(), sh.in_c, hw);
    Mat<S> colsy = t.val(w).transpose() * xi;  // [out_c*k*k, hw]
    detail::col2im_add(colsy, sh.out_c, oh, ow, sh.k, sh.stride, sh.pad,
                       sh.in_h, sh.in_w, y.row(i).data());
    Eigen::Map<Mat<S>> yi(y.row(i).data(), sh.out_c, oh * ow);
    yi.colwise() +=
        Eigen::Matrix<S, Eigen::Dynamic, 1>(t.val(b).row(0).transpose());
  }
  return t.make(
      std::move(y), {x, w, b},
      [x, w, b, sh, oh, ow, hw](Tape<S>& t, const Mat<S>& g) {
        const Mat<S>& xv = t.val(x);
        const int n = int(xv.rows());
        Mat<S> gcols;
        const bool nx = t.needs_grad(x);
        const bool nw = t.needs_grad(w);
        const bool nb = t.needs_grad(b);
        for (int i = 0; i < n; ++i) {
          Eigen::Map<const Mat<S>> gi(g.row(i).data(), sh.out_c, oh * ow);
          if (nx || nw)
            detail::im2col(g.row(i).data(), sh.out_c, oh, ow, sh.k, sh.stride,
                           sh.pad, sh.in_h, sh.in_w, gcols);
          if (nx) {
            Eigen::Map<Mat<S>> dxi(t.grad_ref(x).row(i).data(), sh.in_c, hw);
            dxi.noalias() += t.val(w) * gcols;
          }
          if (nw) {
            Eigen::Map<const Mat<S>> xi(xv.row(i).data(), sh.in_c, hw);
            t.grad_ref(w).noalias() += xi * gcols.transpose();
          }
          if (nb) t.grad_ref(b).row(0) += gi.rowwise().sum().transpose();
        }
      });
}

}  // namespace latdream

#pragma once

#include <string>
#include <vector>

#include "latdream/core/conv.hpp"
#include "latdream/core/ops.hpp"

namespace latdream {

constexpr double kNormEps = 1e-3;

// Modules own Params and expose fwd(tape, ...). When `frozen` is set the
// weights enter the tape as cached constants: gradients still flow through
// the function to its inputs but never into the parameters.

template <class S>
struct Linear {
  Param<S> w, b;

  void init(const std::string& name, int in, int out, Rng& rng,
            bool zero_init = false) {
    w.name = name + "/w";
    b.name = name + "/b";
    if (zero_init) {
      w.value = Mat<S>::Zero(in, out);
    } else {
      double std_dev = std::sqrt(2.0 / double(in + out));
      w.value = rng.template normal_mat<S>(in, out, std_dev);
    }
    b.value = Mat<S>::Zero(1, out);
  }

  Var fwd(Tape<S>& t, Var x, bool frozen = false) {
    Var wv = frozen ? t.input_cached(&w, w.value) : t.param(w);
    Var bv = frozen ? t.input_cached(&b, b.value) : t.param(b);
    return linear(t, x, wv, bv);
  }

  ParamSet<S> params() {
    ParamSet<S> ps;
    ps.add(&w);
    ps.add(&b);
    return ps;
  }
};

template <class S>
struct LayerNorm {
  Param<S> gamma, beta;

  void init(const std::string& name, int dim) {
    gamma.name = name + "/gamma";
    beta.name = name + "/beta";
    gamma.value = Mat<S>::Ones(1, dim);
    beta.value = Mat<S>::Zero(1, dim);
  }

  Var fwd(Tape<S>& t, Var x, bool frozen = false) {
    Var g = frozen ? t.input_cached(&gamma, gamma.value) : t.param(gamma);
    Var b = frozen ? t.input_cached(&beta, beta.value) : t.param(beta);
    return layer_norm_rows(t, x, g, b, S(kNormEps));
  }

  // Conv-feature variant: normalizes each spatial position across channels.
  Var fwd_channels(Tape<S>& t, Var x, int ch, int hw, bool frozen = false) {
    Var g = frozen ? t.input_cached(&gamma, gamma.value) : t.param(gamma);
    Var b = frozen ? t.input_cached(&beta, beta.value) : t.param(beta);
    return channel_layer_norm(t, x, ch, hw, g, b, S(kNormEps));
  }

  ParamSet<S> params() {
    ParamSet<S> ps;
    ps.add(&gamma);
    ps.add(&beta);
    return ps;
  }
};

template <class S>
struct BatchNorm {
  Param<S> gamma, beta;
  Param<S> running_mean, running_var;  // buffers, not trained
  S momentum = S(0.9);

  void init(const std::string& name, int dim, S momentum_) {
    momentum = momentum_;
    gamma.name = name + "/gamma";
    beta.name = name + "/beta";
    gamma.value = Mat<S>::Ones(1, dim);
    beta.value = Mat<S>::Zero(1, dim);
    running_mean.name = name + "/running_mean";
    running_mean.value = Mat<S>::Zero(1, dim);
    running_mean.trainable = false;
    running_var.name = name + "/running_var";
    running_var.value = Mat<S>::Ones(1, dim);
    running_var.trainable = false;
  }

  Var fwd(Tape<S>& t, Var x, bool training, bool frozen = false) {
    Var g = frozen ? t.input_cached(&gamma, gamma.value) : t.param(gamma);
    Var b = frozen ? t.input_cached(&beta, beta.value) : t.param(beta);
    return batch_norm(t, x, g, b, running_mean.value, running_var.value,
                      momentum, S(kNormEps), training);
  }

  ParamSet<S> params() {
    ParamSet<S> ps;
    ps.add(&gamma);
    ps.add(&beta);
    ps.add(&running_mean);
    ps.add(&running_var);
    return ps;
  }
};

// Linear stack with LayerNorm + SiLU after every layer except the last,
// which emits raw outputs (logits). `layers` counts the output layer.
template <class S>
struct Mlp {
  std::vector<Linear<S>> hidden;
  std::vector<LayerNorm<S>> norms;
  Linear<S> out;

  void init(const std::string& name, int in, int hidden_dim, int out_dim,
            int layers, Rng& rng, bool zero_out = true) {
    if (layers < 1) throw std::invalid_argument("Mlp: layers must be >= 1");
    hidden.resize(layers - 1);
    norms.resize(layers - 1);
    int d = in;
    for (int i = 0; i < layers - 1; ++i) {
      hidden[i].init(name + "/l" + std::to_string(i), d, hidden_dim, rng);
      norms[i].init(name + "/ln" + std::to_string(i), hidden_dim);
      d = hidden_dim;
    }
    out.init(name + "/out", d, out_dim, rng, zero_out);
  }

  Var fwd(Tape<S>& t, Var x, bool frozen = false) {
    for (size_t i = 0; i < hidden.size(); ++i)
      x = silu(t, norms[i].fwd(t, hidden[i].fwd(t, x, frozen), frozen));
    return out.fwd(t, x, frozen);
  }

  ParamSet<S> params() {
    ParamSet<S> ps;
    for (auto& l : hidden) ps.add(l.params());
    for (auto& n : norms) ps.add(n.params());
    ps.add(out.params());
    return ps;
  }
};

// Gated recurrent cell in the norm-GRU form: one linear over [input, state]
// into three gate blocks, layer-normalized, update-gate bias -1.
template <class S>
struct GruCell {
  Linear<S> core;
  LayerNorm<S> norm;
  int dim = 0;

  void init(const std::string& name, int input, int state, Rng& rng) {
    dim = state;
    core.init(name + "/core", input + state, 3 * state, rng);
    norm.init(name + "/norm", 3 * state);
  }

  Var fwd(Tape<S>& t, Var input, Var h, bool frozen = false) {
    Var parts = norm.fwd(t, core.fwd(t, concat_cols(t, input, h), frozen),
                         frozen);
    Var reset = sigmoid(t, slice_cols(t, parts, 0, dim));
    Var cand = vtanh(t, mul(t, reset, slice_cols(t, parts, dim, dim)));
    Var update = sigmoid(t, affine(t, slice_cols(t, parts, 2 * dim, dim),
                                   S(1), S(-1)));
    Var keep = affine(t, update, S(-1), S(1));
    return add(t, mul(t, update, cand), mul(t, keep, h));
  }

  ParamSet<S> params() {
    ParamSet<S> ps;
    ps.add(core.params());
    ps.add(norm.params());
    return ps;
  }
};

template <class S>
struct Conv2dLayer {
  Param<S> w, b;
  ConvShape shape;

  void init(const std::string& name, ConvShape sh, Rng& rng,
            bool transposed = false, bool zero_init = false) {
    shape = sh;
    w.name = name + "/w";
    b.name = name + "/b";
    int fan_in = sh.in_c * sh.k * sh.k;
    int fan_out = sh.out_c * sh.k * sh.k;
    double std_dev = std::sqrt(2.0 / double(fan_in + fan_out));
    int rows = transposed ? sh.in_c : sh.out_c;
    int cols = transposed ? sh.out_c * sh.k * sh.k : sh.in_c * sh.k * sh.k;
    w.value = zero_init ? Mat<S>::Zero(rows, cols)
                        : rng.template normal_mat<S>(rows, cols, std_dev);
    b.value = Mat<S>::Zero(1, sh.out_c);
  }

  Var fwd(Tape<S>& t, Var x, bool frozen = false) {
    Var wv = frozen ? t.input_cached(&w, w.value) : t.param(w);
    Var bv = frozen ? t.input_cached(&b, b.value) : t.param(b);
    return conv2d(t, x, wv, bv, shape);
  }

  Var fwd_transposed(Tape<S>& t, Var x, bool frozen = false) {
    Var wv = frozen ? t.input_cached(&w, w.value) : t.param(w);
    Var bv = frozen ? t.input_cached(&b, b.value) : t.param(b);
    return conv2d_transpose(t, x, wv, bv, shape);
  }

  ParamSet<S> params() {
    ParamSet<S> ps;
    ps.add(&w);
    ps.add(&b);
    return ps;
  }
};

// Four strided conv stages, each followed by channel layer norm + SiLU.
// Channels double per stage from `depth`; spatial dims halve from `res`.
template <class S>
struct ConvEncoder {
  std::vector<Conv2dLayer<S>> convs;
  std::vector<LayerNorm<S>> norms;
  int in_res = 0, out_dim = 0;

  void init(const std::string& name, int res, int in_channels, int depth,
            Rng& rng) {
    if (res % 16 != 0)
      throw std::invalid_argument("ConvEncoder: resolution must be /16");
    in_res = res;
    convs.resize(4);
    norms.resize(4);
    int c = in_channels, r = res;
    for (int i = 0; i < 4; ++i) {
      int oc = depth << i;
      ConvShape sh{c, r, r, oc, 4, 2, 1};
      convs[i].init(name + "/conv" + std::to_string(i), sh, rng);
      norms[i].init(name + "/ln" + std::to_string(i), oc);
      c = oc;
      r /= 2;
    }
    out_dim = c * r * r;
  }

  Var fwd(Tape<S>& t, Var x, bool frozen = false) {
    for (int i = 0; i < 4; ++i) {
      x = convs[i].fwd(t, x, frozen);
      int oh = convs[i].shape.out_h();
      x = norms[i].fwd_channels(t, x, convs[i].shape.out_c, oh * oh, frozen);
      x = silu(t, x);
    }
    return x;
  }

  ParamSet<S> params() {
    ParamSet<S> ps;
    for (auto& c : convs) ps.add(c.params());
    for (auto& n : norms) ps.add(n.params());
    return ps;
  }
};

// Mirror of ConvEncoder: a linear from the model state to the bottom feature
// map, then four transposed convs, the last one emitting image channels
// without norm or activation.
template <class S>
struct ConvDecoder {
  Linear<S> in;
  std::vector<Conv2dLayer<S>> convs;
  std::vector<LayerNorm<S>> norms;
  int bottom_c = 0, bottom_r = 0;

  void init(const std::string& name, int state_dim, int res, int out_channels,
            int depth, Rng& rng) {
    bottom_c = depth << 3;
    bottom_r = res / 16;
    in.init(name + "/in", state_dim, bottom_c * bottom_r * bottom_r, rng);
    convs.resize(4);
    norms.resize(3);
    int c = bottom_c, r = bottom_r;
    for (int i = 0; i < 4; ++i) {
      int oc = i == 3 ? out_channels : (depth << (2 - i));
      ConvShape sh{c, r, r, oc, 4, 2, 1};
      convs[i].init(name + "/deconv" + std::to_string(i), sh, rng, true);
      if (i < 3) norms[i].init(name + "/ln" + std::to_string(i), oc);
      c = oc;
      r *= 2;
    }
  }

  Var fwd(Tape<S>& t, Var s, bool frozen = false) {
    Var x = in.fwd(t, s, frozen);
    for (int i = 0; i < 4; ++i) {
      x = convs[i].fwd_transposed(t, x, frozen);
      if (i < 3) {
        int oh = convs[i].shape.tr_out_h();
        x = norms[i].fwd_channels(t, x, convs[i].shape.out_c, oh * oh, frozen);
        x = silu(t, x);
      }
    }
    return x;
  }

  ParamSet<S> params() {
    ParamSet<S> ps;
    ps.add(in.params());
    for (auto& c : convs) ps.add(c.params());
    for (auto& n : norms) ps.add(n.params());
    return ps;
  }
};

}  // namespace latdream

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "pulsebench/error.hpp"
#include "pulsebench/fft.hpp"
#include "pulsebench/preprocess.hpp"
#include "pulsebench/rng.hpp"
#include "pulsebench/tensor.hpp"

namespace pb::nn {

// A named view into a layer's weight and its gradient accumulator. Buffers
// (running statistics) carry grad == nullptr.
template <class S>
struct ParamRefT {
  std::string name;
  TensorT<S>* value;
  TensorT<S>* grad;
};

using ParamRef = ParamRefT<float>;

enum class Pad { kValid, kSame };

template <class S>
class LayerT {
 public:
  virtual ~LayerT() = default;
  virtual TensorT<S> forward(const TensorT<S>& x, bool train) = 0;
  virtual TensorT<S> backward(const TensorT<S>& grad_out) = 0;
  // Shape propagation without data; accumulates multiply-accumulate counts
  // of the convolutions into *macs when non-null.
  virtual Shape out_shape(const Shape& in, std::int64_t* macs) const = 0;
  virtual void collect_params(const std::string& prefix,
                              std::vector<ParamRefT<S>>& out) {}
  virtual void collect_buffers(const std::string& prefix,
                               std::vector<ParamRefT<S>>& out) {}
  virtual void init(std::mt19937_64& g) {}
};

// ---------------------------------------------------------------------------
// Conv1D over an {L, Cin} sequence. Weight layout {Cout, Cin, K}.

template <class S>
class Conv1DT final : public LayerT<S> {
 public:
  Conv1DT(std::int64_t cin, std::int64_t cout, std::int64_t k,
          std::int64_t stride, Pad pad)
      : cin_(cin), cout_(cout), k_(k), stride_(stride), pad_(pad),
        weight_({cout, cin, k}), bias_({cout}),
        gweight_({cout, cin, k}), gbias_({cout}) {
    require(cin >= 1 && cout >= 1 && k >= 1 && stride >= 1,
            ErrorKind::kConfig, "conv1d: dims and stride must be positive");
    require(pad != Pad::kSame || stride == 1, ErrorKind::kConfig,
            "conv1d: same padding requires stride 1");
  }

  Shape out_shape(const Shape& in, std::int64_t* macs) const override {
    require(in.size() == 2 && in[1] == cin_, ErrorKind::kShape,
            "conv1d: expected {L," + std::to_string(cin_) + "}, got " +
                shape_str(in));
    const std::int64_t l = in[0];
    std::int64_t lout;
    if (pad_ == Pad::kValid) {
      require(l >= k_, ErrorKind::kTooShort,
              "conv1d: input shorter than kernel");
      lout = (l - k_) / stride_ + 1;
    } else {
      lout = l;
    }
    if (macs) *macs += lout * cout_ * cin_ * k_;
    return {lout, cout_};
  }

  TensorT<S> forward(const TensorT<S>& x, bool) override {
    const Shape os = out_shape(x.shape, nullptr);
    const std::int64_t l = x.shape[0], lout = os[0];
    const std::int64_t pad_left = (pad_ == Pad::kSame) ? (k_ - 1) / 2 : 0;

    cols_ = TensorT<S>({lout, k_ * cin_});
    for (std::int64_t o = 0; o < lout; ++o)
      for (std::int64_t kk = 0; kk < k_; ++kk) {
        const std::int64_t t = o * stride_ + kk - pad_left;
        if (t < 0 || t >= l) continue;
        for (std::int64_t ci = 0; ci < cin_; ++ci)
          cols_(o, kk * cin_ + ci) = x(t, ci);
      }
    lin_ = l;
    cached_ = true;

    TensorT<S> out(os);
    out.mat(lout, cout_).noalias() =
        cols_.mat(lout, k_ * cin_) * weight_matrix();
    out.mat(lout, cout_).rowwise() +=
        bias_.vec().transpose();
    return out;
  }

  TensorT<S> backward(const TensorT<S>& g) override {
    require(cached_, ErrorKind::kState, "conv1d: backward without forward");
    require(g.rank() == 2 && g.shape[0] == cols_.shape[0] && g.shape[1] == cout_,
            ErrorKind::kShape, "conv1d: gradient shape mismatch");
    cached_ = false;
    const std::int64_t lout = g.shape[0];
    const std::int64_t pad_left = (pad_ == Pad::kSame) ? (k_ - 1) / 2 : 0;

    gbias_.vec() += g.mat(lout, cout_).colwise().sum().transpose();

    typename TensorT<S>::MatRM gw =
        cols_.mat(lout, k_ * cin_).transpose() * g.mat(lout, cout_);
    for (std::int64_t kk = 0; kk < k_; ++kk)
      for (std::int64_t ci = 0; ci < cin_; ++ci)
        for (std::int64_t co = 0; co < cout_; ++co)
          gweight_(co, ci, kk) += gw(kk * cin_ + ci, co);

    typename TensorT<S>::MatRM gcols =
        g.mat(lout, cout_) * weight_matrix().transpose();
    TensorT<S> gx({lin_, cin_});
    for (std::int64_t o = 0; o < lout; ++o)
      for (std::int64_t kk = 0; kk < k_; ++kk) {
        const std::int64_t t = o * stride_ + kk - pad_left;
        if (t < 0 || t >= lin_) continue;
        for (std::int64_t ci = 0; ci < cin_; ++ci)
          gx(t, ci) += gcols(o, kk * cin_ + ci);
      }
    return gx;
  }

  void collect_params(const std::string& p,
                      std::vector<ParamRefT<S>>& out) override {
    out.push_back({p + ".weight", &weight_, &gweight_});
    out.push_back({p + ".bias", &bias_, &gbias_});
  }

  void init(std::mt19937_64& g) override {
    const double bound = std::sqrt(6.0 / static_cast<double>(cin_ * k_));
    for (auto& w : weight_.data)
      w = static_cast<S>(bound * rng::unit_symmetric(g));
    bias_.fill(S(0));
  }

 private:
  // {K*Cin} x {Cout} view used by both GEMMs; row index kk*Cin+ci matches
  // the im2col column layout.
  typename TensorT<S>::MatRM weight_matrix() const {
    typename TensorT<S>::MatRM w(k_ * cin_, cout_);
    for (std::int64_t co = 0; co < cout_; ++co)
      for (std::int64_t ci = 0; ci < cin_; ++ci)
        for (std::int64_t kk = 0; kk < k_; ++kk)
          w(kk * cin_ + ci, co) = weight_(co, ci, kk);
    return w;
  }

  std::int64_t cin_, cout_, k_, stride_;
  Pad pad_;
  TensorT<S> weight_, bias_, gweight_, gbias_;
  TensorT<S> cols_;
  std::int64_t lin_ = 0;
  bool cached_ = false;
};

// ---------------------------------------------------------------------------
// BatchNorm over the trailing channel axis; statistics pool every leading
// dim. Population variance; running stats are buffers, not parameters.

template <class S>
class BatchNorm1DT final : public LayerT<S> {
 public:
  explicit BatchNorm1DT(std::int64_t c, S eps = S(1e-5), S momentum = S(0.1))
      : c_(c), eps_(eps), momentum_(momentum),
        gamma_({c}, S(1)), beta_({c}), ggamma_({c}), gbeta_({c}),
        running_mean_({c}), running_var_({c}, S(1)) {
    require(c >= 1, ErrorKind::kConfig, "batchnorm: channels must be positive");
  }

  Shape out_shape(const Shape& in, std::int64_t*) const override {
    require(!in.empty() && in.back() == c_, ErrorKind::kShape,
            "batchnorm: trailing dim must be " + std::to_string(c_));
    return in;
  }

  TensorT<S> forward(const TensorT<S>& x, bool train) override {
    out_shape(x.shape, nullptr);
    const std::int64_t rows = x.numel() / c_;
    auto xm = x.mat(rows, c_);

    Eigen::Array<S, 1, Eigen::Dynamic> mean(c_), var(c_);
    if (train) {
      mean = xm.colwise().mean().array();
      var = (xm.rowwise() - mean.matrix()).array().square().colwise().sum() /
            static_cast<S>(rows);
      running_mean_.vec().array() =
          (S(1) - momentum_) * running_mean_.vec().array() +
          momentum_ * mean.transpose();
      running_var_.vec().array() =
          (S(1) - momentum_) * running_var_.vec().array() +
          momentum_ * var.transpose();
    } else {
      mean = running_mean_.vec().transpose().array();
      var = running_var_.vec().transpose().array();
    }
    inv_std_ = (var + eps_).sqrt().inverse();

    xhat_ = TensorT<S>(x.shape);
    auto hm = xhat_.mat(rows, c_);
    hm = ((xm.rowwise() - mean.matrix()).array().rowwise() * inv_std_).matrix();

    TensorT<S> out(x.shape);
    out.mat(rows, c_) =
        ((hm.array().rowwise() * gamma_.vec().transpose().array()).rowwise() +
         beta_.vec().transpose().array()).matrix();
    train_cached_ = train;
    cached_ = true;
    return out;
  }

  TensorT<S> backward(const TensorT<S>& g) override {
    require(cached_, ErrorKind::kState, "batchnorm: backward without forward");
    require(shape_eq(g.shape, xhat_.shape), ErrorKind::kShape,
            "batchnorm: gradient shape mismatch");
    cached_ = false;
    const std::int64_t rows = g.numel() / c_;
    auto gm = g.mat(rows, c_);
    auto hm = xhat_.mat(rows, c_);

    ggamma_.vec().array() +=
        (gm.array() * hm.array()).colwise().sum().transpose();
    gbeta_.vec().array() += gm.colwise().sum().transpose().array();

    TensorT<S> gx(g.shape);
    auto gxm = gx.mat(rows, c_);
    Eigen::Array<S, 1, Eigen::Dynamic> scale =
        gamma_.vec().transpose().array() * inv_std_;
    if (train_cached_) {
      Eigen::Array<S, 1, Eigen::Dynamic> mg =
          gm.colwise().mean().array();
      Eigen::Array<S, 1, Eigen::Dynamic> mgh =
          (gm.array() * hm.array()).colwise().mean();
      gxm = (((gm.array().rowwise() - mg) -
              hm.array().rowwise() * mgh).rowwise() * scale).matrix();
    } else {
      gxm = (gm.array().rowwise() * scale).matrix();
    }
    return gx;
  }

  void collect_params(const std::string& p,
                      std::vector<ParamRefT<S>>& out) override {
    out.push_back({p + ".gamma", &gamma_, &ggamma_});
    out.push_back({p + ".beta", &beta_, &gbeta_});
  }

  void collect_buffers(const std::string& p,
                       std::vector<ParamRefT<S>>& out) override {
    out.push_back({p + ".running_mean", &running_mean_, nullptr});
    out.push_back({p + ".running_var", &running_var_, nullptr});
  }

  void init(std::mt19937_64&) override {
    gamma_.fill(S(1));
    beta_.fill(S(0));
    running_mean_.fill(S(0));
    running_var_.fill(S(1));
  }

 private:
  std::int64_t c_;
  S eps_, momentum_;
  TensorT<S> gamma_, beta_, ggamma_, gbeta_;
  TensorT<S> running_mean_, running_var_;
  TensorT<S> xhat_;
  Eigen::Array<S, 1, Eigen::Dynamic> inv_std_;
  bool train_cached_ = false;
  bool cached_ = false;
};

template <class S>
class ReLUT final : public LayerT<S> {
 public:
  Shape out_shape(const Shape& in, std::int64_t*) const override { return in; }

  TensorT<S> forward(const TensorT<S>& x, bool) override {
    mask_.assign(x.data.size(), 0);
    TensorT<S> out(x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i) {
      if (x.data[i] > S(0)) {
        out.data[i] = x.data[i];
        mask_[i] = 1;
      }
    }
    cached_ = true;
    return out;
  }

  TensorT<S> backward(const TensorT<S>& g) override {
    require(cached_, ErrorKind::kState, "relu: backward without forward");
    cached_ = false;
    TensorT<S> gx(g.shape);
    for (std::size_t i = 0; i < g.data.size(); ++i)
      gx.data[i] = mask_[i] ? g.data[i] : S(0);
    return gx;
  }

 private:
  std::vector<std::uint8_t> mask_;
  bool cached_ = false;
};

// ---------------------------------------------------------------------------
// The spectral transformation: per-channel half spectrum, real and imaginary
// blocks packed side by side on the channel axis, a Conv-BN-ReLU over the
// frequency axis, inverse transform, residual add. Channel count is
// preserved.

template <class S>
class SpectralBlockT final : public LayerT<S> {
 public:
  SpectralBlockT(std::int64_t c, std::int64_t k)
      : c_(c), conv_(2 * c, 2 * c, k, 1, Pad::kSame), bn_(2 * c) {}

  Shape out_shape(const Shape& in, std::int64_t* macs) const override {
    require(in.size() == 2 && in[1] == c_, ErrorKind::kShape,
            "spectral: expected {N," + std::to_string(c_) + "}, got " +
                shape_str(in));
    require(in[0] >= 4, ErrorKind::kTooShort,
            "spectral: sequence too short for a useful spectrum");
    const std::int64_t f = in[0] / 2 + 1;
    conv_.out_shape({f, 2 * c_}, macs);
    return in;
  }

  TensorT<S> forward(const TensorT<S>& x, bool train) override {
    out_shape(x.shape, nullptr);
    n_ = x.shape[0];
    const std::int64_t f = n_ / 2 + 1;

    TensorT<S> packed({f, 2 * c_});
    std::vector<S> col(static_cast<std::size_t>(n_));
    for (std::int64_t c = 0; c < c_; ++c) {
      for (std::int64_t t = 0; t < n_; ++t) col[static_cast<std::size_t>(t)] = x(t, c);
      ComplexSeqT<S> spec = rfft<S>(std::span<const S>(col));
      for (std::int64_t q = 0; q < f; ++q) {
        packed(q, c) = spec.re[static_cast<std::size_t>(q)];
        packed(q, c_ + c) = spec.im[static_cast<std::size_t>(q)];
      }
    }

    TensorT<S> z = relu_.forward(bn_.forward(conv_.forward(packed, train), train), train);

    TensorT<S> out(x.shape);
    ComplexSeqT<S> spec(static_cast<std::size_t>(f));
    for (std::int64_t c = 0; c < c_; ++c) {
      for (std::int64_t q = 0; q < f; ++q) {
        spec.re[static_cast<std::size_t>(q)] = z(q, c);
        spec.im[static_cast<std::size_t>(q)] = z(q, c_ + c);
      }
      std::vector<S> y = irfft<S>(spec, static_cast<std::size_t>(n_));
      for (std::int64_t t = 0; t < n_; ++t) out(t, c) = y[static_cast<std::size_t>(t)] + x(t, c);
    }
    cached_ = true;
    return out;
  }

  TensorT<S> backward(const TensorT<S>& g) override {
    require(cached_, ErrorKind::kState, "spectral: backward without forward");
    cached_ = false;
    const std::int64_t f = n_ / 2 + 1;

    TensorT<S> gpacked({f, 2 * c_});
    std::vector<S> col(static_cast<std::size_t>(n_));
    for (std::int64_t c = 0; c < c_; ++c) {
      for (std::int64_t t = 0; t < n_; ++t) col[static_cast<std::size_t>(t)] = g(t, c);
      ComplexSeqT<S> gs = irfft_adjoint<S>(std::span<const S>(col));
      for (std::int64_t q = 0; q < f; ++q) {
        gpacked(q, c) = gs.re[static_cast<std::size_t>(q)];
        gpacked(q, c_ + c) = gs.im[static_cast<std::size_t>(q)];
      }
    }

    TensorT<S> gp = conv_.backward(bn_.backward(relu_.backward(gpacked)));

    TensorT<S> gx(g.shape);
    ComplexSeqT<S> gs(static_cast<std::size_t>(f));
    for (std::int64_t c = 0; c < c_; ++c) {
      for (std::int64_t q = 0; q < f; ++q) {
        gs.re[static_cast<std::size_t>(q)] = gp(q, c);
        gs.im[static_cast<std::size_t>(q)] = gp(q, c_ + c);
      }
      std::vector<S> gt = rfft_adjoint<S>(gs, static_cast<std::size_t>(n_));
      for (std::int64_t t = 0; t < n_; ++t) gx(t, c) = gt[static_cast<std::size_t>(t)] + g(t, c);
    }
    return gx;
  }

  void collect_params(const std::string& p,
                      std::vector<ParamRefT<S>>& out) override {
    conv_.collect_params(p + ".conv", out);
    bn_.collect_params(p + ".bn", out);
  }

  void collect_buffers(const std::string& p,
                       std::vector<ParamRefT<S>>& out) override {
    bn_.collect_buffers(p + ".bn", out);
  }

  void init(std::mt19937_64& g) override {
    conv_.init(g);
    bn_.init(g);
  }

 private:
  std::int64_t c_;
  Conv1DT<S> conv_;
  BatchNorm1DT<S> bn_;
  ReLUT<S> relu_;
  std::int64_t n_ = 0;
  bool cached_ = false;
};

// ---------------------------------------------------------------------------
// Conv3D over a {T, H, W, Cin} cube. Weight layout {Cout, Cin, Kt, Kh, Kw}.
// Time is zero-padded to preserve length (stride 1); space is valid.

template <class S>
class Conv3DT final : public LayerT<S> {
 public:
  Conv3DT(std::int64_t cin, std::int64_t cout,
          std::int64_t kt, std::int64_t kh, std::int64_t kw,
          std::int64_t sh, std::int64_t sw)
      : cin_(cin), cout_(cout), kt_(kt), kh_(kh), kw_(kw), sh_(sh), sw_(sw),
        weight_({cout, cin, kt, kh, kw}), bias_({cout}),
        gweight_({cout, cin, kt, kh, kw}), gbias_({cout}) {
    require(cin >= 1 && cout >= 1 && kt >= 1 && kh >= 1 && kw >= 1 &&
                sh >= 1 && sw >= 1,
            ErrorKind::kConfig, "conv3d: dims and strides must be positive");
  }

  Shape out_shape(const Shape& in, std::int64_t* macs) const override {
    require(in.size() == 4 && in[3] == cin_, ErrorKind::kShape,
            "conv3d: expected {T,H,W," + std::to_string(cin_) + "}, got " +
                shape_str(in));
    require(in[1] >= kh_ && in[2] >= kw_, ErrorKind::kTooShort,
            "conv3d: spatial extent smaller than kernel");
    const std::int64_t tout = in[0];
    const std::int64_t hout = (in[1] - kh_) / sh_ + 1;
    const std::int64_t wout = (in[2] - kw_) / sw_ + 1;
    if (macs) *macs += tout * hout * wout * cout_ * cin_ * kt_ * kh_ * kw_;
    return {tout, hout, wout, cout_};
  }

  TensorT<S> forward(const TensorT<S>& x, bool) override {
    const Shape os = out_shape(x.shape, nullptr);
    x_ = x;
    cached_ = true;
    const std::int64_t t_in = x.shape[0];
    const std::int64_t pad_t = (kt_ - 1) / 2;
    TensorT<S> out(os);
    for (std::int64_t t = 0; t < os[0]; ++t)
      for (std::int64_t h = 0; h < os[1]; ++h)
        for (std::int64_t w = 0; w < os[2]; ++w)
          for (std::int64_t co = 0; co < cout_; ++co) {
            S acc = bias_(co);
            for (std::int64_t dt = 0; dt < kt_; ++dt) {
              const std::int64_t ti = t + dt - pad_t;
              if (ti < 0 || ti >= t_in) continue;
              for (std::int64_t dh = 0; dh < kh_; ++dh)
                for (std::int64_t dw = 0; dw < kw_; ++dw)
                  for (std::int64_t ci = 0; ci < cin_; ++ci)
                    acc += x(ti, h * sh_ + dh, w * sw_ + dw, ci) *
                           weight_(co, ci, dt, dh, dw);
            }
            out(t, h, w, co) = acc;
          }
    return out;
  }

  TensorT<S> backward(const TensorT<S>& g) override {
    require(cached_, ErrorKind::kState, "conv3d: backward without forward");
    cached_ = false;
    const std::int64_t t_in = x_.shape[0];
    const std::int64_t pad_t = (kt_ - 1) / 2;
    TensorT<S> gx(x_.shape);
    for (std::int64_t t = 0; t < g.shape[0]; ++t)
      for (std::int64_t h = 0; h < g.shape[1]; ++h)
        for (std::int64_t w = 0; w < g.shape[2]; ++w)
          for (std::int64_t co = 0; co < cout_; ++co) {
            const S go = g(t, h, w, co);
            gbias_(co) += go;
            for (std::int64_t dt = 0; dt < kt_; ++dt) {
              const std::int64_t ti = t + dt - pad_t;
              if (ti < 0 || ti >= t_in) continue;
              for (std::int64_t dh = 0; dh < kh_; ++dh)
                for (std::int64_t dw = 0; dw < kw_; ++dw)
                  for (std::int64_t ci = 0; ci < cin_; ++ci) {
                    gweight_(co, ci, dt, dh, dw) +=
                        go * x_(ti, h * sh_ + dh, w * sw_ + dw, ci);
                    gx(ti, h * sh_ + dh, w * sw_ + dw, ci) +=
                        go * weight_(co, ci, dt, dh, dw);
                  }
            }
          }
    return gx;
  }

  void collect_params(const std::string& p,
                      std::vector<ParamRefT<S>>& out) override {
    out.push_back({p + ".weight", &weight_, &gweight_});
    out.push_back({p + ".bias", &bias_, &gbias_});
  }

  void init(std::mt19937_64& g) override {
    const double bound =
        std::sqrt(6.0 / static_cast<double>(cin_ * kt_ * kh_ * kw_));
    for (auto& w : weight_.data)
      w = static_cast<S>(bound * rng::unit_symmetric(g));
    bias_.fill(S(0));
  }

 private:
  std::int64_t cin_, cout_, kt_, kh_, kw_, sh_, sw_;
  TensorT<S> weight_, bias_, gweight_, gbias_;
  TensorT<S> x_;
  bool cached_ = false;
};

// {T, H, W, C} -> {T, C} spatial average.
template <class S>
class SpatialMeanT final : public LayerT<S> {
 public:
  Shape out_shape(const Shape& in, std::int64_t*) const override {
    require(in.size() == 4, ErrorKind::kShape,
            "spatial mean: expected a rank-4 input, got " + shape_str(in));
    return {in[0], in[3]};
  }

  TensorT<S> forward(const TensorT<S>& x, bool) override {
    const Shape os = out_shape(x.shape, nullptr);
    h_ = x.shape[1];
    w_ = x.shape[2];
    cached_ = true;
    TensorT<S> out(os);
    const S inv = S(1) / static_cast<S>(h_ * w_);
    for (std::int64_t t = 0; t < os[0]; ++t)
      for (std::int64_t h = 0; h < h_; ++h)
        for (std::int64_t w = 0; w < w_; ++w)
          for (std::int64_t c = 0; c < os[1]; ++c)
            out(t, c) += x(t, h, w, c) * inv;
    return out;
  }

  TensorT<S> backward(const TensorT<S>& g) override {
    require(cached_, ErrorKind::kState, "spatial mean: backward without forward");
    cached_ = false;
    TensorT<S> gx({g.shape[0], h_, w_, g.shape[1]});
    const S inv = S(1) / static_cast<S>(h_ * w_);
    for (std::int64_t t = 0; t < g.shape[0]; ++t)
      for (std::int64_t h = 0; h < h_; ++h)
        for (std::int64_t w = 0; w < w_; ++w)
          for (std::int64_t c = 0; c < g.shape[1]; ++c)
            gx(t, h, w, c) = g(t, c) * inv;
    return gx;
  }

 private:
  std::int64_t h_ = 0, w_ = 0;
  bool cached_ = false;
};

template <class S>
class FlattenT final : public LayerT<S> {
 public:
  Shape out_shape(const Shape& in, std::int64_t*) const override {
    return {shape_numel(in)};
  }

  TensorT<S> forward(const TensorT<S>& x, bool) override {
    in_shape_ = x.shape;
    cached_ = true;
    return TensorT<S>({x.numel()}, x.data);
  }

  TensorT<S> backward(const TensorT<S>& g) override {
    require(cached_, ErrorKind::kState, "flatten: backward without forward");
    cached_ = false;
    return TensorT<S>(in_shape_, g.data);
  }

 private:
  Shape in_shape_;
  bool cached_ = false;
};

// ---------------------------------------------------------------------------
// An ordered stack of layers with named weights.

template <class S>
class ModelGraphT {
 public:
  std::string name;
  Shape input_shape;

  void add(std::string layer_name, std::unique_ptr<LayerT<S>> layer) {
    layers_.push_back({std::move(layer_name), std::move(layer)});
  }

  // Shape-chains the whole stack and checks weight-name uniqueness.
  void validate() {
    std::int64_t macs = 0;
    chain(&macs);
    std::map<std::string, int> seen;
    for (const auto& r : params()) ++seen[r.name];
    for (const auto& r : buffers()) ++seen[r.name];
    for (const auto& [n, cnt] : seen)
      require(cnt == 1, ErrorKind::kConfig, "duplicate weight name: " + n);
  }

  TensorT<S> forward(const TensorT<S>& x, bool train) {
    require(shape_eq(x.shape, input_shape), ErrorKind::kShape,
            "model " + name + ": expected input " + shape_str(input_shape) +
                ", got " + shape_str(x.shape));
    TensorT<S> h = x;
    for (auto& e : layers_) h = e.layer->forward(h, train);
    have_forward_ = true;
    return h;
  }

  TensorT<S> backward(const TensorT<S>& grad_out) {
    require(have_forward_, ErrorKind::kState,
            "model " + name + ": backward without a cached forward");
    have_forward_ = false;
    TensorT<S> g = grad_out;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
      g = it->layer->backward(g);
    return g;
  }

  std::vector<ParamRefT<S>> params() {
    std::vector<ParamRefT<S>> out;
    for (auto& e : layers_) e.layer->collect_params(e.name, out);
    return out;
  }

  std::vector<ParamRefT<S>> buffers() {
    std::vector<ParamRefT<S>> out;
    for (auto& e : layers_) e.layer->collect_buffers(e.name, out);
    return out;
  }

  void zero_grad() {
    for (auto& r : params()) r.grad->fill(S(0));
  }

  std::int64_t count_params() {
    std::int64_t n = 0;
    for (auto& r : params()) n += r.value->numel();
    return n;
  }

  std::int64_t count_macs() const {
    std::int64_t macs = 0;
    chain(&macs);
    return macs;
  }

  // 1 MAC = 2 FLOPs, convolutions only, averaged over the output frames.
  double flops_per_frame(double frames = 450.0) const {
    return 2.0 * static_cast<double>(count_macs()) / frames;
  }

  Shape output_shape() const { return chain(nullptr); }

  void init_params(std::uint64_t seed) {
    std::mt19937_64 g(seed);
    for (auto& e : layers_) e.layer->init(g);
    zero_grad();
    have_forward_ = false;
  }

 private:
  Shape chain(std::int64_t* macs) const {
    Shape s = input_shape;
    for (const auto& e : layers_) s = e.layer->out_shape(s, macs);
    return s;
  }

  struct Entry {
    std::string name;
    std::unique_ptr<LayerT<S>> layer;
  };
  std::vector<Entry> layers_;
  bool have_forward_ = false;
};

using ModelGraph = ModelGraphT<float>;

// ---------------------------------------------------------------------------
// Model assemblies. seq_len/channels are parameters so the same topology can
// be gradient-checked at a fraction of the size.

template <class S>
ModelGraphT<S> make_seq_rppg(std::int64_t seq_len = 1350,
                             std::int64_t channels = 64,
                             std::uint64_t seed = 42) {
  require(seq_len % 3 == 0 && seq_len >= 12, ErrorKind::kConfig,
          "seq_rppg: sequence length must be a positive multiple of 3");
  require(channels >= 2 && channels % 2 == 0, ErrorKind::kConfig,
          "seq_rppg: channel count must be even");
  const std::int64_t c = channels;
  ModelGraphT<S> m;
  m.name = "seq_rppg";
  m.input_shape = {seq_len, c};
  m.add("stem", std::make_unique<Conv1DT<S>>(c, c, 3, 3, Pad::kValid));
  m.add("spec1", std::make_unique<SpectralBlockT<S>>(c, 5));
  m.add("conv1", std::make_unique<Conv1DT<S>>(c, c, 10, 1, Pad::kSame));
  m.add("bn1", std::make_unique<BatchNorm1DT<S>>(c));
  m.add("relu1", std::make_unique<ReLUT<S>>());
  m.add("spec2", std::make_unique<SpectralBlockT<S>>(c, 3));
  m.add("conv2", std::make_unique<Conv1DT<S>>(c, c / 2, 5, 1, Pad::kSame));
  m.add("bn2", std::make_unique<BatchNorm1DT<S>>(c / 2));
  m.add("relu2", std::make_unique<ReLUT<S>>());
  m.add("head", std::make_unique<Conv1DT<S>>(c / 2, 1, 1, 1, Pad::kValid));
  m.add("flatten", std::make_unique<FlattenT<S>>());
  m.validate();
  m.init_params(seed);
  return m;
}

inline ModelGraph build_seq_rppg(std::uint64_t seed = 42) {
  return make_seq_rppg<float>(1350, 64, seed);
}

template <class S>
ModelGraphT<S> make_noobheart(std::int64_t frames = 450, std::int64_t side = 8,
                              std::uint64_t seed = 42) {
  ModelGraphT<S> m;
  m.name = "noobheart";
  m.input_shape = {frames, side, side, 3};
  m.add("conv1", std::make_unique<Conv3DT<S>>(3, 4, 3, 2, 2, 2, 2));
  m.add("relu1", std::make_unique<ReLUT<S>>());
  m.add("conv2", std::make_unique<Conv3DT<S>>(4, 4, 3, 2, 2, 2, 2));
  m.add("relu2", std::make_unique<ReLUT<S>>());
  m.add("pool", std::make_unique<SpatialMeanT<S>>());
  m.add("head", std::make_unique<Conv1DT<S>>(4, 1, 1, 1, Pad::kValid));
  m.add("flatten", std::make_unique<FlattenT<S>>());
  m.validate();
  m.init_params(seed);
  return m;
}

inline ModelGraph build_noobheart(std::uint64_t seed = 42) {
  return make_noobheart<float>(450, 8, seed);
}

inline ModelGraph build_model(const std::string& model_name,
                              std::uint64_t seed = 42) {
  if (model_name == "seq_rppg") return build_seq_rppg(seed);
  if (model_name == "noobheart") return build_noobheart(seed);
  fail(ErrorKind::kConfig, "unknown model: " + model_name);
}

// ---------------------------------------------------------------------------
// {T, H, W, 3} video -> {3T, H*W} sequence: row 3t+c holds color c of frame
// t, column W*i+j holds pixel (i,j). A stride-3 conv therefore consumes one
// RGB triplet per step.

template <class S>
TensorT<S> reshape_video_to_sequence(const TensorT<S>& x) {
  require(x.rank() == 4 && x.shape[3] == 3, ErrorKind::kShape,
          "expected a {T,H,W,3} video tensor, got " + shape_str(x.shape));
  const std::int64_t t_n = x.shape[0], h = x.shape[1], w = x.shape[2];
  TensorT<S> seq({3 * t_n, h * w});
  for (std::int64_t t = 0; t < t_n; ++t)
    for (std::int64_t i = 0; i < h; ++i)
      for (std::int64_t j = 0; j < w; ++j)
        for (std::int64_t c = 0; c < 3; ++c)
          seq(3 * t + c, w * i + j) = x(t, i, j, c);
  return seq;
}

template <class S>
TensorT<S> reshape_sequence_to_video(const TensorT<S>& seq, std::int64_t h,
                                     std::int64_t w) {
  require(seq.rank() == 2 && seq.shape[0] % 3 == 0 && seq.shape[1] == h * w,
          ErrorKind::kShape, "sequence shape does not match the video layout");
  const std::int64_t t_n = seq.shape[0] / 3;
  TensorT<S> x({t_n, h, w, 3});
  for (std::int64_t t = 0; t < t_n; ++t)
    for (std::int64_t i = 0; i < h; ++i)
      for (std::int64_t j = 0; j < w; ++j)
        for (std::int64_t c = 0; c < 3; ++c)
          x(t, i, j, c) = seq(3 * t + c, w * i + j);
  return x;
}

// ---------------------------------------------------------------------------
// Losses on a rank-1 prediction vs. a rank-1 label.

template <class S>
struct LossValueT {
  S value;
  TensorT<S> grad;  // d value / d prediction
};

namespace detail {
template <class S>
void check_loss_args(const TensorT<S>& pred, const TensorT<S>& label) {
  require(pred.rank() == 1 && label.rank() == 1, ErrorKind::kShape,
          "loss expects rank-1 tensors");
  require(pred.shape[0] == label.shape[0], ErrorKind::kShape,
          "prediction/label length mismatch: " + shape_str(pred.shape) +
              " vs " + shape_str(label.shape));
  require(pred.shape[0] >= 2, ErrorKind::kTooShort,
          "loss needs at least 2 samples");
}
}  // namespace detail

// Mean squared error between the standardized prediction and the
// standardized label. The tiny variance floor keeps the gradient finite for
// a constant prediction (e.g. freshly initialized heads).
template <class S>
LossValueT<S> mse_standardized_loss(const TensorT<S>& pred,
                                    const TensorT<S>& label) {
  detail::check_loss_args(pred, label);
  const std::int64_t n = pred.shape[0];
  const S inv_n = S(1) / static_cast<S>(n);
  constexpr S kVarFloor = S(1e-12);

  auto p = pred.vec().array();
  auto y = label.vec().array();
  const S mp = p.mean(), my = y.mean();
  const S sp = std::sqrt((p - mp).square().mean() + kVarFloor);
  const S sy = std::sqrt((y - my).square().mean() + kVarFloor);

  Eigen::Array<S, Eigen::Dynamic, 1> ph = (p - mp) / sp;
  Eigen::Array<S, Eigen::Dynamic, 1> yh = (y - my) / sy;
  Eigen::Array<S, Eigen::Dynamic, 1> diff = ph - yh;

  LossValueT<S> out;
  out.value = diff.square().mean();
  // chain through the standardization: both the mean shift and the sigma
  // scaling depend on every coordinate
  Eigen::Array<S, Eigen::Dynamic, 1> g = S(2) * diff * inv_n;
  const S gm = g.mean();
  const S gph = (g * ph).mean();
  out.grad = TensorT<S>({n});
  out.grad.vec().array() = (g - gm - ph * gph) / sp;
  return out;
}

template <class S>
LossValueT<S> neg_pearson_loss(const TensorT<S>& pred,
                               const TensorT<S>& label) {
  detail::check_loss_args(pred, label);
  const std::int64_t n = pred.shape[0];
  auto p = pred.vec().array();
  auto y = label.vec().array();
  Eigen::Array<S, Eigen::Dynamic, 1> pc = p - p.mean();
  Eigen::Array<S, Eigen::Dynamic, 1> yc = y - y.mean();
  const S b = pc.square().sum();
  const S c = yc.square().sum();
  require(b > S(1e-20) && c > S(1e-20), ErrorKind::kDegenerateVariance,
          "neg-pearson loss is undefined for a constant signal");
  const S a = (pc * yc).sum();
  const S denom = std::sqrt(b * c);

  LossValueT<S> out;
  out.value = S(1) - a / denom;
  out.grad = TensorT<S>({n});
  out.grad.vec().array() = (pc * (a / b) - yc) / denom;
  return out;
}

// ---------------------------------------------------------------------------

template <class S>
class AdamT {
 public:
  explicit AdamT(S lr, S beta1 = S(0.9), S beta2 = S(0.999), S eps = S(1e-8))
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    require(lr >= S(0), ErrorKind::kConfig, "adam: lr must be >= 0");
  }

  void step(const std::vector<ParamRefT<S>>& params) {
    if (m_.empty()) {
      for (const auto& r : params) {
        m_.emplace_back(r.value->shape);
        v_.emplace_back(r.value->shape);
      }
    }
    require(m_.size() == params.size(), ErrorKind::kState,
            "adam: parameter set changed between steps");
    ++t_;
    const S bc1 = S(1) - static_cast<S>(std::pow(beta1_, t_));
    const S bc2 = S(1) - static_cast<S>(std::pow(beta2_, t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto g = params[i].grad->vec().array();
      auto m = m_[i].vec().array();
      auto v = v_[i].vec().array();
      m = beta1_ * m + (S(1) - beta1_) * g;
      v = beta2_ * v + (S(1) - beta2_) * g.square();
      params[i].value->vec().array() -=
          lr_ * (m / bc1) / ((v / bc2).sqrt() + eps_);
    }
  }

 private:
  S lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::vector<TensorT<S>> m_, v_;
};

// ---------------------------------------------------------------------------

struct TrainConfig {
  double lr = 1e-3;
  int batch_size = 8;
  int epochs = 1;
  std::uint64_t seed = 42;
  std::string loss = "mse";  // "mse" | "pearson"
};

struct TrainResult {
  std::vector<double> epoch_loss;  // mean window loss per epoch, in order
};

// Re-initializes the model from cfg.seed, then runs gradient-accumulated
// Adam over per-window passes. Deterministic for a fixed config.
TrainResult train(ModelGraph& model, const std::vector<WindowTensor>& windows,
                  const TrainConfig& cfg);

// PBWT weight container: parameters plus running buffers, named.
void save_weights(ModelGraph& model, const std::string& path);
std::map<std::string, Tensor> load_weights(const std::string& path);
void apply_weights(ModelGraph& model,
                   const std::map<std::string, Tensor>& weights);

}  // namespace pb::nn

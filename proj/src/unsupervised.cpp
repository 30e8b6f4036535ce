#include "pulsebench/unsupervised.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "pulsebench/error.hpp"
#include "pulsebench/fft.hpp"
#include "pulsebench/stats.hpp"

namespace pb {

RgbTrace mean_rgb(const ClipContainer& clip) {
  const std::size_t T = clip.frame_count();
  require(T > 0, ErrorKind::kEmptyInput, "mean_rgb: clip has no frames");
  const std::size_t px = static_cast<std::size_t>(clip.width) * clip.height;
  RgbTrace tr;
  tr.fs = clip.nominal_fps;
  tr.r.resize(T);
  tr.g.resize(T);
  tr.b.resize(T);
  for (std::size_t t = 0; t < T; ++t) {
    const uint8_t* f = clip.frame(t);
    double acc[3] = {0, 0, 0};
    for (std::size_t p = 0; p < px; ++p) {
      acc[0] += f[3 * p];
      acc[1] += f[3 * p + 1];
      acc[2] += f[3 * p + 2];
    }
    tr.r[t] = static_cast<float>(acc[0] / px);
    tr.g[t] = static_cast<float>(acc[1] / px);
    tr.b[t] = static_cast<float>(acc[2] / px);
  }
  return tr;
}

namespace {

void check_trace(const RgbTrace& tr, const char* who) {
  require(tr.fs > 0.0, ErrorKind::kInvalidArgument,
          std::string(who) + ": fs must be positive");
  require(tr.r.size() == tr.g.size() && tr.g.size() == tr.b.size(),
          ErrorKind::kInvalidLength, std::string(who) + ": channel length mismatch");
  require(tr.r.size() >= 2, ErrorKind::kTooShort,
          std::string(who) + ": trace too short");
}

void remove_mean(std::vector<float>& x) {
  const double m = mean_of(std::span<const float>(x));
  for (auto& v : x) v = static_cast<float>(v - m);
}

}  // namespace

PulseSignal green(const RgbTrace& trace) {
  check_trace(trace, "green");
  PulseSignal out = detrend({trace.g, trace.fs});
  remove_mean(out.samples);
  return out;
}

PulseSignal chrom(const RgbTrace& trace, double win_seconds) {
  check_trace(trace, "chrom");
  const int64_t T = static_cast<int64_t>(trace.g.size());
  int64_t w = std::llround(trace.fs * win_seconds);
  w += w & 1;  // even length so 50% Hann overlap-add sums to unity
  require(w >= 4 && w <= T, ErrorKind::kTooShort, "chrom: trace shorter than window");

  std::vector<double> hann(static_cast<std::size_t>(w));
  for (int64_t i = 0; i < w; ++i)
    hann[static_cast<std::size_t>(i)] =
        0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                              static_cast<double>(w)));

  std::vector<double> out(static_cast<std::size_t>(T), 0.0);
  std::vector<double> xs(static_cast<std::size_t>(w)), ys(static_cast<std::size_t>(w));
  for (int64_t start = 0; start + w <= T; start += w / 2) {
    double mr = 0, mg = 0, mb = 0;
    for (int64_t i = 0; i < w; ++i) {
      mr += trace.r[static_cast<std::size_t>(start + i)];
      mg += trace.g[static_cast<std::size_t>(start + i)];
      mb += trace.b[static_cast<std::size_t>(start + i)];
    }
    mr /= w; mg /= w; mb /= w;
    if (mr <= 0 || mg <= 0 || mb <= 0) continue;

    double sx = 0, sy = 0, sxx = 0, syy = 0;
    for (int64_t i = 0; i < w; ++i) {
      const double rn = trace.r[static_cast<std::size_t>(start + i)] / mr;
      const double gn = trace.g[static_cast<std::size_t>(start + i)] / mg;
      const double bn = trace.b[static_cast<std::size_t>(start + i)] / mb;
      const double X = 3.0 * rn - 2.0 * gn;
      const double Y = 1.5 * rn + gn - 1.5 * bn;
      xs[static_cast<std::size_t>(i)] = X;
      ys[static_cast<std::size_t>(i)] = Y;
      sx += X; sy += Y; sxx += X * X; syy += Y * Y;
    }
    const double n = static_cast<double>(w);
    const double sig_x = std::sqrt(std::max(0.0, sxx / n - (sx / n) * (sx / n)));
    const double sig_y = std::sqrt(std::max(0.0, syy / n - (sy / n) * (sy / n)));
    if (sig_y < 1e-12) continue;  // degenerate window contributes zeros

    const double alpha = sig_x / sig_y;
    double ms = 0;
    for (int64_t i = 0; i < w; ++i)
      ms += xs[static_cast<std::size_t>(i)] - alpha * ys[static_cast<std::size_t>(i)];
    ms /= n;
    for (int64_t i = 0; i < w; ++i) {
      const double s = xs[static_cast<std::size_t>(i)] -
                       alpha * ys[static_cast<std::size_t>(i)] - ms;
      out[static_cast<std::size_t>(start + i)] += hann[static_cast<std::size_t>(i)] * s;
    }
  }

  PulseSignal result{std::vector<float>(out.begin(), out.end()), trace.fs};
  remove_mean(result.samples);
  return result;
}

PulseSignal pos(const RgbTrace& trace, double win_seconds) {
  check_trace(trace, "pos");
  const int64_t T = static_cast<int64_t>(trace.g.size());
  const int64_t w = std::max<int64_t>(2, std::llround(trace.fs * win_seconds));
  require(w <= T, ErrorKind::kTooShort, "pos: trace shorter than window");

  std::vector<double> out(static_cast<std::size_t>(T), 0.0);
  std::vector<double> s1(static_cast<std::size_t>(w)), s2(static_cast<std::size_t>(w));
  for (int64_t start = 0; start + w <= T; ++start) {
    double mr = 0, mg = 0, mb = 0;
    for (int64_t i = 0; i < w; ++i) {
      mr += trace.r[static_cast<std::size_t>(start + i)];
      mg += trace.g[static_cast<std::size_t>(start + i)];
      mb += trace.b[static_cast<std::size_t>(start + i)];
    }
    mr /= w; mg /= w; mb /= w;
    if (mr <= 0 || mg <= 0 || mb <= 0) continue;

    double a1 = 0, a2 = 0, q1 = 0, q2 = 0;
    for (int64_t i = 0; i < w; ++i) {
      const double rn = trace.r[static_cast<std::size_t>(start + i)] / mr;
      const double gn = trace.g[static_cast<std::size_t>(start + i)] / mg;
      const double bn = trace.b[static_cast<std::size_t>(start + i)] / mb;
      const double v1 = gn - bn;
      const double v2 = gn + bn - 2.0 * rn;
      s1[static_cast<std::size_t>(i)] = v1;
      s2[static_cast<std::size_t>(i)] = v2;
      a1 += v1; a2 += v2; q1 += v1 * v1; q2 += v2 * v2;
    }
    const double n = static_cast<double>(w);
    const double sig1 = std::sqrt(std::max(0.0, q1 / n - (a1 / n) * (a1 / n)));
    const double sig2 = std::sqrt(std::max(0.0, q2 / n - (a2 / n) * (a2 / n)));
    const double alpha = sig2 < 1e-12 ? 0.0 : sig1 / sig2;

    double mh = 0;
    for (int64_t i = 0; i < w; ++i)
      mh += s1[static_cast<std::size_t>(i)] + alpha * s2[static_cast<std::size_t>(i)];
    mh /= n;
    for (int64_t i = 0; i < w; ++i) {
      const double h = s1[static_cast<std::size_t>(i)] +
                       alpha * s2[static_cast<std::size_t>(i)] - mh;
      out[static_cast<std::size_t>(start + i)] += h;
    }
  }

  PulseSignal result{std::vector<float>(out.begin(), out.end()), trace.fs};
  remove_mean(result.samples);
  return result;
}

namespace {

// Peak power over total power inside the heart-rate band.
double band_peak_ratio(std::span<const double> x, double fs, std::size_t* peak_bin) {
  auto spec = rfft(x);
  const std::size_t n = x.size();
  double total = 0.0, best = 0.0;
  std::size_t best_k = 0;
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double f = static_cast<double>(k) * fs / static_cast<double>(n);
    if (f < 0.66 || f > 3.0) continue;
    const double p = spec.re[k] * spec.re[k] + spec.im[k] * spec.im[k];
    total += p;
    if (p > best) {
      best = p;
      best_k = k;
    }
  }
  if (peak_bin) *peak_bin = best_k;
  return total > 0.0 ? best / total : 0.0;
}

Eigen::Matrix3d sym_inv_sqrt(const Eigen::Matrix3d& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(m);
  Eigen::Vector3d d = es.eigenvalues();
  for (int i = 0; i < 3; ++i) d[i] = 1.0 / std::sqrt(std::max(d[i], 1e-300));
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

IcaPulse ica_pulse(const RgbTrace& trace) {
  check_trace(trace, "ica_pulse");
  const int64_t T = static_cast<int64_t>(trace.g.size());
  const double n = static_cast<double>(T);

  Eigen::MatrixXd X(3, T);
  for (int64_t t = 0; t < T; ++t) {
    X(0, t) = trace.r[static_cast<std::size_t>(t)];
    X(1, t) = trace.g[static_cast<std::size_t>(t)];
    X(2, t) = trace.b[static_cast<std::size_t>(t)];
  }
  const Eigen::Vector3d mean = X.rowwise().mean();
  X.colwise() -= mean;

  const Eigen::Matrix3d cov = X * X.transpose() / n;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  const Eigen::Vector3d evals = es.eigenvalues();
  require(evals(0) > 1e-9 * evals(2) && evals(2) > 0.0, ErrorKind::kDegenerateInput,
          "ica_pulse: rank-deficient channel covariance");

  Eigen::Vector3d inv_sqrt;
  for (int i = 0; i < 3; ++i) inv_sqrt[i] = 1.0 / std::sqrt(evals[i]);
  const Eigen::MatrixXd Z =
      inv_sqrt.asDiagonal() * es.eigenvectors().transpose() * X;

  // Fixed seeded orthonormal start so results are reproducible.
  std::mt19937_64 rng(0x5eedbeefcafe01ull);
  std::normal_distribution<double> dist;
  Eigen::Matrix3d W;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) W(i, j) = dist(rng);
  W = Eigen::HouseholderQR<Eigen::Matrix3d>(W).householderQ();

  constexpr int kMaxIter = 200;
  constexpr double kTol = 1e-6;
  bool converged = false;
  int iter = 0;
  for (; iter < kMaxIter; ++iter) {
    const Eigen::MatrixXd Y = W * Z;              // 3 x T projections
    const Eigen::MatrixXd G = Y.array().tanh();   // contrast
    Eigen::Matrix3d Wn;
    for (int i = 0; i < 3; ++i) {
      const double gp_mean = (1.0 - G.row(i).array().square()).mean();
      Wn.row(i) = (Z * G.row(i).transpose() / n).transpose() - gp_mean * W.row(i);
    }
    Wn = sym_inv_sqrt(Wn * Wn.transpose()) * Wn;
    double delta = 0.0;
    for (int i = 0; i < 3; ++i)
      delta = std::max(delta, 1.0 - std::abs(Wn.row(i).dot(W.row(i))));
    W = Wn;
    if (delta < kTol) {
      converged = true;
      ++iter;
      break;
    }
  }

  const Eigen::MatrixXd S = W * Z;
  double best_ratio = -1.0;
  int best_row = 0;
  std::size_t best_bin = 0;
  std::vector<double> comp(static_cast<std::size_t>(T));
  for (int i = 0; i < 3; ++i) {
    for (int64_t t = 0; t < T; ++t) comp[static_cast<std::size_t>(t)] = S(i, t);
    std::size_t bin = 0;
    const double ratio = band_peak_ratio(comp, trace.fs, &bin);
    if (ratio > best_ratio) {
      best_ratio = ratio;
      best_row = i;
      best_bin = bin;
    }
  }

  for (int64_t t = 0; t < T; ++t)
    comp[static_cast<std::size_t>(t)] = S(best_row, t);

  // Align sign with the green channel via the cross-spectrum at the peak bin.
  std::vector<double> gc(static_cast<std::size_t>(T));
  const double gmean = mean_of(std::span<const float>(trace.g));
  for (int64_t t = 0; t < T; ++t)
    gc[static_cast<std::size_t>(t)] = trace.g[static_cast<std::size_t>(t)] - gmean;
  const auto sf = rfft(comp);
  const auto gf = rfft(gc);
  const double cross = sf.re[best_bin] * gf.re[best_bin] +
                       sf.im[best_bin] * gf.im[best_bin];
  const double sign = cross < 0.0 ? -1.0 : 1.0;

  IcaPulse out;
  out.converged = converged;
  out.iterations = iter;
  out.pulse.fs = trace.fs;
  out.pulse.samples.resize(static_cast<std::size_t>(T));
  for (int64_t t = 0; t < T; ++t)
    out.pulse.samples[static_cast<std::size_t>(t)] =
        static_cast<float>(sign * comp[static_cast<std::size_t>(t)]);
  return out;
}

}  // namespace pb

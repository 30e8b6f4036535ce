#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "pulsebench/error.hpp"
#include "pulsebench/postprocess.hpp"
#include "pulsebench/stats.hpp"
#include "pulsebench/synth.hpp"
#include "pulsebench/unsupervised.hpp"

using namespace pb;

namespace {

RgbTrace make_trace(std::size_t n, double fs) {
  RgbTrace tr;
  tr.fs = fs;
  tr.r.assign(n, 0.0f);
  tr.g.assign(n, 0.0f);
  tr.b.assign(n, 0.0f);
  return tr;
}

RgbTrace synth_trace(const SynthConfig& cfg) {
  return mean_rgb(render_clip(cfg));
}

double method_hr(const PulseSignal& pulse) {
  return welch_hr(bandpass(pulse)).bpm;
}

}  // namespace

TEST_CASE("green on a sinusoidal channel is proportional to it") {
  auto tr = make_trace(600, 30.0);
  for (std::size_t i = 0; i < 600; ++i) {
    tr.r[i] = 100.0f;
    tr.b[i] = 80.0f;
    tr.g[i] = static_cast<float>(
        120.0 + 2.0 * std::sin(2.0 * std::numbers::pi * 1.3 * i / 30.0));
  }
  auto pulse = green(tr);
  std::vector<float> ref(600);
  for (std::size_t i = 0; i < 600; ++i)
    ref[i] = static_cast<float>(std::sin(2.0 * std::numbers::pi * 1.3 * i / 30.0));
  // compare away from the detrend edge windows
  std::vector<float> a(pulse.samples.begin() + 40, pulse.samples.end() - 40);
  std::vector<float> b(ref.begin() + 40, ref.end() - 40);
  CHECK(pearson(a, b) > 0.999);
}

TEST_CASE("green of a constant trace is all zeros") {
  auto tr = make_trace(300, 30.0);
  for (std::size_t i = 0; i < 300; ++i) {
    tr.r[i] = 90.0f;
    tr.g[i] = 120.0f;
    tr.b[i] = 70.0f;
  }
  for (float v : green(tr).samples) CHECK(v == doctest::Approx(0.0f).epsilon(1e-5));
}

TEST_CASE("chrom and pos cancel achromatic flicker") {
  auto tr = make_trace(600, 30.0);
  for (std::size_t i = 0; i < 600; ++i) {
    const float mult = static_cast<float>(
        100.0 * (1.0 + 0.1 * std::sin(2.0 * std::numbers::pi * 1.0 * i / 30.0)));
    tr.r[i] = mult;
    tr.g[i] = mult;
    tr.b[i] = mult;
  }
  for (float v : chrom(tr).samples) CHECK(std::abs(v) < 1e-5);
  for (float v : pos(tr).samples) CHECK(std::abs(v) < 1e-5);
}

TEST_CASE("chrom and pos map constant traces to zeros") {
  auto tr = make_trace(300, 30.0);
  for (std::size_t i = 0; i < 300; ++i) {
    tr.r[i] = 110.0f;
    tr.g[i] = 95.0f;
    tr.b[i] = 88.0f;
  }
  for (float v : chrom(tr).samples) CHECK(std::abs(v) < 1e-6);
  for (float v : pos(tr).samples) CHECK(std::abs(v) < 1e-6);
}

TEST_CASE("all methods are scale invariant up to global gain") {
  SynthConfig cfg;
  cfg.duration_s = 20.0;
  cfg.hr_trace = {{0.0, 80.0}};
  cfg.noise_std = 0.5;
  auto tr = synth_trace(cfg);
  RgbTrace scaled = tr;
  for (auto& v : scaled.r) v *= 2.0f;
  for (auto& v : scaled.g) v *= 2.0f;
  for (auto& v : scaled.b) v *= 2.0f;

  auto check_proportional = [](const PulseSignal& a, const PulseSignal& b) {
    REQUIRE(a.samples.size() == b.samples.size());
    CHECK(std::abs(pearson(a.samples, b.samples)) > 0.9999);
  };
  check_proportional(green(tr), green(scaled));
  check_proportional(chrom(tr), chrom(scaled));
  check_proportional(pos(tr), pos(scaled));
}

TEST_CASE("synthetic clips at 66, 72, 84 bpm are recovered by each method") {
  struct Case {
    double bpm;
  };
  for (double bpm : {66.0, 72.0, 84.0}) {
    SynthConfig cfg;
    cfg.duration_s = 30.0;
    cfg.hr_trace = {{0.0, bpm}};
    cfg.noise_std = 0.5;
    cfg.drift_amp = bpm == 72.0 ? 4.0 : 0.0;  // drifted variant for chrom
    auto tr = synth_trace(cfg);
    CAPTURE(bpm);
    CHECK(std::abs(method_hr(green(tr)) - bpm) < 1.0);
    CHECK(std::abs(method_hr(chrom(tr)) - bpm) < 1.0);
    CHECK(std::abs(method_hr(pos(tr)) - bpm) < 1.0);
    auto ica = ica_pulse(tr);
    CHECK(std::abs(method_hr(ica.pulse) - bpm) < 2.0);
  }
}

TEST_CASE("pos tracks a 60 to 90 bpm sweep within 2 bpm") {
  SynthConfig cfg;
  cfg.duration_s = 60.0;
  cfg.hr_trace = {{0.0, 60.0}, {60.0, 90.0}};
  cfg.noise_std = 0.5;
  auto clip = render_clip(cfg);
  auto pulse = bandpass(pos(mean_rgb(clip)));
  auto gt = PulseSignal{align_bvp_to_frames(clip), clip.nominal_fps};

  const std::size_t win = 900, stride = 300;
  double mae = 0.0;
  int count = 0;
  for (std::size_t s = 0; s + win <= pulse.samples.size(); s += stride) {
    PulseSignal pw{{pulse.samples.begin() + s, pulse.samples.begin() + s + win}, 30.0};
    PulseSignal gw{{gt.samples.begin() + s, gt.samples.begin() + s + win}, 30.0};
    mae += std::abs(welch_hr(pw).bpm - welch_hr(gw).bpm);
    ++count;
  }
  mae /= count;
  CHECK(mae < 2.0);
}

TEST_CASE("ica recovers a planted source from a known mixing matrix") {
  const std::size_t n = 900;
  const double fs = 30.0;
  std::mt19937 rng(21);
  // sub-Gaussian distractors keep all three components identifiable
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> pulse(n), noise1(n), noise2(n);
  for (std::size_t i = 0; i < n; ++i) {
    pulse[i] = std::sin(2.0 * std::numbers::pi * 1.25 * i / fs);
    noise1[i] = 0.8 * dist(rng);
    noise2[i] = 0.8 * dist(rng);
  }
  // rows: contributions of (pulse, noise1, noise2) to r, g, b
  const double M[3][3] = {{0.4, 1.0, 0.2}, {1.0, 0.3, 0.5}, {0.6, 0.4, 1.0}};
  auto tr = make_trace(n, fs);
  for (std::size_t i = 0; i < n; ++i) {
    tr.r[i] = static_cast<float>(100 + M[0][0] * pulse[i] + M[0][1] * noise1[i] + M[0][2] * noise2[i]);
    tr.g[i] = static_cast<float>(100 + M[1][0] * pulse[i] + M[1][1] * noise1[i] + M[1][2] * noise2[i]);
    tr.b[i] = static_cast<float>(100 + M[2][0] * pulse[i] + M[2][1] * noise1[i] + M[2][2] * noise2[i]);
  }
  auto out = ica_pulse(tr);
  CHECK(out.converged);
  std::vector<float> src(pulse.begin(), pulse.end());
  CHECK(std::abs(pearson(out.pulse.samples, src)) > 0.99);
}

TEST_CASE("ica flags non-convergence but still returns a usable component") {
  // a pair of Gaussian sources spans an unidentifiable subspace; the pulse
  // component must come out anyway, with the warning flag set
  const std::size_t n = 900;
  const double fs = 30.0;
  std::mt19937 rng(21);
  std::normal_distribution<double> dist;
  auto tr = make_trace(n, fs);
  for (std::size_t i = 0; i < n; ++i) {
    const double p = std::sin(2.0 * std::numbers::pi * 1.25 * i / fs);
    const double a = 0.8 * dist(rng), b = 0.8 * dist(rng);
    tr.r[i] = static_cast<float>(100 + 0.4 * p + 1.0 * a + 0.2 * b);
    tr.g[i] = static_cast<float>(100 + 1.0 * p + 0.3 * a + 0.5 * b);
    tr.b[i] = static_cast<float>(100 + 0.6 * p + 0.4 * a + 1.0 * b);
  }
  auto out = ica_pulse(tr);
  CHECK_FALSE(out.converged);
  CHECK(out.iterations == 200);
  std::vector<float> src(n);
  for (std::size_t i = 0; i < n; ++i)
    src[i] = static_cast<float>(std::sin(2.0 * std::numbers::pi * 1.25 * i / fs));
  CHECK(std::abs(pearson(out.pulse.samples, src)) > 0.99);
}

TEST_CASE("ica selected spectrum is invariant to channel permutation") {
  SynthConfig cfg;
  cfg.duration_s = 20.0;
  cfg.hr_trace = {{0.0, 78.0}};
  cfg.noise_std = 1.0;
  auto tr = synth_trace(cfg);
  RgbTrace perm = tr;
  std::swap(perm.r, perm.b);
  std::swap(perm.g, perm.r);
  auto a = ica_pulse(tr);
  auto b = ica_pulse(perm);
  CHECK(std::abs(welch_hr(bandpass(a.pulse)).bpm -
                 welch_hr(bandpass(b.pulse)).bpm) < 0.2);
}

TEST_CASE("ica rejects rank-deficient input") {
  auto tr = make_trace(600, 30.0);
  for (std::size_t i = 0; i < 600; ++i) {
    const float v = static_cast<float>(
        100.0 + std::sin(2.0 * std::numbers::pi * 1.2 * i / 30.0));
    tr.r[i] = v;
    tr.g[i] = 2.0f * v;
    tr.b[i] = 3.0f * v;
  }
  try {
    (void)ica_pulse(tr);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kDegenerateInput);
  }
}

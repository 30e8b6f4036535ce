// Release gate: every shipped property of the engine, checked end to end
// against independent oracles. Each criterion prints one [PASS]/[FAIL] line;
// any failure makes the process exit nonzero. Run a subset with
//   pulsebench_acceptance --criteria 1,3,9
#include <pulsebench/clip.hpp>
#include <pulsebench/error.hpp>
#include <pulsebench/evalbench.hpp>
#include <pulsebench/fft.hpp>
#include <pulsebench/neural.hpp>
#include <pulsebench/postprocess.hpp>
#include <pulsebench/preprocess.hpp>
#include <pulsebench/rng.hpp>
#include <pulsebench/synth.hpp>
#include <pulsebench/unsupervised.hpp>

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace pb;
using namespace pb::nn;

namespace {

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void expect(bool ok, const std::string& msg) {
  if (!ok) throw Failure(msg);
}

template <class T>
std::string str(const T& v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

// Scratch tree shared by the whole process; cleaned up on exit.
const fs::path& work_dir() {
  static const fs::path p = [] {
    fs::path d = fs::temp_directory_path() /
                 ("pb_accept_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return p;
}

struct WorkCleaner {
  ~WorkCleaner() {
    std::error_code ec;
    fs::remove_all(work_dir(), ec);
  }
} g_cleaner;

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

template <class C>
bool bits_equal(const C& a, const C& b) {
  return a.size() == b.size() &&
         (a.size() == 0 ||
          std::memcmp(a.data(), b.data(), a.size() * sizeof(*a.data())) == 0);
}

// ---------------------------------------------------------------------------
// criterion 1: exact parameter count of the sequence model

void c1_param_count() {
  ModelGraph m = build_seq_rppg();
  const std::int64_t n = m.count_params();
  expect(n == 195713, "seq_rppg has " + str(n) + " params, expected 195713");
}

// ---------------------------------------------------------------------------
// criterion 2: analytic per-frame cost inside the published envelopes

void c2_flops() {
  const double seq = build_seq_rppg().flops_per_frame();
  expect(seq >= 0.24e6 && seq <= 0.28e6,
         "seq_rppg " + str(seq) + " FLOPs/frame outside [0.24M, 0.28M]");
  const double noob = build_noobheart().flops_per_frame();
  expect(noob <= 0.02e6, "noobheart " + str(noob) + " FLOPs/frame above 0.02M");
}

// ---------------------------------------------------------------------------
// criterion 3: the FFT against a direct O(n^2) DFT, plus round-trip identity

ComplexSeqT<double> naive_dft(const std::vector<double>& x) {
  const std::size_t n = x.size(), half = n / 2 + 1;
  ComplexSeqT<double> s(half);
  for (std::size_t k = 0; k < half; ++k) {
    double re = 0.0, im = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double a = -2.0 * std::numbers::pi * static_cast<double>(k) *
                       static_cast<double>(t) / static_cast<double>(n);
      re += x[t] * std::cos(a);
      im += x[t] * std::sin(a);
    }
    s.re[k] = re;
    s.im[k] = im;
  }
  return s;
}

void c3_fft() {
  std::mt19937_64 g(33001);
  auto check_n = [&](std::size_t n) {
    std::vector<double> x(n);
    for (auto& v : x) v = rng::unit_symmetric(g);
    const ComplexSeqT<double> fast = rfft(x);
    const ComplexSeqT<double> ref = naive_dft(x);
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < ref.re.size(); ++k) {
      const double dr = fast.re[k] - ref.re[k], di = fast.im[k] - ref.im[k];
      num += dr * dr + di * di;
      den += ref.re[k] * ref.re[k] + ref.im[k] * ref.im[k];
    }
    const double rel = std::sqrt(num / std::max(den, 1e-300));
    expect(rel < 1e-5, "n=" + str(n) + ": DFT mismatch, rel err " + str(rel));

    const std::vector<double> back = irfft(fast, n);
    double worst = 0.0, scale = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      worst = std::max(worst, std::abs(back[t] - x[t]));
      scale = std::max(scale, std::abs(x[t]));
    }
    expect(worst / std::max(scale, 1e-300) < 1e-9,
           "n=" + str(n) + ": round trip drifted by " + str(worst));
  };
  for (std::size_t n = 4; n <= 512; ++n) check_n(n);
  check_n(450);
}

// ---------------------------------------------------------------------------
// criterion 4: reverse-mode gradients vs central differences, per layer type
// and on a shrunken end-to-end sequence model

template <class S>
void fill_random(TensorT<S>& t, std::mt19937_64& g, double scale = 1.0) {
  for (auto& v : t.data) v = static_cast<S>(scale * rng::unit_symmetric(g));
}

// Loss r . f(x), probed on the input and every parameter tensor. Returns the
// worst relative error; structurally-zero gradients need the absolute floor.
double gradcheck(ModelGraphT<double>& m, const TensorT<double>& x,
                 std::uint64_t seed, int input_probes = 40,
                 int param_probes = 8) {
  std::mt19937_64 g(seed);
  TensorT<double> r(m.output_shape());
  fill_random(r, g);

  auto loss_at = [&](const TensorT<double>& xin) {
    TensorT<double> out = m.forward(xin, true);
    double l = 0.0;
    for (std::int64_t i = 0; i < out.numel(); ++i) l += r.data[i] * out.data[i];
    return l;
  };

  m.zero_grad();
  TensorT<double> pred = m.forward(x, true);
  double base = 0.0;
  for (std::int64_t i = 0; i < pred.numel(); ++i)
    base += r.data[i] * pred.data[i];
  expect(std::isfinite(base), "non-finite forward value");
  TensorT<double> gx = m.backward(r);

  const double h = 1e-6;
  double worst = 0.0;
  auto update = [&](double analytic, double fd) {
    const double err = std::abs(analytic - fd) /
                       std::max(1e-2, std::abs(analytic) + std::abs(fd));
    worst = std::max(worst, err);
  };

  TensorT<double> xp = x;
  for (int p = 0; p < input_probes; ++p) {
    const auto i = static_cast<std::size_t>(g() % xp.data.size());
    const double keep = xp.data[i];
    xp.data[i] = keep + h;
    const double lp = loss_at(xp);
    xp.data[i] = keep - h;
    const double lm = loss_at(xp);
    xp.data[i] = keep;
    update(gx.data[i], (lp - lm) / (2 * h));
  }
  for (auto& ref : m.params()) {
    const int probes = static_cast<int>(
        std::min<std::int64_t>(param_probes, ref.value->numel()));
    for (int p = 0; p < probes; ++p) {
      const auto i = static_cast<std::size_t>(g() % ref.value->data.size());
      const double keep = ref.value->data[i];
      ref.value->data[i] = keep + h;
      const double lp = loss_at(x);
      ref.value->data[i] = keep - h;
      const double lm = loss_at(x);
      ref.value->data[i] = keep;
      update(ref.grad->data[i], (lp - lm) / (2 * h));
    }
  }
  return worst;
}

ModelGraphT<double> single_layer(Shape in, std::unique_ptr<LayerT<double>> l,
                                 std::uint64_t seed) {
  ModelGraphT<double> m;
  m.name = "probe";
  m.input_shape = std::move(in);
  m.add("l", std::move(l));
  m.validate();
  m.init_params(seed);
  return m;
}

void c4_gradcheck() {
  auto run = [](const char* what, ModelGraphT<double>& m, Shape xs,
                std::uint64_t seed, double scale = 1.0, int ip = 40,
                int pp = 8) {
    std::mt19937_64 g(seed);
    TensorT<double> x(xs);
    fill_random(x, g, scale);
    const double worst = gradcheck(m, x, seed + 1, ip, pp);
    expect(worst < 1e-4,
           std::string(what) + ": rel err " + str(worst) + " >= 1e-4");
  };

  auto conv_s = single_layer(
      {11, 3}, std::make_unique<Conv1DT<double>>(3, 5, 4, 2, Pad::kValid), 31);
  run("conv1d valid/stride", conv_s, {11, 3}, 4101);

  auto conv_p = single_layer(
      {10, 3}, std::make_unique<Conv1DT<double>>(3, 2, 4, 1, Pad::kSame), 41);
  run("conv1d same pad", conv_p, {10, 3}, 4102);

  auto bn = single_layer({7, 4}, std::make_unique<BatchNorm1DT<double>>(4), 51);
  {
    auto refs = bn.params();
    std::mt19937_64 wg(52);
    fill_random(*refs[0].value, wg);
    fill_random(*refs[1].value, wg);
  }
  run("batchnorm", bn, {7, 4}, 4103, 2.0);

  auto c3d = single_layer(
      {6, 4, 4, 2}, std::make_unique<Conv3DT<double>>(2, 3, 3, 2, 2, 2, 2), 61);
  run("conv3d", c3d, {6, 4, 4, 2}, 4104);

  auto spec = single_layer(
      {16, 2}, std::make_unique<SpectralBlockT<double>>(2, 3), 71);
  run("spectral block", spec, {16, 2}, 4105, 1.0, 32, 12);

  ModelGraphT<double> stack;
  stack.name = "pool_probe";
  stack.input_shape = {8, 4, 4, 3};
  stack.add("c1", std::make_unique<Conv3DT<double>>(3, 4, 3, 2, 2, 2, 2));
  stack.add("r1", std::make_unique<ReLUT<double>>());
  stack.add("pool", std::make_unique<SpatialMeanT<double>>());
  stack.add("head", std::make_unique<Conv1DT<double>>(4, 1, 1, 1, Pad::kValid));
  stack.add("flat", std::make_unique<FlattenT<double>>());
  stack.validate();
  stack.init_params(81);
  run("relu/pool/flatten stack", stack, {8, 4, 4, 3}, 4106);

  auto full = make_seq_rppg<double>(48, 8, 91);
  run("shrunken seq model", full, {48, 8}, 4107, 1.0, 48, 6);
}

// ---------------------------------------------------------------------------
// criterion 5: handcrafted baselines on a clean corpus

const AlgorithmResult& algo_result(const BenchReport& r, const std::string& n) {
  for (const auto& a : r.algorithms)
    if (a.name == n) return a;
  throw Failure("algorithm " + n + " missing from report");
}

void c5_baselines() {
  const fs::path dir = work_dir() / "clean20";
  CorpusParams p;
  p.n = 20;
  p.seed = 501;
  gen_corpus(p, dir.string());

  BenchConfig cfg;
  cfg.algorithms = {"chrom", "pos", "ica"};
  cfg.clip_dir = dir.string();
  cfg.threads = 4;
  const BenchReport rep = run_benchmark(cfg);

  for (const char* name : {"chrom", "pos"}) {
    const auto& a = algo_result(rep, name);
    expect(a.metrics.mae < 1.0,
           std::string(name) + " MAE " + str(a.metrics.mae) + " >= 1 bpm");
    expect(a.metrics.pearson.has_value() && *a.metrics.pearson > 0.99,
           std::string(name) + " correlation below 0.99");
  }
  const auto& ica = algo_result(rep, "ica");
  expect(ica.metrics.mae < 2.0, "ica MAE " + str(ica.metrics.mae) + " >= 2 bpm");
}

// ---------------------------------------------------------------------------
// criteria 6 and 7: desk-scale training, aligned and with label offsets

// Noise sits where held-out clips are marginal: a time-shifted target keeps
// its spectrum, so offset damage only shows once attenuation costs peaks.
constexpr double kTrainNoise = 8.0;
constexpr double kTrainDrift = 4.0;

double train_and_eval(double offset_hi, const std::string& tag) {
  const fs::path train_dir = work_dir() / ("train_" + tag);
  const fs::path held_dir = work_dir() / "heldout20";

  CorpusParams tp;
  tp.n = 100;
  tp.seed = 601;
  tp.noise_std = kTrainNoise;
  tp.drift_amp = kTrainDrift;
  tp.offset_lo = 0.0;
  tp.offset_hi = offset_hi;
  gen_corpus(tp, train_dir.string());

  if (!fs::exists(held_dir / "manifest.json")) {
    CorpusParams hp = tp;
    hp.n = 20;
    hp.seed = 602;
    hp.offset_hi = 0.0;
    gen_corpus(hp, held_dir.string());
  }

  std::vector<WindowTensor> windows;
  std::vector<fs::path> paths;
  for (const auto& e : fs::directory_iterator(train_dir))
    if (e.path().extension() == ".pbvc") paths.push_back(e.path());
  std::sort(paths.begin(), paths.end());
  for (const auto& p : paths) {
    const ClipContainer clip = read_clip(p.string());
    const VideoCube cube = reduce_clip(clip, nullptr, 8, 8);
    const std::vector<float> labels = align_bvp_to_frames(clip);
    for (auto& w : make_windows(cube, labels, 450, 450))
      windows.push_back(std::move(w));
  }
  expect(windows.size() == 200,
         "expected 200 training windows, got " + str(windows.size()));

  ModelGraph model = build_seq_rppg(7);
  TrainConfig tc;
  tc.lr = 1e-3;
  tc.batch_size = 8;
  tc.epochs = 8;
  tc.seed = 7;
  const TrainResult res = train(model, windows, tc);
  expect(std::isfinite(res.epoch_loss.back()), "training loss diverged");

  const fs::path wpath = work_dir() / ("w_" + tag + ".pbwt");
  save_weights(model, wpath.string());

  BenchConfig cfg;
  cfg.algorithms = {"seq_rppg"};
  cfg.clip_dir = held_dir.string();
  cfg.weights = wpath.string();
  cfg.threads = 4;
  const BenchReport rep = run_benchmark(cfg);
  return algo_result(rep, "seq_rppg").metrics.mae;
}

std::optional<double> g_aligned_mae;

double aligned_mae() {
  if (!g_aligned_mae) g_aligned_mae = train_and_eval(0.0, "aligned");
  return *g_aligned_mae;
}

void c6_training() {
  const double mae = aligned_mae();
  expect(mae < 3.0, "held-out MAE " + str(mae) + " >= 3 bpm");
}

void c7_offset_sensitivity() {
  const double aligned = aligned_mae();
  const double shifted = train_and_eval(0.2, "offset");
  expect(shifted > aligned,
         "offset-trained MAE " + str(shifted) +
             " not above aligned MAE " + str(aligned));
}

// ---------------------------------------------------------------------------
// criterion 8: temporal smoothing must not improve POS accuracy

void c8_smoothing_damage() {
  std::vector<double> mae;
  for (std::int64_t k : {1, 3, 5, 9}) {
    const fs::path dir = work_dir() / ("smooth_" + std::to_string(k));
    CorpusParams p;  // noise high enough that attenuating the pulse costs bins
    p.n = 16;
    p.seed = 801;
    p.noise_std = 12.0;
    p.smooth_k = k;
    gen_corpus(p, dir.string());

    BenchConfig cfg;
    cfg.algorithms = {"pos"};
    cfg.clip_dir = dir.string();
    cfg.threads = 4;
    mae.push_back(algo_result(run_benchmark(cfg), "pos").metrics.mae);
  }
  for (std::size_t i = 1; i < mae.size(); ++i)
    expect(mae[i] >= mae[i - 1],
           "MAE fell from " + str(mae[i - 1]) + " to " + str(mae[i]) +
               " as smoothing grew");
  expect(mae.back() > mae.front(),
         "smoothing caused no damage at all (front " + str(mae.front()) +
             ", back " + str(mae.back()) + ")");
}

// ---------------------------------------------------------------------------
// criterion 9: spectral HR on pure tones

void c9_welch_precision() {
  for (double bpm : {45.0, 72.0, 150.0}) {
    PulseSignal sig;
    sig.fs = 30.0;
    sig.samples.resize(1800);
    for (std::size_t i = 0; i < sig.samples.size(); ++i)
      sig.samples[i] =
          std::sin(2.0 * std::numbers::pi * (bpm / 60.0) * (i / sig.fs));
    const double est = welch_hr(sig).bpm;
    expect(std::abs(est - bpm) <= 0.2,
           str(bpm) + " bpm tone estimated as " + str(est));
  }
}

// ---------------------------------------------------------------------------
// criterion 10: beat-interval statistics

void c10_sdnn() {
  SynthConfig sc;  // constant 72 bpm
  sc.seed = 1001;
  const ClipContainer clip = render_clip(sc);
  PulseSignal ref;  // the clip's contact-sensor channel, beat spacing exact
  ref.fs = sc.bvp_fs;
  ref.samples.assign(clip.bvp_vals.begin(), clip.bvp_vals.end());
  const auto peaks = detect_peaks(bandpass(ref));
  const double steady = sdnn_ms(peaks, ref.fs);
  expect(steady < 1.0,
         "constant-rate clip gave SDNN " + str(steady) + " ms >= 1 ms");

  // 800/1000 ms alternation at 30 Hz: population std of {800,1000,...} = 100
  const double alt = sdnn_ms({0, 24, 54, 78, 108}, 30.0);
  expect(std::abs(alt - 100.0) <= 1.0,
         "alternating intervals gave SDNN " + str(alt) + " ms, expected 100");
}

// ---------------------------------------------------------------------------
// criterion 11: benchmark reports are self-consistent and reproducible

void c11_harness() {
  const fs::path dir = work_dir() / "harness4";
  CorpusParams p;
  p.n = 4;
  p.seed = 1101;
  p.noise_std = 0.3;
  gen_corpus(p, dir.string());

  BenchConfig cfg;
  cfg.algorithms = {"green", "pos"};
  cfg.clip_dir = dir.string();
  cfg.sdnn = true;
  cfg.threads = 3;

  const BenchReport a = run_benchmark(cfg);
  const BenchReport b = run_benchmark(cfg);
  verify_report(a);
  verify_report(b);

  nlohmann::json ja = nlohmann::json::parse(report_to_json(a));
  nlohmann::json jb = nlohmann::json::parse(report_to_json(b));
  ja.erase("timestamp");
  jb.erase("timestamp");
  expect(ja.dump() == jb.dump(),
         "identical configs produced different reports");
}

// ---------------------------------------------------------------------------
// criterion 12: container and weight files survive round trips bit-exactly

void c12_round_trips() {
  SynthConfig sc;
  sc.duration_s = 8.0;
  sc.noise_std = 1.0;
  sc.drift_amp = 3.0;
  sc.motion_amp = 1.5;
  sc.specular_amp = 2.0;
  sc.offset_s = 0.125;
  sc.seed = 1201;
  const ClipContainer clip = render_clip(sc);

  const fs::path cp1 = work_dir() / "rt1.pbvc", cp2 = work_dir() / "rt2.pbvc";
  write_clip(clip, cp1.string());
  const ClipContainer back = read_clip(cp1.string());
  expect(back.width == clip.width && back.height == clip.height,
         "clip dims changed");
  expect(std::memcmp(&back.nominal_fps, &clip.nominal_fps, sizeof(float)) == 0,
         "nominal fps changed");
  expect(bits_equal(back.frame_ts, clip.frame_ts), "frame timestamps changed");
  expect(bits_equal(back.frames, clip.frames), "pixel data changed");
  expect(bits_equal(back.bvp_ts, clip.bvp_ts), "bvp timestamps changed");
  expect(bits_equal(back.bvp_vals, clip.bvp_vals), "bvp values changed");
  expect(back.meta == clip.meta, "meta changed");
  write_clip(back, cp2.string());
  expect(slurp(cp1) == slurp(cp2), "clip files differ after a round trip");

  ModelGraph m1 = build_seq_rppg(3);
  const fs::path wp1 = work_dir() / "rt1.pbwt", wp2 = work_dir() / "rt2.pbwt";
  save_weights(m1, wp1.string());
  const auto loaded = load_weights(wp1.string());
  for (auto& ref : m1.params()) {
    const auto it = loaded.find(ref.name);
    expect(it != loaded.end(), "tensor " + ref.name + " missing after reload");
    expect(bits_equal(it->second.data, ref.value->data),
           "tensor " + ref.name + " changed in flight");
  }
  ModelGraph m2 = build_seq_rppg(99);
  apply_weights(m2, loaded);
  save_weights(m2, wp2.string());
  expect(slurp(wp1) == slurp(wp2), "weight files differ after a round trip");
}

// ---------------------------------------------------------------------------

struct Criterion {
  int id;
  const char* name;
  void (*fn)();
};

const Criterion kCriteria[] = {
    {1, "sequence model parameter count", c1_param_count},
    {2, "per-frame FLOPs envelopes", c2_flops},
    {3, "FFT against a direct DFT", c3_fft},
    {4, "autodiff against finite differences", c4_gradcheck},
    {5, "handcrafted baselines on a clean corpus", c5_baselines},
    {6, "trained model held-out accuracy", c6_training},
    {7, "label-offset training penalty", c7_offset_sensitivity},
    {8, "smoothing damage is monotone", c8_smoothing_damage},
    {9, "spectral HR precision on pure tones", c9_welch_precision},
    {10, "beat-interval statistics", c10_sdnn},
    {11, "report determinism and self-consistency", c11_harness},
    {12, "bit-exact container round trips", c12_round_trips},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) {
    std::string arg = argv[i];
    std::string list;
    if (arg == "--criteria" && i + 1 < argc) {
      list = argv[++i];
    } else if (arg.rfind("--criteria=", 0) == 0) {
      list = arg.substr(11);
    } else {
      std::fprintf(stderr, "usage: %s [--criteria N,M,...]\n", argv[0]);
      return 2;
    }
    std::stringstream ss(list);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      const int id = std::atoi(tok.c_str());
      if (id < 1 || id > 12) {
        std::fprintf(stderr, "no criterion %s\n", tok.c_str());
        return 2;
      }
      selected.push_back(id);
    }
  }

  bool all_ok = true;
  for (const auto& c : kCriteria) {
    if (!selected.empty() &&
        std::find(selected.begin(), selected.end(), c.id) == selected.end())
      continue;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.fn();
      const double s = std::chrono::duration<double>(
                           std::chrono::steady_clock::now() - t0)
                           .count();
      std::printf("[PASS] criterion %d: %s (%.1f s)\n", c.id, c.name, s);
    } catch (const std::exception& e) {
      std::printf("[FAIL] criterion %d: %s — %s\n", c.id, c.name, e.what());
      all_ok = false;
    }
    std::fflush(stdout);
  }
  return all_ok ? 0 : 1;
}

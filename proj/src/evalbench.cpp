#include "pulsebench/evalbench.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <json.hpp>
#include <set>
#include <span>
#include <thread>

#include "pulsebench/clip.hpp"
#include "pulsebench/error.hpp"
#include "pulsebench/neural.hpp"
#include "pulsebench/preprocess.hpp"
#include "pulsebench/stats.hpp"
#include "pulsebench/unsupervised.hpp"
#include "pulsebench/version.hpp"

namespace pb {

namespace {

constexpr double kHrLo = 40.0;
constexpr double kHrHi = 180.0;

const std::set<std::string>& handcrafted_algos() {
  static const std::set<std::string> n = {"green", "chrom", "pos", "ica"};
  return n;
}

const std::set<std::string>& neural_algos() {
  static const std::set<std::string> n = {"seq_rppg", "noobheart"};
  return n;
}


double clamp_hr(double bpm, const char* flag, std::vector<std::string>* flags) {
  if (bpm < kHrLo || bpm > kHrHi) {
    flags->push_back(flag);
    return std::clamp(bpm, kHrLo, kHrHi);
  }
  return bpm;
}

PulseSignal slice(const PulseSignal& s, std::size_t from, std::size_t n) {
  return {std::vector<float>(s.samples.begin() + static_cast<std::ptrdiff_t>(from),
                             s.samples.begin() + static_cast<std::ptrdiff_t>(from + n)),
          s.fs};
}

}  // namespace

std::vector<WindowedEstimate> windowed_hr(const PulseSignal& pred,
                                          const PulseSignal& gt,
                                          double window_s, double stride_s) {
  require(pred.fs > 0.0 && pred.fs == gt.fs, ErrorKind::kInvalidArgument,
          "windowed_hr: signals must share a positive sample rate");
  require(pred.samples.size() == gt.samples.size(), ErrorKind::kInvalidLength,
          "windowed_hr: pred/gt length mismatch");
  require(window_s > 0.0 && stride_s > 0.0, ErrorKind::kInvalidArgument,
          "windowed_hr: window and stride must be positive");

  const auto n = static_cast<std::int64_t>(pred.samples.size());
  const std::int64_t win = std::llround(window_s * pred.fs);
  const std::int64_t hop = std::llround(stride_s * pred.fs);
  require(win >= 2 && hop >= 1, ErrorKind::kInvalidArgument,
          "windowed_hr: window and stride resolve to too few samples");

  std::vector<WindowedEstimate> out;
  auto emit = [&](std::int64_t t0, std::int64_t len, bool shortened) {
    WindowedEstimate e;
    e.start_s = static_cast<double>(t0) / pred.fs;
    e.end_s = static_cast<double>(t0 + len) / pred.fs;
    if (shortened) e.flags.emplace_back("short_window");
    const WelchHr hp = welch_hr(slice(pred, static_cast<std::size_t>(t0),
                                      static_cast<std::size_t>(len)));
    const WelchHr hg = welch_hr(slice(gt, static_cast<std::size_t>(t0),
                                      static_cast<std::size_t>(len)));
    e.hr_pred = clamp_hr(hp.bpm, "clamped_pred", &e.flags);
    e.hr_gt = clamp_hr(hg.bpm, "clamped_gt", &e.flags);
    if (hp.low_confidence) e.flags.emplace_back("low_confidence_pred");
    if (hg.low_confidence) e.flags.emplace_back("low_confidence_gt");
    out.push_back(std::move(e));
  };

  if (n < win) {
    emit(0, n, true);
    return out;
  }
  for (std::int64_t t0 = 0; t0 + win <= n; t0 += hop) emit(t0, win, false);
  return out;
}

HrMetrics hr_metrics(const std::vector<WindowedEstimate>& pairs) {
  require(!pairs.empty(), ErrorKind::kEmptyInput, "hr_metrics: no window pairs");
  double abs_sum = 0.0, sq_sum = 0.0;
  std::vector<double> p, g;
  p.reserve(pairs.size());
  g.reserve(pairs.size());
  for (const auto& e : pairs) {
    const double d = e.hr_pred - e.hr_gt;
    abs_sum += std::abs(d);
    sq_sum += d * d;
    p.push_back(e.hr_pred);
    g.push_back(e.hr_gt);
  }
  HrMetrics m;
  m.mae = abs_sum / static_cast<double>(pairs.size());
  m.rmse = std::sqrt(sq_sum / static_cast<double>(pairs.size()));
  if (pairs.size() >= 2) {
    try {
      m.pearson = pearson(std::span<const double>(p), std::span<const double>(g));
    } catch (const Error&) {
      m.pearson.reset();  // zero variance: correlation undefined
    }
  }
  return m;
}

namespace {

struct ClipTask {
  std::string id;
  std::string path;
};

struct AlgoOutput {
  std::vector<WindowedEstimate> windows;
  double sdnn_abs_err = 0.0;
};

struct ClipResult {
  std::vector<AlgoOutput> per_algo;  // aligned with cfg.algorithms
  bool failed = false;
  ErrorKind kind = ErrorKind::kState;
  std::string what;
};

// One BVP sample per frame, at the frame rate the traces use.
PulseSignal gt_signal(const ClipContainer& clip) {
  return {align_bvp_to_frames(clip), clip.nominal_fps};
}

// Eval-mode inference over consecutive 450-frame windows of the 8x8-reduced
// clip; trailing frames that do not fill a window are dropped.
PulseSignal neural_predict(nn::ModelGraph& model, const ClipContainer& clip) {
  const VideoCube cube = reduce_clip(clip, nullptr, 8, 8);
  const std::int64_t total = cube.shape[0];
  const std::int64_t win = 450;
  require(total >= win, ErrorKind::kTooShort,
          "neural inference needs at least 450 frames, clip has " +
              std::to_string(total));
  const std::int64_t fb = cube.shape[1] * cube.shape[2] * 3;

  std::vector<float> pred;
  pred.reserve(static_cast<std::size_t>(total));
  for (std::int64_t t0 = 0; t0 + win <= total; t0 += win) {
    VideoCube w({win, cube.shape[1], cube.shape[2], 3});
    std::copy_n(cube.data.begin() + t0 * fb, win * fb, w.data.begin());
    Tensor x = normalize_video(w);
    if (model.input_shape.size() == 2) x = nn::reshape_video_to_sequence(x);
    const Tensor y = model.forward(x, /*train=*/false);
    pred.insert(pred.end(), y.data.begin(), y.data.end());
  }
  return {std::move(pred), clip.nominal_fps};
}

}  // namespace

const std::vector<std::string>& known_algorithms() {
  static const std::vector<std::string> all = [] {
    std::vector<std::string> v(handcrafted_algos().begin(),
                               handcrafted_algos().end());
    v.insert(v.end(), neural_algos().begin(), neural_algos().end());
    std::sort(v.begin(), v.end());
    return v;
  }();
  return all;
}

void require_known_algorithm(const std::string& name) {
  if (handcrafted_algos().count(name) || neural_algos().count(name)) return;
  std::string valid;
  for (const auto& a : known_algorithms()) {
    if (!valid.empty()) valid += ", ";
    valid += a;
  }
  fail(ErrorKind::kConfig,
       "unknown algorithm '" + name + "' (valid: " + valid + ")");
}

PulseSignal predict_clip(const std::string& algo, const ClipContainer& clip,
                         const std::map<std::string, Tensor>* weights,
                         std::uint64_t seed) {
  require_known_algorithm(algo);
  if (handcrafted_algos().count(algo)) {
    const RgbTrace trace = mean_rgb(clip);
    if (algo == "green") return green(trace);
    if (algo == "chrom") return chrom(trace);
    if (algo == "pos") return pos(trace);
    return ica_pulse(trace).pulse;
  }
  require(weights != nullptr, ErrorKind::kConfig,
          "algorithm '" + algo + "' needs a weights file");
  nn::ModelGraph model = nn::build_model(algo, seed);
  nn::apply_weights(model, *weights);
  return neural_predict(model, clip);
}

namespace {

std::string iso_utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::map<std::string, std::string> tool_versions() {
  return {
      {"pulsebench", kVersion},
      {"pbvc", std::to_string(kClipFormatVersion)},
      {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                    std::to_string(EIGEN_MAJOR_VERSION) + "." +
                    std::to_string(EIGEN_MINOR_VERSION)},
  };
}

}  // namespace

BenchReport run_benchmark(const BenchConfig& cfg) {
  bool any_neural = false;
  std::set<std::string> seen;
  for (const auto& a : cfg.algorithms) {
    require_known_algorithm(a);
    require(seen.insert(a).second, ErrorKind::kConfig,
            "duplicate algorithm: " + a);
    any_neural |= neural_algos().count(a) > 0;
  }
  require(cfg.window_s > 0.0 && cfg.stride_s > 0.0, ErrorKind::kConfig,
          "window and stride must be positive");
  require(cfg.threads >= 1, ErrorKind::kConfig, "threads must be >= 1");

  // Weights are validated against every requested architecture before any
  // clip is touched.
  std::map<std::string, Tensor> weights;
  if (any_neural) {
    require(!cfg.weights.empty(), ErrorKind::kConfig,
            "neural algorithms need a weights file");
    require(std::filesystem::exists(cfg.weights), ErrorKind::kConfig,
            "weights file not found: " + cfg.weights);
    weights = nn::load_weights(cfg.weights);
    for (const auto& a : cfg.algorithms)
      if (neural_algos().count(a)) {
        nn::ModelGraph probe = nn::build_model(a, cfg.seed);
        nn::apply_weights(probe, weights);
      }
  }

  BenchReport report;
  report.config = cfg;
  report.versions = tool_versions();
  report.timestamp = iso_utc_now();
  if (cfg.algorithms.empty()) return report;

  require(std::filesystem::is_directory(cfg.clip_dir), ErrorKind::kConfig,
          "clip directory not found: " + cfg.clip_dir);
  std::vector<ClipTask> tasks;
  for (const auto& ent : std::filesystem::directory_iterator(cfg.clip_dir))
    if (ent.path().extension() == ".pbvc")
      tasks.push_back({ent.path().stem().string(), ent.path().string()});
  require(!tasks.empty(), ErrorKind::kConfig,
          "no .pbvc clips in " + cfg.clip_dir);
  std::sort(tasks.begin(), tasks.end(),
            [](const ClipTask& a, const ClipTask& b) { return a.id < b.id; });

  std::vector<ClipResult> results(tasks.size());
  std::atomic<std::size_t> next{0};

  // Model instances are built inside predict_clip per call, so workers share
  // nothing mutable; the loaded weight map is read-only.
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) break;
      ClipResult& slot = results[i];
      try {
        const ClipContainer clip = read_clip(tasks[i].path);
        const PulseSignal gt = gt_signal(clip);

        for (const auto& algo : cfg.algorithms) {
          PulseSignal pred =
              predict_clip(algo, clip, any_neural ? &weights : nullptr, cfg.seed);

          const std::size_t n = std::min(pred.samples.size(), gt.samples.size());
          const PulseSignal pc = slice(pred, 0, n);
          const PulseSignal gc = slice(gt, 0, n);
          AlgoOutput out;
          out.windows = windowed_hr(pc, gc, cfg.window_s, cfg.stride_s);
          for (auto& w : out.windows) w.clip = tasks[i].id;
          if (cfg.sdnn) {
            const double sp = sdnn_ms(detect_peaks(bandpass(pc)), pc.fs);
            const double sg = sdnn_ms(detect_peaks(bandpass(gc)), gc.fs);
            out.sdnn_abs_err = std::abs(sp - sg);
          }
          slot.per_algo.push_back(std::move(out));
        }
      } catch (const Error& e) {
        slot.failed = true;
        slot.kind = e.kind();
        slot.what = e.what();
      } catch (const std::exception& e) {
        slot.failed = true;
        slot.kind = ErrorKind::kState;
        slot.what = e.what();
      }
    }
  };

  const std::size_t n_workers =
      std::min<std::size_t>(static_cast<std::size_t>(cfg.threads), tasks.size());
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  for (std::size_t i = 0; i < results.size(); ++i)
    if (results[i].failed)
      fail(results[i].kind, "clip " + tasks[i].id + ": " + results[i].what);

  for (std::size_t k = 0; k < cfg.algorithms.size(); ++k) {
    AlgorithmResult res;
    res.name = cfg.algorithms[k];
    double sdnn_sum = 0.0;
    for (std::size_t i = 0; i < results.size(); ++i) {
      const AlgoOutput& out = results[i].per_algo[k];
      res.windows.insert(res.windows.end(), out.windows.begin(),
                         out.windows.end());
      sdnn_sum += out.sdnn_abs_err;
    }
    res.metrics = hr_metrics(res.windows);
    if (cfg.sdnn) res.sdnn_mae = sdnn_sum / static_cast<double>(results.size());
    report.algorithms.push_back(std::move(res));
  }
  return report;
}

std::string report_to_json(const BenchReport& report) {
  nlohmann::json j;
  j["config"] = {
      {"algorithms", report.config.algorithms},
      {"clip_dir", report.config.clip_dir},
      {"weights", report.config.weights},
      {"window_s", report.config.window_s},
      {"stride_s", report.config.stride_s},
      {"sdnn", report.config.sdnn},
      {"threads", report.config.threads},
      {"seed", report.config.seed},
  };
  j["algorithms"] = nlohmann::json::array();
  for (const auto& a : report.algorithms) {
    nlohmann::json ja;
    ja["name"] = a.name;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& w : a.windows)
      rows.push_back({{"clip", w.clip},
                      {"start", w.start_s},
                      {"end", w.end_s},
                      {"hr_pred", w.hr_pred},
                      {"hr_gt", w.hr_gt},
                      {"flags", w.flags}});
    ja["windows"] = std::move(rows);
    ja["mae"] = a.metrics.mae;
    ja["rmse"] = a.metrics.rmse;
    ja["pearson"] = a.metrics.pearson ? nlohmann::json(*a.metrics.pearson)
                                      : nlohmann::json(nullptr);
    if (a.sdnn_mae) ja["sdnn_mae"] = *a.sdnn_mae;
    j["algorithms"].push_back(std::move(ja));
  }
  j["versions"] = report.versions;
  j["timestamp"] = report.timestamp;
  return j.dump(2) + "\n";
}

namespace {

BenchConfig config_from(const nlohmann::json& jc, bool require_source) {
  BenchConfig cfg;
  cfg.algorithms = jc.value("algorithms", std::vector<std::string>{});
  cfg.clip_dir = jc.value("clip_dir", std::string());
  cfg.weights = jc.value("weights", std::string());
  cfg.window_s = jc.value("window_s", 30.0);
  cfg.stride_s = jc.value("stride_s", 10.0);
  cfg.sdnn = jc.value("sdnn", false);
  cfg.threads = jc.value("threads", 1);
  cfg.seed = jc.value("seed", std::uint64_t{42});
  if (require_source)
    require(jc.contains("algorithms"), ErrorKind::kConfig,
            "bench config needs an 'algorithms' list");
  return cfg;
}

}  // namespace

BenchConfig bench_config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kFormat, std::string("bench config is not valid JSON: ") + e.what());
  }
  require(j.is_object(), ErrorKind::kFormat, "bench config must be a JSON object");
  try {
    return config_from(j, /*require_source=*/true);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kFormat, std::string("bench config field has a wrong type: ") + e.what());
  }
}

BenchReport report_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kFormat, std::string("report is not valid JSON: ") + e.what());
  }
  try {
    BenchReport r;
    r.config = config_from(j.at("config"), /*require_source=*/false);
    for (const auto& ja : j.at("algorithms")) {
      AlgorithmResult a;
      a.name = ja.at("name").get<std::string>();
      for (const auto& jw : ja.at("windows")) {
        WindowedEstimate w;
        w.clip = jw.at("clip").get<std::string>();
        w.start_s = jw.at("start").get<double>();
        w.end_s = jw.at("end").get<double>();
        w.hr_pred = jw.at("hr_pred").get<double>();
        w.hr_gt = jw.at("hr_gt").get<double>();
        w.flags = jw.at("flags").get<std::vector<std::string>>();
        a.windows.push_back(std::move(w));
      }
      a.metrics.mae = ja.at("mae").get<double>();
      a.metrics.rmse = ja.at("rmse").get<double>();
      if (!ja.at("pearson").is_null())
        a.metrics.pearson = ja.at("pearson").get<double>();
      if (ja.contains("sdnn_mae"))
        a.sdnn_mae = ja.at("sdnn_mae").get<double>();
      r.algorithms.push_back(std::move(a));
    }
    r.versions = j.at("versions").get<std::map<std::string, std::string>>();
    r.timestamp = j.at("timestamp").get<std::string>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kFormat, std::string("malformed report: ") + e.what());
  }
}

void verify_report(const BenchReport& report) {
  for (const auto& a : report.algorithms) {
    require(!a.windows.empty(), ErrorKind::kState,
            "report algorithm '" + a.name + "' has no window rows");
    const HrMetrics m = hr_metrics(a.windows);
    require(std::abs(m.mae - a.metrics.mae) <= 1e-6 &&
                std::abs(m.rmse - a.metrics.rmse) <= 1e-6,
            ErrorKind::kState,
            "report aggregates for '" + a.name + "' do not match their windows");
    const bool same_presence = m.pearson.has_value() == a.metrics.pearson.has_value();
    require(same_presence &&
                (!m.pearson || std::abs(*m.pearson - *a.metrics.pearson) <= 1e-6),
            ErrorKind::kState,
            "report correlation for '" + a.name + "' does not match its windows");
  }
}

}  // namespace pb

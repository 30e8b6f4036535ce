#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "pulsebench/clip.hpp"
#include "pulsebench/error.hpp"
#include "pulsebench/evalbench.hpp"
#include "pulsebench/neural.hpp"
#include "pulsebench/postprocess.hpp"
#include "pulsebench/preprocess.hpp"
#include "pulsebench/stats.hpp"
#include "pulsebench/svg.hpp"
#include "pulsebench/synth.hpp"
#include "pulsebench/version.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// 0 ok, 1 runtime failure, 2 usage/config error.
int exit_code(const pb::Error& e) {
  switch (e.kind()) {
    case pb::ErrorKind::kConfig:
    case pb::ErrorKind::kInvalidArgument:
    case pb::ErrorKind::kUnsupported:
      return 2;
    default:
      return 1;
  }
}

// stdout carries machine-parseable JSON only; everything human goes to stderr.
void emit(const json& j) { std::cout << j.dump(2) << "\n"; }

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  pb::require(is.good(), pb::ErrorKind::kConfig, "cannot open " + path);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

json read_json_file(const std::string& path) {
  try {
    return json::parse(slurp(path));
  } catch (const json::exception& e) {
    pb::fail(pb::ErrorKind::kFormat,
             path + " is not valid JSON: " + std::string(e.what()));
  }
}

// A bad output location is a usage error, not a mid-run failure.
void ensure_writable_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  pb::require(!ec && fs::is_directory(dir), pb::ErrorKind::kConfig,
              "cannot create directory: " + dir);
  const fs::path probe = fs::path(dir) / ".pulsebench_probe";
  {
    std::ofstream os(probe);
    pb::require(os.good(), pb::ErrorKind::kConfig,
                "directory not writable: " + dir);
  }
  fs::remove(probe, ec);
}

void ensure_writable_path(const std::string& file) {
  pb::require(!fs::is_directory(file), pb::ErrorKind::kConfig,
              "output path is a directory: " + file);
  const fs::path parent = fs::path(file).parent_path();
  if (!parent.empty()) ensure_writable_dir(parent.string());
}

pb::CorpusParams corpus_from_json(const json& j) {
  pb::CorpusParams p;
  p.n = j.value("n", p.n);
  p.seed = j.value("seed", p.seed);
  p.hr_lo = j.value("hr_lo", p.hr_lo);
  p.hr_hi = j.value("hr_hi", p.hr_hi);
  p.duration_s = j.value("duration_s", p.duration_s);
  p.fps = j.value("fps", p.fps);
  p.height = j.value("height", p.height);
  p.width = j.value("width", p.width);
  p.diffuse_gain = j.value("diffuse_gain", p.diffuse_gain);
  p.noise_std = j.value("noise_std", p.noise_std);
  p.drift_amp = j.value("drift_amp", p.drift_amp);
  p.motion_amp = j.value("motion_amp", p.motion_amp);
  p.specular_amp = j.value("specular_amp", p.specular_amp);
  p.smooth_k = j.value("smooth_k", p.smooth_k);
  p.offset_lo = j.value("offset_lo", p.offset_lo);
  p.offset_hi = j.value("offset_hi", p.offset_hi);
  p.bvp_fs = j.value("bvp_fs", p.bvp_fs);
  return p;
}

struct RunArtifacts {
  json body;
  pb::PulseSignal pred;
  pb::PulseSignal gt;
};

RunArtifacts run_pipeline(const std::string& clip_path, const std::string& algo,
                          const std::string& weights_path, double window_s,
                          double stride_s, std::uint64_t seed) {
  pb::require_known_algorithm(algo);
  const bool neural = algo == "seq_rppg" || algo == "noobheart";
  std::map<std::string, pb::Tensor> wmap;
  if (neural) {
    pb::require(!weights_path.empty(), pb::ErrorKind::kConfig,
                "algorithm '" + algo + "' needs --weights");
    wmap = pb::nn::load_weights(weights_path);
  }

  const pb::ClipContainer clip = pb::read_clip(clip_path);
  pb::PulseSignal pred =
      pb::predict_clip(algo, clip, neural ? &wmap : nullptr, seed);
  pb::PulseSignal gt{pb::align_bvp_to_frames(clip), clip.nominal_fps};
  const std::size_t n = std::min(pred.samples.size(), gt.samples.size());
  pred.samples.resize(n);
  gt.samples.resize(n);

  const auto windows = pb::windowed_hr(pred, gt, window_s, stride_s);
  const pb::WelchHr whole = pb::welch_hr(pred);

  json body;
  body["algo"] = algo;
  body["clip"] = clip_path;
  body["hr"] = whole.bpm;
  body["low_confidence"] = whole.low_confidence;
  try {
    body["sdnn_ms"] =
        pb::sdnn_ms(pb::detect_peaks(pb::bandpass(pred)), pred.fs);
  } catch (const pb::Error&) {
    body["sdnn_ms"] = nullptr;  // too few clean beats for an interval estimate
  }
  json rows = json::array();
  for (const auto& w : windows)
    rows.push_back({{"start", w.start_s},
                    {"end", w.end_s},
                    {"hr_pred", w.hr_pred},
                    {"hr_gt", w.hr_gt},
                    {"flags", w.flags}});
  body["windows"] = std::move(rows);
  return {std::move(body), std::move(pred), std::move(gt)};
}

std::vector<pb::svg::Panel> make_panels(const pb::PulseSignal& pred,
                                        const pb::PulseSignal& gt,
                                        const std::string& algo) {
  auto zscore = [](const pb::PulseSignal& s) {
    std::vector<double> out(s.samples.size());
    const double m = pb::mean_of(s.samples);
    double sd = pb::pop_std(s.samples);
    if (sd <= 0.0) sd = 1.0;
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = (s.samples[i] - m) / sd;
    return out;
  };
  std::vector<double> t(pred.samples.size());
  for (std::size_t i = 0; i < t.size(); ++i)
    t[i] = static_cast<double>(i) / pred.fs;

  pb::svg::Panel wave;
  wave.title = "recovered pulse vs reference";
  wave.x_label = "time [s]";
  wave.y_label = "z-scored amplitude";
  wave.series.push_back({algo, t, zscore(pred), ""});
  wave.series.push_back({"reference", t, zscore(gt), ""});

  // Unit-peak normalization: the two PSDs live on arbitrary, wildly
  // different power scales.
  auto spectrum = [](const pb::PulseSignal& s) {
    const pb::Psd p = pb::welch_psd(s);
    std::pair<std::vector<double>, std::vector<double>> out;
    double peak = 0.0;
    for (std::size_t i = 0; i < p.freq_hz.size() && p.freq_hz[i] <= 4.0; ++i) {
      out.first.push_back(p.freq_hz[i]);
      out.second.push_back(p.power[i]);
      peak = std::max(peak, p.power[i]);
    }
    if (peak > 0.0)
      for (double& v : out.second) v /= peak;
    return out;
  };
  const auto sp = spectrum(pred);
  const auto sg = spectrum(gt);

  pb::svg::Panel psd;
  psd.title = "Welch power spectral density";
  psd.x_label = "frequency [Hz]";
  psd.y_label = "normalized power";
  psd.series.push_back({algo, sp.first, sp.second, ""});
  psd.series.push_back({"reference", sg.first, sg.second, ""});
  return {wave, psd};
}

json inspect_file(const std::string& path) {
  const std::string blob = slurp(path);
  const std::string magic = blob.substr(0, std::min<std::size_t>(4, blob.size()));

  if (magic == "PBVC") {
    const pb::ClipContainer c = pb::read_clip(path);
    json j;
    j["type"] = "clip";
    j["width"] = c.width;
    j["height"] = c.height;
    j["nominal_fps"] = c.nominal_fps;
    j["frames"] = c.frame_count();
    j["duration_s"] = c.duration();
    j["bvp_samples"] = c.bvp_ts.size();
    try {
      j["meta"] = json::parse(c.meta);
    } catch (const json::exception&) {
      j["meta"] = c.meta;
    }
    return j;
  }

  if (magic == "PBWT") {
    const auto weights = pb::nn::load_weights(path);
    json tensors = json::array();
    std::int64_t total = 0;
    for (const auto& [name, t] : weights) {
      tensors.push_back(
          {{"name", name}, {"shape", t.shape}, {"numel", t.numel()}});
      total += t.numel();
    }
    return {{"type", "weights"},
            {"tensors", std::move(tensors)},
            {"total_values", total}};
  }

  const pb::BenchReport r = pb::report_from_json(blob);
  bool consistent = true;
  std::string violation;
  try {
    pb::verify_report(r);
  } catch (const pb::Error& e) {
    consistent = false;
    violation = e.what();
  }
  json algos = json::array();
  for (const auto& a : r.algorithms) {
    json ja = {{"name", a.name},
               {"windows", a.windows.size()},
               {"mae", a.metrics.mae},
               {"rmse", a.metrics.rmse}};
    ja["pearson"] =
        a.metrics.pearson ? json(*a.metrics.pearson) : json(nullptr);
    if (a.sdnn_mae) ja["sdnn_mae"] = *a.sdnn_mae;
    algos.push_back(std::move(ja));
  }
  json j = {{"type", "report"},
            {"timestamp", r.timestamp},
            {"algorithms", std::move(algos)},
            {"consistent", consistent}};
  if (!consistent) j["violation"] = violation;
  return j;
}

std::vector<pb::WindowTensor> windows_from_dir(const std::string& dir) {
  pb::require(fs::is_directory(dir), pb::ErrorKind::kConfig,
              "clip directory not found: " + dir);
  std::vector<std::string> paths;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".pbvc") paths.push_back(e.path().string());
  std::sort(paths.begin(), paths.end());
  pb::require(!paths.empty(), pb::ErrorKind::kConfig,
              "no .pbvc clips in " + dir);

  std::vector<pb::WindowTensor> out;
  for (const auto& p : paths) {
    const pb::ClipContainer clip = pb::read_clip(p);
    const pb::VideoCube cube = pb::reduce_clip(clip, nullptr, 8, 8);
    const std::vector<float> labels = pb::align_bvp_to_frames(clip);
    auto windows = pb::make_windows(cube, labels, 450, 450);
    for (auto& w : windows) out.push_back(std::move(w));
  }
  return out;
}

int resolve_env_threads() {
  const char* env = std::getenv("PULSEBENCH_THREADS");
  if (!env) return 1;
  try {
    const int v = std::stoi(env);
    pb::require(v >= 1, pb::ErrorKind::kConfig,
                "PULSEBENCH_THREADS must be >= 1");
    return v;
  } catch (const pb::Error&) {
    throw;
  } catch (const std::exception&) {
    pb::fail(pb::ErrorKind::kConfig, "PULSEBENCH_THREADS is not a number");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"self-contained rPPG engine and benchmark harness"};
  app.require_subcommand(1);
  app.set_version_flag("--version", pb::kVersion);

  // synth
  auto* synth = app.add_subcommand(
      "synth", "Generate a synthetic clip or a corpus with known ground truth");
  std::string sy_out, sy_out_dir, sy_config;
  double sy_hr = 72.0, sy_duration = 30.0, sy_fps = 30.0;
  double sy_noise = 0.0, sy_drift = 0.0, sy_motion = 0.0, sy_specular = 0.0;
  double sy_offset = 0.0, sy_hr_lo = 45.0, sy_hr_hi = 150.0;
  double sy_offset_lo = 0.0, sy_offset_hi = 0.0;
  std::int64_t sy_n = 20, sy_smooth = 1, sy_height = 8, sy_width = 8;
  std::uint64_t sy_seed = 42;
  synth->add_option("--out", sy_out, "Write a single clip to this .pbvc path");
  synth->add_option("--out-dir", sy_out_dir, "Corpus output directory")
      ->excludes("--out");
  synth->add_option("--config", sy_config, "Corpus JSON config");
  synth->add_option("--n", sy_n, "Corpus size");
  synth->add_option("--seed", sy_seed, "RNG seed");
  synth->add_option("--hr", sy_hr, "Constant heart rate, bpm (single clip)");
  synth->add_option("--hr-lo", sy_hr_lo, "Corpus HR draw lower bound");
  synth->add_option("--hr-hi", sy_hr_hi, "Corpus HR draw upper bound");
  synth->add_option("--duration", sy_duration, "Clip length, seconds");
  synth->add_option("--fps", sy_fps, "Frame rate");
  synth->add_option("--height", sy_height, "Frame height, px");
  synth->add_option("--width", sy_width, "Frame width, px");
  synth->add_option("--noise", sy_noise, "Sensor noise std, pixel units");
  synth->add_option("--drift", sy_drift, "Illumination drift amplitude");
  synth->add_option("--motion", sy_motion, "Pattern motion amplitude, px");
  synth->add_option("--specular", sy_specular, "Specular highlight amplitude");
  synth->add_option("--smooth-k", sy_smooth, "Temporal box filter length");
  synth->add_option("--offset", sy_offset, "BVP timestamp offset, s (single clip)");
  synth->add_option("--offset-lo", sy_offset_lo, "Corpus offset draw lower bound");
  synth->add_option("--offset-hi", sy_offset_hi, "Corpus offset draw upper bound");

  // run
  auto* run = app.add_subcommand("run", "Run one algorithm over one clip");
  std::string r_clip, r_algo, r_weights, r_plot;
  double r_window = 30.0, r_stride = 10.0;
  std::uint64_t r_seed = 42;
  run->add_option("--clip", r_clip, "Input .pbvc clip")->required();
  run->add_option("--algo", r_algo, "Algorithm name")->required();
  run->add_option("--weights", r_weights, "PBWT weights (neural algorithms)");
  run->add_option("--window", r_window, "Evaluation window, seconds");
  run->add_option("--stride", r_stride, "Evaluation stride, seconds");
  run->add_option("--plot", r_plot, "Also write a waveform+PSD SVG here");
  run->add_option("--seed", r_seed, "RNG seed");

  // plot
  auto* plot = app.add_subcommand("plot", "Render waveform and PSD to SVG");
  std::string p_clip, p_algo = "pos", p_weights, p_out;
  std::uint64_t p_seed = 42;
  plot->add_option("--clip", p_clip, "Input .pbvc clip")->required();
  plot->add_option("--algo", p_algo, "Algorithm name");
  plot->add_option("--weights", p_weights, "PBWT weights (neural algorithms)");
  plot->add_option("--out", p_out, "Output SVG path")->required();
  plot->add_option("--seed", p_seed, "RNG seed");

  // train
  auto* train = app.add_subcommand("train", "Train a model on a clip directory");
  std::string t_config, t_out, t_loss_csv;
  int t_epochs = 0;
  double t_lr = 0.0;
  std::uint64_t t_seed = 42;
  train->add_option("--config", t_config, "Train JSON config")->required();
  train->add_option("--out", t_out, "Weights output path (overrides config)");
  train->add_option("--loss-csv", t_loss_csv, "Loss curve CSV path (overrides config)");
  train->add_option("--epochs", t_epochs, "Override epoch count");
  train->add_option("--lr", t_lr, "Override learning rate");
  train->add_option("--seed", t_seed, "Override seed");

  // bench
  auto* bench = app.add_subcommand("bench", "Benchmark algorithms over a corpus");
  std::string b_config, b_out;
  int b_threads = 1;
  std::uint64_t b_seed = 42;
  bench->add_option("--config", b_config, "Bench JSON config")->required();
  bench->add_option("--out", b_out, "Report output path (default: stdout)");
  bench->add_option("--threads", b_threads, "Worker pool size");
  bench->add_option("--seed", b_seed, "Override seed");

  // flops
  auto* flops = app.add_subcommand("flops", "Print model size and cost");
  std::string f_model;
  flops->add_option("--model", f_model, "Model name")->required();

  // inspect
  auto* inspect = app.add_subcommand("inspect", "Summarize a clip, weights, or report file");
  std::string i_file;
  inspect->add_option("--file", i_file, "Path to a .pbvc/.pbwt/report file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) {
      pb::require(!sy_out.empty() || !sy_out_dir.empty(), pb::ErrorKind::kConfig,
                  "synth needs --out (single clip) or --out-dir (corpus)");
      if (!sy_out.empty()) {
        pb::require(sy_config.empty(), pb::ErrorKind::kConfig,
                    "--config drives corpus mode; use flags with --out");
        pb::SynthConfig sc;
        sc.duration_s = sy_duration;
        sc.fps = sy_fps;
        sc.height = sy_height;
        sc.width = sy_width;
        sc.hr_trace = {{0.0, sy_hr}};
        sc.noise_std = sy_noise;
        sc.drift_amp = sy_drift;
        sc.motion_amp = sy_motion;
        sc.specular_amp = sy_specular;
        sc.smooth_k = sy_smooth;
        sc.offset_s = sy_offset;
        sc.seed = sy_seed;
        ensure_writable_path(sy_out);
        pb::write_clip(pb::render_clip(sc), sy_out);
        emit({{"clip", sy_out}});
      } else {
        pb::CorpusParams p;
        if (!sy_config.empty()) p = corpus_from_json(read_json_file(sy_config));
        auto ov = [&](const char* flag, auto& dst, const auto& src) {
          if (synth->count(flag)) dst = src;
        };
        ov("--n", p.n, sy_n);
        ov("--seed", p.seed, sy_seed);
        ov("--hr-lo", p.hr_lo, sy_hr_lo);
        ov("--hr-hi", p.hr_hi, sy_hr_hi);
        ov("--duration", p.duration_s, sy_duration);
        ov("--fps", p.fps, sy_fps);
        ov("--height", p.height, sy_height);
        ov("--width", p.width, sy_width);
        ov("--noise", p.noise_std, sy_noise);
        ov("--drift", p.drift_amp, sy_drift);
        ov("--motion", p.motion_amp, sy_motion);
        ov("--specular", p.specular_amp, sy_specular);
        ov("--smooth-k", p.smooth_k, sy_smooth);
        ov("--offset-lo", p.offset_lo, sy_offset_lo);
        ov("--offset-hi", p.offset_hi, sy_offset_hi);
        ensure_writable_dir(sy_out_dir);
        const std::string manifest = pb::gen_corpus(p, sy_out_dir);
        emit({{"manifest", manifest}, {"clips", p.n}});
      }
    } else if (run->parsed()) {
      RunArtifacts art =
          run_pipeline(r_clip, r_algo, r_weights, r_window, r_stride, r_seed);
      if (!r_plot.empty()) {
        ensure_writable_path(r_plot);
        pb::svg::write_chart(r_plot, make_panels(art.pred, art.gt, r_algo));
        art.body["plot"] = r_plot;
      }
      emit(art.body);
    } else if (plot->parsed()) {
      const RunArtifacts art =
          run_pipeline(p_clip, p_algo, p_weights, 30.0, 10.0, p_seed);
      ensure_writable_path(p_out);
      pb::svg::write_chart(p_out, make_panels(art.pred, art.gt, p_algo));
      emit({{"svg", p_out}});
    } else if (train->parsed()) {
      const json jc = read_json_file(t_config);
      std::string model_name = jc.value("model", std::string("seq_rppg"));
      std::string clips = jc.value("clips", std::string());
      std::string out = jc.value("out", std::string("weights.pbwt"));
      std::string loss_csv = jc.value("loss_csv", std::string());
      pb::nn::TrainConfig tc;
      tc.lr = jc.value("lr", tc.lr);
      tc.batch_size = jc.value("batch_size", tc.batch_size);
      tc.epochs = jc.value("epochs", tc.epochs);
      tc.seed = jc.value("seed", tc.seed);
      tc.loss = jc.value("loss", tc.loss);
      if (train->count("--out")) out = t_out;
      if (train->count("--loss-csv")) loss_csv = t_loss_csv;
      if (train->count("--epochs")) tc.epochs = t_epochs;
      if (train->count("--lr")) tc.lr = t_lr;
      if (train->count("--seed")) tc.seed = t_seed;
      pb::require(!clips.empty(), pb::ErrorKind::kConfig,
                  "train config needs 'clips' (a directory of .pbvc files)");
      pb::require(tc.epochs >= 1, pb::ErrorKind::kConfig, "epochs must be >= 1");
      pb::require(tc.batch_size >= 1, pb::ErrorKind::kConfig,
                  "batch size must be >= 1");
      pb::require(tc.lr >= 0.0, pb::ErrorKind::kConfig,
                  "learning rate must be >= 0");
      if (loss_csv.empty())
        loss_csv = fs::path(out).replace_extension("loss.csv").string();

      const auto windows = windows_from_dir(clips);
      std::fprintf(stderr, "training %s on %zu windows, %d epochs\n",
                   model_name.c_str(), windows.size(), tc.epochs);
      pb::nn::ModelGraph model = pb::nn::build_model(model_name, tc.seed);
      const pb::nn::TrainResult res = pb::nn::train(model, windows, tc);
      ensure_writable_path(out);
      pb::nn::save_weights(model, out);
      {
        std::ofstream csv(loss_csv);
        pb::require(csv.good(), pb::ErrorKind::kIo, "cannot write " + loss_csv);
        csv << "epoch,loss\n";
        for (std::size_t i = 0; i < res.epoch_loss.size(); ++i)
          csv << (i + 1) << "," << res.epoch_loss[i] << "\n";
      }
      emit({{"weights", out},
            {"loss_csv", loss_csv},
            {"model", model_name},
            {"epochs", tc.epochs},
            {"windows", windows.size()},
            {"final_loss", res.epoch_loss.back()}});
    } else if (bench->parsed()) {
      const json raw = read_json_file(b_config);
      pb::BenchConfig cfg = pb::bench_config_from_json(raw.dump());
      if (bench->count("--threads"))
        cfg.threads = b_threads;
      else if (!raw.contains("threads"))
        cfg.threads = resolve_env_threads();
      if (bench->count("--seed")) cfg.seed = b_seed;

      const pb::BenchReport report = pb::run_benchmark(cfg);
      pb::verify_report(report);
      for (const auto& a : report.algorithms)
        std::fprintf(stderr, "%s: mae %.3f rmse %.3f over %zu windows\n",
                     a.name.c_str(), a.metrics.mae, a.metrics.rmse,
                     a.windows.size());
      const std::string text = pb::report_to_json(report);
      if (!b_out.empty()) {
        ensure_writable_path(b_out);
        std::ofstream os(b_out, std::ios::binary);
        pb::require(os.good(), pb::ErrorKind::kIo, "cannot write " + b_out);
        os << text;
        emit({{"report", b_out}});
      } else {
        std::cout << text;
      }
    } else if (flops->parsed()) {
      pb::nn::ModelGraph m = pb::nn::build_model(f_model);
      std::string input;
      for (std::size_t i = 0; i < m.input_shape.size(); ++i) {
        if (i) input += "x";
        input += std::to_string(m.input_shape[i]);
      }
      emit({{"model", m.name},
            {"input", input},
            {"params", m.count_params()},
            {"flops_per_frame", m.flops_per_frame()}});
    } else if (inspect->parsed()) {
      emit(inspect_file(i_file));
    }
  } catch (const pb::Error& e) {
    std::fprintf(stderr, "pulsebench: %s\n", e.what());
    return exit_code(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "pulsebench: %s\n", e.what());
    return 1;
  }
  return 0;
}

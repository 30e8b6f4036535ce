#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pulsebench/clip.hpp"
#include "pulsebench/postprocess.hpp"
#include "pulsebench/tensor.hpp"

namespace pb {

// Sorted names accepted by predict_clip and run_benchmark.
const std::vector<std::string>& known_algorithms();

// Config error naming the valid set when the name is unknown.
void require_known_algorithm(const std::string& name);

// One algorithm over one clip. Neural algorithms run eval-mode inference on
// consecutive 450-frame windows of the 8x8-reduced video and require the
// weight map; handcrafted algorithms ignore it.
PulseSignal predict_clip(const std::string& algo, const ClipContainer& clip,
                         const std::map<std::string, Tensor>* weights = nullptr,
                         std::uint64_t seed = 42);

struct WindowedEstimate {
  std::string clip;
  double start_s = 0.0;
  double end_s = 0.0;
  double hr_pred = 0.0;
  double hr_gt = 0.0;
  std::vector<std::string> flags;
};

// Welch HR of both signals over a moving window. Estimates outside [40, 180]
// bpm are clamped and flagged rather than dropped, so window counts stay
// comparable across algorithms. A signal shorter than one window collapses to
// a single flagged window covering the whole signal.
std::vector<WindowedEstimate> windowed_hr(const PulseSignal& pred,
                                          const PulseSignal& gt,
                                          double window_s = 30.0,
                                          double stride_s = 10.0);

struct HrMetrics {
  double mae = 0.0;
  double rmse = 0.0;
  std::optional<double> pearson;  // absent below 2 pairs or at zero variance
};

HrMetrics hr_metrics(const std::vector<WindowedEstimate>& pairs);

struct BenchConfig {
  std::vector<std::string> algorithms;  // of {green, chrom, pos, ica, seq_rppg, noobheart}
  std::string clip_dir;
  std::string weights;  // PBWT path; required by the neural algorithms
  double window_s = 30.0;
  double stride_s = 10.0;
  bool sdnn = false;
  int threads = 1;
  std::uint64_t seed = 42;
};

struct AlgorithmResult {
  std::string name;
  std::vector<WindowedEstimate> windows;  // all clips, sorted by clip id
  HrMetrics metrics;
  std::optional<double> sdnn_mae;  // mean per-clip |SDNN error|, ms
};

struct BenchReport {
  BenchConfig config;
  std::vector<AlgorithmResult> algorithms;
  std::map<std::string, std::string> versions;
  std::string timestamp;  // ISO 8601 UTC; the only nondeterministic field
};

// Runs every requested algorithm over every .pbvc clip in the directory.
// Clips are handed to a worker pool and merged by sorted clip id, so the
// report never depends on scheduling. The first failing clip aborts the run.
// All neural algorithms in one run share the single weights file.
BenchReport run_benchmark(const BenchConfig& cfg);

std::string report_to_json(const BenchReport& report);
BenchReport report_from_json(const std::string& text);
BenchConfig bench_config_from_json(const std::string& text);

// Recomputes each algorithm's aggregates from its own window rows; any
// disagreement beyond 1e-6 is a state error.
void verify_report(const BenchReport& report);

}  // namespace pb

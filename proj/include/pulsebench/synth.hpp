#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pulsebench/clip.hpp"
#include "pulsebench/postprocess.hpp"

namespace pb {

struct HrPoint {
  double t_s = 0.0;
  double bpm = 72.0;
};

struct SynthConfig {
  double duration_s = 30.0;
  double fps = 30.0;
  int64_t height = 8;
  int64_t width = 8;
  std::vector<HrPoint> hr_trace = {{0.0, 72.0}};  // piecewise linear in time
  double diffuse_gain = 3.0;                      // pulsatile amplitude, pixel units
  std::array<double, 3> skin_vector = {0.33, 0.77, 0.53};
  std::array<double, 3> base_color = {160.0, 110.0, 95.0};
  double noise_std = 0.0;
  double drift_amp = 0.0;     // slow illumination drift at 0.05 Hz
  double motion_amp = 0.0;    // circular pattern translation, pixels
  double specular_amp = 0.0;  // achromatic random-walk highlight
  int64_t smooth_k = 1;       // temporal box filter length; 1 = off
  double bvp_fs = 60.0;
  double offset_s = 0.0;      // added to the stored BVP timestamps only
  uint64_t seed = 42;
};

// Two-harmonic waveform whose instantaneous frequency follows the trace:
// s(t) = sin(phi) + 0.5 sin(2 phi), phi(t) = 2 pi * integral of bpm/60.
PulseSignal gen_bvp(const std::vector<HrPoint>& hr_trace, double bvp_fs,
                    double duration_s);

// The same waveform evaluated at one instant.
double bvp_value_at(const std::vector<HrPoint>& hr_trace, double t_s);

ClipContainer render_clip(const SynthConfig& cfg);

struct CorpusParams {
  int64_t n = 20;
  uint64_t seed = 7;
  double hr_lo = 45.0;
  double hr_hi = 150.0;
  double duration_s = 30.0;
  double fps = 30.0;
  int64_t height = 8;
  int64_t width = 8;
  double diffuse_gain = 3.0;
  double noise_std = 0.0;
  double drift_amp = 0.0;
  double motion_amp = 0.0;
  double specular_amp = 0.0;
  int64_t smooth_k = 1;
  double offset_lo = 0.0;
  double offset_hi = 0.0;
  double bvp_fs = 60.0;
};

// Writes clip_###.pbvc files plus manifest.json into out_dir; returns the
// manifest path. Every per-clip draw derives from (seed, index) alone.
std::string gen_corpus(const CorpusParams& p, const std::string& out_dir);

}  // namespace pb

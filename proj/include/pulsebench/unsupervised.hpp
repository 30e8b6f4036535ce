#pragma once

#include <cstdint>
#include <vector>

#include "pulsebench/clip.hpp"
#include "pulsebench/postprocess.hpp"

namespace pb {

struct RgbTrace {
  std::vector<float> r, g, b;
  double fs = 0.0;
};

// Spatial mean of each frame, one sample per frame.
RgbTrace mean_rgb(const ClipContainer& clip);

// Detrended, mean-removed green channel.
PulseSignal green(const RgbTrace& trace);

// Chrominance projection with Hann overlap-add windows.
PulseSignal chrom(const RgbTrace& trace, double win_seconds = 1.6);

// Plane-orthogonal-to-skin projection with stride-1 sliding windows.
PulseSignal pos(const RgbTrace& trace, double win_seconds = 1.6);

struct IcaPulse {
  PulseSignal pulse;
  bool converged = true;
  int iterations = 0;
};

// Fixed-point ICA (tanh contrast, symmetric decorrelation) on the centered,
// whitened channels; selects the component with the strongest in-band
// spectral peak and aligns its sign with the green channel.
IcaPulse ica_pulse(const RgbTrace& trace);

}  // namespace pb

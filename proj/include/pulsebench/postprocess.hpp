#pragma once

#include <cstdint>
#include <vector>

namespace pb {

struct PulseSignal {
  std::vector<float> samples;
  double fs = 0.0;

  double duration_s() const { return samples.size() / fs; }
};

// Sample minus a centered moving average; edge windows are truncated.
PulseSignal detrend(const PulseSignal& sig, double window_seconds = 1.0);

// Zero-phase frequency-domain mask: bins outside [lo, hi] are zeroed.
PulseSignal bandpass(const PulseSignal& sig, double lo_hz = 0.66, double hi_hz = 3.0);

struct Psd {
  std::vector<double> freq_hz;
  std::vector<double> power;
};

// Averaged periodogram: Hann segments, mean-removed, zero-padded to nfft.
Psd welch_psd(const PulseSignal& sig, double segment_seconds = 10.0,
              double overlap = 0.5, std::size_t nfft = 16384);

struct WelchHr {
  double bpm = 0.0;
  double peak_ratio = 0.0;       // band peak power over in-band median power
  bool low_confidence = false;   // peak_ratio < 3
};

WelchHr welch_hr(const PulseSignal& sig, double lo_hz = 0.66, double hi_hz = 3.0);

// Local maxima above half the rolling RMS, thinned to a minimum spacing
// derived from the Welch HR. Expects a bandpassed signal.
std::vector<int64_t> detect_peaks(const PulseSignal& sig);

// Population std of inter-beat intervals, in milliseconds.
double sdnn_ms(const std::vector<int64_t>& peaks, double fs);

}  // namespace pb

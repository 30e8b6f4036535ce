#include "pulsebench/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pulsebench/error.hpp"
#include "pulsebench/fft.hpp"
#include "pulsebench/stats.hpp"

namespace pb {

namespace {

void check_signal(const PulseSignal& sig, const char* who) {
  require(sig.fs > 0.0, ErrorKind::kInvalidArgument,
          std::string(who) + ": fs must be positive");
  require(sig.samples.size() >= 2, ErrorKind::kTooShort,
          std::string(who) + ": need at least 2 samples");
}

}  // namespace

PulseSignal detrend(const PulseSignal& sig, double window_seconds) {
  check_signal(sig, "detrend");
  const int64_t n = static_cast<int64_t>(sig.samples.size());
  const int64_t w = std::max<int64_t>(3, std::llround(sig.fs * window_seconds));
  const int64_t half = w / 2;

  std::vector<double> prefix(static_cast<std::size_t>(n) + 1, 0.0);
  for (int64_t i = 0; i < n; ++i)
    prefix[static_cast<std::size_t>(i) + 1] =
        prefix[static_cast<std::size_t>(i)] + sig.samples[static_cast<std::size_t>(i)];

  PulseSignal out{std::vector<float>(sig.samples.size()), sig.fs};
  for (int64_t i = 0; i < n; ++i) {
    const int64_t lo = std::max<int64_t>(0, i - half);
    const int64_t hi = std::min<int64_t>(n - 1, i + half);
    const double mean = (prefix[static_cast<std::size_t>(hi) + 1] -
                         prefix[static_cast<std::size_t>(lo)]) /
                        static_cast<double>(hi - lo + 1);
    out.samples[static_cast<std::size_t>(i)] =
        static_cast<float>(sig.samples[static_cast<std::size_t>(i)] - mean);
  }
  return out;
}

PulseSignal bandpass(const PulseSignal& sig, double lo_hz, double hi_hz) {
  check_signal(sig, "bandpass");
  require(lo_hz < hi_hz && hi_hz < sig.fs / 2.0, ErrorKind::kInvalidArgument,
          "bandpass: need lo < hi < fs/2");
  const std::size_t n = sig.samples.size();
  auto spec = rfft(sig.samples);
  bool any = false;
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double f = static_cast<double>(k) * sig.fs / static_cast<double>(n);
    if (f < lo_hz || f > hi_hz) {
      spec.re[k] = 0;
      spec.im[k] = 0;
    } else {
      any = true;
    }
  }
  require(any, ErrorKind::kBand, "bandpass: no bins inside the band");
  return {irfft(spec, n), sig.fs};
}

Psd welch_psd(const PulseSignal& sig, double segment_seconds, double overlap,
              std::size_t nfft) {
  check_signal(sig, "welch_psd");
  require(overlap >= 0.0 && overlap < 1.0, ErrorKind::kInvalidArgument,
          "welch_psd: overlap must be in [0, 1)");
  const std::size_t n = sig.samples.size();
  const std::size_t seg =
      static_cast<std::size_t>(std::llround(sig.fs * segment_seconds));
  require(seg >= 2 && seg <= n, ErrorKind::kDuration,
          "welch_psd: signal shorter than one segment");
  require(nfft >= seg, ErrorKind::kInvalidArgument, "welch_psd: nfft < segment");

  std::vector<double> window(seg);
  double win_energy = 0.0;
  for (std::size_t i = 0; i < seg; ++i) {
    window[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi *
                                      static_cast<double>(i) / static_cast<double>(seg)));
    win_energy += window[i] * window[i];
  }

  const std::size_t hop =
      std::max<std::size_t>(1, static_cast<std::size_t>(
                                   std::llround(seg * (1.0 - overlap))));
  const std::size_t half = nfft / 2 + 1;
  std::vector<double> acc(half, 0.0);
  std::size_t count = 0;
  std::vector<double> buf(nfft);
  for (std::size_t start = 0; start + seg <= n; start += hop) {
    double mean = 0.0;
    for (std::size_t i = 0; i < seg; ++i)
      mean += sig.samples[start + i];
    mean /= static_cast<double>(seg);
    std::fill(buf.begin(), buf.end(), 0.0);
    for (std::size_t i = 0; i < seg; ++i)
      buf[i] = (sig.samples[start + i] - mean) * window[i];
    auto spec = rfft(buf);
    for (std::size_t k = 0; k < half; ++k)
      acc[k] += spec.re[k] * spec.re[k] + spec.im[k] * spec.im[k];
    ++count;
  }

  Psd psd;
  psd.freq_hz.resize(half);
  psd.power.resize(half);
  const double norm = 1.0 / (sig.fs * win_energy * static_cast<double>(count));
  for (std::size_t k = 0; k < half; ++k) {
    psd.freq_hz[k] = static_cast<double>(k) * sig.fs / static_cast<double>(nfft);
    const bool interior = k != 0 && k != half - 1;
    psd.power[k] = acc[k] * norm * (interior ? 2.0 : 1.0);
  }
  return psd;
}

WelchHr welch_hr(const PulseSignal& sig, double lo_hz, double hi_hz) {
  Psd psd = welch_psd(sig);
  std::vector<double> band_power;
  std::size_t best = 0;
  double best_power = -1.0;
  for (std::size_t k = 0; k < psd.freq_hz.size(); ++k) {
    if (psd.freq_hz[k] < lo_hz || psd.freq_hz[k] > hi_hz) continue;
    band_power.push_back(psd.power[k]);
    if (psd.power[k] > best_power) {
      best_power = psd.power[k];
      best = k;
    }
  }
  require(!band_power.empty(), ErrorKind::kBand, "welch_hr: empty band");

  std::nth_element(band_power.begin(), band_power.begin() + band_power.size() / 2,
                   band_power.end());
  const double median = band_power[band_power.size() / 2];

  WelchHr out;
  out.bpm = psd.freq_hz[best] * 60.0;
  out.peak_ratio = median > 0.0 ? best_power / median
                                : (best_power > 0.0 ? 1e12 : 0.0);
  out.low_confidence = out.peak_ratio < 3.0;
  return out;
}

std::vector<int64_t> detect_peaks(const PulseSignal& sig) {
  check_signal(sig, "detect_peaks");
  const int64_t n = static_cast<int64_t>(sig.samples.size());
  const WelchHr hr = welch_hr(sig);
  const int64_t min_dist =
      std::max<int64_t>(1, std::llround(sig.fs * 60.0 / (1.1 * hr.bpm)));

  // rolling RMS over a 1 s centered window
  const int64_t half = std::max<int64_t>(1, std::llround(sig.fs / 2.0));
  std::vector<double> sq_prefix(static_cast<std::size_t>(n) + 1, 0.0);
  for (int64_t i = 0; i < n; ++i) {
    const double v = sig.samples[static_cast<std::size_t>(i)];
    sq_prefix[static_cast<std::size_t>(i) + 1] =
        sq_prefix[static_cast<std::size_t>(i)] + v * v;
  }
  auto rms_at = [&](int64_t i) {
    const int64_t lo = std::max<int64_t>(0, i - half);
    const int64_t hi = std::min<int64_t>(n - 1, i + half);
    const double ms = (sq_prefix[static_cast<std::size_t>(hi) + 1] -
                       sq_prefix[static_cast<std::size_t>(lo)]) /
                      static_cast<double>(hi - lo + 1);
    return std::sqrt(ms);
  };

  std::vector<int64_t> cand;
  for (int64_t i = 1; i + 1 < n; ++i) {
    const float v = sig.samples[static_cast<std::size_t>(i)];
    if (v > sig.samples[static_cast<std::size_t>(i) - 1] &&
        v >= sig.samples[static_cast<std::size_t>(i) + 1] &&
        v > 0.5 * rms_at(i))
      cand.push_back(i);
  }

  // strongest first; ties resolved by index so the result is deterministic
  std::sort(cand.begin(), cand.end(), [&](int64_t a, int64_t b) {
    const float va = sig.samples[static_cast<std::size_t>(a)];
    const float vb = sig.samples[static_cast<std::size_t>(b)];
    if (va != vb) return va > vb;
    return a < b;
  });
  std::vector<int64_t> kept;
  for (int64_t c : cand) {
    bool ok = true;
    for (int64_t k : kept)
      if (std::llabs(k - c) < min_dist) {
        ok = false;
        break;
      }
    if (ok) kept.push_back(c);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

double sdnn_ms(const std::vector<int64_t>& peaks, double fs) {
  require(fs > 0.0, ErrorKind::kInvalidArgument, "sdnn_ms: fs must be positive");
  require(peaks.size() >= 3, ErrorKind::kInsufficientPeaks,
          "sdnn_ms: need at least 3 peaks");
  std::vector<double> intervals(peaks.size() - 1);
  for (std::size_t i = 1; i < peaks.size(); ++i) {
    require(peaks[i] > peaks[i - 1], ErrorKind::kOrdering,
            "sdnn_ms: peaks must be strictly increasing");
    intervals[i - 1] = (peaks[i] - peaks[i - 1]) * 1000.0 / fs;
  }
  return pop_std(intervals);
}

}  // namespace pb

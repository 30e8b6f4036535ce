#include "pulsebench/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include <json.hpp>

#include "pulsebench/error.hpp"
#include "pulsebench/rng.hpp"

namespace pb {

namespace {

constexpr double kEpochBase = 1.7e9;  // synthetic UNIX start time

using rng::derive_seed;

// Exact phase of a piecewise-linear frequency trace.
class PhaseTrack {
 public:
  explicit PhaseTrack(const std::vector<HrPoint>& hr_trace) {
    require(!hr_trace.empty(), ErrorKind::kInvalidArgument, "empty hr trace");
    for (const auto& p : hr_trace) {
      require(p.bpm >= 40.0 && p.bpm <= 180.0, ErrorKind::kInvalidArgument,
              "hr trace outside [40, 180] bpm");
      if (!t_.empty())
        require(p.t_s > t_.back(), ErrorKind::kOrdering,
                "hr trace times must be strictly increasing");
      t_.push_back(p.t_s);
      f_.push_back(p.bpm / 60.0);
    }
    cum_.assign(t_.size(), 0.0);
    for (std::size_t i = 1; i < t_.size(); ++i)
      cum_[i] = cum_[i - 1] + 0.5 * (f_[i - 1] + f_[i]) * (t_[i] - t_[i - 1]);
  }

  // integral of f from t_[0] to t (frequency clamps outside the knots)
  double cycles(double t) const {
    if (t <= t_.front()) return f_.front() * (t - t_.front());
    if (t >= t_.back()) return cum_.back() + f_.back() * (t - t_.back());
    std::size_t hi = 1;
    while (t_[hi] < t) ++hi;
    const std::size_t lo = hi - 1;
    const double dt = t - t_[lo];
    const double slope = (f_[hi] - f_[lo]) / (t_[hi] - t_[lo]);
    return cum_[lo] + f_[lo] * dt + 0.5 * slope * dt * dt;
  }

  double value(double t) const {
    const double phi = 2.0 * std::numbers::pi * cycles(t);
    return std::sin(phi) + 0.5 * std::sin(2.0 * phi);
  }

 private:
  std::vector<double> t_, f_, cum_;
};

}  // namespace

PulseSignal gen_bvp(const std::vector<HrPoint>& hr_trace, double bvp_fs,
                    double duration_s) {
  require(bvp_fs > 0.0 && duration_s > 0.0, ErrorKind::kInvalidArgument,
          "gen_bvp: fs and duration must be positive");
  PhaseTrack phase(hr_trace);
  const int64_t n = std::llround(bvp_fs * duration_s);
  PulseSignal out{std::vector<float>(static_cast<std::size_t>(n)), bvp_fs};
  for (int64_t i = 0; i < n; ++i)
    out.samples[static_cast<std::size_t>(i)] =
        static_cast<float>(phase.value(i / bvp_fs));
  return out;
}

double bvp_value_at(const std::vector<HrPoint>& hr_trace, double t_s) {
  return PhaseTrack(hr_trace).value(t_s);
}

ClipContainer render_clip(const SynthConfig& cfg) {
  require(cfg.fps > 0.0 && cfg.duration_s > 0.0, ErrorKind::kInvalidArgument,
          "render_clip: fps and duration must be positive");
  require(cfg.height >= 1 && cfg.width >= 1, ErrorKind::kInvalidArgument,
          "render_clip: resolution must be positive");
  require(cfg.smooth_k >= 1, ErrorKind::kInvalidArgument,
          "render_clip: smooth_k must be >= 1");
  PhaseTrack phase(cfg.hr_trace);

  const int64_t H = cfg.height, W = cfg.width;
  const int64_t n_frames = std::llround(cfg.fps * cfg.duration_s);
  const std::size_t px = static_cast<std::size_t>(H * W);
  const std::size_t frame_len = px * 3;

  // Static texture with exact zero spatial mean per channel; a circular shift
  // therefore never changes the frame's spatial mean.
  std::vector<double> pattern(frame_len);
  {
    std::mt19937_64 rng(derive_seed(cfg.seed, 1));
    std::uniform_real_distribution<double> amp(-12.0, 12.0);
    for (auto& v : pattern) v = amp(rng);
    for (int64_t c = 0; c < 3; ++c) {
      double m = 0;
      for (std::size_t p = 0; p < px; ++p) m += pattern[3 * p + c];
      m /= static_cast<double>(px);
      for (std::size_t p = 0; p < px; ++p) pattern[3 * p + c] -= m;
    }
  }

  std::mt19937_64 noise_rng(derive_seed(cfg.seed, 2));
  std::mt19937_64 spec_rng(derive_seed(cfg.seed, 3));
  std::normal_distribution<double> gauss;

  ClipContainer clip;
  clip.width = static_cast<uint16_t>(W);
  clip.height = static_cast<uint16_t>(H);
  clip.nominal_fps = static_cast<float>(cfg.fps);
  clip.frame_ts.resize(static_cast<std::size_t>(n_frames));
  clip.frames.resize(static_cast<std::size_t>(n_frames) * frame_len);

  std::vector<std::vector<double>> ring;  // last smooth_k float frames
  std::vector<double> work(frame_len);
  double u = 0.0;
  for (int64_t i = 0; i < n_frames; ++i) {
    const double t = i / cfg.fps;
    clip.frame_ts[static_cast<std::size_t>(i)] = kEpochBase + t;
    const double s = phase.value(t);
    const double drift =
        cfg.drift_amp * std::sin(2.0 * std::numbers::pi * 0.05 * t);
    u = 0.98 * u + 0.2 * gauss(spec_rng);
    const double spec = cfg.specular_amp * u;

    int64_t dx = 0, dy = 0;
    if (cfg.motion_amp > 0.0) {
      dx = std::llround(cfg.motion_amp *
                        std::sin(2.0 * std::numbers::pi * 0.40 * t));
      dy = std::llround(cfg.motion_amp *
                        std::sin(2.0 * std::numbers::pi * 0.23 * t + 1.0));
      dx = ((dx % W) + W) % W;
      dy = ((dy % H) + H) % H;
    }

    for (int64_t y = 0; y < H; ++y)
      for (int64_t x = 0; x < W; ++x) {
        const std::size_t src =
            static_cast<std::size_t>(((y + dy) % H) * W + (x + dx) % W) * 3;
        const std::size_t dst = static_cast<std::size_t>(y * W + x) * 3;
        for (int64_t c = 0; c < 3; ++c) {
          double v = cfg.base_color[static_cast<std::size_t>(c)] +
                     cfg.diffuse_gain * cfg.skin_vector[static_cast<std::size_t>(c)] * s +
                     drift + spec + pattern[src + static_cast<std::size_t>(c)];
          if (cfg.noise_std > 0.0) v += cfg.noise_std * gauss(noise_rng);
          work[dst + static_cast<std::size_t>(c)] = v;
        }
      }

    ring.push_back(work);
    if (static_cast<int64_t>(ring.size()) > cfg.smooth_k) ring.erase(ring.begin());

    uint8_t* out = clip.frames.data() + static_cast<std::size_t>(i) * frame_len;
    const double inv = 1.0 / static_cast<double>(ring.size());
    for (std::size_t p = 0; p < frame_len; ++p) {
      double acc = 0.0;
      for (const auto& fr : ring) acc += fr[p];
      const double v = std::clamp(acc * inv, 0.0, 255.0);
      out[p] = static_cast<uint8_t>(std::lround(v));
    }
  }

  const int64_t n_bvp = std::llround(cfg.bvp_fs * cfg.duration_s);
  clip.bvp_ts.resize(static_cast<std::size_t>(n_bvp));
  clip.bvp_vals.resize(static_cast<std::size_t>(n_bvp));
  for (int64_t j = 0; j < n_bvp; ++j) {
    const double t = j / cfg.bvp_fs;
    clip.bvp_ts[static_cast<std::size_t>(j)] = kEpochBase + t + cfg.offset_s;
    clip.bvp_vals[static_cast<std::size_t>(j)] = static_cast<float>(phase.value(t));
  }

  nlohmann::json meta;
  meta["generator"] = "pulsebench-synth";
  meta["seed"] = cfg.seed;
  meta["fps"] = cfg.fps;
  meta["duration_s"] = cfg.duration_s;
  nlohmann::json knots = nlohmann::json::array();
  for (const auto& p : cfg.hr_trace) knots.push_back({p.t_s, p.bpm});
  meta["hr_trace"] = knots;
  meta["diffuse_gain"] = cfg.diffuse_gain;
  meta["noise_std"] = cfg.noise_std;
  meta["drift_amp"] = cfg.drift_amp;
  meta["motion_amp"] = cfg.motion_amp;
  meta["specular_amp"] = cfg.specular_amp;
  meta["smooth_k"] = cfg.smooth_k;
  meta["offset_s"] = cfg.offset_s;
  clip.meta = meta.dump();

  clip.validate();
  return clip;
}

std::string gen_corpus(const CorpusParams& p, const std::string& out_dir) {
  require(p.n >= 1, ErrorKind::kInvalidArgument, "gen_corpus: n must be >= 1");
  require(p.hr_lo >= 40.0 && p.hr_hi <= 180.0 && p.hr_lo <= p.hr_hi,
          ErrorKind::kInvalidArgument, "gen_corpus: hr range must sit in [40, 180]");
  std::filesystem::create_directories(out_dir);

  nlohmann::json manifest = nlohmann::json::array();
  for (int64_t i = 0; i < p.n; ++i) {
    std::mt19937_64 rng(derive_seed(p.seed, 100 + static_cast<uint64_t>(i)));
    std::uniform_real_distribution<double> hr_draw(p.hr_lo, p.hr_hi);
    std::uniform_real_distribution<double> off_draw(p.offset_lo, p.offset_hi);
    const double hr = hr_draw(rng);
    const double offset = p.offset_hi > p.offset_lo ? off_draw(rng) : p.offset_lo;

    SynthConfig cfg;
    cfg.duration_s = p.duration_s;
    cfg.fps = p.fps;
    cfg.height = p.height;
    cfg.width = p.width;
    cfg.hr_trace = {{0.0, hr}};
    cfg.diffuse_gain = p.diffuse_gain;
    cfg.noise_std = p.noise_std;
    cfg.drift_amp = p.drift_amp;
    cfg.motion_amp = p.motion_amp;
    cfg.specular_amp = p.specular_amp;
    cfg.smooth_k = p.smooth_k;
    cfg.bvp_fs = p.bvp_fs;
    cfg.offset_s = offset;
    cfg.seed = derive_seed(p.seed, 10000 + static_cast<uint64_t>(i));

    char name[32];
    std::snprintf(name, sizeof(name), "clip_%03lld.pbvc",
                  static_cast<long long>(i));
    const std::string path = (std::filesystem::path(out_dir) / name).string();
    write_clip(render_clip(cfg), path);

    manifest.push_back({{"file", name},
                        {"hr_bpm", hr},
                        {"offset_s", offset},
                        {"seed", cfg.seed},
                        {"duration_s", p.duration_s},
                        {"fps", p.fps},
                        {"diffuse_gain", p.diffuse_gain},
                        {"noise_std", p.noise_std},
                        {"drift_amp", p.drift_amp},
                        {"motion_amp", p.motion_amp},
                        {"specular_amp", p.specular_amp},
                        {"smooth_k", p.smooth_k}});
  }

  const std::string manifest_path =
      (std::filesystem::path(out_dir) / "manifest.json").string();
  std::ofstream os(manifest_path);
  require(os.good(), ErrorKind::kIo, "gen_corpus: cannot write manifest");
  os << manifest.dump(2) << "\n";
  return manifest_path;
}

}  // namespace pb

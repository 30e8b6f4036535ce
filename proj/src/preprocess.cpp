#include "pulsebench/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "pulsebench/error.hpp"
#include "pulsebench/stats.hpp"

namespace pb {

BoxTrack smooth_boxes(const BoxTrack& raw, float alpha) {
  require(!raw.empty(), ErrorKind::kEmptyInput, "smooth_boxes: empty track");
  require(alpha > 0.0f && alpha <= 1.0f, ErrorKind::kInvalidArgument,
          "smooth_boxes: alpha must be in (0, 1]");
  BoxTrack out(raw.size());
  out[0] = raw[0];
  const float keep = 1.0f - alpha;
  for (std::size_t i = 1; i < raw.size(); ++i) {
    out[i].x = alpha * raw[i].x + keep * out[i - 1].x;
    out[i].y = alpha * raw[i].y + keep * out[i - 1].y;
    out[i].w = alpha * raw[i].w + keep * out[i - 1].w;
    out[i].h = alpha * raw[i].h + keep * out[i - 1].h;
  }
  return out;
}

BoxTrack clamp_boxes(const BoxTrack& track, float frame_w, float frame_h) {
  BoxTrack out = track;
  for (auto& b : out) {
    b.w = std::clamp(b.w, 1.0f, frame_w);
    b.h = std::clamp(b.h, 1.0f, frame_h);
    b.x = std::clamp(b.x, 0.0f, frame_w - b.w);
    b.y = std::clamp(b.y, 0.0f, frame_h - b.h);
  }
  return out;
}

Tensor frame_to_tensor(const ClipContainer& clip, int64_t index) {
  require(index >= 0 && index < static_cast<int64_t>(clip.frame_count()),
          ErrorKind::kInvalidArgument, "frame_to_tensor: index out of range");
  const uint8_t* src = clip.frame(static_cast<std::size_t>(index));
  Tensor out({clip.height, clip.width, 3});
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = static_cast<float>(src[i]);
  return out;
}

Tensor crop(const Tensor& img, const Box& box) {
  require(img.shape.size() == 3 && img.shape[2] == 3, ErrorKind::kShape,
          "crop: expected {H, W, 3}");
  const int64_t H = img.shape[0], W = img.shape[1];
  int64_t x0 = std::llround(box.x), y0 = std::llround(box.y);
  int64_t w = std::llround(box.w), h = std::llround(box.h);
  x0 = std::clamp<int64_t>(x0, 0, W - 1);
  y0 = std::clamp<int64_t>(y0, 0, H - 1);
  w = std::clamp<int64_t>(w, 1, W - x0);
  h = std::clamp<int64_t>(h, 1, H - y0);
  Tensor out({h, w, 3});
  for (int64_t i = 0; i < h; ++i)
    for (int64_t j = 0; j < w; ++j)
      for (int64_t c = 0; c < 3; ++c)
        out(i, j, c) = img(y0 + i, x0 + j, c);
  return out;
}

namespace {

// Coverage weights of source cells for one output cell along a single axis.
struct AxisSpan {
  int64_t first;
  std::vector<double> w;
};

std::vector<AxisSpan> axis_spans(int64_t src, int64_t dst) {
  std::vector<AxisSpan> spans(static_cast<std::size_t>(dst));
  const double scale = static_cast<double>(src) / static_cast<double>(dst);
  for (int64_t i = 0; i < dst; ++i) {
    const double lo = i * scale, hi = (i + 1) * scale;
    int64_t first = static_cast<int64_t>(std::floor(lo));
    int64_t last = static_cast<int64_t>(std::ceil(hi)) - 1;
    last = std::min(last, src - 1);
    auto& sp = spans[static_cast<std::size_t>(i)];
    sp.first = first;
    for (int64_t r = first; r <= last; ++r) {
      const double cover = std::min(hi, static_cast<double>(r + 1)) -
                           std::max(lo, static_cast<double>(r));
      sp.w.push_back(cover / scale);
    }
  }
  return spans;
}

}  // namespace

Tensor area_resize(const Tensor& img, int64_t out_h, int64_t out_w) {
  require(img.shape.size() == 3 && img.shape[2] == 3, ErrorKind::kShape,
          "area_resize: expected {H, W, 3}");
  const int64_t H = img.shape[0], W = img.shape[1];
  require(out_h >= 1 && out_w >= 1, ErrorKind::kInvalidArgument,
          "area_resize: output dims must be positive");
  require(out_h <= H && out_w <= W, ErrorKind::kUnsupported,
          "area_resize: upsampling not supported");

  const auto rows = axis_spans(H, out_h);
  const auto cols = axis_spans(W, out_w);
  Tensor out({out_h, out_w, 3});
  for (int64_t i = 0; i < out_h; ++i) {
    const auto& ri = rows[static_cast<std::size_t>(i)];
    for (int64_t j = 0; j < out_w; ++j) {
      const auto& cj = cols[static_cast<std::size_t>(j)];
      double acc[3] = {0, 0, 0};
      for (std::size_t a = 0; a < ri.w.size(); ++a)
        for (std::size_t b = 0; b < cj.w.size(); ++b) {
          const double w = ri.w[a] * cj.w[b];
          const int64_t r = ri.first + static_cast<int64_t>(a);
          const int64_t c = cj.first + static_cast<int64_t>(b);
          for (int64_t ch = 0; ch < 3; ++ch) acc[ch] += w * img(r, c, ch);
        }
      for (int64_t ch = 0; ch < 3; ++ch)
        out(i, j, ch) = static_cast<float>(acc[ch]);
    }
  }
  return out;
}

VideoCube reduce_clip(const ClipContainer& clip, const BoxTrack* boxes,
                      int64_t out_h, int64_t out_w) {
  const int64_t T = static_cast<int64_t>(clip.frame_count());
  require(T > 0, ErrorKind::kEmptyInput, "reduce_clip: clip has no frames");
  if (boxes)
    require(static_cast<int64_t>(boxes->size()) == T, ErrorKind::kInvalidArgument,
            "reduce_clip: box track length != frame count");
  VideoCube cube({T, out_h, out_w, 3});
  for (int64_t t = 0; t < T; ++t) {
    Tensor img = frame_to_tensor(clip, t);
    if (boxes) img = crop(img, (*boxes)[static_cast<std::size_t>(t)]);
    Tensor small = area_resize(img, out_h, out_w);
    uint8_t* dst = cube.data.data() +
                   static_cast<std::size_t>(t) * static_cast<std::size_t>(out_h * out_w * 3);
    for (std::size_t i = 0; i < small.data.size(); ++i) {
      const float v = std::clamp(small.data[i], 0.0f, 255.0f);
      dst[i] = static_cast<uint8_t>(std::lround(v));
    }
  }
  return cube;
}

Tensor normalize_video(const VideoCube& raw_x) {
  require(raw_x.shape.size() == 4 && raw_x.shape[3] == 3, ErrorKind::kShape,
          "normalize_video: expected {T, H, W, 3}");
  const int64_t T = raw_x.shape[0];
  const int64_t per_frame = raw_x.shape[1] * raw_x.shape[2] * 3;
  Tensor x(raw_x.shape);
  std::vector<double> mean(static_cast<std::size_t>(per_frame), 0.0);
  for (int64_t t = 0; t < T; ++t) {
    const uint8_t* src = raw_x.data.data() + t * per_frame;
    for (int64_t p = 0; p < per_frame; ++p)
      mean[static_cast<std::size_t>(p)] += src[p] / 255.0;
  }
  for (auto& m : mean) m /= static_cast<double>(T);
  for (int64_t t = 0; t < T; ++t) {
    const uint8_t* src = raw_x.data.data() + t * per_frame;
    float* dst = x.data.data() + t * per_frame;
    for (int64_t p = 0; p < per_frame; ++p)
      dst[p] = static_cast<float>(src[p] / 255.0 - mean[static_cast<std::size_t>(p)]);
  }
  return x;
}

WindowTensor normalize_window(const VideoCube& raw_x, std::span<const float> raw_y,
                              int64_t t0) {
  require(raw_x.shape.size() == 4 && raw_x.shape[3] == 3, ErrorKind::kShape,
          "normalize_window: expected {win, h, w, 3}");
  require(static_cast<int64_t>(raw_y.size()) == raw_x.shape[0], ErrorKind::kShape,
          "normalize_window: label length != window length");
  WindowTensor w;
  w.t0 = t0;
  w.x = normalize_video(raw_x);
  const double mu = mean_of(raw_y);
  const double sd = pop_std(raw_y);
  require(sd > 1e-12, ErrorKind::kDegenerateLabel,
          "normalize_window: zero-variance label window");
  w.y = Tensor({raw_x.shape[0]});
  for (std::size_t i = 0; i < raw_y.size(); ++i)
    w.y.data[i] = static_cast<float>((raw_y[i] - mu) / sd);
  return w;
}

std::vector<WindowTensor> make_windows(const VideoCube& video,
                                       std::span<const float> labels,
                                       int64_t win, int64_t stride) {
  require(video.shape.size() == 4 && video.shape[3] == 3, ErrorKind::kShape,
          "make_windows: expected {T, H, W, 3}");
  const int64_t T = video.shape[0];
  require(static_cast<int64_t>(labels.size()) == T, ErrorKind::kShape,
          "make_windows: label length != frame count");
  require(stride >= 1, ErrorKind::kInvalidArgument, "make_windows: stride must be >= 1");
  require(T >= win, ErrorKind::kTooShort, "make_windows: fewer frames than window");

  const int64_t per_frame = video.shape[1] * video.shape[2] * 3;
  std::vector<WindowTensor> out;
  for (int64_t t0 = 0; t0 + win <= T; t0 += stride) {
    std::span<const float> y(labels.data() + t0, static_cast<std::size_t>(win));
    if (pop_std(y) <= 1e-12) continue;
    VideoCube slice({win, video.shape[1], video.shape[2], 3});
    std::copy_n(video.data.data() + t0 * per_frame,
                static_cast<std::size_t>(win * per_frame), slice.data.data());
    out.push_back(normalize_window(slice, y, t0));
  }
  return out;
}

}  // namespace pb

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pulsebench/clip.hpp"
#include "pulsebench/tensor.hpp"

namespace pb {

struct Box {
  float x = 0, y = 0, w = 0, h = 0;
};
using BoxTrack = std::vector<Box>;

// EMA jitter suppression; alpha = 1 leaves the track untouched.
BoxTrack smooth_boxes(const BoxTrack& raw, float alpha = 0.3f);
BoxTrack clamp_boxes(const BoxTrack& track, float frame_w, float frame_h);

// One frame as {H, W, 3} floats in 0..255.
Tensor frame_to_tensor(const ClipContainer& clip, int64_t index);

// Integer-rounded rectangle crop, clamped to image bounds.
Tensor crop(const Tensor& img, const Box& box);

// Box-filter downsampling with fractional pixel coverage; upsampling is rejected.
Tensor area_resize(const Tensor& img, int64_t out_h, int64_t out_w);

// {T, H, W, 3} raw video values.
using VideoCube = TensorT<uint8_t>;

// Whole clip to a downscaled cube; boxes, when given, crop each frame first
// (one box per frame).
VideoCube reduce_clip(const ClipContainer& clip, const BoxTrack* boxes,
                      int64_t out_h, int64_t out_w);

struct WindowTensor {
  Tensor x;       // {win, h, w, 3}; /255 with the per-(pixel, channel) temporal mean removed
  Tensor y;       // {win}; zero mean, unit population std
  int64_t t0 = 0; // start frame index in the source video
};

// Input normalization alone, without labels (inference path).
Tensor normalize_video(const VideoCube& raw_x);

WindowTensor normalize_window(const VideoCube& raw_x, std::span<const float> raw_y,
                              int64_t t0 = 0);

// Windows whose label slice has zero variance are dropped, not surfaced as errors.
std::vector<WindowTensor> make_windows(const VideoCube& video,
                                       std::span<const float> labels,
                                       int64_t win = 450, int64_t stride = 450);

}  // namespace pb

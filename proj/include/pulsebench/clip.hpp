#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pb {

// Timestamped clip: raw RGB frames plus the ground-truth BVP stream, each
// sample carrying its own UNIX timestamp. Timestamps are authoritative;
// nominal_fps is advisory only.
struct ClipContainer {
  std::uint16_t width = 0;
  std::uint16_t height = 0;
  float nominal_fps = 0.0f;
  std::vector<double> frame_ts;         // seconds, one per frame
  std::vector<std::uint8_t> frames;     // frame_count * height * width * 3, RGB
  std::vector<double> bvp_ts;           // seconds, one per sample
  std::vector<float> bvp_vals;
  std::string meta;                     // UTF-8 JSON

  std::size_t frame_count() const { return frame_ts.size(); }
  std::size_t frame_bytes() const {
    return static_cast<std::size_t>(width) * height * 3;
  }
  double duration() const {
    return frame_ts.empty() ? 0.0 : frame_ts.back() - frame_ts.front();
  }

  const std::uint8_t* frame(std::size_t i) const {
    return frames.data() + i * frame_bytes();
  }

  // Throws on any broken invariant (sizes, strictly increasing timestamps).
  void validate() const;
};

inline constexpr std::uint16_t kClipFormatVersion = 1;

void write_clip(const ClipContainer& clip, const std::string& path);
ClipContainer read_clip(const std::string& path);

// One BVP value per frame, interpolated at the frame timestamps.
std::vector<float> align_bvp_to_frames(const ClipContainer& clip);

// Copy of the clip with every BVP timestamp shifted by dt seconds.
ClipContainer inject_offset(const ClipContainer& clip, double dt);

}  // namespace pb

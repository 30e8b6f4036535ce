#include "pulsebench/clip.hpp"

#include <fstream>
#include <limits>

#include "pulsebench/error.hpp"
#include "pulsebench/io_util.hpp"
#include "pulsebench/stats.hpp"

namespace pb {

namespace {
constexpr char kMagic[4] = {'P', 'B', 'V', 'C'};

void check_increasing(const std::vector<double>& ts, const char* what) {
  for (std::size_t i = 1; i < ts.size(); ++i)
    require(ts[i] > ts[i - 1], ErrorKind::kOrdering,
            std::string(what) + " timestamps must be strictly increasing");
}
}  // namespace

void ClipContainer::validate() const {
  require(width >= 1 && height >= 1, ErrorKind::kInvalidArgument,
          "clip needs nonzero resolution");
  require(frames.size() == frame_count() * frame_bytes(), ErrorKind::kShape,
          "frame buffer size does not match frame count");
  require(bvp_ts.size() == bvp_vals.size(), ErrorKind::kShape,
          "bvp timestamps/values length mismatch");
  check_increasing(frame_ts, "frame");
  check_increasing(bvp_ts, "bvp");
}

void write_clip(const ClipContainer& clip, const std::string& path) {
  clip.validate();
  require(clip.frame_count() <= std::numeric_limits<std::uint32_t>::max() &&
              clip.bvp_ts.size() <= std::numeric_limits<std::uint32_t>::max() &&
              clip.meta.size() <= std::numeric_limits<std::uint32_t>::max(),
          ErrorKind::kInvalidArgument, "clip too large for container format");

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require(os.good(), ErrorKind::kIo, "cannot open for writing: " + path);

  io::write_magic(os, kMagic);
  io::write_le<std::uint16_t>(os, kClipFormatVersion);
  io::write_le<std::uint16_t>(os, clip.width);
  io::write_le<std::uint16_t>(os, clip.height);
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(clip.frame_count()));
  io::write_le<float>(os, clip.nominal_fps);
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(clip.bvp_ts.size()));
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(clip.meta.size()));
  os.write(clip.meta.data(), static_cast<std::streamsize>(clip.meta.size()));
  io::write_le_span<double>(os, clip.frame_ts);
  io::write_le_span<std::uint8_t>(os, clip.frames);
  io::write_le_span<double>(os, clip.bvp_ts);
  io::write_le_span<float>(os, clip.bvp_vals);
  os.flush();
  require(os.good(), ErrorKind::kIo, "write failed: " + path);
}

ClipContainer read_clip(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), ErrorKind::kIo, "cannot open for reading: " + path);

  io::expect_magic(is, kMagic, "not a PBVC clip file: " + path);
  const auto version = io::read_le<std::uint16_t>(is);
  require(version == kClipFormatVersion, ErrorKind::kFormat,
          "unsupported PBVC version " + std::to_string(version));

  ClipContainer clip;
  clip.width = io::read_le<std::uint16_t>(is);
  clip.height = io::read_le<std::uint16_t>(is);
  const auto frame_count = io::read_le<std::uint32_t>(is);
  clip.nominal_fps = io::read_le<float>(is);
  const auto bvp_count = io::read_le<std::uint32_t>(is);
  const auto meta_len = io::read_le<std::uint32_t>(is);

  clip.meta.resize(meta_len);
  if (meta_len > 0) {
    is.read(clip.meta.data(), meta_len);
    require(is.good(), ErrorKind::kIo, "truncated meta: " + path);
  }
  clip.frame_ts.resize(frame_count);
  io::read_le_span<double>(is, clip.frame_ts);
  clip.frames.resize(static_cast<std::size_t>(frame_count) * clip.frame_bytes());
  io::read_le_span<std::uint8_t>(is, clip.frames);
  clip.bvp_ts.resize(bvp_count);
  io::read_le_span<double>(is, clip.bvp_ts);
  clip.bvp_vals.resize(bvp_count);
  io::read_le_span<float>(is, clip.bvp_vals);

  clip.validate();
  return clip;
}

std::vector<float> align_bvp_to_frames(const ClipContainer& clip) {
  require(!clip.bvp_ts.empty(), ErrorKind::kEmptyInput,
          "clip has no BVP samples to align");
  return linear_interp<float>(clip.bvp_ts, clip.bvp_vals, clip.frame_ts);
}

ClipContainer inject_offset(const ClipContainer& clip, double dt) {
  ClipContainer out = clip;
  for (auto& t : out.bvp_ts) t += dt;
  return out;
}

}  // namespace pb

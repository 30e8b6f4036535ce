#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "pulsebench/clip.hpp"
#include "pulsebench/error.hpp"

using namespace pb;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("clipio_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

ClipContainer make_clip(int frames = 12, unsigned seed = 42) {
  ClipContainer c;
  c.width = 8;
  c.height = 8;
  c.nominal_fps = 30.0f;
  c.meta = R"({"source":"test"})";
  std::mt19937 rng(seed);
  std::uniform_int_distribution<int> px(0, 255);
  c.frame_ts.resize(frames);
  c.frames.resize(static_cast<std::size_t>(frames) * 8 * 8 * 3);
  for (int i = 0; i < frames; ++i) c.frame_ts[i] = 1.7e9 + i / 30.0;
  for (auto& b : c.frames) b = static_cast<uint8_t>(px(rng));
  const int nb = frames * 2;
  c.bvp_ts.resize(nb);
  c.bvp_vals.resize(nb);
  std::normal_distribution<float> bv;
  for (int i = 0; i < nb; ++i) {
    c.bvp_ts[i] = 1.7e9 + i / 60.0;
    c.bvp_vals[i] = bv(rng);
  }
  return c;
}

std::vector<char> slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("clip write/read round trip preserves every field") {
  TempDir tmp;
  auto clip = make_clip();
  const auto path = tmp.path / "a.pbvc";
  write_clip(clip, path.string());
  auto back = read_clip(path.string());

  CHECK(back.width == clip.width);
  CHECK(back.height == clip.height);
  CHECK(back.nominal_fps == clip.nominal_fps);
  CHECK(back.meta == clip.meta);
  CHECK(back.frame_ts == clip.frame_ts);
  CHECK(back.frames == clip.frames);
  CHECK(back.bvp_ts == clip.bvp_ts);
  CHECK(back.bvp_vals == clip.bvp_vals);
}

TEST_CASE("clip serialization is deterministic byte for byte") {
  TempDir tmp;
  auto clip = make_clip();
  const auto p1 = tmp.path / "a.pbvc";
  const auto p2 = tmp.path / "b.pbvc";
  write_clip(clip, p1.string());
  write_clip(clip, p2.string());
  CHECK(slurp(p1) == slurp(p2));
}

TEST_CASE("clip header starts with magic and version") {
  TempDir tmp;
  auto clip = make_clip(3);
  const auto path = tmp.path / "a.pbvc";
  write_clip(clip, path.string());
  auto bytes = slurp(path);
  REQUIRE(bytes.size() >= 6);
  CHECK(bytes[0] == 'P');
  CHECK(bytes[1] == 'B');
  CHECK(bytes[2] == 'V');
  CHECK(bytes[3] == 'C');
  CHECK(static_cast<uint8_t>(bytes[4]) == 1);
  CHECK(static_cast<uint8_t>(bytes[5]) == 0);
}

TEST_CASE("read rejects wrong magic") {
  TempDir tmp;
  const auto path = tmp.path / "bad.pbvc";
  {
    std::ofstream os(path, std::ios::binary);
    os << "NOPE" << std::string(64, '\0');
  }
  try {
    (void)read_clip(path.string());
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kFormat);
  }
}

TEST_CASE("read rejects truncated file") {
  TempDir tmp;
  auto clip = make_clip();
  const auto full = tmp.path / "full.pbvc";
  write_clip(clip, full.string());
  auto bytes = slurp(full);
  const auto cut = tmp.path / "cut.pbvc";
  {
    std::ofstream os(cut, std::ios::binary);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  try {
    (void)read_clip(cut.string());
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kIo);
  }
}

TEST_CASE("read rejects unsupported version") {
  TempDir tmp;
  auto clip = make_clip(3);
  const auto path = tmp.path / "a.pbvc";
  write_clip(clip, path.string());
  auto bytes = slurp(path);
  bytes[4] = 9;
  const auto bumped = tmp.path / "v9.pbvc";
  {
    std::ofstream os(bumped, std::ios::binary);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  try {
    (void)read_clip(bumped.string());
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kFormat);
  }
}

TEST_CASE("validate rejects inconsistent buffers") {
  auto clip = make_clip();
  SUBCASE("frame buffer size mismatch") {
    clip.frames.pop_back();
    CHECK_THROWS_AS(clip.validate(), Error);
  }
  SUBCASE("bvp length mismatch") {
    clip.bvp_vals.pop_back();
    CHECK_THROWS_AS(clip.validate(), Error);
  }
  SUBCASE("non-increasing frame timestamps") {
    clip.frame_ts[2] = clip.frame_ts[1];
    CHECK_THROWS_AS(clip.validate(), Error);
  }
  SUBCASE("non-increasing bvp timestamps") {
    clip.bvp_ts[3] = clip.bvp_ts[2] - 1e-4;
    CHECK_THROWS_AS(clip.validate(), Error);
  }
}

TEST_CASE("align_bvp_to_frames interpolates a ramp exactly") {
  ClipContainer c = make_clip(10);
  // bvp is a ramp in time: value == (t - t0) * 120
  const double t0 = c.bvp_ts.front();
  for (std::size_t i = 0; i < c.bvp_ts.size(); ++i)
    c.bvp_vals[i] = static_cast<float>((c.bvp_ts[i] - t0) * 120.0);
  auto aligned = align_bvp_to_frames(c);
  REQUIRE(aligned.size() == c.frame_ts.size());
  for (std::size_t i = 0; i < aligned.size(); ++i) {
    const double expect = (c.frame_ts[i] - t0) * 120.0;
    // frames past the last bvp sample clamp to the final value
    const double last_t = c.bvp_ts.back();
    const double clamped = std::min(expect, (last_t - t0) * 120.0);
    CHECK(aligned[i] == doctest::Approx(clamped).epsilon(1e-5));
  }
}

TEST_CASE("align_bvp_to_frames requires bvp samples") {
  auto c = make_clip();
  c.bvp_ts.clear();
  c.bvp_vals.clear();
  try {
    (void)align_bvp_to_frames(c);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kEmptyInput);
  }
}

TEST_CASE("inject_offset shifts bvp timestamps only and is invertible") {
  auto c = make_clip();
  auto shifted = inject_offset(c, 0.15);
  CHECK(shifted.frame_ts == c.frame_ts);
  CHECK(shifted.frames == c.frames);
  CHECK(shifted.bvp_vals == c.bvp_vals);
  for (std::size_t i = 0; i < c.bvp_ts.size(); ++i)
    CHECK(shifted.bvp_ts[i] == doctest::Approx(c.bvp_ts[i] + 0.15).epsilon(1e-12));

  auto undone = inject_offset(shifted, -0.15);
  for (std::size_t i = 0; i < c.bvp_ts.size(); ++i)
    CHECK(undone.bvp_ts[i] == doctest::Approx(c.bvp_ts[i]).epsilon(1e-9));
}

TEST_CASE("offset then align equals aligning at shifted query times") {
  // for a smooth signal, align(inject_offset(c, dt)) ~= values of the
  // original bvp at (frame_ts - dt)
  auto c = make_clip(20);
  const double t0 = c.bvp_ts.front();
  for (std::size_t i = 0; i < c.bvp_ts.size(); ++i)
    c.bvp_vals[i] = static_cast<float>(std::sin(2.0 * (c.bvp_ts[i] - t0)));
  const double dt = 0.1;
  auto shifted = inject_offset(c, dt);
  auto a = align_bvp_to_frames(shifted);
  for (std::size_t i = 0; i < c.frame_ts.size(); ++i) {
    const double tq = c.frame_ts[i] - t0 - dt;
    if (tq < 0.0 || tq > c.bvp_ts.back() - t0) continue;
    CHECK(a[i] == doctest::Approx(std::sin(2.0 * tq)).epsilon(2e-3));
  }
}

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "pulsebench/error.hpp"

namespace pb::io {

static_assert(std::endian::native == std::endian::little,
              "serialization assumes a little-endian host");

template <class T>
void write_le(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
void write_le_span(std::ostream& os, std::span<const T> v) {
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <class T>
T read_le(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  require(is.good(), ErrorKind::kIo, "unexpected end of file");
  return v;
}

template <class T>
void read_le_span(std::istream& is, std::span<T> v) {
  is.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(v.size() * sizeof(T)));
  require(is.good(), ErrorKind::kIo, "unexpected end of file");
}

inline void write_magic(std::ostream& os, const char magic[4]) {
  os.write(magic, 4);
}

inline void expect_magic(std::istream& is, const char magic[4], const std::string& what) {
  char buf[4] = {0, 0, 0, 0};
  is.read(buf, 4);
  require(is.good(), ErrorKind::kIo, "unexpected end of file reading magic");
  require(std::memcmp(buf, magic, 4) == 0, ErrorKind::kFormat, what);
}

}  // namespace pb::io

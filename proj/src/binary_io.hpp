#pragma once

// Little-endian primitives shared by the on-disk formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "xsense/error.hpp"

namespace xsense::detail {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  template <typename T>
    requires std::is_arithmetic_v<T>
  void put(T value) {
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out_.write(buf, sizeof(T));
  }

  void put_bytes(const char* data, std::size_t n) { out_.write(data, static_cast<std::streamsize>(n)); }

  void put_magic(const char (&magic)[5]) { put_bytes(magic, 4); }

  // u32 length prefix followed by raw bytes.
  void put_string(const std::string& s);

 private:
  std::ostream& out_;
};

class BinaryReader {
 public:
  BinaryReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  template <typename T>
    requires std::is_arithmetic_v<T>
  T get() {
    char buf[sizeof(T)];
    read_exact(buf, sizeof(T));
    T value;
    std::memcpy(&value, buf, sizeof(T));
    return value;
  }

  void read_exact(char* data, std::size_t n);
  void expect_magic(const char (&magic)[5]);
  std::string get_string();
  bool at_eof();

  const std::string& source() const { return source_; }

 private:
  std::istream& in_;
  std::string source_;
};

}  // namespace xsense::detail

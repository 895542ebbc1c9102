#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

#include "glimg/error.hpp"
#include "glimg/types.hpp"

namespace glimg::binary {

// All multi-byte values are stored little-endian.
template <typename T>
T to_little(T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  template <typename T>
  void put(T v) {
    v = to_little(v);
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }

  void put_bytes(const void* data, std::size_t size) { out_.write(static_cast<const char*>(data), size); }

  void put_string(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    put_bytes(s.data(), s.size());
  }

  /// Row-major doubles, no shape prefix.
  template <typename Derived>
  void put_matrix(const Eigen::DenseBase<Derived>& m) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Index r = 0; r < m.rows(); ++r) {
      for (Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = to_little<double>(m(r, c));
      put_bytes(row.data(), row.size() * sizeof(double));
    }
  }

  bool ok() const { return static_cast<bool>(out_); }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  template <typename T>
  T get() {
    T v;
    get_bytes(&v, sizeof(T));
    return to_little(v);
  }

  void get_bytes(void* data, std::size_t size) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(size));
    if (static_cast<std::size_t>(in_.gcount()) != size) throw CorruptModelError("unexpected end of file");
  }

  std::string get_string(std::size_t max_len = 1 << 20) {
    const auto len = get<std::uint32_t>();
    if (len > max_len) throw CorruptModelError("string length out of range");
    std::string s(len, '\0');
    get_bytes(s.data(), len);
    return s;
  }

  template <typename MatrixType>
  void get_matrix(MatrixType& m) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Index r = 0; r < m.rows(); ++r) {
      get_bytes(row.data(), row.size() * sizeof(double));
      for (Index c = 0; c < m.cols(); ++c) m(r, c) = to_little(row[static_cast<std::size_t>(c)]);
    }
  }

  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::istream& in_;
};

}  // namespace glimg::binary

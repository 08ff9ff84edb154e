#pragma once
// Little-endian binary stream helpers shared by checkpoints, feature dumps and
// core-type serialization.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "hicmd/tensor.hpp"

namespace hicmd::io {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& os) : os_(os) {}

  template <class V>
  void pod(const V& v) {
    os_.write(reinterpret_cast<const char*>(&v), sizeof(V));
  }
  void u32(std::uint32_t v) { pod(v); }
  void u64(std::uint64_t v) { pod(v); }
  void i32(std::int32_t v) { pod(v); }
  void f64(double v) { pod(v); }
  void str(const std::string& s) {
    u64(s.size());
    os_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void shape(const Shape& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    for (int d : s) i32(d);
  }
  template <class T>
  void tensor(const Tensor<T>& t) {
    shape(t.shape());
    os_.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(T)));
  }
  template <class T>
  void vec(const std::vector<T>& v) {
    u64(v.size());
    os_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
  }
  bool ok() const { return static_cast<bool>(os_); }

 private:
  std::ostream& os_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::istream& is) : is_(is) {}

  template <class V>
  V pod() {
    V v{};
    is_.read(reinterpret_cast<char*>(&v), sizeof(V));
    if (!is_) throw Error("unexpected end of binary stream");
    return v;
  }
  std::uint32_t u32() { return pod<std::uint32_t>(); }
  std::uint64_t u64() { return pod<std::uint64_t>(); }
  std::int32_t i32() { return pod<std::int32_t>(); }
  double f64() { return pod<double>(); }
  std::string str(std::uint64_t limit = 1u << 26) {
    const auto n = u64();
    if (n > limit) throw Error("string length " + std::to_string(n) + " exceeds limit");
    std::string s(n, '\0');
    is_.read(s.data(), static_cast<std::streamsize>(n));
    if (!is_) throw Error("unexpected end of binary stream");
    return s;
  }
  Shape shape() {
    const auto rank = u32();
    if (rank > 8) throw Error("tensor rank " + std::to_string(rank) + " too large");
    Shape s(rank);
    for (auto& d : s) {
      d = i32();
      if (d < 0) throw Error("negative tensor dimension");
    }
    return s;
  }
  template <class T>
  Tensor<T> tensor() {
    Shape s = shape();
    Tensor<T> t(s);
    is_.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(T)));
    if (!is_) throw Error("unexpected end of binary stream");
    return t;
  }
  template <class T>
  std::vector<T> vec(std::uint64_t limit = 1u << 28) {
    const auto n = u64();
    if (n > limit) throw Error("vector length exceeds limit");
    std::vector<T> v(n);
    is_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)));
    if (!is_) throw Error("unexpected end of binary stream");
    return v;
  }

 private:
  std::istream& is_;
};

}  // namespace hicmd::io

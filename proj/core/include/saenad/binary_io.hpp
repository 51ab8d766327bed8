#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace saenad {

static_assert(std::endian::native == std::endian::little, "binary containers assume a little-endian host");

// Raw little-endian writer. Doubles are stored as their IEEE-754 bit pattern so
// every container round-trips bit-exactly.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  void magic(std::string_view tag);
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void i64(std::int64_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  void str(std::string_view s);

  template <class T>
  void vec(const std::vector<T>& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    u64(v.size());
    if (!v.empty()) raw(v.data(), v.size() * sizeof(T));
  }

  void matrix(const Eigen::MatrixXd& m);
  void vector(const Eigen::VectorXd& v);

 private:
  void raw(const void* data, std::size_t n);
  std::ostream& out_;
};

class BinaryReader {
 public:
  BinaryReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  // Throws IoError unless the next bytes equal `tag`.
  void expect_magic(std::string_view tag);
  std::uint32_t u32() { return pod<std::uint32_t>(); }
  std::uint64_t u64() { return pod<std::uint64_t>(); }
  std::int64_t i64() { return pod<std::int64_t>(); }
  double f64() { return pod<double>(); }
  std::string str();

  template <class T>
  std::vector<T> vec() {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto n = length(sizeof(T));
    std::vector<T> v(n);
    if (n) raw(v.data(), n * sizeof(T));
    return v;
  }

  Eigen::MatrixXd matrix();
  Eigen::VectorXd vector();

  // Throws IoError if unread bytes remain.
  void expect_end();

 private:
  template <class T>
  T pod() {
    T v;
    raw(&v, sizeof v);
    return v;
  }
  std::uint64_t length(std::size_t elem_size);
  void raw(void* data, std::size_t n);

  std::istream& in_;
  std::string source_;
};

// Writes through a temporary sibling file and renames it into place, so a
// failed write never leaves a partial artifact at `path`.
void write_file_atomically(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body);

std::string read_file_bytes(const std::filesystem::path& path);

}  // namespace saenad

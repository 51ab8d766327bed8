#include "saenad/binary_io.hpp"

#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "saenad/error.hpp"

namespace saenad {

void BinaryWriter::magic(std::string_view tag) { raw(tag.data(), tag.size()); }

void BinaryWriter::str(std::string_view s) {
  u64(s.size());
  raw(s.data(), s.size());
}

void BinaryWriter::matrix(const Eigen::MatrixXd& m) {
  u64(static_cast<std::uint64_t>(m.rows()));
  u64(static_cast<std::uint64_t>(m.cols()));
  if (m.size()) raw(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double));
}

void BinaryWriter::vector(const Eigen::VectorXd& v) {
  u64(static_cast<std::uint64_t>(v.size()));
  if (v.size()) raw(v.data(), static_cast<std::size_t>(v.size()) * sizeof(double));
}

void BinaryWriter::raw(const void* data, std::size_t n) {
  out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out_) throw IoError("write failed");
}

void BinaryReader::expect_magic(std::string_view tag) {
  std::string got(tag.size(), '\0');
  raw(got.data(), got.size());
  if (got != tag) throw IoError(source_ + ": bad magic, expected '" + std::string(tag) + "'");
}

std::string BinaryReader::str() {
  const auto n = length(1);
  std::string s(n, '\0');
  if (n) raw(s.data(), n);
  return s;
}

Eigen::MatrixXd BinaryReader::matrix() {
  const auto rows = u64();
  const auto cols = length(sizeof(double) * std::max<std::uint64_t>(rows, 1));
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  if (m.size()) raw(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double));
  return m;
}

Eigen::VectorXd BinaryReader::vector() {
  const auto n = length(sizeof(double));
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  if (n) raw(v.data(), n * sizeof(double));
  return v;
}

void BinaryReader::expect_end() {
  if (in_.peek() != std::char_traits<char>::eof()) throw IoError(source_ + ": trailing bytes");
}

std::uint64_t BinaryReader::length(std::size_t elem_size) {
  const auto n = u64();
  // Guards against allocating from a corrupted length field.
  constexpr std::uint64_t kMaxBytes = std::uint64_t{1} << 40;
  if (elem_size && n > kMaxBytes / elem_size) throw IoError(source_ + ": implausible length field");
  return n;
}

void BinaryReader::raw(void* data, std::size_t n) {
  in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in_.gcount()) != n) throw IoError(source_ + ": truncated");
}

void write_file_atomically(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    try {
      body(out);
      out.flush();
      if (!out) throw IoError("write failed: " + tmp.string());
    } catch (...) {
      out.close();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw;
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace saenad

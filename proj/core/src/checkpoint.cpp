#include <fstream>

#include "saenad/binary_io.hpp"
#include "saenad/error.hpp"
#include "saenad/model.hpp"

namespace saenad {

namespace {
constexpr std::string_view kMagic = "SAENADCK";
constexpr std::uint32_t kVersion = 1;
}  // namespace

void write_checkpoint(std::ostream& out, const ModelParams& params, std::uint64_t seed) {
  params.validate();
  BinaryWriter w(out);
  w.magic(kMagic);
  w.u32(kVersion);
  w.u64(params.arch.pois);
  w.u64(params.arch.hidden1);
  w.u64(params.arch.hidden);
  w.u64(params.arch.aspects);
  w.u32(static_cast<std::uint32_t>(params.arch.variant));
  w.f64(params.arch.dropout);
  w.u64(seed);
  for_each_tensor(params.w, [&](std::string_view name, const auto& t) {
    w.str(name);
    w.matrix(t);
  });
}

Checkpoint read_checkpoint(std::istream& in, const std::string& source) {
  BinaryReader r(in, source);
  r.expect_magic(kMagic);
  if (const auto v = r.u32(); v != kVersion) {
    throw IoError(source + ": unsupported checkpoint version " + std::to_string(v));
  }
  Checkpoint ck;
  auto& a = ck.params.arch;
  a.pois = r.u64();
  a.hidden1 = r.u64();
  a.hidden = r.u64();
  a.aspects = r.u64();
  const auto variant = r.u32();
  if (variant > static_cast<std::uint32_t>(Variant::SAE_NAD)) throw IoError(source + ": unknown variant tag");
  a.variant = static_cast<Variant>(variant);
  a.dropout = r.f64();
  ck.seed = r.u64();
  for_each_tensor(ck.params.w, [&](std::string_view name, auto& t) {
    if (const auto got = r.str(); got != name) {
      throw IoError(source + ": expected tensor " + std::string(name) + ", found '" + got + "'");
    }
    Eigen::MatrixXd m = r.matrix();
    if constexpr (std::is_same_v<std::decay_t<decltype(t)>, Eigen::VectorXd>) {
      if (m.cols() != 1) throw IoError(source + ": tensor " + std::string(name) + " must be a column vector");
      t = m.col(0);
    } else {
      t = std::move(m);
    }
  });
  r.expect_end();
  try {
    ck.params.validate();
  } catch (const Error& e) {
    throw IoError(source + ": " + e.what());
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params, std::uint64_t seed) {
  write_file_atomically(path, [&](std::ostream& out) { write_checkpoint(out, params, seed); });
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_checkpoint(in, path.string());
}

}  // namespace saenad

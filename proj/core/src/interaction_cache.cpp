#include "saenad/interaction_cache.hpp"

#include <fstream>

#include "saenad/binary_io.hpp"
#include "saenad/error.hpp"

namespace saenad {

namespace {
constexpr std::string_view kMagic = "SAENADDS";
constexpr std::uint32_t kVersion = 1;
}  // namespace

void InteractionDataCodec::write(std::ostream& out, const InteractionData& d) {
  BinaryWriter w(out);
  w.u64(d.users_);
  w.u64(d.pois_);
  w.f64(d.alpha_);
  w.f64(d.epsilon_);
  w.vec(d.row_ptr_);
  w.vec(d.cols_);
  w.vec(d.counts_);
  w.vec(d.confidence_);
}

InteractionData InteractionDataCodec::read(std::istream& in, const std::string& source) {
  BinaryReader r(in, source);
  InteractionData d;
  d.users_ = r.u64();
  d.pois_ = r.u64();
  d.alpha_ = r.f64();
  d.epsilon_ = r.f64();
  d.row_ptr_ = r.vec<std::uint64_t>();
  d.cols_ = r.vec<PoiIndex>();
  d.counts_ = r.vec<std::uint32_t>();
  d.confidence_ = r.vec<double>();
  const auto nnz = d.cols_.size();
  if (d.row_ptr_.size() != d.users_ + 1 || d.row_ptr_.back() != nnz || d.counts_.size() != nnz ||
      d.confidence_.size() != nnz) {
    throw IoError(source + ": inconsistent interaction matrix");
  }
  for (auto c : d.cols_)
    if (c >= d.pois_) throw IoError(source + ": column index out of range");
  return d;
}

void write_dataset(std::ostream& out, const PreparedDataset& ds, std::uint64_t key) {
  BinaryWriter w(out);
  w.magic(kMagic);
  w.u32(kVersion);
  w.u64(key);
  w.u64(ds.catalog.size());
  for (PoiIndex i = 0; i < ds.catalog.size(); ++i) {
    w.str(ds.catalog.id(i));
    w.f64(ds.catalog.point(i).lat);
    w.f64(ds.catalog.point(i).lon);
  }
  w.u64(ds.user_ids.size());
  for (const auto& u : ds.user_ids) w.str(u);
  InteractionDataCodec::write(out, ds.train);
  w.u64(ds.test.size());
  for (const auto& t : ds.test) w.vec(t);
}

PreparedDataset read_dataset(std::istream& in, const std::string& source, std::uint64_t* key) {
  BinaryReader r(in, source);
  r.expect_magic(kMagic);
  if (const auto v = r.u32(); v != kVersion) throw IoError(source + ": unsupported dataset version " + std::to_string(v));
  const auto stored_key = r.u64();
  if (key) *key = stored_key;

  PreparedDataset ds;
  const auto pois = r.u64();
  for (std::uint64_t i = 0; i < pois; ++i) {
    auto id = r.str();
    GeoPoint p;
    p.lat = r.f64();
    p.lon = r.f64();
    ds.catalog.add(std::move(id), p);
  }
  const auto users = r.u64();
  ds.user_ids.reserve(users);
  for (std::uint64_t u = 0; u < users; ++u) ds.user_ids.push_back(r.str());
  ds.train = InteractionDataCodec::read(in, source);
  const auto tests = r.u64();
  ds.test.reserve(tests);
  for (std::uint64_t u = 0; u < tests; ++u) ds.test.push_back(r.vec<PoiIndex>());
  r.expect_end();

  if (ds.train.user_count() != ds.user_ids.size() || ds.train.poi_count() != ds.catalog.size() ||
      ds.test.size() != ds.user_ids.size()) {
    throw IoError(source + ": dataset sections disagree on M or N");
  }
  return ds;
}

void save_dataset(const std::filesystem::path& path, const PreparedDataset& ds, std::uint64_t key) {
  write_file_atomically(path, [&](std::ostream& out) { write_dataset(out, ds, key); });
}

PreparedDataset load_dataset(const std::filesystem::path& path, std::uint64_t* key) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_dataset(in, path.string(), key);
}

}  // namespace saenad

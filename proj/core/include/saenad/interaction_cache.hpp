#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "saenad/data_ingest.hpp"

namespace saenad {

// Everything preprocessing hands to training and evaluation.
struct PreparedDataset {
  PoiCatalog catalog;
  std::vector<std::string> user_ids;
  InteractionData train;
  std::vector<std::vector<PoiIndex>> test;

  friend bool operator==(const PreparedDataset& a, const PreparedDataset& b) {
    return a.catalog.content_hash() == b.catalog.content_hash() && a.user_ids == b.user_ids && a.train == b.train &&
           a.test == b.test;
  }
};

class InteractionDataCodec {
 public:
  static void write(std::ostream& out, const InteractionData& d);
  static InteractionData read(std::istream& in, const std::string& source);
};

// Binary container: magic, format version, cache key, then the dataset.
void write_dataset(std::ostream& out, const PreparedDataset& ds, std::uint64_t key);
PreparedDataset read_dataset(std::istream& in, const std::string& source, std::uint64_t* key = nullptr);

void save_dataset(const std::filesystem::path& path, const PreparedDataset& ds, std::uint64_t key);
PreparedDataset load_dataset(const std::filesystem::path& path, std::uint64_t* key = nullptr);

}  // namespace saenad

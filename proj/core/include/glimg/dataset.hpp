#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "glimg/types.hpp"

namespace glimg {

struct RatingRecord {
  std::string user_id;
  std::string item_id;
  double rating = 0.0;
  std::optional<std::int64_t> timestamp;
};

enum class RatingFormat { csv, tsv, movielens_dat };

/// Accepts "csv", "tsv", "movielens-dat" (also "dat").
RatingFormat parse_rating_format(std::string_view name);
std::string_view to_string(RatingFormat format);

/// Reads user,item,rating[,timestamp] lines. Blank lines are skipped, and a
/// first line whose rating column is not numeric is treated as a header.
/// Duplicate (user, item) pairs keep the last occurrence.
/// Throws IoError if the file cannot be opened, ParseError on a malformed line.
std::vector<RatingRecord> load_ratings(const std::filesystem::path& path, RatingFormat format);

/// Same as load_ratings but over an in-memory buffer.
std::vector<RatingRecord> parse_ratings(std::string_view text, RatingFormat format);

/// Alternating user/item density filter iterated to a fixed point: every
/// surviving user and item has at least `threshold` surviving ratings.
/// Record order is preserved.
std::vector<RatingRecord> filter_min_ratings(std::vector<RatingRecord> records, std::size_t threshold);

std::vector<RatingRecord> to_implicit(std::vector<RatingRecord> records);

/// Bidirectional map between opaque string ids and dense 0-based indices.
class IdIndex {
 public:
  IdIndex() = default;
  explicit IdIndex(std::vector<std::string> ids);

  Index size() const noexcept { return static_cast<Index>(ids_.size()); }
  const std::string& id(Index index) const { return ids_.at(static_cast<std::size_t>(index)); }
  std::optional<Index> find(std::string_view id) const;
  const std::vector<std::string>& ids() const noexcept { return ids_; }

  /// Returns the index of `id`, appending it if new.
  Index intern(const std::string& id);

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, Index> lookup_;
};

struct RatingEntry {
  Index item = 0;
  double rating = 0.0;
};

struct RatingTriplet {
  Index user = 0;
  Index item = 0;
  double rating = 0.0;
};

/// Sparse m x n rating matrix stored as per-user rows sorted by item index.
/// The id maps are shared, so the train/validation/test matrices of one
/// split all agree on m, n and every index.
class RatingMatrix {
 public:
  RatingMatrix() = default;
  RatingMatrix(std::shared_ptr<const IdIndex> users, std::shared_ptr<const IdIndex> items,
               std::span<const RatingTriplet> entries);

  Index num_users() const noexcept { return users_ ? users_->size() : 0; }
  Index num_items() const noexcept { return items_ ? items_->size() : 0; }
  std::size_t nnz() const noexcept { return nnz_; }

  std::span<const RatingEntry> row(Index user) const {
    return rows_.at(static_cast<std::size_t>(user));
  }
  /// 0 when the user has not rated the item.
  double rating(Index user, Index item) const;
  bool contains(Index user, Index item) const;

  const IdIndex& users() const { return *users_; }
  const IdIndex& items() const { return *items_; }
  const std::shared_ptr<const IdIndex>& user_index() const noexcept { return users_; }
  const std::shared_ptr<const IdIndex>& item_index() const noexcept { return items_; }

  /// All entries in (user, item) order.
  std::vector<RatingTriplet> triplets() const;
  /// Zero-imputed dense copy.
  Matrix to_dense() const;
  /// Dense copy of a single user's row.
  Vector dense_row(Index user) const;

 private:
  std::shared_ptr<const IdIndex> users_;
  std::shared_ptr<const IdIndex> items_;
  std::vector<std::vector<RatingEntry>> rows_;
  std::size_t nnz_ = 0;
};

/// Assigns indices in first-occurrence order. Throws DataError on empty input.
RatingMatrix build_matrix(std::span<const RatingRecord> records);

struct SplitRatios {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

struct DatasetSplit {
  RatingMatrix train;
  RatingMatrix validation;
  RatingMatrix test;
  SplitRatios ratios;
  std::uint64_t seed = 0;
};

/// Per-user stratified random split. Each user's ratings are shuffled with a
/// generator seeded once from `seed`; validation and test take
/// floor(ratio * count) entries each, train keeps the remainder. Users with
/// fewer than three ratings stay entirely in train.
DatasetSplit split_dataset(const RatingMatrix& matrix, SplitRatios ratios, std::uint64_t seed);

struct SplitManifest {
  std::size_t min_ratings = 0;
  bool implicit = false;
  std::string source;
};

/// Writes train.csv, validation.csv, test.csv and split.json into `dir`.
void write_split(const DatasetSplit& split, const SplitManifest& manifest,
                 const std::filesystem::path& dir);

/// Reads a directory produced by write_split. Index maps are restored from
/// split.json so indices match the original split exactly.
DatasetSplit read_split(const std::filesystem::path& dir, SplitManifest* manifest = nullptr);

}  // namespace glimg

#include "glimg/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "glimg/error.hpp"
#include "glimg/random.hpp"

namespace glimg {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  s = s.substr(first, last - first + 1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line, std::string_view sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      fields.push_back(trim(line.substr(start)));
      break;
    }
    fields.push_back(trim(line.substr(start, pos - start)));
    start = pos + sep.size();
  }
  return fields;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc{} && ptr == end;
}

std::string_view separator(RatingFormat format) {
  switch (format) {
    case RatingFormat::csv: return ",";
    case RatingFormat::tsv: return "\t";
    case RatingFormat::movielens_dat: return "::";
  }
  return ",";
}

std::string pair_key(const std::string& user, const std::string& item) {
  std::string key;
  key.reserve(user.size() + item.size() + 1);
  key.append(user).push_back('\0');
  key.append(item);
  return key;
}

// Keeps the last occurrence of every (user, item) pair, at its own position.
std::vector<RatingRecord> dedupe_last_wins(std::vector<RatingRecord> records) {
  std::unordered_map<std::string, std::size_t> last;
  last.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    last[pair_key(records[i].user_id, records[i].item_id)] = i;
  }
  if (last.size() == records.size()) return records;
  std::vector<RatingRecord> out;
  out.reserve(last.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (last[pair_key(records[i].user_id, records[i].item_id)] == i) {
      out.push_back(std::move(records[i]));
    }
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

RatingFormat parse_rating_format(std::string_view name) {
  if (name == "csv") return RatingFormat::csv;
  if (name == "tsv") return RatingFormat::tsv;
  if (name == "movielens-dat" || name == "dat") return RatingFormat::movielens_dat;
  throw InvalidArgument("unknown rating format '" + std::string(name) + "'");
}

std::string_view to_string(RatingFormat format) {
  switch (format) {
    case RatingFormat::csv: return "csv";
    case RatingFormat::tsv: return "tsv";
    case RatingFormat::movielens_dat: return "movielens-dat";
  }
  return "csv";
}

std::vector<RatingRecord> parse_ratings(std::string_view text, RatingFormat format) {
  const auto sep = separator(format);
  std::vector<RatingRecord> records;
  std::size_t line_no = 0;
  bool seen_content = false;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const auto line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (trim(line).empty()) {
      if (eol == text.size()) break;
      continue;
    }
    const bool first_content = !seen_content;
    seen_content = true;

    const auto fields = split_fields(line, sep);
    if (fields.size() < 3 || fields.size() > 4) {
      throw ParseError(line_no, "expected 3 or 4 fields, got " + std::to_string(fields.size()));
    }
    RatingRecord rec;
    rec.user_id = std::string(fields[0]);
    rec.item_id = std::string(fields[1]);
    if (!parse_number(fields[2], rec.rating)) {
      if (first_content) continue;  // header
      throw ParseError(line_no, "rating '" + std::string(fields[2]) + "' is not a number");
    }
    if (rec.user_id.empty() || rec.item_id.empty()) {
      throw ParseError(line_no, "empty user or item id");
    }
    if (!(rec.rating >= 1.0 && rec.rating <= 5.0)) {
      throw ParseError(line_no, "rating " + std::string(fields[2]) + " outside [1, 5]");
    }
    if (fields.size() == 4 && !fields[3].empty()) {
      std::int64_t ts = 0;
      if (!parse_number(fields[3], ts)) {
        throw ParseError(line_no, "timestamp '" + std::string(fields[3]) + "' is not an integer");
      }
      rec.timestamp = ts;
    }
    records.push_back(std::move(rec));
    if (eol == text.size()) break;
  }
  return dedupe_last_wins(std::move(records));
}

std::vector<RatingRecord> load_ratings(const std::filesystem::path& path, RatingFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path.string());
  return parse_ratings(buf.str(), format);
}

std::vector<RatingRecord> filter_min_ratings(std::vector<RatingRecord> records, std::size_t threshold) {
  if (threshold == 0) return records;
  while (true) {
    std::unordered_map<std::string_view, std::size_t> user_count;
    std::unordered_map<std::string_view, std::size_t> item_count;
    for (const auto& r : records) {
      ++user_count[r.user_id];
      ++item_count[r.item_id];
    }
    std::vector<bool> keep(records.size());
    bool changed = false;
    for (std::size_t i = 0; i < records.size(); ++i) {
      keep[i] = user_count[records[i].user_id] >= threshold &&
                item_count[records[i].item_id] >= threshold;
      changed |= !keep[i];
    }
    if (!changed) return records;
    std::vector<RatingRecord> next;
    next.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (keep[i]) next.push_back(std::move(records[i]));
    }
    records = std::move(next);
  }
}

std::vector<RatingRecord> to_implicit(std::vector<RatingRecord> records) {
  for (auto& r : records) r.rating = 1.0;
  return records;
}

IdIndex::IdIndex(std::vector<std::string> ids) {
  lookup_.reserve(ids.size());
  for (auto& id : ids) {
    if (!lookup_.emplace(id, static_cast<Index>(ids_.size())).second) {
      throw DataError("duplicate id '" + id + "' in index map");
    }
    ids_.push_back(std::move(id));
  }
}

std::optional<Index> IdIndex::find(std::string_view id) const {
  const auto it = lookup_.find(std::string(id));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

Index IdIndex::intern(const std::string& id) {
  const auto [it, inserted] = lookup_.emplace(id, static_cast<Index>(ids_.size()));
  if (inserted) ids_.push_back(id);
  return it->second;
}

RatingMatrix::RatingMatrix(std::shared_ptr<const IdIndex> users, std::shared_ptr<const IdIndex> items,
                           std::span<const RatingTriplet> entries)
    : users_(std::move(users)), items_(std::move(items)) {
  if (!users_ || !items_) throw InvalidArgument("rating matrix needs user and item index maps");
  rows_.resize(static_cast<std::size_t>(users_->size()));
  for (const auto& e : entries) {
    if (e.user < 0 || e.user >= users_->size() || e.item < 0 || e.item >= items_->size()) {
      throw InvalidArgument("rating entry index out of range");
    }
    rows_[static_cast<std::size_t>(e.user)].push_back({e.item, e.rating});
  }
  for (auto& row : rows_) {
    std::sort(row.begin(), row.end(), [](const RatingEntry& a, const RatingEntry& b) { return a.item < b.item; });
    const auto dup = std::adjacent_find(row.begin(), row.end(),
                                        [](const RatingEntry& a, const RatingEntry& b) { return a.item == b.item; });
    if (dup != row.end()) throw InvalidArgument("duplicate (user, item) entry");
    nnz_ += row.size();
  }
}

double RatingMatrix::rating(Index user, Index item) const {
  const auto r = row(user);
  const auto it = std::lower_bound(r.begin(), r.end(), item,
                                   [](const RatingEntry& e, Index i) { return e.item < i; });
  return (it != r.end() && it->item == item) ? it->rating : 0.0;
}

bool RatingMatrix::contains(Index user, Index item) const {
  const auto r = row(user);
  return std::binary_search(r.begin(), r.end(), RatingEntry{item, 0.0},
                            [](const RatingEntry& a, const RatingEntry& b) { return a.item < b.item; });
}

std::vector<RatingTriplet> RatingMatrix::triplets() const {
  std::vector<RatingTriplet> out;
  out.reserve(nnz_);
  for (std::size_t u = 0; u < rows_.size(); ++u) {
    for (const auto& e : rows_[u]) out.push_back({static_cast<Index>(u), e.item, e.rating});
  }
  return out;
}

Matrix RatingMatrix::to_dense() const {
  Matrix dense = Matrix::Zero(num_users(), num_items());
  for (std::size_t u = 0; u < rows_.size(); ++u) {
    for (const auto& e : rows_[u]) dense(static_cast<Index>(u), e.item) = e.rating;
  }
  return dense;
}

Vector RatingMatrix::dense_row(Index user) const {
  Vector v = Vector::Zero(num_items());
  for (const auto& e : row(user)) v(e.item) = e.rating;
  return v;
}

RatingMatrix build_matrix(std::span<const RatingRecord> records) {
  if (records.empty()) throw DataError("cannot build a rating matrix from zero records");
  auto users = std::make_shared<IdIndex>();
  auto items = std::make_shared<IdIndex>();
  std::vector<RatingTriplet> entries;
  entries.reserve(records.size());
  for (const auto& r : records) {
    entries.push_back({users->intern(r.user_id), items->intern(r.item_id), r.rating});
  }
  return RatingMatrix(std::move(users), std::move(items), entries);
}

DatasetSplit split_dataset(const RatingMatrix& matrix, SplitRatios ratios, std::uint64_t seed) {
  if (!(ratios.train > 0 && ratios.validation > 0 && ratios.test > 0) ||
      std::abs(ratios.train + ratios.validation + ratios.test - 1.0) > 1e-9) {
    throw InvalidArgument("split ratios must be positive and sum to 1");
  }
  Rng rng(seed);
  std::vector<RatingTriplet> train, validation, test;
  for (Index u = 0; u < matrix.num_users(); ++u) {
    std::vector<RatingEntry> row(matrix.row(u).begin(), matrix.row(u).end());
    if (row.size() < 3) {
      for (const auto& e : row) train.push_back({u, e.item, e.rating});
      continue;
    }
    rng.shuffle(row.begin(), row.end());
    const auto n = static_cast<double>(row.size());
    // A tiny slack keeps 10 * 0.1 at exactly 1 despite binary rounding.
    const auto n_valid = static_cast<std::size_t>(std::floor(n * ratios.validation + 1e-9));
    const auto n_test = static_cast<std::size_t>(std::floor(n * ratios.test + 1e-9));
    for (std::size_t i = 0; i < row.size(); ++i) {
      const RatingTriplet t{u, row[i].item, row[i].rating};
      if (i < n_valid) {
        validation.push_back(t);
      } else if (i < n_valid + n_test) {
        test.push_back(t);
      } else {
        train.push_back(t);
      }
    }
  }
  DatasetSplit split;
  split.train = RatingMatrix(matrix.user_index(), matrix.item_index(), train);
  split.validation = RatingMatrix(matrix.user_index(), matrix.item_index(), validation);
  split.test = RatingMatrix(matrix.user_index(), matrix.item_index(), test);
  split.ratios = ratios;
  split.seed = seed;
  return split;
}

namespace {

void write_matrix_csv(const RatingMatrix& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "user,item,rating\n";
  for (Index u = 0; u < m.num_users(); ++u) {
    for (const auto& e : m.row(u)) {
      out << m.users().id(u) << ',' << m.items().id(e.item) << ',' << format_double(e.rating) << '\n';
    }
  }
  if (!out) throw IoError("write failed: " + path.string());
}

RatingMatrix read_matrix_csv(const std::filesystem::path& path, const std::shared_ptr<const IdIndex>& users,
                             const std::shared_ptr<const IdIndex>& items) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  const auto text = buf.str();
  std::vector<RatingTriplet> entries;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    const std::string_view line(text.data() + pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (line_no == 1 || trim(line).empty()) continue;
    const auto f = split_fields(line, ",");
    double rating = 0;
    if (f.size() != 3 || !parse_number(f[2], rating)) throw ParseError(line_no, path.string() + ": malformed row");
    const auto u = users->find(f[0]);
    const auto i = items->find(f[1]);
    if (!u || !i) throw ParseError(line_no, path.string() + ": id missing from split.json index maps");
    entries.push_back({*u, *i, rating});
  }
  return RatingMatrix(users, items, entries);
}

}  // namespace

void write_split(const DatasetSplit& split, const SplitManifest& manifest, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_matrix_csv(split.train, dir / "train.csv");
  write_matrix_csv(split.validation, dir / "validation.csv");
  write_matrix_csv(split.test, dir / "test.csv");

  nlohmann::ordered_json meta;
  meta["seed"] = split.seed;
  meta["ratios"] = {split.ratios.train, split.ratios.validation, split.ratios.test};
  meta["min_ratings"] = manifest.min_ratings;
  meta["implicit"] = manifest.implicit;
  meta["source"] = manifest.source;
  meta["num_users"] = split.train.num_users();
  meta["num_items"] = split.train.num_items();
  meta["num_ratings"] = {split.train.nnz(), split.validation.nnz(), split.test.nnz()};
  meta["users"] = split.train.users().ids();
  meta["items"] = split.train.items().ids();
  std::ofstream out(dir / "split.json", std::ios::binary);
  if (!out) throw IoError("cannot write " + (dir / "split.json").string());
  out << meta.dump(1) << '\n';
}

DatasetSplit read_split(const std::filesystem::path& dir, SplitManifest* manifest) {
  std::ifstream in(dir / "split.json", std::ios::binary);
  if (!in) throw IoError("cannot open " + (dir / "split.json").string());
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("split.json: " + std::string(e.what()));
  }
  DatasetSplit split;
  try {
    auto users = std::make_shared<const IdIndex>(meta.at("users").get<std::vector<std::string>>());
    auto items = std::make_shared<const IdIndex>(meta.at("items").get<std::vector<std::string>>());
    const auto ratios = meta.at("ratios").get<std::vector<double>>();
    if (ratios.size() != 3) throw DataError("split.json: ratios must have three entries");
    split.ratios = {ratios[0], ratios[1], ratios[2]};
    split.seed = meta.at("seed").get<std::uint64_t>();
    if (manifest) {
      manifest->min_ratings = meta.value("min_ratings", std::size_t{0});
      manifest->implicit = meta.value("implicit", false);
      manifest->source = meta.value("source", std::string{});
    }
    split.train = read_matrix_csv(dir / "train.csv", users, items);
    split.validation = read_matrix_csv(dir / "validation.csv", users, items);
    split.test = read_matrix_csv(dir / "test.csv", users, items);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("split.json: " + std::string(e.what()));
  }
  return split;
}

}  // namespace glimg

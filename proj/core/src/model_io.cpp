#include "glimg/model_io.hpp"

#include <array>
#include <cstring>
#include <fstream>

#include "glimg/binary_io.hpp"
#include "glimg/error.hpp"

namespace glimg {

namespace {

constexpr std::array<char, 8> kMagic = {'G', 'L', 'I', 'M', 'G', 'M', 'D', 'L'};
constexpr std::uint64_t kMaxDim = std::uint64_t{1} << 26;

std::uint64_t checked_dim(binary::Reader& r, std::uint64_t limit = kMaxDim) {
  const auto v = r.get<std::uint64_t>();
  if (v > limit) throw CorruptModelError("dimension out of range");
  return v;
}

void put_ids(binary::Writer& w, const IdIndex& ids) {
  w.put<std::uint64_t>(static_cast<std::uint64_t>(ids.size()));
  for (const auto& id : ids.ids()) w.put_string(id);
}

std::shared_ptr<const IdIndex> get_ids(binary::Reader& r) {
  const auto count = checked_dim(r);
  std::vector<std::string> ids;
  ids.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) ids.push_back(r.get_string());
  try {
    return std::make_shared<const IdIndex>(std::move(ids));
  } catch (const DataError& e) {
    throw CorruptModelError(e.what());
  }
}

}  // namespace

void save_model(const GlimgModel& model, std::ostream& out) {
  binary::Writer w(out);
  w.put_bytes(kMagic.data(), kMagic.size());
  w.put<std::uint32_t>(kModelVersion);

  const auto& p = model.params;
  w.put<double>(p.sigma);
  w.put<double>(p.mu);
  w.put<double>(p.gamma);
  w.put<double>(p.g);
  w.put<std::int64_t>(p.k);
  w.put<std::uint64_t>(p.seed);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(model.options.solve));
  w.put<std::int64_t>(model.options.kmeans.max_iter);
  w.put<double>(model.options.kmeans.tol);
  w.put<double>(model.options.graph.sparsify_below);

  put_ids(w, model.history.users());
  put_ids(w, model.history.items());
  const auto entries = model.history.triplets();
  w.put<std::uint64_t>(entries.size());
  for (const auto& e : entries) {
    w.put<std::uint64_t>(static_cast<std::uint64_t>(e.user));
    w.put<std::uint64_t>(static_cast<std::uint64_t>(e.item));
    w.put<double>(e.rating);
  }

  const auto& a = model.assignment;
  w.put<std::int64_t>(a.num_clusters);
  w.put<std::uint64_t>(a.seed);
  w.put<std::int64_t>(a.iterations_run);
  w.put<std::uint64_t>(a.assignment.size());
  for (const int c : a.assignment) w.put<std::int32_t>(c);
  w.put<std::uint64_t>(a.objective_trace.size());
  for (const double v : a.objective_trace) w.put<double>(v);
  w.put_matrix(a.centroids);

  w.put<double>(model.global_graph.sigma);
  w.put_matrix(model.global_graph.weights);

  w.put<std::uint64_t>(model.clusters.size());
  for (const auto& cm : model.clusters) {
    w.put<std::int32_t>(cm.cluster_id);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(cm.kind));
    w.put_matrix(cm.degrees.transpose());
    w.put_matrix(cm.similarity);
    w.put_matrix(cm.op);
  }
  if (!w.ok()) throw IoError("model write failed");
}

void save_model(const GlimgModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  save_model(model, out);
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

GlimgModel load_model(std::istream& in) {
  binary::Reader r(in);
  std::array<char, 8> magic{};
  try {
    r.get_bytes(magic.data(), magic.size());
  } catch (const CorruptModelError&) {
    throw ModelVersionError("not a GLIMG model file (missing magic bytes)");
  }
  if (magic != kMagic) throw ModelVersionError("not a GLIMG model file (bad magic bytes)");
  const auto version = r.get<std::uint32_t>();
  if (version != kModelVersion) {
    throw ModelVersionError("unsupported model version " + std::to_string(version) + " (expected " +
                            std::to_string(kModelVersion) + ")");
  }

  GlimgModel model;
  auto& p = model.params;
  p.sigma = r.get<double>();
  p.mu = r.get<double>();
  p.gamma = r.get<double>();
  p.g = r.get<double>();
  p.k = static_cast<int>(r.get<std::int64_t>());
  p.seed = r.get<std::uint64_t>();
  const auto solve = r.get<std::uint8_t>();
  if (solve > 1) throw CorruptModelError("unknown solve mode");
  model.options.solve = static_cast<SolveMode>(solve);
  model.options.kmeans.max_iter = static_cast<int>(r.get<std::int64_t>());
  model.options.kmeans.tol = r.get<double>();
  model.options.graph.sparsify_below = r.get<double>();
  try {
    p.validate();
  } catch (const InvalidArgument& e) {
    throw CorruptModelError(std::string("hyperparameters: ") + e.what());
  }

  auto users = get_ids(r);
  auto items = get_ids(r);
  const auto m = static_cast<std::uint64_t>(users->size());
  const auto n = static_cast<std::uint64_t>(items->size());
  if (n > (1u << 17)) throw CorruptModelError("item count out of range");
  const auto nnz = checked_dim(r, m * n);
  std::vector<RatingTriplet> entries(nnz);
  for (auto& e : entries) {
    const auto u = r.get<std::uint64_t>();
    const auto i = r.get<std::uint64_t>();
    if (u >= m || i >= n) throw CorruptModelError("history entry out of range");
    e = {static_cast<Index>(u), static_cast<Index>(i), r.get<double>()};
  }
  try {
    model.history = RatingMatrix(users, items, entries);
  } catch (const InvalidArgument& e) {
    throw CorruptModelError(std::string("history: ") + e.what());
  }

  auto& a = model.assignment;
  a.num_clusters = static_cast<int>(r.get<std::int64_t>());
  if (a.num_clusters != p.k || a.num_clusters < 1) throw CorruptModelError("cluster count mismatch");
  a.seed = r.get<std::uint64_t>();
  a.iterations_run = static_cast<int>(r.get<std::int64_t>());
  if (checked_dim(r) != m) throw CorruptModelError("assignment length mismatch");
  a.assignment.resize(m);
  for (auto& c : a.assignment) {
    c = r.get<std::int32_t>();
    if (c < 0 || c >= a.num_clusters) throw CorruptModelError("cluster id out of range");
  }
  a.objective_trace.resize(checked_dim(r, 1u << 20));
  for (auto& v : a.objective_trace) v = r.get<double>();
  a.centroids.resize(a.num_clusters, static_cast<Index>(n));
  r.get_matrix(a.centroids);

  model.global_graph.sigma = r.get<double>();
  model.global_graph.weights.resize(static_cast<Index>(n), static_cast<Index>(n));
  r.get_matrix(model.global_graph.weights);

  if (checked_dim(r) != static_cast<std::uint64_t>(a.num_clusters)) throw CorruptModelError("cluster block count mismatch");
  model.clusters.resize(static_cast<std::size_t>(a.num_clusters));
  for (int c = 0; c < a.num_clusters; ++c) {
    auto& cm = model.clusters[static_cast<std::size_t>(c)];
    cm.cluster_id = r.get<std::int32_t>();
    if (cm.cluster_id != c) throw CorruptModelError("cluster blocks out of order");
    const auto kind = r.get<std::uint8_t>();
    if (kind > 1) throw CorruptModelError("unknown operator kind");
    cm.kind = static_cast<ClusterModel::OperatorKind>(kind);
    cm.degrees.resize(static_cast<Index>(n));
    Eigen::Map<RowMatrix> degrees_row(cm.degrees.data(), 1, static_cast<Index>(n));
    r.get_matrix(degrees_row);
    cm.similarity.resize(static_cast<Index>(n), static_cast<Index>(n));
    r.get_matrix(cm.similarity);
    cm.op.resize(static_cast<Index>(n), static_cast<Index>(n));
    r.get_matrix(cm.op);
  }
  if (!r.at_end()) throw CorruptModelError("trailing bytes after the last cluster block");
  return model;
}

GlimgModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return load_model(in);
}

}  // namespace glimg

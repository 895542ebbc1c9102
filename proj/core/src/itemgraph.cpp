#include "glimg/itemgraph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "glimg/binary_io.hpp"
#include "glimg/error.hpp"

namespace glimg {

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw InvalidArgument("cosine_similarity: length mismatch (" + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
  }
  double dot = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t u = 0; u < a.size(); ++u) {
    dot += a[u] * b[u];
    aa += a[u] * a[u];
    bb += b[u] * b[u];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(aa) * std::sqrt(bb)), -1.0, 1.0);
}

double kernel_weight(double cos_val, double sigma) {
  if (!(sigma >= 0.0)) throw InvalidArgument("kernel_weight: sigma must be >= 0");
  if (!(cos_val >= -1.0 && cos_val <= 1.0)) throw InvalidArgument("kernel_weight: cosine outside [-1, 1]");
  return std::exp(-sigma * (1.0 - cos_val));
}

ItemCorrelationMatrix build_item_graph(const RatingMatrix& ratings, std::span<const Index> users, double sigma,
                                       const GraphOptions& options) {
  if (!(sigma >= 0.0)) throw InvalidArgument("build_item_graph: sigma must be >= 0");
  const Index n = ratings.num_items();

  // Lower triangle of the item Gram matrix R^T R, accumulated user by user
  // over co-rated pairs only.
  Matrix gram = Matrix::Zero(n, n);
  for (const Index u : users) {
    const auto row = ratings.row(u);
    for (std::size_t a = 0; a < row.size(); ++a) {
      const double ra = row[a].rating;
      double* col = gram.col(row[a].item).data();
      for (std::size_t b = a; b < row.size(); ++b) col[row[b].item] += ra * row[b].rating;
    }
  }

  Vector norms(n);
  for (Index i = 0; i < n; ++i) norms(i) = std::sqrt(gram(i, i));

  ItemCorrelationMatrix graph;
  graph.sigma = sigma;
  graph.weights = Matrix::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    if (norms(j) == 0.0) continue;
    for (Index i = j + 1; i < n; ++i) {
      if (norms(i) == 0.0) continue;
      const double cos_val = std::clamp(gram(i, j) / (norms(i) * norms(j)), -1.0, 1.0);
      double w = std::exp(-sigma * (1.0 - cos_val));
      if (w < options.sparsify_below) w = 0.0;
      graph.weights(i, j) = w;
      graph.weights(j, i) = w;
    }
  }
  return graph;
}

ItemCorrelationMatrix build_item_graph(const RatingMatrix& ratings, double sigma, const GraphOptions& options) {
  std::vector<Index> all(static_cast<std::size_t>(ratings.num_users()));
  std::iota(all.begin(), all.end(), Index{0});
  return build_item_graph(ratings, all, sigma, options);
}

Vector degree_vector(const Matrix& weights) {
  if (weights.rows() != weights.cols()) throw InvalidArgument("degree_vector: matrix is not square");
  if ((weights.array() < 0.0).any()) throw InvalidArgument("degree_vector: negative weight");
  return weights.rowwise().sum();
}

void save_item_graph(const ItemCorrelationMatrix& graph, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  binary::Writer w(out);
  w.put<std::uint64_t>(static_cast<std::uint64_t>(graph.size()));
  w.put_matrix(graph.weights);
  if (!w.ok()) throw IoError("write failed: " + path.string());
}

ItemCorrelationMatrix load_item_graph(const std::filesystem::path& path, double sigma) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  binary::Reader r(in);
  const auto n = r.get<std::uint64_t>();
  if (n > (1u << 20)) throw CorruptModelError("item graph size out of range");
  ItemCorrelationMatrix graph;
  graph.sigma = sigma;
  graph.weights.resize(static_cast<Index>(n), static_cast<Index>(n));
  r.get_matrix(graph.weights);
  if (!r.at_end()) throw CorruptModelError("trailing bytes after item graph");
  return graph;
}

}  // namespace glimg

#pragma once

#include <filesystem>
#include <span>

#include "glimg/dataset.hpp"
#include "glimg/types.hpp"

namespace glimg {

/// Symmetric n x n item correlation matrix with zero diagonal and entries in [0, 1].
struct ItemCorrelationMatrix {
  Matrix weights;
  double sigma = 0.0;

  Index size() const noexcept { return weights.rows(); }
};

struct GraphOptions {
  /// Off-diagonal weights strictly below this value are set to 0. The kernel
  /// never produces values below exp(-2 sigma), so 0 disables sparsification.
  double sparsify_below = 0.0;
};

/// Cosine of two rating columns (unrated entries are 0). Returns 0 when either
/// column is all-zero. Throws InvalidArgument on a length mismatch.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// exp(-sigma (1 - cos)). Throws InvalidArgument for sigma < 0 or cos outside [-1, 1].
double kernel_weight(double cos_val, double sigma);

/// Exponential cosine kernel over all item columns of `ratings`.
ItemCorrelationMatrix build_item_graph(const RatingMatrix& ratings, double sigma, const GraphOptions& options = {});

/// Same, restricted to the rows of `users` (the other rows count as empty).
ItemCorrelationMatrix build_item_graph(const RatingMatrix& ratings, std::span<const Index> users, double sigma,
                                       const GraphOptions& options = {});

/// Row sums. Throws InvalidArgument for a non-square matrix or a negative entry.
Vector degree_vector(const Matrix& weights);

/// Binary dump: 8-byte little-endian n, then n*n little-endian doubles, row-major.
void save_item_graph(const ItemCorrelationMatrix& graph, const std::filesystem::path& path);
ItemCorrelationMatrix load_item_graph(const std::filesystem::path& path, double sigma);

}  // namespace glimg

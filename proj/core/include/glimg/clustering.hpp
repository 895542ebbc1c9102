#pragma once

#include <cstdint>
#include <vector>

#include "glimg/types.hpp"

namespace glimg {

struct ClusterAssignment {
  int num_clusters = 0;
  /// Cluster id per row, each in [0, num_clusters).
  std::vector<int> assignment;
  /// num_clusters x n.
  Matrix centroids;
  std::uint64_t seed = 0;
  int iterations_run = 0;
  /// Within-cluster sum of squared distances after each Lloyd iteration.
  std::vector<double> objective_trace;

  std::vector<Index> members(int cluster) const;
};

struct KMeansOptions {
  int max_iter = 100;
  double tol = 1e-6;
};

/// k-means++ seeding: first centroid uniform, each following one drawn with
/// probability proportional to the squared distance to the nearest chosen
/// centroid. When every remaining row coincides with a chosen centroid the
/// draw falls back to a uniform pick among unchosen rows.
/// Throws InvalidArgument unless 1 <= k <= rows.rows().
Matrix kmeanspp_seed(const Matrix& rows, int k, std::uint64_t seed);

/// Nearest centroid per row (Euclidean); ties go to the lowest cluster id.
std::vector<int> assign_nearest(const Matrix& rows, const Matrix& centroids);

/// Sum over rows of the squared distance to the assigned centroid.
double within_cluster_sse(const Matrix& rows, const Matrix& centroids, const std::vector<int>& assignment);

/// Lloyd iterations from k-means++ seeds until the largest centroid shift is
/// below tol or max_iter is reached. An emptied cluster takes the row farthest
/// from its centroid, so every returned cluster is non-empty.
ClusterAssignment kmeans_cluster(const Matrix& rows, int k, std::uint64_t seed, const KMeansOptions& options = {});

}  // namespace glimg

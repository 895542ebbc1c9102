#include "glimg/clustering.hpp"

#include <limits>
#include <string>

#include "glimg/error.hpp"
#include "glimg/random.hpp"

namespace glimg {

namespace {

void check_k(const Matrix& rows, int k) {
  if (k < 1) throw InvalidArgument("k-means: k must be >= 1");
  if (k > rows.rows()) {
    throw InvalidArgument("k-means: k = " + std::to_string(k) + " exceeds the number of rows (" +
                          std::to_string(rows.rows()) + ")");
  }
}

double squared_distance(const Matrix& rows, Index r, const Matrix& centroids, Index c) {
  return (rows.row(r) - centroids.row(c)).squaredNorm();
}

}  // namespace

std::vector<Index> ClusterAssignment::members(int cluster) const {
  std::vector<Index> out;
  for (std::size_t u = 0; u < assignment.size(); ++u) {
    if (assignment[u] == cluster) out.push_back(static_cast<Index>(u));
  }
  return out;
}

Matrix kmeanspp_seed(const Matrix& rows, int k, std::uint64_t seed) {
  check_k(rows, k);
  const Index m = rows.rows();
  Rng rng(seed);
  Matrix centroids(k, rows.cols());
  std::vector<bool> chosen(static_cast<std::size_t>(m), false);

  auto pick = [&](int slot, Index r) {
    centroids.row(slot) = rows.row(r);
    chosen[static_cast<std::size_t>(r)] = true;
  };
  pick(0, static_cast<Index>(rng.below(static_cast<std::uint64_t>(m))));

  std::vector<double> nearest(static_cast<std::size_t>(m), std::numeric_limits<double>::infinity());
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (Index r = 0; r < m; ++r) {
      auto& d = nearest[static_cast<std::size_t>(r)];
      d = std::min(d, squared_distance(rows, r, centroids, c - 1));
      if (!chosen[static_cast<std::size_t>(r)]) total += d;
    }
    Index next = -1;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      for (Index r = 0; r < m; ++r) {
        if (chosen[static_cast<std::size_t>(r)]) continue;
        const double d = nearest[static_cast<std::size_t>(r)];
        if (d <= 0.0) continue;
        acc += d;
        next = r;
        if (acc > target) break;
      }
    } else {
      const auto remaining = static_cast<std::uint64_t>(m - c);
      auto skip = rng.below(remaining);
      for (Index r = 0; r < m; ++r) {
        if (chosen[static_cast<std::size_t>(r)]) continue;
        if (skip-- == 0) {
          next = r;
          break;
        }
      }
    }
    pick(c, next);
  }
  return centroids;
}

std::vector<int> assign_nearest(const Matrix& rows, const Matrix& centroids) {
  std::vector<int> out(static_cast<std::size_t>(rows.rows()));
  for (Index r = 0; r < rows.rows(); ++r) {
    int best = 0;
    double best_d = squared_distance(rows, r, centroids, 0);
    for (Index c = 1; c < centroids.rows(); ++c) {
      const double d = squared_distance(rows, r, centroids, c);
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    out[static_cast<std::size_t>(r)] = best;
  }
  return out;
}

double within_cluster_sse(const Matrix& rows, const Matrix& centroids, const std::vector<int>& assignment) {
  double sse = 0.0;
  for (Index r = 0; r < rows.rows(); ++r) sse += squared_distance(rows, r, centroids, assignment[static_cast<std::size_t>(r)]);
  return sse;
}

ClusterAssignment kmeans_cluster(const Matrix& rows, int k, std::uint64_t seed, const KMeansOptions& options) {
  check_k(rows, k);
  if (options.max_iter < 1) throw InvalidArgument("k-means: max_iter must be >= 1");
  const Index m = rows.rows();

  ClusterAssignment result;
  result.num_clusters = k;
  result.seed = seed;
  result.centroids = kmeanspp_seed(rows, k, seed);

  for (int iter = 1; iter <= options.max_iter; ++iter) {
    auto assignment = assign_nearest(rows, result.centroids);

    std::vector<Index> counts(static_cast<std::size_t>(k), 0);
    for (const int c : assignment) ++counts[static_cast<std::size_t>(c)];
    for (int empty = 0; empty < k; ++empty) {
      if (counts[static_cast<std::size_t>(empty)] != 0) continue;
      // Farthest row among clusters that can spare one.
      Index far = -1;
      double far_d = -1.0;
      for (Index r = 0; r < m; ++r) {
        const int c = assignment[static_cast<std::size_t>(r)];
        if (counts[static_cast<std::size_t>(c)] < 2) continue;
        const double d = squared_distance(rows, r, result.centroids, c);
        if (d > far_d) {
          far_d = d;
          far = r;
        }
      }
      --counts[static_cast<std::size_t>(assignment[static_cast<std::size_t>(far)])];
      assignment[static_cast<std::size_t>(far)] = empty;
      counts[static_cast<std::size_t>(empty)] = 1;
      result.centroids.row(empty) = rows.row(far);
    }

    Matrix updated = Matrix::Zero(k, rows.cols());
    for (Index r = 0; r < m; ++r) updated.row(assignment[static_cast<std::size_t>(r)]) += rows.row(r);
    for (int c = 0; c < k; ++c) updated.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);

    double shift = 0.0;
    for (int c = 0; c < k; ++c) shift = std::max(shift, (updated.row(c) - result.centroids.row(c)).norm());

    result.centroids = std::move(updated);
    result.assignment = std::move(assignment);
    result.iterations_run = iter;
    result.objective_trace.push_back(within_cluster_sse(rows, result.centroids, result.assignment));
    if (shift < options.tol) break;
  }
  return result;
}

}  // namespace glimg

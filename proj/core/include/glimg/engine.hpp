#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "glimg/clustering.hpp"
#include "glimg/dataset.hpp"
#include "glimg/itemgraph.hpp"
#include "glimg/types.hpp"

namespace glimg {

struct HyperParams {
  double sigma = 0.5;  ///< kernel width
  double mu = 1.0;     ///< fitting weight
  double gamma = 1.0;  ///< confidence (degree) weight
  double g = 0.5;      ///< 1 = global graph only, 0 = local graphs only
  int k = 5;           ///< number of user clusters
  std::uint64_t seed = 42;

  double alpha() const noexcept { return 1.0 / (1.0 + mu); }
  double beta() const noexcept { return mu / (1.0 + mu); }

  /// Throws InvalidArgument when a field is out of range.
  void validate() const;
};

enum class SolveMode : std::uint8_t {
  inverse = 0,   ///< materialize (I + alpha(gamma D - S))^-1
  cholesky = 1,  ///< keep the lower Cholesky factor and solve per request
};

struct FitOptions {
  SolveMode solve = SolveMode::inverse;
  KMeansOptions kmeans;
  GraphOptions graph;
};

struct CombinedGraph {
  Matrix similarity;  ///< S, symmetric-normalized combined weights
  Vector degrees;     ///< D, row sums of g W + (1 - g) W_local
};

struct ClusterModel {
  enum class OperatorKind : std::uint8_t { inverse = 0, cholesky_factor = 1 };

  int cluster_id = 0;
  Matrix similarity;
  Vector degrees;
  OperatorKind kind = OperatorKind::inverse;
  /// Either the inverse of the system matrix or its lower Cholesky factor.
  RowMatrix op;

  /// I + alpha (gamma D - S).
  Matrix system_matrix(const HyperParams& params) const;
  /// Dense solve operator (I + alpha (gamma D - S))^-1, materialized if needed.
  Matrix solve_operator() const;
};

struct GlimgModel {
  HyperParams params;
  FitOptions options;
  ClusterAssignment assignment;
  ItemCorrelationMatrix global_graph;
  std::vector<ClusterModel> clusters;
  /// Training ratings. Supplies the online rating rows and the exclusion masks.
  RatingMatrix history;

  Index num_users() const noexcept { return history.num_users(); }
  Index num_items() const noexcept { return history.num_items(); }
  int cluster_of(Index user) const;
};

struct FitTimings {
  double global_graph_s = 0.0;
  double clustering_s = 0.0;
  double local_graphs_s = 0.0;
  double solve_s = 0.0;
};

/// One item graph per cluster, each built only from that cluster's users.
std::vector<ItemCorrelationMatrix> build_local_graphs(const RatingMatrix& train, const ClusterAssignment& assignment,
                                                      double sigma, const GraphOptions& options = {});

/// M = g W_global + (1 - g) W_local, D = rowsum(M), S_ij = M_ij / sqrt(D_ii D_jj).
/// Items with zero degree get all-zero rows and columns in S.
CombinedGraph combine_normalize(const Matrix& global, const Matrix& local, double g);

/// Factorizes I + alpha (gamma D - S) for one cluster. Throws NumericalError
/// with the cluster id when the system is singular.
ClusterModel build_cluster_model(int cluster_id, CombinedGraph graph, const HyperParams& params, SolveMode mode);

/// Offline training: global graph, k-means++ user clusters, local graphs and
/// one factorized system per cluster.
GlimgModel fit(const RatingMatrix& train, const HyperParams& params, const FitOptions& options = {},
               FitTimings* timings = nullptr);

/// rating_row * (I + alpha (gamma D - S))^-1 for the given cluster, beta omitted.
Vector score_row(const GlimgModel& model, int cluster_id, std::span<const RatingEntry> rating_row);
Vector score_row(const GlimgModel& model, int cluster_id, const Vector& rating_row);

/// Online scoring of a known user from an explicit rating row.
Vector predict_user(const GlimgModel& model, std::span<const RatingEntry> rating_row, Index user);
/// Online scoring of a known user from the stored training history.
Vector predict_user(const GlimgModel& model, Index user);

/// Row-wise predict_user over every user of `train` (must match the model's users).
Matrix predict_all(const GlimgModel& model, const RatingMatrix& train);

/// Cluster whose centroid is nearest to `rating_row`; ties to the lowest id.
int route_to_cluster(const GlimgModel& model, const Vector& rating_row);

/// Max-abs of R~ - R~ S + mu (R~ - R) + gamma R~ D over the cluster's users,
/// with R~ = beta R (I + alpha (gamma D - S))^-1.
double stationarity_residual(const GlimgModel& model, const RatingMatrix& train, int cluster_id);

/// Max-abs of (I + alpha (gamma D - S)) * op - I.
double inverse_residual(const GlimgModel& model, int cluster_id);

/// Strict row diagonal dominance of I + alpha (gamma D - S).
bool diagonally_dominant(const GlimgModel& model, int cluster_id);

}  // namespace glimg

#include "glimg/engine.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "glimg/error.hpp"

namespace glimg {

namespace {

using Clock = std::chrono::steady_clock;

// Reciprocal condition estimate below which the system counts as singular.
constexpr double kMinRcond = 1e-12;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

const ClusterModel& cluster_at(const GlimgModel& model, int cluster_id) {
  if (cluster_id < 0 || static_cast<std::size_t>(cluster_id) >= model.clusters.size()) {
    throw InvalidArgument("cluster id " + std::to_string(cluster_id) + " out of range");
  }
  return model.clusters[static_cast<std::size_t>(cluster_id)];
}

// Solves op * x = b for the Cholesky kind, in place.
void cholesky_solve(const RowMatrix& lower, Vector& b) {
  lower.triangularView<Eigen::Lower>().solveInPlace(b);
  lower.transpose().triangularView<Eigen::Upper>().solveInPlace(b);
}

}  // namespace

void HyperParams::validate() const {
  if (!(std::isfinite(sigma) && sigma >= 0.0)) throw InvalidArgument("sigma must be finite and >= 0");
  if (!(std::isfinite(mu) && mu >= 0.0)) throw InvalidArgument("mu must be finite and >= 0");
  if (!(std::isfinite(gamma) && gamma >= 0.0)) throw InvalidArgument("gamma must be finite and >= 0");
  if (!(g >= 0.0 && g <= 1.0)) throw InvalidArgument("g must lie in [0, 1]");
  if (k < 1) throw InvalidArgument("k must be >= 1");
}

Matrix ClusterModel::system_matrix(const HyperParams& params) const {
  const double alpha = params.alpha();
  Matrix a = -alpha * similarity;
  a.diagonal().array() += 1.0 + alpha * params.gamma * degrees.array();
  return a;
}

Matrix ClusterModel::solve_operator() const {
  if (kind == OperatorKind::inverse) return op;
  const Index n = op.rows();
  Matrix inv = Matrix::Identity(n, n);
  op.triangularView<Eigen::Lower>().solveInPlace(inv);
  op.transpose().triangularView<Eigen::Upper>().solveInPlace(inv);
  return inv;
}

int GlimgModel::cluster_of(Index user) const {
  if (user < 0 || static_cast<std::size_t>(user) >= assignment.assignment.size()) {
    throw DataError("user index " + std::to_string(user) + " is not part of the model");
  }
  return assignment.assignment[static_cast<std::size_t>(user)];
}

std::vector<ItemCorrelationMatrix> build_local_graphs(const RatingMatrix& train, const ClusterAssignment& assignment,
                                                      double sigma, const GraphOptions& options) {
  if (assignment.assignment.size() != static_cast<std::size_t>(train.num_users())) {
    throw InvalidArgument("cluster assignment does not cover the training users");
  }
  std::vector<ItemCorrelationMatrix> graphs;
  graphs.reserve(static_cast<std::size_t>(assignment.num_clusters));
  for (int c = 0; c < assignment.num_clusters; ++c) {
    graphs.push_back(build_item_graph(train, assignment.members(c), sigma, options));
  }
  return graphs;
}

CombinedGraph combine_normalize(const Matrix& global, const Matrix& local, double g) {
  if (global.rows() != local.rows() || global.cols() != local.cols()) {
    throw InvalidArgument("combine_normalize: graph sizes differ");
  }
  if (!(g >= 0.0 && g <= 1.0)) throw InvalidArgument("combine_normalize: g must lie in [0, 1]");
  CombinedGraph out;
  out.similarity = g * global + (1.0 - g) * local;
  out.degrees = degree_vector(out.similarity);
  const Index n = out.similarity.rows();
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) {
      out.similarity(i, j) = (out.degrees(i) > 0.0 && out.degrees(j) > 0.0)
                                 ? out.similarity(i, j) / (std::sqrt(out.degrees(i)) * std::sqrt(out.degrees(j)))
                                 : 0.0;
    }
  }
  return out;
}

ClusterModel build_cluster_model(int cluster_id, CombinedGraph graph, const HyperParams& params, SolveMode mode) {
  ClusterModel cm;
  cm.cluster_id = cluster_id;
  cm.similarity = std::move(graph.similarity);
  cm.degrees = std::move(graph.degrees);
  const Matrix system = cm.system_matrix(params);
  const Index n = system.rows();

  Eigen::LLT<Matrix> llt(system);
  if (llt.info() == Eigen::Success && llt.rcond() > kMinRcond) {
    if (mode == SolveMode::cholesky) {
      cm.kind = ClusterModel::OperatorKind::cholesky_factor;
      cm.op = llt.matrixL();
    } else {
      cm.kind = ClusterModel::OperatorKind::inverse;
      cm.op = llt.solve(Matrix::Identity(n, n));
    }
  } else {
    // Not (numerically) positive definite; only reachable with mu = 0.
    Eigen::PartialPivLU<Matrix> lu(system);
    if (!(lu.rcond() > kMinRcond)) throw NumericalError(cluster_id, "I + alpha(gamma D - S) is singular");
    cm.kind = ClusterModel::OperatorKind::inverse;
    cm.op = lu.inverse();
  }
  if (!cm.op.allFinite()) throw NumericalError(cluster_id, "non-finite solve operator");
  return cm;
}

GlimgModel fit(const RatingMatrix& train, const HyperParams& params, const FitOptions& options, FitTimings* timings) {
  params.validate();
  if (train.nnz() == 0) throw DataError("training matrix has no ratings");
  FitTimings local_timings;

  GlimgModel model;
  model.params = params;
  model.options = options;
  model.history = train;

  auto t0 = Clock::now();
  model.global_graph = build_item_graph(train, params.sigma, options.graph);
  local_timings.global_graph_s = seconds_since(t0);

  t0 = Clock::now();
  model.assignment = kmeans_cluster(train.to_dense(), params.k, params.seed, options.kmeans);
  local_timings.clustering_s = seconds_since(t0);

  model.clusters.reserve(static_cast<std::size_t>(params.k));
  for (int c = 0; c < params.k; ++c) {
    t0 = Clock::now();
    CombinedGraph combined;
    if (params.g == 1.0) {
      // The local term has zero weight; skip building it.
      combined = combine_normalize(model.global_graph.weights, model.global_graph.weights, 1.0);
    } else {
      const auto local = build_item_graph(train, model.assignment.members(c), params.sigma, options.graph);
      combined = combine_normalize(model.global_graph.weights, local.weights, params.g);
    }
    local_timings.local_graphs_s += seconds_since(t0);

    t0 = Clock::now();
    model.clusters.push_back(build_cluster_model(c, std::move(combined), params, options.solve));
    local_timings.solve_s += seconds_since(t0);
  }
  if (timings) *timings = local_timings;
  return model;
}

Vector score_row(const GlimgModel& model, int cluster_id, std::span<const RatingEntry> rating_row) {
  const auto& cm = cluster_at(model, cluster_id);
  const Index n = cm.op.rows();
  if (cm.kind == ClusterModel::OperatorKind::inverse) {
    Vector scores = Vector::Zero(n);
    for (const auto& e : rating_row) {
      if (e.item < 0 || e.item >= n) throw InvalidArgument("rating row item index out of range");
      scores.noalias() += e.rating * cm.op.row(e.item).transpose();
    }
    return scores;
  }
  Vector b = Vector::Zero(n);
  for (const auto& e : rating_row) {
    if (e.item < 0 || e.item >= n) throw InvalidArgument("rating row item index out of range");
    b(e.item) = e.rating;
  }
  cholesky_solve(cm.op, b);
  return b;
}

Vector score_row(const GlimgModel& model, int cluster_id, const Vector& rating_row) {
  std::vector<RatingEntry> sparse;
  for (Index i = 0; i < rating_row.size(); ++i) {
    if (rating_row(i) != 0.0) sparse.push_back({i, rating_row(i)});
  }
  if (rating_row.size() != model.num_items()) throw InvalidArgument("rating row has the wrong length");
  return score_row(model, cluster_id, sparse);
}

Vector predict_user(const GlimgModel& model, std::span<const RatingEntry> rating_row, Index user) {
  return score_row(model, model.cluster_of(user), rating_row);
}

Vector predict_user(const GlimgModel& model, Index user) {
  const int cluster = model.cluster_of(user);
  return score_row(model, cluster, model.history.row(user));
}

Matrix predict_all(const GlimgModel& model, const RatingMatrix& train) {
  if (train.num_users() != model.num_users() || train.num_items() != model.num_items()) {
    throw InvalidArgument("predict_all: rating matrix shape does not match the model");
  }
  Matrix scores(train.num_users(), train.num_items());
  for (Index u = 0; u < train.num_users(); ++u) scores.row(u) = predict_user(model, train.row(u), u).transpose();
  return scores;
}

int route_to_cluster(const GlimgModel& model, const Vector& rating_row) {
  const auto& centroids = model.assignment.centroids;
  if (rating_row.size() != centroids.cols()) throw InvalidArgument("rating row has the wrong length");
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Index c = 0; c < centroids.rows(); ++c) {
    const double d = (centroids.row(c).transpose() - rating_row).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

double stationarity_residual(const GlimgModel& model, const RatingMatrix& train, int cluster_id) {
  const auto& cm = cluster_at(model, cluster_id);
  const auto& p = model.params;
  const auto users = model.assignment.members(cluster_id);
  const Index n = model.num_items();

  Matrix ratings(static_cast<Index>(users.size()), n);
  for (std::size_t r = 0; r < users.size(); ++r) ratings.row(static_cast<Index>(r)) = train.dense_row(users[r]).transpose();
  const Matrix predicted = p.beta() * (ratings * cm.solve_operator());

  Matrix residual = predicted - predicted * cm.similarity + p.mu * (predicted - ratings);
  residual.noalias() += p.gamma * (predicted * cm.degrees.asDiagonal());
  return residual.size() == 0 ? 0.0 : residual.cwiseAbs().maxCoeff();
}

double inverse_residual(const GlimgModel& model, int cluster_id) {
  const auto& cm = cluster_at(model, cluster_id);
  const Matrix product = cm.system_matrix(model.params) * cm.solve_operator();
  return (product - Matrix::Identity(product.rows(), product.cols())).cwiseAbs().maxCoeff();
}

bool diagonally_dominant(const GlimgModel& model, int cluster_id) {
  const Matrix a = cluster_at(model, cluster_id).system_matrix(model.params);
  for (Index i = 0; i < a.rows(); ++i) {
    const double off = a.row(i).cwiseAbs().sum() - std::abs(a(i, i));
    if (!(std::abs(a(i, i)) > off)) return false;
  }
  return true;
}

}  // namespace glimg

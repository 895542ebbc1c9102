#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "glimg/dataset.hpp"
#include "glimg/engine.hpp"
#include "glimg/types.hpp"

namespace glimg {

struct RecommendationList {
  Index user = 0;
  std::vector<Index> items;
  std::vector<double> scores;  ///< non-increasing
};

/// Highest-scoring unmasked items, at most n of them. Ties go to the lower
/// item index. `excluded` is indexed by item; true means "never recommend".
RecommendationList top_n(Index user, std::span<const double> scores, const std::vector<bool>& excluded, std::size_t n);

/// Items of `user` present in any of `matrices`, as an exclusion mask.
std::vector<bool> rated_mask(Index user, std::span<const RatingMatrix* const> matrices);

struct Metrics {
  double hr = 0.0;
  double ndcg = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

/// All four metrics at cut-off n. Lists are truncated to n; users whose
/// `target` row is empty are skipped. Throws DataError if no user remains.
/// `evaluated_users`, when given, receives the number of users averaged.
Metrics compute_metrics(std::span<const RecommendationList> lists, const RatingMatrix& target, std::size_t n,
                        std::size_t* evaluated_users = nullptr);

double hit_ratio(std::span<const RecommendationList> lists, const RatingMatrix& target, std::size_t n);
double ndcg(std::span<const RecommendationList> lists, const RatingMatrix& target, std::size_t n);
double precision(std::span<const RecommendationList> lists, const RatingMatrix& target, std::size_t n);
double recall(std::span<const RecommendationList> lists, const RatingMatrix& target, std::size_t n);

/// Number of training ratings per item.
Vector item_pop_scores(const RatingMatrix& train);

/// Produces a preference vector for a user of the training matrix.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual std::string name() const = 0;
  virtual Vector score(Index user) const = 0;
};

class GlimgScorer final : public Scorer {
 public:
  explicit GlimgScorer(const GlimgModel& model, std::string name = "GLIMG") : model_(model), name_(std::move(name)) {}
  std::string name() const override { return name_; }
  Vector score(Index user) const override { return predict_user(model_, user); }

 private:
  const GlimgModel& model_;
  std::string name_;
};

class ItemPopScorer final : public Scorer {
 public:
  explicit ItemPopScorer(const RatingMatrix& train) : scores_(item_pop_scores(train)) {}
  std::string name() const override { return "ItemPop"; }
  Vector score(Index) const override { return scores_; }

 private:
  Vector scores_;
};

struct EvalReport {
  std::string method;
  std::map<std::size_t, Metrics> at;
  std::size_t num_users_evaluated = 0;
  nlohmann::ordered_json config;

  nlohmann::ordered_json to_json() const;
};

/// Scores every user with a non-empty `target` row, ranks items not in
/// `exclude` and aggregates the metrics at each cut-off in `cutoffs`.
/// Throws DataError when `target` is empty.
EvalReport evaluate(const Scorer& scorer, const RatingMatrix& target, std::span<const RatingMatrix* const> exclude,
                    std::span<const std::size_t> cutoffs);

/// Evaluation on the test split, excluding train and validation items.
EvalReport evaluate(const Scorer& scorer, const DatasetSplit& split, std::span<const std::size_t> cutoffs);

/// Percent table, one row per report, one column per metric and cut-off.
std::string format_table(std::span<const EvalReport> reports);

}  // namespace glimg

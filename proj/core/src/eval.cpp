#include "glimg/eval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "glimg/error.hpp"

namespace glimg {

RecommendationList top_n(Index user, std::span<const double> scores, const std::vector<bool>& excluded, std::size_t n) {
  if (n == 0) throw InvalidArgument("top_n: N must be >= 1");
  if (!excluded.empty() && excluded.size() != scores.size()) throw InvalidArgument("top_n: mask length mismatch");
  std::vector<Index> candidates;
  candidates.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (excluded.empty() || !excluded[i]) candidates.push_back(static_cast<Index>(i));
  }
  const auto keep = std::min(n, candidates.size());
  const auto better = [&](Index a, Index b) {
    const double sa = scores[static_cast<std::size_t>(a)];
    const double sb = scores[static_cast<std::size_t>(b)];
    return sa > sb || (sa == sb && a < b);
  };
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end(), better);
  candidates.resize(keep);

  RecommendationList list;
  list.user = user;
  list.items = std::move(candidates);
  list.scores.reserve(keep);
  for (const Index i : list.items) list.scores.push_back(scores[static_cast<std::size_t>(i)]);
  return list;
}

std::vector<bool> rated_mask(Index user, std::span<const RatingMatrix* const> matrices) {
  std::vector<bool> mask;
  for (const auto* m : matrices) {
    if (mask.empty()) mask.assign(static_cast<std::size_t>(m->num_items()), false);
    for (const auto& e : m->row(user)) mask[static_cast<std::size_t>(e.item)] = true;
  }
  return mask;
}

Metrics compute_metrics(std::span<const RecommendationList> lists, const RatingMatrix& target, std::size_t n,
                        std::size_t* evaluated_users) {
  if (n == 0) throw InvalidArgument("metrics: N must be >= 1");
  Metrics sum;
  std::size_t users = 0;
  for (const auto& list : lists) {
    const auto relevant = target.row(list.user);
    if (relevant.empty()) continue;
    ++users;
    const auto depth = std::min(n, list.items.size());
    std::size_t hits = 0;
    double dcg = 0.0;
    for (std::size_t pos = 0; pos < depth; ++pos) {
      if (target.contains(list.user, list.items[pos])) {
        ++hits;
        dcg += 1.0 / std::log2(static_cast<double>(pos) + 2.0);
      }
    }
    double ideal = 0.0;
    for (std::size_t pos = 0; pos < std::min(n, relevant.size()); ++pos) ideal += 1.0 / std::log2(static_cast<double>(pos) + 2.0);

    sum.hr += hits > 0 ? 1.0 : 0.0;
    sum.ndcg += dcg / ideal;
    sum.precision += static_cast<double>(hits) / static_cast<double>(n);
    sum.recall += static_cast<double>(hits) / static_cast<double>(relevant.size());
  }
  if (users == 0) throw DataError("no users with held-out items to evaluate");
  if (evaluated_users) *evaluated_users = users;
  const auto u = static_cast<double>(users);
  return {sum.hr / u, sum.ndcg / u, sum.precision / u, sum.recall / u};
}

double hit_ratio(std::span<const RecommendationList> lists, const RatingMatrix& target, std::size_t n) {
  return compute_metrics(lists, target, n).hr;
}
double ndcg(std::span<const RecommendationList> lists, const RatingMatrix& target, std::size_t n) {
  return compute_metrics(lists, target, n).ndcg;
}
double precision(std::span<const RecommendationList> lists, const RatingMatrix& target, std::size_t n) {
  return compute_metrics(lists, target, n).precision;
}
double recall(std::span<const RecommendationList> lists, const RatingMatrix& target, std::size_t n) {
  return compute_metrics(lists, target, n).recall;
}

Vector item_pop_scores(const RatingMatrix& train) {
  Vector counts = Vector::Zero(train.num_items());
  for (Index u = 0; u < train.num_users(); ++u) {
    for (const auto& e : train.row(u)) counts(e.item) += 1.0;
  }
  return counts;
}

nlohmann::ordered_json EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["method"] = method;
  j["num_users_evaluated"] = num_users_evaluated;
  auto& metrics = j["metrics"];
  metrics = nlohmann::ordered_json::object();
  for (const auto& [n, m] : at) {
    metrics[std::to_string(n)] = {{"hr", m.hr}, {"ndcg", m.ndcg}, {"precision", m.precision}, {"recall", m.recall}};
  }
  j["config"] = config;
  return j;
}

EvalReport evaluate(const Scorer& scorer, const RatingMatrix& target, std::span<const RatingMatrix* const> exclude,
                    std::span<const std::size_t> cutoffs) {
  if (target.nnz() == 0) throw DataError("evaluation split has no ratings");
  if (cutoffs.empty()) throw InvalidArgument("evaluate: no cut-offs given");
  const auto deepest = *std::max_element(cutoffs.begin(), cutoffs.end());

  std::vector<RecommendationList> lists;
  for (Index u = 0; u < target.num_users(); ++u) {
    if (target.row(u).empty()) continue;
    const Vector scores = scorer.score(u);
    lists.push_back(top_n(u, std::span<const double>(scores.data(), static_cast<std::size_t>(scores.size())),
                          rated_mask(u, exclude), deepest));
  }

  EvalReport report;
  report.method = scorer.name();
  for (const auto n : cutoffs) report.at[n] = compute_metrics(lists, target, n, &report.num_users_evaluated);
  return report;
}

EvalReport evaluate(const Scorer& scorer, const DatasetSplit& split, std::span<const std::size_t> cutoffs) {
  const std::array<const RatingMatrix*, 2> exclude = {&split.train, &split.validation};
  return evaluate(scorer, split.test, exclude, cutoffs);
}

std::string format_table(std::span<const EvalReport> reports) {
  std::vector<std::size_t> cutoffs;
  for (const auto& r : reports) {
    for (const auto& [n, m] : r.at) cutoffs.push_back(n);
  }
  std::sort(cutoffs.begin(), cutoffs.end());
  cutoffs.erase(std::unique(cutoffs.begin(), cutoffs.end()), cutoffs.end());

  std::ostringstream out;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%-10s", "Metric(%)");
  out << buf;
  for (const auto n : cutoffs) {
    for (const char* name : {"NDCG", "HR", "Precision", "Recall"}) {
      std::snprintf(buf, sizeof(buf), " %12s", (std::string(name) + "@" + std::to_string(n)).c_str());
      out << buf;
    }
  }
  out << '\n';
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof(buf), "%-10s", r.method.c_str());
    out << buf;
    for (const auto n : cutoffs) {
      const auto it = r.at.find(n);
      for (int k = 0; k < 4; ++k) {
        if (it == r.at.end()) {
          std::snprintf(buf, sizeof(buf), " %12s", "-");
        } else {
          const auto& m = it->second;
          const double v = k == 0 ? m.ndcg : k == 1 ? m.hr : k == 2 ? m.precision : m.recall;
          std::snprintf(buf, sizeof(buf), " %12.2f", 100.0 * v);
        }
        out << buf;
      }
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace glimg

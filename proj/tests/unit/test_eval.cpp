#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <numeric>
#include <random>
#include <set>

#include "glimg/error.hpp"
#include "glimg/eval.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace glimg;

namespace {

std::shared_ptr<IdIndex> ids(const char* prefix, int count) {
  std::vector<std::string> v;
  for (int i = 0; i < count; ++i) v.push_back(prefix + std::to_string(i));
  return std::make_shared<IdIndex>(v);
}

RatingMatrix held_out(int users, int items, const std::vector<std::vector<Index>>& rows) {
  std::vector<RatingTriplet> t;
  for (std::size_t u = 0; u < rows.size(); ++u) {
    for (const Index i : rows[u]) t.push_back({static_cast<Index>(u), i, 1.0});
  }
  return RatingMatrix(ids("u", users), ids("i", items), t);
}

RecommendationList list_of(Index user, std::vector<Index> items) {
  RecommendationList l;
  l.user = user;
  l.items = std::move(items);
  for (std::size_t k = 0; k < l.items.size(); ++k) l.scores.push_back(-static_cast<double>(k));
  return l;
}

}  // namespace

TEST_CASE("top_n") {
  const std::vector<double> s = {0.1, 0.9, 0.5};
  CHECK(top_n(0, s, {}, 2).items == std::vector<Index>{1, 2});
  CHECK(top_n(0, s, {false, true, false}, 2).items == std::vector<Index>{2, 0});
  CHECK(top_n(0, std::vector<double>{1.0, 1.0, 1.0}, {}, 3).items == std::vector<Index>{0, 1, 2});
  CHECK(top_n(0, s, {}, 10).items.size() == 3);
  CHECK(top_n(0, s, {true, true, true}, 3).items.empty());
  const auto l = top_n(0, s, {}, 3);
  CHECK(l.scores == std::vector<double>{0.9, 0.5, 0.1});
  CHECK_THROWS_AS(top_n(0, s, {}, 0), InvalidArgument);
  CHECK_THROWS_AS(top_n(0, s, {true}, 1), InvalidArgument);

  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> small(0, 4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> scores(12);
    std::vector<bool> mask(12);
    for (int i = 0; i < 12; ++i) {
      scores[i] = small(rng);
      mask[i] = small(rng) == 0;
    }
    const auto got = top_n(0, scores, mask, 5);
    // Oracle: full stable sort of unmasked items by descending score.
    std::vector<Index> all;
    for (int i = 0; i < 12; ++i) {
      if (!mask[i]) all.push_back(i);
    }
    std::stable_sort(all.begin(), all.end(), [&](Index a, Index b) { return scores[a] > scores[b]; });
    all.resize(std::min<std::size_t>(5, all.size()));
    CHECK(got.items == all);
  }
}

TEST_CASE("metric examples") {
  SUBCASE("hit ratio") {
    const auto target = held_out(4, 6, {{0}, {1}, {2}, {5}});
    const std::vector<RecommendationList> lists = {list_of(0, {0, 3}), list_of(1, {3, 1}), list_of(2, {2, 4}),
                                                   list_of(3, {3, 4})};
    CHECK(hit_ratio(lists, target, 2) == doctest::Approx(0.75));
    CHECK(hit_ratio(std::vector<RecommendationList>{list_of(3, {3, 4})}, target, 2) == 0.0);
  }
  SUBCASE("ndcg") {
    const auto target = held_out(1, 6, {{2}});
    CHECK(ndcg(std::vector{list_of(0, {2, 1})}, target, 2) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(ndcg(std::vector{list_of(0, {0, 1})}, target, 2) == 0.0);
    CHECK(std::abs(ndcg(std::vector{list_of(0, {1, 2})}, target, 2) - 0.6309297535714575) <= 1e-15);
  }
  SUBCASE("ideal DCG is capped by the list length") {
    const auto target = held_out(1, 6, {{0, 1, 2, 3}});
    CHECK(ndcg(std::vector{list_of(0, {0, 1})}, target, 2) == doctest::Approx(1.0));
  }
  SUBCASE("precision and recall") {
    const auto target = held_out(1, 8, {{0, 7}});
    const std::vector lists = {list_of(0, {1, 2, 0, 3, 4})};
    CHECK(precision(lists, target, 5) == doctest::Approx(0.2));
    CHECK(recall(lists, target, 5) == doctest::Approx(0.5));
  }
  SUBCASE("users without held-out items are skipped") {
    const auto target = held_out(2, 3, {{0}, {}});
    std::size_t evaluated = 0;
    const auto m = compute_metrics(std::vector{list_of(0, {0}), list_of(1, {1})}, target, 1, &evaluated);
    CHECK(evaluated == 1);
    CHECK(m.hr == 1.0);
    CHECK_THROWS_AS(compute_metrics(std::vector{list_of(1, {1})}, target, 1), DataError);
  }
}

TEST_CASE("metrics agree with the set-intersection recount") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> item(0, 29);
  for (int trial = 0; trial < 50; ++trial) {
    const int users = 20;
    std::vector<std::vector<Index>> test_rows(users);
    std::vector<std::set<long>> test_sets(users);
    std::vector<RecommendationList> lists;
    std::vector<std::vector<long>> raw;
    for (int u = 0; u < users; ++u) {
      const int count = item(rng) % 6;
      for (int c = 0; c < count; ++c) test_sets[u].insert(item(rng));
      test_rows[u].assign(test_sets[u].begin(), test_sets[u].end());
      std::vector<Index> perm(30);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      perm.resize(15);
      lists.push_back(list_of(u, perm));
      raw.emplace_back(perm.begin(), perm.end());
    }
    const auto target = held_out(users, 30, test_rows);
    for (const std::size_t n : {1, 5, 10, 15}) {
      bool any = false;
      for (const auto& s : test_sets) any = any || !s.empty();
      if (!any) continue;
      const auto got = compute_metrics(lists, target, n);
      const auto want = oracle::metrics(raw, test_sets, n);
      CHECK(std::abs(got.hr - want.hr) <= 1e-12);
      CHECK(std::abs(got.ndcg - want.ndcg) <= 1e-12);
      CHECK(std::abs(got.precision - want.precision) <= 1e-12);
      CHECK(std::abs(got.recall - want.recall) <= 1e-12);
      CHECK(got.precision <= got.hr + 1e-15);
      for (const double v : {got.hr, got.ndcg, got.precision, got.recall}) CHECK((v >= 0.0 && v <= 1.0));
    }
  }
}

TEST_CASE("evaluate") {
  std::mt19937_64 rng(29);
  const auto train = synthetic::random_ratings(rng, 15, 10, 0.3);
  std::vector<std::vector<Index>> rows(15);
  for (Index u = 0; u < 15; ++u) {
    for (Index i = 0; i < 10; ++i) {
      if (!train.contains(u, i) && rng() % 4 == 0) rows[static_cast<std::size_t>(u)].push_back(i);
    }
  }
  const auto test = RatingMatrix(std::make_shared<IdIndex>(train.users().ids()),
                                 std::make_shared<IdIndex>(train.items().ids()), [&] {
                                   std::vector<RatingTriplet> t;
                                   for (Index u = 0; u < 15; ++u) {
                                     for (const Index i : rows[static_cast<std::size_t>(u)]) t.push_back({u, i, 4.0});
                                   }
                                   return t;
                                 }());
  const std::array<const RatingMatrix*, 1> exclude = {&train};
  const std::array<std::size_t, 2> cutoffs = {3, 5};

  SUBCASE("a scorer that knows the held-out items is perfect") {
    struct Oracle final : Scorer {
      const RatingMatrix& t;
      explicit Oracle(const RatingMatrix& t) : t(t) {}
      std::string name() const override { return "oracle"; }
      Vector score(Index u) const override { return t.dense_row(u); }
    } perfect(test);
    const auto report = evaluate(perfect, test, exclude, cutoffs);
    CHECK(report.at.at(3).hr == 1.0);
    CHECK(report.at.at(3).ndcg == doctest::Approx(1.0));
    CHECK(report.at.at(5).ndcg == doctest::Approx(1.0));
  }
  SUBCASE("matches a by-hand recount of the same lists") {
    HyperParams p;
    p.k = 2;
    const auto model = fit(train, p);
    const GlimgScorer scorer(model);
    const auto report = evaluate(scorer, test, exclude, cutoffs);
    std::vector<RecommendationList> lists;
    for (Index u = 0; u < 15; ++u) {
      const auto s = predict_user(model, u);
      lists.push_back(top_n(u, std::span<const double>(s.data(), 10), rated_mask(u, exclude), 5));
    }
    for (const auto n : cutoffs) {
      const auto m = compute_metrics(lists, test, n);
      CHECK(report.at.at(n).hr == m.hr);
      CHECK(report.at.at(n).ndcg == m.ndcg);
      CHECK(report.at.at(n).precision == m.precision);
      CHECK(report.at.at(n).recall == m.recall);
    }
    // A strictly increasing transform of every score changes nothing.
    struct Cubed final : Scorer {
      const GlimgModel& m;
      explicit Cubed(const GlimgModel& m) : m(m) {}
      std::string name() const override { return "cubed"; }
      Vector score(Index u) const override { return predict_user(m, u).array().cube() * 3.0 + 1.0; }
    } cubed(model);
    const auto transformed = evaluate(cubed, test, exclude, cutoffs);
    for (const auto n : cutoffs) CHECK(transformed.at.at(n).ndcg == doctest::Approx(report.at.at(n).ndcg));
  }
  SUBCASE("item popularity") {
    const auto pop = item_pop_scores(train);
    for (Index i = 0; i < 10; ++i) {
      int count = 0;
      for (Index u = 0; u < 15; ++u) count += train.contains(u, i);
      CHECK(pop(i) == count);
    }
    const ItemPopScorer scorer(train);
    CHECK(scorer.name() == "ItemPop");
    CHECK(scorer.score(0) == scorer.score(7));
  }
  SUBCASE("empty target") {
    const auto empty = RatingMatrix(std::make_shared<IdIndex>(train.users().ids()),
                                    std::make_shared<IdIndex>(train.items().ids()), std::vector<RatingTriplet>{});
    CHECK_THROWS_AS(evaluate(ItemPopScorer(train), empty, exclude, cutoffs), DataError);
  }
  SUBCASE("report formatting") {
    const auto report = evaluate(ItemPopScorer(train), test, exclude, cutoffs);
    const auto table = format_table(std::vector{report});
    CHECK(table.find("NDCG@3") != std::string::npos);
    CHECK(table.find("Recall@5") != std::string::npos);
    CHECK(table.find("ItemPop") != std::string::npos);
    const auto j = report.to_json();
    CHECK(j["method"] == "ItemPop");
  }
}

// Acceptance suite. One line per criterion:
//   [PASS] / [FAIL] / [SKIP] AC<n> <name>: <details>
// Exit status: 0 all ran criteria passed, 1 any failed, 77 nothing ran.
//
//   glimg_acceptance [--group synthetic|ml1m|all] [--ml1m <ratings.dat>] [--work <dir>] [--jobs <n>]
//
// The ML-1M group needs the MovieLens-1M ratings.dat, given by --ml1m or the
// GLIMG_ML1M environment variable.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <unistd.h>

#include "commands.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace glimg;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

enum class Outcome { pass, fail, skip };

struct Tally {
  int passed = 0;
  int failed = 0;
  int skipped = 0;
};

Tally tally;

void report(Outcome o, const std::string& id, const std::string& name, const std::string& details) {
  const char* tag = o == Outcome::pass ? "[PASS]" : o == Outcome::fail ? "[FAIL]" : "[SKIP]";
  (o == Outcome::pass ? tally.passed : o == Outcome::fail ? tally.failed : tally.skipped)++;
  std::cout << tag << ' ' << id << ' ' << name << ": " << details << std::endl;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

// Runs a criterion body, turning exceptions into a failure line.
void criterion(const std::string& id, const std::string& name, const std::function<std::pair<bool, std::string>()>& body) {
  try {
    const auto [ok, details] = body();
    report(ok ? Outcome::pass : Outcome::fail, id, name, details);
  } catch (const std::exception& e) {
    report(Outcome::fail, id, name, std::string("exception: ") + e.what());
  }
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

double max_abs(const Matrix& a, const Matrix& b) { return a.size() == 0 ? 0.0 : (a - b).cwiseAbs().maxCoeff(); }

Matrix to_matrix(const oracle::Dense& d) {
  const auto n = static_cast<Index>(d.size());
  Matrix m(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) m(i, j) = d[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return m;
}

// ---------------------------------------------------------------- synthetic

void ac1_stationarity() {
  criterion("AC1", "stationarity residual", [] {
    const auto start = Clock::now();
    std::mt19937_64 rng(2024);
    const std::array<double, 3> mus = {0.1, 1.0, 10.0};
    const std::array<double, 2> gammas = {0.5, 1.0};
    const std::array<double, 3> gs = {0.0, 0.5, 1.0};
    double worst = 0.0;
    int clusters = 0;
    for (int t = 0; t < 100; ++t) {
      const int m = 3 + static_cast<int>(rng() % 48);
      const int n = 2 + static_cast<int>(rng() % 29);
      const auto r = synthetic::random_ratings(rng, m, n, 0.05 + 0.4 * static_cast<double>(rng() % 1000) / 1000.0);
      HyperParams p;
      p.k = 1 + static_cast<int>(rng() % 3);
      p.mu = mus[rng() % mus.size()];
      p.gamma = gammas[rng() % gammas.size()];
      p.g = gs[rng() % gs.size()];
      p.sigma = static_cast<double>(rng() % 1000) / 1000.0;
      p.seed = rng();
      const auto model = fit(r, p);
      for (int c = 0; c < p.k; ++c) {
        worst = std::max(worst, stationarity_residual(model, r, c));
        ++clusters;
      }
    }
    const double secs = seconds_since(start);
    return std::pair{worst < 1e-8 && secs < 30.0,
                     fmt("100 instances, %d clusters, max residual %.3e (< 1e-8), %.2f s (< 30 s)", clusters, worst, secs)};
  });
}

void ac2_toy() {
  criterion("AC2", "closed-form toy", [] {
    Matrix w(2, 2);
    w << 0.0, 1.0, 1.0, 0.0;
    HyperParams p;
    p.g = 1.0;
    p.mu = 1.0;
    p.gamma = 1.0;
    p.k = 1;
    GlimgModel model;
    model.params = p;
    model.assignment.num_clusters = 1;
    model.assignment.assignment = {0};
    model.clusters.push_back(build_cluster_model(0, combine_normalize(w, w, 1.0), p, SolveMode::inverse));
    const std::vector<RatingEntry> row = {{0, 4.0}};
    const auto s = score_row(model, 0, row);
    const double err = std::max(std::abs(s(0) - 3.0), std::abs(s(1) - 1.0));
    return std::pair{err <= 1e-12, fmt("scores (%.15g, %.15g), max error %.3e (<= 1e-12)", s(0), s(1), err)};
  });
}

void ac3_oracles() {
  criterion("AC3", "oracle equivalence", [] {
    const auto start = Clock::now();
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double graph_err = 0.0, combine_err = 0.0, metric_err = 0.0;
    const int instances = 200;
    for (int t = 0; t < instances; ++t) {
      const int n = 1 + static_cast<int>(rng() % 20);
      const int m = 1 + static_cast<int>(rng() % 40);
      const auto r = synthetic::random_ratings(rng, m, n, unit(rng));
      const double sigma = 2.0 * unit(rng);
      const auto rows = synthetic::to_rows(r);

      const auto graph = build_item_graph(r, sigma);
      graph_err = std::max(graph_err, max_abs(graph.weights, to_matrix(oracle::item_graph(rows, n, sigma))));

      oracle::Dense sub;
      std::vector<Index> members;
      for (Index u = 0; u < m; ++u) {
        if (rng() % 2) {
          members.push_back(u);
          sub.push_back(rows[static_cast<std::size_t>(u)]);
        }
      }
      const auto local = build_item_graph(r, members, sigma);
      const auto local_oracle = oracle::item_graph(sub, n, sigma);
      graph_err = std::max(graph_err, max_abs(local.weights, to_matrix(local_oracle)));

      const double g = unit(rng);
      const auto combined = combine_normalize(graph.weights, local.weights, g);
      const auto [s, d] = oracle::combine(oracle::item_graph(rows, n, sigma), local_oracle, g);
      combine_err = std::max(combine_err, max_abs(combined.similarity, to_matrix(s)));
      for (int i = 0; i < n; ++i) combine_err = std::max(combine_err, std::abs(combined.degrees(i) - d[i]));

      // Metrics on random lists against a random held-out matrix.
      std::vector<RatingTriplet> held;
      std::vector<std::set<long>> sets(static_cast<std::size_t>(m));
      std::vector<std::vector<long>> raw;
      std::vector<RecommendationList> lists;
      for (Index u = 0; u < m; ++u) {
        for (Index i = 0; i < n; ++i) {
          if (unit(rng) < 0.2) {
            held.push_back({u, i, 1.0});
            sets[static_cast<std::size_t>(u)].insert(i);
          }
        }
        std::vector<double> scores(static_cast<std::size_t>(n));
        for (auto& v : scores) v = unit(rng);
        auto list = top_n(u, scores, {}, static_cast<std::size_t>(n));
        raw.emplace_back(list.items.begin(), list.items.end());
        lists.push_back(std::move(list));
      }
      if (held.empty()) continue;
      const RatingMatrix target(std::make_shared<IdIndex>(r.users().ids()), std::make_shared<IdIndex>(r.items().ids()),
                                held);
      for (const std::size_t cut : {std::size_t{1}, std::size_t{5}, std::size_t{10}, std::size_t{20}}) {
        const auto got = compute_metrics(lists, target, cut);
        const auto want = oracle::metrics(raw, sets, cut);
        metric_err = std::max({metric_err, std::abs(got.hr - want.hr), std::abs(got.ndcg - want.ndcg),
                               std::abs(got.precision - want.precision), std::abs(got.recall - want.recall)});
      }
    }
    const double secs = seconds_since(start);
    const bool ok = graph_err <= 1e-12 && combine_err <= 1e-12 && metric_err <= 1e-12 && secs < 10.0;
    return std::pair{ok, fmt("%d instances (n <= 20), max error graph %.2e, combine %.2e, metrics %.2e (<= 1e-12), "
                             "%.2f s (< 10 s)",
                             instances, graph_err, combine_err, metric_err, secs)};
  });
}

void ac4_reduction() {
  criterion("AC4", "ablation reduction g=1 vs k=1", [] {
    std::mt19937_64 rng(404);
    double worst = 0.0;
    const int instances = 50;
    for (int t = 0; t < instances; ++t) {
      const int m = 4 + static_cast<int>(rng() % 47);
      const int n = 2 + static_cast<int>(rng() % 29);
      const auto r = synthetic::random_ratings(rng, m, n, 0.3);
      HyperParams p;
      p.g = 1.0;
      p.k = 2 + static_cast<int>(rng() % 3);
      p.mu = std::array{0.1, 1.0, 10.0}[rng() % 3];
      p.gamma = std::array{0.5, 1.0}[rng() % 2];
      p.seed = rng();
      HyperParams single = p;
      single.k = 1;
      worst = std::max(worst, max_abs(predict_all(fit(r, p), r), predict_all(fit(r, single), r)));
    }
    return std::pair{worst <= 1e-10, fmt("%d instances, max score difference %.3e (<= 1e-10)", instances, worst)};
  });
}

void ac8_determinism(const fs::path& work) {
  criterion("AC8", "determinism", [&] {
    const auto dir = work / "ac8";
    fs::create_directories(dir);
    const auto data = dir / "ratings.csv";
    {
      std::ofstream out(data);
      out << "user,item,rating\n";
      for (const auto& r : synthetic::block_records(8, 120, 60, 4, 0.6, 0.05)) {
        out << r.user_id << ',' << r.item_id << ',' << r.rating << '\n';
      }
    }
    cli::RunConfig prep;
    prep.data = data;
    prep.out = dir / "split";
    prep.seed = 8;
    cli::cmd_prepare(prep);

    cli::RunConfig config;
    config.split_dir = dir / "split";
    config.out = dir / "run";
    config.seed = 8;
    config.params.k = 4;
    config.params.g = 0.5;
    config.model_path = dir / "run" / "model.glimg";

    std::array<std::string, 2> models, reports;
    for (int run = 0; run < 2; ++run) {
      cli::cmd_train(config);
      cli::cmd_evaluate(config);
      models[run] = slurp(config.model_path);
      reports[run] = slurp(config.out / "report.json") + slurp(config.out / "report.txt");
    }
    const bool ok = !models[0].empty() && models[0] == models[1] && reports[0] == reports[1];
    return std::pair{ok, fmt("model files %zu bytes %s, reports %s", models[0].size(),
                             models[0] == models[1] ? "identical" : "DIFFER", reports[0] == reports[1] ? "identical" : "DIFFER")};
  });
}

// -------------------------------------------------------------------- ml1m

struct Ml1mContext {
  fs::path data;
  fs::path work;
  unsigned jobs = 1;
  cli::SweepResult sweep;
  bool swept = false;
  HyperParams selected;
};

std::string pct(double v) { return fmt("%.2f", 100.0 * v); }

bool within(double v, double lo, double hi) { return v >= lo && v <= hi; }

cli::RunConfig ml1m_base(const Ml1mContext& ctx) {
  cli::RunConfig c;
  c.split_dir = ctx.work / "ml1m" / "split";
  c.cutoffs = {10, 50};
  c.seed = 42;
  c.jobs = ctx.jobs;
  c.params.k = 5;
  c.params.mu = 1.0;
  return c;
}

void ml1m_prepare(Ml1mContext& ctx) {
  cli::RunConfig c = ml1m_base(ctx);
  c.data = ctx.data;
  c.format = RatingFormat::movielens_dat;
  c.min_ratings = 0;
  c.out = c.split_dir;
  const auto r = cli::cmd_prepare(c);
  std::cout << "ML-1M: " << r.records_kept << " ratings, " << r.split.train.num_users() << " users, "
            << r.split.train.num_items() << " items" << std::endl;
}

void ac5_reproduction(Ml1mContext& ctx) {
  criterion("AC5", "ML-1M reproduction", [&] {
    const auto start = Clock::now();
    cli::RunConfig c = ml1m_base(ctx);
    c.out = ctx.work / "ml1m" / "sweep";
    c.sweep = {cli::parse_sweep_axis("sigma=0.1,0.5,1"), cli::parse_sweep_axis("g=0.3,0.7"),
               cli::parse_sweep_axis("mu=0.1,1")};
    ctx.sweep = cli::cmd_sweep(c);
    ctx.swept = true;
    const auto& best = ctx.sweep.rows[ctx.sweep.selected];
    ctx.selected = best.params;
    const auto& m10 = best.test.at.at(10);
    const auto& m50 = best.test.at.at(50);
    const bool ok = within(100 * m10.ndcg, 21.0, 25.0) && within(100 * m10.hr, 74.0, 82.0) &&
                    within(100 * m50.ndcg, 26.5, 30.5) && within(100 * m50.hr, 91.5, 96.0);
    return std::pair{ok, fmt("selected sigma=%g g=%g gamma=%g mu=%g k=%d over %zu points; test NDCG@10 %s [21,25], "
                             "HR@10 %s [74,82], NDCG@50 %s [26.5,30.5], HR@50 %s [91.5,96]; %.0f s",
                             best.params.sigma, best.params.g, best.params.gamma, best.params.mu, best.params.k,
                             ctx.sweep.rows.size(), pct(m10.ndcg).c_str(), pct(m10.hr).c_str(), pct(m50.ndcg).c_str(),
                             pct(m50.hr).c_str(), seconds_since(start))};
  });
}

void ac6_itempop(const Ml1mContext& ctx) {
  criterion("AC6", "ML-1M ItemPop", [&] {
    const auto start = Clock::now();
    cli::RunConfig c = ml1m_base(ctx);
    c.method = "itempop";
    c.out = ctx.work / "ml1m" / "itempop";
    const auto r = cli::cmd_evaluate(c);
    const double hr = 100 * r.at.at(10).hr;
    const double secs = seconds_since(start);
    return std::pair{within(hr, 47.0, 54.0) && secs < 120.0,
                     fmt("HR@10 %.2f [47,54], %.1f s (< 120 s)", hr, secs)};
  });
}

void ac7_gamma(const Ml1mContext& ctx) {
  if (!ctx.swept) {
    report(Outcome::skip, "AC7", "ML-1M gamma sensitivity", "needs the AC5 sweep");
    return;
  }
  criterion("AC7", "ML-1M gamma sensitivity", [&] {
    cli::RunConfig c = ml1m_base(ctx);
    c.params = ctx.selected;
    c.out = ctx.work / "ml1m" / "gamma";
    c.sweep = {cli::parse_sweep_axis("gamma=0,1")};
    const auto r = cli::cmd_sweep(c);
    const double at0 = 100 * r.rows[0].test.at.at(50).ndcg;
    const double at1 = 100 * r.rows[1].test.at.at(50).ndcg;
    return std::pair{at1 - at0 >= 1.0,
                     fmt("NDCG@50 gamma=1 %.2f, gamma=0 %.2f, gain %.2f points (>= 1)", at1, at0, at1 - at0)};
  });
}

void ac9_latency(const Ml1mContext& ctx) {
  if (!ctx.swept) {
    report(Outcome::skip, "AC9", "ML-1M online latency", "needs the AC5 sweep");
    return;
  }
  criterion("AC9", "ML-1M online latency", [&] {
    cli::RunConfig c = ml1m_base(ctx);
    c.params = ctx.selected;
    c.seed = ctx.selected.seed;
    c.out = ctx.work / "ml1m" / "model";
    const auto trained = cli::cmd_train(c);
    const auto before = fs::last_write_time(trained.model_file);
    const auto model = load_model(trained.model_file);

    const Index users = model.num_users();
    const Index samples = std::min<Index>(500, users);
    double worst = 0.0, total = 0.0;
    bool consistent = true;
    for (Index s = 0; s < samples; ++s) {
      const Index u = s * users / samples;
      const auto r = cli::cmd_recommend(model, model.history.users().id(u), 10);
      worst = std::max(worst, r.latency_ms);
      total += r.latency_ms;
      consistent = consistent && !r.cold_start && r.list.user == u;
    }
    const bool untouched = fs::last_write_time(trained.model_file) == before;
    const bool ok = worst <= 50.0 && consistent && untouched;
    return std::pair{ok, fmt("%lld users, mean %.3f ms, max %.3f ms (<= 50 ms), offline fit %.1f s, model file %s",
                             static_cast<long long>(samples), total / static_cast<double>(samples), worst,
                             trained.total_s, untouched ? "unchanged" : "MODIFIED")};
  });
}

void all_ml1m(Outcome o, const std::string& why) {
  report(o, "AC5", "ML-1M reproduction", why);
  report(o, "AC6", "ML-1M ItemPop", why);
  report(o, "AC7", "ML-1M gamma sensitivity", why);
  report(o, "AC9", "ML-1M online latency", why);
}

}  // namespace

int main(int argc, char** argv) {
  std::string group = "all";
  fs::path ml1m;
  fs::path work;
  unsigned jobs = 1;
  if (const char* env = std::getenv("GLIMG_ML1M")) ml1m = env;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    const bool has_value = i + 1 < argc;
    if (a == "--group" && has_value) {
      group = argv[++i];
    } else if (a == "--ml1m" && has_value) {
      ml1m = argv[++i];
    } else if (a == "--work" && has_value) {
      work = argv[++i];
    } else if (a == "--jobs" && has_value) {
      jobs = static_cast<unsigned>(std::stoul(argv[++i]));
    } else {
      std::cerr << "usage: glimg_acceptance [--group synthetic|ml1m|all] [--ml1m <ratings.dat>] [--work <dir>] "
                   "[--jobs <n>]\n";
      return 2;
    }
  }
  if (group != "synthetic" && group != "ml1m" && group != "all") {
    std::cerr << "unknown group '" << group << "'\n";
    return 2;
  }
  const bool owned_work = work.empty();
  if (owned_work) work = fs::temp_directory_path() / ("glimg_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(work);

  if (group != "ml1m") {
    ac1_stationarity();
    ac2_toy();
    ac3_oracles();
    ac4_reduction();
    ac8_determinism(work);
  }
  if (group != "synthetic") {
    if (ml1m.empty()) {
      all_ml1m(Outcome::skip, "no ratings.dat given (--ml1m or GLIMG_ML1M)");
    } else if (!fs::exists(ml1m)) {
      all_ml1m(Outcome::skip, ml1m.string() + " not found");
    } else {
      Ml1mContext ctx{ml1m, work, jobs, {}, false, {}};
      bool prepared = false;
      try {
        ml1m_prepare(ctx);
        prepared = true;
      } catch (const std::exception& e) {
        all_ml1m(Outcome::fail, std::string("preparation failed: ") + e.what());
      }
      if (prepared) {
        ac5_reproduction(ctx);
        ac6_itempop(ctx);
        ac7_gamma(ctx);
        ac9_latency(ctx);
      }
    }
  }

  if (owned_work) {
    std::error_code ec;
    fs::remove_all(work, ec);
  }
  std::cout << tally.passed << " passed, " << tally.failed << " failed, " << tally.skipped << " skipped" << std::endl;
  if (tally.failed > 0) return 1;
  return tally.passed == 0 ? 77 : 0;
}

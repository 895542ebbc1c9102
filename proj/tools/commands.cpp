#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

namespace glimg::cli {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string_view solve_mode_name(SolveMode mode) { return mode == SolveMode::cholesky ? "cholesky" : "inverse"; }

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

nlohmann::ordered_json params_json(const HyperParams& p) {
  return {{"sigma", p.sigma}, {"mu", p.mu}, {"gamma", p.gamma}, {"g", p.g}, {"k", p.k}, {"seed", p.seed}};
}

void set_param(HyperParams& p, const std::string& name, double value) {
  if (name == "sigma") {
    p.sigma = value;
  } else if (name == "mu") {
    p.mu = value;
  } else if (name == "gamma") {
    p.gamma = value;
  } else if (name == "g") {
    p.g = value;
  } else if (name == "k" || name == "clusters") {
    if (value != std::floor(value)) throw InvalidArgument("k must be an integer");
    p.k = static_cast<int>(value);
  } else {
    throw InvalidArgument("unknown sweep parameter '" + name + "'");
  }
}

DatasetSplit load_split(const RunConfig& config) {
  if (config.split_dir.empty()) throw InvalidArgument("--split is required");
  return read_split(config.split_dir);
}

// Target matrix plus the matrices whose items are never recommended.
std::pair<const RatingMatrix*, std::array<const RatingMatrix*, 2>> target_of(const DatasetSplit& split,
                                                                            const std::string& target) {
  if (target == "validation") return {&split.validation, {&split.train, &split.test}};
  return {&split.test, {&split.train, &split.validation}};
}

EvalReport evaluate_scorer(const Scorer& scorer, const DatasetSplit& split, const std::string& target,
                           const RunConfig& config) {
  const auto [matrix, exclude] = target_of(split, target);
  auto report = evaluate(scorer, *matrix, exclude, config.cutoffs);
  report.config = config.to_json();
  report.config["target"] = target;
  return report;
}

}  // namespace

void RunConfig::validate() const {
  params.validate();
  if (cutoffs.empty()) throw InvalidArgument("--n needs at least one cut-off");
  if (std::any_of(cutoffs.begin(), cutoffs.end(), [](std::size_t n) { return n == 0; })) {
    throw InvalidArgument("cut-offs must be >= 1");
  }
  if (!(ratios.train > 0 && ratios.validation > 0 && ratios.test > 0) ||
      std::abs(ratios.train + ratios.validation + ratios.test - 1.0) > 1e-9) {
    throw InvalidArgument("split ratios must be positive and sum to 1");
  }
  if (method != "glimg" && method != "itempop") throw InvalidArgument("--method must be glimg or itempop");
  if (target != "test" && target != "validation") throw InvalidArgument("--target must be test or validation");
  if (fit.kmeans.max_iter < 1) throw InvalidArgument("--max-iter must be >= 1");
  if (!(fit.kmeans.tol >= 0)) throw InvalidArgument("--tol must be >= 0");
  if (jobs < 1) throw InvalidArgument("--jobs must be >= 1");
  for (const auto& axis : sweep) {
    if (axis.values.empty()) throw InvalidArgument("sweep axis '" + axis.param + "' has no values");
    for (const double v : axis.values) {
      HyperParams probe = params;
      set_param(probe, axis.param, v);
      probe.validate();
    }
  }
}

nlohmann::ordered_json RunConfig::to_json() const {
  nlohmann::ordered_json j;
  j["data"] = data.string();
  j["format"] = std::string(to_string(format));
  j["min_ratings"] = min_ratings;
  j["implicit"] = implicit;
  j["ratios"] = {ratios.train, ratios.validation, ratios.test};
  j["seed"] = seed;
  j["split"] = split_dir.string();
  j["model"] = model_path.string();
  j["params"] = params_json(params);
  j["solver"] = std::string(solve_mode_name(fit.solve));
  j["kmeans"] = {{"max_iter", fit.kmeans.max_iter}, {"tol", fit.kmeans.tol}, {"features", "zero-imputed rating rows"},
                 {"distance", "euclidean"}};
  j["sparsify_below"] = fit.graph.sparsify_below;
  j["cutoffs"] = cutoffs;
  j["method"] = method;
  j["target"] = target;
  auto& s = j["sweep"];
  s = nlohmann::ordered_json::object();
  for (const auto& axis : sweep) s[axis.param] = axis.values;
  return j;
}

SweepAxis parse_sweep_axis(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) throw InvalidArgument("--sweep expects <param>=<v1,v2,...>, got '" + spec + "'");
  SweepAxis axis;
  axis.param = spec.substr(0, eq);
  if (axis.param == "clusters") axis.param = "k";
  std::string_view rest(spec);
  rest.remove_prefix(eq + 1);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const auto token = rest.substr(0, comma);
    double v = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc{} || ptr != token.data() + token.size()) {
      throw InvalidArgument("bad sweep value '" + std::string(token) + "'");
    }
    axis.values.push_back(v);
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  if (axis.values.empty()) throw InvalidArgument("sweep axis '" + axis.param + "' has no values");
  HyperParams probe;
  set_param(probe, axis.param, axis.values.front());
  return axis;
}

PrepareResult cmd_prepare(const RunConfig& config) {
  config.validate();
  if (config.data.empty()) throw InvalidArgument("--data is required");
  PrepareResult result;
  auto records = load_ratings(config.data, config.format);
  result.records_loaded = records.size();
  records = filter_min_ratings(std::move(records), config.min_ratings);
  if (config.implicit) records = to_implicit(std::move(records));
  result.records_kept = records.size();
  const auto matrix = build_matrix(records);
  result.split = split_dataset(matrix, config.ratios, config.seed);
  write_split(result.split, {config.min_ratings, config.implicit, config.data.string()}, config.out);
  return result;
}

TrainResult cmd_train(const RunConfig& config) {
  config.validate();
  const auto split = load_split(config);
  RunConfig effective = config;
  effective.params.seed = config.seed;

  const auto start = Clock::now();
  TrainResult result;
  const auto model = fit(split.train, effective.params, effective.fit, &result.timings);
  ensure_dir(config.out);
  result.model_file = config.out / "model.glimg";
  save_model(model, result.model_file);
  result.total_s = seconds_since(start);

  nlohmann::ordered_json timing;
  timing["global_graph_s"] = result.timings.global_graph_s;
  timing["clustering_s"] = result.timings.clustering_s;
  timing["local_graphs_s"] = result.timings.local_graphs_s;
  timing["solve_s"] = result.timings.solve_s;
  timing["total_s"] = result.total_s;
  timing["kmeans_iterations"] = model.assignment.iterations_run;
  timing["config"] = effective.to_json();
  write_text(config.out / "timing.json", timing.dump(2) + "\n");

  std::ostringstream csv;
  csv << "user_id,cluster_id\n";
  for (Index u = 0; u < model.num_users(); ++u) csv << model.history.users().id(u) << ',' << model.cluster_of(u) << '\n';
  write_text(config.out / "assignment.csv", csv.str());
  return result;
}

RecommendResult cmd_recommend(const GlimgModel& model, const std::string& user_id, std::size_t n) {
  if (n == 0) throw InvalidArgument("--n must be >= 1");
  RecommendResult result;
  const auto start = Clock::now();
  const auto user = model.history.users().find(user_id);
  Vector scores;
  std::vector<bool> mask;
  if (user) {
    scores = predict_user(model, *user);
    const std::array<const RatingMatrix*, 1> history = {&model.history};
    mask = rated_mask(*user, history);
  } else {
    result.cold_start = true;
    scores = item_pop_scores(model.history);
  }
  result.list = top_n(user.value_or(-1), std::span<const double>(scores.data(), static_cast<std::size_t>(scores.size())),
                      mask, n);
  result.latency_ms = 1e3 * seconds_since(start);
  for (const Index i : result.list.items) result.item_ids.push_back(model.history.items().id(i));
  return result;
}

EvalReport evaluate_model(const GlimgModel& model, const DatasetSplit& split, const RunConfig& config) {
  if (model.num_items() != split.train.num_items() || model.num_users() != split.train.num_users() ||
      model.history.items().ids() != split.train.items().ids()) {
    throw DataError("model and split disagree on the user/item index maps");
  }
  return evaluate_scorer(GlimgScorer(model), split, config.target, config);
}

EvalReport cmd_evaluate(const RunConfig& config) {
  config.validate();
  const auto split = load_split(config);
  EvalReport report;
  if (config.method == "itempop") {
    report = evaluate_scorer(ItemPopScorer(split.train), split, config.target, config);
  } else {
    if (config.model_path.empty()) throw InvalidArgument("--model is required for --method glimg");
    const auto model = load_model(config.model_path);
    report = evaluate_model(model, split, config);
  }
  ensure_dir(config.out);
  write_text(config.out / "report.json", report.to_json().dump(2) + "\n");
  const std::array<EvalReport, 1> one = {report};
  write_text(config.out / "report.txt", format_table(one));
  return report;
}

SweepResult cmd_sweep(const RunConfig& config) {
  config.validate();
  if (config.sweep.empty()) throw InvalidArgument("sweep needs at least one --sweep axis");
  const auto split = load_split(config);

  std::vector<HyperParams> grid = {config.params};
  grid.front().seed = config.seed;
  for (const auto& axis : config.sweep) {
    std::vector<HyperParams> next;
    for (const auto& base : grid) {
      for (const double v : axis.values) {
        auto p = base;
        set_param(p, axis.param, v);
        next.push_back(p);
      }
    }
    grid = std::move(next);
  }

  SweepResult result;
  result.rows.resize(grid.size());
  const auto& cut = config.cutoffs;
  result.selection_cutoff = std::find(cut.begin(), cut.end(), 10) != cut.end() ? 10 : cut.front();

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    for (std::size_t i = next++; i < grid.size(); i = next++) {
      try {
        const auto model = fit(split.train, grid[i], config.fit);
        RunConfig point = config;
        point.params = grid[i];
        auto& row = result.rows[i];
        row.params = grid[i];
        row.validation = evaluate_scorer(GlimgScorer(model), split, "validation", point);
        row.test = evaluate_scorer(GlimgScorer(model), split, "test", point);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const auto workers = std::min<std::size_t>(config.jobs, grid.size());
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);

  for (std::size_t i = 1; i < result.rows.size(); ++i) {
    if (result.rows[i].validation.at.at(result.selection_cutoff).ndcg >
        result.rows[result.selected].validation.at.at(result.selection_cutoff).ndcg) {
      result.selected = i;
    }
  }

  std::ostringstream csv;
  char buf[192];
  csv << "sigma,mu,gamma,g,k";
  for (const char* split_name : {"valid", "test"}) {
    for (const auto n : cut) {
      for (const char* metric : {"ndcg", "hr", "precision", "recall"}) csv << ',' << split_name << '_' << metric << '@' << n;
    }
  }
  csv << ",selected\n";
  for (std::size_t i = 0; i < result.rows.size(); ++i) {
    const auto& row = result.rows[i];
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%d", row.params.sigma, row.params.mu, row.params.gamma,
                  row.params.g, row.params.k);
    csv << buf;
    for (const auto* report : {&row.validation, &row.test}) {
      for (const auto n : cut) {
        const auto& m = report->at.at(n);
        for (const double v : {m.ndcg, m.hr, m.precision, m.recall}) {
          std::snprintf(buf, sizeof(buf), ",%.17g", v);
          csv << buf;
        }
      }
    }
    csv << ',' << (i == result.selected ? 1 : 0) << '\n';
  }
  ensure_dir(config.out);
  write_text(config.out / "sweep.csv", csv.str());

  nlohmann::ordered_json summary;
  summary["selection"] = {{"split", "validation"}, {"metric", "ndcg@" + std::to_string(result.selection_cutoff)}};
  summary["selected"] = result.rows[result.selected].test.to_json();
  summary["selected"]["params"] = params_json(result.rows[result.selected].params);
  summary["config"] = config.to_json();
  write_text(config.out / "sweep.json", summary.dump(2) + "\n");
  return result;
}

namespace {

void add_model_flags(CLI::App& cmd, RunConfig& c) {
  cmd.add_option("--sigma", c.params.sigma, "Kernel width")->capture_default_str();
  cmd.add_option("--mu", c.params.mu, "Fitting weight")->capture_default_str();
  cmd.add_option("--gamma", c.params.gamma, "Confidence (degree) weight")->capture_default_str();
  cmd.add_option("--g", c.params.g, "Global/local balance, 1 = global only")->capture_default_str();
  cmd.add_option("--clusters,-k", c.params.k, "Number of user clusters")->capture_default_str();
  cmd.add_option("--max-iter", c.fit.kmeans.max_iter, "k-means iteration cap")->capture_default_str();
  cmd.add_option("--tol", c.fit.kmeans.tol, "k-means centroid shift tolerance")->capture_default_str();
  cmd.add_option("--sparsify", c.fit.graph.sparsify_below, "Drop graph weights below this value")->capture_default_str();
  cmd.add_option_function<std::string>(
         "--solver",
         [&c](const std::string& v) {
           if (v == "inverse") {
             c.fit.solve = SolveMode::inverse;
           } else if (v == "cholesky") {
             c.fit.solve = SolveMode::cholesky;
           } else {
             throw CLI::ValidationError("--solver", "must be inverse or cholesky");
           }
         },
         "inverse (materialized) or cholesky (factor kept)")
      ->default_str("inverse");
}

void add_cutoffs(CLI::App& cmd, RunConfig& c) {
  cmd.add_option("--n", c.cutoffs, "Cut-offs N (e.g. --n 10 50 or --n 10,50)")->delimiter(',')->capture_default_str();
}

std::string exit_label(int code) {
  switch (code) {
    case kUsageError: return "usage error";
    case kDataError: return "data error";
    case kNumericalFailure: return "numerical failure";
    default: return "error";
  }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig c;
  std::vector<std::string> sweep_specs;
  std::string format = "csv";
  std::string user_id;
  std::vector<double> ratios;

  CLI::App app{"GLIMG top-N recommender: global and local item graphs"};
  app.require_subcommand(1);
  app.add_option("--seed", c.seed, "Seed for the split and the clustering")->capture_default_str();
  app.add_option("--out", c.out, "Output directory")->capture_default_str();

  auto* prepare = app.add_subcommand("prepare", "Load, filter and split a rating log");
  prepare->add_option("--data", c.data, "Rating file")->required();
  prepare->add_option("--format", format, "csv | tsv | movielens-dat")->capture_default_str();
  prepare->add_option("--min-ratings", c.min_ratings, "Iterated per-user/per-item minimum")->capture_default_str();
  prepare->add_flag("--implicit", c.implicit, "Replace every rating by 1");
  prepare->add_option("--ratios", ratios, "train,validation,test ratios")->delimiter(',')->expected(3);

  auto* train = app.add_subcommand("train", "Offline training on a prepared split");
  train->add_option("--split", c.split_dir, "Directory written by 'prepare'")->required();
  add_model_flags(*train, c);

  auto* recommend = app.add_subcommand("recommend", "Online top-N list for one user");
  recommend->add_option("--model", c.model_path, "Model file written by 'train'")->required();
  recommend->add_option("--user", user_id, "User id")->required();
  std::size_t list_len = 10;
  recommend->add_option("--n", list_len, "List length")->capture_default_str();

  auto* evaluate_cmd = app.add_subcommand("evaluate", "HR / NDCG / Precision / Recall on a split");
  evaluate_cmd->add_option("--split", c.split_dir, "Directory written by 'prepare'")->required();
  evaluate_cmd->add_option("--model", c.model_path, "Model file (required for --method glimg)");
  evaluate_cmd->add_option("--method", c.method, "glimg | itempop")->capture_default_str();
  evaluate_cmd->add_option("--target", c.target, "test | validation")->capture_default_str();
  add_cutoffs(*evaluate_cmd, c);

  auto* sweep = app.add_subcommand("sweep", "Hyperparameter grid: select on validation, report test");
  sweep->add_option("--split", c.split_dir, "Directory written by 'prepare'")->required();
  sweep->add_option("--sweep", sweep_specs, "<param>=<v1,v2,...>, param in sigma|mu|gamma|g|k")->required();
  sweep->add_option("--jobs", c.jobs, "Grid points fitted concurrently")->capture_default_str();
  add_model_flags(*sweep, c);
  add_cutoffs(*sweep, c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsageError;
  }

  try {
    c.format = parse_rating_format(format);
    if (!ratios.empty()) c.ratios = {ratios[0], ratios[1], ratios[2]};
    for (const auto& s : sweep_specs) c.sweep.push_back(parse_sweep_axis(s));
    c.params.seed = c.seed;

    if (prepare->parsed()) {
      const auto r = cmd_prepare(c);
      out << "loaded " << r.records_loaded << " ratings, kept " << r.records_kept << " (" << r.split.train.num_users()
          << " users, " << r.split.train.num_items() << " items)\n"
          << "train " << r.split.train.nnz() << ", validation " << r.split.validation.nnz() << ", test "
          << r.split.test.nnz() << " -> " << c.out.string() << '\n';
    } else if (train->parsed()) {
      const auto r = cmd_train(c);
      char buf[256];
      std::snprintf(buf, sizeof(buf),
                    "global graph %.3fs, clustering %.3fs, local graphs %.3fs, solve %.3fs, total %.3fs\n",
                    r.timings.global_graph_s, r.timings.clustering_s, r.timings.local_graphs_s, r.timings.solve_s,
                    r.total_s);
      out << buf << "model -> " << r.model_file.string() << '\n';
    } else if (recommend->parsed()) {
      const auto model = load_model(c.model_path);
      const auto r = cmd_recommend(model, user_id, list_len);
      if (r.cold_start) out << "user '" << user_id << "' not in the model: cold-start fallback to ItemPop\n";
      char buf[256];
      for (std::size_t i = 0; i < r.item_ids.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%4zu  %-20s %.10g\n", i + 1, r.item_ids[i].c_str(), r.list.scores[i]);
        out << buf;
      }
      std::snprintf(buf, sizeof(buf), "online latency %.3f ms\n", r.latency_ms);
      out << buf;
    } else if (evaluate_cmd->parsed()) {
      const auto r = cmd_evaluate(c);
      const std::array<EvalReport, 1> one = {r};
      out << format_table(one) << "users evaluated: " << r.num_users_evaluated << '\n';
    } else if (sweep->parsed()) {
      const auto r = cmd_sweep(c);
      const auto& best = r.rows[r.selected];
      out << r.rows.size() << " grid points -> " << (c.out / "sweep.csv").string() << '\n'
          << "selected sigma=" << best.params.sigma << " mu=" << best.params.mu << " gamma=" << best.params.gamma
          << " g=" << best.params.g << " k=" << best.params.k << " (validation ndcg@" << r.selection_cutoff << ")\n";
      const std::array<EvalReport, 1> one = {best.test};
      out << format_table(one);
    }
    return kSuccess;
  } catch (const InvalidArgument& e) {
    err << exit_label(kUsageError) << ": " << e.what() << '\n';
    return kUsageError;
  } catch (const NumericalError& e) {
    err << exit_label(kNumericalFailure) << ": " << e.what() << '\n';
    return kNumericalFailure;
  } catch (const Error& e) {
    err << exit_label(kDataError) << ": " << e.what() << '\n';
    return kDataError;
  }
}

}  // namespace glimg::cli

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "glimg/glimg.hpp"

namespace glimg::cli {

enum ExitCode : int {
  kSuccess = 0,
  kUsageError = 1,
  kDataError = 2,
  kNumericalFailure = 3,
};

struct SweepAxis {
  std::string param;  ///< sigma | mu | gamma | g | k
  std::vector<double> values;
};

struct RunConfig {
  // prepare
  std::filesystem::path data;
  RatingFormat format = RatingFormat::csv;
  std::size_t min_ratings = 0;
  bool implicit = false;
  SplitRatios ratios;

  // shared
  std::uint64_t seed = 42;
  std::filesystem::path split_dir;
  std::filesystem::path model_path;
  std::filesystem::path out = ".";

  // train / evaluate / sweep
  HyperParams params;
  FitOptions fit;
  std::vector<std::size_t> cutoffs = {10, 50};
  std::string method = "glimg";  ///< glimg | itempop
  std::string target = "test";   ///< test | validation
  std::vector<SweepAxis> sweep;
  unsigned jobs = 1;

  /// Throws InvalidArgument on any out-of-range field.
  void validate() const;
  nlohmann::ordered_json to_json() const;
};

/// "sigma=0.1,0.5" -> axis. Throws InvalidArgument on bad syntax.
SweepAxis parse_sweep_axis(const std::string& spec);

struct PrepareResult {
  std::size_t records_loaded = 0;
  std::size_t records_kept = 0;
  DatasetSplit split;
};

/// load -> filter -> optional implicit transform -> split -> write manifests into `out`.
PrepareResult cmd_prepare(const RunConfig& config);

struct TrainResult {
  std::filesystem::path model_file;
  FitTimings timings;
  double total_s = 0.0;
};

/// Fits on the train part of `split_dir`, writes out/model.glimg and out/timing.json.
TrainResult cmd_train(const RunConfig& config);

struct RecommendResult {
  bool cold_start = false;
  RecommendationList list;
  std::vector<std::string> item_ids;
  double latency_ms = 0.0;
};

/// Online path only: scores one user against an already-fitted model.
/// Unknown users get the ItemPop ranking with cold_start set.
RecommendResult cmd_recommend(const GlimgModel& model, const std::string& user_id, std::size_t n);

/// Evaluates `method` on `target`. Writes out/report.json and out/report.txt.
EvalReport cmd_evaluate(const RunConfig& config);
EvalReport evaluate_model(const GlimgModel& model, const DatasetSplit& split, const RunConfig& config);

struct SweepRow {
  HyperParams params;
  EvalReport validation;
  EvalReport test;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::size_t selected = 0;  ///< best validation NDCG at the selection cut-off
  std::size_t selection_cutoff = 10;
};

/// Grid over the cartesian product of the sweep axes. Writes out/sweep.csv and out/sweep.json.
SweepResult cmd_sweep(const RunConfig& config);

/// Command-line entry point. Returns one of ExitCode.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace glimg::cli

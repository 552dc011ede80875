#pragma once

// Experiment harness behind the command-line tool: run configuration, data
// preparation, single runs, ablation tables and sweep curves.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "crossdistil/config.hpp"
#include "crossdistil/data.hpp"
#include "crossdistil/model.hpp"
#include "crossdistil/training.hpp"

namespace crossdistil {

enum class SplitMode { Random, Column };

struct SplitSpec {
  SplitMode mode = SplitMode::Random;
  SplitFractions fractions;
  std::uint64_t seed = 1;
};

struct RunConfig {
  std::optional<std::filesystem::path> data_path;  // CSV; synthetic data when absent
  SynthConfig synth;
  ModelConfig model;
  TrainConfig train;
  SplitSpec split;
  std::filesystem::path out_dir = "out";
  std::size_t seeds = 5;                // seeds per variant in ablations
  std::size_t sweep_seeds = 3;          // seeds per point in sweeps
  std::vector<double> ratios{0.1, 0.5, 0.9};
  std::string sweep_param = "m";
  std::vector<double> grid{-4, -3, -2, -1, 0, 1, 2, 3, 4};

  void validate() const;
};

Json run_config_to_json(const RunConfig& rc);
RunConfig run_config_from_json(const Json& j);
// Relative data paths resolve against the config file's directory.
RunConfig load_run_config(const std::filesystem::path& path);

// Same seed drives initialisation and batch sampling.
RunConfig with_seed(RunConfig rc, std::uint64_t seed);

// Loads or generates the dataset and splits it.
DataSplit prepare_data(const RunConfig& rc);

// The eight summary cells: {student, teacher} x {a, b} x {auc, multi_auc}.
Json summary_cells(const EvalRecord& rec);
Json summary_json(const RunConfig& rc, const std::vector<EvalRecord>& history);

struct RunOutput {
  std::vector<EvalRecord> history;
  const EvalRecord& final() const { return history.back(); }
};

// Trains one run. With a non-empty `out_dir` it writes metrics.jsonl,
// summary.json and final.ckpt. `halt_at` stops early, leaving final.ckpt
// as the resume point; `resume_from` continues a saved checkpoint.
RunOutput run_training(const RunConfig& rc, const DataSplit& data,
                       const std::filesystem::path& out_dir = {},
                       const std::optional<std::filesystem::path>& resume_from = std::nullopt,
                       std::optional<std::size_t> halt_at = std::nullopt);

struct SeedStats {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 for a single seed
};
SeedStats seed_stats(const std::vector<double>& xs);

std::vector<std::uint64_t> seed_list(std::uint64_t base, std::size_t n);

// Student cells averaged over seeds.
struct TableRow {
  Variant variant = Variant::CrossDistil;
  double auc_a = 0.0, multi_auc_a = 0.0, auc_b = 0.0, multi_auc_b = 0.0;
  std::vector<std::vector<EvalRecord>> runs;  // per seed
};

// Runs each variant for every seed; the first listed variant is the
// reference row for deltas (crossdistil by default).
std::vector<TableRow> ablate(const RunConfig& rc, const DataSplit& data,
                             const std::vector<std::uint64_t>& seeds,
                             const std::vector<Variant>& variants = {std::begin(kAllVariants),
                                                                     std::end(kAllVariants)},
                             const std::filesystem::path& out_dir = {});
std::string table_csv(const std::vector<TableRow>& rows);

struct CurvePoint {
  double x = 0.0;
  SeedStats multi_auc_a, multi_auc_b, auc_a, auc_b;
  std::vector<EvalRecord> finals;  // per seed
};

// Corrupts task-B labels of the training split only, then retrains.
std::vector<CurvePoint> corrupt_sweep(const RunConfig& rc, const DataSplit& data,
                                      const std::vector<double>& ratios,
                                      const std::vector<std::uint64_t>& seeds,
                                      const std::filesystem::path& out_dir = {});

// param in {m, beta1, beta2, alpha}; applied to both tasks. Duplicate grid
// values are run once.
std::vector<CurvePoint> sweep(const RunConfig& rc, const DataSplit& data, const std::string& param,
                              const std::vector<double>& grid,
                              const std::vector<std::uint64_t>& seeds,
                              const std::filesystem::path& out_dir = {});
std::string curve_csv(const std::string& x_name, const std::vector<CurvePoint>& points);

// Sets a sweep parameter on both tasks; throws ConfigError for unknown names.
void set_sweep_param(HyperParams& hp, const std::string& param, double value);

}  // namespace crossdistil

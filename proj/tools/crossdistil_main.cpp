// crossdistil command-line tool: data generation, training and experiment
// sweeps. Every command reads a JSON run config (see README).

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "crossdistil/errors.hpp"
#include "crossdistil/experiments.hpp"

namespace fs = std::filesystem;
using namespace crossdistil;

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> variant;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool with_variant) {
  cmd->add_option("--config", o.config, "JSON run config")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "seed (base seed for multi-seed commands)");
  cmd->add_option("--out", o.out, "output directory");
  if (with_variant) cmd->add_option("--variant", o.variant, "training variant");
}

RunConfig resolve(const CommonOptions& o) {
  RunConfig rc = load_run_config(o.config);
  if (o.out) rc.out_dir = *o.out;
  if (o.variant) rc.train.variant = parse_variant(*o.variant);
  if (o.seed) rc = with_seed(rc, *o.seed);
  return rc;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
}

void write_report(const RunConfig& rc, const std::string& stem, const std::string& csv, Json rows) {
  fs::create_directories(rc.out_dir);
  write_file(rc.out_dir / (stem + ".csv"), csv);
  write_file(rc.out_dir / (stem + ".json"),
             Json{{"config", run_config_to_json(rc)}, {"rows", std::move(rows)}}.dump(2) + "\n");
  std::cout << csv;
}

Json curve_rows(const std::vector<CurvePoint>& points) {
  Json rows = Json::array();
  for (const auto& p : points) {
    Json finals = Json::array();
    for (const auto& f : p.finals) finals.push_back(summary_cells(f));
    rows.push_back({{"x", p.x},
                    {"multi_auc_a", {{"mean", p.multi_auc_a.mean}, {"std", p.multi_auc_a.stddev}}},
                    {"multi_auc_b", {{"mean", p.multi_auc_b.mean}, {"std", p.multi_auc_b.stddev}}},
                    {"per_seed", finals}});
  }
  return rows;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-task knowledge distillation for multi-task recommendation"};
  app.require_subcommand(1);

  CommonOptions gen_opts, train_opts, ablate_opts, corrupt_opts, sweep_opts;
  std::optional<std::string> resume_path;
  std::optional<std::size_t> halt_at;
  std::optional<std::size_t> n_seeds;
  std::vector<std::string> variant_names;
  std::vector<double> ratios, grid;
  std::optional<std::string> param;

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  add_common(gen, gen_opts, false);

  auto* train_cmd = app.add_subcommand("train", "train one run");
  add_common(train_cmd, train_opts, true);
  train_cmd->add_option("--resume", resume_path, "checkpoint to continue from")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--halt-at", halt_at, "stop after this many total steps");

  auto* ablate_cmd = app.add_subcommand("ablate", "compare training variants");
  add_common(ablate_cmd, ablate_opts, false);
  ablate_cmd->add_option("--seeds", n_seeds, "number of seeds");
  ablate_cmd->add_option("--variants", variant_names, "variants to run (first is the reference)");

  auto* corrupt_cmd = app.add_subcommand("corrupt-sweep", "retrain with corrupted task-B labels");
  add_common(corrupt_cmd, corrupt_opts, true);
  corrupt_cmd->add_option("--seeds", n_seeds, "number of seeds");
  corrupt_cmd->add_option("--ratios", ratios, "corruption ratios in [0, 1]");

  auto* sweep_cmd = app.add_subcommand("sweep", "hyper-parameter sweep");
  add_common(sweep_cmd, sweep_opts, true);
  sweep_cmd->add_option("--seeds", n_seeds, "number of seeds");
  sweep_cmd->add_option("--param", param, "m, beta1, beta2 or alpha");
  sweep_cmd->add_option("--grid", grid, "parameter values");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      RunConfig rc = load_run_config(gen_opts.config);
      if (gen_opts.out) rc.out_dir = *gen_opts.out;
      if (gen_opts.seed) rc.synth.seed = *gen_opts.seed;
      const SyntheticData data = generate_synthetic(rc.synth);
      fs::create_directories(rc.out_dir);
      write_csv(data.dataset, rc.out_dir / "data.csv");
      write_utilities(data, rc.out_dir / "utilities.csv");
      write_file(rc.out_dir / "synth.json", Json(rc.synth).dump(2) + "\n");
      std::cout << "wrote " << data.dataset.size() << " rows to " << (rc.out_dir / "data.csv").string()
                << " (positives: a=" << data.dataset.positives(Task::A)
                << ", b=" << data.dataset.positives(Task::B) << ")\n";
    } else if (train_cmd->parsed()) {
      const RunConfig rc = resolve(train_opts);
      const DataSplit data = prepare_data(rc);
      const auto out = run_training(rc, data, rc.out_dir,
                                    resume_path ? std::optional<fs::path>(*resume_path) : std::nullopt,
                                    halt_at);
      std::cout << summary_json(rc, out.history).at("metrics").dump(2) << "\n";
    } else if (ablate_cmd->parsed()) {
      const RunConfig rc = resolve(ablate_opts);
      std::vector<Variant> variants;
      for (const auto& v : variant_names) variants.push_back(parse_variant(v));
      if (variants.empty()) variants.assign(std::begin(kAllVariants), std::end(kAllVariants));
      const DataSplit data = prepare_data(rc);
      const auto rows = ablate(rc, data, seed_list(rc.train.seed, n_seeds.value_or(rc.seeds)),
                               variants, rc.out_dir / "runs");
      Json json_rows = Json::array();
      for (const auto& r : rows) {
        json_rows.push_back({{"variant", variant_name(r.variant)},
                             {"auc_a", r.auc_a},
                             {"multi_auc_a", r.multi_auc_a},
                             {"auc_b", r.auc_b},
                             {"multi_auc_b", r.multi_auc_b}});
      }
      write_report(rc, "table", table_csv(rows), json_rows);
    } else if (corrupt_cmd->parsed()) {
      RunConfig rc = resolve(corrupt_opts);
      if (!ratios.empty()) rc.ratios = ratios;
      rc.validate();
      const DataSplit data = prepare_data(rc);
      const auto points = corrupt_sweep(rc, data, rc.ratios,
                                        seed_list(rc.train.seed, n_seeds.value_or(rc.sweep_seeds)),
                                        rc.out_dir / "runs");
      write_report(rc, "curve_corruption", curve_csv("ratio", points), curve_rows(points));
    } else if (sweep_cmd->parsed()) {
      RunConfig rc = resolve(sweep_opts);
      if (param) rc.sweep_param = *param;
      if (!grid.empty()) rc.grid = grid;
      rc.validate();
      const DataSplit data = prepare_data(rc);
      const auto points = sweep(rc, data, rc.sweep_param, rc.grid,
                                seed_list(rc.train.seed, n_seeds.value_or(rc.sweep_seeds)),
                                rc.out_dir / "runs");
      write_report(rc, "curve_" + rc.sweep_param, curve_csv(rc.sweep_param, points),
                   curve_rows(points));
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "aborted: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

#include "crossdistil/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "crossdistil/errors.hpp"

namespace crossdistil {

namespace fs = std::filesystem;

// ---- configuration ----

void RunConfig::validate() const {
  if (!data_path) synth.validate();
  model.validate();
  train.validate();
  if (split.mode == SplitMode::Random) {
    const auto& f = split.fractions;
    if (f.train <= 0 || f.valid < 0 || f.test <= 0) {
      throw ConfigError("split: train and test fractions must be > 0, valid >= 0");
    }
    if (std::abs(f.train + f.valid + f.test - 1.0) > 1e-9) {
      throw ConfigError("split: fractions must sum to 1");
    }
  }
  if (seeds < 1 || sweep_seeds < 1) throw ConfigError("experiment: seed counts must be >= 1");
  for (double r : ratios) {
    if (r < 0.0 || r > 1.0) throw ConfigError("experiment.ratios must lie in [0, 1]");
  }
  if (grid.empty()) throw ConfigError("experiment.grid must be nonempty");
  HyperParams probe;
  set_sweep_param(probe, sweep_param, 0.0);
}

Json run_config_to_json(const RunConfig& rc) {
  Json j;
  if (rc.data_path) {
    j["data"] = {{"path", rc.data_path->string()}};
  } else {
    j["synth"] = rc.synth;
  }
  j["model"] = rc.model;
  j["train"] = rc.train;
  Json split = rc.split.fractions;
  split["mode"] = rc.split.mode == SplitMode::Random ? "random" : "column";
  split["seed"] = rc.split.seed;
  j["split"] = split;
  j["out"] = rc.out_dir.string();
  j["experiment"] = {{"seeds", rc.seeds},
                     {"sweep_seeds", rc.sweep_seeds},
                     {"ratios", rc.ratios},
                     {"param", rc.sweep_param},
                     {"grid", rc.grid}};
  return j;
}

RunConfig run_config_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  RunConfig rc;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "data") {
        if (!value.is_object() || !value.contains("path") || value.size() != 1) {
          throw ConfigError("data: expected {\"path\": <csv file>}");
        }
        rc.data_path = value.at("path").get<std::string>();
      } else if (key == "synth") {
        rc.synth = value.get<SynthConfig>();
      } else if (key == "model") {
        rc.model = value.get<ModelConfig>();
      } else if (key == "train") {
        rc.train = value.get<TrainConfig>();
      } else if (key == "split") {
        Json fractions = value;
        if (value.contains("mode")) {
          const auto mode = value.at("mode").get<std::string>();
          if (mode == "random") {
            rc.split.mode = SplitMode::Random;
          } else if (mode == "column") {
            rc.split.mode = SplitMode::Column;
          } else {
            throw ConfigError("split.mode: expected random or column, got '" + mode + "'");
          }
          fractions.erase("mode");
        }
        if (value.contains("seed")) {
          rc.split.seed = value.at("seed").get<std::uint64_t>();
          fractions.erase("seed");
        }
        rc.split.fractions = fractions.get<SplitFractions>();
      } else if (key == "out") {
        rc.out_dir = value.get<std::string>();
      } else if (key == "experiment") {
        for (const auto& [k, v] : value.items()) {
          if (k == "seeds") {
            rc.seeds = v.get<std::size_t>();
          } else if (k == "sweep_seeds") {
            rc.sweep_seeds = v.get<std::size_t>();
          } else if (k == "ratios") {
            rc.ratios = v.get<std::vector<double>>();
          } else if (k == "param") {
            rc.sweep_param = v.get<std::string>();
          } else if (k == "grid") {
            rc.grid = v.get<std::vector<double>>();
          } else {
            throw ConfigError("experiment: unknown key '" + k + "'");
          }
        }
      } else {
        throw ConfigError("config: unknown section '" + key + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(key + ": " + e.what());
    }
  }
  rc.validate();
  return rc;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "': " + e.what());
  }
  RunConfig rc = run_config_from_json(j);
  if (rc.data_path && rc.data_path->is_relative()) {
    rc.data_path = path.parent_path() / *rc.data_path;
  }
  return rc;
}

RunConfig with_seed(RunConfig rc, std::uint64_t seed) {
  rc.train.seed = seed;
  rc.model.seed = seed;
  return rc;
}

DataSplit prepare_data(const RunConfig& rc) {
  const Dataset ds = rc.data_path ? load_csv(*rc.data_path) : generate_synthetic(rc.synth).dataset;
  return rc.split.mode == SplitMode::Random ? random_split(ds, rc.split.fractions, rc.split.seed)
                                            : column_split(ds);
}

// ---- single runs ----

Json summary_cells(const EvalRecord& rec) {
  const auto cell = [](const HeadEval& h) { return Json{{"auc", h.auc}, {"multi_auc", h.multi_auc}}; };
  return Json{{"student_a", cell(rec.student_a)},
              {"student_b", cell(rec.student_b)},
              {"teacher_a", cell(rec.teacher_a)},
              {"teacher_b", cell(rec.teacher_b)}};
}

Json summary_json(const RunConfig& rc, const std::vector<EvalRecord>& history) {
  if (history.empty()) throw UsageError("summary_json: empty history");
  const EvalRecord& last = history.back();
  return Json{{"variant", variant_name(rc.train.variant)},
              {"seed", rc.train.seed},
              {"step", last.step},
              {"metrics", summary_cells(last)},
              {"test_losses",
               {{"student_a", last.test_ce_a},
                {"student_b", last.test_ce_b},
                {"student_mean", last.test_student_loss}}},
              {"teacher_logloss",
               {{"raw_a", last.teacher_logloss_raw_a},
                {"raw_b", last.teacher_logloss_raw_b},
                {"calibrated_a", last.teacher_logloss_cal_a},
                {"calibrated_b", last.teacher_logloss_cal_b}}},
              {"config", run_config_to_json(rc)}};
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw ConfigError("failed writing '" + path.string() + "'");
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace

RunOutput run_training(const RunConfig& rc, const DataSplit& data, const fs::path& out_dir,
                       const std::optional<fs::path>& resume_from,
                       std::optional<std::size_t> halt_at) {
  const bool write = !out_dir.empty();
  std::ofstream jsonl;
  if (write) {
    fs::create_directories(out_dir);
    jsonl.open(out_dir / "metrics.jsonl", std::ios::binary | std::ios::trunc);
    if (!jsonl) throw ConfigError("cannot write '" + (out_dir / "metrics.jsonl").string() + "'");
  }

  TrainResult run;
  TrainHooks hooks;
  hooks.halt_at = halt_at;
  hooks.on_eval = [&](const EvalRecord& rec) {
    if (write) {
      jsonl << Json(rec).dump() << '\n';
      jsonl.flush();
    }
  };

  if (resume_from) {
    TrainConfig saved;
    run = load_checkpoint(*resume_from, &saved);
    if (Json(saved) != Json(rc.train)) {
      throw ConfigError("resume: checkpoint '" + resume_from->string() +
                        "' was written with a different train config");
    }
    for (const auto& rec : run.history) hooks.on_eval(rec);
    run = resume(std::move(run), data.train, data.test, rc.train, hooks);
  } else {
    run = train(data.train, data.test, rc.model, rc.train, hooks);
  }
  if (write) {
    save_checkpoint(run, rc.train, out_dir / "final.ckpt");
    const LabelPartition part = partition(data.train);
    Json summary = summary_json(rc, run.history);
    summary["train_subsets"] = {{"++", part.pp.size()},
                                {"+-", part.pm.size()},
                                {"-+", part.mp.size()},
                                {"--", part.mm.size()}};
    write_text(out_dir / "summary.json", summary.dump(2) + "\n");
  }
  return RunOutput{std::move(run.history)};
}

// ---- multi-seed experiments ----

SeedStats seed_stats(const std::vector<double>& xs) {
  if (xs.empty()) throw UsageError("seed_stats: no values");
  SeedStats s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return s;
}

std::vector<std::uint64_t> seed_list(std::uint64_t base, std::size_t n) {
  std::vector<std::uint64_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = base + i;
  return out;
}

namespace {

fs::path sub(const fs::path& dir, const std::string& name) {
  return dir.empty() ? fs::path{} : dir / name;
}

CurvePoint curve_point(double x, std::vector<EvalRecord> finals) {
  CurvePoint p;
  p.x = x;
  std::vector<double> ma, mb, aa, ab;
  for (const auto& r : finals) {
    ma.push_back(r.student_a.multi_auc);
    mb.push_back(r.student_b.multi_auc);
    aa.push_back(r.student_a.auc);
    ab.push_back(r.student_b.auc);
  }
  p.multi_auc_a = seed_stats(ma);
  p.multi_auc_b = seed_stats(mb);
  p.auc_a = seed_stats(aa);
  p.auc_b = seed_stats(ab);
  p.finals = std::move(finals);
  return p;
}

}  // namespace

std::vector<TableRow> ablate(const RunConfig& rc, const DataSplit& data,
                             const std::vector<std::uint64_t>& seeds,
                             const std::vector<Variant>& variants, const fs::path& out_dir) {
  if (seeds.empty()) throw ConfigError("ablate: no seeds");
  std::vector<TableRow> rows;
  for (Variant v : variants) {
    TableRow row;
    row.variant = v;
    for (std::uint64_t s : seeds) {
      RunConfig run_cfg = with_seed(rc, s);
      run_cfg.train.variant = v;
      const fs::path dir = sub(out_dir, std::string(variant_name(v)) + "/seed_" + std::to_string(s));
      row.runs.push_back(run_training(run_cfg, data, dir).history);
      const EvalRecord& f = row.runs.back().back();
      row.auc_a += f.student_a.auc;
      row.multi_auc_a += f.student_a.multi_auc;
      row.auc_b += f.student_b.auc;
      row.multi_auc_b += f.student_b.multi_auc;
    }
    const double n = static_cast<double>(seeds.size());
    row.auc_a /= n;
    row.multi_auc_a /= n;
    row.auc_b /= n;
    row.multi_auc_b /= n;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string table_csv(const std::vector<TableRow>& rows) {
  std::ostringstream os;
  os << "variant,auc_a,multi_auc_a,auc_b,multi_auc_b,"
        "delta_auc_a,delta_multi_auc_a,delta_auc_b,delta_multi_auc_b\n";
  if (rows.empty()) return os.str();
  const TableRow& ref = rows.front();
  for (const auto& r : rows) {
    os << variant_name(r.variant) << ',' << fmt(r.auc_a) << ',' << fmt(r.multi_auc_a) << ','
       << fmt(r.auc_b) << ',' << fmt(r.multi_auc_b) << ',' << fmt(r.auc_a - ref.auc_a) << ','
       << fmt(r.multi_auc_a - ref.multi_auc_a) << ',' << fmt(r.auc_b - ref.auc_b) << ','
       << fmt(r.multi_auc_b - ref.multi_auc_b) << '\n';
  }
  return os.str();
}

std::vector<CurvePoint> corrupt_sweep(const RunConfig& rc, const DataSplit& data,
                                      const std::vector<double>& ratios,
                                      const std::vector<std::uint64_t>& seeds,
                                      const fs::path& out_dir) {
  if (seeds.empty()) throw ConfigError("corrupt-sweep: no seeds");
  std::vector<CurvePoint> points;
  for (double ratio : ratios) {
    if (ratio < 0.0 || ratio > 1.0) throw ConfigError("corrupt-sweep: ratio outside [0, 1]");
    std::vector<EvalRecord> finals;
    for (std::uint64_t s : seeds) {
      Rng rng(rc.split.seed * 1000003ULL + s);
      DataSplit corrupted{corrupt_labels(data.train, Task::B, ratio, rng), data.valid, data.test};
      const fs::path dir = sub(out_dir, "ratio_" + fmt(ratio) + "/seed_" + std::to_string(s));
      finals.push_back(run_training(with_seed(rc, s), corrupted, dir).final());
    }
    points.push_back(curve_point(ratio, std::move(finals)));
  }
  return points;
}

void set_sweep_param(HyperParams& hp, const std::string& param, double value) {
  if (param == "m") {
    hp.margin = value;
  } else if (param == "beta1") {
    hp.beta1_a = hp.beta1_b = value;
  } else if (param == "beta2") {
    hp.beta2_a = hp.beta2_b = value;
  } else if (param == "alpha") {
    hp.alpha_a = hp.alpha_b = value;
  } else {
    throw ConfigError("sweep: unknown parameter '" + param + "' (expected m, beta1, beta2 or alpha)");
  }
}

std::vector<CurvePoint> sweep(const RunConfig& rc, const DataSplit& data, const std::string& param,
                              const std::vector<double>& grid,
                              const std::vector<std::uint64_t>& seeds, const fs::path& out_dir) {
  if (grid.empty()) throw ConfigError("sweep: grid is empty");
  if (seeds.empty()) throw ConfigError("sweep: no seeds");
  std::vector<double> values;
  for (double v : grid) {
    if (std::find(values.begin(), values.end(), v) == values.end()) values.push_back(v);
  }
  std::vector<CurvePoint> points;
  for (double v : values) {
    RunConfig point_cfg = rc;
    set_sweep_param(point_cfg.train.hyper, param, v);
    point_cfg.train.hyper.validate();
    std::vector<EvalRecord> finals;
    for (std::uint64_t s : seeds) {
      const fs::path dir = sub(out_dir, param + "_" + fmt(v) + "/seed_" + std::to_string(s));
      finals.push_back(run_training(with_seed(point_cfg, s), data, dir).final());
    }
    points.push_back(curve_point(v, std::move(finals)));
  }
  return points;
}

std::string curve_csv(const std::string& x_name, const std::vector<CurvePoint>& points) {
  std::ostringstream os;
  os << x_name
     << ",seeds,multi_auc_a_mean,multi_auc_a_std,multi_auc_b_mean,multi_auc_b_std,"
        "auc_a_mean,auc_a_std,auc_b_mean,auc_b_std\n";
  for (const auto& p : points) {
    os << fmt(p.x) << ',' << p.finals.size() << ',' << fmt(p.multi_auc_a.mean) << ','
       << fmt(p.multi_auc_a.stddev) << ',' << fmt(p.multi_auc_b.mean) << ','
       << fmt(p.multi_auc_b.stddev) << ',' << fmt(p.auc_a.mean) << ',' << fmt(p.auc_a.stddev)
       << ',' << fmt(p.auc_b.mean) << ',' << fmt(p.auc_b.stddev) << '\n';
  }
  return os.str();
}

}  // namespace crossdistil

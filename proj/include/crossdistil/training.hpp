#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "crossdistil/data.hpp"
#include "crossdistil/losses.hpp"
#include "crossdistil/model.hpp"
#include "crossdistil/rng.hpp"

namespace crossdistil {

enum class Variant {
  CrossDistil,
  Taug,
  Backbone,
  NoCalibration,
  NoCorrection,
  NoAuxiliaryRank,
  KdSameTask,
  KdCrossTaskDirect,
};

inline constexpr Variant kAllVariants[] = {
    Variant::CrossDistil,     Variant::NoAuxiliaryRank, Variant::NoCalibration,
    Variant::NoCorrection,    Variant::KdSameTask,      Variant::KdCrossTaskDirect,
    Variant::Taug,            Variant::Backbone,
};

const char* variant_name(Variant v);
Variant parse_variant(const std::string& s);

enum class OptimizerKind { Sgd, Adam };

struct TrainConfig {
  double lr_model = 0.05;  // step size for model parameters
  double lr_calib = 0.05;  // step size for calibration parameters
  OptimizerKind optimizer = OptimizerKind::Sgd;
  std::size_t batch_size = 128;
  std::size_t steps = 1000;
  std::size_t eval_interval = 250;
  std::uint64_t seed = 1;
  Variant variant = Variant::CrossDistil;
  HyperParams hyper;

  void validate() const;
};

enum class TeacherKind { None, Ranking, Regression };
enum class KdSource { None, Teacher, OtherStudent };

/// Which loss terms a variant switches on. `hyper` holds the effective
/// coefficients (e.g. zeroed betas without auxiliary ranking).
struct ActiveGraph {
  TeacherKind teacher = TeacherKind::Ranking;
  KdSource kd = KdSource::Teacher;
  bool calibration = true;
  bool correction = true;
  bool calibration_step = true;
  HyperParams hyper;
};

ActiveGraph apply_variant(const TrainConfig& cfg);

/// SGD or Adam with optional L2 weight decay folded into the gradient.
class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(OptimizerKind kind, double lr, double weight_decay = 0.0);

  void step(std::span<Tensor> params);

  OptimizerKind kind() const { return kind_; }
  std::uint64_t steps() const { return t_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }
  void restore(std::uint64_t t, std::vector<std::vector<double>> m, std::vector<std::vector<double>> v);

 private:
  OptimizerKind kind_ = OptimizerKind::Sgd;
  double lr_ = 0.0;
  double weight_decay_ = 0.0;
  std::uint64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

struct StepMetrics {
  double a_plus = 0.0, b_plus = 0.0;  // teacher losses
  double a_ce = 0.0, b_ce = 0.0;      // student hard-label CE
  double a_kd = 0.0, b_kd = 0.0;      // distillation terms
  double a_stu = 0.0, b_stu = 0.0;    // student losses
  double model = 0.0;                 // weighted sum driving the model step
  double cal = 0.0;                   // calibration loss

  StepMetrics& operator+=(const StepMetrics& o);
  StepMetrics scaled(double c) const;
};

struct TrainState {
  MultiTaskNet net;
  CalibrationParams calib;
  Optimizer model_opt;
  Optimizer calib_opt;
  std::size_t step = 0;
  Rng rng;
  StepMetrics running;  // sums since the last eval record
  std::size_t running_count = 0;
};

TrainState init_state(const ModelConfig& model_cfg, const Dataset& schema, const TrainConfig& cfg);

struct ModelStepResult {
  StepMetrics metrics;
  std::vector<std::size_t> x;  // the uniform batch, reused by the calibration step
};

// Samples the step's batches and updates the model parameters only.
ModelStepResult model_step(TrainState& state, const Dataset& train, const LabelPartition& part,
                           const TrainConfig& cfg);

// Recomputes teacher logits on rows `x` with the model frozen and updates the
// calibration parameters only. Returns the calibration loss.
double calibration_step(TrainState& state, const Dataset& train, std::span<const std::size_t> x);

// One bi-level iteration: model_step, then calibration_step when the variant
// trains calibration.
StepMetrics train_step(TrainState& state, const Dataset& train, const LabelPartition& part,
                       const TrainConfig& cfg);

struct HeadEval {
  double auc = 0.0;
  double multi_auc = 0.0;
};

struct EvalRecord {
  std::size_t step = 0;
  StepMetrics train;  // mean over steps since the previous record
  double test_ce_a = 0.0, test_ce_b = 0.0;  // student LogLoss on held-out data
  double test_student_loss = 0.0;           // mean of the two
  HeadEval student_a, student_b, teacher_a, teacher_b;
  double teacher_logloss_raw_a = 0.0, teacher_logloss_raw_b = 0.0;  // s(r_hat)
  double teacher_logloss_cal_a = 0.0, teacher_logloss_cal_b = 0.0;  // calibrated y~
  double calib_p_a = 0.0, calib_q_a = 0.0, calib_p_b = 0.0, calib_q_b = 0.0;
};

// Held-out metrics for the current state; does not mutate it.
EvalRecord evaluate(const TrainState& state, const Dataset& test);

struct TrainHooks {
  // Stop after this many total steps (simulates an interruption).
  std::optional<std::size_t> halt_at;
  std::function<void(const EvalRecord&)> on_eval;
};

struct TrainResult {
  TrainState state;
  std::vector<EvalRecord> history;
};

// Fixed-budget training with an eval record at step 0, every eval_interval
// steps and at the end.
TrainResult train(const Dataset& train_set, const Dataset& test_set, const ModelConfig& model_cfg,
                  const TrainConfig& cfg, const TrainHooks& hooks = {});

// Continues a (possibly checkpointed) run up to cfg.steps.
TrainResult resume(TrainResult prior, const Dataset& train_set, const Dataset& test_set,
                   const TrainConfig& cfg, const TrainHooks& hooks = {});

// Binary checkpoint: config, parameters, calibration, optimizer moments,
// RNG state and metric history. Round-trips bit-exactly.
void save_checkpoint(const TrainResult& run, const TrainConfig& cfg,
                     const std::filesystem::path& path);
TrainResult load_checkpoint(const std::filesystem::path& path, TrainConfig* cfg_out = nullptr);

void save_model(const MultiTaskNet& net, const std::filesystem::path& path);
MultiTaskNet load_model(const std::filesystem::path& path);

}  // namespace crossdistil

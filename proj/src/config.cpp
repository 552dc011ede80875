#include "crossdistil/config.hpp"

#include <set>

#include "crossdistil/errors.hpp"

namespace crossdistil {

namespace {

// Reads members listed by `bind`, rejecting keys it does not know.
class Reader {
 public:
  Reader(const Json& j, std::string section) : j_(j), section_(std::move(section)) {
    if (!j_.is_object()) throw ConfigError(section_ + ": expected an object");
  }
  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(section_ + ": unknown key '" + key + "'");
    }
  }

  template <typename T>
  Reader& operator()(const char* key, T& field) {
    seen_.insert(key);
    if (auto it = j_.find(key); it != j_.end()) {
      try {
        field = it->template get<T>();
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(section_ + "." + key + ": " + e.what());
      }
    }
    return *this;
  }

 private:
  const Json& j_;
  std::string section_;
  std::set<std::string> seen_;
};

}  // namespace

void to_json(Json& j, const SynthConfig& c) {
  j = Json{{"n_users", c.n_users},
           {"n_items", c.n_items},
           {"n_context_fields", c.n_context_fields},
           {"context_vocab", c.context_vocab},
           {"dim", c.dim},
           {"rho", c.rho},
           {"rate_a", c.rate_a},
           {"rate_b", c.rate_b},
           {"n_samples", c.n_samples},
           {"utility_scale", c.utility_scale},
           {"main_effect_std", c.main_effect_std},
           {"noise", c.noise},
           {"seed", c.seed}};
}

void from_json(const Json& j, SynthConfig& c) {
  Reader(j, "synth")("n_users", c.n_users)("n_items", c.n_items)(
      "n_context_fields", c.n_context_fields)("context_vocab", c.context_vocab)("dim", c.dim)(
      "rho", c.rho)("rate_a", c.rate_a)("rate_b", c.rate_b)("n_samples", c.n_samples)(
      "utility_scale", c.utility_scale)("main_effect_std", c.main_effect_std)("noise", c.noise)(
      "seed", c.seed);
}

void to_json(Json& j, const ModelConfig& c) {
  j = Json{{"embedding_dim", c.embedding_dim},
           {"backbone", c.backbone == BackboneKind::SharedBottom ? "shared_bottom" : "gated_experts"},
           {"hidden", c.hidden},
           {"shared_experts", c.shared_experts},
           {"tower_hidden", c.tower_hidden},
           {"activation", "relu"},
           {"init_scale", c.init_scale},
           {"seed", c.seed}};
}

void from_json(const Json& j, ModelConfig& c) {
  std::string backbone = c.backbone == BackboneKind::SharedBottom ? "shared_bottom" : "gated_experts";
  std::string activation = "relu";
  Reader(j, "model")("embedding_dim", c.embedding_dim)("backbone", backbone)("hidden", c.hidden)(
      "shared_experts", c.shared_experts)("tower_hidden", c.tower_hidden)("activation", activation)(
      "init_scale", c.init_scale)("seed", c.seed);
  if (backbone == "shared_bottom") {
    c.backbone = BackboneKind::SharedBottom;
  } else if (backbone == "gated_experts") {
    c.backbone = BackboneKind::GatedExperts;
  } else {
    throw ConfigError("model.backbone: expected shared_bottom or gated_experts, got '" + backbone + "'");
  }
  if (activation != "relu") throw ConfigError("model.activation: only relu is supported");
}

void to_json(Json& j, const HyperParams& c) {
  j = Json{{"tau", c.tau},         {"alpha_a", c.alpha_a},   {"alpha_b", c.alpha_b},
           {"beta1_a", c.beta1_a}, {"beta2_a", c.beta2_a},   {"beta1_b", c.beta1_b},
           {"beta2_b", c.beta2_b}, {"margin", c.margin},     {"w_a_plus", c.w_a_plus},
           {"w_b_plus", c.w_b_plus}, {"w_a", c.w_a},         {"w_b", c.w_b},
           {"weight_decay", c.weight_decay}};
}

void from_json(const Json& j, HyperParams& c) {
  Reader(j, "hyper")("tau", c.tau)("alpha_a", c.alpha_a)("alpha_b", c.alpha_b)(
      "beta1_a", c.beta1_a)("beta2_a", c.beta2_a)("beta1_b", c.beta1_b)("beta2_b", c.beta2_b)(
      "margin", c.margin)("w_a_plus", c.w_a_plus)("w_b_plus", c.w_b_plus)("w_a", c.w_a)(
      "w_b", c.w_b)("weight_decay", c.weight_decay);
}

void to_json(Json& j, const TrainConfig& c) {
  j = Json{{"lr_model", c.lr_model},
           {"lr_calib", c.lr_calib},
           {"optimizer", c.optimizer == OptimizerKind::Sgd ? "sgd" : "adam"},
           {"batch_size", c.batch_size},
           {"steps", c.steps},
           {"eval_interval", c.eval_interval},
           {"seed", c.seed},
           {"variant", variant_name(c.variant)},
           {"hyper", c.hyper}};
}

void from_json(const Json& j, TrainConfig& c) {
  std::string optimizer = c.optimizer == OptimizerKind::Sgd ? "sgd" : "adam";
  std::string variant = variant_name(c.variant);
  Reader(j, "train")("lr_model", c.lr_model)("lr_calib", c.lr_calib)("optimizer", optimizer)(
      "batch_size", c.batch_size)("steps", c.steps)("eval_interval", c.eval_interval)(
      "seed", c.seed)("variant", variant)("hyper", c.hyper);
  if (optimizer == "sgd") {
    c.optimizer = OptimizerKind::Sgd;
  } else if (optimizer == "adam") {
    c.optimizer = OptimizerKind::Adam;
  } else {
    throw ConfigError("train.optimizer: expected sgd or adam, got '" + optimizer + "'");
  }
  c.variant = parse_variant(variant);
}

void to_json(Json& j, const SplitFractions& c) {
  j = Json{{"train", c.train}, {"valid", c.valid}, {"test", c.test}};
}

void from_json(const Json& j, SplitFractions& c) {
  Reader(j, "split")("train", c.train)("valid", c.valid)("test", c.test);
}

void to_json(Json& j, const StepMetrics& m) {
  j = Json{{"a_plus", m.a_plus}, {"b_plus", m.b_plus}, {"a_ce", m.a_ce},   {"b_ce", m.b_ce},
           {"a_kd", m.a_kd},     {"b_kd", m.b_kd},     {"a_stu", m.a_stu}, {"b_stu", m.b_stu},
           {"model", m.model},   {"cal", m.cal}};
}

void from_json(const Json& j, StepMetrics& m) {
  Reader(j, "train_losses")("a_plus", m.a_plus)("b_plus", m.b_plus)("a_ce", m.a_ce)(
      "b_ce", m.b_ce)("a_kd", m.a_kd)("b_kd", m.b_kd)("a_stu", m.a_stu)("b_stu", m.b_stu)(
      "model", m.model)("cal", m.cal);
}

namespace {

Json head_json(const HeadEval& h) { return Json{{"auc", h.auc}, {"multi_auc", h.multi_auc}}; }

HeadEval head_from(const Json& j) {
  return HeadEval{j.at("auc").get<double>(), j.at("multi_auc").get<double>()};
}

}  // namespace

void to_json(Json& j, const EvalRecord& r) {
  j = Json{{"step", r.step},
           {"train_losses", r.train},
           {"test_losses",
            {{"student_a", r.test_ce_a}, {"student_b", r.test_ce_b}, {"student_mean", r.test_student_loss}}},
           {"student_a", head_json(r.student_a)},
           {"student_b", head_json(r.student_b)},
           {"teacher_a", head_json(r.teacher_a)},
           {"teacher_b", head_json(r.teacher_b)},
           {"teacher_logloss",
            {{"raw_a", r.teacher_logloss_raw_a},
             {"raw_b", r.teacher_logloss_raw_b},
             {"calibrated_a", r.teacher_logloss_cal_a},
             {"calibrated_b", r.teacher_logloss_cal_b}}},
           {"calibration",
            {{"p_a", r.calib_p_a}, {"q_a", r.calib_q_a}, {"p_b", r.calib_p_b}, {"q_b", r.calib_q_b}}}};
}

void from_json(const Json& j, EvalRecord& r) {
  r.step = j.at("step").get<std::size_t>();
  r.train = j.at("train_losses").get<StepMetrics>();
  const auto& t = j.at("test_losses");
  r.test_ce_a = t.at("student_a").get<double>();
  r.test_ce_b = t.at("student_b").get<double>();
  r.test_student_loss = t.at("student_mean").get<double>();
  r.student_a = head_from(j.at("student_a"));
  r.student_b = head_from(j.at("student_b"));
  r.teacher_a = head_from(j.at("teacher_a"));
  r.teacher_b = head_from(j.at("teacher_b"));
  const auto& ll = j.at("teacher_logloss");
  r.teacher_logloss_raw_a = ll.at("raw_a").get<double>();
  r.teacher_logloss_raw_b = ll.at("raw_b").get<double>();
  r.teacher_logloss_cal_a = ll.at("calibrated_a").get<double>();
  r.teacher_logloss_cal_b = ll.at("calibrated_b").get<double>();
  const auto& c = j.at("calibration");
  r.calib_p_a = c.at("p_a").get<double>();
  r.calib_q_a = c.at("q_a").get<double>();
  r.calib_p_b = c.at("p_b").get<double>();
  r.calib_q_b = c.at("q_b").get<double>();
}

}  // namespace crossdistil

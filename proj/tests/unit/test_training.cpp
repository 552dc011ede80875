#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "crossdistil/config.hpp"
#include "crossdistil/errors.hpp"
#include "crossdistil/training.hpp"

using namespace crossdistil;
namespace ng = crossdistil::numgrad;
namespace fs = std::filesystem;

namespace {

struct Fixture {
  DataSplit split;
  ModelConfig model;
  TrainConfig train;
};

Fixture make_fixture(OptimizerKind opt = OptimizerKind::Sgd) {
  SynthConfig sc;
  sc.n_users = 20;
  sc.n_items = 30;
  sc.n_samples = 800;
  sc.seed = 3;
  Fixture f;
  f.split = random_split(generate_synthetic(sc).dataset, {}, 1);
  f.model.embedding_dim = 4;
  f.model.hidden = {8};
  f.model.tower_hidden = {4};
  f.model.seed = 5;
  f.train.optimizer = opt;
  f.train.lr_model = opt == OptimizerKind::Sgd ? 0.05 : 0.01;
  f.train.lr_calib = 0.05;
  f.train.batch_size = 16;
  f.train.steps = 12;
  f.train.eval_interval = 4;
  f.train.seed = 9;
  f.train.hyper.alpha_a = f.train.hyper.alpha_b = 0.5;
  f.train.hyper.margin = 1.0;
  return f;
}

std::string history_text(const std::vector<EvalRecord>& h) {
  Json j = Json::array();
  for (const auto& r : h) j.push_back(r);
  return j.dump();
}

bool same_values(const std::vector<ng::Tensor>& a, const std::vector<ng::Tensor>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!std::equal(a[i].values().begin(), a[i].values().end(), b[i].values().begin())) return false;
  }
  return true;
}

std::vector<ng::Tensor> snapshot(const std::vector<ng::Tensor>& ts) {
  std::vector<ng::Tensor> out;
  for (const auto& t : ts) out.push_back(t.clone());
  return out;
}

}  // namespace

TEST_CASE("train config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.lr_model = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.eval_interval = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_THROWS_AS(parse_variant("nope"), ConfigError);
  for (Variant v : kAllVariants) CHECK(parse_variant(variant_name(v)) == v);
}

TEST_CASE("variant wiring") {
  TrainConfig cfg;
  cfg.variant = Variant::CrossDistil;
  ActiveGraph g = apply_variant(cfg);
  CHECK(g.teacher == TeacherKind::Ranking);
  CHECK(g.kd == KdSource::Teacher);
  CHECK((g.calibration && g.correction && g.calibration_step));

  cfg.variant = Variant::Taug;
  g = apply_variant(cfg);
  CHECK(g.teacher == TeacherKind::Ranking);
  CHECK(g.kd == KdSource::None);

  cfg.variant = Variant::Backbone;
  g = apply_variant(cfg);
  CHECK(g.teacher == TeacherKind::None);
  CHECK(g.kd == KdSource::None);
  CHECK_FALSE(g.calibration_step);

  cfg.variant = Variant::NoCalibration;
  g = apply_variant(cfg);
  CHECK_FALSE(g.calibration);
  CHECK_FALSE(g.calibration_step);
  CHECK(g.correction);

  cfg.variant = Variant::NoCorrection;
  g = apply_variant(cfg);
  CHECK(g.calibration);
  CHECK_FALSE(g.correction);

  cfg.variant = Variant::NoAuxiliaryRank;
  g = apply_variant(cfg);
  CHECK(g.hyper.beta1_a == 0.0);
  CHECK(g.hyper.beta2_b == 0.0);
  CHECK(cfg.hyper.beta1_a == 1.0);

  cfg.variant = Variant::KdSameTask;
  g = apply_variant(cfg);
  CHECK(g.teacher == TeacherKind::Regression);
  CHECK(g.kd == KdSource::Teacher);

  cfg.variant = Variant::KdCrossTaskDirect;
  g = apply_variant(cfg);
  CHECK(g.teacher == TeacherKind::None);
  CHECK(g.kd == KdSource::OtherStudent);
}

TEST_CASE("sgd step on a two-parameter model") {
  // loss = (w * x + b - t)^2 with x = 2, t = 1 at w = 0.5, b = 0.25:
  // residual 0.25, dL/dw = 2 * 0.25 * 2 = 1, dL/db = 2 * 0.25 = 0.5.
  ng::Tensor w = ng::Tensor::scalar(0.5, true);
  ng::Tensor b = ng::Tensor::scalar(0.25, true);
  const ng::Tensor x = ng::Tensor::scalar(2.0);
  const ng::Tensor t = ng::Tensor::scalar(1.0);
  const ng::Tensor res = ng::sub(ng::add(ng::mul(w, x), b), t);
  ng::backward(ng::mul(res, res));
  std::vector<ng::Tensor> params{w, b};
  Optimizer opt(OptimizerKind::Sgd, 0.1);
  opt.step(params);
  CHECK(w.item() == doctest::Approx(0.5 - 0.1 * 1.0).epsilon(1e-15));
  CHECK(b.item() == doctest::Approx(0.25 - 0.1 * 0.5).epsilon(1e-15));
}

TEST_CASE("adam first step moves by the learning rate") {
  ng::Tensor w(1, 2, {1.0, -1.0}, true);
  w.mutable_grad()[0] = 3.0;
  w.mutable_grad()[1] = -0.002;
  std::vector<ng::Tensor> params{w};
  Optimizer opt(OptimizerKind::Adam, 0.01);
  opt.step(params);
  CHECK(w.values()[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
  CHECK(w.values()[1] == doctest::Approx(-1.0 + 0.01).epsilon(1e-5));
  CHECK(opt.steps() == 1);
}

TEST_CASE("weight decay joins the gradient") {
  ng::Tensor w = ng::Tensor::scalar(2.0, true);
  w.mutable_grad()[0] = 0.5;
  std::vector<ng::Tensor> params{w};
  Optimizer opt(OptimizerKind::Sgd, 0.1, 0.25);
  opt.step(params);
  CHECK(w.item() == doctest::Approx(2.0 - 0.1 * (0.5 + 0.25 * 2.0)).epsilon(1e-15));
}

TEST_CASE("backbone leaves the teacher towers untouched") {
  Fixture f = make_fixture();
  f.train.variant = Variant::Backbone;
  TrainState st = init_state(f.model, f.split.train, f.train);
  const auto before_a_plus = snapshot(st.net.tower_parameters(Head::APlus));
  const auto before_b_plus = snapshot(st.net.tower_parameters(Head::BPlus));
  const auto before_a = snapshot(st.net.tower_parameters(Head::A));
  const LabelPartition part = partition(f.split.train);
  const StepMetrics m = train_step(st, f.split.train, part, f.train);
  CHECK(m.a_plus == 0.0);
  CHECK(m.a_kd == 0.0);
  CHECK(same_values(before_a_plus, st.net.tower_parameters(Head::APlus)));
  CHECK(same_values(before_b_plus, st.net.tower_parameters(Head::BPlus)));
  CHECK_FALSE(same_values(before_a, st.net.tower_parameters(Head::A)));
}

TEST_CASE("zero distillation weight reproduces taug updates") {
  Fixture f = make_fixture();
  f.train.hyper.alpha_a = f.train.hyper.alpha_b = 0.0;
  f.train.variant = Variant::CrossDistil;
  const TrainResult cd = train(f.split.train, f.split.test, f.model, f.train);
  f.train.variant = Variant::Taug;
  const TrainResult tg = train(f.split.train, f.split.test, f.model, f.train);
  CHECK(same_values(cd.state.net.parameters(), tg.state.net.parameters()));
}

TEST_CASE("no_calibration keeps calibration at init") {
  Fixture f = make_fixture();
  f.train.variant = Variant::NoCalibration;
  const TrainResult r = train(f.split.train, f.split.test, f.model, f.train);
  CHECK(same_values(r.state.calib.parameters(), CalibrationParams::init().parameters()));
  f.train.variant = Variant::CrossDistil;
  const TrainResult c = train(f.split.train, f.split.test, f.model, f.train);
  CHECK_FALSE(same_values(c.state.calib.parameters(), CalibrationParams::init().parameters()));
}

TEST_CASE("taug and backbone agree on the first student losses") {
  Fixture f = make_fixture();
  const LabelPartition part = partition(f.split.train);
  f.train.variant = Variant::Taug;
  TrainState a = init_state(f.model, f.split.train, f.train);
  const StepMetrics ma = train_step(a, f.split.train, part, f.train);
  f.train.variant = Variant::Backbone;
  TrainState b = init_state(f.model, f.split.train, f.train);
  const StepMetrics mb = train_step(b, f.split.train, part, f.train);
  CHECK(ma.a_ce == mb.a_ce);
  CHECK(ma.b_ce == mb.b_ce);
}

TEST_CASE("model and calibration steps touch disjoint parameters") {
  Fixture f = make_fixture(OptimizerKind::Adam);
  TrainState st = init_state(f.model, f.split.train, f.train);
  const LabelPartition part = partition(f.split.train);
  const auto calib_before = snapshot(st.calib.parameters());
  const ModelStepResult r = model_step(st, f.split.train, part, f.train);
  CHECK(same_values(calib_before, st.calib.parameters()));
  const auto net_before = snapshot(st.net.parameters());
  calibration_step(st, f.split.train, r.x);
  CHECK(same_values(net_before, st.net.parameters()));
  CHECK_FALSE(same_values(calib_before, st.calib.parameters()));
}

TEST_CASE("eval-only run returns the initial metrics without mutation") {
  Fixture f = make_fixture();
  const TrainState fresh = init_state(f.model, f.split.train, f.train);
  const TrainResult r = train(f.split.train, f.split.test, f.model, f.train, TrainHooks{0, {}});
  REQUIRE(r.history.size() == 1);
  CHECK(r.history[0].step == 0);
  CHECK(r.state.step == 0);
  CHECK(same_values(fresh.net.parameters(), r.state.net.parameters()));
  CHECK(history_text({evaluate(fresh, f.split.test)}) == history_text(r.history));
}

TEST_CASE("same seed and config give identical histories") {
  Fixture f = make_fixture(OptimizerKind::Adam);
  const TrainResult a = train(f.split.train, f.split.test, f.model, f.train);
  const TrainResult b = train(f.split.train, f.split.test, f.model, f.train);
  CHECK(a.history.size() == 4);
  CHECK(history_text(a.history) == history_text(b.history));
}

TEST_CASE("interrupted run resumes to the uninterrupted result") {
  for (auto opt : {OptimizerKind::Sgd, OptimizerKind::Adam}) {
    Fixture f = make_fixture(opt);
    const TrainResult full = train(f.split.train, f.split.test, f.model, f.train);
    const TrainResult part = train(f.split.train, f.split.test, f.model, f.train, TrainHooks{6, {}});
    CHECK(part.state.step == 6);
    const fs::path path = fs::temp_directory_path() / "crossdistil_resume.ckpt";
    save_checkpoint(part, f.train, path);
    TrainConfig loaded_cfg;
    TrainResult loaded = load_checkpoint(path, &loaded_cfg);
    fs::remove(path);
    CHECK(Json(loaded_cfg).dump() == Json(f.train).dump());
    const TrainResult resumed = resume(std::move(loaded), f.split.train, f.split.test, f.train);
    CHECK(history_text(resumed.history) == history_text(full.history));
    CHECK(same_values(resumed.state.net.parameters(), full.state.net.parameters()));
    CHECK(same_values(resumed.state.calib.parameters(), full.state.calib.parameters()));
  }
}

TEST_CASE("checkpoint rejects a corrupt file") {
  const fs::path path = fs::temp_directory_path() / "crossdistil_bad.ckpt";
  {
    std::ofstream out(path, std::ios::binary);
    out << "not a checkpoint";
  }
  CHECK_THROWS_AS(load_checkpoint(path), ParseError);
  fs::remove(path);
}

TEST_CASE("model file round trip") {
  Fixture f = make_fixture();
  const TrainState st = init_state(f.model, f.split.train, f.train);
  const fs::path path = fs::temp_directory_path() / "crossdistil_model.bin";
  save_model(st.net, path);
  const MultiTaskNet back = load_model(path);
  fs::remove(path);
  CHECK(same_values(st.net.parameters(), back.parameters()));
  CHECK(back.vocab_sizes() == st.net.vocab_sizes());
}

TEST_CASE("missing label combinations raise DegenerateLabels") {
  Fixture f = make_fixture();
  Dataset no_pp(f.split.train.field_names(), f.split.train.vocab_sizes());
  for (const auto& s : f.split.train.samples()) {
    if (!(s.y_a == 1 && s.y_b == 1)) no_pp.add(s);
  }
  f.train.variant = Variant::CrossDistil;
  CHECK_THROWS_AS(train(no_pp, f.split.test, f.model, f.train), DegenerateLabels);
  f.train.variant = Variant::NoAuxiliaryRank;
  CHECK_NOTHROW(train(no_pp, f.split.test, f.model, f.train));
  f.train.variant = Variant::Backbone;
  CHECK_NOTHROW(train(no_pp, f.split.test, f.model, f.train));
}

TEST_CASE("evaluate does not mutate the state") {
  Fixture f = make_fixture();
  const TrainResult r = train(f.split.train, f.split.test, f.model, f.train);
  const auto before = snapshot(r.state.net.parameters());
  const EvalRecord a = evaluate(r.state, f.split.test);
  const EvalRecord b = evaluate(r.state, f.split.test);
  CHECK(history_text({a}) == history_text({b}));
  CHECK(same_values(before, r.state.net.parameters()));
  CHECK(a.test_student_loss == doctest::Approx(0.5 * (a.test_ce_a + a.test_ce_b)));
}

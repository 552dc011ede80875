#include "crossdistil/training.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "crossdistil/config.hpp"
#include "crossdistil/errors.hpp"
#include "crossdistil/metrics.hpp"

namespace crossdistil {

namespace ng = numgrad;

// ---- variants ----

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::CrossDistil: return "crossdistil";
    case Variant::Taug: return "taug";
    case Variant::Backbone: return "backbone";
    case Variant::NoCalibration: return "no_calibration";
    case Variant::NoCorrection: return "no_correction";
    case Variant::NoAuxiliaryRank: return "no_auxiliary_rank";
    case Variant::KdSameTask: return "kd_same_task";
    case Variant::KdCrossTaskDirect: return "kd_cross_task_direct";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  for (Variant v : kAllVariants) {
    if (s == variant_name(v)) return v;
  }
  throw ConfigError("unknown variant '" + s + "'");
}

void TrainConfig::validate() const {
  if (!(lr_model > 0.0) || !(lr_calib > 0.0)) throw ConfigError("train: learning rates must be > 0");
  if (steps < 1) throw ConfigError("train: steps must be >= 1");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (eval_interval < 1) throw ConfigError("train: eval_interval must be >= 1");
  hyper.validate();
}

ActiveGraph apply_variant(const TrainConfig& cfg) {
  ActiveGraph g;
  g.hyper = cfg.hyper;
  switch (cfg.variant) {
    case Variant::CrossDistil:
      break;
    case Variant::Taug:
      g.kd = KdSource::None;
      break;
    case Variant::Backbone:
      g.teacher = TeacherKind::None;
      g.kd = KdSource::None;
      g.calibration_step = false;
      break;
    case Variant::NoCalibration:
      g.calibration = false;
      g.calibration_step = false;
      break;
    case Variant::NoCorrection:
      g.correction = false;
      break;
    case Variant::NoAuxiliaryRank:
      g.hyper.beta1_a = g.hyper.beta2_a = g.hyper.beta1_b = g.hyper.beta2_b = 0.0;
      break;
    case Variant::KdSameTask:
      // Regression teachers on the students' own labels, plain distillation.
      g.teacher = TeacherKind::Regression;
      g.calibration = false;
      g.correction = false;
      g.calibration_step = false;
      break;
    case Variant::KdCrossTaskDirect:
      g.teacher = TeacherKind::None;
      g.kd = KdSource::OtherStudent;
      g.calibration = false;
      g.correction = false;
      g.calibration_step = false;
      break;
  }
  return g;
}

// ---- optimizer ----

Optimizer::Optimizer(OptimizerKind kind, double lr, double weight_decay)
    : kind_(kind), lr_(lr), weight_decay_(weight_decay) {}

void Optimizer::step(std::span<Tensor> params) {
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  if (kind_ == OptimizerKind::Adam && m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.size(), 0.0);
      v_.emplace_back(p.size(), 0.0);
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto w = params[k].mutable_values();
    const auto g = params[k].grad();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double grad = g[i] + weight_decay_ * w[i];
      if (kind_ == OptimizerKind::Sgd) {
        w[i] -= lr_ * grad;
      } else {
        double& m = m_[k][i];
        double& v = v_[k][i];
        m = kBeta1 * m + (1.0 - kBeta1) * grad;
        v = kBeta2 * v + (1.0 - kBeta2) * grad * grad;
        w[i] -= lr_ * (m / c1) / (std::sqrt(v / c2) + kEps);
      }
    }
  }
}

void Optimizer::restore(std::uint64_t t, std::vector<std::vector<double>> m,
                        std::vector<std::vector<double>> v) {
  t_ = t;
  m_ = std::move(m);
  v_ = std::move(v);
}

// ---- metrics accumulation ----

StepMetrics& StepMetrics::operator+=(const StepMetrics& o) {
  a_plus += o.a_plus;
  b_plus += o.b_plus;
  a_ce += o.a_ce;
  b_ce += o.b_ce;
  a_kd += o.a_kd;
  b_kd += o.b_kd;
  a_stu += o.a_stu;
  b_stu += o.b_stu;
  model += o.model;
  cal += o.cal;
  return *this;
}

StepMetrics StepMetrics::scaled(double c) const {
  return {a_plus * c, b_plus * c, a_ce * c, b_ce * c, a_kd * c,
          b_kd * c,   a_stu * c,  b_stu * c, model * c, cal * c};
}

// ---- state ----

TrainState init_state(const ModelConfig& model_cfg, const Dataset& schema, const TrainConfig& cfg) {
  cfg.validate();
  TrainState st;
  st.net = MultiTaskNet(model_cfg, schema.vocab_sizes(), schema.field_names());
  st.calib = CalibrationParams::init();
  st.model_opt = Optimizer(cfg.optimizer, cfg.lr_model, cfg.hyper.weight_decay);
  st.calib_opt = Optimizer(cfg.optimizer, cfg.lr_calib);
  st.rng = Rng(cfg.seed);
  return st;
}

namespace {

std::string describe(const StepMetrics& m) {
  std::ostringstream os;
  os << "L_a+=" << m.a_plus << " L_b+=" << m.b_plus << " L_a_stu=" << m.a_stu
     << " L_b_stu=" << m.b_stu << " L_model=" << m.model << " L_cal=" << m.cal;
  return os.str();
}

Tensor labels_of(const Dataset& ds, std::span<const std::size_t> idx, Task t) {
  std::vector<double> v;
  v.reserve(idx.size());
  for (std::size_t i : idx) v.push_back(ds[i].label(t));
  return Tensor::column(std::move(v));
}

const char* first_empty_quadrant(const LabelPartition& p) {
  if (p.pp.empty()) return "++";
  if (p.pm.empty()) return "+-";
  if (p.mp.empty()) return "-+";
  return "--";
}

}  // namespace

ModelStepResult model_step(TrainState& st, const Dataset& train, const LabelPartition& part,
                           const TrainConfig& cfg) {
  const ActiveGraph g = apply_variant(cfg);
  const HyperParams& hp = g.hyper;
  const std::size_t batch = cfg.batch_size;
  StepMetrics out;

  // Draw every group the partition allows, whatever the variant, so that
  // variants sharing a seed see identical batches.
  const auto x = sample_uniform(train.size(), batch, st.rng);
  std::optional<QuadrupletBatch> quad;
  if (part.has_all_quadrants()) quad = sample_quadruplets(part, batch, st.rng);
  std::optional<PairBatch> pairs[2];
  for (Task t : {Task::A, Task::B}) {
    if (!part.positives(t).empty() && !part.negatives(t).empty()) {
      pairs[static_cast<int>(t)] = sample_pairs(part, t, batch, st.rng);
    }
  }

  const bool ranking = g.teacher == TeacherKind::Ranking;
  const bool need_quads =
      ranking && (hp.beta1_a > 0 || hp.beta2_a > 0 || hp.beta1_b > 0 || hp.beta2_b > 0);
  if (need_quads && !quad) throw DegenerateLabels(first_empty_quadrant(part));
  if (ranking) {
    if (!pairs[0]) throw DegenerateLabels(part.pos_a.empty() ? "+." : "-.");
    if (!pairs[1]) throw DegenerateLabels(part.pos_b.empty() ? ".+" : ".-");
  }

  try {
    // One forward over every row this step needs.
    std::vector<std::size_t> rows(x.begin(), x.end());
    const auto append = [&](const std::vector<std::size_t>& v) {
      const std::size_t off = rows.size();
      rows.insert(rows.end(), v.begin(), v.end());
      return off;
    };
    std::size_t off_pos[2] = {0, 0}, off_neg[2] = {0, 0};
    std::size_t off_pp = 0, off_pm = 0, off_mp = 0, off_mm = 0;
    if (ranking) {
      for (int t = 0; t < 2; ++t) {
        off_pos[t] = append(pairs[t]->pos);
        off_neg[t] = append(pairs[t]->neg);
      }
      if (need_quads) {
        off_pp = append(quad->pp);
        off_pm = append(quad->pm);
        off_mp = append(quad->mp);
        off_mm = append(quad->mm);
      }
    }
    const HeadLogits all = st.net.forward(IdBatch::from(train, rows));
    const HeadLogits hx = all.slice(0, batch);
    const Tensor y[2] = {labels_of(train, x, Task::A), labels_of(train, x, Task::B)};

    std::vector<std::pair<double, Tensor>> terms;

    // Teacher objectives.
    Tensor teacher_loss[2];
    if (ranking) {
      for (Task t : {Task::A, Task::B}) {
        const int ti = static_cast<int>(t);
        const Tensor& r = t == Task::A ? all.r_a_plus : all.r_b_plus;
        const auto rows_at = [&](std::size_t off) {
          return need_quads ? ng::slice_rows(r, off, batch) : Tensor();
        };
        teacher_loss[ti] = quadruplet_loss(
            t, rows_at(off_pp), rows_at(off_pm), rows_at(off_mp), rows_at(off_mm),
            ng::slice_rows(r, off_pos[ti], batch), ng::slice_rows(r, off_neg[ti], batch),
            hp.beta1(t), hp.beta2(t));
      }
    } else if (g.teacher == TeacherKind::Regression) {
      teacher_loss[0] = ce_from_logits(y[0], hx.r_a_plus);
      teacher_loss[1] = ce_from_logits(y[1], hx.r_b_plus);
    }
    if (g.teacher != TeacherKind::None) {
      out.a_plus = teacher_loss[0].item();
      out.b_plus = teacher_loss[1].item();
      terms.emplace_back(hp.w_a_plus, teacher_loss[0]);
      terms.emplace_back(hp.w_b_plus, teacher_loss[1]);
    }

    // Student objectives.
    for (Task t : {Task::A, Task::B}) {
      const int ti = static_cast<int>(t);
      const Tensor& r_student = t == Task::A ? hx.r_a : hx.r_b;
      Tensor ce = ce_from_logits(y[ti], r_student);
      Tensor loss = ce;
      double kd_value = 0.0;
      if (g.kd != KdSource::None) {
        Tensor teacher;
        {
          ng::NoGradGuard no_grad;
          if (g.kd == KdSource::Teacher) {
            teacher = ng::detach(t == Task::A ? hx.r_a_plus : hx.r_b_plus);
          } else {
            teacher = ng::detach(t == Task::A ? hx.r_b : hx.r_a);
          }
          if (g.calibration) teacher = calibrate(teacher, st.calib, t).logit();
          if (g.correction) teacher = error_correct(teacher, y[ti], hp.margin);
        }
        const Tensor kd = kd_loss(teacher, r_student, hp.tau);
        kd_value = kd.item();
        loss = student_loss(y[ti], r_student, kd, hp.alpha(t));
      }
      (t == Task::A ? out.a_ce : out.b_ce) = ce.item();
      (t == Task::A ? out.a_kd : out.b_kd) = kd_value;
      (t == Task::A ? out.a_stu : out.b_stu) = loss.item();
      terms.emplace_back(t == Task::A ? hp.w_a : hp.w_b, loss);
    }

    Tensor model_loss;
    for (std::size_t i = 0; i < terms.size(); ++i) {
      const Tensor term = ng::scalar_scale(terms[i].second, terms[i].first);
      model_loss = i == 0 ? term : ng::add(model_loss, term);
    }
    out.model = model_loss.item();

    // Model step. Calibration parameters are not on this tape.
    st.net.zero_grad();
    if (model_loss.requires_grad()) {
      ng::backward(model_loss);
      auto params = st.net.parameters();
      st.model_opt.step(params);
    }

  } catch (const NumericError& e) {
    throw NumericError("step " + std::to_string(st.step + 1) + ": " + e.what() + " [" +
                       describe(out) + "]");
  }
  return {out, x};
}

double calibration_step(TrainState& st, const Dataset& train, std::span<const std::size_t> x) {
  HeadLogits fresh;
  {
    ng::NoGradGuard no_grad;
    fresh = st.net.forward(IdBatch::from(train, x));
  }
  st.calib.zero_grad();
  const Tensor cal = calibration_loss(labels_of(train, x, Task::A), labels_of(train, x, Task::B),
                                      fresh.r_a_plus, fresh.r_b_plus, st.calib);
  ng::backward(cal);
  auto params = st.calib.parameters();
  st.calib_opt.step(params);
  return cal.item();
}

StepMetrics train_step(TrainState& st, const Dataset& train, const LabelPartition& part,
                       const TrainConfig& cfg) {
  ModelStepResult r = model_step(st, train, part, cfg);
  if (apply_variant(cfg).calibration_step) {
    try {
      r.metrics.cal = calibration_step(st, train, r.x);
    } catch (const NumericError& e) {
      throw NumericError("step " + std::to_string(st.step + 1) + ": " + e.what() + " [" +
                         describe(r.metrics) + "]");
    }
  }
  ++st.step;
  st.running += r.metrics;
  ++st.running_count;
  return r.metrics;
}

// ---- evaluation ----

EvalRecord evaluate(const TrainState& st, const Dataset& test) {
  ng::NoGradGuard no_grad;
  constexpr std::size_t kChunk = 2048;
  std::vector<double> logits[4];
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < test.size(); start += kChunk) {
    const std::size_t n = std::min(kChunk, test.size() - start);
    idx.resize(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = start + i;
    const HeadLogits h = st.net.forward(IdBatch::from(test, idx));
    for (Head head : kAllHeads) {
      const auto v = h[head].values();
      logits[static_cast<int>(head)].insert(logits[static_cast<int>(head)].end(), v.begin(), v.end());
    }
  }

  const std::vector<int> y[2] = {test.labels(Task::A), test.labels(Task::B)};
  const std::vector<int> cls[2] = {classes_of(test, Task::A), classes_of(test, Task::B)};
  const auto head_eval = [&](Head h) {
    const int t = static_cast<int>(head_task(h));
    const auto& s = logits[static_cast<int>(h)];
    return HeadEval{auc(s, y[t]), multi_auc(s, cls[t], 4)};
  };
  const auto probs = [](const std::vector<double>& r, double slope, double offset) {
    std::vector<double> p(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) p[i] = ng::stable_sigmoid(-(slope * r[i] + offset));
    return p;
  };

  EvalRecord rec;
  rec.step = st.step;
  if (st.running_count > 0) rec.train = st.running.scaled(1.0 / static_cast<double>(st.running_count));
  rec.student_a = head_eval(Head::A);
  rec.student_b = head_eval(Head::B);
  rec.teacher_a = head_eval(Head::APlus);
  rec.teacher_b = head_eval(Head::BPlus);
  rec.test_ce_a = logloss(y[0], probs(logits[0], -1.0, 0.0));
  rec.test_ce_b = logloss(y[1], probs(logits[1], -1.0, 0.0));
  rec.test_student_loss = 0.5 * (rec.test_ce_a + rec.test_ce_b);
  rec.teacher_logloss_raw_a = logloss(y[0], probs(logits[2], -1.0, 0.0));
  rec.teacher_logloss_raw_b = logloss(y[1], probs(logits[3], -1.0, 0.0));
  rec.calib_p_a = st.calib.slope(Task::A);
  rec.calib_q_a = st.calib.q_a.item();
  rec.calib_p_b = st.calib.slope(Task::B);
  rec.calib_q_b = st.calib.q_b.item();
  rec.teacher_logloss_cal_a = logloss(y[0], probs(logits[2], rec.calib_p_a, rec.calib_q_a));
  rec.teacher_logloss_cal_b = logloss(y[1], probs(logits[3], rec.calib_p_b, rec.calib_q_b));
  return rec;
}

// ---- loop ----

TrainResult train(const Dataset& train_set, const Dataset& test_set, const ModelConfig& model_cfg,
                  const TrainConfig& cfg, const TrainHooks& hooks) {
  if (train_set.empty()) throw ConfigError("train: training set is empty");
  TrainResult run{init_state(model_cfg, train_set, cfg), {}};
  run.history.push_back(evaluate(run.state, test_set));
  if (hooks.on_eval) hooks.on_eval(run.history.back());
  return resume(std::move(run), train_set, test_set, cfg, hooks);
}

TrainResult resume(TrainResult run, const Dataset& train_set, const Dataset& test_set,
                   const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  if (train_set.empty()) throw ConfigError("train: training set is empty");
  const LabelPartition part = partition(train_set);
  auto& st = run.state;
  while (st.step < cfg.steps) {
    if (hooks.halt_at && st.step >= *hooks.halt_at) break;
    train_step(st, train_set, part, cfg);
    if (st.step % cfg.eval_interval == 0 || st.step == cfg.steps) {
      run.history.push_back(evaluate(st, test_set));
      st.running = {};
      st.running_count = 0;
      if (hooks.on_eval) hooks.on_eval(run.history.back());
    }
  }
  return run;
}

// ---- checkpoints ----

namespace {

constexpr char kMagic[8] = {'C', 'D', 'I', 'S', 'T', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

struct NamedArray {
  std::string name;
  std::uint64_t rows = 0, cols = 0;
  std::vector<double> values;
};

struct Archive {
  Json meta;
  std::vector<NamedArray> arrays;

  const NamedArray& get(const std::string& name) const {
    for (const auto& a : arrays) {
      if (a.name == name) return a;
    }
    throw ParseError("checkpoint: missing array '" + name + "'");
  }
};

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw ParseError("checkpoint: truncated file");
  return v;
}

void write_archive(const Archive& a, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write checkpoint '" + path.string() + "'");
  os.write(kMagic, sizeof kMagic);
  put(os, kVersion);
  const std::string meta = a.meta.dump();
  put<std::uint64_t>(os, meta.size());
  os.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  put<std::uint64_t>(os, a.arrays.size());
  for (const auto& arr : a.arrays) {
    put<std::uint64_t>(os, arr.name.size());
    os.write(arr.name.data(), static_cast<std::streamsize>(arr.name.size()));
    put(os, arr.rows);
    put(os, arr.cols);
    os.write(reinterpret_cast<const char*>(arr.values.data()),
             static_cast<std::streamsize>(arr.values.size() * sizeof(double)));
  }
  if (!os) throw ConfigError("failed writing checkpoint '" + path.string() + "'");
}

Archive read_archive(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("cannot open checkpoint '" + path.string() + "'");
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw ParseError("'" + path.string() + "' is not a checkpoint");
  }
  if (const auto v = take<std::uint32_t>(is); v != kVersion) {
    throw ParseError("checkpoint: unsupported version " + std::to_string(v));
  }
  Archive a;
  std::string meta(take<std::uint64_t>(is), '\0');
  is.read(meta.data(), static_cast<std::streamsize>(meta.size()));
  a.meta = Json::parse(meta);
  const auto n = take<std::uint64_t>(is);
  for (std::uint64_t k = 0; k < n; ++k) {
    NamedArray arr;
    arr.name.resize(take<std::uint64_t>(is));
    is.read(arr.name.data(), static_cast<std::streamsize>(arr.name.size()));
    arr.rows = take<std::uint64_t>(is);
    arr.cols = take<std::uint64_t>(is);
    arr.values.resize(arr.rows * arr.cols);
    is.read(reinterpret_cast<char*>(arr.values.data()),
            static_cast<std::streamsize>(arr.values.size() * sizeof(double)));
    if (!is) throw ParseError("checkpoint: truncated array '" + arr.name + "'");
    a.arrays.push_back(std::move(arr));
  }
  return a;
}

NamedArray to_array(std::string name, const Tensor& t) {
  return {std::move(name), t.rows(), t.cols(), {t.values().begin(), t.values().end()}};
}

void add_model(Archive& a, const MultiTaskNet& net) {
  a.meta["model"] = net.config();
  a.meta["vocab"] = net.vocab_sizes();
  a.meta["fields"] = net.field_names();
  for (const auto& [name, t] : net.named_parameters()) a.arrays.push_back(to_array("theta." + name, t));
}

void assign(Tensor t, const NamedArray& arr) {
  if (arr.rows != t.rows() || arr.cols != t.cols()) {
    throw ParseError("checkpoint: array '" + arr.name + "' has the wrong shape");
  }
  std::copy(arr.values.begin(), arr.values.end(), t.mutable_values().begin());
}

MultiTaskNet read_model(const Archive& a) {
  MultiTaskNet net(a.meta.at("model").get<ModelConfig>(),
                   a.meta.at("vocab").get<std::vector<std::size_t>>(),
                   a.meta.at("fields").get<std::vector<std::string>>());
  for (const auto& [name, t] : net.named_parameters()) assign(t, a.get("theta." + name));
  return net;
}

void add_optimizer(Archive& a, const std::string& key, const Optimizer& opt) {
  a.meta[key] = {{"steps", opt.steps()}, {"moments", opt.first_moments().size()}};
  for (std::size_t k = 0; k < opt.first_moments().size(); ++k) {
    const auto& m = opt.first_moments()[k];
    const auto& v = opt.second_moments()[k];
    a.arrays.push_back({key + ".m." + std::to_string(k), m.size(), 1, m});
    a.arrays.push_back({key + ".v." + std::to_string(k), v.size(), 1, v});
  }
}

void read_optimizer(const Archive& a, const std::string& key, Optimizer& opt) {
  const auto& j = a.meta.at(key);
  std::vector<std::vector<double>> m, v;
  for (std::size_t k = 0; k < j.at("moments").get<std::size_t>(); ++k) {
    m.push_back(a.get(key + ".m." + std::to_string(k)).values);
    v.push_back(a.get(key + ".v." + std::to_string(k)).values);
  }
  opt.restore(j.at("steps").get<std::uint64_t>(), std::move(m), std::move(v));
}

}  // namespace

void save_model(const MultiTaskNet& net, const std::filesystem::path& path) {
  Archive a;
  a.meta["kind"] = "model";
  add_model(a, net);
  write_archive(a, path);
}

MultiTaskNet load_model(const std::filesystem::path& path) { return read_model(read_archive(path)); }

void save_checkpoint(const TrainResult& run, const TrainConfig& cfg,
                     const std::filesystem::path& path) {
  const TrainState& st = run.state;
  Archive a;
  a.meta["kind"] = "train";
  add_model(a, st.net);
  a.meta["train"] = cfg;
  a.meta["step"] = st.step;
  a.meta["rng"] = st.rng.state();
  a.meta["running"] = st.running;
  a.meta["running_count"] = st.running_count;
  a.meta["history"] = run.history;
  const auto omega = st.calib.parameters();
  const char* names[] = {"rho_a", "q_a", "rho_b", "q_b"};
  for (std::size_t k = 0; k < omega.size(); ++k) a.arrays.push_back(to_array(std::string("omega.") + names[k], omega[k]));
  add_optimizer(a, "opt_model", st.model_opt);
  add_optimizer(a, "opt_calib", st.calib_opt);
  write_archive(a, path);
}

TrainResult load_checkpoint(const std::filesystem::path& path, TrainConfig* cfg_out) {
  const Archive a = read_archive(path);
  if (a.meta.value("kind", "") != "train") throw ParseError("checkpoint: not a training checkpoint");
  const auto cfg = a.meta.at("train").get<TrainConfig>();
  if (cfg_out) *cfg_out = cfg;
  TrainResult run;
  auto& st = run.state;
  st.net = read_model(a);
  st.calib = CalibrationParams::init();
  const auto omega = st.calib.parameters();
  const char* names[] = {"rho_a", "q_a", "rho_b", "q_b"};
  for (std::size_t k = 0; k < omega.size(); ++k) assign(omega[k], a.get(std::string("omega.") + names[k]));
  st.model_opt = Optimizer(cfg.optimizer, cfg.lr_model, cfg.hyper.weight_decay);
  st.calib_opt = Optimizer(cfg.optimizer, cfg.lr_calib);
  read_optimizer(a, "opt_model", st.model_opt);
  read_optimizer(a, "opt_calib", st.calib_opt);
  st.step = a.meta.at("step").get<std::size_t>();
  st.rng.set_state(a.meta.at("rng").get<std::string>());
  st.running = a.meta.at("running").get<StepMetrics>();
  st.running_count = a.meta.at("running_count").get<std::size_t>();
  run.history = a.meta.at("history").get<std::vector<EvalRecord>>();
  return run;
}

}  // namespace crossdistil

#include "crossdistil/losses.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "crossdistil/errors.hpp"

namespace crossdistil {

namespace ng = numgrad;

void HyperParams::validate() const {
  if (!(tau > 0.0)) throw ConfigError("hyper: tau must be > 0");
  for (double a : {alpha_a, alpha_b}) {
    if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("hyper: alpha must lie in [0, 1]");
  }
  for (double b : {beta1_a, beta2_a, beta1_b, beta2_b}) {
    if (!(b >= 0.0)) throw ConfigError("hyper: beta coefficients must be >= 0");
  }
  for (double w : {w_a_plus, w_b_plus, w_a, w_b}) {
    if (!(w >= 0.0)) throw ConfigError("hyper: task weights must be >= 0");
  }
  if (!(weight_decay >= 0.0)) throw ConfigError("hyper: weight_decay must be >= 0");
  if (!std::isfinite(margin)) throw ConfigError("hyper: margin must be finite");
}

CalibrationParams CalibrationParams::init() {
  return {Tensor::scalar(0.0, true), Tensor::scalar(0.0, true), Tensor::scalar(0.0, true),
          Tensor::scalar(0.0, true)};
}

double CalibrationParams::slope(Task t) const { return -std::exp(rho(t).item()); }

void CalibrationParams::zero_grad() {
  for (auto& t : parameters()) t.zero_grad();
}

CalibrationParams CalibrationParams::clone() const {
  return {rho_a.clone(), q_a.clone(), rho_b.clone(), q_b.clone()};
}

Tensor label_tensor(std::span<const int> y) {
  std::vector<double> v(y.begin(), y.end());
  return Tensor::column(std::move(v));
}

Tensor ce_from_logits(const Tensor& y, const Tensor& r) {
  if (y.rows() != r.rows() || y.cols() != r.cols()) {
    throw ConfigError("ce_from_logits: label shape " + y.shape_str() + " vs logits " +
                      r.shape_str());
  }
  return ng::reduce_mean(ng::sub(ng::softplus(r), ng::mul(y, r)));
}

namespace {

// mean(-ln s(hi - lo)) = mean(softplus(lo - hi))
Tensor pair_term(const Tensor& hi, const Tensor& lo) {
  return ng::reduce_mean(ng::softplus(ng::sub(lo, hi)));
}

}  // namespace

Tensor quadruplet_loss(Task task, const Tensor& r_pp, const Tensor& r_pm, const Tensor& r_mp,
                       const Tensor& r_mm, const Tensor& r_pos, const Tensor& r_neg, double beta1,
                       double beta2) {
  Tensor loss = pair_term(r_pos, r_neg);
  // Task A order: ++ > +- > -+ > --. Task B swaps the middle two.
  const Tensor& first_lo = task == Task::A ? r_pm : r_mp;
  const Tensor& second_hi = task == Task::A ? r_mp : r_pm;
  if (beta1 != 0.0) loss = ng::add(loss, ng::scalar_scale(pair_term(r_pp, first_lo), beta1));
  if (beta2 != 0.0) loss = ng::add(loss, ng::scalar_scale(pair_term(second_hi, r_mm), beta2));
  return loss;
}

Calibrated calibrate(const Tensor& r_hat, const CalibrationParams& cp, Task task) {
  const Tensor slope = ng::neg(ng::exp(cp.rho(task)));
  // (rows x 1) * (1 x 1) then row-broadcast add of Q.
  const Tensor r_tilde = ng::add(ng::matmul(r_hat, slope), cp.q(task));
  const Tensor y_tilde = ng::sigmoid(ng::neg(r_tilde));
  return {r_tilde, y_tilde};
}

Tensor calibration_loss(const Tensor& y_a, const Tensor& y_b, const Tensor& r_a_plus,
                        const Tensor& r_b_plus, const CalibrationParams& cp) {
  const Tensor la = calibrate(ng::detach(r_a_plus), cp, Task::A).logit();
  const Tensor lb = calibrate(ng::detach(r_b_plus), cp, Task::B).logit();
  return ng::add(ce_from_logits(y_a, la), ce_from_logits(y_b, lb));
}

Tensor error_correct(const Tensor& r, const Tensor& y, double margin) {
  if (y.rows() != r.rows() || y.cols() != r.cols()) {
    throw ConfigError("error_correct: label shape " + y.shape_str() + " vs logits " +
                      r.shape_str());
  }
  std::vector<double> out(r.size());
  const auto rv = r.values();
  const auto yv = y.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    // sign * max(sign * r, m) with sign = +1 for positives, -1 for negatives
    const double sign = yv[i] == 1.0 ? 1.0 : -1.0;
    out[i] = sign * std::max(sign * rv[i], margin);
  }
  return Tensor(r.rows(), r.cols(), std::move(out));
}

Tensor kd_loss(const Tensor& teacher_logits, const Tensor& student_logits, double tau) {
  if (!(tau > 0.0)) throw ConfigError("kd_loss: temperature must be > 0");
  if (teacher_logits.requires_grad()) {
    throw UsageError("kd_loss: teacher logits must be detached");
  }
  std::vector<double> soft(teacher_logits.size());
  const auto tv = teacher_logits.values();
  for (std::size_t i = 0; i < soft.size(); ++i) soft[i] = ng::stable_sigmoid(tv[i] / tau);
  const Tensor target(teacher_logits.rows(), teacher_logits.cols(), std::move(soft));
  return ce_from_logits(target, ng::scalar_scale(student_logits, 1.0 / tau));
}

Tensor student_loss(const Tensor& y, const Tensor& r_student, const Tensor& kd, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("student_loss: alpha must lie in [0, 1]");
  return ng::add(ng::scalar_scale(ce_from_logits(y, r_student), 1.0 - alpha),
                 ng::scalar_scale(kd, alpha));
}

}  // namespace crossdistil

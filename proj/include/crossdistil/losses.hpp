#pragma once

#include <span>
#include <vector>

#include "crossdistil/data.hpp"
#include "crossdistil/numgrad.hpp"

namespace crossdistil {

using numgrad::Tensor;

/// Loss hyper-parameters. Ranges are enforced by validate().
struct HyperParams {
  double tau = 1.0;                        // distillation temperature, > 0
  double alpha_a = 0.5, alpha_b = 0.5;     // KD share of the student loss, in [0, 1]
  double beta1_a = 1.0, beta2_a = 1.0;     // within-label ranking terms, >= 0
  double beta1_b = 1.0, beta2_b = 1.0;
  double margin = 0.0;                     // error-correction margin m
  double w_a_plus = 1.0, w_b_plus = 1.0;   // weights of the model objective terms
  double w_a = 1.0, w_b = 1.0;
  double weight_decay = 0.0;               // L2 coefficient applied by the optimizer

  double alpha(Task t) const { return t == Task::A ? alpha_a : alpha_b; }
  double beta1(Task t) const { return t == Task::A ? beta1_a : beta1_b; }
  double beta2(Task t) const { return t == Task::A ? beta2_a : beta2_b; }

  void validate() const;
};

/// Platt parameters per teacher task. The slope is P = -exp(rho) < 0.
struct CalibrationParams {
  Tensor rho_a, q_a, rho_b, q_b;

  static CalibrationParams init();  // rho = 0, Q = 0
  std::vector<Tensor> parameters() const { return {rho_a, q_a, rho_b, q_b}; }
  const Tensor& rho(Task t) const { return t == Task::A ? rho_a : rho_b; }
  const Tensor& q(Task t) const { return t == Task::A ? q_a : q_b; }
  double slope(Task t) const;
  void zero_grad();
  CalibrationParams clone() const;
};

// Column of 0/1 labels as a constant tensor.
Tensor label_tensor(std::span<const int> y);

// mean of -[y ln s(r) + (1-y) ln(1 - s(r))], evaluated as softplus(r) - y r.
// Targets may be soft probabilities.
Tensor ce_from_logits(const Tensor& y, const Tensor& r);

// Mean over the batch of
//   A+: -b1 ln s(r_pp - r_pm) - b2 ln s(r_mp - r_mm) - ln s(r_pos - r_neg)
//   B+: -b1 ln s(r_pp - r_mp) - b2 ln s(r_pm - r_mm) - ln s(r_pos - r_neg)
// with (pos, neg) drawn from the task's label unions. Terms with a zero
// coefficient are skipped, so their inputs may be empty.
Tensor quadruplet_loss(Task task, const Tensor& r_pp, const Tensor& r_pm, const Tensor& r_mp,
                       const Tensor& r_mm, const Tensor& r_pos, const Tensor& r_neg, double beta1,
                       double beta2);

struct Calibrated {
  Tensor r_tilde;  // P * r_hat + Q
  Tensor y_tilde;  // 1 / (1 + exp(r_tilde)), increasing in r_hat since P < 0
  // Log-odds of y_tilde, i.e. -r_tilde. This is the teacher logit that
  // error correction and distillation act on.
  Tensor logit() const { return numgrad::neg(r_tilde); }
};

Calibrated calibrate(const Tensor& r_hat, const CalibrationParams& cp, Task task);

// CE(y_a, y~A+) + CE(y_b, y~B+). Teacher logits are detached here, so only
// the calibration parameters receive gradient.
Tensor calibration_loss(const Tensor& y_a, const Tensor& y_b, const Tensor& r_a_plus,
                        const Tensor& r_b_plus, const CalibrationParams& cp);

// y = 1 -> max(r, m); y = 0 -> min(r, -m). Result carries no tape edge.
Tensor error_correct(const Tensor& r, const Tensor& y, double margin);

// mean CE(s(r_T / tau), s(r_S / tau)). The teacher must not require grad.
Tensor kd_loss(const Tensor& teacher_logits, const Tensor& student_logits, double tau);

// (1 - alpha) CE(y, s(r_student)) + alpha * kd
Tensor student_loss(const Tensor& y, const Tensor& r_student, const Tensor& kd, double alpha);

}  // namespace crossdistil

#include "crossdistil/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "crossdistil/errors.hpp"

namespace crossdistil {

double auc(std::span<const double> scores, std::span<const int> labels, TieMode ties) {
  if (scores.size() != labels.size()) throw ConfigError("auc: scores/labels length mismatch");
  for (int y : labels) {
    if (y != 0 && y != 1) throw ConfigError("auc: labels must be 0 or 1");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return scores[i] < scores[j]; });

  // Sweep groups of equal score from lowest to highest.
  double credit = 0.0;
  double neg_below = 0.0;
  double n_pos = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    double pos_g = 0.0, neg_g = 0.0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? pos_g : neg_g) += 1.0;
      ++j;
    }
    credit += pos_g * neg_below;
    if (ties == TieMode::Half) credit += 0.5 * pos_g * neg_g;
    neg_below += neg_g;
    n_pos += pos_g;
    i = j;
  }
  if (n_pos == 0.0 || neg_below == 0.0) {
    throw UndefinedMetric("auc: needs at least one positive and one negative");
  }
  return credit / (n_pos * neg_below);
}

double multi_auc(std::span<const double> scores, std::span<const int> classes, int num_classes,
                 TieMode ties) {
  if (scores.size() != classes.size()) throw ConfigError("multi_auc: length mismatch");
  if (num_classes < 2) throw UndefinedMetric("multi_auc: needs at least two classes");
  std::vector<std::vector<double>> by_class(num_classes);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (classes[i] < 0 || classes[i] >= num_classes) {
      throw ConfigError("multi_auc: class id out of range");
    }
    by_class[classes[i]].push_back(scores[i]);
  }

  std::vector<double> weights, aucs;
  std::vector<double> s;
  std::vector<int> y;
  for (int j = 0; j < num_classes; ++j) {
    for (int k = j + 1; k < num_classes; ++k) {
      const auto& neg = by_class[j];
      const auto& pos = by_class[k];
      if (neg.empty() || pos.empty()) continue;
      s.assign(neg.begin(), neg.end());
      s.insert(s.end(), pos.begin(), pos.end());
      y.assign(neg.size(), 0);
      y.insert(y.end(), pos.size(), 1);
      weights.push_back(static_cast<double>(neg.size() + pos.size()));
      aucs.push_back(auc(s, y, ties));
    }
  }
  if (weights.empty()) throw UndefinedMetric("multi_auc: fewer than two nonempty classes");
  if (weights.size() == 1) return aucs.front();
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    num += weights[i] * aucs[i];
    den += weights[i];
  }
  return num / den;
}

double logloss(std::span<const int> y, std::span<const double> p) {
  if (y.size() != p.size()) throw ConfigError("logloss: length mismatch");
  if (y.empty()) throw UndefinedMetric("logloss: empty input");
  constexpr double kEps = 1e-12;
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double q = std::clamp(p[i], kEps, 1.0 - kEps);
    sum -= y[i] == 1 ? std::log(q) : std::log(1.0 - q);
  }
  return sum / static_cast<double>(y.size());
}

int class_of(int y_a, int y_b, Task task) {
  const int primary = task == Task::A ? y_a : y_b;
  const int secondary = task == Task::A ? y_b : y_a;
  return 2 * primary + secondary;
}

std::vector<int> classes_of(const Dataset& ds, Task task) {
  std::vector<int> out;
  out.reserve(ds.size());
  for (const auto& s : ds.samples()) out.push_back(class_of(s.y_a, s.y_b, task));
  return out;
}

}  // namespace crossdistil

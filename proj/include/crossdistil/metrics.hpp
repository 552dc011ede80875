#pragma once

#include <span>
#include <vector>

#include "crossdistil/data.hpp"

namespace crossdistil {

// Half: a tied positive/negative pair earns 0.5. Strict: only p_i > p_j counts.
enum class TieMode { Half, Strict };

// Fraction of positive/negative pairs ranked correctly. Throws
// UndefinedMetric unless both classes are present.
double auc(std::span<const double> scores, std::span<const int> labels,
           TieMode ties = TieMode::Half);

// Prevalence-weighted one-vs-one AUC over ordered classes 0..c-1 (higher
// class should score higher):
//   sum_{j<k} (n_j + n_k) AUC(k, j) / sum_{j<k} (n_j + n_k)
// over class pairs where both classes are nonempty. With all classes present
// this equals 2/(c(c-1)) * sum p(j u k) AUC(k, j) with p(j u k) normalised so
// the weights average to one; for c = 2 it is exactly AUC.
double multi_auc(std::span<const double> scores, std::span<const int> classes, int num_classes,
                 TieMode ties = TieMode::Half);

// Mean binary cross-entropy, probabilities clamped to [1e-12, 1 - 1e-12].
double logloss(std::span<const int> y, std::span<const double> p);

// Fine-grained class of a label pair. Task A: ++ 3, +- 2, -+ 1, -- 0.
// Task B swaps +- and -+.
int class_of(int y_a, int y_b, Task task);
std::vector<int> classes_of(const Dataset& ds, Task task);

}  // namespace crossdistil

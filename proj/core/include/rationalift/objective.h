#pragma once

#include <vector>

#include "rationalift/layers.h"

namespace rationalift {

enum class CoherenceScale {
  kSum,           // plain transition count per example
  kPerTransition  // divided by l - 1
};

struct ObjectiveConfig {
  double lambda1 = 1.0;  // sparsity weight
  double lambda2 = 1.0;  // coherence weight
  double alpha = 0.15;   // target selected fraction
  CoherenceScale coherence_scale = CoherenceScale::kSum;

  // Throws ConfigError for negative weights or alpha outside [0, 1].
  void validate() const;
};

struct LossTerm {
  double value = 0.0;
  Matrix grad;  // same shape as the input
};

// Mean over the batch of -log softmax(logits)[label]; logits are C x B.
LossTerm cross_entropy(const Matrix& logits, const std::vector<int>& labels);

// Per example:
//   lambda1 * |sum_i m_i / l - alpha| + lambda2 * sum_{t=2..l} |m_t - m_{t-1}|
// with l the unpadded length; averaged over the batch. `mask` is T x B and
// must be zero past each length. The gradient uses sign(0) = 0 at kinks.
// Throws ConfigError for a zero length.
LossTerm sparsity_coherence(const Matrix& mask, const std::vector<int>& lengths,
                            const ObjectiveConfig& cfg);

inline double total_loss(double ce, double omega) { return ce + omega; }

}  // namespace rationalift

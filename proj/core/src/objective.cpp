#include "rationalift/objective.h"

#include <cmath>

#include "rationalift/error.h"

namespace rationalift {

namespace {

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

void ObjectiveConfig::validate() const {
  if (lambda1 < 0.0 || lambda2 < 0.0) throw ConfigError("lambda1 and lambda2 must be non-negative");
  if (alpha < 0.0 || alpha > 1.0) throw ConfigError("alpha must lie in [0, 1]");
}

LossTerm cross_entropy(const Matrix& logits, const std::vector<int>& labels) {
  const auto B = logits.cols();
  if (static_cast<std::size_t>(B) != labels.size()) {
    throw ConfigError("cross_entropy: label count differs from batch size");
  }
  LossTerm out;
  out.grad = Matrix::Zero(logits.rows(), B);
  if (B == 0) return out;
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto col = logits.col(b);
    const double top = col.maxCoeff();
    const Vector shifted = (col.array() - top).exp().matrix();
    const double norm = shifted.sum();
    const auto y = static_cast<Eigen::Index>(labels[static_cast<std::size_t>(b)]);
    out.value += std::log(norm) - (col(y) - top);
    out.grad.col(b) = shifted / norm;
    out.grad(y, b) -= 1.0;
  }
  out.value /= static_cast<double>(B);
  out.grad /= static_cast<double>(B);
  return out;
}

LossTerm sparsity_coherence(const Matrix& mask, const std::vector<int>& lengths,
                            const ObjectiveConfig& cfg) {
  const auto B = mask.cols();
  if (static_cast<std::size_t>(B) != lengths.size()) {
    throw ConfigError("sparsity_coherence: length count differs from batch size");
  }
  LossTerm out;
  out.grad = Matrix::Zero(mask.rows(), B);
  if (B == 0) return out;
  const double inv_batch = 1.0 / static_cast<double>(B);
  for (Eigen::Index b = 0; b < B; ++b) {
    const int l = lengths[static_cast<std::size_t>(b)];
    if (l <= 0) throw ConfigError("sparsity_coherence: example with zero length");
    const auto m = mask.col(b).head(l);

    const double gap = m.sum() / l - cfg.alpha;
    out.value += cfg.lambda1 * std::abs(gap) * inv_batch;
    out.grad.col(b).head(l).array() += cfg.lambda1 * sign(gap) / l * inv_batch;

    const double scale =
        cfg.coherence_scale == CoherenceScale::kPerTransition && l > 1 ? 1.0 / (l - 1) : 1.0;
    for (int t = 1; t < l; ++t) {
      const double diff = m(t) - m(t - 1);
      out.value += cfg.lambda2 * scale * std::abs(diff) * inv_batch;
      const double g = cfg.lambda2 * scale * sign(diff) * inv_batch;
      out.grad(t, b) += g;
      out.grad(t - 1, b) -= g;
    }
  }
  return out;
}

}  // namespace rationalift

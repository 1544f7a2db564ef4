#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rationalift/data.h"
#include "rationalift/model.h"
#include "rationalift/synthetic.h"

namespace rationalift {

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

enum class Averaging { kMicro, kMacro };

// Token overlap between predicted and gold masks. Micro pools counts over all
// tokens; macro averages per-example scores. An empty prediction has
// precision 0, and F1 is 0 whenever P + R = 0. Throws DataError when a pair
// differs in length.
Prf token_prf(const std::vector<Mask>& predicted, const std::vector<Mask>& gold,
              Averaging averaging = Averaging::kMicro);

// Mean over examples of the selected fraction of each mask.
double sparsity(const std::vector<Mask>& masks);

// Fraction of columns whose argmax equals the label.
double accuracy(const Matrix& logits, const std::vector<int>& labels);
double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels);

struct RationaleMetrics {
  double sparsity = 0.0;
  double accuracy = 0.0;
  std::optional<Prf> overlap;  // present only when gold masks exist
};

struct Evaluation {
  RationaleMetrics metrics;
  std::vector<Mask> masks;          // eval-mode selections, truncated to max_len
  std::vector<int> predictions;
  std::vector<std::string> warnings;
};

// Runs the model in eval mode over a whole dataset. Gold masks are compared
// on the same (possibly truncated) prefix the model saw.
Evaluation evaluate(const RationaleModel& model, const Dataset& dataset, int batch_size,
                    int max_len, Averaging averaging = Averaging::kMicro);

using TokenClassifier = std::function<TokenClass(std::string_view)>;

// Share of selected tokens falling in each token class; sums to 1 when any
// token is selected, otherwise all zero.
using ClassRates = std::array<double, kTokenClassCount>;
ClassRates selection_rates(const Dataset& dataset, const std::vector<Mask>& masks,
                           const TokenClassifier& classify = classify_token);

// Per-epoch selection rates given the masks recorded at each epoch.
std::vector<ClassRates> degeneration_report(const std::vector<std::vector<Mask>>& masks_per_epoch,
                                            const Dataset& dataset,
                                            const TokenClassifier& classify = classify_token);

// Fraction of marker-token occurrences that the masks select; nullopt when the
// dataset holds no markers.
std::optional<double> marker_selection_rate(const Dataset& dataset, const std::vector<Mask>& masks);

enum class RenderFormat { kAnsi, kHtml };

// First n examples with gold tokens underlined and predicted tokens
// highlighted. gold may be empty (no underlines).
std::string render_rationales(const Dataset& dataset, const std::vector<Mask>& predicted,
                              std::size_t n, RenderFormat format);

}  // namespace rationalift

#include "rationalift/evaluation.h"

#include <algorithm>
#include <sstream>

#include "rationalift/error.h"

namespace rationalift {

namespace {

Prf from_counts(double overlap, double predicted, double gold) {
  Prf out;
  out.precision = predicted > 0 ? overlap / predicted : 0.0;
  out.recall = gold > 0 ? overlap / gold : 0.0;
  const double sum = out.precision + out.recall;
  out.f1 = sum > 0 ? 2.0 * out.precision * out.recall / sum : 0.0;
  return out;
}

std::string html_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

Prf token_prf(const std::vector<Mask>& predicted, const std::vector<Mask>& gold,
              Averaging averaging) {
  if (predicted.size() != gold.size()) {
    throw DataError("token_prf: " + std::to_string(predicted.size()) + " predicted masks vs " +
                    std::to_string(gold.size()) + " gold masks");
  }
  double overlap = 0, n_pred = 0, n_gold = 0;
  Prf macro;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const auto& p = predicted[i];
    const auto& g = gold[i];
    if (p.size() != g.size()) {
      throw DataError("token_prf: length mismatch in example " + std::to_string(i));
    }
    double o = 0, np = 0, ng = 0;
    for (std::size_t t = 0; t < p.size(); ++t) {
      np += p[t] != 0;
      ng += g[t] != 0;
      o += p[t] != 0 && g[t] != 0;
    }
    overlap += o;
    n_pred += np;
    n_gold += ng;
    const Prf one = from_counts(o, np, ng);
    macro.precision += one.precision;
    macro.recall += one.recall;
    macro.f1 += one.f1;
  }
  if (averaging == Averaging::kMicro) return from_counts(overlap, n_pred, n_gold);
  if (predicted.empty()) return macro;
  const double n = static_cast<double>(predicted.size());
  macro.precision /= n;
  macro.recall /= n;
  macro.f1 /= n;
  return macro;
}

double sparsity(const std::vector<Mask>& masks) {
  if (masks.empty()) return 0.0;
  double total = 0.0;
  for (const auto& m : masks) {
    if (m.empty()) continue;
    total += static_cast<double>(std::count_if(m.begin(), m.end(), [](auto v) { return v != 0; })) /
             static_cast<double>(m.size());
  }
  return total / static_cast<double>(masks.size());
}

double accuracy(const Matrix& logits, const std::vector<int>& labels) {
  std::vector<int> predictions;
  for (Eigen::Index b = 0; b < logits.cols(); ++b) {
    Eigen::Index best;
    logits.col(b).maxCoeff(&best);
    predictions.push_back(static_cast<int>(best));
  }
  return accuracy(predictions, labels);
}

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
  if (predictions.size() != labels.size()) throw DataError("accuracy: size mismatch");
  if (labels.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += predictions[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

Evaluation evaluate(const RationaleModel& model, const Dataset& dataset, int batch_size,
                    int max_len, Averaging averaging) {
  Evaluation out;
  out.masks.resize(dataset.size());
  out.predictions.resize(dataset.size());
  std::vector<int> labels(dataset.size());
  for (const auto& batch : make_batches(dataset, model.vocab(), batch_size, max_len, 0, false)) {
    ForwardOptions opts;
    opts.mode = Mode::kEval;
    const ForwardResult r = model.forward(batch, opts);
    for (int b = 0; b < batch.size(); ++b) {
      const auto idx = batch.indices[static_cast<std::size_t>(b)];
      Mask m(static_cast<std::size_t>(batch.lengths[static_cast<std::size_t>(b)]));
      for (std::size_t t = 0; t < m.size(); ++t) {
        m[t] = r.mask.hard(static_cast<Eigen::Index>(t), b) > 0.5 ? 1 : 0;
      }
      out.masks[idx] = std::move(m);
      Eigen::Index best;
      r.logits.col(b).maxCoeff(&best);
      out.predictions[idx] = static_cast<int>(best);
      labels[idx] = batch.labels[static_cast<std::size_t>(b)];
    }
  }
  out.metrics.sparsity = sparsity(out.masks);
  out.metrics.accuracy = accuracy(out.predictions, labels);
  if (dataset.has_gold()) {
    std::vector<Mask> gold;
    std::size_t truncated = 0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      const auto& g = *dataset.examples[i].gold_mask;
      if (g.size() > out.masks[i].size()) ++truncated;
      gold.emplace_back(g.begin(), g.begin() + static_cast<std::ptrdiff_t>(out.masks[i].size()));
    }
    if (truncated > 0) {
      out.warnings.push_back(std::to_string(truncated) + " annotated examples exceed max_len " +
                             std::to_string(max_len) + "; scored on the truncated prefix");
    }
    out.metrics.overlap = token_prf(out.masks, gold, averaging);
  }
  return out;
}

ClassRates selection_rates(const Dataset& dataset, const std::vector<Mask>& masks,
                           const TokenClassifier& classify) {
  ClassRates counts{};
  double total = 0;
  for (std::size_t i = 0; i < masks.size() && i < dataset.size(); ++i) {
    const auto& tokens = dataset.examples[i].tokens;
    for (std::size_t t = 0; t < masks[i].size() && t < tokens.size(); ++t) {
      if (!masks[i][t]) continue;
      counts[static_cast<std::size_t>(classify(tokens[t]))] += 1;
      total += 1;
    }
  }
  if (total > 0) {
    for (auto& c : counts) c /= total;
  }
  return counts;
}

std::vector<ClassRates> degeneration_report(const std::vector<std::vector<Mask>>& masks_per_epoch,
                                            const Dataset& dataset,
                                            const TokenClassifier& classify) {
  std::vector<ClassRates> out;
  out.reserve(masks_per_epoch.size());
  for (const auto& masks : masks_per_epoch) out.push_back(selection_rates(dataset, masks, classify));
  return out;
}

std::optional<double> marker_selection_rate(const Dataset& dataset, const std::vector<Mask>& masks) {
  double present = 0, selected = 0;
  for (std::size_t i = 0; i < masks.size() && i < dataset.size(); ++i) {
    const auto& tokens = dataset.examples[i].tokens;
    for (std::size_t t = 0; t < masks[i].size() && t < tokens.size(); ++t) {
      if (classify_token(tokens[t]) != TokenClass::kMarker) continue;
      present += 1;
      selected += masks[i][t] != 0;
    }
  }
  if (present == 0) return std::nullopt;
  return selected / present;
}

std::string render_rationales(const Dataset& dataset, const std::vector<Mask>& predicted,
                              std::size_t n, RenderFormat format) {
  n = std::min({n, dataset.size(), predicted.size()});
  if (n == 0) return {};
  std::ostringstream out;
  if (format == RenderFormat::kHtml) {
    out << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>Rationales</title>\n"
           "<style>body{font-family:sans-serif;max-width:60em;margin:2em auto}"
           ".pred{background:#ffd54f}.gold{text-decoration:underline}"
           "p{line-height:1.8}</style></head><body>\n"
           "<p>Highlighted: selected by the model. Underlined: human rationale.</p>\n";
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& ex = dataset.examples[i];
    const auto& pred = predicted[i];
    if (format == RenderFormat::kHtml) {
      out << "<p><b>" << html_escape(ex.id) << "</b> (label " << ex.label << "): ";
    } else {
      out << ex.id << " (label " << ex.label << "): ";
    }
    for (std::size_t t = 0; t < ex.tokens.size(); ++t) {
      const bool sel = t < pred.size() && pred[t];
      const bool gold = ex.gold_mask && (*ex.gold_mask)[t];
      if (t) out << ' ';
      if (format == RenderFormat::kHtml) {
        std::string cls;
        if (sel) cls = "pred";
        if (gold) cls += cls.empty() ? "gold" : " gold";
        if (cls.empty()) {
          out << html_escape(ex.tokens[t]);
        } else {
          out << "<span class=\"" << cls << "\">" << html_escape(ex.tokens[t]) << "</span>";
        }
      } else {
        if (sel) out << "\x1b[43m";
        if (gold) out << "\x1b[4m";
        out << ex.tokens[t];
        if (sel || gold) out << "\x1b[0m";
      }
    }
    out << (format == RenderFormat::kHtml ? "</p>\n" : "\n");
  }
  if (format == RenderFormat::kHtml) out << "</body></html>\n";
  return out.str();
}

}  // namespace rationalift

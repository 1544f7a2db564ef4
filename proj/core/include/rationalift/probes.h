#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rationalift/evaluation.h"
#include "rationalift/model.h"

namespace rationalift {

// Representations of one probe sentence under one encoder view.
struct ViewProbe {
  std::string view;  // "shared", "generator" or "predictor"
  Matrix states;     // state_dim x T
  Matrix pairwise;   // T x T Euclidean distances
  // ||rep(t) - rep(t-1)|| over the full representation; 0 for t = 0.
  std::vector<double> to_preceding;
  // Each direction compared with its own predecessor in reading order: the
  // forward half with token t-1, the backward half with token t+1, the zero
  // initial state standing in at the sequence ends.
  std::vector<double> to_preceding_directional;
};

struct SentenceProbe {
  std::vector<std::string> tokens;
  std::vector<bool> uninformative;
  std::vector<ViewProbe> views;
};

struct ViewSummary {
  std::string view;
  double mean_uninformative = 0.0;  // mean to_preceding over uninformative tokens
  double mean_informative = 0.0;
  double ratio = 0.0;
  double mean_uninformative_directional = 0.0;
  double mean_informative_directional = 0.0;
  double ratio_directional = 0.0;
};

struct ProbeReport {
  std::vector<SentenceProbe> sentences;
  std::vector<ViewSummary> summary;
};

// Whether a token counts as uninformative for the probe.
using UninformativePredicate = std::function<bool(std::string_view)>;
bool default_uninformative(std::string_view token);

// Encodes each sentence with every distinct encoder view (one view when the
// model is fully folded). Throws ConfigError when a probe token is not in the
// vocabulary.
ProbeReport lemma3_probe(const RationaleModel& model,
                         const std::vector<std::vector<std::string>>& sentences,
                         const UninformativePredicate& uninformative = default_uninformative);

// The two sentences from the representation visualization experiment.
std::vector<std::vector<std::string>> default_probe_sentences();

// Sentence pairs built from synthetic vocabulary, mirroring the
// "informative, filler, filler, informative" layout.
std::vector<std::vector<std::string>> synthetic_probe_sentences(const Vocabulary& vocab, int count,
                                                                std::uint64_t seed);

struct InsertionReport {
  std::vector<double> deltas;  // one per (example, position)
  double median = 0.0;
  double max = 0.0;
};

// Predictor output before and after inserting `token` (selected) at each
// position. The baseline input is the gold rationale when present, the full
// text otherwise. Position -1 means the end of the sequence. Inserting the
// PAD token adds a non-real position. delta = max_c |p_after(c) - p_before(c)|.
InsertionReport insertion_probe(const RationaleModel& model, const Dataset& examples,
                                const std::string& token, const std::vector<int>& positions);

struct UninformativeReport {
  std::vector<double> filler_distances;       // consecutive filler-only rationale pairs
  std::vector<double> informative_distances;  // positive vs negative gold rationales
  double filler_median = 0.0;
  double informative_median = 0.0;
  double ratio = 0.0;
  double filler_positive_fraction = 0.0;  // filler rationales classified positive
};

// Predictor outputs on rationales made only of filler tokens versus gold
// rationales of opposite classes. Needs gold masks; distances are Euclidean
// between class-probability vectors.
UninformativeReport uninformative_rationale_probe(const RationaleModel& model,
                                                  const Dataset& corpus, std::uint64_t seed,
                                                  const TokenClassifier& classify = classify_token);

// Softmax class probabilities of the predictor on `tokens` under `mask`.
Vector predictor_output(const RationaleModel& model, const std::vector<std::string>& tokens,
                        const Mask& mask, const std::vector<bool>& real = {});

}  // namespace rationalift

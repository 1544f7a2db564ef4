#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "rationalift/data.h"

namespace rationalift {

// Planted-rationale corpus generator. Each document is filler with one
// contiguous span drawn from the class-specific informative set; optionally a
// class-revealing marker token sits somewhere outside the span.
struct SynthConfig {
  int vocab_size = 100;
  int doc_length = 20;
  int span_length = 3;
  double marker_correlation = 0.0;
  int informative_per_class = 10;
  int markers_per_class = 1;
  int train_size = 2000;
  int dev_size = 500;
  int annotation_size = 500;
  std::uint64_t seed = 1;

  int filler_count() const { return vocab_size - 2 * informative_per_class - 2 * markers_per_class; }
  // Throws ConfigError on inconsistent partition or lengths.
  void validate() const;
};

struct SynthCorpus {
  Dataset train;
  Dataset dev;
  Dataset annotation;
};

SynthCorpus synth_generate(const SynthConfig& cfg);

enum class TokenClass { kInformative, kFiller, kMarker, kPunctuation, kOther };
inline constexpr int kTokenClassCount = 5;

std::string_view to_string(TokenClass cls);

// Synthetic tokens are recognized by name ("pos3", "neg0", "fill17",
// "mark+0", "mark-0"); punctuation by character class; everything else is
// kOther.
TokenClass classify_token(std::string_view token);

// Token names used by the generator.
std::string informative_token(int label, int index);
std::string filler_token(int index);
std::string marker_token(int label, int index);

}  // namespace rationalift

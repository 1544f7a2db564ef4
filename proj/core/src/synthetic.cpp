#include "rationalift/synthetic.h"

#include <algorithm>
#include <cctype>
#include <set>

#include "rationalift/error.h"
#include "rationalift/random.h"

namespace rationalift {

namespace {

Example make_document(const SynthConfig& cfg, int label, Rng& rng) {
  Example ex;
  ex.label = label;
  ex.tokens.resize(static_cast<std::size_t>(cfg.doc_length));
  for (auto& tok : ex.tokens) tok = filler_token(static_cast<int>(rng.index(static_cast<std::size_t>(cfg.filler_count()))));

  const auto start = rng.index(static_cast<std::size_t>(cfg.doc_length - cfg.span_length + 1));
  Mask gold(ex.tokens.size(), 0);
  for (std::size_t i = start; i < start + static_cast<std::size_t>(cfg.span_length); ++i) {
    ex.tokens[i] = informative_token(label, static_cast<int>(rng.index(static_cast<std::size_t>(cfg.informative_per_class))));
    gold[i] = 1;
  }
  if (rng.bernoulli(cfg.marker_correlation)) {
    const auto outside = static_cast<std::size_t>(cfg.doc_length - cfg.span_length);
    auto pos = rng.index(outside);
    if (pos >= start) pos += static_cast<std::size_t>(cfg.span_length);
    ex.tokens[pos] = marker_token(label, static_cast<int>(rng.index(static_cast<std::size_t>(cfg.markers_per_class))));
  }
  ex.gold_mask = std::move(gold);
  return ex;
}

Dataset make_split(const SynthConfig& cfg, Split split, int size, Rng& rng,
                   std::set<std::vector<std::string>>& seen) {
  Dataset ds;
  ds.split = split;
  ds.aspect = "synthetic";
  std::vector<int> labels(static_cast<std::size_t>(size));
  for (int i = 0; i < size; ++i) labels[static_cast<std::size_t>(i)] = i % 2;
  rng.shuffle(labels.begin(), labels.end());
  for (int i = 0; i < size; ++i) {
    Example ex;
    do {
      ex = make_document(cfg, labels[static_cast<std::size_t>(i)], rng);
    } while (!seen.insert(ex.tokens).second);
    ex.id = std::string(to_string(split)) + "-" + std::to_string(i);
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

}  // namespace

void SynthConfig::validate() const {
  if (doc_length < 2) throw ConfigError("synth doc_length must be at least 2");
  if (span_length < 1 || span_length >= doc_length) {
    throw ConfigError("synth span_length must satisfy 1 <= span_length < doc_length");
  }
  if (marker_correlation < 0.0 || marker_correlation > 1.0) {
    throw ConfigError("synth marker_correlation must lie in [0, 1]");
  }
  if (informative_per_class < 1 || markers_per_class < 1 || filler_count() < 1) {
    throw ConfigError("synth vocabulary partition is inconsistent: vocab_size " +
                      std::to_string(vocab_size) + " cannot hold 2x" +
                      std::to_string(informative_per_class) + " informative, 2x" +
                      std::to_string(markers_per_class) + " marker and at least one filler token");
  }
  if (train_size < 2 || train_size % 2 != 0) {
    throw ConfigError("synth train_size must be a positive even number");
  }
  if (dev_size < 1 || annotation_size < 1) throw ConfigError("synth split sizes must be positive");
}

SynthCorpus synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, 0x5e7));
  std::set<std::vector<std::string>> seen;
  SynthCorpus corpus;
  corpus.train = make_split(cfg, Split::kTrain, cfg.train_size, rng, seen);
  corpus.dev = make_split(cfg, Split::kDev, cfg.dev_size, rng, seen);
  corpus.annotation = make_split(cfg, Split::kAnnotation, cfg.annotation_size, rng, seen);
  return corpus;
}

std::string_view to_string(TokenClass cls) {
  switch (cls) {
    case TokenClass::kInformative: return "informative";
    case TokenClass::kFiller: return "filler";
    case TokenClass::kMarker: return "marker";
    case TokenClass::kPunctuation: return "punctuation";
    case TokenClass::kOther: return "other";
  }
  return "?";
}

std::string informative_token(int label, int index) {
  return (label == 1 ? "pos" : "neg") + std::to_string(index);
}

std::string filler_token(int index) { return "fill" + std::to_string(index); }

std::string marker_token(int label, int index) {
  return std::string(label == 1 ? "mark+" : "mark-") + std::to_string(index);
}

TokenClass classify_token(std::string_view token) {
  auto numbered = [&](std::string_view prefix) {
    return token.size() > prefix.size() && token.substr(0, prefix.size()) == prefix &&
           std::all_of(token.begin() + static_cast<std::ptrdiff_t>(prefix.size()), token.end(),
                       [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
  };
  if (numbered("pos") || numbered("neg")) return TokenClass::kInformative;
  if (numbered("fill")) return TokenClass::kFiller;
  if (numbered("mark+") || numbered("mark-")) return TokenClass::kMarker;
  if (!token.empty() && std::all_of(token.begin(), token.end(), [](char c) {
        return std::ispunct(static_cast<unsigned char>(c));
      })) {
    return TokenClass::kPunctuation;
  }
  return TokenClass::kOther;
}

}  // namespace rationalift

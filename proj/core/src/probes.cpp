#include "rationalift/probes.h"

#include <algorithm>
#include <cmath>

#include "rationalift/error.h"
#include "rationalift/random.h"
#include "rationalift/training.h"

namespace rationalift {

namespace {

ViewProbe probe_view(const RationaleModel& model, const EncoderStack& encoder, std::string name,
                     const std::vector<std::string>& tokens) {
  ViewProbe v;
  v.view = std::move(name);
  v.states = encode_tokens(model, encoder, tokens);
  const auto T = v.states.cols();
  v.pairwise.resize(T, T);
  for (Eigen::Index i = 0; i < T; ++i) {
    for (Eigen::Index j = 0; j < T; ++j) v.pairwise(i, j) = (v.states.col(i) - v.states.col(j)).norm();
  }
  const auto half = v.states.rows() / 2;
  for (Eigen::Index t = 0; t < T; ++t) {
    v.to_preceding.push_back(t == 0 ? 0.0 : v.pairwise(t, t - 1));
    const Vector fwd_prev = t == 0 ? Vector::Zero(half) : Vector(v.states.col(t - 1).head(half));
    const Vector bwd_prev = t + 1 == T ? Vector::Zero(half) : Vector(v.states.col(t + 1).tail(half));
    const double df = (v.states.col(t).head(half) - fwd_prev).squaredNorm();
    const double db = (v.states.col(t).tail(half) - bwd_prev).squaredNorm();
    v.to_preceding_directional.push_back(std::sqrt(df + db));
  }
  return v;
}

Vector softmax(const Matrix& logits) {
  const Vector e = (logits.col(0).array() - logits.col(0).maxCoeff()).exp().matrix();
  return e / e.sum();
}

}  // namespace

bool default_uninformative(std::string_view token) {
  const auto cls = classify_token(token);
  return cls == TokenClass::kFiller || cls == TokenClass::kPunctuation;
}

ProbeReport lemma3_probe(const RationaleModel& model,
                         const std::vector<std::vector<std::string>>& sentences,
                         const UninformativePredicate& uninformative) {
  ProbeReport report;
  const bool folded = model.config().folded();
  std::vector<std::pair<std::string, const EncoderStack*>> views;
  if (folded) {
    views.emplace_back("shared", &model.generator_encoder());
  } else {
    views.emplace_back("generator", &model.generator_encoder());
    views.emplace_back("predictor", &model.predictor_encoder());
  }
  for (const auto& sentence : sentences) {
    if (sentence.empty()) throw ConfigError("empty probe sentence");
    SentenceProbe sp;
    sp.tokens = sentence;
    for (const auto& tok : sentence) {
      if (!model.vocab().find(tok)) {
        throw ConfigError("probe token '" + tok + "' is not in the model vocabulary");
      }
      sp.uninformative.push_back(uninformative(tok));
    }
    for (const auto& [name, enc] : views) sp.views.push_back(probe_view(model, *enc, name, sentence));
    report.sentences.push_back(std::move(sp));
  }
  for (std::size_t v = 0; v < views.size(); ++v) {
    ViewSummary s;
    s.view = views[v].first;
    double su = 0, si = 0, sud = 0, sid = 0;
    int nu = 0, ni = 0, nud = 0, nid = 0;
    for (const auto& sp : report.sentences) {
      const auto& vp = sp.views[v];
      for (std::size_t t = 0; t < sp.tokens.size(); ++t) {
        (sp.uninformative[t] ? sud : sid) += vp.to_preceding_directional[t];
        (sp.uninformative[t] ? nud : nid) += 1;
        if (t == 0) continue;
        (sp.uninformative[t] ? su : si) += vp.to_preceding[t];
        (sp.uninformative[t] ? nu : ni) += 1;
      }
    }
    s.mean_uninformative = nu ? su / nu : 0.0;
    s.mean_informative = ni ? si / ni : 0.0;
    s.ratio = s.mean_informative > 0 ? s.mean_uninformative / s.mean_informative : 0.0;
    s.mean_uninformative_directional = nud ? sud / nud : 0.0;
    s.mean_informative_directional = nid ? sid / nid : 0.0;
    s.ratio_directional = s.mean_informative_directional > 0
                              ? s.mean_uninformative_directional / s.mean_informative_directional
                              : 0.0;
    report.summary.push_back(s);
  }
  return report;
}

std::vector<std::vector<std::string>> default_probe_sentences() {
  return {{"good", ".", ",", "smell"}, {"good", ",", ".", "smell"}};
}

std::vector<std::vector<std::string>> synthetic_probe_sentences(const Vocabulary& vocab, int count,
                                                                std::uint64_t seed) {
  std::vector<std::string> pos, neg, fill;
  for (const auto& tok : vocab.tokens()) {
    switch (classify_token(tok)) {
      case TokenClass::kInformative: (tok.rfind("pos", 0) == 0 ? pos : neg).push_back(tok); break;
      case TokenClass::kFiller: fill.push_back(tok); break;
      default: break;
    }
  }
  if (pos.empty() || neg.empty() || fill.size() < 2) {
    throw ConfigError("vocabulary lacks synthetic informative/filler tokens for probing");
  }
  Rng rng(derive_seed(seed, 0x9b0be));
  std::vector<std::vector<std::string>> out;
  for (int i = 0; i < count; ++i) {
    const auto& cls = i % 2 == 0 ? pos : neg;
    const auto a = cls[rng.index(cls.size())];
    const auto b = cls[rng.index(cls.size())];
    const auto f1 = fill[rng.index(fill.size())];
    auto f2 = fill[rng.index(fill.size())];
    out.push_back({a, f1, f2, b});
    out.push_back({a, f2, f1, b});
  }
  return out;
}

Vector predictor_output(const RationaleModel& model, const std::vector<std::string>& tokens,
                        const Mask& mask, const std::vector<bool>& real) {
  const auto T = static_cast<Eigen::Index>(tokens.size());
  Eigen::MatrixXi ids(T, 1);
  Matrix real_m = Matrix::Ones(T, 1);
  Matrix m(T, 1);
  for (Eigen::Index t = 0; t < T; ++t) {
    ids(t, 0) = model.vocab().lookup(tokens[static_cast<std::size_t>(t)]);
    if (!real.empty() && !real[static_cast<std::size_t>(t)]) real_m(t, 0) = 0.0;
    m(t, 0) = mask[static_cast<std::size_t>(t)] ? real_m(t, 0) : 0.0;
  }
  const Matrix masked = apply_mask(model.embed(ids), m);
  const Prediction p = predict(model.predictor_encoder(), model.predictor_head(), masked, real_m,
                               {static_cast<int>(T), 1});
  return softmax(p.logits);
}

InsertionReport insertion_probe(const RationaleModel& model, const Dataset& examples,
                                const std::string& token, const std::vector<int>& positions) {
  const bool pad = token == Vocabulary::kPadToken;
  if (!pad && !model.vocab().find(token)) {
    throw ConfigError("insertion token '" + token + "' is not in the model vocabulary");
  }
  InsertionReport report;
  for (const auto& ex : examples.examples) {
    const Mask base_mask = ex.gold_mask ? *ex.gold_mask : Mask(ex.tokens.size(), 1);
    const Vector before = predictor_output(model, ex.tokens, base_mask);
    for (int pos : positions) {
      const auto n = static_cast<int>(ex.tokens.size());
      const int at = pos < 0 || pos > n ? n : pos;
      auto tokens = ex.tokens;
      auto mask = base_mask;
      std::vector<bool> real(tokens.size(), true);
      tokens.insert(tokens.begin() + at, token);
      mask.insert(mask.begin() + at, 1);
      real.insert(real.begin() + at, !pad);
      const Vector after = predictor_output(model, tokens, mask, real);
      report.deltas.push_back((after - before).cwiseAbs().maxCoeff());
    }
  }
  report.median = median(report.deltas);
  report.max = report.deltas.empty() ? 0.0 : *std::max_element(report.deltas.begin(), report.deltas.end());
  return report;
}

UninformativeReport uninformative_rationale_probe(const RationaleModel& model,
                                                  const Dataset& corpus, std::uint64_t seed,
                                                  const TokenClassifier& classify) {
  if (!corpus.has_gold()) throw ConfigError("uninformative probe needs gold rationales");
  Rng rng(derive_seed(seed, 0xf111e));
  UninformativeReport report;
  std::vector<Vector> filler_out, pos_out, neg_out;
  double positive = 0;
  for (const auto& ex : corpus.examples) {
    const auto& gold = *ex.gold_mask;
    const auto width = static_cast<std::size_t>(std::max<long>(1, std::count(gold.begin(), gold.end(), 1)));
    // Candidate windows of `width` tokens that are all filler.
    std::vector<std::size_t> starts;
    for (std::size_t s = 0; s + width <= ex.tokens.size(); ++s) {
      bool ok = true;
      for (std::size_t t = s; t < s + width && ok; ++t) ok = classify(ex.tokens[t]) == TokenClass::kFiller;
      if (ok) starts.push_back(s);
    }
    if (!starts.empty()) {
      const auto s = starts[rng.index(starts.size())];
      Mask m(ex.tokens.size(), 0);
      std::fill(m.begin() + static_cast<std::ptrdiff_t>(s), m.begin() + static_cast<std::ptrdiff_t>(s + width), 1);
      filler_out.push_back(predictor_output(model, ex.tokens, m));
      positive += filler_out.back()(1) > filler_out.back()(0);
    }
    (ex.label == 1 ? pos_out : neg_out).push_back(predictor_output(model, ex.tokens, gold));
  }
  for (std::size_t i = 1; i < filler_out.size(); ++i) {
    report.filler_distances.push_back((filler_out[i] - filler_out[i - 1]).norm());
  }
  for (std::size_t i = 0; i < std::min(pos_out.size(), neg_out.size()); ++i) {
    report.informative_distances.push_back((pos_out[i] - neg_out[i]).norm());
  }
  report.filler_median = median(report.filler_distances);
  report.informative_median = median(report.informative_distances);
  report.ratio = report.informative_median > 0 ? report.filler_median / report.informative_median : 0.0;
  report.filler_positive_fraction = filler_out.empty() ? 0.0 : positive / static_cast<double>(filler_out.size());
  return report;
}

}  // namespace rationalift

#include <gtest/gtest.h>

#include <set>

#include "rationalift/error.h"
#include "rationalift/model.h"
#include "test_util.h"

namespace rationalift {
namespace {

using testing::small_config;
using testing::small_model;
using testing::tiny_dataset;

Dataset corpus() {
  return tiny_dataset({{"a b c d", 1}, {"e f", 0}, {"a c e g h", 1}, {"b d", 0}});
}

TEST(Build, FoldedDropsExactlyOneStack) {
  const Dataset ds = corpus();
  for (int layers : {1, 2, 3}) {
    const auto fr = small_model(ds, layers, 7, layers);
    const auto rnp = small_model(ds, 0, 7, layers);
    const auto& stack = rnp.predictor_encoder();
    Eigen::Index stack_count = 0;
    for (const auto& l : stack.layers()) stack_count += l->parameter_count();
    EXPECT_EQ(fr.param_count().total, rnp.param_count().total - stack_count);
    EXPECT_EQ(fr.param_count().predictor,
              fr.predictor_head().weight.size() + fr.predictor_head().bias.size());
  }
}

TEST(Build, PartialShareCountsLeadingLayers) {
  const Dataset ds = corpus();
  const auto m = small_model(ds, 2, 7, 3);
  Eigen::Index expect = 0;
  for (int i = 0; i < 2; ++i) expect += m.generator_encoder().layers()[i]->parameter_count();
  EXPECT_EQ(m.param_count().shared, expect);
}

TEST(Build, SharingIsAliasingNotCopying) {
  const Dataset ds = corpus();
  const auto m = small_model(ds, 2, 7, 3);
  const auto& g = m.generator_encoder().layers();
  const auto& p = m.predictor_encoder().layers();
  EXPECT_EQ(g[0].get(), p[0].get());
  EXPECT_EQ(g[1].get(), p[1].get());
  EXPECT_NE(g[2].get(), p[2].get());
  auto rnp = small_model(ds, 0, 7, 1);
  std::set<const Param*> seen;
  for (const auto& ref : rnp.parameters()) EXPECT_TRUE(seen.insert(ref.param).second);
  for (const auto& ref : rnp.parameters()) EXPECT_NE(ref.owner, Owner::kShared);
}

TEST(Build, EmbeddingCountedOnlyWhenTrainable) {
  const Dataset ds = corpus();
  const auto frozen = small_model(ds, 1);
  const auto trainable = small_model(ds, 1, 7, 1, true);
  EXPECT_EQ(frozen.param_count().total, trainable.param_count().total - trainable.param_count().embedding);
  EXPECT_EQ(frozen.param_count().total_with_embedding, trainable.param_count().total);
}

TEST(Build, SeedDeterminesParameters) {
  const Dataset ds = corpus();
  const auto a = small_model(ds, 0, 3), b = small_model(ds, 0, 3), c = small_model(ds, 0, 4);
  EXPECT_EQ(a.snapshot(), b.snapshot());
  EXPECT_NE(a.snapshot(), c.snapshot());
}

TEST(Build, InvalidShareDepthThrows) {
  const Dataset ds = corpus();
  Vocabulary v = build_vocab({&ds});
  ModelConfig cfg = small_config(2, 1);
  EXPECT_THROW(RationaleModel::build(cfg, v, random_embeddings(v, 4, 1, 1), 1), ConfigError);
}

TEST(Sampling, HardMaskFrequencyMatchesBernoulli) {
  for (double p : {0.1, 0.5, 0.7, 0.9}) {
    Matrix probs = Matrix::Constant(100, 100, p);
    const auto s = sample_mask_from_probs(probs, Matrix::Ones(100, 100), 1.0, Mode::kTrain, 99);
    EXPECT_NEAR(s.hard.mean(), p, 0.02) << p;
    for (Eigen::Index i = 0; i < s.hard.size(); ++i) {
      ASSERT_TRUE(s.hard(i) == 0.0 || s.hard(i) == 1.0);
      ASSERT_EQ(s.hard(i), s.soft(i) > 0.5 ? 1.0 : 0.0);
    }
  }
}

TEST(Sampling, NearCertainProbabilitySelects) {
  Matrix probs = Matrix::Constant(50, 20, 1 - 1e-9);
  const auto s = sample_mask_from_probs(probs, Matrix::Ones(50, 20), 0.3, Mode::kTrain, 5);
  EXPECT_EQ(s.hard.sum(), 1000.0);
}

TEST(Sampling, EvalThresholdIsStrict) {
  Matrix probs(3, 1);
  probs << 0.9, 0.3, 0.5;
  const auto s = sample_mask_from_probs(probs, Matrix::Ones(3, 1), 1.0, Mode::kEval, 0);
  EXPECT_EQ(s.hard(0), 1.0);
  EXPECT_EQ(s.hard(1), 0.0);
  EXPECT_EQ(s.hard(2), 0.0);
  EXPECT_EQ(s.soft, probs);
}

TEST(Sampling, PadPositionsNeverSelected) {
  Matrix logits = Matrix::Constant(4, 2, 10.0);
  Matrix real = Matrix::Ones(4, 2);
  real(3, 0) = real(2, 1) = real(3, 1) = 0;
  for (Mode mode : {Mode::kTrain, Mode::kEval}) {
    const auto s = sample_mask(logits, real, 1.0, mode, 1);
    EXPECT_EQ(s.hard(3, 0), 0.0);
    EXPECT_EQ(s.hard(2, 1), 0.0);
    EXPECT_EQ(s.probs(3, 1), 0.0);
  }
}

TEST(Sampling, SameSeedSameDraw) {
  Matrix probs = Matrix::Constant(10, 3, 0.4);
  const auto a = sample_mask_from_probs(probs, Matrix::Ones(10, 3), 1.0, Mode::kTrain, 42);
  const auto b = sample_mask_from_probs(probs, Matrix::Ones(10, 3), 1.0, Mode::kTrain, 42);
  EXPECT_EQ(a.hard, b.hard);
  EXPECT_EQ(a.soft, b.soft);
}

TEST(ApplyMask, ScalesColumns) {
  Matrix e(2, 2);
  e << 1, 2,
       3, 4;
  Matrix ones = Matrix::Ones(2, 1);
  EXPECT_EQ(apply_mask(e, ones), e);
  EXPECT_TRUE(apply_mask(e, Matrix::Zero(2, 1)).isZero(0.0));
  Matrix m(2, 1);
  m << 1, 0;
  const Matrix out = apply_mask(e, m);
  EXPECT_EQ(out.col(0), e.col(0));
  EXPECT_TRUE(out.col(1).isZero(0.0));
  EXPECT_THROW(apply_mask(e, Matrix::Ones(3, 1)), ConfigError);
}

TEST(Generator, ZeroHeadGivesHalf) {
  const Dataset ds = corpus();
  auto m = small_model(ds, 1);
  m.generator_head().weight.value.setZero();
  m.generator_head().bias.value.setZero();
  const Batch b = make_batch(ds, {0, 1}, m.vocab(), 10);
  ForwardOptions opt;
  opt.mode = Mode::kEval;
  const auto r = m.forward(b, opt);
  EXPECT_EQ(r.mask.probs(0, 0), 0.5);
  EXPECT_EQ(r.mask.probs(1, 1), 0.5);
  EXPECT_EQ(r.mask.probs(2, 1), 0.0);  // pad
}

TEST(Forward, FoldedViewsEncodeIdentically) {
  const Dataset ds = corpus();
  const auto m = small_model(ds, 1);
  const Batch b = make_batch(ds, {0, 1, 2}, m.vocab(), 10);
  ForwardOptions opt;
  opt.mode = Mode::kEval;
  const auto r = m.forward(b, opt);
  ASSERT_GT(r.gen_states.size(), 0);
  const Matrix pred = m.predictor_encoder().forward(r.embedded, r.real, r.shape, nullptr);
  EXPECT_EQ(r.gen_states, pred);
}

TEST(Forward, FullMaskEqualsPlainClassifier) {
  const Dataset ds = corpus();
  const auto m = small_model(ds, 0);
  const Batch b = make_batch(ds, {0, 1, 2}, m.vocab(), 10);
  ForwardOptions opt;
  opt.force_full_mask = true;
  const auto r = m.forward(b, opt);
  const Prediction p = predict(m.predictor_encoder(), m.predictor_head(), m.embed(b.ids), b.real,
                               {b.steps(), b.size()});
  EXPECT_EQ(r.logits, p.logits);
}

TEST(Forward, DeterministicAndBatchIndependent) {
  const Dataset ds = corpus();
  const auto m = small_model(ds, 0);
  ForwardOptions opt;
  opt.mode = Mode::kEval;
  const auto a = m.forward(make_batch(ds, {0, 1, 2, 3}, m.vocab(), 10), opt);
  const auto b = m.forward(make_batch(ds, {3, 2, 1, 0}, m.vocab(), 10), opt);
  for (int i = 0; i < 4; ++i) {
    EXPECT_LT((a.logits.col(i) - b.logits.col(3 - i)).cwiseAbs().maxCoeff(), 1e-12);
  }
  const auto c = m.forward(make_batch(ds, {0, 1, 2, 3}, m.vocab(), 10), opt);
  EXPECT_EQ(a.logits, c.logits);
}

TEST(Forward, MaskedTokenMatchesMaskEmbedding) {
  const Dataset ds = tiny_dataset({{"a b c", 1}, {"a <mask> c", 1}});
  const auto m = small_model(ds, 0);
  Matrix override_mask(3, 1);
  override_mask << 1, 0, 1;
  ForwardOptions opt;
  opt.mask_override = &override_mask;
  const auto masked = m.forward(make_batch(ds, {0}, m.vocab(), 10), opt);
  ForwardOptions full;
  full.force_full_mask = true;
  const auto substituted = m.forward(make_batch(ds, {1}, m.vocab(), 10), full);
  EXPECT_EQ(masked.logits, substituted.logits);
}

TEST(Predict, BagOfWordsEncoderIsOrderInvariant) {
  Rng rng(1);
  Linear head("h", 3, 2);
  head.init(rng);
  EncoderStack identity;
  Matrix x(3, 4);
  x << 1, 2, 3, 4,
       0, -1, 5, 2,
       7, 1, 0, 0;
  Matrix shuffled(3, 4);
  shuffled << x.col(2), x.col(0), x.col(3), x.col(1);
  const Matrix real = Matrix::Ones(4, 1);
  const auto a = predict(identity, head, x, real, {4, 1});
  const auto b = predict(identity, head, shuffled, real, {4, 1});
  EXPECT_EQ(a.logits, b.logits);
  // Duplicating the maximal token leaves the pooled vector unchanged.
  Matrix dup(3, 5);
  dup << x, x.col(2);
  const auto c = predict(identity, head, dup, Matrix::Ones(5, 1), {5, 1});
  EXPECT_EQ(a.logits, c.logits);
}

TEST(Predict, NoRealTokensDoesNotCrash) {
  Rng rng(1);
  Linear head("h", 3, 2);
  head.init(rng);
  const auto p = predict(EncoderStack{}, head, Matrix::Zero(3, 2), Matrix::Zero(2, 1), {2, 1});
  EXPECT_TRUE(p.logits.allFinite());
}

TEST(Snapshot, RestoreAndCloneKeepStructure) {
  const Dataset ds = corpus();
  auto m = small_model(ds, 1, 7, 2);
  const auto before = m.snapshot();
  auto clone = m.clone();
  for (auto& ref : m.parameters()) ref.param->value.array() += 1.0;
  EXPECT_NE(m.snapshot(), before);
  EXPECT_EQ(clone.snapshot(), before);
  EXPECT_EQ(clone.generator_encoder().layers()[0].get(), clone.predictor_encoder().layers()[0].get());
  m.restore(before);
  EXPECT_EQ(m.snapshot(), before);
  const auto rebuilt = RationaleModel::from_snapshot(m.config(), m.vocab(), before);
  EXPECT_EQ(rebuilt.snapshot(), before);
}

TEST(EncodeTokens, ShapeMatchesStateDim) {
  const Dataset ds = corpus();
  const auto m = small_model(ds, 1);
  const Matrix s = encode_tokens(m, m.generator_encoder(), {"a", "b", "c"});
  EXPECT_EQ(s.rows(), m.config().state_dim());
  EXPECT_EQ(s.cols(), 3);
}

}  // namespace
}  // namespace rationalift

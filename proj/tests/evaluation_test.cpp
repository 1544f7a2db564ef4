#include <gtest/gtest.h>

#include <set>

#include "rationalift/error.h"
#include "rationalift/evaluation.h"
#include "rationalift/random.h"
#include "test_util.h"

namespace rationalift {
namespace {

TEST(TokenPrf, WorkedExample) {
  Mask pred(8, 0), gold(8, 0);
  for (int t : {2, 3, 4}) pred[t] = 1;
  for (int t : {3, 4, 5}) gold[t] = 1;
  const Prf p = token_prf({pred}, {gold});
  EXPECT_DOUBLE_EQ(p.precision, 2.0 / 3);
  EXPECT_DOUBLE_EQ(p.recall, 2.0 / 3);
  EXPECT_DOUBLE_EQ(p.f1, 2.0 / 3);
}

TEST(TokenPrf, EmptyPredictionScoresZero) {
  const Prf p = token_prf({Mask{0, 0, 0}}, {Mask{0, 1, 0}});
  EXPECT_EQ(p.precision, 0.0);
  EXPECT_EQ(p.recall, 0.0);
  EXPECT_EQ(p.f1, 0.0);
}

TEST(TokenPrf, LengthMismatchThrows) {
  EXPECT_THROW(token_prf({Mask{0, 1}}, {Mask{0, 1, 0}}), DataError);
}

// Independent set-based computation.
Prf brute_force(const std::vector<Mask>& pred, const std::vector<Mask>& gold) {
  std::set<std::pair<std::size_t, std::size_t>> p, g;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    for (std::size_t t = 0; t < pred[i].size(); ++t) {
      if (pred[i][t]) p.insert({i, t});
      if (gold[i][t]) g.insert({i, t});
    }
  }
  std::size_t both = 0;
  for (const auto& x : p) both += g.count(x);
  Prf r;
  r.precision = p.empty() ? 0.0 : static_cast<double>(both) / static_cast<double>(p.size());
  r.recall = g.empty() ? 0.0 : static_cast<double>(both) / static_cast<double>(g.size());
  r.f1 = r.precision + r.recall == 0 ? 0.0 : 2 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

TEST(TokenPrf, MatchesBruteForceOnRandomInstances) {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.index(6);
    std::vector<Mask> pred, gold;
    const double dp = rng.uniform(), dg = rng.uniform();
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t len = 1 + rng.index(25);
      Mask a(len), b(len);
      for (std::size_t t = 0; t < len; ++t) {
        a[t] = rng.bernoulli(dp);
        b[t] = rng.bernoulli(dg);
      }
      pred.push_back(a);
      gold.push_back(b);
    }
    const Prf got = token_prf(pred, gold);
    const Prf want = brute_force(pred, gold);
    ASSERT_EQ(got.precision, want.precision);
    ASSERT_EQ(got.recall, want.recall);
    ASSERT_EQ(got.f1, want.f1);
  }
}

TEST(TokenPrf, MacroAveragesPerExample) {
  const std::vector<Mask> pred = {Mask{1, 1, 0, 0}, Mask{1, 0}};
  const std::vector<Mask> gold = {Mask{1, 0, 0, 0}, Mask{1, 0}};
  const Prf macro = token_prf(pred, gold, Averaging::kMacro);
  EXPECT_DOUBLE_EQ(macro.precision, (0.5 + 1.0) / 2);
  EXPECT_DOUBLE_EQ(macro.recall, 1.0);
  const Prf micro = token_prf(pred, gold);
  EXPECT_DOUBLE_EQ(micro.precision, 2.0 / 3);
}

TEST(Sparsity, MeanSelectedFraction) {
  EXPECT_DOUBLE_EQ(sparsity({Mask{1, 0, 0, 0}, Mask{1, 1}}), (0.25 + 1.0) / 2);
}

TEST(Accuracy, ArgmaxAgainstLabels) {
  Matrix logits(2, 3);
  logits << 1, 0, 0,
            0, 1, 2;
  EXPECT_DOUBLE_EQ(accuracy(logits, {0, 1, 0}), 2.0 / 3);
  EXPECT_DOUBLE_EQ(accuracy(std::vector<int>{1, 1}, std::vector<int>{1, 0}), 0.5);
}

TEST(Selection, RatesSumToOne) {
  const Dataset ds = testing::tiny_dataset({{"pos1 fill2 mark+0 .", 1}});
  const auto rates = selection_rates(ds, {Mask{1, 1, 1, 0}});
  EXPECT_DOUBLE_EQ(rates[static_cast<int>(TokenClass::kInformative)], 1.0 / 3);
  EXPECT_DOUBLE_EQ(rates[static_cast<int>(TokenClass::kMarker)], 1.0 / 3);
  EXPECT_DOUBLE_EQ(rates[static_cast<int>(TokenClass::kPunctuation)], 0.0);
  const auto none = selection_rates(ds, {Mask{0, 0, 0, 0}});
  for (double r : none) EXPECT_EQ(r, 0.0);
}

TEST(Selection, MarkerOnlySelectorHasMarkerRateOne) {
  const Dataset ds = testing::tiny_dataset({{"fill1 mark+0 pos2", 1}, {"mark-0 neg1 fill3", 0}});
  EXPECT_DOUBLE_EQ(*marker_selection_rate(ds, {Mask{0, 1, 0}, Mask{1, 0, 0}}), 1.0);
  const auto report = degeneration_report({{Mask{0, 1, 0}, Mask{1, 0, 0}}}, ds);
  EXPECT_DOUBLE_EQ(report[0][static_cast<int>(TokenClass::kMarker)], 1.0);
  const Dataset plain = testing::tiny_dataset({{"fill1 pos2", 1}});
  EXPECT_FALSE(marker_selection_rate(plain, {Mask{1, 1}}));
}

TEST(Evaluate, RunsInEvalModeAndScoresGold) {
  Dataset ds = testing::tiny_dataset({{"a b c", 1}, {"d e", 0}, {"a d e b", 1}});
  for (auto& ex : ds.examples) ex.gold_mask = Mask(ex.tokens.size(), 1);
  const auto model = testing::small_model(ds, 1);
  const Evaluation a = evaluate(model, ds, 2, 100);
  const Evaluation b = evaluate(model, ds, 3, 100);
  EXPECT_EQ(a.masks, b.masks);
  EXPECT_EQ(a.predictions, b.predictions);
  ASSERT_TRUE(a.metrics.overlap);
  // All-ones gold: precision is 1 whenever anything is selected.
  if (a.metrics.sparsity > 0) EXPECT_DOUBLE_EQ(a.metrics.overlap->precision, 1.0);
  double selected = 0, tokens = 0;
  for (const auto& m : a.masks) {
    for (auto x : m) selected += x;
    tokens += static_cast<double>(m.size());
  }
  EXPECT_DOUBLE_EQ(a.metrics.overlap->recall, selected / tokens);
}

TEST(Evaluate, TruncationWarnsAndComparesPrefix) {
  Dataset ds = testing::tiny_dataset({{"a b c d e", 1}});
  ds.examples[0].gold_mask = Mask{0, 0, 0, 1, 1};
  const auto model = testing::small_model(ds, 1);
  const Evaluation ev = evaluate(model, ds, 4, 3);
  EXPECT_EQ(ev.masks[0].size(), 3u);
  EXPECT_FALSE(ev.warnings.empty());
}

TEST(Render, HtmlMarksPredictionAndGold) {
  Dataset ds = testing::tiny_dataset({{"the beer smells", 1}});
  ds.examples[0].gold_mask = Mask{0, 0, 1};
  const std::string html = render_rationales(ds, {Mask{0, 1, 1}}, 1, RenderFormat::kHtml);
  EXPECT_NE(html.find("<html"), std::string::npos);
  EXPECT_NE(html.find("class=\"pred\""), std::string::npos);
  EXPECT_NE(html.find("gold"), std::string::npos);
  EXPECT_NE(html.find("smells"), std::string::npos);
  EXPECT_TRUE(render_rationales(ds, {Mask{0, 1, 1}}, 0, RenderFormat::kAnsi).empty());
  const std::string ansi = render_rationales(ds, {Mask{0, 1, 1}}, 5, RenderFormat::kAnsi);
  EXPECT_NE(ansi.find("\x1b["), std::string::npos);
}

}  // namespace
}  // namespace rationalift

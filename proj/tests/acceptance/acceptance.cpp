// Runs the acceptance criteria and prints one PASS/FAIL/SKIP line for each.
// Exit status is non-zero when any criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "rationalift/evaluation.h"
#include "rationalift/objective.h"
#include "rationalift/probes.h"
#include "rationalift/run_config.h"
#include "rationalift/synthetic.h"
#include "rationalift/training.h"

namespace rl = rationalift;

namespace {

enum class Outcome { kPass, kFail, kSkip };

struct Verdict {
  Outcome outcome;
  std::string detail;
};

void info(const char* fmt, auto... args) {
  std::printf("    ");
  std::printf(fmt, args...);
  std::printf("\n");
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------- criterion 1

double omega_oracle(const std::vector<double>& m, double alpha, double l1, double l2) {
  double sum = 0, trans = 0;
  for (std::size_t t = 0; t < m.size(); ++t) {
    sum += m[t];
    if (t > 0) trans += std::abs(m[t] - m[t - 1]);
  }
  return l1 * std::abs(sum / static_cast<double>(m.size()) - alpha) + l2 * trans;
}

Verdict objective_correctness() {
  rl::ObjectiveConfig cfg;
  cfg.alpha = 0.5;
  rl::Matrix m(4, 1);
  m << 1, 0, 1, 0;
  const double hand = rl::sparsity_coherence(m, {4}, cfg).value;
  info("hand example: omega = %.17g (expected 3)", hand);

  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0;
  int checked = 0;
  while (checked < 100) {
    const int len = 4 + static_cast<int>(rng() % 12);
    rl::ObjectiveConfig c;
    c.alpha = 0.1 + 0.5 * u(rng);
    c.lambda1 = 0.5 + u(rng);
    c.lambda2 = 0.5 + u(rng);
    std::vector<double> v(static_cast<std::size_t>(len));
    for (auto& x : v) x = u(rng);
    const double h = 1e-6;
    // stay away from |.| kinks so central differences are valid
    bool near_kink = std::abs(std::accumulate(v.begin(), v.end(), 0.0) / len - c.alpha) < 1e-3;
    for (int t = 1; t < len; ++t) near_kink |= std::abs(v[t] - v[t - 1]) < 1e-3;
    if (near_kink) continue;
    rl::Matrix mm(len, 1);
    for (int t = 0; t < len; ++t) mm(t, 0) = v[static_cast<std::size_t>(t)];
    const auto term = rl::sparsity_coherence(mm, {len}, c);
    const int t = static_cast<int>(rng() % static_cast<unsigned>(len));
    auto plus = v, minus = v;
    plus[static_cast<std::size_t>(t)] += h;
    minus[static_cast<std::size_t>(t)] -= h;
    const double fd = (omega_oracle(plus, c.alpha, c.lambda1, c.lambda2) -
                       omega_oracle(minus, c.alpha, c.lambda1, c.lambda2)) / (2 * h);
    const double rel = std::abs(fd - term.grad(t, 0)) / std::max(1e-8, std::abs(fd));
    worst = std::max(worst, rel);
    ++checked;
  }
  info("finite differences: %d points, worst relative error %.3g", checked, worst);
  const bool ok = hand == 3.0 && worst <= 1e-5;
  return {ok ? Outcome::kPass : Outcome::kFail, fmt("omega=%g, fd worst rel %.2g", hand, worst)};
}

// ---------------------------------------------------------------- criterion 2

Verdict sampling_correctness() {
  const int n = 10000;
  bool ok = true;
  std::string detail;
  for (double p : {0.1, 0.5, 0.9}) {
    rl::Matrix probs = rl::Matrix::Constant(1, n, p);
    rl::Matrix real = rl::Matrix::Ones(1, n);
    const auto s = rl::sample_mask_from_probs(probs, real, 1.0, rl::Mode::kTrain, 77);
    const double freq = s.hard.sum() / n;
    info("p = %.1f: selected frequency %.4f over %d draws", p, freq, n);
    ok &= std::abs(freq - p) <= 0.02;
    detail += fmt("p%.1f->%.3f ", p, freq);
  }
  rl::Matrix probs(1, 6), real = rl::Matrix::Ones(1, 6);
  probs << 0.9, 0.3, 0.5, 0.5000001, 0.4999999, 1.0;
  const auto e = rl::sample_mask_from_probs(probs, real, 1.0, rl::Mode::kEval, 1);
  rl::Matrix expect(1, 6);
  expect << 1, 0, 0, 1, 0, 1;
  const bool exact = e.hard == expect;
  info("eval threshold exact: %s", exact ? "yes" : "no");
  return {ok && exact ? Outcome::kPass : Outcome::kFail, detail + (exact ? "eval exact" : "eval wrong")};
}

// ---------------------------------------------------------------- criterion 3

Verdict metric_oracle() {
  std::mt19937_64 rng(99);
  std::vector<rl::Mask> pred, gold;
  long tp = 0, np = 0, ng = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t len = 1 + rng() % 30;
    rl::Mask p(len), g(len);
    std::set<std::size_t> ps, gs;
    for (std::size_t t = 0; t < len; ++t) {
      p[t] = rng() % 3 == 0;
      g[t] = rng() % 4 == 0;
      if (p[t]) ps.insert(t);
      if (g[t]) gs.insert(t);
    }
    std::vector<std::size_t> both;
    std::set_intersection(ps.begin(), ps.end(), gs.begin(), gs.end(), std::back_inserter(both));
    tp += static_cast<long>(both.size());
    np += static_cast<long>(ps.size());
    ng += static_cast<long>(gs.size());
    pred.push_back(p);
    gold.push_back(g);
  }
  const double prec = np ? static_cast<double>(tp) / np : 0.0;
  const double rec = ng ? static_cast<double>(tp) / ng : 0.0;
  const double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
  const auto got = rl::token_prf(pred, gold);
  info("oracle P %.17g R %.17g F1 %.17g", prec, rec, f1);
  info("library P %.17g R %.17g F1 %.17g", got.precision, got.recall, got.f1);
  const bool ok = got.precision == prec && got.recall == rec && got.f1 == f1;
  return {ok ? Outcome::kPass : Outcome::kFail, fmt("F1 %.6f vs oracle %.6f", got.f1, f1)};
}

// ------------------------------------------------------------ synthetic setup

rl::ModelConfig model_config(int share_depth) {
  rl::ModelConfig mc;
  mc.embedding_dim = 100;
  mc.hidden_dim = 200;
  mc.share_depth = share_depth;
  mc.train_embeddings = true;
  return mc;
}

rl::TrainConfig train_config(int epochs, std::uint64_t seed) {
  rl::TrainConfig tc;
  tc.epochs = epochs;
  tc.seed = seed;
  tc.batch_size = 64;
  tc.lr_gen = tc.lr_pred = 2e-3;
  tc.objective.alpha = 0.15;
  tc.objective.lambda1 = 3.0;
  tc.objective.lambda2 = 0.05;
  return tc;
}

rl::SynthCorpus corpus(double marker_correlation) {
  rl::SynthConfig sc;
  sc.vocab_size = 100;
  sc.doc_length = 20;
  sc.span_length = 3;
  sc.marker_correlation = marker_correlation;
  return rl::synth_generate(sc);
}

rl::RationaleModel make_model(const rl::SynthCorpus& c, int share_depth, std::uint64_t seed) {
  rl::Vocabulary v = rl::build_vocab({&c.train, &c.dev, &c.annotation});
  const auto mc = model_config(share_depth);
  rl::EmbeddingTable e = rl::random_embeddings(v, mc.embedding_dim, 1.0, seed);
  return rl::RationaleModel::build(mc, std::move(v), std::move(e), seed);
}

rl::TrainData data_of(const rl::SynthCorpus& c) { return {&c.train, &c.dev, &c.annotation}; }

// ---------------------------------------------------------------- criterion 4

Verdict sharing_invariant() {
  const auto c = corpus(0.0);
  auto fr = make_model(c, 1, 1);
  const auto rnp = make_model(c, 0, 1);
  auto tc = train_config(1, 1);
  tc.batch_size = 20;  // 2000 examples -> 100 steps
  bool identical = true;
  rl::train(fr, data_of(c), tc, [&](const rl::EpochRecord&) { identical &= rl::shared_views_identical(fr); });
  identical &= rl::shared_views_identical(fr);
  Eigen::Index stack = 0;
  for (const auto& l : rnp.predictor_encoder().layers()) stack += l->parameter_count();
  const auto a = fr.param_count().total, b = rnp.param_count().total;
  info("100 steps, shared views identical: %s", identical ? "yes" : "no");
  info("params FR %ld, RNP %ld, one stack %ld", static_cast<long>(a), static_cast<long>(b),
       static_cast<long>(stack));
  const bool ok = identical && a == b - stack;
  return {ok ? Outcome::kPass : Outcome::kFail, fmt("identical=%d, FR=%ld RNP-stack=%ld", identical,
                                                     static_cast<long>(a), static_cast<long>(b - stack))};
}

// ---------------------------------------------------------------- criterion 5

struct Recovery {
  std::optional<rl::RationaleModel> model;  // FR model of the first seed, for criterion 8
  rl::SynthCorpus corpus;
};

Verdict synthetic_recovery(Recovery& keep) {
  keep.corpus = corpus(0.0);
  int selected_hits = 0, reached_hits = 0;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    auto m = make_model(keep.corpus, 1, seed);
    double best_any = 0;
    int first_reach = -1;
    const auto r = rl::train(m, data_of(keep.corpus), train_config(30, seed), [&](const rl::EpochRecord& e) {
      const double f1 = e.annotation->overlap->f1;
      if (f1 >= 0.9 && first_reach < 0) first_reach = e.epoch;
      best_any = std::max(best_any, f1);
    });
    const auto& sel = r.history.epochs[*r.best_epoch];
    info("seed %lu: selected epoch %zu F1 %.3f (S %.3f, dev acc %.3f); best epoch F1 %.3f, first >= 0.9 at epoch %d",
         static_cast<unsigned long>(seed), *r.best_epoch, r.best_f1(), sel.dev_sparsity, sel.dev_accuracy,
         best_any, first_reach);
    selected_hits += r.best_f1() >= 0.9;
    reached_hits += first_reach >= 0;
    detail += fmt("%.3f ", r.best_f1());
    if (!keep.model) keep.model = std::move(m);
  }
  info("seeds with selected-model F1 >= 0.9: %d/3; seeds reaching 0.9 at some epoch: %d/3", selected_hits,
       reached_hits);
  return {selected_hits >= 2 ? Outcome::kPass : Outcome::kFail, "selected F1 " + detail};
}

// ---------------------------------------------------------------- criterion 6

Verdict degeneration_contrast() {
  const auto c = corpus(1.0);
  std::vector<double> rnp_f1, fr_f1;
  bool trained = true;
  for (int share : {0, 1}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      auto m = make_model(c, share, seed);
      rl::SkewConfig sk;
      sk.kind = rl::SkewKind::kGenerator;
      sk.k = 0.9;
      sk.batch_size = 500;
      sk.lr = 1e-3;
      sk.seed = seed;
      const auto pre = rl::pretrain_skewed_generator(m, c.train, c.dev, sk);
      const auto r = rl::train(m, data_of(c), train_config(15, seed));
      const auto& sel = r.history.epochs[*r.best_epoch];
      info("%s seed %lu: pre_acc %.3f after %ld steps; selected F1 %.3f, dev acc %.3f, S %.3f, marker rate %.3f",
           share ? "FR " : "RNP", static_cast<unsigned long>(seed), *pre.pre_acc, pre.steps_run, r.best_f1(),
           sel.dev_accuracy, sel.dev_sparsity, sel.marker_rate.value_or(0.0));
      trained &= sel.dev_accuracy >= 0.9 && *pre.pre_acc >= 0.9;
      (share ? fr_f1 : rnp_f1).push_back(r.best_f1());
    }
  }
  const double rnp = rl::median(rnp_f1), fr = rl::median(fr_f1);
  info("median F1: RNP %.3f (need <= 0.4), FR %.3f (need >= 0.75); dev acc >= 0.9 everywhere: %s", rnp, fr,
       trained ? "yes" : "no");
  const bool ok = rnp <= 0.4 && fr >= 0.75 && trained;
  return {ok ? Outcome::kPass : Outcome::kFail, fmt("RNP %.3f FR %.3f", rnp, fr)};
}

// ---------------------------------------------------------------- criterion 7

Verdict learning_rate_asymmetry() {
  const auto c = corpus(0.0);
  const double lr = 2e-3;
  const auto cells = rl::lr_grid([&](std::uint64_t s) { return make_model(c, 0, s); }, data_of(c),
                                 train_config(10, 1), {lr}, {lr / 5, lr * 5}, {1, 2, 3, 4, 5});
  for (const auto& cell : cells) {
    std::string per;
    for (double f : cell.f1) per += fmt("%.3f ", f);
    info("lr_gen %g lr_pred %g: F1 %s-> median %.3f", cell.lr_gen, cell.lr_pred, per.c_str(), cell.median_f1);
  }
  const double slow = cells[0].median_f1, fast = cells[1].median_f1;
  return {slow >= fast ? Outcome::kPass : Outcome::kFail, fmt("median F1 %.3f vs %.3f", slow, fast)};
}

// ---------------------------------------------------------------- criterion 8

Verdict probes(const Recovery& keep) {
  if (!keep.model) return {Outcome::kFail, "no model from criterion 5"};
  const auto& m = *keep.model;
  const auto u = rl::uninformative_rationale_probe(m, keep.corpus.annotation, 1);
  info("filler-only pairs median distance %.4g, opposite informative median %.4g, ratio %.4f (need < 0.2)",
       u.filler_median, u.informative_median, u.ratio);
  const auto l3 = rl::lemma3_probe(m, rl::synthetic_probe_sentences(m.vocab(), 20, 1));
  const auto& s = l3.summary.front();
  info("representation shift: uninformative %.4g, informative %.4g, ratio %.4f (need < 0.5); directional %.4f",
       s.mean_uninformative, s.mean_informative, s.ratio, s.ratio_directional);
  const bool ok = u.ratio < 0.2 && s.ratio < 0.5;
  return {ok ? Outcome::kPass : Outcome::kFail, fmt("output ratio %.3f, representation ratio %.3f", u.ratio, s.ratio)};
}

// ---------------------------------------------------------------- criterion 9

// Opt-in: RATIONALIFT_BEER_CONFIG names a key-value run config whose data.*
// keys point at the Beer-Appearance files and pretrained vectors.
Verdict full_scale() {
  const char* path = std::getenv("RATIONALIFT_BEER_CONFIG");
  if (!path || !*path) return {Outcome::kSkip, "RATIONALIFT_BEER_CONFIG not set"};
  auto kv = rl::read_key_values(path);
  kv["mode"] = "fr";
  const auto cfg = rl::resolve_config(kv);
  if (cfg.data.source != rl::DataSource::kFiles || cfg.data.annotation_path.empty()) {
    return {Outcome::kSkip, "config does not name corpus files"};
  }
  const auto train = rl::load_reviews(cfg.data.train_path, cfg.data.aspect, cfg.data.domain, rl::Split::kTrain,
                                      cfg.synth.seed);
  const auto dev = rl::load_reviews(cfg.data.dev_path, cfg.data.aspect, cfg.data.domain, rl::Split::kDev,
                                    cfg.synth.seed);
  const auto ann = rl::load_annotations(cfg.data.annotation_path, cfg.data.domain, cfg.data.aspect);
  rl::Vocabulary v = rl::build_vocab({&train, &dev, &ann}, cfg.data.min_freq);
  rl::EmbeddingTable e =
      cfg.data.embeddings_path.empty()
          ? rl::random_embeddings(v, cfg.model.embedding_dim, cfg.data.embedding_scale, cfg.seed)
          : rl::load_embeddings(cfg.data.embeddings_path, cfg.model.embedding_dim, v, cfg.seed);
  auto m = rl::RationaleModel::build(cfg.model, std::move(v), std::move(e), cfg.seed);
  rl::train(m, {&train, &dev, &ann}, cfg.train);
  const auto ev = rl::evaluate(m, ann, cfg.train.eval_batch_size, cfg.train.max_len);
  const double f1 = 100 * ev.metrics.overlap->f1, s = 100 * ev.metrics.sparsity;
  info("annotation F1 %.1f (target 82.8 +- 3), S %.1f (target 18.4 +- 2)", f1, s);
  const bool ok = std::abs(f1 - 82.8) <= 3 && std::abs(s - 18.4) <= 2;
  return {ok ? Outcome::kPass : Outcome::kFail, fmt("F1 %.1f S %.1f", f1, s)};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  auto wanted = [&](int n) { return only.empty() || only.contains(n) || (n == 5 && only.contains(8)); };

  Recovery keep;
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"objective correctness", objective_correctness},
      {"sampling correctness", sampling_correctness},
      {"metric oracle", metric_oracle},
      {"sharing invariant", sharing_invariant},
      {"synthetic rationale recovery", [&] { return synthetic_recovery(keep); }},
      {"degeneration contrast", degeneration_contrast},
      {"learning-rate asymmetry", learning_rate_asymmetry},
      {"uninformative-token probes", [&] { return probes(keep); }},
      {"full-scale beer appearance (optional)", full_scale},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i) + 1;
    if (!wanted(n)) continue;
    std::printf("[%d] %s\n", n, criteria[i].first.c_str());
    std::fflush(stdout);
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {Outcome::kFail, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const char* tag = v.outcome == Outcome::kPass ? "PASS" : v.outcome == Outcome::kFail ? "FAIL" : "SKIP";
    std::printf("%s criterion %d: %s (%s) [%.1fs]\n", tag, n, criteria[i].first.c_str(), v.detail.c_str(), secs);
    std::fflush(stdout);
    failures += v.outcome == Outcome::kFail;
  }
  return failures == 0 ? 0 : 1;
}

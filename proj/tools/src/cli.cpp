#include "rationalift_cli/cli.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "rationalift/checkpoint.h"
#include "rationalift/error.h"
#include "rationalift/evaluation.h"
#include "rationalift/probes.h"
#include "rationalift/run_config.h"
#include "rationalift/synthetic.h"
#include "rationalift/training.h"

namespace rationalift::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

constexpr const char* kManifest = "manifest.json";
constexpr const char* kMetrics = "metrics.jsonl";
constexpr const char* kFinal = "final.json";
constexpr const char* kCheckpoint = "checkpoint";
constexpr const char* kReports = "reports";
constexpr const char* kConfigEcho = "config.cfg";

// Flags shared by every command that resolves a run configuration.
struct CommonFlags {
  std::string config;
  std::string out;
  std::optional<std::string> mode;
  std::optional<int> share_depth;
  std::optional<std::uint64_t> seed;
  std::optional<double> lr_gen;
  std::optional<double> lr_pred;
  std::optional<int> epochs;
  std::vector<std::string> set;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "Key-value config file");
    app->add_option("--out", out, "Output directory (default: $RATIONALIFT_OUT or ./runs, plus a run name)");
    app->add_option("--mode", mode, "fr folds all encoder layers, rnp shares none")
        ->check(CLI::IsMember({"fr", "rnp"}));
    app->add_option("--share-depth", share_depth, "Leading encoder layers shared by both players");
    app->add_option("--seed", seed, "Run seed");
    app->add_option("--lr-gen", lr_gen, "Generator learning rate");
    app->add_option("--lr-pred", lr_pred, "Predictor learning rate");
    app->add_option("--epochs", epochs, "Training epochs");
    app->add_option("--set", set, "Extra KEY=VALUE config overrides (repeatable)");
  }

  // Flag > config file > default.
  KeyValues merged(KeyValues extra = {}) const {
    KeyValues kv;
    if (!config.empty()) kv = read_key_values(config);
    for (const auto& s : set) {
      const auto eq = s.find('=');
      if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects KEY=VALUE, got '" + s + "'");
      kv[s.substr(0, eq)] = s.substr(eq + 1);
    }
    if (mode) {
      kv["mode"] = *mode;
      if (!share_depth) kv.erase("model.share_depth");
    }
    if (share_depth) kv["model.share_depth"] = std::to_string(*share_depth);
    if (seed) kv["seed"] = std::to_string(*seed);
    if (lr_gen) kv["train.lr_gen"] = format_double(*lr_gen);
    if (lr_pred) kv["train.lr_pred"] = format_double(*lr_pred);
    if (epochs) kv["train.epochs"] = std::to_string(*epochs);
    for (auto& [k, v] : extra) kv[k] = v;
    return kv;
  }
};

fs::path output_root() {
  if (const char* env = std::getenv("RATIONALIFT_OUT"); env && *env) return env;
  return "runs";
}

fs::path output_dir(const std::string& flag, const std::string& default_name) {
  return flag.empty() ? output_root() / default_name : fs::path(flag);
}

void write_json(const fs::path& path, const ordered_json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

ordered_json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  return ordered_json::parse(in);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

ordered_json to_json(const KeyValues& kv) {
  ordered_json j = ordered_json::object();
  for (const auto& [k, v] : kv) j[k] = v;
  return j;
}

double six(double x) { return std::round(x * 1e6) / 1e6; }

// Fractions at six decimals; P/R/F1 only when gold masks exist.
ordered_json to_json(const RationaleMetrics& m) {
  ordered_json j;
  j["S"] = six(m.sparsity);
  j["Acc"] = six(m.accuracy);
  if (m.overlap) {
    j["P"] = six(m.overlap->precision);
    j["R"] = six(m.overlap->recall);
    j["F1"] = six(m.overlap->f1);
  }
  return j;
}

void write_masks(const Dataset& ds, const std::vector<Mask>& masks, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  for (std::size_t i = 0; i < masks.size(); ++i) {
    std::string bits;
    for (auto b : masks[i]) bits += b ? '1' : '0';
    out << ordered_json{{"id", ds.examples[i].id}, {"mask", bits}}.dump() << '\n';
  }
}

ordered_json to_json(const ClassRates& rates) {
  ordered_json j;
  for (int c = 0; c < kTokenClassCount; ++c) {
    j[std::string(to_string(static_cast<TokenClass>(c)))] = rates[static_cast<std::size_t>(c)];
  }
  return j;
}

ordered_json to_json(const EpochRecord& r) {
  ordered_json j;
  j["epoch"] = r.epoch;
  j["train_ce"] = r.train_ce;
  j["train_omega"] = r.train_omega;
  j["train_loss"] = r.train_loss;
  j["dev_accuracy"] = r.dev_accuracy;
  j["dev_sparsity"] = r.dev_sparsity;
  if (r.annotation) {
    j["annotation"] = to_json(*r.annotation);
    if (r.annotation->overlap) j["F1"] = six(r.annotation->overlap->f1);
  }
  if (r.marker_rate) j["marker_rate"] = *r.marker_rate;
  j["selection"] = to_json(r.selection);
  return j;
}

// Corpus splits and vocabulary for one run.
struct RunData {
  Dataset train;
  Dataset dev;
  std::optional<Dataset> annotation;
  Dataset marker_pretrain;  // only for marker-view predictor skew on synthetic data
};

RunData load_data(const ExperimentConfig& cfg, bool want_marker_pretrain = false) {
  RunData d;
  if (cfg.data.source == DataSource::kSynthetic) {
    auto corpus = synth_generate(cfg.synth);
    d.train = std::move(corpus.train);
    d.dev = std::move(corpus.dev);
    d.annotation = std::move(corpus.annotation);
    if (want_marker_pretrain) {
      SynthConfig sc = cfg.synth;
      sc.marker_correlation = cfg.skew_marker_correlation;
      d.marker_pretrain = synth_generate(sc).train;
    }
    return d;
  }
  if (cfg.data.train_path.empty() || cfg.data.dev_path.empty()) {
    throw ConfigError("data.source = files needs data.train and data.dev");
  }
  d.train = load_reviews(cfg.data.train_path, cfg.data.aspect, cfg.data.domain, Split::kTrain,
                         cfg.synth.seed);
  d.dev = load_reviews(cfg.data.dev_path, cfg.data.aspect, cfg.data.domain, Split::kDev,
                       cfg.synth.seed);
  if (!cfg.data.annotation_path.empty()) {
    d.annotation = load_annotations(cfg.data.annotation_path, cfg.data.domain, cfg.data.aspect);
  }
  if (want_marker_pretrain) d.marker_pretrain = d.train;
  return d;
}

RationaleModel build_model(const ExperimentConfig& cfg, const RunData& d, std::uint64_t seed) {
  std::vector<const Dataset*> sets{&d.train, &d.dev};
  if (d.annotation) sets.push_back(&*d.annotation);
  if (!d.marker_pretrain.examples.empty()) sets.push_back(&d.marker_pretrain);
  Vocabulary vocab = build_vocab(sets, cfg.data.min_freq);
  EmbeddingTable emb =
      cfg.data.embeddings_path.empty()
          ? random_embeddings(vocab, cfg.model.embedding_dim, cfg.data.embedding_scale, seed)
          : load_embeddings(cfg.data.embeddings_path, cfg.model.embedding_dim, vocab, seed);
  return RationaleModel::build(cfg.model, std::move(vocab), std::move(emb), seed);
}

struct Artifacts {
  fs::path dir;
  fs::path manifest() const { return dir / kManifest; }
  fs::path metrics() const { return dir / kMetrics; }
  fs::path final_metrics() const { return dir / kFinal; }
  fs::path checkpoint() const { return dir / kCheckpoint; }
  fs::path reports() const { return dir / kReports; }
  fs::path config() const { return dir / kConfigEcho; }
};

ordered_json base_manifest(const std::string& command, const KeyValues& echo,
                           const ExperimentConfig& cfg, const Artifacts& a) {
  ordered_json m;
  m["command"] = command;
  m["status"] = "running";
  m["seed"] = cfg.seed;
  m["out_dir"] = a.dir.string();
  m["config"] = to_json(echo);
  m["artifacts"] = {{"config", a.config().string()},
                    {"checkpoint", a.checkpoint().string()},
                    {"metrics", a.metrics().string()},
                    {"final", a.final_metrics().string()},
                    {"reports", a.reports().string()}};
  m["replay"] = "rationalift " + command + " --config " + a.config().string() + " --out " + a.dir.string();
  return m;
}

// Joint training plus final evaluation; fills the manifest's result fields.
void train_and_report(RationaleModel& model, const RunData& d, const ExperimentConfig& cfg,
                      const Artifacts& a, const KeyValues& echo, ordered_json& manifest,
                      std::ostream& out) {
  std::ofstream metrics(a.metrics());
  if (!metrics) throw ConfigError("cannot write " + a.metrics().string());
  TrainData td{&d.train, &d.dev, d.annotation ? &*d.annotation : nullptr};
  const auto result = train(model, td, cfg.train, [&](const EpochRecord& r) {
    metrics << to_json(r).dump() << '\n' << std::flush;
    out << "epoch " << r.epoch << " loss " << r.train_loss << " dev_acc " << r.dev_accuracy
        << " dev_S " << r.dev_sparsity;
    if (r.annotation && r.annotation->overlap) out << " F1 " << r.annotation->overlap->f1;
    out << '\n';
  });
  save_checkpoint(a.checkpoint(), model, echo);

  ordered_json fin;
  fin["dev"] = to_json(evaluate(model, d.dev, cfg.train.eval_batch_size, cfg.train.max_len).metrics);
  if (d.annotation) {
    fin["annotation"] =
        to_json(evaluate(model, *d.annotation, cfg.train.eval_batch_size, cfg.train.max_len).metrics);
  }
  if (result.best_epoch) fin["best_epoch"] = *result.best_epoch;
  write_json(a.final_metrics(), fin);

  manifest["status"] = "done";
  if (result.best_epoch) manifest["best_epoch"] = *result.best_epoch;
  write_json(a.manifest(), manifest);
}

Artifacts prepare_run(const fs::path& dir, const KeyValues& echo) {
  Artifacts a{dir};
  fs::create_directories(a.reports());
  write_key_values(echo, a.config());
  return a;
}

std::string run_name(const std::string& command, const ExperimentConfig& cfg) {
  return command + "-" + cfg.mode + "-share" + std::to_string(cfg.model.share_depth) + "-seed" +
         std::to_string(cfg.seed);
}

int cmd_train(const CommonFlags& flags, std::ostream& out) {
  const ExperimentConfig cfg = resolve_config(flags.merged());
  const KeyValues echo = echo_config(cfg);
  const Artifacts a = prepare_run(output_dir(flags.out, run_name("train", cfg)), echo);
  ordered_json manifest = base_manifest("train", echo, cfg, a);
  write_json(a.manifest(), manifest);

  const RunData d = load_data(cfg);
  RationaleModel model = build_model(cfg, d, cfg.seed);
  train_and_report(model, d, cfg, a, echo, manifest, out);
  out << "wrote " << a.dir.string() << '\n';
  return kOk;
}

int cmd_skew(const CommonFlags& flags, const std::optional<std::string>& kind,
             const std::optional<double>& k, std::ostream& out) {
  KeyValues extra;
  if (kind) extra["skew.kind"] = *kind;
  if (k) extra["skew.k"] = format_double(*k);
  const ExperimentConfig cfg = resolve_config(flags.merged(extra));
  cfg.skew.validate();
  const KeyValues echo = echo_config(cfg);
  const bool generator = cfg.skew.kind == SkewKind::kGenerator;
  const Artifacts a = prepare_run(
      output_dir(flags.out, run_name(std::string("skew-") + (generator ? "gen" : "pred"), cfg)), echo);
  ordered_json manifest = base_manifest("skew", echo, cfg, a);
  write_json(a.manifest(), manifest);

  const bool marker_view = !generator && cfg.skew_view == SkewView::kMarker;
  const RunData d = load_data(cfg, marker_view);
  RationaleModel model = build_model(cfg, d, cfg.seed);

  ordered_json skew;
  skew["kind"] = generator ? "generator" : "predictor";
  skew["k"] = cfg.skew.k;
  if (generator) {
    const auto r = pretrain_skewed_generator(model, d.train, d.dev, cfg.skew);
    skew["pre_acc"] = *r.pre_acc;
    skew["steps"] = r.steps_run;
    skew["epochs"] = r.epochs_run;
    out << "generator pretraining reached accuracy " << *r.pre_acc << " after " << r.steps_run
        << " steps\n";
  } else {
    const Dataset& pre = marker_view ? d.marker_pretrain : d.train;
    const PretrainMask view = marker_view ? PretrainMask(marker_only_mask)
                                          : PretrainMask([](const Example& e) { return first_sentence_mask(e); });
    const auto r = pretrain_skewed_predictor(model, pre, cfg.skew, view);
    skew["view"] = marker_view ? "marker" : "first_sentence";
    skew["pretraining_epochs"] = r.epochs_run;
    skew["steps"] = r.steps_run;
    out << "predictor pretraining ran " << r.epochs_run << " epochs\n";
  }
  manifest["skew"] = skew;
  write_json(a.manifest(), manifest);

  train_and_report(model, d, cfg, a, echo, manifest, out);
  out << "wrote " << a.dir.string() << '\n';
  return kOk;
}

std::string cell_name(double lr_gen, double lr_pred, std::uint64_t seed) {
  return "gen" + format_double(lr_gen) + "_pred" + format_double(lr_pred) + "_seed" +
         std::to_string(seed);
}

bool cell_done(const fs::path& dir) {
  const fs::path m = dir / kManifest;
  if (!fs::exists(m) || !fs::exists(dir / kFinal)) return false;
  return read_json(m).value("status", "") == "done";
}

double cell_f1(const fs::path& dir) {
  const auto fin = read_json(dir / kFinal);
  if (fin.contains("annotation") && fin["annotation"].contains("F1")) return fin["annotation"]["F1"];
  return 0.0;
}

int cmd_grid(const CommonFlags& flags, const std::vector<double>& gen_rates,
             const std::vector<double>& pred_rates, const std::vector<std::uint64_t>& seeds,
             std::ostream& out) {
  auto join = [](const auto& xs, auto fmt) {
    std::string s;
    for (const auto& x : xs) s += (s.empty() ? "" : ",") + fmt(x);
    return s;
  };
  KeyValues extra;
  if (!gen_rates.empty()) extra["grid.gen_rates"] = join(gen_rates, format_double);
  if (!pred_rates.empty()) extra["grid.pred_rates"] = join(pred_rates, format_double);
  if (!seeds.empty()) {
    extra["grid.seeds"] = join(seeds, [](std::uint64_t s) { return std::to_string(s); });
  }
  KeyValues kv = flags.merged(extra);
  if (!kv.contains("mode") && !kv.contains("model.share_depth")) kv["mode"] = "rnp";
  const ExperimentConfig cfg = resolve_config(kv);
  if (cfg.grid_gen_rates.empty() || cfg.grid_pred_rates.empty()) {
    throw ConfigError("grid needs non-empty grid.gen_rates and grid.pred_rates");
  }
  for (const auto* rates : {&cfg.grid_gen_rates, &cfg.grid_pred_rates}) {
    for (double r : *rates) {
      if (!(r > 0)) throw ConfigError("grid rates must be positive, got " + format_double(r));
    }
  }
  if (cfg.model.share_depth != 0) throw ConfigError("grid runs the two-phase model; use --mode rnp");
  const std::vector<std::uint64_t> grid_seeds =
      cfg.grid_seeds.empty() ? std::vector<std::uint64_t>{cfg.seed} : cfg.grid_seeds;

  const KeyValues echo = echo_config(cfg);
  const fs::path dir = output_dir(flags.out, "grid-seed" + std::to_string(cfg.seed));
  const Artifacts a = prepare_run(dir, echo);
  ordered_json manifest = base_manifest("grid", echo, cfg, a);
  manifest["artifacts"]["csv"] = (dir / "grid.csv").string();
  manifest["artifacts"]["table"] = (a.reports() / "grid.txt").string();
  write_json(a.manifest(), manifest);

  std::ostringstream csv;
  csv << "lr_gen,lr_pred,seed,f1\n";
  std::vector<std::vector<double>> med(cfg.grid_gen_rates.size(),
                                       std::vector<double>(cfg.grid_pred_rates.size()));
  ordered_json cells = ordered_json::array();
  for (std::size_t i = 0; i < cfg.grid_gen_rates.size(); ++i) {
    for (std::size_t j = 0; j < cfg.grid_pred_rates.size(); ++j) {
      std::vector<double> f1s;
      for (std::uint64_t s : grid_seeds) {
        ExperimentConfig cell = cfg;
        cell.train.lr_gen = cfg.grid_gen_rates[i];
        cell.train.lr_pred = cfg.grid_pred_rates[j];
        cell.seed = cell.train.seed = cell.skew.seed = s;
        const fs::path cdir = dir / "cells" / cell_name(cell.train.lr_gen, cell.train.lr_pred, s);
        if (cell_done(cdir)) {
          out << "skip " << cdir.filename().string() << " (complete)\n";
        } else {
          const KeyValues cecho = echo_config(cell);
          const Artifacts ca = prepare_run(cdir, cecho);
          ordered_json cm = base_manifest("train", cecho, cell, ca);
          write_json(ca.manifest(), cm);
          const RunData d = load_data(cell);
          RationaleModel model = build_model(cell, d, s);
          out << "cell " << cdir.filename().string() << '\n';
          train_and_report(model, d, cell, ca, cecho, cm, out);
        }
        const double f1 = cell_f1(cdir);
        f1s.push_back(f1);
        csv << format_double(cell.train.lr_gen) << ',' << format_double(cell.train.lr_pred) << ','
            << s << ',' << format_double(f1) << '\n';
        cells.push_back(cdir.string());
      }
      med[i][j] = median(f1s);
    }
  }
  write_text(dir / "grid.csv", csv.str());

  std::ostringstream table;
  table << "median annotation F1 (rows lr_gen, columns lr_pred)\n" << std::setw(12) << "";
  for (double p : cfg.grid_pred_rates) table << std::setw(10) << format_double(p);
  table << '\n' << std::fixed << std::setprecision(3);
  for (std::size_t i = 0; i < cfg.grid_gen_rates.size(); ++i) {
    table << std::setw(12) << format_double(cfg.grid_gen_rates[i]);
    for (double v : med[i]) table << std::setw(10) << v;
    table << '\n';
  }
  write_text(a.reports() / "grid.txt", table.str());
  out << table.str();

  manifest["status"] = "done";
  manifest["cells"] = cells;
  write_json(a.manifest(), manifest);
  return kOk;
}

LoadedCheckpoint open_checkpoint(const std::string& path) {
  if (path.empty()) throw ConfigError("--checkpoint is required");
  return load_checkpoint(path);
}

// Config stored in the checkpoint, with command-line overrides on top.
ExperimentConfig checkpoint_config(const LoadedCheckpoint& ck, const CommonFlags& flags) {
  KeyValues kv = ck.echo;
  for (const auto& [k, v] : flags.merged()) kv[k] = v;
  return resolve_config(kv);
}

ordered_json to_json(const Matrix& m) {
  ordered_json rows = ordered_json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

std::string html_escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    if (c == '<') o += "&lt;";
    else if (c == '>') o += "&gt;";
    else if (c == '&') o += "&amp;";
    else o += c;
  }
  return o;
}

// Per-dimension bars of the first `dims` state entries of every token.
std::string state_bars(const SentenceProbe& s, const ViewProbe& v, int dims) {
  std::ostringstream h;
  const int n = std::min<int>(dims, static_cast<int>(v.states.rows()));
  const double scale = std::max(1e-12, v.states.topRows(n).cwiseAbs().maxCoeff());
  h << "<div class=\"bars\">";
  for (std::size_t t = 0; t < s.tokens.size(); ++t) {
    h << "<div class=\"tok\"><div class=\"lbl\">" << html_escape(s.tokens[t]) << "</div><svg width=\""
      << 4 * n << "\" height=\"60\">";
    for (int d = 0; d < n; ++d) {
      const double x = v.states(d, static_cast<Eigen::Index>(t)) / scale;
      const int len = static_cast<int>(std::round(std::abs(x) * 28));
      const int y = x >= 0 ? 30 - len : 30;
      h << "<rect x=\"" << 4 * d << "\" y=\"" << y << "\" width=\"3\" height=\"" << len
        << "\" fill=\"" << (x >= 0 ? "#c0392b" : "#2c6fbb") << "\"/>";
    }
    h << "</svg></div>";
  }
  h << "</div>\n";
  return h.str();
}

void lemma3_outputs(const ProbeReport& r, ordered_json& j, std::ostringstream& html) {
  j["sentences"] = ordered_json::array();
  for (const auto& s : r.sentences) {
    ordered_json js;
    js["tokens"] = s.tokens;
    js["uninformative"] = s.uninformative;
    js["views"] = ordered_json::array();
    html << "<h2>" << html_escape([&] {
      std::string t;
      for (const auto& w : s.tokens) t += (t.empty() ? "" : " ") + w;
      return t;
    }()) << "</h2>\n";
    for (const auto& v : s.views) {
      ordered_json jv;
      jv["view"] = v.view;
      jv["to_preceding"] = v.to_preceding;
      jv["to_preceding_directional"] = v.to_preceding_directional;
      jv["pairwise"] = to_json(v.pairwise);
      jv["states_first40"] = to_json(v.states.topRows(std::min<Eigen::Index>(40, v.states.rows())));
      js["views"].push_back(jv);

      html << "<h3>" << v.view << " encoder</h3>\n<table><tr><th></th>";
      for (const auto& w : s.tokens) html << "<th>" << html_escape(w) << "</th>";
      html << "</tr>\n" << std::fixed << std::setprecision(4);
      for (std::size_t a = 0; a < s.tokens.size(); ++a) {
        html << "<tr><th>" << html_escape(s.tokens[a]) << "</th>";
        for (std::size_t b = 0; b < s.tokens.size(); ++b) {
          html << "<td>" << v.pairwise(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) << "</td>";
        }
        html << "</tr>\n";
      }
      html << "</table>\n" << state_bars(s, v, 40);
    }
    j["sentences"].push_back(js);
  }
  j["summary"] = ordered_json::array();
  html << "<h2>summary</h2>\n<table><tr><th>view</th><th>uninformative</th><th>informative</th><th>ratio</th>"
          "<th>ratio (directional)</th></tr>\n";
  for (const auto& s : r.summary) {
    j["summary"].push_back({{"view", s.view},
                            {"mean_uninformative", s.mean_uninformative},
                            {"mean_informative", s.mean_informative},
                            {"ratio", s.ratio},
                            {"mean_uninformative_directional", s.mean_uninformative_directional},
                            {"mean_informative_directional", s.mean_informative_directional},
                            {"ratio_directional", s.ratio_directional}});
    html << "<tr><td>" << s.view << "</td><td>" << s.mean_uninformative << "</td><td>"
         << s.mean_informative << "</td><td>" << s.ratio << "</td><td>" << s.ratio_directional
         << "</td></tr>\n";
  }
  html << "</table>\n";
}

bool in_vocab(const Vocabulary& v, const std::vector<std::vector<std::string>>& sentences) {
  for (const auto& s : sentences) {
    for (const auto& t : s) {
      if (!v.find(t)) return false;
    }
  }
  return true;
}

std::vector<std::string> split_words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> words;
  for (std::string w; in >> w;) words.push_back(w);
  return words;
}

Dataset pick_split(const RunData& d, const std::string& split) {
  if (split == "train") return d.train;
  if (split == "dev") return d.dev;
  if (split == "annotation") {
    if (!d.annotation) throw ConfigError("no annotation split configured (data.annotation)");
    return *d.annotation;
  }
  throw ConfigError("unknown split '" + split + "'");
}

int cmd_probe(const CommonFlags& flags, const std::string& checkpoint, const std::string& probe,
              const std::vector<std::string>& sentences, const std::string& token,
              std::ostream& out) {
  if (probe != "lemma3" && probe != "insertion" && probe != "uninformative") {
    throw ConfigError("unknown probe '" + probe + "' (lemma3, insertion, uninformative)");
  }
  const LoadedCheckpoint ck = open_checkpoint(checkpoint);
  const ExperimentConfig cfg = checkpoint_config(ck, flags);
  const RationaleModel& model = ck.model;
  const fs::path dir = output_dir(flags.out, "probe-" + probe);
  fs::create_directories(dir / kReports);

  ordered_json j;
  j["probe"] = probe;
  j["checkpoint"] = checkpoint;
  j["share_depth"] = model.config().share_depth;
  std::ostringstream html;
  html << "<!doctype html><html><head><meta charset=\"utf-8\"><title>" << probe
       << " probe</title><style>body{font-family:sans-serif}td,th{padding:2px 6px;text-align:right}"
          ".bars{display:flex;flex-wrap:wrap;gap:8px}.lbl{font-size:12px}</style></head><body>\n";

  if (probe == "lemma3") {
    std::vector<std::vector<std::string>> sents;
    for (const auto& s : sentences) sents.push_back(split_words(s));
    if (sents.empty()) {
      sents = default_probe_sentences();
      if (!in_vocab(model.vocab(), sents)) sents = synthetic_probe_sentences(model.vocab(), 10, cfg.seed);
    }
    const auto r = lemma3_probe(model, sents);
    lemma3_outputs(r, j, html);
    for (const auto& s : r.summary) {
      out << s.view << ": uninformative/informative distance ratio " << s.ratio << " (directional "
          << s.ratio_directional << ")\n";
    }
  } else {
    const RunData d = load_data(cfg);
    if (probe == "insertion") {
      const Dataset base = d.annotation ? *d.annotation : d.dev;
      const std::string tok = !token.empty() ? token
                              : model.vocab().find(".") ? std::string(".")
                                                        : filler_token(0);
      const auto r = insertion_probe(model, base, tok, {0, -1});
      j["token"] = tok;
      j["deltas"] = r.deltas;
      j["median"] = r.median;
      j["max"] = r.max;
      html << "<h2>insertion of " << html_escape(tok) << "</h2><p>median delta " << r.median
           << ", max delta " << r.max << " over " << r.deltas.size() << " insertions</p>\n";
      out << "insertion of '" << tok << "': median " << r.median << " max " << r.max << '\n';
    } else {
      if (!d.annotation) throw ConfigError("the uninformative probe needs an annotation split");
      const auto r = uninformative_rationale_probe(model, *d.annotation, cfg.seed);
      j["filler_distances"] = r.filler_distances;
      j["informative_distances"] = r.informative_distances;
      j["filler_median"] = r.filler_median;
      j["informative_median"] = r.informative_median;
      j["ratio"] = r.ratio;
      j["filler_positive_fraction"] = r.filler_positive_fraction;
      html << "<h2>uninformative rationales</h2><p>filler median " << r.filler_median
           << ", informative median " << r.informative_median << ", ratio " << r.ratio << "</p>\n";
      out << "filler/informative output distance ratio " << r.ratio << '\n';
    }
  }
  html << "</body></html>\n";
  write_json(dir / kReports / ("probe-" + probe + ".json"), j);
  write_text(dir / kReports / ("probe-" + probe + ".html"), html.str());
  out << "wrote " << (dir / kReports).string() << '\n';
  return kOk;
}

int cmd_eval(const CommonFlags& flags, const std::string& checkpoint, const std::string& split,
             std::optional<std::size_t> render, const std::string& format, bool metrics,
             std::ostream& out) {
  const LoadedCheckpoint ck = open_checkpoint(checkpoint);
  const ExperimentConfig cfg = checkpoint_config(ck, flags);
  const RunData d = load_data(cfg);
  const std::string chosen = !split.empty() ? split : d.annotation ? "annotation" : "dev";
  const Dataset ds = pick_split(d, chosen);
  const fs::path dir = output_dir(flags.out, "eval-" + chosen);
  fs::create_directories(dir / kReports);

  const Evaluation ev = evaluate(ck.model, ds, cfg.train.eval_batch_size, cfg.train.max_len);
  for (const auto& w : ev.warnings) out << "warning: " << w << '\n';
  if (metrics) {
    ordered_json j = to_json(ev.metrics);
    j["split"] = chosen;
    write_json(dir / kFinal, j);
    write_masks(ds, ev.masks, dir / "masks.jsonl");
    out << j.dump() << '\n';
  }
  if (render) {
    const RenderFormat fmt = format == "ansi" ? RenderFormat::kAnsi : RenderFormat::kHtml;
    const fs::path path = dir / kReports / (format == "ansi" ? "render.txt" : "render.html");
    write_text(path, render_rationales(ds, ev.masks, *render, fmt));
    out << "wrote " << path.string() << '\n';
  }
  return kOk;
}

int cmd_synth(const CommonFlags& flags, std::ostream& out) {
  const ExperimentConfig cfg = resolve_config(flags.merged());
  const fs::path dir = output_dir(flags.out, "synth-seed" + std::to_string(cfg.synth.seed));
  fs::create_directories(dir);
  const auto corpus = synth_generate(cfg.synth);
  write_jsonl(corpus.train, dir / "train.jsonl");
  write_jsonl(corpus.dev, dir / "dev.jsonl");
  write_jsonl(corpus.annotation, dir / "annotation.jsonl");
  write_key_values(echo_config(cfg), dir / kConfigEcho);
  out << "wrote " << corpus.train.size() << "/" << corpus.dev.size() << "/"
      << corpus.annotation.size() << " examples to " << dir.string() << '\n';
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Selective rationalization with folded or two-phase encoders"};
  app.name("rationalift");
  app.require_subcommand(1, 1);

  CommonFlags train_flags, skew_flags, grid_flags, probe_flags, eval_flags, render_flags, synth_flags;

  auto* train_cmd = app.add_subcommand("train", "Joint training of generator and predictor");
  train_flags.attach(train_cmd);

  auto* skew_cmd = app.add_subcommand("skew", "Skewed pretraining followed by joint training");
  skew_flags.attach(skew_cmd);
  std::optional<std::string> kind;
  std::optional<double> k;
  skew_cmd->add_option("--kind", kind, "predictor or generator");
  skew_cmd->add_option("--k", k, "Pretraining epochs (predictor) or accuracy threshold (generator)");

  auto* grid_cmd = app.add_subcommand("grid", "Learning-rate grid over the two-phase model");
  grid_flags.attach(grid_cmd);
  std::vector<double> gen_rates, pred_rates;
  std::vector<std::uint64_t> seeds;
  grid_cmd->add_option("--gen-rates", gen_rates, "Generator learning rates")->delimiter(',');
  grid_cmd->add_option("--pred-rates", pred_rates, "Predictor learning rates")->delimiter(',');
  grid_cmd->add_option("--seeds", seeds, "Seeds per cell")->delimiter(',');

  auto* probe_cmd = app.add_subcommand("probe", "Representation and predictor probes on a checkpoint");
  probe_flags.attach(probe_cmd);
  std::string probe_ckpt, probe_name = "lemma3", probe_token;
  std::vector<std::string> probe_sentences;
  probe_cmd->add_option("--checkpoint", probe_ckpt, "Checkpoint file");
  probe_cmd->add_option("--probe", probe_name, "lemma3, insertion or uninformative");
  probe_cmd->add_option("--sentence", probe_sentences, "Whitespace-tokenized lemma3 sentence (repeatable)");
  probe_cmd->add_option("--token", probe_token, "Token inserted by the insertion probe");

  std::string eval_ckpt, eval_split, eval_format = "html";
  std::optional<std::size_t> eval_render;
  auto* eval_cmd = app.add_subcommand("eval", "Rationale metrics of a checkpoint on one split");
  eval_flags.attach(eval_cmd);
  eval_cmd->add_option("--checkpoint", eval_ckpt, "Checkpoint file");
  eval_cmd->add_option("--split", eval_split, "train, dev or annotation (default: annotation if present)");
  eval_cmd->add_option("--render", eval_render, "Also render the first n examples");
  eval_cmd->add_option("--format", eval_format, "html or ansi")->check(CLI::IsMember({"html", "ansi"}));

  std::string render_ckpt, render_split, render_format = "html";
  std::size_t render_n = 10;
  auto* render_cmd = app.add_subcommand("render", "Highlight selected and gold tokens");
  render_flags.attach(render_cmd);
  render_cmd->add_option("--checkpoint", render_ckpt, "Checkpoint file");
  render_cmd->add_option("--split", render_split, "train, dev or annotation");
  render_cmd->add_option("-n,--render", render_n, "Number of examples");
  render_cmd->add_option("--format", render_format, "html or ansi")->check(CLI::IsMember({"html", "ansi"}));

  auto* synth_cmd = app.add_subcommand("synth", "Write the synthetic corpus as JSON lines");
  synth_flags.attach(synth_cmd);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(train_flags, out);
    if (skew_cmd->parsed()) return cmd_skew(skew_flags, kind, k, out);
    if (grid_cmd->parsed()) return cmd_grid(grid_flags, gen_rates, pred_rates, seeds, out);
    if (probe_cmd->parsed()) {
      return cmd_probe(probe_flags, probe_ckpt, probe_name, probe_sentences, probe_token, out);
    }
    if (eval_cmd->parsed()) {
      return cmd_eval(eval_flags, eval_ckpt, eval_split, eval_render, eval_format, true, out);
    }
    if (render_cmd->parsed()) {
      return cmd_eval(render_flags, render_ckpt, render_split, render_n, render_format, false, out);
    }
    if (synth_cmd->parsed()) return cmd_synth(synth_flags, out);
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}

}  // namespace rationalift::cli

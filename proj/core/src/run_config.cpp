#include "rationalift/run_config.h"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "rationalift/error.h"

namespace rationalift {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': '" + v + "' is not a number");
  }
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': '" + v + "' is not an integer");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key '" + key + "': '" + v + "' is not a boolean");
}

template <typename T, typename Fn>
std::vector<T> to_list(const std::string& key, const std::string& v, Fn parse) {
  std::vector<T> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(static_cast<T>(parse(key, item)));
  }
  return out;
}

template <typename T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>) {
      out += format_double(values[i]);
    } else {
      out += std::to_string(values[i]);
    }
  }
  return out;
}

// Binds each key to a reader and a writer over ExperimentConfig.
struct Field {
  std::function<void(ExperimentConfig&, const std::string&, const std::string&)> read;
  std::function<std::string(const ExperimentConfig&)> write;
};

template <typename Get>
Field number_field(Get get) {
  return {[get](ExperimentConfig& c, const std::string& k, const std::string& v) {
            auto& ref = get(c);
            using T = std::remove_reference_t<decltype(ref)>;
            if constexpr (std::is_floating_point_v<T>) {
              ref = to_double(k, v);
            } else {
              ref = static_cast<T>(to_int(k, v));
            }
          },
          [get](const ExperimentConfig& c) {
            auto& ref = get(const_cast<ExperimentConfig&>(c));
            using T = std::remove_reference_t<decltype(ref)>;
            if constexpr (std::is_floating_point_v<T>) {
              return format_double(ref);
            } else {
              return std::to_string(ref);
            }
          }};
}

template <typename Get>
Field bool_field(Get get) {
  return {[get](ExperimentConfig& c, const std::string& k, const std::string& v) { get(c) = to_bool(k, v); },
          [get](const ExperimentConfig& c) {
            return std::string(get(const_cast<ExperimentConfig&>(c)) ? "true" : "false");
          }};
}

template <typename Get>
Field string_field(Get get) {
  return {[get](ExperimentConfig& c, const std::string&, const std::string& v) { get(c) = v; },
          [get](const ExperimentConfig& c) { return get(const_cast<ExperimentConfig&>(c)); }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> f;
    f["mode"] = {[](ExperimentConfig& c, const std::string& k, const std::string& v) {
                   if (v != "fr" && v != "rnp") throw ConfigError("config key '" + k + "': mode must be fr or rnp");
                   c.mode = v;
                 },
                 [](const ExperimentConfig& c) { return c.mode; }};
    f["seed"] = number_field([](ExperimentConfig& c) -> auto& { return c.seed; });

    f["model.embedding_dim"] = number_field([](ExperimentConfig& c) -> auto& { return c.model.embedding_dim; });
    f["model.hidden_dim"] = number_field([](ExperimentConfig& c) -> auto& { return c.model.hidden_dim; });
    f["model.hidden_per_direction"] = bool_field([](ExperimentConfig& c) -> auto& { return c.model.hidden_per_direction; });
    f["model.num_layers"] = number_field([](ExperimentConfig& c) -> auto& { return c.model.num_layers; });
    f["model.share_depth"] = number_field([](ExperimentConfig& c) -> auto& { return c.model.share_depth; });
    f["model.temperature"] = number_field([](ExperimentConfig& c) -> auto& { return c.model.temperature; });
    f["model.train_embeddings"] = bool_field([](ExperimentConfig& c) -> auto& { return c.model.train_embeddings; });

    f["train.lr_gen"] = number_field([](ExperimentConfig& c) -> auto& { return c.train.lr_gen; });
    f["train.lr_pred"] = number_field([](ExperimentConfig& c) -> auto& { return c.train.lr_pred; });
    f["train.shared_rate"] = {[](ExperimentConfig& c, const std::string& k, const std::string& v) {
                                if (v == "gen") c.train.shared_rate = SharedRate::kGenerator;
                                else if (v == "pred") c.train.shared_rate = SharedRate::kPredictor;
                                else throw ConfigError("config key '" + k + "': expected gen or pred");
                              },
                              [](const ExperimentConfig& c) {
                                return std::string(c.train.shared_rate == SharedRate::kGenerator ? "gen" : "pred");
                              }};
    f["train.batch_size"] = number_field([](ExperimentConfig& c) -> auto& { return c.train.batch_size; });
    f["train.eval_batch_size"] = number_field([](ExperimentConfig& c) -> auto& { return c.train.eval_batch_size; });
    f["train.epochs"] = number_field([](ExperimentConfig& c) -> auto& { return c.train.epochs; });
    f["train.max_len"] = number_field([](ExperimentConfig& c) -> auto& { return c.train.max_len; });
    f["train.delta_sparsity"] = number_field([](ExperimentConfig& c) -> auto& { return c.train.delta_sparsity; });
    f["train.clip_norm"] = number_field([](ExperimentConfig& c) -> auto& { return c.train.clip_norm; });

    f["objective.lambda1"] = number_field([](ExperimentConfig& c) -> auto& { return c.train.objective.lambda1; });
    f["objective.lambda2"] = number_field([](ExperimentConfig& c) -> auto& { return c.train.objective.lambda2; });
    f["objective.alpha"] = number_field([](ExperimentConfig& c) -> auto& { return c.train.objective.alpha; });
    f["objective.coherence_scale"] = {
        [](ExperimentConfig& c, const std::string& k, const std::string& v) {
          if (v == "sum") c.train.objective.coherence_scale = CoherenceScale::kSum;
          else if (v == "per_transition") c.train.objective.coherence_scale = CoherenceScale::kPerTransition;
          else throw ConfigError("config key '" + k + "': expected sum or per_transition");
        },
        [](const ExperimentConfig& c) {
          return std::string(c.train.objective.coherence_scale == CoherenceScale::kSum ? "sum" : "per_transition");
        }};

    f["data.source"] = {[](ExperimentConfig& c, const std::string& k, const std::string& v) {
                          if (v == "synthetic") c.data.source = DataSource::kSynthetic;
                          else if (v == "files") c.data.source = DataSource::kFiles;
                          else throw ConfigError("config key '" + k + "': expected synthetic or files");
                        },
                        [](const ExperimentConfig& c) {
                          return std::string(c.data.source == DataSource::kSynthetic ? "synthetic" : "files");
                        }};
    f["data.domain"] = {[](ExperimentConfig& c, const std::string&, const std::string& v) { c.data.domain = parse_domain(v); },
                        [](const ExperimentConfig& c) { return std::string(to_string(c.data.domain)); }};
    f["data.aspect"] = string_field([](ExperimentConfig& c) -> auto& { return c.data.aspect; });
    f["data.train"] = string_field([](ExperimentConfig& c) -> auto& { return c.data.train_path; });
    f["data.dev"] = string_field([](ExperimentConfig& c) -> auto& { return c.data.dev_path; });
    f["data.annotation"] = string_field([](ExperimentConfig& c) -> auto& { return c.data.annotation_path; });
    f["data.min_freq"] = number_field([](ExperimentConfig& c) -> auto& { return c.data.min_freq; });
    f["embeddings.path"] = string_field([](ExperimentConfig& c) -> auto& { return c.data.embeddings_path; });
    f["embeddings.scale"] = number_field([](ExperimentConfig& c) -> auto& { return c.data.embedding_scale; });

    f["synth.vocab_size"] = number_field([](ExperimentConfig& c) -> auto& { return c.synth.vocab_size; });
    f["synth.doc_length"] = number_field([](ExperimentConfig& c) -> auto& { return c.synth.doc_length; });
    f["synth.span_length"] = number_field([](ExperimentConfig& c) -> auto& { return c.synth.span_length; });
    f["synth.marker_correlation"] = number_field([](ExperimentConfig& c) -> auto& { return c.synth.marker_correlation; });
    f["synth.informative_per_class"] = number_field([](ExperimentConfig& c) -> auto& { return c.synth.informative_per_class; });
    f["synth.markers_per_class"] = number_field([](ExperimentConfig& c) -> auto& { return c.synth.markers_per_class; });
    f["synth.train_size"] = number_field([](ExperimentConfig& c) -> auto& { return c.synth.train_size; });
    f["synth.dev_size"] = number_field([](ExperimentConfig& c) -> auto& { return c.synth.dev_size; });
    f["synth.annotation_size"] = number_field([](ExperimentConfig& c) -> auto& { return c.synth.annotation_size; });
    f["synth.seed"] = number_field([](ExperimentConfig& c) -> auto& { return c.synth.seed; });

    f["skew.kind"] = {[](ExperimentConfig& c, const std::string& k, const std::string& v) {
                        if (v == "predictor") c.skew.kind = SkewKind::kPredictor;
                        else if (v == "generator") c.skew.kind = SkewKind::kGenerator;
                        else throw ConfigError("config key '" + k + "': expected predictor or generator");
                      },
                      [](const ExperimentConfig& c) {
                        return std::string(c.skew.kind == SkewKind::kPredictor ? "predictor" : "generator");
                      }};
    f["skew.k"] = number_field([](ExperimentConfig& c) -> auto& { return c.skew.k; });
    f["skew.batch_size"] = number_field([](ExperimentConfig& c) -> auto& { return c.skew.batch_size; });
    f["skew.lr"] = number_field([](ExperimentConfig& c) -> auto& { return c.skew.lr; });
    f["skew.epoch_cap"] = number_field([](ExperimentConfig& c) -> auto& { return c.skew.epoch_cap; });
    f["skew.view"] = {[](ExperimentConfig& c, const std::string& k, const std::string& v) {
                        if (v == "first_sentence") c.skew_view = SkewView::kFirstSentence;
                        else if (v == "marker") c.skew_view = SkewView::kMarker;
                        else throw ConfigError("config key '" + k + "': expected first_sentence or marker");
                      },
                      [](const ExperimentConfig& c) {
                        return std::string(c.skew_view == SkewView::kFirstSentence ? "first_sentence" : "marker");
                      }};
    f["skew.marker_correlation"] = number_field([](ExperimentConfig& c) -> auto& { return c.skew_marker_correlation; });

    f["grid.gen_rates"] = {[](ExperimentConfig& c, const std::string& k, const std::string& v) {
                             c.grid_gen_rates = to_list<double>(k, v, to_double);
                           },
                           [](const ExperimentConfig& c) { return join(c.grid_gen_rates); }};
    f["grid.pred_rates"] = {[](ExperimentConfig& c, const std::string& k, const std::string& v) {
                              c.grid_pred_rates = to_list<double>(k, v, to_double);
                            },
                            [](const ExperimentConfig& c) { return join(c.grid_pred_rates); }};
    f["grid.seeds"] = {[](ExperimentConfig& c, const std::string& k, const std::string& v) {
                         c.grid_seeds = to_list<std::uint64_t>(k, v, to_int);
                       },
                       [](const ExperimentConfig& c) { return join(c.grid_seeds); }};
    return f;
  }();
  return table;
}

}  // namespace

KeyValues parse_key_values(std::istream& in, const std::string& source) {
  KeyValues out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(line_no) + ": expected key = value");
    }
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  return parse_key_values(in, path.string());
}

void write_key_values(const KeyValues& values, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  for (const auto& [k, v] : values) out << k << " = " << v << '\n';
}

std::string format_double(double value) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, p);
}

ExperimentConfig resolve_config(const KeyValues& values) {
  ExperimentConfig cfg;
  const auto& table = fields();
  for (const auto& [key, value] : values) {
    auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second.read(cfg, key, value);
  }
  if (!values.contains("model.share_depth")) {
    cfg.model.share_depth = cfg.mode == "fr" ? cfg.model.num_layers : 0;
  }
  cfg.train.seed = cfg.seed;
  cfg.skew.seed = cfg.seed;
  cfg.skew.max_len = cfg.train.max_len;
  cfg.model.validate();
  cfg.train.validate();
  return cfg;
}

KeyValues echo_config(const ExperimentConfig& cfg) {
  KeyValues out;
  for (const auto& [key, field] : fields()) out[key] = field.write(cfg);
  return out;
}

std::vector<std::string> known_config_keys() {
  std::vector<std::string> out;
  for (const auto& [key, field] : fields()) out.push_back(key);
  return out;
}

}  // namespace rationalift

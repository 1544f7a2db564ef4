#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include "rationalift/data.h"
#include "rationalift/model.h"
#include "rationalift/synthetic.h"
#include "rationalift/training.h"

namespace rationalift {

// Flat "key = value" settings; '#' starts a comment.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(std::istream& in, const std::string& source);
// Throws ConfigError naming the path when it cannot be read.
KeyValues read_key_values(const std::filesystem::path& path);
void write_key_values(const KeyValues& values, const std::filesystem::path& path);

enum class DataSource { kSynthetic, kFiles };

struct DataConfig {
  DataSource source = DataSource::kSynthetic;
  Domain domain = Domain::kLabeled;
  std::string aspect = "synthetic";
  std::string train_path;
  std::string dev_path;
  std::string annotation_path;
  int min_freq = 1;
  std::string embeddings_path;    // empty: random vectors
  double embedding_scale = 1.0;   // uniform range of random vectors
};

enum class SkewView { kFirstSentence, kMarker };

// Everything a run needs, resolved from defaults, a config file and
// command-line overrides (in increasing precedence).
struct ExperimentConfig {
  std::string mode = "fr";  // "fr" folds all layers, "rnp" shares none
  std::uint64_t seed = 1;
  ModelConfig model;
  TrainConfig train;
  DataConfig data;
  SynthConfig synth;
  SkewConfig skew;
  SkewView skew_view = SkewView::kFirstSentence;
  // Marker rate of the separate corpus used for marker-view predictor skew.
  double skew_marker_correlation = 1.0;
  std::vector<double> grid_gen_rates;
  std::vector<double> grid_pred_rates;
  std::vector<std::uint64_t> grid_seeds;
};

// Unknown keys and unparsable values raise ConfigError.
ExperimentConfig resolve_config(const KeyValues& values);
// Every key with its resolved value; resolve_config(echo_config(c)) == c.
KeyValues echo_config(const ExperimentConfig& cfg);
std::vector<std::string> known_config_keys();

std::string format_double(double value);

}  // namespace rationalift

#include "rationalift/data.h"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rationalift/error.h"
#include "rationalift/random.h"

namespace rationalift {

namespace {

using json = nlohmann::json;

std::vector<std::string> split_whitespace(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string token;
  while (in >> token) out.push_back(token);
  return out;
}

std::vector<std::pair<int, int>> mask_to_spans(const Mask& mask) {
  std::vector<std::pair<int, int>> spans;
  int start = -1;
  for (int i = 0; i <= static_cast<int>(mask.size()); ++i) {
    const bool on = i < static_cast<int>(mask.size()) && mask[static_cast<std::size_t>(i)];
    if (on && start < 0) start = i;
    if (!on && start >= 0) {
      spans.emplace_back(start, i);
      start = -1;
    }
  }
  return spans;
}

struct ParsedRecord {
  Example example;
  bool dropped = false;
  bool has_spans = false;
};

ParsedRecord parse_record(const std::string& line, Domain domain, const std::string& where) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DataError(where + ": malformed JSON: " + e.what());
  }
  if (!j.is_object()) throw DataError(where + ": record is not a JSON object");

  ParsedRecord rec;
  Example& ex = rec.example;
  try {
    if (!j.contains("text") || !j["text"].is_string()) {
      throw DataError(where + ": missing string field \"text\"");
    }
    ex.id = j.contains("id") ? j["id"].get<std::string>() : where;
    ex.tokens = split_whitespace(j["text"].get<std::string>());
    if (ex.tokens.empty()) throw DataError(where + ": empty text in record " + ex.id);

    if (j.contains("label")) {
      ex.label = j["label"].get<int>();
      if (ex.label != 0 && ex.label != 1) {
        throw DataError(where + ": label must be 0 or 1 in record " + ex.id);
      }
    } else if (j.contains("rating")) {
      auto label = binarize_rating(domain, j["rating"].get<double>());
      if (!label) {
        rec.dropped = true;
        return rec;
      }
      ex.label = *label;
    } else {
      throw DataError(where + ": record " + ex.id + " has neither \"label\" nor \"rating\"");
    }

    if (j.contains("rationale_spans")) {
      rec.has_spans = true;
      auto spans = j["rationale_spans"].get<std::vector<std::pair<int, int>>>();
      ex.gold_mask = expand_spans(spans, ex.tokens.size(), ex.id);
    }
  } catch (const json::exception& e) {
    throw DataError(where + ": bad field type: " + e.what());
  }
  return rec;
}

template <typename Fn>
void for_each_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open corpus file " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    fn(line, path.string() + ":" + std::to_string(line_no));
  }
}

void balance(Dataset& dataset, std::uint64_t seed) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < dataset.examples.size(); ++i) {
    (dataset.examples[i].label == 1 ? pos : neg).push_back(i);
  }
  const std::size_t keep = std::min(pos.size(), neg.size());
  Rng rng(derive_seed(seed, 0xba1a));
  auto& larger = pos.size() > neg.size() ? pos : neg;
  rng.shuffle(larger.begin(), larger.end());
  larger.resize(keep);
  pos.resize(keep);
  neg.resize(keep);

  std::vector<std::size_t> chosen(pos);
  chosen.insert(chosen.end(), neg.begin(), neg.end());
  std::sort(chosen.begin(), chosen.end());
  std::vector<Example> kept;
  kept.reserve(chosen.size());
  for (auto i : chosen) kept.push_back(std::move(dataset.examples[i]));
  dataset.examples = std::move(kept);
}

}  // namespace

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kAnnotation: return "annotation";
  }
  return "?";
}

std::string_view to_string(Domain domain) {
  switch (domain) {
    case Domain::kBeer: return "beer";
    case Domain::kHotel: return "hotel";
    case Domain::kLabeled: return "labeled";
  }
  return "?";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "dev") return Split::kDev;
  if (name == "annotation") return Split::kAnnotation;
  throw ConfigError("unknown split '" + std::string(name) + "'");
}

Domain parse_domain(std::string_view name) {
  if (name == "beer") return Domain::kBeer;
  if (name == "hotel") return Domain::kHotel;
  if (name == "labeled" || name == "synthetic") return Domain::kLabeled;
  throw ConfigError("unknown domain '" + std::string(name) + "'");
}

void validate(const Example& example) {
  if (example.tokens.empty()) throw DataError("example " + example.id + " has no tokens");
  if (example.label != 0 && example.label != 1) {
    throw DataError("example " + example.id + " has a non-binary label");
  }
  if (example.gold_mask && example.gold_mask->size() != example.tokens.size()) {
    throw DataError("example " + example.id + " gold mask length differs from token count");
  }
}

std::size_t Dataset::count_label(int label) const {
  return static_cast<std::size_t>(std::count_if(
      examples.begin(), examples.end(), [label](const Example& e) { return e.label == label; }));
}

bool Dataset::has_gold() const {
  return !examples.empty() && std::all_of(examples.begin(), examples.end(),
                                          [](const Example& e) { return e.gold_mask.has_value(); });
}

std::optional<int> binarize_rating(Domain domain, double rating) {
  switch (domain) {
    case Domain::kBeer:
      if (rating <= 0.4) return 0;
      if (rating >= 0.6) return 1;
      return std::nullopt;
    case Domain::kHotel:
      if (rating < 3.0) return 0;
      if (rating > 3.0) return 1;
      return std::nullopt;
    case Domain::kLabeled:
      break;
  }
  throw DataError("domain 'labeled' requires explicit labels, got a rating");
}

bool is_known_aspect(Domain domain, std::string_view aspect) {
  static const std::vector<std::string_view> beer = {"appearance", "aroma", "palate"};
  static const std::vector<std::string_view> hotel = {"location", "service", "cleanliness"};
  switch (domain) {
    case Domain::kBeer: return std::find(beer.begin(), beer.end(), aspect) != beer.end();
    case Domain::kHotel: return std::find(hotel.begin(), hotel.end(), aspect) != hotel.end();
    case Domain::kLabeled: return true;
  }
  return false;
}

Mask expand_spans(const std::vector<std::pair<int, int>>& spans, std::size_t length,
                  std::string_view id) {
  Mask mask(length, 0);
  for (auto [start, end] : spans) {
    if (start < 0 || end < start || static_cast<std::size_t>(end) > length) {
      throw DataError("rationale interval [" + std::to_string(start) + "," + std::to_string(end) +
                      ") out of bounds for example " + std::string(id) + " of length " +
                      std::to_string(length));
    }
    std::fill(mask.begin() + start, mask.begin() + end, 1);
  }
  return mask;
}

Dataset load_reviews(const std::filesystem::path& path, std::string_view aspect, Domain domain,
                     Split split, std::uint64_t seed) {
  if (!is_known_aspect(domain, aspect)) {
    throw ConfigError("unknown aspect '" + std::string(aspect) + "' for domain " +
                      std::string(to_string(domain)));
  }
  Dataset dataset;
  dataset.split = split;
  dataset.aspect = std::string(aspect);
  for_each_line(path, [&](const std::string& line, const std::string& where) {
    auto rec = parse_record(line, domain, where);
    if (!rec.dropped) dataset.examples.push_back(std::move(rec.example));
  });
  if (split == Split::kTrain) balance(dataset, seed);
  if (dataset.examples.empty()) {
    throw DataError("no examples left in " + std::string(to_string(split)) + " split from " +
                    path.string());
  }
  return dataset;
}

Dataset load_annotations(const std::filesystem::path& path, Domain domain, std::string_view aspect) {
  Dataset dataset;
  dataset.split = Split::kAnnotation;
  dataset.aspect = std::string(aspect);
  for_each_line(path, [&](const std::string& line, const std::string& where) {
    auto rec = parse_record(line, domain, where);
    if (rec.dropped) return;
    if (!rec.has_spans) {
      throw DataError(where + ": annotation record " + rec.example.id +
                      " lacks \"rationale_spans\"");
    }
    const auto& mask = *rec.example.gold_mask;
    if (std::none_of(mask.begin(), mask.end(), [](auto m) { return m != 0; })) {
      dataset.warnings.push_back("example " + rec.example.id + " has an empty gold rationale");
    }
    dataset.examples.push_back(std::move(rec.example));
  });
  if (dataset.examples.empty()) {
    throw DataError("no annotated examples in " + path.string());
  }
  return dataset;
}

void write_jsonl(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  for (const auto& ex : dataset.examples) {
    std::string text;
    for (std::size_t i = 0; i < ex.tokens.size(); ++i) {
      if (i) text += ' ';
      text += ex.tokens[i];
    }
    json j = {{"id", ex.id}, {"label", ex.label}, {"text", text}};
    if (ex.gold_mask) j["rationale_spans"] = mask_to_spans(*ex.gold_mask);
    out << j.dump() << '\n';
  }
}

Vocabulary::Vocabulary() {
  add(std::string(kPadToken));
  add(std::string(kMaskToken));
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  if (tokens.size() < 2 || tokens[0] != kPadToken || tokens[1] != kMaskToken) {
    throw DataError("vocabulary must start with the reserved PAD and MASK tokens");
  }
  Vocabulary vocab;
  for (std::size_t i = 2; i < tokens.size(); ++i) {
    if (vocab.find(tokens[i])) throw DataError("duplicate vocabulary token '" + tokens[i] + "'");
    vocab.add(tokens[i]);
  }
  return vocab;
}

int Vocabulary::add(const std::string& token) {
  auto [it, inserted] = index_.try_emplace(token, static_cast<int>(tokens_.size()));
  if (inserted) tokens_.push_back(token);
  return it->second;
}

std::optional<int> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int Vocabulary::lookup(std::string_view token) const { return find(token).value_or(kMask); }

Vocabulary build_vocab(const std::vector<const Dataset*>& datasets, int min_freq) {
  std::unordered_map<std::string, int> freq;
  std::vector<std::string> order;
  for (const auto* ds : datasets) {
    for (const auto& ex : ds->examples) {
      for (const auto& tok : ex.tokens) {
        if (freq[tok]++ == 0) order.push_back(tok);
      }
    }
  }
  if (order.empty()) throw ConfigError("cannot build a vocabulary from an empty corpus");
  Vocabulary vocab;
  for (const auto& tok : order) {
    if (freq[tok] >= min_freq && tok != Vocabulary::kPadToken && tok != Vocabulary::kMaskToken) {
      vocab.add(tok);
    }
  }
  return vocab;
}

EmbeddingTable::EmbeddingTable(Eigen::MatrixXd table) : table_(std::move(table)) {}

void EmbeddingTable::zero_reserved() {
  if (table_.cols() > Vocabulary::kPad) table_.col(Vocabulary::kPad).setZero();
  if (table_.cols() > Vocabulary::kMask) table_.col(Vocabulary::kMask).setZero();
}

EmbeddingTable random_embeddings(const Vocabulary& vocab, int dim, double scale,
                                 std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0xe3b));
  Eigen::MatrixXd table(dim, vocab.size());
  for (Eigen::Index c = 0; c < table.cols(); ++c) {
    for (Eigen::Index r = 0; r < table.rows(); ++r) table(r, c) = rng.uniform(-scale, scale);
  }
  EmbeddingTable out(std::move(table));
  out.zero_reserved();
  return out;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path, int dim,
                               const Vocabulary& vocab, std::uint64_t seed) {
  if (dim <= 0) throw ConfigError("embedding dimension must be positive");
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open embedding file " + path.string());

  EmbeddingTable table = random_embeddings(vocab, dim, 0.05, seed);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    std::string word;
    if (!(fields >> word)) continue;
    std::vector<double> values;
    double v;
    while (fields >> v) values.push_back(v);
    if (first) {
      first = false;
      // word2vec-style "count dim" header
      if (values.size() == 1 && word.find_first_not_of("0123456789") == std::string::npos) continue;
    }
    if (static_cast<int>(values.size()) != dim) {
      throw DataError("embedding for token '" + word + "' has " + std::to_string(values.size()) +
                      " values, expected " + std::to_string(dim));
    }
    if (auto id = vocab.find(word)) {
      table.matrix().col(*id) = Eigen::Map<const Eigen::VectorXd>(values.data(), dim);
    }
  }
  table.zero_reserved();
  return table;
}

Batch make_batch(const Dataset& dataset, const std::vector<std::size_t>& indices,
                 const Vocabulary& vocab, int max_len) {
  Batch batch;
  int steps = 0;
  for (auto i : indices) {
    const int len = std::min<int>(static_cast<int>(dataset.examples[i].tokens.size()), max_len);
    batch.lengths.push_back(len);
    steps = std::max(steps, len);
  }
  const auto n = static_cast<Eigen::Index>(indices.size());
  batch.ids = Eigen::MatrixXi::Constant(steps, n, Vocabulary::kPad);
  batch.real = Eigen::MatrixXd::Zero(steps, n);
  for (Eigen::Index b = 0; b < n; ++b) {
    const auto& ex = dataset.examples[indices[static_cast<std::size_t>(b)]];
    for (int t = 0; t < batch.lengths[static_cast<std::size_t>(b)]; ++t) {
      batch.ids(t, b) = vocab.lookup(ex.tokens[static_cast<std::size_t>(t)]);
      batch.real(t, b) = 1.0;
    }
    batch.labels.push_back(ex.label);
  }
  batch.indices = indices;
  return batch;
}

std::vector<Batch> make_batches(const Dataset& dataset, const Vocabulary& vocab, int batch_size,
                                int max_len, std::uint64_t seed, bool shuffle) {
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (max_len < 1) throw ConfigError("max_len must be at least 1");
  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (shuffle) {
    Rng rng(derive_seed(seed, 0xba7c));
    rng.shuffle(order.begin(), order.end());
  }
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    const auto end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<std::size_t> chunk(order.begin() + static_cast<std::ptrdiff_t>(start),
                                   order.begin() + static_cast<std::ptrdiff_t>(end));
    batches.push_back(make_batch(dataset, chunk, vocab, max_len));
  }
  return batches;
}

}  // namespace rationalift

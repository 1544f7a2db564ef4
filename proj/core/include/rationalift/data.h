#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace rationalift {

using Mask = std::vector<std::uint8_t>;

enum class Split { kTrain, kDev, kAnnotation };
enum class Domain { kBeer, kHotel, kLabeled };

std::string_view to_string(Split split);
std::string_view to_string(Domain domain);
Split parse_split(std::string_view name);
Domain parse_domain(std::string_view name);

struct Example {
  std::string id;
  std::vector<std::string> tokens;
  int label = 0;
  std::optional<Mask> gold_mask;
};

// Throws DataError when an example breaks the length/label invariants.
void validate(const Example& example);

struct Dataset {
  Split split = Split::kTrain;
  std::string aspect;
  std::vector<Example> examples;
  // Non-fatal issues found while loading (empty annotations and the like).
  std::vector<std::string> warnings;

  std::size_t size() const { return examples.size(); }
  std::size_t count_label(int label) const;
  bool has_gold() const;
};

// Maps a raw rating onto a binary label; nullopt means the record is dropped.
// Beer: <= 0.4 negative, >= 0.6 positive. Hotel: < 3 negative, > 3 positive.
std::optional<int> binarize_rating(Domain domain, double rating);

// Known aspect keys per domain. kLabeled accepts any aspect.
bool is_known_aspect(Domain domain, std::string_view aspect);

// Expands half-open [start, end) intervals into a 0/1 mask of `length`.
// Throws DataError naming `id` if an interval falls outside the sequence.
Mask expand_spans(const std::vector<std::pair<int, int>>& spans, std::size_t length,
                  std::string_view id);

// Reads a JSON-lines corpus. Records carry either a raw "rating" (binarized
// per domain) or an explicit "label". A train split is subsampled to exact
// class balance using `seed`.
Dataset load_reviews(const std::filesystem::path& path, std::string_view aspect, Domain domain,
                     Split split, std::uint64_t seed);

// Reads a JSON-lines annotation file; every record must carry
// "rationale_spans" (possibly empty, which yields a warning).
Dataset load_annotations(const std::filesystem::path& path, Domain domain = Domain::kLabeled,
                         std::string_view aspect = {});

void write_jsonl(const Dataset& dataset, const std::filesystem::path& path);

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kMask = 1;
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kMaskToken = "<mask>";

  Vocabulary();
  // Rebuilds from a full id-ordered token list (reserved tokens first).
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

  int add(const std::string& token);
  std::optional<int> find(std::string_view token) const;
  // Unknown tokens map to the MASK id, whose embedding is the zero vector.
  int lookup(std::string_view token) const;
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// Ids are assigned in first-occurrence order over the datasets. Tokens seen
// fewer than `min_freq` times are skipped. Throws ConfigError on an empty
// corpus.
Vocabulary build_vocab(const std::vector<const Dataset*>& datasets, int min_freq = 1);

// Word vectors stored column-wise: column `id` is the vector of token `id`.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(Eigen::MatrixXd table);

  int dim() const { return static_cast<int>(table_.rows()); }
  int size() const { return static_cast<int>(table_.cols()); }
  const Eigen::MatrixXd& matrix() const { return table_; }
  Eigen::MatrixXd& matrix() { return table_; }
  auto vector(int id) const { return table_.col(id); }

  // Zeroes the PAD and MASK columns.
  void zero_reserved();

 private:
  Eigen::MatrixXd table_;
};

// Every entry uniform in [-scale, scale]; reserved rows zeroed.
EmbeddingTable random_embeddings(const Vocabulary& vocab, int dim, double scale,
                                 std::uint64_t seed);

// Reads "word f1 ... fd" lines. Vocabulary tokens missing from the file are
// drawn uniformly from [-0.05, 0.05]. A leading "count dim" header line is
// skipped. Throws DataError naming the token on a dimension mismatch.
EmbeddingTable load_embeddings(const std::filesystem::path& path, int dim,
                               const Vocabulary& vocab, std::uint64_t seed);

// A padded mini-batch stored time-major: entry (t, b) is token t of example b.
struct Batch {
  Eigen::MatrixXi ids;     // T x B, PAD beyond each length
  Eigen::MatrixXd real;    // T x B, 1 on real tokens
  std::vector<int> lengths;
  std::vector<int> labels;
  std::vector<std::size_t> indices;  // positions in the source dataset

  int steps() const { return static_cast<int>(ids.rows()); }
  int size() const { return static_cast<int>(ids.cols()); }
};

Batch make_batch(const Dataset& dataset, const std::vector<std::size_t>& indices,
                 const Vocabulary& vocab, int max_len);

std::vector<Batch> make_batches(const Dataset& dataset, const Vocabulary& vocab, int batch_size,
                                int max_len, std::uint64_t seed, bool shuffle);

}  // namespace rationalift

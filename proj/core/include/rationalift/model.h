#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "rationalift/data.h"
#include "rationalift/layers.h"

namespace rationalift {

struct ModelConfig {
  int embedding_dim = 100;
  // Width of the per-token representation. By default the two directions
  // split it evenly; with hidden_per_direction each direction gets the full
  // width and the representation is twice as wide.
  int hidden_dim = 200;
  bool hidden_per_direction = false;
  int num_layers = 1;
  // Leading encoder layers shared by generator and predictor:
  // 0 is the two-phase baseline, num_layers is full folding.
  int share_depth = 1;
  int num_classes = 2;
  double temperature = 1.0;
  bool train_embeddings = false;

  int direction_dim() const { return hidden_per_direction ? hidden_dim : hidden_dim / 2; }
  int state_dim() const { return 2 * direction_dim(); }
  bool folded() const { return share_depth == num_layers; }
  // Throws ConfigError when dimensions or share depth are invalid.
  void validate() const;
};

enum class Owner { kGenerator, kPredictor, kShared };
std::string_view to_string(Owner owner);

struct ParamRef {
  Param* param;
  Owner owner;
};

enum class Mode { kTrain, kEval };

// How the predictor consumes the sampled mask.
enum class Relaxation {
  kStraightThrough,  // hard mask forward, soft-mask sensitivities backward
  kSoft,             // soft mask both ways (used by gradient checks)
};

struct MaskSample {
  Matrix logits;  // T x B generator scores, p = sigmoid(logit)
  Matrix probs;   // T x B, zero at pad
  Matrix hard;    // T x B in {0, 1}, zero at pad
  Matrix soft;    // T x B relaxed value at the same noise draw
  double temperature = 1.0;
};

// Per-token selection probabilities from generator-view states.
Matrix generator_logits(const Linear& head, const Matrix& states, SequenceShape shape);
Matrix generator_probs(const Matrix& logits, const Matrix& real);

// Train mode draws two-category Gumbel noise per token: the soft mask is the
// select weight of the tempered two-way softmax and the hard mask its argmax.
// Eval mode thresholds p > 0.5 with no noise; soft equals probs.
MaskSample sample_mask(const Matrix& logits, const Matrix& real, double temperature, Mode mode,
                       std::uint64_t noise_seed);
// Same contract taking probabilities directly.
MaskSample sample_mask_from_probs(const Matrix& probs, const Matrix& real, double temperature,
                                  Mode mode, std::uint64_t noise_seed);

// Scales column t*B+b of `embedded` by mask(t, b). Throws ConfigError on a
// shape mismatch.
Matrix apply_mask(const Matrix& embedded, const Matrix& mask);

// Encodes with `encoder`, max-pools over real positions, applies `head`.
struct Prediction {
  Matrix logits;
  Matrix states;
  MaxPool pool;
  EncoderStack::Cache cache;
};
Prediction predict(const EncoderStack& encoder, const Linear& head, const Matrix& masked,
                   const Matrix& real, SequenceShape shape, bool keep_cache = false);

struct ForwardOptions {
  Mode mode = Mode::kTrain;
  std::uint64_t noise_seed = 0;
  Relaxation relaxation = Relaxation::kStraightThrough;
  bool force_full_mask = false;  // debug: predictor sees the whole text
  const Matrix* mask_override = nullptr;  // T x B mask replacing the generator's
};

struct ForwardResult {
  SequenceShape shape;
  Matrix logits;            // num_classes x B
  MaskSample mask;
  Matrix used_mask;         // mask consumed by the predictor
  Matrix gen_states;        // state_dim x T*B
  Matrix pred_states;
  Matrix embedded;          // embedding_dim x T*B
  Matrix masked;
  EncoderStack::Cache gen_cache;
  EncoderStack::Cache pred_cache;
  MaxPool pool;
  Eigen::MatrixXi ids;      // T x B token ids
  Matrix real;              // T x B
  bool mask_has_gradient = false;
};

struct ParamCounts {
  Eigen::Index generator = 0;  // generator-only encoder layers and head
  Eigen::Index predictor = 0;  // predictor-only encoder layers and head
  Eigen::Index shared = 0;     // layers used by both views
  Eigen::Index embedding = 0;  // counted in total only when trainable
  Eigen::Index total = 0;
  Eigen::Index total_with_embedding = 0;
};

// Generator and predictor around a single embedding table. The first
// share_depth layers of the two encoder views are the same objects.
class RationaleModel {
 public:
  static RationaleModel build(const ModelConfig& cfg, Vocabulary vocab, EmbeddingTable embeddings,
                              std::uint64_t seed);

  RationaleModel(const RationaleModel&) = delete;
  RationaleModel& operator=(const RationaleModel&) = delete;
  RationaleModel(RationaleModel&&) = default;
  RationaleModel& operator=(RationaleModel&&) = default;

  const ModelConfig& config() const { return cfg_; }
  const Vocabulary& vocab() const { return vocab_; }
  const Matrix& embedding_matrix() const { return embedding_.value; }

  EncoderStack& generator_encoder() { return gen_encoder_; }
  const EncoderStack& generator_encoder() const { return gen_encoder_; }
  EncoderStack& predictor_encoder() { return pred_encoder_; }
  const EncoderStack& predictor_encoder() const { return pred_encoder_; }
  Linear& generator_head() { return gen_head_; }
  const Linear& generator_head() const { return gen_head_; }
  Linear& predictor_head() { return pred_head_; }
  const Linear& predictor_head() const { return pred_head_; }
  Param& embedding_param() { return embedding_; }

  // Every trainable parameter exactly once, tagged with its owner. The
  // embedding is included (as shared) only when trainable.
  std::vector<ParamRef> parameters();
  // All tensors including a frozen embedding, in stable checkpoint order.
  std::vector<Param*> tensors();
  void zero_grad();

  // Embedding lookup; PAD and MASK map to zero columns.
  Matrix embed(const Eigen::MatrixXi& ids) const;

  ForwardResult forward(const Batch& batch, const ForwardOptions& options) const;
  // Accumulates gradients of a loss given d/dlogits and an extra d/dmask
  // (from the regularizer; may be empty).
  void backward(const ForwardResult& fwd, const Matrix& d_logits, const Matrix& d_mask);

  ParamCounts param_count() const;

  // Deep copy preserving the sharing structure.
  RationaleModel clone() const;
  // Snapshot/restore of parameter values in tensors() order.
  std::vector<Matrix> snapshot() const;
  void restore(const std::vector<Matrix>& values);
  // Rebuilds a model from tensors in tensors() order.
  static RationaleModel from_snapshot(const ModelConfig& cfg, Vocabulary vocab,
                                      const std::vector<Matrix>& values);

 private:
  RationaleModel() = default;
  // Builds the layer structure with zero parameters.
  static RationaleModel allocate(const ModelConfig& cfg, Vocabulary vocab, int vocab_rows);

  ModelConfig cfg_;
  Vocabulary vocab_;
  Param embedding_;
  EncoderStack gen_encoder_;
  EncoderStack pred_encoder_;
  Linear gen_head_;
  Linear pred_head_;
};

// Per-token states of one text under one encoder view; used by probes.
Matrix encode_tokens(const RationaleModel& model, const EncoderStack& encoder,
                     const std::vector<std::string>& tokens);

}  // namespace rationalift

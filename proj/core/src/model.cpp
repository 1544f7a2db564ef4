#include "rationalift/model.h"

#include <cmath>
#include <set>

#include "rationalift/error.h"

namespace rationalift {

namespace {

// Element (t, b) of a T x B matrix from column t*B + b of a 1 x T*B row.
Matrix row_to_grid(const Matrix& row, SequenceShape shape) {
  Matrix grid(shape.steps, shape.batch);
  for (int t = 0; t < shape.steps; ++t) {
    for (int b = 0; b < shape.batch; ++b) {
      grid(t, b) = row(0, static_cast<Eigen::Index>(t) * shape.batch + b);
    }
  }
  return grid;
}

Matrix grid_to_row(const Matrix& grid) {
  const auto T = grid.rows();
  const auto B = grid.cols();
  Matrix row(1, T * B);
  for (Eigen::Index t = 0; t < T; ++t) {
    for (Eigen::Index b = 0; b < B; ++b) row(0, t * B + b) = grid(t, b);
  }
  return row;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

void ModelConfig::validate() const {
  if (embedding_dim <= 0 || hidden_dim <= 0 || num_classes < 2) {
    throw ConfigError("model dimensions must be positive and num_classes >= 2");
  }
  if (!hidden_per_direction && hidden_dim % 2 != 0) {
    throw ConfigError("hidden_dim must be even when split across directions");
  }
  if (num_layers < 1) throw ConfigError("num_layers must be at least 1");
  if (share_depth < 0 || share_depth > num_layers) {
    throw ConfigError("share_depth " + std::to_string(share_depth) + " must lie in [0, " +
                      std::to_string(num_layers) + "]");
  }
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
}

std::string_view to_string(Owner owner) {
  switch (owner) {
    case Owner::kGenerator: return "generator";
    case Owner::kPredictor: return "predictor";
    case Owner::kShared: return "shared";
  }
  return "?";
}

Matrix generator_logits(const Linear& head, const Matrix& states, SequenceShape shape) {
  return row_to_grid(head.forward(states), shape);
}

Matrix generator_probs(const Matrix& logits, const Matrix& real) {
  Matrix probs = logits.unaryExpr([](double z) { return sigmoid(z); });
  return probs.cwiseProduct(real);
}

MaskSample sample_mask(const Matrix& logits, const Matrix& real, double temperature, Mode mode,
                       std::uint64_t noise_seed) {
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  MaskSample s;
  s.temperature = temperature;
  s.logits = logits;
  s.probs = generator_probs(logits, real);
  s.hard = Matrix::Zero(logits.rows(), logits.cols());
  if (mode == Mode::kEval) {
    s.soft = s.probs;
    for (Eigen::Index i = 0; i < s.probs.size(); ++i) {
      s.hard(i) = s.probs(i) > 0.5 ? 1.0 : 0.0;
    }
    return s;
  }
  // With p = sigmoid(z): log p - log(1 - p) = z, so the select weight of
  // softmax([(log p + g1)/tau, (log(1-p) + g0)/tau]) is sigmoid((z + g1 - g0)/tau).
  Rng rng(noise_seed);
  s.soft = Matrix::Zero(logits.rows(), logits.cols());
  for (Eigen::Index b = 0; b < logits.cols(); ++b) {
    for (Eigen::Index t = 0; t < logits.rows(); ++t) {
      const double g_select = rng.gumbel();
      const double g_drop = rng.gumbel();
      if (real(t, b) == 0.0) continue;
      const double score = (logits(t, b) + g_select - g_drop) / temperature;
      s.soft(t, b) = sigmoid(score);
      s.hard(t, b) = score > 0.0 ? 1.0 : 0.0;
    }
  }
  return s;
}

MaskSample sample_mask_from_probs(const Matrix& probs, const Matrix& real, double temperature,
                                  Mode mode, std::uint64_t noise_seed) {
  Matrix logits = probs.unaryExpr([](double p) { return std::log(p) - std::log1p(-p); });
  MaskSample s = sample_mask(logits, real, temperature, mode, noise_seed);
  if (mode == Mode::kEval) {
    s.probs = probs.cwiseProduct(real);
    s.soft = s.probs;
    for (Eigen::Index i = 0; i < s.probs.size(); ++i) s.hard(i) = s.probs(i) > 0.5 ? 1.0 : 0.0;
  }
  return s;
}

Matrix apply_mask(const Matrix& embedded, const Matrix& mask) {
  if (embedded.cols() != mask.size()) {
    throw ConfigError("mask covers " + std::to_string(mask.size()) + " positions, sequence has " +
                      std::to_string(embedded.cols()));
  }
  const Matrix row = grid_to_row(mask);
  Matrix out = embedded;
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    if (row(0, c) == 0.0) {
      out.col(c).setZero();
    } else if (row(0, c) != 1.0) {
      out.col(c) *= row(0, c);
    }
  }
  return out;
}

Prediction predict(const EncoderStack& encoder, const Linear& head, const Matrix& masked,
                   const Matrix& real, SequenceShape shape, bool keep_cache) {
  Prediction p;
  p.states = encoder.forward(masked, real, shape, keep_cache ? &p.cache : nullptr);
  p.pool = max_pool(p.states, real, shape);
  p.logits = head.forward(p.pool.pooled);
  return p;
}

RationaleModel RationaleModel::allocate(const ModelConfig& cfg, Vocabulary vocab, int vocab_rows) {
  cfg.validate();
  RationaleModel m;
  m.cfg_ = cfg;
  m.vocab_ = std::move(vocab);
  m.embedding_ = Param("embedding", cfg.embedding_dim, vocab_rows);

  std::vector<std::shared_ptr<BiGruLayer>> gen, pred;
  for (int i = 0; i < cfg.num_layers; ++i) {
    const int in = i == 0 ? cfg.embedding_dim : cfg.state_dim();
    if (i < cfg.share_depth) {
      auto layer = std::make_shared<BiGruLayer>("encoder.shared." + std::to_string(i), in,
                                                cfg.direction_dim());
      gen.push_back(layer);
      pred.push_back(layer);
    } else {
      gen.push_back(std::make_shared<BiGruLayer>("encoder.generator." + std::to_string(i), in,
                                                 cfg.direction_dim()));
      pred.push_back(std::make_shared<BiGruLayer>("encoder.predictor." + std::to_string(i), in,
                                                  cfg.direction_dim()));
    }
  }
  m.gen_encoder_ = EncoderStack(std::move(gen));
  m.pred_encoder_ = EncoderStack(std::move(pred));
  m.gen_head_ = Linear("generator_head", cfg.state_dim(), 1);
  m.pred_head_ = Linear("predictor_head", cfg.state_dim(), cfg.num_classes);

  // Ownership partition must be exhaustive and disjoint.
  std::set<const Param*> seen;
  for (const auto& ref : m.parameters()) {
    if (!seen.insert(ref.param).second) {
      throw Error("parameter " + ref.param->name + " is listed under two owners");
    }
  }
  return m;
}

RationaleModel RationaleModel::build(const ModelConfig& cfg, Vocabulary vocab,
                                     EmbeddingTable embeddings, std::uint64_t seed) {
  if (embeddings.dim() != cfg.embedding_dim) {
    throw ConfigError("embedding table has dimension " + std::to_string(embeddings.dim()) +
                      ", model expects " + std::to_string(cfg.embedding_dim));
  }
  if (embeddings.size() != vocab.size()) {
    throw ConfigError("embedding table rows do not match the vocabulary size");
  }
  RationaleModel m = allocate(cfg, std::move(vocab), embeddings.size());
  embeddings.zero_reserved();
  m.embedding_.value = embeddings.matrix();

  Rng rng(derive_seed(seed, 0x30de1));
  for (int i = 0; i < cfg.num_layers; ++i) {
    m.gen_encoder_.layers()[static_cast<std::size_t>(i)]->init(rng);
    if (i >= cfg.share_depth) m.pred_encoder_.layers()[static_cast<std::size_t>(i)]->init(rng);
  }
  m.gen_head_.init(rng);
  m.pred_head_.init(rng);
  return m;
}

std::vector<ParamRef> RationaleModel::parameters() {
  std::vector<ParamRef> out;
  const auto depth = static_cast<std::size_t>(cfg_.share_depth);
  for (std::size_t i = 0; i < depth; ++i) {
    for (auto* p : gen_encoder_.layers()[i]->parameters()) out.push_back({p, Owner::kShared});
  }
  for (std::size_t i = depth; i < gen_encoder_.depth(); ++i) {
    for (auto* p : gen_encoder_.layers()[i]->parameters()) out.push_back({p, Owner::kGenerator});
  }
  out.push_back({&gen_head_.weight, Owner::kGenerator});
  out.push_back({&gen_head_.bias, Owner::kGenerator});
  for (std::size_t i = depth; i < pred_encoder_.depth(); ++i) {
    for (auto* p : pred_encoder_.layers()[i]->parameters()) out.push_back({p, Owner::kPredictor});
  }
  out.push_back({&pred_head_.weight, Owner::kPredictor});
  out.push_back({&pred_head_.bias, Owner::kPredictor});
  if (cfg_.train_embeddings) out.push_back({&embedding_, Owner::kShared});
  return out;
}

std::vector<Param*> RationaleModel::tensors() {
  std::vector<Param*> out{&embedding_};
  for (const auto& ref : parameters()) {
    if (ref.param != &embedding_) out.push_back(ref.param);
  }
  return out;
}

void RationaleModel::zero_grad() {
  for (auto* p : tensors()) p->zero_grad();
}

Matrix RationaleModel::embed(const Eigen::MatrixXi& ids) const {
  const auto T = ids.rows();
  const auto B = ids.cols();
  Matrix out(cfg_.embedding_dim, T * B);
  for (Eigen::Index t = 0; t < T; ++t) {
    for (Eigen::Index b = 0; b < B; ++b) {
      const int id = ids(t, b);
      if (id == Vocabulary::kPad || id == Vocabulary::kMask) {
        out.col(t * B + b).setZero();
      } else {
        out.col(t * B + b) = embedding_.value.col(id);
      }
    }
  }
  return out;
}

ForwardResult RationaleModel::forward(const Batch& batch, const ForwardOptions& options) const {
  ForwardResult r;
  r.shape = {batch.steps(), batch.size()};
  r.embedded = embed(batch.ids);
  const bool external_mask = options.force_full_mask || options.mask_override != nullptr;

  if (external_mask) {
    r.used_mask = options.force_full_mask ? batch.real : options.mask_override->cwiseProduct(batch.real);
  } else {
    r.gen_states = gen_encoder_.forward(r.embedded, batch.real, r.shape, &r.gen_cache);
    const Matrix logits = generator_logits(gen_head_, r.gen_states, r.shape);
    r.mask = sample_mask(logits, batch.real, cfg_.temperature, options.mode, options.noise_seed);
    const bool soft = options.mode == Mode::kTrain && options.relaxation == Relaxation::kSoft;
    r.used_mask = soft ? r.mask.soft : r.mask.hard;
    r.mask_has_gradient = options.mode == Mode::kTrain;
  }

  r.masked = apply_mask(r.embedded, r.used_mask);
  Prediction p = predict(pred_encoder_, pred_head_, r.masked, batch.real, r.shape, true);
  r.logits = std::move(p.logits);
  r.pred_states = std::move(p.states);
  r.pred_cache = std::move(p.cache);
  r.pool = std::move(p.pool);
  r.ids = batch.ids;
  r.real = batch.real;
  return r;
}

void RationaleModel::backward(const ForwardResult& fwd, const Matrix& d_logits,
                              const Matrix& d_mask) {
  const auto cols = static_cast<Eigen::Index>(fwd.shape.steps) * fwd.shape.batch;
  const Matrix d_pooled = pred_head_.backward(fwd.pool.pooled, d_logits);
  const Matrix d_states = max_pool_backward(fwd.pool, d_pooled, cols);
  const Matrix d_masked = pred_encoder_.backward(fwd.real, fwd.shape, fwd.pred_cache, d_states);

  Matrix d_embedded;
  if (cfg_.train_embeddings) d_embedded = apply_mask(d_masked, fwd.used_mask);

  if (fwd.mask_has_gradient) {
    // d loss / d mask(t, b) = <d masked column, embedded column> + regularizer term.
    Matrix d_used(1, cols);
    for (Eigen::Index c = 0; c < cols; ++c) d_used(0, c) = d_masked.col(c).dot(fwd.embedded.col(c));
    Matrix d_soft = row_to_grid(d_used, fwd.shape);
    if (d_mask.size() > 0) d_soft += d_mask;
    // Straight-through: the relaxed value's sensitivity stands in for the hard mask's.
    const auto& soft = fwd.mask.soft;
    Matrix d_logit = (d_soft.array() * soft.array() * (1.0 - soft.array()) / fwd.mask.temperature)
                         .matrix()
                         .cwiseProduct(fwd.real);
    const Matrix d_gen_states = gen_head_.backward(fwd.gen_states, grid_to_row(d_logit));
    const Matrix d_gen_in = gen_encoder_.backward(fwd.real, fwd.shape, fwd.gen_cache, d_gen_states);
    if (cfg_.train_embeddings) d_embedded += d_gen_in;
  }

  if (cfg_.train_embeddings) {
    for (Eigen::Index t = 0; t < fwd.ids.rows(); ++t) {
      for (Eigen::Index b = 0; b < fwd.ids.cols(); ++b) {
        const int id = fwd.ids(t, b);
        if (id == Vocabulary::kPad || id == Vocabulary::kMask) continue;
        embedding_.grad.col(id) += d_embedded.col(t * fwd.ids.cols() + b);
      }
    }
  }
}

ParamCounts RationaleModel::param_count() const {
  ParamCounts c;
  const auto depth = static_cast<std::size_t>(cfg_.share_depth);
  for (std::size_t i = 0; i < gen_encoder_.depth(); ++i) {
    const auto n = gen_encoder_.layers()[i]->parameter_count();
    (i < depth ? c.shared : c.generator) += n;
  }
  for (std::size_t i = depth; i < pred_encoder_.depth(); ++i) {
    c.predictor += pred_encoder_.layers()[i]->parameter_count();
  }
  c.generator += gen_head_.weight.size() + gen_head_.bias.size();
  c.predictor += pred_head_.weight.size() + pred_head_.bias.size();
  c.embedding = embedding_.size();
  c.total = c.generator + c.predictor + c.shared + (cfg_.train_embeddings ? c.embedding : 0);
  c.total_with_embedding = c.generator + c.predictor + c.shared + c.embedding;
  return c;
}

std::vector<Matrix> RationaleModel::snapshot() const {
  std::vector<Matrix> out;
  for (auto* p : const_cast<RationaleModel*>(this)->tensors()) out.push_back(p->value);
  return out;
}

void RationaleModel::restore(const std::vector<Matrix>& values) {
  auto params = tensors();
  if (params.size() != values.size()) throw Error("snapshot does not match the model structure");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->value.rows() != values[i].rows() || params[i]->value.cols() != values[i].cols()) {
      throw Error("snapshot tensor " + params[i]->name + " has the wrong shape");
    }
    params[i]->value = values[i];
  }
}

RationaleModel RationaleModel::from_snapshot(const ModelConfig& cfg, Vocabulary vocab,
                                             const std::vector<Matrix>& values) {
  if (values.empty()) throw Error("empty snapshot");
  const int rows = static_cast<int>(values.front().cols());
  RationaleModel m = allocate(cfg, std::move(vocab), rows);
  m.restore(values);
  return m;
}

RationaleModel RationaleModel::clone() const {
  return from_snapshot(cfg_, vocab_, snapshot());
}

Matrix encode_tokens(const RationaleModel& model, const EncoderStack& encoder,
                     const std::vector<std::string>& tokens) {
  const auto T = static_cast<Eigen::Index>(tokens.size());
  Eigen::MatrixXi ids(T, 1);
  for (Eigen::Index t = 0; t < T; ++t) ids(t, 0) = model.vocab().lookup(tokens[static_cast<std::size_t>(t)]);
  const Matrix real = Matrix::Ones(T, 1);
  return encoder.forward(model.embed(ids), real, {static_cast<int>(T), 1}, nullptr);
}

}  // namespace rationalift

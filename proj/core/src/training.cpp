#include "rationalift/training.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>

#include "rationalift/error.h"

namespace rationalift {

namespace {

double global_norm(const std::vector<ParamRef>& params) {
  double sq = 0.0;
  for (const auto& ref : params) sq += ref.param->grad.squaredNorm();
  return std::sqrt(sq);
}

bool bitwise_equal(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

// Strict preference of epoch a over epoch b under the select_model rule.
bool preferred(const EpochRecord& a, const EpochRecord& b, double alpha, double delta) {
  const double gap_a = std::abs(a.dev_sparsity - alpha);
  const double gap_b = std::abs(b.dev_sparsity - alpha);
  const bool in_a = gap_a <= delta;
  const bool in_b = gap_b <= delta;
  if (in_a != in_b) return in_a;
  if (in_a) return a.dev_accuracy > b.dev_accuracy;
  return gap_a < gap_b;
}

std::vector<Matrix> trainable_values(RationaleModel& model) {
  std::vector<Matrix> out;
  for (const auto& ref : model.parameters()) out.push_back(ref.param->value);
  return out;
}

void set_trainable_values(RationaleModel& model, const std::vector<Matrix>& values) {
  auto params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) params[i].param->value = values[i];
}

Matrix mask_matrix(const Dataset& data, const Batch& batch, const PretrainMask& view) {
  Matrix m = Matrix::Zero(batch.steps(), batch.size());
  for (int b = 0; b < batch.size(); ++b) {
    const Mask full = view(data.examples[batch.indices[static_cast<std::size_t>(b)]]);
    for (int t = 0; t < batch.lengths[static_cast<std::size_t>(b)]; ++t) {
      if (static_cast<std::size_t>(t) < full.size()) m(t, b) = full[static_cast<std::size_t>(t)];
    }
  }
  return m;
}

// First-token selection probabilities under the generator view; one per example.
Matrix first_token_logits(const RationaleModel& model, const Batch& batch, Matrix* states,
                          EncoderStack::Cache* cache) {
  const SequenceShape shape{batch.steps(), batch.size()};
  Matrix s = model.generator_encoder().forward(model.embed(batch.ids), batch.real, shape, cache);
  Matrix first = model.generator_head().forward(s.leftCols(batch.size()));
  if (states) *states = std::move(s);
  return first;
}

double first_token_accuracy(const RationaleModel& model, const std::vector<Batch>& batches) {
  std::size_t hit = 0, total = 0;
  for (const auto& batch : batches) {
    const Matrix z = first_token_logits(model, batch, nullptr, nullptr);
    for (int b = 0; b < batch.size(); ++b) {
      const int guess = z(0, b) > 0.0 ? 1 : 0;
      hit += guess == batch.labels[static_cast<std::size_t>(b)];
      ++total;
    }
  }
  return total ? static_cast<double>(hit) / static_cast<double>(total) : 0.0;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr_gen > 0.0) || !(lr_pred > 0.0)) throw ConfigError("learning rates must be positive");
  if (batch_size < 1 || eval_batch_size < 1) throw ConfigError("batch sizes must be positive");
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (max_len < 1) throw ConfigError("max_len must be positive");
  if (delta_sparsity < 0.0) throw ConfigError("delta_sparsity must be non-negative");
  if (clip_norm < 0.0) throw ConfigError("clip_norm must be non-negative");
  objective.validate();
}

double TrainConfig::rate_for(Owner owner) const {
  switch (owner) {
    case Owner::kGenerator: return lr_gen;
    case Owner::kPredictor: return lr_pred;
    case Owner::kShared: return shared_rate == SharedRate::kGenerator ? lr_gen : lr_pred;
  }
  return lr_gen;
}

void Adam::step(const std::vector<Update>& updates) {
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  for (const auto& u : updates) {
    Param& p = *u.param;
    auto [it, fresh] = moments_.try_emplace(&p);
    Moments& mo = it->second;
    if (fresh) {
      mo.m = Matrix::Zero(p.value.rows(), p.value.cols());
      mo.v = Matrix::Zero(p.value.rows(), p.value.cols());
    }
    mo.m = beta1_ * mo.m + (1.0 - beta1_) * p.grad;
    mo.v = beta2_ * mo.v + (1.0 - beta2_) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= u.lr * (mo.m.array() / c1) / ((mo.v.array() / c2).sqrt() + epsilon_);
  }
}

double TrainResult::best_f1() const {
  if (!best_epoch) return 0.0;
  const auto& rec = history.epochs[*best_epoch];
  return rec.annotation && rec.annotation->overlap ? rec.annotation->overlap->f1 : 0.0;
}

std::size_t select_model(const TrainHistory& history, double alpha, double delta) {
  if (history.epochs.empty()) throw Error("select_model: empty history");
  std::size_t best = 0;
  for (std::size_t i = 1; i < history.epochs.size(); ++i) {
    if (preferred(history.epochs[i], history.epochs[best], alpha, delta)) best = i;
  }
  return best;
}

bool shared_views_identical(const RationaleModel& model) {
  const auto depth = static_cast<std::size_t>(model.config().share_depth);
  const auto& gen = model.generator_encoder().layers();
  const auto& pred = model.predictor_encoder().layers();
  for (std::size_t i = 0; i < depth; ++i) {
    auto gp = gen[i]->parameters();
    auto pp = pred[i]->parameters();
    for (std::size_t k = 0; k < gp.size(); ++k) {
      if (!bitwise_equal(gp[k]->value, pp[k]->value)) return false;
    }
  }
  return true;
}

TrainResult train(RationaleModel& model, const TrainData& data, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  if (!data.train || !data.dev) throw ConfigError("train requires train and dev datasets");
  TrainResult result;
  if (cfg.epochs == 0) return result;

  Adam adam(cfg.beta1, cfg.beta2, cfg.epsilon);
  std::vector<Matrix> best_values;
  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    const auto batches = make_batches(*data.train, model.vocab(), cfg.batch_size, cfg.max_len,
                                      derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch)), true);
    double n_seen = 0;
    for (const auto& batch : batches) {
      ForwardOptions opts;
      opts.mode = Mode::kTrain;
      opts.noise_seed = derive_seed(cfg.seed, 0x100000000ULL + static_cast<std::uint64_t>(step));
      const ForwardResult fwd = model.forward(batch, opts);
      const LossTerm ce = cross_entropy(fwd.logits, batch.labels);
      const LossTerm omega = sparsity_coherence(fwd.used_mask, batch.lengths, cfg.objective);
      const double loss = total_loss(ce.value, omega.value);
      if (!std::isfinite(loss)) {
        throw NumericError("loss diverged (" + std::to_string(loss) + ") at epoch " +
                           std::to_string(epoch) + ", step " + std::to_string(step));
      }
      model.zero_grad();
      model.backward(fwd, ce.grad, omega.grad);

      auto params = model.parameters();
      if (cfg.clip_norm > 0.0) {
        const double norm = global_norm(params);
        if (norm > cfg.clip_norm) {
          for (auto& ref : params) ref.param->grad *= cfg.clip_norm / norm;
        }
      }
      std::vector<Adam::Update> updates;
      updates.reserve(params.size());
      for (const auto& ref : params) updates.push_back({ref.param, cfg.rate_for(ref.owner)});
      adam.step(updates);
      ++step;

      const double w = batch.size();
      rec.train_ce += ce.value * w;
      rec.train_omega += omega.value * w;
      n_seen += w;
    }
    rec.train_ce /= n_seen;
    rec.train_omega /= n_seen;
    rec.train_loss = rec.train_ce + rec.train_omega;

    if (!shared_views_identical(model)) {
      throw Error("shared encoder views diverged after epoch " + std::to_string(epoch));
    }

    const Evaluation dev = evaluate(model, *data.dev, cfg.eval_batch_size, cfg.max_len);
    rec.dev_accuracy = dev.metrics.accuracy;
    rec.dev_sparsity = dev.metrics.sparsity;
    const Dataset* probe_set = data.dev;
    const std::vector<Mask>* probe_masks = &dev.masks;
    Evaluation ann;
    if (data.annotation) {
      ann = evaluate(model, *data.annotation, cfg.eval_batch_size, cfg.max_len);
      rec.annotation = ann.metrics;
      probe_set = data.annotation;
      probe_masks = &ann.masks;
    }
    rec.marker_rate = marker_selection_rate(*probe_set, *probe_masks);
    rec.selection = selection_rates(*probe_set, *probe_masks);

    result.history.epochs.push_back(rec);
    if (!result.best_epoch ||
        preferred(rec, result.history.epochs[*result.best_epoch], cfg.objective.alpha,
                  cfg.delta_sparsity)) {
      result.best_epoch = result.history.epochs.size() - 1;
      best_values = trainable_values(model);
    }
    if (on_epoch) on_epoch(rec);
  }
  set_trainable_values(model, best_values);
  return result;
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<GridCell> lr_grid(const ModelFactory& make_model, const TrainData& data,
                              const TrainConfig& base, const std::vector<double>& gen_rates,
                              const std::vector<double>& pred_rates,
                              const std::vector<std::uint64_t>& seeds) {
  if (gen_rates.empty() || pred_rates.empty() || seeds.empty()) {
    throw ConfigError("lr_grid needs non-empty rate and seed lists");
  }
  std::vector<GridCell> cells;
  for (double lg : gen_rates) {
    for (double lp : pred_rates) {
      GridCell cell{lg, lp, {}, 0.0};
      for (auto seed : seeds) {
        RationaleModel model = make_model(seed);
        if (model.config().share_depth != 0) {
          throw ConfigError("lr_grid runs the two-phase model (share_depth = 0)");
        }
        TrainConfig cfg = base;
        cfg.lr_gen = lg;
        cfg.lr_pred = lp;
        cfg.seed = seed;
        cell.f1.push_back(train(model, data, cfg).best_f1());
      }
      cell.median_f1 = median(cell.f1);
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

void SkewConfig::validate() const {
  if (!(k > 0.0)) throw ConfigError("skew k must be positive");
  if (kind == SkewKind::kGenerator && !(k > 0.5 && k < 1.0)) {
    throw ConfigError("generator skew threshold must lie in (0.5, 1)");
  }
  if (kind == SkewKind::kPredictor && k != std::floor(k)) {
    throw ConfigError("predictor skew k counts epochs and must be an integer");
  }
  if (batch_size < 1 || !(lr > 0.0) || epoch_cap < 1 || max_len < 1) {
    throw ConfigError("skew batch_size, lr, epoch_cap and max_len must be positive");
  }
}

Mask first_sentence_mask(const Example& example, std::size_t cap) {
  Mask m(example.tokens.size(), 0);
  for (std::size_t i = 0; i < m.size() && i < cap; ++i) {
    m[i] = 1;
    if (example.tokens[i] == ".") break;
  }
  return m;
}

Mask marker_only_mask(const Example& example) {
  Mask m(example.tokens.size(), 0);
  for (std::size_t i = 0; i < m.size(); ++i) {
    m[i] = classify_token(example.tokens[i]) == TokenClass::kMarker;
  }
  return m;
}

SkewResult pretrain_skewed_predictor(RationaleModel& model, const Dataset& data,
                                     const SkewConfig& cfg, const PretrainMask& view) {
  cfg.validate();
  SkewResult result;
  const int epochs = static_cast<int>(cfg.k);
  std::vector<Param*> targets;
  for (const auto& ref : model.parameters()) {
    if (ref.owner != Owner::kGenerator && ref.param != &model.embedding_param()) {
      targets.push_back(ref.param);
    }
  }
  Adam adam(0.9, 0.999, 1e-8);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const auto batches = make_batches(data, model.vocab(), cfg.batch_size, cfg.max_len,
                                      derive_seed(cfg.seed, 0x5e00 + static_cast<std::uint64_t>(epoch)), true);
    std::size_t hit = 0, total = 0;
    for (const auto& batch : batches) {
      const Matrix mask = mask_matrix(data, batch, view);
      ForwardOptions opts;
      opts.mode = Mode::kTrain;
      opts.mask_override = &mask;
      const ForwardResult fwd = model.forward(batch, opts);
      const LossTerm ce = cross_entropy(fwd.logits, batch.labels);
      if (!std::isfinite(ce.value)) throw NumericError("predictor pretraining diverged");
      model.zero_grad();
      model.backward(fwd, ce.grad, Matrix());
      std::vector<Adam::Update> updates;
      for (auto* p : targets) updates.push_back({p, cfg.lr});
      adam.step(updates);
      ++result.steps_run;
      for (int b = 0; b < batch.size(); ++b) {
        Eigen::Index best;
        fwd.logits.col(b).maxCoeff(&best);
        hit += best == batch.labels[static_cast<std::size_t>(b)];
        ++total;
      }
    }
    result.accuracy_trace.push_back(total ? static_cast<double>(hit) / static_cast<double>(total) : 0.0);
    ++result.epochs_run;
  }
  return result;
}

SkewResult pretrain_skewed_generator(RationaleModel& model, const Dataset& train,
                                     const Dataset& dev, const SkewConfig& cfg) {
  cfg.validate();
  SkewResult result;
  std::vector<Param*> targets;
  for (const auto& ref : model.parameters()) {
    if (ref.owner != Owner::kPredictor && ref.param != &model.embedding_param()) {
      targets.push_back(ref.param);
    }
  }
  const auto dev_batches = make_batches(dev, model.vocab(), 512, cfg.max_len, 0, false);
  double acc = first_token_accuracy(model, dev_batches);
  double best = acc;
  result.accuracy_trace.push_back(acc);
  if (acc > cfg.k) {
    result.pre_acc = acc;
    return result;
  }
  Adam adam(0.9, 0.999, 1e-8);
  for (int epoch = 0; epoch < cfg.epoch_cap; ++epoch) {
    const auto batches = make_batches(train, model.vocab(), cfg.batch_size, cfg.max_len,
                                      derive_seed(cfg.seed, 0x6e00 + static_cast<std::uint64_t>(epoch)), true);
    ++result.epochs_run;
    for (const auto& batch : batches) {
      Matrix states;
      EncoderStack::Cache cache;
      const Matrix z = first_token_logits(model, batch, &states, &cache);
      // Binary cross-entropy of sigmoid(z) against the text label, batch mean.
      Matrix dz(1, batch.size());
      double loss = 0.0;
      for (int b = 0; b < batch.size(); ++b) {
        const double y = batch.labels[static_cast<std::size_t>(b)];
        const double p = 1.0 / (1.0 + std::exp(-z(0, b)));
        loss += std::log1p(std::exp(-std::abs(z(0, b)))) + std::max(z(0, b), 0.0) - y * z(0, b);
        dz(0, b) = (p - y) / batch.size();
      }
      if (!std::isfinite(loss)) throw NumericError("generator pretraining diverged");
      model.zero_grad();
      Matrix d_states = Matrix::Zero(states.rows(), states.cols());
      d_states.leftCols(batch.size()) = model.generator_head().backward(states.leftCols(batch.size()), dz);
      model.generator_encoder().backward(batch.real, {batch.steps(), batch.size()}, cache, d_states);
      std::vector<Adam::Update> updates;
      for (auto* p : targets) updates.push_back({p, cfg.lr});
      adam.step(updates);
      ++result.steps_run;

      acc = first_token_accuracy(model, dev_batches);
      best = std::max(best, acc);
      result.accuracy_trace.push_back(acc);
      if (acc > cfg.k) {
        result.pre_acc = acc;
        return result;
      }
    }
  }
  throw Error("generator pretraining did not exceed accuracy " + std::to_string(cfg.k) +
              " within " + std::to_string(cfg.epoch_cap) + " epochs (best " +
              std::to_string(best) + ")");
}

}  // namespace rationalift

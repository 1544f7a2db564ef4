#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <unordered_map>
#include <vector>

#include "rationalift/evaluation.h"
#include "rationalift/model.h"
#include "rationalift/objective.h"

namespace rationalift {

// Learning rate applied to parameters used by both generator and predictor.
enum class SharedRate { kGenerator, kPredictor };

struct TrainConfig {
  double lr_gen = 1e-3;
  double lr_pred = 1e-3;
  SharedRate shared_rate = SharedRate::kGenerator;
  int batch_size = 64;
  int eval_batch_size = 256;
  int epochs = 30;
  int max_len = 256;
  std::uint64_t seed = 1;
  ObjectiveConfig objective;
  double delta_sparsity = 0.05;
  double clip_norm = 0.0;  // 0 disables clipping
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
  double rate_for(Owner owner) const;
};

// Adaptive moment estimation with a learning rate per parameter.
class Adam {
 public:
  Adam(double beta1, double beta2, double epsilon)
      : beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

  struct Update {
    Param* param;
    double lr;
  };
  void step(const std::vector<Update>& updates);
  long steps() const { return steps_; }

 private:
  struct Moments {
    Matrix m, v;
  };
  double beta1_, beta2_, epsilon_;
  long steps_ = 0;
  std::unordered_map<const Param*, Moments> moments_;
};

struct EpochRecord {
  int epoch = 0;
  double train_ce = 0.0;
  double train_omega = 0.0;
  double train_loss = 0.0;
  double dev_accuracy = 0.0;
  double dev_sparsity = 0.0;
  std::optional<RationaleMetrics> annotation;
  std::optional<double> marker_rate;
  ClassRates selection{};
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

struct TrainData {
  const Dataset* train = nullptr;
  const Dataset* dev = nullptr;
  const Dataset* annotation = nullptr;  // optional
};

struct TrainResult {
  TrainHistory history;
  std::optional<std::size_t> best_epoch;  // index into history; empty for zero epochs

  // Annotation F1 of the selected epoch (0 when unavailable).
  double best_f1() const;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Joint optimization of generator and predictor on CE + regularizer. The
// model is left holding the parameters of the epoch chosen by select_model.
// Throws NumericError when the loss stops being finite.
TrainResult train(RationaleModel& model, const TrainData& data, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

// Among epochs whose dev sparsity is within delta of alpha, the highest dev
// accuracy (earliest on ties); otherwise the epoch closest to alpha.
std::size_t select_model(const TrainHistory& history, double alpha, double delta);

// Bitwise equality of the generator-view and predictor-view copies of every
// shared layer.
bool shared_views_identical(const RationaleModel& model);

using ModelFactory = std::function<RationaleModel(std::uint64_t seed)>;

struct GridCell {
  double lr_gen = 0.0;
  double lr_pred = 0.0;
  std::vector<double> f1;  // one per seed
  double median_f1 = 0.0;
};

// Trains every (lr_gen, lr_pred) pair for every seed on models from
// `make_model`, which must build the two-phase configuration.
std::vector<GridCell> lr_grid(const ModelFactory& make_model, const TrainData& data,
                              const TrainConfig& base, const std::vector<double>& gen_rates,
                              const std::vector<double>& pred_rates,
                              const std::vector<std::uint64_t>& seeds);

double median(std::vector<double> values);

enum class SkewKind { kPredictor, kGenerator };

struct SkewConfig {
  SkewKind kind = SkewKind::kPredictor;
  // Epochs for predictor skew; accuracy threshold in (0.5, 1) for generator skew.
  double k = 20;
  int batch_size = 500;
  double lr = 1e-3;
  int epoch_cap = 20;
  int max_len = 256;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SkewResult {
  int epochs_run = 0;
  long steps_run = 0;
  std::optional<double> pre_acc;   // generator skew: accuracy when pretraining stopped
  std::vector<double> accuracy_trace;
};

// Tokens up to and including the first "." (at most `cap` tokens).
Mask first_sentence_mask(const Example& example, std::size_t cap = 15);
// Only marker tokens selected.
Mask marker_only_mask(const Example& example);

using PretrainMask = std::function<Mask(const Example&)>;

// Trains the predictor view (its encoder layers, including shared ones, and
// the predictor head) for k epochs on inputs reduced by `view`. Generator
// head and generator-only layers are untouched.
SkewResult pretrain_skewed_predictor(RationaleModel& model, const Dataset& data,
                                     const SkewConfig& cfg,
                                     const PretrainMask& view = [](const Example& e) {
                                       return first_sentence_mask(e);
                                     });

// Trains the generator view as a classifier of the text label from the first
// token's selection probability until dev accuracy exceeds k. Predictor-only
// parameters are untouched. Throws Error when the epoch cap is hit first.
SkewResult pretrain_skewed_generator(RationaleModel& model, const Dataset& train,
                                     const Dataset& dev, const SkewConfig& cfg);

}  // namespace rationalift

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dlaser {

// Self-contained dense-network engine: layers, scalers, losses, Adam/RMSprop,
// the shared-core/multi-head model, and offline grid search. Double precision
// throughout; everything deterministic given seeds.

struct Matrix {
  long rows = 0;
  long cols = 0;
  std::vector<double> v;  // row-major

  Matrix() = default;
  Matrix(long r, long c) : rows(r), cols(c), v(static_cast<size_t>(r * c), 0.0) {}
  double& at(long r, long c) { return v[static_cast<size_t>(r * cols + c)]; }
  double at(long r, long c) const { return v[static_cast<size_t>(r * cols + c)]; }
  std::span<double> row(long r) { return {v.data() + r * cols, static_cast<size_t>(cols)}; }
  std::span<const double> row(long r) const {
    return {v.data() + r * cols, static_cast<size_t>(cols)};
  }
  Matrix take_rows(std::span<const long> idx) const;
};

enum class ScalerKind { Standard, MaxAbs, MinMax };
const char* scaler_kind_name(ScalerKind k);
ScalerKind scaler_kind_from_name(const std::string& name);

// Per-feature affine transform x' = (x - a) / b with kind-specific statistics.
// Degenerate features (zero spread) pass through centered.
class Scaler {
 public:
  explicit Scaler(ScalerKind kind = ScalerKind::Standard) : kind_(kind) {}

  void fit(const Matrix& data);
  Matrix transform(const Matrix& data) const;   // throws if not fitted
  Matrix inverse_transform(const Matrix& data) const;
  void transform_row(std::span<const double> in, std::span<double> out) const;

  bool fitted() const { return fitted_; }
  ScalerKind kind() const { return kind_; }

  // checkpoint access
  const std::vector<double>& offsets() const { return a_; }
  const std::vector<double>& scales() const { return b_; }
  void restore(ScalerKind kind, std::vector<double> a, std::vector<double> b);

 private:
  ScalerKind kind_;
  bool fitted_ = false;
  std::vector<double> a_, b_;
};

enum class Activation { Relu, Sigmoid, Linear };

struct DenseLayer {
  long in = 0;
  long out = 0;
  Activation act = Activation::Relu;
  std::vector<double> w;  // out x in, row-major
  std::vector<double> b;  // out
};

enum class OptimizerKind { Adam, RMSprop };
const char* optimizer_kind_name(OptimizerKind k);
OptimizerKind optimizer_kind_from_name(const std::string& name);

struct HyperParams {
  ScalerKind scaler = ScalerKind::Standard;
  int batch_size = 16;
  double learning_rate = 5e-3;
  OptimizerKind optimizer = OptimizerKind::Adam;
  std::vector<int> core_layers{50, 25, 15};
  std::vector<int> class_layers{20, 10, 5};   // hidden; width-1 sigmoid appended
  std::vector<int> regr_layers{40, 20, 10, 5};  // hidden; width-1 linear appended

  std::string describe() const;
};

struct HeadKindSpec {
  std::string goal_id;
  bool classification = true;
};

// Per-head label vectors aligned with sample rows: {0,1} for classification
// heads, raw quality values for the regression head.
using LabelSet = std::vector<std::vector<double>>;

struct Head {
  std::string goal_id;
  bool classification = true;
  std::vector<DenseLayer> layers;
};

class NnDivergence : public std::exception {
 public:
  const char* what() const noexcept override { return "neural training diverged (NaN/Inf loss)"; }
};

class NeuralModel {
 public:
  NeuralModel() = default;

  // Hidden activations are ReLU; classification heads end in a width-1 sigmoid
  // layer, the regression head in a width-1 linear layer. Glorot-uniform
  // weights, zero biases, seeded.
  static NeuralModel build(long input_width, std::span<const HeadKindSpec> heads,
                           const HyperParams& hp, std::uint64_t seed);

  // Low level: inputs already scaled. One pass serves every head.
  std::vector<std::vector<double>> forward(const Matrix& scaled) const;

  // Scales raw inputs, then forward. Counts one prediction pass.
  std::vector<std::vector<double>> predict(const Matrix& raw) const;

  // One optimizer update on a batch of scaled inputs with target-scaled
  // regression labels. Returns the pre-update summed loss (mean BCE per
  // classification head + mean MSE for the regression head). Throws
  // NnDivergence on NaN/Inf loss without applying the update.
  double train_step(const Matrix& scaled, const LabelSet& labels);

  // Online update entry point: scales inputs and regression labels, shuffles,
  // and runs `epochs` passes of mini-batches of hp.batch_size. Returns the
  // mean per-step loss.
  double update(const Matrix& raw_inputs, const LabelSet& raw_labels, int epochs,
                std::uint64_t shuffle_seed);

  // Refit input scaler (and the regression target scaler) on the sliding
  // training window.
  void refit_scalers(const Matrix& raw_inputs, const LabelSet& raw_labels);

  // Online variant: input statistics track the drift, the target
  // standardization stays put so the regression head chases a stable target.
  void refit_input_scaler(const Matrix& raw_inputs);

  // Summed per-head validation loss on raw data (scaled internally).
  double evaluate_loss(const Matrix& raw_inputs, const LabelSet& raw_labels) const;

  double compute_loss(const Matrix& scaled, const LabelSet& labels) const;

  // Loss and gradients in tensor order (w then b per layer, core first, then
  // heads), without applying an update.
  std::pair<double, std::vector<std::vector<double>>> loss_and_gradients(
      const Matrix& scaled, const LabelSet& labels) const;

  long input_width() const { return input_width_; }
  long parameter_count() const;
  long forward_macs_per_row() const;  // multiply-accumulates, modeled cost basis
  const std::vector<Head>& heads() const { return heads_; }
  std::vector<Head>& heads_mut() { return heads_; }
  const std::vector<DenseLayer>& core() const { return core_; }
  std::vector<DenseLayer>& core_mut() { return core_; }
  const HyperParams& hyper() const { return hp_; }
  const Scaler& scaler() const { return scaler_; }
  Scaler& scaler_mut() { return scaler_; }
  const Scaler& target_scaler() const { return target_scaler_; }

  long prediction_passes() const { return prediction_passes_; }
  void reset_prediction_passes() { prediction_passes_ = 0; }

  // Versioned structured-text checkpoint; hexfloat parameters round-trip
  // bit-exactly (optimizer state included).
  void save(const std::string& path) const;
  static NeuralModel load(const std::string& path);

  LabelSet scale_labels(const LabelSet& raw) const;

 private:
  struct TensorState {
    std::vector<double> m, v;
  };

  long input_width_ = 0;
  HyperParams hp_;
  std::vector<DenseLayer> core_;
  std::vector<Head> heads_;
  Scaler scaler_;
  Scaler target_scaler_{ScalerKind::Standard};
  std::vector<TensorState> opt_state_;  // (w,b) per layer, core then heads
  long adam_t_ = 0;
  mutable long prediction_passes_ = 0;

  void init_opt_state();
  void apply_update(std::span<const std::vector<double>> grads);
  friend struct ModelIo;
};

// Offline grid search: trains every combination on the training set, scores
// by summed validation loss, returns the argmin (ties: fewer parameters, then
// grid order). Training and validation sets must be disjoint.
struct GridRow {
  HyperParams hp;
  double val_loss = 0.0;
  bool diverged = false;
  long parameters = 0;
  std::vector<std::pair<std::string, double>> head_scores;  // F1 / Spearman per head
};

struct GridSearchResult {
  long best_index = -1;
  HyperParams best;
  NeuralModel model;  // trained with the best combination (best-epoch weights)
  std::vector<GridRow> rows;
};

struct GridSearchOptions {
  int epochs = 200;
  int patience = 20;  // early stop when val loss fails to improve this long
  std::uint64_t seed = 0;
  int threads = 1;
};

GridSearchResult grid_search(std::span<const HyperParams> grid, const Matrix& train_x,
                             const LabelSet& train_y, const Matrix& val_x,
                             const LabelSet& val_y, std::span<const HeadKindSpec> heads,
                             const GridSearchOptions& opts);

}  // namespace dlaser

#include "dlaser/neural.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "dlaser/metrics.hpp"
#include "dlaser/rng.hpp"

namespace dlaser {

namespace {
constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
constexpr double kRmsRho = 0.9;
constexpr double kRmsEps = 1e-8;
constexpr double kBceClamp = 1e-7;
}  // namespace

Matrix Matrix::take_rows(std::span<const long> idx) const {
  Matrix out(static_cast<long>(idx.size()), cols);
  for (size_t i = 0; i < idx.size(); ++i)
    std::copy_n(v.data() + idx[i] * cols, cols, out.v.data() + static_cast<long>(i) * cols);
  return out;
}

const char* scaler_kind_name(ScalerKind k) {
  switch (k) {
    case ScalerKind::Standard: return "standard";
    case ScalerKind::MaxAbs: return "max_abs";
    case ScalerKind::MinMax: return "min_max";
  }
  return "?";
}

ScalerKind scaler_kind_from_name(const std::string& name) {
  if (name == "standard") return ScalerKind::Standard;
  if (name == "max_abs") return ScalerKind::MaxAbs;
  if (name == "min_max") return ScalerKind::MinMax;
  throw std::invalid_argument("unknown scaler: " + name);
}

const char* optimizer_kind_name(OptimizerKind k) {
  return k == OptimizerKind::Adam ? "adam" : "rmsprop";
}

OptimizerKind optimizer_kind_from_name(const std::string& name) {
  if (name == "adam") return OptimizerKind::Adam;
  if (name == "rmsprop") return OptimizerKind::RMSprop;
  throw std::invalid_argument("unknown optimizer: " + name);
}

void Scaler::fit(const Matrix& data) {
  if (data.rows < 1) throw std::invalid_argument("scaler: cannot fit on empty data");
  const long n = data.rows, d = data.cols;
  a_.assign(static_cast<size_t>(d), 0.0);
  b_.assign(static_cast<size_t>(d), 1.0);
  for (long c = 0; c < d; ++c) {
    double mn = std::numeric_limits<double>::infinity();
    double mx = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (long r = 0; r < n; ++r) {
      const double x = data.at(r, c);
      mn = std::min(mn, x);
      mx = std::max(mx, x);
      sum += x;
    }
    const double mean = sum / n;
    switch (kind_) {
      case ScalerKind::Standard: {
        double ss = 0.0;
        for (long r = 0; r < n; ++r) {
          const double dlt = data.at(r, c) - mean;
          ss += dlt * dlt;
        }
        const double sd = std::sqrt(ss / n);
        a_[static_cast<size_t>(c)] = mean;
        b_[static_cast<size_t>(c)] = sd > 0.0 ? sd : 1.0;
        break;
      }
      case ScalerKind::MaxAbs: {
        const double m = std::max(std::abs(mn), std::abs(mx));
        a_[static_cast<size_t>(c)] = 0.0;
        b_[static_cast<size_t>(c)] = m > 0.0 ? m : 1.0;
        break;
      }
      case ScalerKind::MinMax: {
        const double span = mx - mn;
        a_[static_cast<size_t>(c)] = mn;
        b_[static_cast<size_t>(c)] = span > 0.0 ? span : 1.0;
        break;
      }
    }
  }
  fitted_ = true;
}

void Scaler::transform_row(std::span<const double> in, std::span<double> out) const {
  if (!fitted_) throw std::logic_error("scaler: transform before fit");
  for (size_t c = 0; c < in.size(); ++c) out[c] = (in[c] - a_[c]) / b_[c];
}

Matrix Scaler::transform(const Matrix& data) const {
  if (!fitted_) throw std::logic_error("scaler: transform before fit");
  if (static_cast<size_t>(data.cols) != a_.size())
    throw std::invalid_argument("scaler: feature count mismatch");
  Matrix out(data.rows, data.cols);
  for (long r = 0; r < data.rows; ++r) transform_row(data.row(r), out.row(r));
  return out;
}

Matrix Scaler::inverse_transform(const Matrix& data) const {
  if (!fitted_) throw std::logic_error("scaler: inverse_transform before fit");
  Matrix out(data.rows, data.cols);
  for (long r = 0; r < data.rows; ++r)
    for (long c = 0; c < data.cols; ++c)
      out.at(r, c) = data.at(r, c) * b_[static_cast<size_t>(c)] + a_[static_cast<size_t>(c)];
  return out;
}

void Scaler::restore(ScalerKind kind, std::vector<double> a, std::vector<double> b) {
  kind_ = kind;
  a_ = std::move(a);
  b_ = std::move(b);
  fitted_ = !a_.empty();
}

std::string HyperParams::describe() const {
  auto layout = [](const std::vector<int>& l) {
    std::string s;
    for (size_t i = 0; i < l.size(); ++i) {
      if (i) s += '-';
      s += std::to_string(l[i]);
    }
    return s.empty() ? std::string("none") : s;
  };
  std::ostringstream os;
  os << scaler_kind_name(scaler) << " batch=" << batch_size << " lr=" << learning_rate << " "
     << optimizer_kind_name(optimizer) << " core=[" << layout(core_layers) << "] class=["
     << layout(class_layers) << "] regr=[" << layout(regr_layers) << "]";
  return os.str();
}

namespace {

double activate(Activation a, double z) {
  switch (a) {
    case Activation::Relu: return z > 0.0 ? z : 0.0;
    case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-z));
    case Activation::Linear: return z;
  }
  return z;
}

double activate_grad_from_z(Activation a, double z, double y) {
  switch (a) {
    case Activation::Relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::Sigmoid: return y * (1.0 - y);
    case Activation::Linear: return 1.0;
  }
  return 1.0;
}

DenseLayer make_layer(long in, long out, Activation act, SplitMix64& rng) {
  DenseLayer l;
  l.in = in;
  l.out = out;
  l.act = act;
  l.w.resize(static_cast<size_t>(in * out));
  l.b.assign(static_cast<size_t>(out), 0.0);
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  for (double& w : l.w) w = rng.uniform(-bound, bound);
  return l;
}

// forward through a chain; caches z and a per layer
struct LayerCache {
  Matrix z, a;
};

void forward_chain(std::span<const DenseLayer> layers, const Matrix& input,
                   std::vector<LayerCache>& caches) {
  const Matrix* prev = &input;
  caches.resize(layers.size());
  for (size_t li = 0; li < layers.size(); ++li) {
    const DenseLayer& l = layers[li];
    LayerCache& c = caches[li];
    c.z = Matrix(prev->rows, l.out);
    c.a = Matrix(prev->rows, l.out);
    for (long r = 0; r < prev->rows; ++r) {
      const double* x = prev->v.data() + r * prev->cols;
      for (long o = 0; o < l.out; ++o) {
        const double* wrow = l.w.data() + o * l.in;
        double z = l.b[static_cast<size_t>(o)];
        for (long i = 0; i < l.in; ++i) z += wrow[i] * x[i];
        c.z.at(r, o) = z;
        c.a.at(r, o) = activate(l.act, z);
      }
    }
    prev = &c.a;
  }
}

// Backward through a chain given dL/dZ of the last layer. Appends gradients
// in layer order (w then b per layer) into grads[offset..], and returns
// dL/dA(input).
Matrix backward_chain(std::span<const DenseLayer> layers, const Matrix& input,
                      const std::vector<LayerCache>& caches, Matrix delta_z_last,
                      std::vector<std::vector<double>>& grads, size_t grad_offset) {
  Matrix delta_z = std::move(delta_z_last);  // dL/dZ of layer li
  for (size_t li = layers.size(); li-- > 0;) {
    const DenseLayer& l = layers[li];
    const Matrix& a_prev = li == 0 ? input : caches[li - 1].a;
    std::vector<double>& gw = grads[grad_offset + 2 * li];
    std::vector<double>& gb = grads[grad_offset + 2 * li + 1];
    gw.assign(l.w.size(), 0.0);
    gb.assign(l.b.size(), 0.0);
    for (long r = 0; r < delta_z.rows; ++r) {
      const double* dz = delta_z.v.data() + r * delta_z.cols;
      const double* ap = a_prev.v.data() + r * a_prev.cols;
      for (long o = 0; o < l.out; ++o) {
        const double d = dz[o];
        if (d == 0.0) continue;
        double* gwrow = gw.data() + o * l.in;
        for (long i = 0; i < l.in; ++i) gwrow[i] += d * ap[i];
        gb[static_cast<size_t>(o)] += d;
      }
    }
    // dL/dA_prev = delta_z * W
    Matrix da_prev(delta_z.rows, l.in);
    for (long r = 0; r < delta_z.rows; ++r) {
      const double* dz = delta_z.v.data() + r * delta_z.cols;
      double* da = da_prev.v.data() + r * l.in;
      for (long o = 0; o < l.out; ++o) {
        const double d = dz[o];
        if (d == 0.0) continue;
        const double* wrow = l.w.data() + o * l.in;
        for (long i = 0; i < l.in; ++i) da[i] += d * wrow[i];
      }
    }
    if (li == 0) return da_prev;
    // dL/dZ_prev = dL/dA_prev ⊙ f'(z_prev)
    const LayerCache& pc = caches[li - 1];
    delta_z = Matrix(da_prev.rows, da_prev.cols);
    for (long r = 0; r < da_prev.rows; ++r)
      for (long c = 0; c < da_prev.cols; ++c)
        delta_z.at(r, c) =
            da_prev.at(r, c) *
            activate_grad_from_z(layers[li - 1].act, pc.z.at(r, c), pc.a.at(r, c));
  }
  return Matrix(input.rows, input.cols);  // unreachable for nonempty chains
}

}  // namespace

NeuralModel NeuralModel::build(long input_width, std::span<const HeadKindSpec> heads,
                               const HyperParams& hp, std::uint64_t seed) {
  if (input_width < 1) throw std::invalid_argument("model: input width must be >= 1");
  if (heads.empty()) throw std::invalid_argument("model: at least one head required");
  for (const int n : hp.core_layers)
    if (n < 1) throw std::invalid_argument("model: layer widths must be >= 1");
  int regression_heads = 0;
  for (const HeadKindSpec& h : heads)
    if (!h.classification) ++regression_heads;
  if (regression_heads > 1)
    throw std::invalid_argument("model: at most one regression head");

  NeuralModel m;
  m.input_width_ = input_width;
  m.hp_ = hp;
  m.scaler_ = Scaler(hp.scaler);

  SplitMix64 rng(derive_seed(seed, {0x6d6f64656cULL}));
  long width = input_width;
  for (int n : hp.core_layers) {
    m.core_.push_back(make_layer(width, n, Activation::Relu, rng));
    width = n;
  }
  const long core_out = width;
  for (const HeadKindSpec& spec : heads) {
    Head h;
    h.goal_id = spec.goal_id;
    h.classification = spec.classification;
    const std::vector<int>& hidden = spec.classification ? hp.class_layers : hp.regr_layers;
    long w = core_out;
    for (int n : hidden) {
      h.layers.push_back(make_layer(w, n, Activation::Relu, rng));
      w = n;
    }
    h.layers.push_back(
        make_layer(w, 1, spec.classification ? Activation::Sigmoid : Activation::Linear, rng));
    m.heads_.push_back(std::move(h));
  }
  m.init_opt_state();
  return m;
}

void NeuralModel::init_opt_state() {
  opt_state_.clear();
  adam_t_ = 0;
  auto add = [&](const DenseLayer& l) {
    opt_state_.push_back({std::vector<double>(l.w.size(), 0.0), std::vector<double>(l.w.size(), 0.0)});
    opt_state_.push_back({std::vector<double>(l.b.size(), 0.0), std::vector<double>(l.b.size(), 0.0)});
  };
  for (const DenseLayer& l : core_) add(l);
  for (const Head& h : heads_)
    for (const DenseLayer& l : h.layers) add(l);
}

long NeuralModel::parameter_count() const {
  long n = 0;
  for (const DenseLayer& l : core_) n += static_cast<long>(l.w.size() + l.b.size());
  for (const Head& h : heads_)
    for (const DenseLayer& l : h.layers) n += static_cast<long>(l.w.size() + l.b.size());
  return n;
}

long NeuralModel::forward_macs_per_row() const {
  long n = 0;
  for (const DenseLayer& l : core_) n += l.in * l.out;
  for (const Head& h : heads_)
    for (const DenseLayer& l : h.layers) n += l.in * l.out;
  return n;
}

std::vector<std::vector<double>> NeuralModel::forward(const Matrix& scaled) const {
  if (scaled.cols != input_width_)
    throw std::invalid_argument("model: input width mismatch");
  std::vector<LayerCache> core_cache;
  forward_chain(core_, scaled, core_cache);
  const Matrix& core_out = core_.empty() ? scaled : core_cache.back().a;
  std::vector<std::vector<double>> outputs;
  outputs.reserve(heads_.size());
  std::vector<LayerCache> head_cache;
  for (const Head& h : heads_) {
    forward_chain(h.layers, core_out, head_cache);
    const Matrix& out = head_cache.back().a;
    std::vector<double> col(static_cast<size_t>(out.rows));
    for (long r = 0; r < out.rows; ++r) col[static_cast<size_t>(r)] = out.at(r, 0);
    outputs.push_back(std::move(col));
  }
  return outputs;
}

std::vector<std::vector<double>> NeuralModel::predict(const Matrix& raw) const {
  ++prediction_passes_;
  return forward(scaler_.transform(raw));
}

double NeuralModel::compute_loss(const Matrix& scaled, const LabelSet& labels) const {
  const auto outputs = forward(scaled);
  const long n = scaled.rows;
  double total = 0.0;
  for (size_t h = 0; h < heads_.size(); ++h) {
    double loss = 0.0;
    for (long r = 0; r < n; ++r) {
      const double y = labels[h][static_cast<size_t>(r)];
      const double p = outputs[h][static_cast<size_t>(r)];
      if (heads_[h].classification) {
        const double pc = std::clamp(p, kBceClamp, 1.0 - kBceClamp);
        loss += -(y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc));
      } else {
        loss += (p - y) * (p - y);
      }
    }
    total += loss / static_cast<double>(n);
  }
  return total;
}

std::pair<double, std::vector<std::vector<double>>> NeuralModel::loss_and_gradients(
    const Matrix& scaled, const LabelSet& labels) const {
  if (labels.size() != heads_.size())
    throw std::invalid_argument("train_step: label set does not match heads");
  const long n = scaled.rows;
  if (n < 1) throw std::invalid_argument("train_step: empty batch");

  std::vector<LayerCache> core_cache;
  forward_chain(core_, scaled, core_cache);
  const Matrix& core_out = core_.empty() ? scaled : core_cache.back().a;

  size_t tensors = 2 * core_.size();
  for (const Head& h : heads_) tensors += 2 * h.layers.size();
  std::vector<std::vector<double>> grads(tensors);

  double total_loss = 0.0;
  Matrix d_core_out(core_out.rows, core_out.cols);
  size_t grad_offset = 2 * core_.size();
  std::vector<LayerCache> head_cache;
  for (size_t h = 0; h < heads_.size(); ++h) {
    const Head& head = heads_[h];
    forward_chain(head.layers, core_out, head_cache);
    const Matrix& out = head_cache.back().a;
    // Loss + dL/dZ of the final width-1 layer. Both BCE∘sigmoid and MSE∘linear
    // collapse to a simple residual term.
    Matrix delta(n, 1);
    double loss = 0.0;
    for (long r = 0; r < n; ++r) {
      const double y = labels[h][static_cast<size_t>(r)];
      const double p = out.at(r, 0);
      if (head.classification) {
        const double pc = std::clamp(p, kBceClamp, 1.0 - kBceClamp);
        loss += -(y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc));
        delta.at(r, 0) = (p - y) / static_cast<double>(n);
      } else {
        loss += (p - y) * (p - y);
        delta.at(r, 0) = 2.0 * (p - y) / static_cast<double>(n);
      }
    }
    total_loss += loss / static_cast<double>(n);
    Matrix da =
        backward_chain(head.layers, core_out, head_cache, std::move(delta), grads, grad_offset);
    for (size_t i = 0; i < d_core_out.v.size(); ++i) d_core_out.v[i] += da.v[i];
    grad_offset += 2 * head.layers.size();
  }

  if (!std::isfinite(total_loss)) throw NnDivergence();

  if (!core_.empty()) {
    // dL/dZ of last core layer
    const LayerCache& last = core_cache.back();
    Matrix delta(d_core_out.rows, d_core_out.cols);
    for (long r = 0; r < delta.rows; ++r)
      for (long c = 0; c < delta.cols; ++c)
        delta.at(r, c) = d_core_out.at(r, c) *
                         activate_grad_from_z(core_.back().act, last.z.at(r, c), last.a.at(r, c));
    backward_chain(core_, scaled, core_cache, std::move(delta), grads, 0);
  }

  return {total_loss, std::move(grads)};
}

double NeuralModel::train_step(const Matrix& scaled, const LabelSet& labels) {
  auto [loss, grads] = loss_and_gradients(scaled, labels);
  apply_update(grads);
  return loss;
}

void NeuralModel::apply_update(std::span<const std::vector<double>> grads) {
  std::vector<std::vector<double>*> params;
  for (DenseLayer& l : core_) {
    params.push_back(&l.w);
    params.push_back(&l.b);
  }
  for (Head& h : heads_)
    for (DenseLayer& l : h.layers) {
      params.push_back(&l.w);
      params.push_back(&l.b);
    }

  const double lr = hp_.learning_rate;
  if (hp_.optimizer == OptimizerKind::Adam) {
    ++adam_t_;
    const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(adam_t_));
    const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(adam_t_));
    for (size_t t = 0; t < params.size(); ++t) {
      std::vector<double>& w = *params[t];
      TensorState& st = opt_state_[t];
      const std::vector<double>& g = grads[t];
      for (size_t i = 0; i < w.size(); ++i) {
        st.m[i] = kAdamBeta1 * st.m[i] + (1.0 - kAdamBeta1) * g[i];
        st.v[i] = kAdamBeta2 * st.v[i] + (1.0 - kAdamBeta2) * g[i] * g[i];
        const double mh = st.m[i] / bc1;
        const double vh = st.v[i] / bc2;
        w[i] -= lr * mh / (std::sqrt(vh) + kAdamEps);
      }
    }
  } else {
    for (size_t t = 0; t < params.size(); ++t) {
      std::vector<double>& w = *params[t];
      TensorState& st = opt_state_[t];
      const std::vector<double>& g = grads[t];
      for (size_t i = 0; i < w.size(); ++i) {
        st.v[i] = kRmsRho * st.v[i] + (1.0 - kRmsRho) * g[i] * g[i];
        w[i] -= lr * g[i] / (std::sqrt(st.v[i]) + kRmsEps);
      }
    }
  }
}

LabelSet NeuralModel::scale_labels(const LabelSet& raw) const {
  LabelSet scaled = raw;
  for (size_t h = 0; h < heads_.size(); ++h) {
    if (heads_[h].classification) continue;
    if (!target_scaler_.fitted()) throw std::logic_error("model: target scaler not fitted");
    Matrix col(static_cast<long>(raw[h].size()), 1);
    for (size_t i = 0; i < raw[h].size(); ++i) col.at(static_cast<long>(i), 0) = raw[h][i];
    const Matrix t = target_scaler_.transform(col);
    for (size_t i = 0; i < raw[h].size(); ++i) scaled[h][i] = t.at(static_cast<long>(i), 0);
  }
  return scaled;
}

void NeuralModel::refit_scalers(const Matrix& raw_inputs, const LabelSet& raw_labels) {
  scaler_.fit(raw_inputs);
  for (size_t h = 0; h < heads_.size(); ++h) {
    if (heads_[h].classification) continue;
    Matrix col(static_cast<long>(raw_labels[h].size()), 1);
    for (size_t i = 0; i < raw_labels[h].size(); ++i)
      col.at(static_cast<long>(i), 0) = raw_labels[h][i];
    target_scaler_.fit(col);
  }
}

void NeuralModel::refit_input_scaler(const Matrix& raw_inputs) { scaler_.fit(raw_inputs); }

double NeuralModel::update(const Matrix& raw_inputs, const LabelSet& raw_labels, int epochs,
                           std::uint64_t shuffle_seed) {
  const long n = raw_inputs.rows;
  if (n < 1) return 0.0;
  const Matrix scaled = scaler_.transform(raw_inputs);
  const LabelSet labels = scale_labels(raw_labels);

  double loss_sum = 0.0;
  long steps = 0;
  std::vector<long> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), 0L);
  const long batch = std::max(1, hp_.batch_size);
  for (int e = 0; e < epochs; ++e) {
    SplitMix64 rng(derive_seed(shuffle_seed, {static_cast<std::uint64_t>(e)}));
    for (long i = n - 1; i > 0; --i)
      std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(rng.uniform_int(0, i))]);
    for (long start = 0; start < n; start += batch) {
      const long len = std::min(batch, n - start);
      Matrix bx(len, scaled.cols);
      LabelSet by(heads_.size());
      for (long r = 0; r < len; ++r) {
        const long src = idx[static_cast<size_t>(start + r)];
        std::copy_n(scaled.v.data() + src * scaled.cols, scaled.cols,
                    bx.v.data() + r * scaled.cols);
      }
      for (size_t h = 0; h < heads_.size(); ++h) {
        by[h].resize(static_cast<size_t>(len));
        for (long r = 0; r < len; ++r)
          by[h][static_cast<size_t>(r)] = labels[h][static_cast<size_t>(idx[static_cast<size_t>(start + r)])];
      }
      loss_sum += train_step(bx, by);
      ++steps;
    }
  }
  return steps > 0 ? loss_sum / static_cast<double>(steps) : 0.0;
}

double NeuralModel::evaluate_loss(const Matrix& raw_inputs, const LabelSet& raw_labels) const {
  return compute_loss(scaler_.transform(raw_inputs), scale_labels(raw_labels));
}

// ---------------------------------------------------------------------------
// Checkpoint: structured text, hexfloat payloads (bit-exact round trip).

struct ModelIo {
  static void write_vec(std::ostream& os, const char* tag, const std::vector<double>& v) {
    os << tag;
    char buf[48];
    for (double x : v) {
      std::snprintf(buf, sizeof buf, " %a", x);
      os << buf;
    }
    os << "\n";
  }

  static std::vector<double> read_vec(std::istream& is, const char* tag, size_t n) {
    std::string t;
    is >> t;
    if (t != tag) throw std::runtime_error("model checkpoint: expected " + std::string(tag));
    std::vector<double> v(n);
    std::string tok;
    for (size_t i = 0; i < n; ++i) {
      is >> tok;
      v[i] = std::strtod(tok.c_str(), nullptr);
    }
    return v;
  }

  static void write_layout(std::ostream& os, const char* tag, const std::vector<int>& l) {
    os << tag << " " << l.size();
    for (int x : l) os << " " << x;
    os << "\n";
  }

  static std::vector<int> read_layout(std::istream& is, const char* tag) {
    std::string t;
    is >> t;
    if (t != tag) throw std::runtime_error("model checkpoint: expected " + std::string(tag));
    size_t n = 0;
    is >> n;
    std::vector<int> l(n);
    for (size_t i = 0; i < n; ++i) is >> l[i];
    return l;
  }

  static void write_scaler(std::ostream& os, const char* tag, const Scaler& s) {
    os << tag << " " << scaler_kind_name(s.kind()) << " " << (s.fitted() ? 1 : 0) << " "
       << s.offsets().size() << "\n";
    if (s.fitted()) {
      write_vec(os, "a", s.offsets());
      write_vec(os, "b", s.scales());
    }
  }

  static Scaler read_scaler(std::istream& is, const char* tag) {
    std::string t, kind;
    int fitted = 0;
    size_t n = 0;
    is >> t >> kind >> fitted >> n;
    if (t != tag) throw std::runtime_error("model checkpoint: expected " + std::string(tag));
    Scaler s(scaler_kind_from_name(kind));
    if (fitted) {
      std::vector<double> a = read_vec(is, "a", n);  // reads must stay ordered
      std::vector<double> b = read_vec(is, "b", n);
      s.restore(scaler_kind_from_name(kind), std::move(a), std::move(b));
    }
    return s;
  }

  static void write_layer(std::ostream& os, const DenseLayer& l) {
    const char* act = l.act == Activation::Relu ? "relu"
                      : l.act == Activation::Sigmoid ? "sigmoid"
                                                     : "linear";
    os << "layer " << l.in << " " << l.out << " " << act << "\n";
    write_vec(os, "w", l.w);
    write_vec(os, "b", l.b);
  }

  static DenseLayer read_layer(std::istream& is) {
    std::string t, act;
    DenseLayer l;
    is >> t >> l.in >> l.out >> act;
    if (t != "layer") throw std::runtime_error("model checkpoint: expected layer");
    l.act = act == "relu" ? Activation::Relu : act == "sigmoid" ? Activation::Sigmoid
                                                                 : Activation::Linear;
    l.w = read_vec(is, "w", static_cast<size_t>(l.in * l.out));
    l.b = read_vec(is, "b", static_cast<size_t>(l.out));
    return l;
  }
};

void NeuralModel::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write model checkpoint: " + path);
  os << "dlaser-model 1\n";
  os << "input_width " << input_width_ << "\n";
  char lrbuf[48];
  std::snprintf(lrbuf, sizeof lrbuf, "%a", hp_.learning_rate);
  os << "hyper " << scaler_kind_name(hp_.scaler) << " " << hp_.batch_size << " " << lrbuf << " "
     << optimizer_kind_name(hp_.optimizer) << "\n";
  ModelIo::write_layout(os, "core_layout", hp_.core_layers);
  ModelIo::write_layout(os, "class_layout", hp_.class_layers);
  ModelIo::write_layout(os, "regr_layout", hp_.regr_layers);
  ModelIo::write_scaler(os, "scaler", scaler_);
  ModelIo::write_scaler(os, "target_scaler", target_scaler_);
  os << "core " << core_.size() << "\n";
  for (const DenseLayer& l : core_) ModelIo::write_layer(os, l);
  os << "heads " << heads_.size() << "\n";
  for (const Head& h : heads_) {
    os << "head " << h.goal_id << " " << (h.classification ? "class" : "regr") << " "
       << h.layers.size() << "\n";
    for (const DenseLayer& l : h.layers) ModelIo::write_layer(os, l);
  }
  os << "opt " << opt_state_.size() << " " << adam_t_ << "\n";
  for (const TensorState& st : opt_state_) {
    ModelIo::write_vec(os, "m", st.m);
    ModelIo::write_vec(os, "v", st.v);
  }
  if (!os) throw std::runtime_error("model checkpoint write failed: " + path);
}

NeuralModel NeuralModel::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open model checkpoint: " + path);
  std::string magic;
  int version = 0;
  is >> magic >> version;
  if (magic != "dlaser-model" || version != 1)
    throw std::runtime_error("unsupported model checkpoint format: " + path);

  NeuralModel m;
  std::string t, scaler_name, opt_name, lr_tok;
  is >> t >> m.input_width_;
  if (t != "input_width") throw std::runtime_error("model checkpoint: expected input_width");
  is >> t >> scaler_name >> m.hp_.batch_size >> lr_tok >> opt_name;
  if (t != "hyper") throw std::runtime_error("model checkpoint: expected hyper");
  m.hp_.scaler = scaler_kind_from_name(scaler_name);
  m.hp_.learning_rate = std::strtod(lr_tok.c_str(), nullptr);
  m.hp_.optimizer = optimizer_kind_from_name(opt_name);
  m.hp_.core_layers = ModelIo::read_layout(is, "core_layout");
  m.hp_.class_layers = ModelIo::read_layout(is, "class_layout");
  m.hp_.regr_layers = ModelIo::read_layout(is, "regr_layout");
  m.scaler_ = ModelIo::read_scaler(is, "scaler");
  m.target_scaler_ = ModelIo::read_scaler(is, "target_scaler");

  size_t ncore = 0;
  is >> t >> ncore;
  if (t != "core") throw std::runtime_error("model checkpoint: expected core");
  for (size_t i = 0; i < ncore; ++i) m.core_.push_back(ModelIo::read_layer(is));
  size_t nheads = 0;
  is >> t >> nheads;
  if (t != "heads") throw std::runtime_error("model checkpoint: expected heads");
  for (size_t i = 0; i < nheads; ++i) {
    std::string kind;
    Head h;
    size_t nlayers = 0;
    is >> t >> h.goal_id >> kind >> nlayers;
    if (t != "head") throw std::runtime_error("model checkpoint: expected head");
    h.classification = kind == "class";
    for (size_t li = 0; li < nlayers; ++li) h.layers.push_back(ModelIo::read_layer(is));
    m.heads_.push_back(std::move(h));
  }
  size_t nopt = 0;
  long saved_t = 0;
  is >> t >> nopt >> saved_t;
  if (t != "opt") throw std::runtime_error("model checkpoint: expected opt");
  m.init_opt_state();
  if (nopt != m.opt_state_.size())
    throw std::runtime_error("model checkpoint: optimizer state mismatch");
  for (TensorState& st : m.opt_state_) {
    st.m = ModelIo::read_vec(is, "m", st.m.size());
    st.v = ModelIo::read_vec(is, "v", st.v.size());
  }
  m.adam_t_ = saved_t;
  if (!is) throw std::runtime_error("model checkpoint truncated: " + path);
  return m;
}

// ---------------------------------------------------------------------------
// Grid search

namespace {

std::uint64_t row_hash(std::span<const double> row) {
  std::uint64_t h = 1469598103934665603ULL;
  for (double x : row) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, sizeof bits);
    for (int s = 0; s < 64; s += 8) {
      h ^= (bits >> s) & 0xff;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

void check_disjoint(const Matrix& train_x, const Matrix& val_x) {
  std::unordered_map<std::uint64_t, std::vector<long>> seen;
  for (long r = 0; r < train_x.rows; ++r) seen[row_hash(train_x.row(r))].push_back(r);
  for (long r = 0; r < val_x.rows; ++r) {
    const auto it = seen.find(row_hash(val_x.row(r)));
    if (it == seen.end()) continue;
    for (long tr : it->second) {
      const auto a = val_x.row(r);
      const auto b = train_x.row(tr);
      if (std::equal(a.begin(), a.end(), b.begin())) {
        throw std::invalid_argument(
            "grid_search: training and validation sets overlap (data leakage)");
      }
    }
  }
}

struct ComboOutcome {
  double val_loss = std::numeric_limits<double>::infinity();
  bool diverged = false;
  NeuralModel model;
  std::vector<std::pair<std::string, double>> head_scores;
};

ComboOutcome run_combo(const HyperParams& hp, const Matrix& train_x, const LabelSet& train_y,
                       const Matrix& val_x, const LabelSet& val_y,
                       std::span<const HeadKindSpec> heads, const GridSearchOptions& opts,
                       std::uint64_t combo_seed) {
  ComboOutcome out;
  NeuralModel model = NeuralModel::build(train_x.cols, heads, hp, combo_seed);
  model.refit_scalers(train_x, train_y);

  double best = std::numeric_limits<double>::infinity();
  std::vector<DenseLayer> best_core;
  std::vector<Head> best_heads;
  int since_best = 0;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    try {
      model.update(train_x, train_y, 1, derive_seed(combo_seed, {0xe0, static_cast<std::uint64_t>(epoch)}));
    } catch (const NnDivergence&) {
      out.diverged = true;
      break;
    }
    const double vl = model.evaluate_loss(val_x, val_y);
    if (!std::isfinite(vl)) {
      out.diverged = true;
      break;
    }
    if (vl < best) {
      best = vl;
      best_core = model.core();
      best_heads = model.heads();
      since_best = 0;
    } else if (++since_best >= opts.patience) {
      break;
    }
  }
  if (!best_core.empty() || !best_heads.empty()) {
    model.core_mut() = best_core;
    model.heads_mut() = best_heads;
  }
  out.val_loss = out.diverged && !std::isfinite(best) ? std::numeric_limits<double>::infinity()
                                                       : best;
  out.model = std::move(model);

  if (std::isfinite(out.val_loss)) {
    const auto preds = out.model.predict(val_x);
    for (size_t h = 0; h < heads.size(); ++h) {
      if (heads[h].classification) {
        std::vector<int> p(preds[h].size()), y(val_y[h].size());
        for (size_t i = 0; i < p.size(); ++i) p[i] = preds[h][i] >= 0.5 ? 1 : 0;
        for (size_t i = 0; i < y.size(); ++i) y[i] = val_y[h][i] >= 0.5 ? 1 : 0;
        out.head_scores.emplace_back(heads[h].goal_id, f1_score(p, y));
      } else {
        const auto rho = spearman_rho(preds[h], val_y[h]);
        out.head_scores.emplace_back(heads[h].goal_id, rho.value_or(0.0));
      }
    }
  }
  return out;
}

}  // namespace

GridSearchResult grid_search(std::span<const HyperParams> grid, const Matrix& train_x,
                             const LabelSet& train_y, const Matrix& val_x,
                             const LabelSet& val_y, std::span<const HeadKindSpec> heads,
                             const GridSearchOptions& opts) {
  if (grid.empty()) throw std::invalid_argument("grid_search: empty grid");
  if (train_x.rows < 1 || val_x.rows < 1)
    throw std::invalid_argument("grid_search: empty training or validation data");
  check_disjoint(train_x, val_x);

  const long n = static_cast<long>(grid.size());
  std::vector<ComboOutcome> outcomes(static_cast<size_t>(n));

#ifdef _OPENMP
  const int threads = opts.threads > 0 ? opts.threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
#endif
  for (long i = 0; i < n; ++i) {
    outcomes[static_cast<size_t>(i)] =
        run_combo(grid[static_cast<size_t>(i)], train_x, train_y, val_x, val_y, heads, opts,
                  derive_seed(opts.seed, {static_cast<std::uint64_t>(i)}));
  }

  GridSearchResult res;
  for (long i = 0; i < n; ++i) {
    ComboOutcome& o = outcomes[static_cast<size_t>(i)];
    GridRow row;
    row.hp = grid[static_cast<size_t>(i)];
    row.val_loss = o.val_loss;
    row.diverged = o.diverged;
    row.parameters = o.model.parameter_count();
    row.head_scores = o.head_scores;
    res.rows.push_back(std::move(row));
  }
  long best = -1;
  for (long i = 0; i < n; ++i) {
    if (best < 0) {
      best = i;
      continue;
    }
    const GridRow& a = res.rows[static_cast<size_t>(i)];
    const GridRow& b = res.rows[static_cast<size_t>(best)];
    if (a.val_loss < b.val_loss ||
        (a.val_loss == b.val_loss && a.parameters < b.parameters))
      best = i;
  }
  res.best_index = best;
  res.best = grid[static_cast<size_t>(best)];
  res.model = std::move(outcomes[static_cast<size_t>(best)].model);
  return res;
}

}  // namespace dlaser

#include "musgae/rbm.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>

#include "musgae/checkpoint.h"
#include "musgae/errors.h"

namespace musgae {

namespace {

constexpr double kInitStd = 0.01;

}  // namespace

RbmLayer init_rbm_layer(Eigen::Index visible, Eigen::Index hidden, Rng& rng) {
  RbmLayer l;
  l.W.resize(hidden, visible);
  for (Eigen::Index i = 0; i < l.W.size(); ++i) l.W.data()[i] = static_cast<float>(rng.normal(0.0, kInitStd));
  l.a = Matrix::Zero(1, visible);
  l.b = Matrix::Zero(1, hidden);
  return l;
}

template <typename T>
T free_energy(const RbmLayerT<T>& layer, const Mat<T>& v) {
  if (v.rows() != 1 || v.cols() != layer.visible()) throw std::invalid_argument("free_energy: expected one visible row");
  T f = -(layer.a.row(0).dot(v.row(0)));
  const Mat<T> pre = v * layer.W.transpose() + layer.b;
  for (Eigen::Index j = 0; j < pre.cols(); ++j) f -= softplus(pre(0, j));
  return f;
}

template <typename T>
Mat<T> h_given_v(const RbmLayerT<T>& layer, const Mat<T>& v) {
  if (v.cols() != layer.visible()) throw std::invalid_argument("h_given_v: width mismatch");
  Mat<T> h = v * layer.W.transpose();
  h.rowwise() += layer.b.row(0);
  sigmoid_inplace(h);
  return h;
}

template <typename T>
Mat<T> v_given_h(const RbmLayerT<T>& layer, const Mat<T>& h) {
  if (h.cols() != layer.hidden()) throw std::invalid_argument("v_given_h: width mismatch");
  Mat<T> v = h * layer.W;
  v.rowwise() += layer.a.row(0);
  sigmoid_inplace(v);
  return v;
}

template <typename T>
Mat<T> sample_bernoulli(const Mat<T>& probs, Rng& rng) {
  Mat<T> s(probs.rows(), probs.cols());
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    s.data()[i] = rng.uniform() < static_cast<double>(probs.data()[i]) ? T(1) : T(0);
  }
  return s;
}

void RbmConfig::validate() const {
  if (!(lr >= 0)) throw UsageError("rbm: lr must be >= 0");
  if (epochs < 0) throw UsageError("rbm: epochs must be >= 0");
  if (batch < 1) throw UsageError("rbm: batch must be >= 1");
  if (!(reset_threshold > 0 && reset_threshold < 1)) throw UsageError("rbm: reset_threshold must lie in (0, 1)");
  if (!(goh_mu > 0 && goh_mu < 1)) throw UsageError("rbm: goh_mu must lie in (0, 1)");
  if (!(goh_phi >= 0 && goh_phi <= 1)) throw UsageError("rbm: goh_phi must lie in [0, 1]");
  if (l1_coeff < 0 || l2_coeff < 0) throw UsageError("rbm: weight decay must be >= 0");
}

double annealed_lr(double lr0, int epoch, int epochs) {
  if (epochs <= 0) return lr0;
  return lr0 * (1.0 - static_cast<double>(epoch) / static_cast<double>(epochs));
}

namespace {

// u^(1/mu - 1) for rank fractions u = (rank + 0.5) / n.
void rank_targets(const float* values, Eigen::Index n, Eigen::Index stride, double exponent, float* out,
                  std::vector<Eigen::Index>& idx) {
  idx.resize(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](Eigen::Index i, Eigen::Index j) { return values[i * stride] < values[j * stride]; });
  for (Eigen::Index r = 0; r < n; ++r) {
    const double u = (static_cast<double>(r) + 0.5) / static_cast<double>(n);
    out[idx[static_cast<size_t>(r)] * stride] = static_cast<float>(std::pow(u, exponent));
  }
}

}  // namespace

Matrix goh_targets(const Matrix& h, double mu, double phi) {
  const double exponent = 1.0 / mu - 1.0;
  Matrix sel(h.rows(), h.cols());
  Matrix spa(h.rows(), h.cols());
  std::vector<Eigen::Index> idx;
  for (Eigen::Index j = 0; j < h.cols(); ++j) {
    rank_targets(h.data() + j, h.rows(), h.cols(), exponent, sel.data() + j, idx);
  }
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    rank_targets(h.data() + i * h.cols(), h.cols(), 1, exponent, spa.data() + i * h.cols(), idx);
  }
  const auto p = static_cast<float>(phi);
  return ((1.0f - p) * h.array() + p * 0.5f * (sel.array() + spa.array())).matrix();
}

void pcd_update(RbmLayer& layer, const Matrix& batch, PcdState& state, double lr, const RbmConfig& cfg, Rng& rng) {
  if (batch.rows() != state.chains.rows() || batch.cols() != layer.visible() ||
      state.chains.cols() != layer.visible()) {
    throw std::invalid_argument("pcd_update: batch rows must equal the chain count and widths must match");
  }
  const auto n = static_cast<float>(batch.rows());
  Matrix h_pos = h_given_v(layer, batch);
  if (cfg.goh_sparsity) h_pos = goh_targets(h_pos, cfg.goh_mu, cfg.goh_phi);

  const Matrix h_chain = sample_bernoulli(h_given_v(layer, state.chains), rng);
  state.chains = sample_bernoulli(v_given_h(layer, h_chain), rng);
  const Matrix h_neg = h_given_v(layer, state.chains);

  Matrix grad_w = (h_pos.transpose() * batch - h_neg.transpose() * state.chains) / n;
  const Matrix grad_a = (batch.colwise().sum() - state.chains.colwise().sum()) / n;
  const Matrix grad_b = (h_pos.colwise().sum() - h_neg.colwise().sum()) / n;

  // Decay enters with a negative sign since this is ascent.
  Matrix decay = Matrix::Zero(layer.W.rows(), layer.W.cols());
  add_weight_penalty(layer.W, cfg.l1_coeff, cfg.l2_coeff, decay);
  const auto step = static_cast<float>(lr);
  layer.W += step * (grad_w - decay);
  layer.a += step * grad_a;
  layer.b += step * grad_b;
}

Matrix mean_activity(const RbmLayer& layer, const Matrix& data) {
  Matrix sum = Matrix::Zero(1, layer.hidden());
  constexpr Eigen::Index kChunk = 2048;
  for (Eigen::Index s = 0; s < data.rows(); s += kChunk) {
    const Eigen::Index len = std::min(kChunk, data.rows() - s);
    sum += h_given_v<float>(layer, data.middleRows(s, len)).colwise().sum();
  }
  if (data.rows() > 0) sum /= static_cast<float>(data.rows());
  return sum;
}

std::vector<Eigen::Index> reset_overactive(RbmLayer& layer, const Matrix& data, double threshold, Rng& rng) {
  const Matrix act = mean_activity(layer, data);
  std::vector<Eigen::Index> reset;
  for (Eigen::Index j = 0; j < layer.hidden(); ++j) {
    if (act(0, j) > threshold) {
      for (Eigen::Index c = 0; c < layer.visible(); ++c) layer.W(j, c) = static_cast<float>(rng.normal(0.0, kInitStd));
      layer.b(0, j) = 0.0f;
      reset.push_back(j);
    }
  }
  return reset;
}

StackedRbm init_stack(Eigen::Index visible, Eigen::Index hidden1, Eigen::Index hidden2, uint64_t seed) {
  Rng rng = Rng(seed).split("rbm-init");
  StackedRbm s;
  s.seed = seed;
  s.layer1 = init_rbm_layer(visible, hidden1, rng);
  s.layer2 = init_rbm_layer(hidden1, hidden2, rng);
  return s;
}

namespace {

void set_visible_bias_from_data(RbmLayer& layer, const Matrix& data) {
  if (data.rows() == 0) return;
  const Matrix mean = data.colwise().mean();
  for (Eigen::Index c = 0; c < mean.cols(); ++c) {
    const double p = std::clamp(static_cast<double>(mean(0, c)), 1e-3, 1.0 - 1e-3);
    layer.a(0, c) = static_cast<float>(std::log(p / (1.0 - p)));
  }
}

void check_finite(const RbmLayer& l, int layer, int epoch) {
  if (!l.W.allFinite() || !l.a.allFinite() || !l.b.allFinite()) {
    throw NumericError("RBM layer " + std::to_string(layer) + " produced non-finite parameters at epoch " +
                       std::to_string(epoch));
  }
}

std::vector<double> train_layer(RbmLayer& layer, const Matrix& data, const RbmConfig& cfg, Rng base, int which,
                                bool fresh, const RbmEpochCallback& on_epoch) {
  std::vector<double> history;
  const auto n = static_cast<size_t>(data.rows());
  if (n == 0) return history;
  if (fresh) set_visible_bias_from_data(layer, data);
  const Eigen::Index hist_rows = std::min<Eigen::Index>(cfg.history_rows, data.rows());
  const Matrix hist = data.topRows(hist_rows);
  const auto chains = static_cast<Eigen::Index>(std::min<size_t>(static_cast<size_t>(cfg.batch), n));

  PcdState state;
  Rng init_rng = base.split("chains");
  {
    const auto order = init_rng.permutation(n);
    Matrix start(chains, data.cols());
    for (Eigen::Index i = 0; i < chains; ++i) start.row(i) = data.row(static_cast<Eigen::Index>(order[static_cast<size_t>(i)]));
    state.chains = sample_bernoulli(start, init_rng);
  }

  Matrix batch;
  for (int e = 1; e <= cfg.epochs; ++e) {
    Rng rng = base.split(static_cast<uint64_t>(e));
    const double lr = annealed_lr(cfg.lr, e, cfg.epochs);
    const auto order = rng.permutation(n);
    for (size_t start = 0; start < n; start += static_cast<size_t>(chains)) {
      const auto len = static_cast<Eigen::Index>(std::min(static_cast<size_t>(chains), n - start));
      batch.resize(len, data.cols());
      for (Eigen::Index i = 0; i < len; ++i) batch.row(i) = data.row(static_cast<Eigen::Index>(order[start + static_cast<size_t>(i)]));
      if (len == chains) {
        pcd_update(layer, batch, state, lr, cfg, rng);
      } else {
        PcdState part{state.chains.topRows(len)};
        pcd_update(layer, batch, part, lr, cfg, rng);
        state.chains.topRows(len) = part.chains;
      }
    }
    reset_overactive(layer, data, cfg.reset_threshold, rng);
    check_finite(layer, which, e);
    history.push_back(reconstruct_ce(layer, hist));
    if (on_epoch) on_epoch(which, e, history.back());
  }
  return history;
}

}  // namespace

RbmTrainResult train_stack(const Matrix& data, Eigen::Index hidden1, Eigen::Index hidden2, const RbmConfig& cfg,
                           const RbmEpochCallback& on_epoch) {
  return continue_stack(init_stack(data.cols(), hidden1, hidden2, cfg.seed), data, cfg, true, on_epoch);
}

RbmTrainResult continue_stack(StackedRbm stack, const Matrix& data, const RbmConfig& cfg, bool fresh,
                              const RbmEpochCallback& on_epoch) {
  cfg.validate();
  if (data.cols() != stack.layer1.visible()) throw std::invalid_argument("train_stack: data width mismatch");
  const Eigen::Index hidden1 = stack.layer1.hidden();
  RbmTrainResult out;
  out.stack = std::move(stack);
  if (cfg.epochs == 0) return out;
  const Rng base = Rng(cfg.seed).split("rbm-train");
  const auto h1 = train_layer(out.stack.layer1, data, cfg, base.split("layer1"), 1, fresh, on_epoch);
  Matrix features(data.rows(), hidden1);
  constexpr Eigen::Index kChunk = 2048;
  for (Eigen::Index s = 0; s < data.rows(); s += kChunk) {
    const Eigen::Index len = std::min(kChunk, data.rows() - s);
    features.middleRows(s, len) = h_given_v<float>(out.stack.layer1, data.middleRows(s, len));
  }
  const auto h2 = train_layer(out.stack.layer2, features, cfg, base.split("layer2"), 2, fresh, on_epoch);
  for (size_t e = 0; e < h1.size(); ++e) out.history.push_back({h1[e], e < h2.size() ? h2[e] : 0.0});
  return out;
}

Matrix encode(const StackedRbm& stack, const Matrix& data) {
  Matrix out(data.rows(), stack.layer2.hidden());
  constexpr Eigen::Index kChunk = 2048;
  for (Eigen::Index s = 0; s < data.rows(); s += kChunk) {
    const Eigen::Index len = std::min(kChunk, data.rows() - s);
    out.middleRows(s, len) = h_given_v(stack.layer2, h_given_v<float>(stack.layer1, data.middleRows(s, len)));
  }
  return out;
}

Matrix reconstruct(const StackedRbm& stack, const Matrix& data) {
  const Matrix h1 = h_given_v(stack.layer1, data);
  const Matrix h2 = h_given_v(stack.layer2, h1);
  return v_given_h(stack.layer1, v_given_h(stack.layer2, h2));
}

Matrix reconstruct(const RbmLayer& layer, const Matrix& data) { return v_given_h(layer, h_given_v(layer, data)); }

double cross_entropy(const Matrix& target, const Matrix& pred) {
  if (target.rows() != pred.rows() || target.cols() != pred.cols()) throw std::invalid_argument("cross_entropy: shape mismatch");
  if (target.size() == 0) return 0.0;
  constexpr double kClamp = 1e-7;
  double sum = 0;
  for (Eigen::Index i = 0; i < target.size(); ++i) {
    const double q = std::clamp(static_cast<double>(pred.data()[i]), kClamp, 1.0 - kClamp);
    const double x = target.data()[i];
    sum -= x * std::log(q) + (1.0 - x) * std::log(1.0 - q);
  }
  return sum / static_cast<double>(target.size());
}

namespace {

template <typename F>
double chunked_ce(const Matrix& data, F&& recon) {
  if (data.rows() == 0) return 0.0;
  constexpr Eigen::Index kChunk = 2048;
  double sum = 0;
  for (Eigen::Index s = 0; s < data.rows(); s += kChunk) {
    const Eigen::Index len = std::min(kChunk, data.rows() - s);
    const Matrix part = data.middleRows(s, len);
    sum += cross_entropy(part, recon(part)) * static_cast<double>(part.size());
  }
  return sum / static_cast<double>(data.size());
}

}  // namespace

double reconstruct_ce(const StackedRbm& stack, const Matrix& data) {
  return chunked_ce(data, [&](const Matrix& d) { return reconstruct(stack, d); });
}

double reconstruct_ce(const RbmLayer& layer, const Matrix& data) {
  return chunked_ce(data, [&](const Matrix& d) { return reconstruct(layer, d); });
}

void save_rbm(std::ostream& out, const StackedRbm& s) {
  nlohmann::json h = {{"format", "RBM1"},
                      {"version", 1},
                      {"sizes", {s.layer1.visible(), s.layer1.hidden(), s.layer2.hidden()}},
                      {"seed", s.seed}};
  const Matrix* arrays[] = {&s.layer1.W, &s.layer1.a, &s.layer1.b, &s.layer2.W, &s.layer2.a, &s.layer2.b};
  write_checkpoint(out, h, arrays);
}

void save_rbm(const std::filesystem::path& path, const StackedRbm& stack) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  save_rbm(out, stack);
}

StackedRbm load_rbm(std::istream& in) {
  CheckpointReader r(in, "RBM1");
  StackedRbm s;
  try {
    const auto& h = r.header();
    if (h.at("version").get<int>() != 1) throw DataError("RBM1: unsupported version");
    const auto sizes = h.at("sizes").get<std::vector<Eigen::Index>>();
    if (sizes.size() != 3 || sizes[0] <= 0 || sizes[1] <= 0 || sizes[2] <= 0) throw DataError("RBM1: bad sizes");
    s.seed = h.at("seed").get<uint64_t>();
    s.layer1.W = r.next(sizes[1], sizes[0]);
    s.layer1.a = r.next(1, sizes[0]);
    s.layer1.b = r.next(1, sizes[1]);
    s.layer2.W = r.next(sizes[2], sizes[1]);
    s.layer2.a = r.next(1, sizes[1]);
    s.layer2.b = r.next(1, sizes[2]);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("RBM1: bad header: ") + e.what());
  }
  r.finish();
  return s;
}

StackedRbm load_rbm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  return load_rbm(in);
}

template float free_energy<float>(const RbmLayerT<float>&, const Mat<float>&);
template double free_energy<double>(const RbmLayerT<double>&, const Mat<double>&);
template Mat<float> h_given_v<float>(const RbmLayerT<float>&, const Mat<float>&);
template Mat<double> h_given_v<double>(const RbmLayerT<double>&, const Mat<double>&);
template Mat<float> v_given_h<float>(const RbmLayerT<float>&, const Mat<float>&);
template Mat<double> v_given_h<double>(const RbmLayerT<double>&, const Mat<double>&);
template Mat<float> sample_bernoulli<float>(const Mat<float>&, Rng&);
template Mat<double> sample_bernoulli<double>(const Mat<double>&, Rng&);

}  // namespace musgae

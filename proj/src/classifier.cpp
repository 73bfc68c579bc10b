#include "musgae/classifier.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>

#include "musgae/checkpoint.h"
#include "musgae/errors.h"

namespace musgae {

void ClfConfig::validate() const {
  if (!(lr > 0)) throw UsageError("classifier: lr must be > 0");
  if (!(momentum >= 0 && momentum < 1)) throw UsageError("classifier: momentum must lie in [0, 1)");
  if (epochs < 0) throw UsageError("classifier: epochs must be >= 0");
  if (batch < 2) throw UsageError("classifier: batch must be >= 2");
  if (!(dropout >= 0 && dropout < 1)) throw UsageError("classifier: dropout must lie in [0, 1)");
  if (l2_coeff < 0 || lee_coeff < 0) throw UsageError("classifier: penalty coefficients must be >= 0");
  if (!(lee_target > 0 && lee_target < 1)) throw UsageError("classifier: lee_target must lie in (0, 1)");
  if (hidden1 < 1 || hidden2 < 1) throw UsageError("classifier: hidden sizes must be >= 1");
}

FfnnModel init_ffnn(Eigen::Index inputs, Eigen::Index hidden1, Eigen::Index hidden2, Eigen::Index classes,
                    uint64_t seed) {
  Rng rng = Rng(seed).split("ffnn-init");
  auto he = [&](Eigen::Index fan_in, Eigen::Index fan_out) {
    Matrix w(fan_in, fan_out);
    const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<float>(rng.normal(0.0, std));
    return w;
  };
  FfnnModel m;
  m.seed = seed;
  auto& p = m.params;
  p.W1 = he(inputs, hidden1);
  p.b1 = Matrix::Zero(1, hidden1);
  p.W2 = he(hidden1, hidden2);
  p.b2 = Matrix::Zero(1, hidden2);
  p.W3 = he(hidden2, classes);
  p.b3 = Matrix::Zero(1, classes);
  p.bn1 = BatchNorm<float>::identity(hidden1);
  p.bn2 = BatchNorm<float>::identity(hidden2);
  return m;
}

namespace {

template <typename T>
Mat<T> affine(const Mat<T>& x, const Mat<T>& w, const Mat<T>& b) {
  Mat<T> z = x * w;
  z.rowwise() += b.row(0);
  return z;
}

template <typename T>
Mat<T> relu(const Mat<T>& a) {
  return a.cwiseMax(T(0));
}

}  // namespace

template <typename T>
Mat<T> ffnn_forward(FfnnParams<T>& p, const Mat<T>& x, bool training, Rng* rng, double dropout) {
  if (x.cols() != p.inputs()) throw std::invalid_argument("classifier: input width mismatch");
  Mat<T> h1 = relu(p.bn1.forward(affine(x, p.W1, p.b1), training, nullptr));
  if (training && rng) h1.array() *= dropout_mask<T>(h1.rows(), h1.cols(), dropout, *rng).array();
  Mat<T> h2 = relu(p.bn2.forward(affine(h1, p.W2, p.b2), training, nullptr));
  if (training && rng) h2.array() *= dropout_mask<T>(h2.rows(), h2.cols(), dropout, *rng).array();
  return softmax_rows<T>(affine(h2, p.W3, p.b3));
}

Matrix forward(const FfnnModel& model, const Matrix& codes) {
  FfnnParams<float> p = model.params;  // inference never writes, but forward is shared with training
  return ffnn_forward<float>(p, codes, false, nullptr, 0.0);
}

template <typename T>
FfnnLoss<T> ffnn_loss_and_grads(FfnnParams<T>& p, const Mat<T>& x, std::span<const int> labels, const Mat<T>& mask1,
                                const Mat<T>& mask2, const ClfConfig& cfg) {
  const Eigen::Index n = x.rows();
  if (x.cols() != p.inputs()) throw std::invalid_argument("classifier: input width mismatch");
  if (static_cast<Eigen::Index>(labels.size()) != n) throw std::invalid_argument("classifier: label count mismatch");
  if (mask1.rows() != n || mask1.cols() != p.W1.cols() || mask2.rows() != n || mask2.cols() != p.W2.cols()) {
    throw std::invalid_argument("classifier: dropout mask shape mismatch");
  }
  const Eigen::Index C = p.classes();
  const T inv_n = T(1) / static_cast<T>(n);
  const T rho = static_cast<T>(cfg.lee_target);
  const T lee_c = static_cast<T>(cfg.lee_coeff);

  typename BatchNorm<T>::Cache c1, c2;
  const Mat<T> a1 = p.bn1.forward(affine(x, p.W1, p.b1), true, &c1);
  const Mat<T> r1 = relu(a1);
  const Mat<T> h1 = (r1.array() * mask1.array()).matrix();
  const Mat<T> a2 = p.bn2.forward(affine(h1, p.W2, p.b2), true, &c2);
  const Mat<T> r2 = relu(a2);
  const Mat<T> h2 = (r2.array() * mask2.array()).matrix();
  const Mat<T> probs = softmax_rows<T>(affine(h2, p.W3, p.b3));

  FfnnLoss<T> out;
  Mat<T> dz3 = probs;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<size_t>(i)];
    if (y < 0 || y >= C) throw std::invalid_argument("classifier: label out of range");
    out.cross_entropy -= std::log(std::max(probs(i, y), std::numeric_limits<T>::min()));
    dz3(i, y) -= T(1);
  }
  out.cross_entropy *= inv_n;
  out.probs = probs;
  dz3 *= inv_n;
  out.loss = out.cross_entropy;

  auto& g = out.grads;
  g.W3 = Mat<T>::Zero(p.W3.rows(), p.W3.cols());
  g.W2 = Mat<T>::Zero(p.W2.rows(), p.W2.cols());
  g.W1 = Mat<T>::Zero(p.W1.rows(), p.W1.cols());
  out.loss += add_weight_penalty(p.W3, 0.0, cfg.l2_coeff, g.W3);
  out.loss += add_weight_penalty(p.W2, 0.0, cfg.l2_coeff, g.W2);
  out.loss += add_weight_penalty(p.W1, 0.0, cfg.l2_coeff, g.W1);

  g.W3 += h2.transpose() * dz3;
  g.b3 = dz3.colwise().sum();
  Mat<T> dr2 = ((dz3 * p.W3.transpose()).array() * mask2.array()).matrix();
  if (cfg.lee_hidden2) {
    const auto lee = lee_sparsity<T>(r2, rho);
    out.loss += lee_c * lee.penalty;
    dr2 += lee_c * lee.grad;
  }
  const Mat<T> da2 = (dr2.array() * (a2.array() > T(0)).template cast<T>()).matrix();
  const auto bn2g = p.bn2.backward(da2, c2);
  g.bn2.gamma = bn2g.dgamma;
  g.bn2.beta = bn2g.dbeta;
  g.W2 += h1.transpose() * bn2g.dx;
  g.b2 = bn2g.dx.colwise().sum();
  Mat<T> dr1 = ((bn2g.dx * p.W2.transpose()).array() * mask1.array()).matrix();
  if (cfg.lee_hidden1) {
    const auto lee = lee_sparsity<T>(r1, rho);
    out.loss += lee_c * lee.penalty;
    dr1 += lee_c * lee.grad;
  }
  const Mat<T> da1 = (dr1.array() * (a1.array() > T(0)).template cast<T>()).matrix();
  const auto bn1g = p.bn1.backward(da1, c1);
  g.bn1.gamma = bn1g.dgamma;
  g.bn1.beta = bn1g.dbeta;
  g.W1 += x.transpose() * bn1g.dx;
  g.b1 = bn1g.dx.colwise().sum();
  return out;
}

std::vector<int> argmax_rows(const Matrix& probs) {
  std::vector<int> out(static_cast<size_t>(probs.rows()));
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < probs.cols(); ++j) {
      if (probs(i, j) > probs(i, best)) best = j;
    }
    out[static_cast<size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

std::vector<int> predict(const FfnnModel& model, const Matrix& codes) { return argmax_rows(forward(model, codes)); }

double misclassification_rate(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() != truth.size()) throw std::invalid_argument("misclassification_rate: length mismatch");
  if (pred.empty()) return 0.0;
  size_t wrong = 0;
  for (size_t i = 0; i < pred.size(); ++i) wrong += pred[i] != truth[i];
  return 100.0 * static_cast<double>(wrong) / static_cast<double>(pred.size());
}

ClfTrainResult train_classifier(const Matrix& codes, std::span<const int> labels, int classes, const ClfConfig& cfg,
                                const ClfEpochCallback& on_epoch) {
  cfg.validate();
  if (static_cast<Eigen::Index>(labels.size()) != codes.rows()) {
    throw std::invalid_argument("train_classifier: label count mismatch");
  }
  for (int y : labels) {
    if (y < 0 || y >= classes) throw DataError("train_classifier: label " + std::to_string(y) + " out of range");
  }
  ClfTrainResult out;
  out.model = init_ffnn(codes.cols(), cfg.hidden1, cfg.hidden2, classes, cfg.seed);
  auto& p = out.model.params;
  Matrix* params[] = {&p.W1, &p.b1, &p.bn1.gamma, &p.bn1.beta, &p.W2, &p.b2,
                      &p.bn2.gamma, &p.bn2.beta, &p.W3, &p.b3};
  OptState<float> opt = OptState<float>::zeros_like(std::span<const Matrix* const>(params, std::size(params)));
  const Rng base = Rng(cfg.seed).split("ffnn-train");
  const auto n = static_cast<size_t>(codes.rows());
  Matrix xb;
  std::vector<int> yb;
  for (int e = 0; e < cfg.epochs; ++e) {
    Rng rng = base.split(static_cast<uint64_t>(e));
    const auto order = rng.permutation(n);
    double loss_sum = 0;
    size_t seen = 0, wrong = 0;
    for (size_t start = 0; start < n; start += static_cast<size_t>(cfg.batch)) {
      const size_t len = std::min(static_cast<size_t>(cfg.batch), n - start);
      if (len < 2) continue;
      const auto rows = static_cast<Eigen::Index>(len);
      xb.resize(rows, codes.cols());
      yb.resize(len);
      for (size_t i = 0; i < len; ++i) {
        xb.row(static_cast<Eigen::Index>(i)) = codes.row(static_cast<Eigen::Index>(order[start + i]));
        yb[i] = labels[order[start + i]];
      }
      const Matrix m1 = dropout_mask<float>(rows, p.W1.cols(), cfg.dropout, rng);
      const Matrix m2 = dropout_mask<float>(rows, p.W2.cols(), cfg.dropout, rng);
      auto res = ffnn_loss_and_grads<float>(p, xb, yb, m1, m2, cfg);
      if (!std::isfinite(res.loss)) throw NumericError("classifier loss became non-finite at epoch " + std::to_string(e + 1));
      auto& g = res.grads;
      const Matrix* grads[] = {&g.W1, &g.b1, &g.bn1.gamma, &g.bn1.beta, &g.W2, &g.b2,
                               &g.bn2.gamma, &g.bn2.beta, &g.W3, &g.b3};
      sgd_momentum_step<float>(params, grads, opt, static_cast<float>(cfg.lr), static_cast<float>(cfg.momentum));
      loss_sum += static_cast<double>(res.loss) * static_cast<double>(len);
      seen += len;
      const auto pred = argmax_rows(res.probs);
      for (size_t i = 0; i < len; ++i) wrong += pred[i] != yb[i];
    }
    ClfEpoch ep;
    ep.loss = seen ? loss_sum / static_cast<double>(seen) : 0.0;
    ep.train_error = seen ? 100.0 * static_cast<double>(wrong) / static_cast<double>(seen) : 0.0;
    out.history.push_back(ep);
    if (on_epoch) on_epoch(e + 1, ep);
  }
  return out;
}

void save_ffnn(std::ostream& out, const FfnnModel& m) {
  const auto& p = m.params;
  nlohmann::json h = {{"format", "FFN1"},
                      {"version", 1},
                      {"sizes", {p.W1.rows(), p.W1.cols(), p.W2.cols(), p.W3.cols()}},
                      {"seed", m.seed}};
  const Matrix* arrays[] = {&p.W1, &p.b1, &p.bn1.gamma, &p.bn1.beta, &p.bn1.running_mean, &p.bn1.running_var,
                            &p.W2, &p.b2, &p.bn2.gamma, &p.bn2.beta, &p.bn2.running_mean, &p.bn2.running_var,
                            &p.W3, &p.b3};
  write_checkpoint(out, h, arrays);
}

void save_ffnn(const std::filesystem::path& path, const FfnnModel& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  save_ffnn(out, model);
}

FfnnModel load_ffnn(std::istream& in) {
  CheckpointReader r(in, "FFN1");
  FfnnModel m;
  auto& p = m.params;
  try {
    const auto& h = r.header();
    if (h.at("version").get<int>() != 1) throw DataError("FFN1: unsupported version");
    const auto s = h.at("sizes").get<std::vector<Eigen::Index>>();
    if (s.size() != 4 || std::any_of(s.begin(), s.end(), [](Eigen::Index v) { return v <= 0; })) {
      throw DataError("FFN1: bad sizes");
    }
    m.seed = h.at("seed").get<uint64_t>();
    auto bn = [&](BatchNorm<float>& b, Eigen::Index width) {
      b.gamma = r.next(1, width);
      b.beta = r.next(1, width);
      b.running_mean = r.next(1, width);
      b.running_var = r.next(1, width);
    };
    p.W1 = r.next(s[0], s[1]);
    p.b1 = r.next(1, s[1]);
    bn(p.bn1, s[1]);
    p.W2 = r.next(s[1], s[2]);
    p.b2 = r.next(1, s[2]);
    bn(p.bn2, s[2]);
    p.W3 = r.next(s[2], s[3]);
    p.b3 = r.next(1, s[3]);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("FFN1: bad header: ") + e.what());
  }
  r.finish();
  return m;
}

FfnnModel load_ffnn(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  return load_ffnn(in);
}

template Mat<float> ffnn_forward<float>(FfnnParams<float>&, const Mat<float>&, bool, Rng*, double);
template Mat<double> ffnn_forward<double>(FfnnParams<double>&, const Mat<double>&, bool, Rng*, double);
template FfnnLoss<float> ffnn_loss_and_grads<float>(FfnnParams<float>&, const Mat<float>&, std::span<const int>,
                                                    const Mat<float>&, const Mat<float>&, const ClfConfig&);
template FfnnLoss<double> ffnn_loss_and_grads<double>(FfnnParams<double>&, const Mat<double>&, std::span<const int>,
                                                      const Mat<double>&, const Mat<double>&, const ClfConfig&);

}  // namespace musgae

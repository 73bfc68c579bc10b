#include "musgae/gae.h"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

#include "musgae/checkpoint.h"
#include "musgae/errors.h"

namespace musgae {

template <typename T>
void GaeParams<T>::check_shapes() const {
  if (U.rows() != V.rows() || U.cols() != V.cols()) throw std::invalid_argument("GAE: U and V must have the same shape");
  if (W.cols() != U.rows()) throw std::invalid_argument("GAE: W must have O columns");
}

void GaeConfig::validate() const {
  if (!(lr >= 0)) throw UsageError("gae: lr must be >= 0");
  if (!(momentum >= 0 && momentum < 1)) throw UsageError("gae: momentum must lie in [0, 1)");
  if (epochs < 0) throw UsageError("gae: epochs must be >= 0");
  if (batch < 1) throw UsageError("gae: batch must be >= 1");
  if (!(corruption >= 0 && corruption < 1)) throw UsageError("gae: corruption must lie in [0, 1)");
  if (rescale_epochs < 0) throw UsageError("gae: rescale_epochs must be >= 0");
  reg.validate();
}

GaeModel init_gae(Eigen::Index inputs, Eigen::Index factors, Eigen::Index mappings, uint64_t seed) {
  Rng rng = Rng(seed).split("gae-init");
  auto uniform = [&rng](Eigen::Index rows, Eigen::Index cols, double r) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(rng.uniform(-r, r));
    return m;
  };
  GaeModel model;
  model.seed = seed;
  const double ru = 0.1 / std::sqrt(static_cast<double>(inputs));
  model.params.U = uniform(factors, inputs, ru);
  model.params.V = uniform(factors, inputs, ru);
  model.params.W = uniform(mappings, factors, 1.0 / std::sqrt(static_cast<double>(factors)));
  return model;
}

template <typename T>
Mat<T> gae_map(const GaeParams<T>& p, const Mat<T>& x, const Mat<T>& y) {
  if (x.cols() != p.inputs() || y.cols() != p.inputs() || x.rows() != y.rows()) {
    throw std::invalid_argument("GAE map: input shape mismatch");
  }
  Mat<T> fx = x * p.U.transpose();
  const Mat<T> fy = y * p.V.transpose();
  fx.array() *= fy.array();
  Mat<T> m = fx * p.W.transpose();
  sigmoid_inplace(m);
  return m;
}

template <typename T>
Mat<T> gae_reconstruct_x(const GaeParams<T>& p, const Mat<T>& m, const Mat<T>& y) {
  if (m.cols() != p.mappings() || y.cols() != p.inputs() || m.rows() != y.rows()) {
    throw std::invalid_argument("GAE reconstruct_x: shape mismatch");
  }
  Mat<T> g = m * p.W;
  g.array() *= (y * p.V.transpose()).array();
  Mat<T> out = g * p.U;
  sigmoid_inplace(out);
  return out;
}

template <typename T>
Mat<T> gae_reconstruct_y(const GaeParams<T>& p, const Mat<T>& m, const Mat<T>& x) {
  if (m.cols() != p.mappings() || x.cols() != p.inputs() || m.rows() != x.rows()) {
    throw std::invalid_argument("GAE reconstruct_y: shape mismatch");
  }
  Mat<T> g = m * p.W;
  g.array() *= (x * p.U.transpose()).array();
  Mat<T> out = g * p.V;
  sigmoid_inplace(out);
  return out;
}

namespace {

Matrix row_of(const BitVec& b) {
  Matrix r = Matrix::Zero(1, static_cast<Eigen::Index>(b.size()));
  for (auto i : b.ones()) r(0, i) = 1.0f;
  return r;
}

void check_len(const GaeModel& model, const BitVec& b) {
  if (static_cast<Eigen::Index>(b.size()) != model.params.inputs()) {
    throw std::invalid_argument("GAE: input has " + std::to_string(b.size()) + " bits, model expects " +
                                std::to_string(model.params.inputs()));
  }
}

}  // namespace

Vector map(const GaeModel& model, const BitVec& x, const BitVec& y) {
  check_len(model, x);
  check_len(model, y);
  return gae_map(model.params, row_of(x), row_of(y)).row(0).transpose();
}

Vector reconstruct_x(const GaeModel& model, const Vector& m, const BitVec& y) {
  check_len(model, y);
  return gae_reconstruct_x<float>(model.params, m.transpose(), row_of(y)).row(0).transpose();
}

Vector reconstruct_y(const GaeModel& model, const Vector& m, const BitVec& x) {
  check_len(model, x);
  return gae_reconstruct_y<float>(model.params, m.transpose(), row_of(x)).row(0).transpose();
}

template <typename T>
GaeLoss<T> gae_loss_and_grads(const GaeParams<T>& p, const Mat<T>& x, const Mat<T>& y, const Mat<T>& x_corrupt,
                              const Mat<T>& y_corrupt, const GaeConfig& cfg) {
  p.check_shapes();
  if (x.cols() != p.inputs() || y.cols() != p.inputs() || x_corrupt.rows() != x.rows() ||
      x_corrupt.cols() != x.cols() || y_corrupt.rows() != y.rows() || y_corrupt.cols() != y.cols() ||
      x.rows() != y.rows()) {
    throw std::invalid_argument("GAE loss: input shape mismatch");
  }
  const bool shared = cfg.corrupt_mapping_inputs;

  // Forward.
  const Mat<T> fxc = x_corrupt * p.U.transpose();
  const Mat<T> fyc = y_corrupt * p.V.transpose();
  Mat<T> fxm_own, fym_own;
  if (!shared) {
    fxm_own = x * p.U.transpose();
    fym_own = y * p.V.transpose();
  }
  const Mat<T>& fxm = shared ? fxc : fxm_own;
  const Mat<T>& fym = shared ? fyc : fym_own;
  const Mat<T> fac = (fxm.array() * fym.array()).matrix();
  Mat<T> m = fac * p.W.transpose();
  sigmoid_inplace(m);
  const Mat<T> h = m * p.W;
  const Mat<T> gx = (h.array() * fyc.array()).matrix();
  const Mat<T> gy = (h.array() * fxc.array()).matrix();
  Mat<T> xr = gx * p.U;
  sigmoid_inplace(xr);
  Mat<T> yr = gy * p.V;
  sigmoid_inplace(yr);

  GaeLoss<T> out;
  out.reconstruction = (x - xr).squaredNorm() + (y - yr).squaredNorm();

  // Backward through the reconstructions.
  const Mat<T> dax = (T(2) * (xr - x).array() * xr.array() * (T(1) - xr.array())).matrix();
  const Mat<T> day = (T(2) * (yr - y).array() * yr.array() * (T(1) - yr.array())).matrix();
  out.grads.U = gx.transpose() * dax;
  out.grads.V = gy.transpose() * day;
  const Mat<T> dgx = dax * p.U.transpose();
  const Mat<T> dgy = day * p.V.transpose();
  const Mat<T> dh = (dgx.array() * fyc.array() + dgy.array() * fxc.array()).matrix();
  Mat<T> dfyc = (dgx.array() * h.array()).matrix();
  Mat<T> dfxc = (dgy.array() * h.array()).matrix();

  // Mapping path: h = m W, m = sigmoid(fac W^T).
  out.grads.W = m.transpose() * dh;
  Mat<T> dm = dh * p.W.transpose();
  const T lee_coeff = static_cast<T>(cfg.reg.lee_coeff);
  const T rho = static_cast<T>(cfg.reg.lee_target);
  if (cfg.lee_on_mappings && lee_coeff > 0) {
    auto lee = lee_sparsity(m, rho);
    out.penalty += lee_coeff * lee.penalty;
    dm += lee_coeff * lee.grad;
  }
  const Mat<T> dz = (dm.array() * m.array() * (T(1) - m.array())).matrix();
  out.grads.W.noalias() += dz.transpose() * fac;
  Mat<T> dfac = dz * p.W;
  if (cfg.lee_on_factors && lee_coeff > 0) {
    auto lee = lee_sparsity(fac, rho);
    out.penalty += lee_coeff * lee.penalty;
    dfac += lee_coeff * lee.grad;
  }
  const Mat<T> dfxm = (dfac.array() * fym.array()).matrix();
  const Mat<T> dfym = (dfac.array() * fxm.array()).matrix();
  if (shared) {
    dfxc += dfxm;
    dfyc += dfym;
  } else {
    out.grads.U.noalias() += dfxm.transpose() * x;
    out.grads.V.noalias() += dfym.transpose() * y;
  }
  out.grads.U.noalias() += dfxc.transpose() * x_corrupt;
  out.grads.V.noalias() += dfyc.transpose() * y_corrupt;

  out.penalty += add_weight_penalty(p.U, cfg.reg.l1_coeff, cfg.reg.l2_coeff, out.grads.U);
  out.penalty += add_weight_penalty(p.V, cfg.reg.l1_coeff, cfg.reg.l2_coeff, out.grads.V);
  out.penalty += add_weight_penalty(p.W, cfg.reg.l1_coeff, cfg.reg.l2_coeff, out.grads.W);
  return out;
}

PairMatrices to_matrices(std::span<const PairSample> samples) {
  PairMatrices out{Matrix::Zero(static_cast<Eigen::Index>(samples.size()), kNgramBits),
                   Matrix::Zero(static_cast<Eigen::Index>(samples.size()), kNgramBits)};
  for (size_t i = 0; i < samples.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (auto b : samples[i].x.ones()) out.x(r, b) = 1.0f;
    for (auto b : samples[i].y.ones()) out.y(r, b) = 1.0f;
  }
  return out;
}

void rescale_filters(GaeParams<float>& p) {
  const Eigen::Index rows = p.U.rows();
  if (rows == 0) return;
  Eigen::VectorXd norms(2 * rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    norms[r] = p.U.row(r).cast<double>().norm();
    norms[rows + r] = p.V.row(r).cast<double>().norm();
  }
  const double target = norms.mean();
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (norms[r] > 0) p.U.row(r) *= static_cast<float>(target / norms[r]);
    if (norms[rows + r] > 0) p.V.row(r) *= static_cast<float>(target / norms[rows + r]);
  }
}

namespace {

// Copies the given rows of `src` into `dst`, and into `noisy` with each
// nonzero entry zeroed with probability `rate`.
void gather_corrupt(const Matrix& src, std::span<const size_t> rows, double rate, Rng& rng, Matrix& dst,
                    Matrix& noisy) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  dst.resize(n, src.cols());
  noisy.resize(n, src.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    dst.row(i) = src.row(static_cast<Eigen::Index>(rows[static_cast<size_t>(i)]));
    for (Eigen::Index c = 0; c < src.cols(); ++c) {
      const float v = dst(i, c);
      noisy(i, c) = (v != 0.0f && rate > 0 && rng.uniform() < rate) ? 0.0f : v;
    }
  }
}

}  // namespace

std::vector<double> train_gae(GaeModel& model, const Matrix& x, const Matrix& y, const GaeConfig& cfg,
                              const EpochCallback& on_epoch) {
  cfg.validate();
  auto& p = model.params;
  p.check_shapes();
  if (x.cols() != p.inputs() || y.cols() != p.inputs() || x.rows() != y.rows()) {
    throw std::invalid_argument("train_gae: data shape does not match the model");
  }
  std::vector<double> history;
  const auto n = static_cast<size_t>(x.rows());
  if (cfg.epochs == 0 || n == 0) return history;

  const Rng base = Rng(cfg.seed).split("gae-train");
  const Matrix* param_ptrs[] = {&p.U, &p.V, &p.W};
  auto opt = OptState<float>::zeros_like(param_ptrs);
  Matrix* params[] = {&p.U, &p.V, &p.W};
  const auto lr = static_cast<float>(cfg.lr);
  const auto mom = static_cast<float>(cfg.momentum);

  Matrix xb, yb, xc, yc;
  for (int e = 0; e < cfg.epochs; ++e) {
    const int64_t epoch = model.epochs_trained;
    Rng rng = base.split(static_cast<uint64_t>(epoch));
    const auto order = rng.permutation(n);
    double total = 0;
    for (size_t start = 0; start < n; start += static_cast<size_t>(cfg.batch)) {
      const size_t len = std::min(static_cast<size_t>(cfg.batch), n - start);
      const std::span<const size_t> rows(order.data() + start, len);
      gather_corrupt(x, rows, cfg.corruption, rng, xb, xc);
      gather_corrupt(y, rows, cfg.corruption, rng, yb, yc);
      auto loss = gae_loss_and_grads<float>(p, xb, yb, xc, yc, cfg);
      if (!std::isfinite(loss.total())) {
        throw NumericError("GAE training diverged: non-finite loss at epoch " + std::to_string(epoch + 1) +
                           " (lr " + std::to_string(cfg.lr) + ")");
      }
      total += loss.reconstruction;
      const Matrix* grads[] = {&loss.grads.U, &loss.grads.V, &loss.grads.W};
      sgd_momentum_step<float>(params, grads, opt, lr, mom);
      if (epoch < cfg.rescale_epochs) rescale_filters(p);
    }
    if (!p.U.allFinite() || !p.V.allFinite() || !p.W.allFinite()) {
      throw NumericError("GAE training produced non-finite weights at epoch " + std::to_string(epoch + 1));
    }
    ++model.epochs_trained;
    history.push_back(total / static_cast<double>(n));
    if (on_epoch) on_epoch(static_cast<int>(epoch + 1), history.back());
  }
  return history;
}

Matrix encode_dataset(const GaeModel& model, const Matrix& x, const Matrix& y) {
  Matrix codes(x.rows(), model.params.mappings());
  constexpr Eigen::Index kChunk = 1024;
  for (Eigen::Index s = 0; s < x.rows(); s += kChunk) {
    const Eigen::Index len = std::min(kChunk, x.rows() - s);
    codes.middleRows(s, len) = gae_map<float>(model.params, x.middleRows(s, len), y.middleRows(s, len));
  }
  return codes;
}

Matrix encode_dataset(const GaeModel& model, std::span<const PairSample> samples) {
  const auto mats = to_matrices(samples);
  return encode_dataset(model, mats.x, mats.y);
}

double gae_reconstruction_ce(const GaeModel& model, const Matrix& x, const Matrix& y) {
  if (x.rows() == 0) return 0.0;
  constexpr Eigen::Index kChunk = 1024;
  constexpr double kClamp = 1e-7;
  double sum = 0;
  auto ce = [&](const Matrix& target, const Matrix& pred) {
    for (Eigen::Index i = 0; i < target.size(); ++i) {
      const double q = std::clamp(static_cast<double>(pred.data()[i]), kClamp, 1.0 - kClamp);
      sum -= target.data()[i] > 0.5f ? std::log(q) : std::log(1.0 - q);
    }
  };
  for (Eigen::Index s = 0; s < x.rows(); s += kChunk) {
    const Eigen::Index len = std::min(kChunk, x.rows() - s);
    const Matrix xs = x.middleRows(s, len);
    const Matrix ys = y.middleRows(s, len);
    const Matrix m = gae_map<float>(model.params, xs, ys);
    ce(xs, gae_reconstruct_x<float>(model.params, m, ys));
    ce(ys, gae_reconstruct_y<float>(model.params, m, xs));
  }
  return sum / static_cast<double>(2 * x.size());
}

void save_gae(std::ostream& out, const GaeModel& model) {
  const auto& p = model.params;
  nlohmann::json h = {{"format", "GAE1"},
                      {"version", 1},
                      {"P", p.inputs()},
                      {"O", p.factors()},
                      {"L", p.mappings()},
                      {"seed", model.seed},
                      {"epochs_trained", model.epochs_trained}};
  const Matrix* arrays[] = {&p.U, &p.V, &p.W};
  write_checkpoint(out, h, arrays);
}

void save_gae(const std::filesystem::path& path, const GaeModel& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  save_gae(out, model);
}

GaeModel load_gae(std::istream& in) {
  CheckpointReader r(in, "GAE1");
  const auto& h = r.header();
  GaeModel model;
  try {
    if (h.at("version").get<int>() != 1) throw DataError("GAE1: unsupported version");
    const auto P = h.at("P").get<Eigen::Index>();
    const auto O = h.at("O").get<Eigen::Index>();
    const auto L = h.at("L").get<Eigen::Index>();
    if (P <= 0 || O <= 0 || L <= 0) throw DataError("GAE1: non-positive dimensions");
    model.seed = h.at("seed").get<uint64_t>();
    model.epochs_trained = h.at("epochs_trained").get<int64_t>();
    model.params.U = r.next(O, P);
    model.params.V = r.next(O, P);
    model.params.W = r.next(L, O);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("GAE1: bad header: ") + e.what());
  }
  r.finish();
  return model;
}

GaeModel load_gae(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  return load_gae(in);
}

template struct GaeParams<float>;
template struct GaeParams<double>;
template Mat<float> gae_map<float>(const GaeParams<float>&, const Mat<float>&, const Mat<float>&);
template Mat<double> gae_map<double>(const GaeParams<double>&, const Mat<double>&, const Mat<double>&);
template Mat<float> gae_reconstruct_x<float>(const GaeParams<float>&, const Mat<float>&, const Mat<float>&);
template Mat<double> gae_reconstruct_x<double>(const GaeParams<double>&, const Mat<double>&, const Mat<double>&);
template Mat<float> gae_reconstruct_y<float>(const GaeParams<float>&, const Mat<float>&, const Mat<float>&);
template Mat<double> gae_reconstruct_y<double>(const GaeParams<double>&, const Mat<double>&, const Mat<double>&);
template GaeLoss<float> gae_loss_and_grads<float>(const GaeParams<float>&, const Mat<float>&, const Mat<float>&,
                                                  const Mat<float>&, const Mat<float>&, const GaeConfig&);
template GaeLoss<double> gae_loss_and_grads<double>(const GaeParams<double>&, const Mat<double>&,
                                                    const Mat<double>&, const Mat<double>&, const Mat<double>&,
                                                    const GaeConfig&);

}  // namespace musgae

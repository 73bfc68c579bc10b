#include "musgae/nn_core.h"

#include <cmath>
#include <stdexcept>
#include <string>

#include "musgae/errors.h"

namespace musgae {

template <typename T>
T sigmoid(T z) {
  if (z >= T(0)) return T(1) / (T(1) + std::exp(-z));
  const T e = std::exp(z);
  return e / (T(1) + e);
}

template <typename T>
void sigmoid_inplace(Mat<T>& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = sigmoid(m.data()[i]);
}

template <typename T>
Mat<T> sigmoid(const Mat<T>& m) {
  Mat<T> out = m;
  sigmoid_inplace(out);
  return out;
}

template <typename T>
T softplus(T z) {
  return std::max(z, T(0)) + std::log1p(std::exp(-std::abs(z)));
}

template <typename T>
Mat<T> softmax_rows(const Mat<T>& m) {
  Mat<T> out(m.rows(), m.cols());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const T mx = m.row(r).maxCoeff();
    T sum = 0;
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      out(r, c) = std::exp(m(r, c) - mx);
      sum += out(r, c);
    }
    out.row(r) /= sum;
  }
  return out;
}

template <typename T>
OptState<T> OptState<T>::zeros_like(std::span<const Mat<T>* const> params) {
  OptState s;
  s.velocity.reserve(params.size());
  for (const auto* p : params) s.velocity.push_back(Mat<T>::Zero(p->rows(), p->cols()));
  return s;
}

template <typename T>
void sgd_momentum_step(std::span<Mat<T>* const> params,
                       std::span<const Mat<T>* const> grads, OptState<T>& state,
                       T lr, T momentum) {
  if (params.size() != grads.size() || params.size() != state.velocity.size()) {
    throw std::invalid_argument("sgd_momentum_step: parameter/gradient/state count mismatch");
  }
  for (size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    const auto& g = *grads[i];
    auto& v = state.velocity[i];
    if (p.rows() != g.rows() || p.cols() != g.cols() || p.rows() != v.rows() ||
        p.cols() != v.cols()) {
      throw std::invalid_argument("sgd_momentum_step: shape mismatch at parameter " +
                                  std::to_string(i));
    }
    v = momentum * v - lr * g;
    p += v;
  }
}

void RegConfig::validate() const {
  if (l1_coeff < 0 || l2_coeff < 0 || lee_coeff < 0) {
    throw UsageError("regularization coefficients must be non-negative");
  }
  if (!(lee_target > 0 && lee_target < 1)) {
    throw UsageError("lee_target must lie in (0, 1)");
  }
}

template <typename T>
T add_weight_penalty(const Mat<T>& w, double l1, double l2, Mat<T>& grad) {
  if (l1 == 0 && l2 == 0) return T(0);
  const T tl1 = static_cast<T>(l1);
  const T tl2 = static_cast<T>(l2);
  T pen = 0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const T v = w.data()[i];
    const T sgn = v > 0 ? T(1) : (v < 0 ? T(-1) : T(0));
    pen += tl1 * std::abs(v) + tl2 * v * v;
    grad.data()[i] += tl1 * sgn + T(2) * tl2 * v;
  }
  return pen;
}

template <typename T>
LeeSparsity<T> lee_sparsity(const Mat<T>& acts, T rho) {
  const auto batch = static_cast<T>(acts.rows());
  LeeSparsity<T> out{T(0), Mat<T>(acts.rows(), acts.cols())};
  for (Eigen::Index j = 0; j < acts.cols(); ++j) {
    const T diff = rho - acts.col(j).mean();
    out.penalty += diff * diff;
    out.grad.col(j).setConstant(T(-2) * diff / batch);
  }
  return out;
}

template <typename T>
Mat<T> dropout_mask(Eigen::Index rows, Eigen::Index cols, double p_drop, Rng& rng) {
  if (!(p_drop >= 0 && p_drop < 1)) throw std::invalid_argument("dropout rate must be in [0,1)");
  Mat<T> mask(rows, cols);
  const T keep = static_cast<T>(1.0 / (1.0 - p_drop));
  if (p_drop == 0) {
    mask.setOnes();
    return mask;
  }
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    mask.data()[i] = rng.uniform() < p_drop ? T(0) : keep;
  }
  return mask;
}

template <typename T>
BatchNorm<T> BatchNorm<T>::identity(Eigen::Index n) {
  BatchNorm bn;
  bn.gamma = Mat<T>::Ones(1, n);
  bn.beta = Mat<T>::Zero(1, n);
  bn.running_mean = Mat<T>::Zero(1, n);
  bn.running_var = Mat<T>::Ones(1, n);
  return bn;
}

template <typename T>
Mat<T> BatchNorm<T>::forward(const Mat<T>& x, bool training, Cache* cache) {
  const Eigen::Index n = x.cols();
  const T eps = static_cast<T>(kEps);
  Mat<T> mean(1, n), var(1, n);
  if (training) {
    if (x.rows() < 2) throw std::invalid_argument("batch norm needs a batch of at least 2 in training mode");
    mean = x.colwise().mean();
    var = (x.rowwise() - mean.row(0)).array().square().colwise().mean();
    const T mom = static_cast<T>(kMomentum);
    running_mean = mom * running_mean + (T(1) - mom) * mean;
    running_var = mom * running_var + (T(1) - mom) * var;
  } else {
    mean = running_mean;
    var = running_var;
  }
  Mat<T> inv_std = (var.array() + eps).rsqrt().matrix();
  Mat<T> x_hat = ((x.rowwise() - mean.row(0)).array().rowwise() * inv_std.row(0).array()).matrix();
  Mat<T> y = ((x_hat.array().rowwise() * gamma.row(0).array()).rowwise() + beta.row(0).array()).matrix();
  if (cache) {
    cache->x_hat = std::move(x_hat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

template <typename T>
typename BatchNorm<T>::Grads BatchNorm<T>::backward(const Mat<T>& dy, const Cache& cache) const {
  const auto m = static_cast<T>(dy.rows());
  Grads g;
  g.dbeta = dy.colwise().sum();
  g.dgamma = (dy.array() * cache.x_hat.array()).colwise().sum().matrix();
  // dx = gamma * inv_std / m * (m * dy - sum(dy) - x_hat * sum(dy * x_hat))
  Mat<T> dx_hat = (dy.array().rowwise() * gamma.row(0).array()).matrix();
  Mat<T> sum_dxh = dx_hat.colwise().sum();
  Mat<T> sum_dxh_xh = (dx_hat.array() * cache.x_hat.array()).colwise().sum().matrix();
  Mat<T> inner = (m * dx_hat.array()).rowwise() - sum_dxh.row(0).array();
  inner.array() -= cache.x_hat.array().rowwise() * sum_dxh_xh.row(0).array();
  g.dx = (inner.array().rowwise() * (cache.inv_std.row(0).array() / m)).matrix();
  return g;
}

#define MUSGAE_INSTANTIATE(T)                                                                    \
  template T sigmoid<T>(T);                                                                      \
  template Mat<T> sigmoid<T>(const Mat<T>&);                                                     \
  template void sigmoid_inplace<T>(Mat<T>&);                                                     \
  template T softplus<T>(T);                                                                     \
  template Mat<T> softmax_rows<T>(const Mat<T>&);                                                \
  template struct OptState<T>;                                                                   \
  template void sgd_momentum_step<T>(std::span<Mat<T>* const>, std::span<const Mat<T>* const>,   \
                                     OptState<T>&, T, T);                                        \
  template T add_weight_penalty<T>(const Mat<T>&, double, double, Mat<T>&);                      \
  template LeeSparsity<T> lee_sparsity<T>(const Mat<T>&, T);                                     \
  template Mat<T> dropout_mask<T>(Eigen::Index, Eigen::Index, double, Rng&);                     \
  template struct BatchNorm<T>;

MUSGAE_INSTANTIATE(float)
MUSGAE_INSTANTIATE(double)

#undef MUSGAE_INSTANTIATE

}  // namespace musgae

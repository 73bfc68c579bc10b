// Dense numerics and neural primitives shared by the GAE, the RBM stack and
// the probe classifier.
//
// Matrices are row-major Eigen matrices. Production code runs in float;
// every routine with a hand-derived gradient is also instantiated for double
// so that finite-difference checks can run at 64-bit precision.

#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

#include "musgae/rng.h"

namespace musgae {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

using Matrix = Mat<float>;
using MatrixD = Mat<double>;
using Vector = Vec<float>;

template <typename T>
T sigmoid(T z);

template <typename T>
Mat<T> sigmoid(const Mat<T>& m);

template <typename T>
void sigmoid_inplace(Mat<T>& m);

// log(1 + e^z) without overflow.
template <typename T>
T softplus(T z);

// Row-wise softmax with the row maximum subtracted first.
template <typename T>
Mat<T> softmax_rows(const Mat<T>& m);

template <typename T>
bool all_finite(const Mat<T>& m) {
  return m.allFinite();
}

// Momentum buffers, one per parameter matrix.
template <typename T>
struct OptState {
  std::vector<Mat<T>> velocity;

  static OptState zeros_like(std::span<const Mat<T>* const> params);
};

// v <- momentum * v - lr * g;  theta <- theta + v.
// Throws std::invalid_argument when shapes disagree.
template <typename T>
void sgd_momentum_step(std::span<Mat<T>* const> params,
                       std::span<const Mat<T>* const> grads, OptState<T>& state,
                       T lr, T momentum);

struct RegConfig {
  double l1_coeff = 1e-4;
  double l2_coeff = 1e-4;
  double lee_target = 0.05;  // rho
  double lee_coeff = 1e-3;

  void validate() const;
};

// Adds l1 * sign(w) + 2 * l2 * w to `grad` and returns l1*|w|_1 + l2*|w|_2^2.
template <typename T>
T add_weight_penalty(const Mat<T>& w, double l1, double l2, Mat<T>& grad);

template <typename T>
struct LeeSparsity {
  T penalty;
  Mat<T> grad;  // d penalty / d acts, same shape as acts
};

// penalty = sum_j (rho - mean_b acts(b, j))^2 over a batch x units matrix.
template <typename T>
LeeSparsity<T> lee_sparsity(const Mat<T>& acts, T rho);

// Inverted dropout: 0 with probability p_drop, else 1 / (1 - p_drop).
template <typename T>
Mat<T> dropout_mask(Eigen::Index rows, Eigen::Index cols, double p_drop, Rng& rng);

template <typename T>
struct BatchNorm {
  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.9;

  Mat<T> gamma;         // 1 x n
  Mat<T> beta;          // 1 x n
  Mat<T> running_mean;  // 1 x n
  Mat<T> running_var;   // 1 x n

  static BatchNorm identity(Eigen::Index n);

  struct Cache {
    Mat<T> x_hat;
    Mat<T> inv_std;  // 1 x n
  };

  // Training mode normalizes with batch statistics (batch >= 2, otherwise
  // std::invalid_argument) and folds them into the running averages;
  // inference mode uses the running averages. `cache` may be null.
  Mat<T> forward(const Mat<T>& x, bool training, Cache* cache);

  // Gradients of a training-mode forward pass.
  struct Grads {
    Mat<T> dx;
    Mat<T> dgamma;
    Mat<T> dbeta;
  };
  Grads backward(const Mat<T>& dy, const Cache& cache) const;
};

}  // namespace musgae

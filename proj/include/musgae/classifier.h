// Probe classifier: in -> 512 -> 256 -> C feed-forward network. Each hidden
// layer is affine -> batch norm -> ReLU -> dropout; the output layer is
// affine -> softmax.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "musgae/nn_core.h"
#include "musgae/rng.h"

namespace musgae {

template <typename T>
struct FfnnParams {
  Mat<T> W1, b1;  // in x h1, 1 x h1
  Mat<T> W2, b2;  // h1 x h2, 1 x h2
  Mat<T> W3, b3;  // h2 x C,  1 x C
  BatchNorm<T> bn1, bn2;

  Eigen::Index inputs() const { return W1.rows(); }
  Eigen::Index classes() const { return W3.cols(); }
};

struct ClfConfig {
  double lr = 0.005;
  double momentum = 0.93;
  int epochs = 300;
  int batch = 100;
  double dropout = 0.5;  // hidden activations only
  double l2_coeff = 1e-4;
  double lee_target = 0.05;
  double lee_coeff = 1e-3;
  bool lee_hidden1 = true;
  bool lee_hidden2 = true;
  int hidden1 = 512;
  int hidden2 = 256;
  uint64_t seed = 1;

  void validate() const;
};

struct FfnnModel {
  FfnnParams<float> params;
  uint64_t seed = 0;
};

// He-normal weights, zero biases, identity batch norm.
FfnnModel init_ffnn(Eigen::Index inputs, Eigen::Index hidden1, Eigen::Index hidden2, Eigen::Index classes,
                    uint64_t seed);

// Class probabilities, n x C. Training mode uses batch statistics (updating
// the running averages) and draws dropout masks from `rng`; inference mode
// is a pure function of the parameters and the input.
template <typename T>
Mat<T> ffnn_forward(FfnnParams<T>& p, const Mat<T>& x, bool training, Rng* rng, double dropout);
Matrix forward(const FfnnModel& model, const Matrix& codes);

template <typename T>
struct FfnnLoss {
  T loss = 0;  // mean cross-entropy + L2 + Lee
  T cross_entropy = 0;
  Mat<T> probs;  // n x C, training-mode forward pass
  FfnnParams<T> grads;  // bn*.gamma / bn*.beta hold their gradients
};

// Training-mode loss and gradients with explicit inverted-dropout masks
// (n x h1 and n x h2; pass all-ones for no dropout).
template <typename T>
FfnnLoss<T> ffnn_loss_and_grads(FfnnParams<T>& p, const Mat<T>& x, std::span<const int> labels, const Mat<T>& mask1,
                                const Mat<T>& mask2, const ClfConfig& cfg);

struct ClfEpoch {
  double loss = 0;
  double train_error = 0;  // percent, from the training-mode forward passes
};

using ClfEpochCallback = std::function<void(int epoch, const ClfEpoch&)>;

// Minibatch SGD with momentum. A trailing batch of one example is skipped
// (batch norm needs two). Throws NumericError on a non-finite loss.
struct ClfTrainResult {
  FfnnModel model;
  std::vector<ClfEpoch> history;
};
ClfTrainResult train_classifier(const Matrix& codes, std::span<const int> labels, int classes, const ClfConfig& cfg,
                                const ClfEpochCallback& on_epoch = {});

// Argmax per row; ties resolve to the lowest index.
std::vector<int> argmax_rows(const Matrix& probs);
std::vector<int> predict(const FfnnModel& model, const Matrix& codes);

// 100 * (# wrong) / n; 0 for empty input.
double misclassification_rate(std::span<const int> pred, std::span<const int> truth);

// FFN1: header {"format":"FFN1","version":1,"sizes":[in,h1,h2,C],"seed"}
// then W1, b1, gamma1, beta1, mean1, var1, W2, b2, gamma2, beta2, mean2,
// var2, W3, b3 as float32.
void save_ffnn(std::ostream& out, const FfnnModel& model);
void save_ffnn(const std::filesystem::path& path, const FfnnModel& model);
FfnnModel load_ffnn(std::istream& in);
FfnnModel load_ffnn(const std::filesystem::path& path);

}  // namespace musgae

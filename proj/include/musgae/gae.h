// Gated autoencoder over n-gram pairs.
//
//   m  = sigmoid(W ((U x) * (V y)))            mapping code, length L
//   x~ = sigmoid(U^T ((W^T m) * (V y)))        reconstruction of x from y
//   y~ = sigmoid(V^T ((W^T m) * (U x)))        reconstruction of y from x
//   loss = |x - x~|^2 + |y - y~|^2
//
// U and V are O x P filter banks, W is L x O; '*' is the elementwise
// product. All batched routines take one example per row.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "musgae/nn_core.h"
#include "musgae/pianoroll.h"
#include "musgae/transforms.h"

namespace musgae {

template <typename T>
struct GaeParams {
  Mat<T> U;  // O x P
  Mat<T> V;  // O x P
  Mat<T> W;  // L x O

  Eigen::Index inputs() const { return U.cols(); }
  Eigen::Index factors() const { return U.rows(); }
  Eigen::Index mappings() const { return W.rows(); }

  // Throws std::invalid_argument on inconsistent shapes.
  void check_shapes() const;
};

struct GaeConfig {
  double lr = 3e-5;
  double momentum = 0.93;
  int epochs = 1000;
  int batch = 500;
  double corruption = 0.35;
  int rescale_epochs = 100;
  RegConfig reg;
  bool lee_on_mappings = true;
  bool lee_on_factors = true;
  // Feed the corrupted inputs to the mapping units as well as to the
  // conditioning branches.
  bool corrupt_mapping_inputs = true;
  uint64_t seed = 1;

  void validate() const;
};

struct GaeModel {
  GaeParams<float> params;
  uint64_t seed = 0;
  int64_t epochs_trained = 0;
};

// U, V ~ 0.1 * U[-1/sqrt(P), 1/sqrt(P)], W ~ U[-1/sqrt(O), 1/sqrt(O)].
GaeModel init_gae(Eigen::Index inputs, Eigen::Index factors, Eigen::Index mappings, uint64_t seed);

// Batched mapping codes, n x L.
template <typename T>
Mat<T> gae_map(const GaeParams<T>& p, const Mat<T>& x, const Mat<T>& y);

// Batched reconstructions given mapping codes (n x L) and the conditioning
// input (n x P).
template <typename T>
Mat<T> gae_reconstruct_x(const GaeParams<T>& p, const Mat<T>& m, const Mat<T>& y);
template <typename T>
Mat<T> gae_reconstruct_y(const GaeParams<T>& p, const Mat<T>& m, const Mat<T>& x);

// Single-pair forms over bit vectors. Length mismatches throw
// std::invalid_argument.
Vector map(const GaeModel& model, const BitVec& x, const BitVec& y);
Vector reconstruct_x(const GaeModel& model, const Vector& m, const BitVec& y);
Vector reconstruct_y(const GaeModel& model, const Vector& m, const BitVec& x);

template <typename T>
struct GaeLoss {
  T reconstruction = 0;  // summed over the batch
  T penalty = 0;         // L1/L2 + Lee terms
  GaeParams<T> grads;

  T total() const { return reconstruction + penalty; }
};

// Objective and gradients for one minibatch. The mapping code is computed
// from the corrupted inputs (or the clean ones when
// cfg.corrupt_mapping_inputs is off), the reconstructions condition on the
// corrupted inputs, and the targets are the clean x and y. Lee sparsity is
// applied to the mapping units and to the raw factor products.
template <typename T>
GaeLoss<T> gae_loss_and_grads(const GaeParams<T>& p, const Mat<T>& x, const Mat<T>& y, const Mat<T>& x_corrupt,
                              const Mat<T>& y_corrupt, const GaeConfig& cfg);

struct PairMatrices {
  Matrix x;  // n x 520
  Matrix y;  // n x 520
};
PairMatrices to_matrices(std::span<const PairSample> samples);

using EpochCallback = std::function<void(int epoch, double loss)>;

// Minibatch SGD with momentum on the denoising objective. Fresh zero-masks
// (each set bit dropped with probability cfg.corruption, independently for x
// and y) are drawn per example per epoch. For the first cfg.rescale_epochs
// epochs every row of U and V is rescaled after each update to the mean row
// norm over both banks. Returns the mean per-example reconstruction loss of
// each epoch. Throws NumericError on a non-finite loss.
std::vector<double> train_gae(GaeModel& model, const Matrix& x, const Matrix& y, const GaeConfig& cfg,
                              const EpochCallback& on_epoch = {});

// Rescales all rows of U and V to their common mean L2 norm.
void rescale_filters(GaeParams<float>& p);

// Mapping codes of clean pairs, n x L.
Matrix encode_dataset(const GaeModel& model, const Matrix& x, const Matrix& y);
Matrix encode_dataset(const GaeModel& model, std::span<const PairSample> samples);

// Mean per-unit binary cross-entropy of x~ and y~ against the clean pair,
// with m inferred from the clean pair and predictions clamped to
// [1e-7, 1 - 1e-7].
double gae_reconstruction_ce(const GaeModel& model, const Matrix& x, const Matrix& y);

// GAE1: header {"format":"GAE1","version":1,"P","O","L","seed","epochs_trained"}
// then U, V, W as float32.
void save_gae(std::ostream& out, const GaeModel& model);
void save_gae(const std::filesystem::path& path, const GaeModel& model);
GaeModel load_gae(std::istream& in);
GaeModel load_gae(const std::filesystem::path& path);

}  // namespace musgae

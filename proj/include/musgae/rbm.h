// Baseline: two greedily stacked binary RBMs over concatenated 1040-bit
// pairs, trained with persistent contrastive divergence (PCD-1), Goh
// sparsity targets and a reset of over-active hidden units.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <vector>

#include "musgae/nn_core.h"
#include "musgae/rng.h"

namespace musgae {

template <typename T>
struct RbmLayerT {
  Mat<T> W;  // q x r (hidden x visible)
  Mat<T> a;  // 1 x r visible bias
  Mat<T> b;  // 1 x q hidden bias

  Eigen::Index visible() const { return W.cols(); }
  Eigen::Index hidden() const { return W.rows(); }
};
using RbmLayer = RbmLayerT<float>;

// W ~ N(0, 0.01^2), biases zero.
RbmLayer init_rbm_layer(Eigen::Index visible, Eigen::Index hidden, Rng& rng);

// F(v) = -a.v - sum_i softplus(b_i + W_i v) for one visible row vector.
template <typename T>
T free_energy(const RbmLayerT<T>& layer, const Mat<T>& v);

// sigmoid(b + v W^T) and sigmoid(a + h W), one example per row.
template <typename T>
Mat<T> h_given_v(const RbmLayerT<T>& layer, const Mat<T>& v);
template <typename T>
Mat<T> v_given_h(const RbmLayerT<T>& layer, const Mat<T>& h);

template <typename T>
Mat<T> sample_bernoulli(const Mat<T>& probs, Rng& rng);

struct RbmConfig {
  double lr = 3e-3;  // annealed linearly to 0 over the run
  int epochs = 300;
  int batch = 100;
  double reset_threshold = 0.85;
  bool goh_sparsity = true;
  double goh_mu = 0.08;
  double goh_phi = 0.75;
  double l1_coeff = 1e-4;
  double l2_coeff = 1e-4;
  // Rows of the training data used for the per-epoch reconstruction CE.
  int history_rows = 1000;
  uint64_t seed = 1;

  void validate() const;
};

// Learning rate used during 1-based epoch e of `epochs`: lr0 * (1 - e / epochs).
double annealed_lr(double lr0, int epoch, int epochs);

struct PcdState {
  Matrix chains;  // chains x visible, binary
};

// Goh et al. (2010) sparsity/selectivity targets. Activations are ranked
// within each hidden unit across the batch (selectivity) and within each
// example across units (sparsity); a rank fraction u in (0, 1) maps to
// u^(1/mu - 1), whose mean over uniform ranks is mu. The two target
// matrices are averaged and mixed into the activations:
//   h' = (1 - phi) * h + phi * (t_selectivity + t_sparsity) / 2.
Matrix goh_targets(const Matrix& h, double mu, double phi);

// One PCD-1 update on a batch (rows = number of chains). The positive phase
// uses mean-field hidden probabilities (Goh-adjusted if enabled); the
// negative phase advances every chain one Gibbs step. Parameters move by
// gradient ascent with step `lr`, including L1/L2 decay.
void pcd_update(RbmLayer& layer, const Matrix& batch, PcdState& state, double lr, const RbmConfig& cfg, Rng& rng);

// Mean hidden activation probability over all rows of `data`, 1 x q.
Matrix mean_activity(const RbmLayer& layer, const Matrix& data);

// Re-randomizes (N(0, 0.01^2) weights, zero bias) every hidden unit whose
// mean activation over `data` exceeds `threshold`. Returns the reset units.
std::vector<Eigen::Index> reset_overactive(RbmLayer& layer, const Matrix& data, double threshold, Rng& rng);

struct StackedRbm {
  RbmLayer layer1;  // 1040 -> q1
  RbmLayer layer2;  // q1 -> q2
  uint64_t seed = 0;
};

struct RbmEpoch {
  double layer1_ce = 0;
  double layer2_ce = 0;
};

using RbmEpochCallback = std::function<void(int layer, int epoch, double ce)>;

// Greedy layer-wise training: layer 1 on the data, then layer 2 on layer
// 1's mean-field hidden probabilities. The visible bias of each layer starts
// at the log-odds of its data means. reset_overactive runs once per epoch
// after the last batch. Row e of the history holds both layers'
// reconstruction CE after epoch e + 1. Throws NumericError on non-finite
// parameters.
struct RbmTrainResult {
  StackedRbm stack;
  std::vector<RbmEpoch> history;
};
RbmTrainResult train_stack(const Matrix& data, Eigen::Index hidden1, Eigen::Index hidden2, const RbmConfig& cfg,
                           const RbmEpochCallback& on_epoch = {});

// Further training of an existing stack (used to resume from a checkpoint;
// the learning-rate schedule restarts). With fresh = false the visible
// biases are kept instead of being set from the data.
RbmTrainResult continue_stack(StackedRbm stack, const Matrix& data, const RbmConfig& cfg, bool fresh,
                              const RbmEpochCallback& on_epoch = {});

// Randomly initialized stack (what train_stack returns for zero epochs).
StackedRbm init_stack(Eigen::Index visible, Eigen::Index hidden1, Eigen::Index hidden2, uint64_t seed);

// Mean-field codes through both layers, n x q2.
Matrix encode(const StackedRbm& stack, const Matrix& data);

// Mean-field up through both layers and back down, n x r.
Matrix reconstruct(const StackedRbm& stack, const Matrix& data);
Matrix reconstruct(const RbmLayer& layer, const Matrix& data);

// Mean over units and rows of -[x log q + (1 - x) log(1 - q)], q clamped to
// [1e-7, 1 - 1e-7].
double cross_entropy(const Matrix& target, const Matrix& pred);
double reconstruct_ce(const StackedRbm& stack, const Matrix& data);
double reconstruct_ce(const RbmLayer& layer, const Matrix& data);

// RBM1: header {"format":"RBM1","version":1,"sizes":[r,q1,q2],"seed"} then
// W1, a1, b1, W2, a2, b2 as float32.
void save_rbm(std::ostream& out, const StackedRbm& stack);
void save_rbm(const std::filesystem::path& path, const StackedRbm& stack);
StackedRbm load_rbm(std::istream& in);
StackedRbm load_rbm(const std::filesystem::path& path);

}  // namespace musgae

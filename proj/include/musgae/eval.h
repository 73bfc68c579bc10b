// Metrics and reports: confusion matrices, distance histograms of confused
// shifts, PCA of codes, and the mis-classification / cross-entropy tables.

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "musgae/nn_core.h"
#include "musgae/transforms.h"

namespace musgae {

// Rows are targets, columns predictions.
struct ConfusionMatrix {
  int classes = 0;
  std::vector<int64_t> counts;  // row-major classes x classes
  std::vector<std::string> labels;

  int64_t at(int target, int pred) const { return counts[static_cast<size_t>(target * classes + pred)]; }
  int64_t total() const;
  int64_t trace() const;
};

// Labels default to "0".."C-1". Throws std::invalid_argument on a label
// outside [0, C) or mismatched lengths.
ConfusionMatrix confusion(std::span<const int> pred, std::span<const int> truth, int classes,
                          std::vector<std::string> labels = {});
ConfusionMatrix confusion(std::span<const int> pred, std::span<const int> truth, TransformType type);

// 100 * (1 - trace / total); 0 for an empty matrix.
double misclassification(const ConfusionMatrix& cm);

// Histogram of |pred - target| over all entries. For TransD labels this is
// the distance in scale steps between the predicted and the true shift.
std::map<int, int64_t> resultant_interval_summary(const ConfusionMatrix& cm);

// 100 * (1 - 1 / C).
double random_baseline(int classes);

// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
// Eigenvalues descending; eigenvectors are the rows of `vectors`.
struct SymmetricEigen {
  std::vector<double> values;
  MatrixD vectors;
};
SymmetricEigen jacobi_eigen(const MatrixD& sym, int max_sweeps = 100);

struct PcaResult {
  MatrixD components;  // k x d, orthonormal rows
  MatrixD projections;  // n x k, of the mean-centered data
  std::vector<double> variances;  // k, descending (sample covariance, n - 1)
  MatrixD mean;  // 1 x d
};

// Each component's largest-magnitude entry is made positive. Throws
// std::invalid_argument if n < 2 or k is not in [1, d].
PcaResult pca(const MatrixD& data, int k);
PcaResult pca(const Matrix& data, int k);

// One line of a misclassification or cross-entropy table: a metric for one
// model and size across the four transformation types (columns TransC,
// TransD, Tempo, Retro; missing cells are empty).
struct ReportRow {
  std::string metric;  // "misclassification" or "cross_entropy"
  std::string model;   // "GAE", "RBM", "Random", ...
  std::string size;    // "128/64", ...
  std::array<std::optional<double>, 4> values;

  bool operator==(const ReportRow&) const = default;
};

struct EvalReport {
  std::vector<ReportRow> rows;
  std::vector<std::pair<TransformType, ConfusionMatrix>> confusions;

  // Sets one cell, creating the row (appended) if needed.
  void set(const std::string& metric, const std::string& model, const std::string& size, TransformType type,
           double value);
  // Misclassification row "Random" with 100 * (1 - 1/C) for every type.
  void add_random_baseline();
};

enum class ReportFormat { Text, Csv };

// CSV: header "metric,model,size,TransC,TransD,Tempo,Retro", one line per
// row in order, numbers in shortest round-trip form. Text: fixed-width
// tables with two decimals (four for cross-entropy), followed by the
// confusion matrices and their distance histograms.
std::string emit_report(const EvalReport& report, ReportFormat format);

// Inverse of the CSV form (rows only). Throws DataError on malformed input.
EvalReport parse_report_csv(const std::string& csv);

// "target\pred,<labels...>" then one row per target.
std::string confusion_csv(const ConfusionMatrix& cm);

// "class,pc1,...,pck" per sample, then the per-class centroids are emitted
// separately as "class,count,pc1,...,pck".
std::string pca_projections_csv(const PcaResult& r, std::span<const int> labels,
                                std::span<const std::string> class_names);
std::string pca_centroids_csv(const PcaResult& r, std::span<const int> labels,
                              std::span<const std::string> class_names);

// Shortest decimal string that parses back to exactly `v`.
std::string format_double(double v);

}  // namespace musgae
